//! Post-consolidation evaluation of a cluster.
//!
//! Applies a migration map to replica loads (the live placement is never
//! mutated) and reports machine counts, power, wastage and the full
//! migration cost breakdown in base units (MB, seconds, joules, watts).
//! Unit conversions for presentation live in the harness.

use serde::{Deserialize, Serialize};

use crate::context::ClusterContext;
use crate::error::{Error, Result};
use crate::model::{
    objective_value, power_from_cpu_fraction, wastage_from_fractions, MigrationMap, ResourceVector,
};
use crate::overhead::{MigrationNetwork, OverheadReport};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport<S> {
    pub cluster_id: usize,
    pub n_vms: usize,
    /// Machines hosting at least one VM before consolidation.
    pub active_before: usize,
    /// Machines receiving at least one VM under the map.
    pub active_after: usize,
    pub released: usize,
    pub migrations: usize,
    /// Summed power draw of active machines after the map, watts.
    pub power_w: S,
    /// Summed wastage of active machines after the map.
    pub wastage: S,
    pub overhead: OverheadReport<S>,
    pub objective: S,
}

/// Scores a complete, valid map. Invalid maps are rejected with the full
/// violation list.
pub fn evaluate<S: Scalar, N: MigrationNetwork<S>>(
    ctx: &ClusterContext<'_, S, N>,
    mm: &MigrationMap,
) -> Result<ClusterReport<S>> {
    let violations = ctx.validate(mm);
    if !violations.is_empty() {
        return Err(Error::InvalidMap(violations));
    }

    let mut loads = vec![ResourceVector::<S>::zero(); ctx.n_pms()];
    let mut occupied = vec![false; ctx.n_pms()];
    for (vm, pm) in mm.iter() {
        let vi = ctx.local_vm(vm).expect("validated");
        let pi = ctx.local_pm(pm).expect("validated");
        loads[pi].add_assign(&ctx.vm(vi).demand);
        occupied[pi] = true;
    }

    let mut power_w = S::zero();
    let mut wastage = S::zero();
    for pi in 0..ctx.n_pms() {
        if !occupied[pi] {
            continue;
        }
        let cap = ctx.capacity(pi);
        let fractions = loads[pi].fraction_of(cap)?;
        power_w += power_from_cpu_fraction(fractions[0]);
        wastage += wastage_from_fractions(fractions)?;
    }

    let overhead = ctx.overhead_of(mm)?;
    let released = ctx.released(mm);
    Ok(ClusterReport {
        cluster_id: ctx.cluster().id,
        n_vms: ctx.n_vms(),
        active_before: ctx.pm_ids().iter().filter(|&&pm| ctx.pm(ctx.local_pm(pm).unwrap()).is_active()).count(),
        active_after: occupied.iter().filter(|&&o| o).count(),
        released,
        migrations: ctx.migrations_of(mm),
        power_w,
        wastage,
        overhead,
        objective: objective_value(released, overhead.overhead, ctx.objective_params()),
    })
}
