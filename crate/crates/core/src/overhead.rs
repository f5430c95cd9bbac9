//! Live-migration cost estimation.
//!
//! A migration is simulated as iterative pre-copy: the first round transfers
//! the whole memory image, each later round re-sends the pages dirtied while
//! the previous round was in flight, and the loop ends with a stop-and-copy
//! round once the remaining dirty volume is small enough (or stops shrinking,
//! or the round budget runs out). The writable working set kept hot by the
//! guest is modelled with a linear regression on round time and dirty rate
//! and subtracted from each round's transfer.
//!
//! Out of the raw per-migration factors (data, time, downtime, network cost)
//! the module builds a unified overhead in `[0, 1]` by normalizing each
//! factor against the worst case observed across the cluster, plus energy and
//! SLA-violation costs, and sums all of them over a migration map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MigrationMap, PmId, VirtualMachine, VmId};
use crate::scalar::{real, Scalar};

/// Bandwidth and distance oracle used by the estimator.
///
/// Ids passed in must be valid machine ids of the modelled data center;
/// implementations may panic on unknown ids.
pub trait MigrationNetwork<S: Scalar> {
    /// Available migration bandwidth from `src` to `dst`, MB/s.
    fn bandwidth_mb_s(&self, src: PmId, dst: PmId) -> S;

    /// Network distance from `src` to `dst`; zero when `src == dst`.
    fn distance(&self, src: PmId, dst: PmId) -> S;
}

/// Degenerate network with one bandwidth and one distance for every pair.
/// Handy for tests and calibration runs.
#[derive(Clone, Copy, Debug)]
pub struct UniformNetwork<S> {
    pub bandwidth_mb_s: S,
    pub distance: S,
}

impl<S: Scalar> MigrationNetwork<S> for UniformNetwork<S> {
    fn bandwidth_mb_s(&self, _src: PmId, _dst: PmId) -> S {
        self.bandwidth_mb_s
    }

    fn distance(&self, src: PmId, dst: PmId) -> S {
        if src == dst {
            S::zero()
        } else {
            self.distance
        }
    }
}

/// Parameters of the migration cost model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MigrationConfig<S> {
    /// Remaining dirty volume below which stop-and-copy starts, MB.
    pub dirty_threshold_mb: S,
    /// Pre-copy rounds allowed before stop-and-copy is forced.
    pub max_rounds: u32,
    /// Writable-working-set regression: coefficient on round time.
    pub wws_time_coeff: S,
    /// Writable-working-set regression: coefficient on dirty rate.
    pub wws_dirty_coeff: S,
    /// Writable-working-set regression: intercept.
    pub wws_intercept: S,
    /// Time to resume the VM on the destination, seconds.
    pub resume_time_s: S,
    /// Unified-overhead weight of migrated data.
    pub weight_data: S,
    /// Unified-overhead weight of migration time.
    pub weight_time: S,
    /// Unified-overhead weight of downtime.
    pub weight_downtime: S,
    /// Unified-overhead weight of network cost.
    pub weight_network: S,
    /// Migration energy per migrated MB, joules.
    pub energy_per_mb: S,
    /// Fixed energy per migration, joules.
    pub energy_base_j: S,
    /// Fraction of CPU performance lost while migrating.
    pub sla_degradation: S,
}

impl<S: Scalar> Default for MigrationConfig<S> {
    fn default() -> Self {
        Self {
            dirty_threshold_mb: real(200.0),
            max_rounds: 20,
            wws_time_coeff: real(-0.0463),
            wws_dirty_coeff: real(-0.0001),
            wws_intercept: real(0.3586),
            resume_time_s: real(0.020),
            weight_data: real(0.25),
            weight_time: real(0.25),
            weight_downtime: real(0.25),
            weight_network: real(0.25),
            energy_per_mb: real(0.512),
            energy_base_j: real(20.165),
            sla_degradation: real(0.1),
        }
    }
}

impl<S: Scalar> MigrationConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dirty_threshold_mb > S::zero()) || !self.dirty_threshold_mb.is_finite() {
            return Err(Error::Config("dirty threshold must be positive".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("at least one pre-copy round is required".into()));
        }
        if !(self.resume_time_s >= S::zero()) || !self.resume_time_s.is_finite() {
            return Err(Error::Config("resume time must be non-negative".into()));
        }
        for (name, w) in [
            ("weight_data", self.weight_data),
            ("weight_time", self.weight_time),
            ("weight_downtime", self.weight_downtime),
            ("weight_network", self.weight_network),
        ] {
            if !(w >= S::zero() && w <= S::one()) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        let sum: S = self.weight_data + self.weight_time + self.weight_downtime + self.weight_network;
        if (sum - S::one()).abs() > real(1e-9) {
            return Err(Error::Config(format!("overhead weights must sum to 1, got {sum}")));
        }
        if !(self.energy_per_mb >= S::zero()) || !(self.energy_base_j >= S::zero()) {
            return Err(Error::Config("energy coefficients must be non-negative".into()));
        }
        if !(self.sla_degradation >= S::zero() && self.sla_degradation <= S::one()) {
            return Err(Error::Config("sla_degradation must lie in [0, 1]".into()));
        }
        for (name, c) in [
            ("wws_time_coeff", self.wws_time_coeff),
            ("wws_dirty_coeff", self.wws_dirty_coeff),
            ("wws_intercept", self.wws_intercept),
        ] {
            if !c.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Raw cost factors of one migration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MigrationEstimate<S> {
    /// Total data moved over the network, MB.
    pub data_mb: S,
    /// Total transfer time across all rounds, seconds.
    pub time_s: S,
    /// Service downtime (stop-and-copy plus resume), seconds.
    pub downtime_s: S,
    /// Data volume weighted by network distance.
    pub network_cost: S,
}

impl<S: Scalar> MigrationEstimate<S> {
    pub fn zero() -> Self {
        Self {
            data_mb: S::zero(),
            time_s: S::zero(),
            downtime_s: S::zero(),
            network_cost: S::zero(),
        }
    }
}

/// Simulates the pre-copy migration of `vm` to `dst`.
///
/// Moving a VM onto its current host costs nothing. The loop is guaranteed to
/// halt: at most `max_rounds + 1` pre-copy rounds run before stop-and-copy.
pub fn estimate_migration<S: Scalar, N: MigrationNetwork<S>>(
    vm: &VirtualMachine<S>,
    dst: PmId,
    net: &N,
    cfg: &MigrationConfig<S>,
) -> Result<MigrationEstimate<S>> {
    if vm.host == dst {
        return Ok(MigrationEstimate::zero());
    }
    let ba = net.bandwidth_mb_s(vm.host, dst);
    if !(ba > S::zero()) || !ba.is_finite() {
        return Err(Error::Network(format!(
            "non-positive bandwidth {ba} between PM {} and PM {dst}",
            vm.host
        )));
    }
    let dr = vm.dirty_rate;
    if !(dr >= S::zero()) || !dr.is_finite() {
        return Err(Error::Model(format!("VM {} has invalid dirty rate {dr}", vm.id)));
    }
    if !(vm.demand.mem >= S::zero()) || !vm.demand.mem.is_finite() {
        return Err(Error::Model(format!("VM {} has invalid memory demand", vm.id)));
    }

    let mut dv = vm.demand.mem;
    let mut data = S::zero();
    let mut time = S::zero();
    let mut downtime = S::zero();
    for round in 0..=cfg.max_rounds {
        let t = dv / ba;
        data += dv;
        time += t;
        let kappa = cfg.wws_time_coeff * t + cfg.wws_dirty_coeff * dr + cfg.wws_intercept;
        let wws = kappa * t * dr;
        let dv_next = (t * dr - wws).max(S::zero());
        // Stop-and-copy once the residual is small, stops shrinking, or the
        // round budget is exhausted.
        if round == cfg.max_rounds || dv_next <= cfg.dirty_threshold_mb || dv_next > dv {
            let final_dv = t * dr;
            let final_t = final_dv / ba;
            data += final_dv;
            time += final_t;
            downtime = final_t + cfg.resume_time_s;
            break;
        }
        dv = dv_next;
    }

    let distance = net.distance(vm.host, dst);
    if !(distance >= S::zero()) || !distance.is_finite() {
        return Err(Error::Network(format!(
            "invalid distance {distance} between PM {} and PM {dst}",
            vm.host
        )));
    }
    Ok(MigrationEstimate { data_mb: data, time_s: time, downtime_s: downtime, network_cost: data * distance })
}

/// Per-factor normalization caps: the worst raw factor values any single
/// cross-machine migration in the cluster can produce.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCaps<S> {
    pub data_mb: S,
    pub time_s: S,
    pub downtime_s: S,
    pub network_cost: S,
}

/// Scans every (VM, foreign PM) pair of a cluster and records the maximum of
/// each raw factor. Factors whose maximum is zero get a cap of one so the
/// later normalization never divides by zero.
pub fn compute_caps<S: Scalar, N: MigrationNetwork<S>>(
    pm_ids: &[PmId],
    vm_ids: &[VmId],
    vms: &[VirtualMachine<S>],
    net: &N,
    cfg: &MigrationConfig<S>,
) -> Result<NormalizationCaps<S>> {
    let mut caps = NormalizationCaps {
        data_mb: S::zero(),
        time_s: S::zero(),
        downtime_s: S::zero(),
        network_cost: S::zero(),
    };
    for &vm in vm_ids {
        let v = vms
            .get(vm)
            .filter(|v| v.id == vm)
            .ok_or_else(|| Error::Model(format!("cluster references unknown VM {vm}")))?;
        for &pm in pm_ids {
            if pm == v.host {
                continue;
            }
            let est = estimate_migration(v, pm, net, cfg)?;
            caps.data_mb = caps.data_mb.max(est.data_mb);
            caps.time_s = caps.time_s.max(est.time_s);
            caps.downtime_s = caps.downtime_s.max(est.downtime_s);
            caps.network_cost = caps.network_cost.max(est.network_cost);
        }
    }
    let one = S::one();
    if caps.data_mb <= S::zero() {
        caps.data_mb = one;
    }
    if caps.time_s <= S::zero() {
        caps.time_s = one;
    }
    if caps.downtime_s <= S::zero() {
        caps.downtime_s = one;
    }
    if caps.network_cost <= S::zero() {
        caps.network_cost = one;
    }
    Ok(caps)
}

/// Weighted sum of cap-normalized factors, each ratio clamped to `[0, 1]`.
/// With weights summing to one the result lies in `[0, 1]`.
pub fn unified_overhead<S: Scalar>(
    est: &MigrationEstimate<S>,
    caps: &NormalizationCaps<S>,
    cfg: &MigrationConfig<S>,
) -> S {
    let ratio = |x: S, cap: S| (x / cap).max(S::zero()).min(S::one());
    cfg.weight_data * ratio(est.data_mb, caps.data_mb)
        + cfg.weight_time * ratio(est.time_s, caps.time_s)
        + cfg.weight_downtime * ratio(est.downtime_s, caps.downtime_s)
        + cfg.weight_network * ratio(est.network_cost, caps.network_cost)
}

/// Energy cost of moving `data_mb` over the network, joules. The fixed term
/// is charged once per actual migration; callers skip keep-in-place entries.
pub fn migration_energy<S: Scalar>(data_mb: S, cfg: &MigrationConfig<S>) -> S {
    cfg.energy_per_mb * data_mb + cfg.energy_base_j
}

/// SLA-violation cost of a migration that keeps the VM degraded for
/// `time_s` seconds, proportional to its CPU demand.
pub fn sla_violation<S: Scalar>(vm: &VirtualMachine<S>, time_s: S, cfg: &MigrationConfig<S>) -> S {
    cfg.sla_degradation * vm.demand.cpu * time_s
}

/// Cluster-level totals of every migration cost over one map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport<S> {
    /// Total migrated data, MB.
    pub data_mb: S,
    /// Total migration time, seconds.
    pub time_s: S,
    /// Total downtime, seconds.
    pub downtime_s: S,
    /// Total distance-weighted data volume.
    pub network_cost: S,
    /// Total unified overhead (the objective denominator).
    pub overhead: S,
    /// Total migration energy, joules.
    pub energy_j: S,
    /// Total SLA-violation cost.
    pub sla_violation: S,
}

impl<S: Scalar> OverheadReport<S> {
    pub fn zero() -> Self {
        Self::default()
    }
}

/// Sums every cost component over the map. Entries that keep a VM on its
/// current host contribute nothing, including the fixed energy term.
pub fn aggregate<S: Scalar, N: MigrationNetwork<S>>(
    mm: &MigrationMap,
    vms: &[VirtualMachine<S>],
    net: &N,
    cfg: &MigrationConfig<S>,
    caps: &NormalizationCaps<S>,
) -> Result<OverheadReport<S>> {
    let mut report = OverheadReport::zero();
    for (vm, pm) in mm.iter() {
        let v = vms
            .get(vm)
            .filter(|v| v.id == vm)
            .ok_or_else(|| Error::Model(format!("map references unknown VM {vm}")))?;
        if v.host == pm {
            continue;
        }
        let est = estimate_migration(v, pm, net, cfg)?;
        report.data_mb += est.data_mb;
        report.time_s += est.time_s;
        report.downtime_s += est.downtime_s;
        report.network_cost += est.network_cost;
        report.overhead += unified_overhead(&est, caps, cfg);
        report.energy_j += migration_energy(est.data_mb, cfg);
        report.sla_violation += sla_violation(v, est.time_s, cfg);
    }
    Ok(report)
}
