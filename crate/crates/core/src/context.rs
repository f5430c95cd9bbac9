//! Frozen per-cluster view shared by the consolidation algorithms.
//!
//! Building a context fixes the normalization caps and precomputes the
//! unified overhead of every (VM, machine) pair once, so scoring candidate
//! maps inside the search loops is a table lookup instead of a fresh
//! migration simulation. The cached values are exactly what
//! [`crate::overhead::aggregate`] would produce entry by entry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    objective_value, validate_map, MapViolation, MigrationMap, ObjectiveParams, PhysicalMachine,
    PmId, ResourceVector, VirtualMachine, VmId,
};
use crate::overhead::{
    compute_caps, estimate_migration, unified_overhead, aggregate, MigrationConfig,
    MigrationNetwork, NormalizationCaps, OverheadReport,
};
use crate::scalar::Scalar;
use crate::topology::Cluster;

/// Outcome of one consolidation run on a cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Consolidation<S> {
    pub map: MigrationMap,
    /// Objective score of the map.
    pub objective: S,
    /// Machines emptied by the map.
    pub released: usize,
    /// Entries that actually move their VM.
    pub migrations: usize,
    /// Objective of the best map found so far, recorded after each search
    /// cycle. Empty for one-shot heuristics.
    pub trace: Vec<S>,
}

pub struct ClusterContext<'a, S: Scalar, N: MigrationNetwork<S>> {
    cluster: &'a Cluster,
    pms: &'a [PhysicalMachine<S>],
    vms: &'a [VirtualMachine<S>],
    net: &'a N,
    cfg: &'a MigrationConfig<S>,
    objective: &'a ObjectiveParams<S>,
    caps: NormalizationCaps<S>,
    /// Unified overhead per (vm, pm) pair, row major by local vm index.
    mo: Vec<S>,
}

impl<'a, S: Scalar, N: MigrationNetwork<S>> ClusterContext<'a, S, N> {
    pub fn new(
        cluster: &'a Cluster,
        pms: &'a [PhysicalMachine<S>],
        vms: &'a [VirtualMachine<S>],
        net: &'a N,
        cfg: &'a MigrationConfig<S>,
        objective: &'a ObjectiveParams<S>,
    ) -> Result<Self> {
        cfg.validate()?;
        objective.validate()?;
        if cluster.pm_ids.is_empty() {
            return Err(Error::Model(format!("cluster {} has no machines", cluster.id)));
        }
        for ids in [&cluster.pm_ids, &cluster.vm_ids] {
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Model(format!(
                    "cluster {} member ids must be sorted and unique",
                    cluster.id
                )));
            }
        }
        for &pm in &cluster.pm_ids {
            if pms.get(pm).map(|p| p.id) != Some(pm) {
                return Err(Error::Model(format!("cluster {} lists unknown PM {pm}", cluster.id)));
            }
        }
        for &pm in &cluster.pm_ids {
            if !pms[pm].capacity.all_positive() {
                return Err(Error::Model(format!("PM {pm} has a non-positive capacity")));
            }
        }
        for &vm in &cluster.vm_ids {
            let v = vms
                .get(vm)
                .filter(|v| v.id == vm)
                .ok_or_else(|| Error::Model(format!("cluster {} lists unknown VM {vm}", cluster.id)))?;
            if cluster.pm_ids.binary_search(&v.host).is_err() {
                return Err(Error::Model(format!(
                    "VM {vm} is hosted on PM {} outside cluster {}",
                    v.host, cluster.id
                )));
            }
        }

        let caps = compute_caps(&cluster.pm_ids, &cluster.vm_ids, vms, net, cfg)?;
        let n_pms = cluster.pm_ids.len();
        let mut mo = vec![S::zero(); cluster.vm_ids.len() * n_pms];
        for (vi, &vm) in cluster.vm_ids.iter().enumerate() {
            for (pi, &pm) in cluster.pm_ids.iter().enumerate() {
                if pm != vms[vm].host {
                    let est = estimate_migration(&vms[vm], pm, net, cfg)?;
                    mo[vi * n_pms + pi] = unified_overhead(&est, &caps, cfg);
                }
            }
        }
        Ok(Self { cluster, pms, vms, net, cfg, objective, caps, mo })
    }

    pub fn cluster(&self) -> &Cluster {
        self.cluster
    }

    pub fn n_vms(&self) -> usize {
        self.cluster.vm_ids.len()
    }

    pub fn n_pms(&self) -> usize {
        self.cluster.pm_ids.len()
    }

    pub fn vm_ids(&self) -> &[VmId] {
        &self.cluster.vm_ids
    }

    pub fn pm_ids(&self) -> &[PmId] {
        &self.cluster.pm_ids
    }

    pub fn vm(&self, local: usize) -> &VirtualMachine<S> {
        &self.vms[self.cluster.vm_ids[local]]
    }

    pub fn pm(&self, local: usize) -> &PhysicalMachine<S> {
        &self.pms[self.cluster.pm_ids[local]]
    }

    pub fn capacity(&self, local: usize) -> &ResourceVector<S> {
        &self.pm(local).capacity
    }

    pub fn local_vm(&self, vm: VmId) -> Option<usize> {
        self.cluster.vm_ids.binary_search(&vm).ok()
    }

    pub fn local_pm(&self, pm: PmId) -> Option<usize> {
        self.cluster.pm_ids.binary_search(&pm).ok()
    }

    /// Local index of the machine currently hosting local VM `vi`.
    pub fn host_local(&self, vi: usize) -> usize {
        self.local_pm(self.vm(vi).host).expect("host membership checked at construction")
    }

    /// Cached unified overhead of placing local VM `vi` on local machine
    /// `pi`; zero when `pi` is the VM's current host.
    pub fn mo(&self, vi: usize, pi: usize) -> S {
        self.mo[vi * self.n_pms() + pi]
    }

    pub fn caps(&self) -> &NormalizationCaps<S> {
        &self.caps
    }

    pub fn migration_config(&self) -> &MigrationConfig<S> {
        self.cfg
    }

    pub fn objective_params(&self) -> &ObjectiveParams<S> {
        self.objective
    }

    pub fn validate(&self, mm: &MigrationMap) -> Vec<MapViolation> {
        validate_map(mm, &self.cluster.pm_ids, &self.cluster.vm_ids, self.pms, self.vms)
    }

    /// Full cost breakdown of a map.
    pub fn overhead_of(&self, mm: &MigrationMap) -> Result<OverheadReport<S>> {
        aggregate(mm, self.vms, self.net, self.cfg, &self.caps)
    }

    /// Machines that host at least one VM now but receive none under `mm`.
    pub fn released(&self, mm: &MigrationMap) -> usize {
        let mut targeted = vec![false; self.n_pms()];
        for (_, pm) in mm.iter() {
            if let Some(pi) = self.local_pm(pm) {
                targeted[pi] = true;
            }
        }
        self.cluster
            .pm_ids
            .iter()
            .enumerate()
            .filter(|&(pi, &pm)| self.pms[pm].is_active() && !targeted[pi])
            .count()
    }

    /// Objective score of a complete map. Rejects invalid maps with the full
    /// violation list.
    pub fn objective_of(&self, mm: &MigrationMap) -> Result<S> {
        let violations = self.validate(mm);
        if !violations.is_empty() {
            return Err(Error::InvalidMap(violations));
        }
        let mut mo_total = S::zero();
        for (vm, pm) in mm.iter() {
            let vi = self.local_vm(vm).expect("validated");
            let pi = self.local_pm(pm).expect("validated");
            mo_total += self.mo(vi, pi);
        }
        Ok(objective_value(self.released(mm), mo_total, self.objective))
    }

    /// Number of entries of `mm` that move a VM off its current host. The
    /// map must reference cluster VMs only.
    pub fn migrations_of(&self, mm: &MigrationMap) -> usize {
        mm.iter().filter(|&(vm, pm)| self.vms[vm].host != pm).count()
    }

    /// Identity map: every VM stays on its current host.
    pub fn identity_map(&self) -> MigrationMap {
        self.cluster.vm_ids.iter().map(|&vm| (vm, self.vms[vm].host)).collect()
    }

    /// Bundles a scored map into a [`Consolidation`].
    pub fn consolidation(&self, map: MigrationMap, objective: S, trace: Vec<S>) -> Consolidation<S> {
        let released = self.released(&map);
        let migrations = self.migrations_of(&map);
        Consolidation { map, objective, released, migrations, trace }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::overhead::UniformNetwork;
    use approx::assert_relative_eq;

    fn cap() -> ResourceVector<f64> {
        ResourceVector::new(5.0, 10240.0, 1000.0)
    }

    fn fixture() -> (Cluster, Vec<PhysicalMachine<f64>>, Vec<VirtualMachine<f64>>) {
        let mut pms: Vec<_> = (0..2).map(|id| PhysicalMachine::new(id, cap())).collect();
        let vms = vec![
            VirtualMachine {
                id: 0,
                demand: ResourceVector::new(1.0, 2048.0, 100.0),
                dirty_rate: 0.0,
                host: 0,
            },
            VirtualMachine {
                id: 1,
                demand: ResourceVector::new(1.0, 1024.0, 100.0),
                dirty_rate: 0.0,
                host: 1,
            },
        ];
        pms[0].hosted = vec![0];
        pms[1].hosted = vec![1];
        (Cluster { id: 0, pm_ids: vec![0, 1], vm_ids: vec![0, 1] }, pms, vms)
    }

    #[test]
    fn cached_overhead_matches_aggregate() {
        let (cluster, pms, vms) = fixture();
        let net = UniformNetwork { bandwidth_mb_s: 100.0, distance: 2.0 };
        let cfg = MigrationConfig::default();
        let obj = ObjectiveParams::default();
        let ctx = ClusterContext::new(&cluster, &pms, &vms, &net, &cfg, &obj).unwrap();

        // Move VM 1 onto PM 0: cached entry must equal the aggregate report.
        let mm: MigrationMap = [(0, 0), (1, 0)].into_iter().collect();
        let report = ctx.overhead_of(&mm).unwrap();
        let cached = ctx.mo(1, 0);
        assert_relative_eq!(report.overhead, cached, max_relative = 1e-15);

        assert_eq!(ctx.released(&mm), 1);
        let f = ctx.objective_of(&mm).unwrap();
        assert_relative_eq!(f, 1.0 / report.overhead.max(1e-6), max_relative = 1e-12);
    }

    #[test]
    fn identity_map_scores_zero() {
        let (cluster, pms, vms) = fixture();
        let net = UniformNetwork { bandwidth_mb_s: 100.0, distance: 2.0 };
        let cfg = MigrationConfig::default();
        let obj = ObjectiveParams::default();
        let ctx = ClusterContext::new(&cluster, &pms, &vms, &net, &cfg, &obj).unwrap();
        let mm = ctx.identity_map();
        assert_eq!(ctx.released(&mm), 0);
        assert_eq!(ctx.objective_of(&mm).unwrap(), 0.0);
        assert_eq!(ctx.mo(0, 0), 0.0);
        assert!(ctx.mo(0, 1) > 0.0);
    }

    #[test]
    fn invalid_map_is_rejected_with_details() {
        let (cluster, pms, vms) = fixture();
        let net = UniformNetwork { bandwidth_mb_s: 100.0, distance: 2.0 };
        let cfg = MigrationConfig::default();
        let obj = ObjectiveParams::default();
        let ctx = ClusterContext::new(&cluster, &pms, &vms, &net, &cfg, &obj).unwrap();
        let mm: MigrationMap = [(0, 0)].into_iter().collect();
        match ctx.objective_of(&mm) {
            Err(Error::InvalidMap(violations)) => {
                assert_eq!(violations, vec![MapViolation::MissingVm { vm: 1 }]);
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_vm_hosted_outside_cluster() {
        let (mut cluster, pms, vms) = fixture();
        cluster.pm_ids = vec![0];
        let net = UniformNetwork { bandwidth_mb_s: 100.0, distance: 2.0 };
        let cfg = MigrationConfig::default();
        let obj = ObjectiveParams::default();
        assert!(ClusterContext::new(&cluster, &pms, &vms, &net, &cfg, &obj).is_err());
    }
}
