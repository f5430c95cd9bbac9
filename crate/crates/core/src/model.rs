//! Data-center domain types, the consolidation objective and map validation.
//!
//! Demands and capacities are three-dimensional: CPU in GHz, memory in MB and
//! network I/O in Mbps. A consolidation round produces a [`MigrationMap`]
//! assigning every VM of a cluster to exactly one target machine; maps are
//! scored by [`objective_value`], which trades released machines against the
//! aggregated migration overhead.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, Scalar};

pub type VmId = usize;
pub type PmId = usize;

/// Idle power draw of an active machine, watts.
pub const POWER_IDLE_W: f64 = 162.0;
/// Power draw at full CPU utilization, watts.
pub const POWER_FULL_W: f64 = 215.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResourceKind {
    Cpu,
    Mem,
    Net,
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceKind::Cpu => write!(f, "cpu"),
            ResourceKind::Mem => write!(f, "mem"),
            ResourceKind::Net => write!(f, "net"),
        }
    }
}

/// A (cpu, mem, net) triple; used for demands, capacities and loads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceVector<S> {
    /// CPU, GHz.
    pub cpu: S,
    /// Memory, MB.
    pub mem: S,
    /// Network I/O, Mbps.
    pub net: S,
}

impl<S: Scalar> ResourceVector<S> {
    pub fn new(cpu: S, mem: S, net: S) -> Self {
        Self { cpu, mem, net }
    }

    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn components(&self) -> [S; 3] {
        [self.cpu, self.mem, self.net]
    }

    pub fn get(&self, kind: ResourceKind) -> S {
        match kind {
            ResourceKind::Cpu => self.cpu,
            ResourceKind::Mem => self.mem,
            ResourceKind::Net => self.net,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.cpu + other.cpu, self.mem + other.mem, self.net + other.net)
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.cpu += other.cpu;
        self.mem += other.mem;
        self.net += other.net;
    }

    /// True when every component of `self` is at most the matching component
    /// of `cap`.
    pub fn fits_within(&self, cap: &Self) -> bool {
        self.cpu <= cap.cpu && self.mem <= cap.mem && self.net <= cap.net
    }

    pub fn is_finite(&self) -> bool {
        self.cpu.is_finite() && self.mem.is_finite() && self.net.is_finite()
    }

    pub fn all_positive(&self) -> bool {
        self.cpu > S::zero() && self.mem > S::zero() && self.net > S::zero()
    }

    pub fn all_non_negative(&self) -> bool {
        self.cpu >= S::zero() && self.mem >= S::zero() && self.net >= S::zero()
    }

    /// Component-wise `self / cap`. Errors when any capacity is not positive.
    pub fn fraction_of(&self, cap: &Self) -> Result<[S; 3]> {
        if !cap.all_positive() {
            return Err(Error::Model(format!(
                "capacity must be positive in every dimension, got {cap:?}"
            )));
        }
        Ok([self.cpu / cap.cpu, self.mem / cap.mem, self.net / cap.net])
    }

    /// L1 norm of the capacity-normalized vector.
    pub fn normalized_l1(&self, cap: &Self) -> Result<S> {
        Ok(self.fraction_of(cap)?.into_iter().sum())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualMachine<S> {
    pub id: VmId,
    pub demand: ResourceVector<S>,
    /// Memory page dirtying rate while running, MB/s.
    pub dirty_rate: S,
    /// Machine currently hosting the VM.
    pub host: PmId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalMachine<S> {
    pub id: PmId,
    pub capacity: ResourceVector<S>,
    /// Hosted VM ids, ascending.
    pub hosted: Vec<VmId>,
}

impl<S: Scalar> PhysicalMachine<S> {
    pub fn new(id: PmId, capacity: ResourceVector<S>) -> Self {
        Self { id, capacity, hosted: Vec::new() }
    }

    pub fn is_active(&self) -> bool {
        !self.hosted.is_empty()
    }
}

/// Total assignment of every VM in a cluster to a target machine.
///
/// Entries mapping a VM to its current host mean "keep the VM where it is";
/// they incur no migration cost.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationMap {
    targets: BTreeMap<VmId, PmId>,
}

impl MigrationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, vm: VmId, pm: PmId) {
        self.targets.insert(vm, pm);
    }

    pub fn target(&self, vm: VmId) -> Option<PmId> {
        self.targets.get(&vm).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VmId, PmId)> + '_ {
        self.targets.iter().map(|(&vm, &pm)| (vm, pm))
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Number of entries that actually move their VM.
    pub fn migration_count<S: Scalar>(&self, vms: &[VirtualMachine<S>]) -> usize {
        self.iter().filter(|&(vm, pm)| vms[vm].host != pm).count()
    }
}

impl FromIterator<(VmId, PmId)> for MigrationMap {
    fn from_iter<T: IntoIterator<Item = (VmId, PmId)>>(iter: T) -> Self {
        Self { targets: iter.into_iter().collect() }
    }
}

/// Parameters of the consolidation objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams<S> {
    /// Exponent on the released-machine count.
    pub phi: S,
    /// Floor applied to the overhead denominator.
    pub epsilon_mo: S,
}

impl<S: Scalar> Default for ObjectiveParams<S> {
    fn default() -> Self {
        Self { phi: S::one(), epsilon_mo: real(1e-6) }
    }
}

impl<S: Scalar> ObjectiveParams<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi > S::zero()) || !self.phi.is_finite() {
            return Err(Error::Config("phi must be positive and finite".into()));
        }
        if !(self.epsilon_mo > S::zero()) || !self.epsilon_mo.is_finite() {
            return Err(Error::Config("epsilon_mo must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Score of a migration map: `released^phi / max(overhead, epsilon)`.
///
/// A map that releases nothing scores exactly zero no matter how cheap it is,
/// so doing nothing never looks attractive by accident.
pub fn objective_value<S: Scalar>(released: usize, overhead: S, params: &ObjectiveParams<S>) -> S {
    if released == 0 {
        return S::zero();
    }
    let denom = overhead.max(params.epsilon_mo);
    real::<S>(released as f64).powf(params.phi) / denom
}

/// Summed demand of the VMs hosted on `pm`.
pub fn utilization<S: Scalar>(
    pm: &PhysicalMachine<S>,
    vms: &[VirtualMachine<S>],
) -> Result<ResourceVector<S>> {
    let mut total = ResourceVector::zero();
    for &vm in &pm.hosted {
        let v = vms
            .get(vm)
            .filter(|v| v.id == vm)
            .ok_or_else(|| Error::Model(format!("PM {} hosts unknown VM {vm}", pm.id)))?;
        total.add_assign(&v.demand);
    }
    Ok(total)
}

/// Per-resource utilization of `pm` as fractions of its capacity.
pub fn normalized_utilization<S: Scalar>(
    pm: &PhysicalMachine<S>,
    vms: &[VirtualMachine<S>],
) -> Result<[S; 3]> {
    utilization(pm, vms)?.fraction_of(&pm.capacity)
}

/// Linear power model anchored at the idle and full-load draws.
pub fn power_from_cpu_fraction<S: Scalar>(cpu_fraction: S) -> S {
    real::<S>(POWER_IDLE_W) + (real::<S>(POWER_FULL_W) - real::<S>(POWER_IDLE_W)) * cpu_fraction
}

/// Power draw of a machine, watts. Machines hosting nothing draw zero.
pub fn power_consumption<S: Scalar>(
    pm: &PhysicalMachine<S>,
    vms: &[VirtualMachine<S>],
) -> Result<S> {
    if !pm.is_active() {
        return Ok(S::zero());
    }
    Ok(power_from_cpu_fraction(normalized_utilization(pm, vms)?[0]))
}

/// Wastage of an active machine from its normalized per-resource utilization.
///
/// The numerator measures how unevenly the residual capacity is spread across
/// resources (population standard deviation of the remaining fractions, plus
/// a small constant so balanced machines still register); the denominator is
/// the total normalized utilization, so lightly loaded machines waste more.
pub fn wastage_from_fractions<S: Scalar>(fractions: [S; 3]) -> Result<S> {
    let used: S = fractions.into_iter().sum();
    if used <= S::zero() {
        return Err(Error::Model("active machine with zero utilization".into()));
    }
    let remaining = fractions.map(|f| S::one() - f);
    let n = real::<S>(3.0);
    let mean: S = remaining.into_iter().sum::<S>() / n;
    let var: S = remaining.into_iter().map(|r| (r - mean) * (r - mean)).sum::<S>() / n;
    Ok((var.sqrt() + real(1e-4)) / used)
}

/// Resource wastage of a machine. Machines hosting nothing waste zero.
pub fn resource_wastage<S: Scalar>(
    pm: &PhysicalMachine<S>,
    vms: &[VirtualMachine<S>],
) -> Result<S> {
    if !pm.is_active() {
        return Ok(S::zero());
    }
    wastage_from_fractions(normalized_utilization(pm, vms)?)
}

/// VMs per active machine; zero when nothing is active.
pub fn packing_efficiency<S: Scalar>(n_vms: usize, n_active_pms: usize) -> S {
    if n_active_pms == 0 {
        return S::zero();
    }
    real::<S>(n_vms as f64) / real::<S>(n_active_pms as f64)
}

/// Utilization gain of placing a demand onto a machine already carrying
/// `load`, blending residual balance and mean utilization with weight `omega`.
///
/// Errors when the placement does not fit.
pub fn utilization_gain<S: Scalar>(
    load: &ResourceVector<S>,
    capacity: &ResourceVector<S>,
    demand: &ResourceVector<S>,
    omega: S,
) -> Result<S> {
    let post = load.add(demand);
    if !post.fits_within(capacity) {
        return Err(Error::Model("candidate placement exceeds capacity".into()));
    }
    Ok(utilization_gain_from_fractions(post.fraction_of(capacity)?, omega))
}

/// [`utilization_gain`] on precomputed post-placement fractions.
///
/// Balance is scored as `-log10(max(||r||, 1e-4)) / 4` where `r` is the
/// vector of fractions minus their mean, which maps a perfectly balanced
/// machine to 1 and a fully lopsided one to roughly 0.
pub fn utilization_gain_from_fractions<S: Scalar>(fractions: [S; 3], omega: S) -> S {
    let n = real::<S>(3.0);
    let mean: S = fractions.into_iter().sum::<S>() / n;
    let riv: S =
        fractions.into_iter().map(|f| (f - mean) * (f - mean)).sum::<S>().sqrt();
    let balance = -riv.max(real(1e-4)).log10() / real::<S>(4.0);
    let gain = omega * balance + (S::one() - omega) * mean;
    gain.max(S::zero()).min(S::one())
}

/// One reason a migration map is invalid.
#[derive(Clone, Debug, PartialEq)]
pub enum MapViolation {
    /// A cluster VM has no entry.
    MissingVm { vm: VmId },
    /// An entry names a VM outside the cluster.
    ForeignVm { vm: VmId },
    /// An entry targets a machine outside the cluster.
    UnknownTargetPm { vm: VmId, pm: PmId },
    /// A machine's assigned load exceeds its capacity in one resource.
    OverCapacity { pm: PmId, resource: ResourceKind, load: f64, capacity: f64 },
}

impl fmt::Display for MapViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapViolation::MissingVm { vm } => write!(f, "VM {vm} has no target"),
            MapViolation::ForeignVm { vm } => write!(f, "VM {vm} is not in the cluster"),
            MapViolation::UnknownTargetPm { vm, pm } => {
                write!(f, "VM {vm} targets PM {pm} outside the cluster")
            }
            MapViolation::OverCapacity { pm, resource, load, capacity } => {
                write!(f, "PM {pm} over capacity on {resource}: load {load} > {capacity}")
            }
        }
    }
}

/// Checks a migration map against a cluster: every cluster VM appears exactly
/// once, targets stay inside the cluster, and no machine is overloaded on any
/// resource. Returns every violation rather than stopping at the first.
pub fn validate_map<S: Scalar>(
    mm: &MigrationMap,
    pm_ids: &[PmId],
    vm_ids: &[VmId],
    pms: &[PhysicalMachine<S>],
    vms: &[VirtualMachine<S>],
) -> Vec<MapViolation> {
    debug_assert!(pm_ids.windows(2).all(|w| w[0] < w[1]), "cluster PM ids must be sorted");
    debug_assert!(vm_ids.windows(2).all(|w| w[0] < w[1]), "cluster VM ids must be sorted");

    let mut violations = Vec::new();
    for &vm in vm_ids {
        if mm.target(vm).is_none() {
            violations.push(MapViolation::MissingVm { vm });
        }
    }

    let mut loads = vec![ResourceVector::<S>::zero(); pm_ids.len()];
    for (vm, pm) in mm.iter() {
        if vm_ids.binary_search(&vm).is_err() {
            violations.push(MapViolation::ForeignVm { vm });
            continue;
        }
        match pm_ids.binary_search(&pm) {
            Ok(slot) => loads[slot].add_assign(&vms[vm].demand),
            Err(_) => violations.push(MapViolation::UnknownTargetPm { vm, pm }),
        }
    }

    for (slot, &pm) in pm_ids.iter().enumerate() {
        let cap = &pms[pm].capacity;
        for kind in [ResourceKind::Cpu, ResourceKind::Mem, ResourceKind::Net] {
            let load = loads[slot].get(kind);
            if load > cap.get(kind) {
                violations.push(MapViolation::OverCapacity {
                    pm,
                    resource: kind,
                    load: load.to_f64().unwrap_or(f64::NAN),
                    capacity: cap.get(kind).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    violations
}
