//! Synthetic data-center generation.
//!
//! Machines are homogeneous; VM demands are drawn per resource as clamped
//! normal fractions of capacity, dirty rates uniformly up to a fixed share of
//! the VM's memory, and the initial placement scatters VMs round-robin after
//! a shuffle so load starts roughly even. Everything is driven by one seed:
//! the same config reproduces the same data center bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PhysicalMachine, ResourceVector, VirtualMachine};
use crate::scalar::{real, Scalar};
use crate::topology::{form_clusters, Cluster, NetworkModel, TreeTopology};

/// Smallest demand fraction a VM can draw in any resource.
pub const DEMAND_FRACTION_MIN: f64 = 0.005;
/// Largest demand fraction a VM can draw in any resource.
pub const DEMAND_FRACTION_MAX: f64 = 1.0;
/// Placement attempts (fresh seeds) before generation gives up.
pub const GENERATION_ATTEMPTS: u32 = 10;

/// SplitMix64 step; used to derive independent seeds from one base seed.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig<S> {
    pub n_pm: usize,
    /// Mean of the per-resource demand fraction.
    pub mean_rsc: S,
    /// Standard deviation of the per-resource demand fraction.
    pub sd_rsc: S,
    /// Upper bound on the dirty rate as a fraction of VM memory per second.
    pub page_dirty_fraction: S,
    pub pm_capacity: ResourceVector<S>,
    /// Mean of the per-pair bandwidth fraction.
    pub mean_bw_fraction: S,
    /// Standard deviation of the per-pair bandwidth fraction.
    pub sd_bw_fraction: S,
    pub ports_per_switch: usize,
    pub distance_factor: S,
    pub link_capacity_mbps: S,
    pub seed: u64,
}

impl<S: Scalar> Default for GenConfig<S> {
    fn default() -> Self {
        Self {
            n_pm: 64,
            mean_rsc: real(0.05),
            sd_rsc: real(0.2),
            page_dirty_fraction: real(0.25),
            pm_capacity: ResourceVector::new(real(5.0), real(10240.0), real(1000.0)),
            mean_bw_fraction: real(0.05),
            sd_bw_fraction: real(0.2),
            ports_per_switch: 8,
            distance_factor: real(2.0),
            link_capacity_mbps: real(1000.0),
            seed: 42,
        }
    }
}

impl<S: Scalar> GenConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if self.n_pm == 0 {
            return Err(Error::Config("need at least one machine".into()));
        }
        for (name, v) in [("mean_rsc", self.mean_rsc), ("sd_rsc", self.sd_rsc)] {
            if !(v > S::zero() && v < S::one()) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if !(self.page_dirty_fraction >= S::zero() && self.page_dirty_fraction <= S::one()) {
            return Err(Error::Config("page_dirty_fraction must lie in [0, 1]".into()));
        }
        if !self.pm_capacity.all_positive() || !self.pm_capacity.is_finite() {
            return Err(Error::Config("machine capacity must be positive".into()));
        }
        if !(self.mean_bw_fraction > S::zero() && self.mean_bw_fraction <= S::one()) {
            return Err(Error::Config("mean_bw_fraction must lie in (0, 1]".into()));
        }
        if !(self.sd_bw_fraction >= S::zero() && self.sd_bw_fraction <= S::one()) {
            return Err(Error::Config("sd_bw_fraction must lie in [0, 1]".into()));
        }
        TreeTopology::new(self.n_pm, self.ports_per_switch, self.distance_factor)?;
        if !(self.link_capacity_mbps > S::zero()) || !self.link_capacity_mbps.is_finite() {
            return Err(Error::Config("link capacity must be positive".into()));
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<TreeTopology<S>> {
        TreeTopology::new(self.n_pm, self.ports_per_switch, self.distance_factor)
    }
}

/// Which knob a scaling experiment turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Grow the machine pool; VM count follows at two per machine.
    PmCount,
    /// Grow the mean demand fraction; VM count shrinks to keep load feasible.
    MeanRsc,
    /// Grow the demand spread; VM count shrinks the same way.
    SdRsc,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::PmCount => "pm_count",
            SweepKind::MeanRsc => "mean_rsc",
            SweepKind::SdRsc => "sd_rsc",
        }
    }
}

/// VM population for a sweep point: two VMs per machine in the plain pool
/// sweep, otherwise `floor(n_pm * (0.55 - value) / 0.25)`, which runs from
/// 2x at 0.05 down to 1x at 0.30.
pub fn vm_count(n_pm: usize, sweep: SweepKind, value: f64) -> Result<usize> {
    match sweep {
        SweepKind::PmCount => Ok(2 * n_pm),
        SweepKind::MeanRsc | SweepKind::SdRsc => {
            if !(0.05..=0.30).contains(&value) {
                return Err(Error::Config(format!(
                    "swept value {value} outside the calibrated range [0.05, 0.30]"
                )));
            }
            Ok((n_pm as f64 * (0.55 - value) / 0.25).floor() as usize)
        }
    }
}

/// Draws `n_vm` VMs. Demand fractions are normal draws clamped into
/// `[0.005, 1.0]`; dirty rates are uniform in `[0, page_dirty_fraction *
/// mem)`. Hosts are placeholders until [`initial_placement`] runs.
pub fn generate_vms<S, R>(cfg: &GenConfig<S>, n_vm: usize, rng: &mut R) -> Result<Vec<VirtualMachine<S>>>
where
    S: Scalar,
    R: Rng + ?Sized,
    StandardNormal: Distribution<S>,
{
    let normal = Normal::new(cfg.mean_rsc, cfg.sd_rsc)
        .map_err(|e| Error::Config(format!("invalid demand distribution: {e}")))?;
    let lo = real::<S>(DEMAND_FRACTION_MIN);
    let hi = real::<S>(DEMAND_FRACTION_MAX);
    let draw = |rng: &mut R| normal.sample(rng).max(lo).min(hi);
    (0..n_vm)
        .map(|id| {
            let cpu = draw(rng) * cfg.pm_capacity.cpu;
            let mem = draw(rng) * cfg.pm_capacity.mem;
            let net = draw(rng) * cfg.pm_capacity.net;
            let dirty_cap = cfg.page_dirty_fraction * mem;
            let dirty_rate = if dirty_cap > S::zero() {
                rng.random_range(S::zero()..dirty_cap)
            } else {
                S::zero()
            };
            Ok(VirtualMachine {
                id,
                demand: ResourceVector::new(cpu, mem, net),
                dirty_rate,
                host: 0,
            })
        })
        .collect()
}

/// Spreads the VMs over `n_pm` homogeneous machines: a shuffled order, the
/// k-th VM aimed at machine `k % n_pm`, advancing (with wraparound) to the
/// next machine with room. Errors when some VM fits nowhere.
pub fn initial_placement<S, R>(
    capacity: &ResourceVector<S>,
    n_pm: usize,
    vms: &mut [VirtualMachine<S>],
    rng: &mut R,
) -> Result<()>
where
    S: Scalar,
    R: Rng + ?Sized,
{
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..vms.len()).collect();
    order.shuffle(rng);
    let mut loads = vec![ResourceVector::<S>::zero(); n_pm];
    for (k, &vi) in order.iter().enumerate() {
        let demand = vms[vi].demand;
        let start = k % n_pm;
        let mut placed = false;
        for off in 0..n_pm {
            let pm = (start + off) % n_pm;
            if loads[pm].add(&demand).fits_within(capacity) {
                loads[pm].add_assign(&demand);
                vms[vi].host = pm;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Infeasible { vm: vms[vi].id });
        }
    }
    Ok(())
}

/// A generated data center: machines, VMs and the bandwidth model, plus the
/// config that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataCenter<S> {
    pub config: GenConfig<S>,
    pub pms: Vec<PhysicalMachine<S>>,
    pub vms: Vec<VirtualMachine<S>>,
    pub network: NetworkModel<S>,
}

impl<S: Scalar> DataCenter<S> {
    /// Integrity check used after deserialization: dense ids, consistent
    /// hosting, loads within capacity and a well-formed bandwidth table.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.network.validate()?;
        if self.pms.len() != self.config.n_pm {
            return Err(Error::Model(format!(
                "config says {} machines, found {}",
                self.config.n_pm,
                self.pms.len()
            )));
        }
        if self.network.topology.pm_count != self.pms.len() {
            return Err(Error::Model("bandwidth table covers a different machine count".into()));
        }
        for (i, pm) in self.pms.iter().enumerate() {
            if pm.id != i {
                return Err(Error::Model(format!("PM ids must be dense, found {} at {i}", pm.id)));
            }
            if !pm.capacity.all_positive() {
                return Err(Error::Model(format!("PM {i} has a non-positive capacity")));
            }
        }
        let mut seen = vec![false; self.vms.len()];
        for pm in &self.pms {
            let mut load = ResourceVector::<S>::zero();
            for &vm in &pm.hosted {
                let v = self
                    .vms
                    .get(vm)
                    .filter(|v| v.id == vm)
                    .ok_or_else(|| Error::Model(format!("PM {} hosts unknown VM {vm}", pm.id)))?;
                if v.host != pm.id {
                    return Err(Error::Model(format!(
                        "VM {vm} claims host {}, listed on PM {}",
                        v.host, pm.id
                    )));
                }
                if seen[vm] {
                    return Err(Error::Model(format!("VM {vm} hosted twice")));
                }
                seen[vm] = true;
                load.add_assign(&v.demand);
            }
            if !load.fits_within(&pm.capacity) {
                return Err(Error::Model(format!("PM {} is overloaded", pm.id)));
            }
        }
        if let Some(vm) = seen.iter().position(|s| !s) {
            return Err(Error::Model(format!("VM {vm} is hosted nowhere")));
        }
        for (i, vm) in self.vms.iter().enumerate() {
            if vm.id != i {
                return Err(Error::Model(format!("VM ids must be dense, found {} at {i}", vm.id)));
            }
            if !vm.demand.is_finite() || !vm.demand.all_non_negative() {
                return Err(Error::Model(format!("VM {i} has an invalid demand")));
            }
            if !(vm.dirty_rate >= S::zero()) || !vm.dirty_rate.is_finite() {
                return Err(Error::Model(format!("VM {i} has an invalid dirty rate")));
            }
        }
        Ok(())
    }

    pub fn clusters(&self, target_size: usize) -> Result<Vec<Cluster>> {
        form_clusters(&self.network.topology, &self.vms, target_size)
    }
}

/// Generates a data center with `n_vm` VMs. If the round-robin placement
/// dead-ends, the whole draw is retried with a derived seed, up to
/// [`GENERATION_ATTEMPTS`] times.
pub fn generate<S>(cfg: &GenConfig<S>, n_vm: usize) -> Result<DataCenter<S>>
where
    S: Scalar,
    StandardNormal: Distribution<S>,
{
    cfg.validate()?;
    let mut last: Option<Error> = None;
    for attempt in 0..GENERATION_ATTEMPTS {
        let seed = if attempt == 0 { cfg.seed } else { splitmix64(cfg.seed ^ u64::from(attempt)) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vms = generate_vms(cfg, n_vm, &mut rng)?;
        let network = NetworkModel::sample(
            cfg.topology()?,
            cfg.link_capacity_mbps,
            cfg.mean_bw_fraction,
            cfg.sd_bw_fraction,
            &mut rng,
        )?;
        match initial_placement(&cfg.pm_capacity, cfg.n_pm, &mut vms, &mut rng) {
            Ok(()) => {
                let mut pms: Vec<PhysicalMachine<S>> =
                    (0..cfg.n_pm).map(|id| PhysicalMachine::new(id, cfg.pm_capacity)).collect();
                for vm in &vms {
                    pms[vm.host].hosted.push(vm.id);
                }
                return Ok(DataCenter { config: cfg.clone(), pms, vms, network });
            }
            Err(e) => last = Some(e),
        }
    }
    Err(Error::Generation {
        attempts: GENERATION_ATTEMPTS,
        reason: last.map(|e| e.to_string()).unwrap_or_else(|| "no attempt ran".into()),
    })
}
