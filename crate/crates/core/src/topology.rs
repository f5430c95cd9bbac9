//! Three-tier tree network, pairwise bandwidth table and cluster formation.
//!
//! Machines hang off access switches in groups of `ports_per_switch`; access
//! switches aggregate into pods of the same fan-out, and pods meet at the
//! core. Hop counts therefore come in four classes (0 same machine, 1 same
//! access switch, 3 same pod, 5 across pods) and are scaled by a distance
//! factor to yield the network distance used in migration costs.
//!
//! Available migration bandwidth is modelled statically: every unordered
//! machine pair gets a fraction of the link capacity drawn once from a
//! clamped normal distribution, reflecting that migrations compete with
//! regular traffic.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PmId, VirtualMachine, VmId};
use crate::overhead::MigrationNetwork;
use crate::scalar::{real, Scalar};

/// Smallest bandwidth fraction a pair can be assigned.
pub const BANDWIDTH_FRACTION_MIN: f64 = 0.01;
/// Largest bandwidth fraction a pair can be assigned.
pub const BANDWIDTH_FRACTION_MAX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeTopology<S> {
    pub pm_count: usize,
    /// Machines per access switch and access switches per pod.
    pub ports_per_switch: usize,
    /// Multiplier turning hop counts into network distance.
    pub distance_factor: S,
}

impl<S: Scalar> TreeTopology<S> {
    pub fn new(pm_count: usize, ports_per_switch: usize, distance_factor: S) -> Result<Self> {
        let topo = Self { pm_count, ports_per_switch, distance_factor };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pm_count == 0 {
            return Err(Error::Config("topology needs at least one machine".into()));
        }
        if self.ports_per_switch < 2 {
            return Err(Error::Config("switches need at least two ports".into()));
        }
        if !(self.distance_factor > S::zero()) || !self.distance_factor.is_finite() {
            return Err(Error::Config("distance factor must be positive".into()));
        }
        Ok(())
    }

    /// Network hops between two machines: 0, 1, 3 or 5.
    pub fn hop_count(&self, a: PmId, b: PmId) -> Result<u32> {
        if a >= self.pm_count || b >= self.pm_count {
            return Err(Error::Network(format!(
                "machine pair ({a}, {b}) outside topology of {} machines",
                self.pm_count
            )));
        }
        if a == b {
            return Ok(0);
        }
        let (sa, sb) = (a / self.ports_per_switch, b / self.ports_per_switch);
        if sa == sb {
            return Ok(1);
        }
        if sa / self.ports_per_switch == sb / self.ports_per_switch {
            return Ok(3);
        }
        Ok(5)
    }

    /// Hop count scaled by the distance factor.
    pub fn distance(&self, a: PmId, b: PmId) -> Result<S> {
        Ok(real::<S>(f64::from(self.hop_count(a, b)?)) * self.distance_factor)
    }
}

/// One draw of the per-pair bandwidth fraction: a normal sample clamped into
/// `[0.01, 1.0]` so every pair keeps a usable, bounded share of the link.
pub fn sample_bandwidth_fraction<S, R>(rng: &mut R, mean: S, sd: S) -> Result<S>
where
    S: Scalar,
    R: Rng + ?Sized,
    StandardNormal: Distribution<S>,
{
    let normal = Normal::new(mean, sd)
        .map_err(|e| Error::Config(format!("invalid bandwidth distribution: {e}")))?;
    Ok(normal
        .sample(rng)
        .max(real(BANDWIDTH_FRACTION_MIN))
        .min(real(BANDWIDTH_FRACTION_MAX)))
}

/// Static bandwidth model over a tree topology.
///
/// Stores one fraction per unordered machine pair (upper triangle, row
/// major), so lookups are symmetric by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel<S> {
    pub topology: TreeTopology<S>,
    /// Full capacity of a link, Mbps.
    pub link_capacity_mbps: S,
    fractions: Vec<S>,
}

fn pair_index(a: PmId, b: PmId, n: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

impl<S: Scalar> NetworkModel<S> {
    /// Draws the bandwidth table pair by pair, `(0,1), (0,2), ..., (n-2,n-1)`.
    pub fn sample<R>(
        topology: TreeTopology<S>,
        link_capacity_mbps: S,
        mean_fraction: S,
        sd_fraction: S,
        rng: &mut R,
    ) -> Result<Self>
    where
        R: Rng + ?Sized,
        StandardNormal: Distribution<S>,
    {
        topology.validate()?;
        if !(link_capacity_mbps > S::zero()) || !link_capacity_mbps.is_finite() {
            return Err(Error::Config("link capacity must be positive".into()));
        }
        let n = topology.pm_count;
        let mut fractions = Vec::with_capacity(n * (n - 1) / 2);
        for a in 0..n {
            for _b in (a + 1)..n {
                fractions.push(sample_bandwidth_fraction(rng, mean_fraction, sd_fraction)?);
            }
        }
        Ok(Self { topology, link_capacity_mbps, fractions })
    }

    pub fn from_fractions(
        topology: TreeTopology<S>,
        link_capacity_mbps: S,
        fractions: Vec<S>,
    ) -> Result<Self> {
        let model = Self { topology, link_capacity_mbps, fractions };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        if !(self.link_capacity_mbps > S::zero()) || !self.link_capacity_mbps.is_finite() {
            return Err(Error::Config("link capacity must be positive".into()));
        }
        let n = self.topology.pm_count;
        if self.fractions.len() != n * (n - 1) / 2 {
            return Err(Error::Model(format!(
                "bandwidth table has {} entries, topology with {n} machines needs {}",
                self.fractions.len(),
                n * (n - 1) / 2
            )));
        }
        let lo = real::<S>(BANDWIDTH_FRACTION_MIN);
        let hi = real::<S>(BANDWIDTH_FRACTION_MAX);
        if self.fractions.iter().any(|f| !(*f >= lo && *f <= hi)) {
            return Err(Error::Model("bandwidth fraction outside [0.01, 1.0]".into()));
        }
        Ok(())
    }

    /// Fraction of the link available between `a` and `b`; symmetric. A
    /// machine paired with itself sees the full link, though migrations
    /// never ask for it.
    pub fn bandwidth_fraction(&self, a: PmId, b: PmId) -> S {
        if a == b {
            return S::one();
        }
        let n = self.topology.pm_count;
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.fractions[pair_index(lo, hi, n)]
    }

    pub fn fractions(&self) -> &[S] {
        &self.fractions
    }
}

impl<S: Scalar> MigrationNetwork<S> for NetworkModel<S> {
    /// Mbps-to-MB/s conversion included: a full 1000 Mbps link carries
    /// 125 MB/s.
    fn bandwidth_mb_s(&self, src: PmId, dst: PmId) -> S {
        self.bandwidth_fraction(src, dst) * self.link_capacity_mbps / real(8.0)
    }

    fn distance(&self, src: PmId, dst: PmId) -> S {
        self.topology.distance(src, dst).expect("machine ids validated against topology")
    }
}

/// A consolidation domain: a contiguous block of machines plus every VM
/// hosted on them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    /// Member machine ids, ascending.
    pub pm_ids: Vec<PmId>,
    /// Ids of the VMs hosted on member machines, ascending.
    pub vm_ids: Vec<VmId>,
}

/// Splits the machines into contiguous clusters of `target_size` (the last
/// one may be smaller) and routes each VM to its host's cluster.
///
/// `target_size` must be a positive multiple of the switch fan-out so cluster
/// boundaries coincide with access-switch boundaries.
pub fn form_clusters<S: Scalar>(
    topology: &TreeTopology<S>,
    vms: &[VirtualMachine<S>],
    target_size: usize,
) -> Result<Vec<Cluster>> {
    topology.validate()?;
    if target_size == 0 || !target_size.is_multiple_of(topology.ports_per_switch) {
        return Err(Error::Config(format!(
            "cluster size {target_size} is not a multiple of the switch fan-out {}",
            topology.ports_per_switch
        )));
    }
    let n = topology.pm_count;
    let mut clusters: Vec<Cluster> = (0..n.div_ceil(target_size))
        .map(|id| Cluster {
            id,
            pm_ids: (id * target_size..((id + 1) * target_size).min(n)).collect(),
            vm_ids: Vec::new(),
        })
        .collect();
    for vm in vms {
        if vm.host >= n {
            return Err(Error::Model(format!(
                "VM {} hosted on unknown machine {}",
                vm.id, vm.host
            )));
        }
        clusters[vm.host / target_size].vm_ids.push(vm.id);
    }
    for cluster in &mut clusters {
        cluster.vm_ids.sort_unstable();
    }
    Ok(clusters)
}
