//! Baseline consolidators the migration-aware search is compared against.
//!
//! FFDL1 is a one-shot first-fit-decreasing heuristic over the L1 norm of
//! normalized demand: aggressive at releasing machines, blind to migration
//! cost. The second baseline is a max-min ant system that scores maps purely
//! by machines released per migration, with pheromone clamped to a fixed
//! band; it sees migration count but not migration cost.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::context::{ClusterContext, Consolidation};
use crate::error::{Error, Result};
use crate::model::{utilization_gain_from_fractions, MigrationMap, ResourceVector};
use crate::overhead::MigrationNetwork;
use crate::scalar::{real, Scalar};

/// Local VM indices ordered for first-fit: decreasing L1 norm of the
/// capacity-normalized demand, ties broken by ascending VM id.
pub fn first_fit_order<S: Scalar, N: MigrationNetwork<S>>(
    ctx: &ClusterContext<'_, S, N>,
) -> Vec<usize> {
    let cap = ctx.capacity(0);
    let norms: Vec<S> = (0..ctx.n_vms())
        .map(|vi| {
            let d = &ctx.vm(vi).demand;
            d.cpu / cap.cpu + d.mem / cap.mem + d.net / cap.net
        })
        .collect();
    let mut order: Vec<usize> = (0..ctx.n_vms()).collect();
    order.sort_unstable_by(|&a, &b| {
        norms[b].partial_cmp(&norms[a]).expect("demands are finite").then(a.cmp(&b))
    });
    order
}

/// First-fit-decreasing over empty machine replicas, machines scanned in
/// ascending id order.
pub fn ffdl1<S: Scalar, N: MigrationNetwork<S>>(
    ctx: &ClusterContext<'_, S, N>,
) -> Result<Consolidation<S>> {
    let mut loads = vec![ResourceVector::<S>::zero(); ctx.n_pms()];
    let mut map = MigrationMap::new();
    for vi in first_fit_order(ctx) {
        let demand = ctx.vm(vi).demand;
        let slot = (0..ctx.n_pms()).find(|&pi| loads[pi].add(&demand).fits_within(ctx.capacity(pi)));
        match slot {
            Some(pi) => {
                loads[pi].add_assign(&demand);
                map.set(ctx.vm_ids()[vi], ctx.pm_ids()[pi]);
            }
            None => return Err(Error::Infeasible { vm: ctx.vm_ids()[vi] }),
        }
    }
    let objective = ctx.objective_of(&map)?;
    Ok(ctx.consolidation(map, objective, Vec::new()))
}

/// Parameters of the max-min ant system baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdvmcParams<S> {
    /// Fixed number of search cycles.
    pub n_cycles: u32,
    pub n_ants: usize,
    /// Pheromone band; trails are clamped into it after every update.
    pub tau_min: S,
    pub tau_max: S,
    /// Evaporation rate per cycle.
    pub evaporation: S,
    /// Balance weight inside the utilization-gain heuristic.
    pub omega: S,
}

impl<S: Scalar> Default for MmdvmcParams<S> {
    fn default() -> Self {
        Self {
            n_cycles: 50,
            n_ants: 5,
            tau_min: real(0.2),
            tau_max: real(1.0),
            evaporation: real(0.02),
            omega: real(0.5),
        }
    }
}

impl<S: Scalar> MmdvmcParams<S> {
    pub fn validate(&self) -> Result<()> {
        if self.n_cycles == 0 || self.n_ants == 0 {
            return Err(Error::Config("need at least one cycle and one ant".into()));
        }
        if !(S::zero() < self.tau_min && self.tau_min < self.tau_max) || !self.tau_max.is_finite() {
            return Err(Error::Config("pheromone band must satisfy 0 < tau_min < tau_max".into()));
        }
        if !(self.evaporation > S::zero() && self.evaporation < S::one()) {
            return Err(Error::Config("evaporation must lie in (0, 1)".into()));
        }
        if !(self.omega >= S::zero() && self.omega <= S::one()) {
            return Err(Error::Config("omega must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Score the max-min baseline optimizes: machines released per migration,
/// with the denominator shifted so migration-free maps stay finite.
pub fn release_per_move_score<S: Scalar>(released: usize, migrations: usize) -> S {
    real::<S>(released as f64) / (S::one() + real(migrations as f64))
}

/// Max-min ant system consolidator.
///
/// Ants build maps with a purely proportional rule over every feasible
/// (unplaced VM, machine) pair; the heuristic averages utilization gain with
/// a keep-in-place bonus. Each cycle the global-best map reinforces its
/// pairs by its score, everything evaporates, and trails are clamped into
/// `[tau_min, tau_max]`. Runs for exactly `n_cycles` cycles.
pub fn mmdvmc<S, N, R>(
    ctx: &ClusterContext<'_, S, N>,
    params: &MmdvmcParams<S>,
    rng: &mut R,
) -> Result<Consolidation<S>>
where
    S: Scalar,
    N: MigrationNetwork<S>,
    R: Rng + ?Sized,
{
    params.validate()?;
    let (n_vms, n_pms) = (ctx.n_vms(), ctx.n_pms());
    let mut tau = vec![params.tau_max; n_vms * n_pms];
    let mut best: Option<(MigrationMap, S)> = None;
    let mut best_targets = vec![0usize; n_vms];
    let mut trace = Vec::with_capacity(params.n_cycles as usize);

    for _ in 0..params.n_cycles {
        for _ in 0..params.n_ants {
            let map = construct(ctx, &tau, params, rng)?;
            let score = release_per_move_score::<S>(ctx.released(&map), ctx.migrations_of(&map));
            let adopt = match &best {
                None => true,
                Some((_, best_score)) => score > *best_score,
            };
            if adopt {
                for (vm, pm) in map.iter() {
                    best_targets[ctx.local_vm(vm).expect("cluster vm")] =
                        ctx.local_pm(pm).expect("cluster pm");
                }
                best = Some((map, score));
            }
        }
        let (best_map, best_score) = best.as_ref().expect("at least one ant ran");
        for vi in 0..n_vms {
            for pi in 0..n_pms {
                let deposit = if best_targets[vi] == pi { *best_score } else { S::zero() };
                let updated = (S::one() - params.evaporation) * tau[vi * n_pms + pi] + deposit;
                tau[vi * n_pms + pi] = updated.max(params.tau_min).min(params.tau_max);
            }
        }
        trace.push(ctx.objective_of(best_map)?);
    }

    let (map, _) = best.expect("n_cycles >= 1");
    let objective = ctx.objective_of(&map)?;
    Ok(ctx.consolidation(map, objective, trace))
}

/// Attempts per ant before a construction dead end becomes an error.
const CONSTRUCT_ATTEMPTS: u32 = 32;

fn construct<S, N, R>(
    ctx: &ClusterContext<'_, S, N>,
    tau: &[S],
    params: &MmdvmcParams<S>,
    rng: &mut R,
) -> Result<MigrationMap>
where
    S: Scalar,
    N: MigrationNetwork<S>,
    R: Rng + ?Sized,
{
    let n_pms = ctx.n_pms();
    let mut scratch: Vec<(usize, usize, S)> = Vec::new();
    'attempt: for _ in 0..CONSTRUCT_ATTEMPTS {
        let mut remaining: Vec<usize> = (0..ctx.n_vms()).collect();
        remaining.shuffle(rng);
        let mut loads = vec![ResourceVector::<S>::zero(); n_pms];
        let mut map = MigrationMap::new();
        while !remaining.is_empty() {
            scratch.clear();
            let mut total = S::zero();
            for (slot, &vi) in remaining.iter().enumerate() {
                let vm = ctx.vm(vi);
                let home = ctx.host_local(vi);
                for pi in 0..n_pms {
                    let cap = ctx.capacity(pi);
                    let post = loads[pi].add(&vm.demand);
                    if !post.fits_within(cap) {
                        continue;
                    }
                    let fractions = [post.cpu / cap.cpu, post.mem / cap.mem, post.net / cap.net];
                    let gain = utilization_gain_from_fractions(fractions, params.omega);
                    let bonus = if pi == home { S::one() } else { S::zero() };
                    let eta = (gain + bonus) / real(2.0);
                    let w = tau[vi * n_pms + pi] * eta;
                    total += w;
                    scratch.push((slot, pi, w));
                }
            }
            if scratch.is_empty() {
                // Dead end: earlier random placements starved a VM of all
                // targets. Throw the partial map away and rebuild.
                continue 'attempt;
            }
            let choice = if total > S::zero() {
                let r: S = rng.random_range(S::zero()..total);
                let mut acc = S::zero();
                let mut picked = scratch.len() - 1;
                for (idx, &(_, _, w)) in scratch.iter().enumerate() {
                    acc += w;
                    if r < acc {
                        picked = idx;
                        break;
                    }
                }
                picked
            } else {
                rng.random_range(0..scratch.len())
            };
            let (slot, pi, _) = scratch[choice];
            let vi = remaining.swap_remove(slot);
            loads[pi].add_assign(&ctx.vm(vi).demand);
            map.set(ctx.vm_ids()[vi], ctx.pm_ids()[pi]);
        }
        return Ok(map);
    }
    let vm = *ctx.vm_ids().first().expect("constructing implies at least one VM");
    Err(Error::Infeasible { vm })
}
