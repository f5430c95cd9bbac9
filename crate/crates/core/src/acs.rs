//! Migration-aware ant colony consolidator.
//!
//! An ant colony system searches for the migration map maximizing released
//! machines per unit of migration overhead. Each ant rebuilds a cluster from
//! empty machine replicas: at every step it considers *all* feasible
//! (unplaced VM, machine) pairs, then either exploits the best pheromone
//! times heuristic product (with probability `q0`) or samples the pair set
//! proportionally. The heuristic blends the utilization gain of the target
//! machine with how cheap the move is; keeping a VM on its current host has
//! zero overhead, so cheap stays are favored unless releasing a machine pays
//! for the moves.
//!
//! Pheromone starts uniformly at the objective score of the first-fit
//! baseline and only the global-best map deposits. The search stops after
//! `n_cycle_term` cycles without improvement or once the improvement counter
//! hits `n_reset_max`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::ffdl1;
use crate::context::{ClusterContext, Consolidation};
use crate::error::{Error, Result};
use crate::model::{utilization_gain_from_fractions, MigrationMap, ResourceVector};
use crate::overhead::MigrationNetwork;
use crate::scalar::{real, Scalar};

/// Floor for the initial pheromone level when the seeding heuristic releases
/// nothing and therefore scores zero.
pub const TAU_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcsParams<S> {
    pub n_ants: usize,
    /// Cycles without improvement before the search stops.
    pub n_cycle_term: u32,
    /// Improvement count at which the search stops.
    pub n_reset_max: u32,
    /// Exponent on the heuristic inside the selection weight.
    pub beta: S,
    /// Pheromone decay per global update.
    pub delta: S,
    /// Probability of exploiting the best pair instead of sampling.
    pub q0: S,
    /// Balance weight inside the utilization gain.
    pub omega: S,
    /// Weight of utilization gain versus migration cheapness.
    pub lambda: S,
}

impl<S: Scalar> Default for AcsParams<S> {
    fn default() -> Self {
        Self {
            n_ants: 5,
            n_cycle_term: 5,
            n_reset_max: 100,
            beta: S::one(),
            delta: real(0.3),
            q0: real(0.8),
            omega: real(0.5),
            lambda: real(0.05),
        }
    }
}

impl<S: Scalar> AcsParams<S> {
    pub fn validate(&self) -> Result<()> {
        if self.n_ants == 0 {
            return Err(Error::Config("need at least one ant".into()));
        }
        if self.n_cycle_term == 0 || self.n_reset_max == 0 {
            return Err(Error::Config("termination counters must be positive".into()));
        }
        if !(self.beta >= S::zero()) || !self.beta.is_finite() {
            return Err(Error::Config("beta must be non-negative and finite".into()));
        }
        if !(self.delta > S::zero() && self.delta < S::one()) {
            return Err(Error::Config("delta must lie in (0, 1)".into()));
        }
        for (name, v) in [("q0", self.q0), ("omega", self.omega), ("lambda", self.lambda)] {
            if !(v >= S::zero() && v <= S::one()) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Selection desirability of a move: `lambda * gain + (1 - lambda) * (1 - overhead)`.
/// Both inputs live in `[0, 1]`, so the result does too.
pub fn heuristic_value<S: Scalar>(gain: S, overhead: S, lambda: S) -> S {
    lambda * gain + (S::one() - lambda) * (S::one() - overhead)
}

/// Uniform initial pheromone: the objective score of the first-fit baseline,
/// floored at [`TAU_FLOOR`].
pub fn initial_pheromone<S: Scalar, N: MigrationNetwork<S>>(
    ctx: &ClusterContext<'_, S, N>,
) -> Result<S> {
    Ok(ffdl1(ctx)?.objective.max(real(TAU_FLOOR)))
}

/// Pheromone trail per (VM, machine) pair of one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Pheromone<S> {
    values: Vec<S>,
    n_pms: usize,
}

impl<S: Scalar> Pheromone<S> {
    pub fn uniform(n_vms: usize, n_pms: usize, tau0: S) -> Self {
        Self { values: vec![tau0; n_vms * n_pms], n_pms }
    }

    pub fn get(&self, vi: usize, pi: usize) -> S {
        self.values[vi * self.n_pms + pi]
    }

    /// Global update: every trail decays by `delta`, pairs used by the best
    /// map gain `delta * value`. Trails stay positive for positive inputs.
    pub fn reinforce(&mut self, delta: S, value: S, best_targets: &[usize]) {
        let keep = S::one() - delta;
        for (vi, row) in self.values.chunks_mut(self.n_pms).enumerate() {
            for (pi, tau) in row.iter_mut().enumerate() {
                let deposit = if best_targets[vi] == pi { value } else { S::zero() };
                *tau = keep * *tau + delta * deposit;
            }
        }
    }
}

/// Partial solution of one ant.
pub struct AntState<S> {
    /// Local indices of VMs still to place, visit order shuffled per ant.
    remaining: Vec<usize>,
    loads: Vec<ResourceVector<S>>,
    map: MigrationMap,
    scratch: Vec<(usize, usize, S)>,
}

impl<S: Scalar> AntState<S> {
    pub fn new<N: MigrationNetwork<S>>(ctx: &ClusterContext<'_, S, N>) -> Self {
        Self {
            remaining: (0..ctx.n_vms()).collect(),
            loads: vec![ResourceVector::zero(); ctx.n_pms()],
            map: MigrationMap::new(),
            scratch: Vec::new(),
        }
    }

    pub fn shuffle<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.remaining.shuffle(rng);
    }

    pub fn remaining(&self) -> &[usize] {
        &self.remaining
    }

    pub fn loads(&self) -> &[ResourceVector<S>] {
        &self.loads
    }

    pub fn map(&self) -> &MigrationMap {
        &self.map
    }

    pub fn is_complete(&self) -> bool {
        self.remaining.is_empty()
    }

    pub fn into_map(self) -> MigrationMap {
        self.map
    }

    /// Commits the pair chosen by [`choose_move`].
    pub fn place<N: MigrationNetwork<S>>(
        &mut self,
        ctx: &ClusterContext<'_, S, N>,
        slot: usize,
        pi: usize,
    ) {
        let vi = self.remaining.swap_remove(slot);
        self.loads[pi].add_assign(&ctx.vm(vi).demand);
        self.map.set(ctx.vm_ids()[vi], ctx.pm_ids()[pi]);
    }
}

/// Picks the next (VM, machine) pair over the full feasible set.
///
/// Returns `(slot, pm_local)` where `slot` indexes [`AntState::remaining`].
/// With probability `q0` the pair with the largest `tau * eta^beta` wins
/// (ties broken by lowest VM id, then lowest machine id); otherwise the pair
/// is sampled proportionally to the weights, falling back to a uniform pick
/// if every weight is zero. An empty feasible set is an error.
pub fn choose_move<S, N, R>(
    ctx: &ClusterContext<'_, S, N>,
    state: &mut AntState<S>,
    pheromone: &Pheromone<S>,
    params: &AcsParams<S>,
    rng: &mut R,
) -> Result<(usize, usize)>
where
    S: Scalar,
    N: MigrationNetwork<S>,
    R: Rng + ?Sized,
{
    let beta_is_one = params.beta == S::one();
    let mut total = S::zero();
    let mut best: Option<(S, usize, usize, usize, usize)> = None;
    let (remaining, loads, scratch) = (&state.remaining, &state.loads, &mut state.scratch);
    scratch.clear();
    for (slot, &vi) in remaining.iter().enumerate() {
        let vm = ctx.vm(vi);
        for (pi, load) in loads.iter().enumerate() {
            let cap = ctx.capacity(pi);
            let post = load.add(&vm.demand);
            if !post.fits_within(cap) {
                continue;
            }
            let fractions = [post.cpu / cap.cpu, post.mem / cap.mem, post.net / cap.net];
            let gain = utilization_gain_from_fractions(fractions, params.omega);
            let eta = heuristic_value(gain, ctx.mo(vi, pi), params.lambda);
            let weight =
                pheromone.get(vi, pi) * if beta_is_one { eta } else { eta.powf(params.beta) };
            total += weight;
            scratch.push((slot, pi, weight));
            let key = (ctx.vm_ids()[vi], ctx.pm_ids()[pi]);
            let better = match best {
                None => true,
                Some((bw, bvm, bpm, _, _)) => weight > bw || (weight == bw && key < (bvm, bpm)),
            };
            if better {
                best = Some((weight, key.0, key.1, slot, pi));
            }
        }
    }
    let Some((_, _, _, best_slot, best_pi)) = best else {
        let vm = remaining.iter().map(|&vi| ctx.vm_ids()[vi]).min().expect("nothing to place");
        return Err(Error::Infeasible { vm });
    };

    let q: S = rng.random_range(S::zero()..S::one());
    if q <= params.q0 {
        return Ok((best_slot, best_pi));
    }
    if total > S::zero() {
        let r: S = rng.random_range(S::zero()..total);
        let mut acc = S::zero();
        for &(slot, pi, w) in scratch.iter() {
            acc += w;
            if r < acc {
                return Ok((slot, pi));
            }
        }
    }
    let &(slot, pi, _) = &scratch[rng.random_range(0..scratch.len())];
    Ok((slot, pi))
}

/// Attempts per ant before a construction dead end becomes an error.
const CONSTRUCT_ATTEMPTS: u32 = 32;

fn construct<S, N, R>(
    ctx: &ClusterContext<'_, S, N>,
    pheromone: &Pheromone<S>,
    params: &AcsParams<S>,
    rng: &mut R,
) -> Result<MigrationMap>
where
    S: Scalar,
    N: MigrationNetwork<S>,
    R: Rng + ?Sized,
{
    let mut last = None;
    for _ in 0..CONSTRUCT_ATTEMPTS {
        let mut state = AntState::new(ctx);
        state.shuffle(rng);
        let done = loop {
            if state.is_complete() {
                break true;
            }
            match choose_move(ctx, &mut state, pheromone, params, rng) {
                Ok((slot, pi)) => state.place(ctx, slot, pi),
                // Dead end: random placements starved a VM of all targets.
                // Throw the partial map away and rebuild.
                Err(e @ Error::Infeasible { .. }) => {
                    last = Some(e);
                    break false;
                }
                Err(e) => return Err(e),
            }
        };
        if done {
            return Ok(state.into_map());
        }
    }
    Err(last.expect("construction only retries after a dead end"))
}

/// Runs the full colony on one cluster.
pub fn consolidate<S, N, R>(
    ctx: &ClusterContext<'_, S, N>,
    params: &AcsParams<S>,
    rng: &mut R,
) -> Result<Consolidation<S>>
where
    S: Scalar,
    N: MigrationNetwork<S>,
    R: Rng + ?Sized,
{
    params.validate()?;
    let tau0 = initial_pheromone(ctx)?;
    let mut pheromone = Pheromone::uniform(ctx.n_vms(), ctx.n_pms(), tau0);
    let mut best: Option<(MigrationMap, S)> = None;
    let mut best_targets = vec![0usize; ctx.n_vms()];
    let mut trace = Vec::new();
    let mut idle_cycles = 0u32;
    let mut improvements = 0u32;

    loop {
        idle_cycles += 1;
        for _ in 0..params.n_ants {
            let map = construct(ctx, &pheromone, params, rng)?;
            let objective = ctx.objective_of(&map)?;
            let adopt = match &best {
                // The first completed map becomes the incumbent without
                // counting as an improvement.
                None => true,
                Some((_, best_objective)) => {
                    let improved = objective > *best_objective;
                    if improved {
                        idle_cycles = 0;
                        improvements += 1;
                    }
                    improved
                }
            };
            if adopt {
                for (vm, pm) in map.iter() {
                    best_targets[ctx.local_vm(vm).expect("cluster vm")] =
                        ctx.local_pm(pm).expect("cluster pm");
                }
                best = Some((map, objective));
            }
        }
        let (_, best_objective) = best.as_ref().expect("at least one ant ran");
        pheromone.reinforce(params.delta, *best_objective, &best_targets);
        trace.push(*best_objective);
        if idle_cycles >= params.n_cycle_term || improvements >= params.n_reset_max {
            break;
        }
    }

    let (map, objective) = best.expect("search ran at least one cycle");
    Ok(ctx.consolidation(map, objective, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ObjectiveParams, PhysicalMachine, VirtualMachine};
    use crate::overhead::{MigrationConfig, UniformNetwork};
    use crate::topology::Cluster;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cap() -> ResourceVector<f64> {
        ResourceVector::new(5.0, 10240.0, 1000.0)
    }

    fn vm(id: usize, mem: f64, host: usize) -> VirtualMachine<f64> {
        VirtualMachine {
            id,
            demand: ResourceVector::new(1.0, mem, 100.0),
            dirty_rate: 0.0,
            host,
        }
    }

    struct Fixture {
        cluster: Cluster,
        pms: Vec<PhysicalMachine<f64>>,
        vms: Vec<VirtualMachine<f64>>,
        net: UniformNetwork<f64>,
        cfg: MigrationConfig<f64>,
        obj: ObjectiveParams<f64>,
    }

    impl Fixture {
        fn ctx(&self) -> ClusterContext<'_, f64, UniformNetwork<f64>> {
            ClusterContext::new(&self.cluster, &self.pms, &self.vms, &self.net, &self.cfg, &self.obj)
                .unwrap()
        }
    }

    fn pair_fixture() -> Fixture {
        let mut pms: Vec<_> = (0..2).map(|id| PhysicalMachine::new(id, cap())).collect();
        // Asymmetric demands: with a symmetric pair every cross move is the
        // cluster-worst migration (overhead exactly 1), which the heuristic
        // all but excludes from exploration.
        let vms = vec![
            vm(0, 2048.0, 0),
            VirtualMachine {
                id: 1,
                demand: ResourceVector::new(0.5, 1024.0, 50.0),
                dirty_rate: 0.0,
                host: 1,
            },
        ];
        pms[0].hosted = vec![0];
        pms[1].hosted = vec![1];
        Fixture {
            cluster: Cluster { id: 0, pm_ids: vec![0, 1], vm_ids: vec![0, 1] },
            pms,
            vms,
            net: UniformNetwork { bandwidth_mb_s: 100.0, distance: 2.0 },
            cfg: MigrationConfig::default(),
            obj: ObjectiveParams::default(),
        }
    }

    fn lone_vm_fixture() -> Fixture {
        let mut pms = vec![PhysicalMachine::new(0, cap())];
        pms[0].hosted = vec![0];
        Fixture {
            cluster: Cluster { id: 0, pm_ids: vec![0], vm_ids: vec![0] },
            pms,
            vms: vec![vm(0, 2048.0, 0)],
            net: UniformNetwork { bandwidth_mb_s: 100.0, distance: 2.0 },
            cfg: MigrationConfig::default(),
            obj: ObjectiveParams::default(),
        }
    }

    #[test]
    fn heuristic_examples() {
        // Keep-in-place on a balanced half-loaded machine.
        assert_relative_eq!(heuristic_value(0.75, 0.0, 0.05), 0.9875, max_relative = 1e-12);
        // Worst possible move barely registers.
        assert_relative_eq!(heuristic_value(1.0, 1.0, 0.05), 0.05, max_relative = 1e-12);
        // lambda = 1 ignores overhead entirely.
        assert_eq!(heuristic_value(0.6, 1.0, 1.0), 0.6);
    }

    #[test]
    fn reinforce_examples() {
        let mut ph = Pheromone::uniform(1, 2, 1.0);
        // VM 0's best target is machine 0, global best scores 2.0.
        ph.reinforce(0.3, 2.0, &[0]);
        assert_relative_eq!(ph.get(0, 0), 1.3, max_relative = 1e-12);
        assert_relative_eq!(ph.get(0, 1), 0.7, max_relative = 1e-12);
        assert!(ph.get(0, 0) > 0.0 && ph.get(0, 1) > 0.0);
    }

    #[test]
    fn initial_pheromone_floors_at_zero_score() {
        // A single-machine cluster cannot release anything: first-fit scores
        // zero and the trail starts at the floor.
        let fx = lone_vm_fixture();
        assert_eq!(initial_pheromone(&fx.ctx()).unwrap(), TAU_FLOOR);
    }

    #[test]
    fn initial_pheromone_tracks_first_fit() {
        let fx = pair_fixture();
        let ctx = fx.ctx();
        let f = ffdl1(&ctx).unwrap().objective;
        assert!(f > TAU_FLOOR);
        assert_eq!(initial_pheromone(&ctx).unwrap(), f);
    }

    #[test]
    fn exploit_picks_best_pair_with_tiebreak() {
        let mut fx = pair_fixture();
        // Symmetric demands force genuine weight ties.
        fx.vms[1].demand = fx.vms[0].demand;
        let ctx = fx.ctx();
        let params = AcsParams { q0: 1.0, ..AcsParams::default() };
        let ph = Pheromone::uniform(2, 2, 1.0);
        let mut state = AntState::new(&ctx);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (slot, pi) = choose_move(&ctx, &mut state, &ph, &params, &mut rng).unwrap();
        // Both keep-in-place pairs tie on weight (identical demands, empty
        // replicas, zero overhead); the lowest (vm, pm) key wins.
        assert_eq!(state.remaining()[slot], 0);
        assert_eq!(pi, 0);
    }

    #[test]
    fn lone_feasible_pair_is_forced() {
        let fx = lone_vm_fixture();
        let ctx = fx.ctx();
        let params = AcsParams { q0: 0.0, ..AcsParams::default() };
        let ph = Pheromone::uniform(1, 1, 1e-6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..8 {
            let mut state = AntState::new(&ctx);
            let (slot, pi) = choose_move(&ctx, &mut state, &ph, &params, &mut rng).unwrap();
            assert_eq!((state.remaining()[slot], pi), (0, 0));
        }
    }

    #[test]
    fn exploration_follows_weights() {
        // One VM, two machines: weights are tau * eta for home and away.
        let fx = pair_fixture();
        let mut fx = fx;
        fx.cluster.vm_ids = vec![0];
        fx.pms[1].hosted = vec![];
        fx.vms.truncate(1);
        let ctx = fx.ctx();
        let params = AcsParams { q0: 0.0, ..AcsParams::default() };
        let ph = Pheromone::uniform(1, 2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);

        let mut state = AntState::new(&ctx);
        state.scratch.clear();
        let weights: Vec<f64> = {
            // Recompute the two weights the way choose_move does.
            let vm = ctx.vm(0);
            (0..2)
                .map(|pi| {
                    let cap = ctx.capacity(pi);
                    let post = vm.demand;
                    let fr = [post.cpu / cap.cpu, post.mem / cap.mem, post.net / cap.net];
                    let gain = utilization_gain_from_fractions(fr, params.omega);
                    heuristic_value(gain, ctx.mo(0, pi), params.lambda)
                })
                .collect()
        };
        let expect_home = weights[0] / (weights[0] + weights[1]);

        let trials = 20_000;
        let mut home = 0;
        for _ in 0..trials {
            let mut state = AntState::new(&ctx);
            let (_, pi) = choose_move(&ctx, &mut state, &ph, &params, &mut rng).unwrap();
            if pi == 0 {
                home += 1;
            }
        }
        let freq = home as f64 / trials as f64;
        assert!(
            (freq - expect_home).abs() < 0.015,
            "exploration frequency {freq} too far from {expect_home}"
        );
        let _ = state;
    }

    #[test]
    fn lone_cluster_terminates_after_idle_budget() {
        let fx = lone_vm_fixture();
        let ctx = fx.ctx();
        let params = AcsParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let result = consolidate(&ctx, &params, &mut rng).unwrap();
        // Nothing can improve on the identity, so exactly n_cycle_term
        // cycles run and the score stays zero.
        assert_eq!(result.trace.len(), params.n_cycle_term as usize);
        assert_eq!(result.objective, 0.0);
        assert_eq!(result.map, ctx.identity_map());
        assert_eq!(result.released, 0);
        assert_eq!(result.migrations, 0);
    }

    #[test]
    fn consolidates_cofitting_pair() {
        let fx = pair_fixture();
        let ctx = fx.ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let result = consolidate(&ctx, &AcsParams::default(), &mut rng).unwrap();
        assert_eq!(result.released, 1);
        assert_eq!(result.migrations, 1);
        assert!(result.objective > 0.0);
        assert!(ctx.validate(&result.map).is_empty());
        assert!(result.trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn consolidate_is_deterministic() {
        let fx = pair_fixture();
        let ctx = fx.ctx();
        let a = consolidate(&ctx, &AcsParams::default(), &mut ChaCha8Rng::seed_from_u64(11))
            .unwrap();
        let b = consolidate(&ctx, &AcsParams::default(), &mut ChaCha8Rng::seed_from_u64(11))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn params_validation() {
        let p = AcsParams::<f64> { delta: 1.0, ..Default::default() };
        assert!(p.validate().is_err());
        let p = AcsParams::<f64> { q0: 1.5, ..Default::default() };
        assert!(p.validate().is_err());
        assert!(AcsParams::<f64>::default().validate().is_ok());
    }
}
