//! Whole-project acceptance gate.
//!
//! Nine checks cover the migration estimator oracles, constraint handling,
//! small-instance optimality, convergence, directional behavior at scale,
//! sweep shapes, decision-time bounds, determinism and the power anchors.
//! Every check prints one `criterion N (...): PASS/FAIL` line; the test
//! panics at the end if any check failed, so a failing run always shows the
//! full scoreboard.

use std::time::Instant;

use dvmc_cli::config::RunConfig;
use dvmc_cli::experiment::{run_experiment, write_csv, Algorithm, ExperimentSpec, TimingMode};
use dvmc_core::context::ClusterContext;
use dvmc_core::metrics;
use dvmc_core::model::{
    power_from_cpu_fraction, MigrationMap, PhysicalMachine, ResourceVector, VirtualMachine,
};
use dvmc_core::overhead::{estimate_migration, MigrationConfig, UniformNetwork};
use dvmc_core::workload::{generate, splitmix64, DataCenter, GenConfig, SweepKind};
use dvmc_core::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Scoreboard {
    lines: Vec<String>,
    failures: Vec<String>,
}

impl Scoreboard {
    fn record(&mut self, id: u32, name: &str, pass: bool, details: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        self.lines.push(format!("criterion {id} ({name}): {verdict} - {details}"));
        if !pass {
            self.failures.push(format!("criterion {id} ({name}): {details}"));
        }
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if b == 0.0 {
        return a == 0.0;
    }
    ((a - b) / b).abs() <= tol
}

/// Least-squares slope of y over x.
fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Estimator oracles: hand-traced pre-copy runs at 1e-9 relative, and a
/// same-host move costing exactly nothing.
fn criterion_1(board: &mut Scoreboard) {
    let started = Instant::now();
    let cfg = MigrationConfig::<Real>::default();
    let vm = |dirty: Real| VirtualMachine {
        id: 0,
        demand: ResourceVector::new(1.0, 1000.0, 10.0),
        dirty_rate: dirty,
        host: 0,
    };

    let idle = estimate_migration(
        &vm(0.0),
        1,
        &UniformNetwork { bandwidth_mb_s: 100.0, distance: 2.0 },
        &cfg,
    )
    .unwrap();
    let busy = estimate_migration(
        &vm(50.0),
        1,
        &UniformNetwork { bandwidth_mb_s: 500.0, distance: 2.0 },
        &cfg,
    )
    .unwrap();
    let stay = estimate_migration(
        &vm(50.0),
        0,
        &UniformNetwork { bandwidth_mb_s: 500.0, distance: 2.0 },
        &cfg,
    )
    .unwrap();

    let tol = 1e-9;
    let idle_ok = rel_close(idle.data_mb, 1000.0, tol)
        && rel_close(idle.time_s, 10.0, tol)
        && rel_close(idle.downtime_s, 0.020, tol);
    let busy_ok = rel_close(busy.data_mb, 1100.0, tol)
        && rel_close(busy.time_s, 2.2, tol)
        && rel_close(busy.downtime_s, 0.22, tol);
    let stay_ok = stay.data_mb == 0.0
        && stay.time_s == 0.0
        && stay.downtime_s == 0.0
        && stay.network_cost == 0.0;
    let elapsed = started.elapsed().as_secs_f64();
    let pass = idle_ok && busy_ok && stay_ok && elapsed < 1.0;
    board.record(
        1,
        "estimator oracles",
        pass,
        format!(
            "idle trace {} busy trace {} same-host zeros {} in {elapsed:.3} s",
            idle_ok, busy_ok, stay_ok
        ),
    );
}

fn oracle_valid(
    mm: &MigrationMap,
    pm_ids: &[usize],
    vm_ids: &[usize],
    pms: &[PhysicalMachine<Real>],
    vms: &[VirtualMachine<Real>],
) -> bool {
    let mut loads = vec![ResourceVector::<Real>::zero(); pms.len()];
    for &vm in vm_ids {
        match mm.target(vm) {
            None => return false,
            Some(pm) => {
                if !pm_ids.contains(&pm) {
                    return false;
                }
                loads[pm].add_assign(&vms[vm].demand);
            }
        }
    }
    pm_ids.iter().all(|&pm| loads[pm].fits_within(&pms[pm].capacity))
}

/// Constraint suite: at least 10,000 maps checked against an independent
/// feasibility oracle, and every algorithm-returned map valid.
fn criterion_2(board: &mut Scoreboard) {
    let started = Instant::now();
    let run = RunConfig::default();
    let cfg = run.migration_config();
    let obj = run.objective_params();
    let acs_params = run.acs_params();
    let mm_params = run.mmdvmc_params();

    let mut checked = 0usize;
    let mut disagreements = 0usize;
    let mut algo_maps = 0usize;
    let mut algo_invalid = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for dc_seed in 0..12u64 {
        let gen = GenConfig { n_pm: 24, seed: 200 + dc_seed, ..GenConfig::default() };
        let dc = generate(&gen, 48).expect("generation at default workload settings");
        for cluster in dc.clusters(8).unwrap() {
            let ctx =
                ClusterContext::new(&cluster, &dc.pms, &dc.vms, &dc.network, &cfg, &obj).unwrap();
            for algo in Algorithm::ALL {
                let cons = match algo {
                    Algorithm::Ffdl1 => dvmc_core::baselines::ffdl1(&ctx),
                    Algorithm::Mmdvmc => dvmc_core::baselines::mmdvmc(&ctx, &mm_params, &mut rng),
                    Algorithm::Amdvmc => dvmc_core::acs::consolidate(&ctx, &acs_params, &mut rng),
                }
                .unwrap();
                algo_maps += 1;
                checked += 1;
                if !ctx.validate(&cons.map).is_empty() {
                    algo_invalid += 1;
                }
            }
            for _ in 0..280 {
                let mut mm = MigrationMap::new();
                for &vm in &cluster.vm_ids {
                    // Roughly one map in ten is left incomplete on purpose.
                    if rng.random_range(0..10 * cluster.vm_ids.len()) == 0 {
                        continue;
                    }
                    let pm = cluster.pm_ids[rng.random_range(0..cluster.pm_ids.len())];
                    mm.set(vm, pm);
                }
                let expected =
                    oracle_valid(&mm, &cluster.pm_ids, &cluster.vm_ids, &dc.pms, &dc.vms);
                if ctx.validate(&mm).is_empty() != expected {
                    disagreements += 1;
                }
                checked += 1;
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let pass =
        checked >= 10_000 && disagreements == 0 && algo_invalid == 0 && elapsed < 30.0;
    board.record(
        2,
        "constraint suite",
        pass,
        format!(
            "{checked} maps checked, {disagreements} oracle disagreements, \
             {algo_invalid}/{algo_maps} invalid algorithm maps in {elapsed:.1} s"
        ),
    );
}

/// One toy data center small enough to enumerate exhaustively.
fn toy_instance(index: u64) -> DataCenter<Real> {
    let n_pm = 2 + (index % 2) as usize;
    let n_vm = 3 + (index % 3) as usize;
    let gen = GenConfig {
        n_pm,
        mean_rsc: 0.15,
        sd_rsc: 0.1,
        ports_per_switch: 2,
        seed: 1000 + index,
        ..GenConfig::default()
    };
    let mut seed = gen.seed;
    for _ in 0..8 {
        // Dense toys sometimes have no feasible initial placement; redraw.
        match generate(&GenConfig { seed, ..gen.clone() }, n_vm) {
            Ok(dc) => return dc,
            Err(_) => seed = splitmix64(seed),
        }
    }
    panic!("no feasible toy instance near seed {}", gen.seed);
}

fn best_by_enumeration<N: dvmc_core::overhead::MigrationNetwork<Real>>(
    ctx: &ClusterContext<'_, Real, N>,
) -> Real {
    let n_pm = ctx.n_pms();
    let n_vm = ctx.n_vms();
    let mut best = 0.0f64;
    for mut code in 0..n_pm.pow(n_vm as u32) {
        let mut mm = MigrationMap::new();
        for v in 0..n_vm {
            mm.set(ctx.vm_ids()[v], ctx.pm_ids()[code % n_pm]);
            code /= n_pm;
        }
        if ctx.validate(&mm).is_empty() {
            best = best.max(metrics::evaluate(ctx, &mm).unwrap().objective);
        }
    }
    best
}

/// Small-instance optimality plus the convergence invariant, which reuses
/// the same 200 runs.
fn criteria_3_and_4(board: &mut Scoreboard) {
    let started = Instant::now();
    let run = RunConfig::default();
    let cfg = run.migration_config();
    let obj = run.objective_params();
    let acs_params = run.acs_params();

    let total = 200usize;
    let mut within = 0usize;
    let mut trace_violations = 0usize;
    for i in 0..total {
        let dc = toy_instance(i as u64);
        // Round the cluster size up to the switch fan-out so the whole toy
        // forms a single cluster.
        let clusters = dc.clusters(dc.pms.len().div_ceil(2) * 2).unwrap();
        assert_eq!(clusters.len(), 1);
        let ctx =
            ClusterContext::new(&clusters[0], &dc.pms, &dc.vms, &dc.network, &cfg, &obj).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + i as u64);
        let result = dvmc_core::acs::consolidate(&ctx, &acs_params, &mut rng).unwrap();
        let optimum = best_by_enumeration(&ctx);
        if result.objective >= 0.95 * optimum {
            within += 1;
        }
        if result.trace.windows(2).any(|w| w[1] < w[0]) {
            trace_violations += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let needed = (total * 95).div_ceil(100);
    board.record(
        3,
        "small-instance optimality",
        within >= needed && elapsed < 60.0,
        format!("{within}/{total} within 5% of enumerated optimum (need {needed}) in {elapsed:.1} s"),
    );
    board.record(
        4,
        "non-decreasing best trace",
        trace_violations == 0,
        format!("{trace_violations}/{total} runs with a decreasing global-best trace"),
    );
}

fn spec_with(sweep: SweepKind, values: Vec<f64>, algorithms: Vec<Algorithm>) -> ExperimentSpec {
    ExperimentSpec {
        sweep,
        values,
        repetitions: 30,
        algorithms,
        cluster_size: 8,
        base_seed: 42,
        n_pm: 64,
        timing: TimingMode::Decentralized,
        run: RunConfig::default(),
    }
}

/// Directional reproduction at 64 machines and 128 VMs over 30 repetitions:
/// overhead-aware consolidation pays far less migration overhead than the
/// overhead-blind packer, releases more machines than the pheromone-band
/// baseline, and the overhead-blind packer releases at least as many
/// machines as the overhead-aware one.
fn criterion_5(board: &mut Scoreboard) {
    let started = Instant::now();
    let spec = spec_with(SweepKind::PmCount, vec![64.0], Algorithm::ALL.to_vec());
    let (rows, warnings) = run_experiment(&spec).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    let mean_of = |algo: Algorithm| {
        let row = rows.iter().find(|r| r.algorithm == algo).unwrap();
        assert_eq!(row.repetitions, 30);
        row.mean
    };
    let ffdl1 = mean_of(Algorithm::Ffdl1);
    let mmdvmc = mean_of(Algorithm::Mmdvmc);
    let amdvmc = mean_of(Algorithm::Amdvmc);
    let elapsed = started.elapsed().as_secs_f64();

    let mo_ok = amdvmc.migration_overhead <= 0.6 * ffdl1.migration_overhead;
    let release_ok = amdvmc.released_pms > mmdvmc.released_pms;
    let blind_ok = ffdl1.released_pms >= amdvmc.released_pms;
    board.record(
        5,
        "directional scale ordering",
        mo_ok && release_ok && blind_ok && elapsed < 300.0,
        format!(
            "overhead {:.3} vs {:.3} (ratio {:.3}), released {:.2} > {:.2} and {:.2} >= {:.2}, \
             in {elapsed:.1} s",
            amdvmc.migration_overhead,
            ffdl1.migration_overhead,
            amdvmc.migration_overhead / ffdl1.migration_overhead,
            amdvmc.released_pms,
            mmdvmc.released_pms,
            ffdl1.released_pms,
            amdvmc.released_pms
        ),
    );
}

/// Sweep-shape reproduction over mean demand: the overhead-blind packer's
/// migrated-data curve rises with demand while the overhead-aware curve is
/// flat or falling beyond the first point, judged by least-squares slope.
fn criterion_6(board: &mut Scoreboard) {
    let started = Instant::now();
    let values = vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30];
    let spec = spec_with(
        SweepKind::MeanRsc,
        values.clone(),
        vec![Algorithm::Ffdl1, Algorithm::Amdvmc],
    );
    let (rows, warnings) = run_experiment(&spec).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    let series = |algo: Algorithm| -> Vec<f64> {
        values
            .iter()
            .map(|&v| {
                rows.iter()
                    .find(|r| r.algorithm == algo && r.value == v)
                    .unwrap()
                    .mean
                    .md_tb
            })
            .collect()
    };
    let blind = series(Algorithm::Ffdl1);
    let aware = series(Algorithm::Amdvmc);
    let blind_slope = slope(&values, &blind);
    let aware_slope = slope(&values[1..], &aware[1..]);
    let elapsed = started.elapsed().as_secs_f64();
    board.record(
        6,
        "mean-demand sweep shapes",
        blind_slope > 0.0 && aware_slope <= 0.0 && elapsed < 600.0,
        format!(
            "blind packer slope {blind_slope:.4} TB per unit demand (want > 0), \
             overhead-aware tail slope {aware_slope:.4} (want <= 0), in {elapsed:.1} s"
        ),
    );
}

/// Decision-time bounds: one large 48-machine cluster finishes within a
/// minute, and the default 8-machine clusters finish within a second each.
fn criterion_7(board: &mut Scoreboard) {
    let run = RunConfig::default();
    let cfg = run.migration_config();
    let obj = run.objective_params();
    let acs_params = run.acs_params();

    let dc48 = generate(&GenConfig { n_pm: 48, seed: 7000, ..GenConfig::default() }, 96).unwrap();
    let clusters = dc48.clusters(48).unwrap();
    assert_eq!(clusters.len(), 1);
    let started = Instant::now();
    let ctx =
        ClusterContext::new(&clusters[0], &dc48.pms, &dc48.vms, &dc48.network, &cfg, &obj).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    dvmc_core::acs::consolidate(&ctx, &acs_params, &mut rng).unwrap();
    let large = started.elapsed().as_secs_f64();

    let dc64 = generate(&GenConfig { n_pm: 64, seed: 7002, ..GenConfig::default() }, 128).unwrap();
    let mut worst_small = 0.0f64;
    for cluster in dc64.clusters(8).unwrap() {
        let started = Instant::now();
        let ctx =
            ClusterContext::new(&cluster, &dc64.pms, &dc64.vms, &dc64.network, &cfg, &obj).unwrap();
        dvmc_core::acs::consolidate(&ctx, &acs_params, &mut rng).unwrap();
        worst_small = worst_small.max(started.elapsed().as_secs_f64());
    }
    board.record(
        7,
        "decision-time bounds",
        large <= 60.0 && worst_small <= 1.0,
        format!("48-machine cluster {large:.2} s (cap 60), worst 8-machine cluster {worst_small:.3} s (cap 1)"),
    );
}

fn strip_timing_columns(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            // The two decision-time columns sit at the end of every row.
            fields[..fields.len() - 2].join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Determinism: the same spec and seed reproduce the CSV byte for byte once
/// the wall-clock columns are removed.
fn criterion_8(board: &mut Scoreboard) {
    let mut spec = spec_with(SweepKind::PmCount, vec![16.0], Algorithm::ALL.to_vec());
    spec.repetitions = 2;
    let render = || {
        let (rows, _) = run_experiment(&spec).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let first = render();
    let second = render();
    let pass = strip_timing_columns(&first) == strip_timing_columns(&second);
    board.record(
        8,
        "experiment determinism",
        pass,
        format!(
            "two runs {} after dropping timing columns",
            if pass { "identical" } else { "differ" }
        ),
    );
}

/// Power anchors: an active machine at zero CPU draws exactly 162 W and at
/// full CPU exactly 215 W.
fn criterion_9(board: &mut Scoreboard) {
    let idle: Real = power_from_cpu_fraction(0.0);
    let full: Real = power_from_cpu_fraction(1.0);
    board.record(
        9,
        "power-model anchors",
        idle == 162.0 && full == 215.0,
        format!("idle-active {idle} W, full {full} W"),
    );
}

#[test]
fn acceptance_criteria() {
    let mut board = Scoreboard { lines: Vec::new(), failures: Vec::new() };
    criterion_1(&mut board);
    criterion_2(&mut board);
    criteria_3_and_4(&mut board);
    criterion_5(&mut board);
    criterion_6(&mut board);
    criterion_7(&mut board);
    criterion_8(&mut board);
    criterion_9(&mut board);
    for line in &board.lines {
        println!("{line}");
    }
    assert!(
        board.failures.is_empty(),
        "{} acceptance criteria failed:\n{}",
        board.failures.len(),
        board.failures.join("\n")
    );
}
