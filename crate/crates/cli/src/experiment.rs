//! Scaling experiments: sweep one workload knob, run the selected
//! algorithms over every cluster for several repetitions, and aggregate
//! data-center-wide metrics into CSV rows.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use dvmc_core::acs::{self, AcsParams};
use dvmc_core::baselines::{ffdl1, mmdvmc};
use dvmc_core::context::{ClusterContext, Consolidation};
use dvmc_core::metrics::{self, ClusterReport};
use dvmc_core::model::packing_efficiency;
use dvmc_core::workload::{generate, splitmix64, vm_count, DataCenter, SweepKind};
use dvmc_core::Real;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// One-shot decreasing first fit, ignores migration cost.
    Ffdl1,
    /// Max-min pheromone search scoring released machines per migration.
    Mmdvmc,
    /// Colony search over the migration-overhead-aware objective.
    Amdvmc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ffdl1, Algorithm::Mmdvmc, Algorithm::Amdvmc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Ffdl1 => "ffdl1",
            Algorithm::Mmdvmc => "mmdvmc",
            Algorithm::Amdvmc => "amdvmc",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How data-center decision time is reported: clusters consolidate
/// independently, so a decentralized deployment pays the slowest cluster
/// while a centralized one pays the sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    #[default]
    Decentralized,
    Centralized,
}

fn default_repetitions() -> usize {
    30
}
fn default_cluster_size() -> usize {
    8
}
fn default_base_seed() -> u64 {
    42
}
fn default_n_pm() -> usize {
    1024
}
fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

/// A sweep description, loadable from TOML. Any [`RunConfig`] key may sit in
/// the same file to override model constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Which knob the sweep turns.
    pub sweep: SweepKind,
    /// Swept values: machine counts, or mean/spread demand fractions.
    pub values: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_cluster_size")]
    pub cluster_size: usize,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    /// Machine pool size for the demand sweeps (the pool sweep takes its
    /// size from the swept value instead).
    #[serde(default = "default_n_pm")]
    pub n_pm: usize,
    #[serde(default)]
    pub timing: TimingMode,
    #[serde(flatten)]
    pub run: RunConfig,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let spec: ExperimentSpec = toml::from_str(&text)
            .map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(CliError::Usage("sweep needs at least one value".into()));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(CliError::Usage(format!("swept value {v} is not finite")));
            }
            if self.sweep == SweepKind::PmCount && (v.fract() != 0.0 || v < 1.0) {
                return Err(CliError::Usage(format!(
                    "machine-pool sweep values must be positive integers, got {v}"
                )));
            }
        }
        if self.repetitions == 0 {
            return Err(CliError::Usage("repetitions must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Usage("select at least one algorithm".into()));
        }
        self.run.validate()?;
        Ok(())
    }
}

/// Data-center-wide metric totals for one consolidation run, in report
/// units: data in TB, times in hours, power in kW, energy in kJ.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DcMetrics {
    pub released_pms: f64,
    pub packing_efficiency: f64,
    pub power_kw: f64,
    pub wastage: f64,
    pub md_tb: f64,
    pub mt_hours: f64,
    pub dt_hours: f64,
    pub network_cost: f64,
    pub migration_overhead: f64,
    pub mec_kj: f64,
    pub msv: f64,
    pub decision_time_s: f64,
}

pub const METRIC_NAMES: [&str; 12] = [
    "released_pms",
    "packing_efficiency",
    "power_kw",
    "wastage",
    "md_tb",
    "mt_hours",
    "dt_hours",
    "network_cost",
    "migration_overhead",
    "mec_kj",
    "msv",
    "decision_time_s",
];

impl DcMetrics {
    pub fn to_array(self) -> [f64; 12] {
        [
            self.released_pms,
            self.packing_efficiency,
            self.power_kw,
            self.wastage,
            self.md_tb,
            self.mt_hours,
            self.dt_hours,
            self.network_cost,
            self.migration_overhead,
            self.mec_kj,
            self.msv,
            self.decision_time_s,
        ]
    }
}

/// Everything one algorithm produced on one data center.
pub struct RunOutcome {
    pub reports: Vec<ClusterReport<Real>>,
    pub consolidations: Vec<Consolidation<Real>>,
    pub decision_times_s: Vec<f64>,
}

impl RunOutcome {
    /// Folds per-cluster reports into data-center totals. Packing
    /// efficiency is computed data-center-wide, not averaged over clusters.
    pub fn aggregate(&self, timing: TimingMode) -> DcMetrics {
        let mut m = DcMetrics::default();
        let mut vms_total = 0;
        let mut active_total = 0;
        for r in &self.reports {
            m.released_pms += r.released as f64;
            vms_total += r.n_vms;
            active_total += r.active_after;
            m.power_kw += r.power_w / 1000.0;
            m.wastage += r.wastage;
            m.md_tb += r.overhead.data_mb / (1024.0 * 1024.0);
            m.mt_hours += r.overhead.time_s / 3600.0;
            m.dt_hours += r.overhead.downtime_s / 3600.0;
            m.network_cost += r.overhead.network_cost;
            m.migration_overhead += r.overhead.overhead;
            m.mec_kj += r.overhead.energy_j / 1000.0;
            m.msv += r.overhead.sla_violation;
        }
        m.packing_efficiency = packing_efficiency::<Real>(vms_total, active_total);
        m.decision_time_s = match timing {
            TimingMode::Decentralized => {
                self.decision_times_s.iter().copied().fold(0.0, f64::max)
            }
            TimingMode::Centralized => self.decision_times_s.iter().sum(),
        };
        m
    }
}

/// Runs one algorithm over every cluster of a data center. The per-cluster
/// decision time covers overhead precomputation plus the search itself.
pub fn consolidate_dc(
    dc: &DataCenter<Real>,
    algo: Algorithm,
    run: &RunConfig,
    cluster_size: usize,
    seed: u64,
) -> Result<RunOutcome> {
    let clusters = dc.clusters(cluster_size)?;
    let cfg = run.migration_config();
    let obj = run.objective_params();
    let acs_params: AcsParams<Real> = run.acs_params();
    let mm_params = run.mmdvmc_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut outcome = RunOutcome {
        reports: Vec::with_capacity(clusters.len()),
        consolidations: Vec::with_capacity(clusters.len()),
        decision_times_s: Vec::with_capacity(clusters.len()),
    };
    for cluster in &clusters {
        let started = Instant::now();
        let ctx = ClusterContext::new(cluster, &dc.pms, &dc.vms, &dc.network, &cfg, &obj)?;
        let cons = match algo {
            Algorithm::Ffdl1 => ffdl1(&ctx)?,
            Algorithm::Mmdvmc => mmdvmc(&ctx, &mm_params, &mut rng)?,
            Algorithm::Amdvmc => acs::consolidate(&ctx, &acs_params, &mut rng)?,
        };
        let decision = started.elapsed().as_secs_f64();
        let report = metrics::evaluate(&ctx, &cons.map)?;
        outcome.reports.push(report);
        outcome.consolidations.push(cons);
        outcome.decision_times_s.push(decision);
    }
    Ok(outcome)
}

/// One CSV row: mean and sample standard deviation of every metric over the
/// repetitions that succeeded.
pub struct SweepRow {
    pub sweep: SweepKind,
    pub value: f64,
    pub algorithm: Algorithm,
    pub repetitions: usize,
    pub mean: DcMetrics,
    pub std: DcMetrics,
}

/// Deterministic per-repetition seed: mixes the swept value and the
/// repetition index into the base seed.
pub fn derive_seed(base_seed: u64, value: f64, rep: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(value.to_bits()) ^ splitmix64(rep).rotate_left(32))
}

fn mean_std(samples: &[[f64; 12]]) -> (DcMetrics, DcMetrics) {
    let n = samples.len() as f64;
    let mut mean = [0.0; 12];
    let mut std = [0.0; 12];
    if samples.is_empty() {
        return (from_array(mean), from_array(std));
    }
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n;
        }
    }
    if samples.len() > 1 {
        for s in samples {
            for ((d, v), m) in std.iter_mut().zip(s).zip(&mean) {
                *d += (v - m) * (v - m) / (n - 1.0);
            }
        }
        for d in &mut std {
            *d = d.sqrt();
        }
    }
    (from_array(mean), from_array(std))
}

fn from_array(a: [f64; 12]) -> DcMetrics {
    DcMetrics {
        released_pms: a[0],
        packing_efficiency: a[1],
        power_kw: a[2],
        wastage: a[3],
        md_tb: a[4],
        mt_hours: a[5],
        dt_hours: a[6],
        network_cost: a[7],
        migration_overhead: a[8],
        mec_kj: a[9],
        msv: a[10],
        decision_time_s: a[11],
    }
}

/// Executes the sweep. Repetitions that fail (infeasible generation, search
/// failure) are reported as warnings and skipped; the row's `repetitions`
/// column counts the samples that made it in.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(Vec<SweepRow>, Vec<String>)> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for &value in &spec.values {
        let n_pm = match spec.sweep {
            SweepKind::PmCount => value as usize,
            SweepKind::MeanRsc | SweepKind::SdRsc => spec.n_pm,
        };
        let n_vm = vm_count(n_pm, spec.sweep, value).map_err(CliError::Core)?;
        eprintln!(
            "{} = {value}: {n_pm} machines, {n_vm} VMs, {} repetitions",
            spec.sweep.as_str(),
            spec.repetitions
        );
        let mut samples: Vec<Vec<[f64; 12]>> = vec![Vec::new(); spec.algorithms.len()];
        for rep in 0..spec.repetitions {
            let seed = derive_seed(spec.base_seed, value, rep as u64);
            let mut gen = spec.run.gen_config(n_pm, seed);
            match spec.sweep {
                SweepKind::PmCount => {}
                SweepKind::MeanRsc => gen.mean_rsc = value,
                SweepKind::SdRsc => gen.sd_rsc = value,
            }
            let dc = match generate(&gen, n_vm) {
                Ok(dc) => dc,
                Err(e) => {
                    warnings.push(format!(
                        "{} = {value}, repetition {rep}: generation failed ({e}); skipped",
                        spec.sweep.as_str()
                    ));
                    continue;
                }
            };
            for (ai, &algo) in spec.algorithms.iter().enumerate() {
                let algo_seed = splitmix64(seed ^ (ai as u64 + 1));
                match consolidate_dc(&dc, algo, &spec.run, spec.cluster_size, algo_seed) {
                    Ok(outcome) => {
                        samples[ai].push(outcome.aggregate(spec.timing).to_array());
                    }
                    Err(e) => {
                        warnings.push(format!(
                            "{} = {value}, repetition {rep}, {algo}: {e}; sample skipped",
                            spec.sweep.as_str()
                        ));
                    }
                }
            }
        }
        for (ai, &algo) in spec.algorithms.iter().enumerate() {
            if samples[ai].is_empty() {
                warnings.push(format!(
                    "{} = {value}, {algo}: no repetition succeeded; row contains zeros",
                    spec.sweep.as_str()
                ));
            }
            let (mean, std) = mean_std(&samples[ai]);
            rows.push(SweepRow {
                sweep: spec.sweep,
                value,
                algorithm: algo,
                repetitions: samples[ai].len(),
                mean,
                std,
            });
        }
    }
    Ok((rows, warnings))
}

/// CSV header: identity columns, then a mean/std pair per metric.
pub fn csv_header() -> String {
    let mut h = String::from("sweep,value,algorithm,repetitions");
    for name in METRIC_NAMES {
        h.push_str(&format!(",{name}_mean,{name}_std"));
    }
    h.push('\n');
    h
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: &mut W) -> std::io::Result<()> {
    out.write_all(csv_header().as_bytes())?;
    for row in rows {
        let mut line = format!(
            "{},{},{},{}",
            row.sweep.as_str(),
            row.value,
            row.algorithm,
            row.repetitions
        );
        for (m, s) in row.mean.to_array().iter().zip(row.std.to_array()) {
            line.push_str(&format!(",{m},{s}"));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_derivation_separates_axes() {
        let s = derive_seed(42, 64.0, 0);
        assert_ne!(s, derive_seed(42, 64.0, 1));
        assert_ne!(s, derive_seed(42, 128.0, 0));
        assert_ne!(s, derive_seed(43, 64.0, 0));
        assert_eq!(s, derive_seed(42, 64.0, 0));
    }

    #[test]
    fn aggregation_is_a_sum_with_unit_conversions() {
        use dvmc_core::overhead::OverheadReport;
        let report = |released, power_w, data_mb| ClusterReport::<Real> {
            cluster_id: 0,
            n_vms: 4,
            active_before: 2,
            active_after: 2,
            released,
            migrations: 1,
            power_w,
            wastage: 0.5,
            overhead: OverheadReport {
                data_mb,
                time_s: 1800.0,
                downtime_s: 36.0,
                network_cost: 10.0,
                overhead: 0.25,
                energy_j: 500.0,
                sla_violation: 1.0,
            },
            objective: 1.0,
        };
        let outcome = RunOutcome {
            reports: vec![report(3, 400.0, 512.0 * 1024.0 * 1024.0), report(4, 200.0, 0.0)],
            consolidations: vec![],
            decision_times_s: vec![2.0, 3.0],
        };
        let m = outcome.aggregate(TimingMode::Decentralized);
        assert_eq!(m.released_pms, 7.0);
        assert_eq!(m.packing_efficiency, 2.0);
        approx::assert_relative_eq!(m.power_kw, 0.6, max_relative = 1e-12);
        approx::assert_relative_eq!(m.md_tb, 512.0, max_relative = 1e-12);
        approx::assert_relative_eq!(m.mt_hours, 1.0, max_relative = 1e-12);
        approx::assert_relative_eq!(m.dt_hours, 0.02, max_relative = 1e-12);
        approx::assert_relative_eq!(m.mec_kj, 1.0, max_relative = 1e-12);
        assert_eq!(m.decision_time_s, 3.0);
        let c = outcome.aggregate(TimingMode::Centralized);
        assert_eq!(c.decision_time_s, 5.0);
    }

    #[test]
    fn spec_validation_rejects_fractional_pool_sizes() {
        let spec: ExperimentSpec =
            toml::from_str("sweep = \"pm_count\"\nvalues = [64.5]").unwrap();
        assert!(spec.validate().is_err());
        let ok: ExperimentSpec = toml::from_str("sweep = \"pm_count\"\nvalues = [64]").unwrap();
        ok.validate().unwrap();
        assert_eq!(ok.repetitions, 30);
        assert_eq!(ok.algorithms, Algorithm::ALL.to_vec());
    }

    #[test]
    fn spec_accepts_flattened_run_overrides() {
        let spec: ExperimentSpec =
            toml::from_str("sweep = \"mean_rsc\"\nvalues = [0.05]\nq0 = 0.9\n").unwrap();
        assert_eq!(spec.run.q0, 0.9);
        assert_eq!(spec.timing, TimingMode::Decentralized);
    }

    #[test]
    fn tiny_experiment_produces_rows() {
        let spec: ExperimentSpec = toml::from_str(
            "sweep = \"pm_count\"\nvalues = [8]\nrepetitions = 2\nalgorithms = [\"ffdl1\"]\n",
        )
        .unwrap();
        let (rows, warnings) = run_experiment(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(rows[0].repetitions, 2);
        assert!(rows[0].mean.to_array().iter().all(|v| v.is_finite()));
        let mut csv = Vec::new();
        write_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("sweep,value,algorithm,repetitions,released_pms_mean"));
        assert_eq!(text.lines().count(), 2);
    }
}
