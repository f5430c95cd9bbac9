use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dvmc_cli::config::RunConfig;
use dvmc_cli::experiment::{
    consolidate_dc, run_experiment, write_csv, Algorithm, ExperimentSpec, METRIC_NAMES,
};
use dvmc_cli::{plot, snapshot, CliError, Result};
use dvmc_core::workload::{generate, vm_count, SweepKind};

#[derive(Parser)]
#[command(name = "dvmc", version, about = "Data-center VM consolidation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic data center and store it as a JSON snapshot
    Generate {
        /// Number of physical machines
        #[arg(long, default_value_t = 64)]
        pms: usize,
        /// Number of VMs (default: twice the machine count)
        #[arg(long)]
        vms: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Mean VM demand as a fraction of machine capacity
        #[arg(long)]
        mean_rsc: Option<f64>,
        /// Demand spread as a fraction of machine capacity
        #[arg(long)]
        sd_rsc: Option<f64>,
        /// Model constants, TOML (flags above win over file values)
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "snapshot.json")]
        out: PathBuf,
    },
    /// Consolidate a snapshot with one algorithm and print the metrics
    Consolidate {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, value_enum, default_value_t = Algorithm::Amdvmc)]
        algo: Algorithm,
        /// Machines per independently consolidated cluster
        #[arg(long, default_value_t = 8)]
        cluster_size: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Model constants, TOML
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the per-cluster search trace as CSV
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Run a sweep experiment described by a TOML spec and write a CSV
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Render one SVG chart per metric from an experiment CSV
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "plots")]
        out_dir: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { pms, vms, seed, mean_rsc, sd_rsc, config, out } => {
            let mut run = load_config(config.as_ref())?;
            if let Some(m) = mean_rsc {
                run.mean_rsc = m;
            }
            if let Some(s) = sd_rsc {
                run.sd_rsc = s;
            }
            run.validate()?;
            let n_vm = match vms {
                Some(v) => v,
                None => vm_count(pms, SweepKind::PmCount, pms as f64)?,
            };
            let dc = generate(&run.gen_config(pms, seed), n_vm)?;
            snapshot::save(&dc, &out)?;
            println!("machines: {}", dc.pms.len());
            println!("vms: {}", dc.vms.len());
            println!("seed: {seed}");
            println!("snapshot: {}", out.display());
        }
        Command::Consolidate { snapshot, algo, cluster_size, seed, config, trace_out } => {
            let run = load_config(config.as_ref())?;
            let dc = snapshot::load(&snapshot)?;
            let outcome = consolidate_dc(&dc, algo, &run, cluster_size, seed)?;
            let metrics = outcome.aggregate(Default::default());
            println!("algorithm: {algo}");
            println!("seed: {seed}");
            println!("clusters: {}", outcome.reports.len());
            for (name, value) in METRIC_NAMES.iter().zip(metrics.to_array()) {
                println!("{name}: {value}");
            }
            if let Some(path) = trace_out {
                let mut body = String::from("cluster,cycle,best_objective\n");
                for (ci, cons) in outcome.consolidations.iter().enumerate() {
                    for (cycle, best) in cons.trace.iter().enumerate() {
                        body.push_str(&format!("{ci},{cycle},{best}\n"));
                    }
                }
                std::fs::write(&path, body).map_err(CliError::io(&path))?;
                println!("trace: {}", path.display());
            }
        }
        Command::Experiment { spec, out } => {
            let spec = ExperimentSpec::load(&spec)?;
            let (rows, warnings) = run_experiment(&spec)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            let mut file = std::fs::File::create(&out).map_err(CliError::io(&out))?;
            write_csv(&rows, &mut file).map_err(|e| CliError::Io { path: out.clone(), source: e })?;
            file.flush().map_err(|e| CliError::Io { path: out.clone(), source: e })?;
            println!("rows: {}", rows.len());
            println!("csv: {}", out.display());
        }
        Command::Plot { csv, out_dir } => {
            let written = plot::emit_plots(&csv, &out_dir)?;
            for path in &written {
                println!("plot: {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
