//! Flat key-value run configuration. Every model constant is overridable
//! from one TOML file; omitted keys keep their defaults.

use std::path::Path;

use dvmc_core::acs::AcsParams;
use dvmc_core::baselines::MmdvmcParams;
use dvmc_core::model::{ObjectiveParams, ResourceVector};
use dvmc_core::overhead::MigrationConfig;
use dvmc_core::workload::GenConfig;
use dvmc_core::Real;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// One bag of knobs for a whole run: migration cost model, objective,
/// search parameters for both iterative algorithms, and workload shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    // Migration cost model.
    /// Remaining dirty volume below which stop-and-copy starts, MB.
    pub dv_th_mb: Real,
    /// Pre-copy rounds allowed before stop-and-copy is forced.
    pub max_round: u32,
    /// Writable-working-set regression coefficients and intercept.
    pub mu1: Real,
    pub mu2: Real,
    pub mu3: Real,
    /// Time to resume a VM on its destination, seconds.
    pub t_res_s: Real,
    /// Unified-overhead weights for data, time, downtime, network cost.
    pub alpha1: Real,
    pub alpha2: Real,
    pub alpha3: Real,
    pub alpha4: Real,
    /// Migration energy: joules per migrated MB and fixed joules per move.
    pub gamma1: Real,
    pub gamma2: Real,
    /// Fraction of CPU performance lost while migrating.
    pub sigma: Real,

    // Objective.
    /// Exponent on released machines.
    pub phi: Real,
    /// Floor on total overhead in the objective denominator.
    pub epsilon_mo: Real,

    // Colony search.
    pub n_ants: usize,
    /// Cycles without improvement before the search stops.
    pub n_cycle_term: u32,
    /// Improvement count at which the search stops.
    #[serde(alias = "n_cycle_max")]
    pub n_reset_max: u32,
    /// Exponent on the heuristic in the selection weight.
    pub beta: Real,
    /// Pheromone decay per global update.
    pub delta: Real,
    /// Probability of exploiting the best pair instead of sampling.
    pub q0: Real,
    /// Balance weight inside the utilization gain.
    pub omega: Real,
    /// Weight of utilization gain versus migration cheapness.
    pub lambda: Real,

    // Max-min baseline.
    pub mm_cycles: u32,
    pub mm_ants: usize,
    /// Pheromone clamp band.
    pub mm_tau_min: Real,
    pub mm_tau_max: Real,
    /// Evaporation rate per cycle.
    pub mm_evaporation: Real,

    // Workload shape.
    /// Mean and spread of per-resource demand fractions.
    pub mean_rsc: Real,
    pub sd_rsc: Real,
    /// Upper bound on dirty rate as a fraction of VM memory per second.
    pub page_dirty_fraction: Real,
    /// Machine capacity: CPU GHz, memory MB, network Mbps.
    pub pm_cpu_ghz: Real,
    pub pm_mem_mb: Real,
    pub pm_net_mbps: Real,
    /// Mean and spread of per-pair bandwidth availability fractions.
    pub mean_bw_fraction: Real,
    pub sd_bw_fraction: Real,
    /// Access-switch fan-out of the tree topology.
    pub ports_per_switch: usize,
    /// Distance per hop.
    pub distance_factor: Real,
    /// Migration link capacity, Mbps.
    pub link_capacity_mbps: Real,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mig = MigrationConfig::<Real>::default();
        let obj = ObjectiveParams::<Real>::default();
        let acs = AcsParams::<Real>::default();
        let mm = MmdvmcParams::<Real>::default();
        let gen = GenConfig::<Real>::default();
        Self {
            dv_th_mb: mig.dirty_threshold_mb,
            max_round: mig.max_rounds,
            mu1: mig.wws_time_coeff,
            mu2: mig.wws_dirty_coeff,
            mu3: mig.wws_intercept,
            t_res_s: mig.resume_time_s,
            alpha1: mig.weight_data,
            alpha2: mig.weight_time,
            alpha3: mig.weight_downtime,
            alpha4: mig.weight_network,
            gamma1: mig.energy_per_mb,
            gamma2: mig.energy_base_j,
            sigma: mig.sla_degradation,
            phi: obj.phi,
            epsilon_mo: obj.epsilon_mo,
            n_ants: acs.n_ants,
            n_cycle_term: acs.n_cycle_term,
            n_reset_max: acs.n_reset_max,
            beta: acs.beta,
            delta: acs.delta,
            q0: acs.q0,
            omega: acs.omega,
            lambda: acs.lambda,
            mm_cycles: mm.n_cycles,
            mm_ants: mm.n_ants,
            mm_tau_min: mm.tau_min,
            mm_tau_max: mm.tau_max,
            mm_evaporation: mm.evaporation,
            mean_rsc: gen.mean_rsc,
            sd_rsc: gen.sd_rsc,
            page_dirty_fraction: gen.page_dirty_fraction,
            pm_cpu_ghz: gen.pm_capacity.cpu,
            pm_mem_mb: gen.pm_capacity.mem,
            pm_net_mbps: gen.pm_capacity.net,
            mean_bw_fraction: gen.mean_bw_fraction,
            sd_bw_fraction: gen.sd_bw_fraction,
            ports_per_switch: gen.ports_per_switch,
            distance_factor: gen.distance_factor,
            link_capacity_mbps: gen.link_capacity_mbps,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Parse { path: path.into(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every constant through the owning library validator.
    pub fn validate(&self) -> Result<()> {
        self.migration_config().validate()?;
        self.objective_params().validate()?;
        self.acs_params().validate()?;
        self.mmdvmc_params().validate()?;
        self.gen_config(1, 0).validate()?;
        Ok(())
    }

    pub fn migration_config(&self) -> MigrationConfig<Real> {
        MigrationConfig {
            dirty_threshold_mb: self.dv_th_mb,
            max_rounds: self.max_round,
            wws_time_coeff: self.mu1,
            wws_dirty_coeff: self.mu2,
            wws_intercept: self.mu3,
            resume_time_s: self.t_res_s,
            weight_data: self.alpha1,
            weight_time: self.alpha2,
            weight_downtime: self.alpha3,
            weight_network: self.alpha4,
            energy_per_mb: self.gamma1,
            energy_base_j: self.gamma2,
            sla_degradation: self.sigma,
        }
    }

    pub fn objective_params(&self) -> ObjectiveParams<Real> {
        ObjectiveParams { phi: self.phi, epsilon_mo: self.epsilon_mo }
    }

    pub fn acs_params(&self) -> AcsParams<Real> {
        AcsParams {
            n_ants: self.n_ants,
            n_cycle_term: self.n_cycle_term,
            n_reset_max: self.n_reset_max,
            beta: self.beta,
            delta: self.delta,
            q0: self.q0,
            omega: self.omega,
            lambda: self.lambda,
        }
    }

    pub fn mmdvmc_params(&self) -> MmdvmcParams<Real> {
        MmdvmcParams {
            n_cycles: self.mm_cycles,
            n_ants: self.mm_ants,
            tau_min: self.mm_tau_min,
            tau_max: self.mm_tau_max,
            evaporation: self.mm_evaporation,
            omega: self.omega,
        }
    }

    pub fn gen_config(&self, n_pm: usize, seed: u64) -> GenConfig<Real> {
        GenConfig {
            n_pm,
            mean_rsc: self.mean_rsc,
            sd_rsc: self.sd_rsc,
            page_dirty_fraction: self.page_dirty_fraction,
            pm_capacity: ResourceVector::new(self.pm_cpu_ghz, self.pm_mem_mb, self.pm_net_mbps),
            mean_bw_fraction: self.mean_bw_fraction,
            sd_bw_fraction: self.sd_bw_fraction,
            ports_per_switch: self.ports_per_switch,
            distance_factor: self.distance_factor,
            link_capacity_mbps: self.link_capacity_mbps,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_match_library_defaults() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.migration_config(), MigrationConfig::default());
        assert_eq!(cfg.objective_params(), ObjectiveParams::default());
        assert_eq!(cfg.acs_params(), AcsParams::default());
        assert_eq!(cfg.mmdvmc_params(), MmdvmcParams::default());
        assert_eq!(cfg.gen_config(64, 42), GenConfig::default());
    }

    #[test]
    fn toml_overrides_single_keys() {
        let cfg: RunConfig = toml::from_str("q0 = 0.5\nmean_rsc = 0.25\n").unwrap();
        assert_eq!(cfg.q0, 0.5);
        assert_eq!(cfg.mean_rsc, 0.25);
        assert_eq!(cfg.n_ants, 5);
    }

    #[test]
    fn reset_cap_accepts_both_names() {
        let a: RunConfig = toml::from_str("n_reset_max = 7").unwrap();
        let b: RunConfig = toml::from_str("n_cycle_max = 7").unwrap();
        assert_eq!(a.n_reset_max, 7);
        assert_eq!(b.n_reset_max, 7);
    }

    #[test]
    fn bad_values_are_rejected() {
        let cfg: RunConfig = toml::from_str("delta = 1.5").unwrap();
        assert!(cfg.validate().is_err());
    }
}
