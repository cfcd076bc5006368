//! TOML experiment configuration: physical quantities entered in the usual
//! link-budget units (dB, dBm, dBW, meters) and converted to linear watts at
//! parse time, plus sweep/solver/validation settings and a provenance hash.

use std::fmt;
use std::path::Path;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::gcmma::MmaOptions;
use crate::model::SystemParams;
use crate::{Error, Result};

/// `10^(x/10)` — dB ratio to linear.
pub fn db_to_linear(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

/// dBW to watts.
pub fn dbw_to_watts(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub m: usize,
    pub n: usize,
    pub rho_0_db: f64,
    pub alpha: f64,
    pub d_ar_m: f64,
    pub d_rb_m: f64,
    pub d_rc_m: f64,
    pub d_rw_m: f64,
    pub sigma2_b_dbm: f64,
    pub sigma2_c_dbm: f64,
    pub sigma2_w_dbm: f64,
    pub phi_sic_db: f64,
    pub p_max_dbw: f64,
    pub p_j_max_dbw: f64,
    pub epsilon: f64,
    pub iota: f64,
    pub kappa: f64,
    pub r_star: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            m: 3,
            n: 30,
            rho_0_db: -20.0,
            alpha: 2.6,
            d_ar_m: 50.0,
            d_rb_m: 20.0,
            d_rc_m: 25.0,
            d_rw_m: 15.0,
            sigma2_b_dbm: -100.0,
            sigma2_c_dbm: -100.0,
            sigma2_w_dbm: -100.0,
            phi_sic_db: -110.0,
            p_max_dbw: 0.0,
            p_j_max_dbw: 0.0,
            epsilon: 0.1,
            iota: 0.1,
            kappa: 0.1,
            r_star: 4.0,
        }
    }
}

impl SystemConfig {
    pub fn to_params(&self) -> Result<SystemParams> {
        let params = SystemParams {
            m: self.m,
            n: self.n,
            rho_0: db_to_linear(self.rho_0_db),
            alpha: self.alpha,
            d_ar: self.d_ar_m,
            d_rb: self.d_rb_m,
            d_rc: self.d_rc_m,
            d_rw: self.d_rw_m,
            sigma2_b: dbm_to_watts(self.sigma2_b_dbm),
            sigma2_c: dbm_to_watts(self.sigma2_c_dbm),
            sigma2_w: dbm_to_watts(self.sigma2_w_dbm),
            phi_sic: db_to_linear(self.phi_sic_db),
            p_max: dbw_to_watts(self.p_max_dbw),
            p_j_max: dbw_to_watts(self.p_j_max_dbw),
            epsilon: self.epsilon,
            iota: self.iota,
            kappa: self.kappa,
            r_star: self.r_star,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Covertness slack ε (dimensionless values).
    Epsilon,
    /// STAR-RIS element count (integer values).
    N,
    /// Alice power budget (values in dBW).
    PMax,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Epsilon => "epsilon",
            SweepVariable::N => "n",
            SweepVariable::PMax => "p_max_dbw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Star,
    Baseline,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Star => "star",
            Scheme::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub channel_seeds: usize,
    pub multi_starts: usize,
    pub baseline_reflect_ratio: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            variable: SweepVariable::Epsilon,
            values: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
            schemes: vec![Scheme::Baseline, Scheme::Star],
            channel_seeds: 20,
            multi_starts: 5,
            baseline_reflect_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub epsilon_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub relative_gap: bool,
    pub feasibility_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = MmaOptions::default();
        SolverConfig {
            epsilon_tol: o.epsilon_tol,
            max_outer: o.max_outer,
            max_inner: o.max_inner,
            relative_gap: o.relative_gap,
            feasibility_tol: o.feasibility_tol,
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> MmaOptions {
        MmaOptions {
            epsilon_tol: self.epsilon_tol,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            relative_gap: self.relative_gap,
            feasibility_tol: self.feasibility_tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub mc_samples: usize,
    pub grid_points: usize,
    pub dep_configs: usize,
    pub outage_configs: usize,
    pub gradient_points: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            mc_samples: 1_000_000,
            grid_points: 100_000,
            dep_configs: 30,
            outage_configs: 30,
            gradient_points: 20,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Record wall-clock times in the CSV. Off by default so identical
    /// config + seed reruns produce byte-identical files.
    pub record_wall_ms: bool,
    /// Write per-run solver traces next to the CSV.
    pub traces: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    master_seed: u64,
    system: SystemConfig,
    sweep: SweepConfig,
    solver: SolverConfig,
    validate: ValidateConfig,
    output: OutputConfig,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            master_seed: 1,
            system: SystemConfig::default(),
            sweep: SweepConfig::default(),
            solver: SolverConfig::default(),
            validate: ValidateConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Parsed and validated experiment configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub master_seed: u64,
    pub system: SystemConfig,
    pub sweep: SweepConfig,
    pub solver: SolverConfig,
    pub validate: ValidateConfig,
    pub output: OutputConfig,
    /// SHA-256 of the source text, embedded in every output for provenance.
    pub hash: String,
}

impl Config {
    pub fn from_str(text: &str) -> Result<Config> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("config parse error: {e}")))?;
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let hash = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();
        let cfg = Config {
            master_seed: raw.master_seed,
            system: raw.system,
            sweep: raw.sweep,
            solver: raw.solver,
            validate: raw.validate,
            output: raw.output,
            hash,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::from_str(&text)
    }

    fn check(&self) -> Result<()> {
        // Whole-system sanity first (reports the offending field by name).
        self.system.to_params()?;
        if self.sweep.values.is_empty() {
            return Err(Error::config("sweep.values must not be empty"));
        }
        if self.sweep.schemes.is_empty() {
            return Err(Error::config("sweep.schemes must not be empty"));
        }
        if self.sweep.channel_seeds == 0 {
            return Err(Error::config("sweep.channel_seeds must be at least 1"));
        }
        if self.sweep.multi_starts == 0 {
            return Err(Error::config("sweep.multi_starts must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.sweep.baseline_reflect_ratio) {
            return Err(Error::config("sweep.baseline_reflect_ratio must lie in [0, 1]"));
        }
        for &v in &self.sweep.values {
            self.params_for(v)?;
        }
        for (key, v) in [
            ("validate.mc_samples", self.validate.mc_samples),
            ("validate.grid_points", self.validate.grid_points),
            ("validate.dep_configs", self.validate.dep_configs),
            ("validate.outage_configs", self.validate.outage_configs),
            ("validate.gradient_points", self.validate.gradient_points),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{key} must be positive")));
            }
        }
        if !(self.solver.epsilon_tol > 0.0) {
            return Err(Error::config("solver.epsilon_tol must be positive"));
        }
        if self.solver.max_outer == 0 {
            return Err(Error::config("solver.max_outer must be positive"));
        }
        Ok(())
    }

    /// System parameters with one sweep value applied.
    pub fn params_for(&self, sweep_value: f64) -> Result<SystemParams> {
        let mut params = self.system.to_params()?;
        match self.sweep.variable {
            SweepVariable::Epsilon => {
                if !(sweep_value > 0.0 && sweep_value < 1.0) {
                    return Err(Error::config(format!(
                        "sweep.values: epsilon must lie in (0, 1), got {sweep_value}"
                    )));
                }
                params.epsilon = sweep_value;
            }
            SweepVariable::N => {
                if sweep_value < 1.0 || sweep_value.fract() != 0.0 {
                    return Err(Error::config(format!(
                        "sweep.values: element counts must be positive integers, got {sweep_value}"
                    )));
                }
                params.n = sweep_value as usize;
            }
            SweepVariable::PMax => {
                params.p_max = dbw_to_watts(sweep_value);
            }
        }
        params.validate()?;
        Ok(params)
    }
}
