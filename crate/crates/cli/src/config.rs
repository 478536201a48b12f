use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use physml::emulator::EmulatorConfig;
use physml::fkl::FklConfig;
use physml::fuss::LogisticExperimentConfig;
use physml::lfm::LfmExperimentConfig;
use physml::prior::McemConfig;
use physml::synth::LogisticMapParams;

use crate::error::{CliError, CliResult};

/// Top-level config file: `{"method": ..., "seed": ..., "params": {...}, "out": ...}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: String,
    pub seed: u64,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// A config after merging the file with command-line overrides.
#[derive(Debug, Clone)]
pub struct Resolved<P> {
    pub seed: u64,
    pub out: PathBuf,
    pub params: P,
    pub hash: String,
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))
}

fn parse_params<P: DeserializeOwned + Default>(v: &Value) -> CliResult<P> {
    if v.is_null() {
        return Ok(P::default());
    }
    serde_json::from_value(v.clone()).map_err(|e| CliError::validation(format!("params: {e}")))
}

/// Merges a config file (if any) with `--seed` and `--out`; flags win.
pub fn resolve<P>(
    method: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> CliResult<Resolved<P>>
where
    P: DeserializeOwned + Serialize + Default,
{
    let (file_seed, file_out, params) = match config {
        Some(path) => {
            let cfg = load_config(path)?;
            if cfg.method != method {
                return Err(CliError::validation(format!(
                    "config method '{}' does not match subcommand '{method}'",
                    cfg.method
                )));
            }
            (Some(cfg.seed), cfg.out, parse_params::<P>(&cfg.params)?)
        }
        None => (None, None, P::default()),
    };
    let seed = seed.or(file_seed).ok_or_else(|| {
        CliError::validation("a seed is mandatory: pass --seed or give one in the config")
    })?;
    let out = out
        .or(file_out)
        .unwrap_or_else(|| PathBuf::from("out").join(method.replace(' ', "_")));
    let hash = crate::config_hash(method, seed, &params);
    Ok(Resolved {
        seed,
        out,
        params,
        hash,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    #[default]
    BiasedLai,
    Ocean,
    Logistic,
    Mexico,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub kind: SynthKind,
    pub n_real: usize,
    pub n_sim: usize,
    /// Rows for the ocean set.
    pub n: usize,
    pub target_sd: f64,
    pub logistic: LogisticMapParams,
    pub x0: [f64; 2],
    pub horizon: f64,
    pub dt: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            kind: SynthKind::BiasedLai,
            n_real: 12,
            n_sim: 120,
            n: 200,
            target_sd: 0.05,
            logistic: LogisticMapParams::default(),
            x0: [-0.1, 0.1],
            horizon: physml::synth::MEXICO_HORIZON,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JgpParams {
    pub n_real: usize,
    pub n_sim: usize,
    pub budget: usize,
    pub starts: usize,
}

impl Default for JgpParams {
    fn default() -> Self {
        Self {
            n_real: 12,
            n_sim: 120,
            budget: 2000,
            starts: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistmatchParams {
    pub n_real: usize,
    pub n_sim: usize,
    /// Rate of the truncated exponential for real-row LAI.
    pub real_rate: f64,
    pub folds: usize,
    pub lambda_grid: Vec<f64>,
    pub nu_grid: Vec<f64>,
    pub ridge: f64,
    /// Relative loss decrease that stops the distribution-term descent.
    pub tol: f64,
    pub kernel_multiplier: f64,
    pub n_bins: usize,
}

impl Default for DistmatchParams {
    fn default() -> Self {
        Self {
            n_real: 30,
            n_sim: 100,
            real_rate: 1.0,
            folds: 5,
            lambda_grid: vec![0.1, 1.0],
            nu_grid: vec![0.0, 1e3, 1e4],
            ridge: 1e-2,
            tol: 1e-7,
            kernel_multiplier: 1.0,
            n_bins: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmulateParams {
    pub runs: usize,
    pub emulator: EmulatorConfig,
}

impl Default for EmulateParams {
    fn default() -> Self {
        Self {
            runs: 50,
            emulator: EmulatorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorParams {
    pub truth_m: Vec<f64>,
    /// Row-major covariance.
    pub truth_s: Vec<f64>,
    pub init_m: Vec<f64>,
    pub init_s: Vec<f64>,
    pub observations: usize,
    pub sigma: f64,
    pub mcem: McemConfig,
}

impl Default for PriorParams {
    fn default() -> Self {
        Self {
            truth_m: vec![40.0, 4.0],
            truth_s: vec![64.0, 2.4, 2.4, 1.0],
            init_m: vec![30.0, 6.0],
            init_s: vec![400.0, 0.0, 0.0, 9.0],
            observations: 200,
            sigma: 0.002,
            mcem: McemConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscoverParams {
    pub degree: usize,
    pub threshold: f64,
    pub ridge: f64,
    pub smoothing_window: usize,
    pub max_iters: usize,
    /// Settings for the simulated trajectory used when no `--traj` file is given.
    pub x0: [f64; 2],
    pub horizon: f64,
    pub dt: f64,
    /// Padding of the phase-portrait box around the data range, as a fraction of the range.
    pub margin: f64,
    pub field_points: usize,
}

impl Default for DiscoverParams {
    fn default() -> Self {
        Self {
            degree: 2,
            threshold: 5.0,
            ridge: 0.0,
            smoothing_window: 1,
            max_iters: 20,
            x0: [-0.1, 0.1],
            horizon: physml::synth::MEXICO_HORIZON,
            dt: 1e-3,
            margin: 0.1,
            field_points: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Full,
    /// Few seeds and short chains; for quick checks and the determinism rerun.
    Smoke,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ReproduceParams {
    pub scale: Scale,
}

pub type FklParams = FklConfig;
pub type LfmParams = LfmExperimentConfig;
pub type GibbsParams = LogisticExperimentConfig;
