//! Command-line experiment runner: configs, output files and the acceptance driver.

pub mod commands;
pub mod config;
pub mod error;
pub mod oracles;
pub mod output;
pub mod reproduce;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use error::{CliError, CliResult};

use config::{resolve, Resolved};
use output::{sha256_hex, OutDir};

pub fn config_hash<P: Serialize>(method: &str, seed: u64, params: &P) -> String {
    let canonical = serde_json::json!({ "method": method, "seed": seed, "params": params });
    sha256_hex(canonical.to_string().as_bytes())
}

/// Global flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct GlobalArgs {
    pub seed: Option<u64>,
    pub out: Option<std::path::PathBuf>,
    pub config: Option<std::path::PathBuf>,
}

/// Resolves the config, lets `adjust` apply subcommand flags, runs `body` and
/// writes the manifest last.
pub fn run_method<P, A, F>(
    method: &str,
    g: &GlobalArgs,
    adjust: A,
    body: F,
) -> CliResult<Resolved<P>>
where
    P: DeserializeOwned + Serialize + Default,
    A: FnOnce(&mut P),
    F: FnOnce(u64, &P, &mut OutDir) -> CliResult<()>,
{
    let mut r: Resolved<P> = resolve(method, g.config.as_deref(), g.seed, g.out.clone())?;
    adjust(&mut r.params);
    r.hash = config_hash(method, r.seed, &r.params);
    let mut out = OutDir::create(&r.out)?;
    body(r.seed, &r.params, &mut out)?;
    out.finish(method, r.seed, &r.hash)?;
    Ok(r)
}
