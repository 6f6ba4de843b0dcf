// `!(x > 0.0)` style guards reject NaN along with the failing range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::Parser;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use args::{Cli, Command};
use commands::{numeric, usage, Failure, Output, SCHEMA_VERSION};
use config::*;

#[derive(Debug, Serialize, Deserialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

/// Record of one run: enough to repeat it exactly.
#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    command: String,
    config: Value,
    seed: u64,
    threads: usize,
    version: String,
    started: String,
    finished: String,
    outputs: Vec<OutputDigest>,
}

/// Configuration from `--config` (plain config or manifest) and the seed
/// recorded with it, if any.
fn load_config<T: DeserializeOwned>(path: &Path, command: &str) -> Result<(T, Option<u64>), Failure> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(usage)?;
    let is_manifest = value.get("schema_version").is_some() && value.get("command").is_some();
    let (cfg, seed) = if is_manifest {
        let m: Manifest = serde_json::from_value(value).map_err(usage)?;
        if m.command != command {
            return Err(usage(anyhow!("manifest is for `{}`, not `{command}`", m.command)));
        }
        (m.config, Some(m.seed))
    } else {
        (value, None)
    };
    let cfg =
        serde_json::from_value(cfg).with_context(|| format!("configuration in {}", path.display())).map_err(usage)?;
    Ok((cfg, seed))
}

fn resolve<T, F>(cmd: &Command, from_args: F) -> Result<(T, u64), Failure>
where
    T: DeserializeOwned,
    F: FnOnce() -> anyhow::Result<T>,
{
    let common = cmd.common();
    match &common.config {
        Some(path) => {
            let (cfg, recorded) = load_config(path, cmd.name())?;
            Ok((cfg, common.seed.or(recorded).unwrap_or(0)))
        }
        None => Ok((from_args().map_err(usage)?, common.seed.unwrap_or(0))),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<OutputDigest, Failure> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())).map_err(numeric)?;
    Ok(OutputDigest { path: name.to_string(), sha256: sha256_hex(bytes) })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let started = chrono::Utc::now().to_rfc3339();
    let threads = cli.threads.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(numeric)?;
    let cmd = &cli.command;
    let name = cmd.name();

    let (config, seed, output): (Value, u64, Output) = match cmd {
        Command::Classify(a) => {
            let (c, s) = resolve(cmd, || ClassifyConfig::from_args(a))?;
            let out = commands::classify(&c)?;
            (serde_json::to_value(&c).map_err(numeric)?, s, out)
        }
        Command::LyapunovCheck(a) => {
            let (c, s) = resolve(cmd, || LyapunovConfig::from_args(a))?;
            let out = commands::lyapunov(&c)?;
            (serde_json::to_value(&c).map_err(numeric)?, s, out)
        }
        Command::Simulate(a) => {
            let (c, s) = resolve(cmd, || SimulateConfig::from_args(a))?;
            let out = commands::simulate(&c, s, &pool)?;
            (serde_json::to_value(&c).map_err(numeric)?, s, out)
        }
        Command::Density(a) => {
            let (c, s) = resolve(cmd, || DensityRunConfig::from_args(a))?;
            let out = commands::density(&c, s, &pool)?;
            (serde_json::to_value(&c).map_err(numeric)?, s, out)
        }
        Command::Hitprob(a) => {
            let (c, s) = resolve(cmd, || HitprobConfig::from_args(a))?;
            let out = commands::hitprob(&c, s, &pool)?;
            (serde_json::to_value(&c).map_err(numeric)?, s, out)
        }
        Command::ExitTime(a) => {
            let (c, s) = resolve(cmd, || ExitTimeConfig::from_args(a))?;
            let out = commands::exit_time(&c)?;
            (serde_json::to_value(&c).map_err(numeric)?, s, out)
        }
        Command::Vdp2d(a) => {
            let (c, s) = resolve(cmd, || VdpRunConfig::from_args(a))?;
            let out = commands::vdp2d(&c, s, &pool)?;
            (serde_json::to_value(&c).map_err(numeric)?, s, out)
        }
    };

    let mut doc = output.json;
    doc["schema_version"] = SCHEMA_VERSION.into();
    doc["command"] = name.into();
    doc["seed"] = seed.into();

    match &cmd.common().out {
        None => {
            println!("{}", serde_json::to_string_pretty(&doc).map_err(numeric)?);
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(numeric)?;
            doc["manifest"] = "manifest.json".into();
            let mut outputs = Vec::new();
            if let Some(csv) = &output.csv {
                outputs.push(write_file(dir, &format!("{name}.csv"), csv.as_bytes())?);
                doc["csv"] = format!("{name}.csv").into();
            }
            let body = serde_json::to_string_pretty(&doc).map_err(numeric)?;
            outputs.push(write_file(dir, &format!("{name}.json"), body.as_bytes())?);
            let manifest = Manifest {
                schema_version: SCHEMA_VERSION,
                command: name.to_string(),
                config,
                seed,
                threads,
                version: env!("CARGO_PKG_VERSION").to_string(),
                started,
                finished: chrono::Utc::now().to_rfc3339(),
                outputs,
            };
            let text = serde_json::to_string_pretty(&manifest).map_err(numeric)?;
            write_file(dir, "manifest.json", text.as_bytes())?;
            eprintln!("wrote {}", PathBuf::from(dir).join("manifest.json").display());
        }
    }
    Ok(if output.inconclusive && cmd.common().strict { 4 } else { 0 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
