mod args;
mod commands;
mod failure;
mod logger;
mod manifest;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;

use args::{Cli, Command, ReplayArgs};
use commands::Context;
use failure::{CliResult, Failure};
use manifest::{input_digests, sha256_file, OutDir, RunManifest, MANIFEST_NAME};
use settings::Settings;

const DEFAULT_OUT: &str = "out";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    logger::init(cli.quiet);
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match run(&cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{f}");
            f.exit_code()
        }
    }
}

fn run(cli: &Cli, argv: Vec<String>) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::runtime)?;
    }
    if let Command::Replay(r) = &cli.command {
        return replay(r, cli.out.as_deref());
    }
    let settings = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    execute(cli, &settings, strip_option(&argv, "--config"))?;
    Ok(())
}

fn execute(cli: &Cli, settings: &Settings, argv: Vec<String>) -> CliResult<RunManifest> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut out = OutDir::create(cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)))?;
    let ctx = Context { settings, seed_flag: cli.seed };
    let outcome = commands::dispatch(&cli.command, &ctx, &mut out)?;
    let manifest = RunManifest {
        command: commands::name(&cli.command).to_string(),
        argv,
        cwd: std::env::current_dir().unwrap_or_default(),
        config: settings.values.clone(),
        resolved: outcome.resolved,
        seed: outcome.seed,
        inputs: input_digests(&outcome.inputs)?,
        outputs: out.digests()?,
        started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    manifest.write(&out.root)?;
    log::info!("wrote {}", out.root.join(MANIFEST_NAME).display());
    Ok(manifest)
}

/// Drops `name value` and `name=value` from an argument list.
fn strip_option(argv: &[String], name: &str) -> Vec<String> {
    let prefix = format!("{name}=");
    let mut out = Vec::with_capacity(argv.len());
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
        } else if a == name {
            skip = true;
        } else if !a.starts_with(&prefix) {
            out.push(a.clone());
        }
    }
    out
}

/// Re-runs a recorded command with the recorded config values and checks
/// that every output has the recorded digest.
fn replay(args: &ReplayArgs, out: Option<&Path>) -> CliResult<()> {
    let recorded = RunManifest::load(&args.manifest)?;
    if recorded.cwd.is_dir() {
        std::env::set_current_dir(&recorded.cwd).map_err(Failure::runtime)?;
    }
    let mut argv = recorded.argv.clone();
    if let Some(dir) = out {
        argv = strip_option(&argv, "--out");
        argv.push("--out".into());
        argv.push(dir.display().to_string());
    }
    let cli = Cli::try_parse_from(std::iter::once("episir".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| Failure::usage(format!("manifest arguments: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Failure::usage("manifest records a replay"));
    }
    for input in &recorded.inputs {
        match sha256_file(&input.path) {
            Ok(d) if d == input.sha256 => {}
            Ok(_) => log::warn!("{} changed since the recorded run", input.path.display()),
            Err(e) => return Err(Failure::usage(format!("input {}: {e}", input.path.display()))),
        }
    }
    let settings = Settings::from_values(recorded.config.clone())?;
    let fresh = execute(&cli, &settings, argv)?;

    let mut mismatched = Vec::new();
    for old in &recorded.outputs {
        match fresh.outputs.iter().find(|o| o.path == old.path) {
            Some(new) if new.sha256 == old.sha256 => {}
            _ => mismatched.push(old.path.display().to_string()),
        }
    }
    if mismatched.is_empty() {
        log::info!("replay reproduced all {} outputs", recorded.outputs.len());
        Ok(())
    } else {
        Err(Failure::runtime(format!("replay outputs differ: {}", mismatched.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_both_option_forms() {
        let argv: Vec<String> = ["fit", "--config", "a.conf", "--data=x", "--config=b", "--quiet"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(strip_option(&argv, "--config"), vec!["fit", "--data=x", "--quiet"]);
    }
}
