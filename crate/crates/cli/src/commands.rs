use std::fs::File;
use std::path::{Path, PathBuf};

use episir::data::{identifiability_demo, stochastic_generate, generate_scenario, DemoSpec, ScenarioSpec};
use episir::diagnostics::{bayesian_chi2, geweke_table};
use episir::forecast::{forecast, train_test_split, BandSummary};
use episir::priors::{default_prior_config, PriorConfig};
use episir::sampler::stream_rng;
use episir::{fit_observations, Dataset, ForecastConfig, ForecastDraws, Observations, PosteriorDraws, SamplerConfig};
use serde_json::json;

use crate::args::{Command, DemoArgs, DiagnoseArgs, FitArgs, ForecastArgs, IngestArgs, SimulateArgs};
use crate::failure::{CliResult, Failure, InputContext};
use crate::manifest::OutDir;
use crate::settings::Settings;

pub struct Context<'a> {
    pub settings: &'a Settings,
    pub seed_flag: Option<u64>,
}

impl Context<'_> {
    fn seed(&self, default: u64) -> CliResult<u64> {
        self.settings.pick(self.seed_flag, "seed", default)
    }
}

/// What a command read and how it was configured, for the manifest.
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub resolved: serde_json::Value,
}

pub fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Simulate(_) => "simulate",
        Command::Ingest(_) => "ingest",
        Command::Fit(_) => "fit",
        Command::Forecast(_) => "forecast",
        Command::Diagnose(_) => "diagnose",
        Command::DemoIdentifiability(_) => "demo-identifiability",
        Command::Replay(_) => "replay",
    }
}

pub fn dispatch(cmd: &Command, ctx: &Context, out: &mut OutDir) -> CliResult<Outcome> {
    match cmd {
        Command::Simulate(a) => simulate(a, ctx, out),
        Command::Ingest(a) => ingest(a, ctx, out),
        Command::Fit(a) => fit(a, ctx, out),
        Command::Forecast(a) => forecast_cmd(a, ctx, out),
        Command::Diagnose(a) => diagnose(a, ctx, out),
        Command::DemoIdentifiability(a) => demo(a, ctx, out),
        Command::Replay(_) => Err(Failure::usage("replay cannot be nested")),
    }
}

fn simulate(args: &SimulateArgs, ctx: &Context, out: &mut OutDir) -> CliResult<Outcome> {
    let s = ctx.settings;
    let mut spec = ScenarioSpec::new(args.scenario);
    spec.seed = ctx.seed(spec.seed)?;
    spec.transform = s.pick(args.transform, "transform", spec.transform)?;
    spec.gamma_sd = s.pick(args.gamma_sd, "gamma_sd", spec.gamma_sd)?;
    spec.integerize = s.switch(args.integerize, "integerize")?;
    spec.zero_floor = s.pick(None, "zero_floor", spec.zero_floor)?;
    spec.validate().input("scenario")?;
    let stochastic = s.switch(args.stochastic, "stochastic")?;

    let mut rng = stream_rng(spec.seed, 0);
    let source = format!("{} seed {}", spec.id, spec.seed);
    if stochastic {
        let (obs, truth) = stochastic_generate(&spec, &mut rng)?;
        let dataset = Dataset::from_observations(&obs, Some(format!("{source} (binomial chain)")));
        out.write("dataset.json", |b| write_text(b, &dataset.to_json()?))?;
        out.write("truth.csv", |b| truth.write_csv(b, &obs))?;
    } else {
        let sim = generate_scenario(&spec, &mut rng)?;
        let dataset = Dataset::from_observations(&sim.obs, Some(source));
        out.write("dataset.json", |b| write_text(b, &dataset.to_json()?))?;
        out.write("truth.csv", |b| sim.truth.write_csv(b, &sim.obs))?;
    }
    Ok(Outcome {
        inputs: vec![],
        seed: Some(spec.seed),
        resolved: json!({ "scenario": spec, "stochastic": stochastic }),
    })
}

fn ingest(args: &IngestArgs, ctx: &Context, out: &mut OutDir) -> CliResult<Outcome> {
    use episir::data::{ingest_cases, read_case_csv, state_population, IngestOptions, RawCaseSeries};
    let s = ctx.settings;
    let region = s.first(args.region.clone(), "region")?;
    let file = File::open(&args.csv).input(&format!("cannot open {}", args.csv.display()))?;
    let (name, dates, cumulative) = read_case_csv(file, region.as_deref()).input("case file")?;
    let population = match s.first(args.population, "population")? {
        Some(p) => p,
        None => state_population(&name)
            .map(|p| p as f64)
            .ok_or_else(|| Failure::usage(format!("no population known for `{name}`; pass --population")))?,
    };
    let defaults = IngestOptions::default();
    let opts = IngestOptions {
        threshold: s.pick(args.threshold, "threshold", defaults.threshold)?,
        zero_floor: s.pick(None, "zero_floor", defaults.zero_floor)?,
    };
    let raw = RawCaseSeries { region: name.clone(), dates, cumulative, population };
    let obs = ingest_cases(&raw, opts).input("case file")?;
    log::info!("{name}: {} days from {}", obs.n_days(), obs.day0);
    let dataset = Dataset::from_observations(&obs, Some(format!("{name} from {}", args.csv.display())));
    out.write("dataset.json", |b| write_text(b, &dataset.to_json()?))?;
    Ok(Outcome {
        inputs: vec![args.csv.clone()],
        seed: None,
        resolved: json!({ "region": name, "population": population, "options": opts }),
    })
}

fn load_dataset(path: &Path) -> CliResult<(Dataset, Observations)> {
    let dataset = Dataset::load(path).input(&format!("cannot load dataset {}", path.display()))?;
    let obs = dataset.to_observations().input(&format!("dataset {}", path.display()))?;
    Ok((dataset, obs))
}

fn load_draws(path: &Path) -> CliResult<PosteriorDraws> {
    let file = File::open(path).input(&format!("cannot open draws {}", path.display()))?;
    let draws = PosteriorDraws::read_csv(file).input(&format!("draws {}", path.display()))?;
    if draws.is_empty() {
        return Err(Failure::usage(format!("draws file {} has no rows", path.display())));
    }
    Ok(draws)
}

/// `name` in the directory holding `draws`.
fn sibling(draws: &Path, name: &str) -> PathBuf {
    draws.parent().unwrap_or(Path::new(".")).join(name)
}

/// Prior from an explicit file, else from `prior.conf` beside the draws,
/// else the defaults.
fn load_prior(explicit: Option<&PathBuf>, draws: &Path, inputs: &mut Vec<PathBuf>) -> CliResult<PriorConfig> {
    let path = match explicit {
        Some(p) => p.clone(),
        None => {
            let p = sibling(draws, "prior.conf");
            if !p.exists() {
                log::warn!("no prior.conf next to the draws; using the default prior");
                return Ok(default_prior_config());
            }
            p
        }
    };
    let text = std::fs::read_to_string(&path).input(&format!("cannot read prior {}", path.display()))?;
    let prior = PriorConfig::from_config_str(&text).input(&format!("prior {}", path.display()))?;
    inputs.push(path);
    Ok(prior)
}

fn check_days(draws: &PosteriorDraws, obs: &Observations) -> CliResult<()> {
    let n = draws.draws[0].n_days();
    if n != obs.n_days() {
        return Err(Failure::usage(format!(
            "draws cover {n} days but the dataset has {}",
            obs.n_days()
        )));
    }
    Ok(())
}

fn fit(args: &FitArgs, ctx: &Context, out: &mut OutDir) -> CliResult<Outcome> {
    let s = ctx.settings;
    let (dataset, full) = load_dataset(&args.data)?;

    let train_until = s.first(args.train_until, "train_until")?;
    let (obs, holdout) = match train_until {
        Some(t) => {
            let (train, test) = train_test_split(&full, t)?;
            (train, Some(test))
        }
        None => (full, None),
    };

    let mut prior_kv = s.subset(&PriorConfig::KEYS);
    if let Some(p) = &args.preset {
        prior_kv.insert("preset".into(), p.clone());
    }
    let mut prior = default_prior_config();
    prior.apply(&prior_kv)?;

    let mut kv = s.subset(&SamplerConfig::KEYS);
    let mut flag = |key: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(key.to_string(), v);
        }
    };
    flag("chains", args.chains.map(|v| v.to_string()));
    flag("ladder_base", args.ladder_base.map(|v| v.to_string()));
    flag("iters", args.iters.map(|v| v.to_string()));
    flag("burn_in", args.burn_in.map(|v| v.to_string()));
    flag("thin", args.thin.map(|v| v.to_string()));
    flag("swap_every", args.swap_every.map(|v| v.to_string()));
    flag("seed", ctx.seed_flag.map(|v| v.to_string()));
    if args.no_adapt {
        kv.insert("adapt".into(), "false".into());
    }
    let mut cfg = SamplerConfig::default();
    cfg.apply(&kv)?;
    cfg.validate()?;

    let level = s.pick(args.level, "level", 0.95)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Failure::usage(format!("level must lie in (0, 1), got {level}")));
    }

    log::info!(
        "sampling {} days with {} chains, {} iterations ({} draws kept)",
        obs.n_days(),
        cfg.n_chains(),
        cfg.n_iter,
        cfg.n_draws()
    );
    let draws = fit_observations(&obs, &prior, &cfg)?;
    let summary = draws.summary();
    log::info!(
        "acceptance r0 {:.2}, alpha_inv {:.2}, rho {:.2}, beta_tilde {:.2}",
        summary.acceptance.r0,
        summary.acceptance.alpha_inv,
        summary.acceptance.rho,
        summary.acceptance.beta_tilde
    );
    let band = draws.re_band(&obs, level)?;

    out.write("draws.csv", |b| draws.write_csv(b))?;
    out.write_json("summary.json", &json!({ "level": level, "sampler": cfg, "posterior": summary }))?;
    out.write("re_band.csv", |b| band.write_csv(b, Some(&obs)))?;
    let fitted = Dataset::from_observations(&obs, dataset.source.clone());
    out.write("dataset.json", |b| write_text(b, &fitted.to_json()?))?;
    if let Some(test) = &holdout {
        let held = Dataset::from_observations(test, dataset.source.clone());
        out.write("holdout.json", |b| write_text(b, &held.to_json()?))?;
    }
    out.write("prior.conf", |b| write_text(b, &prior.to_config_string()))?;
    Ok(Outcome {
        inputs: vec![args.data.clone()],
        seed: Some(cfg.seed),
        resolved: json!({ "prior": prior.to_config_string(), "sampler": cfg, "level": level, "train_until": train_until }),
    })
}

fn forecast_cmd(args: &ForecastArgs, ctx: &Context, out: &mut OutDir) -> CliResult<Outcome> {
    let s = ctx.settings;
    let horizon = s.pick(args.horizon, "horizon", 30usize)?;
    if horizon == 0 {
        return Err(Failure::usage("horizon must be at least 1"));
    }
    let seed = ctx.seed(1)?;
    let draws = load_draws(&args.draws)?;
    let data_path = args.data.clone().unwrap_or_else(|| sibling(&args.draws, "dataset.json"));
    let (_, obs) = load_dataset(&data_path)?;
    check_days(&draws, &obs)?;
    let mut inputs = vec![args.draws.clone(), data_path];
    let prior = load_prior(args.prior.as_ref(), &args.draws, &mut inputs)?;

    let cfg = ForecastConfig::for_prior(horizon, seed, &prior);
    let fc = forecast(&draws, &obs, &cfg)?;
    let cases = fc.cases_summary();
    let re = fc.re_summary();
    out.write("forecast_cases.csv", |b| cases.write_csv(b, &obs))?;
    out.write("forecast_re.csv", |b| re.write_csv(b, &obs))?;
    if args.matrices {
        out.write("forecast_case_paths.csv", |b| ForecastDraws::write_matrix_csv(&fc.cases, fc.first_day, b))?;
        out.write("forecast_re_paths.csv", |b| ForecastDraws::write_matrix_csv(&fc.re, fc.first_day, b))?;
    }

    let mut report = json!({
        "horizon": horizon,
        "seed": seed,
        "first_day": fc.first_day,
        "paths": fc.cases.len(),
        "skipped": fc.skipped,
    });
    if let Some(path) = &args.holdout {
        let (_, test) = load_dataset(path)?;
        report["holdout"] = coverage(&cases, &test.cases);
        inputs.push(path.clone());
    }
    out.write_json("forecast.json", &report)?;
    Ok(Outcome {
        inputs,
        seed: Some(seed),
        resolved: json!({ "forecast": cfg }),
    })
}

/// Share of held-out days inside the 95% band.
fn coverage(band: &BandSummary, actual: &[f64]) -> serde_json::Value {
    let n = band.day.len().min(actual.len());
    let inside = (0..n)
        .filter(|&k| actual[k] >= band.lo95[k] && actual[k] <= band.hi95[k])
        .count();
    json!({
        "days_compared": n,
        "inside_95": inside,
        "coverage": if n == 0 { f64::NAN } else { inside as f64 / n as f64 },
    })
}

fn diagnose(args: &DiagnoseArgs, ctx: &Context, out: &mut OutDir) -> CliResult<Outcome> {
    let bins = ctx.settings.pick(args.bins, "bins", 5usize)?;
    if bins < 2 {
        return Err(Failure::usage("need at least two bins"));
    }
    let draws = load_draws(&args.draws)?;
    let data_path = args.data.clone().unwrap_or_else(|| sibling(&args.draws, "dataset.json"));
    let (_, obs) = load_dataset(&data_path)?;
    check_days(&draws, &obs)?;
    let mut inputs = vec![args.draws.clone(), data_path];
    let prior = load_prior(args.prior.as_ref(), &args.draws, &mut inputs)?;

    let table = geweke_table(&draws, obs.i_d0);
    for row in &table {
        match row.z_score {
            Some(z) if z.abs() >= 2.0 => log::warn!("geweke z for {} is {z:.2}", row.parameter),
            Some(_) => {}
            None => log::warn!("no geweke score for {}: {}", row.parameter, row.note.as_deref().unwrap_or("")),
        }
    }
    out.write("geweke.csv", |b| {
        let mut wtr = csv_writer(b);
        wtr.write_record(["parameter", "z_score", "note"])?;
        for row in &table {
            wtr.write_record([
                row.parameter.clone(),
                row.z_score.map(|z| z.to_string()).unwrap_or_default(),
                row.note.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;

    let design = prior.diagnosis_design.build(0, obs.n_days());
    let fit = bayesian_chi2(&draws, &obs, prior.link, &design, bins)?;
    log::info!(
        "chi-square: {:.1}% of draws exceed {:.3}",
        100.0 * fit.exceed_proportion,
        fit.threshold
    );
    out.write_json(
        "chi2.json",
        &json!({
            "bins": bins,
            "threshold": fit.threshold,
            "exceed_proportion": fit.exceed_proportion,
            "mean_omega": fit.mean_omega(),
            "draws_used": fit.omega_draws.len(),
            "skipped": fit.skipped,
            "omega": fit.omega_draws,
        }),
    )?;
    out.write("qq.csv", |b| fit.write_qq_csv(b))?;
    Ok(Outcome {
        inputs,
        seed: None,
        resolved: json!({ "bins": bins, "link": prior.link }),
    })
}

fn demo(args: &DemoArgs, ctx: &Context, out: &mut OutDir) -> CliResult<Outcome> {
    let s = ctx.settings;
    let defaults = DemoSpec::default();
    let spec = DemoSpec {
        alpha2: s.pick(args.alpha2, "alpha2", defaults.alpha2)?,
        n_days: s.pick(args.days, "days", defaults.n_days)?,
        ..defaults
    };
    if !(spec.alpha2 > 0.0 && spec.alpha2 < 1.0) {
        return Err(Failure::usage(format!("alpha2 must lie in (0, 1), got {}", spec.alpha2)));
    }
    if spec.n_days < 2 {
        return Err(Failure::usage("need at least two days"));
    }
    let (p1, p2) = identifiability_demo(&spec)?;
    let mismatch = p1
        .cases
        .iter()
        .zip(&p2.cases)
        .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
        .fold(0.0, f64::max);
    let re_gap = p1.re.iter().zip(&p2.re).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    out.write("identifiability.csv", |b| {
        let mut wtr = csv_writer(b);
        wtr.write_record([
            "day", "beta1", "beta2", "gamma1", "gamma2", "cases1", "cases2", "re1", "re2", "i_u1", "i_u2",
        ])?;
        for t in 0..p1.cases.len() {
            wtr.write_record([
                t.to_string(),
                p1.beta[t].to_string(),
                p2.beta[t].to_string(),
                p1.gamma[t].to_string(),
                p2.gamma[t].to_string(),
                p1.cases[t].to_string(),
                p2.cases[t].to_string(),
                p1.re[t].to_string(),
                p2.re[t].to_string(),
                p1.states[t].i_u.to_string(),
                p2.states[t].i_u.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    out.write_json(
        "identifiability.json",
        &json!({
            "spec": spec,
            "max_relative_case_mismatch": mismatch,
            "max_re_gap": re_gap,
        }),
    )?;
    log::info!("case mismatch {mismatch:.2e}, largest Re gap {re_gap:.3}");
    Ok(Outcome {
        inputs: vec![],
        seed: None,
        resolved: json!({ "spec": spec }),
    })
}

fn write_text(buf: &mut Vec<u8>, text: &str) -> episir::Result<()> {
    buf.extend_from_slice(text.as_bytes());
    if !text.ends_with('\n') {
        buf.push(b'\n');
    }
    Ok(())
}

fn csv_writer(buf: &mut Vec<u8>) -> csv::Writer<&mut Vec<u8>> {
    csv::Writer::from_writer(buf)
}
