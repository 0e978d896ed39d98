//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test -p episir --test acceptance -- 3 5`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use episir::data::{generate_scenario, identifiability_demo, DemoSpec, RateTransform, ScenarioId, ScenarioSpec, SimulatedData};
use episir::diagnostics::{bayesian_chi2, geweke_table, omega_statistic};
use episir::forecast::{forecast, train_test_split};
use episir::gp::{ar1_log_density, gp_conditional, gp_log_density, GpSpec};
use episir::link::std_normal_cdf;
use episir::model::{propagate, CompartmentState};
use episir::priors::default_prior_config;
use episir::sampler::{
    run_plain, stream_rng, swap_probability, FixedLogits, Target, TemperatureLadder,
};
use episir::{fit_observations, Design, ForecastConfig, Link, Observations, PosteriorDraws, SamplerConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn scenario(id: ScenarioId) -> SimulatedData {
    let spec = ScenarioSpec::new(id);
    generate_scenario(&spec, &mut stream_rng(1, 0)).expect("scenario generates")
}

fn default_fit(obs: &Observations, seed: u64) -> PosteriorDraws {
    let cfg = SamplerConfig { seed, ..Default::default() };
    fit_observations(obs, &default_prior_config(), &cfg).expect("sampler runs")
}

/// Coverage count and mean absolute error of the posterior median.
fn re_recovery(draws: &PosteriorDraws, sim: &SimulatedData) -> (usize, f64) {
    let band = draws.re_band(&sim.obs, 0.95).expect("band");
    let truth = &sim.truth.re;
    let covered = (0..truth.len())
        .filter(|&t| band.lower[t] <= truth[t] && truth[t] <= band.upper[t])
        .count();
    let mae = (0..truth.len()).map(|t| (band.median[t] - truth[t]).abs()).sum::<f64>() / truth.len() as f64;
    (covered, mae)
}

/// The default scenario-1 run is shared by several criteria.
struct Cache {
    scn1: Option<(SimulatedData, PosteriorDraws)>,
}

impl Cache {
    fn scn1(&mut self) -> &(SimulatedData, PosteriorDraws) {
        self.scn1.get_or_insert_with(|| {
            let sim = scenario(ScenarioId::Scn1);
            let draws = default_fit(&sim.obs, 1);
            (sim, draws)
        })
    }
}

fn criterion_1(cache: &mut Cache) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for id in [ScenarioId::Scn1, ScenarioId::Scn2, ScenarioId::Scn3] {
        let (covered, mae) = if id == ScenarioId::Scn1 {
            let (sim, draws) = cache.scn1();
            re_recovery(draws, sim)
        } else {
            let sim = scenario(id);
            re_recovery(&default_fit(&sim.obs, 1), &sim)
        };
        pass &= covered >= 72 && mae < 0.35;
        parts.push(format!("{id} {covered}/80 mae {mae:.3}"));
    }
    let sim = scenario(ScenarioId::Scn1);
    let cfg = SamplerConfig {
        ladder: TemperatureLadder::geometric(5, 1.5).unwrap(),
        n_iter: 10_000,
        burn_in: 4_000,
        thin: 6,
        ..Default::default()
    };
    let draws = fit_observations(&sim.obs, &default_prior_config(), &cfg).expect("sampler runs");
    let (covered, _) = re_recovery(&draws, &sim);
    pass &= covered >= 64;
    parts.push(format!("short run (J=5, 10k) scn1 {covered}/80"));
    outcome(pass, format!("Re(t) band coverage >= 90% and median MAE < 0.35: {}", parts.join("; ")))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (p1, p2) = identifiability_demo(&DemoSpec::default()).expect("demo runs");
    let elapsed = start.elapsed().as_secs_f64();
    let mismatch = p1
        .cases
        .iter()
        .zip(&p2.cases)
        .map(|(a, b)| (a - b).abs() / a.abs())
        .fold(0.0, f64::max);
    let gap = p1.re.iter().zip(&p2.re).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let gamma2 = p2.gamma[0];
    let pass = mismatch < 1e-9 && (gamma2 - 0.2 * 0.7 / 0.95).abs() < 1e-12 && gap > 0.2 && elapsed < 1.0;
    outcome(
        pass,
        format!("identical B (rel err {mismatch:.1e}), gamma2 {gamma2:.6}, max Re gap {gap:.3}, {elapsed:.3}s"),
    )
}

fn dense_log_pdf(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    let n = x.len();
    let chol = cov.clone().cholesky().expect("covariance is positive definite");
    let r = DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
    let z = chol.l().solve_lower_triangular(&r).unwrap();
    let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(2024, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8usize);
        let h = rng.random_range(1..=4usize);
        let rho = rng.random_range(0.05..0.95);
        let sigma2 = rng.random_range(0.05..2.0);
        let mu = vec![rng.random_range(-2.0..0.0), rng.random_range(-0.1..0.1)];
        let spec = GpSpec { design: Design::intercept_time(0, n), mu: mu.clone(), sigma_beta2: sigma2, rho };
        let mean = spec.mean();
        let x: Vec<f64> = mean.iter().map(|m| m + rng.random_range(-1.0..1.0)).collect();

        let kernel = |a: usize, b: usize| sigma2 * rho.powi(a.abs_diff(b) as i32);
        let k = DMatrix::from_fn(n, n, kernel);
        let dense = dense_log_pdf(&x, &mean, &k);
        worst = worst
            .max((ar1_log_density(&x, &mean, sigma2, rho) - dense).abs())
            .max((gp_log_density(&x, &spec) - dense).abs());

        // Schur complement on the joint covariance of observed and future days.
        let x_star = Design::intercept_time(n, h);
        let cond = gp_conditional(&x, &spec, &x_star).expect("conditional");
        let k_star = DMatrix::from_fn(n, h, |i, j| kernel(i, n + j));
        let k_ss = DMatrix::from_fn(h, h, |i, j| kernel(n + i, n + j));
        let k_inv = k.clone().try_inverse().expect("invertible kernel");
        let resid = DVector::from_iterator(n, x.iter().zip(&mean).map(|(a, b)| a - b));
        let m_star = DVector::from_iterator(h, (0..h).map(|i| x_star.row_dot(i, &mu)));
        let oracle_mean = m_star + k_star.transpose() * &k_inv * resid;
        let oracle_cov = k_ss - k_star.transpose() * &k_inv * &k_star;
        for i in 0..h {
            worst = worst.max((cond.mean[i] - oracle_mean[i]).abs());
            for j in 0..h {
                worst = worst.max((cond.covariance[(i, j)] - oracle_cov[(i, j)]).abs());
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-8 && elapsed < 5.0,
        format!("AR(1) density and conditional vs dense oracles on 100 instances: max error {worst:.2e}, {elapsed:.2}s"),
    )
}

fn batch_mcse(x: &[f64], n_batches: usize) -> f64 {
    let size = x.len() / n_batches;
    let means: Vec<f64> = x.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    (var / means.len() as f64).sqrt()
}

/// Posterior means of `eta` and `sigma_gamma2` for `y_t ~ N(eta, s2)` with
/// `eta ~ N(m0, v0)` and `s2 ~ IG(a, b)`, by quadrature over `log s2`.
fn conjugate_means(y: &[f64], m0: f64, v0: f64, a: f64, b: f64) -> (f64, f64) {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let within: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let log_post = |u: f64| {
        let s2 = u.exp();
        let marg = -0.5 * (n - 1.0) * u - 0.5 * within / s2 - 0.5 * (s2 + n * v0).ln()
            - 0.5 * n * (ybar - m0).powi(2) / (s2 + n * v0);
        marg - (a + 1.0) * u - b / s2 + u
    };
    let grid: Vec<f64> = (0..40_000).map(|i| -12.0 + i as f64 * 0.0005).collect();
    let peak = grid.iter().map(|&u| log_post(u)).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut e_eta, mut e_s2) = (0.0, 0.0, 0.0);
    for &u in &grid {
        let w = (log_post(u) - peak).exp();
        let s2 = u.exp();
        let prec = 1.0 / v0 + n / s2;
        z += w;
        e_eta += w * (m0 / v0 + n * ybar / s2) / prec;
        e_s2 += w * s2;
    }
    (e_eta / z, e_s2 / z)
}

fn criterion_4() -> Outcome {
    let n = 40;
    let mut rng = stream_rng(99, 4);
    let logits: Vec<f64> = (0..n)
        .map(|_| -1.4 + 0.5 * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let model = FixedLogits { logits: logits.clone(), i_d0: 100.0 };
    let prior_cfg = default_prior_config();
    let prior = prior_cfg.prepare().unwrap();
    let gp = Design::intercept_time(0, n);
    let diag = Design::intercept(n);
    let target = Target::new(&model, &prior, &gp, &diag).unwrap();
    let cfg = SamplerConfig { n_iter: 42_000, burn_in: 2_000, thin: 1, seed: 5, ..Default::default() };
    let draws = run_plain(&target, &cfg).expect("sampler runs");
    let eta: Vec<f64> = draws.draws.iter().map(|d| d.eta[0]).collect();
    let s2: Vec<f64> = draws.draws.iter().map(|d| d.sigma_gamma2).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (exact_eta, exact_s2) = conjugate_means(
        &logits,
        prior_cfg.eta_mean[0],
        prior_cfg.eta_cov[0][0],
        prior_cfg.sigma_gamma2_shape,
        prior_cfg.sigma_gamma2_rate,
    );
    let z_eta = (mean(&eta) - exact_eta) / batch_mcse(&eta, 50);
    let z_s2 = (mean(&s2) - exact_s2) / batch_mcse(&s2, 50);

    // One-rung tempering against the plain sampler on the epidemic model.
    let sim = scenario(ScenarioId::Scn1);
    let short = SamplerConfig {
        ladder: TemperatureLadder::cold(),
        n_iter: 1_500,
        burn_in: 500,
        thin: 5,
        seed: 8,
        ..Default::default()
    };
    let prior_default = default_prior_config();
    let pt = fit_observations(&sim.obs, &prior_default, &short).unwrap();
    let model = episir::sampler::EpidemicLatent::new(sim.obs.clone(), prior_default.link);
    let gp = Design::intercept_time(0, sim.obs.n_days());
    let diag = Design::intercept(sim.obs.n_days());
    let target = Target::new(&model, &prior, &gp, &diag).unwrap();
    let plain = run_plain(&target, &short).unwrap();
    let bytes = |d: &PosteriorDraws| {
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        buf
    };
    let identical = bytes(&pt) == bytes(&plain);

    outcome(
        z_eta.abs() < 3.0 && z_s2.abs() < 3.0 && identical,
        format!(
            "conjugate hook: eta off by {z_eta:.2} MCSE, sigma_gamma2 off by {z_s2:.2} MCSE; one-rung PT byte-identical to plain: {identical}"
        ),
    )
}

fn criterion_5() -> Outcome {
    let p = swap_probability(0.0, 10.0, 1.5, 1.0);
    let hand = (-10.0f64 / 3.0).exp();
    let same = swap_probability(-123.4, -123.4, 1.5, 1.0);
    outcome(
        (p - hand).abs() < 1e-12 && (p - 0.0357).abs() < 5e-5 && same == 1.0,
        format!("swap probability {p:.10} (hand {hand:.10}); identical states {same}"),
    )
}

fn criterion_6(cache: &mut Cache) -> Outcome {
    let obs = cache.scn1().0.obs.clone();
    let mut good = 0;
    let mut rows = Vec::new();
    for seed in 1..=10u64 {
        let draws = if seed == 1 { cache.scn1().1.clone() } else { default_fit(&obs, seed) };
        let table = geweke_table(&draws, obs.i_d0);
        let z = |name: &str| {
            table
                .iter()
                .find(|r| r.parameter == name)
                .and_then(|r| r.z_score)
                .unwrap_or(f64::NAN)
        };
        let (zi, ze) = (z("i_u0"), z("eta_0"));
        if zi.abs() < 2.0 && ze.abs() < 2.0 {
            good += 1;
        }
        rows.push(format!("{zi:.2}/{ze:.2}"));
    }
    outcome(
        good >= 9,
        format!("|z| < 2 for I_U0 and eta in {good}/10 seeds (z: {})", rows.join(" ")),
    )
}

fn criterion_7() -> Outcome {
    // Omega for one dataset is close to a single chi-square draw (at the true
    // parameters it ranges from about 1 to 12 across seeds), so the check pools
    // the first 20 datasets. Rates are drawn on the logit scale the model
    // assumes, with a spread the default inverse-gamma prior supports.
    let prior = default_prior_config();
    let cfg = SamplerConfig {
        ladder: TemperatureLadder::geometric(5, 1.5).unwrap(),
        n_iter: 10_000,
        burn_in: 4_000,
        thin: 6,
        ..Default::default()
    };
    let k = 20;
    let (mut omega, mut exceed, mut at_truth) = (0.0, 0.0, 0.0);
    for seed in 1..=k {
        let spec = ScenarioSpec { transform: RateTransform::Logit, gamma_sd: 0.6, ..ScenarioSpec::new(ScenarioId::Scn1) };
        let sim = generate_scenario(&spec, &mut stream_rng(seed, 0)).expect("scenario generates");
        let draws = fit_observations(&sim.obs, &prior, &SamplerConfig { seed, ..cfg.clone() }).expect("sampler runs");
        let diag = prior.diagnosis_design.build(0, sim.obs.n_days());
        let fit = bayesian_chi2(&draws, &sim.obs, prior.link, &diag, 5).expect("chi-square");
        omega += fit.mean_omega();
        exceed += fit.exceed_proportion;
        let u: Vec<f64> = sim
            .truth
            .gamma
            .iter()
            .map(|g| std_normal_cdf((Link::Logit.forward(*g).unwrap() - spec.gamma_mean_tilde) / spec.gamma_sd))
            .collect();
        at_truth += omega_statistic(&u, 5);
    }
    let (omega, exceed, at_truth) = (omega / k as f64, exceed / k as f64, at_truth / k as f64);
    outcome(
        exceed <= 0.15 && (3.2..=4.8).contains(&omega),
        format!("over {k} datasets: exceed proportion {exceed:.3}, mean omega {omega:.2} (at the true parameters {at_truth:.2})"),
    )
}

fn criterion_8(cache: &mut Cache) -> Outcome {
    let obs = cache.scn1().0.obs.clone();
    let (train, test) = train_test_split(&obs, 59).expect("split");
    let prior = default_prior_config();
    let draws = fit_observations(&train, &prior, &SamplerConfig::default()).expect("sampler runs");
    let horizon = test.n_days();
    let fc = forecast(&draws, &train, &ForecastConfig::for_prior(horizon, 1, &prior)).expect("forecast");
    let cases = fc.cases_summary();
    let inside = (0..horizon)
        .filter(|&k| cases.lo95[k] <= test.cases[k] && test.cases[k] <= cases.hi95[k])
        .count();
    // Empirical quantiles wobble from one day to the next, so the widening is
    // checked end to end and the day-to-day dips are only reported.
    let widths: Vec<f64> = (0..horizon).map(|k| cases.width(k)).collect();
    let dips = widths.windows(2).filter(|w| w[1] < w[0]).count();
    let widens = widths[horizon - 1] >= widths[0];
    outcome(
        inside as f64 >= 0.9 * horizon as f64 && widens,
        format!(
            "held-out days inside the 95% band: {inside}/{horizon}; case band width {:.0} at h=1, {:.0} at h={horizon} ({dips} day-to-day dips)",
            widths[0],
            widths[horizon - 1]
        ),
    )
}

fn criterion_9(cache: &mut Cache) -> Outcome {
    let (sim, draws) = cache.scn1();
    let obs = &sim.obs;
    let mut worst_mass: f64 = 0.0;
    for d in &draws.draws {
        let params = d.epidemic_params(obs.i_d0);
        let v0 = CompartmentState::initial(obs.population, params.i_u0, obs.i_d0);
        let traj = propagate(v0, &params, &obs.cases, obs.population).expect("retained draws are feasible");
        worst_mass = worst_mass.max(traj.max_mass_error(obs.population));
    }
    let finite = draws.draws.iter().all(|d| d.to_row().iter().all(|v| v.is_finite()))
        && draws.log_lik.iter().all(|v| v.is_finite());

    let cfg = SamplerConfig {
        ladder: TemperatureLadder::geometric(4, 1.5).unwrap(),
        n_iter: 600,
        burn_in: 200,
        thin: 4,
        seed: 21,
        ..Default::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let d = pool.install(|| fit_observations(obs, &default_prior_config(), &cfg).unwrap());
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        buf
    };
    let same = run(1) == run(3);
    let bound = 1e-6 * obs.population.get();
    outcome(
        worst_mass <= bound && finite && same,
        format!("max mass error {worst_mass:.2e} (bound {bound:.0e}); draws finite: {finite}; 1 vs 3 threads identical: {same}"),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: u32| selected.is_empty() || selected.contains(&n);
    let mut cache = Cache { scn1: None };
    let mut failed = Vec::new();
    for n in 1..=9u32 {
        if !wanted(n) {
            continue;
        }
        let start = Instant::now();
        let o = match n {
            1 => criterion_1(&mut cache),
            2 => criterion_2(),
            3 => criterion_3(),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(&mut cache),
            7 => criterion_7(),
            8 => criterion_8(&mut cache),
            _ => criterion_9(&mut cache),
        };
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {n}: {} [{:.0}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
