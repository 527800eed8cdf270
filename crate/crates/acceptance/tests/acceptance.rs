//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails that is not listed in [`KNOWN`].
//!
//! Set `MORPHOFILTER_ACCEPTANCE_DIR` to keep the run directories and
//! `MORPHOFILTER_ACCEPTANCE_ONLY=4,7` to run a subset.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use morphofilter::analysis::{site_entropy, theory_mean_compliance, TheoryModel};
use morphofilter::dynamics::{DynamicState, FlatPotential, Integrator, ThermostatParams};
use morphofilter::ensemble::{run_sweep, sample_flat, temperature_seed, EnsembleStats, SamplingParams, SweepConfig};
use morphofilter::optimizer::{optimize, OcSettings};
use morphofilter::problem::{BcPreset, FilteredCompliance, ProblemBuilder, ProblemSpec};
use morphofilter_acceptance::brute::{choose, for_each_composition};
use morphofilter_acceptance::fem::{compliance_extended, filter};
use morphofilter_acceptance::quad::TwoRegime;
use morphofilter_cli::commands::{self, RenderTarget};
use morphofilter_cli::{RunConfig, RunDir};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// Criteria expected to fail, with the reason printed next to the result.
const KNOWN: &[(usize, &str)] = &[
    (5, "<λ> saturates with the ratio at high T; see the decisions ledger"),
    (9, "edge sites of the filtered field have higher S_max; see the decisions ledger"),
];

/// The 32×16 cantilever run shared by criteria 4 to 7 and 9.
const MAIN_CONFIG: &str = r#"{
  "problem": {"nelx": 32, "nely": 16, "bc_preset": "cantilever", "vol_frac": 0.5},
  "schedule": {"auto": {"low_fraction": 0.001, "count": 24}},
  "sampling": {"n_equil": 5000, "n_samples": 500, "stride": 10},
  "anneal": true,
  "seed": 2024,
  "reference": {"sampling": {"n_equil": 20000, "n_samples": 5000, "stride": 20}}
}"#;

/// Small full pipeline for the byte-identity check.
const REPRO_CONFIG: &str = r#"{
  "problem": {"nelx": 12, "nely": 6, "bc_preset": "cantilever"},
  "schedule": {"auto": {"low_fraction": 0.01, "count": 8, "probe": {"n_equil": 1000, "n_samples": 100, "stride": 5}}},
  "sampling": {"n_equil": 1000, "n_samples": 200, "stride": 5},
  "anneal": true,
  "seed": 77,
  "reference": {"sampling": {"n_equil": 1000, "n_samples": 400, "stride": 5}}
}"#;

type Check = Result<(bool, String), String>;
type Criterion<'a> = (usize, &'static str, Box<dyn Fn() -> Check + 'a>);

fn main() -> ExitCode {
    let root = match std::env::var_os("MORPHOFILTER_ACCEPTANCE_DIR") {
        Some(p) => Workspace::Kept(PathBuf::from(p)),
        None => Workspace::Temp(tempfile::tempdir().expect("temp dir")),
    };
    let main = MainRun::new(&root.path().join("cantilever32x16"));

    let criteria: Vec<Criterion> = vec![
        (1, "gradient correctness", Box::new(c1_gradient)),
        (2, "constraint conservation", Box::new(c2_conservation)),
        (3, "thermostat fidelity", Box::new(c3_thermostat)),
        (4, "zero-temperature limit", Box::new(|| c4_zero_temperature(&main))),
        (5, "high-T ratio plateau", Box::new(|| c5_plateau(&main))),
        (6, "regime structure", Box::new(|| c6_regimes(&main))),
        (7, "condensation ordering", Box::new(|| c7_condensation(&main))),
        (8, "theory layer", Box::new(c8_theory)),
        (9, "entropy normalization", Box::new(|| c9_entropy(&main))),
        (10, "oracle equivalence 6x3", Box::new(c10_brute_force)),
        (11, "reproducibility", Box::new(|| c11_reproducibility(root.path()))),
    ];

    let only: Option<Vec<usize>> = std::env::var("MORPHOFILTER_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());

    let mut unexpected = 0;
    for (n, title, check) in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(n)) {
            continue;
        }
        let t0 = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        let secs = t0.elapsed().as_secs_f64();
        let known = KNOWN.iter().find(|(k, _)| k == n).map(|(_, why)| *why);
        let verdict = match (pass, known) {
            (true, _) => "PASS".to_string(),
            (false, Some(why)) => format!("FAIL (known: {why})"),
            (false, None) => {
                unexpected += 1;
                "FAIL".to_string()
            }
        };
        println!("criterion {n:>2} {verdict}: {title}: {detail} [{secs:.1}s]");
    }
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

enum Workspace {
    Temp(tempfile::TempDir),
    Kept(PathBuf),
}

impl Workspace {
    fn path(&self) -> &Path {
        match self {
            Self::Temp(t) => t.path(),
            Self::Kept(p) => p,
        }
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn cantilever(nelx: usize, nely: usize, rmin: f64) -> ProblemSpec {
    ProblemBuilder::new(nelx, nely)
        .preset(BcPreset::Cantilever)
        .filter_radius(rmin)
        .build()
        .expect("valid cantilever")
}

fn random_feasible(spec: &ProblemSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = spec.n_elements();
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..0.8)).collect();
    let shift = (spec.target_volume() - x.iter().sum::<f64>()) / n as f64;
    x.iter_mut().for_each(|v| *v += shift);
    x
}

// 1 ------------------------------------------------------------------------

/// Analytic gradient against central differences of the double-double oracle,
/// worst per-component relative error.
fn c1_gradient() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for (nelx, nely) in [(8, 4), (16, 8)] {
        let spec = cantilever(nelx, nely, 1.5);
        for _ in 0..2 {
            let x = random_feasible(&spec, &mut rng);
            let mut g = vec![0.0; x.len()];
            FilteredCompliance::new(&spec).evaluate(&x, &mut g).map_err(err)?;
            let h = 1e-6;
            for e in 0..x.len() {
                let mut y = x.clone();
                y[e] = x[e] + h;
                let cp = compliance_extended(&spec, &filter(&spec, &y));
                y[e] = x[e] - h;
                let cm = compliance_extended(&spec, &filter(&spec, &y));
                let fd = (cp - cm) / (2.0 * h);
                worst = worst.max((fd - g[e]).abs() / g[e].abs());
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-5 && secs < 60.0,
        format!("max relative error {worst:.2e} (limit 1e-5) in {secs:.1}s (limit 60s)"),
    ))
}

// 2 ------------------------------------------------------------------------

fn c2_conservation() -> Check {
    let spec = cantilever(16, 8, 1.5);
    let params = ThermostatParams::new(spec.n_elements(), 5.0).map_err(err)?;
    let mut state = DynamicState::initialize(&spec, &params, 2).map_err(err)?;
    let mut it = Integrator::new(FilteredCompliance::new(&spec), params).map_err(err)?;
    let (mut dv, mut dp): (f64, f64) = (0.0, 0.0);
    let steps = 1_000_000;
    for _ in 0..steps {
        it.step(&mut state).map_err(err)?;
        dv = dv.max(state.volume_error());
        dp = dp.max(state.momentum_sum().abs());
    }
    Ok((
        dv <= 1e-10 && dp <= 1e-10,
        format!("{steps} steps at T=5 on 16x8: max |Σx-V0| = {dv:.1e}, max |Σp| = {dp:.1e} (limit 1e-10)"),
    ))
}

// 3 ------------------------------------------------------------------------

/// Zero force at T = 1 on 128 unfiltered sites. Histograms use every 500th
/// step so samples are close to independent; the per-site χ² tests are
/// combined with a Šidák correction so the family-wise level is 1%.
fn c3_thermostat() -> Check {
    let spec = cantilever(16, 8, 1.5);
    let n = spec.n_elements();
    let params = ThermostatParams::new(n, 1.0).map_err(err)?;
    let mut state = DynamicState::initialize(&spec, &params, 3).map_err(err)?;
    let mut it = Integrator::new(FlatPotential::new(n), params).map_err(err)?;
    it.run(&mut state, 50_000).map_err(err)?;

    let h0 = it.extended_hamiltonian(&mut state).map_err(err)?;
    let mut drift: f64 = 0.0;
    for _ in 0..100_000 {
        it.step(&mut state).map_err(err)?;
        let h = it.extended_hamiltonian(&mut state).map_err(err)?;
        drift = drift.max((h - h0).abs() / h0.abs());
    }

    const BINS: usize = 10;
    const STRIDE: usize = 500;
    const SAMPLES: usize = 5_000;
    let mut p2 = vec![0.0; n];
    let mut hist = vec![[0u64; BINS]; n];
    for _ in 0..SAMPLES {
        for _ in 0..STRIDE {
            it.step(&mut state).map_err(err)?;
            for (acc, p) in p2.iter_mut().zip(&state.momenta) {
                *acc += p * p;
            }
        }
        for (h, &x) in hist.iter_mut().zip(&state.x) {
            h[((x * BINS as f64) as usize).min(BINS - 1)] += 1;
        }
    }
    let total = (SAMPLES * STRIDE) as f64;
    let p2_dev = p2.iter().map(|v| (v / total / 0.5 - 1.0).abs()).fold(0.0, f64::max);

    let chi = ChiSquared::new((BINS - 1) as f64).map_err(err)?;
    let alpha = 1.0 - 0.99f64.powf(1.0 / n as f64);
    let expected = SAMPLES as f64 / BINS as f64;
    let p_min = hist
        .iter()
        .map(|h| {
            let stat: f64 = h.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            1.0 - chi.cdf(stat)
        })
        .fold(1.0, f64::min);

    Ok((
        p2_dev <= 0.05 && p_min >= alpha && drift <= 1e-3,
        format!(
            "max |<p²>/0.5-1| = {:.2}% (limit 5%), min χ² p = {p_min:.2e} (limit {alpha:.1e}), \
             H_NHC drift {drift:.1e} over 1e5 steps (limit 1e-3)",
            100.0 * p2_dev
        ),
    ))
}

// shared 32×16 run --------------------------------------------------------

struct MainRun {
    dir: PathBuf,
    outcome: std::sync::OnceLock<Result<MainResults, String>>,
}

struct MainResults {
    cfg: RunConfig,
    spec: ProblemSpec,
    c_min: f64,
    x_star: Vec<f64>,
    series: morphofilter::ensemble::SweepSeries,
    analysis: commands::Analysis,
    reference: morphofilter::analysis::MaxEntropyReference,
    sweep_seconds: f64,
}

impl MainRun {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            outcome: std::sync::OnceLock::new(),
        }
    }

    fn get(&self) -> Result<&MainResults, String> {
        self.outcome.get_or_init(|| self.run()).as_ref().map_err(Clone::clone)
    }

    fn run(&self) -> Result<MainResults, String> {
        let cfg = RunConfig::from_json(MAIN_CONFIG).map_err(err)?;
        let dir = RunDir::new(&self.dir).map_err(err)?;
        let opt = commands::cmd_optimize(&cfg, &dir).map_err(err)?;
        let t0 = Instant::now();
        let series = commands::cmd_sweep(&cfg, &dir, false).map_err(err)?;
        let sweep_seconds = t0.elapsed().as_secs_f64();
        let reference = commands::cmd_reference(&cfg, &dir).map_err(err)?;
        let analysis = commands::cmd_analyze(&cfg, &dir).map_err(err)?;
        let spec = cfg.spec().map_err(err)?;
        Ok(MainResults {
            spec: spec.clone(),
            cfg,
            c_min: opt.c_min,
            x_star: opt.physical_density(&spec).into_inner(),
            series,
            analysis,
            reference,
            sweep_seconds,
        })
    }
}

// 4 ------------------------------------------------------------------------

fn c4_zero_temperature(main: &MainRun) -> Check {
    let r = main.get()?;
    let last = r.series.entries.last().ok_or("empty sweep")?;
    let ratio = last.mean_compliance / r.c_min;
    Ok((
        ratio <= 1.1 && r.sweep_seconds <= 1800.0,
        format!(
            "annealed 32x16 sweep ends at T={:.3e} with <C>/C_min = {ratio:.4} (limit 1.1); sweep took {:.0}s (limit 1800s)",
            last.temperature, r.sweep_seconds
        ),
    ))
}

// 5 ------------------------------------------------------------------------

/// Temperatures above the auto schedule, where the compliance ratio has
/// saturated. The auto schedule stops once the ratio reaches its target.
const PLATEAU_EXTENSION: [f64; 6] = [3000.0, 1000.0, 300.0, 100.0, 30.0, 10.0];

/// Top-temperature ratio, then a window of consecutive temperatures where
/// the ratio moves by less than 5% while `⟨λ⟩` moves by more than 50%. The
/// `⟨λ⟩` change must also exceed twice its combined standard error so
/// sampling noise alone cannot satisfy it. The series is the main sweep
/// plus [`PLATEAU_EXTENSION`].
fn c5_plateau(main: &MainRun) -> Check {
    let r = main.get()?;
    let config = SweepConfig {
        schedule: PLATEAU_EXTENSION.to_vec(),
        thermostat: r.cfg.thermostat,
        sampling: r.cfg.sampling,
        anneal: false,
        seed: r.cfg.seed ^ 0x5,
    };
    let ext = run_sweep(&r.spec, &config, Some(r.c_min)).map_err(err)?;
    if !ext.failures.is_empty() {
        return Err(format!("{} extension temperatures failed", ext.failures.len()));
    }
    let top_main = r.series.entries[0].temperature;
    let e: Vec<&EnsembleStats> = ext
        .entries
        .iter()
        .filter(|s| s.temperature > top_main)
        .chain(&r.series.entries)
        .collect();
    let top = r.series.entries[0].mean_compliance / r.c_min;
    let mut found = None;
    let mut best_lambda: f64 = 0.0;
    for i in 0..e.len() {
        for j in i + 1..e.len() {
            let ratios: Vec<f64> = e[i..=j].iter().map(|s| s.mean_compliance / r.c_min).collect();
            let (lo, hi) = min_max(&ratios);
            if hi / lo - 1.0 >= 0.05 {
                break;
            }
            let (a, b) = (e[i], e[j]);
            let dl = (a.mean_pressure - b.mean_pressure).abs();
            let rel = dl / a.mean_pressure.abs().min(b.mean_pressure.abs());
            let noise = 2.0 * (a.pressure_std_error.powi(2) + b.pressure_std_error.powi(2)).sqrt();
            best_lambda = best_lambda.max(rel);
            if rel > 0.5 && dl > noise && found.is_none() {
                found = Some((a.temperature, b.temperature, hi / lo - 1.0, rel, dl / noise * 2.0));
            }
        }
    }
    let window = match found {
        Some((ta, tb, dr, dl, z)) => format!(
            "window T {tb:.3e}..{ta:.3e}: ratio change {:.1}%, <λ> change {:.0}% ({z:.1} standard errors)",
            100.0 * dr,
            100.0 * dl
        ),
        None => format!(
            "no window with ratio change < 5% and <λ> change > 50% (largest <λ> change inside a flat window {:.0}%)",
            100.0 * best_lambda
        ),
    };
    Ok((
        top >= 3.0 && found.is_some(),
        format!("auto schedule top T={top_main:.3e} ratio {top:.2} (limit 3); {window}"),
    ))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

// 6 ------------------------------------------------------------------------

fn c6_regimes(main: &MainRun) -> Check {
    let r = main.get()?;
    let fit = &r.analysis.regimes;
    let slopes = fit.slopes();
    let increasing = fit.slopes_increase_toward_low_t();
    Ok((
        slopes.len() >= 3 && increasing,
        format!(
            "{} segments (limit 3), slopes high-to-low T {:?}, strictly increasing toward low T: {increasing}",
            slopes.len(),
            slopes.iter().rev().map(|s| format!("{s:.3}")).collect::<Vec<_>>()
        ),
    ))
}

// 7 ------------------------------------------------------------------------

fn c7_condensation(main: &MainRun) -> Check {
    let r = main.get()?;
    let top = r.analysis.condensation.top_sites(0.1);
    let near = r.spec.elements_near_supports(2.0);
    let near_hits = top.iter().filter(|e| near.contains(e)).count();
    let void: Vec<usize> = (0..r.x_star.len()).filter(|&e| r.x_star[e] <= 1e-3).collect();
    let void_hits = top.iter().filter(|e| void.contains(e)).count();
    Ok((
        near_hits >= 1 && void_hits == 0,
        format!(
            "top decile {} sites: {near_hits} within 2 elements of the clamped edge (need >= 1), \
             {void_hits} of {} void sites of x* (need 0)",
            top.len(),
            void.len()
        ),
    ))
}

// 8 ------------------------------------------------------------------------

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn random_model(rng: &mut ChaCha8Rng) -> TheoryModel {
    let nu = rng.gen_range(0.5..4.0);
    let c_min = log_uniform(rng, 1.0, 100.0);
    TheoryModel {
        c_min,
        c_star: c_min + log_uniform(rng, 0.5, 20.0),
        n_below: nu * rng.gen_range(1.0..40.0),
        n_above: nu * rng.gen_range(2.0..40.0),
        nu,
        gamma_below: log_uniform(rng, 1e-3, 1e3),
        gamma_above: log_uniform(rng, 1e-3, 1e3),
    }
}

/// Temperatures deep inside each asymptotic regime. Low: `D/T` far above
/// the below-regime exponent. High: the tail term of the partition function
/// beats the plateau and below-regime terms by a factor `10^5`.
fn asymptotic_temperatures(m: &TheoryModel) -> (f64, f64) {
    let d = m.c_star - m.c_min;
    let (a, b) = (m.slope_below(), m.slope_above());
    let t_low = d / (1e4 * (a + 1.0));
    let margin = 1e5f64.ln();
    let tail = m.gamma_above.ln() + ln_gamma(b);
    let plateau = (margin + m.gamma_below.ln() + (a - 1.0) * d.ln() - tail) / (b - 1.0);
    let below = (margin + m.gamma_below.ln() + a * d.ln() - a.ln() - tail) / b;
    let t_high = plateau.max(below).exp().max(1e4 * d);
    (t_low, t_high)
}

fn fd_slope(m: &TheoryModel, t: f64) -> Result<f64, String> {
    let h = 1e-4;
    let up = theory_mean_compliance(m, t * (1.0 + h)).map_err(err)?;
    let down = theory_mean_compliance(m, t * (1.0 - h)).map_err(err)?;
    Ok((up - down) / (2.0 * h * t))
}

fn c8_theory() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    // single regime: <C> = C_min + (N/ν) T
    let mut single: f64 = 0.0;
    for _ in 0..200 {
        let c_min = log_uniform(&mut rng, 1e-2, 1e3);
        let k = log_uniform(&mut rng, 0.1, 500.0);
        let m = TheoryModel::single_regime(c_min, k).map_err(err)?;
        let t = log_uniform(&mut rng, 1e-6, 1e6);
        let exact = c_min + k * t;
        single = single.max((theory_mean_compliance(&m, t).map_err(err)? - exact).abs() / exact);
    }

    // asymptotic slopes of 100 random two-regime models
    let mut slope_err: f64 = 0.0;
    for _ in 0..100 {
        let m = random_model(&mut rng);
        let (t_lo, t_hi) = asymptotic_temperatures(&m);
        for (t, want) in [(t_lo, m.slope_below()), (t_hi, m.slope_above())] {
            let var_slope = m.moments(t).map_err(err)?.slope(t);
            for got in [var_slope, fd_slope(&m, t)?] {
                slope_err = slope_err.max((got - want).abs() / want);
            }
        }
    }

    // direct quadrature across the crossover
    let mut quad_err: f64 = 0.0;
    for _ in 0..25 {
        let m = random_model(&mut rng);
        let oracle = TwoRegime {
            c_min: m.c_min,
            c_star: m.c_star,
            a: m.slope_below(),
            b: m.slope_above(),
            gamma_below: m.gamma_below,
            gamma_above: m.gamma_above,
        };
        let d = m.c_star - m.c_min;
        for f in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let t = f * d;
            let got = theory_mean_compliance(&m, t).map_err(err)?;
            let want = oracle.mean(t);
            quad_err = quad_err.max((got - want).abs() / want);
        }
    }

    Ok((
        single <= 1e-12 && slope_err <= 0.02 && quad_err <= 1e-6,
        format!(
            "single-regime max rel error {single:.1e} (limit 1e-12); asymptotic slopes max rel error {:.3}% \
             over 100 models (limit 2%); quadrature max rel error {quad_err:.1e} (limit 1e-6)",
            100.0 * slope_err
        ),
    ))
}

// 9 ------------------------------------------------------------------------

/// Normalized entropy of an independent zero-force run against the stored
/// reference, and the cross-site spread `(max - min) / max` of `S_max`.
fn c9_entropy(main: &MainRun) -> Check {
    let r = main.get()?;
    let sampling: SamplingParams = r.cfg.reference_sampling();
    let params = r.cfg.thermostat.params(r.spec.n_elements(), r.cfg.reference.temperature).map_err(err)?;
    let stats = sample_flat(&r.spec, &params, &sampling, temperature_seed(99, 0)).map_err(err)?;
    let mut s_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (h, s_max) in stats.density_histograms.iter().zip(&r.reference.s_max) {
        let s = site_entropy(h).map_err(err)? / s_max;
        s_range = (s_range.0.min(s), s_range.1.max(s));
    }
    let spread = r.reference.spread();
    let in_band = s_range.0 >= 0.95 && s_range.1 <= 1.05;
    Ok((
        in_band && spread <= 0.05,
        format!(
            "independent zero-force s in [{:.4}, {:.4}] (band [0.95, 1.05]); S_max spread {:.1}% (limit 5%), \
             relative std {:.1}%",
            s_range.0,
            s_range.1,
            100.0 * spread,
            100.0 * r.reference.relative_std()
        ),
    ))
}

// 10 -----------------------------------------------------------------------

/// OC against two exhaustive searches on the 6×3 cantilever: every binary
/// design with exactly half the elements solid, and every mirror-symmetric
/// design on the levels {0, 1/4, 1/2, 3/4, 1} with the exact volume.
fn c10_brute_force() -> Check {
    let spec = cantilever(6, 3, 1.5);
    let n = spec.n_elements();
    let oc = optimize(&spec, &OcSettings::default()).map_err(err)?;
    let mut obj = FilteredCompliance::new(&spec);
    let mut grad = vec![0.0; n];
    let mut eval = |x: &[f64]| obj.evaluate(x, &mut grad).expect("compliance");

    let mut best_binary = f64::INFINITY;
    let mut count = 0u64;
    for_each_composition(n, 2, n / 2, |v| {
        let x: Vec<f64> = v.iter().map(|&k| k as f64).collect();
        best_binary = best_binary.min(eval(&x));
        count += 1;
    });
    assert_eq!(count, choose(n as u64, n as u64 / 2));

    // rows iy = 0 and 2 mirror each other; iy = 1 maps to itself
    let quarter_units = (4.0 * spec.target_volume()).round() as usize;
    let row = |ix: usize, iy: usize| spec.element_index(ix, iy);
    let mut best_sym = f64::INFINITY;
    let mut x = vec![0.0; n];
    for outer in 0..=6 * 4 {
        let Some(middle) = quarter_units.checked_sub(2 * outer) else {
            break;
        };
        if middle > 6 * 4 {
            continue;
        }
        let mut middles = Vec::new();
        for_each_composition(6, 5, middle, |v| middles.push(v.to_vec()));
        for_each_composition(6, 5, outer, |v| {
            for ix in 0..6 {
                x[row(ix, 0)] = v[ix] as f64 / 4.0;
                x[row(ix, 2)] = v[ix] as f64 / 4.0;
            }
            for m in &middles {
                for ix in 0..6 {
                    x[row(ix, 1)] = m[ix] as f64 / 4.0;
                }
                best_sym = best_sym.min(eval(&x));
            }
        });
    }
    let best = best_binary.min(best_sym);
    let gap = oc.c_min / best - 1.0;
    Ok((
        gap <= 0.02,
        format!(
            "OC C = {:.4}, binary search {best_binary:.4}, symmetric 5-level search {best_sym:.4}; \
             OC exceeds the best discrete design by {:+.2}% (limit +2%)",
            oc.c_min,
            100.0 * gap
        ),
    ))
}

// 11 -----------------------------------------------------------------------

fn full_pipeline(cfg: &RunConfig, out: &Path) -> Result<morphofilter_cli::RunManifest, String> {
    let dir = RunDir::new(out).map_err(err)?;
    commands::cmd_optimize(cfg, &dir).map_err(err)?;
    commands::cmd_sweep(cfg, &dir, false).map_err(err)?;
    commands::cmd_reference(cfg, &dir).map_err(err)?;
    commands::cmd_analyze(cfg, &dir).map_err(err)?;
    for target in ["x_star", "mean_density", "entropy", "condensation", "importance"] {
        let t: RenderTarget = target.parse().map_err(err)?;
        commands::cmd_render(cfg, &dir, &t).map_err(err)?;
    }
    dir.manifest().map_err(err)
}

fn c11_reproducibility(root: &Path) -> Check {
    let cfg = RunConfig::from_json(REPRO_CONFIG).map_err(err)?;
    let (a, b) = (root.join("repro_a"), root.join("repro_b"));
    let ma = full_pipeline(&cfg, &a)?;
    let mb = full_pipeline(&cfg, &b)?;
    let mut checked = 0;
    let mut differing = Vec::new();
    for f in ma.files().filter(|f| f.path.ends_with(".csv") || f.path.ends_with(".json")) {
        let x = std::fs::read(a.join(&f.path)).map_err(err)?;
        let y = std::fs::read(b.join(&f.path)).map_err(err)?;
        if x != y {
            differing.push(f.path.clone());
        }
        checked += 1;
    }
    let same_inventory = ma.stages == mb.stages && ma.config_hash == mb.config_hash;
    Ok((
        differing.is_empty() && same_inventory && checked > 0,
        format!(
            "{checked} CSV/JSON files compared, {} differ; manifest inventories identical: {same_inventory}",
            differing.len()
        ),
    ))
}
