//! Temperature sweeps: equilibrate, sample, accumulate per-site statistics.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Coupling, DynamicState, FlatPotential, Integrator, Potential, ThermostatParams};
use crate::error::{Error, Result};
use crate::problem::{DensityFilter, FilteredCompliance, ProblemSpec};

pub const DEFAULT_BINS: usize = 32;
const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub n_equil: u64,
    pub n_samples: usize,
    pub stride: u64,
    pub bins: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            n_equil: 50_000,
            n_samples: 2_000,
            stride: 25,
            bins: DEFAULT_BINS,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if self.n_samples == 0 {
            return bad("n_samples", "must be at least 1");
        }
        if self.stride == 0 {
            return bad("stride", "must be at least 1");
        }
        if self.bins == 0 {
            return bad("bins", "must be at least 1");
        }
        Ok(())
    }
}

/// Thermostat settings shared by every temperature of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermostatTemplate {
    pub timestep: f64,
    pub chain_length: usize,
    /// Relaxation time in units of the time step.
    pub tau_steps: f64,
    pub coupling: Coupling,
}

impl Default for ThermostatTemplate {
    fn default() -> Self {
        Self {
            timestep: crate::dynamics::DEFAULT_TIMESTEP,
            chain_length: crate::dynamics::DEFAULT_CHAIN_LENGTH,
            tau_steps: crate::dynamics::DEFAULT_TAU_STEPS,
            coupling: Coupling::default(),
        }
    }
}

impl ThermostatTemplate {
    pub fn params(&self, n_sites: usize, temperature: f64) -> Result<ThermostatParams> {
        ThermostatParams::builder(n_sites, temperature)
            .timestep(self.timestep)
            .chain_length(self.chain_length)
            .relaxation_time(self.tau_steps * self.timestep)
            .coupling(self.coupling)
            .build()
    }
}

/// Observables accumulated at one temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub temperature: f64,
    pub n_samples: usize,
    pub seed: u64,
    /// `⟨x_e⟩` of the design field.
    pub mean_density: Vec<f64>,
    /// `⟨x̃_e⟩` of the observed (filtered) field.
    pub mean_physical_density: Vec<f64>,
    /// Per-site counts of the observed field over `bins` equal bins on `[0,1]`.
    pub density_histograms: Vec<Vec<u64>>,
    pub bins: usize,
    pub mean_compliance: f64,
    pub compliance_second_moment: f64,
    /// Batch-means standard error of `⟨C⟩`.
    pub compliance_std_error: f64,
    /// `⟨λ⟩`, including the wall impulse absorbed by the constraint.
    pub mean_pressure: f64,
    pub pressure_std_error: f64,
    /// Potential-force part of `⟨λ⟩`.
    pub mean_force_pressure: f64,
    /// `⟨C⟩` over the first and second halves of the sampling window.
    pub half_window_compliance: [f64; 2],
    pub equilibrated: bool,
    pub c_min_reference: Option<f64>,
}

impl EnsembleStats {
    pub fn compliance_variance(&self) -> f64 {
        (self.compliance_second_moment - self.mean_compliance * self.mean_compliance).max(0.0)
    }
}

/// `⟨C⟩ / C_min`.
pub fn compliance_ratio(stats: &EnsembleStats) -> Result<f64> {
    match stats.c_min_reference {
        Some(c) if c > 0.0 => Ok(stats.mean_compliance / c),
        _ => Err(Error::MissingReference),
    }
}

/// Bin index of a density on `[0,1]`.
#[inline]
pub fn bin_of(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

struct Accumulator {
    bins: usize,
    sum_x: Vec<f64>,
    sum_obs: Vec<f64>,
    hist: Vec<Vec<u64>>,
    c: Vec<f64>,
    lambda: Vec<f64>,
    lambda_force: f64,
}

impl Accumulator {
    fn new(n: usize, bins: usize, capacity: usize) -> Self {
        Self {
            bins,
            sum_x: vec![0.0; n],
            sum_obs: vec![0.0; n],
            hist: vec![vec![0; bins]; n],
            c: Vec::with_capacity(capacity),
            lambda: Vec::with_capacity(capacity),
            lambda_force: 0.0,
        }
    }

    fn record(&mut self, x: &[f64], observed: &[f64], c: f64, lambda: f64, lambda_force: f64) {
        self.lambda_force += lambda_force;
        for (s, v) in self.sum_x.iter_mut().zip(x) {
            *s += v;
        }
        for ((s, h), &v) in self.sum_obs.iter_mut().zip(self.hist.iter_mut()).zip(observed) {
            *s += v;
            h[bin_of(v, self.bins)] += 1;
        }
        self.c.push(c);
        self.lambda.push(lambda);
    }

    fn finish(self, temperature: f64, seed: u64, c_min: Option<f64>) -> EnsembleStats {
        let m = self.c.len();
        let mf = m as f64;
        let mean_c = self.c.iter().sum::<f64>() / mf;
        let c2 = self.c.iter().map(|c| c * c).sum::<f64>() / mf;
        let half = m / 2;
        let halves = if half >= 1 {
            [mean(&self.c[..half]), mean(&self.c[half..])]
        } else {
            [mean_c, mean_c]
        };
        let se_first = batch_std_error(&self.c[..half.max(1).min(m)]);
        let se_second = batch_std_error(&self.c[half.min(m - 1)..]);
        let diff = (halves[0] - halves[1]).abs();
        let equilibrated = diff <= 3.0 * (se_first * se_first + se_second * se_second).sqrt() || m < 4;
        EnsembleStats {
            temperature,
            n_samples: m,
            seed,
            mean_density: self.sum_x.iter().map(|s| s / mf).collect(),
            mean_physical_density: self.sum_obs.iter().map(|s| s / mf).collect(),
            density_histograms: self.hist,
            bins: self.bins,
            mean_compliance: mean_c,
            compliance_second_moment: c2.max(mean_c * mean_c),
            compliance_std_error: batch_std_error(&self.c),
            mean_pressure: mean(&self.lambda),
            pressure_std_error: batch_std_error(&self.lambda),
            mean_force_pressure: self.lambda_force / mf,
            half_window_compliance: halves,
            equilibrated,
            c_min_reference: c_min,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean from non-overlapping batch means.
pub fn batch_std_error(v: &[f64]) -> f64 {
    let nb = BATCHES.min(v.len());
    if nb < 2 {
        return 0.0;
    }
    let size = v.len() / nb;
    let means: Vec<f64> = (0..nb).map(|b| mean(&v[b * size..(b + 1) * size])).collect();
    let m = mean(&means);
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nb - 1) as f64;
    (var / nb as f64).sqrt()
}

/// Runs `n_equil` unrecorded steps, then records every `stride`-th step.
pub fn sample_with<P: Potential>(
    integrator: &mut Integrator<P>,
    state: &mut DynamicState,
    sampling: &SamplingParams,
    seed: u64,
    c_min: Option<f64>,
) -> Result<EnsembleStats> {
    sampling.validate()?;
    integrator.prepare(state)?;
    integrator.run(state, sampling.n_equil)?;
    let mut acc = Accumulator::new(state.n_sites(), sampling.bins, sampling.n_samples);
    for _ in 0..sampling.n_samples {
        // λ is impulsive at wall contacts, so it is averaged over every step
        let mut lambda = 0.0;
        for _ in 0..sampling.stride {
            integrator.step(state)?;
            lambda += state.lagrange_multiplier;
        }
        lambda /= sampling.stride as f64;
        let c = state.potential_energy().unwrap_or_default();
        acc.record(&state.x, integrator.observed(state), c, lambda, state.force_multiplier);
    }
    Ok(acc.finish(integrator.params().target_temperature, seed, c_min))
}

/// Samples the filtered-compliance ensemble at one temperature. A warm start
/// keeps positions, rescales momenta to the new temperature and resets the chain.
pub fn sample_at_temperature(
    spec: &ProblemSpec,
    params: &ThermostatParams,
    sampling: &SamplingParams,
    seed: u64,
    warm_start: Option<DynamicState>,
    c_min: Option<f64>,
) -> Result<(EnsembleStats, DynamicState)> {
    let mut state = start_state(spec, params, seed, warm_start)?;
    let mut integrator = Integrator::new(FilteredCompliance::new(spec), params.clone())?;
    let stats = sample_with(&mut integrator, &mut state, sampling, seed, c_min)?;
    Ok((stats, state))
}

fn start_state(
    spec: &ProblemSpec,
    params: &ThermostatParams,
    seed: u64,
    warm: Option<DynamicState>,
) -> Result<DynamicState> {
    let fresh = DynamicState::initialize(spec, params, seed)?;
    Ok(match warm {
        None => fresh,
        Some(w) => {
            if w.n_sites() != spec.n_elements() {
                return Err(Error::MeshMismatch {
                    expected: spec.n_elements(),
                    actual: w.n_sites(),
                });
            }
            let n = w.n_sites() as f64;
            let ke = w.kinetic_energy();
            let target = 0.5 * params.target_temperature * (n - 1.0);
            let scale = if ke > 0.0 { (target / ke).sqrt() } else { 0.0 };
            DynamicState {
                momenta: if ke > 0.0 {
                    w.momenta.iter().map(|p| p * scale).collect()
                } else {
                    fresh.momenta.clone()
                },
                x: w.x,
                step_count: w.step_count,
                ..fresh
            }
        }
    })
}

/// Zero-force reference run. Observables are taken on the filtered field,
/// as in the compliance runs.
pub fn sample_flat(
    spec: &ProblemSpec,
    params: &ThermostatParams,
    sampling: &SamplingParams,
    seed: u64,
) -> Result<EnsembleStats> {
    let mut state = DynamicState::initialize(spec, params, seed)?;
    let mut integrator = Integrator::new(FlatPotential::with_filter(DensityFilter::new(spec)), params.clone())?;
    sample_with(&mut integrator, &mut state, sampling, seed, None)
}

/// Seed for temperature index `i` derived from the master seed.
pub fn temperature_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64 ^ 0x6d6f_7270_686f_6669))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// `count` temperatures from `t_hi` down to `t_lo`.
pub fn schedule(t_hi: f64, t_lo: f64, count: usize, spacing: Spacing) -> Result<Vec<f64>> {
    if !(t_hi > t_lo && t_lo > 0.0 && t_hi.is_finite()) || count == 0 {
        return Err(Error::InvalidParameter {
            name: "schedule",
            reason: format!("need t_hi > t_lo > 0 and count >= 1, got {t_hi}, {t_lo}, {count}"),
        });
    }
    if count == 1 {
        return Ok(vec![t_hi]);
    }
    let k = (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            let f = i as f64 / k;
            match spacing {
                Spacing::Log => (t_hi.ln() + f * (t_lo.ln() - t_hi.ln())).exp(),
                Spacing::Linear => t_hi + f * (t_lo - t_hi),
            }
        })
        .collect())
}

pub fn validate_schedule(temps: &[f64]) -> Result<()> {
    if temps.is_empty() {
        return Err(Error::InvalidParameter {
            name: "schedule",
            reason: "empty".into(),
        });
    }
    if temps.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "schedule",
            reason: "temperatures must be positive and finite".into(),
        });
    }
    if temps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "schedule",
            reason: "temperatures must be strictly decreasing".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFailure {
    pub index: usize,
    pub temperature: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub spec_hash: String,
    pub master_seed: u64,
    pub anneal: bool,
    /// Successful temperatures, descending.
    pub entries: Vec<EnsembleStats>,
    pub failures: Vec<TemperatureFailure>,
}

impl SweepSeries {
    pub fn temperatures(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.temperature).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub schedule: Vec<f64>,
    pub thermostat: ThermostatTemplate,
    pub sampling: SamplingParams,
    pub anneal: bool,
    pub seed: u64,
}

/// Runs every temperature of the schedule. Failures are collected; an
/// annealed sweep continues from the last good state.
pub fn run_sweep(spec: &ProblemSpec, config: &SweepConfig, c_min: Option<f64>) -> Result<SweepSeries> {
    run_sweep_with_progress(spec, config, c_min, &|_, _| {})
}

pub fn run_sweep_with_progress(
    spec: &ProblemSpec,
    config: &SweepConfig,
    c_min: Option<f64>,
    progress: &(dyn Fn(usize, &Result<EnsembleStats>) + Sync),
) -> Result<SweepSeries> {
    validate_schedule(&config.schedule)?;
    config.sampling.validate()?;
    let n = spec.n_elements();
    let run_one = |i: usize, t: f64, warm: Option<DynamicState>| -> Result<(EnsembleStats, DynamicState)> {
        let params = config.thermostat.params(n, t)?;
        sample_at_temperature(spec, &params, &config.sampling, temperature_seed(config.seed, i), warm, c_min)
    };

    let results: Vec<Result<EnsembleStats>> = if config.anneal {
        let mut warm = None;
        let mut out = Vec::with_capacity(config.schedule.len());
        for (i, &t) in config.schedule.iter().enumerate() {
            let r = run_one(i, t, warm.clone()).map(|(stats, state)| {
                warm = Some(state);
                stats
            });
            progress(i, &r);
            out.push(r);
        }
        out
    } else {
        let job = |(i, &t): (usize, &f64)| {
            let r = run_one(i, t, None).map(|(s, _)| s);
            progress(i, &r);
            r
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            config.schedule.par_iter().enumerate().map(job).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            config.schedule.iter().enumerate().map(job).collect()
        }
    };

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(s) => entries.push(s),
            Err(e) => failures.push(TemperatureFailure {
                index: i,
                temperature: config.schedule[i],
                message: e.to_string(),
            }),
        }
    }
    Ok(SweepSeries {
        spec_hash: spec.content_hash(),
        master_seed: config.seed,
        anneal: config.anneal,
        entries,
        failures,
    })
}

/// Doubles a trial temperature from `t_start` until a short run reaches
/// `⟨C⟩/C_min ≥ target_ratio`. Returns the temperature and the ratio there.
pub fn probe_high_temperature(
    spec: &ProblemSpec,
    thermostat: &ThermostatTemplate,
    probe: &SamplingParams,
    c_min: f64,
    target_ratio: f64,
    t_start: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(c_min > 0.0) {
        return Err(Error::MissingReference);
    }
    let n = spec.n_elements();
    let mut t = t_start;
    for i in 0..60 {
        let params = thermostat.params(n, t)?;
        let (stats, _) = sample_at_temperature(spec, &params, probe, temperature_seed(seed, 1000 + i), None, Some(c_min))?;
        let ratio = stats.mean_compliance / c_min;
        if ratio >= target_ratio {
            return Ok((t, ratio));
        }
        t *= 2.0;
    }
    Err(Error::InsufficientData(format!(
        "compliance ratio {target_ratio} not reached by T = {t}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_error_of_constant_is_zero() {
        assert_eq!(batch_std_error(&[2.0; 100]), 0.0);
        assert_eq!(batch_std_error(&[1.0]), 0.0);
    }

    #[test]
    fn ratio_arithmetic() {
        let s = EnsembleStats {
            temperature: 1.0,
            n_samples: 1,
            seed: 0,
            mean_density: vec![],
            mean_physical_density: vec![],
            density_histograms: vec![],
            bins: 32,
            mean_compliance: 10.0,
            compliance_second_moment: 100.0,
            compliance_std_error: 0.0,
            mean_pressure: 0.0,
            pressure_std_error: 0.0,
            mean_force_pressure: 0.0,
            half_window_compliance: [10.0, 10.0],
            equilibrated: true,
            c_min_reference: Some(4.0),
        };
        assert_eq!(compliance_ratio(&s).unwrap(), 2.5);
        let same = EnsembleStats {
            c_min_reference: Some(10.0),
            ..s.clone()
        };
        assert_eq!(compliance_ratio(&same).unwrap(), 1.0);
        let none = EnsembleStats {
            c_min_reference: None,
            ..s
        };
        assert!(matches!(compliance_ratio(&none), Err(Error::MissingReference)));
    }

    #[test]
    fn schedules() {
        let s = schedule(10.0, 0.5, 24, Spacing::Log).unwrap();
        assert_eq!(s.len(), 24);
        assert!((s[0] - 10.0).abs() < 1e-12 && (s[23] - 0.5).abs() < 1e-12);
        validate_schedule(&s).unwrap();
        assert!(validate_schedule(&[1.0, 1.0]).is_err());
        assert!(validate_schedule(&[]).is_err());
        assert!(schedule(1.0, 2.0, 3, Spacing::Linear).is_err());
    }

    #[test]
    fn seeds_differ_per_index() {
        let a: Vec<u64> = (0..50).map(|i| temperature_seed(42, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 50);
        assert_eq!(temperature_seed(42, 3), temperature_seed(42, 3));
    }

    #[test]
    fn bins_cover_closed_interval() {
        assert_eq!(bin_of(0.0, 32), 0);
        assert_eq!(bin_of(1.0, 32), 31);
        assert_eq!(bin_of(0.5, 32), 16);
    }
}
