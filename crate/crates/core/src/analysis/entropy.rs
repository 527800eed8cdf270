use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_flat, temperature_seed, SamplingParams, SweepSeries, ThermostatTemplate};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

/// Plug-in entropy `-Σ q ln q` of a histogram, in nats.
pub fn site_entropy(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let n = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// Standard error of [`site_entropy`] from multinomial resampling.
pub fn bootstrap_entropy_se(counts: &[u64], reps: usize, seed: u64) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    if reps < 2 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = vec![0u64; counts.len()];
    let mut values = Vec::with_capacity(reps);
    for _ in 0..reps {
        // sequential binomials give an exact multinomial draw
        let mut left = total;
        let mut rest = total;
        for (d, &c) in draw.iter_mut().zip(counts) {
            *d = if left == 0 || c == 0 {
                0
            } else if c == rest {
                left
            } else {
                Binomial::new(left, c as f64 / rest as f64)
                    .expect("probability in [0, 1]")
                    .sample(&mut rng)
            };
            left -= *d;
            rest -= c;
        }
        values.push(site_entropy(&draw)?);
    }
    let m = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (reps - 1) as f64;
    Ok(var.sqrt())
}

/// Per-site entropy of the force-free constrained ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntropyReference {
    pub spec_hash: String,
    pub temperature: f64,
    pub seed: u64,
    pub bins: usize,
    pub s_max: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl MaxEntropyReference {
    /// `(max - min) / max` over sites.
    pub fn spread(&self) -> f64 {
        let hi = self.s_max.iter().cloned().fold(f64::MIN, f64::max);
        let lo = self.s_max.iter().cloned().fold(f64::MAX, f64::min);
        (hi - lo) / hi
    }

    /// Coefficient of variation over sites.
    pub fn relative_std(&self) -> f64 {
        let n = self.s_max.len() as f64;
        let m = self.s_max.iter().sum::<f64>() / n;
        let v = self.s_max.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / n;
        v.sqrt() / m
    }
}

pub const BOOTSTRAP_REPS: usize = 64;

/// Runs the sampler with the compliance force switched off (bounds and
/// volume still active) and returns per-site entropies.
pub fn max_entropy_reference(
    spec: &ProblemSpec,
    template: &ThermostatTemplate,
    sampling: &SamplingParams,
    temperature: f64,
    seed: u64,
) -> Result<MaxEntropyReference> {
    let params = template.params(spec.n_elements(), temperature)?;
    let stats = sample_flat(spec, &params, sampling, seed)?;
    let mut s_max = Vec::with_capacity(stats.density_histograms.len());
    let mut std_error = Vec::with_capacity(stats.density_histograms.len());
    for (site, h) in stats.density_histograms.iter().enumerate() {
        s_max.push(site_entropy(h)?);
        std_error.push(bootstrap_entropy_se(h, BOOTSTRAP_REPS, temperature_seed(seed, site))?);
    }
    Ok(MaxEntropyReference {
        spec_hash: spec.content_hash(),
        temperature,
        seed,
        bins: sampling.bins,
        s_max,
        std_error,
    })
}

/// Site entropies over a sweep, normalized by the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyMap {
    pub temperatures: Vec<f64>,
    /// `[temperature][site]`, nats.
    pub entropy: Vec<Vec<f64>>,
    pub s_max: Vec<f64>,
    /// `S / S_max`, same layout as `entropy`.
    pub normalized: Vec<Vec<f64>>,
    /// Bootstrap error of `normalized`.
    pub std_error: Vec<Vec<f64>>,
}

impl EntropyMap {
    pub fn build(series: &SweepSeries, reference: &MaxEntropyReference, bootstrap_reps: usize) -> Result<Self> {
        let n = reference.s_max.len();
        let mut map = Self {
            temperatures: series.temperatures(),
            entropy: Vec::new(),
            s_max: reference.s_max.clone(),
            normalized: Vec::new(),
            std_error: Vec::new(),
        };
        for stats in &series.entries {
            if stats.density_histograms.len() != n {
                return Err(Error::MeshMismatch {
                    expected: n,
                    actual: stats.density_histograms.len(),
                });
            }
            if stats.bins != reference.bins {
                return Err(Error::InvalidParameter {
                    name: "bins",
                    reason: format!("sweep uses {} bins, reference {}", stats.bins, reference.bins),
                });
            }
            let mut row = Vec::with_capacity(n);
            let mut norm = Vec::with_capacity(n);
            let mut err = Vec::with_capacity(n);
            for (site, h) in stats.density_histograms.iter().enumerate() {
                let s = site_entropy(h)?;
                let sm = reference.s_max[site];
                let se = bootstrap_entropy_se(h, bootstrap_reps, temperature_seed(stats.seed, site))?;
                row.push(s);
                norm.push(if sm > 0.0 { s / sm } else { 0.0 });
                err.push(if sm > 0.0 { se / sm } else { 0.0 });
            }
            map.entropy.push(row);
            map.normalized.push(norm);
            map.std_error.push(err);
        }
        Ok(map)
    }

    pub fn n_sites(&self) -> usize {
        self.s_max.len()
    }

    /// Normalized entropy of one site across the sweep.
    pub fn site_series(&self, site: usize) -> Vec<f64> {
        self.normalized.iter().map(|row| row[site]).collect()
    }
}
