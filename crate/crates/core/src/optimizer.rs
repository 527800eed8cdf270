//! Optimality-criteria topology optimizer with a density filter. Supplies the
//! zero-temperature baseline `C_min` and the optimal layout `x*`.

use serde::{Deserialize, Serialize};

use crate::dynamics::project_volume_constraint;
use crate::error::{Error, Result};
use crate::problem::{DesignField, FilteredCompliance, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OcSettings {
    pub max_iters: usize,
    pub move_limit: f64,
    pub tol: f64,
    /// Exponent on the optimality ratio.
    pub damping: f64,
}

impl Default for OcSettings {
    fn default() -> Self {
        Self {
            max_iters: 500,
            move_limit: 0.2,
            tol: 0.01,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub x_star: DesignField,
    /// Compliance of the filtered optimum.
    pub c_min: f64,
    pub iterations: usize,
    pub converged: bool,
    pub change_history: Vec<f64>,
    pub compliance_history: Vec<f64>,
    /// Iterations where compliance rose by more than 1%.
    pub nonmonotone_steps: Vec<usize>,
}

impl OptimizationResult {
    pub fn physical_density(&self, spec: &ProblemSpec) -> DesignField {
        crate::problem::density_filter(spec, &self.x_star)
    }
}

/// Runs the OC loop from the uniform field `x = V_f`.
pub fn optimize(spec: &ProblemSpec, settings: &OcSettings) -> Result<OptimizationResult> {
    validate(settings)?;
    let n = spec.n_elements();
    let volume = spec.target_volume();
    let mut obj = FilteredCompliance::new(spec);
    let mut x = vec![spec.volume_fraction; n];
    let mut grad = vec![0.0; n];
    // dV/dx through the filter
    let mut dv = vec![0.0; n];
    obj.filter().chain_rule(&vec![1.0; n], &mut dv);

    let mut change_history = Vec::new();
    let mut compliance_history = Vec::new();
    let mut nonmonotone_steps = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iters {
        let c = obj.evaluate(&x, &mut grad)?;
        if let Some(&prev) = compliance_history.last() {
            if c > prev * 1.01 {
                nonmonotone_steps.push(iterations);
            }
        }
        compliance_history.push(c);
        if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
            best = Some((c, x.clone()));
        }
        if grad.iter().all(|&g| g == 0.0) {
            converged = true;
            break;
        }
        let next = oc_update(&x, &grad, &dv, volume, settings)?;
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        change_history.push(change);
        x = next;
        iterations += 1;
        if change < settings.tol {
            converged = true;
            break;
        }
    }

    // report the final iterate when converged, the best one otherwise
    let c_final = obj.evaluate(&x, &mut grad)?;
    let (c_min, x_star) = match best {
        Some((bc, bx)) if !converged && bc < c_final => (bc, bx),
        _ => (c_final, x),
    };
    Ok(OptimizationResult {
        x_star: DesignField::new(x_star)?,
        c_min,
        iterations,
        converged,
        change_history,
        compliance_history,
        nonmonotone_steps,
    })
}

fn validate(s: &OcSettings) -> Result<()> {
    let bad = |name, reason: &str| {
        Err(Error::InvalidParameter {
            name,
            reason: reason.into(),
        })
    };
    if s.max_iters == 0 {
        return bad("max_iters", "must be at least 1");
    }
    if !(s.move_limit > 0.0 && s.move_limit <= 1.0) {
        return bad("move_limit", "must lie in (0, 1]");
    }
    if !(s.tol > 0.0) {
        return bad("tol", "must be positive");
    }
    if !(s.damping > 0.0) {
        return bad("damping", "must be positive");
    }
    Ok(())
}

/// `x_new = clamp(x (-g/(Λ dv))^η)` within the move limit, with `Λ` bisected
/// (in log space) so the design volume equals `volume`.
fn oc_update(x: &[f64], g: &[f64], dv: &[f64], volume: f64, s: &OcSettings) -> Result<Vec<f64>> {
    let candidate = |lambda: f64| -> Vec<f64> {
        x.iter()
            .zip(g)
            .zip(dv)
            .map(|((&xe, &ge), &dve)| {
                let ratio = (-ge).max(0.0) / (lambda * dve);
                let t = xe * ratio.powf(s.damping);
                let lo = (xe - s.move_limit).max(0.0);
                let hi = (xe + s.move_limit).min(1.0);
                t.clamp(lo, hi)
            })
            .collect()
    };
    let vol = |v: &[f64]| v.iter().sum::<f64>();
    let (mut lo, mut hi) = (1e-300f64.ln(), 1e300f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if vol(&candidate(mid.exp())) > volume {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let next = candidate((0.5 * (lo + hi)).exp());
    project_volume_constraint(&next, volume)
}

/// Summary of an annealed sweep against the OC optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealReport {
    pub lowest_temperature: f64,
    pub final_ratio: f64,
    pub mean_abs_density_error: f64,
    pub max_abs_density_error: f64,
    pub ratios: Vec<(f64, f64)>,
}

/// Compares the coldest entry of an annealed sweep with the optimizer.
pub fn anneal_compare(
    series: &crate::ensemble::SweepSeries,
    reference: &OptimizationResult,
) -> Result<AnnealReport> {
    if !(reference.c_min > 0.0) {
        return Err(Error::MissingReference);
    }
    let last = series
        .entries
        .last()
        .ok_or_else(|| Error::InsufficientData("sweep has no temperatures".into()))?;
    let xs = reference.x_star.as_slice();
    if xs.len() != last.mean_density.len() {
        return Err(Error::MeshMismatch {
            expected: xs.len(),
            actual: last.mean_density.len(),
        });
    }
    let diffs: Vec<f64> = last
        .mean_density
        .iter()
        .zip(xs)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(AnnealReport {
        lowest_temperature: last.temperature,
        final_ratio: last.mean_compliance / reference.c_min,
        mean_abs_density_error: diffs.iter().sum::<f64>() / diffs.len() as f64,
        max_abs_density_error: diffs.iter().cloned().fold(0.0, f64::max),
        ratios: series
            .entries
            .iter()
            .map(|e| (e.temperature, e.mean_compliance / reference.c_min))
            .collect(),
    })
}
