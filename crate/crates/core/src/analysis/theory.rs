//! Closed-form mean compliance for a two-regime power-law density of states
//!
//! ```text
//! Ω(C) = γ< (C - C_min)^(a-1)                          C < C*
//!      = γ< (C* - C_min)^(a-1) + γ> (C - C*)^(b-1)     C > C*
//! ```
//!
//! with `a = N</ν`, `b = N>/ν`. Every moment of `u = C - C_min` under
//! `e^{-βC} Ω(C)` is a sum of regularized incomplete gamma terms, so `⟨C⟩`
//! and `d⟨C⟩/dT = β² Var(C)` are evaluated in log space without
//! differentiating numerically.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryModel {
    pub c_min: f64,
    /// Saturation compliance; `+∞` gives the single-regime model.
    pub c_star: f64,
    pub n_below: f64,
    pub n_above: f64,
    pub nu: f64,
    pub gamma_below: f64,
    pub gamma_above: f64,
}

/// First two moments of `C` at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryMoments {
    pub mean: f64,
    /// `⟨C⟩ - C_min`, kept separately so tiny excesses keep full precision.
    pub excess: f64,
    pub variance: f64,
}

impl TheoryMoments {
    /// `d⟨C⟩/dT`.
    pub fn slope(&self, temperature: f64) -> f64 {
        self.variance / (temperature * temperature)
    }
}

impl TheoryModel {
    /// `Ω ∝ (C - C_min)^(k-1)` everywhere, for which `⟨C⟩ = C_min + kT`.
    pub fn single_regime(c_min: f64, k: f64) -> Result<Self> {
        let m = Self {
            c_min,
            c_star: f64::INFINITY,
            n_below: k,
            n_above: k,
            nu: 1.0,
            gamma_below: 1.0,
            gamma_above: 1.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.into(),
            })
        };
        if !self.c_min.is_finite() {
            return bad("c_min", "must be finite");
        }
        if !(self.c_star > self.c_min) {
            return bad("c_star", "must exceed c_min");
        }
        for (name, v) in [
            ("n_below", self.n_below),
            ("n_above", self.n_above),
            ("nu", self.nu),
            ("gamma_below", self.gamma_below),
            ("gamma_above", self.gamma_above),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, "must be positive and finite");
            }
        }
        Ok(())
    }

    /// Low-temperature slope `N</ν`.
    pub fn slope_below(&self) -> f64 {
        self.n_below / self.nu
    }

    /// High-temperature slope `N>/ν`.
    pub fn slope_above(&self) -> f64 {
        self.n_above / self.nu
    }

    /// Unnormalized density of states.
    pub fn omega(&self, c: f64) -> f64 {
        let a = self.slope_below();
        let b = self.slope_above();
        if c <= self.c_min {
            0.0
        } else if c < self.c_star {
            self.gamma_below * (c - self.c_min).powf(a - 1.0)
        } else {
            let d = self.c_star - self.c_min;
            self.gamma_below * d.powf(a - 1.0) + self.gamma_above * (c - self.c_star).powf(b - 1.0)
        }
    }

    pub fn moments(&self, temperature: f64) -> Result<TheoryMoments> {
        self.validate()?;
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: format!("must be positive and finite, got {temperature}"),
            });
        }
        let beta = 1.0 / temperature;
        let lb = beta.ln();
        let a = self.slope_below();
        let b = self.slope_above();
        let d = self.c_star - self.c_min;
        let lg_lo = self.gamma_below.ln();

        // log-weights of the zeroth, first and second moments of u, one entry
        // per additive piece; the common factor e^{-β C_min} is dropped
        let mut m0 = Vec::with_capacity(3);
        let mut m1 = Vec::with_capacity(5);
        let mut m2 = Vec::with_capacity(7);
        let x = beta * d;
        for (k, acc) in [&mut m0, &mut m1, &mut m2].into_iter().enumerate() {
            let s = a + k as f64;
            acc.push(lg_lo + ln_gamma(s) - s * lb + ln_lower_regularized(s, x));
        }
        if d.is_finite() {
            let tail = -x;
            let ld = d.ln();
            // flat continuation γ< d^(a-1) over u > d
            let lc = lg_lo + (a - 1.0) * ld + tail;
            m0.push(lc - lb);
            m1.extend([lc + ld - lb, lc - 2.0 * lb]);
            m2.extend([lc + 2.0 * ld - lb, lc + 2f64.ln() + ld - 2.0 * lb, lc + 2f64.ln() - 3.0 * lb]);
            // γ> (u - d)^(b-1) over u > d
            let lt = self.gamma_above.ln() + ln_gamma(b) - b * lb + tail;
            m0.push(lt);
            m1.extend([lt + ld, lt + b.ln() - lb]);
            m2.extend([
                lt + 2.0 * ld,
                lt + 2f64.ln() + ld + b.ln() - lb,
                lt + (b * (b + 1.0)).ln() - 2.0 * lb,
            ]);
        }
        let z = log_sum_exp(&m0);
        let excess = (log_sum_exp(&m1) - z).exp();
        let second = (log_sum_exp(&m2) - z).exp();
        let variance = (second - excess * excess).max(0.0);
        if !excess.is_finite() || !second.is_finite() {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: format!("moments overflow at T = {temperature}"),
            });
        }
        Ok(TheoryMoments {
            mean: self.c_min + excess,
            excess,
            variance,
        })
    }
}

/// `⟨C⟩(T) = -∂ ln Z / ∂β` at `β = 1/T`.
pub fn theory_mean_compliance(model: &TheoryModel, temperature: f64) -> Result<f64> {
    Ok(model.moments(temperature)?.mean)
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

/// `ln P(s, x)`, switching to the power series where `P` would underflow.
fn ln_lower_regularized(s: f64, x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x < s + 1.0 {
        // P(s, x) = x^s e^{-x} / Γ(s+1) · Σ_k x^k / ((s+1)…(s+k))
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..1000 {
            term *= x / (s + k as f64);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        return s * x.ln() - x - ln_gamma(s + 1.0) + sum.ln();
    }
    gamma_lr(s, x).ln()
}
