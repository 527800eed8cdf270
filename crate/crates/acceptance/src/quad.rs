//! Double-exponential quadrature and a log-space integrator for
//! `∫ exp(g(u)) du` with concave `g`.

/// Tanh-sinh rule on `[a, b]`, refined by halving the step until two levels
/// agree to `rel_tol`.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let node = |t: f64| -> (f64, f64) {
        let s = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = s.tanh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / (s.cosh() * s.cosh());
        (x, w)
    };
    // |t| <= 3.2 keeps 1 - |x| well above the smallest normal.
    let t_max = 3.2;
    let eval = |t: f64| -> f64 {
        let (x, w) = node(t);
        if w == 0.0 {
            return 0.0;
        }
        let u = mid + half * x;
        if u <= a || u >= b {
            return 0.0;
        }
        w * f(u)
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= t_max {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = half * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= t_max {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let next = half * h * sum;
        if (next - estimate).abs() <= rel_tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `ln ∫_lo^hi exp(g(u)) du` for concave `g`; `hi` may be infinite.
///
/// Locates the mode, then covers the mass with panels of doubling width
/// outward from it until `g` has fallen 120 below its peak.
pub fn ln_integral_concave(g: impl Fn(f64) -> f64, lo: f64, hi: f64, scale: f64) -> f64 {
    // bracket the mode: grow the window from `lo` until g turns down
    let mut right = (lo + scale).min(hi);
    while right < hi && g(right) > g(0.5 * (lo + right)) {
        right = (lo + 2.0 * (right - lo)).min(hi);
    }
    let (mut a, mut b) = (lo, right);
    for _ in 0..200 {
        let m1 = a + (b - a) * 0.381_966_011_250_105;
        let m2 = a + (b - a) * 0.618_033_988_749_895;
        if g(m1) < g(m2) {
            a = m1;
        } else {
            b = m2;
        }
    }
    let mode = 0.5 * (a + b);
    let peak = g(mode).max(g(lo)).max(if hi.is_finite() { g(hi) } else { f64::NEG_INFINITY });
    let f = |u: f64| (g(u) - peak).exp();
    let tol = 1e-15;

    // width where g drops by about one from the mode
    let width_from = |dir: f64, limit: f64| -> f64 {
        let mut w = scale.max(1e-300);
        let span = (limit - mode).abs();
        if span == 0.0 {
            return 0.0;
        }
        w = w.min(span);
        while w > 1e-300 && g(mode + dir * w) < peak - 1.0 {
            w *= 0.5;
        }
        while w < span && g(mode + dir * w) > peak - 1.0 {
            w *= 2.0;
        }
        w.min(span)
    };
    let mut total = 0.0;
    for (dir, limit) in [(-1.0, lo), (1.0, hi)] {
        let mut w = width_from(dir, limit);
        if w == 0.0 {
            continue;
        }
        let mut start = mode;
        loop {
            let end = if dir > 0.0 {
                (start + w).min(limit)
            } else {
                (start - w).max(limit)
            };
            let (p, q) = if dir > 0.0 { (start, end) } else { (end, start) };
            total += tanh_sinh(f, p, q, tol);
            if end == limit || g(end) < peak - 120.0 {
                break;
            }
            start = end;
            w *= 2.0;
        }
    }
    peak + total.ln()
}

/// `p ln u` with `0 ln 0 = 0`.
pub fn xlny(p: f64, u: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * u.ln()
    }
}

/// `ln(e^a + e^b)`.
pub fn ln_add(a: f64, b: f64) -> f64 {
    let (m, n) = if a > b { (a, b) } else { (b, a) };
    if n == f64::NEG_INFINITY {
        return m;
    }
    m + (n - m).exp().ln_1p()
}

/// Parameters of the two-regime density of states, restated here so the
/// oracle depends on nothing but its own arithmetic.
#[derive(Debug, Clone, Copy)]
pub struct TwoRegime {
    pub c_min: f64,
    pub c_star: f64,
    pub a: f64,
    pub b: f64,
    pub gamma_below: f64,
    pub gamma_above: f64,
}

impl TwoRegime {
    /// `⟨C⟩` at temperature `t` from direct quadrature of `∫ C e^{-C/T} Ω(C) dC`.
    ///
    /// `u = C - C_min`, `D = C* - C_min`. Each of the three pieces of
    /// `u^k e^{-u/T} Ω` is log-concave and integrated on its own.
    pub fn mean(&self, t: f64) -> f64 {
        let beta = 1.0 / t;
        let d = self.c_star - self.c_min;
        let (a, b) = (self.a, self.b);
        let lg_lo = self.gamma_below.ln();
        let lg_hi = self.gamma_above.ln();
        let flat = lg_lo + xlny(a - 1.0, d);
        let scale = t.min(d.max(t * 1e-3));
        let ln_moment = |k: i32| -> f64 {
            let kf = f64::from(k);
            let below = ln_integral_concave(|u| lg_lo + xlny(a - 1.0 + kf, u) - beta * u, 0.0, d, scale);
            let plateau = ln_integral_concave(
                |w| flat + xlny(kf, d + w) - beta * (d + w),
                0.0,
                f64::INFINITY,
                t,
            );
            let tail = ln_integral_concave(
                |w| lg_hi + xlny(b - 1.0, w) + xlny(kf, d + w) - beta * (d + w),
                0.0,
                f64::INFINITY,
                t,
            );
            ln_add(ln_add(below, plateau), tail)
        };
        self.c_min + (ln_moment(1) - ln_moment(0)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_polynomial_and_root() {
        let v = tanh_sinh(|x| x * x, 0.0, 3.0, 1e-15);
        assert!((v - 9.0).abs() < 1e-13);
        let v = tanh_sinh(|x| x.sqrt(), 0.0, 1.0, 1e-15);
        assert!((v - 2.0 / 3.0).abs() < 1e-14, "{v}");
    }

    #[test]
    fn gamma_integral() {
        // ∫_0^∞ u^4 e^{-2u} du = 4!/2^5
        let v = ln_integral_concave(|u| 4.0 * u.ln() - 2.0 * u, 0.0, f64::INFINITY, 1.0).exp();
        assert!((v - 24.0 / 32.0).abs() < 1e-13, "{v}");
        // sharp peak far from the origin
        let v = ln_integral_concave(|u| 400.0 * u.ln() - 1000.0 * u, 0.0, 1e3, 1e-3);
        let exact = statrs_free_ln_gamma(401.0) - 401.0 * 1000f64.ln();
        assert!((v - exact).abs() < 1e-10, "{v} {exact}");
    }

    /// Stirling series, adequate for large arguments.
    fn statrs_free_ln_gamma(x: f64) -> f64 {
        let z = x - 1.0;
        z * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI * z).ln() + 1.0 / (12.0 * z) - 1.0 / (360.0 * z.powi(3))
    }

    #[test]
    fn single_power_law_is_linear() {
        let m = TwoRegime {
            c_min: 5.0,
            c_star: 1e300,
            a: 3.5,
            b: 3.5,
            gamma_below: 1.0,
            gamma_above: 1.0,
        };
        for t in [0.01, 1.0, 10.0] {
            assert!((m.mean(t) - (5.0 + 3.5 * t)).abs() < 1e-11 * (5.0 + 3.5 * t));
        }
    }
}
