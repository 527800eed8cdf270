//! Piecewise-linear segmentation of `⟨C⟩(T)`.
//!
//! For each segment count the change points minimizing the total residual are
//! found exactly by dynamic programming over contiguous runs; the count is
//! then chosen by `n ln(RSS/n) + (3k - 1) ln n`, which charges every extra
//! segment for its slope, intercept and break.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SEGMENT_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Index range `[start, end)` into the ascending input.
    pub start: usize,
    pub end: usize,
    /// Temperature interval covered; adjacent segments share a boundary.
    pub t_lo: f64,
    pub t_hi: f64,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

impl Segment {
    /// `N_IP / ν` read off the slope.
    pub fn in_play_over_nu(&self) -> f64 {
        self.slope
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeFit {
    /// Ordered by increasing temperature.
    pub segments: Vec<Segment>,
    pub total_residual: f64,
    pub score: f64,
}

impl RegimeFit {
    /// Slopes ordered from the lowest temperature up.
    pub fn slopes(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.slope).collect()
    }

    /// True when slopes strictly grow toward low temperature.
    pub fn slopes_increase_toward_low_t(&self) -> bool {
        self.segments.windows(2).all(|w| w[0].slope > w[1].slope)
    }

    pub fn segment_of(&self, temperature: f64) -> Option<usize> {
        self.segments
            .iter()
            .position(|s| temperature >= s.t_lo && temperature <= s.t_hi)
    }
}

/// Least-squares line with the slope held non-negative.
fn fit_line(t: &[f64], c: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let mc = c.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - mt) * (v - mt)).sum();
    let stc: f64 = t.iter().zip(c).map(|(a, b)| (a - mt) * (b - mc)).sum();
    let slope = if stt > 0.0 { (stc / stt).max(0.0) } else { 0.0 };
    let intercept = mc - slope * mt;
    let rss = t
        .iter()
        .zip(c)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    (slope, intercept, rss)
}

/// Fits up to `max_segments` pieces to `(T, ⟨C⟩)` points (any order).
pub fn regime_fit(points: &[(f64, f64)], max_segments: usize) -> Result<RegimeFit> {
    let n = points.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("regime fit needs at least 4 points, got {n}")));
    }
    if max_segments == 0 {
        return Err(Error::InvalidParameter {
            name: "max_segments",
            reason: "must be at least 1".into(),
        });
    }
    if points.iter().any(|(t, c)| !t.is_finite() || !c.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: "must be finite".into(),
        });
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let c: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let k_max = max_segments.min(n / MIN_SEGMENT_POINTS);

    // rss[i][j] for the run [i, j)
    let mut rss = vec![vec![f64::INFINITY; n + 1]; n + 1];
    for i in 0..n {
        for j in i + MIN_SEGMENT_POINTS..=n {
            rss[i][j] = fit_line(&t[i..j], &c[i..j]).2;
        }
    }
    // best[k][j]: min residual covering [0, j) with k segments
    let mut best = vec![vec![f64::INFINITY; n + 1]; k_max + 1];
    let mut from = vec![vec![0usize; n + 1]; k_max + 1];
    best[0][0] = 0.0;
    for k in 1..=k_max {
        for j in k * MIN_SEGMENT_POINTS..=n {
            for i in (k - 1) * MIN_SEGMENT_POINTS..=j - MIN_SEGMENT_POINTS {
                let v = best[k - 1][i] + rss[i][j];
                if v < best[k][j] {
                    best[k][j] = v;
                    from[k][j] = i;
                }
            }
        }
    }

    let nf = n as f64;
    let scale: f64 = c.iter().map(|v| v * v).sum();
    // residual floor so exact fits compare by penalty alone
    let floor = (scale * 1e-24).max(f64::MIN_POSITIVE);
    let mut choice = (f64::INFINITY, 0usize);
    for k in 1..=k_max {
        if !best[k][n].is_finite() {
            continue;
        }
        let score = nf * (best[k][n].max(floor) / nf).ln() + (3 * k - 1) as f64 * nf.ln();
        if score < choice.0 - 1e-9 {
            choice = (score, k);
        }
    }
    let (score, k) = choice;

    let mut bounds = vec![n];
    let mut j = n;
    for kk in (1..=k).rev() {
        j = from[kk][j];
        bounds.push(j);
    }
    bounds.reverse();
    let mut segments = Vec::with_capacity(k);
    for w in bounds.windows(2) {
        let (i, j) = (w[0], w[1]);
        let (slope, intercept, residual) = fit_line(&t[i..j], &c[i..j]);
        let t_lo = if i == 0 { t[0] } else { 0.5 * (t[i - 1] + t[i]) };
        let t_hi = if j == n { t[n - 1] } else { 0.5 * (t[j - 1] + t[j]) };
        segments.push(Segment {
            start: i,
            end: j,
            t_lo,
            t_hi,
            slope,
            intercept,
            residual,
        });
    }
    Ok(RegimeFit {
        total_residual: best[k][n],
        segments,
        score,
    })
}

/// Spearman rank correlation (average ranks for ties).
pub fn rank_correlation(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}
