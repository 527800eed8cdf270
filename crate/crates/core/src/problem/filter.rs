use super::ProblemSpec;

/// Density filter with conic weights `w = max(0, r_min - dist)` between
/// element centres, normalized per output element.
#[derive(Debug, Clone)]
pub struct DensityFilter {
    /// Per element: `(neighbour, weight)` pairs. The weight matrix is symmetric.
    neighbours: Vec<Vec<(usize, f64)>>,
    /// Row sums of the weight matrix.
    row_sums: Vec<f64>,
}

impl DensityFilter {
    pub fn new(spec: &ProblemSpec) -> Self {
        let (nelx, nely) = (spec.nelx as isize, spec.nely as isize);
        let r = spec.filter_radius;
        let reach = (r.ceil() as isize - 1).max(0);
        let n = spec.n_elements();
        let mut neighbours = Vec::with_capacity(n);
        let mut row_sums = Vec::with_capacity(n);
        for ix in 0..nelx {
            for iy in 0..nely {
                let mut row = Vec::new();
                let mut sum = 0.0;
                for jx in (ix - reach).max(0)..=(ix + reach).min(nelx - 1) {
                    for jy in (iy - reach).max(0)..=(iy + reach).min(nely - 1) {
                        let d = (((ix - jx).pow(2) + (iy - jy).pow(2)) as f64).sqrt();
                        let w = r - d;
                        if w > 0.0 {
                            row.push(((jx * nely + jy) as usize, w));
                            sum += w;
                        }
                    }
                }
                neighbours.push(row);
                row_sums.push(sum);
            }
        }
        Self {
            neighbours,
            row_sums,
        }
    }

    pub fn len(&self) -> usize {
        self.row_sums.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_sums.is_empty()
    }

    /// Weights of output element `e` (unnormalized).
    pub fn weights(&self, e: usize) -> &[(usize, f64)] {
        &self.neighbours[e]
    }

    pub fn row_sum(&self, e: usize) -> f64 {
        self.row_sums[e]
    }

    /// `out_e = Σ_i w_ei x_i / Σ_i w_ei`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (e, (row, &s)) in self.neighbours.iter().zip(&self.row_sums).enumerate() {
            out[e] = row.iter().map(|&(i, w)| w * x[i]).sum::<f64>() / s;
        }
    }

    /// Transpose of [`apply`](Self::apply): maps `∂f/∂x̃` to `∂f/∂x`.
    pub fn chain_rule(&self, g: &[f64], out: &mut [f64]) {
        // symmetric weights: column i of W equals row i
        for (i, row) in self.neighbours.iter().enumerate() {
            out[i] = row
                .iter()
                .map(|&(e, w)| w * g[e] / self.row_sums[e])
                .sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BcPreset, ProblemBuilder};

    fn spec(nelx: usize, nely: usize, r: f64) -> ProblemSpec {
        ProblemBuilder::new(nelx, nely)
            .preset(BcPreset::Cantilever)
            .filter_radius(r)
            .build()
            .unwrap()
    }

    #[test]
    fn unit_radius_is_identity() {
        let f = DensityFilter::new(&spec(5, 3, 1.0));
        let x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).fract()).collect();
        let mut y = vec![0.0; 15];
        f.apply(&x, &mut y);
        assert_eq!(x, y);
    }

    #[test]
    fn constants_preserved() {
        let f = DensityFilter::new(&spec(7, 4, 2.3));
        let x = vec![0.5; 28];
        let mut y = vec![0.0; 28];
        f.apply(&x, &mut y);
        assert!(y.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn centre_impulse_on_3x3() {
        // centre element (1,1) = 1; weights at distance 0, 1, sqrt(2) are
        // 1.5, 0.5, 1.5 - sqrt(2)
        let f = DensityFilter::new(&spec(3, 3, 1.5));
        let mut x = vec![0.0; 9];
        x[4] = 1.0;
        let mut y = vec![0.0; 9];
        f.apply(&x, &mut y);
        let d = 1.5 - 2f64.sqrt();
        let expected = 1.5 / (1.5 + 4.0 * 0.5 + 4.0 * d);
        assert!((y[4] - expected).abs() < 1e-15);
        // corner (0,0): self 1.5, two edge neighbours 0.5, diagonal d
        let corner = d / (1.5 + 2.0 * 0.5 + d);
        assert!((y[0] - corner).abs() < 1e-15);
    }

    #[test]
    fn chain_rule_is_transpose() {
        let f = DensityFilter::new(&spec(6, 4, 2.1));
        let n = 24;
        let x: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
        let g: Vec<f64> = (0..n).map(|i| ((i * 5) % 13) as f64 - 6.0).collect();
        let mut fx = vec![0.0; n];
        let mut wg = vec![0.0; n];
        f.apply(&x, &mut fx);
        f.chain_rule(&g, &mut wg);
        let lhs: f64 = fx.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&wg).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
