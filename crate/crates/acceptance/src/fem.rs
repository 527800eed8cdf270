//! Dense plane-stress assembly with the element matrix from 2×2 Gauss
//! quadrature instead of the closed form.

use morphofilter::problem::ProblemSpec;
use nalgebra::{DMatrix, DVector};

/// Bilinear quad on the unit square, nodes (0,0) (1,0) (1,1) (0,1).
pub fn gauss_element_stiffness(nu: f64) -> DMatrix<f64> {
    let d = DMatrix::from_row_slice(3, 3, &[1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0]) / (1.0 - nu * nu);
    let corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    let g = 0.5 / 3f64.sqrt();
    let mut k = DMatrix::zeros(8, 8);
    for &xi in &[0.5 - g, 0.5 + g] {
        for &eta in &[0.5 - g, 0.5 + g] {
            let mut b = DMatrix::zeros(3, 8);
            for (a, &(cx, cy)) in corners.iter().enumerate() {
                let (fx, dfx) = if cx == 1.0 { (xi, 1.0) } else { (1.0 - xi, -1.0) };
                let (fy, dfy) = if cy == 1.0 { (eta, 1.0) } else { (1.0 - eta, -1.0) };
                b[(0, 2 * a)] = dfx * fy;
                b[(1, 2 * a + 1)] = fx * dfy;
                b[(2, 2 * a)] = fx * dfy;
                b[(2, 2 * a + 1)] = dfx * fy;
            }
            k += b.transpose() * &d * b * 0.25;
        }
    }
    k
}

/// Global dofs of element `e`, counter-clockwise from the lower-left node.
/// Nodes are numbered column-major from the top-left corner.
pub fn element_dofs(spec: &ProblemSpec, e: usize) -> [usize; 8] {
    let (ix, iy) = (e / spec.nely, e % spec.nely);
    let tl = ix * (spec.nely + 1) + iy;
    let nodes = [tl + 1, tl + spec.nely + 2, tl + spec.nely + 1, tl];
    let mut d = [0; 8];
    for (k, n) in nodes.iter().enumerate() {
        d[2 * k] = 2 * n;
        d[2 * k + 1] = 2 * n + 1;
    }
    d
}

fn free_dofs(spec: &ProblemSpec) -> Vec<usize> {
    (0..spec.n_dofs()).filter(|d| !spec.supports.contains(d)).collect()
}

fn modulus(spec: &ProblemSpec, x: f64) -> f64 {
    spec.youngs_modulus_min + x.powf(spec.penalization) * (spec.youngs_modulus_solid - spec.youngs_modulus_min)
}

/// Displacements and compliance for the physical density `x`, by dense Cholesky.
pub fn dense_solve(spec: &ProblemSpec, x: &[f64]) -> (DVector<f64>, f64) {
    let ke = gauss_element_stiffness(spec.poisson_ratio);
    let ndof = spec.n_dofs();
    let mut k = DMatrix::zeros(ndof, ndof);
    for (e, &xe) in x.iter().enumerate() {
        let dofs = element_dofs(spec, e);
        let m = modulus(spec, xe);
        for a in 0..8 {
            for b in 0..8 {
                k[(dofs[a], dofs[b])] += m * ke[(a, b)];
            }
        }
    }
    let f = DVector::from_vec(spec.load_vector());
    let free = free_dofs(spec);
    let kf = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let ff = DVector::from_fn(free.len(), |i, _| f[free[i]]);
    let uf = kf.cholesky().expect("reduced stiffness is SPD").solve(&ff);
    let mut u = DVector::zeros(ndof);
    for (i, &d) in free.iter().enumerate() {
        u[d] = uf[i];
    }
    let c = f.dot(&u);
    (u, c)
}

/// Double-double scalar `hi + lo`.
#[derive(Clone, Copy, Debug, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        Dd::two_sum(s.hi, s.lo + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        Dd::two_sum(p, err + (self.hi * o.lo + self.lo * o.hi))
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Compliance of the physical density `x` to roughly 30 digits before the
/// final rounding: stiffness and residuals in double-double, Cholesky in f64
/// as the preconditioner of four refinement sweeps. Requires integer `p`.
pub fn compliance_extended(spec: &ProblemSpec, x: &[f64]) -> f64 {
    assert_eq!(spec.penalization.fract(), 0.0, "integer penalization only");
    let ke = gauss_element_stiffness(spec.poisson_ratio);
    let free = free_dofs(spec);
    let mut index = vec![usize::MAX; spec.n_dofs()];
    for (i, &d) in free.iter().enumerate() {
        index[d] = i;
    }
    let n = free.len();
    let mut k = vec![Dd::default(); n * n];
    let span = Dd::from(spec.youngs_modulus_solid).add(Dd::from(spec.youngs_modulus_min).neg());
    for (e, &xe) in x.iter().enumerate() {
        let dofs = element_dofs(spec, e);
        let mut xp = Dd::from(1.0);
        for _ in 0..spec.penalization as usize {
            xp = xp.mul(Dd::from(xe));
        }
        let m = Dd::from(spec.youngs_modulus_min).add(xp.mul(span));
        for a in 0..8 {
            for b in 0..8 {
                let (ia, ib) = (index[dofs[a]], index[dofs[b]]);
                if ia != usize::MAX && ib != usize::MAX {
                    k[ia * n + ib] = k[ia * n + ib].add(m.mul(Dd::from(ke[(a, b)])));
                }
            }
        }
    }
    let load = spec.load_vector();
    let f: Vec<f64> = free.iter().map(|&d| load[d]).collect();
    let chol = DMatrix::from_fn(n, n, |i, j| k[i * n + j].hi).cholesky().expect("SPD");
    let mut u = vec![Dd::default(); n];
    for _ in 0..4 {
        let r = DVector::from_fn(n, |i, _| {
            let mut acc = Dd::from(f[i]);
            for j in 0..n {
                acc = acc.add(k[i * n + j].mul(u[j]).neg());
            }
            acc.value()
        });
        let du = chol.solve(&r);
        for i in 0..n {
            u[i] = u[i].add(Dd::from(du[i]));
        }
    }
    let mut c = Dd::default();
    for i in 0..n {
        c = c.add(Dd::from(f[i]).mul(u[i]));
    }
    c.value()
}

/// Density filter written out from the cone-weight definition.
pub fn filter(spec: &ProblemSpec, x: &[f64]) -> Vec<f64> {
    let r = spec.filter_radius;
    let reach = r.ceil() as isize;
    let (nx, ny) = (spec.nelx as isize, spec.nely as isize);
    let mut out = vec![0.0; x.len()];
    for ix in 0..nx {
        for iy in 0..ny {
            let (mut num, mut den) = (0.0, 0.0);
            for jx in (ix - reach).max(0)..(ix + reach + 1).min(nx) {
                for jy in (iy - reach).max(0)..(iy + reach + 1).min(ny) {
                    let dist = (((ix - jx).pow(2) + (iy - jy).pow(2)) as f64).sqrt();
                    let w = (r - dist).max(0.0);
                    num += w * x[(jx * ny + jy) as usize];
                    den += w;
                }
            }
            out[(ix * ny + iy) as usize] = num / den;
        }
    }
    out
}
