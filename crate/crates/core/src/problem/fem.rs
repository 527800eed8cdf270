//! Plane-stress bilinear quadrilaterals on a unit grid with SIMP stiffness
//! interpolation `E(x) = E_min + x^p (E - E_min)`.

use super::band::BandMatrix;
use super::ProblemSpec;
use crate::error::{Error, Result};

pub const ELEMENT_DOFS: usize = 8;

/// Unit-modulus element stiffness for a unit square, dof order
/// lower-left, lower-right, upper-right, upper-left (x, y each).
pub fn element_stiffness(nu: f64) -> [[f64; 8]; 8] {
    let k = [
        0.5 - nu / 6.0,
        0.125 + nu / 8.0,
        -0.25 - nu / 12.0,
        -0.125 + 3.0 * nu / 8.0,
        -0.25 + nu / 12.0,
        -0.125 - nu / 8.0,
        nu / 6.0,
        0.125 - 3.0 * nu / 8.0,
    ];
    let idx: [[usize; 8]; 8] = [
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ];
    let scale = 1.0 / (1.0 - nu * nu);
    let mut ke = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            ke[i][j] = scale * k[idx[i][j]];
        }
    }
    ke
}

/// Assembly and solve workspace for one [`ProblemSpec`]. Not shareable
/// across threads while solving; clone one per trajectory.
#[derive(Debug, Clone)]
pub struct FemModel {
    ke: [[f64; 8]; 8],
    edofs: Vec<[usize; 8]>,
    /// Global dof -> reduced index, `usize::MAX` for supported dofs.
    reduced: Vec<usize>,
    n_free: usize,
    load: Vec<f64>,
    e0: f64,
    emin: f64,
    penal: f64,
    k: BandMatrix,
    rhs: Vec<f64>,
}

impl FemModel {
    pub fn new(spec: &ProblemSpec) -> Self {
        let (nelx, nely) = (spec.nelx, spec.nely);
        let mut edofs = Vec::with_capacity(nelx * nely);
        for ix in 0..nelx {
            for iy in 0..nely {
                let ul = (nely + 1) * ix + iy;
                let ll = ul + 1;
                let ur = ul + nely + 1;
                let lr = ur + 1;
                edofs.push([
                    2 * ll,
                    2 * ll + 1,
                    2 * lr,
                    2 * lr + 1,
                    2 * ur,
                    2 * ur + 1,
                    2 * ul,
                    2 * ul + 1,
                ]);
            }
        }
        let ndof = spec.n_dofs();
        let mut reduced = vec![0usize; ndof];
        let mut n_free = 0;
        let mut supports = spec.supports.iter().peekable();
        for (d, r) in reduced.iter_mut().enumerate() {
            if supports.peek() == Some(&&d) {
                supports.next();
                *r = usize::MAX;
            } else {
                *r = n_free;
                n_free += 1;
            }
        }
        let mut bw = 0;
        for ed in &edofs {
            let free: Vec<usize> = ed.iter().map(|&d| reduced[d]).filter(|&r| r != usize::MAX).collect();
            if let (Some(lo), Some(hi)) = (free.iter().min(), free.iter().max()) {
                bw = bw.max(hi - lo);
            }
        }
        Self {
            ke: element_stiffness(spec.poisson_ratio),
            edofs,
            reduced,
            n_free,
            load: spec.load_vector(),
            e0: spec.youngs_modulus_solid,
            emin: spec.youngs_modulus_min,
            penal: spec.penalization,
            k: BandMatrix::zeros(n_free, bw),
            rhs: vec![0.0; n_free],
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.reduced.len()
    }

    /// Number of unsupported dofs.
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn bandwidth(&self) -> usize {
        self.k.bandwidth()
    }

    pub fn element_dofs(&self, e: usize) -> &[usize; 8] {
        &self.edofs[e]
    }

    pub fn element_matrix(&self) -> &[[f64; 8]; 8] {
        &self.ke
    }

    fn assemble(&mut self, x: &[f64]) {
        self.k.clear();
        for (e, ed) in self.edofs.iter().enumerate() {
            let ee = self.emin + x[e].powf(self.penal) * (self.e0 - self.emin);
            for a in 0..8 {
                let ra = self.reduced[ed[a]];
                if ra == usize::MAX {
                    continue;
                }
                for b in 0..=a {
                    let rb = self.reduced[ed[b]];
                    if rb == usize::MAX {
                        continue;
                    }
                    self.k.add(ra, rb, ee * self.ke[a][b]);
                }
            }
        }
    }

    /// Checks that supports remove all rigid-body modes, using a solid field.
    pub fn check_rank(&mut self) -> Result<()> {
        let ones = vec![1.0; self.edofs.len()];
        self.assemble(&ones);
        self.k.factor(1e-10)
    }

    fn solve_inner(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(x.len(), self.edofs.len(), "design field length");
        self.assemble(x);
        self.k.factor(0.0)?;
        for (d, &r) in self.reduced.iter().enumerate() {
            if r != usize::MAX {
                self.rhs[r] = self.load[d];
            }
        }
        self.k.solve_in_place(&mut self.rhs);
        let mut u = vec![0.0; self.reduced.len()];
        for (d, &r) in self.reduced.iter().enumerate() {
            if r != usize::MAX {
                u[d] = self.rhs[r];
            }
        }
        // one step of iterative refinement; the residual is formed element by element
        let mut resid = self.load.clone();
        for (e, ed) in self.edofs.iter().enumerate() {
            let ee = self.emin + x[e].powf(self.penal) * (self.e0 - self.emin);
            for a in 0..8 {
                let mut s = 0.0;
                for b in 0..8 {
                    s += self.ke[a][b] * u[ed[b]];
                }
                resid[ed[a]] -= ee * s;
            }
        }
        for (d, &r) in self.reduced.iter().enumerate() {
            if r != usize::MAX {
                self.rhs[r] = resid[d];
            }
        }
        self.k.solve_in_place(&mut self.rhs);
        for (d, &r) in self.reduced.iter().enumerate() {
            if r != usize::MAX {
                u[d] += self.rhs[r];
            }
        }
        Ok(u)
    }

    /// Nodal displacements for densities `x` (no filtering applied).
    pub fn solve(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        if self.load.iter().all(|&f| f == 0.0) {
            return Ok(vec![0.0; self.reduced.len()]);
        }
        self.solve_inner(x)
    }

    /// Compliance `fᵀu`; writes `∂C/∂x_e = -p x_e^{p-1} (E - E_min) u_eᵀ k₀ u_e`.
    pub fn compliance_and_gradient(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let u = self.solve(x)?;
        let c: f64 = self.load.iter().zip(&u).map(|(f, u)| f * u).sum();
        for (e, ed) in self.edofs.iter().enumerate() {
            let mut ue = [0.0; 8];
            for a in 0..8 {
                ue[a] = u[ed[a]];
            }
            let mut uku = 0.0;
            for a in 0..8 {
                let mut s = 0.0;
                for b in 0..8 {
                    s += self.ke[a][b] * ue[b];
                }
                uku += ue[a] * s;
            }
            grad[e] = if self.penal == 1.0 {
                -(self.e0 - self.emin) * uku
            } else {
                -self.penal * x[e].powf(self.penal - 1.0) * (self.e0 - self.emin) * uku
            };
        }
        if !c.is_finite() {
            return Err(Error::SingularSystem { dof: 0, pivot: c });
        }
        Ok(c)
    }
}
