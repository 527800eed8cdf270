//! Compliance-minimization problem on a regular grid of bilinear
//! quadrilaterals: problem definition, finite-element analysis and the
//! density filter.

pub mod band;
pub mod fem;
pub mod filter;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use band::BandMatrix;
pub use fem::{FemModel, ELEMENT_DOFS};
pub use filter::DensityFilter;

/// Boundary-condition presets. Node `(ix, iy)` has index `(nely + 1) * ix + iy`
/// with `iy` counted from the top edge; its dofs are `2n` (x) and `2n + 1` (y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcPreset {
    /// Left edge clamped, unit downward load at mid-height of the right edge.
    Cantilever,
    /// Half MBB beam: x-symmetry on the left edge, roller at the bottom-right
    /// corner, unit downward load at the top-left corner.
    HalfMbb,
    /// Both bottom corners pinned, unit downward load at the top-edge centre.
    Bridge,
}

/// A nodal force on one global dof.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointLoad {
    pub dof: usize,
    pub value: f64,
}

/// Immutable design-domain definition.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub nelx: usize,
    pub nely: usize,
    pub volume_fraction: f64,
    pub youngs_modulus_solid: f64,
    pub youngs_modulus_min: f64,
    pub poisson_ratio: f64,
    pub penalization: f64,
    pub filter_radius: f64,
    /// Sorted, deduplicated fixed dofs.
    pub supports: Vec<usize>,
    pub loads: Vec<PointLoad>,
    pub preset: Option<BcPreset>,
}

/// Builder with the usual SIMP defaults (`p = 3`, `E = 1`, `E_min = 1e-9`, `ν = 0.3`).
#[derive(Debug, Clone)]
pub struct ProblemBuilder {
    nelx: usize,
    nely: usize,
    volume_fraction: f64,
    youngs_modulus_solid: f64,
    youngs_modulus_min: f64,
    poisson_ratio: f64,
    penalization: f64,
    filter_radius: f64,
    supports: Vec<usize>,
    loads: Vec<PointLoad>,
    preset: Option<BcPreset>,
}

impl ProblemBuilder {
    pub fn new(nelx: usize, nely: usize) -> Self {
        Self {
            nelx,
            nely,
            volume_fraction: 0.5,
            youngs_modulus_solid: 1.0,
            youngs_modulus_min: 1e-9,
            poisson_ratio: 0.3,
            penalization: 3.0,
            filter_radius: 1.5,
            supports: Vec::new(),
            loads: Vec::new(),
            preset: None,
        }
    }

    pub fn volume_fraction(mut self, v: f64) -> Self {
        self.volume_fraction = v;
        self
    }
    pub fn youngs_modulus(mut self, solid: f64, min: f64) -> Self {
        self.youngs_modulus_solid = solid;
        self.youngs_modulus_min = min;
        self
    }
    pub fn poisson_ratio(mut self, nu: f64) -> Self {
        self.poisson_ratio = nu;
        self
    }
    pub fn penalization(mut self, p: f64) -> Self {
        self.penalization = p;
        self
    }
    pub fn filter_radius(mut self, r: f64) -> Self {
        self.filter_radius = r;
        self
    }
    pub fn supports(mut self, dofs: impl IntoIterator<Item = usize>) -> Self {
        self.supports = dofs.into_iter().collect();
        self
    }
    pub fn loads(mut self, loads: impl IntoIterator<Item = PointLoad>) -> Self {
        self.loads = loads.into_iter().collect();
        self
    }

    /// Replaces supports and loads with a preset.
    pub fn preset(mut self, preset: BcPreset) -> Self {
        let (supports, loads) = preset_conditions(preset, self.nelx, self.nely);
        self.supports = supports;
        self.loads = loads;
        self.preset = Some(preset);
        self
    }

    /// Scales all loads by `factor`.
    pub fn load_scale(mut self, factor: f64) -> Self {
        self.loads.iter_mut().for_each(|l| l.value *= factor);
        self
    }

    pub fn build(self) -> Result<ProblemSpec> {
        let mut supports = self.supports;
        supports.sort_unstable();
        supports.dedup();
        let spec = ProblemSpec {
            nelx: self.nelx,
            nely: self.nely,
            volume_fraction: self.volume_fraction,
            youngs_modulus_solid: self.youngs_modulus_solid,
            youngs_modulus_min: self.youngs_modulus_min,
            poisson_ratio: self.poisson_ratio,
            penalization: self.penalization,
            filter_radius: self.filter_radius,
            supports,
            loads: self.loads,
            preset: self.preset,
        };
        spec.validate()?;
        FemModel::new(&spec).check_rank()?;
        Ok(spec)
    }
}

fn node(nely: usize, ix: usize, iy: usize) -> usize {
    (nely + 1) * ix + iy
}

fn preset_conditions(preset: BcPreset, nelx: usize, nely: usize) -> (Vec<usize>, Vec<PointLoad>) {
    match preset {
        BcPreset::Cantilever => {
            let supports = (0..=nely).flat_map(|iy| [2 * iy, 2 * iy + 1]).collect();
            // odd nely has no mid-height node; split the load over the two central nodes
            let loads = if nely.is_multiple_of(2) {
                vec![PointLoad {
                    dof: 2 * node(nely, nelx, nely / 2) + 1,
                    value: -1.0,
                }]
            } else {
                [nely / 2, nely / 2 + 1]
                    .iter()
                    .map(|&iy| PointLoad {
                        dof: 2 * node(nely, nelx, iy) + 1,
                        value: -0.5,
                    })
                    .collect()
            };
            (supports, loads)
        }
        BcPreset::HalfMbb => {
            let mut supports: Vec<usize> = (0..=nely).map(|iy| 2 * iy).collect();
            supports.push(2 * node(nely, nelx, nely) + 1);
            let loads = vec![PointLoad { dof: 1, value: -1.0 }];
            (supports, loads)
        }
        BcPreset::Bridge => {
            let left = node(nely, 0, nely);
            let right = node(nely, nelx, nely);
            let supports = vec![2 * left, 2 * left + 1, 2 * right, 2 * right + 1];
            let loads = if nelx.is_multiple_of(2) {
                vec![PointLoad {
                    dof: 2 * node(nely, nelx / 2, 0) + 1,
                    value: -1.0,
                }]
            } else {
                [nelx / 2, nelx / 2 + 1]
                    .iter()
                    .map(|&ix| PointLoad {
                        dof: 2 * node(nely, ix, 0) + 1,
                        value: -0.5,
                    })
                    .collect()
            };
            (supports, loads)
        }
    }
}

impl ProblemSpec {
    /// The default benchmark: clamped-left cantilever, `V_f = 0.5`, `r_min = 1.5`.
    pub fn cantilever(nelx: usize, nely: usize) -> Result<Self> {
        ProblemBuilder::new(nelx, nely)
            .preset(BcPreset::Cantilever)
            .build()
    }

    pub fn n_elements(&self) -> usize {
        self.nelx * self.nely
    }

    pub fn n_nodes(&self) -> usize {
        (self.nelx + 1) * (self.nely + 1)
    }

    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes()
    }

    /// Target material volume `V_0 = V_f · nelx · nely`.
    pub fn target_volume(&self) -> f64 {
        self.volume_fraction * self.n_elements() as f64
    }

    /// Element index of grid cell `(ix, iy)`, `iy` from the top row.
    pub fn element_index(&self, ix: usize, iy: usize) -> usize {
        ix * self.nely + iy
    }

    /// Inverse of [`element_index`](Self::element_index).
    pub fn element_coords(&self, e: usize) -> (usize, usize) {
        (e / self.nely, e % self.nely)
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        node(self.nely, ix, iy)
    }

    /// Full-length load vector.
    pub fn load_vector(&self) -> Vec<f64> {
        let mut f = vec![0.0; self.n_dofs()];
        for l in &self.loads {
            f[l.dof] += l.value;
        }
        f
    }

    /// Element reflected through the horizontal mid-line.
    pub fn mirror_element(&self, e: usize) -> usize {
        let (ix, iy) = self.element_coords(e);
        self.element_index(ix, self.nely - 1 - iy)
    }

    /// Cells whose centre lies within `distance` element lengths of the
    /// clamped dofs' nodes.
    pub fn elements_near_supports(&self, distance: f64) -> Vec<usize> {
        let mut nodes: Vec<usize> = self.supports.iter().map(|d| d / 2).collect();
        nodes.dedup();
        (0..self.n_elements())
            .filter(|&e| {
                let (ix, iy) = self.element_coords(e);
                let (cx, cy) = (ix as f64 + 0.5, iy as f64 + 0.5);
                nodes.iter().any(|&n| {
                    let nx = (n / (self.nely + 1)) as f64;
                    let ny = (n % (self.nely + 1)) as f64;
                    ((cx - nx).powi(2) + (cy - ny).powi(2)).sqrt() <= distance
                })
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.nelx < 1 {
            return bad("nelx", "must be at least 1".into());
        }
        if self.nely < 1 {
            return bad("nely", "must be at least 1".into());
        }
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return bad("vol_frac", format!("{} not in (0, 1)", self.volume_fraction));
        }
        if !(self.youngs_modulus_solid > 0.0 && self.youngs_modulus_solid.is_finite()) {
            return bad("E", format!("{} must be positive", self.youngs_modulus_solid));
        }
        if !(self.youngs_modulus_min > 0.0 && self.youngs_modulus_min < self.youngs_modulus_solid) {
            return bad(
                "Emin",
                format!("{} not in (0, E)", self.youngs_modulus_min),
            );
        }
        if !(self.poisson_ratio > -1.0 && self.poisson_ratio < 0.5) {
            return bad("nu", format!("{} not in (-1, 0.5)", self.poisson_ratio));
        }
        if !(self.penalization >= 1.0) {
            return bad("penal", format!("{} must be >= 1", self.penalization));
        }
        if !(self.filter_radius >= 1.0) {
            return bad("rmin", format!("{} must be >= 1", self.filter_radius));
        }
        if self.loads.is_empty() {
            return bad("loads", "at least one load is required".into());
        }
        let ndof = self.n_dofs();
        if let Some(d) = self.supports.iter().find(|&&d| d >= ndof) {
            return bad("supports", format!("dof {d} out of range (n_dofs = {ndof})"));
        }
        for l in &self.loads {
            if l.dof >= ndof {
                return bad("loads", format!("dof {} out of range (n_dofs = {ndof})", l.dof));
            }
            if !l.value.is_finite() {
                return bad("loads", format!("non-finite value on dof {}", l.dof));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(&ProblemJson::from(self)).expect("spec serializes");
        hex(&Sha256::digest(json))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ProblemJson = serde_json::from_str(s)?;
        raw.into_spec()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ProblemJson::from(self)).expect("spec serializes")
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// On-disk form of a [`ProblemSpec`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemJson {
    pub nelx: Option<usize>,
    pub nely: Option<usize>,
    #[serde(default = "defaults::vol_frac")]
    pub vol_frac: f64,
    #[serde(default = "defaults::penal")]
    pub penal: f64,
    #[serde(default = "defaults::rmin")]
    pub rmin: f64,
    #[serde(rename = "E", default = "defaults::e")]
    pub e: f64,
    #[serde(rename = "Emin", default = "defaults::emin")]
    pub emin: f64,
    #[serde(default = "defaults::nu")]
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bc_preset: Option<BcPreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supports: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loads: Option<Vec<PointLoad>>,
}

mod defaults {
    pub fn vol_frac() -> f64 {
        0.5
    }
    pub fn penal() -> f64 {
        3.0
    }
    pub fn rmin() -> f64 {
        1.5
    }
    pub fn e() -> f64 {
        1.0
    }
    pub fn emin() -> f64 {
        1e-9
    }
    pub fn nu() -> f64 {
        0.3
    }
}

impl ProblemJson {
    pub fn into_spec(self) -> Result<ProblemSpec> {
        let missing = |name: &'static str| Error::InvalidParameter {
            name,
            reason: "missing field".into(),
        };
        let nelx = self.nelx.ok_or_else(|| missing("nelx"))?;
        let nely = self.nely.ok_or_else(|| missing("nely"))?;
        let mut b = ProblemBuilder::new(nelx, nely)
            .volume_fraction(self.vol_frac)
            .penalization(self.penal)
            .filter_radius(self.rmin)
            .youngs_modulus(self.e, self.emin)
            .poisson_ratio(self.nu);
        match (self.bc_preset, self.supports, self.loads) {
            (Some(p), None, None) => b = b.preset(p),
            (Some(_), _, _) => {
                return Err(Error::InvalidParameter {
                    name: "bc_preset",
                    reason: "give either bc_preset or explicit supports/loads, not both".into(),
                })
            }
            (None, supports, loads) => {
                let supports = supports.ok_or_else(|| missing("supports"))?;
                let loads = loads.ok_or_else(|| Error::InvalidParameter {
                    name: "loads",
                    reason: "missing field (or set bc_preset)".into(),
                })?;
                b = b.supports(supports).loads(loads);
            }
        }
        if let Some(s) = self.load_scale {
            b = b.load_scale(s);
        }
        b.build()
    }
}

impl From<&ProblemSpec> for ProblemJson {
    fn from(s: &ProblemSpec) -> Self {
        let (bc_preset, supports, loads) = match s.preset {
            Some(p) => (Some(p), None, None),
            None => (None, Some(s.supports.clone()), Some(s.loads.clone())),
        };
        // presets are normalized to unit total load; record any rescaling
        let load_scale = s.preset.and_then(|p| {
            let (_, base) = preset_conditions(p, s.nelx, s.nely);
            let scale = s.loads[0].value / base[0].value;
            (scale != 1.0).then_some(scale)
        });
        ProblemJson {
            nelx: Some(s.nelx),
            nely: Some(s.nely),
            vol_frac: s.volume_fraction,
            penal: s.penalization,
            rmin: s.filter_radius,
            e: s.youngs_modulus_solid,
            emin: s.youngs_modulus_min,
            nu: s.poisson_ratio,
            bc_preset,
            load_scale,
            supports,
            loads,
        }
    }
}

/// Element densities, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DesignField(Vec<f64>);

impl DesignField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((e, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(Error::InvalidParameter {
                name: "densities",
                reason: format!("x[{e}] = {v} outside [0, 1]"),
            });
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize, value: f64) -> Self {
        Self(vec![value.clamp(0.0, 1.0); n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl AsRef<[f64]> for DesignField {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Displacement solution; length `n_dofs`, zero on supported dofs.
pub type DisplacementField = Vec<f64>;

/// `u` solving `K(x) u = f` on the unfiltered field `x`.
pub fn assemble_and_solve(spec: &ProblemSpec, x: &DesignField) -> Result<DisplacementField> {
    FemModel::new(spec).solve(x.as_slice())
}

/// `C = fᵀu` on the unfiltered field `x`.
pub fn compliance(spec: &ProblemSpec, x: &DesignField) -> Result<f64> {
    let mut g = vec![0.0; x.len()];
    FemModel::new(spec).compliance_and_gradient(x.as_slice(), &mut g)
}

/// Adjoint sensitivity `∂C/∂x_e` on the unfiltered field `x`.
pub fn compliance_gradient(spec: &ProblemSpec, x: &DesignField) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    FemModel::new(spec).compliance_and_gradient(x.as_slice(), &mut g)?;
    Ok(g)
}

pub fn density_filter(spec: &ProblemSpec, x: &DesignField) -> DesignField {
    let f = DensityFilter::new(spec);
    let mut out = vec![0.0; x.len()];
    f.apply(x.as_slice(), &mut out);
    DesignField(out)
}

/// Maps a gradient with respect to the filtered field back to the design field.
pub fn filter_chain_rule(spec: &ProblemSpec, g: &[f64]) -> Vec<f64> {
    let f = DensityFilter::new(spec);
    let mut out = vec![0.0; g.len()];
    f.chain_rule(g, &mut out);
    out
}

/// Compliance of the filtered field with its gradient chained back to the
/// design field. This is the potential the sampler and the optimizer share.
#[derive(Debug, Clone)]
pub struct FilteredCompliance {
    spec: ProblemSpec,
    fem: FemModel,
    filter: DensityFilter,
    physical: Vec<f64>,
    grad_physical: Vec<f64>,
}

impl FilteredCompliance {
    pub fn new(spec: &ProblemSpec) -> Self {
        let n = spec.n_elements();
        Self {
            spec: spec.clone(),
            fem: FemModel::new(spec),
            filter: DensityFilter::new(spec),
            physical: vec![0.0; n],
            grad_physical: vec![0.0; n],
        }
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn filter(&self) -> &DensityFilter {
        &self.filter
    }

    /// Returns `C(filter(x))` and writes `∂C/∂x` into `grad`.
    pub fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.filter.apply(x, &mut self.physical);
        let c = self
            .fem
            .compliance_and_gradient(&self.physical, &mut self.grad_physical)?;
        self.filter.chain_rule(&self.grad_physical, grad);
        Ok(c)
    }

    /// Filtered field from the most recent [`evaluate`](Self::evaluate).
    pub fn last_physical(&self) -> &[f64] {
        &self.physical
    }
}
