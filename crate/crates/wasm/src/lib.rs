//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Three operations: the OC optimum as an RGBA raster, a stepping sampler
//! whose temperature can be changed between frames, and the closed-form
//! `⟨C⟩(T)` curve of the two-regime model.

use morphofilter::analysis::{theory_mean_compliance, TheoryModel};
use morphofilter::dynamics::{DynamicState, Integrator};
use morphofilter::ensemble::{schedule, Spacing, ThermostatTemplate};
use morphofilter::optimizer::{optimize, OcSettings};
use morphofilter::problem::{BcPreset, FilteredCompliance, ProblemBuilder, ProblemSpec};
use morphofilter::raster;
use wasm_bindgen::prelude::*;

fn js(e: morphofilter::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn preset(name: &str) -> Result<BcPreset, JsError> {
    match name {
        "cantilever" => Ok(BcPreset::Cantilever),
        "half_mbb" => Ok(BcPreset::HalfMbb),
        "bridge" => Ok(BcPreset::Bridge),
        other => Err(JsError::new(&format!("unknown preset `{other}`"))),
    }
}

fn problem(bc: &str, nelx: usize, nely: usize, volume_fraction: f64, r_min: f64) -> Result<ProblemSpec, JsError> {
    ProblemBuilder::new(nelx, nely)
        .preset(preset(bc)?)
        .volume_fraction(volume_fraction)
        .filter_radius(r_min)
        .build()
        .map_err(js)
}

/// A rendered field plus the scalar that goes with it.
#[wasm_bindgen]
pub struct Frame {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    compliance: f64,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn compliance(&self) -> f64 {
        self.compliance
    }

    /// Row-major RGBA bytes, ready for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

fn frame(spec: &ProblemSpec, density: &[f64], scale: usize, compliance: f64) -> Result<Frame, JsError> {
    let img = raster::grayscale(spec, density, scale).map_err(js)?;
    Ok(Frame {
        width: img.width,
        height: img.height,
        rgba: img.to_rgba(),
        compliance,
    })
}

/// Runs the optimality-criteria optimizer and renders the filtered optimum.
#[wasm_bindgen]
pub fn optimum(bc: &str, nelx: usize, nely: usize, volume_fraction: f64, r_min: f64, scale: usize) -> Result<Frame, JsError> {
    let spec = problem(bc, nelx, nely, volume_fraction, r_min)?;
    let r = optimize(&spec, &OcSettings::default()).map_err(js)?;
    frame(&spec, r.physical_density(&spec).as_slice(), scale, r.c_min)
}

/// Thermostatted sampler on the compliance landscape.
#[wasm_bindgen]
pub struct Sampler {
    spec: ProblemSpec,
    integrator: Integrator<FilteredCompliance>,
    state: DynamicState,
    template: ThermostatTemplate,
}

#[wasm_bindgen]
impl Sampler {
    #[wasm_bindgen(constructor)]
    pub fn new(
        bc: &str,
        nelx: usize,
        nely: usize,
        volume_fraction: f64,
        r_min: f64,
        temperature: f64,
        seed: u64,
    ) -> Result<Sampler, JsError> {
        let spec = problem(bc, nelx, nely, volume_fraction, r_min)?;
        let template = ThermostatTemplate::default();
        let params = template.params(spec.n_elements(), temperature).map_err(js)?;
        let state = DynamicState::initialize(&spec, &params, seed).map_err(js)?;
        let mut integrator = Integrator::new(FilteredCompliance::new(&spec), params).map_err(js)?;
        let mut state = state;
        integrator.prepare(&mut state).map_err(js)?;
        Ok(Self {
            spec,
            integrator,
            state,
            template,
        })
    }

    /// Retargets the thermostat; the state carries over.
    #[wasm_bindgen(js_name = setTemperature)]
    pub fn set_temperature(&mut self, temperature: f64) -> Result<(), JsError> {
        let params = self.template.params(self.spec.n_elements(), temperature).map_err(js)?;
        self.integrator.set_params(params).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn temperature(&self) -> f64 {
        self.integrator.params().target_temperature
    }

    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> f64 {
        self.state.lagrange_multiplier
    }

    /// `|Σx - V_0|`, shown on the page as a conservation check.
    #[wasm_bindgen(getter, js_name = volumeError)]
    pub fn volume_error(&self) -> f64 {
        self.state.volume_error()
    }

    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> u64 {
        self.state.step_count
    }

    /// Advances `steps` steps and renders the filtered density.
    pub fn advance(&mut self, steps: u32, scale: usize) -> Result<Frame, JsError> {
        self.integrator.run(&mut self.state, u64::from(steps)).map_err(js)?;
        let c = self.state.potential_energy().unwrap_or(f64::NAN);
        let observed = self.integrator.observed(&self.state).to_vec();
        frame(&self.spec, &observed, scale, c)
    }
}

/// `⟨C⟩` of the two-regime model at `count` log-spaced temperatures from
/// `t_hi` down to `t_lo`, interleaved as `[T0, C0, T1, C1, ...]`.
#[wasm_bindgen(js_name = theoryCurve)]
#[allow(clippy::too_many_arguments)]
pub fn theory_curve(
    c_min: f64,
    c_star: f64,
    n_below: f64,
    n_above: f64,
    nu: f64,
    gamma_below: f64,
    gamma_above: f64,
    t_hi: f64,
    t_lo: f64,
    count: usize,
) -> Result<Vec<f64>, JsError> {
    let model = TheoryModel {
        c_min,
        c_star,
        n_below,
        n_above,
        nu,
        gamma_below,
        gamma_above,
    };
    model.validate().map_err(js)?;
    let mut out = Vec::with_capacity(2 * count);
    for t in schedule(t_hi, t_lo, count, Spacing::Log).map_err(js)? {
        out.push(t);
        out.push(theory_mean_compliance(&model, t).map_err(js)?);
    }
    Ok(out)
}
