//! Constrained Nosé-Hoover-chain dynamics on the lifted design space.
//!
//! Densities act as positions with conjugate momenta under
//! `H = Σ p_e² + C(x)`, so `ẋ = 2p` and equipartition gives `⟨p_e²⟩ = T/2`.
//! The total volume `Σ x_e = V_0` is held exactly; the box `[0,1]^N` is
//! enforced by specular reflection inside the constraint hyperplane.

mod checkpoint;
mod integrator;
mod potential;

pub use checkpoint::Checkpoint;
pub use integrator::{project_volume_constraint, Integrator};
pub use potential::{FlatPotential, Potential};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

pub const DEFAULT_TIMESTEP: f64 = 0.01;
pub const MAX_CHAIN_LENGTH: usize = 16;
pub const DEFAULT_CHAIN_LENGTH: usize = 2;
/// Relaxation time in units of the time step.
pub const DEFAULT_TAU_STEPS: f64 = 100.0;

/// How the chain couples to the momenta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// One chain on the total kinetic energy of the `N - 1` free directions.
    Global,
    /// One chain per orthonormal direction of the constraint plane.
    #[default]
    Massive,
}

/// Thermostat settings for one target temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermostatParams {
    pub target_temperature: f64,
    pub chain_length: usize,
    /// `Q_1..Q_{N_c}`, shared by every chain under [`Coupling::Massive`].
    pub masses: Vec<f64>,
    pub timestep: f64,
    pub relaxation_time: f64,
    #[serde(default)]
    pub coupling: Coupling,
}

impl ThermostatParams {
    /// Defaults for `n_sites` sites: massive coupling, `N_c = 2`, `dt = 0.01`, `τ = 100 dt`.
    pub fn new(n_sites: usize, temperature: f64) -> Result<Self> {
        Self::builder(n_sites, temperature).build()
    }

    pub fn builder(n_sites: usize, temperature: f64) -> ThermostatBuilder {
        ThermostatBuilder {
            n_sites,
            temperature,
            timestep: DEFAULT_TIMESTEP,
            chain_length: DEFAULT_CHAIN_LENGTH,
            relaxation_time: None,
            coupling: Coupling::default(),
        }
    }

    /// Number of independent chains acting on `n_sites` constrained sites.
    pub fn chain_count(&self, n_sites: usize) -> usize {
        match self.coupling {
            Coupling::Global => 1,
            Coupling::Massive => n_sites.saturating_sub(1),
        }
    }

    /// Same chain retargeted to `temperature`, with masses rescaled so the
    /// thermostat period is unchanged.
    pub fn at_temperature(&self, temperature: f64) -> Result<Self> {
        let ratio = temperature / self.target_temperature;
        let p = Self {
            target_temperature: temperature,
            masses: self.masses.iter().map(|q| q * ratio).collect(),
            ..self.clone()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.target_temperature > 0.0 && self.target_temperature.is_finite()) {
            return bad("target_temperature", "must be positive and finite");
        }
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return bad("timestep", "must be positive and finite");
        }
        if self.chain_length == 0 || self.chain_length > MAX_CHAIN_LENGTH {
            return bad("chain_length", &format!("must lie in 1..={MAX_CHAIN_LENGTH}"));
        }
        if self.masses.len() != self.chain_length {
            return bad("masses", "need one mass per chain element");
        }
        if !self.masses.iter().all(|q| *q > 0.0 && q.is_finite()) {
            return bad("masses", "must be positive and finite");
        }
        Ok(())
    }
}

/// Builder for [`ThermostatParams`] with the standard mass assignment
/// `Q_1 = n T τ²`, `Q_k = T τ²`, where `n` is the number of degrees of
/// freedom one chain acts on (`N` for global coupling, 1 for massive).
#[derive(Debug, Clone)]
pub struct ThermostatBuilder {
    n_sites: usize,
    temperature: f64,
    timestep: f64,
    chain_length: usize,
    relaxation_time: Option<f64>,
    coupling: Coupling,
}

impl ThermostatBuilder {
    pub fn timestep(mut self, dt: f64) -> Self {
        self.timestep = dt;
        self
    }

    pub fn chain_length(mut self, n: usize) -> Self {
        self.chain_length = n;
        self
    }

    pub fn relaxation_time(mut self, tau: f64) -> Self {
        self.relaxation_time = Some(tau);
        self
    }

    pub fn coupling(mut self, c: Coupling) -> Self {
        self.coupling = c;
        self
    }

    pub fn build(self) -> Result<ThermostatParams> {
        let tau = self.relaxation_time.unwrap_or(DEFAULT_TAU_STEPS * self.timestep);
        let dof = match self.coupling {
            Coupling::Global => self.n_sites as f64,
            Coupling::Massive => 1.0,
        };
        let t = self.temperature;
        let masses = (0..self.chain_length)
            .map(|k| if k == 0 { dof * t * tau * tau } else { t * tau * tau })
            .collect();
        let p = ThermostatParams {
            target_temperature: t,
            chain_length: self.chain_length,
            masses,
            timestep: self.timestep,
            relaxation_time: tau,
            coupling: self.coupling,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Full sampler state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    pub x: Vec<f64>,
    pub momenta: Vec<f64>,
    /// Chain variables, level-major: level `k` of chain `a` sits at
    /// `k * n_chains + a`.
    pub chain_positions: Vec<f64>,
    pub chain_velocities: Vec<f64>,
    /// Constraint force `λ` over the last step: the mean potential force plus
    /// the wall impulse the volume constraint absorbed, per unit time.
    pub lagrange_multiplier: f64,
    /// Potential-force part of `λ` at the current positions.
    #[serde(default)]
    pub force_multiplier: f64,
    pub step_count: u64,
    /// Target total volume.
    pub volume: f64,
    #[serde(skip)]
    pub(crate) cache: Option<ForceCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ForceCache {
    pub energy: f64,
    pub force: Vec<f64>,
}

impl DynamicState {
    /// `x = V_f` everywhere, momenta from `exp(-p²/T)` with zero mean, chain at rest.
    pub fn initialize(spec: &ProblemSpec, params: &ThermostatParams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::initialize_with_rng(spec, params, &mut rng)
    }

    pub fn initialize_with_rng(
        spec: &ProblemSpec,
        params: &ThermostatParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        params.validate()?;
        let n = spec.n_elements();
        if n < 2 {
            return Err(Error::InvalidProblem(
                "the volume constraint freezes a single site; need at least 2 elements".into(),
            ));
        }
        let normal = Normal::new(0.0, (params.target_temperature / 2.0).sqrt())
            .expect("finite positive std");
        let mut momenta: Vec<f64> = (0..n).map(|_| normal.sample(rng)).collect();
        remove_mean(&mut momenta);
        Ok(Self {
            x: vec![spec.volume_fraction; n],
            momenta,
            chain_positions: vec![0.0; params.chain_length * params.chain_count(n)],
            chain_velocities: vec![0.0; params.chain_length * params.chain_count(n)],
            lagrange_multiplier: 0.0,
            force_multiplier: 0.0,
            step_count: 0,
            volume: spec.target_volume(),
            cache: None,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.x.len()
    }

    /// `Σ p_e²`.
    pub fn kinetic_energy(&self) -> f64 {
        self.momenta.iter().map(|p| p * p).sum()
    }

    /// Potential energy at the current positions, if already evaluated.
    pub fn potential_energy(&self) -> Option<f64> {
        self.cache.as_ref().map(|c| c.energy)
    }

    /// Drops cached forces after positions were edited by hand.
    pub fn invalidate(&mut self) {
        self.cache = None;
    }

    pub fn volume_error(&self) -> f64 {
        (self.x.iter().sum::<f64>() - self.volume).abs()
    }

    pub fn momentum_sum(&self) -> f64 {
        self.momenta.iter().sum()
    }
}

pub(crate) fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|p| *p -= m);
}

/// `H = Σ p² + C(x)`.
pub fn hamiltonian<P: Potential + ?Sized>(state: &DynamicState, potential: &mut P) -> Result<f64> {
    let c = match state.potential_energy() {
        Some(c) => c,
        None => {
            let mut g = vec![0.0; state.n_sites()];
            potential.energy_and_gradient(&state.x, &mut g)?
        }
    };
    Ok(state.kinetic_energy() + c)
}

/// `H + Σ ½ Q_k v_k² + (N-1) T s_1 + Σ_{k≥2} T s_k`, conserved by the chain dynamics.
pub fn extended_hamiltonian<P: Potential + ?Sized>(
    state: &DynamicState,
    params: &ThermostatParams,
    potential: &mut P,
) -> Result<f64> {
    Ok(hamiltonian(state, potential)? + chain_energy(state, params))
}

pub(crate) fn chain_energy(state: &DynamicState, params: &ThermostatParams) -> f64 {
    let t = params.target_temperature;
    let chains = params.chain_count(state.n_sites());
    let dof = match params.coupling {
        Coupling::Global => (state.n_sites() - 1) as f64,
        Coupling::Massive => 1.0,
    };
    let mut e = 0.0;
    for (i, (&s, &v)) in state
        .chain_positions
        .iter()
        .zip(&state.chain_velocities)
        .enumerate()
    {
        let k = i / chains;
        e += 0.5 * params.masses[k] * v * v;
        e += if k == 0 { dof * t * s } else { t * s };
    }
    e
}
