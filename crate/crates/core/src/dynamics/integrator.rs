use super::{
    chain_energy, remove_mean, Coupling, DynamicState, ForceCache, Potential, ThermostatParams, MAX_CHAIN_LENGTH,
};
use crate::error::{Error, Result};

/// Suzuki-Yoshida fourth-order weights `w1 = 1/(2 - 2^{1/3})`, `w2 = 1 - 2 w1`.
const SY_W1: f64 = 1.0 / (2.0 - 1.259_921_049_894_873_2);
const SY_WEIGHTS: [f64; 3] = [SY_W1, 1.0 - 2.0 * SY_W1, SY_W1];

const MAX_CONTACTS_PER_SITE: usize = 100;

/// Time-reversible integrator: chain half step, velocity Verlet with the
/// constraint force removed, chain half step.
#[derive(Debug, Clone)]
pub struct Integrator<P> {
    potential: P,
    params: ThermostatParams,
    grad: Vec<f64>,
}

impl<P: Potential> Integrator<P> {
    pub fn new(potential: P, params: ThermostatParams) -> Result<Self> {
        params.validate()?;
        let n = potential.n_sites();
        if n < 2 {
            return Err(Error::InvalidProblem(
                "the volume constraint freezes a single site; need at least 2 elements".into(),
            ));
        }
        Ok(Self {
            potential,
            params,
            grad: vec![0.0; n],
        })
    }

    pub fn params(&self) -> &ThermostatParams {
        &self.params
    }

    pub fn set_params(&mut self, params: ThermostatParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    pub fn potential(&self) -> &P {
        &self.potential
    }

    pub fn potential_mut(&mut self) -> &mut P {
        &mut self.potential
    }

    pub fn into_potential(self) -> P {
        self.potential
    }

    fn check_shape(&self, state: &DynamicState) -> Result<()> {
        if state.n_sites() != self.potential.n_sites() || state.momenta.len() != state.n_sites() {
            return Err(Error::MeshMismatch {
                expected: self.potential.n_sites(),
                actual: state.n_sites(),
            });
        }
        let want = self.params.chain_length * self.params.chain_count(state.n_sites());
        if state.chain_positions.len() != want || state.chain_velocities.len() != want {
            return Err(Error::InvalidParameter {
                name: "chain_length",
                reason: format!(
                    "state carries {} chain variables, parameters need {want}",
                    state.chain_velocities.len(),
                ),
            });
        }
        Ok(())
    }

    fn evaluate(&mut self, x: &[f64], step: u64) -> Result<ForceCache> {
        let energy = self.potential.energy_and_gradient(x, &mut self.grad)?;
        if let Some(site) = self.grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteForce { site, step });
        }
        if !energy.is_finite() {
            return Err(Error::NonFiniteForce { site: 0, step });
        }
        Ok(ForceCache {
            energy,
            force: self.grad.iter().map(|g| -g).collect(),
        })
    }

    /// Evaluates forces at the current positions. Call after editing a state by
    /// hand or before reading [`observed`](Self::observed) on a fresh state.
    pub fn prepare(&mut self, state: &mut DynamicState) -> Result<()> {
        self.check_shape(state)?;
        let cache = self.evaluate(&state.x, state.step_count)?;
        state.force_multiplier = mean(&cache.force);
        state.lagrange_multiplier = state.force_multiplier;
        state.cache = Some(cache);
        Ok(())
    }

    /// Observable field for the state last prepared or stepped.
    pub fn observed<'a>(&'a self, state: &'a DynamicState) -> &'a [f64] {
        self.potential.observed(&state.x)
    }

    /// Advances one step. On error the state is left as it was.
    pub fn step(&mut self, state: &mut DynamicState) -> Result<()> {
        if state.cache.is_none() {
            self.prepare(state)?;
        } else {
            self.check_shape(state)?;
        }
        let mut next = state.clone();
        self.advance(&mut next)?;
        *state = next;
        Ok(())
    }

    pub fn run(&mut self, state: &mut DynamicState, steps: u64) -> Result<()> {
        for _ in 0..steps {
            self.step(state)?;
        }
        Ok(())
    }

    fn advance(&mut self, st: &mut DynamicState) -> Result<()> {
        let dt = self.params.timestep;
        let half = 0.5 * dt;
        chain_half_step(st, &self.params, half);

        let cache = st.cache.take().expect("prepared state");
        kick(&mut st.momenta, &cache.force, half);

        let impulse = drift_in_box(&mut st.x, &mut st.momenta, dt)?;
        let fixed = project_volume_constraint(&st.x, st.volume)?;
        st.x = fixed;

        let cache = self.evaluate(&st.x, st.step_count)?;
        st.force_multiplier = kick(&mut st.momenta, &cache.force, half);
        st.lagrange_multiplier = st.force_multiplier + impulse / dt;
        st.cache = Some(cache);

        chain_half_step(st, &self.params, half);
        st.step_count += 1;
        Ok(())
    }

    pub fn hamiltonian(&mut self, state: &mut DynamicState) -> Result<f64> {
        if state.cache.is_none() {
            self.prepare(state)?;
        }
        Ok(state.kinetic_energy() + state.potential_energy().unwrap_or_default())
    }

    pub fn extended_hamiltonian(&mut self, state: &mut DynamicState) -> Result<f64> {
        Ok(self.hamiltonian(state)? + chain_energy(state, &self.params))
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `p += h (F - λ)` with `λ = mean(F)`; returns `λ`.
fn kick(p: &mut [f64], force: &[f64], h: f64) -> f64 {
    let lambda = mean(force);
    for (p, f) in p.iter_mut().zip(force) {
        *p += h * (f - lambda);
    }
    remove_mean(p);
    lambda
}

/// Propagates the chains and the momentum scaling for time `half`.
fn chain_half_step(st: &mut DynamicState, params: &ThermostatParams, half: f64) {
    match params.coupling {
        Coupling::Global => {
            let nf = (st.n_sites() - 1) as f64;
            let k2 = 2.0 * st.momenta.iter().map(|p| p * p).sum::<f64>();
            let scale = propagate_chain(
                &mut st.chain_velocities,
                &mut st.chain_positions,
                params,
                nf,
                k2,
                half,
            );
            st.momenta.iter_mut().for_each(|p| *p *= scale);
        }
        Coupling::Massive => {
            let mut modes = to_modes(&st.momenta);
            propagate_massive(&mut st.chain_velocities, &mut st.chain_positions, params, &mut modes, half);
            from_modes(&modes, &mut st.momenta);
        }
    }
}

/// One unit-dof chain per Helmert mode, all with the same masses. Same
/// update as [`propagate_chain`], written level by level across modes so the
/// inner loops vectorize.
fn propagate_massive(v: &mut [f64], s: &mut [f64], params: &ThermostatParams, modes: &mut [f64], half: f64) {
    let t = params.target_temperature;
    let q = &params.masses;
    let m = q.len();
    let nm = modes.len();
    let mut damp = vec![0.0; m.saturating_sub(1) * nm];
    let mut k2: Vec<f64> = modes.iter().map(|p| 2.0 * p * p).collect();
    let mut scale = vec![1.0; nm];

    // G_k for level k given the level below
    #[allow(clippy::too_many_arguments)]
    fn kick_level(vk: &mut [f64], below: Option<&[f64]>, k2: &[f64], q_below: f64, qk: f64, t: f64, h: f64, damp: Option<&[f64]>) {
        let inv = 1.0 / qk;
        for a in 0..vk.len() {
            let g = match below {
                Some(b) => (q_below * b[a] * b[a] - t) * inv,
                None => (k2[a] - t) * inv,
            };
            vk[a] = match damp {
                Some(f) => (vk[a] * f[a] + h * g) * f[a],
                None => vk[a] + h * g,
            };
        }
    }

    for w in SY_WEIGHTS {
        let d = w * half;
        let h = 0.5 * d;
        // top level, undamped
        {
            let (lo, hi) = v.split_at_mut((m - 1) * nm);
            let below = (m > 1).then(|| &lo[(m - 2) * nm..]);
            let qb = if m > 1 { q[m - 2] } else { 0.0 };
            kick_level(&mut hi[..nm], below, &k2, qb, q[m - 1], t, h, None);
        }
        for k in (0..m - 1).rev() {
            let (lo, hi) = v.split_at_mut((k + 1) * nm);
            let f = &mut damp[k * nm..(k + 1) * nm];
            for (f, &up) in f.iter_mut().zip(&hi[..nm]) {
                *f = small_exp(-0.25 * d * up);
            }
            let (below, vk) = lo.split_at_mut(k * nm);
            let below = (k > 0).then(|| &below[(k - 1) * nm..]);
            let qb = if k > 0 { q[k - 1] } else { 0.0 };
            kick_level(vk, below, &k2, qb, q[k], t, h, Some(&damp[k * nm..(k + 1) * nm]));
        }
        for a in 0..nm {
            let f = small_exp(-d * v[a]);
            scale[a] *= f;
            k2[a] *= f * f;
        }
        for (s, v) in s.iter_mut().zip(v.iter()) {
            *s += d * v;
        }
        for k in 0..m - 1 {
            let (lo, _) = v.split_at_mut((k + 1) * nm);
            let (below, vk) = lo.split_at_mut(k * nm);
            let below = (k > 0).then(|| &below[(k - 1) * nm..]);
            let qb = if k > 0 { q[k - 1] } else { 0.0 };
            kick_level(vk, below, &k2, qb, q[k], t, h, Some(&damp[k * nm..(k + 1) * nm]));
        }
        {
            let (lo, hi) = v.split_at_mut((m - 1) * nm);
            let below = (m > 1).then(|| &lo[(m - 2) * nm..]);
            let qb = if m > 1 { q[m - 2] } else { 0.0 };
            kick_level(&mut hi[..nm], below, &k2, qb, q[m - 1], t, h, None);
        }
    }
    for (p, f) in modes.iter_mut().zip(&scale) {
        *p *= f;
    }
}

/// One chain acting on `nf` degrees of freedom with kinetic term `k2 = Σ p²/m`.
/// Returns the factor to scale those momenta by.
fn propagate_chain(
    v: &mut [f64],
    s: &mut [f64],
    params: &ThermostatParams,
    nf: f64,
    mut k2: f64,
    half: f64,
) -> f64 {
    let t = params.target_temperature;
    let q = &params.masses;
    let m = q.len();
    let force = |k: usize, v: &[f64], k2: f64| -> f64 {
        if k == 0 {
            (k2 - nf * t) / q[0]
        } else {
            (q[k - 1] * v[k - 1] * v[k - 1] - t) / q[k]
        }
    };
    let mut scale = 1.0;
    // v[k + 1] is unchanged between the two sweeps, so the damping
    // factors of the backward sweep are reused on the way forward
    let mut damp = [0.0; MAX_CHAIN_LENGTH];
    for w in SY_WEIGHTS {
        let d = w * half;
        v[m - 1] += 0.5 * d * force(m - 1, v, k2);
        for k in (0..m - 1).rev() {
            let f = small_exp(-0.25 * d * v[k + 1]);
            damp[k] = f;
            v[k] = (v[k] * f + 0.5 * d * force(k, v, k2)) * f;
        }
        let a = small_exp(-d * v[0]);
        scale *= a;
        k2 *= a * a;
        for (s, v) in s.iter_mut().zip(v.iter()) {
            *s += d * v;
        }
        for k in 0..m - 1 {
            let f = damp[k];
            v[k] = (v[k] * f + 0.5 * d * force(k, v, k2)) * f;
        }
        v[m - 1] += 0.5 * d * force(m - 1, v, k2);
    }
    scale
}

/// `e^x`, by its Taylor series where that is exact to rounding: for
/// `|x| < 1/64` the first omitted term is below `1e-19`.
#[inline(always)]
fn small_exp(x: f64) -> f64 {
    if x.abs() < 1.0 / 64.0 {
        1.0 + x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x * (1.0 / 720.0 + x / 5040.0))))))
    } else {
        x.exp()
    }
}

/// Coordinates of a zero-sum vector in the Helmert basis of the plane
/// `Σp = 0`: mode `a` (1-based) is `(1,…,1,-a,0,…)/√(a(a+1))` with `a` ones.
fn to_modes(p: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.len() - 1);
    let mut prefix = p[0];
    for (a, &pa) in p.iter().enumerate().skip(1) {
        let af = a as f64;
        out.push((prefix - af * pa) / (af * (af + 1.0)).sqrt());
        prefix += pa;
    }
    out
}

fn from_modes(modes: &[f64], p: &mut [f64]) {
    let n = p.len();
    let mut suffix = 0.0;
    for i in (0..n).rev() {
        let own = if i == 0 {
            0.0
        } else {
            let a = i as f64;
            -a * modes[i - 1] / (a * (a + 1.0)).sqrt()
        };
        p[i] = suffix + own;
        if i > 0 {
            let a = i as f64;
            suffix += modes[i - 1] / (a * (a + 1.0)).sqrt();
        }
    }
}

/// Free flight `ẋ = 2p` for time `dt` inside the box. At each wall contact
/// the momentum is mirrored inside the plane `Σp = 0`, whose wall normal is
/// `e_i - 1/N`: site `i` reverses and the others share the change evenly.
/// Contacts are processed in time order, so the flow is exactly reversible.
/// Returns the impulse the volume constraint absorbed, per site, along `-1`.
pub(crate) fn drift_in_box(x: &mut [f64], p: &mut [f64], dt: f64) -> Result<f64> {
    let n = x.len();
    let share = 2.0 / (n - 1) as f64;
    let max_events = MAX_CONTACTS_PER_SITE * n;
    let mut remaining = dt;
    let mut impulse = 0.0;
    for _ in 0..max_events {
        let mut first = None;
        let mut t_hit = remaining;
        for (e, (&xe, &pe)) in x.iter().zip(p.iter()).enumerate() {
            let t = if pe < 0.0 {
                xe / (-2.0 * pe)
            } else if pe > 0.0 {
                (1.0 - xe) / (2.0 * pe)
            } else {
                continue;
            };
            let t = t.max(0.0);
            if t < t_hit {
                t_hit = t;
                first = Some(e);
            }
        }
        for (x, p) in x.iter_mut().zip(p.iter()) {
            *x += 2.0 * t_hit * p;
        }
        remaining -= t_hit;
        let Some(e) = first else {
            return Ok(impulse);
        };
        x[e] = if p[e] < 0.0 { 0.0 } else { 1.0 };
        let pe = p[e];
        let dp = share * pe;
        p.iter_mut().for_each(|v| *v += dp);
        p[e] = -pe;
        impulse -= dp;
    }
    Err(Error::StepSize {
        iterations: max_events,
    })
}

/// Shifts the non-saturated entries of `x` uniformly so the total is `volume`.
/// Entries pushed past a bound are clamped and the remainder is spread again.
pub fn project_volume_constraint(x: &[f64], volume: f64) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    let n = y.len();
    let tol = 1e-14 * volume.abs().max(1.0);
    for _ in 0..=n {
        let r = volume - y.iter().sum::<f64>();
        if r.abs() <= tol {
            return Ok(y);
        }
        let free = |v: f64| if r > 0.0 { v < 1.0 } else { v > 0.0 };
        let n_free = y.iter().filter(|&&v| free(v)).count();
        if n_free == 0 {
            break;
        }
        let shift = r / n_free as f64;
        for v in y.iter_mut() {
            if free(*v) {
                *v = (*v + shift).clamp(0.0, 1.0);
            }
        }
    }
    let total: f64 = y.iter().sum();
    if (volume - total).abs() <= tol {
        Ok(y)
    } else {
        Err(Error::InfeasibleVolume {
            target: volume,
            lo: 0.0,
            hi: n as f64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::FlatPotential;
    use crate::problem::{FilteredCompliance, ProblemSpec};

    #[test]
    fn sy_weights_sum_to_one() {
        assert!((SY_W1 - 1.0 / (2.0 - 2f64.powf(1.0 / 3.0))).abs() < 1e-15);
        assert!((SY_WEIGHTS.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_exp_matches_libm() {
        for i in -1000..=1000 {
            let x = i as f64 * 3e-5;
            let (a, b) = (small_exp(x), x.exp());
            assert!((a - b).abs() <= 2.0 * f64::EPSILON * b, "{x}: {a} vs {b}");
        }
        assert_eq!(small_exp(0.5), 0.5f64.exp());
    }

    #[test]
    fn projection_examples() {
        let y = project_volume_constraint(&[0.4, 0.6], 1.2).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.7).abs() < 1e-15);
        let y = project_volume_constraint(&[0.3, 0.7], 1.0).unwrap();
        assert_eq!(y, vec![0.3, 0.7]);
        let y = project_volume_constraint(&[1.0, 0.2, 0.2], 1.6).unwrap();
        assert_eq!(y[0], 1.0);
        assert!((y[1] - 0.3).abs() < 1e-15 && (y[2] - 0.3).abs() < 1e-15);
        assert!(project_volume_constraint(&[1.0, 1.0], 2.5).is_err());
    }

    #[test]
    fn helmert_round_trip() {
        let mut p = vec![0.3, -0.1, 0.25, -0.5, 0.05];
        remove_mean(&mut p);
        let m = to_modes(&p);
        assert_eq!(m.len(), 4);
        let e1: f64 = p.iter().map(|v| v * v).sum();
        let e2: f64 = m.iter().map(|v| v * v).sum();
        assert!((e1 - e2).abs() < 1e-15);
        let mut q = vec![0.0; 5];
        from_modes(&m, &mut q);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn wall_contacts_preserve_sums_and_energy() {
        let mut x = vec![0.05, 0.5, 0.6, 0.95];
        let mut p = vec![-4.0, 0.5, 0.5, 3.0];
        let (sx, kp): (f64, f64) = (x.iter().sum(), p.iter().map(|v| v * v).sum());
        let impulse = drift_in_box(&mut x, &mut p, 0.1).unwrap();
        // contact at 0 then at 1: 2·4/3 - 2·(1/3)/3
        assert!((impulse - (8.0 / 3.0 - 2.0 / 9.0)).abs() < 1e-12, "{impulse}");
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((x.iter().sum::<f64>() - sx).abs() < 1e-14);
        assert!(p.iter().sum::<f64>().abs() < 1e-14);
        assert!((p.iter().map(|v| v * v).sum::<f64>() - kp).abs() < 1e-13);
        // flight back retraces
        p.iter_mut().for_each(|v| *v = -*v);
        drift_in_box(&mut x, &mut p, 0.1).unwrap();
        for (a, b) in x.iter().zip([0.05, 0.5, 0.6, 0.95]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_force_drift_keeps_volume() {
        let spec = ProblemSpec::cantilever(4, 2).unwrap();
        let params = ThermostatParams::new(8, 1.0).unwrap();
        let mut st = DynamicState::initialize(&spec, &params, 5).unwrap();
        let mut int = Integrator::new(FlatPotential::new(8), params).unwrap();
        for _ in 0..2000 {
            int.step(&mut st).unwrap();
            assert!(st.volume_error() <= 1e-10);
            assert!(st.momentum_sum().abs() <= 1e-10);
            assert!(st.x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn trajectories_are_deterministic() {
        let spec = ProblemSpec::cantilever(6, 3).unwrap();
        let params = ThermostatParams::new(18, 5.0).unwrap();
        let run = || {
            let mut st = DynamicState::initialize(&spec, &params, 11).unwrap();
            let mut int = Integrator::new(FilteredCompliance::new(&spec), params.clone()).unwrap();
            int.run(&mut st, 300).unwrap();
            st
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn reversing_momenta_retraces_path() {
        // reversing momenta and chain velocities retraces the path
        let spec = ProblemSpec::cantilever(4, 2).unwrap();
        let params = ThermostatParams::new(8, 20.0).unwrap();
        let mut st = DynamicState::initialize(&spec, &params, 2).unwrap();
        let mut int = Integrator::new(FilteredCompliance::new(&spec), params).unwrap();
        let x0 = st.x.clone();
        int.run(&mut st, 50).unwrap();
        st.momenta.iter_mut().for_each(|p| *p = -*p);
        st.chain_velocities.iter_mut().for_each(|v| *v = -*v);
        int.run(&mut st, 50).unwrap();
        for (a, b) in st.x.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn failed_step_leaves_state() {
        struct Bad;
        impl Potential for Bad {
            fn n_sites(&self) -> usize {
                4
            }
            fn energy_and_gradient(&mut self, x: &[f64], g: &mut [f64]) -> Result<f64> {
                g.iter_mut().for_each(|v| *v = 0.0);
                if x[0] != 0.5 {
                    g[2] = f64::NAN;
                }
                Ok(0.0)
            }
        }
        let spec = ProblemSpec::cantilever(2, 2).unwrap();
        let params = ThermostatParams::new(4, 1.0).unwrap();
        let mut st = DynamicState::initialize(&spec, &params, 0).unwrap();
        let mut int = Integrator::new(Bad, params).unwrap();
        let before = st.x.clone();
        match int.step(&mut st) {
            Err(Error::NonFiniteForce { site: 2, step: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(st.x, before);
    }
}
