//! Skew product of the radial process with a sphere Wiener process run on the
//! clock `tau(t) = int_0^t (m sinh S_r)^{-2} dr`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::RadialDriftSpec;
use crate::error::{Error, Result};
use crate::manifold::{CartesianMomentum, HyperbolicPoint, UnitSpherePoint};

use super::radial::{bem_step_detailed, RadialPathState, SolvePath};
use super::sphere::sphere_step;
use super::{StepConfig, MAX_SPHERE_SUBSTEPS};

#[derive(Debug, Clone, PartialEq)]
pub struct SkewState {
    pub radial: RadialPathState,
    pub tau: f64,
    pub omega: UnitSpherePoint,
}

impl SkewState {
    pub fn new(init: &HyperbolicPoint) -> Result<Self> {
        Ok(Self {
            radial: RadialPathState::new(init.s)?,
            tau: 0.0,
            omega: init.omega(),
        })
    }

    pub fn momentum(&self, m: f64) -> CartesianMomentum {
        CartesianMomentum::from_radial(self.radial.s, &self.omega, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewStepInfo {
    pub dtau: f64,
    pub solve: SolvePath,
}

/// Trapezoidal clock increment over one step.
pub(crate) fn clock_increment(s_prev: f64, s_next: f64, m: f64, dt: f64) -> f64 {
    let a = m * s_prev.sinh();
    let b = m * s_next.sinh();
    0.5 * (1.0 / (a * a) + 1.0 / (b * b)) * dt
}

/// Draws `dW` for the radial BEM step, then `d` sphere variates per sphere sub-step.
pub fn skew_step<R: Rng + ?Sized>(
    state: &mut SkewState,
    spec: &RadialDriftSpec,
    cfg: &StepConfig,
    rng: &mut R,
) -> Result<SkewStepInfo> {
    let m = spec.params.m();
    let d = state.omega.dim();
    if d != spec.params.d() {
        return Err(Error::Usage(format!(
            "sphere dimension {d} does not match d = {}",
            spec.params.d()
        )));
    }
    let z: f64 = rng.sample(StandardNormal);
    let dw = z * cfg.dt.sqrt() * spec.diffusion();
    let out = bem_step_detailed(&state.radial, spec, cfg, dw)?;

    let dtau = clock_increment(state.radial.s, out.state.s, m, cfg.dt);
    let substeps = ((dtau / cfg.max_sphere_substep).ceil() as usize).clamp(1, MAX_SPHERE_SUBSTEPS);
    let sub = dtau / substeps as f64;
    let scale = sub.sqrt();
    let mut db = vec![0.0; d];
    for _ in 0..substeps {
        for x in db.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *x = g * scale;
        }
        state.omega = sphere_step(&state.omega, &db, sub)?;
    }

    state.radial = out.state;
    state.tau += dtau;
    Ok(SkewStepInfo { dtau, solve: out.path })
}

/// Full path of the momentum process `P0 = m cosh S`, `P = m sinh S omega(Theta_tau)`:
/// `n_steps + 1` shell points starting with `init`.
pub fn simulate_momentum_path<R: Rng + ?Sized>(
    init: &HyperbolicPoint,
    spec: &RadialDriftSpec,
    cfg: &StepConfig,
    rng: &mut R,
) -> Result<Vec<CartesianMomentum>> {
    cfg.validate()?;
    if init.dim() != spec.params.d() {
        return Err(Error::Usage(format!(
            "initial point has d = {}, model has d = {}",
            init.dim(),
            spec.params.d()
        )));
    }
    let m = spec.params.m();
    let mut state = SkewState::new(init)?;
    let n = cfg.n_steps();
    let mut out = Vec::with_capacity(n + 1);
    out.push(state.momentum(m));
    for _ in 0..n {
        skew_step(&mut state, spec, cfg, rng)?;
        out.push(state.momentum(m));
    }
    Ok(out)
}
