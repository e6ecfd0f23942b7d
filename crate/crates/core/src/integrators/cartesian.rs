//! Explicit Euler–Maruyama for the cartesian form of the shell processes
//! (`d = 2, 3`), used as an independent route to the law of `P(t)`.
//!
//! With `k = d - gamma`, `r = |(P1, P2)|` and `R = |(P1, P2, P3)|`:
//!
//! ```text
//! d = 2: dP0 = (k P0/(2m^2) + gamma/(2 P0)) dt + r/m dW1
//!        dP1 = k P1/(2m^2) dt + P0 P1/(m r) dW1 - P2/r dW2
//!        dP2 = k P2/(2m^2) dt + P0 P2/(m r) dW1 + P1/r dW2
//! d = 3: dP0 = (k P0/(2m^2) + gamma/(2 P0)) dt + R/m dW1
//!        dP1 = k P1/(2m^2) dt + P0 P1/(m R) dW1 + P1 P3/(r R) dW2 - P2/r dW3
//!        dP2 = k P2/(2m^2) dt + P0 P2/(m R) dW1 + P2 P3/(r R) dW2 + P1/r dW3
//!        dP3 = k P3/(2m^2) dt + P0 P3/(m R) dW1 - r/R dW2
//! ```
//!
//! The diffusion matrix has removable singularities at `r = 0` (and `R = 0`);
//! they are not regularized here and hitting them is an error.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dynamics::RadialDriftSpec;
use crate::error::{Error, Result};
use crate::manifold::CartesianMomentum;

use super::StepConfig;

const SINGULAR_RADIUS: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartesianScheme {
    Euler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartesianState {
    pub p: CartesianMomentum,
    pub t: f64,
}

impl CartesianState {
    pub fn new(p: CartesianMomentum) -> Self {
        Self { p, t: 0.0 }
    }

    /// `r = |(P1, P2)|`.
    pub fn planar_radius(&self) -> f64 {
        self.p.p[0].hypot(self.p.p[1])
    }

    /// `R = |P|`.
    pub fn spatial_radius(&self) -> f64 {
        self.p.spatial_norm()
    }
}

/// One explicit step with prescribed Wiener increments `dw` (`d` of them).
pub fn cartesian_step(state: &CartesianState, spec: &RadialDriftSpec, dt: f64, dw: &[f64]) -> Result<CartesianState> {
    let d = spec.params.d();
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    if state.p.dim() != d || dw.len() != d {
        return Err(Error::Usage(format!(
            "cartesian step needs {d} spatial components and {d} increments"
        )));
    }
    let m = spec.params.m();
    let gamma = spec.gamma();
    let lin = (d as f64 - gamma) / (2.0 * m * m);
    let p0 = state.p.p0;
    let p = &state.p.p;
    let r = state.planar_radius();
    if r < SINGULAR_RADIUS {
        return Err(Error::CoordinateSingularity { t: state.t, radius: r });
    }

    let mut next = Vec::with_capacity(d);
    let next_p0;
    if d == 2 {
        next_p0 = p0 + (lin * p0 + gamma / (2.0 * p0)) * dt + r / m * dw[0];
        next.push(p[0] + lin * p[0] * dt + p0 * p[0] / (m * r) * dw[0] - p[1] / r * dw[1]);
        next.push(p[1] + lin * p[1] * dt + p0 * p[1] / (m * r) * dw[0] + p[0] / r * dw[1]);
    } else {
        let big_r = state.spatial_radius();
        if big_r < SINGULAR_RADIUS {
            return Err(Error::CoordinateSingularity {
                t: state.t,
                radius: big_r,
            });
        }
        let rr = r * big_r;
        next_p0 = p0 + (lin * p0 + gamma / (2.0 * p0)) * dt + big_r / m * dw[0];
        next.push(
            p[0] + lin * p[0] * dt + p0 * p[0] / (m * big_r) * dw[0] + p[0] * p[2] / rr * dw[1] - p[1] / r * dw[2],
        );
        next.push(
            p[1] + lin * p[1] * dt + p0 * p[1] / (m * big_r) * dw[0] + p[1] * p[2] / rr * dw[1] + p[0] / r * dw[2],
        );
        next.push(p[2] + lin * p[2] * dt + p0 * p[2] / (m * big_r) * dw[0] - r / big_r * dw[1]);
    }
    Ok(CartesianState {
        p: CartesianMomentum::new(next_p0, next),
        t: state.t + dt,
    })
}

pub(crate) fn draw_increments<R: Rng + ?Sized>(rng: &mut R, dt: f64, out: &mut [f64]) {
    let scale = dt.sqrt();
    for x in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = z * scale;
    }
}

pub fn simulate_cartesian_path<R: Rng + ?Sized>(
    init: &CartesianMomentum,
    spec: &RadialDriftSpec,
    cfg: &StepConfig,
    rng: &mut R,
    scheme: CartesianScheme,
) -> Result<Vec<CartesianMomentum>> {
    let CartesianScheme::Euler = scheme;
    cfg.validate()?;
    let m = spec.params.m();
    let scale = (init.p0 * init.p0).max(m * m);
    if init.shell_defect(m).abs() > 1e-6 * scale {
        return Err(Error::Domain("initial point is off the mass shell".into()));
    }
    let n = cfg.n_steps();
    let mut state = CartesianState::new(init.clone());
    let mut dw = vec![0.0; spec.params.d()];
    let mut out = Vec::with_capacity(n + 1);
    out.push(state.p.clone());
    for _ in 0..n {
        draw_increments(rng, cfg.dt, &mut dw);
        state = cartesian_step(&state, spec, cfg.dt, &dw)?;
        out.push(state.p.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ModelParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(d: usize, gamma: f64) -> RadialDriftSpec {
        RadialDriftSpec::for_params(ModelParams::new(d, 1.0, gamma).unwrap())
    }

    #[test]
    fn deterministic_step_scales_by_drift() {
        let c = CartesianMomentum::new(1f64.cosh(), vec![1f64.sinh(), 0.0]);
        let dt = 1.0 / 64.0;
        let next = cartesian_step(&CartesianState::new(c.clone()), &spec(2, 0.0), dt, &[0.0, 0.0]).unwrap();
        assert!((next.p.p0 - c.p0 * (1.0 + dt)).abs() < 1e-15);
        assert!((next.p.p[0] - c.p[0] * (1.0 + dt)).abs() < 1e-15);
        assert_eq!(next.p.p[1], 0.0);
    }

    #[test]
    fn ou_drift_includes_energy_correction() {
        let c = CartesianMomentum::new(2.0, vec![3f64.sqrt(), 0.0, 0.0]);
        let dt = 0.01;
        let next = cartesian_step(&CartesianState::new(c), &spec(3, 5.0), dt, &[0.0; 3]).unwrap();
        let expect = 2.0 + ((3.0 - 5.0) / 2.0 * 2.0 + 5.0 / 4.0) * dt;
        assert!((next.p.p0 - expect).abs() < 1e-15);
    }

    #[test]
    fn apex_adjacent_state_is_singular() {
        let c = CartesianMomentum::new(1.0, vec![0.0, 0.0, 1e-12]);
        let err = cartesian_step(&CartesianState::new(c), &spec(3, 0.0), 0.01, &[0.1; 3]).unwrap_err();
        assert!(matches!(err, Error::CoordinateSingularity { .. }));
        let c = CartesianMomentum::new(1.0, vec![0.0, 0.0]);
        assert!(cartesian_step(&CartesianState::new(c), &spec(2, 0.0), 0.01, &[0.1; 2]).is_err());
    }

    #[test]
    fn rejects_other_dimensions() {
        let c = CartesianMomentum::new(2.0, vec![1.0; 4]);
        let sp = spec(4, 0.0);
        assert!(matches!(
            cartesian_step(&CartesianState::new(c), &sp, 0.01, &[0.0; 4]),
            Err(Error::UnsupportedDimension(4))
        ));
    }

    /// Mean squared one-step shell defect; Euler adds O(dt) per step in expectation.
    fn mean_step_defect(d: usize, dt: f64) -> f64 {
        let sp = spec(d, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut theta = vec![1.0; d - 1];
        theta[d - 2] = 0.5;
        let c = crate::manifold::hyp_to_cart(&crate::manifold::HyperbolicPoint::new(0.8, theta).unwrap(), &sp.params);
        let st = CartesianState::new(c);
        let mut dw = vec![0.0; d];
        let n = 20000;
        let mut acc = 0.0;
        for _ in 0..n {
            draw_increments(&mut rng, dt, &mut dw);
            acc += cartesian_step(&st, &sp, dt, &dw).unwrap().p.shell_defect(1.0);
        }
        acc / n as f64
    }

    #[test]
    fn one_step_defect_is_mean_zero_to_second_order() {
        // Drift and Itô correction cancel in expectation: E[defect] = O(dt^2).
        for d in [2, 3] {
            let coarse = mean_step_defect(d, 1e-2).abs();
            assert!(coarse < 5e-3, "d = {d}: {coarse}");
        }
    }

    #[test]
    fn path_length_and_start() {
        let sp = spec(2, 4.0);
        let cfg = StepConfig::new(1.0 / 256.0, 1.0).unwrap();
        let c = CartesianMomentum::new(1f64.cosh(), vec![1f64.sinh(), 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = simulate_cartesian_path(&c, &sp, &cfg, &mut rng, CartesianScheme::Euler).unwrap();
        assert_eq!(path.len(), 257);
        assert_eq!(path[0], c);
        let off = CartesianMomentum::new(3.0, vec![0.0, 0.0]);
        assert!(simulate_cartesian_path(&off, &sp, &cfg, &mut rng, CartesianScheme::Euler).is_err());
    }
}
