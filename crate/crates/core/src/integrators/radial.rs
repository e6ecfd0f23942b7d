//! Backward Euler–Maruyama for the radial equation.
//!
//! One step solves `F(x) = x - b(x) dt - s - dW = 0` for `x > 0`. Because `b` is
//! strictly decreasing, `F` is strictly increasing with `F(0+) = -inf`, so the
//! root is unique and positive. Newton starts from the drift-free guess
//! `max(s + dW, eps_lo)`; if it leaves the positive half-line, stalls, or ends
//! with a residual above tolerance, a bracketed Newton–bisection solve on
//! `(eps_lo, hi)` takes over.

use crate::dynamics::RadialDrift;
use crate::error::{Error, Result};

use super::StepConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPathState {
    pub s: f64,
    pub t: f64,
}

impl RadialPathState {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!("radial state must be positive, got {s}")));
        }
        Ok(Self { s, t: 0.0 })
    }
}

/// How the implicit equation was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePath {
    Newton,
    /// Newton failed (escaped the half-line, stalled, or missed tolerance) and the
    /// bracketed solve produced the root.
    BisectionRescue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BemOutcome {
    pub state: RadialPathState,
    pub path: SolvePath,
    pub newton_iterations: u32,
    pub residual: f64,
}

/// `F(x) = x - b(x) dt - s - dW`.
pub fn bem_residual<D: RadialDrift + ?Sized>(drift: &D, x: f64, s: f64, dt: f64, dw: f64) -> f64 {
    x - drift.value(x) * dt - s - dw
}

/// Residual tolerance for accepting a root; the solvers aim for `newton_tol`.
const ACCEPT_TOL: f64 = 1e-10;
const BISECTION_MAX_ITER: u32 = 400;

pub fn bem_step<D: RadialDrift + ?Sized>(
    state: &RadialPathState,
    drift: &D,
    cfg: &StepConfig,
    dw: f64,
) -> Result<RadialPathState> {
    bem_step_detailed(state, drift, cfg, dw).map(|o| o.state)
}

pub fn bem_step_detailed<D: RadialDrift + ?Sized>(
    state: &RadialPathState,
    drift: &D,
    cfg: &StepConfig,
    dw: f64,
) -> Result<BemOutcome> {
    let (s, dt) = (state.s, cfg.dt);
    if !(s > 0.0) {
        return Err(Error::Contract(format!("bem_step entered with s = {s}")));
    }
    let f = |x: f64| bem_residual(drift, x, s, dt, dw);
    let fprime = |x: f64| 1.0 - drift.derivative(x) * dt;
    let tol = cfg.newton_tol;

    let mut x = (s + dw).max(cfg.eps_lo);
    let mut iterations = 0;
    let mut newton_root = None;
    while iterations < cfg.newton_max_iter {
        iterations += 1;
        let fx = f(x);
        if !fx.is_finite() {
            break;
        }
        if fx.abs() <= tol {
            newton_root = Some(x);
            break;
        }
        let next = x - fx / fprime(x);
        if !(next.is_finite() && next > 0.0) {
            break;
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() {
            if f(next).abs() <= ACCEPT_TOL {
                newton_root = Some(next);
            }
            break;
        }
        x = next;
    }

    let (root, path) = match newton_root {
        Some(r) => (r, SolvePath::Newton),
        None => (
            bracketed_solve(&f, &fprime, drift, s, dw, cfg)?,
            SolvePath::BisectionRescue,
        ),
    };
    let residual = f(root);
    if !(root > 0.0) || residual.abs() > ACCEPT_TOL {
        return Err(Error::IntegratorFailure {
            s,
            dw,
            reason: format!("accepted root {root} has residual {residual:e}"),
        });
    }
    debug_assert!(fprime(root) > 0.0);
    Ok(BemOutcome {
        state: RadialPathState {
            s: root,
            t: state.t + dt,
        },
        path,
        newton_iterations: iterations,
        residual,
    })
}

fn bracketed_solve<D, F, G>(f: &F, fprime: &G, drift: &D, s: f64, dw: f64, cfg: &StepConfig) -> Result<f64>
where
    D: RadialDrift + ?Sized,
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut lo = cfg.eps_lo;
    // for x >= 10, b(x) <= max(b(10), 0), so F(hi) >= 10
    let drift_bound = drift.value(10.0).max(0.0);
    let mut hi = s + dw.abs() + drift_bound * cfg.dt + 10.0;

    let f_lo = f(lo);
    if !(f_lo < 0.0) {
        return Err(Error::IntegratorFailure {
            s,
            dw,
            reason: format!("no sign change: F(eps_lo) = {f_lo:e} >= 0"),
        });
    }
    let mut f_hi = f(hi);
    let mut expansions = 0;
    while !(f_hi > 0.0) {
        if expansions == 2 {
            return Err(Error::IntegratorFailure {
                s,
                dw,
                reason: format!("no sign change on (eps_lo, {hi}) after expansion"),
            });
        }
        hi *= 4.0;
        f_hi = f(hi);
        expansions += 1;
    }

    // safeguarded Newton: keep the bracket, fall back to the midpoint
    let mut x = 0.5 * (lo + hi);
    for _ in 0..BISECTION_MAX_ITER {
        let fx = f(x);
        if fx.abs() <= cfg.newton_tol {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 2.0 * f64::EPSILON * hi {
            return Ok(if f(lo).abs() < f(hi).abs() { lo } else { hi });
        }
        let newton = x - fx / fprime(x);
        x = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::RadialDriftSpec;
    use crate::manifold::ModelParams;

    struct NoDrift;
    impl RadialDrift for NoDrift {
        fn value(&self, _: f64) -> f64 {
            0.0
        }
        fn derivative(&self, _: f64) -> f64 {
            0.0
        }
    }

    /// Plain bisection on the implicit equation; independent of the stepper.
    fn bisection_oracle<D: RadialDrift>(drift: &D, s: f64, dt: f64, dw: f64) -> f64 {
        let (mut lo, mut hi) = (1e-300_f64, s + dw.abs() + 100.0);
        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if bem_residual(drift, mid, s, dt, dw) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn spec(d: usize, gamma: f64) -> RadialDriftSpec {
        RadialDriftSpec::for_params(ModelParams::new(d, 1.0, gamma).unwrap())
    }

    #[test]
    fn zero_drift_is_explicit() {
        let cfg = StepConfig::default();
        let st = RadialPathState::new(1.0).unwrap();
        let next = bem_step(&st, &NoDrift, &cfg, 0.37).unwrap();
        assert!((next.s - 1.37).abs() < 1e-15);
        assert_eq!(next.t, cfg.dt);
    }

    #[test]
    fn d2_wiener_step_matches_oracle() {
        let cfg = StepConfig::default();
        let sp = spec(2, 0.0);
        let st = RadialPathState::new(1.0).unwrap();
        let next = bem_step(&st, &sp, &cfg, 0.0).unwrap();
        let oracle = bisection_oracle(&sp, 1.0, cfg.dt, 0.0);
        assert!((next.s - oracle).abs() < 1e-13, "{} vs {oracle}", next.s);
        assert!((next.s - 1.010201).abs() < 1e-6);
    }

    #[test]
    fn singularity_repels_large_negative_increment() {
        let cfg = StepConfig::default();
        for gamma in [0.0, 4.0, 10.0, 50.0] {
            let sp = spec(3, gamma);
            let st = RadialPathState::new(0.01).unwrap();
            let f_lo = bem_residual(&sp, cfg.eps_lo, 0.01, cfg.dt, -0.1);
            assert!(f_lo < 0.0);
            let out = bem_step_detailed(&st, &sp, &cfg, -0.1).unwrap();
            assert!(out.state.s > 0.0);
            let oracle = bisection_oracle(&sp, 0.01, cfg.dt, -0.1);
            assert!((out.state.s - oracle).abs() < 1e-12 * oracle.max(1.0));
            assert!(out.residual.abs() <= 1e-10);
            assert!(1.0 - sp.derivative(out.state.s) * cfg.dt > 0.0);
        }
    }

    #[test]
    fn escapes_are_rescued() {
        // Huge negative increment from near the origin: the drift-free guess is clamped
        // to eps_lo and Newton may escape; the step must still land on the root.
        let cfg = StepConfig::default();
        let sp = spec(2, 0.0);
        let st = RadialPathState::new(1e-6).unwrap();
        for dw in [-5.0, -0.5, 3.0, 1e-9] {
            let out = bem_step_detailed(&st, &sp, &cfg, dw).unwrap();
            let oracle = bisection_oracle(&sp, 1e-6, cfg.dt, dw);
            assert!((out.state.s - oracle).abs() <= 1e-12 * oracle.max(1.0), "dw = {dw}");
        }
    }

    #[test]
    fn forced_bisection_path() {
        let cfg = StepConfig {
            newton_max_iter: 1,
            ..StepConfig::default()
        };
        let sp = spec(3, 10.0);
        let st = RadialPathState::new(0.3).unwrap();
        let out = bem_step_detailed(&st, &sp, &cfg, 0.2).unwrap();
        assert_eq!(out.path, SolvePath::BisectionRescue);
        let oracle = bisection_oracle(&sp, 0.3, cfg.dt, 0.2);
        assert!((out.state.s - oracle).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_state() {
        let cfg = StepConfig::default();
        let st = RadialPathState { s: 0.0, t: 0.0 };
        assert!(matches!(
            bem_step(&st, &spec(2, 0.0), &cfg, 0.1),
            Err(Error::Contract(_))
        ));
        assert!(RadialPathState::new(-1.0).is_err());
    }

    #[test]
    fn unbracketable_root_is_reported() {
        struct Repulsive;
        impl RadialDrift for Repulsive {
            fn value(&self, _: f64) -> f64 {
                -1e300
            }
            fn derivative(&self, _: f64) -> f64 {
                0.0
            }
        }
        let cfg = StepConfig {
            newton_max_iter: 1,
            ..StepConfig::default()
        };
        let st = RadialPathState::new(1.0).unwrap();
        assert!(matches!(
            bem_step(&st, &Repulsive, &cfg, 0.0),
            Err(Error::IntegratorFailure { .. })
        ));
    }
}
