//! Time stepping for the radial, sphere and cartesian equations, and the
//! ensemble runner.

mod cartesian;
mod ensemble;
mod radial;
mod skew;
mod sphere;

pub use cartesian::{cartesian_step, simulate_cartesian_path, CartesianScheme, CartesianState};
pub use ensemble::{
    path_rng, run_ensemble, EnsembleSummary, Observable, PathDiagnostics, PathEnsemble, PathRecord, ProcessKind,
    RecordMode,
};
pub use radial::{bem_residual, bem_step, bem_step_detailed, BemOutcome, RadialPathState, SolvePath};
pub use skew::{simulate_momentum_path, skew_step, SkewState, SkewStepInfo};
pub use sphere::{angular_step_d2, sphere_step};

use crate::error::{Error, Result};

/// Time grid and implicit-solver controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: u32,
    /// Lower end of the bisection bracket.
    pub eps_lo: f64,
    /// Largest sphere-clock increment taken in one projected step; bigger clock
    /// increments are split into equal sub-steps.
    pub max_sphere_substep: f64,
}

/// Upper bound on sphere sub-steps per time step.
pub const MAX_SPHERE_SUBSTEPS: usize = 256;

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 64.0,
            t_end: 100.0,
            newton_tol: 1e-12,
            newton_max_iter: 50,
            eps_lo: 1e-12,
            max_sphere_substep: 0.25,
        }
    }
}

impl StepConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Usage(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Usage(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::Usage(
                "newton tolerance and iteration cap must be positive".into(),
            ));
        }
        if !(self.eps_lo > 0.0) || !(self.max_sphere_substep > 0.0) {
            return Err(Error::Usage("eps_lo and max_sphere_substep must be positive".into()));
        }
        Ok(())
    }

    /// `ceil(t_end / dt)`, tolerant of `t_end` being an exact multiple of `dt`.
    pub fn n_steps(&self) -> usize {
        let ratio = self.t_end / self.dt;
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    pub fn time_at(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_count() {
        assert_eq!(StepConfig::default().n_steps(), 6400);
        assert_eq!(StepConfig::new(0.3, 1.0).unwrap().n_steps(), 4);
        assert_eq!(StepConfig::new(0.1, 1.0).unwrap().n_steps(), 10);
        assert!(StepConfig::new(0.0, 1.0).is_err());
        assert!(StepConfig::new(0.1, -1.0).is_err());
    }
}
