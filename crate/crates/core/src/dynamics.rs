//! Radial drift of the shell diffusions and the one-dimensional diffusion
//! analytics (scale density, scale functions, boundary classification).
//!
//! The radial coordinate solves
//!
//! ```text
//! dS = b(S) dt + (1/m) dW,   b(s) = (d-1)/(2m^2) coth s - gamma/(2m^2) tanh s
//! ```
//!
//! with `gamma = 0` for the Wiener process. The scale density
//! `rho(s) = exp(2 m^2 int_s^a b)` is free of `m`; the boundary quantities
//! below are evaluated with `m = 1`, since `m` only rescales time.

use crate::error::{Error, Result};
use crate::manifold::ModelParams;
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftKind {
    /// `gamma` is ignored (forced to zero).
    Wiener,
    OrnsteinUhlenbeck,
}

/// Scalar drift used by the implicit radial stepper.
pub trait RadialDrift {
    fn value(&self, s: f64) -> f64;
    fn derivative(&self, s: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDriftSpec {
    pub params: ModelParams,
    pub kind: DriftKind,
}

impl RadialDriftSpec {
    pub fn new(params: ModelParams, kind: DriftKind) -> Self {
        Self { params, kind }
    }

    /// Ornstein–Uhlenbeck drift when `gamma > 0`, Wiener drift otherwise.
    pub fn for_params(params: ModelParams) -> Self {
        let kind = if params.gamma() > 0.0 {
            DriftKind::OrnsteinUhlenbeck
        } else {
            DriftKind::Wiener
        };
        Self { params, kind }
    }

    pub fn gamma(&self) -> f64 {
        match self.kind {
            DriftKind::Wiener => 0.0,
            DriftKind::OrnsteinUhlenbeck => self.params.gamma(),
        }
    }

    fn half_inv_m2(&self) -> f64 {
        0.5 / (self.params.m() * self.params.m())
    }

    /// Diffusion coefficient `1/m` of the radial equation.
    pub fn diffusion(&self) -> f64 {
        1.0 / self.params.m()
    }

    /// Limit of the drift as `s -> inf`: `(d - 1 - gamma) / (2 m^2)`.
    pub fn asymptotic_drift(&self) -> f64 {
        (self.params.d() as f64 - 1.0 - self.gamma()) * self.half_inv_m2()
    }

    pub fn is_recurrent(&self) -> bool {
        self.gamma() >= self.params.d() as f64 - 1.0
    }
}

impl RadialDrift for RadialDriftSpec {
    fn value(&self, s: f64) -> f64 {
        // k coth s - gamma tanh s, written so that k = gamma does not cancel
        let k = self.params.d() as f64 - 1.0;
        self.half_inv_m2() * ((k - self.gamma()) * s.tanh() + 2.0 * k / (2.0 * s).sinh())
    }

    fn derivative(&self, s: f64) -> f64 {
        let k = self.params.d() as f64 - 1.0;
        let sh = s.sinh();
        let ch = s.cosh();
        -self.half_inv_m2() * (k / (sh * sh) + self.gamma() / (ch * ch))
    }
}

/// Checked drift evaluation.
pub fn drift(spec: &RadialDriftSpec, s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("drift requires s > 0, got {s}")));
    }
    Ok(spec.value(s))
}

/// `ln sinh(s)` for `s > 0`, stable for large `s`.
pub fn ln_sinh(s: f64) -> f64 {
    if s > 20.0 {
        s - std::f64::consts::LN_2 + (-(-2.0 * s).exp()).ln_1p()
    } else {
        s.sinh().ln()
    }
}

/// `ln cosh(s)`, stable for large `|s|`.
pub fn ln_cosh(s: f64) -> f64 {
    let a = s.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

/// `rho(s) = sinh(a)^{d-1} cosh(s)^gamma / (cosh(a)^gamma sinh(s)^{d-1})`, i.e.
/// `exp(2 m^2 int_s^a b(u) du)`.
pub fn scale_density(spec: &RadialDriftSpec, s: f64, a: f64) -> Result<f64> {
    if !(s > 0.0 && a > 0.0) {
        return Err(Error::Domain(format!(
            "scale density needs s, a > 0 (s = {s}, a = {a})"
        )));
    }
    Ok(log_scale_density(spec, s, a).exp())
}

fn log_scale_density(spec: &RadialDriftSpec, s: f64, a: f64) -> f64 {
    let k = spec.params.d() as f64 - 1.0;
    let g = spec.gamma();
    k * (ln_sinh(a) - ln_sinh(s)) + g * (ln_cosh(s) - ln_cosh(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityType {
    /// Cherny–Engelbert type 3: the origin is never reached.
    Type3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfinityType {
    /// `int_a^inf rho = inf`: recurrent.
    TypeA,
    /// `int_a^inf rho < inf` and `I_inf = inf`: transient.
    TypeB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    Transient,
    Recurrent,
}

/// Numerically established boundary behavior of the radial equation.
/// Integrals that diverge are stored as `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport {
    pub singularity_type_at_zero: SingularityType,
    pub infinity_type: InfinityType,
    pub predicted_behavior: Behavior,
    pub i_a: f64,
    pub i_inf: f64,
    pub rho_integral_zero: f64,
    pub rho_integral_inf: f64,
}

/// Cutoffs for the divergence detector at infinity.
const INF_CUTOFFS: [f64; 3] = [10.0, 20.0, 40.0];
/// Inner cutoffs for the divergence detector at the origin.
const ZERO_CUTOFFS: [f64; 3] = [1e-2, 1e-4, 1e-8];
/// Endpoint exclusion for the convergent integral near the origin.
const ZERO_EXCLUSION: f64 = 1e-8;
const GROWTH_FACTOR: f64 = 1.10;

fn boundary_quad() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-9,
        max_intervals: 4000,
    }
}

/// Inner integrals of the scale functions can be tiny far out; relative accuracy only.
fn inner_quad() -> QuadOptions {
    QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-10,
        max_intervals: 4000,
    }
}

/// Treats a sequence of truncated integrals as divergent when consecutive
/// values grow by more than 10%.
fn diverges(values: &[f64]) -> bool {
    values.iter().any(|v| !v.is_finite()) || values.windows(2).all(|w| w[1] > GROWTH_FACTOR * w[0])
}

fn truncated<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    match integrate(&f, lo, hi, boundary_quad()) {
        Ok(r) => Ok(r.value),
        // overflowing integrands are divergence evidence, not a failure
        Err(Error::Quadrature { value, .. }) if !value.is_finite() => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

pub fn boundary_report(spec: &RadialDriftSpec, a: f64) -> Result<BoundaryReport> {
    if !(a > 0.0 && a <= 5.0) {
        return Err(Error::Domain(format!("boundary_report needs a in (0, 5], got {a}")));
    }
    let unit = RadialDriftSpec {
        params: ModelParams::new(spec.params.d(), 1.0, spec.params.gamma())?,
        kind: spec.kind,
    };
    let rho = |s: f64| log_scale_density(&unit, s, a).exp();

    let zero_parts = ZERO_CUTOFFS
        .iter()
        .map(|&eps| truncated(rho, eps, a))
        .collect::<Result<Vec<_>>>()?;
    let rho_integral_zero = if diverges(&zero_parts) {
        f64::INFINITY
    } else {
        zero_parts[2]
    };

    let inf_parts = INF_CUTOFFS
        .iter()
        .map(|&cut| truncated(rho, a, cut))
        .collect::<Result<Vec<_>>>()?;
    let rho_integral_inf = if diverges(&inf_parts) {
        f64::INFINITY
    } else {
        integrate_to_infinity(rho, a, boundary_quad())?.value
    };

    // kappa_a(s) = -int_s^a rho, so |kappa_a(s)| = int_s^a rho for s <= a
    let i_a_integrand = |s: f64| {
        let inner = integrate(rho, s, a, inner_quad()).map(|r| r.value).unwrap_or(f64::NAN);
        (1.0 + unit.value(s).abs()) * inner / rho(s)
    };
    let i_a = integrate(i_a_integrand, ZERO_EXCLUSION, a, boundary_quad())?.value;
    if !i_a.is_finite() {
        return Err(Error::Quadrature {
            value: i_a,
            error_estimate: f64::INFINITY,
        });
    }

    let i_inf = if rho_integral_inf.is_infinite() {
        // kappa_inf is itself infinite
        f64::INFINITY
    } else {
        let kappa_inf = |s: f64| {
            integrate_to_infinity(rho, s, inner_quad())
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        let parts = INF_CUTOFFS
            .iter()
            .map(|&cut| truncated(|s| kappa_inf(s) / rho(s), a, cut))
            .collect::<Result<Vec<_>>>()?;
        if diverges(&parts) {
            f64::INFINITY
        } else {
            parts[2]
        }
    };

    let infinity_type = if rho_integral_inf.is_infinite() {
        InfinityType::TypeA
    } else {
        InfinityType::TypeB
    };
    let predicted_behavior = match infinity_type {
        InfinityType::TypeA => Behavior::Recurrent,
        InfinityType::TypeB => Behavior::Transient,
    };
    Ok(BoundaryReport {
        singularity_type_at_zero: SingularityType::Type3,
        infinity_type,
        predicted_behavior,
        i_a,
        i_inf,
        rho_integral_zero,
        rho_integral_inf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, m: f64, gamma: f64) -> RadialDriftSpec {
        RadialDriftSpec::for_params(ModelParams::new(d, m, gamma).unwrap())
    }

    #[test]
    fn drift_examples() {
        let v = drift(&spec(2, 1.0, 0.0), 1.0).unwrap();
        assert!((v - 0.5 / 1f64.tanh()).abs() < 1e-15);
        assert!((v - 0.656518).abs() < 1e-6);

        let v = drift(&spec(3, 1.0, 10.0), 5.0).unwrap();
        assert!((v - (1.0 / 5f64.tanh() - 5.0 * 5f64.tanh())).abs() < 1e-14);
        assert!((v + 3.9996).abs() < 1e-3);

        let sp = spec(4, 1.0, 3.0);
        for s in [0.1, 1.0, 5.0, 30.0] {
            let v = drift(&sp, s).unwrap();
            assert!(v > 0.0);
            assert!((v - 1.5 * (1.0 / s.tanh() - s.tanh())).abs() < 1e-12);
        }
        assert!(drift(&sp, 40.0).unwrap() < 1e-30);
    }

    #[test]
    fn drift_domain_and_asymptotics() {
        let sp = spec(3, 2.0, 7.0);
        assert!(drift(&sp, 0.0).is_err());
        assert!(drift(&sp, -1.0).is_err());
        assert!(drift(&sp, 1e-9).unwrap() > 1e7);
        assert!((drift(&sp, 50.0).unwrap() - sp.asymptotic_drift()).abs() < 1e-12);
        assert_eq!(sp.asymptotic_drift(), (2.0 - 7.0) / 8.0);
    }

    #[test]
    fn wiener_kind_ignores_gamma() {
        let p = ModelParams::new(3, 1.0, 10.0).unwrap();
        let w = RadialDriftSpec::new(p, DriftKind::Wiener);
        assert!((w.value(1.0) - 1.0 / 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn drift_derivative_matches_finite_difference() {
        let sp = spec(3, 1.5, 6.0);
        for s in [0.05, 0.5, 2.0, 8.0] {
            let h = 1e-6 * s;
            let fd = (sp.value(s + h) - sp.value(s - h)) / (2.0 * h);
            assert!((fd - sp.derivative(s)).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn scale_density_examples() {
        assert_eq!(scale_density(&spec(3, 1.0, 4.0), 1.0, 1.0).unwrap(), 1.0);
        let v = scale_density(&spec(2, 1.0, 0.0), 2.0, 1.0).unwrap();
        assert!((v - 1f64.sinh() / 2f64.sinh()).abs() < 1e-15);
        assert!((v - 0.3240).abs() < 5e-5);
        assert!(scale_density(&spec(2, 1.0, 0.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn scale_density_is_mass_free_and_cocycle() {
        let a = spec(3, 1.0, 5.0);
        let b = spec(3, 3.0, 5.0);
        for (s, t, u) in [(0.3, 1.7, 4.0), (2.0, 0.1, 9.0)] {
            let ra = scale_density(&a, s, t).unwrap();
            assert_eq!(ra, scale_density(&b, s, t).unwrap());
            let chain = scale_density(&a, s, t).unwrap() * scale_density(&a, t, u).unwrap();
            let direct = scale_density(&a, s, u).unwrap();
            assert!((chain / direct - 1.0).abs() < 1e-10);
            let inv = scale_density(&a, s, t).unwrap() * scale_density(&a, t, s).unwrap();
            assert!((inv - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_examples() {
        let r = boundary_report(&spec(2, 1.0, 0.0), 1.0).unwrap();
        assert_eq!(r.infinity_type, InfinityType::TypeB);
        assert_eq!(r.predicted_behavior, Behavior::Transient);
        assert_eq!(r.singularity_type_at_zero, SingularityType::Type3);
        assert!(r.rho_integral_zero.is_infinite());
        assert!(r.i_a.is_finite());
        assert!(r.i_inf.is_infinite());
        // int_1^inf sinh(1)/sinh(s) ds = sinh(1) * ln(coth(1/2))
        let exact = 1f64.sinh() * (1.0 / 0.5f64.tanh()).ln();
        assert!((r.rho_integral_inf - exact).abs() < 1e-8, "{}", r.rho_integral_inf);

        let r = boundary_report(&spec(3, 1.0, 4.0), 1.0).unwrap();
        assert_eq!(r.infinity_type, InfinityType::TypeA);
        assert_eq!(r.predicted_behavior, Behavior::Recurrent);

        let r = boundary_report(&spec(3, 1.0, 2.0), 1.0).unwrap();
        assert_eq!(r.infinity_type, InfinityType::TypeA);
        assert_eq!(r.predicted_behavior, Behavior::Recurrent);
    }

    #[test]
    fn boundary_rejects_out_of_range_level() {
        assert!(boundary_report(&spec(2, 1.0, 0.0), 0.0).is_err());
        assert!(boundary_report(&spec(2, 1.0, 0.0), 6.0).is_err());
    }

    #[test]
    fn boundary_classification_grid() {
        for d in 2..=5usize {
            let k = d as f64 - 1.0;
            for gamma in [0.0, k - 1.0, k, k + 1.0, k + 3.0, 10.0] {
                let sp = spec(d, 1.0, gamma);
                let r = boundary_report(&sp, 1.0).unwrap();
                let expect = if gamma >= k {
                    InfinityType::TypeA
                } else {
                    InfinityType::TypeB
                };
                assert_eq!(r.infinity_type, expect, "d = {d}, gamma = {gamma}");
                assert_eq!(r.predicted_behavior == Behavior::Recurrent, sp.is_recurrent());
                assert!(r.rho_integral_zero.is_infinite());
                assert!(r.i_a.is_finite() && r.i_a > 0.0);
                assert!(r.i_inf.is_infinite());
            }
        }
    }
}
