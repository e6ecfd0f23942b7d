//! Invariant laws of the relativistic Ornstein–Uhlenbeck process.
//!
//! With `m = 1` the radial coordinate is stationary under
//! `N^{-1} cosh(s)^{-gamma} sinh(s)^{d-1} ds` (for `gamma > d - 1`), where
//! `N_{d,gamma} = 1/2 B(d/2, (gamma - d + 1)/2)`. The energy `p0 = cosh s` and the
//! speed `v = tanh s` carry the pushed-forward laws with the same `N`. For `d = 3`
//! the spatial momentum and velocity components have closed-form marginals.
//!
//! For a general mass the energy and momentum-component densities are evaluated at
//! `x / m` with a Jacobian `1 / m`; radial, speed and velocity laws do not depend on `m`.

use std::f64::consts::PI;

use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::dynamics::{ln_cosh, ln_sinh};
use crate::error::{Error, Result};
use crate::manifold::ModelParams;
use crate::quadrature::{integrate, integrate_real_line, integrate_to_infinity, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// Radial coordinate `s` on `[0, inf)`.
    Radial,
    /// Energy `p0` on `[m, inf)`.
    Energy,
    /// Speed `|V|` on `[0, 1]`.
    Speed,
    /// One cartesian momentum component (`d = 3`).
    MomentumComponent,
    /// One cartesian velocity component (`d = 3`).
    VelocityComponent,
    /// Density of the shell invariant law with respect to the Riemannian volume,
    /// as a function of the radial coordinate.
    ShellMeasure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

/// A named invariant density with its normalizer and support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySpec {
    kind: DensityKind,
    params: ModelParams,
    normalizer: f64,
    support: Support,
}

fn require_normalizable(params: &ModelParams) -> Result<()> {
    if params.gamma() > params.d() as f64 - 1.0 {
        Ok(())
    } else {
        Err(Error::NonNormalizable {
            d: params.d(),
            gamma: params.gamma(),
            requirement: "gamma > d - 1",
        })
    }
}

fn require_three_dim(params: &ModelParams) -> Result<()> {
    if params.d() != 3 {
        return Err(Error::UnsupportedDimension(params.d()));
    }
    if params.gamma() > 2.0 {
        Ok(())
    } else {
        Err(Error::NonNormalizable {
            d: 3,
            gamma: params.gamma(),
            requirement: "gamma > 2 for the component marginals",
        })
    }
}

/// `N_{d,gamma} = int_0^inf cosh(s)^{-gamma} sinh(s)^{d-1} ds = 1/2 B(d/2, (gamma-d+1)/2)`.
pub fn normalizer_n(params: &ModelParams) -> Result<f64> {
    require_normalizable(params)?;
    let d = params.d() as f64;
    Ok(0.5 * ln_beta(0.5 * d, 0.5 * (params.gamma() - d + 1.0)).exp())
}

/// Same integral by adaptive quadrature; the closed form's oracle.
pub fn normalizer_n_quadrature(params: &ModelParams) -> Result<f64> {
    require_normalizable(params)?;
    let (d, g) = (params.d() as f64, params.gamma());
    let f = |s: f64| {
        if s == 0.0 {
            0.0
        } else {
            ((d - 1.0) * ln_sinh(s) - g * ln_cosh(s)).exp()
        }
    };
    Ok(integrate_to_infinity(f, 0.0, tight())?.value)
}

/// `n_gamma = int (1 + p^2)^{-(gamma-1)/2} dp = sqrt(pi) Gamma((gamma-2)/2) / Gamma((gamma-1)/2)`.
pub fn normalizer_momentum_component(params: &ModelParams) -> Result<f64> {
    require_three_dim(params)?;
    let g = params.gamma();
    Ok(PI.sqrt() * (ln_gamma(0.5 * (g - 2.0)) - ln_gamma(0.5 * (g - 1.0))).exp())
}

pub fn normalizer_momentum_component_quadrature(params: &ModelParams) -> Result<f64> {
    require_three_dim(params)?;
    let g = params.gamma();
    Ok(integrate_real_line(|p: f64| (1.0 + p * p).powf(-0.5 * (g - 1.0)), tight())?.value)
}

/// `Gamma(gamma) / (2^{gamma-1} Gamma(gamma/2)^2)`, the symmetric Beta(gamma/2, gamma/2)
/// constant on `[-1, 1]`.
pub fn velocity_component_constant(gamma: f64) -> f64 {
    (ln_gamma(gamma) - (gamma - 1.0) * std::f64::consts::LN_2 - 2.0 * ln_gamma(0.5 * gamma)).exp()
}

/// `coef * ln_base` with the convention `0 * ln 0 = 0`.
fn scaled_log(coef: f64, ln_base: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * ln_base
    }
}

fn tight() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_intervals: 8000,
    }
}

pub fn density_radial(params: &ModelParams, s: f64) -> Result<f64> {
    DensitySpec::new(DensityKind::Radial, *params)?.density(s)
}

pub fn density_energy(params: &ModelParams, p0: f64) -> Result<f64> {
    DensitySpec::new(DensityKind::Energy, *params)?.density(p0)
}

pub fn density_speed(params: &ModelParams, v: f64) -> Result<f64> {
    DensitySpec::new(DensityKind::Speed, *params)?.density(v)
}

pub fn density_momentum_component(params: &ModelParams, p: f64) -> Result<f64> {
    DensitySpec::new(DensityKind::MomentumComponent, *params)?.density(p)
}

pub fn density_velocity_component(params: &ModelParams, v: f64) -> Result<f64> {
    DensitySpec::new(DensityKind::VelocityComponent, *params)?.density(v)
}

/// Whether the speed density fails to vanish at `v = 1` (`gamma <= d + 1`): the
/// stationary particle then approaches the speed of light with non-negligible weight.
pub fn speed_density_reaches_light_speed(params: &ModelParams) -> bool {
    params.gamma() <= params.d() as f64 + 1.0
}

/// Checks that `(d/ds - (d-1) coth s + gamma tanh s)` annihilates the unnormalized
/// radial density `sinh(s)^{d-1} cosh(s)^{-gamma}`, with the derivative taken by a
/// central difference of step `1e-5`.
pub fn adjoint_residual(params: &ModelParams, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("adjoint residual needs s > 0, got {s}")));
    }
    Ok(adjoint_residual_of(params, s, |x| {
        ((params.d() as f64 - 1.0) * ln_sinh(x) - params.gamma() * ln_cosh(x)).exp()
    }))
}

/// The same first-order operator applied to an arbitrary candidate density.
pub fn adjoint_residual_of<F: Fn(f64) -> f64>(params: &ModelParams, s: f64, f: F) -> f64 {
    let h = 1e-5;
    let deriv = (f(s + h) - f(s - h)) / (2.0 * h);
    let k = params.d() as f64 - 1.0;
    deriv - k / s.tanh() * f(s) + params.gamma() * s.tanh() * f(s)
}

impl DensitySpec {
    pub fn new(kind: DensityKind, params: ModelParams) -> Result<Self> {
        let m = params.m();
        let (normalizer, support) = match kind {
            DensityKind::Radial => (
                normalizer_n(&params)?,
                Support {
                    lo: 0.0,
                    hi: f64::INFINITY,
                },
            ),
            DensityKind::Energy => (
                normalizer_n(&params)?,
                Support {
                    lo: m,
                    hi: f64::INFINITY,
                },
            ),
            DensityKind::Speed => (normalizer_n(&params)?, Support { lo: 0.0, hi: 1.0 }),
            DensityKind::ShellMeasure => {
                let d = params.d() as f64;
                let sphere_area = 2.0 * PI.powf(0.5 * d) / ln_gamma(0.5 * d).exp();
                (
                    normalizer_n(&params)? * sphere_area,
                    Support {
                        lo: 0.0,
                        hi: f64::INFINITY,
                    },
                )
            }
            DensityKind::MomentumComponent => (
                normalizer_momentum_component(&params)?,
                Support {
                    lo: f64::NEG_INFINITY,
                    hi: f64::INFINITY,
                },
            ),
            DensityKind::VelocityComponent => {
                require_three_dim(&params)?;
                (
                    1.0 / velocity_component_constant(params.gamma()),
                    Support { lo: -1.0, hi: 1.0 },
                )
            }
        };
        Ok(Self {
            kind,
            params,
            normalizer,
            support,
        })
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Normalizing constant the unnormalized density is divided by.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn support(&self) -> Support {
        self.support
    }

    /// Lebesgue density at `x` (zero outside the support).
    pub fn density(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(Error::Domain("density evaluated at NaN".into()));
        }
        if !self.support.contains(x) {
            return Ok(0.0);
        }
        let d = self.params.d() as f64;
        let g = self.params.gamma();
        let m = self.params.m();
        let n = self.normalizer;
        let value = match self.kind {
            DensityKind::Radial => {
                if x == 0.0 {
                    0.0
                } else {
                    ((d - 1.0) * ln_sinh(x) - g * ln_cosh(x)).exp() / n
                }
            }
            DensityKind::Energy => {
                let u = x / m;
                let base = (u * u - 1.0).max(0.0);
                (-g * u.ln() + scaled_log(0.5 * (d - 2.0), base.ln())).exp() / n / m
            }
            DensityKind::Speed => {
                if x == 0.0 {
                    0.0
                } else {
                    ((d - 1.0) * x.ln() + scaled_log(0.5 * (g - d - 1.0), (-x * x).ln_1p())).exp() / n
                }
            }
            DensityKind::ShellMeasure => (-g * ln_cosh(x)).exp() / n,
            DensityKind::MomentumComponent => {
                let u = x / m;
                (-0.5 * (g - 1.0) * (u * u).ln_1p()).exp() / n / m
            }
            DensityKind::VelocityComponent => ((0.5 * g - 1.0) * (-x * x).ln_1p()).exp() / n,
        };
        Ok(value)
    }

    /// Lower support end used as the integration origin of the CDF.
    fn cdf_origin(&self) -> Result<f64> {
        match self.kind {
            DensityKind::ShellMeasure => Err(Error::Usage(
                "the shell measure is a density on the shell, not a law on the line".into(),
            )),
            DensityKind::MomentumComponent => Ok(0.0),
            _ => Ok(self.support.lo),
        }
    }

    /// `int_{lo}^{x} density`, by adaptive quadrature from the lower support end
    /// (from the center for the symmetric momentum component).
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let origin = self.cdf_origin()?;
        if x.is_nan() {
            return Err(Error::Domain("cdf evaluated at NaN".into()));
        }
        if x <= self.support.lo {
            return Ok(0.0);
        }
        if x >= self.support.hi {
            return Ok(1.0);
        }
        let f = |u: f64| self.density(u).unwrap_or(0.0);
        let value = if self.kind == DensityKind::MomentumComponent {
            0.5 + integrate(f, origin, x, tight())?.value
        } else {
            integrate(f, origin, x, tight())?.value
        };
        Ok(value.clamp(0.0, 1.0))
    }

    /// CDF values at every point of an ascending slice, integrating piecewise
    /// between consecutive points.
    pub fn cdf_sorted(&self, xs: &[f64]) -> Result<Vec<f64>> {
        self.cdf_origin()?;
        if xs.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Usage("cdf_sorted expects ascending input".into()));
        }
        let f = |u: f64| self.density(u).unwrap_or(0.0);
        let mut out = Vec::with_capacity(xs.len());
        let mut prev: Option<(f64, f64)> = None;
        for &x in xs {
            let value = if x <= self.support.lo {
                0.0
            } else if x >= self.support.hi {
                1.0
            } else {
                match prev {
                    Some((px, pv)) if px > self.support.lo => pv + integrate(f, px, x, tight())?.value,
                    _ => self.cdf(x)?,
                }
            };
            let value = value.clamp(0.0, 1.0);
            if x > self.support.lo && x < self.support.hi {
                prev = Some((x, value));
            }
            out.push(value);
        }
        Ok(out)
    }

    /// Total mass by quadrature over the support.
    pub fn total_mass(&self) -> Result<f64> {
        let f = |u: f64| self.density(u).unwrap_or(0.0);
        let r = match self.kind {
            DensityKind::MomentumComponent => integrate_real_line(f, tight())?,
            DensityKind::ShellMeasure => {
                // volume element sinh^{d-1} ds times the sphere area
                let d = self.params.d() as f64;
                let area = 2.0 * PI.powf(0.5 * d) / ln_gamma(0.5 * d).exp();
                let (gamma, n) = (self.params.gamma(), self.normalizer);
                let g = |s: f64| {
                    if s == 0.0 {
                        0.0
                    } else {
                        ((d - 1.0) * ln_sinh(s) - gamma * ln_cosh(s)).exp() * area / n
                    }
                };
                integrate_to_infinity(g, 0.0, tight())?
            }
            _ if self.support.is_bounded() => integrate(f, self.support.lo, self.support.hi, tight())?,
            _ => integrate_to_infinity(f, self.support.lo, tight())?,
        };
        Ok(r.value)
    }

    /// `x` with `cdf(x) = q`, by bisection on the CDF.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("quantile level {q} outside [0, 1]")));
        }
        let (mut lo, mut hi) = (self.support.lo, self.support.hi);
        if !lo.is_finite() {
            lo = -1.0;
            while self.cdf(lo)? > q {
                lo *= 2.0;
            }
        }
        if !hi.is_finite() {
            hi = lo.max(0.0) + 1.0;
            while self.cdf(hi)? < q {
                hi = 2.0 * hi - lo.min(0.0) + 1.0;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid)? < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `E[X^k]` by quadrature; errors when the moment is infinite.
    pub fn moment(&self, k: u32) -> Result<f64> {
        let d = self.params.d() as f64;
        let g = self.params.gamma();
        let kf = f64::from(k);
        let finite = match self.kind {
            DensityKind::Energy => kf < g - d + 1.0,
            DensityKind::MomentumComponent => kf < g - 2.0,
            DensityKind::ShellMeasure => {
                return Err(Error::Usage("moments are defined for line densities only".into()))
            }
            _ => true,
        };
        if !finite {
            return Err(Error::InfiniteMoment { order: k });
        }
        let f = |u: f64| {
            let p = self.density(u).unwrap_or(0.0);
            if p == 0.0 {
                0.0
            } else {
                u.powi(k as i32) * p
            }
        };
        let r = match self.kind {
            DensityKind::MomentumComponent => integrate_real_line(f, tight())?,
            _ if self.support.is_bounded() => integrate(f, self.support.lo, self.support.hi, tight())?,
            _ => integrate_to_infinity(f, self.support.lo, tight())?,
        };
        Ok(r.value)
    }
}
