//! Coordinates on the mass shell and the Minkowski algebra of `R^{1+d}`.
//!
//! A shell point is written either in hyperbolic coordinates `(s, theta)`,
//! `p0 = m cosh s`, `p = m sinh s * omega(theta)`, or as a cartesian
//! [`CartesianMomentum`]. The sphere embedding `omega(theta)` is
//!
//! * `d = 2`: `(cos phi, sin phi)`;
//! * `d = 3`: `(sin t cos phi, sin t sin phi, cos t)`;
//! * `d >= 4`: the same pattern recursively, with `cos theta_1` in the last
//!   slot and the azimuth `theta_{d-1}` rotating the first two components.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Spatial dimension, mass and damping of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    d: usize,
    m: f64,
    gamma: f64,
}

impl ModelParams {
    pub fn new(d: usize, m: f64, gamma: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("space dimension must be >= 2, got {d}")));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Domain(format!("mass must be positive, got {m}")));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Domain(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(Self { d, m, gamma })
    }

    /// Unit-mass parameters, the normalization used throughout the invariant-measure formulas.
    pub fn unit_mass(d: usize, gamma: f64) -> Result<Self> {
        Self::new(d, 1.0, gamma)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.d, self.m, gamma)
    }
}

/// `(s, theta_1, ..., theta_{d-1})`. At `s = 0` the angles carry no information.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicPoint {
    pub s: f64,
    pub theta: Vec<f64>,
}

impl HyperbolicPoint {
    pub fn new(s: f64, theta: Vec<f64>) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::Domain(format!("radial coordinate must be >= 0, got {s}")));
        }
        if theta.is_empty() {
            return Err(Error::Usage("at least one angle is required (d >= 2)".into()));
        }
        let last = theta.len() - 1;
        for (k, &t) in theta.iter().enumerate() {
            let upper = if k == last { 2.0 * PI } else { PI };
            if !(0.0..=upper).contains(&t) {
                return Err(Error::Domain(format!(
                    "angle theta_{} = {t} outside [0, {upper}]",
                    k + 1
                )));
            }
        }
        Ok(Self { s, theta })
    }

    /// Point at radius `s` in the direction of the first spatial axis.
    pub fn on_first_axis(s: f64, d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("space dimension must be >= 2, got {d}")));
        }
        // omega = e_1 needs theta_1..theta_{d-2} = pi/2 and azimuth 0
        let mut theta = vec![PI / 2.0; d - 1];
        theta[d - 2] = 0.0;
        Self::new(s, theta)
    }

    pub fn dim(&self) -> usize {
        self.theta.len() + 1
    }

    pub fn omega(&self) -> UnitSpherePoint {
        UnitSpherePoint {
            omega: sphere_embedding(&self.theta),
        }
    }
}

/// `(p0, p)` with `p0^2 - |p|^2 = m^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianMomentum {
    pub p0: f64,
    pub p: Vec<f64>,
}

impl CartesianMomentum {
    pub fn new(p0: f64, p: Vec<f64>) -> Self {
        Self { p0, p }
    }

    pub fn apex(params: &ModelParams) -> Self {
        Self {
            p0: params.m(),
            p: vec![0.0; params.d()],
        }
    }

    /// Builds the shell point from a radial value and a unit direction.
    pub fn from_radial(s: f64, omega: &UnitSpherePoint, m: f64) -> Self {
        let r = m * s.sinh();
        Self {
            p0: m * s.cosh(),
            p: omega.as_slice().iter().map(|w| r * w).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn spatial_norm(&self) -> f64 {
        self.p.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `<p, p> - m^2`.
    pub fn shell_defect(&self, m: f64) -> f64 {
        self.p0 * self.p0 - self.p.iter().map(|x| x * x).sum::<f64>() - m * m
    }

    pub fn to_four_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.p.len() + 1);
        v.push(self.p0);
        v.extend_from_slice(&self.p);
        v
    }

    pub fn from_four_vector(v: &[f64]) -> Self {
        Self {
            p0: v[0],
            p: v[1..].to_vec(),
        }
    }
}

/// Unit vector in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSpherePoint {
    omega: Vec<f64>,
}

impl UnitSpherePoint {
    /// Normalizes `v`; fails on the zero vector.
    pub fn from_vector(v: Vec<f64>) -> Result<Self> {
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Domain("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(Self {
            omega: v.into_iter().map(|x| x / n).collect(),
        })
    }

    /// First basis vector `e_1` of `R^d`.
    pub fn north(d: usize) -> Self {
        let mut omega = vec![0.0; d];
        omega[0] = 1.0;
        Self { omega }
    }

    #[cfg(test)]
    pub(crate) fn from_normalized(omega: Vec<f64>) -> Self {
        Self { omega }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn norm(&self) -> f64 {
        self.omega.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Angles reproducing this direction under the embedding convention.
    pub fn angles(&self) -> Vec<f64> {
        sphere_angles(&self.omega)
    }
}

/// `a0 b0 - sum_i ai bi`.
pub fn minkowski_inner(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "four-vector dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Usage("empty four-vector".into()));
    }
    let spatial: f64 = a[1..].iter().zip(&b[1..]).map(|(x, y)| x * y).sum();
    Ok(a[0] * b[0] - spatial)
}

pub fn sphere_embedding(theta: &[f64]) -> Vec<f64> {
    let d = theta.len() + 1;
    let mut omega = vec![0.0; d];
    let mut sin_prod = 1.0;
    // polar angles fill the components from the top down
    for k in 0..d - 2 {
        omega[d - 1 - k] = sin_prod * theta[k].cos();
        sin_prod *= theta[k].sin();
    }
    let phi = theta[d - 2];
    omega[0] = sin_prod * phi.cos();
    omega[1] = sin_prod * phi.sin();
    omega
}

pub fn sphere_angles(omega: &[f64]) -> Vec<f64> {
    let d = omega.len();
    let mut theta = vec![0.0; d - 1];
    for (k, t) in theta.iter_mut().enumerate().take(d - 2) {
        let idx = d - 1 - k;
        let rest = omega[..idx].iter().map(|x| x * x).sum::<f64>().sqrt();
        *t = rest.atan2(omega[idx]);
    }
    let mut phi = omega[1].atan2(omega[0]);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    if phi >= 2.0 * PI {
        phi = 0.0;
    }
    theta[d - 2] = phi;
    theta
}

pub fn hyp_to_cart(h: &HyperbolicPoint, params: &ModelParams) -> CartesianMomentum {
    CartesianMomentum::from_radial(h.s, &h.omega(), params.m())
}

/// Inverse of [`hyp_to_cart`]; at `|p| = 0` the angles are all zero.
pub fn cart_to_hyp(c: &CartesianMomentum, params: &ModelParams) -> Result<HyperbolicPoint> {
    let m = params.m();
    if c.dim() != params.d() {
        return Err(Error::Usage(format!(
            "momentum has {} spatial components, model has d = {}",
            c.dim(),
            params.d()
        )));
    }
    let scale = (c.p0 * c.p0).max(m * m);
    if !(c.p0 > 0.0) || c.shell_defect(m).abs() > 1e-6 * scale {
        return Err(Error::Domain(format!(
            "point is off the mass shell (defect {:e})",
            c.shell_defect(m)
        )));
    }
    let r = c.spatial_norm();
    if r == 0.0 {
        return HyperbolicPoint::new(0.0, vec![0.0; params.d() - 1]);
    }
    let s = (r / m).asinh();
    let omega: Vec<f64> = c.p.iter().map(|x| x / r).collect();
    HyperbolicPoint::new(s, sphere_angles(&omega))
}

pub fn velocity_of(c: &CartesianMomentum) -> Vec<f64> {
    c.p.iter().map(|x| x / c.p0).collect()
}

/// Which generator [`apply_generator`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Wiener,
    OrnsteinUhlenbeck,
}

/// Smooth test function on `R^{1+d}` (argument `(p0, p1, ..., pd)`).
pub trait ScalarField {
    fn value(&self, x: &[f64]) -> f64;

    /// Analytic gradient and Hessian, if available; finite differences are used otherwise.
    fn derivatives(&self, _x: &[f64]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        None
    }
}

/// Adapter for closures: derivatives by central finite differences.
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64]) -> f64> ScalarField for FnField<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

#[allow(clippy::needless_range_loop)]
fn finite_difference_derivatives<F: ScalarField + ?Sized>(f: &F, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = 1e-4 * norm.max(1.0);
    let f0 = f.value(x);
    let mut y = x.to_vec();
    let eval = |y: &mut Vec<f64>, shifts: &[(usize, f64)]| {
        for &(i, dh) in shifts {
            y[i] += dh;
        }
        let v = f.value(y);
        for &(i, dh) in shifts {
            y[i] -= dh;
        }
        v
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    for i in 0..n {
        let fp = eval(&mut y, &[(i, h)]);
        let fm = eval(&mut y, &[(i, -h)]);
        grad[i] = (fp - fm) / (2.0 * h);
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = eval(&mut y, &[(i, h), (j, h)]);
            let fpm = eval(&mut y, &[(i, h), (j, -h)]);
            let fmp = eval(&mut y, &[(i, -h), (j, h)]);
            let fmm = eval(&mut y, &[(i, -h), (j, -h)]);
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    (grad, hess)
}

/// Evaluates the cartesian generator of the shell Wiener process (`d = 2, 3`), or
/// its Ornstein–Uhlenbeck version, on `f` at `c`:
///
/// ```text
/// L_d = 1/(2m^2) [ (p0^2 - m^2) d00 + sum_i (pi^2 + m^2) dii
///                  + 2 sum_{k>l} pk pl dkl + d sum_k pk dk ]
/// L_d^gamma = L_d - gamma/(2m^2) sum_k pk dk + gamma/(2 p0) d0
/// ```
pub fn apply_generator<F: ScalarField + ?Sized>(
    f: &F,
    c: &CartesianMomentum,
    params: &ModelParams,
    kind: GeneratorKind,
) -> Result<f64> {
    let d = params.d();
    if d != 2 && d != 3 {
        return Err(Error::UnsupportedDimension(d));
    }
    if c.dim() != d {
        return Err(Error::Usage(format!(
            "momentum has {} components, expected {d}",
            c.dim()
        )));
    }
    let x = c.to_four_vector();
    let (grad, hess) = f
        .derivatives(&x)
        .unwrap_or_else(|| finite_difference_derivatives(f, &x));
    let m2 = params.m() * params.m();

    let mut second = (x[0] * x[0] - m2) * hess[0][0];
    for i in 1..=d {
        second += (x[i] * x[i] + m2) * hess[i][i];
    }
    for k in 0..=d {
        for l in 0..k {
            second += 2.0 * x[k] * x[l] * hess[k][l];
        }
    }
    let radial_first: f64 = x.iter().zip(&grad).map(|(p, g)| p * g).sum();
    let mut value = (second + d as f64 * radial_first) / (2.0 * m2);
    if kind == GeneratorKind::OrnsteinUhlenbeck {
        let gamma = params.gamma();
        value += -gamma / (2.0 * m2) * radial_first + gamma / (2.0 * x[0]) * grad[0];
    }
    Ok(value)
}
