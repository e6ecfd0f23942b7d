//! Wiener process on the unit sphere `S^{d-1}` by projected euclidean increments.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::manifold::UnitSpherePoint;

/// One Itô step of the projected equation
/// `w+ = w + (I - w w^T) dB - (d-1)/2 w dtau`, followed by renormalization.
/// `dB` holds `d` independent `N(0, dtau)` variates.
pub fn sphere_step(omega: &UnitSpherePoint, db: &[f64], dtau: f64) -> Result<UnitSpherePoint> {
    let w = omega.as_slice();
    let d = w.len();
    if db.len() != d {
        return Err(Error::Usage(format!(
            "increment has {} components, sphere lives in R^{d}",
            db.len()
        )));
    }
    let norm = omega.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::Contract(format!("sphere point has norm {norm}")));
    }
    if !(dtau >= 0.0) {
        return Err(Error::Domain(format!(
            "sphere clock increment must be >= 0, got {dtau}"
        )));
    }
    if dtau == 0.0 {
        return Ok(omega.clone());
    }
    let radial: f64 = w.iter().zip(db).map(|(a, b)| a * b).sum();
    let pull = 0.5 * (d as f64 - 1.0) * dtau;
    let next: Vec<f64> = w
        .iter()
        .zip(db)
        .map(|(&wi, &bi)| wi + (bi - radial * wi) - pull * wi)
        .collect();
    UnitSpherePoint::from_vector(next)
}

/// Azimuthal step of the `d = 2` angular equation: a Brownian increment of the
/// angle on the sphere clock, taken modulo `2 pi`.
pub fn angular_step_d2(phi: f64, d_beta: f64) -> f64 {
    (phi + d_beta).rem_euclid(2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_clock_is_identity() {
        let w = UnitSpherePoint::from_vector(vec![0.3, -0.4, 0.5]).unwrap();
        assert_eq!(sphere_step(&w, &[1.0, 2.0, 3.0], 0.0).unwrap(), w);
    }

    #[test]
    fn d2_small_step_matches_rotation() {
        // From (1, 0) with dB = (0, h): exact angle is atan(h / (1 - h^2/2)) to leading order.
        let w = UnitSpherePoint::north(2);
        for h in [1e-2, 1e-3, 1e-4] {
            let next = sphere_step(&w, &[0.0, h], h * h).unwrap();
            let phi = next.as_slice()[1].atan2(next.as_slice()[0]);
            let rotated = angular_step_d2(0.0, h);
            assert!((phi - rotated).abs() < h * h, "h = {h}: {phi} vs {rotated}");
            assert!((next.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn renormalized_output_has_unit_norm() {
        let w = UnitSpherePoint::from_vector(vec![1.0, 2.0, -2.0, 0.5]).unwrap();
        let next = sphere_step(&w, &[0.3, -1.2, 0.8, 2.0], 0.7).unwrap();
        assert!((next.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn contract_checks() {
        let bad = UnitSpherePoint::from_normalized(vec![1.1, 0.0]);
        assert!(matches!(sphere_step(&bad, &[0.0, 0.1], 0.01), Err(Error::Contract(_))));
        let w = UnitSpherePoint::north(3);
        assert!(sphere_step(&w, &[0.0, 0.1], 0.01).is_err());
        assert!(sphere_step(&w, &[0.0, 0.1, 0.0], -0.01).is_err());
    }

    #[test]
    fn angular_step_wraps() {
        assert!((angular_step_d2(6.2, 0.2) - (6.4 - 2.0 * PI)).abs() < 1e-15);
        assert!((angular_step_d2(0.1, -0.2) - (2.0 * PI - 0.1)).abs() < 1e-15);
    }
}
