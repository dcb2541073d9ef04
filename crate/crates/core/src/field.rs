//! Angular sectors and per-sector radial profiles.
//!
//! Profiles are coefficients against a real orthonormal basis of spherical
//! harmonics, so the angular integral of a product of two fields is the sum of
//! products of matching profiles.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Real spherical-harmonic index: degree `ell`, member `m` in 0..=2ℓ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sector {
    pub ell: u32,
    pub m: u32,
}

impl Sector {
    pub const fn new(ell: u32, m: u32) -> Self {
        Sector { ell, m }
    }

    pub const RADIAL: Sector = Sector::new(0, 0);

    /// The three ℓ = 1 members, matched to the ambient coordinate directions.
    pub fn translations() -> [Sector; 3] {
        [Sector::new(1, 0), Sector::new(1, 1), Sector::new(1, 2)]
    }

    pub fn is_valid(&self) -> bool {
        self.m <= 2 * self.ell
    }

    /// ℓ(ℓ+1).
    pub fn angular_eigenvalue(&self) -> f64 {
        let l = self.ell as f64;
        l * (l + 1.0)
    }
}

impl std::fmt::Display for Sector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.ell, self.m)
    }
}

/// Profile of a purely radial function in the (0,0) sector: √(4π)·f.
pub const RADIAL_FACTOR: f64 = 3.544_907_701_811_032; // √(4π)

/// Profile of ωⁱ·f in its ℓ = 1 sector: √(4π/3)·f.
pub fn direction_factor() -> f64 {
    (4.0 * PI / 3.0).sqrt()
}

/// One sector's radial profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub sector: Sector,
    pub values: Vec<f64>,
}

impl ModeField {
    pub fn new(sector: Sector, values: Vec<f64>) -> Self {
        ModeField { sector, values }
    }

    pub fn zeros(sector: Sector, n: usize) -> Self {
        ModeField {
            sector,
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> ModeField {
        ModeField::new(self.sector, self.values.iter().map(|v| c * v).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Centred first derivative with second-order one-sided ends.
pub fn gradient(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    out
}

/// Centred second derivative; ends copy their neighbours.
pub fn second_derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_factor_value() {
        assert!((RADIAL_FACTOR - (4.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let h = 0.1;
        let v: Vec<f64> = (0..20).map(|i| (i as f64 * h).powi(2)).collect();
        let g = gradient(&v, h);
        for (i, gi) in g.iter().enumerate() {
            assert!((gi - 2.0 * i as f64 * h).abs() < 1e-12);
        }
    }
}
