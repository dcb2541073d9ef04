//! Catenoid profile, metric coefficients, potential and the explicit
//! zero-energy modes, evaluated on a uniform radial grid.
//!
//! The radial coordinate ρ runs over the whole line; the two ends are the two
//! asymptotically flat sheets and ρ = 0 is the neck. With ⟨ρ⟩ = √(1+ρ²) the
//! neck radius satisfies 𝔣(ρ) = ⟨ρ⟩ and everything below is closed form except
//! the axial height and its limit.

use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{self, QuadratureError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axial limit quadrature failed: {0}")]
    Quadrature(#[from] QuadratureError),
}

/// ⟨x⟩ = √(1+x²).
#[inline]
pub fn japanese(x: f64) -> f64 {
    x.hypot(1.0)
}

/// Radial volume density w(ρ) = ⟨ρ⟩³/√(1+⟨ρ⟩²).
#[inline]
pub fn weight(rho: f64) -> f64 {
    let r = japanese(rho);
    r * r * r / (1.0 + r * r).sqrt()
}

/// Divergence-form coefficient a(ρ) = ⟨ρ⟩√(1+⟨ρ⟩²).
#[inline]
pub fn flux(rho: f64) -> f64 {
    let r = japanese(rho);
    r * (1.0 + r * r).sqrt()
}

/// Inverse radial metric g^ρρ = a/w = 1 + ⟨ρ⟩⁻², the squared radial speed.
#[inline]
pub fn radial_speed_sq(rho: f64) -> f64 {
    1.0 + 1.0 / (1.0 + rho * rho)
}

/// Principal curvatures (meridian, parallel) of the surface of revolution.
pub fn principal_curvatures(rho: f64) -> (f64, f64) {
    let f = japanese(rho);
    // slope of the profile against the axis: 𝔣′² = 𝔣⁴ − 1
    let slope_sq = rho * rho * (rho * rho + 2.0);
    let parallel = 1.0 / (f * (1.0 + slope_sq).sqrt());
    (-2.0 * parallel, parallel)
}

/// |II|² = κ₁² + 2κ₂².
#[inline]
pub fn potential_at(rho: f64) -> f64 {
    let (k1, k2) = principal_curvatures(rho);
    k1 * k1 + 2.0 * k2 * k2
}

/// Radial factor ⟨ρ⟩⁻² of the translation zero modes.
#[inline]
pub fn translation_mode(rho: f64) -> f64 {
    1.0 / (1.0 + rho * rho)
}

/// Odd zero-energy solution ρ√(⟨ρ⟩²+1)/⟨ρ⟩², asymptotic to ±1.
#[inline]
pub fn odd_mode(rho: f64) -> f64 {
    let r2 = 1.0 + rho * rho;
    rho * (r2 + 1.0).sqrt() / r2
}

/// dZ/dρ = 1/(⟨ρ⟩√(⟨ρ⟩²+1)), the axial height gradient.
#[inline]
pub fn height_gradient(rho: f64) -> f64 {
    let r = japanese(rho);
    1.0 / (r * (r * r + 1.0).sqrt())
}

/// Uniform grid on [−ρ_max, ρ_max] with ρ = 0 as the centre node. Nodes are
/// stored as integer multiples of the spacing so two grids with equal spacing
/// agree bit-for-bit on their common nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialGrid {
    rho_max: f64,
    n_points: usize,
    spacing: f64,
}

pub const MIN_POINTS: usize = 33;

impl RadialGrid {
    pub fn new(rho_max: f64, n_points: usize) -> Result<Self, GeometryError> {
        if !(rho_max.is_finite() && rho_max > 0.0) {
            return Err(GeometryError::InvalidGrid(format!(
                "rho_max must be positive and finite, got {rho_max}"
            )));
        }
        if n_points < MIN_POINTS || n_points % 2 == 0 {
            return Err(GeometryError::InvalidGrid(format!(
                "n_points must be odd and >= {MIN_POINTS}, got {n_points}"
            )));
        }
        Ok(RadialGrid {
            rho_max,
            n_points,
            spacing: 2.0 * rho_max / (n_points - 1) as f64,
        })
    }

    /// Grid with the given spacing; ρ_max is rounded to a whole number of steps.
    pub fn with_spacing(rho_max: f64, spacing: f64) -> Result<Self, GeometryError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(GeometryError::InvalidGrid(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        let half = (rho_max / spacing).round();
        if !(half.is_finite() && half >= ((MIN_POINTS - 1) / 2) as f64) {
            return Err(GeometryError::InvalidGrid(format!(
                "rho_max {rho_max} too small for spacing {spacing}"
            )));
        }
        Ok(RadialGrid {
            rho_max: half * spacing,
            n_points: 2 * half as usize + 1,
            spacing,
        })
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn center(&self) -> usize {
        (self.n_points - 1) / 2
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.spacing
    }

    /// Midpoint between nodes i and i+1.
    #[inline]
    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64 + 0.5) * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.n_points - 1).map(|i| self.midpoint(i)).collect()
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_points).map(|i| f(self.node(i))).collect()
    }

    /// Same interval, half the spacing.
    pub fn refined(&self) -> RadialGrid {
        RadialGrid {
            rho_max: self.rho_max,
            n_points: 2 * self.n_points - 1,
            spacing: 0.5 * self.spacing,
        }
    }

    /// Index of the node closest to ρ (clamped to the grid).
    pub fn nearest(&self, rho: f64) -> usize {
        let k = (rho / self.spacing).round() + self.center() as f64;
        k.clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Neck radius and axial height along the grid.
#[derive(Debug, Clone, Serialize)]
pub struct CatenoidProfile {
    pub f_values: Vec<f64>,
    pub z_values: Vec<f64>,
    /// Half-separation of the asymptotic planes, ∫₁^∞ d𝔣/√(𝔣⁴−1).
    pub s: f64,
    /// The same integral with radicand 𝔣⁴+1, kept for comparison.
    pub s_plus_radicand: f64,
    spacing: f64,
}

const AXIAL_SPLIT: f64 = 16.0;

/// Tail ∫_F^∞ 𝔣⁻²(1 ∓ 𝔣⁻⁴)^{-1/2} d𝔣 by its binomial series; `sign` = −1 for
/// the radicand 𝔣⁴−1 and +1 for 𝔣⁴+1.
fn axial_tail(big_f: f64, sign: f64) -> f64 {
    let mut coef = 1.0;
    let mut total = 0.0;
    let x = big_f.powi(-4);
    let mut xk = 1.0 / big_f;
    for k in 0..40 {
        let term = coef * xk / (1.0 + 4.0 * k as f64);
        total += term;
        if term.abs() < 1e-19 {
            break;
        }
        let kf = k as f64;
        coef *= -sign * (2.0 * kf + 1.0) / (2.0 * kf + 2.0);
        xk *= x;
    }
    total
}

/// ∫₁^∞ d𝔣/√(𝔣⁴−1). The inverse-square-root singularity at 𝔣 = 1 is removed
/// by 𝔣 = 1 + u².
pub fn asymptotic_half_separation() -> Result<f64, GeometryError> {
    let core = quadrature::integrate(
        |u| {
            let v = 1.0 + u * u;
            2.0 / ((2.0 + u * u) * (v * v + 1.0)).sqrt()
        },
        0.0,
        (AXIAL_SPLIT - 1.0).sqrt(),
        Tolerance::new(1e-15, 1e-12),
    )?;
    Ok(core + axial_tail(AXIAL_SPLIT, -1.0))
}

/// ∫₁^∞ d𝔣/√(𝔣⁴+1).
pub fn half_separation_plus_radicand() -> Result<f64, GeometryError> {
    let core = quadrature::integrate(
        |f| 1.0 / (f * f * f * f + 1.0).sqrt(),
        1.0,
        AXIAL_SPLIT,
        Tolerance::new(1e-15, 1e-12),
    )?;
    Ok(core + axial_tail(AXIAL_SPLIT, 1.0))
}

/// Builds the profile: 𝔣 = ⟨ρ⟩ in closed form, the axial height by a
/// cumulative trapezoid of dZ/dρ outward from the neck, odd by construction.
pub fn solve_profile(grid: &RadialGrid) -> Result<CatenoidProfile, GeometryError> {
    let n = grid.len();
    let c = grid.center();
    let h = grid.spacing();
    let f_values = grid.sample(japanese);
    let mut z_values = vec![0.0; n];
    let mut acc = 0.0;
    let mut prev = height_gradient(0.0);
    for k in 1..=c {
        let next = height_gradient(grid.node(c + k));
        acc += 0.5 * h * (prev + next);
        prev = next;
        z_values[c + k] = acc;
        z_values[c - k] = -acc;
    }
    Ok(CatenoidProfile {
        f_values,
        z_values,
        s: asymptotic_half_separation()?,
        s_plus_radicand: half_separation_plus_radicand()?,
        spacing: h,
    })
}

impl CatenoidProfile {
    /// max |𝔣²/√(1+𝔣′²) − 1| with 𝔣′ = d𝔣/dZ taken by centred differences of
    /// the stored samples (interior nodes only).
    pub fn first_integral_residual(&self) -> f64 {
        let n = self.f_values.len();
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            let df = self.f_values[i + 1] - self.f_values[i - 1];
            let dz = self.z_values[i + 1] - self.z_values[i - 1];
            let slope = df / dz;
            let f = self.f_values[i];
            worst = worst.max((f * f / (1.0 + slope * slope).sqrt() - 1.0).abs());
        }
        worst
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

/// Same residual from the closed forms 𝔣 = ⟨ρ⟩, 𝔣′² = 𝔣⁴ − 1.
pub fn first_integral_residual_closed(grid: &RadialGrid) -> f64 {
    (0..grid.len())
        .map(|i| {
            let rho = grid.node(i);
            let f = japanese(rho);
            let slope_sq = rho * rho * (rho * rho + 2.0);
            (f * f / (1.0 + slope_sq).sqrt() - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricData {
    pub weight: Vec<f64>,
    pub flux: Vec<f64>,
    pub inv_rho2: Vec<f64>,
}

pub fn metric_data(grid: &RadialGrid) -> MetricData {
    MetricData {
        weight: grid.sample(weight),
        flux: grid.sample(flux),
        inv_rho2: grid.sample(translation_mode),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PotentialData {
    pub values: Vec<f64>,
}

pub fn potential(grid: &RadialGrid) -> PotentialData {
    PotentialData {
        values: grid.sample(potential_at),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecialModes {
    pub nu0: Vec<f64>,
    pub phi_odd: Vec<f64>,
    pub phi_even: Vec<f64>,
    pub z_prime: Vec<f64>,
}

/// Even zero-energy solution from the height Z and its gradient.
pub fn even_mode(rho: f64, z: f64) -> f64 {
    let r = japanese(rho);
    let zp = height_gradient(rho);
    let num = r * zp - rho / r * z;
    let den = zp / (r * r) + rho * rho * (r * r + 1.0).sqrt() / (r * r * r);
    num / den
}

pub fn special_modes(grid: &RadialGrid) -> Result<SpecialModes, GeometryError> {
    Ok(special_modes_with(grid, &solve_profile(grid)?))
}

pub fn special_modes_with(grid: &RadialGrid, profile: &CatenoidProfile) -> SpecialModes {
    SpecialModes {
        nu0: grid.sample(translation_mode),
        phi_odd: grid.sample(odd_mode),
        phi_even: (0..grid.len())
            .map(|i| even_mode(grid.node(i), profile.z_values[i]))
            .collect(),
        z_prime: grid.sample(height_gradient),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(RadialGrid::new(10.0, 32).is_err());
        assert!(RadialGrid::new(10.0, 31).is_err());
        assert!(RadialGrid::new(-1.0, 101).is_err());
        assert!(RadialGrid::new(10.0, 101).is_ok());
    }

    #[test]
    fn grid_centre_is_exact_zero() {
        let g = RadialGrid::new(7.3, 99).unwrap();
        assert_eq!(g.node(g.center()), 0.0);
        assert_eq!(g.node(0), -g.node(g.len() - 1));
        assert!((g.node(g.len() - 1) - 7.3).abs() < 1e-12);
    }

    #[test]
    fn equal_spacing_grids_share_nodes_bitwise() {
        let a = RadialGrid::with_spacing(20.0, 0.05).unwrap();
        let b = RadialGrid::with_spacing(40.0, 0.05).unwrap();
        let off = b.center() - a.center();
        for i in 0..a.len() {
            assert_eq!(a.node(i).to_bits(), b.node(i + off).to_bits());
        }
    }

    #[test]
    fn neck_values() {
        assert_eq!(weight(0.0), 1.0 / 2f64.sqrt());
        assert_eq!(flux(0.0), 2f64.sqrt());
        assert_eq!(potential_at(0.0), 6.0);
        assert_eq!(odd_mode(0.0), 0.0);
        assert_eq!(translation_mode(0.0), 1.0);
        assert!((even_mode(0.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tail_series_matches_direct_quadrature() {
        let direct = quadrature::integrate(
            |f| 1.0 / (f.powi(4) - 1.0).sqrt(),
            16.0,
            1e4,
            Tolerance::new(1e-16, 1e-13),
        )
        .unwrap()
            + 1e-4;
        assert!((axial_tail(16.0, -1.0) - direct).abs() < 1e-12);
    }
}
