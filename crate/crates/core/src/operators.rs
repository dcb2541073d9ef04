//! Per-sector radial operators H_ℓ = w⁻¹∂_ρ(a∂_ρ·) − ℓ(ℓ+1)⟨ρ⟩⁻² + V, their
//! spectra, and the dyadic weighted norms used in the coercivity probes.

mod coercivity;
mod norms;

pub use coercivity::{coercivity_probe, CoercivityContext, CoercivityReport, CoercivitySample};
pub use norms::{weighted_norm, NormExponent, WeightedNorm};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, RadialGrid};
use crate::tridiag::SymTridiag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("sector ℓ={0} has no positive eigenvalue")]
    NoPositiveEigenvalue(u32),
    #[error("matrix μ² = {matrix} and shooting μ² = {shooting} differ by {rel:e} relative (limit {limit:e})")]
    ShootingMismatch {
        matrix: f64,
        shooting: f64,
        rel: f64,
        limit: f64,
    },
    #[error("shooting could not bracket an eigenvalue near {0}")]
    ShootingBracket(f64),
    #[error("derivative order {0} exceeds the stencil order 2")]
    DerivativeOrder(u32),
    #[error("sequence exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("eigenfunction not localized: |φ| at the boundary is {0:e}")]
    NotLocalized(f64),
}

/// Coefficients of a divergence-form radial operator on a grid.
#[derive(Debug, Clone)]
pub struct Background {
    /// Volume density at nodes.
    pub weight: Vec<f64>,
    /// Flux coefficient at the n−1 midpoints.
    pub flux_mid: Vec<f64>,
    /// Zeroth-order potential at nodes.
    pub potential: Vec<f64>,
    /// Multiplier of ℓ(ℓ+1) at nodes.
    pub inv_rho2: Vec<f64>,
    /// Upper bound on √(flux/weight).
    pub max_speed: f64,
}

impl Background {
    pub fn catenoid(grid: &RadialGrid) -> Self {
        Background {
            weight: grid.sample(geometry::weight),
            flux_mid: grid.midpoints().into_iter().map(geometry::flux).collect(),
            potential: geometry::potential(grid).values,
            inv_rho2: grid.sample(geometry::translation_mode),
            max_speed: 2f64.sqrt(),
        }
    }

    /// Catenoid coefficients with the potential shifted by −(H₁ν₀)/ν₀ at
    /// interior nodes, an O(h²) change after which the three-point H₁
    /// annihilates ν₀ exactly. Without it the kernel turns into a slightly
    /// positive eigenvalue whose eigenvector decays exponentially, and the
    /// remainder of ν₀ then drifts linearly in long runs.
    pub fn catenoid_kernel_exact(grid: &RadialGrid) -> Self {
        let bg = Background::catenoid(grid);
        let nu0 = grid.sample(geometry::translation_mode);
        let h1 = SectorOperator::from_background(1, grid, &bg);
        let r = h1.apply(&nu0);
        let potential = bg
            .potential
            .iter()
            .zip(r.iter().zip(&nu0))
            .map(|(v, (ri, ni))| v - ri / ni)
            .collect();
        bg.with_potential(potential)
    }

    /// The 1-D line with unit coefficients, no potential and no angular term.
    pub fn flat_line(grid: &RadialGrid) -> Self {
        let n = grid.len();
        Background {
            weight: vec![1.0; n],
            flux_mid: vec![1.0; n - 1],
            potential: vec![0.0; n],
            inv_rho2: vec![0.0; n],
            max_speed: 1.0,
        }
    }

    pub fn with_potential(mut self, potential: Vec<f64>) -> Self {
        assert_eq!(potential.len(), self.weight.len());
        self.potential = potential;
        self
    }
}

/// Three-point flux-form discretization with Dirichlet rows at ±ρ_max.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    pub ell: u32,
    grid: RadialGrid,
    weight: Vec<f64>,
    /// a_{i+½}/h² between nodes i and i+1.
    coupling: Vec<f64>,
    /// V − ℓ(ℓ+1)⟨ρ⟩⁻² at nodes.
    local: Vec<f64>,
}

/// Catenoid H_ℓ on `grid`.
pub fn assemble(ell: u32, grid: &RadialGrid) -> SectorOperator {
    SectorOperator::from_background(ell, grid, &Background::catenoid(grid))
}

impl SectorOperator {
    pub fn from_background(ell: u32, grid: &RadialGrid, bg: &Background) -> Self {
        let h2 = grid.spacing() * grid.spacing();
        let l = ell as f64;
        SectorOperator {
            ell,
            grid: grid.clone(),
            weight: bg.weight.clone(),
            coupling: bg.flux_mid.iter().map(|a| a / h2).collect(),
            local: bg
                .potential
                .iter()
                .zip(&bg.inv_rho2)
                .map(|(v, q)| v - l * (l + 1.0) * q)
                .collect(),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight.is_empty()
    }

    /// Diagonal of the (non-symmetric) matrix; zero on the Dirichlet rows.
    pub fn diag(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    0.0
                } else {
                    -(self.coupling[i] + self.coupling[i - 1]) / self.weight[i] + self.local[i]
                }
            })
            .collect()
    }

    /// (upper, lower): entries (i, i+1) and (i+1, i).
    pub fn off_diag(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let upper = (0..n - 1)
            .map(|i| if i == 0 { 0.0 } else { self.coupling[i] / self.weight[i] })
            .collect();
        let lower = (0..n - 1)
            .map(|i| {
                if i + 1 == n - 1 {
                    0.0
                } else {
                    self.coupling[i] / self.weight[i + 1]
                }
            })
            .collect();
        (upper, lower)
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(u.len(), n);
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let right = self.coupling[i] * (u[i + 1] - u[i]);
            let left = self.coupling[i - 1] * (u[i] - u[i - 1]);
            out[i] = (right - left) / self.weight[i] + self.local[i] * u[i];
        }
    }

    /// (a_{i+½}/h², w, V − ℓ(ℓ+1)q) for callers running the same stencil in
    /// another arithmetic.
    pub fn stencil(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.coupling, &self.weight, &self.local)
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(u, &mut out);
        out
    }

    /// ⟨u, v⟩_w = Σ u v w h.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        weighted_inner(u, v, &self.weight, self.grid.spacing())
    }

    /// w-norm over interior nodes only.
    pub fn interior_norm(&self, u: &[f64]) -> f64 {
        let n = self.len();
        let h = self.grid.spacing();
        (1..n - 1)
            .map(|i| u[i] * u[i] * self.weight[i] * h)
            .sum::<f64>()
            .sqrt()
    }

    /// Σ a (∂u)² h + ℓ(ℓ+1)Σ⟨ρ⟩⁻² u² w h − Σ V u² w h, i.e. ⟨−Hu, u⟩_w for u
    /// vanishing at the ends.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        -self.inner(&self.apply(u), u)
    }

    /// The similarity D H D⁻¹ with D = diag(√(wh)), restricted to interior nodes.
    pub fn symmetrized(&self) -> SymTridiag {
        let n = self.len();
        let diag = (1..n - 1)
            .map(|i| -(self.coupling[i] + self.coupling[i - 1]) / self.weight[i] + self.local[i])
            .collect();
        let off = (1..n - 2)
            .map(|i| self.coupling[i] / (self.weight[i] * self.weight[i + 1]).sqrt())
            .collect();
        SymTridiag::new(diag, off)
    }

    pub fn top_eigenvalues(&self, k: usize) -> Vec<f64> {
        self.symmetrized().top_eigenvalues(k)
    }

    /// Top eigenpair; the eigenvector is w-normalized, zero at the ends,
    /// and positive at the centre.
    pub fn top_eigenpair(&self) -> (f64, Vec<f64>) {
        let t = self.symmetrized();
        let lam = t.top_eigenvalues(1)[0];
        let x = t.eigenvector(lam);
        let h = self.grid.spacing();
        let n = self.len();
        let mut v = vec![0.0; n];
        for i in 1..n - 1 {
            v[i] = x[i - 1] / (self.weight[i] * h).sqrt();
        }
        let c = self.grid.center();
        if v[c] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        (lam, v)
    }
}

pub fn weighted_inner(u: &[f64], v: &[f64], w: &[f64], h: f64) -> f64 {
    u.iter()
        .zip(v)
        .zip(w)
        .map(|((a, b), c)| a * b * c)
        .sum::<f64>()
        * h
}

/// Eigenvalue extrapolation from spacings h and h/2, valid for O(h²) errors.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

/// Interior residual norms of the explicit zero-energy solutions.
#[derive(Debug, Clone, Serialize)]
pub struct KernelResiduals {
    pub h1_nu0: f64,
    pub h0_phi_odd: f64,
    pub h0_phi_even: f64,
}

pub fn kernel_residuals(grid: &RadialGrid) -> Result<KernelResiduals, geometry::GeometryError> {
    let modes = geometry::special_modes(grid)?;
    let h0 = assemble(0, grid);
    let h1 = assemble(1, grid);
    Ok(KernelResiduals {
        h1_nu0: h1.interior_norm(&h1.apply(&modes.nu0)),
        h0_phi_odd: h0.interior_norm(&h0.apply(&modes.phi_odd)),
        h0_phi_even: h0.interior_norm(&h0.apply(&modes.phi_even)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub ell: u32,
    /// Top eigenvalues, extrapolated from spacings h and h/2, descending.
    pub eigenvalues: Vec<f64>,
    /// Top eigenvalues of the matrix on the given grid.
    pub grid_eigenvalues: Vec<f64>,
    /// Extrapolated positive eigenvalue of H₀.
    pub mu2: Option<f64>,
    /// The same eigenvalue on the given grid, i.e. the one the discrete flow sees.
    pub mu2_grid: Option<f64>,
    /// Independent value from the continuum shooting method.
    pub mu2_shooting: Option<f64>,
    /// w-normalized eigenvector of the grid matrix.
    #[serde(skip)]
    pub phi_mu: Option<Vec<f64>>,
    pub kernel_residuals: KernelResiduals,
}

impl SpectrumReport {
    pub fn mu(&self) -> Option<f64> {
        self.mu2.map(f64::sqrt)
    }

    pub fn mu_grid(&self) -> Option<f64> {
        self.mu2_grid.map(f64::sqrt)
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > threshold).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    pub top_k: usize,
    /// Relative matrix/shooting agreement demanded for μ².
    pub mu2_tolerance: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            top_k: 6,
            mu2_tolerance: 1e-6,
        }
    }
}

/// Spectrum of H_ℓ. For ℓ = 0 the positive eigenvalue is cross-checked
/// against [`continuum_eigenvalue`].
pub fn spectrum(
    ell: u32,
    grid: &RadialGrid,
    opts: SpectrumOptions,
) -> Result<SpectrumReport, OperatorError> {
    let coarse = assemble(ell, grid);
    let fine = assemble(ell, &grid.refined());
    let grid_eigenvalues = coarse.top_eigenvalues(opts.top_k);
    let fine_eigenvalues = fine.top_eigenvalues(opts.top_k);
    let eigenvalues: Vec<f64> = grid_eigenvalues
        .iter()
        .zip(&fine_eigenvalues)
        .map(|(c, f)| richardson(*c, *f))
        .collect();
    let kernel_residuals = kernel_residuals(grid).expect("closed-form grid quantities");
    let mut report = SpectrumReport {
        ell,
        eigenvalues,
        grid_eigenvalues,
        mu2: None,
        mu2_grid: None,
        mu2_shooting: None,
        phi_mu: None,
        kernel_residuals,
    };
    if ell == 0 {
        let mu2 = report.eigenvalues[0];
        if mu2 <= 0.0 {
            return Err(OperatorError::NoPositiveEigenvalue(0));
        }
        let (mu2_grid, phi) = coarse.top_eigenpair();
        let edge = phi[1].abs().max(phi[phi.len() - 2].abs());
        if edge > 1e-8 * phi[grid.center()].abs() {
            return Err(OperatorError::NotLocalized(edge));
        }
        let shot = continuum_eigenvalue(0, mu2, 40.0)?;
        let rel = (shot - mu2).abs() / mu2;
        if rel > opts.mu2_tolerance {
            return Err(OperatorError::ShootingMismatch {
                matrix: mu2,
                shooting: shot,
                rel,
                limit: opts.mu2_tolerance,
            });
        }
        report.mu2 = Some(mu2);
        report.mu2_grid = Some(mu2_grid);
        report.mu2_shooting = Some(shot);
        report.phi_mu = Some(phi);
    }
    Ok(report)
}

/// Continuum eigenvalue near `guess` of (a u′)′ = w(λ + ℓ(ℓ+1)⟨ρ⟩⁻² − V)u on the
/// line: decaying solutions are integrated in from ±`half_length` and their
/// Wronskian at ρ = 0 is driven to zero by bisection.
pub fn continuum_eigenvalue(ell: u32, guess: f64, half_length: f64) -> Result<f64, OperatorError> {
    let l = ell as f64;
    let angular = l * (l + 1.0);
    let wronskian = |lam: f64| {
        let right = integrate_inward(lam, angular, half_length);
        let left = integrate_inward(lam, angular, -half_length);
        left.0 * right.1 - right.0 * left.1
    };
    let mut lo = guess * 0.98;
    let mut hi = guess * 1.02;
    let mut wlo = wronskian(lo);
    let mut whi = wronskian(hi);
    let mut tries = 0;
    while wlo.signum() == whi.signum() {
        tries += 1;
        if tries > 8 {
            return Err(OperatorError::ShootingBracket(guess));
        }
        let span = hi - lo;
        lo = (lo - span).max(guess * 1e-3);
        hi += span;
        wlo = wronskian(lo);
        whi = wronskian(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let wm = wronskian(mid);
        if wm.signum() == wlo.signum() {
            lo = mid;
            wlo = wm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// RK4 from ρ = `start` to 0 for (y, q = a y′), started on e^{−√λ|ρ|}/|ρ|.
fn integrate_inward(lam: f64, angular: f64, start: f64) -> (f64, f64) {
    let steps = (start.abs() / 0.002).ceil() as usize;
    let ds = -start / steps as f64;
    let rhs = |rho: f64, y: f64, q: f64| {
        let coef = lam + angular * geometry::translation_mode(rho) - geometry::potential_at(rho);
        (q / geometry::flux(rho), geometry::weight(rho) * coef * y)
    };
    let r = start.abs();
    let mut y = 1.0;
    let mut q = geometry::flux(start) * (-lam.sqrt() - 1.0 / r) * start.signum();
    let mut rho = start;
    for _ in 0..steps {
        let (k1y, k1q) = rhs(rho, y, q);
        let (k2y, k2q) = rhs(rho + 0.5 * ds, y + 0.5 * ds * k1y, q + 0.5 * ds * k1q);
        let (k3y, k3q) = rhs(rho + 0.5 * ds, y + 0.5 * ds * k2y, q + 0.5 * ds * k2q);
        let (k4y, k4q) = rhs(rho + ds, y + ds * k3y, q + ds * k3q);
        y += ds / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        q += ds / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        rho += ds;
        let s = y.abs().max(1e-300);
        if s > 1e100 {
            y /= s;
            q /= s;
        }
    }
    (y, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_maps_to_potential() {
        let g = RadialGrid::new(10.0, 201).unwrap();
        let h0 = assemble(0, &g);
        let out = h0.apply(&vec![1.0; g.len()]);
        let v = geometry::potential(&g).values;
        for i in 1..g.len() - 1 {
            assert!((out[i] - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrized_spectrum_matches_matrix_action() {
        let g = RadialGrid::new(8.0, 81).unwrap();
        let op = assemble(0, &g);
        let (lam, v) = op.top_eigenpair();
        let hv = op.apply(&v);
        for i in 1..g.len() - 1 {
            assert!((hv[i] - lam * v[i]).abs() < 1e-9);
        }
        assert!((op.inner(&v, &v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_quadratic_error() {
        let exact = 2.0;
        let c = exact + 3.0 * 0.1f64.powi(2);
        let f = exact + 3.0 * 0.05f64.powi(2);
        assert!((richardson(c, f) - exact).abs() < 1e-14);
    }
}
