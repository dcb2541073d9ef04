//! First-order intertwining for the ℓ = 1 sector.
//!
//! On the line (functions multiplied by √w) the ℓ = 1 operator factors as
//! L₁ = −D*D with D = √(g^ρρ) y₀ ∂_ρ y₀⁻¹, D* = −y₀⁻¹ ∂_ρ √(g^ρρ) y₀ and
//! y₀ = √w ν₀. The partner L₂ = −DD*, conjugated back by √w, is Δ_ρ + Ṽ.
//! Because √(g^ρρ)·w·ν₀ ≡ 1 on the catenoid, Ṽ vanishes identically; the
//! context still evaluates it from its two separately computed pieces.

use serde::Serialize;
use thiserror::Error;

use crate::evolution::le_spatial_sq;
use crate::field::{gradient, ModeField, Sector};
use crate::geometry::{self, RadialGrid};
use crate::modulation::Cutoff;
use crate::operators::{assemble, weighted_inner};
use crate::tridiag::SymTridiag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DarbouxError {
    #[error("kernel pairing ⟨ν₀, Z₀⟩ = {0:e} is too small to solve for the kernel coefficient")]
    DegeneratePairing(f64),
    #[error("expected a field of length {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

/// ν₀ ∂_ρ(ν₀⁻¹ u) with centred differences of the quotient.
pub fn rbx_profile(u: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let nu = grid.sample(geometry::translation_mode);
    let q: Vec<f64> = u.iter().zip(&nu).map(|(a, b)| a / b).collect();
    gradient(&q, grid.spacing())
        .into_iter()
        .zip(&nu)
        .map(|(d, n)| d * n)
        .collect()
}

/// Ṽ from its closed-form pieces: the potential of −DD* on the line minus the
/// potential produced by conjugating Δ_ρ with √w.
pub fn transformed_potential_at(rho: f64) -> f64 {
    let r2 = 1.0 + rho * rho;
    let r = r2.sqrt();
    let r4 = r2 * r2;
    let r6 = r4 * r2;
    let speed = (r2 + 1.0).sqrt() / r;
    let speed_sq = (r2 + 1.0) / r2;
    let speed_dd = (3.0 * r4 - 2.0 * r2 - 3.0) / (r4 * r * (r2 + 1.0).powf(1.5));
    let log_dy0_sq = (r2 - 1.0) * (2.0 * r2 + 1.0).powi(2) / (4.0 * r4 * (r2 + 1.0).powi(2));
    let log_dy0_d = (2.0 * r6 - 3.0 * r4 - 3.0 * r2 - 2.0) / (2.0 * r4 * (r2 + 1.0).powi(2));
    let partner = speed * speed_dd + speed_sq * (log_dy0_d - log_dy0_sq);
    let conjugation = -(6.0 * r4 - 11.0 * r2 - 15.0) / (4.0 * r6 * (r2 + 1.0));
    partner + conjugation
}

#[derive(Debug, Clone)]
pub struct DarbouxContext {
    grid: RadialGrid,
    pub nu0: Vec<f64>,
    pub y0: Vec<f64>,
    pub sqrt_grr_inv: Vec<f64>,
    pub transformed_potential: Vec<f64>,
    weight: Vec<f64>,
    /// √(g^ρρ) y₀ at the midpoints.
    speed_y0_mid: Vec<f64>,
}

impl DarbouxContext {
    pub fn new(grid: &RadialGrid) -> Self {
        let y0_at = |r: f64| geometry::weight(r).sqrt() * geometry::translation_mode(r);
        DarbouxContext {
            grid: grid.clone(),
            nu0: grid.sample(geometry::translation_mode),
            y0: grid.sample(y0_at),
            sqrt_grr_inv: grid.sample(|r| geometry::radial_speed_sq(r).sqrt()),
            transformed_potential: grid.sample(transformed_potential_at),
            weight: grid.sample(geometry::weight),
            speed_y0_mid: grid
                .midpoints()
                .into_iter()
                .map(|r| geometry::radial_speed_sq(r).sqrt() * y0_at(r))
                .collect(),
        }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Sectors other than ℓ = 1 pass through; ℓ = 1 maps to ν₀∂_ρ(ν₀⁻¹·).
    pub fn apply(&self, field: &ModeField) -> ModeField {
        if field.sector.ell != 1 {
            return field.clone();
        }
        ModeField::new(field.sector, rbx_profile(&field.values, &self.grid))
    }

    /// √(g^ρρ)·apply: the field on which [`DarbouxContext::invert`] acts.
    pub fn transform(&self, field: &ModeField) -> ModeField {
        let mut out = self.apply(field);
        if field.sector.ell == 1 {
            out.values
                .iter_mut()
                .zip(&self.sqrt_grr_inv)
                .for_each(|(v, s)| *v *= s);
        }
        out
    }

    /// D on the line: nodes → midpoints.
    pub fn d_line(&self, phi: &[f64]) -> Vec<f64> {
        let h = self.grid.spacing();
        (0..phi.len() - 1)
            .map(|m| self.speed_y0_mid[m] * (phi[m + 1] / self.y0[m + 1] - phi[m] / self.y0[m]) / h)
            .collect()
    }

    /// Exact adjoint of [`DarbouxContext::d_line`] for Σ·h on nodes and midpoints.
    pub fn d_star_line(&self, psi: &[f64]) -> Vec<f64> {
        let h = self.grid.spacing();
        let n = psi.len() + 1;
        (0..n)
            .map(|i| {
                let right = if i < n - 1 { self.speed_y0_mid[i] * psi[i] } else { 0.0 };
                let left = if i > 0 { self.speed_y0_mid[i - 1] * psi[i - 1] } else { 0.0 };
                -(right - left) / (self.y0[i] * h)
            })
            .collect()
    }

    /// L₁ on the line, built independently as √w H₁(·/√w).
    pub fn l1_line(&self, phi: &[f64]) -> Vec<f64> {
        let h1 = assemble(1, &self.grid);
        let u: Vec<f64> = phi.iter().zip(&self.weight).map(|(p, w)| p / w.sqrt()).collect();
        h1.apply(&u)
            .into_iter()
            .zip(&self.weight)
            .map(|(v, w)| v * w.sqrt())
            .collect()
    }

    /// max over samples of ‖L₁φ + D*Dφ‖_∞/‖φ‖_∞ on interior nodes.
    pub fn factorization_check(&self, samples: &[Vec<f64>]) -> f64 {
        let n = self.grid.len();
        samples
            .iter()
            .map(|phi| {
                let l1 = self.l1_line(phi);
                let dd = self.d_star_line(&self.d_line(phi));
                let defect = (1..n - 1).map(|i| (l1[i] + dd[i]).abs()).fold(0.0, f64::max);
                let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                defect / scale
            })
            .fold(0.0, f64::max)
    }

    /// −DD* on the midpoints, with the field vanishing beyond the end midpoints.
    pub fn transformed_operator(&self) -> TransformedOperator {
        let h2 = self.grid.spacing().powi(2);
        let s = &self.speed_y0_mid;
        let m = s.len();
        let diag = (0..m)
            .map(|k| {
                -s[k] * s[k] / h2 * (1.0 / self.y0[k + 1].powi(2) + 1.0 / self.y0[k].powi(2))
            })
            .collect();
        let off = (0..m - 1)
            .map(|k| s[k] * s[k + 1] / (h2 * self.y0[k + 1].powi(2)))
            .collect();
        TransformedOperator {
            matrix: SymTridiag::new(diag, off),
            sigma_mid: self
                .grid
                .midpoints()
                .into_iter()
                .map(|r| geometry::weight(r).sqrt())
                .collect(),
            midpoints: self.grid.midpoints(),
            spacing: self.grid.spacing(),
        }
    }

    /// max of |Ṽ|⟨ρ⟩⁴ over nodes with lo ≤ |ρ| ≤ hi.
    pub fn vtilde_decay_constant(&self, lo: f64, hi: f64) -> f64 {
        (0..self.grid.len())
            .filter(|&i| {
                let r = self.grid.node(i).abs();
                r >= lo && r <= hi
            })
            .map(|i| {
                let r = geometry::japanese(self.grid.node(i));
                self.transformed_potential[i].abs() * r.powi(4)
            })
            .fold(0.0, f64::max)
    }

    /// Z₀ = χ_R ν₀ as an ℓ = 1 profile.
    pub fn kernel_cutoff_mode(&self, r_ctf: f64) -> Vec<f64> {
        let chi = Cutoff::new(r_ctf);
        (0..self.grid.len())
            .map(|i| chi.eval(self.grid.node(i)) * self.nu0[i])
            .collect()
    }

    /// ⟨φ, Z₀⟩_w.
    pub fn pairing_datum(&self, phi: &[f64], r_ctf: f64) -> f64 {
        weighted_inner(phi, &self.kernel_cutoff_mode(r_ctf), &self.weight, self.grid.spacing())
    }

    /// Ψ = c₀ν₀ + ν₀∫₀^ρ ν₀⁻¹ u √g_ρρ, with c₀ fixed by ⟨Ψ, Z₀⟩ = datum.
    pub fn invert(&self, u: &[f64], datum: f64, r_ctf: f64) -> Result<Vec<f64>, DarbouxError> {
        let n = self.grid.len();
        if u.len() != n {
            return Err(DarbouxError::Length {
                expected: n,
                got: u.len(),
            });
        }
        let h = self.grid.spacing();
        let c = self.grid.center();
        let integrand: Vec<f64> = (0..n)
            .map(|i| u[i] / (self.nu0[i] * self.sqrt_grr_inv[i]))
            .collect();
        let mut prim = vec![0.0; n];
        for k in 1..=c {
            prim[c + k] = prim[c + k - 1] + 0.5 * h * (integrand[c + k - 1] + integrand[c + k]);
            prim[c - k] = prim[c - k + 1] - 0.5 * h * (integrand[c - k + 1] + integrand[c - k]);
        }
        let particular: Vec<f64> = prim.iter().zip(&self.nu0).map(|(p, v)| p * v).collect();
        let z0 = self.kernel_cutoff_mode(r_ctf);
        let norm = weighted_inner(&self.nu0, &z0, &self.weight, h);
        if norm.abs() < 1e-12 {
            return Err(DarbouxError::DegeneratePairing(norm));
        }
        let c0 = (datum - weighted_inner(&particular, &z0, &self.weight, h)) / norm;
        Ok(particular
            .iter()
            .zip(&self.nu0)
            .map(|(p, v)| p + c0 * v)
            .collect())
    }

    /// max|invert(transform(φ), ⟨φ,Z₀⟩) − φ| / max|φ| for an ℓ = 1 profile.
    pub fn roundtrip_error(&self, phi: &[f64], r_ctf: f64) -> Result<f64, DarbouxError> {
        let field = ModeField::new(Sector::new(1, 0), phi.to_vec());
        let u = self.transform(&field);
        let back = self.invert(&u.values, self.pairing_datum(phi, r_ctf), r_ctf)?;
        let scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(back
            .iter()
            .zip(phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale)
    }

    /// ‖⟨ρ⟩^{−(5+α)/2} invert(u, 0)‖_w / ‖u‖_{LE_x}.
    pub fn schur_ratio(&self, u: &[f64], alpha: f64, r_ctf: f64) -> Result<f64, DarbouxError> {
        let psi = self.invert(u, 0.0, r_ctf)?;
        let h = self.grid.spacing();
        let lhs: f64 = (0..psi.len())
            .map(|i| {
                let r = geometry::japanese(self.grid.node(i));
                r.powf(-(5.0 + alpha)) * psi[i] * psi[i] * self.weight[i] * h
            })
            .sum();
        let rhs = le_spatial_sq(&ModeField::new(Sector::new(1, 0), u.to_vec()), &self.grid, alpha);
        Ok((lhs / rhs).sqrt())
    }
}

/// The partner operator −DD* on the midpoint grid.
#[derive(Debug, Clone)]
pub struct TransformedOperator {
    pub matrix: SymTridiag,
    /// √w at the midpoints; σ⁻¹(−DD*)σ is Δ_ρ + Ṽ.
    pub sigma_mid: Vec<f64>,
    pub midpoints: Vec<f64>,
    spacing: f64,
}

impl TransformedOperator {
    pub fn top_eigenvalues(&self, k: usize) -> Vec<f64> {
        self.matrix.top_eigenvalues(k)
    }

    pub fn count_above(&self, threshold: f64) -> usize {
        self.matrix.count_above(threshold)
    }

    /// The three-dimensional form σ⁻¹(−DD*)σ.
    pub fn apply_conjugated(&self, u: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = u.iter().zip(&self.sigma_mid).map(|(a, s)| a * s).collect();
        self.matrix
            .apply(&v)
            .into_iter()
            .zip(&self.sigma_mid)
            .map(|(a, s)| a / s)
            .collect()
    }

    /// ⟨Tu, v⟩_w − ⟨u, Tv⟩_w for the conjugated form.
    pub fn symmetry_defect(&self, u: &[f64], v: &[f64]) -> f64 {
        let w: Vec<f64> = self.sigma_mid.iter().map(|s| s * s).collect();
        let tu = self.apply_conjugated(u);
        let tv = self.apply_conjugated(v);
        weighted_inner(&tu, v, &w, self.spacing) - weighted_inner(u, &tv, &w, self.spacing)
    }

    /// Potential left over after removing the conjugated Laplacian,
    /// (σ⁻¹(−DD*)σ·1) at interior midpoints; the two end midpoints carry the
    /// boundary closure and are reported as zero.
    pub fn discrete_potential(&self) -> Vec<f64> {
        let ones = vec![1.0; self.sigma_mid.len()];
        let mut out = self.apply_conjugated(&ones);
        let m = out.len();
        out[0] = 0.0;
        out[m - 1] = 0.0;
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DarbouxReport {
    pub factorization_defect: f64,
    pub l2_eigencount: usize,
    pub l2_top_eigenvalues: Vec<f64>,
    pub vtilde_decay_constant: f64,
    pub discrete_vtilde_decay_constant: f64,
    pub roundtrip_error: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_vtilde_is_round_off() {
        for k in 0..200 {
            let rho = -50.0 + 0.5 * k as f64;
            let v = transformed_potential_at(rho);
            assert!(v.abs() < 1e-14, "Ṽ({rho}) = {v}");
        }
    }

    #[test]
    fn kernel_is_annihilated_exactly() {
        let g = RadialGrid::new(20.0, 801).unwrap();
        let ctx = DarbouxContext::new(&g);
        let f = ModeField::new(Sector::new(1, 2), ctx.nu0.iter().map(|v| 3.5 * v).collect());
        assert!(ctx.apply(&f).max_abs() < 1e-13);
    }

    #[test]
    fn other_sectors_pass_through() {
        let g = RadialGrid::new(10.0, 201).unwrap();
        let ctx = DarbouxContext::new(&g);
        let f = ModeField::new(Sector::new(2, 1), g.sample(|r| (-r * r).exp()));
        assert_eq!(ctx.apply(&f), f);
    }

    #[test]
    fn pure_kernel_reconstruction() {
        let g = RadialGrid::new(30.0, 1201).unwrap();
        let ctx = DarbouxContext::new(&g);
        let datum = ctx.pairing_datum(&ctx.nu0, 8.0);
        let back = ctx.invert(&vec![0.0; g.len()], datum, 8.0).unwrap();
        for (a, b) in back.iter().zip(&ctx.nu0) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
