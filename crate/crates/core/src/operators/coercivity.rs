//! Numerical probes of the coercivity and weighted elliptic estimates for H.
//!
//! The estimates hold up to unspecified constants, so the probe reports the
//! ratio LHS/RHS per sample; callers compare ratios across samples and grids.

use serde::Serialize;

use super::{assemble, weighted_inner, weighted_norm, NormExponent, OperatorError, SpectrumReport};
use crate::darboux;
use crate::field::{direction_factor, ModeField, Sector};
use crate::geometry::{self, RadialGrid};
use crate::modulation::Cutoff;

/// Everything the pairing terms need: the cutoff and the unstable mode.
#[derive(Debug, Clone)]
pub struct CoercivityContext {
    pub grid: RadialGrid,
    pub cutoff: Cutoff,
    pub phi_mu: Vec<f64>,
}

impl CoercivityContext {
    pub fn new(grid: &RadialGrid, r_ctf: f64, spectrum: &SpectrumReport) -> Option<Self> {
        Some(CoercivityContext {
            grid: grid.clone(),
            cutoff: Cutoff::new(r_ctf),
            phi_mu: spectrum.phi_mu.clone()?,
        })
    }

    /// |⟨φ, Z_μ⟩| and Σ|⟨φ, Z_i⟩| for the sector of φ.
    fn pairings(&self, phi: &ModeField) -> (f64, f64) {
        let g = &self.grid;
        let h = g.spacing();
        let w = g.sample(geometry::weight);
        let chi = g.sample(|r| self.cutoff.eval(r));
        if phi.sector == Sector::RADIAL {
            let z: Vec<f64> = chi.iter().zip(&self.phi_mu).map(|(c, p)| c * p).collect();
            (weighted_inner(&phi.values, &z, &w, h).abs(), 0.0)
        } else if phi.sector.ell == 1 {
            let z: Vec<f64> = (0..g.len())
                .map(|i| direction_factor() * chi[i] * geometry::translation_mode(g.node(i)))
                .collect();
            (0.0, weighted_inner(&phi.values, &z, &w, h).abs())
        } else {
            (0.0, 0.0)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivitySample {
    pub sector: Sector,
    /// ‖∂φ‖_{L²} over the RHS of the energy coercivity bound.
    pub energy_ratio: f64,
    /// ‖φ‖_{ℓ^∞H^{2,−3/2}} over the RHS of the weighted elliptic bound.
    pub sobolev_ratio: f64,
    /// ⟨−Hφ, φ⟩_w, which may be negative.
    pub quadratic_form: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub r_ctf: f64,
    pub samples: Vec<CoercivitySample>,
    pub worst_energy_ratio: f64,
    pub worst_sobolev_ratio: f64,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn coercivity_probe(
    ctx: &CoercivityContext,
    samples: &[ModeField],
) -> Result<CoercivityReport, OperatorError> {
    let g = &ctx.grid;
    let h = g.spacing();
    let r = ctx.cutoff.radius();
    let flux_mid: Vec<f64> = g.midpoints().into_iter().map(geometry::flux).collect();
    let w = g.sample(geometry::weight);
    let inv_rho2 = g.sample(geometry::translation_mode);
    let mut out = Vec::with_capacity(samples.len());
    for phi in samples {
        let op = assemble(phi.sector.ell, g);
        let u = &phi.values;
        let hu = op.apply(u);
        let quad = -op.inner(&hu, u);

        let lam = phi.sector.angular_eigenvalue();
        let grad_sq: f64 = (0..g.len() - 1)
            .map(|i| flux_mid[i] * (u[i + 1] - u[i]).powi(2) / h)
            .sum::<f64>()
            + lam * (0..g.len()).map(|i| inv_rho2[i] * u[i] * u[i] * w[i] * h).sum::<f64>();
        let (p_mu, p_trans) = ctx.pairings(phi);
        let energy_rhs = r.sqrt() * quad.abs().sqrt() + r.sqrt() * p_mu + p_trans;

        let sob_lhs = weighted_norm(phi, g, NormExponent::Infinity, 2, -1.5)?.value;
        let f = ModeField::new(phi.sector, hu);
        let mut sob_rhs = weighted_norm(&f, g, NormExponent::Finite(1.0), 0, 0.5)?.value;
        if phi.sector.ell == 1 {
            let df = ModeField::new(phi.sector, darboux::rbx_profile(&f.values, g));
            sob_rhs += r * r * weighted_norm(&df, g, NormExponent::Finite(1.0), 0, 0.5)?.value;
        }
        sob_rhs += p_mu + p_trans;

        out.push(CoercivitySample {
            sector: phi.sector,
            energy_ratio: ratio(grad_sq.sqrt(), energy_rhs),
            sobolev_ratio: ratio(sob_lhs, sob_rhs),
            quadratic_form: quad,
        });
    }
    let worst_energy_ratio = out.iter().map(|s| s.energy_ratio).fold(0.0, f64::max);
    let worst_sobolev_ratio = out.iter().map(|s| s.sobolev_ratio).fold(0.0, f64::max);
    Ok(CoercivityReport {
        r_ctf: r,
        samples: out,
        worst_energy_ratio,
        worst_sobolev_ratio,
    })
}
