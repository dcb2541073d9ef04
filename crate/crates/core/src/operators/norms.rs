//! Dyadic-shell Sobolev norms ℓ^p H^{s,γ}.

use serde::Serialize;

use super::OperatorError;
use crate::field::{gradient, second_derivative, ModeField};
use crate::geometry::{self, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum NormExponent {
    Finite(f64),
    Infinity,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedNorm {
    pub p: NormExponent,
    pub s: u32,
    pub gamma: f64,
    pub value: f64,
    /// 2^{kγ}2^{kj}‖∂^j ψ‖_{L²(A_k)} indexed by [j][k].
    pub shell_terms: Vec<Vec<f64>>,
}

/// Shell index of ρ: 0 for |ρ| < 2, else ⌊log₂|ρ|⌋.
pub fn shell_index(rho: f64) -> usize {
    let r = rho.abs();
    if r < 2.0 {
        0
    } else {
        r.log2().floor() as usize
    }
}

fn lp_sum(terms: &[f64], p: NormExponent) -> f64 {
    match p {
        NormExponent::Infinity => terms.iter().fold(0.0, |m, v| m.max(*v)),
        NormExponent::Finite(p) => terms.iter().map(|t| t.powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// Pointwise |∂^j ψ|² for j = 0, 1, 2, split into the radial derivative and the
/// pure angular part ℓ(ℓ+1)^j ⟨ρ⟩^{−2j}|u|² of unit-size derivatives.
fn derivative_densities(field: &ModeField, grid: &RadialGrid, s: u32) -> Vec<Vec<f64>> {
    let h = grid.spacing();
    let u = &field.values;
    let lam = field.sector.angular_eigenvalue();
    let mut out = Vec::new();
    let d1 = gradient(u, h);
    let d2 = second_derivative(u, h);
    for j in 0..=s {
        let radial: &[f64] = match j {
            0 => u,
            1 => &d1,
            _ => &d2,
        };
        out.push(
            (0..u.len())
                .map(|i| {
                    let q = geometry::translation_mode(grid.node(i));
                    let angular = if j == 0 { 0.0 } else { lam.powi(j as i32) * q.powi(j as i32) * u[i] * u[i] };
                    radial[i] * radial[i] + angular
                })
                .collect(),
        );
    }
    out
}

pub fn weighted_norm(
    field: &ModeField,
    grid: &RadialGrid,
    p: NormExponent,
    s: u32,
    gamma: f64,
) -> Result<WeightedNorm, OperatorError> {
    if s > 2 {
        return Err(OperatorError::DerivativeOrder(s));
    }
    if let NormExponent::Finite(pp) = p {
        if !(pp >= 1.0) {
            return Err(OperatorError::InvalidExponent(pp));
        }
    }
    let h = grid.spacing();
    let shells = shell_index(grid.rho_max()) + 1;
    let dens = derivative_densities(field, grid, s);
    let mut shell_terms = Vec::new();
    let mut value = 0.0;
    for (j, d) in dens.iter().enumerate() {
        let mut sq = vec![0.0; shells];
        for (i, di) in d.iter().enumerate() {
            let rho = grid.node(i);
            sq[shell_index(rho)] += di * geometry::weight(rho) * h;
        }
        let terms: Vec<f64> = sq
            .iter()
            .enumerate()
            .map(|(k, v)| 2f64.powf(k as f64 * (gamma + j as f64)) * v.sqrt())
            .collect();
        value += lp_sum(&terms, p);
        shell_terms.push(terms);
    }
    Ok(WeightedNorm {
        p,
        s,
        gamma,
        value,
        shell_terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Sector;

    #[test]
    fn shells() {
        assert_eq!(shell_index(0.0), 0);
        assert_eq!(shell_index(-1.99), 0);
        assert_eq!(shell_index(2.0), 1);
        assert_eq!(shell_index(3.99), 1);
        assert_eq!(shell_index(-4.0), 2);
    }

    #[test]
    fn zero_field() {
        let g = RadialGrid::new(20.0, 401).unwrap();
        let f = ModeField::zeros(Sector::RADIAL, g.len());
        let n = weighted_norm(&f, &g, NormExponent::Finite(2.0), 2, 0.5).unwrap();
        assert_eq!(n.value, 0.0);
    }

    #[test]
    fn order_limit() {
        let g = RadialGrid::new(20.0, 401).unwrap();
        let f = ModeField::zeros(Sector::RADIAL, g.len());
        assert!(weighted_norm(&f, &g, NormExponent::Infinity, 3, 0.0).is_err());
    }
}
