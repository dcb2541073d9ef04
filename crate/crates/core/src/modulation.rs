//! Symplectic bookkeeping at zero boost: momentum variable, the pairing Ω,
//! truncated eigenvectors, the unstable-mode coefficients a_± and the
//! translation matrix.
//!
//! The momentum is ψ̇ = −w ∂_tψ, so the linear flow reads ∂_t(ψ, ψ̇) = M(ψ, ψ̇)
//! with M = [[0, −1/w], [−wH, 0]].

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::evolution::{le_star_sq, EvolutionError, Evolver, WaveState};
use crate::field::{direction_factor, ModeField, Sector};
use crate::geometry::{self, RadialGrid};
use crate::operators::{assemble, SectorOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulationError {
    #[error("pairing between sectors {0} and {1}")]
    SectorMismatch(Sector, Sector),
    #[error("pairing between vectors of length {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("cutoff radius {0} is below the minimum 4")]
    CutoffTooSmall(f64),
    #[error("translation matrix is singular (det = {0:e})")]
    Singular(f64),
    #[error("unstable mode has non-positive rate {0}")]
    BadRate(f64),
    #[error("cutoff region 2R = {needed} exceeds the grid half-width {available}")]
    GridTooShort { needed: f64, available: f64 },
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("correction profile must vanish where the cutoff is below one")]
    ProfileOutsideCore,
}

/// χ_R: one on |ρ| ≤ R, zero on |ρ| ≥ 2R, quintic smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    radius: f64,
}

impl Cutoff {
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0, "cutoff radius must be positive");
        Cutoff { radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eval(&self, rho: f64) -> f64 {
        1.0 - smoothstep((rho.abs() - self.radius) / self.radius)
    }

    /// 1 − χ with the transition moved to [R/2, R]: the exterior cutoff χ_{≥R}.
    pub fn exterior(radius: f64, rho: f64) -> f64 {
        smoothstep((rho.abs() - 0.5 * radius) / (0.5 * radius))
    }
}

/// 0 for x ≤ 0, 1 for x ≥ 1, C² quintic in between.
pub fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    }
}

/// (ψ, ψ̇) in one sector.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderVector {
    pub sector: Sector,
    pub psi: Vec<f64>,
    pub psidot: Vec<f64>,
    pub spacing: f64,
}

impl FirstOrderVector {
    pub fn new(sector: Sector, psi: Vec<f64>, psidot: Vec<f64>, spacing: f64) -> Self {
        assert_eq!(psi.len(), psidot.len());
        FirstOrderVector {
            sector,
            psi,
            psidot,
            spacing,
        }
    }

    /// From ψ and ∂_tψ.
    pub fn from_velocity(sector: Sector, psi: Vec<f64>, velocity: &[f64], weight: &[f64], spacing: f64) -> Self {
        let psidot = velocity.iter().zip(weight).map(|(v, w)| -w * v).collect();
        FirstOrderVector::new(sector, psi, psidot, spacing)
    }

    /// ∂_tψ = −ψ̇/w.
    pub fn velocity(&self, weight: &[f64]) -> Vec<f64> {
        self.psidot.iter().zip(weight).map(|(p, w)| -p / w).collect()
    }

    pub fn field(&self) -> ModeField {
        ModeField::new(self.sector, self.psi.clone())
    }

    pub fn scaled(&self, c: f64) -> Self {
        FirstOrderVector::new(
            self.sector,
            self.psi.iter().map(|v| c * v).collect(),
            self.psidot.iter().map(|v| c * v).collect(),
            self.spacing,
        )
    }

    /// self + c·other (same sector assumed).
    pub fn add_scaled(&mut self, c: f64, other: &FirstOrderVector) {
        self.psi.iter_mut().zip(&other.psi).for_each(|(a, b)| *a += c * b);
        self.psidot.iter_mut().zip(&other.psidot).for_each(|(a, b)| *a += c * b);
    }

    /// ‖ψ‖_w + ‖ψ̇/w‖_w.
    pub fn norm(&self, weight: &[f64]) -> f64 {
        let h = self.spacing;
        let a: f64 = self.psi.iter().zip(weight).map(|(p, w)| p * p * w).sum::<f64>() * h;
        let b: f64 = self.psidot.iter().zip(weight).map(|(p, w)| p * p / w).sum::<f64>() * h;
        a.sqrt() + b.sqrt()
    }
}

/// A first-order state across sectors.
pub type PhaseState = BTreeMap<Sector, FirstOrderVector>;

/// Ω(u, v) = ∫(u v̇ − u̇ v) dρ dω, trapezoid in ρ.
pub fn pair(u: &FirstOrderVector, v: &FirstOrderVector) -> Result<f64, ModulationError> {
    if u.sector != v.sector {
        return Err(ModulationError::SectorMismatch(u.sector, v.sector));
    }
    let n = u.psi.len();
    if v.psi.len() != n {
        return Err(ModulationError::LengthMismatch(n, v.psi.len()));
    }
    let term = |i: usize| u.psi[i] * v.psidot[i] - u.psidot[i] * v.psi[i];
    let mut s = 0.5 * (term(0) + term(n - 1));
    for i in 1..n - 1 {
        s += term(i);
    }
    Ok(s * u.spacing)
}

/// Ω(ψ⃗, z) for a multi-sector state; sectors absent from the state contribute 0.
pub fn pair_state(state: &PhaseState, z: &FirstOrderVector) -> f64 {
    state
        .get(&z.sector)
        .map(|u| pair(u, z).expect("same sector"))
        .unwrap_or(0.0)
}

/// Trapezoid Σ′ f·h with half weights at the ends.
fn trapezoid_sum<F: Fn(usize) -> f64>(n: usize, h: f64, f: F) -> f64 {
    let mut s = 0.5 * (f(0) + f(n - 1));
    for i in 1..n - 1 {
        s += f(i);
    }
    s * h
}

/// Truncated generalized-kernel and unstable vectors.
#[derive(Debug, Clone)]
pub struct ZVectors {
    pub cutoff: Cutoff,
    /// Z₁…Z₃: (χνⁱ, 0).
    pub base: [FirstOrderVector; 3],
    /// Z₄…Z₆: (0, −wχνⁱ).
    pub boost: [FirstOrderVector; 3],
    /// c(χφ_μ, −μwχφ_μ); M maps it to +μ times itself up to cutoff errors.
    pub plus: FirstOrderVector,
    /// c(χφ_μ, +μwχφ_μ).
    pub minus: FirstOrderVector,
    pub mu: f64,
    pub normalization: f64,
    weight: Vec<f64>,
    grid: RadialGrid,
}

impl ZVectors {
    /// `phi_mu` is the radial unstable eigenprofile on `grid` and `mu` its rate.
    pub fn new(grid: &RadialGrid, r_ctf: f64, mu: f64, phi_mu: &[f64]) -> Result<Self, ModulationError> {
        if r_ctf < 4.0 {
            return Err(ModulationError::CutoffTooSmall(r_ctf));
        }
        if 2.0 * r_ctf > grid.rho_max() {
            return Err(ModulationError::GridTooShort {
                needed: 2.0 * r_ctf,
                available: grid.rho_max(),
            });
        }
        if !(mu > 0.0) {
            return Err(ModulationError::BadRate(mu));
        }
        let cutoff = Cutoff::new(r_ctf);
        let h = grid.spacing();
        let n = grid.len();
        let weight = grid.sample(geometry::weight);
        let chi = grid.sample(|r| cutoff.eval(r));
        let nu: Vec<f64> = (0..n)
            .map(|i| direction_factor() * chi[i] * geometry::translation_mode(grid.node(i)))
            .collect();
        let base = Sector::translations().map(|s| FirstOrderVector::new(s, nu.clone(), vec![0.0; n], h));
        let boost = Sector::translations().map(|s| {
            FirstOrderVector::new(
                s,
                vec![0.0; n],
                nu.iter().zip(&weight).map(|(v, w)| -w * v).collect(),
                h,
            )
        });
        let (plus, minus, normalization) = unstable_pair(&chi, mu, phi_mu, &weight, h);
        Ok(ZVectors {
            cutoff,
            base,
            boost,
            plus,
            minus,
            mu,
            normalization,
            weight,
            grid: grid.clone(),
        })
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Z_k for k = 1..=6.
    pub fn z(&self, k: usize) -> &FirstOrderVector {
        match k {
            1..=3 => &self.base[k - 1],
            4..=6 => &self.boost[k - 4],
            _ => panic!("Z index {k} out of range 1..=6"),
        }
    }

    /// The untruncated versions of Z_± (χ ≡ 1), used as flow seeds.
    pub fn untruncated_unstable(&self, phi_mu: &[f64]) -> (FirstOrderVector, FirstOrderVector) {
        let ones = vec![1.0; phi_mu.len()];
        let (p, m, _) = unstable_pair(&ones, self.mu, phi_mu, &self.weight, self.grid.spacing());
        (p, m)
    }

    /// (a₊, a₋) = (Ω(ψ⃗, Z₋), −Ω(ψ⃗, Z₊)).
    pub fn project_unstable(&self, state: &PhaseState) -> (f64, f64) {
        (pair_state(state, &self.minus), -pair_state(state, &self.plus))
    }

    /// Ω(ψ⃗, Z_k), k = 1..6.
    pub fn omega(&self, state: &PhaseState) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (k, o) in out.iter_mut().enumerate() {
            *o = pair_state(state, self.z(k + 1));
        }
        out
    }

    /// ψ⃗ − a₊Z₊ − a₋Z₋.
    pub fn remove_unstable(&self, state: &mut PhaseState) -> (f64, f64) {
        let (ap, am) = self.project_unstable(state);
        if let Some(v) = state.get_mut(&Sector::RADIAL) {
            v.add_scaled(-ap, &self.plus);
            v.add_scaled(-am, &self.minus);
        }
        (ap, am)
    }

    /// Removes multiples of Z₁…Z₆ so that all six pairings vanish.
    pub fn remove_translations(&self, state: &mut PhaseState) {
        let e = -pair(&self.base[0], &self.boost[0]).expect("same sector");
        let om = self.omega(state);
        for i in 0..3 {
            if let Some(v) = state.get_mut(&self.base[i].sector) {
                let beta = om[i] / e;
                let alpha = -om[3 + i] / e;
                v.add_scaled(-alpha, &self.base[i]);
                v.add_scaled(-beta, &self.boost[i]);
            }
        }
    }

    /// Zeroes the six pairings by subtracting multiples of (b, 0) and
    /// (0, −wb) in each translation sector. With `profile` supported where
    /// χ ≡ 1, compact data stay compact and the pairings coincide with those
    /// against the untruncated kernel.
    pub fn remove_translations_along(&self, state: &mut PhaseState, profile: &[f64]) -> Result<(), ModulationError> {
        let n = self.grid.len();
        if profile.len() != n {
            return Err(ModulationError::LengthMismatch(n, profile.len()));
        }
        let h = self.grid.spacing();
        let om = self.omega(state);
        for i in 0..3 {
            let sector = self.base[i].sector;
            let Some(v) = state.get_mut(&sector) else { continue };
            let b = FirstOrderVector::new(sector, profile.to_vec(), vec![0.0; n], h);
            let bdot = FirstOrderVector::new(
                sector,
                vec![0.0; n],
                profile.iter().zip(&self.weight).map(|(p, w)| -w * p).collect(),
                h,
            );
            let against_boost = pair(&b, &self.boost[i])?;
            let against_base = pair(&bdot, &self.base[i])?;
            if against_boost.abs() < 1e-300 || against_base.abs() < 1e-300 {
                return Err(ModulationError::Singular(against_boost * against_base));
            }
            v.add_scaled(-om[3 + i] / against_boost, &b);
            v.add_scaled(-om[i] / against_base, &bdot);
        }
        Ok(())
    }

    /// d_ij = ∫χνⁱνʲ w dρdω; see [`d_matrix`].
    pub fn d_matrix(&self) -> Result<DMatrix, ModulationError> {
        d_matrix(&self.grid, self.cutoff.radius())
    }

    pub fn record(&self, time: f64, state: &PhaseState) -> Result<ModulationRecord, ModulationError> {
        let (a_plus, a_minus) = self.project_unstable(state);
        Ok(ModulationRecord {
            time,
            a_plus,
            a_minus,
            omega: self.omega(state),
            d_matrix: self.d_matrix()?.entries,
        })
    }
}

fn unstable_pair(
    chi: &[f64],
    mu: f64,
    phi_mu: &[f64],
    weight: &[f64],
    h: f64,
) -> (FirstOrderVector, FirstOrderVector, f64) {
    let n = phi_mu.len();
    let prof: Vec<f64> = chi.iter().zip(phi_mu).map(|(c, p)| c * p).collect();
    let mass = trapezoid_sum(n, h, |i| prof[i] * prof[i] * weight[i]);
    let c = 1.0 / (2.0 * mu * mass).sqrt();
    let psi: Vec<f64> = prof.iter().map(|p| c * p).collect();
    let mom: Vec<f64> = psi.iter().zip(weight).map(|(p, w)| mu * w * p).collect();
    let plus = FirstOrderVector::new(Sector::RADIAL, psi.clone(), mom.iter().map(|m| -m).collect(), h);
    let minus = FirstOrderVector::new(Sector::RADIAL, psi, mom, h);
    (plus, minus, c)
}

#[derive(Debug, Clone, Serialize)]
pub struct DMatrix {
    pub entries: [[f64; 3]; 3],
    pub determinant: f64,
}

/// Translation matrix d_ij = ∫χ_R νⁱνʲ w dρ dω. Entries are taken positive: the
/// momentum factor (h⁻¹)⁰⁰ = −1 is dropped from the definition.
pub fn d_matrix(grid: &RadialGrid, r_ctf: f64) -> Result<DMatrix, ModulationError> {
    if r_ctf < 4.0 {
        return Err(ModulationError::CutoffTooSmall(r_ctf));
    }
    if 2.0 * r_ctf > grid.rho_max() {
        return Err(ModulationError::GridTooShort {
            needed: 2.0 * r_ctf,
            available: grid.rho_max(),
        });
    }
    let chi = Cutoff::new(r_ctf);
    let df2 = direction_factor().powi(2);
    let diag = trapezoid_sum(grid.len(), grid.spacing(), |i| {
        let r = grid.node(i);
        chi.eval(r) * df2 * geometry::translation_mode(r).powi(2) * geometry::weight(r)
    });
    let mut entries = [[0.0; 3]; 3];
    let sectors = Sector::translations();
    for i in 0..3 {
        for j in 0..3 {
            // distinct real harmonics are orthogonal on the sphere
            entries[i][j] = if sectors[i] == sectors[j] { diag } else { 0.0 };
        }
    }
    let e = &entries;
    let determinant = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
        - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
        + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
    if !(determinant.abs() > 1e-300) {
        return Err(ModulationError::Singular(determinant));
    }
    Ok(DMatrix { entries, determinant })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulationRecord {
    pub time: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub omega: [f64; 6],
    pub d_matrix: [[f64; 3]; 3],
}

/// M(ψ, ψ̇) = (−ψ̇/w, −wHψ).
pub fn apply_m(op: &SectorOperator, v: &FirstOrderVector) -> FirstOrderVector {
    let w = op.weight();
    let hpsi = op.apply(&v.psi);
    FirstOrderVector::new(
        v.sector,
        v.psidot.iter().zip(w).map(|(p, w)| -p / w).collect(),
        hpsi.iter().zip(w).map(|(hp, w)| -w * hp).collect(),
        v.spacing,
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelResidualReport {
    pub r_ctf: f64,
    /// ‖Mφ⃗₁‖ for the untruncated mode.
    pub base: f64,
    /// ‖Mφ⃗₄ − φ⃗₁‖ for the untruncated modes.
    pub boost: f64,
    /// ‖MZ₁‖.
    pub truncated_base: f64,
    /// LE*-size of the scalar source carried by MZ₁.
    pub truncated_le_star: f64,
    /// max |MZ₁ − χMφ⃗₁| away from the cutoff transition (and its stencil).
    pub locality_violation: f64,
}

/// Residuals of the generalized-kernel relations Mφ⃗ᵢ = 0, Mφ⃗_{3+i} = φ⃗ᵢ.
pub fn generalized_kernel_residuals(grid: &RadialGrid, r_ctf: f64, alpha: f64) -> KernelResidualReport {
    let h1 = assemble(1, grid);
    let h = grid.spacing();
    let n = grid.len();
    let w = grid.sample(geometry::weight);
    let sector = Sector::new(1, 0);
    let nu: Vec<f64> = grid.sample(|r| direction_factor() * geometry::translation_mode(r));
    let interior = |v: &FirstOrderVector| {
        let mut c = v.clone();
        c.psi[0] = 0.0;
        c.psi[n - 1] = 0.0;
        c.psidot[0] = 0.0;
        c.psidot[n - 1] = 0.0;
        c.norm(&w)
    };
    let phi1 = FirstOrderVector::new(sector, nu.clone(), vec![0.0; n], h);
    let phi4 = FirstOrderVector::new(sector, vec![0.0; n], nu.iter().zip(&w).map(|(v, w)| -w * v).collect(), h);
    let m1 = apply_m(&h1, &phi1);
    let mut m4 = apply_m(&h1, &phi4);
    m4.add_scaled(-1.0, &phi1);

    let chi = Cutoff::new(r_ctf);
    let chis = grid.sample(|r| chi.eval(r));
    let z1 = FirstOrderVector::new(sector, nu.iter().zip(&chis).map(|(a, b)| a * b).collect(), vec![0.0; n], h);
    let mz1 = apply_m(&h1, &z1);
    let source: Vec<f64> = mz1.psidot.iter().zip(&w).map(|(p, w)| -p / w).collect();
    let truncated_le_star = le_star_sq(&source, grid, alpha).sqrt();
    let mut locality_violation: f64 = 0.0;
    for i in 1..n - 1 {
        let r = grid.node(i).abs();
        if r < r_ctf - 1.5 * h || r > 2.0 * r_ctf + 1.5 * h {
            locality_violation = locality_violation.max((mz1.psidot[i] - chis[i] * m1.psidot[i]).abs());
        }
    }
    KernelResidualReport {
        r_ctf,
        base: interior(&m1),
        boost: interior(&m4),
        truncated_base: interior(&mz1),
        truncated_le_star,
        locality_violation,
    }
}

/// Compact data with a_± and the six pairings removed, and an evolver whose
/// stabilizers hold the discrete unstable and kernel directions at round-off.
#[derive(Debug, Clone)]
pub struct ProjectedRun {
    pub evolver: Evolver,
    pub state: WaveState,
    pub zvectors: ZVectors,
    /// Coefficients of the data before projection.
    pub removed: ModulationRecord,
    /// Coefficients of the projected data.
    pub residual: ModulationRecord,
}

/// Removes the unstable pair with Z_± and the translation pairings with
/// corrections along `profile`, which must vanish outside |ρ| < R_ctf.
/// Stabilizers act along the same profile: subtracting the global discrete
/// modes instead would plant tails outside the light cone.
pub fn project_compact(
    evolver: Evolver,
    r_ctf: f64,
    profile: &[f64],
    data: &[(Sector, Vec<f64>, Vec<f64>)],
) -> Result<ProjectedRun, ModulationError> {
    let grid = evolver.grid().clone();
    let cutoff = Cutoff::new(r_ctf);
    if profile.len() != grid.len() {
        return Err(ModulationError::LengthMismatch(grid.len(), profile.len()));
    }
    if (0..grid.len()).any(|i| profile[i] != 0.0 && cutoff.eval(grid.node(i)) < 1.0) {
        return Err(ModulationError::ProfileOutsideCore);
    }
    let (mu2, phi) = match evolver.operator(Sector::RADIAL) {
        Some(op) => op.top_eigenpair(),
        None => assemble(0, &grid).top_eigenpair(),
    };
    if !(mu2 > 0.0) {
        return Err(ModulationError::BadRate(mu2));
    }
    let zvectors = ZVectors::new(&grid, r_ctf, mu2.sqrt(), &phi)?;
    let start = evolver.initial_state(0.0, data)?;
    let mut ps = evolver.phase_state(&start);
    let removed = zvectors.record(0.0, &ps)?;
    zvectors.remove_unstable(&mut ps);
    zvectors.remove_translations_along(&mut ps, profile)?;
    let w = evolver.weight().to_vec();
    let projected: Vec<_> = ps.iter().map(|(s, v)| (*s, v.psi.clone(), v.velocity(&w))).collect();

    let sectors: Vec<Sector> = evolver.sectors().copied().collect();
    let mut evolver = evolver;
    if sectors.contains(&Sector::RADIAL) {
        evolver = evolver.with_stabilizer_along(Sector::RADIAL, phi, profile.to_vec());
    }
    let kernel = sectors
        .iter()
        .find(|s| s.ell == 1)
        .and_then(|s| evolver.operator(*s))
        .map(|op| op.top_eigenpair().1);
    if let Some(nu) = kernel {
        for s in sectors.iter().filter(|s| s.ell == 1) {
            evolver = evolver.with_stabilizer_along(*s, nu.clone(), profile.to_vec());
        }
    }
    let state = evolver.initial_state(0.0, &projected)?;
    let residual = zvectors.record(0.0, &evolver.phase_state(&state))?;
    Ok(ProjectedRun {
        evolver,
        state,
        zvectors,
        removed,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cutoff_support() {
        let c = Cutoff::new(8.0);
        assert_eq!(c.eval(7.9), 1.0);
        assert_eq!(c.eval(-16.0), 0.0);
        assert!(c.eval(12.0) > 0.0 && c.eval(12.0) < 1.0);
    }

    #[test]
    fn sector_mismatch_is_an_error() {
        let a = FirstOrderVector::new(Sector::new(0, 0), vec![0.0; 4], vec![0.0; 4], 0.1);
        let b = FirstOrderVector::new(Sector::new(1, 0), vec![0.0; 4], vec![0.0; 4], 0.1);
        assert!(matches!(pair(&a, &b), Err(ModulationError::SectorMismatch(..))));
    }

    #[test]
    fn small_cutoff_rejected() {
        let g = RadialGrid::new(20.0, 401).unwrap();
        assert!(matches!(d_matrix(&g, 3.0), Err(ModulationError::CutoffTooSmall(_))));
    }
}
