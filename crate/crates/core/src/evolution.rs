//! Leapfrog evolution of (−∂_t² + H_ℓ)ψ = g per sector, and the energy,
//! local-energy and r^p functionals measured along the flow.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{gradient, ModeField, Sector};
use crate::geometry::{self, RadialGrid};
use crate::modulation::{Cutoff, FirstOrderVector, PhaseState};
use crate::operators::{weighted_inner, Background, SectorOperator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("time step {dt} exceeds the stability limit {limit} (safety {safety}, spacing {spacing}, speed {speed})")]
    Cfl {
        dt: f64,
        limit: f64,
        safety: f64,
        spacing: f64,
        speed: f64,
    },
    #[error("sector {0} is not being evolved")]
    UnknownSector(Sector),
    #[error("field length {got} does not match the grid ({expected})")]
    Length { expected: usize, got: usize },
    #[error("decay fit needs at least {needed} samples spanning a factor {span} in time; got {got} samples")]
    FitWindow { needed: usize, span: f64, got: usize },
    #[error("decay fit sample at t = {0} is not positive")]
    NonPositive(f64),
}

/// Stability limit check: dt ≤ safety·h/c_max.
pub fn check_cfl(dt: f64, spacing: f64, speed: f64, safety: f64) -> Result<(), EvolutionError> {
    let limit = safety * spacing / speed;
    if dt > 0.0 && dt <= limit {
        Ok(())
    } else {
        Err(EvolutionError::Cfl {
            dt,
            limit,
            safety,
            spacing,
            speed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant,
    /// ⟨t − shift⟩^{−exponent} for t ≥ 0, zero before.
    Japanese { exponent: f64, shift: f64 },
    /// exp(−((t − center)/width)²).
    Gaussian { center: f64, width: f64 },
    /// Smooth bump supported in (start, end).
    Bump { start: f64, end: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Japanese { exponent, shift } => {
                if t < 0.0 {
                    0.0
                } else {
                    geometry::japanese(t - shift).powf(-exponent)
                }
            }
            TimeProfile::Gaussian { center, width } => (-((t - center) / width).powi(2)).exp(),
            TimeProfile::Bump { start, end } => smooth_bump(t, start, end),
        }
    }
}

/// exp(1 − 1/(1 − x²)) on the interval mapped to (−1, 1), peak value 1.
pub fn smooth_bump(t: f64, start: f64, end: f64) -> f64 {
    let x = (2.0 * t - start - end) / (end - start);
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// g(t, ρ) = radial_profile(ρ)·time_profile(t) in one sector.
#[derive(Debug, Clone)]
pub struct SeparableSource {
    pub sector: Sector,
    pub radial_profile: Vec<f64>,
    pub time_profile: TimeProfile,
    /// Exterior truncation: the profile is dropped where |ρ| < cutoff.
    pub cutoff: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum SourceSpec {
    None,
    Separable(SeparableSource),
}

impl SeparableSource {
    pub fn new(sector: Sector, radial_profile: Vec<f64>, time_profile: TimeProfile) -> Self {
        SeparableSource {
            sector,
            radial_profile,
            time_profile,
            cutoff: None,
        }
    }

    pub fn with_cutoff(mut self, grid: &RadialGrid, rho0: f64) -> Self {
        for (i, v) in self.radial_profile.iter_mut().enumerate() {
            if grid.node(i).abs() < rho0 {
                *v = 0.0;
            }
        }
        self.cutoff = Some(rho0);
        self
    }

    /// Largest p with |profile|·⟨ρ⟩^p bounded on the outer half of the grid,
    /// estimated from the last two dyadic points.
    pub fn decay_exponent(&self, grid: &RadialGrid) -> f64 {
        let r1 = grid.rho_max() / 2.0;
        let r2 = grid.rho_max();
        let v1 = self.radial_profile[grid.nearest(r1)].abs();
        let v2 = self.radial_profile[grid.nearest(r2)].abs();
        if v1 == 0.0 || v2 == 0.0 {
            f64::INFINITY
        } else {
            -(v2 / v1).ln() / (r2 / r1).ln()
        }
    }
}

/// ψ and the staggered momentum π = ∂_tψ at time − dt/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorState {
    pub psi: ModeField,
    pub pi: ModeField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub time: f64,
    pub sectors: BTreeMap<Sector, SectorState>,
}

/// Leapfrog integrator over a fixed set of sectors.
#[derive(Debug, Clone)]
pub struct Evolver {
    grid: RadialGrid,
    dt: f64,
    weight: Vec<f64>,
    flux_mid: Vec<f64>,
    inv_rho2: Vec<f64>,
    operators: BTreeMap<Sector, SectorOperator>,
    sources: Vec<SeparableSource>,
    stabilizers: Vec<Stabilizer>,
}

/// Removes ⟨v, mode⟩_w by subtracting a multiple of `profile`, where
/// ⟨profile, mode⟩_w = 1.
#[derive(Debug, Clone)]
struct Stabilizer {
    sector: Sector,
    mode: Vec<f64>,
    profile: Vec<f64>,
}

impl Evolver {
    pub fn new(
        grid: &RadialGrid,
        background: &Background,
        sectors: &[Sector],
        dt: f64,
        cfl_safety: f64,
    ) -> Result<Self, EvolutionError> {
        check_cfl(dt, grid.spacing(), background.max_speed, cfl_safety)?;
        let mut by_ell: BTreeMap<u32, SectorOperator> = BTreeMap::new();
        let mut operators = BTreeMap::new();
        for s in sectors {
            let op = by_ell
                .entry(s.ell)
                .or_insert_with(|| SectorOperator::from_background(s.ell, grid, background))
                .clone();
            operators.insert(*s, op);
        }
        Ok(Evolver {
            grid: grid.clone(),
            dt,
            weight: background.weight.clone(),
            flux_mid: background.flux_mid.clone(),
            inv_rho2: background.inv_rho2.clone(),
            operators,
            sources: Vec::new(),
            stabilizers: Vec::new(),
        })
    }

    /// Catenoid evolver.
    pub fn catenoid(grid: &RadialGrid, sectors: &[Sector], dt: f64, cfl_safety: f64) -> Result<Self, EvolutionError> {
        Evolver::new(grid, &Background::catenoid(grid), sectors, dt, cfl_safety)
    }

    pub fn with_source(mut self, source: SeparableSource) -> Result<Self, EvolutionError> {
        if !self.operators.contains_key(&source.sector) {
            return Err(EvolutionError::UnknownSector(source.sector));
        }
        if source.radial_profile.len() != self.grid.len() {
            return Err(EvolutionError::Length {
                expected: self.grid.len(),
                got: source.radial_profile.len(),
            });
        }
        self.sources.push(source);
        Ok(self)
    }

    /// After every step, removes the w-projection of ψ and π onto `mode`
    /// (w-normalized). The exact flow leaves spectral subspaces of H invariant;
    /// this keeps round-off from seeding an unstable direction.
    pub fn with_stabilizer(self, sector: Sector, mode: Vec<f64>) -> Self {
        let profile = mode.clone();
        self.with_stabilizer_along(sector, mode, profile)
    }

    /// Like [`Evolver::with_stabilizer`], but the correction is a multiple of
    /// `profile`. A compactly supported profile keeps compact data compact;
    /// subtracting the global mode itself would leave a tail outside the
    /// light cone.
    pub fn with_stabilizer_along(mut self, sector: Sector, mode: Vec<f64>, profile: Vec<f64>) -> Self {
        let c = weighted_inner(&profile, &mode, &self.weight, self.grid.spacing());
        let profile = profile.iter().map(|p| p / c).collect();
        self.stabilizers.push(Stabilizer { sector, mode, profile });
        self
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn sectors(&self) -> impl Iterator<Item = &Sector> {
        self.operators.keys()
    }

    pub fn operator(&self, sector: Sector) -> Option<&SectorOperator> {
        self.operators.get(&sector)
    }

    /// g(t) in one sector.
    pub fn source_at(&self, sector: Sector, t: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.len()];
        for s in self.sources.iter().filter(|s| s.sector == sector) {
            let c = s.time_profile.eval(t);
            if c != 0.0 {
                g.iter_mut().zip(&s.radial_profile).for_each(|(a, b)| *a += c * b);
            }
        }
        g
    }

    /// ∂_t²ψ = Hψ − g.
    fn acceleration(&self, sector: Sector, psi: &[f64], t: f64, out: &mut [f64]) {
        self.operators[&sector].apply_into(psi, out);
        for s in self.sources.iter().filter(|s| s.sector == sector) {
            let c = s.time_profile.eval(t);
            if c != 0.0 {
                out.iter_mut().zip(&s.radial_profile).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n = out.len();
        out[0] = 0.0;
        out[n - 1] = 0.0;
    }

    /// State at `time` from ψ and ∂_tψ; sectors not listed start at rest.
    /// The half-step momentum uses the Taylor expansion through dt².
    pub fn initial_state(
        &self,
        time: f64,
        data: &[(Sector, Vec<f64>, Vec<f64>)],
    ) -> Result<WaveState, EvolutionError> {
        let n = self.grid.len();
        let mut sectors = BTreeMap::new();
        for s in self.operators.keys() {
            sectors.insert(
                *s,
                SectorState {
                    psi: ModeField::zeros(*s, n),
                    pi: ModeField::zeros(*s, n),
                },
            );
        }
        for (s, psi, vel) in data {
            if !self.operators.contains_key(s) {
                return Err(EvolutionError::UnknownSector(*s));
            }
            if psi.len() != n || vel.len() != n {
                return Err(EvolutionError::Length {
                    expected: n,
                    got: psi.len().min(vel.len()),
                });
            }
            let mut p = psi.clone();
            let mut v = vel.clone();
            p[0] = 0.0;
            p[n - 1] = 0.0;
            v[0] = 0.0;
            v[n - 1] = 0.0;
            let mut acc = vec![0.0; n];
            self.acceleration(*s, &p, time, &mut acc);
            let hv = self.operators[s].apply(&v);
            let dt = self.dt;
            let pi: Vec<f64> = (0..n)
                .map(|i| v[i] - 0.5 * dt * acc[i] + 0.125 * dt * dt * hv[i])
                .collect();
            let st = sectors.get_mut(s).expect("inserted above");
            st.psi.values = p;
            st.pi.values = pi;
        }
        let mut state = WaveState { time, sectors };
        self.stabilize(&mut state);
        Ok(state)
    }

    fn stabilize(&self, state: &mut WaveState) {
        let h = self.grid.spacing();
        for stab in &self.stabilizers {
            if let Some(st) = state.sectors.get_mut(&stab.sector) {
                for v in [&mut st.psi.values, &mut st.pi.values] {
                    let c = weighted_inner(v, &stab.mode, &self.weight, h);
                    v.iter_mut().zip(&stab.profile).for_each(|(a, b)| *a -= c * b);
                }
            }
        }
    }

    /// One leapfrog step: kick with the acceleration at t, then drift.
    pub fn step(&self, state: &mut WaveState) {
        let n = self.grid.len();
        let mut acc = vec![0.0; n];
        let t = state.time;
        for (s, st) in state.sectors.iter_mut() {
            self.acceleration(*s, &st.psi.values, t, &mut acc);
            for i in 0..n {
                st.pi.values[i] += self.dt * acc[i];
                st.psi.values[i] += self.dt * st.pi.values[i];
            }
        }
        state.time = t + self.dt;
        self.stabilize(state);
    }

    /// Steps until `t_end` (to within half a step), calling `observe` every
    /// `every` steps and at the start.
    pub fn run<F: FnMut(&Evolver, &WaveState)>(
        &self,
        state: &mut WaveState,
        t_end: f64,
        every: usize,
        mut observe: F,
    ) {
        let steps = ((t_end - state.time) / self.dt).round().max(0.0) as usize;
        observe(self, state);
        for k in 1..=steps {
            self.step(state);
            if every > 0 && k % every == 0 {
                observe(self, state);
            }
        }
    }

    /// ∂_tψ at the state's integer time: π^{n−½} + (dt/2)(Hψⁿ − gⁿ).
    pub fn velocity(&self, state: &WaveState, sector: Sector) -> Vec<f64> {
        let st = &state.sectors[&sector];
        let mut acc = vec![0.0; self.grid.len()];
        self.acceleration(sector, &st.psi.values, state.time, &mut acc);
        st.pi
            .values
            .iter()
            .zip(&acc)
            .map(|(p, a)| p + 0.5 * self.dt * a)
            .collect()
    }

    pub fn phase_state(&self, state: &WaveState) -> PhaseState {
        state
            .sectors
            .iter()
            .map(|(s, st)| {
                (
                    *s,
                    FirstOrderVector::from_velocity(
                        *s,
                        st.psi.values.clone(),
                        &self.velocity(state, *s),
                        &self.weight,
                        self.grid.spacing(),
                    ),
                )
            })
            .collect()
    }

    /// Conserved energy ½‖∂_tψ‖²_w − ½⟨Hψ, ψ⟩_w summed over sectors.
    pub fn conserved_energy(&self, state: &WaveState) -> f64 {
        state
            .sectors
            .iter()
            .map(|(s, st)| {
                let v = self.velocity(state, *s);
                let op = &self.operators[s];
                0.5 * op.inner(&v, &v) - 0.5 * op.inner(&op.apply(&st.psi.values), &st.psi.values)
            })
            .sum()
    }

    /// Exactly conserved quadratic form of the homogeneous leapfrog scheme,
    /// ½⟨π^{n+½}, π^{n−½}⟩_w − ½⟨Hψⁿ, ψⁿ⟩_w.
    pub fn discrete_energy(&self, state: &WaveState) -> f64 {
        let n = self.grid.len();
        let mut acc = vec![0.0; n];
        state
            .sectors
            .iter()
            .map(|(s, st)| {
                let op = &self.operators[s];
                self.acceleration(*s, &st.psi.values, state.time, &mut acc);
                let ahead: Vec<f64> = (0..n).map(|i| st.pi.values[i] + self.dt * acc[i]).collect();
                let hpsi = op.apply(&st.psi.values);
                0.5 * op.inner(&ahead, &st.pi.values) - 0.5 * op.inner(&hpsi, &st.psi.values)
            })
            .sum()
    }

    /// ½(‖∂_tψ‖²_w + ‖∂_Σψ‖²), no potential; non-negative.
    pub fn energy_norm(&self, state: &WaveState) -> f64 {
        let h = self.grid.spacing();
        state
            .sectors
            .iter()
            .map(|(s, st)| {
                let v = self.velocity(state, *s);
                let u = &st.psi.values;
                let kin = weighted_inner(&v, &v, &self.weight, h);
                let grad: f64 = (0..u.len() - 1)
                    .map(|i| self.flux_mid[i] * (u[i + 1] - u[i]).powi(2) / h)
                    .sum();
                let ang: f64 = s.angular_eigenvalue()
                    * (0..u.len())
                        .map(|i| self.inv_rho2[i] * u[i] * u[i] * self.weight[i] * h)
                        .sum::<f64>();
                0.5 * (kin + grad + ang)
            })
            .sum()
    }
}

/// Spatial part of the local-energy density integrated over the grid:
/// ∫[⟨ρ⟩^{−1−α}(∂_ρu)² + ρ²⟨ρ⟩^{−5}ℓ(ℓ+1)u² + ρ²⟨ρ⟩^{−5−α}u²] w dρ.
pub fn le_spatial_sq(field: &ModeField, grid: &RadialGrid, alpha: f64) -> f64 {
    let h = grid.spacing();
    let u = &field.values;
    let du = gradient(u, h);
    let lam = field.sector.angular_eigenvalue();
    (0..u.len())
        .map(|i| {
            let rho = grid.node(i);
            let r = geometry::japanese(rho);
            let dens = r.powf(-1.0 - alpha) * du[i] * du[i]
                + rho * rho * r.powi(-5) * lam * u[i] * u[i]
                + rho * rho * r.powf(-5.0 - alpha) * u[i] * u[i];
            dens * geometry::weight(rho) * h
        })
        .sum()
}

/// ∫ ρ²⟨ρ⟩^{−3−α}(∂_tψ)² w dρ.
pub fn le_time_sq(velocity: &[f64], grid: &RadialGrid, alpha: f64) -> f64 {
    let h = grid.spacing();
    (0..velocity.len())
        .map(|i| {
            let rho = grid.node(i);
            let r = geometry::japanese(rho);
            rho * rho * r.powf(-3.0 - alpha) * velocity[i] * velocity[i] * geometry::weight(rho) * h
        })
        .sum()
}

/// ‖⟨ρ⟩^{(1+α)/2} g‖²_w.
pub fn le_star_sq(g: &[f64], grid: &RadialGrid, alpha: f64) -> f64 {
    let h = grid.spacing();
    (0..g.len())
        .map(|i| {
            let rho = grid.node(i);
            geometry::japanese(rho).powf(1.0 + alpha) * g[i] * g[i] * geometry::weight(rho) * h
        })
        .sum()
}

/// Outgoing-derivative density L(|ρ|ψ) with L = ∂_t + sgn(ρ)·v∂_ρ.
fn outgoing_derivative(psi: &[f64], velocity: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let weighted: Vec<f64> = (0..psi.len()).map(|i| grid.node(i).abs() * psi[i]).collect();
    let d = gradient(&weighted, grid.spacing());
    (0..psi.len())
        .map(|i| {
            let rho = grid.node(i);
            let v = geometry::radial_speed_sq(rho).sqrt();
            rho.abs() * velocity[i] + rho.signum() * v * d[i]
        })
        .collect()
}

/// E^p = ∫ χ_{≥R̃} |ρ|^p (L(|ρ|ψ))² dρ for p = 0, 1, 2, one sector.
pub fn rp_energies_sector(psi: &[f64], velocity: &[f64], grid: &RadialGrid, r_tilde: f64) -> [f64; 3] {
    let l = outgoing_derivative(psi, velocity, grid);
    let h = grid.spacing();
    let mut out = [0.0; 3];
    for (i, li) in l.iter().enumerate() {
        let rho = grid.node(i);
        let c = Cutoff::exterior(r_tilde, rho);
        if c == 0.0 {
            continue;
        }
        for (p, o) in out.iter_mut().enumerate() {
            *o += c * rho.abs().powi(p as i32) * li * li * h;
        }
    }
    out
}

/// Bulk density ∫ χ_{≥R̃}|ρ|^{p−1}[p(Lψ̃)² + (2−p)ℓ(ℓ+1)⟨ρ⟩⁻²ψ̃²] dρ, ψ̃ = |ρ|ψ.
pub fn rp_bulk_sector(psi: &[f64], velocity: &[f64], grid: &RadialGrid, r_tilde: f64, ell: u32) -> [f64; 3] {
    let l = outgoing_derivative(psi, velocity, grid);
    let h = grid.spacing();
    let lam = Sector::new(ell, 0).angular_eigenvalue();
    let mut out = [0.0; 3];
    for (i, li) in l.iter().enumerate() {
        let rho = grid.node(i);
        let c = Cutoff::exterior(r_tilde, rho);
        if c == 0.0 {
            continue;
        }
        let tilde = rho.abs() * psi[i];
        for (p, o) in out.iter_mut().enumerate() {
            let pf = p as f64;
            let ang = (2.0 - pf) * lam * geometry::translation_mode(rho) * tilde * tilde;
            *o += c * rho.abs().powf(pf - 1.0) * (pf * li * li + ang) * h;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub alpha: f64,
    pub r_tilde: f64,
    pub probes: Vec<f64>,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            alpha: 0.1,
            r_tilde: 2.0,
            probes: vec![1.0, 5.0],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeSeries {
    pub sector: Sector,
    pub rho: f64,
    pub values: Vec<f64>,
}

/// Functionals recorded along a run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub conserved_energy: Vec<f64>,
    pub le_density: Vec<f64>,
    pub le_integral: Vec<f64>,
    pub le_star_density: Vec<f64>,
    pub le_star_integral: Vec<f64>,
    /// E^p for p = 0, 1, 2.
    pub rp_energies: [Vec<f64>; 3],
    /// Running bulk integral B^p.
    pub rp_bulk: [Vec<f64>; 3],
    pub probes: Vec<ProbeSeries>,
}

/// Accumulates a [`NormSeries`]; time integrals use the trapezoid rule over
/// the recorded instants.
#[derive(Debug, Clone)]
pub struct NormMonitor {
    pub config: NormConfig,
    pub series: NormSeries,
    last_bulk: [f64; 3],
}

/// Linear interpolation of a grid function at ρ.
pub fn interpolate(values: &[f64], grid: &RadialGrid, rho: f64) -> f64 {
    let x = rho / grid.spacing() + grid.center() as f64;
    let i = (x.floor().max(0.0) as usize).min(values.len() - 2);
    let t = x - i as f64;
    (1.0 - t) * values[i] + t * values[i + 1]
}

impl NormMonitor {
    pub fn new(config: NormConfig) -> Self {
        NormMonitor {
            config,
            series: NormSeries::default(),
            last_bulk: [0.0; 3],
        }
    }

    pub fn record(&mut self, ev: &Evolver, state: &WaveState) {
        let g = ev.grid();
        let a = self.config.alpha;
        let mut le = 0.0;
        let mut les = 0.0;
        let mut rp = [0.0; 3];
        let mut bulk = [0.0; 3];
        if self.series.probes.is_empty() {
            for s in state.sectors.keys() {
                for &r in &self.config.probes {
                    self.series.probes.push(ProbeSeries {
                        sector: *s,
                        rho: r,
                        values: Vec::new(),
                    });
                }
            }
        }
        for (s, st) in &state.sectors {
            let v = ev.velocity(state, *s);
            le += le_spatial_sq(&st.psi, g, a) + le_time_sq(&v, g, a);
            les += le_star_sq(&ev.source_at(*s, state.time), g, a);
            let e = rp_energies_sector(&st.psi.values, &v, g, self.config.r_tilde);
            let b = rp_bulk_sector(&st.psi.values, &v, g, self.config.r_tilde, s.ell);
            for p in 0..3 {
                rp[p] += e[p];
                bulk[p] += b[p];
            }
            for pr in self.series.probes.iter_mut().filter(|p| p.sector == *s) {
                pr.values.push(interpolate(&st.psi.values, g, pr.rho));
            }
        }
        let s = &mut self.series;
        let (le_int, les_int, bulk_int) = match s.times.last() {
            None => (0.0, 0.0, [0.0; 3]),
            Some(&t0) => {
                let dt = state.time - t0;
                let prev_le = *s.le_density.last().unwrap();
                let prev_les = *s.le_star_density.last().unwrap();
                let mut bi = [0.0; 3];
                for p in 0..3 {
                    bi[p] = s.rp_bulk[p].last().unwrap() + 0.5 * dt * (self.last_bulk[p] + bulk[p]);
                }
                (
                    s.le_integral.last().unwrap() + 0.5 * dt * (prev_le + le),
                    s.le_star_integral.last().unwrap() + 0.5 * dt * (prev_les + les),
                    bi,
                )
            }
        };
        s.times.push(state.time);
        s.energy.push(ev.energy_norm(state));
        s.conserved_energy.push(ev.conserved_energy(state));
        s.le_density.push(le);
        s.le_integral.push(le_int);
        s.le_star_density.push(les);
        s.le_star_integral.push(les_int);
        for p in 0..3 {
            s.rp_energies[p].push(rp[p]);
            s.rp_bulk[p].push(bulk_int[p]);
        }
        self.last_bulk = bulk;
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Least-squares slope of log|y| against log t over samples with t in
/// [t0, t1].
pub fn decay_fit(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Result<DecayFit, EvolutionError> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t0 && **t <= t1)
        .map(|(t, v)| (*t, *v))
        .collect();
    let span = pts.last().map(|p| p.0).unwrap_or(0.0) / pts.first().map(|p| p.0).unwrap_or(1.0);
    if pts.len() < 8 || !(span >= 4.0 * (1.0 - 1e-12)) {
        return Err(EvolutionError::FitWindow {
            needed: 8,
            span: 4.0,
            got: pts.len(),
        });
    }
    if let Some(p) = pts.iter().find(|p| !(p.1 > 0.0) || p.0 <= 0.0) {
        return Err(EvolutionError::NonPositive(p.0));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, se) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        exponent: slope,
        std_error: se,
        samples: pts.len(),
    })
}

/// Ordinary least squares y = a + b x; returns (b, standard error of b).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (b, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cfl_violation_is_rejected() {
        let g = RadialGrid::with_spacing(10.0, 0.05).unwrap();
        let err = Evolver::catenoid(&g, &[Sector::RADIAL], 0.05, 0.9).unwrap_err();
        assert!(matches!(err, EvolutionError::Cfl { .. }));
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = RadialGrid::with_spacing(10.0, 0.05).unwrap();
        let ev = Evolver::catenoid(&g, &[Sector::RADIAL, Sector::new(2, 0)], 0.02, 0.9).unwrap();
        let mut st = ev.initial_state(0.0, &[]).unwrap();
        ev.run(&mut st, 2.0, 0, |_, _| {});
        for s in st.sectors.values() {
            assert!(s.psi.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn exact_power_law_fit() {
        let ts: Vec<f64> = (0..20).map(|k| 10.0 * 1.2f64.powi(k)).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-2.0)).collect();
        let f = decay_fit(&ts, &ys, 10.0, 1e4).unwrap();
        assert!((f.exponent + 2.0).abs() < 1e-12);
    }

    #[test]
    fn short_window_is_rejected() {
        let ts: Vec<f64> = (1..=20).map(|k| 50.0 + k as f64).collect();
        let ys: Vec<f64> = ts.iter().map(|t| t.powi(-2)).collect();
        assert!(decay_fit(&ts, &ys, 0.0, 1e9).is_err());
    }

    #[test]
    fn bump_is_compact() {
        assert_eq!(smooth_bump(0.0, 0.0, 1.0), 0.0);
        assert_eq!(smooth_bump(1.0, 0.0, 1.0), 0.0);
        assert!((smooth_bump(0.5, 0.0, 1.0) - 1.0).abs() < 1e-15);
    }
}
