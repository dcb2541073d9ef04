//! Codimension-one trapping of the unstable mode on the linear flow:
//! direction classification, the trapping envelope, and bisection of the
//! data parameter onto the stable manifold.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use crate::dd::DoubleDouble;

use crate::evolution::{linear_fit, EvolutionError, Evolver};
use crate::field::Sector;
use crate::geometry::{self, RadialGrid};
use crate::modulation::{Cutoff, FirstOrderVector, ModulationError, PhaseState, ZVectors};
use crate::operators::weighted_inner;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShootingError {
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Modulation(#[from] ModulationError),
    #[error("growing and decaying seeds fitted rates of the same sign ({plus}, {minus})")]
    SameSign { plus: f64, minus: f64 },
    #[error("bracket ends [{lo}, {hi}] both exit on the {side:?} side")]
    SameSide { lo: f64, hi: f64, side: ExitSide },
    #[error("the family direction has no growing component")]
    DegenerateFamily,
    #[error("data length {got} does not match the grid ({expected})")]
    Length { expected: usize, got: usize },
}

/// λ(τ) = λ₀⟨τ⟩⁻³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapEnvelope {
    pub amplitude: f64,
    pub power: f64,
}

impl TrapEnvelope {
    pub fn cubic(amplitude: f64) -> Self {
        TrapEnvelope { amplitude, power: 3.0 }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.amplitude * geometry::japanese(tau).powf(-self.power)
    }
}

/// Which of the two unstable vectors the linear flow amplifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnstableDirection {
    /// (ψ, ∂_tψ) = (φ, +μφ), first-order form c(φ, −μwφ).
    Plus,
    /// (ψ, ∂_tψ) = (φ, −μφ), the zero-boost reading of the stated data pair.
    Minus,
}

impl UnstableDirection {
    /// Sign s with ∂_tψ = s·μ·φ along this direction.
    pub fn velocity_sign(self) -> f64 {
        match self {
            UnstableDirection::Plus => 1.0,
            UnstableDirection::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub growing: UnstableDirection,
    pub rate_plus: f64,
    pub rate_minus: f64,
    pub mu: f64,
    pub plus_series: Vec<(f64, f64)>,
    pub minus_series: Vec<(f64, f64)>,
}

/// Setting shared by classifier and shooter: the ℓ = 0 grid flow together
/// with its unstable eigenpair.
#[derive(Debug, Clone)]
pub struct UnstableFlow {
    pub grid: RadialGrid,
    pub dt: f64,
    pub mu: f64,
    pub phi_mu: Vec<f64>,
    pub zvectors: ZVectors,
    evolver: Evolver,
}

impl UnstableFlow {
    /// `mu`, `phi_mu` must be the grid eigenpair of H₀ on `grid`.
    pub fn new(
        grid: &RadialGrid,
        dt: f64,
        cfl_safety: f64,
        r_ctf: f64,
        mu: f64,
        phi_mu: Vec<f64>,
    ) -> Result<Self, ShootingError> {
        let evolver = Evolver::catenoid(grid, &[Sector::RADIAL], dt, cfl_safety)?;
        let zvectors = ZVectors::new(grid, r_ctf, mu, &phi_mu)?;
        Ok(UnstableFlow {
            grid: grid.clone(),
            dt,
            mu,
            phi_mu,
            zvectors,
            evolver,
        })
    }

    /// Runs (ψ₀, ψ₁) and reports (t, a₊, a₋) every `every` steps until `stop`
    /// returns true or `t_end` is reached.
    pub fn trajectory<F: FnMut(f64, f64, f64) -> bool>(
        &self,
        psi0: &[f64],
        psi1: &[f64],
        t_end: f64,
        every: usize,
        mut stop: F,
    ) -> Result<(), ShootingError> {
        let mut state = self
            .evolver
            .initial_state(0.0, &[(Sector::RADIAL, psi0.to_vec(), psi1.to_vec())])?;
        let steps = (t_end / self.dt).round() as usize;
        for k in 0..=steps {
            if k > 0 {
                self.evolver.step(&mut state);
            }
            if k % every.max(1) == 0 || k == steps {
                let (ap, am) = self.zvectors.project_unstable(&self.evolver.phase_state(&state));
                if stop(state.time, ap, am) {
                    break;
                }
            }
        }
        Ok(())
    }

    /// Growing coefficient of (ψ₀, ψ₁) under the exact grid flow:
    /// ½(⟨ψ₀, φ⟩_w + s⟨ψ₁, φ⟩_w/μ)/‖φ‖²_w, s the growing direction's sign.
    pub fn growing_coefficient(&self, psi0: &[f64], psi1: &[f64], growing: UnstableDirection) -> f64 {
        let h = self.grid.spacing();
        let w = self.evolver.weight();
        let norm = weighted_inner(&self.phi_mu, &self.phi_mu, w, h);
        let p0 = weighted_inner(psi0, &self.phi_mu, w, h);
        let p1 = weighted_inner(psi1, &self.phi_mu, w, h);
        0.5 * (p0 + growing.velocity_sign() * p1 / self.mu) / norm
    }

    /// Seed (φ, ±μφ) in (ψ, ∂_tψ) form.
    pub fn seed(&self, direction: UnstableDirection, amplitude: f64) -> (Vec<f64>, Vec<f64>) {
        let s = direction.velocity_sign();
        (
            self.phi_mu.iter().map(|p| amplitude * p).collect(),
            self.phi_mu.iter().map(|p| amplitude * s * self.mu * p).collect(),
        )
    }

    /// Seeds the flow with each unstable vector and fits the exponential rate
    /// of its own coefficient (a₊ for the Plus seed, a₋ for the Minus seed)
    /// over t ∈ [t0, t1].
    pub fn classify_directions(&self, t0: f64, t1: f64) -> Result<Classification, ShootingError> {
        let every = ((0.1 / self.dt).round() as usize).max(1);
        let mut plus_series = Vec::new();
        let (p0, p1) = self.seed(UnstableDirection::Plus, 1.0);
        self.trajectory(&p0, &p1, t1, every, |t, ap, _| {
            plus_series.push((t, ap));
            false
        })?;
        let mut minus_series = Vec::new();
        let (m0, m1) = self.seed(UnstableDirection::Minus, 1.0);
        self.trajectory(&m0, &m1, t1, every, |t, _, am| {
            minus_series.push((t, am));
            false
        })?;
        let rate_plus = exponential_rate(&plus_series, t0, t1);
        let rate_minus = exponential_rate(&minus_series, t0, t1);
        if rate_plus.signum() == rate_minus.signum() {
            return Err(ShootingError::SameSign {
                plus: rate_plus,
                minus: rate_minus,
            });
        }
        let growing = if rate_plus > 0.0 {
            UnstableDirection::Plus
        } else {
            UnstableDirection::Minus
        };
        Ok(Classification {
            growing,
            rate_plus,
            rate_minus,
            mu: self.mu,
            plus_series,
            minus_series,
        })
    }
}

/// Least-squares slope of ln|a| against t over the window.
pub fn exponential_rate(series: &[(f64, f64)], t0: f64, t1: f64) -> f64 {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, a)| *t >= t0 && *t <= t1 + 1e-9 && *a != 0.0)
        .map(|(t, a)| (*t, a.abs().ln()))
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    linear_fit(&xs, &ys).0
}

/// Data (ψ₀ + b·d₀, ψ₁ + b·d₁) in (ψ, ∂_tψ) form on the radial sector.
#[derive(Debug, Clone)]
pub struct DataFamily {
    pub base_psi: Vec<f64>,
    pub base_vel: Vec<f64>,
    pub dir_psi: Vec<f64>,
    pub dir_vel: Vec<f64>,
}

impl DataFamily {
    /// Direction (χφ, s·μ·χφ) along the classifier's growing vector.
    pub fn along_growing(
        flow: &UnstableFlow,
        growing: UnstableDirection,
        base_psi: Vec<f64>,
        base_vel: Vec<f64>,
    ) -> Result<Self, ShootingError> {
        let n = flow.grid.len();
        if base_psi.len() != n || base_vel.len() != n {
            return Err(ShootingError::Length {
                expected: n,
                got: base_psi.len().min(base_vel.len()),
            });
        }
        let cutoff = Cutoff::new(flow.zvectors.cutoff.radius());
        let s = growing.velocity_sign();
        let dir_psi: Vec<f64> = (0..n)
            .map(|i| cutoff.eval(flow.grid.node(i)) * flow.phi_mu[i])
            .collect();
        let dir_vel = dir_psi.iter().map(|p| s * flow.mu * p).collect();
        Ok(DataFamily {
            base_psi,
            base_vel,
            dir_psi,
            dir_vel,
        })
    }

    pub fn at(&self, b: f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.base_psi.iter().zip(&self.dir_psi).map(|(x, d)| x + b * d).collect(),
            self.base_vel.iter().zip(&self.dir_vel).map(|(x, d)| x + b * d).collect(),
        )
    }
}

/// Closed-form b making the growing coefficient of the family vanish.
pub fn analytic_b0(flow: &UnstableFlow, family: &DataFamily, growing: UnstableDirection) -> Result<f64, ShootingError> {
    let g_base = flow.growing_coefficient(&family.base_psi, &family.base_vel, growing);
    let g_dir = flow.growing_coefficient(&family.dir_psi, &family.dir_vel, growing);
    let scale = flow.growing_coefficient(&flow.phi_mu, &flow.seed(growing, 1.0).1, growing).abs();
    if g_dir.abs() <= 1e-12 * scale {
        return Err(ShootingError::DegenerateFamily);
    }
    Ok(-g_base / g_dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitSide {
    Above,
    Below,
    Trapped,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trial {
    pub b0: f64,
    pub exit: ExitSide,
    pub exit_time: Option<f64>,
    /// Recorded (τ, a₊).
    pub series: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootingOptions {
    pub t_final: f64,
    /// Stop once the bracket is narrower than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// λ₀ = factor × the larger |a₊(0)| at the bracket ends.
    pub envelope_factor: f64,
    /// Record a₊ every this many steps.
    pub record_every: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            t_final: 40.0,
            tolerance: 1e-28,
            max_iterations: 120,
            envelope_factor: 1e3,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootingOutcome {
    pub b0_star: f64,
    /// Low word of the double-double b0_star.
    pub b0_star_low: f64,
    pub envelope: TrapEnvelope,
    pub brackets: Vec<(f64, f64)>,
    pub trials: Vec<Trial>,
    /// The trial run at b0_star.
    pub trapped: Trial,
}

impl ShootingOutcome {
    /// Fraction of recorded samples with |a₊| ∈ (λ/2, λ) along non-trapped
    /// trials at which d(a₊²)/dτ ≥ μa₊², with the derivative by centered
    /// differences. Returns (fraction, samples in band).
    pub fn escape_fraction(&self, mu: f64) -> (f64, usize) {
        let mut total = 0;
        let mut good = 0;
        for trial in self.trials.iter().filter(|t| t.exit != ExitSide::Trapped) {
            let s = &trial.series;
            for k in 1..s.len().saturating_sub(1) {
                let (t, a) = s[k];
                let lam = self.envelope.eval(t);
                if a.abs() > 0.5 * lam && a.abs() < lam {
                    total += 1;
                    let d = (s[k + 1].1.powi(2) - s[k - 1].1.powi(2)) / (s[k + 1].0 - s[k - 1].0);
                    if d >= mu * a * a {
                        good += 1;
                    }
                }
            }
        }
        if total == 0 {
            (1.0, 0)
        } else {
            (good as f64 / total as f64, total)
        }
    }
}

/// ℓ = 0 leapfrog in double-double arithmetic. Over T = 40 the unstable
/// mode amplifies by e^{40μ} ≈ 10²⁰, so a trajectory trapped under the
/// envelope needs the data parameter and the state resolved well beyond f64.
struct PreciseFlow<'a> {
    flow: &'a UnstableFlow,
    coupling: Vec<f64>,
    inv_weight: Vec<f64>,
    local: Vec<f64>,
}

impl<'a> PreciseFlow<'a> {
    fn new(flow: &'a UnstableFlow) -> Self {
        let op = flow.evolver.operator(Sector::RADIAL).expect("radial sector evolved");
        let (c, w, l) = op.stencil();
        PreciseFlow {
            flow,
            coupling: c.to_vec(),
            inv_weight: w.iter().map(|x| 1.0 / x).collect(),
            local: l.to_vec(),
        }
    }

    fn apply(&self, u: &[DoubleDouble], out: &mut [DoubleDouble]) {
        let n = u.len();
        out[0] = DoubleDouble::from(0.0);
        out[n - 1] = DoubleDouble::from(0.0);
        for i in 1..n - 1 {
            let right = (u[i + 1] - u[i]) * self.coupling[i];
            let left = (u[i] - u[i - 1]) * self.coupling[i - 1];
            out[i] = (right - left) * self.inv_weight[i] + u[i] * self.local[i];
        }
    }

    fn a_plus(&self, psi: &[DoubleDouble], pi: &[DoubleDouble], acc: &mut [DoubleDouble]) -> f64 {
        let dt = self.flow.dt;
        self.apply(psi, acc);
        let p: Vec<f64> = psi.iter().map(|x| x.to_f64()).collect();
        let v: Vec<f64> = pi.iter().zip(acc.iter()).map(|(q, a)| (*q + *a * (0.5 * dt)).to_f64()).collect();
        let w = self.flow.zvectors.weight();
        let mut state = PhaseState::new();
        state.insert(
            Sector::RADIAL,
            FirstOrderVector::from_velocity(Sector::RADIAL, p, &v, w, self.flow.grid.spacing()),
        );
        self.flow.zvectors.project_unstable(&state).0
    }

    fn trial(&self, family: &DataFamily, b0: DoubleDouble, envelope: &TrapEnvelope, opts: &ShootingOptions) -> Trial {
        let n = self.flow.grid.len();
        let dt = self.flow.dt;
        let zero = DoubleDouble::from(0.0);
        let mut psi: Vec<DoubleDouble> = (0..n)
            .map(|i| b0 * family.dir_psi[i] + family.base_psi[i])
            .collect();
        let vel: Vec<DoubleDouble> = (0..n)
            .map(|i| b0 * family.dir_vel[i] + family.base_vel[i])
            .collect();
        psi[0] = zero;
        psi[n - 1] = zero;
        let mut acc = vec![zero; n];
        let mut hv = vec![zero; n];
        self.apply(&psi, &mut acc);
        self.apply(&vel, &mut hv);
        let mut pi: Vec<DoubleDouble> = (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    zero
                } else {
                    vel[i] - acc[i] * (0.5 * dt) + hv[i] * (0.125 * dt * dt)
                }
            })
            .collect();
        let steps = (opts.t_final / dt).round() as usize;
        let every = opts.record_every.max(1);
        let mut series = Vec::new();
        let mut exit = ExitSide::Trapped;
        let mut exit_time = None;
        for k in 0..=steps {
            if k > 0 {
                self.apply(&psi, &mut acc);
                for i in 1..n - 1 {
                    pi[i] += acc[i] * dt;
                    psi[i] += pi[i] * dt;
                }
            }
            if k % every == 0 || k == steps {
                let t = k as f64 * dt;
                let ap = self.a_plus(&psi, &pi, &mut acc);
                series.push((t, ap));
                if ap.abs() > envelope.eval(t) {
                    exit = if ap > 0.0 { ExitSide::Above } else { ExitSide::Below };
                    exit_time = Some(t);
                    break;
                }
            }
        }
        Trial {
            b0: b0.to_f64(),
            exit,
            exit_time,
            series,
        }
    }
}

/// Runs one trial until |a₊| first exceeds λ(τ) or `t_final`.
pub fn run_trial(
    flow: &UnstableFlow,
    family: &DataFamily,
    b0: f64,
    envelope: &TrapEnvelope,
    opts: &ShootingOptions,
) -> Trial {
    PreciseFlow::new(flow).trial(family, DoubleDouble::from(b0), envelope, opts)
}

/// a₊ at t = 0 for parameter b.
pub fn initial_a_plus(flow: &UnstableFlow, family: &DataFamily, b0: f64) -> f64 {
    let (p0, p1) = family.at(b0);
    let st = flow
        .evolver
        .initial_state(0.0, &[(Sector::RADIAL, p0, p1)])
        .expect("lengths checked by the family");
    flow.zvectors.project_unstable(&flow.evolver.phase_state(&st)).0
}

/// Bisects b on the exit side until the bracket is narrower than
/// `tolerance`·max(1, |b|) or a trial stays trapped to `t_final`.
pub fn shoot(
    flow: &UnstableFlow,
    family: &DataFamily,
    bracket: (f64, f64),
    opts: &ShootingOptions,
) -> Result<ShootingOutcome, ShootingError> {
    let precise = PreciseFlow::new(flow);
    let amp = initial_a_plus(flow, family, bracket.0)
        .abs()
        .max(initial_a_plus(flow, family, bracket.1).abs());
    let envelope = TrapEnvelope::cubic(opts.envelope_factor * amp);
    let mut lo = DoubleDouble::from(bracket.0);
    let mut hi = DoubleDouble::from(bracket.1);
    let t_lo = precise.trial(family, lo, &envelope, opts);
    let t_hi = precise.trial(family, hi, &envelope, opts);
    if t_lo.exit == t_hi.exit {
        return Err(ShootingError::SameSide {
            lo: bracket.0,
            hi: bracket.1,
            side: t_lo.exit,
        });
    }
    let lo_side = t_lo.exit;
    let mut trials = vec![t_lo, t_hi];
    let mut brackets = vec![bracket];
    let mut trapped = None;
    let mut mid = (lo + hi) * 0.5;
    for _ in 0..opts.max_iterations {
        let width = (hi - lo).to_f64().abs();
        if width < opts.tolerance * mid.to_f64().abs().max(1.0) {
            break;
        }
        mid = (lo + hi) * 0.5;
        let t = precise.trial(family, mid, &envelope, opts);
        let side = t.exit;
        trials.push(t.clone());
        if side == ExitSide::Trapped {
            trapped = Some(t);
            lo = mid;
            hi = mid;
        } else if side == lo_side {
            lo = mid;
        } else {
            hi = mid;
        }
        brackets.push((lo.to_f64(), hi.to_f64()));
        if trapped.is_some() {
            break;
        }
    }
    let star = (lo + hi) * 0.5;
    let trapped = match trapped {
        Some(t) => t,
        None => precise.trial(family, star, &envelope, opts),
    };
    Ok(ShootingOutcome {
        b0_star: star.hi(),
        b0_star_low: star.lo(),
        envelope,
        brackets,
        trials,
        trapped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_decreases() {
        let e = TrapEnvelope::cubic(2.0);
        assert_eq!(e.eval(0.0), 2.0);
        assert!(e.eval(1.0) < e.eval(0.5));
    }

    #[test]
    fn rate_of_exact_exponential() {
        let s: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.2, 3.0 * (1.3 * k as f64 * 0.2).exp())).collect();
        assert!((exponential_rate(&s, 2.0, 9.0) - 1.3).abs() < 1e-12);
    }
}
