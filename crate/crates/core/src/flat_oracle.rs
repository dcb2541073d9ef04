//! Forward solution of (−∂_t² + Δ)u = f on Minkowski ℝ¹⁺³ for radial f, by
//! integration over the backward characteristic triangle of v = r·u:
//!
//!   u(t, r) = −(1/2r) ∫₀^t ∫_{|r−(t−s)|}^{r+t−s} y f(s, y) dy ds,
//!   u(t, 0) = −∫₀^t (t−s) f(s, t−s) ds.

use serde::Serialize;
use thiserror::Error;

use crate::evolution::{decay_fit, smooth_bump, DecayFit, EvolutionError, Evolver, SeparableSource, TimeProfile};
use crate::field::Sector;
use crate::geometry::{japanese, RadialGrid};
use crate::operators::Background;
use crate::quadrature::{integrate, integrate_pieces, QuadratureError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Fit(#[from] EvolutionError),
    #[error("invalid tail source: {0}")]
    InvalidSource(String),
    #[error("negative radius {0}")]
    NegativeRadius(f64),
}

/// A radial source f(s, y) with its support, if bounded.
pub trait RadialSource {
    fn value(&self, s: f64, y: f64) -> f64;

    /// [start, end] in time outside of which f vanishes.
    fn time_support(&self) -> (f64, f64);

    /// Radii outside of which f vanishes.
    fn radial_support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    /// ∫_{y₁}^{y₂} y f(s, y) dy in closed form, when available.
    fn radial_moment(&self, _s: f64, _y1: f64, _y2: f64) -> Option<f64> {
        None
    }
}

/// f = ⟨r⟩⁻ᵃ⟨t − shift⟩⁻ᵇ for t ≥ 0, optionally only where r ≥ r₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSource {
    pub a: f64,
    pub b: f64,
    pub shift: f64,
    pub cutoff: Option<f64>,
}

impl TailSource {
    pub fn new(a: f64, b: f64) -> Result<Self, OracleError> {
        if !(a >= 3.0) {
            return Err(OracleError::InvalidSource(format!("spatial exponent {a} < 3")));
        }
        if !(b > 1.0) {
            return Err(OracleError::InvalidSource(format!("temporal exponent {b} ≤ 1")));
        }
        Ok(TailSource {
            a,
            b,
            shift: 0.0,
            cutoff: None,
        })
    }

    pub fn with_cutoff(mut self, r0: f64) -> Result<Self, OracleError> {
        if !(r0 >= 0.0) {
            return Err(OracleError::InvalidSource(format!("cutoff {r0} < 0")));
        }
        self.cutoff = Some(r0);
        Ok(self)
    }

    fn time_factor(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            japanese(s - self.shift).powf(-self.b)
        }
    }

    /// Antiderivative of y⟨y⟩⁻ᵃ.
    fn primitive(&self, y: f64) -> f64 {
        (1.0 + y * y).powf(1.0 - 0.5 * self.a) / (2.0 - self.a)
    }
}

impl RadialSource for TailSource {
    fn value(&self, s: f64, y: f64) -> f64 {
        if self.cutoff.is_some_and(|r0| y < r0) {
            return 0.0;
        }
        self.time_factor(s) * japanese(y).powf(-self.a)
    }

    fn time_support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn radial_support(&self) -> (f64, f64) {
        (self.cutoff.unwrap_or(0.0), f64::INFINITY)
    }

    fn radial_moment(&self, s: f64, y1: f64, y2: f64) -> Option<f64> {
        let lo = y1.max(self.cutoff.unwrap_or(0.0));
        if lo >= y2 {
            return Some(0.0);
        }
        Some(self.time_factor(s) * (self.primitive(y2) - self.primitive(lo)))
    }
}

/// Smooth bump in time on (0, duration) times a smooth bump in r on [0, radius).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompactSource {
    pub duration: f64,
    pub radius: f64,
}

impl RadialSource for CompactSource {
    fn value(&self, s: f64, y: f64) -> f64 {
        smooth_bump(s, 0.0, self.duration) * smooth_bump(y, -self.radius, self.radius)
    }

    fn time_support(&self) -> (f64, f64) {
        (0.0, self.duration)
    }

    fn radial_support(&self) -> (f64, f64) {
        (0.0, self.radius)
    }
}

/// e^{−r²/σ²}·e^{−((t−c)/w)²}, switched on at t = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianSource {
    pub sigma: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianSource {
    fn time_factor(&self, s: f64) -> f64 {
        if s < 0.0 {
            0.0
        } else {
            (-((s - self.center) / self.width).powi(2)).exp()
        }
    }
}

impl RadialSource for GaussianSource {
    fn value(&self, s: f64, y: f64) -> f64 {
        self.time_factor(s) * (-(y / self.sigma).powi(2)).exp()
    }

    fn time_support(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn radial_moment(&self, s: f64, y1: f64, y2: f64) -> Option<f64> {
        let s2 = self.sigma * self.sigma;
        let g = |y: f64| -0.5 * s2 * (-(y * y) / s2).exp();
        Some(self.time_factor(s) * (g(y2) - g(y1)))
    }
}

/// Point evaluator of the forward solution.
#[derive(Debug, Clone, Copy)]
pub struct Oracle<S> {
    pub source: S,
    pub tolerance: Tolerance,
}

impl<S: RadialSource> Oracle<S> {
    pub fn new(source: S) -> Self {
        Oracle {
            source,
            tolerance: Tolerance::new(1e-300, 1e-10),
        }
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tolerance = tol;
        self
    }

    /// Time interval of s that can influence (t, r), and the kink s = t − r.
    fn window(&self, t: f64, r: f64) -> Option<(f64, f64, Vec<f64>)> {
        let (ts, te) = self.source.time_support();
        let (ya, yb) = self.source.radial_support();
        // The triangle reaches radii y ∈ [|r − (t−s)|, r + t − s].
        let mut s0 = ts.max(0.0);
        let mut s1 = t.min(te);
        // need r + t − s ≥ ya
        s1 = s1.min(t + r - ya);
        // need |r − (t − s)| ≤ yb, i.e. t − r − yb ≤ s ≤ t + yb − r
        if yb.is_finite() {
            s0 = s0.max(t - r - yb);
            s1 = s1.min(t - r + yb);
        }
        if s0 >= s1 {
            return None;
        }
        let kink = t - r;
        let breaks = if kink > s0 && kink < s1 { vec![s0, kink, s1] } else { vec![s0, s1] };
        Some((s0, s1, breaks))
    }

    /// u(t, r) through the closed-form inner moment when the source has one,
    /// otherwise through [`Oracle::eval_generic`].
    pub fn eval(&self, t: f64, r: f64) -> Result<f64, OracleError> {
        if r < 0.0 {
            return Err(OracleError::NegativeRadius(r));
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        if self.source.radial_moment(0.0, 0.0, 1.0).is_none() {
            return self.eval_generic(t, r);
        }
        let Some((_, _, breaks)) = self.window(t, r) else {
            return Ok(0.0);
        };
        if r < 1e-8 {
            return self.eval_axis(t, &breaks);
        }
        let src = &self.source;
        let v = integrate_pieces(
            |s| {
                let tau = t - s;
                src.radial_moment(s, (r - tau).abs(), r + tau).expect("checked above")
            },
            &breaks,
            self.tolerance,
        )?;
        Ok(-v / (2.0 * r))
    }

    fn eval_axis(&self, t: f64, breaks: &[f64]) -> Result<f64, OracleError> {
        let src = &self.source;
        let v = integrate_pieces(|s| (t - s) * src.value(s, t - s), breaks, self.tolerance)?;
        Ok(-v)
    }

    /// u(t, r) by nested adaptive quadrature of y f(s, y) over the triangle.
    pub fn eval_generic(&self, t: f64, r: f64) -> Result<f64, OracleError> {
        if r < 0.0 {
            return Err(OracleError::NegativeRadius(r));
        }
        if t <= 0.0 {
            return Ok(0.0);
        }
        let Some((_, _, breaks)) = self.window(t, r) else {
            return Ok(0.0);
        };
        if r < 1e-8 {
            return self.eval_axis(t, &breaks);
        }
        let (ya, yb) = self.source.radial_support();
        let src = &self.source;
        let tol = self.tolerance;
        let inner_tol = Tolerance::new(tol.abs, 0.1 * tol.rel);
        let mut failure = None;
        let v = integrate_pieces(
            |s| {
                let tau = t - s;
                let lo = (r - tau).abs().max(ya);
                let hi = (r + tau).min(yb);
                if lo >= hi {
                    return 0.0;
                }
                match integrate(|y| y * src.value(s, y), lo, hi, inner_tol) {
                    Ok(x) => x,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            },
            &breaks,
            tol,
        );
        if let Some(e) = failure {
            return Err(e.into());
        }
        Ok(-v? / (2.0 * r))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeFit {
    pub r: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fit: DecayFit,
}

/// `count` times spaced geometrically over [t0, t1].
pub fn geometric_times(t0: f64, t1: f64, count: usize) -> Vec<f64> {
    let q = (t1 / t0).powf(1.0 / (count - 1) as f64);
    (0..count).map(|k| if k + 1 == count { t1 } else { t0 * q.powi(k as i32) }).collect()
}

/// Fitted decay exponent of |u(t, r)| over the window.
pub fn probe_decay<S: RadialSource>(
    oracle: &Oracle<S>,
    r: f64,
    window: (f64, f64),
    count: usize,
) -> Result<ProbeFit, OracleError> {
    let times = geometric_times(window.0, window.1, count);
    let values = times.iter().map(|t| oracle.eval(*t, r)).collect::<Result<Vec<_>, _>>()?;
    let mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let fit = decay_fit(&times, &mags, window.0, window.1)?;
    Ok(ProbeFit { r, times, values, fit })
}

#[derive(Debug, Clone, Serialize)]
pub struct DichotomyResult {
    pub source: TailSource,
    pub probes: Vec<ProbeFit>,
}

/// Interior decay exponents of the forward solution for f = ⟨r⟩⁻ᵃ⟨t⟩⁻ᵇ at
/// each probe radius over the window.
pub fn dichotomy_experiment(a: f64, b: f64, probes: &[f64], window: (f64, f64)) -> Result<DichotomyResult, OracleError> {
    let source = TailSource::new(a, b)?;
    let oracle = Oracle::new(source);
    let probes = probes
        .iter()
        .map(|r| probe_decay(&oracle, *r, window, 16))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DichotomyResult { source, probes })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossValidation {
    pub spacing: f64,
    pub time: f64,
    /// (r, grid u, oracle u).
    pub samples: Vec<(f64, f64, f64)>,
    pub max_discrepancy: f64,
}

/// Evolves ψ = ρu on the flat line with source ρf(|ρ|) for the Gaussian
/// source and compares with the oracle at time `t_end` and radii `probes`.
/// The domain is wide enough that the boundary stays causally silent.
pub fn cross_validate(source: GaussianSource, spacing: f64, t_end: f64, probes: &[f64]) -> Result<CrossValidation, OracleError> {
    let rho_max = (t_end + 6.0 * source.sigma + 5.0).ceil();
    let grid = RadialGrid::with_spacing(rho_max, spacing).map_err(|e| OracleError::InvalidSource(e.to_string()))?;
    let dt = 0.5 * spacing;
    let ev = Evolver::new(&grid, &Background::flat_line(&grid), &[Sector::RADIAL], dt, 0.9)?;
    let profile = grid.sample(|rho| rho * source.value(1.0, rho.abs()) / source.time_factor(1.0));
    let ev = ev.with_source(SeparableSource::new(
        Sector::RADIAL,
        profile,
        TimeProfile::Gaussian {
            center: source.center,
            width: source.width,
        },
    ))?;
    let mut state = ev.initial_state(0.0, &[])?;
    ev.run(&mut state, t_end, 0, |_, _| {});
    let oracle = Oracle::new(source);
    let psi = &state.sectors[&Sector::RADIAL].psi.values;
    let mut samples = Vec::new();
    let mut max_discrepancy: f64 = 0.0;
    for &r in probes {
        let i = grid.nearest(r);
        let rr = grid.node(i);
        let ug = psi[i] / rr;
        let uo = oracle.eval(state.time, rr)?;
        max_discrepancy = max_discrepancy.max((ug - uo).abs());
        samples.push((rr, ug, uo));
    }
    Ok(CrossValidation {
        spacing,
        time: state.time,
        samples,
        max_discrepancy,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSilence {
    pub spacing: f64,
    pub late_value: f64,
    pub peak: f64,
}

/// Grid solution at (t_late, r) for the compact source, and the peak |u(t, r)|
/// over the run.
pub fn grid_silence(source: CompactSource, spacing: f64, r: f64, t_late: f64) -> Result<GridSilence, OracleError> {
    let rho_max = (t_late + source.radius + 5.0).ceil();
    let grid = RadialGrid::with_spacing(rho_max, spacing).map_err(|e| OracleError::InvalidSource(e.to_string()))?;
    let dt = 0.5 * spacing;
    let ev = Evolver::new(&grid, &Background::flat_line(&grid), &[Sector::RADIAL], dt, 0.9)?;
    let profile = grid.sample(|rho| rho * smooth_bump(rho, -source.radius, source.radius));
    let ev = ev.with_source(SeparableSource::new(
        Sector::RADIAL,
        profile,
        TimeProfile::Bump {
            start: 0.0,
            end: source.duration,
        },
    ))?;
    let i = grid.nearest(r);
    let rr = grid.node(i);
    let mut state = ev.initial_state(0.0, &[])?;
    let mut peak: f64 = 0.0;
    ev.run(&mut state, t_late, 1, |_, s| {
        peak = peak.max((s.sectors[&Sector::RADIAL].psi.values[i] / rr).abs());
    });
    Ok(GridSilence {
        spacing,
        late_value: state.sectors[&Sector::RADIAL].psi.values[i] / rr,
        peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishes_before_switch_on() {
        let o = Oracle::new(TailSource::new(3.0, 3.0).unwrap());
        assert_eq!(o.eval(-1.0, 2.0).unwrap(), 0.0);
        assert_eq!(o.eval(0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_and_generic_routes_agree() {
        let o = Oracle::new(TailSource::new(4.0, 2.5).unwrap());
        for (t, r) in [(3.0, 1.0), (10.0, 5.0), (40.0, 1.0), (7.0, 0.0)] {
            let a = o.eval(t, r).unwrap();
            let b = o.eval_generic(t, r).unwrap();
            assert!((a - b).abs() <= 1e-8 * a.abs(), "t={t} r={r}: {a} vs {b}");
        }
    }

    #[test]
    fn invalid_exponents_are_rejected() {
        assert!(TailSource::new(2.0, 3.0).is_err());
        assert!(TailSource::new(3.0, 1.0).is_err());
    }
}
