//! The acceptance experiments. Each returns its measured values with the
//! target and verdict; nothing here reads the clock, so reports are
//! reproducible byte for byte.

use std::f64::consts::PI;

use catenoid_core::darboux::DarbouxContext;
use catenoid_core::evolution::{
    linear_fit, rp_energies_sector, smooth_bump, Evolver, NormConfig, NormMonitor, SeparableSource, WaveState,
};
use catenoid_core::flat_oracle::{
    cross_validate, dichotomy_experiment, geometric_times, grid_silence, CompactSource, GaussianSource, Oracle,
    TailSource,
};
use catenoid_core::geometry::{
    asymptotic_half_separation, first_integral_residual_closed, half_separation_plus_radicand, solve_profile,
    RadialGrid,
};
use catenoid_core::modulation::{d_matrix, pair, project_compact, FirstOrderVector, ProjectedRun, ZVectors};
use catenoid_core::operators::{assemble, kernel_residuals, spectrum, Background, SpectrumOptions};
use catenoid_core::shooting::{analytic_b0, shoot, DataFamily, ShootingError, ShootingOptions, UnstableFlow};
use catenoid_core::Sector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{BackgroundKind, ExperimentConfig};
use crate::LabError;

/// One measured quantity against its target.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: format!("<= {limit:e}"),
            pass: value <= limit,
        }
    }

    pub fn below(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: format!("< {limit:e}"),
            pass: value < limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: format!(">= {limit:e}"),
            pass: value >= limit,
        }
    }

    pub fn equals(name: &str, value: f64, target: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: format!("== {target:e}"),
            pass: value == target,
        }
    }

    pub fn within(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: format!("{target} ± {tol}"),
            pass: (value - target).abs() <= tol,
        }
    }

    pub fn finite(name: &str, value: f64) -> Self {
        Check {
            name: name.into(),
            value,
            target: "finite".into(),
            pass: value.is_finite(),
        }
    }
}

/// A recorded value without a verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Note {
    pub name: String,
    pub value: f64,
}

fn note(name: &str, value: f64) -> Note {
    Note {
        name: name.into(),
        value,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub budget_seconds: f64,
    pub checks: Vec<Check>,
    pub notes: Vec<Note>,
    pub pass: bool,
}

impl CriterionReport {
    fn new(id: u32, title: &str, budget_seconds: f64, checks: Vec<Check>, notes: Vec<Note>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        CriterionReport {
            id,
            title: title.into(),
            budget_seconds,
            checks,
            notes,
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub schema: String,
    pub config_hash: String,
    pub criteria: Vec<CriterionReport>,
    pub pass: bool,
}

pub const REPORT_SCHEMA: &str = "catenoid-lab/report/v1";

pub type CriterionFn = fn(&ExperimentConfig) -> Result<CriterionReport, LabError>;

/// All criteria in order.
pub const CRITERIA: [(u32, CriterionFn); 11] = [
    (1, geometry),
    (2, kernel_exactness),
    (3, spectrum_counts),
    (4, darboux),
    (5, evolution),
    (6, unstable_growth),
    (7, local_energy),
    (8, modulation),
    (9, shooting),
    (10, tails),
    (11, rp_hierarchy),
];

/// Least-squares slope of log e against log h.
pub fn fitted_order(hs: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    linear_fit(&xs, &ys).0
}

pub fn grid(rho_max: f64, h: f64) -> Result<RadialGrid, LabError> {
    RadialGrid::with_spacing(rho_max, h).map_err(|e| LabError::numerical("grid", e))
}

pub fn background(kind: BackgroundKind, g: &RadialGrid) -> Background {
    match kind {
        BackgroundKind::Catenoid => Background::catenoid(g),
        BackgroundKind::KernelExact => Background::catenoid_kernel_exact(g),
    }
}

fn max_abs_diff_on_coarse(coarse: &[f64], fine: &[f64]) -> f64 {
    coarse
        .iter()
        .enumerate()
        .map(|(i, c)| (c - fine[2 * i]).abs())
        .fold(0.0, f64::max)
}

/// Criterion 1: profile first integral and the quadrature of the axial height.
pub fn geometry(_cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let g = grid(60.0, 0.05)?;
    let closed = first_integral_residual_closed(&g);
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let mut profiles = Vec::new();
    for h in hs {
        profiles.push(solve_profile(&grid(20.0, h)?).map_err(|e| LabError::numerical("profile", e))?);
    }
    let z_diffs: Vec<f64> = (0..3)
        .map(|k| max_abs_diff_on_coarse(&profiles[k].z_values, &profiles[k + 1].z_values))
        .collect();
    let residuals: Vec<f64> = profiles.iter().map(|p| p.first_integral_residual()).collect();
    let s = profiles[0].s;
    let below_plane = profiles
        .iter()
        .all(|p| p.z_values.iter().all(|z| z.abs() < s));
    let checks = vec![
        Check::below("closed-form first-integral residual", closed, 1e-10),
        Check::at_least("z_values refinement order", fitted_order(&hs[..3], &z_diffs), 1.9),
        Check::at_least("quadrature first-integral residual order", fitted_order(&hs, &residuals), 1.9),
        Check::equals("|z| < S at every node", below_plane as u8 as f64, 1.0),
    ];
    let plus = half_separation_plus_radicand().map_err(|e| LabError::numerical("profile", e))?;
    let notes = vec![
        note("S (radicand f^4 - 1)", s),
        note("S (printed radicand f^4 + 1)", plus),
        note("z refinement difference h=0.1", z_diffs[0]),
        note("z refinement difference h=0.05", z_diffs[1]),
        note("z refinement difference h=0.025", z_diffs[2]),
    ];
    Ok(CriterionReport::new(1, "geometry", 1.0, checks, notes))
}

/// Criterion 2: residuals of the explicit zero-energy solutions.
pub fn kernel_exactness(_cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let hs = [0.1, 0.05, 0.025];
    let mut rows = Vec::new();
    for h in hs {
        rows.push(kernel_residuals(&grid(30.0, h)?).map_err(|e| LabError::numerical("kernel", e))?);
    }
    let pick = |f: fn(&catenoid_core::operators::KernelResiduals) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let nu = pick(|r| r.h1_nu0);
    let odd = pick(|r| r.h0_phi_odd);
    let even = pick(|r| r.h0_phi_even);
    let checks = vec![
        Check::at_least("order of |H1 nu0|_w", fitted_order(&hs, &nu), 1.9),
        Check::at_least("order of |H0 phi_odd|_w", fitted_order(&hs, &odd), 1.9),
        Check::at_least("order of |H0 phi_even|_w", fitted_order(&hs, &even), 1.9),
    ];
    let mut notes = Vec::new();
    for (k, h) in hs.iter().enumerate() {
        notes.push(note(&format!("|H1 nu0|_w at h={h}"), nu[k]));
        notes.push(note(&format!("|H0 phi_odd|_w at h={h}"), odd[k]));
        notes.push(note(&format!("|H0 phi_even|_w at h={h}"), even[k]));
    }
    Ok(CriterionReport::new(2, "kernel exactness", 10.0, checks, notes))
}

/// Criterion 3: one positive eigenvalue in ℓ = 0, none for ℓ = 1, 2, 3.
pub fn spectrum_counts(_cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let g = grid(60.0, 0.025)?;
    let opts = SpectrumOptions {
        top_k: 4,
        mu2_tolerance: f64::INFINITY,
    };
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for ell in 0..=3u32 {
        let rep = spectrum(ell, &g, opts).map_err(|e| LabError::numerical("spectrum", e))?;
        let expected = if ell == 0 { 1.0 } else { 0.0 };
        checks.push(Check::equals(
            &format!("eigenvalues of H{ell} above 1e-6"),
            rep.count_above(1e-6) as f64,
            expected,
        ));
        notes.push(note(&format!("top eigenvalue of H{ell}"), rep.eigenvalues[0]));
        notes.push(note(&format!("top grid eigenvalue of H{ell}"), rep.grid_eigenvalues[0]));
        if ell == 0 {
            let (m, s) = (rep.mu2.unwrap_or(f64::NAN), rep.mu2_shooting.unwrap_or(f64::NAN));
            checks.push(Check::below("matrix vs shooting mu^2, relative", (m - s).abs() / m, 1e-6));
            notes.push(note("mu^2 matrix", m));
            notes.push(note("mu^2 shooting", s));
        }
    }
    Ok(CriterionReport::new(3, "spectrum", 30.0, checks, notes))
}

/// Gaussian bumps with random centers, widths and signs.
pub fn random_gaussians(rng: &mut ChaCha8Rng, count: usize, reach: f64) -> Vec<(f64, f64, f64)> {
    (0..count)
        .map(|_| {
            let c = rng.gen_range(-reach..reach);
            let w = rng.gen_range(0.8..3.0);
            let a = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..2.0);
            (a, c, w)
        })
        .collect()
}

pub fn sample_gaussian(g: &RadialGrid, (a, c, w): (f64, f64, f64)) -> Vec<f64> {
    g.sample(|r| a * (-((r - c) / w).powi(2)).exp())
}

/// Criterion 4: factorization, partner spectrum, Ṽ decay and round trip.
pub fn darboux(cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4);
    let bumps = random_gaussians(&mut rng, 10, 20.0);
    let hs = [0.05, 0.025, 0.0125];
    let mut defects = Vec::new();
    let mut roundtrips = Vec::new();
    let r_ctf = cfg.modulation.r_ctf;
    for h in hs {
        let g = grid(60.0, h)?;
        let ctx = DarbouxContext::new(&g);
        let samples: Vec<Vec<f64>> = bumps.iter().map(|b| sample_gaussian(&g, *b)).collect();
        defects.push(ctx.factorization_check(&samples));
        let mut worst: f64 = 0.0;
        for s in &samples {
            worst = worst.max(ctx.roundtrip_error(s, r_ctf).map_err(|e| LabError::numerical("darboux", e))?);
        }
        roundtrips.push(worst);
    }
    let g = grid(60.0, 0.05)?;
    let ctx = DarbouxContext::new(&g);
    let partner = ctx.transformed_operator();
    let count = partner.count_above(1e-6);
    let vtilde = ctx.vtilde_decay_constant(20.0, 60.0);
    let discrete = partner.discrete_potential();
    let discrete_vtilde = partner
        .midpoints
        .iter()
        .zip(&discrete)
        .filter(|(r, _)| (20.0..=59.0).contains(&r.abs()))
        .map(|(r, v)| v.abs() * (1.0 + r * r).powi(2))
        .fold(0.0, f64::max);
    let checks = vec![
        Check::at_least("factorization defect order", fitted_order(&hs, &defects), 1.9),
        Check::equals("partner eigenvalues above 1e-6", count as f64, 0.0),
        Check::finite("sup |Vtilde|<rho>^4 on [20, 60]", vtilde),
        Check::at_least("round-trip error order", fitted_order(&hs, &roundtrips), 1.9),
    ];
    let mut notes = vec![
        note("partner top eigenvalue", partner.top_eigenvalues(1)[0]),
        note("sup |discrete Vtilde|<rho>^4 on [20, 59]", discrete_vtilde),
    ];
    for (k, h) in hs.iter().enumerate() {
        notes.push(note(&format!("factorization defect at h={h}"), defects[k]));
        notes.push(note(&format!("round-trip error at h={h}"), roundtrips[k]));
    }
    Ok(CriterionReport::new(4, "darboux", 30.0, checks, notes))
}

fn gaussian_data(g: &RadialGrid, center: f64, width: f64) -> Vec<f64> {
    g.sample(|r| (-((r - center) / width).powi(2)).exp())
}

/// Criterion 5: energy, convergence order and boundary silence.
pub fn evolution(_cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let two = Sector::new(2, 0);
    // energy
    let g = grid(40.0, 0.05)?;
    let ev = Evolver::catenoid(&g, &[two], 0.02, 0.9).map_err(|e| LabError::numerical("evolve", e))?;
    let psi = gaussian_data(&g, 1.0, 1.5);
    let vel = g.sample(|r| 0.5 * r * (-(r * r) / 4.0).exp());
    let mut st = ev
        .initial_state(0.0, &[(two, psi, vel)])
        .map_err(|e| LabError::numerical("evolve", e))?;
    let e0 = ev.discrete_energy(&st);
    let c0 = ev.conserved_energy(&st);
    let mut drift: f64 = 0.0;
    let mut oscillation: f64 = 0.0;
    ev.run(&mut st, 20.0, 1, |e, s| {
        drift = drift.max((e.discrete_energy(s) - e0).abs() / e0.abs());
        oscillation = oscillation.max((e.conserved_energy(s) - c0).abs() / c0.abs());
    });

    // convergence
    let hs = [0.05, 0.025, 0.0125, 0.00625];
    let mut sols = Vec::new();
    for h in hs {
        let g = grid(30.0, h)?;
        let ev = Evolver::catenoid(&g, &[two], 0.4 * h, 0.9).map_err(|e| LabError::numerical("evolve", e))?;
        let psi = g.sample(|r| (-r * r).exp());
        let mut st = ev
            .initial_state(0.0, &[(two, psi, vec![0.0; g.len()])])
            .map_err(|e| LabError::numerical("evolve", e))?;
        ev.run(&mut st, 10.0, 0, |_, _| {});
        sols.push(st.sectors[&two].psi.values.clone());
    }
    let diffs: Vec<f64> = (0..3).map(|k| max_abs_diff_on_coarse(&sols[k], &sols[k + 1])).collect();
    let last_order = (diffs[1] / diffs[2]).log2();

    // boundary silence
    let sectors = [Sector::RADIAL, Sector::new(1, 0), two];
    let run = |rho_max: f64| -> Result<(RadialGrid, WaveState), LabError> {
        let g = grid(rho_max, 0.05)?;
        let ev = Evolver::catenoid(&g, &sectors, 0.02, 0.9).map_err(|e| LabError::numerical("evolve", e))?;
        let data: Vec<_> = sectors
            .iter()
            .map(|s| {
                (
                    *s,
                    g.sample(|r| smooth_bump(r, -3.0, 4.0)),
                    g.sample(|r| 0.5 * smooth_bump(r, -2.0, 2.0)),
                )
            })
            .collect();
        let mut st = ev.initial_state(0.0, &data).map_err(|e| LabError::numerical("evolve", e))?;
        ev.run(&mut st, 10.0, 0, |_, _| {});
        Ok((g, st))
    };
    let (small_grid, small) = run(40.0)?;
    let (big_grid, big) = run(80.0)?;
    let offset = big_grid.center() - small_grid.center();
    let mut mismatches = 0usize;
    for s in &sectors {
        let a = &small.sectors[s];
        let b = &big.sectors[s];
        for i in 0..small_grid.len() {
            if a.psi.values[i].to_bits() != b.psi.values[i + offset].to_bits()
                || a.pi.values[i].to_bits() != b.pi.values[i + offset].to_bits()
            {
                mismatches += 1;
            }
        }
    }
    let checks = vec![
        Check::at_most("relative energy drift over T=20", drift, 1e-4),
        Check::at_least("convergence order (fitted)", fitted_order(&hs[..3], &diffs), 1.9),
        Check::at_least("convergence order (finest pair)", last_order, 1.9),
        Check::equals("boundary-silence mismatched values", mismatches as f64, 0.0),
    ];
    let mut notes = vec![note("integer-time energy oscillation, relative", oscillation)];
    for (k, h) in hs[..3].iter().enumerate() {
        notes.push(note(&format!("refinement difference at h={h}"), diffs[k]));
    }
    Ok(CriterionReport::new(5, "evolution", 120.0, checks, notes))
}

fn unstable_flow(g: &RadialGrid, dt: f64, r_ctf: f64) -> Result<UnstableFlow, LabError> {
    let (mu2, phi) = assemble(0, g).top_eigenpair();
    UnstableFlow::new(g, dt, 0.9, r_ctf, mu2.sqrt(), phi).map_err(|e| LabError::numerical("shooting", e))
}

/// Criterion 6: growth and decay rates of the unstable pair.
pub fn unstable_growth(cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let g = grid(60.0, 0.05)?;
    let flow = unstable_flow(&g, 0.01, cfg.modulation.r_ctf)?;
    let c = flow
        .classify_directions(2.0, 10.0)
        .map_err(|e| LabError::numerical("classify", e))?;
    let (grow, decay) = match c.growing {
        catenoid_core::shooting::UnstableDirection::Plus => (c.rate_plus, c.rate_minus),
        catenoid_core::shooting::UnstableDirection::Minus => (c.rate_minus, c.rate_plus),
    };
    let mu = flow.mu;
    let checks = vec![
        Check::at_most("growing seed |rate - mu|/mu", (grow - mu).abs() / mu, 0.01),
        Check::at_most("decaying seed |rate + mu|/mu", (decay + mu).abs() / mu, 0.01),
    ];
    let notes = vec![
        note("mu of the grid operator", mu),
        note("growing rate", grow),
        note("decaying rate", decay),
        note(
            "growing direction is Z_plus (1) or Z_minus (0)",
            matches!(c.growing, catenoid_core::shooting::UnstableDirection::Plus) as u8 as f64,
        ),
    ];
    Ok(CriterionReport::new(6, "unstable growth", 60.0, checks, notes))
}

/// Grid for a homogeneous run of duration `t` with boundaries causally silent.
fn silent_grid(cfg: &ExperimentConfig, t: f64, reach: f64) -> Result<RadialGrid, LabError> {
    let h = 2.0 * cfg.grid.rho_max / (cfg.grid.n_points - 1) as f64;
    let needed = std::f64::consts::SQRT_2 * t + reach + 2.0;
    grid(cfg.grid.rho_max.max(needed), h)
}

/// Evolver for the config's background, sectors and sources on `g`.
pub fn build_evolver(cfg: &ExperimentConfig, g: &RadialGrid) -> Result<Evolver, LabError> {
    let e = &cfg.evolution;
    let bg = background(e.background, g);
    let mut ev =
        Evolver::new(g, &bg, &e.sectors, cfg.evolution_dt(), 1.0).map_err(|err| LabError::numerical("evolve", err))?;
    for s in &e.sources {
        let mut src = SeparableSource::new(s.sector, s.radial.sample(g), s.time);
        if let Some(r0) = s.cutoff {
            src = src.with_cutoff(g, r0);
        }
        ev = ev.with_source(src).map_err(|err| LabError::numerical("source", err))?;
    }
    Ok(ev)
}

/// The config's initial data sampled on `g`.
pub fn initial_data(cfg: &ExperimentConfig, g: &RadialGrid) -> Vec<(Sector, Vec<f64>, Vec<f64>)> {
    cfg.evolution
        .data
        .iter()
        .map(|d| (d.sector, d.psi.sample(g), d.velocity.sample(g)))
        .collect()
}

/// Compact data from the config with a_± and the six pairings removed.
pub fn projected_run(cfg: &ExperimentConfig, g: &RadialGrid) -> Result<ProjectedRun, LabError> {
    let ev = build_evolver(cfg, g)?;
    let r = cfg.modulation.r_ctf;
    let profile = g.sample(|x| smooth_bump(x, -0.6 * r, 0.6 * r));
    project_compact(ev, r, &profile, &initial_data(cfg, g)).map_err(|err| LabError::numerical("projection", err))
}

/// Linear interpolation of a recorded series at time `t`.
fn value_at(times: &[f64], values: &[f64], t: f64) -> f64 {
    let k = times.partition_point(|x| *x < t).clamp(1, times.len() - 1);
    let (t0, t1) = (times[k - 1], times[k]);
    let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    values[k - 1] + s * (values[k] - values[k - 1])
}

/// Criterion 7: running local-energy integral from T = 40 to T = 80.
pub fn local_energy(cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let g = silent_grid(cfg, 80.0, 8.0)?;
    let run = projected_run(cfg, &g)?;
    let alphas = [cfg.evolution.alpha, 0.3, 0.5, 1.0];
    let mut monitors: Vec<NormMonitor> = alphas
        .iter()
        .map(|a| {
            NormMonitor::new(NormConfig {
                alpha: *a,
                r_tilde: cfg.evolution.r_tilde,
                probes: Vec::new(),
            })
        })
        .collect();
    let every = ((0.5 / run.evolver.dt()).round() as usize).max(1);
    let mut st = run.state.clone();
    run.evolver.run(&mut st, 80.0, every, |e, s| {
        for m in monitors.iter_mut() {
            m.record(e, s);
        }
    });
    let growth = |m: &NormMonitor| {
        let s = &m.series;
        value_at(&s.times, &s.le_integral, 80.0) / value_at(&s.times, &s.le_integral, 40.0) - 1.0
    };
    let energy0 = monitors[0].series.energy[0];
    let le_ratio = value_at(&monitors[0].series.times, &monitors[0].series.le_integral, 80.0) / energy0;
    let residual_omega = run.residual.omega.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let checks = vec![Check::below(
        &format!("LE integral growth from T=40 to T=80 (alpha={})", cfg.evolution.alpha),
        growth(&monitors[0]),
        0.05,
    )];
    let mut notes = vec![
        note("LE integral to T=80 over initial energy norm", le_ratio),
        note("max |Omega(psi, Z_k)| after projection", residual_omega),
        note("|a_plus| after projection", run.residual.a_plus.abs()),
        note("|a_minus| after projection", run.residual.a_minus.abs()),
    ];
    for (m, a) in monitors.iter().zip(alphas).skip(1) {
        notes.push(note(&format!("LE integral growth at alpha={a}"), growth(m)));
    }
    Ok(CriterionReport::new(7, "local energy", 180.0, checks, notes))
}

fn random_vector(rng: &mut ChaCha8Rng, g: &RadialGrid, sector: Sector) -> FirstOrderVector {
    let psi = sample_gaussian(g, random_gaussians(rng, 1, 10.0)[0]);
    let dot = sample_gaussian(g, random_gaussians(rng, 1, 10.0)[0]);
    FirstOrderVector::new(sector, psi, dot, g.spacing())
}

/// d_ii in the limit R → ∞ from values at R, 2R, 4R, with error terms 1/R and 1/R³.
fn extrapolate_cutoff(rs: [f64; 3], ds: [f64; 3]) -> f64 {
    // solve d = L + a/R + b/R³ exactly
    let m = rs.map(|r| [1.0, 1.0 / r, r.powi(-3)]);
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let mut num = m;
    for k in 0..3 {
        num[k][0] = ds[k];
    }
    det(num) / det(m)
}

/// Criterion 8: pairing algebra and the translation matrix.
pub fn modulation(cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x8);
    let g = grid(300.0, 0.05)?;
    let mut antisym: f64 = 0.0;
    let mut self_pair: f64 = 0.0;
    for _ in 0..20 {
        let u = random_vector(&mut rng, &g, Sector::RADIAL);
        let v = random_vector(&mut rng, &g, Sector::RADIAL);
        let uv = pair(&u, &v).map_err(|e| LabError::numerical("pair", e))?;
        let vu = pair(&v, &u).map_err(|e| LabError::numerical("pair", e))?;
        antisym = antisym.max((uv + vu).abs());
        self_pair = self_pair.max(pair(&u, &u).map_err(|e| LabError::numerical("pair", e))?.abs());
    }
    let gz = grid(60.0, 0.05)?;
    let (mu2, phi) = assemble(0, &gz).top_eigenpair();
    let z = ZVectors::new(&gz, cfg.modulation.r_ctf, mu2.sqrt(), &phi).map_err(|e| LabError::numerical("zvectors", e))?;
    let norm = pair(&z.plus, &z.minus).map_err(|e| LabError::numerical("pair", e))?;

    let rs = [8.0, 16.0, 32.0, 64.0, 128.0];
    let mut diag = Vec::new();
    let mut off: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for r in rs {
        let d = d_matrix(&g, r).map_err(|e| LabError::numerical("d_matrix", e))?;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    off = off.max(d.entries[i][j].abs());
                }
            }
            spread = spread.max((d.entries[i][i] - d.entries[0][0]).abs());
        }
        diag.push(d.entries[0][0]);
    }
    let increasing = diag.windows(2).all(|w| w[1] > w[0]);
    let limit = extrapolate_cutoff([32.0, 64.0, 128.0], [diag[2], diag[3], diag[4]]);
    let s = asymptotic_half_separation().map_err(|e| LabError::numerical("geometry", e))?;
    let oracle = 4.0 * PI / 3.0 * 2.0 * s;
    let checks = vec![
        Check::equals("max |Omega(u,v) + Omega(v,u)|", antisym, 0.0),
        Check::equals("max |Omega(u,u)|", self_pair, 0.0),
        Check::at_most("|Omega(Z_plus, Z_minus) - 1|", (norm - 1.0).abs(), 1e-12),
        Check::equals("max off-diagonal |d_ij|", off, 0.0),
        Check::equals("spread of diagonal d_ii", spread, 0.0),
        Check::equals("d_ii increasing in R_ctf", increasing as u8 as f64, 1.0),
        Check::at_most("|d_ii(R -> inf) - improper integral|", (limit - oracle).abs(), 1e-6),
    ];
    let mut notes = vec![note("improper-integral value of d_ii", oracle), note("extrapolated d_ii", limit)];
    for (r, d) in rs.iter().zip(&diag) {
        notes.push(note(&format!("d_ii at R_ctf={r}"), *d));
    }
    Ok(CriterionReport::new(8, "modulation", 30.0, checks, notes))
}

/// Random compact base data for a shooting family.
fn random_base(rng: &mut ChaCha8Rng, g: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    let a = rng.gen_range(0.3..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let c = rng.gen_range(-4.0..4.0);
    let w = rng.gen_range(1.5..3.0);
    let b = rng.gen_range(-0.5..0.5);
    let c2 = rng.gen_range(-3.0..3.0);
    let w2 = rng.gen_range(2.0..5.0);
    (
        g.sample(|r| a * smooth_bump(r, c - w, c + w)),
        g.sample(|r| b * r * smooth_bump(r, c2 - w2, c2 + w2)),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyResult {
    pub analytic_b0: f64,
    pub b0_star: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub worst_envelope_ratio: f64,
    pub escape_fraction: f64,
    pub escape_samples: usize,
    pub trapped_series: Vec<(f64, f64)>,
    pub trapped_envelope: Vec<f64>,
}

/// Runs `families` random families; the bracket is widened about its
/// center until the two ends exit on opposite sides.
pub fn shooting_runs(cfg: &ExperimentConfig, families: usize) -> Result<Vec<FamilyResult>, LabError> {
    let s = &cfg.shooting;
    // the trap is decided inside |ρ| < R_ctf; a longer line only costs time
    let g = grid(cfg.grid.rho_max.min(60.0), cfg.spacing())?;
    let flow = unstable_flow(&g, cfg.shooting_dt(), cfg.modulation.r_ctf)?;
    let growing = flow
        .classify_directions(2.0, 10.0)
        .map_err(|e| LabError::numerical("classify", e))?
        .growing;
    let opts = ShootingOptions {
        t_final: s.t_final,
        tolerance: s.tolerance,
        max_iterations: s.max_iterations,
        envelope_factor: s.envelope_factor,
        record_every: 10,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9);
    let mut out = Vec::new();
    for _ in 0..families {
        let (bp, bv) = random_base(&mut rng, &g);
        let family =
            DataFamily::along_growing(&flow, growing, bp, bv).map_err(|e| LabError::numerical("family", e))?;
        let oracle = analytic_b0(&flow, &family, growing).map_err(|e| LabError::numerical("analytic_b0", e))?;
        let mut bracket = (s.bracket[0], s.bracket[1]);
        let outcome = loop {
            match shoot(&flow, &family, bracket, &opts) {
                Ok(o) => break o,
                Err(ShootingError::SameSide { .. }) if bracket.1 - bracket.0 < 1e6 => {
                    let (c, r) = (0.5 * (bracket.0 + bracket.1), bracket.1 - bracket.0);
                    bracket = (c - r, c + r);
                }
                Err(e) => return Err(LabError::numerical("shoot", e)),
            }
        };
        let worst = outcome
            .trapped
            .series
            .iter()
            .map(|(t, a)| a.abs() / outcome.envelope.eval(*t))
            .fold(0.0, f64::max);
        let (fraction, samples) = outcome.escape_fraction(flow.mu);
        out.push(FamilyResult {
            analytic_b0: oracle,
            b0_star: outcome.b0_star,
            bracket,
            iterations: outcome.brackets.len() - 1,
            worst_envelope_ratio: worst,
            escape_fraction: fraction,
            escape_samples: samples,
            trapped_envelope: outcome.trapped.series.iter().map(|(t, _)| outcome.envelope.eval(*t)).collect(),
            trapped_series: outcome.trapped.series,
        });
    }
    Ok(out)
}

/// Criterion 9: bisection against the analytic projection.
pub fn shooting(cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let runs = shooting_runs(cfg, cfg.shooting.families)?;
    let mut rel: f64 = 0.0;
    let mut env: f64 = 0.0;
    let mut reached: f64 = f64::INFINITY;
    let mut good = 0.0;
    let mut total = 0usize;
    for r in &runs {
        rel = rel.max((r.b0_star - r.analytic_b0).abs() / r.analytic_b0.abs());
        env = env.max(r.worst_envelope_ratio);
        reached = reached.min(r.trapped_series.last().map_or(0.0, |p| p.0));
        good += r.escape_fraction * r.escape_samples as f64;
        total += r.escape_samples;
    }
    let fraction = if total > 0 { good / total as f64 } else { 0.0 };
    let checks = vec![
        Check::equals("families", runs.len() as f64, cfg.shooting.families as f64),
        Check::at_most("max |b0* - analytic|/|analytic|", rel, 1e-4),
        Check::at_most("max |a_plus|/lambda along trapped runs", env, 1.0),
        Check::at_least("trapped runs reach T", reached, cfg.shooting.t_final - 1e-9),
        Check::at_least("escape samples with d(a+^2)/dt >= mu a+^2", fraction, 0.95),
    ];
    let mut notes = vec![note("escape samples in band", total as f64)];
    for (k, r) in runs.iter().enumerate() {
        notes.push(note(&format!("family {k} analytic b0"), r.analytic_b0));
        notes.push(note(&format!("family {k} bisection b0"), r.b0_star));
    }
    Ok(CriterionReport::new(9, "shooting", 600.0, checks, notes))
}

/// Fitted exponent of r·u along the ray r = t/2.
pub fn ray_exponent(a: f64, b: f64, window: (f64, f64)) -> Result<f64, LabError> {
    let oracle = Oracle::new(TailSource::new(a, b).map_err(|e| LabError::numerical("tails", e))?);
    let times = geometric_times(window.0, window.1, 16);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in times {
        let r = 0.5 * t;
        let u = oracle.eval(t, r).map_err(|e| LabError::numerical("tails", e))?;
        xs.push(t.ln());
        ys.push((r * u).abs().ln());
    }
    Ok(linear_fit(&xs, &ys).0)
}

/// Criterion 10: interior tail exponents, Huygens silence and grid agreement.
pub fn tails(cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let window = (cfg.tails.window[0], cfg.tails.window[1]);
    let probes = [1.0, 5.0];
    let slow = dichotomy_experiment(3.0, 3.0, &probes, window).map_err(|e| LabError::numerical("tails", e))?;
    let fast = dichotomy_experiment(4.0, 2.5, &probes, window).map_err(|e| LabError::numerical("tails", e))?;
    let huygens = Oracle::new(CompactSource {
        duration: 1.0,
        radius: 2.0,
    })
    .eval(30.0, 1.0)
    .map_err(|e| LabError::numerical("tails", e))?;
    let source = GaussianSource {
        sigma: 1.0,
        center: 4.0,
        width: 1.0,
    };
    let radii: Vec<f64> = (1..=24).map(f64::from).collect();
    let hs = [0.1, 0.05, 0.025];
    let mut disc = Vec::new();
    for h in hs {
        disc.push(
            cross_validate(source, h, 20.0, &radii)
                .map_err(|e| LabError::numerical("cross_validate", e))?
                .max_discrepancy,
        );
    }
    let silence = grid_silence(
        CompactSource {
            duration: 1.0,
            radius: 2.0,
        },
        0.05,
        1.0,
        30.0,
    )
    .map_err(|e| LabError::numerical("grid_silence", e))?;
    let checks = vec![
        Check::within("a=3, b=3 exponent at r=1", slow.probes[0].fit.exponent, -2.0, 0.15),
        Check::within("a=4, b=2.5 exponent at r=1", fast.probes[0].fit.exponent, -2.5, 0.15),
        Check::equals("oracle u(30, 1) for a compact source", huygens, 0.0),
        Check::at_least("grid vs oracle discrepancy order", fitted_order(&hs, &disc), 1.9),
    ];
    let mut notes = vec![
        note("a=3, b=3 exponent at r=5", slow.probes[1].fit.exponent),
        note("a=4, b=2.5 exponent at r=5", fast.probes[1].fit.exponent),
        note("a=4, b=2.5 exponent of r*u along r=t/2", ray_exponent(4.0, 2.5, window)?),
        note("grid |u(30, 1)| / (h^2 peak) at h=0.05", silence.late_value.abs() / (0.0025 * silence.peak)),
    ];
    for (k, h) in hs.iter().enumerate() {
        notes.push(note(&format!("grid vs oracle discrepancy at h={h}"), disc[k]));
    }
    Ok(CriterionReport::new(10, "tails", 600.0, checks, notes))
}

/// E¹ minima over dyadic windows [2^k, 2^{k+1}] relative to E²(0), with
/// the time of each minimum.
pub fn dyadic_minima(cfg: &ExperimentConfig, t_end: f64) -> Result<(Vec<(f64, f64)>, f64), LabError> {
    let g = silent_grid(cfg, t_end, 8.0)?;
    let run = projected_run(cfg, &g)?;
    let r_tilde = cfg.evolution.r_tilde;
    let energies = |ev: &Evolver, s: &WaveState| {
        let mut e = [0.0; 3];
        for (sec, ss) in &s.sectors {
            let v = ev.velocity(s, *sec);
            let r = rp_energies_sector(&ss.psi.values, &v, ev.grid(), r_tilde);
            for p in 0..3 {
                e[p] += r[p];
            }
        }
        e
    };
    let e2 = energies(&run.evolver, &run.state)[2];
    let every = ((0.1 / run.evolver.dt()).round() as usize).max(1);
    let mut series = Vec::new();
    let mut st = run.state.clone();
    run.evolver.run(&mut st, t_end, every, |e, s| series.push((s.time, energies(e, s)[1])));
    let mut minima = Vec::new();
    let mut lo = 1.0;
    while 2.0 * lo <= t_end + 1e-9 {
        let best = series
            .iter()
            .filter(|(t, _)| *t >= lo && *t <= 2.0 * lo)
            .fold((f64::NAN, f64::INFINITY), |b, p| if p.1 < b.1 { *p } else { b });
        minima.push((best.0, best.1 / e2));
        lo *= 2.0;
    }
    Ok((minima, e2))
}

/// Criterion 11: dyadic decay of E¹ for projected compact data.
pub fn rp_hierarchy(cfg: &ExperimentConfig) -> Result<CriterionReport, LabError> {
    let (minima, e2) = dyadic_minima(cfg, 128.0)?;
    let xs: Vec<f64> = minima.iter().map(|m| m.0.ln()).collect();
    let ys: Vec<f64> = minima.iter().map(|m| m.1.ln()).collect();
    let exponent = linear_fit(&xs, &ys).0;
    let constant = minima.iter().map(|(t, v)| t * v).fold(0.0, f64::max);
    let checks = vec![Check::at_most("fitted exponent of dyadic E1 minima / E2(0)", exponent, -0.8)];
    let mut notes = vec![
        note("E2 at start", e2),
        note("max tau * E1(tau)/E2(0) over the sequence", constant),
    ];
    for (t, v) in &minima {
        notes.push(note(&format!("E1/E2(0) at tau={t:.1}"), *v));
    }
    Ok(CriterionReport::new(11, "r^p hierarchy", 180.0, checks, notes))
}
