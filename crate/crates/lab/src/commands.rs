//! Subcommands. Each writes its outputs and `manifest.json` into the
//! resolved output directory.

use std::collections::BTreeMap;
use std::time::Instant;

use catenoid_core::darboux::{DarbouxContext, DarbouxReport};
use catenoid_core::flat_oracle::{probe_decay, Oracle, TailSource};
use catenoid_core::geometry::{metric_data, potential, solve_profile, special_modes};
use catenoid_core::modulation::{ModulationRecord, ZVectors};
use catenoid_core::operators::{spectrum, SectorOperator, SpectrumOptions};
use catenoid_core::Sector;
use clap::Subcommand;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{config_hash, Csv, OutputDir, RunManifest};
use crate::suite::{self, SuiteReport, REPORT_SCHEMA};
use crate::LabError;

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Catenoid profile, metric, potential and kernel modes on the grid.
    Profile,
    /// Top eigenvalues of the stability operator in one angular sector.
    Spectrum {
        #[arg(long, default_value_t = 0)]
        ell: u32,
    },
    /// Factorization, partner spectrum and inversion checks of the Darboux map.
    DarbouxCheck,
    /// Linear evolution with norm monitors.
    Evolve {
        /// Overrides the config's cutoff radius.
        #[arg(long)]
        rctf: Option<f64>,
        /// Also record a_± and the six pairings.
        #[arg(long)]
        track_modulation: bool,
    },
    /// Bisection for the trapped member of the first seeded data family.
    Shoot,
    /// Forward solution for the tail source at the probe radii.
    Tails {
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
    /// All acceptance experiments.
    Suite,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Spectrum { .. } => "spectrum",
            Command::DarbouxCheck => "darboux-check",
            Command::Evolve { .. } => "evolve",
            Command::Shoot => "shoot",
            Command::Tails { .. } => "tails",
            Command::Suite => "suite",
        }
    }
}

/// Runs one subcommand. A failed suite still writes its report and manifest
/// before returning [`LabError::CriteriaFailed`].
pub fn run(cmd: &Command, cfg: &ExperimentConfig) -> Result<RunManifest, LabError> {
    let mut cfg = cfg.clone();
    match cmd {
        Command::Evolve { rctf: Some(r), .. } => cfg.modulation.r_ctf = *r,
        Command::Tails { a, b } => {
            cfg.tails.a = a.unwrap_or(cfg.tails.a);
            cfg.tails.b = b.unwrap_or(cfg.tails.b);
        }
        _ => {}
    }
    cfg.validate()?;
    let mut out = OutputDir::create(&cfg.resolved_output_dir())?;
    let mut timings = BTreeMap::new();
    let start = Instant::now();
    let result = match cmd {
        Command::Profile => profile(&cfg, &mut out),
        Command::Spectrum { ell } => spectrum_cmd(&cfg, *ell, &mut out),
        Command::DarbouxCheck => darboux_check(&cfg, &mut out),
        Command::Evolve { track_modulation, .. } => evolve(&cfg, *track_modulation, &mut out),
        Command::Shoot => shoot(&cfg, &mut out),
        Command::Tails { .. } => tails(&cfg, &mut out),
        Command::Suite => suite_cmd(&cfg, &mut out, &mut timings),
    };
    timings.insert("total".to_string(), start.elapsed().as_secs_f64());
    match result {
        Ok(()) => Ok(out.finish(&cfg, cmd.name(), timings)?),
        Err(LabError::CriteriaFailed { failed, total }) => {
            out.finish(&cfg, cmd.name(), timings)?;
            Err(LabError::CriteriaFailed { failed, total })
        }
        Err(e) => Err(e.in_subcommand(cmd.name())),
    }
}

fn profile(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), LabError> {
    let g = cfg.radial_grid()?;
    let p = solve_profile(&g).map_err(|e| LabError::numerical("profile", e))?;
    let m = metric_data(&g);
    let v = potential(&g);
    let modes = special_modes(&g).map_err(|e| LabError::numerical("profile", e))?;
    let mut csv = Csv::new(&["rho", "f", "z", "weight", "flux", "V", "nu0", "phi_odd", "phi_even"]);
    for i in 0..g.len() {
        csv.push(vec![
            g.node(i),
            p.f_values[i],
            p.z_values[i],
            m.weight[i],
            m.flux[i],
            v.values[i],
            modes.nu0[i],
            modes.phi_odd[i],
            modes.phi_even[i],
        ]);
    }
    out.write_csv("profile.csv", &csv)?;
    Ok(())
}

fn spectrum_cmd(cfg: &ExperimentConfig, ell: u32, out: &mut OutputDir) -> Result<(), LabError> {
    let g = cfg.radial_grid()?;
    let rep = spectrum(ell, &g, SpectrumOptions::default()).map_err(|e| LabError::numerical("spectrum", e))?;
    out.write_json("spectrum.json", &rep)?;
    Ok(())
}

fn darboux_check(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), LabError> {
    let g = cfg.radial_grid()?;
    let ctx = DarbouxContext::new(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4);
    let samples: Vec<Vec<f64>> = suite::random_gaussians(&mut rng, 10, 20.0)
        .into_iter()
        .map(|b| suite::sample_gaussian(&g, b))
        .collect();
    let mut roundtrip: f64 = 0.0;
    for s in &samples {
        roundtrip = roundtrip.max(
            ctx.roundtrip_error(s, cfg.modulation.r_ctf)
                .map_err(|e| LabError::numerical("darboux", e))?,
        );
    }
    let partner = ctx.transformed_operator();
    let hi = (g.rho_max() - 1.0).min(60.0);
    let discrete = partner.discrete_potential();
    let discrete_vtilde = partner
        .midpoints
        .iter()
        .zip(&discrete)
        .filter(|(r, _)| (20.0..=hi).contains(&r.abs()))
        .map(|(r, v)| v.abs() * (1.0 + r * r).powi(2))
        .fold(0.0, f64::max);
    let report = DarbouxReport {
        factorization_defect: ctx.factorization_check(&samples),
        l2_eigencount: partner.count_above(1e-6),
        l2_top_eigenvalues: partner.top_eigenvalues(4),
        vtilde_decay_constant: ctx.vtilde_decay_constant(20.0, hi),
        discrete_vtilde_decay_constant: discrete_vtilde,
        roundtrip_error: roundtrip,
    };
    out.write_json("darboux.json", &report)?;
    Ok(())
}

fn sector_label(s: Sector) -> String {
    format!("l{}m{}", s.ell, s.m)
}

fn evolve(cfg: &ExperimentConfig, track: bool, out: &mut OutputDir) -> Result<(), LabError> {
    let g = cfg.radial_grid()?;
    let (ev, mut state, zvectors) = if cfg.evolution.project {
        let run = suite::projected_run(cfg, &g)?;
        (run.evolver, run.state, Some(run.zvectors))
    } else {
        let ev = suite::build_evolver(cfg, &g)?;
        let state = ev
            .initial_state(0.0, &suite::initial_data(cfg, &g))
            .map_err(|e| LabError::numerical("evolve", e))?;
        let z = if track {
            let op = match ev.operator(Sector::RADIAL) {
                Some(op) => op.clone(),
                None => SectorOperator::from_background(0, &g, &suite::background(cfg.evolution.background, &g)),
            };
            let (mu2, phi) = op.top_eigenpair();
            Some(
                ZVectors::new(&g, cfg.modulation.r_ctf, mu2.sqrt(), &phi)
                    .map_err(|e| LabError::numerical("modulation", e))?,
            )
        } else {
            None
        };
        (ev, state, z)
    };
    let mut monitor = catenoid_core::evolution::NormMonitor::new(catenoid_core::evolution::NormConfig {
        alpha: cfg.evolution.alpha,
        r_tilde: cfg.evolution.r_tilde,
        probes: cfg.evolution.probes.clone(),
    });
    let mut records: Vec<Result<ModulationRecord, _>> = Vec::new();
    ev.run(&mut state, cfg.evolution.t_final, cfg.evolution.record_every, |e, s| {
        monitor.record(e, s);
        if let (true, Some(z)) = (track, &zvectors) {
            records.push(z.record(s.time, &e.phase_state(s)));
        }
    });
    let s = &monitor.series;
    let mut norms = Csv::new(&[
        "t",
        "energy",
        "conserved_energy",
        "le_density",
        "le_integral",
        "le_star_density",
        "le_star_integral",
        "rp_e0",
        "rp_e1",
        "rp_e2",
        "rp_bulk0",
        "rp_bulk1",
        "rp_bulk2",
    ]);
    for k in 0..s.times.len() {
        norms.push(vec![
            s.times[k],
            s.energy[k],
            s.conserved_energy[k],
            s.le_density[k],
            s.le_integral[k],
            s.le_star_density[k],
            s.le_star_integral[k],
            s.rp_energies[0][k],
            s.rp_energies[1][k],
            s.rp_energies[2][k],
            s.rp_bulk[0][k],
            s.rp_bulk[1][k],
            s.rp_bulk[2][k],
        ]);
    }
    out.write_csv("norms.csv", &norms)?;

    let names: Vec<String> = std::iter::once("t".to_string())
        .chain(s.probes.iter().map(|p| format!("psi_{}_rho{}", sector_label(p.sector), p.rho)))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut probes = Csv::new(&header);
    for k in 0..s.times.len() {
        probes.push(std::iter::once(s.times[k]).chain(s.probes.iter().map(|p| p.values[k])).collect());
    }
    out.write_csv("probes.csv", &probes)?;

    if track {
        let mut csv = Csv::new(&[
            "t", "a_plus", "a_minus", "omega1", "omega2", "omega3", "omega4", "omega5", "omega6",
        ]);
        for r in records {
            let r = r.map_err(|e| LabError::numerical("modulation", e))?;
            let mut row = vec![r.time, r.a_plus, r.a_minus];
            row.extend_from_slice(&r.omega);
            csv.push(row);
        }
        out.write_csv("modulation.csv", &csv)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ShootingSummary {
    b0_star: f64,
    analytic_b0: f64,
    relative_error: f64,
    iterations: usize,
    bracket: (f64, f64),
    escape_fraction: f64,
    escape_samples: usize,
    trapped_series_path: String,
}

fn shoot(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), LabError> {
    let run = suite::shooting_runs(cfg, 1)?.remove(0);
    let mut csv = Csv::new(&["tau", "a_plus", "envelope"]);
    for ((t, a), env) in run.trapped_series.iter().zip(&run.trapped_envelope) {
        csv.push(vec![*t, *a, *env]);
    }
    out.write_csv("trapped.csv", &csv)?;
    out.write_json(
        "shooting.json",
        &ShootingSummary {
            b0_star: run.b0_star,
            analytic_b0: run.analytic_b0,
            relative_error: (run.b0_star - run.analytic_b0).abs() / run.analytic_b0.abs(),
            iterations: run.iterations,
            bracket: run.bracket,
            escape_fraction: run.escape_fraction,
            escape_samples: run.escape_samples,
            trapped_series_path: "trapped.csv".to_string(),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct TailFit {
    r: f64,
    exponent: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct TailSummary {
    a: f64,
    b: f64,
    window: [f64; 2],
    fits: Vec<TailFit>,
}

fn tails(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), LabError> {
    let t = &cfg.tails;
    let oracle = Oracle::new(TailSource::new(t.a, t.b).map_err(|e| LabError::numerical("tails", e))?);
    let mut csv = Csv::new(&["t", "r_probe", "u"]);
    let mut fits = Vec::new();
    for &r in &t.probes {
        let p = probe_decay(&oracle, r, (t.window[0], t.window[1]), t.samples)
            .map_err(|e| LabError::numerical("tails", e))?;
        for (time, u) in p.times.iter().zip(&p.values) {
            csv.push(vec![*time, r, *u]);
        }
        fits.push(TailFit {
            r,
            exponent: p.fit.exponent,
            std_error: p.fit.std_error,
        });
    }
    let summary = TailSummary {
        a: t.a,
        b: t.b,
        window: t.window,
        fits,
    };
    let footer = serde_json::to_string(&summary).map_err(|e| LabError::numerical("tails", e))?;
    out.write_csv("tails.csv", &csv.with_footer(footer))?;
    Ok(())
}

fn suite_cmd(cfg: &ExperimentConfig, out: &mut OutputDir, timings: &mut BTreeMap<String, f64>) -> Result<(), LabError> {
    let mut criteria = Vec::new();
    for (id, f) in suite::CRITERIA {
        let start = Instant::now();
        let rep = f(cfg).map_err(|e| e.in_subcommand(&format!("criterion {id}")))?;
        let secs = start.elapsed().as_secs_f64();
        eprintln!("criterion {id:>2} {:<16} {} ({secs:.1} s)", rep.title, if rep.pass { "pass" } else { "FAIL" });
        timings.insert(format!("criterion_{id:02}"), secs);
        criteria.push(rep);
    }
    let failed = criteria.iter().filter(|c| !c.pass).count();
    let total = criteria.len();
    let report = SuiteReport {
        schema: REPORT_SCHEMA.to_string(),
        config_hash: config_hash(cfg),
        pass: failed == 0,
        criteria,
    };
    out.write_json("report.json", &report)?;
    if failed > 0 {
        return Err(LabError::CriteriaFailed { failed, total });
    }
    Ok(())
}
