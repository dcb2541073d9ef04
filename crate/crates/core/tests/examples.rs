//! Worked examples with hand-checkable answers.

use catenoid_core::darboux::DarbouxContext;
use catenoid_core::evolution::{decay_fit, Evolver};
use catenoid_core::flat_oracle::{GaussianSource, Oracle, TailSource};
use catenoid_core::geometry::{
    self, asymptotic_half_separation, metric_data, potential, solve_profile, special_modes, RadialGrid,
};
use catenoid_core::modulation::{pair, FirstOrderVector, ZVectors};
use catenoid_core::operators::{assemble, weighted_norm, NormExponent};
use catenoid_core::shooting::{analytic_b0, DataFamily, UnstableDirection, UnstableFlow};
use catenoid_core::{ModeField, Sector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(rho_max: f64, h: f64) -> RadialGrid {
    RadialGrid::with_spacing(rho_max, h).unwrap()
}

#[test]
fn profile_starts_at_the_neck() {
    let g = grid(20.0, 0.05);
    let p = solve_profile(&g).unwrap();
    let c = g.center();
    assert!((p.f_values[c] - 1.0).abs() < 1e-14);
    let slope = (p.f_values[c + 1] - p.f_values[c - 1]) / (2.0 * g.spacing());
    assert!(slope.abs() < 1e-12);
    assert_eq!(p.z_values[c], 0.0);
}

#[test]
fn height_is_monotone_and_below_the_planes() {
    let g = grid(40.0, 0.05);
    let p = solve_profile(&g).unwrap();
    let s = asymptotic_half_separation().unwrap();
    assert!(p.z_values.windows(2).all(|w| w[1] > w[0]));
    assert!(p.z_values.iter().all(|z| z.abs() < s));
    // the gap to ±S closes like 1/ρ
    let gap = s - p.z_values[g.len() - 1];
    assert!(gap > 0.0 && gap < 1.0 / 40.0);
}

#[test]
fn weight_at_the_neck() {
    assert!((geometry::weight(0.0) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    let g = grid(10.0, 0.1);
    let m = metric_data(&g);
    assert!((m.weight[g.center()] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn flat_at_infinity() {
    for rho in [1e3, 1e4, 1e5] {
        assert!((geometry::flux(rho) / geometry::weight(rho) - 1.0).abs() < 2.0 / rho);
        let j2 = 1.0 + rho * rho;
        assert!((geometry::potential_at(rho) * j2.powi(3) - 6.0).abs() < 1e-9);
    }
}

#[test]
fn special_mode_shapes() {
    let g = grid(200.0, 0.1);
    let m = special_modes(&g).unwrap();
    let n = g.len();
    let c = g.center();
    assert!((m.nu0[c] - 1.0).abs() < 1e-15);
    for i in 0..n {
        assert!(m.nu0[i] > 0.0);
        assert!((m.nu0[i] - m.nu0[n - 1 - i]).abs() < 1e-14);
        assert!((m.phi_odd[i] + m.phi_odd[n - 1 - i]).abs() < 1e-12);
        assert!((m.phi_even[i] - m.phi_even[n - 1 - i]).abs() < 1e-9);
    }
    assert!((m.phi_odd[n - 1] - 1.0).abs() < 1e-3);
    assert!((m.phi_odd[0] + 1.0).abs() < 1e-3);
    // asymptotically constant, not growing
    let late = (m.phi_even[n - 1] - m.phi_even[n - 101]).abs();
    assert!(late < 1e-3 * m.phi_even[n - 1].abs());
}

#[test]
fn radial_operator_on_constants_is_the_potential() {
    let g = grid(20.0, 0.05);
    let h0 = assemble(0, &g);
    let v = potential(&g).values;
    let out = h0.apply(&vec![1.0; g.len()]);
    for i in 1..g.len() - 1 {
        assert!((out[i] - v[i]).abs() < 1e-12 * v[i].abs().max(1.0), "node {i}");
    }
}

#[test]
fn zero_field_has_zero_norm() {
    let g = grid(20.0, 0.1);
    let z = ModeField::zeros(Sector::RADIAL, g.len());
    for p in [NormExponent::Finite(1.0), NormExponent::Finite(2.0), NormExponent::Infinity] {
        assert_eq!(weighted_norm(&z, &g, p, 2, 0.5).unwrap().value, 0.0);
    }
}

#[test]
fn single_shell_field_norm() {
    // unit field on the shell 8 ≤ ρ < 16 only: the γ = 0, s = 0 norm is its L²_w mass
    let g = grid(40.0, 0.05);
    let u = g.sample(|r| if (8.0..16.0).contains(&r) { 1.0 } else { 0.0 });
    let f = ModeField::new(Sector::RADIAL, u);
    let n = weighted_norm(&f, &g, NormExponent::Finite(2.0), 0, 0.0).unwrap();
    let mass: f64 = (0..g.len())
        .map(|i| g.node(i))
        .filter(|r| (8.0..16.0).contains(r))
        .map(|r| geometry::weight(r) * g.spacing())
        .sum();
    assert!((n.value - mass.sqrt()).abs() < 1e-12 * mass.sqrt());
    let bound = 2f64.powf(3.0 * 0.5) * n.value;
    let shifted = weighted_norm(&f, &g, NormExponent::Finite(2.0), 0, 0.5).unwrap();
    assert!((shifted.value - bound).abs() < 1e-12 * bound);
}

#[test]
fn darboux_passes_radial_fields_through() {
    let g = grid(20.0, 0.1);
    let ctx = DarbouxContext::new(&g);
    let f = ModeField::new(Sector::RADIAL, g.sample(|r| (-r * r).exp()));
    assert_eq!(ctx.apply(&f).values, f.values);
}

#[test]
fn darboux_sends_rho_nu0_to_nu0() {
    // the quotient ρ is linear, so centred differences reproduce ν₀ to round-off
    for h in [0.1, 0.05, 0.025] {
        let g = grid(20.0, h);
        let ctx = DarbouxContext::new(&g);
        let f = ModeField::new(Sector::new(1, 0), g.sample(|r| r * geometry::translation_mode(r)));
        let out = ctx.apply(&f);
        for i in 1..g.len() - 1 {
            assert!((out.values[i] - geometry::translation_mode(g.node(i))).abs() < 1e-13);
        }
        assert!(ctx.apply(&ModeField::new(Sector::new(1, 1), ctx.nu0.clone())).max_abs() < 1e-13);
    }
}

#[test]
fn factorization_defect_shrinks_like_h_squared() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let bumps: Vec<(f64, f64)> = (0..10)
        .map(|_| (rng.gen_range(-15.0..15.0), rng.gen_range(1.0..3.0)))
        .collect();
    let mut defects = Vec::new();
    for h in [0.05, 0.025] {
        let g = grid(40.0, h);
        let ctx = DarbouxContext::new(&g);
        let samples: Vec<Vec<f64>> = bumps
            .iter()
            .map(|(c, w)| g.sample(|r| (-((r - c) / w).powi(2)).exp()))
            .collect();
        defects.push(ctx.factorization_check(&samples));
    }
    assert!(defects[0] / defects[1] > 3.6, "{defects:?}");
}

#[test]
fn pure_kernel_datum_reconstructs_nu0() {
    let g = grid(40.0, 0.05);
    let ctx = DarbouxContext::new(&g);
    let datum = ctx.pairing_datum(&ctx.nu0, 10.0);
    let out = ctx.invert(&vec![0.0; g.len()], datum, 10.0).unwrap();
    for (a, b) in out.iter().zip(&ctx.nu0) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn decay_fit_of_synthetic_series() {
    let geometric: Vec<f64> = (0..60).map(|k| 50.0 * 8f64.powf(k as f64 / 59.0)).collect();
    let uniform: Vec<f64> = (0..60).map(|k| 50.0 + 350.0 * k as f64 / 59.0).collect();
    for times in [&geometric, &uniform] {
        let pure: Vec<f64> = times.iter().map(|t| t.powi(-2)).collect();
        let fit = decay_fit(times, &pure, 50.0, 400.0).unwrap();
        assert!((fit.exponent + 2.0).abs() < 0.01);
    }
    // the local log-slope of t⁻² log t is −2 + 1/log t
    let (steep, shallow) = (-2.0 + 1.0 / 400f64.ln(), -2.0 + 1.0 / 50f64.ln());
    let logged = |times: &[f64]| times.iter().map(|t| t.powi(-2) * t.ln()).collect::<Vec<_>>();
    let geo = decay_fit(&geometric, &logged(&geometric), 50.0, 400.0).unwrap().exponent;
    assert!(geo > steep && geo < shallow, "{geo}");
    let uni = decay_fit(&uniform, &logged(&uniform), 50.0, 400.0).unwrap().exponent;
    assert!(uni > -2.0 && uni < -1.8, "{uni}");
}

#[test]
fn unstable_mode_grows_at_rate_mu() {
    let g = grid(30.0, 0.1);
    let (mu2, phi) = assemble(0, &g).top_eigenpair();
    let mu = mu2.sqrt();
    let ev = Evolver::catenoid(&g, &[Sector::RADIAL], 0.02, 0.9).unwrap();
    let vel: Vec<f64> = phi.iter().map(|p| mu * p).collect();
    let mut st = ev.initial_state(0.0, &[(Sector::RADIAL, phi.clone(), vel)]).unwrap();
    let mut samples = Vec::new();
    ev.run(&mut st, 6.0, 50, |_, s| {
        let psi = &s.sectors[&Sector::RADIAL].psi.values;
        samples.push((s.time, psi.iter().map(|v| v * v).sum::<f64>().sqrt().ln()));
    });
    let (t0, l0) = samples[1];
    let (t1, l1) = *samples.last().unwrap();
    let rate = (l1 - l0) / (t1 - t0);
    assert!((rate - mu).abs() < 0.01 * mu, "rate {rate}, mu {mu}");
}

#[test]
fn unstable_coordinates_of_the_z_vectors() {
    let g = grid(40.0, 0.05);
    let (mu2, phi) = assemble(0, &g).top_eigenpair();
    let z = ZVectors::new(&g, 10.0, mu2.sqrt(), &phi).unwrap();
    let as_state = |v: &FirstOrderVector| [(Sector::RADIAL, v.clone())].into_iter().collect();
    let (p, m) = z.project_unstable(&as_state(&z.plus));
    assert!((p - 1.0).abs() < 1e-12 && m.abs() < 1e-12, "{p} {m}");
    let (p, m) = z.project_unstable(&as_state(&z.minus));
    assert!(p.abs() < 1e-12 && (m - 1.0).abs() < 1e-12, "{p} {m}");
    assert!((pair(&z.plus, &z.minus).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn analytic_trap_parameter_examples() {
    let g = grid(30.0, 0.1);
    let (mu2, phi) = assemble(0, &g).top_eigenpair();
    let flow = UnstableFlow::new(&g, 0.05, 0.9, 8.0, mu2.sqrt(), phi).unwrap();
    let growing = UnstableDirection::Plus;
    let n = g.len();
    let zero = DataFamily::along_growing(&flow, growing, vec![0.0; n], vec![0.0; n]).unwrap();
    assert_eq!(analytic_b0(&flow, &zero, growing).unwrap(), 0.0);
    let seeded = DataFamily::along_growing(&flow, growing, zero.dir_psi.clone(), zero.dir_vel.clone()).unwrap();
    assert!((analytic_b0(&flow, &seeded, growing).unwrap() + 1.0).abs() < 1e-12);
    // data along Z₋ alone is already on the stable side
    let psi = flow.zvectors.minus.psi.clone();
    let vel = flow.zvectors.minus.velocity(flow.zvectors.weight());
    let stable = DataFamily::along_growing(&flow, growing, psi, vel).unwrap();
    assert!(analytic_b0(&flow, &stable, growing).unwrap().abs() < 1e-12);
}

#[test]
fn oracle_is_zero_before_the_source_turns_on() {
    let o = Oracle::new(TailSource::new(3.0, 3.0).unwrap());
    assert_eq!(o.eval(-1.0, 1.0).unwrap(), 0.0);
    let o = Oracle::new(GaussianSource {
        sigma: 1.0,
        center: 3.0,
        width: 1.0,
    });
    assert_eq!(o.eval(-0.5, 2.0).unwrap(), 0.0);
}
