//! Structural invariants under random inputs.

use catenoid_core::darboux::DarbouxContext;
use catenoid_core::evolution::{decay_fit, Evolver};
use catenoid_core::flat_oracle::{GaussianSource, Oracle, RadialSource};
use catenoid_core::geometry::{self, RadialGrid};
use catenoid_core::modulation::{pair, FirstOrderVector};
use catenoid_core::Sector;
use proptest::prelude::*;

fn bump(g: &RadialGrid, a: f64, c: f64, w: f64) -> Vec<f64> {
    g.sample(|r| a * (-((r - c) / w).powi(2)).exp())
}

/// k times a Gaussian source, without the closed-form radial moment.
struct Scaled(GaussianSource, f64);

impl RadialSource for Scaled {
    fn value(&self, s: f64, y: f64) -> f64 {
        self.1 * self.0.value(s, y)
    }

    fn time_support(&self) -> (f64, f64) {
        self.0.time_support()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn background_is_even(rho in 0.0f64..500.0) {
        prop_assert_eq!(geometry::weight(rho), geometry::weight(-rho));
        prop_assert_eq!(geometry::flux(rho), geometry::flux(-rho));
        prop_assert_eq!(geometry::potential_at(rho), geometry::potential_at(-rho));
        prop_assert!(geometry::weight(rho) > 0.0);
    }

    #[test]
    fn grid_refinement_keeps_nodes(rho_max in 5.0f64..50.0, k in 0usize..40) {
        let g = RadialGrid::new(rho_max, 65).unwrap();
        let f = g.refined();
        let i = k.min(g.len() - 1);
        prop_assert!((f.node(2 * i) - g.node(i)).abs() < 1e-12 * rho_max);
        prop_assert_eq!(f.len(), 2 * g.len() - 1);
    }

    #[test]
    fn pairing_is_antisymmetric(
        a in -2.0f64..2.0, c in -8.0f64..8.0, w in 0.5f64..3.0,
        b in -2.0f64..2.0, d in -8.0f64..8.0, v in 0.5f64..3.0,
    ) {
        let g = RadialGrid::with_spacing(20.0, 0.1).unwrap();
        let x = FirstOrderVector::new(Sector::RADIAL, bump(&g, a, c, w), bump(&g, b, d, v), g.spacing());
        let y = FirstOrderVector::new(Sector::RADIAL, bump(&g, b, c, v), bump(&g, a, d, w), g.spacing());
        let xy = pair(&x, &y).unwrap();
        let yx = pair(&y, &x).unwrap();
        prop_assert_eq!(xy, -yx);
        prop_assert_eq!(pair(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn darboux_adjoint_is_exact(
        a in -2.0f64..2.0, c in -8.0f64..8.0, w in 0.5f64..3.0,
        b in -2.0f64..2.0, d in -8.0f64..8.0,
    ) {
        let g = RadialGrid::with_spacing(20.0, 0.1).unwrap();
        let ctx = DarbouxContext::new(&g);
        let phi = bump(&g, a, c, w);
        let psi: Vec<f64> = g.midpoints().iter().map(|r| b * (-((r - d) / w).powi(2)).exp()).collect();
        let lhs: f64 = ctx.d_line(&phi).iter().zip(&psi).map(|(x, y)| x * y).sum();
        let rhs: f64 = phi.iter().zip(ctx.d_star_line(&psi)).map(|(x, y)| x * y).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (lhs.abs() + rhs.abs() + 1e-30));
    }

    #[test]
    fn darboux_kills_every_multiple_of_the_kernel(k in -1e3f64..1e3) {
        let g = RadialGrid::with_spacing(20.0, 0.1).unwrap();
        let ctx = DarbouxContext::new(&g);
        let f: Vec<f64> = ctx.y0.iter().map(|v| k * v).collect();
        let out = ctx.d_line(&f);
        prop_assert!(out.iter().all(|v| v.abs() <= 1e-12 * k.abs().max(1.0)));
    }

    #[test]
    fn decay_fit_recovers_power_laws(p in -4.0f64..-0.5, c in 1e-3f64..1e3) {
        let times: Vec<f64> = (0..40).map(|k| 10.0 * 1.1f64.powi(k)).collect();
        let values: Vec<f64> = times.iter().map(|t| c * t.powf(p)).collect();
        let fit = decay_fit(&times, &values, times[0], times[39]).unwrap();
        prop_assert!((fit.exponent - p).abs() < 1e-9);
    }

    #[test]
    fn oracle_is_linear_in_the_source(
        k in -5.0f64..5.0, sigma in 0.5f64..2.0, t in 0.5f64..15.0, r in 0.2f64..10.0,
    ) {
        let src = GaussianSource { sigma, center: 3.0, width: 1.0 };
        let base = Oracle::new(src).eval(t, r).unwrap();
        let scaled = Oracle::new(Scaled(src, k)).eval_generic(t, r).unwrap();
        prop_assert!((scaled - k * base).abs() <= 1e-6 * (base.abs() * k.abs()).max(1e-8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sectors_evolve_independently(a in 0.2f64..2.0, c in -3.0f64..3.0, ell in 1u32..4) {
        let g = RadialGrid::with_spacing(15.0, 0.1).unwrap();
        let other = Sector::new(ell, 0);
        let data = |s: Sector| (s, bump(&g, a, c, 1.5), bump(&g, -a, -c, 2.0));
        let both = Evolver::catenoid(&g, &[Sector::RADIAL, other], 0.04, 0.9).unwrap();
        let mut joint = both.initial_state(0.0, &[data(Sector::RADIAL), data(other)]).unwrap();
        both.run(&mut joint, 4.0, 0, |_, _| {});
        for s in [Sector::RADIAL, other] {
            let alone = Evolver::catenoid(&g, &[s], 0.04, 0.9).unwrap();
            let mut st = alone.initial_state(0.0, &[data(s)]).unwrap();
            alone.run(&mut st, 4.0, 0, |_, _| {});
            prop_assert_eq!(&st.sectors[&s].psi.values, &joint.sectors[&s].psi.values);
        }
    }
}
