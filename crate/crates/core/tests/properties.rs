use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use sgmf_core::bubbles::BubbleParams;
use sgmf_core::construction::hybrid::cutoff;
use sgmf_core::construction::mass::relation_defect;
use sgmf_core::construction::{affine_fit, tower_alphas, tower_exponents, tower_integer_identities, tower_params, Ratio};
use sgmf_core::fem::{Sites, Space};
use sgmf_core::geometry::{triangulate, Domain};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn space() -> &'static Arc<Space> {
    static S: OnceLock<Arc<Space>> = OnceLock::new();
    S.get_or_init(|| {
        let d = Domain::unit_disk(1);
        Space::new(Arc::new(triangulate(&d, 0.1, &[]).unwrap()))
    })
}

proptest! {
    #[test]
    fn ratios_are_reduced(num in 0u64..10_000, den in 1u64..10_000) {
        let r = Ratio::new(num, den);
        prop_assert!(gcd(r.num, r.den) <= 1 || r.num == 0);
        prop_assert!((r.value() - num as f64 / den as f64).abs() < 1e-15);
    }

    #[test]
    fn tower_integers_hold_for_odd_k(j in 0usize..50) {
        let k = 2 * j + 1;
        prop_assert!(tower_integer_identities(k));
        let alt: i64 = tower_alphas(k).iter().enumerate().map(|(i, &a)| if i % 2 == 0 { -(a as i64) } else { a as i64 }).sum();
        prop_assert_eq!(alt, -2 * k as i64);
        // exponents decrease strictly along the tower
        let e = tower_exponents(k);
        prop_assert!(e.windows(2).all(|w| w[0].value() > w[1].value()));
    }

    #[test]
    fn tower_recursion_closes(log_lambda in -18.0f64..-7.0, z0 in -2.0f64..2.0, h00 in -0.3f64..0.0, q in 0.5f64..3.0, rho0 in 1.0f64..20.0) {
        for k in [1usize, 3] {
            if let Ok(t) = tower_params(k, rho0, log_lambda.exp(), z0, h00, q) {
                prop_assert!(t.recursion_defect() < 1e-10);
                prop_assert!(t.log_deltas.windows(2).all(|w| w[0] < w[1]));
                prop_assert!((t.rho_plus - (4.0 * PI * (k * (k - 1)) as f64 + rho0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quantized_mass_pairs(n in 0u32..20) {
        let n = n as f64;
        prop_assert!(relation_defect(4.0 * PI * n * (n - 1.0), 4.0 * PI * n * (n + 1.0)) < 1e-12);
        prop_assert!(relation_defect(4.0 * PI * n * (n + 1.0), 4.0 * PI * n * (n - 1.0)) < 1e-12);
    }

    #[test]
    fn bubble_profile_closed_form(log_delta in -8.0f64..0.0, j in 0usize..3, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let alpha = [2.0, 6.0, 10.0][j];
        let delta = log_delta.exp();
        let c = [0.1, -0.2];
        let b = BubbleParams::new(delta, c, alpha).unwrap();
        let r = (x - c[0]).hypot(y - c[1]);
        prop_assume!(r > 1e-6);
        let w = (2.0 * alpha * alpha * delta.powf(alpha) / (delta.powf(alpha) + r.powf(alpha)).powi(2)).ln();
        prop_assume!(w.is_finite());
        prop_assert!((b.eval([x, y]) - w).abs() < 1e-10 * w.abs().max(1.0));
        let dens = r.powf(alpha - 2.0) * w.exp();
        prop_assert!((b.density([x, y]) - dens).abs() <= 1e-10 * dens + 1e-300);
    }

    #[test]
    fn cutoff_is_a_partition(r in 0.0f64..1.0, radius in 0.05f64..0.5) {
        let c = cutoff(r, radius);
        prop_assert!((0.0..=1.0).contains(&c));
        if r <= 0.5 * radius { prop_assert_eq!(c, 1.0); }
        if r >= radius { prop_assert_eq!(c, 0.0); }
    }

    #[test]
    fn affine_fit_recovers_lines(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let xs: Vec<f64> = (0..6).map(|i| i as f64 * 0.7 + 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
        let f = affine_fit(&xs, &ys).unwrap();
        prop_assert!((f.intercept - a).abs() < 1e-10 && (f.slope - b).abs() < 1e-10);
    }

    #[test]
    fn sites_reproduce_linear_fields(px in -0.6f64..0.6, py in -0.6f64..0.6, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = space();
        let nodal: Vec<f64> = s.mesh().vertices().iter().map(|v| 1.0 + a * v[0] + b * v[1]).collect();
        let sites = Sites::locate(s.mesh(), vec![[px, py]]);
        let v = sites.interp(&nodal)[0];
        prop_assert!((v - (1.0 + a * px + b * py)).abs() < 1e-12);
    }
}
