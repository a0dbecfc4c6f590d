use std::f64::consts::PI;
use std::sync::Arc;

use sgmf_core::fem::{GreensOracle, Space};
use sgmf_core::geometry::{triangulate, triangulate_with, Domain, MeshOptions};
use sgmf_core::mean_field::{solve_mfe, Configuration, SolveOptions, Sources};

fn disk_oracle(h: f64) -> GreensOracle {
    let d = Domain::unit_disk(2);
    GreensOracle::preferred(d.clone(), Space::new(Arc::new(triangulate(&d, h, &[]).unwrap())))
}

/// Radial profile for `z'' + z'/r + r⁴ e^u = 0` shot from the origin with RK4;
/// returns `(u(1), −2π u'(1), samples of u on [0, 1])`.
fn shoot(a: f64, n: usize) -> (f64, f64, Vec<f64>) {
    let r0: f64 = 1e-3;
    let ea = a.exp();
    // series start u = a − e^a r⁶/36
    let mut u = a - ea * r0.powi(6) / 36.0;
    let mut v = -ea * r0.powi(5) / 6.0;
    let f = |r: f64, u: f64, v: f64| (v, -v / r - r.powi(4) * u.exp());
    let hstep = (1.0 - r0) / n as f64;
    let mut samples = vec![a];
    let mut r = r0;
    for _ in 0..n {
        let (k1u, k1v) = f(r, u, v);
        let (k2u, k2v) = f(r + 0.5 * hstep, u + 0.5 * hstep * k1u, v + 0.5 * hstep * k1v);
        let (k3u, k3v) = f(r + 0.5 * hstep, u + 0.5 * hstep * k2u, v + 0.5 * hstep * k2v);
        let (k4u, k4v) = f(r + hstep, u + hstep * k3u, v + hstep * k3v);
        u += hstep / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        v += hstep / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        r += hstep;
        samples.push(u);
    }
    (u, -2.0 * PI * v, samples)
}

/// `z(r)` with total mass `rho` by bisection on the central value.
fn radial_oracle(rho: f64) -> impl Fn(f64) -> f64 {
    let n = 200_000;
    let (mut lo, mut hi) = (-10.0, 5.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if shoot(mid, 2000).1 < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (u1, _, s) = shoot(0.5 * (lo + hi), n);
    let r0 = 1e-3;
    move |r: f64| {
        if r <= r0 {
            return s[0] - u1;
        }
        let t = (r - r0) / (1.0 - r0) * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let f = t - i as f64;
        (1.0 - f) * s[i] + f * s[i + 1] - u1
    }
}

fn closed_form(r: f64) -> f64 {
    let d6 = 6.0 * PI - 1.0;
    2.0 * ((1.0 + d6) / (d6 + r.powi(6))).ln()
}

#[test]
fn oracles_agree() {
    let z = radial_oracle(4.0);
    for r in [0.0, 0.3, 0.7, 0.95] {
        assert!((z(r) - closed_form(r)).abs() < 1e-9, "r = {r}: {} vs {}", z(r), closed_form(r));
    }
}

#[test]
fn origin_source_matches_radial_oracle() {
    let z_exact = radial_oracle(4.0);
    let mut sv = Vec::new();
    for h in [0.014, 0.007] {
        let d = Domain::unit_disk(2);
        let opts = MeshOptions { boundary_target: Some(h / 4.0), ..MeshOptions::default() };
        let mesh = triangulate_with(&d, h, &[], &opts).unwrap();
        let o = GreensOracle::preferred(d, Space::new(Arc::new(mesh)));
        let mut s = solve_mfe(&o, 4.0, Sources::Origin { k: 1 }, &SolveOptions::default(), None).unwrap();
        let err = s
            .z
            .mesh()
            .vertices()
            .iter()
            .zip(s.z.values())
            .map(|(p, v)| (v - z_exact(p[0].hypot(p[1]))).abs())
            .fold(0.0, f64::max);
        eprintln!("h = {h}: max error {err:.3e}");

        sv.push(s.nondegeneracy_check().unwrap());
        if h == 0.007 {
            assert!(err < 1e-5, "max error {err}");
        }
    }
    assert!(sv[0] > 0.0 && sv[1] > 0.0);
    assert!((sv[0] - sv[1]).abs() < 0.2 * sv[1], "{sv:?}");
}

#[test]
fn radial_symmetry_and_continuation() {
    let o = disk_oracle(0.05);
    let opts = SolveOptions::default();
    let a = solve_mfe(&o, 6.0, Sources::Origin { k: 1 }, &opts, None).unwrap();
    let half = SolveOptions { max_rho_step: opts.max_rho_step / 2.0, ..opts.clone() };
    let b = solve_mfe(&o, 6.0, Sources::Origin { k: 1 }, &half, None).unwrap();
    let d = a.z.values().iter().zip(b.z.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(d < 1e-8, "{d}");
    // the six-fold mesh maps onto itself, so rotated values are vertex values
    let d6 = Domain::unit_disk(6);
    let o6 = GreensOracle::preferred(d6.clone(), Space::new(Arc::new(triangulate(&d6, 0.05, &[]).unwrap())));
    let c = solve_mfe(&o6, 6.0, Sources::Origin { k: 1 }, &opts, None).unwrap();
    let rot = &c.z.mesh().symmetry().expect("symmetric mesh").rotation;
    let v = c.z.values();
    let worst = (0..v.len()).map(|i| (v[i] - v[rot[i]]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "{worst}");
}

#[test]
fn zero_mass_linearization_is_laplacian() {
    let o = disk_oracle(0.05);
    let mut s = solve_mfe(&o, 0.0, Sources::Origin { k: 1 }, &SolveOptions::default(), None).unwrap();
    let mu = s.nondegeneracy_check().unwrap();
    // first Dirichlet eigenvalue of the unit disk is j₀,₁² ≈ 5.783
    assert!((mu - 5.783).abs() < 0.1, "{mu}");
}

#[test]
fn derivative_antisymmetric_at_center() {
    let o = disk_oracle(0.05);
    let d = Domain::unit_disk(2);
    let c = Configuration::new(vec![[0.0, 0.0]], &d).unwrap();
    let opts = SolveOptions::default();
    let s = solve_mfe(&o, 4.0, Sources::Points(c), &opts, None).unwrap();
    let dz = sgmf_core::mean_field::mfe_derivative_wrt_sources(&s, &o, &opts).unwrap();
    let f = &dz[0][0];
    assert!(f.max_abs() > 1e-3);
    for p in f.mesh().vertices().iter().step_by(11) {
        let a = f.eval(*p);
        let b = f.eval([-p[0], -p[1]]);
        assert!((a + b).abs() < 1e-6 * (1.0 + f.max_abs()), "{a} {b}");
    }
}
