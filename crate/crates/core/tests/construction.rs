use std::f64::consts::PI;
use std::sync::Arc;

use sgmf_core::construction::{
    assemble_partial, assemble_partial_with, assemble_tower, assemble_tower_with, mass_accounting, partial_params,
    resolving_mesh, residual_decomposition, scaling_fit, HybridOptions, Params,
};
use sgmf_core::fem::{GreensOracle, Space};
use sgmf_core::geometry::Domain;
use sgmf_core::mean_field::{solve_mfe, Configuration, SolveOptions, Sources};

fn oracle(center: [f64; 2], delta: Option<f64>) -> GreensOracle {
    let d = Domain::unit_disk(2);
    let cores: Vec<([f64; 2], f64)> = delta.map(|s| (center, s)).into_iter().collect();
    let mesh = resolving_mesh(&d, 0.05, &cores, 4.0).unwrap();
    GreensOracle::preferred(d, Space::new(Arc::new(mesh)))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

const LAMBDAS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

#[test]
fn partial_scales_close_and_masses_converge() {
    let xi = [0.3, 0.2];
    let d = Domain::unit_disk(2);
    let cfg = Configuration::new(vec![xi], &d).unwrap();
    let delta = assemble_partial(&cfg, 4.0, 1e-6, &oracle(xi, None)).unwrap().core_scales()[0];
    let o = oracle(xi, Some(delta));
    let mf = solve_mfe(&o, 4.0, Sources::Points(cfg), &SolveOptions::default(), None).unwrap();
    let mut far = Vec::new();
    let mut r1 = Vec::new();
    for &l in &LAMBDAS {
        let p = partial_params(&mf, &o, l).unwrap();
        assert!(p.closure_defect() < 1e-12, "{}", p.closure_defect());
        // 8δ² = λ d
        assert!((8.0 * p.deltas[0].powi(2) / (l * p.d[0]) - 1.0).abs() < 1e-12);
        let s = assemble_partial_with(mf.clone(), l, &o, &HybridOptions::default()).unwrap();
        assert!(s.boundary_defect() < 1e-10);
        assert!((s.rho_minus() - 8.0 * PI).abs() < 0.01 * 8.0 * PI, "{}", s.rho_minus());
        far.push(s.far_field_defect(0.2));
        r1.push(residual_decomposition(&s, &[1.0]).unwrap().norm_r[0]);
    }
    // outside the core e^W − h e^z is driven by Pw = O(δ²) = O(λ)
    let sf = slope(&LAMBDAS, &far);
    assert!((sf - 1.0).abs() < 0.1, "{sf}");
    let fit = scaling_fit(&LAMBDAS, &r1, 0.5, 0.1).unwrap();
    assert!(fit.pass, "{fit:?}");
}

#[test]
fn tower_rejects_even_k() {
    let o = oracle([0.0, 0.0], None);
    assert!(assemble_tower(2, 4.0, 1e-4, &o).is_err());
    assert!(assemble_tower(1, 9.0 * PI, 1e-4, &o).is_err());
}

#[test]
fn tower_single_bubble_diagnostics() {
    let delta = assemble_tower(1, 4.0, 1e-6, &oracle([0.0, 0.0], None)).unwrap().core_scales()[0];
    let o = oracle([0.0, 0.0], Some(delta));
    let mf = solve_mfe(&o, 4.0, Sources::Origin { k: 1 }, &SolveOptions::default(), None).unwrap();
    let mut far = Vec::new();
    let mut mass_gap = Vec::new();
    for &l in &LAMBDAS {
        let s = assemble_tower_with(1, mf.clone(), l, &o, &HybridOptions::default()).unwrap();
        let Params::Tower(tp) = &s.params else { panic!("tower parameters expected") };
        assert!(tp.recursion_defect() < 1e-10);
        assert_eq!(s.rho_plus, 4.0);
        assert!(s.symmetry_defect().unwrap() < 1e-9);
        assert!(s.boundary_defect() < 1e-10);
        assert_eq!(s.sign_pattern().unwrap(), vec![-1.0]);
        far.push(s.tower_far_defect(0.3).unwrap());
        mass_gap.push(residual_decomposition(&s, &[1.0]).unwrap().int_exp_w_defect.unwrap().abs());
        let theta = s.interaction_diagnostics(4).unwrap();
        assert!(theta[0].max_abs < 1e-2, "{theta:?}");
    }
    // ΣPw_i + 8kπG(·,0) = O(δ²) away from the origin
    let sr = slope(&LAMBDAS, &far);
    assert!((sr - 1.0).abs() < 0.1, "{sr}");
    // ∫e^W approaches (ρ⁺/ρ₀)∫e^{z − 8kπG(·,0)} at least at the bound λ^{1/2}
    let sm = slope(&LAMBDAS, &mass_gap);
    assert!(sm > 0.4, "{sm}");
}

#[test]
fn tower_three_alternates() {
    let delta = assemble_tower(3, 4.0, 1e-4, &oracle([0.0, 0.0], None)).unwrap().core_scales()[0];
    let o = oracle([0.0, 0.0], Some(delta));
    let s = assemble_tower(3, 4.0, 1e-4, &o).unwrap();
    let Params::Tower(tp) = &s.params else { panic!("tower parameters expected") };
    let d = tp.deltas();
    assert!(d[0] < d[1] && d[1] < d[2] && d[2] < 1.0);
    assert!((s.rho_plus - (24.0 * PI + 4.0)).abs() < 1e-12);
    assert_eq!(s.sign_pattern().unwrap(), vec![-1.0, 1.0, -1.0]);
    assert!(s.symmetry_defect().unwrap() < 1e-9);
}

#[test]
fn mass_radii_must_clear_the_core() {
    let o = oracle([0.0, 0.0], None);
    let s = assemble_tower(1, 4.0, 1e-3, &o).unwrap();
    assert!(mass_accounting(&s, None, &[0.2, 0.1, 0.05], &HybridOptions::default()).is_err());
    assert!(mass_accounting(&s, None, &[0.2], &HybridOptions::default()).is_err());
}
