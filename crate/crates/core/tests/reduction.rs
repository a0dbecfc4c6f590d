use std::f64::consts::PI;
use std::sync::Arc;

use sgmf_core::construction::{assemble_partial, assemble_partial_with, resolving_mesh, HybridOptions};
use sgmf_core::fem::{Field, GreensOracle, Space};
use sgmf_core::geometry::Domain;
use sgmf_core::mean_field::{solve_mfe, Configuration, SolveOptions, Sources};
use sgmf_core::reduction::{
    energy_j, energy_of_field, energy_pairing, energy_report, find_critical_config, grad_lambda, lambda_functional,
    projected_linear_solve, projected_nonlinear_solve, CriticalOptions, ProjectedOperator, ReductionOptions,
};

fn disk() -> Domain {
    Domain::unit_disk(2)
}

fn oracle(cores: &[([f64; 2], f64)]) -> GreensOracle {
    let d = disk();
    GreensOracle::preferred(d.clone(), Space::new(Arc::new(resolving_mesh(&d, 0.05, cores, 4.0).unwrap())))
}

fn config(pts: &[[f64; 2]]) -> Configuration {
    Configuration::new(pts.to_vec(), &disk()).unwrap()
}

fn lambda_at(pts: &[[f64; 2]], o: &GreensOracle) -> f64 {
    lambda_functional(&config(pts), 4.0, o, &SolveOptions::default(), None).unwrap().value
}

#[test]
fn reduced_energy_symmetries() {
    let o = oracle(&[]);
    let a = lambda_at(&[[0.3, 0.1], [-0.2, 0.25]], &o);
    let b = lambda_at(&[[-0.2, 0.25], [0.3, 0.1]], &o);
    assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    // ∇Λ(0) = 0 by central differences and by the gradient formula
    let s = 1e-4;
    let fd = (lambda_at(&[[s, 0.0]], &o) - lambda_at(&[[-s, 0.0]], &o)) / (2.0 * s);
    assert!(fd.abs() < 1e-4, "{fd}");
    let g = grad_lambda(&config(&[[0.0, 0.0]]), 4.0, &o, &SolveOptions::default()).unwrap();
    assert!(g[0][0].hypot(g[0][1]) < 1e-4, "{g:?}");
    // growth towards the boundary
    let radial: Vec<f64> = [0.5, 0.7, 0.8, 0.9, 0.95].iter().map(|&r| lambda_at(&[[r, 0.0]], &o)).collect();
    assert!(radial.windows(2).all(|w| w[1] > w[0]), "{radial:?}");
}

#[test]
fn mirror_pair_gradient_is_antisymmetric() {
    let o = oracle(&[]);
    let g = grad_lambda(&config(&[[0.4, 0.0], [-0.4, 0.0]]), 4.0, &o, &SolveOptions::default()).unwrap();
    let scale = g[0][0].abs();
    assert!((g[0][0] + g[1][0]).abs() < 1e-8 * scale);
    assert!(g[0][1].abs() < 1e-6 * scale && g[1][1].abs() < 1e-6 * scale, "{g:?}");
}

#[test]
fn critical_search_on_the_disk() {
    let o = oracle(&[]);
    let (c, cert) =
        find_critical_config(&config(&[[0.0, 0.0]]), 4.0, &o, &SolveOptions::default(), &CriticalOptions::default())
            .unwrap();
    assert!(cert.converged && cert.descent_steps == 0 && cert.newton_steps == 0);
    assert_eq!(c.points()[0], [0.0, 0.0]);
    assert!(cert.min_abs_eigenvalue > 1.0);
    let (c, cert) =
        find_critical_config(&config(&[[0.3, 0.2]]), 4.0, &o, &SolveOptions::default(), &CriticalOptions::default())
            .unwrap();
    assert!(cert.converged, "{cert:?}");
    assert!(c.points()[0][0].hypot(c.points()[0][1]) < 1e-6);
    // along antipodal pairs the reduced energy only grows with the radius, so the
    // descent from a pair ends at the separation barrier
    let pair: Vec<f64> = [0.1, 0.3, 0.5, 0.7].iter().map(|&a| lambda_at(&[[a, 0.0], [-a, 0.0]], &o)).collect();
    assert!(pair.windows(2).all(|w| w[1] > w[0]), "{pair:?}");
    let r = find_critical_config(
        &config(&[[0.3, 0.0], [-0.3, 0.0]]),
        4.0,
        &o,
        &SolveOptions::default(),
        &CriticalOptions::default(),
    );
    match r {
        Err(e) => assert!(e.to_string().contains("barrier"), "{e}"),
        Ok((_, cert)) => assert!(!cert.converged || cert.barrier_active, "{cert:?}"),
    }
}

fn centered_setup(xi: [f64; 2]) -> (GreensOracle, sgmf_core::mean_field::MeanFieldSolution) {
    let cfg = config(&[xi]);
    let delta = assemble_partial(&cfg, 4.0, 1e-5, &oracle(&[])).unwrap().core_scales()[0];
    let o = oracle(&[(xi, delta)]);
    let mf = solve_mfe(&o, 4.0, Sources::Points(cfg), &SolveOptions::default(), None).unwrap();
    (o, mf)
}

#[test]
fn projected_linear_solve_is_exact() {
    let (o, mf) = centered_setup([0.3, 0.2]);
    let s = assemble_partial_with(mf, 1e-4, &o, &HybridOptions::default()).unwrap();
    let op = ProjectedOperator::new(&s).unwrap();
    let space = o.space();
    let zero = Field::zeros(space.mesh().clone());
    let r0 = projected_linear_solve(&s, &op, &zero).unwrap();
    assert!(r0.phi_norm == 0.0 && r0.max_multiplier() == 0.0);

    let h = Field::from_fn(space.mesh().clone(), |x| (1.0 - x[0] * x[0] - x[1] * x[1]) * (1.0 + x[0]));
    let r = projected_linear_solve(&s, &op, &h).unwrap();
    assert!(r.phi.boundary_max_abs() == 0.0);
    let max_pz = op.max_kernel_norm();
    assert!(r.orthogonality_defect < 1e-8 * r.phi_norm * max_pz, "{}", r.orthogonality_defect);

    // K φ − ρ⁺M_eφ + ρ⁺ℓ(e)∫eφ − M_Vφ + Σ c_ij ℓ_ij = K h, tested against interior hat functions
    let phi = space.restrict(r.phi.values());
    let pq = space.interpolate_qp(r.phi.values());
    let nq = pq.len();
    let e = &op.exp_w;
    let mean = space.integrate_qp(&(0..nq).map(|q| e[q] * pq[q]).collect::<Vec<_>>());
    let a = space.load(&(0..nq).map(|q| -(s.rho_plus * e[q] + op.potential[q]) * pq[q]).collect::<Vec<_>>());
    let g = space.load(e);
    let kphi = space.apply_stiffness(&space.extend_zero(&phi));
    let kh = space.apply_stiffness(h.values());
    let c: Vec<f64> = r.multipliers.iter().flatten().copied().collect();
    let mut res: Vec<f64> = (0..kh.len()).map(|i| kphi[i] + a[i] + s.rho_plus * g[i] * mean - kh[i]).collect();
    for (k, cj) in op.kernels.iter().zip(&c) {
        for (ri, l) in res.iter_mut().zip(&k.load) {
            *ri += cj * l;
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm(&res) < 1e-9 * norm(&kh), "{} vs {}", norm(&res), norm(&kh));
}

#[test]
fn multipliers_vanish_at_the_critical_point() {
    let l = 1e-4;
    let mut c = Vec::new();
    for xi in [[0.0, 0.0], [0.2, 0.1]] {
        let (o, mf) = centered_setup(xi);
        let s = assemble_partial_with(mf, l, &o, &HybridOptions::default()).unwrap();
        let op = ProjectedOperator::new(&s).unwrap();
        let red = projected_nonlinear_solve(&s, &op, &ReductionOptions::default()).unwrap();
        assert!(red.iterations < 20);
        assert!(red.orthogonality_defect < 1e-8 * red.phi_norm.max(1e-300) * op.max_kernel_norm());
        c.push(red.max_multiplier());
    }
    assert!(c[0] * 5.0 < c[1], "{c:?}");
}

#[test]
fn energy_pairing_matches_difference_quotient() {
    let (o, _) = centered_setup([0.0, 0.0]);
    let space = o.space();
    let mesh = space.mesh().clone();
    let u = Field::from_fn(mesh.clone(), |x| 3.0 * (1.0 - x[0] * x[0] - x[1] * x[1]) + x[0]);
    let u = Field::new(mesh.clone(), u.values().iter().zip(mesh.boundary_mask()).map(|(v, b)| if *b { 0.0 } else { *v }).collect()).unwrap();
    let v = Field::from_fn(mesh.clone(), |x| (1.0 - x[0] * x[0] - x[1] * x[1]) * (x[1] + 0.5));
    let (rho, lambda) = (4.0, 0.3);
    let eps = 1e-4;
    let shifted = |t: f64| {
        let w: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a + t * b).collect();
        energy_of_field(space, &Field::new(mesh.clone(), w).unwrap(), rho, lambda).unwrap().total
    };
    let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
    let weak = energy_pairing(space, &u, &v, rho, lambda);
    assert!((fd - weak).abs() < 1e-6 * weak.abs(), "{fd} vs {weak}");
}

#[test]
fn energy_report_is_consistent() {
    let (o, mf) = centered_setup([0.0, 0.0]);
    let lv = lambda_functional(&config(&[[0.0, 0.0]]), 4.0, &o, &SolveOptions::default(), Some(&mf.z)).unwrap();
    let s = assemble_partial_with(mf, 1e-4, &o, &HybridOptions::default()).unwrap();
    let rep = energy_report(&s, lv.value).unwrap();
    assert!((rep.defect - rep.recomputed_defect()).abs() < 1e-12 * rep.j_value.abs());
    let parts = energy_j(&s, None).unwrap();
    assert!(parts.dirichlet > 0.0 && parts.exp_term > 0.0);
    // λ∫e^{−W} carries the 8π mass of the bubble
    assert!((parts.exp_term - 8.0 * PI).abs() < 0.01 * 8.0 * PI);
}
