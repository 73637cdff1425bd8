use nalgebra::{DMatrix, DVector, Vector3};
use rand::{rngs::StdRng, Rng, SeedableRng};
use spherepol::geometry::{make_alternating_lattice, SphereSpec, SphereSystem};
use spherepol::operators::{apply_system, rhs_from_free_charge, Backend, GlobalCoeffVector, OperatorContext};
use spherepol::solver::*;
use std::f64::consts::PI;

fn residual(ctx: &OperatorContext, nu: &GlobalCoeffVector, sigma_f: &GlobalCoeffVector) -> f64 {
    let b = rhs_from_free_charge(ctx, sigma_f);
    let ax = apply_system(ctx, nu).unwrap();
    let r: f64 = ax.data.iter().zip(&b.data).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    r / b.norm()
}

#[test]
fn identity_converges_in_one_iteration() {
    let b = vec![1.0, -2.0, 3.0, 0.5];
    let out = gmres(|v| Ok(v.to_vec()), &b, &SolveSettings::default()).unwrap();
    assert_eq!(out.iterations, 1);
    assert!(out.converged);
    for (x, y) in out.x.iter().zip(&b) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn dense_system_matches_lu() {
    let mut rng = StdRng::seed_from_u64(31);
    let a = DMatrix::from_fn(5, 5, |i, j| if i == j { 4.0 } else { 0.0 } + rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
    let exact = a.clone().lu().solve(&b).unwrap();
    let out = gmres(|v| Ok((&a * DVector::from_column_slice(v)).as_slice().to_vec()), b.as_slice(), &SolveSettings::with_tolerance(1e-14)).unwrap();
    assert!(out.converged);
    assert!(out.iterations <= 5);
    for (x, y) in out.x.iter().zip(exact.iter()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn zero_rhs_and_invalid_tolerance() {
    let out = gmres(|v| Ok(v.to_vec()), &[0.0; 3], &SolveSettings::default()).unwrap();
    assert_eq!(out.iterations, 0);
    assert_eq!(out.x, vec![0.0; 3]);
    assert!(gmres(|v| Ok(v.to_vec()), &[1.0], &SolveSettings::with_tolerance(0.0)).is_err());
}

#[test]
fn iteration_cap_returns_best_iterate_unconverged() {
    // a rotation: GMRES makes no progress until the full space is spanned
    let n = 6;
    let shift = |v: &[f64]| -> spherepol::Result<Vec<f64>> { Ok((0..n).map(|i| v[(i + 1) % n]).collect()) };
    let mut b = vec![0.0; n];
    b[0] = 1.0;
    let settings = SolveSettings {
        tolerance: 1e-12,
        max_iterations: 3,
    };
    let out = gmres(shift, &b, &settings).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 3);
    assert_eq!(out.residual_history.len(), 4);
}

#[test]
fn two_sphere_solve_reaches_tight_tolerance() {
    let sys = SphereSystem::new(
        vec![
            SphereSpec::new(Vector3::zeros(), 1.0, 10.0, 1.0),
            SphereSpec::new(Vector3::new(0.0, 0.0, 2.5), 1.0, 10.0, -1.0),
        ],
        1.0,
    );
    let ctx = OperatorContext::new(sys, 10, Backend::Direct).unwrap();
    let sf = ctx.free_charge();
    let tol = 1e-11;
    let rep = solve_induced_charge(&ctx, &sf, &SolveSettings::with_tolerance(tol)).unwrap();
    assert!(rep.converged);
    assert!(*rep.residual_history.last().unwrap() <= tol);
    assert!(residual(&ctx, &rep.nu, &sf) <= 1.01 * tol);
}

#[test]
fn zero_contrast_solve_is_scaled_free_charge() {
    let mut sys = make_alternating_lattice(2, 6.0);
    for s in &mut sys.spheres {
        s.kappa = 1.0;
    }
    let ctx = OperatorContext::new(sys, 4, Backend::Direct).unwrap();
    let sf = ctx.free_charge();
    let rep = solve_induced_charge(&ctx, &sf, &SolveSettings::default()).unwrap();
    assert_eq!(rep.iterations, 1);
    let expect = sf.scaled(4.0 * PI);
    for (a, b) in rep.nu.data.iter().zip(&expect.data) {
        assert!((a - b).abs() < 1e-14 * (1.0 + b.abs()));
    }
}

#[test]
fn isolated_sphere_needs_one_iteration() {
    let sys = SphereSystem::new(vec![SphereSpec::new(Vector3::new(1.0, 1.0, 1.0), 2.0, 40.0, 3.0)], 2.0);
    let ctx = OperatorContext::new(sys, 6, Backend::Direct).unwrap();
    let sf = ctx.free_charge();
    let rep = solve_induced_charge(&ctx, &sf, &SolveSettings::with_tolerance(1e-12)).unwrap();
    assert_eq!(rep.iterations, 1);
    let total = rep.nu.data[0] * (4.0 * PI).sqrt() * 4.0;
    assert!((total - 4.0 * PI * 3.0 / 2.0).abs() < 1e-12);
}

#[test]
fn solves_are_deterministic() {
    let ctx = OperatorContext::new(make_alternating_lattice(3, 6.0), 4, Backend::Direct).unwrap();
    let sf = ctx.free_charge();
    let a = solve_induced_charge(&ctx, &sf, &SolveSettings::with_tolerance(1e-11)).unwrap();
    let b = solve_induced_charge(&ctx, &sf, &SolveSettings::with_tolerance(1e-11)).unwrap();
    assert_eq!(a.residual_history, b.residual_history);
    assert_eq!(a.nu, b.nu);
    assert!(residual(&ctx, &a.nu, &sf) <= 1.01e-11);
}

#[test]
fn iteration_counts_are_stable_across_lattice_sizes() {
    let counts: Vec<usize> = [2, 3, 4, 5]
        .iter()
        .map(|&n| {
            let ctx = OperatorContext::new(make_alternating_lattice(n, 6.0), 6, Backend::Direct).unwrap();
            solve_induced_charge(&ctx, &ctx.free_charge(), &SolveSettings::default()).unwrap().iterations
        })
        .collect();
    let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
    assert!(hi - lo <= 3, "{counts:?}");
}
