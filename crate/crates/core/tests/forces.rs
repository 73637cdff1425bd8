use nalgebra::Vector3;
use rand::{rngs::StdRng, Rng, SeedableRng};
use spherepol::forces::*;
use spherepol::geometry::{make_alternating_lattice, SphereSpec, SphereSystem};
use spherepol::harmonics::{analyze, build_grid, n_coeffs, real_solid_harmonics, synthesize, SurfaceCoeffs};
use spherepol::operators::{energy, Backend, GlobalCoeffVector, OperatorContext};
use spherepol::solver::{solve_induced_charge, SolveSettings};
use spherepol::Error;
use std::f64::consts::PI;

fn tight() -> SolveSettings {
    SolveSettings::with_tolerance(1e-11)
}

fn solved(system: SphereSystem, lmax: usize) -> (OperatorContext, GlobalCoeffVector) {
    let ctx = OperatorContext::new(system, lmax, Backend::Direct).unwrap();
    let nu = solve_induced_charge(&ctx, &ctx.free_charge(), &tight()).unwrap().nu;
    (ctx, nu)
}

fn pair(d: f64, q1: f64, q2: f64, kappa: f64) -> SphereSystem {
    SphereSystem::new(
        vec![
            SphereSpec::new(Vector3::zeros(), 1.0, kappa, q1),
            SphereSpec::new(Vector3::new(0.0, 0.0, d), 1.0, kappa, q2),
        ],
        1.0,
    )
}

fn direct_factory(lmax: usize) -> impl Fn(SphereSystem) -> spherepol::Result<OperatorContext> {
    move |s| OperatorContext::new(s, lmax, Backend::Direct)
}

fn assert_fd_agreement(system: SphereSystem, lmax: usize, which: &[usize]) {
    let (ctx, nu) = solved(system.clone(), lmax);
    let report = compute_all_forces(&ctx, &nu).unwrap();
    let sigma_f = ctx.free_charge();
    for &i in which {
        let fd = energy_gradient_fd(direct_factory(lmax), &system, &sigma_f, &tight(), i, 1e-4).unwrap();
        let f = report.forces[i];
        for a in 0..3 {
            let tol = (1e-5 * f[a].abs()).max(1e-10);
            assert!((f[a] - fd[a]).abs() <= tol, "sphere {i} comp {a}: field {} vs fd {}", f[a], fd[a]);
        }
    }
}

#[test]
fn single_sphere_feels_no_force() {
    let sys = SphereSystem::new(vec![SphereSpec::new(Vector3::new(1.0, 2.0, 3.0), 1.5, 4.0, 2.0)], 1.0);
    let (ctx, nu) = solved(sys, 6);
    let phi = excluded_potential(&ctx, &nu, 0).unwrap();
    assert_eq!(phi.coeffs.degree_max, 7);
    assert!(phi.coeffs.coeffs.iter().all(|c| *c == 0.0));
    let rep = compute_all_forces(&ctx, &nu).unwrap();
    assert_eq!(rep.forces[0], Vector3::zeros());
    assert_eq!(rep.force_sum, Vector3::zeros());
    // energy of an isolated sphere: 2π q² / (κ0 r)
    assert!((rep.energy - 2.0 * PI * 4.0 / 1.5).abs() < 1e-12 * rep.energy);
}

#[test]
fn excluded_potential_rejects_bad_index() {
    let (ctx, nu) = solved(pair(4.0, 1.0, -1.0, 3.0), 3);
    assert_eq!(excluded_potential(&ctx, &nu, 2), Err(Error::Index { index: 2, len: 2 }));
}

#[test]
fn inert_partner_exerts_no_force() {
    let sys = SphereSystem::new(
        vec![
            SphereSpec::new(Vector3::zeros(), 1.0, 5.0, 1.0),
            SphereSpec::new(Vector3::new(0.5, 0.0, 3.0), 1.2, 1.0, 0.0),
        ],
        1.0,
    );
    let (ctx, nu) = solved(sys, 8);
    let phi = excluded_potential(&ctx, &nu, 0).unwrap();
    assert!(phi.coeffs.coeffs.iter().all(|c| c.abs() < 1e-14));
    let rep = compute_all_forces(&ctx, &nu).unwrap();
    assert!(rep.forces[0].norm() < 1e-14);
}

#[test]
fn excluded_potential_matches_single_layer_quadrature() {
    let d = 30.0;
    let (ctx, nu) = solved(pair(d, 1.0, 2.0, 4.0), 4);
    let phi = excluded_potential(&ctx, &nu, 0).unwrap();

    // potential of sphere 2's density at quadrature points of sphere 1
    let src_grid = build_grid(20);
    let nu2 = nu.surface(1);
    let dens = synthesize(&nu2, &src_grid.nodes);
    let c2 = ctx.system().spheres[1].center;
    let tgt_grid = build_grid(12);
    let samples: Vec<f64> = tgt_grid
        .nodes
        .iter()
        .map(|n| {
            let x = *n; // sphere 1 has unit radius at the origin
            src_grid
                .nodes
                .iter()
                .zip(&src_grid.weights)
                .zip(&dens)
                .map(|((y, w), s)| w * s / (4.0 * PI * (x - (c2 + y)).norm()))
                .sum::<f64>()
        })
        .collect();
    let oracle = analyze(&samples, &tgt_grid, 5).unwrap();
    let q2_eff = (4.0 * PI) * nu2.coeffs[0] / (4.0 * PI).sqrt();
    assert!((oracle.coeffs[0] - (4.0 * PI).sqrt() * q2_eff / (4.0 * PI * d)).abs() < 1e-3 * oracle.coeffs[0].abs());
    assert!((phi.coeffs.coeffs[0] - oracle.coeffs[0]).abs() < 1e-9 * oracle.coeffs[0].abs());
    for k in 0..n_coeffs(5) {
        assert!((phi.coeffs.coeffs[k] - oracle.coeffs[k]).abs() < 1e-9 * oracle.coeffs[0].abs());
    }
}

#[test]
fn field_of_linear_and_constant_potentials() {
    let (ctx, _) = solved(pair(5.0, 1.0, 1.0, 2.0), 4);
    let r = ctx.radius(0);
    let mut lin = SurfaceCoeffs::zeros(5);
    // potential z on the sphere of radius r: r cosθ = r √(4π/3) Y_1^0
    lin.set(1, 0, r * (4.0 * PI / 3.0).sqrt());
    let f = field_trace(&ctx, &ExcludedPotential { sphere_index: 0, coeffs: lin });
    let y00 = 1.0 / (4.0 * PI).sqrt();
    assert!((f.components[2].coeffs[0] * y00 + 1.0).abs() < 1e-14);
    assert!(f.components[2].coeffs[1..].iter().all(|c| c.abs() < 1e-14));
    assert!(f.components[0].coeffs.iter().chain(&f.components[1].coeffs).all(|c| c.abs() < 1e-14));

    let mut constant = SurfaceCoeffs::zeros(5);
    constant.set(0, 0, 3.0);
    let f = field_trace(&ctx, &ExcludedPotential { sphere_index: 0, coeffs: constant });
    assert!(f.components.iter().all(|c| c.coeffs.iter().all(|v| *v == 0.0)));
}

#[test]
fn field_trace_matches_finite_differences_of_harmonic_extension() {
    let lmax = 6;
    let sys = SphereSystem::new(vec![SphereSpec::new(Vector3::zeros(), 1.7, 2.0, 1.0)], 1.0);
    let ctx = OperatorContext::new(sys, lmax, Backend::Direct).unwrap();
    let r: f64 = 1.7;
    let mut rng = StdRng::seed_from_u64(7);
    let coeffs: Vec<f64> = (0..n_coeffs(lmax + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let phi = ExcludedPotential {
        sphere_index: 0,
        coeffs: SurfaceCoeffs::from_vec(lmax + 1, coeffs.clone()).unwrap(),
    };
    let field = field_trace(&ctx, &phi);

    // harmonic extension u(x) = Σ t_l^m (|x|/r)^l Y_l^m
    let mut buf = vec![0.0; n_coeffs(lmax + 1)];
    let mut u = |x: Vector3<f64>| {
        real_solid_harmonics(lmax + 1, &x, &mut buf);
        let mut s = 0.0;
        for l in 0..=lmax + 1 {
            let scale = r.powi(l as i32);
            for k in l * l..(l + 1) * (l + 1) {
                s += coeffs[k] * buf[k] / scale;
            }
        }
        s
    };
    let h = 1e-5;
    for _ in 0..50 {
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
        let x = dir * r;
        for a in 0..3 {
            let mut e = Vector3::zeros();
            e[a] = h;
            let fd = -(u(x + e) - u(x - e)) / (2.0 * h);
            let syn = synthesize(&field.components[a], &[dir])[0];
            assert!((fd - syn).abs() < 1e-6 * (1.0 + fd.abs()), "comp {a}: {fd} vs {syn}");
        }
    }
}

#[test]
fn uniform_field_on_net_charge() {
    let (ctx, _) = solved(pair(5.0, 1.0, 1.0, 2.0), 3);
    let r = ctx.radius(0);
    let q = 2.5;
    let mut nu = SurfaceCoeffs::zeros(3);
    nu.set(0, 0, q / ((4.0 * PI).sqrt() * r * r));
    let mut ez = SurfaceCoeffs::zeros(3);
    ez.set(0, 0, (4.0 * PI).sqrt());
    let field = FieldTrace {
        sphere_index: 0,
        components: [SurfaceCoeffs::zeros(3), SurfaceCoeffs::zeros(3), ez],
    };
    let f = force_on_sphere(&ctx, &nu, &field);
    assert!(f[0] == 0.0 && f[1] == 0.0);
    assert!((f[2] - ctx.system().kappa0 * q).abs() < 1e-13);
    let zero = FieldTrace {
        sphere_index: 0,
        components: [SurfaceCoeffs::zeros(3), SurfaceCoeffs::zeros(3), SurfaceCoeffs::zeros(3)],
    };
    assert_eq!(force_on_sphere(&ctx, &nu, &zero), Vector3::zeros());
}

#[test]
fn symmetric_pair_attracts_with_opposite_forces() {
    let (ctx, nu) = solved(pair(3.0, 1.0, -1.0, 10.0), 10);
    let rep = compute_all_forces(&ctx, &nu).unwrap();
    let (f1, f2) = (rep.forces[0], rep.forces[1]);
    assert!((f1 + f2).norm() <= 1e-10 * f1.norm());
    assert!(f1[2] > 0.0 && f2[2] < 0.0, "sphere 1 sits below sphere 2 and is pulled up");
    assert!(f1[0].abs() < 1e-12 * f1.norm() && f1[1].abs() < 1e-12 * f1.norm());
}

#[test]
fn far_pair_approaches_coulomb_law() {
    let mut prev = f64::INFINITY;
    for d in [20.0, 80.0, 320.0] {
        let (ctx, nu) = solved(pair(d, 1.0, -1.0, 10.0), 6);
        let f = compute_all_forces(&ctx, &nu).unwrap().forces[0][2];
        let coulomb = 4.0 * PI / (ctx.system().kappa0 * d * d);
        let dev = (f / coulomb - 1.0).abs();
        assert!(dev < prev);
        prev = dev;
    }
    assert!(prev < 1e-6);
}

#[test]
fn newton_third_law_on_lattice() {
    let (ctx, nu) = solved(make_alternating_lattice(3, 6.0), 6);
    let rep = compute_all_forces(&ctx, &nu).unwrap();
    let total: f64 = rep.magnitudes.iter().sum();
    for a in 0..3 {
        assert!(rep.force_sum[a].abs() <= 1e-9 * total);
    }
    let recomputed: Vector3<f64> = rep.forces.iter().sum();
    assert_eq!(recomputed, rep.force_sum);
}

#[test]
fn higher_potential_degree_does_not_change_forces() {
    let (ctx, nu) = solved(make_alternating_lattice(2, 6.0), 5);
    let a = compute_all_forces(&ctx, &nu).unwrap();
    let b = compute_all_forces_at(&ctx, &nu, ctx.lmax() + 2).unwrap();
    for (fa, fb) in a.forces.iter().zip(&b.forces) {
        assert!((fa - fb).norm() <= 1e-12 * fa.norm());
    }
    assert!(compute_all_forces_at(&ctx, &nu, ctx.lmax()).is_err());
}

#[test]
fn energy_from_force_report_matches_operator_energy() {
    let (ctx, nu) = solved(make_alternating_lattice(2, 6.0), 5);
    let rep = compute_all_forces(&ctx, &nu).unwrap();
    let e = energy(&ctx, &ctx.free_charge(), &nu).unwrap();
    assert!((rep.energy - e).abs() < 1e-13 * e.abs());
}

#[test]
fn forces_match_energy_gradient_for_two_spheres() {
    assert_fd_agreement(pair(3.0, 1.0, -1.0, 10.0), 8, &[0, 1]);
    let off_axis = SphereSystem::new(
        vec![
            SphereSpec::new(Vector3::zeros(), 1.0, 4.0, 1.0),
            SphereSpec::new(Vector3::new(1.5, -0.7, 2.2), 0.6, 20.0, 0.3),
        ],
        2.0,
    );
    assert_fd_agreement(off_axis, 8, &[1]);
}

#[test]
fn forces_match_energy_gradient_in_eight_sphere_lattice() {
    assert_fd_agreement(make_alternating_lattice(2, 6.0), 6, &[3]);
}

#[test]
fn energy_gradient_of_isolated_sphere_vanishes() {
    let sys = SphereSystem::new(vec![SphereSpec::new(Vector3::zeros(), 1.0, 3.0, 1.0)], 1.0);
    let ctx = OperatorContext::new(sys.clone(), 4, Backend::Direct).unwrap();
    let g = energy_gradient_fd(direct_factory(4), &sys, &ctx.free_charge(), &tight(), 0, 1e-4).unwrap();
    assert!(g.norm() < 1e-8);
}

#[test]
fn energy_gradient_reports_invalid_displacement() {
    let sys = pair(2.00005, 1.0, 1.0, 3.0);
    let ctx = OperatorContext::new(sys.clone(), 2, Backend::Direct).unwrap();
    let sf = ctx.free_charge();
    let err = energy_gradient_fd(direct_factory(2), &sys, &sf, &tight(), 1, 1e-4).unwrap_err();
    assert!(matches!(err, Error::Geometry(_)));
    assert!(matches!(
        energy_gradient_fd(direct_factory(2), &sys, &sf, &tight(), 5, 1e-4),
        Err(Error::Index { index: 5, len: 2 })
    ));
}

#[test]
fn inert_sphere_forces_are_computed_normally() {
    let sys = SphereSystem::new(
        vec![
            SphereSpec::new(Vector3::zeros(), 1.0, 1.0, 1.0),
            SphereSpec::new(Vector3::new(0.0, 0.0, 3.0), 1.0, 8.0, 1.0),
        ],
        1.0,
    );
    assert_fd_agreement(sys, 8, &[0, 1]);
}
