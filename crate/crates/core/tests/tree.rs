use nalgebra::Vector3;
use rand::{rngs::StdRng, Rng, SeedableRng};
use spherepol::geometry::{make_alternating_lattice, make_layered_lattice, SphereSpec, SphereSystem};
use spherepol::operators::{cross_potential, Backend, GlobalCoeffVector, OperatorContext};
use spherepol::par::ExecPolicy;
use spherepol::solver::{solve_induced_charge, SolveSettings};
use spherepol::translations::{build_octree, m2l, sphere_to_multipole, tree_potential, tree_potential_with, Octree};
use spherepol::Error;

fn rel(a: &GlobalCoeffVector, b: &GlobalCoeffVector) -> f64 {
    let d: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.norm()
}

fn random_density(seed: u64, n: usize, degree: usize) -> GlobalCoeffVector {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut v = GlobalCoeffVector::zeros(n, degree);
    v.data.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
    v
}

fn tree(levels: Option<u32>, order: usize) -> Backend {
    Backend::Tree {
        levels,
        order: Some(order),
    }
}

/// Spheres whose contributions reach sphere `i`, one entry per path.
fn contributors(t: &Octree, i: usize) -> Vec<usize> {
    let depth = t.depth as usize;
    let mut found = Vec::new();
    let leaf = t.sphere_leaf[i];
    for &nb in &t.near[leaf] {
        found.extend(t.leaf_spheres[nb].iter().copied().filter(|&j| j != i));
    }
    // walk up from the leaf, collecting the spheres below each interaction box
    let mut b = leaf;
    for l in (2..=depth).rev() {
        for &s in &t.levels[l].interactions[b] {
            let mut boxes = vec![s];
            for ll in l..depth {
                boxes = boxes.iter().flat_map(|&x| t.levels[ll].children[x].clone()).collect();
            }
            for x in boxes {
                found.extend(t.leaf_spheres[x].iter().copied());
            }
        }
        b = t.levels[l].parent[b];
    }
    found.sort_unstable();
    found
}

#[test]
fn single_sphere_tree_has_one_leaf() {
    let sys = SphereSystem::new(vec![SphereSpec::new(Vector3::new(2.0, 0.0, 0.0), 1.0, 2.0, 1.0)], 1.0);
    let t = build_octree(&sys, None, 8).unwrap();
    assert_eq!(t.depth, 0);
    assert_eq!(t.leaf_spheres, vec![vec![0]]);
}

#[test]
fn auto_depth_targets_eight_per_leaf() {
    let t512 = build_octree(&make_alternating_lattice(8, 6.0), None, 12).unwrap();
    let occ = t512.mean_leaf_occupancy();
    assert!((4.0..=32.0).contains(&occ), "{occ}");
    let t4096 = build_octree(&make_alternating_lattice(16, 6.0), None, 12).unwrap();
    assert_eq!(t4096.depth, t512.depth + 1);
    let layered = build_octree(&make_layered_lattice(8, 6.0), None, 12).unwrap();
    assert!((4.0..=32.0).contains(&layered.mean_leaf_occupancy()));
}

#[test]
fn too_deep_tree_is_rejected() {
    let sys = make_alternating_lattice(4, 6.0);
    match build_octree(&sys, Some(4), 8) {
        Err(Error::Depth { depth, leaf_width, diameter }) => {
            assert_eq!(depth, 4);
            assert!(leaf_width < diameter);
            assert_eq!(diameter, 6.0);
        }
        other => panic!("expected a depth error, got {other:?}"),
    }
    assert!(build_octree(&sys, Some(2), 8).is_ok());
    assert_eq!(build_octree(&SphereSystem::new(vec![], 1.0), None, 4).unwrap_err(), Error::EmptySystem);
}

#[test]
fn every_pair_is_counted_exactly_once() {
    for (sys, levels) in [
        (make_alternating_lattice(6, 6.0), None),
        (make_alternating_lattice(8, 6.0), Some(3)),
        (make_layered_lattice(5, 6.0), Some(2)),
    ] {
        let t = build_octree(&sys, levels, 4).unwrap();
        assert!(t.depth >= 2);
        for i in 0..sys.len() {
            let expect: Vec<usize> = (0..sys.len()).filter(|&j| j != i).collect();
            assert_eq!(contributors(&t, i), expect, "sphere {i}");
        }
    }
}

#[test]
fn two_spheres_match_pairwise_translation() {
    let sys = SphereSystem::new(
        vec![
            SphereSpec::new(Vector3::zeros(), 1.0, 4.0, 1.0),
            SphereSpec::new(Vector3::new(1.0, 2.0, 2.5), 1.5, 2.0, -1.0),
        ],
        1.0,
    );
    let lmax = 5;
    let sigma = random_density(1, 2, lmax);
    let t = build_octree(&sys, None, 2 * lmax).unwrap();
    let out = tree_potential(&t, &sigma, lmax + 1).unwrap();
    for (i, j) in [(0, 1), (1, 0)] {
        let mp = sphere_to_multipole(&sys.spheres[j], &sigma.surface(j));
        let loc = m2l(&mp, sys.spheres[i].center, lmax + 1).unwrap();
        for (a, b) in out.block(i).iter().zip(&loc.coeffs) {
            assert!((a - b).abs() < 1e-13 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

#[test]
fn shallow_tree_equals_direct_backend() {
    let sys = make_alternating_lattice(3, 6.0);
    let lmax = 4;
    let sigma = random_density(2, sys.len(), lmax);
    let d = OperatorContext::new(sys.clone(), lmax, Backend::Direct).unwrap();
    let t = OperatorContext::new(sys, lmax, tree(Some(1), 2 * lmax)).unwrap();
    let (a, b) = (cross_potential(&t, &sigma, lmax + 1).unwrap(), cross_potential(&d, &sigma, lmax + 1).unwrap());
    assert!(rel(&a, &b) < 1e-13);
}

#[test]
fn far_field_error_shrinks_as_order_doubles() {
    let sys = make_alternating_lattice(5, 6.0);
    let lmax = 2;
    let d = OperatorContext::new(sys.clone(), lmax, Backend::Direct).unwrap();
    let nu = solve_induced_charge(&d, &d.free_charge(), &SolveSettings::with_tolerance(1e-11)).unwrap().nu;
    let exact = cross_potential(&d, &nu, lmax + 1).unwrap();
    let mut errs = Vec::new();
    for p in [4, 8, 16, 32] {
        let t = OperatorContext::new(sys.clone(), lmax, tree(None, p)).unwrap();
        assert_eq!(t.octree().unwrap().depth, 2);
        errs.push(rel(&cross_potential(&t, &nu, lmax + 1).unwrap(), &exact));
    }
    for w in errs.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{errs:?}");
    }
    assert!(errs[3] < 1e-6, "{errs:?}");
}

#[test]
fn sequential_and_parallel_passes_agree() {
    let sys = make_alternating_lattice(6, 6.0);
    let sigma = random_density(3, sys.len(), 3);
    let t = build_octree(&sys, None, 6).unwrap();
    let a = tree_potential_with(&t, &sigma, 4, ExecPolicy::Sequential).unwrap();
    let b = tree_potential_with(&t, &sigma, 4, ExecPolicy::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tree_potential_checks_sizes() {
    let sys = make_alternating_lattice(2, 6.0);
    let t = build_octree(&sys, None, 4).unwrap();
    assert!(matches!(
        tree_potential(&t, &GlobalCoeffVector::zeros(3, 2), 2),
        Err(Error::SizeMismatch { expected: 8, got: 3 })
    ));
}

#[test]
fn order_below_lmax_is_rejected() {
    let sys = make_alternating_lattice(2, 6.0);
    assert!(OperatorContext::new(sys, 6, tree(None, 5)).is_err());
}
