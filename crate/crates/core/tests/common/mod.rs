//! Quadrature oracles shared by the integration tests. Everything here works
//! from point evaluations of real spherical harmonics only; no translation
//! or operator code is involved.
#![allow(dead_code)]

use nalgebra::{DMatrix, Vector3};
use spherepol::geometry::SphereSystem;
use spherepol::harmonics::{analyze, build_grid, gauss_legendre, n_coeffs, real_sh_all, QuadratureGrid};
use std::f64::consts::PI;

fn frame(axis: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let e3 = axis.normalize();
    let helper = if e3.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = helper.cross(&e3).normalize();
    let e2 = e3.cross(&e1);
    (e1, e2, e3)
}

/// Single-layer potential `∫ Y_k(y) / (4π|x − y|) dA_y` over a sphere of
/// radius `r` at a point `x = r·dir` on that same sphere, for every basis
/// function up to `lmax`. Polar coordinates around `x` cancel the kernel
/// singularity: `sinθ / (2 sin(θ/2)) = cos(θ/2)`.
pub fn self_potential_all(r: f64, lmax: usize, dir: &Vector3<f64>, n_theta: usize, n_phi: usize) -> Vec<f64> {
    let (e1, e2, e3) = frame(dir);
    let (gx, gw) = gauss_legendre(n_theta);
    let mut acc = vec![0.0; n_coeffs(lmax)];
    let mut buf = vec![0.0; n_coeffs(lmax)];
    let dphi = 2.0 * PI / n_phi as f64;
    for (t, wt) in gx.iter().zip(&gw) {
        // map [-1, 1] to θ ∈ [0, π]
        let theta = 0.5 * PI * (t + 1.0);
        let w_theta = 0.5 * PI * wt;
        let (st, ct) = theta.sin_cos();
        let jac = r * (0.5 * theta).cos() / (4.0 * PI);
        for k in 0..n_phi {
            let phi = k as f64 * dphi;
            let y = st * phi.cos() * e1 + st * phi.sin() * e2 + ct * e3;
            real_sh_all(lmax, &y, &mut buf);
            let w = w_theta * dphi * jac;
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += w * b;
            }
        }
    }
    acc
}

/// Matrix mapping density coefficients on a sphere of radius `r` to the
/// trace coefficients of its own single-layer potential.
pub fn self_block_by_quadrature(r: f64, lmax: usize) -> DMatrix<f64> {
    let grid = build_grid(2 * lmax + 2);
    let nc = n_coeffs(lmax);
    let n_theta = lmax + 24;
    let n_phi = 2 * lmax + 24;
    let samples: Vec<Vec<f64>> = grid.nodes.iter().map(|d| self_potential_all(r, lmax, d, n_theta, n_phi)).collect();
    let mut m = DMatrix::zeros(nc, nc);
    for col in 0..nc {
        let s: Vec<f64> = samples.iter().map(|v| v[col]).collect();
        let c = analyze(&s, &grid, lmax).unwrap();
        m.column_mut(col).copy_from_slice(&c.coeffs);
    }
    m
}

/// Block `(i, j)`, `i ≠ j`, of the single-layer operator: trace coefficients
/// on sphere `i` of the potential of basis densities on sphere `j`.
pub fn cross_block_by_quadrature(system: &SphereSystem, i: usize, j: usize, lmax: usize, exactness: usize) -> DMatrix<f64> {
    let (si, sj) = (&system.spheres[i], &system.spheres[j]);
    let tgt = build_grid(exactness);
    let src: QuadratureGrid = build_grid(exactness);
    let nc = n_coeffs(lmax);
    let mut basis = vec![0.0; nc];
    let mut b = DMatrix::zeros(src.len(), nc);
    for (s, y) in src.nodes.iter().enumerate() {
        real_sh_all(lmax, y, &mut basis);
        for k in 0..nc {
            b[(s, k)] = basis[k];
        }
    }
    let kernel = DMatrix::from_fn(tgt.len(), src.len(), |t, s| {
        let xp = si.center + si.radius * tgt.nodes[t];
        let yp = sj.center + sj.radius * src.nodes[s];
        src.weights[s] * sj.radius * sj.radius / (4.0 * PI * (xp - yp).norm())
    });
    let pot = kernel * b;
    let mut m = DMatrix::zeros(nc, nc);
    for col in 0..nc {
        let p: Vec<f64> = pot.column(col).iter().copied().collect();
        let c = analyze(&p, &tgt, lmax).unwrap();
        m.column_mut(col).copy_from_slice(&c.coeffs);
    }
    m
}

/// Dense single-layer matrix in coefficient space, assembled block by block
/// from surface quadrature.
pub fn dense_v_by_quadrature(system: &SphereSystem, lmax: usize, exactness: usize) -> DMatrix<f64> {
    let nc = n_coeffs(lmax);
    let n = system.len();
    let mut v = DMatrix::zeros(n * nc, n * nc);
    for i in 0..n {
        for j in 0..n {
            let blk = if i == j {
                self_block_by_quadrature(system.spheres[i].radius, lmax)
            } else {
                cross_block_by_quadrature(system, i, j, lmax, exactness)
            };
            v.view_mut((i * nc, j * nc), (nc, nc)).copy_from(&blk);
        }
    }
    v
}

/// `I + diag((κ_i − κ_0)/κ_0 · l/r_i) V` assembled from the quadrature `V`.
pub fn dense_system_by_quadrature(system: &SphereSystem, lmax: usize, exactness: usize) -> DMatrix<f64> {
    let nc = n_coeffs(lmax);
    let v = dense_v_by_quadrature(system, lmax, exactness);
    let n = v.nrows();
    let mut a = DMatrix::identity(n, n);
    for i in 0..system.len() {
        let s = &system.spheres[i];
        let c = (s.kappa - system.kappa0) / system.kappa0;
        for l in 0..=lmax {
            for k in l * l..(l + 1) * (l + 1) {
                let row = i * nc + k;
                let f = c * l as f64 / s.radius;
                for col in 0..n {
                    a[(row, col)] += f * v[(row, col)];
                }
            }
        }
    }
    a
}
