use super::{n_coeffs, real_sh_all, SurfaceCoeffs};
use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::f64::consts::PI;

/// Tensor-product quadrature on the unit sphere: Gauss–Legendre in `cos θ`
/// times the trapezoidal rule in `φ`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Grid integrating every spherical polynomial of degree ≤ `exactness_degree`
/// exactly.
pub fn build_grid(exactness_degree: usize) -> QuadratureGrid {
    let n_theta = exactness_degree / 2 + 1;
    let n_phi = exactness_degree + 1;
    let (ct, wt) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    for (&z, &w) in ct.iter().zip(&wt) {
        let s = (1.0 - z * z).max(0.0).sqrt();
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            nodes.push(Vector3::new(s * phi.cos(), s * phi.sin(), z));
            weights.push(w * dphi);
        }
    }
    QuadratureGrid {
        nodes,
        weights,
        exactness_degree,
        n_theta,
        n_phi,
    }
}

/// Forward transform: `[u]_l^m = Σ_k w_k u(n_k) Y_l^m(n_k)`.
pub fn analyze(samples: &[f64], grid: &QuadratureGrid, degree_max: usize) -> Result<SurfaceCoeffs> {
    if samples.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            got: samples.len(),
        });
    }
    let nc = n_coeffs(degree_max);
    let mut out = vec![0.0; nc];
    let mut y = vec![0.0; nc];
    for ((node, &w), &u) in grid.nodes.iter().zip(&grid.weights).zip(samples) {
        real_sh_all(degree_max, node, &mut y);
        let wu = w * u;
        for (o, yk) in out.iter_mut().zip(&y) {
            *o += wu * yk;
        }
    }
    Ok(SurfaceCoeffs {
        degree_max,
        coeffs: out,
    })
}

/// Pointwise evaluation `Σ [u]_l^m Y_l^m(dir)`.
pub fn synthesize(coeffs: &SurfaceCoeffs, dirs: &[Vector3<f64>]) -> Vec<f64> {
    let mut y = vec![0.0; n_coeffs(coeffs.degree_max)];
    dirs.iter()
        .map(|d| {
            real_sh_all(coeffs.degree_max, d, &mut y);
            coeffs.coeffs.iter().zip(&y).map(|(c, v)| c * v).sum()
        })
        .collect()
}
