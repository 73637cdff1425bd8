//! Real orthonormal spherical harmonics without the Condon–Shortley phase.
//!
//! `Y_l^0 = N_l0 P_l`, `Y_l^m = √2 N_lm P_l^m(cos θ) cos(mφ)` for `m > 0` and
//! `√2 N_l|m| P_l^|m|(cos θ) sin(|m|φ)` for `m < 0`, with
//! `N_lm = √((2l+1)(l−m)! / (4π (l+m)!))`. Coefficients of degree `l` and
//! order `m` live at flat index `l² + l + m`.

mod gradient;
mod grid;

pub use gradient::{build_gradient_table, GradientTable};
pub use grid::{analyze, build_grid, gauss_legendre, synthesize, QuadratureGrid};

use crate::error::{Error, Result};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Flat index of `(l, m)`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    ((l * l + l) as i64 + m) as usize
}

/// Inverse of [`lm_index`].
pub fn index_lm(k: usize) -> (usize, i64) {
    let l = (k as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= k { l + 1 } else if l * l > k { l - 1 } else { l };
    (l, k as i64 - (l * l + l) as i64)
}

/// Number of coefficients up to and including degree `l`.
#[inline]
pub fn n_coeffs(l: usize) -> usize {
    (l + 1) * (l + 1)
}

/// Real spherical-harmonic coefficients of one surface function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCoeffs {
    pub degree_max: usize,
    pub coeffs: Vec<f64>,
}

impl SurfaceCoeffs {
    pub fn zeros(degree_max: usize) -> Self {
        Self {
            degree_max,
            coeffs: vec![0.0; n_coeffs(degree_max)],
        }
    }

    pub fn from_vec(degree_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != n_coeffs(degree_max) {
            return Err(Error::SizeMismatch {
                expected: n_coeffs(degree_max),
                got: coeffs.len(),
            });
        }
        Ok(Self { degree_max, coeffs })
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        if l > self.degree_max {
            0.0
        } else {
            self.coeffs[lm_index(l, m)]
        }
    }

    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        let k = lm_index(l, m);
        self.coeffs[k] = v;
    }

    /// Truncates or zero-pads to `degree`.
    pub fn resized(&self, degree: usize) -> Self {
        let mut coeffs = vec![0.0; n_coeffs(degree)];
        let n = coeffs.len().min(self.coeffs.len());
        coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        Self {
            degree_max: degree,
            coeffs,
        }
    }
}

/// Fills `out[lm_index(l, m)]` with `|x|^l Y_l^m(x/|x|)` for all `l ≤ lmax`.
///
/// The values are polynomials in `x`, so the origin and the poles need no
/// special treatment.
pub fn real_solid_harmonics(lmax: usize, x: &Vector3<f64>, out: &mut [f64]) {
    let n = n_coeffs(lmax);
    assert!(out.len() >= n);
    let (px, py, pz) = (x[0], x[1], x[2]);
    let rho2 = px * px + py * py + pz * pz;
    let sqrt2 = std::f64::consts::SQRT_2;
    // T_m^m and the running power (x + iy)^m
    let mut tmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    let (mut cre, mut cim) = (1.0, 0.0);
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            tmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt();
            let re = cre * px - cim * py;
            cim = cre * py + cim * px;
            cre = re;
        }
        let (fc, fs) = if m == 0 { (1.0, 0.0) } else { (sqrt2 * cre, sqrt2 * cim) };
        let mut t2 = 0.0;
        let mut t1 = tmm;
        store(out, m, m, t1, fc, fs);
        if m < lmax {
            let t = (2.0 * m as f64 + 3.0).sqrt() * pz * t1;
            t2 = t1;
            t1 = t;
            store(out, m + 1, m, t1, fc, fs);
        }
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let t = a * (pz * t1 - b * rho2 * t2);
            t2 = t1;
            t1 = t;
            store(out, l, m, t1, fc, fs);
        }
    }

    #[inline]
    fn store(out: &mut [f64], l: usize, m: usize, t: f64, fc: f64, fs: f64) {
        let base = l * l + l;
        if m == 0 {
            out[base] = t;
        } else {
            out[base + m] = t * fc;
            out[base - m] = t * fs;
        }
    }
}

/// All `Y_l^m(dir)` for `l ≤ lmax`; `dir` is assumed to be a unit vector.
pub fn real_sh_all(lmax: usize, dir: &Vector3<f64>, out: &mut [f64]) {
    real_solid_harmonics(lmax, dir, out);
}

/// Single value `Y_l^m(dir)`.
pub fn eval_real_sh(l: i64, m: i64, dir: &Vector3<f64>) -> Result<f64> {
    if l < 0 || m.abs() > l {
        return Err(Error::Domain(format!("(l, m) = ({l}, {m})")));
    }
    if !dir.iter().all(|v| v.is_finite()) || (dir.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("direction {dir:?} is not a unit vector")));
    }
    let l = l as usize;
    let mut buf = vec![0.0; n_coeffs(l)];
    real_sh_all(l, dir, &mut buf);
    Ok(buf[lm_index(l, m)])
}
