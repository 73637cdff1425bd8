//! Full (unrestarted) GMRES and the induced-charge solve.

use crate::error::{Error, Result};
use crate::operators::{apply_system, rhs_from_free_charge, GlobalCoeffVector, OperatorContext};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSettings {
    /// Target for `‖b − Ax‖ / ‖b‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 400,
        }
    }
}

impl SolveSettings {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual norms, starting with 1 for the zero initial guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub nu: GlobalCoeffVector,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let h = a.hypot(b);
        (a / h, b / h)
    }
}

/// Solves `A x = b` from a zero initial guess. Arnoldi uses modified
/// Gram–Schmidt with a second pass when the new vector loses more than
/// 30% of its norm. A non-converged run returns the minimal-residual
/// iterate with `converged = false`.
pub fn gmres<F>(mut apply: F, rhs: &[f64], settings: &SolveSettings) -> Result<GmresOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(settings.tolerance > 0.0) {
        return Err(Error::Settings(format!("tolerance must be positive, got {}", settings.tolerance)));
    }
    let n = rhs.len();
    let beta = dot(rhs, rhs).sqrt();
    if beta == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual_history: vec![0.0],
            converged: true,
        });
    }
    let m = settings.max_iterations.min(n.max(1));
    let mut basis: Vec<Vec<f64>> = vec![rhs.iter().map(|v| v / beta).collect()];
    // column j of the Hessenberg matrix, already rotated
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut g = vec![beta];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut k = 0;
    while k < m {
        let mut w = apply(&basis[k])?;
        if w.len() != n {
            return Err(Error::SizeMismatch { expected: n, got: w.len() });
        }
        let mut col = vec![0.0; k + 2];
        let before = dot(&w, &w).sqrt();
        for (i, v) in basis.iter().enumerate() {
            let c = dot(&w, v);
            col[i] = c;
            w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
        }
        let mut after = dot(&w, &w).sqrt();
        if after < 0.7 * before {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                col[i] += c;
                w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
            }
            after = dot(&w, &w).sqrt();
        }
        col[k + 1] = after;
        for (i, &(c, s)) in rot.iter().enumerate() {
            let (a, b) = (col[i], col[i + 1]);
            col[i] = c * a + s * b;
            col[i + 1] = -s * a + c * b;
        }
        let (c, s) = givens(col[k], col[k + 1]);
        col[k] = c * col[k] + s * col[k + 1];
        col[k + 1] = 0.0;
        rot.push((c, s));
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s * gk);
        h.push(col);
        k += 1;
        let rel = g[k].abs() / beta;
        history.push(rel);
        let breakdown = after <= 1e-14 * before.max(f64::MIN_POSITIVE);
        if rel <= settings.tolerance || breakdown {
            converged = true;
            break;
        }
        basis.push(w.iter().map(|v| v / after).collect());
    }
    // back substitution on the k×k triangle
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![0.0; n];
    for (yj, v) in y.iter().zip(&basis) {
        x.iter_mut().zip(v).for_each(|(a, b)| *a += yj * b);
    }
    Ok(GmresOutcome {
        x,
        iterations: k,
        residual_history: history,
        converged,
    })
}

/// Solves the induced-charge system `apply_system(ν) = (4π/κ_0) σ_f`.
pub fn solve_induced_charge(ctx: &OperatorContext, sigma_f: &GlobalCoeffVector, settings: &SolveSettings) -> Result<SolveReport> {
    let rhs = rhs_from_free_charge(ctx, sigma_f);
    let degree = rhs.degree;
    let out = gmres(
        |v| {
            let x = GlobalCoeffVector {
                degree,
                data: v.to_vec(),
            };
            Ok(apply_system(ctx, &x)?.data)
        },
        &rhs.data,
        settings,
    )?;
    Ok(SolveReport {
        nu: GlobalCoeffVector { degree, data: out.x },
        iterations: out.iterations,
        residual_history: out.residual_history,
        converged: out.converged,
    })
}
