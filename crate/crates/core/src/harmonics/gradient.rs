use super::{lm_index, n_coeffs};
use num_complex::Complex64;

/// Cartesian derivatives of the regular solid harmonics
/// `S_l^m(x) = |x|^l Y_l^m(x/|x|)`.
///
/// `∂_α S_l^m = Σ c · S_{l-1}^{m'}` where the pairs `(m', c)` are stored per
/// `(l, m, α)`; `α = 0, 1, 2` selects `x, y, z`.
#[derive(Debug, Clone)]
pub struct GradientTable {
    pub degree_max: usize,
    entries: Vec<[Vec<(i64, f64)>; 3]>,
}

impl GradientTable {
    /// Sparse expansion of `∂_α S_l^m` at degree `l − 1`.
    pub fn entries(&self, l: usize, m: i64, alpha: usize) -> &[(i64, f64)] {
        &self.entries[lm_index(l, m)][alpha]
    }

    /// Coefficients (in the `S` basis, degree `≤ degree − 1`) of
    /// `∂_α Σ c_l^m S_l^m` for a solid-harmonic series of degree `degree`.
    pub fn differentiate(&self, coeffs: &[f64], degree: usize, alpha: usize) -> Vec<f64> {
        assert!(degree <= self.degree_max);
        let out_deg = degree.saturating_sub(1);
        let mut out = vec![0.0; n_coeffs(out_deg)];
        if degree == 0 {
            return out;
        }
        for l in 1..=degree {
            for m in -(l as i64)..=(l as i64) {
                let c = coeffs[lm_index(l, m)];
                if c == 0.0 {
                    continue;
                }
                for &(mp, g) in self.entries(l, m, alpha) {
                    out[lm_index(l - 1, mp)] += c * g;
                }
            }
        }
        out
    }
}

/// `k_lm` with `S_l^m = k_lm Re R_l^m`, `S_l^{-m} = k_lm Im R_l^m`, where
/// `R_l^m = ρ^l P_l^m(cos θ) e^{imφ} / (l+m)!` (no phase).
pub(crate) fn real_to_scaled_factor(l: usize, m: usize) -> f64 {
    // N_lm (l+m)! = √((2l+1)/(4π) · (l−m)! (l+m)!)
    let lf = |k: usize| (1..=k).map(|j| (j as f64).ln()).sum::<f64>();
    let v = (((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).ln() + lf(l - m) + lf(l + m)) * 0.5;
    let base = v.exp();
    if m == 0 {
        base
    } else {
        std::f64::consts::SQRT_2 * base
    }
}

/// `R_l^j` written in the real basis `S_l^{m'}`.
fn scaled_in_real(l: usize, j: i64) -> Vec<(i64, Complex64)> {
    let ja = j.unsigned_abs() as usize;
    if ja > l {
        return Vec::new();
    }
    let k = real_to_scaled_factor(l, ja);
    if j == 0 {
        return vec![(0, Complex64::new(1.0 / k, 0.0))];
    }
    let sign = if j < 0 && ja % 2 == 1 { -1.0 } else { 1.0 };
    let im = if j > 0 { 1.0 } else { -1.0 };
    let ja = ja as i64;
    vec![
        (ja, Complex64::new(sign / k, 0.0)),
        (-ja, Complex64::new(0.0, im * sign / k)),
    ]
}

pub fn build_gradient_table(degree_max: usize) -> GradientTable {
    let mut entries: Vec<[Vec<(i64, f64)>; 3]> = (0..n_coeffs(degree_max))
        .map(|_| [Vec::new(), Vec::new(), Vec::new()])
        .collect();
    let half = Complex64::new(0.5, 0.0);
    let ihalf = Complex64::new(0.0, 0.5);
    for l in 1..=degree_max {
        for m in 0..=(l as i64) {
            // ∂x R_l^m = (R_{l-1}^{m-1} − R_{l-1}^{m+1})/2
            // ∂y R_l^m = i(R_{l-1}^{m-1} + R_{l-1}^{m+1})/2
            // ∂z R_l^m = R_{l-1}^m
            let combos: [Vec<(i64, Complex64)>; 3] = [
                vec![(m - 1, half), (m + 1, -half)],
                vec![(m - 1, ihalf), (m + 1, ihalf)],
                vec![(m, Complex64::new(1.0, 0.0))],
            ];
            let k = real_to_scaled_factor(l, m as usize);
            for (alpha, combo) in combos.iter().enumerate() {
                let mut z = vec![Complex64::new(0.0, 0.0); 2 * l - 1];
                for &(j, c) in combo {
                    for (mp, v) in scaled_in_real(l - 1, j) {
                        z[(mp + l as i64 - 1) as usize] += c * v;
                    }
                }
                let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
                let collect = |f: &dyn Fn(Complex64) -> f64| -> Vec<(i64, f64)> {
                    z.iter()
                        .enumerate()
                        .filter(|(_, &v)| f(v).abs() > 1e-14 * scale)
                        .map(|(i, &v)| (i as i64 - (l as i64 - 1), k * f(v)))
                        .collect()
                };
                entries[lm_index(l, m)][alpha] = collect(&|v| v.re);
                if m > 0 {
                    entries[lm_index(l, -m)][alpha] = collect(&|v| v.im);
                }
            }
        }
    }
    GradientTable {
        degree_max,
        entries,
    }
}
