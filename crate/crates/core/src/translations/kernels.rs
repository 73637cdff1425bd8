//! Complex "scaled" solid harmonics
//!
//! `R_n^m(x) = ρ^n P_n^m(cos θ) e^{imφ} / (n+m)!` and
//! `I_n^m(x) = (n−m)! P_n^m(cos θ) e^{imφ} / ρ^{n+1}` (no Condon–Shortley
//! phase), with `X_n^{-m} = (−1)^m conj(X_n^m)`. In this normalization
//! `1/|x−y| = Σ conj(R_n^m(y)) I_n^m(x)` for `|y| < |x|` and the translation
//! operators become plain convolutions.
//!
//! Expansions store real and imaginary parts in separate arrays at flat index
//! `n² + n + m`. Kernels write only `m ≥ 0` outputs; call
//! [`CExp::mirror`] to fill `m < 0`.

use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct CExp {
    pub order: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[inline]
fn idx(n: usize, m: i64) -> usize {
    ((n * n + n) as i64 + m) as usize
}

impl CExp {
    pub fn zeros(order: usize) -> Self {
        let len = (order + 1) * (order + 1);
        Self {
            order,
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn clear(&mut self) {
        self.re.iter_mut().for_each(|v| *v = 0.0);
        self.im.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Fills `m < 0` from `X^{-m} = (−1)^m conj(X^m)`.
    pub fn mirror(&mut self) {
        for n in 1..=self.order {
            let c = n * n + n;
            for m in 1..=n {
                let s = if m % 2 == 0 { 1.0 } else { -1.0 };
                self.re[c - m] = s * self.re[c + m];
                self.im[c - m] = -s * self.im[c + m];
            }
        }
    }

    pub fn add_assign(&mut self, other: &CExp) {
        let n = self.re.len().min(other.re.len());
        for k in 0..n {
            self.re[k] += other.re[k];
            self.im[k] += other.im[k];
        }
    }

    /// Multiplies degree `n` by `(−1)^n`; this turns an expansion about
    /// `a` into one about `−a` for both harmonic families.
    pub fn parity_flipped(&self) -> CExp {
        let mut out = self.clone();
        for n in (1..=self.order).step_by(2) {
            for k in n * n..(n + 1) * (n + 1) {
                out.re[k] = -out.re[k];
                out.im[k] = -out.im[k];
            }
        }
        out
    }
}

fn mirror_raw(order: usize, re: &mut [f64], im: &mut [f64]) {
    for n in 1..=order {
        let c = n * n + n;
        for m in 1..=n {
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            re[c - m] = s * re[c + m];
            im[c - m] = -s * im[c + m];
        }
    }
}

/// `R_n^m(x)` for `n ≤ p`, all `m`.
pub fn regular(p: usize, x: &Vector3<f64>, out: &mut CExp) {
    debug_assert!(out.order >= p);
    let (px, py, pz) = (x[0], x[1], x[2]);
    let rho2 = px * px + py * py + pz * pz;
    let (re, im) = (&mut out.re, &mut out.im);
    let (mut dre, mut dim) = (1.0, 0.0);
    for m in 0..=p {
        if m > 0 {
            let f = 1.0 / (2 * m) as f64;
            let r = (dre * px - dim * py) * f;
            dim = (dre * py + dim * px) * f;
            dre = r;
        }
        re[idx(m, m as i64)] = dre;
        im[idx(m, m as i64)] = dim;
        let (mut r2, mut i2) = (0.0, 0.0);
        let (mut r1, mut i1) = (dre, dim);
        for n in (m + 1)..=p {
            let a = (2 * n - 1) as f64 * pz;
            let d = 1.0 / ((n - m) * (n + m)) as f64;
            let rn = (a * r1 - rho2 * r2) * d;
            let inn = (a * i1 - rho2 * i2) * d;
            r2 = r1;
            i2 = i1;
            r1 = rn;
            i1 = inn;
            re[idx(n, m as i64)] = rn;
            im[idx(n, m as i64)] = inn;
        }
    }
    mirror_raw(p, re, im);
}

/// `I_n^m(x)` for `n ≤ p`, all `m`. `x` must be nonzero.
pub fn irregular(p: usize, x: &Vector3<f64>, out: &mut CExp) {
    debug_assert!(out.order >= p);
    let (px, py, pz) = (x[0], x[1], x[2]);
    let rho2 = px * px + py * py + pz * pz;
    let inv2 = 1.0 / rho2;
    let (re, im) = (&mut out.re, &mut out.im);
    let (mut dre, mut dim) = (inv2.sqrt(), 0.0);
    for m in 0..=p {
        if m > 0 {
            let f = (2 * m - 1) as f64 * inv2;
            let r = (dre * px - dim * py) * f;
            dim = (dre * py + dim * px) * f;
            dre = r;
        }
        re[idx(m, m as i64)] = dre;
        im[idx(m, m as i64)] = dim;
        let (mut r2, mut i2) = (0.0, 0.0);
        let (mut r1, mut i1) = (dre, dim);
        for n in (m + 1)..=p {
            let a = (2 * n - 1) as f64 * pz;
            let b = ((n + m - 1) * (n - m).saturating_sub(1)) as f64;
            let rn = (a * r1 - b * r2) * inv2;
            let inn = (a * i1 - b * i2) * inv2;
            r2 = r1;
            i2 = i1;
            r1 = rn;
            i1 = inn;
            re[idx(n, m as i64)] = rn;
            im[idx(n, m as i64)] = inn;
        }
    }
    mirror_raw(p, re, im);
}

/// Complex dot product `Σ a_k b_k` of two equally long split slices.
#[inline(always)]
fn cdot(ar: &[f64], ai: &[f64], br: &[f64], bi: &[f64]) -> (f64, f64) {
    let n = ar.len();
    let (ai, br, bi) = (&ai[..n], &br[..n], &bi[..n]);
    let (mut s0, mut s1, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0);
    let mut k = 0;
    while k + 1 < n {
        s0 += ar[k] * br[k] - ai[k] * bi[k];
        t0 += ar[k] * bi[k] + ai[k] * br[k];
        s1 += ar[k + 1] * br[k + 1] - ai[k + 1] * bi[k + 1];
        t1 += ar[k + 1] * bi[k + 1] + ai[k + 1] * br[k + 1];
        k += 2;
    }
    if k < n {
        s0 += ar[k] * br[k] - ai[k] * bi[k];
        t0 += ar[k] * bi[k] + ai[k] * br[k];
    }
    (s0 + s1, t0 + t1)
}

/// Multipole-to-local: `out_k^j += (−1)^{k+j} Σ_{n,m} A_n^m I_{n+k}^{m−j}(a)`
/// with `a = target − source`. `irr` must hold `I(a)` to order
/// `a.order + out.order`. With `flipped`, `irr` holds `I(−a)` and `src` is
/// the parity-flipped multipole, which yields the same result.
pub fn m2l_acc(src: &CExp, irr: &CExp, out: &mut CExp, flipped: bool) {
    let ps = src.order;
    let pt = out.order;
    debug_assert!(irr.order >= ps + pt);
    for k in 0..=pt {
        for j in 0..=k {
            let (mut sr, mut si) = (0.0, 0.0);
            for n in 0..=ps {
                let a0 = n * n;
                let len = 2 * n + 1;
                let b0 = (n + k) * (n + k) + k - j;
                let (r, i) = cdot(
                    &src.re[a0..a0 + len],
                    &src.im[a0..a0 + len],
                    &irr.re[b0..b0 + len],
                    &irr.im[b0..b0 + len],
                );
                sr += r;
                si += i;
            }
            let odd = if flipped { j % 2 == 1 } else { (k + j) % 2 == 1 };
            let s = if odd { -1.0 } else { 1.0 };
            let o = idx(k, j as i64);
            out.re[o] += s * sr;
            out.im[o] += s * si;
        }
    }
}

/// Multipole-to-multipole: `out_N^M += Σ_{k,l} A_{N−k}^{M−l} conj(R_k^l(d))`
/// with `d = old_center − new_center`; `reg` holds `R(d)` to `out.order`.
pub fn m2m_acc(src: &CExp, reg: &CExp, out: &mut CExp) {
    let ps = src.order as i64;
    let pt = out.order as i64;
    for nn in 0..=pt {
        for mm in 0..=nn {
            let (mut sr, mut si) = (0.0, 0.0);
            for k in (nn - ps).max(0)..=nn {
                let n = nn - k;
                let lo = (-k).max(mm - n);
                let hi = k.min(mm + n);
                for l in lo..=hi {
                    let a = idx(n as usize, mm - l);
                    let r = idx(k as usize, l);
                    // A · conj(R)
                    sr += src.re[a] * reg.re[r] + src.im[a] * reg.im[r];
                    si += src.im[a] * reg.re[r] - src.re[a] * reg.im[r];
                }
            }
            let o = idx(nn as usize, mm);
            out.re[o] += sr;
            out.im[o] += si;
        }
    }
}

/// Local-to-local: `out_k^l += Σ_{n ≥ k, m} C_n^m R_{n−k}^{m−l}(b)` with
/// `b = new_center − old_center`; `reg` holds `R(b)` to `src.order`.
pub fn l2l_acc(src: &CExp, reg: &CExp, out: &mut CExp) {
    let ps = src.order;
    let pt = out.order.min(ps);
    for k in 0..=pt {
        for l in 0..=(k as i64) {
            let (mut sr, mut si) = (0.0, 0.0);
            for n in k..=ps {
                let d = (n - k) as i64;
                let ni = n as i64;
                let lo = (-ni).max(l - d);
                let hi = ni.min(l + d);
                if lo > hi {
                    continue;
                }
                let len = (hi - lo + 1) as usize;
                let a0 = idx(n, lo);
                let b0 = idx(d as usize, lo - l);
                let (r, i) = cdot(
                    &src.re[a0..a0 + len],
                    &src.im[a0..a0 + len],
                    &reg.re[b0..b0 + len],
                    &reg.im[b0..b0 + len],
                );
                sr += r;
                si += i;
            }
            let o = idx(k, l);
            out.re[o] += sr;
            out.im[o] += si;
        }
    }
}

/// Factors linking real and complex coefficients: `c_n Q_nm` and
/// `c_n / Q_nm` with `c_n = √((2n+1)/4π)`, `Q_nm = √((n−m)!(n+m)!)`, for
/// `m ≥ 0` stored at `n² + n + m`.
#[derive(Debug, Clone)]
pub struct RealComplexMap {
    pub order: usize,
    cq: Vec<f64>,
    c_over_q: Vec<f64>,
}

impl RealComplexMap {
    pub fn new(order: usize) -> Self {
        let mut lnf = vec![0.0f64; 2 * order + 2];
        for k in 1..lnf.len() {
            lnf[k] = lnf[k - 1] + (k as f64).ln();
        }
        let len = (order + 1) * (order + 1);
        let mut cq = vec![0.0; len];
        let mut c_over_q = vec![0.0; len];
        for n in 0..=order {
            let lc = 0.5 * ((2 * n + 1) as f64 / (4.0 * std::f64::consts::PI)).ln();
            for m in 0..=n {
                let lq = 0.5 * (lnf[n - m] + lnf[n + m]);
                cq[idx(n, m as i64)] = (lc + lq).exp();
                c_over_q[idx(n, m as i64)] = (lc - lq).exp();
            }
        }
        Self { order, cq, c_over_q }
    }

    /// Real exterior coefficients (field `Σ M ρ^{-(n+1)} Y`) to complex `A`
    /// (field `Σ A I`).
    pub fn exterior_to_complex(&self, real: &[f64], order: usize, out: &mut CExp) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        out.clear();
        for n in 0..=order {
            let c = n * n + n;
            out.re[c] = real[c] * self.c_over_q[c];
            for m in 1..=n {
                let f = self.c_over_q[c + m] * s;
                out.re[c + m] = f * real[c + m];
                out.im[c + m] = -f * real[c - m];
            }
        }
        out.mirror();
    }

    pub fn exterior_from_complex(&self, a: &CExp, order: usize, real: &mut [f64]) {
        let s = std::f64::consts::SQRT_2;
        for n in 0..=order {
            let c = n * n + n;
            real[c] = a.re[c] / self.c_over_q[c];
            for m in 1..=n {
                let f = s / self.c_over_q[c + m];
                real[c + m] = f * a.re[c + m];
                real[c - m] = -f * a.im[c + m];
            }
        }
    }

    /// Real local coefficients (field `Σ L ρ^n Y`) to complex `C`
    /// (field `Σ C R`).
    pub fn local_to_complex(&self, real: &[f64], order: usize, out: &mut CExp) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        out.clear();
        for n in 0..=order {
            let c = n * n + n;
            out.re[c] = real[c] * self.cq[c];
            for m in 1..=n {
                let f = self.cq[c + m] * s;
                out.re[c + m] = f * real[c + m];
                out.im[c + m] = -f * real[c - m];
            }
        }
        out.mirror();
    }

    pub fn local_from_complex(&self, c_exp: &CExp, order: usize, real: &mut [f64]) {
        let s = std::f64::consts::SQRT_2;
        for n in 0..=order {
            let c = n * n + n;
            real[c] = c_exp.re[c] / self.cq[c];
            for m in 1..=n {
                let f = s / self.cq[c + m];
                real[c + m] = f * c_exp.re[c + m];
                real[c - m] = -f * c_exp.im[c + m];
            }
        }
    }
}
