//! Discrete boundary operators in coefficient space: the single-layer
//! operator `V`, the Dirichlet-to-Neumann map, the induced-charge system
//! operator, the trace-space norms and the electrostatic energy.

use crate::error::{Error, Result};
use crate::geometry::{validate, SphereSystem, ValidationReport};
use crate::harmonics::{build_gradient_table, n_coeffs, GradientTable, SurfaceCoeffs};
use crate::par::{for_each_chunk, map_indexed, ExecPolicy};
use crate::translations::kernels::{self, CExp, RealComplexMap};
use crate::translations::{build_octree, complex_multipoles, Octree};
use std::f64::consts::PI;

/// Per-sphere coefficient blocks of a common degree, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalCoeffVector {
    pub degree: usize,
    pub data: Vec<f64>,
}

impl GlobalCoeffVector {
    pub fn zeros(n_spheres: usize, degree: usize) -> Self {
        Self {
            degree,
            data: vec![0.0; n_spheres * n_coeffs(degree)],
        }
    }

    pub fn from_blocks(blocks: &[SurfaceCoeffs]) -> Result<Self> {
        let degree = blocks.first().map(|b| b.degree_max).unwrap_or(0);
        let mut data = Vec::with_capacity(blocks.len() * n_coeffs(degree));
        for b in blocks {
            if b.degree_max != degree {
                return Err(Error::SizeMismatch {
                    expected: n_coeffs(degree),
                    got: b.coeffs.len(),
                });
            }
            data.extend_from_slice(&b.coeffs);
        }
        Ok(Self { degree, data })
    }

    pub fn block_len(&self) -> usize {
        n_coeffs(self.degree)
    }

    pub fn n_spheres(&self) -> usize {
        self.data.len() / self.block_len()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        let n = self.block_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.block_len();
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn surface(&self, i: usize) -> SurfaceCoeffs {
        SurfaceCoeffs {
            degree_max: self.degree,
            coeffs: self.block(i).to_vec(),
        }
    }

    pub fn per_sphere(&self) -> Vec<SurfaceCoeffs> {
        (0..self.n_spheres()).map(|i| self.surface(i)).collect()
    }

    /// Truncates or zero-pads every block to `degree`.
    pub fn resized(&self, degree: usize) -> Self {
        let n = self.n_spheres();
        let mut out = Self::zeros(n, degree);
        let k = n_coeffs(degree.min(self.degree));
        for i in 0..n {
            out.block_mut(i)[..k].copy_from_slice(&self.block(i)[..k]);
        }
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            degree: self.degree,
            data: self.data.iter().map(|v| a * v).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    /// Exact pairwise translations, `O(N²)`.
    Direct,
    /// Octree with `levels` (auto when `None`) and expansion order
    /// `order` (default `max(2 lmax, lmax + 1)`).
    Tree { levels: Option<u32>, order: Option<usize> },
}

/// Everything needed to apply the operators of one sphere system.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    system: SphereSystem,
    lmax: usize,
    backend: Backend,
    exec: ExecPolicy,
    map: RealComplexMap,
    gradient: GradientTable,
    octree: Option<Octree>,
    validation: ValidationReport,
}

impl OperatorContext {
    pub fn new(system: SphereSystem, lmax: usize, backend: Backend) -> Result<Self> {
        Self::with_policy(system, lmax, backend, ExecPolicy::default())
    }

    pub fn with_policy(system: SphereSystem, lmax: usize, backend: Backend, exec: ExecPolicy) -> Result<Self> {
        let validation = validate(&system)?;
        let octree = match backend {
            Backend::Direct => None,
            Backend::Tree { levels, order } => {
                let p = order.unwrap_or((2 * lmax).max(lmax + 1));
                if p < lmax + 1 {
                    return Err(Error::Settings(format!("tree order {p} must be at least lmax + 1 = {}", lmax + 1)));
                }
                Some(build_octree(&system, levels, p)?)
            }
        };
        Ok(Self {
            system,
            lmax,
            backend,
            exec,
            map: RealComplexMap::new(lmax + 2),
            gradient: build_gradient_table(lmax + 2),
            octree,
            validation,
        })
    }

    pub fn system(&self) -> &SphereSystem {
        &self.system
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn exec(&self) -> ExecPolicy {
        self.exec
    }

    pub fn octree(&self) -> Option<&Octree> {
        self.octree.as_ref()
    }

    pub fn gradient_table(&self) -> &GradientTable {
        &self.gradient
    }

    pub fn validation(&self) -> &ValidationReport {
        &self.validation
    }

    pub fn n_spheres(&self) -> usize {
        self.system.len()
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.system.spheres[i].radius
    }

    /// Free-charge densities of all spheres at degree `lmax`.
    pub fn free_charge(&self) -> GlobalCoeffVector {
        let blocks: Vec<SurfaceCoeffs> = self.system.spheres.iter().map(|s| s.free_charge_coeffs(self.lmax)).collect();
        GlobalCoeffVector::from_blocks(&blocks).expect("uniform degree")
    }

    fn map_for(&self, degree: usize) -> std::borrow::Cow<'_, RealComplexMap> {
        if degree <= self.map.order {
            std::borrow::Cow::Borrowed(&self.map)
        } else {
            std::borrow::Cow::Owned(RealComplexMap::new(degree))
        }
    }

    /// Complex local expansions at each sphere center (order `out_degree`) of
    /// the potential generated by all other spheres' densities.
    fn cross_locals(&self, sigma: &GlobalCoeffVector, out_degree: usize) -> Vec<CExp> {
        let map = self.map_for(sigma.degree.max(out_degree));
        let radii: Vec<f64> = self.system.spheres.iter().map(|s| s.radius).collect();
        let sources = complex_multipoles(&radii, sigma, &map, self.exec);
        match &self.octree {
            Some(tree) => tree.evaluate(&sources, out_degree, self.exec),
            None => direct_locals(&self.system, &sources, out_degree, self.exec),
        }
    }
}

fn direct_locals(system: &SphereSystem, sources: &[CExp], out_degree: usize, policy: ExecPolicy) -> Vec<CExp> {
    let centers: Vec<_> = system.spheres.iter().map(|s| s.center).collect();
    map_indexed(policy, centers.len(), |i| {
        let mut out = CExp::zeros(out_degree);
        let mut irr = CExp::zeros(0);
        for (j, src) in sources.iter().enumerate() {
            if j == i {
                continue;
            }
            let ord = src.order + out_degree;
            if irr.order != ord {
                irr = CExp::zeros(ord);
            }
            kernels::irregular(ord, &(centers[i] - centers[j]), &mut irr);
            kernels::m2l_acc(src, &irr, &mut out, false);
        }
        out.mirror();
        out
    })
}

fn check_len(ctx: &OperatorContext, v: &GlobalCoeffVector) -> Result<()> {
    let expected = ctx.n_spheres() * v.block_len();
    if v.data.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            got: v.data.len(),
        });
    }
    Ok(())
}

/// Coefficients of `(Vσ)|∂Ω_i` up to `out_degree` for every sphere.
pub fn apply_v(ctx: &OperatorContext, sigma: &GlobalCoeffVector, out_degree: usize) -> Result<GlobalCoeffVector> {
    check_len(ctx, sigma)?;
    let mut out = cross_potential(ctx, sigma, out_degree)?;
    add_self_term(ctx, sigma, &mut out);
    Ok(out)
}

/// Like [`apply_v`] but without each sphere's own contribution: the trace of
/// the potential generated by all other spheres.
pub fn cross_potential(ctx: &OperatorContext, sigma: &GlobalCoeffVector, out_degree: usize) -> Result<GlobalCoeffVector> {
    check_len(ctx, sigma)?;
    let locals = ctx.cross_locals(sigma, out_degree);
    let map = ctx.map_for(out_degree);
    let mut out = GlobalCoeffVector::zeros(ctx.n_spheres(), out_degree);
    let nc = n_coeffs(out_degree);
    let spheres = &ctx.system.spheres;
    for_each_chunk(ctx.exec, &mut out.data, nc, |i, blk| {
        map.local_from_complex(&locals[i], out_degree, blk);
        let r = spheres[i].radius;
        let mut rl = 1.0;
        for l in 0..=out_degree {
            for v in &mut blk[l * l..(l + 1) * (l + 1)] {
                *v *= rl;
            }
            rl *= r;
        }
    });
    Ok(out)
}

/// Adds the self-sphere contribution `r/(2l+1) σ_l^m` (degrees present in both).
pub fn add_self_term(ctx: &OperatorContext, sigma: &GlobalCoeffVector, out: &mut GlobalCoeffVector) {
    let top = sigma.degree.min(out.degree);
    for i in 0..ctx.n_spheres() {
        let r = ctx.radius(i);
        let src = sigma.block(i);
        let dst = out.block_mut(i);
        for l in 0..=top {
            let f = r / (2 * l + 1) as f64;
            for k in l * l..(l + 1) * (l + 1) {
                dst[k] += f * src[k];
            }
        }
    }
}

/// Interior Dirichlet-to-Neumann map: degree `l` scaled by `l / r_i`.
pub fn apply_dtn(ctx: &OperatorContext, lambda: &GlobalCoeffVector) -> Result<GlobalCoeffVector> {
    check_len(ctx, lambda)?;
    let mut out = lambda.clone();
    for i in 0..ctx.n_spheres() {
        let r = ctx.radius(i);
        let blk = out.block_mut(i);
        for l in 0..=lambda.degree {
            let f = l as f64 / r;
            for v in &mut blk[l * l..(l + 1) * (l + 1)] {
                *v *= f;
            }
        }
    }
    Ok(out)
}

/// `ν + ((κ_i − κ_0)/κ_0) DtN(Vν)` blockwise.
pub fn apply_system(ctx: &OperatorContext, nu: &GlobalCoeffVector) -> Result<GlobalCoeffVector> {
    if nu.degree != ctx.lmax {
        return Err(Error::SizeMismatch {
            expected: n_coeffs(ctx.lmax),
            got: nu.block_len(),
        });
    }
    let vnu = apply_v(ctx, nu, ctx.lmax)?;
    let dtn = apply_dtn(ctx, &vnu)?;
    let mut out = nu.clone();
    let k0 = ctx.system.kappa0;
    for i in 0..ctx.n_spheres() {
        let c = (ctx.system.spheres[i].kappa - k0) / k0;
        if c == 0.0 {
            continue;
        }
        for (o, d) in out.block_mut(i).iter_mut().zip(dtn.block(i)) {
            *o += c * d;
        }
    }
    Ok(out)
}

/// `(4π/κ_0) σ_f` projected to degree `lmax`.
pub fn rhs_from_free_charge(ctx: &OperatorContext, sigma_f: &GlobalCoeffVector) -> GlobalCoeffVector {
    sigma_f.resized(ctx.lmax).scaled(4.0 * PI / ctx.system.kappa0)
}

/// `Σ_i r_i² Σ a b`, the surface L² pairing.
pub fn l2_pairing(ctx: &OperatorContext, a: &GlobalCoeffVector, b: &GlobalCoeffVector) -> f64 {
    let deg = a.degree.min(b.degree);
    let k = n_coeffs(deg);
    (0..ctx.n_spheres())
        .map(|i| {
            let r = ctx.radius(i);
            r * r * a.block(i)[..k].iter().zip(&b.block(i)[..k]).map(|(x, y)| x * y).sum::<f64>()
        })
        .sum()
}

fn weighted_norm(ctx: &OperatorContext, u: &GlobalCoeffVector, w: impl Fn(f64, usize) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..ctx.n_spheres() {
        let r = ctx.radius(i);
        let blk = u.block(i);
        for l in 0..=u.degree {
            let f = w(r, l);
            s += f * blk[l * l..(l + 1) * (l + 1)].iter().map(|v| v * v).sum::<f64>();
        }
    }
    s.sqrt()
}

/// The DtN-weighted trace norm: `r²` on degree 0, `r² (l/r)` above.
pub fn triple_norm(ctx: &OperatorContext, lambda: &GlobalCoeffVector) -> f64 {
    weighted_norm(ctx, lambda, |r, l| if l == 0 { r * r } else { r * l as f64 })
}

/// Dual of [`triple_norm`] under the surface L² pairing: `r²` on degree 0,
/// `r³/l` above.
pub fn triple_dual_norm(ctx: &OperatorContext, sigma: &GlobalCoeffVector) -> f64 {
    weighted_norm(ctx, sigma, |r, l| if l == 0 { r * r } else { r * r * r / l as f64 })
}

/// [`triple_dual_norm`] of each sphere's block separately.
pub fn sphere_dual_norms(ctx: &OperatorContext, sigma: &GlobalCoeffVector) -> Vec<f64> {
    (0..ctx.n_spheres())
        .map(|i| {
            let r = ctx.radius(i);
            let blk = sigma.block(i);
            let mut s = 0.0;
            for l in 0..=sigma.degree {
                let w = if l == 0 { r * r } else { r * r * r / l as f64 };
                s += w * blk[l * l..(l + 1) * (l + 1)].iter().map(|v| v * v).sum::<f64>();
            }
            s.sqrt()
        })
        .collect()
}

/// Discrete `H^s` norm: `r²` on degree 0, `r² (l/r)^{2s}` above.
pub fn hs_norm(ctx: &OperatorContext, u: &GlobalCoeffVector, s: f64) -> f64 {
    weighted_norm(ctx, u, |r, l| if l == 0 { r * r } else { r * r * (l as f64 / r).powf(2.0 * s) })
}

/// `½ · 4π · ⟨σ_f, Vν⟩` with `Vν` truncated at `lmax`.
pub fn energy(ctx: &OperatorContext, sigma_f: &GlobalCoeffVector, nu: &GlobalCoeffVector) -> Result<f64> {
    let vnu = apply_v(ctx, nu, ctx.lmax)?;
    Ok(energy_from_potential(ctx, sigma_f, &vnu))
}

/// Energy from an already computed `Vν` (any degree ≥ `lmax`).
pub fn energy_from_potential(ctx: &OperatorContext, sigma_f: &GlobalCoeffVector, vnu: &GlobalCoeffVector) -> f64 {
    0.5 * 4.0 * PI * l2_pairing(ctx, &sigma_f.resized(ctx.lmax), &vnu.resized(ctx.lmax))
}
