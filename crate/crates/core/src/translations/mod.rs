//! Solid-harmonic expansions of harmonic fields and their translations.
//!
//! The real public types carry coefficients in the real orthonormal basis:
//! a [`MultipoleExpansion`] represents `Σ M_l^m |x−c|^{-(l+1)} Y_l^m` and a
//! [`LocalExpansion`] represents `Σ L_l^m |x−c|^l Y_l^m`. Translations go
//! through complex scaled solid harmonics (see [`kernels`]).

pub mod kernels;
mod octree;

pub use octree::{build_octree, tree_potential, tree_potential_with, Octree, TreeLevel};

use crate::error::{Error, Result};
use crate::geometry::SphereSpec;
use crate::harmonics::{n_coeffs, real_solid_harmonics, SurfaceCoeffs};
use kernels::{CExp, RealComplexMap};
use nalgebra::Vector3;

#[derive(Debug, Clone, PartialEq)]
pub struct MultipoleExpansion {
    pub center: Vector3<f64>,
    pub order: usize,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalExpansion {
    pub center: Vector3<f64>,
    pub order: usize,
    pub coeffs: Vec<f64>,
}

impl MultipoleExpansion {
    pub fn zeros(center: Vector3<f64>, order: usize) -> Self {
        Self {
            center,
            order,
            coeffs: vec![0.0; n_coeffs(order)],
        }
    }

    /// Field value at `x` (outside the source ball).
    pub fn evaluate(&self, x: &Vector3<f64>) -> f64 {
        let d = x - self.center;
        let r2 = d.norm_squared();
        let mut s = vec![0.0; n_coeffs(self.order)];
        real_solid_harmonics(self.order, &d, &mut s);
        let inv = 1.0 / r2.sqrt();
        let mut scale = inv;
        let mut total = 0.0;
        for l in 0..=self.order {
            // S_l / ρ^{2l+1} = Y_l / ρ^{l+1}
            let blk = l * l..(l + 1) * (l + 1);
            let dot: f64 = self.coeffs[blk.clone()].iter().zip(&s[blk]).map(|(a, b)| a * b).sum();
            total += dot * scale;
            scale *= inv * inv;
        }
        total
    }

    fn to_complex(&self, map: &RealComplexMap) -> CExp {
        let mut a = CExp::zeros(self.order);
        map.exterior_to_complex(&self.coeffs, self.order, &mut a);
        a
    }

    fn from_complex(center: Vector3<f64>, a: &CExp, map: &RealComplexMap) -> Self {
        let mut out = Self::zeros(center, a.order);
        map.exterior_from_complex(a, a.order, &mut out.coeffs);
        out
    }
}

impl LocalExpansion {
    pub fn zeros(center: Vector3<f64>, order: usize) -> Self {
        Self {
            center,
            order,
            coeffs: vec![0.0; n_coeffs(order)],
        }
    }

    pub fn evaluate(&self, x: &Vector3<f64>) -> f64 {
        let mut s = vec![0.0; n_coeffs(self.order)];
        real_solid_harmonics(self.order, &(x - self.center), &mut s);
        self.coeffs.iter().zip(&s).map(|(a, b)| a * b).sum()
    }

    /// Surface-trace coefficients on a sphere of radius `r` about the
    /// expansion center: degree `l` scaled by `r^l`.
    pub fn trace(&self, r: f64) -> SurfaceCoeffs {
        let mut c = SurfaceCoeffs::zeros(self.order);
        let mut rl = 1.0;
        for l in 0..=self.order {
            for k in l * l..(l + 1) * (l + 1) {
                c.coeffs[k] = self.coeffs[k] * rl;
            }
            rl *= r;
        }
        c
    }

    fn to_complex(&self, map: &RealComplexMap) -> CExp {
        let mut a = CExp::zeros(self.order);
        map.local_to_complex(&self.coeffs, self.order, &mut a);
        a
    }

    fn from_complex(center: Vector3<f64>, c: &CExp, map: &RealComplexMap) -> Self {
        let mut out = Self::zeros(center, c.order);
        map.local_from_complex(c, c.order, &mut out.coeffs);
        out
    }
}

/// Real exterior coefficients of the single-layer potential of a surface
/// density on one sphere, in place: degree `l` is scaled by
/// `r^{l+2} / (2l+1)`.
pub(crate) fn density_to_exterior(radius: f64, density: &[f64], degree: usize, out: &mut [f64]) {
    let mut rl = radius * radius;
    for l in 0..=degree {
        let f = rl / (2 * l + 1) as f64;
        for k in l * l..(l + 1) * (l + 1) {
            out[k] = density[k] * f;
        }
        rl *= radius;
    }
}

/// Exact exterior expansion of the single-layer potential (kernel
/// `1/(4π|x−y|)`) generated by `density` on `sphere`.
pub fn sphere_to_multipole(sphere: &SphereSpec, density: &SurfaceCoeffs) -> MultipoleExpansion {
    let mut m = MultipoleExpansion::zeros(sphere.center, density.degree_max);
    density_to_exterior(sphere.radius, &density.coeffs, density.degree_max, &mut m.coeffs);
    m
}

/// Multipole of a point charge `q` (kernel `1/(4π|x−y|)`) at `position`,
/// about `center`.
pub fn point_charge_multipole(q: f64, position: &Vector3<f64>, center: Vector3<f64>, order: usize) -> MultipoleExpansion {
    let map = RealComplexMap::new(order);
    let mut r = CExp::zeros(order);
    kernels::regular(order, &(position - center), &mut r);
    let f = q / (4.0 * std::f64::consts::PI);
    for v in r.re.iter_mut() {
        *v *= f;
    }
    for v in r.im.iter_mut() {
        *v *= -f;
    }
    MultipoleExpansion::from_complex(center, &r, &map)
}

pub fn m2l(source: &MultipoleExpansion, target_center: Vector3<f64>, target_order: usize) -> Result<LocalExpansion> {
    let a = target_center - source.center;
    if a.norm_squared() == 0.0 {
        return Err(Error::SingularTranslation);
    }
    let p = source.order.max(target_order);
    let map = RealComplexMap::new(p);
    let src = source.to_complex(&map);
    let mut irr = CExp::zeros(source.order + target_order);
    kernels::irregular(source.order + target_order, &a, &mut irr);
    let mut out = CExp::zeros(target_order);
    kernels::m2l_acc(&src, &irr, &mut out, false);
    out.mirror();
    Ok(LocalExpansion::from_complex(target_center, &out, &map))
}

/// Re-centers a multipole at `new_center`, keeping `order` terms.
pub fn m2m_to_order(child: &MultipoleExpansion, new_center: Vector3<f64>, order: usize) -> MultipoleExpansion {
    let map = RealComplexMap::new(order.max(child.order));
    let src = child.to_complex(&map);
    let mut reg = CExp::zeros(order);
    kernels::regular(order, &(child.center - new_center), &mut reg);
    let mut out = CExp::zeros(order);
    kernels::m2m_acc(&src, &reg, &mut out);
    out.mirror();
    MultipoleExpansion::from_complex(new_center, &out, &map)
}

pub fn m2m(child: &MultipoleExpansion, new_center: Vector3<f64>) -> MultipoleExpansion {
    m2m_to_order(child, new_center, child.order)
}

/// Re-centers a local expansion at `new_center`, keeping `order ≤ parent.order`
/// terms.
pub fn l2l_to_order(parent: &LocalExpansion, new_center: Vector3<f64>, order: usize) -> LocalExpansion {
    let order = order.min(parent.order);
    let map = RealComplexMap::new(parent.order);
    let src = parent.to_complex(&map);
    let mut reg = CExp::zeros(parent.order);
    kernels::regular(parent.order, &(new_center - parent.center), &mut reg);
    let mut out = CExp::zeros(order);
    kernels::l2l_acc(&src, &reg, &mut out);
    out.mirror();
    LocalExpansion::from_complex(new_center, &out, &map)
}

pub fn l2l(parent: &LocalExpansion, new_center: Vector3<f64>) -> LocalExpansion {
    l2l_to_order(parent, new_center, parent.order)
}

/// Complex multipoles about each sphere center of the single-layer
/// potentials of `densities`.
pub(crate) fn complex_multipoles(
    radii: &[f64],
    densities: &crate::operators::GlobalCoeffVector,
    map: &RealComplexMap,
    policy: crate::par::ExecPolicy,
) -> Vec<CExp> {
    let deg = densities.degree;
    crate::par::map_indexed(policy, radii.len(), |i| {
        let mut ext = vec![0.0; n_coeffs(deg)];
        density_to_exterior(radii[i], densities.block(i), deg, &mut ext);
        let mut a = CExp::zeros(deg);
        map.exterior_to_complex(&ext, deg, &mut a);
        a
    })
}
