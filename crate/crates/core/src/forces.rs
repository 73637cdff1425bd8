//! Forces from the excluded fields: each sphere feels the field of every
//! other sphere's induced charge, `F_i = κ_0 ∫_{∂Ω_i} ν E_i`.

use crate::error::{Error, Result};
use crate::geometry::{validate, SphereSystem};
use crate::harmonics::SurfaceCoeffs;
use crate::operators::{add_self_term, cross_potential, energy, energy_from_potential, GlobalCoeffVector, OperatorContext};
use crate::par::map_indexed;
use crate::solver::{solve_induced_charge, SolveSettings};
use nalgebra::Vector3;

/// Trace on sphere `sphere_index` of the potential generated by all other
/// spheres, degree `lmax + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcludedPotential {
    pub sphere_index: usize,
    pub coeffs: SurfaceCoeffs,
}

/// Trace coefficients of the three Cartesian components of the excluded
/// field, degree `lmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldTrace {
    pub sphere_index: usize,
    pub components: [SurfaceCoeffs; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceReport {
    pub forces: Vec<Vector3<f64>>,
    pub energy: f64,
    pub force_sum: Vector3<f64>,
    pub magnitudes: Vec<f64>,
}

impl ForceReport {
    fn new(forces: Vec<Vector3<f64>>, energy: f64) -> Self {
        let force_sum = forces.iter().sum();
        let magnitudes = forces.iter().map(|f| f.norm()).collect();
        Self {
            forces,
            energy,
            force_sum,
            magnitudes,
        }
    }
}

/// Excluded potentials of all spheres at `degree` (normally `lmax + 1`).
pub fn excluded_potentials(ctx: &OperatorContext, nu: &GlobalCoeffVector, degree: usize) -> Result<GlobalCoeffVector> {
    cross_potential(ctx, nu, degree)
}

pub fn excluded_potential(ctx: &OperatorContext, nu: &GlobalCoeffVector, i: usize) -> Result<ExcludedPotential> {
    if i >= ctx.n_spheres() {
        return Err(Error::Index {
            index: i,
            len: ctx.n_spheres(),
        });
    }
    let all = excluded_potentials(ctx, nu, ctx.lmax() + 1)?;
    Ok(ExcludedPotential {
        sphere_index: i,
        coeffs: all.surface(i),
    })
}

/// `E = −∇φ` on the sphere: trace coefficients become interior solid-harmonic
/// coefficients (÷ r^l), are differentiated, and are traced back (× r^{l−1}).
pub fn field_trace(ctx: &OperatorContext, phi: &ExcludedPotential) -> FieldTrace {
    let r = ctx.radius(phi.sphere_index);
    let table = ctx.gradient_table();
    let deg = phi.coeffs.degree_max;
    let out_deg = ctx.lmax();
    let components = [0, 1, 2].map(|alpha| {
        // (t_l / r^l) · r^{l−1} = t_l / r for every degree
        let d = table.differentiate(&phi.coeffs.coeffs, deg, alpha);
        let d = SurfaceCoeffs {
            degree_max: deg.saturating_sub(1),
            coeffs: d,
        }
        .resized(out_deg);
        SurfaceCoeffs {
            degree_max: out_deg,
            coeffs: d.coeffs.iter().map(|v| -v / r).collect(),
        }
    });
    FieldTrace {
        sphere_index: phi.sphere_index,
        components,
    }
}

/// `F_α = κ_0 r² Σ ν_l^m (E_α)_l^m`.
pub fn force_on_sphere(ctx: &OperatorContext, nu_i: &SurfaceCoeffs, field: &FieldTrace) -> Vector3<f64> {
    let r = ctx.radius(field.sphere_index);
    let f = ctx.system().kappa0 * r * r;
    Vector3::from_fn(|alpha, _| {
        let comp = &field.components[alpha];
        f * nu_i.coeffs.iter().zip(&comp.coeffs).map(|(a, b)| a * b).sum::<f64>()
    })
}

/// Forces on every sphere and the energy, from one batched evaluation of the
/// excluded potentials at degree `lmax + 1`.
pub fn compute_all_forces(ctx: &OperatorContext, nu: &GlobalCoeffVector) -> Result<ForceReport> {
    compute_all_forces_at(ctx, nu, ctx.lmax() + 1)
}

/// As [`compute_all_forces`] with the excluded potentials expanded to
/// `potential_degree ≥ lmax + 1`.
pub fn compute_all_forces_at(ctx: &OperatorContext, nu: &GlobalCoeffVector, potential_degree: usize) -> Result<ForceReport> {
    let lmax = ctx.lmax();
    if potential_degree < lmax + 1 {
        return Err(Error::Settings(format!("potential degree must be at least lmax + 1 = {}", lmax + 1)));
    }
    let phi = excluded_potentials(ctx, nu, potential_degree)?;
    let forces = map_indexed(ctx.exec(), ctx.n_spheres(), |i| {
        let ex = ExcludedPotential {
            sphere_index: i,
            coeffs: phi.surface(i),
        };
        let field = field_trace(ctx, &ex);
        force_on_sphere(ctx, &nu.surface(i), &field)
    });
    let mut vnu = phi.resized(lmax);
    add_self_term(ctx, nu, &mut vnu);
    let e = energy_from_potential(ctx, &ctx.free_charge(), &vnu);
    Ok(ForceReport::new(forces, e))
}

/// `−∇_{x_i} E` by central differences of the discrete energy, re-solving
/// the induced charge at every displaced geometry.
pub fn energy_gradient_fd<F>(
    make_ctx: F,
    system: &SphereSystem,
    sigma_f: &GlobalCoeffVector,
    settings: &SolveSettings,
    i: usize,
    h: f64,
) -> Result<Vector3<f64>>
where
    F: Fn(SphereSystem) -> Result<OperatorContext>,
{
    if i >= system.len() {
        return Err(Error::Index {
            index: i,
            len: system.len(),
        });
    }
    let mut grad = Vector3::zeros();
    for alpha in 0..3 {
        let mut e = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut d = Vector3::zeros();
            d[alpha] = sign * h;
            let moved = system.displaced(i, d);
            validate(&moved).map_err(|err| Error::Geometry(Box::new(err)))?;
            let ctx = make_ctx(moved)?;
            let report = solve_induced_charge(&ctx, sigma_f, settings)?;
            e[k] = energy(&ctx, sigma_f, &report.nu)?;
        }
        grad[alpha] = -(e[0] - e[1]) / (2.0 * h);
    }
    Ok(grad)
}
