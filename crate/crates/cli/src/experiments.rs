//! The experiments behind the subcommands. The `*_rows` functions compute;
//! the `cmd_*` functions also write CSV files and a manifest.

use crate::config::{BackendSpec, GeneratorSpec, LatticeKind, RunConfig, ScalingConfig, SeparationConfig};
use crate::output::{write_csv, write_manifest};
use anyhow::{bail, Context};
use serde::Serialize;
use spherepol::forces::{compute_all_forces, energy_gradient_fd, ForceReport};
use spherepol::geometry::{SphereSpec, SphereSystem};
use spherepol::harmonics::index_lm;
use spherepol::operators::{sphere_dual_norms, Backend, GlobalCoeffVector, OperatorContext};
use spherepol::solver::{solve_induced_charge, SolveReport, SolveSettings};
use spherepol::Vector3;
use std::path::PathBuf;
use std::time::Instant;

/// A solve followed by force assembly, with wall-clock per phase.
pub struct Solved {
    pub ctx: OperatorContext,
    pub report: SolveReport,
    pub forces: ForceReport,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub force_seconds: f64,
}

impl Solved {
    pub fn total_seconds(&self) -> f64 {
        self.setup_seconds + self.solve_seconds + self.force_seconds
    }
}

pub fn solve_and_forces(system: SphereSystem, lmax: usize, backend: Backend, settings: &SolveSettings) -> anyhow::Result<Solved> {
    let t0 = Instant::now();
    let ctx = OperatorContext::new(system, lmax, backend)?;
    let t1 = Instant::now();
    let report = solve_induced_charge(&ctx, &ctx.free_charge(), settings)?;
    if !report.converged {
        bail!("GMRES did not converge within {} iterations", settings.max_iterations);
    }
    let t2 = Instant::now();
    let forces = compute_all_forces(&ctx, &report.nu)?;
    let t3 = Instant::now();
    Ok(Solved {
        ctx,
        report,
        forces,
        setup_seconds: (t1 - t0).as_secs_f64(),
        solve_seconds: (t2 - t1).as_secs_f64(),
        force_seconds: (t3 - t2).as_secs_f64(),
    })
}

/// `(1/N) Σ |F_i − G_i|`.
pub fn average_force_error(f: &[Vector3<f64>], reference: &[Vector3<f64>]) -> f64 {
    f.iter().zip(reference).map(|(a, b)| (a - b).norm()).sum::<f64>() / f.len() as f64
}

/// `‖F − G‖ / ‖G‖` over all spheres' force vectors.
pub fn relative_force_error(f: &[Vector3<f64>], reference: &[Vector3<f64>]) -> f64 {
    let num: f64 = f.iter().zip(reference).map(|(a, b)| (a - b).norm_squared()).sum();
    let den: f64 = reference.iter().map(|b| b.norm_squared()).sum();
    (num / den).sqrt()
}

/// Mean over spheres of the dual-norm error of `nu` against `reference`.
pub fn average_charge_error(reference_ctx: &OperatorContext, nu: &GlobalCoeffVector, reference: &GlobalCoeffVector) -> f64 {
    let mut diff = nu.resized(reference.degree);
    diff.data.iter_mut().zip(&reference.data).for_each(|(a, b)| *a -= b);
    let parts = sphere_dual_norms(reference_ctx, &diff);
    parts.iter().sum::<f64>() / parts.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(x, y)`; `None` for fewer than two points.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

fn tree_meta(ctx: &OperatorContext) -> (Option<usize>, Option<u32>) {
    match ctx.octree() {
        Some(t) => (Some(t.order), Some(t.depth)),
        None => (None, None),
    }
}

fn backend_label(ctx: &OperatorContext) -> &'static str {
    match ctx.backend() {
        Backend::Direct => "direct",
        Backend::Tree { .. } => "tree",
    }
}

fn prepare_out(cfg: &RunConfig) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(cfg.out_dir.clone())
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, Serialize)]
pub struct SolveRow {
    pub experiment: &'static str,
    pub n_spheres: usize,
    pub lmax: usize,
    pub backend: &'static str,
    pub tree_order: Option<usize>,
    pub tree_depth: Option<u32>,
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub energy: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoeffRow {
    pub sphere: usize,
    pub l: usize,
    pub m: i64,
    pub nu: f64,
}

pub fn cmd_solve(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let system = cfg.build_system()?;
    let t0 = Instant::now();
    let ctx = OperatorContext::new(system, cfg.lmax, cfg.backend.backend())?;
    let sf = ctx.free_charge();
    let report = solve_induced_charge(&ctx, &sf, &cfg.solver)?;
    let seconds = t0.elapsed().as_secs_f64();
    let energy = spherepol::operators::energy(&ctx, &sf, &report.nu)?;
    let (tree_order, tree_depth) = tree_meta(&ctx);
    let summary = SolveRow {
        experiment: "solve",
        n_spheres: ctx.n_spheres(),
        lmax: cfg.lmax,
        backend: backend_label(&ctx),
        tree_order,
        tree_depth,
        tolerance: cfg.solver.tolerance,
        iterations: report.iterations,
        converged: report.converged,
        final_residual: *report.residual_history.last().unwrap_or(&0.0),
        energy,
        seconds,
    };
    let coeffs: Vec<CoeffRow> = (0..ctx.n_spheres())
        .flat_map(|i| {
            let blk = report.nu.block(i).to_vec();
            blk.into_iter().enumerate().map(move |(k, v)| {
                let (l, m) = index_lm(k);
                CoeffRow { sphere: i, l, m, nu: v }
            })
        })
        .collect();
    let files = vec![dir.join("solve.csv"), dir.join("solve_nu.csv")];
    write_csv(&files[0], &[summary])?;
    write_csv(&files[1], &coeffs)?;
    let m = write_manifest(&dir, "solve", cfg, &files)?;
    Ok(files.into_iter().chain([m]).collect())
}

// ---------------------------------------------------------------- forces

#[derive(Debug, Clone, Serialize)]
pub struct ForceRow {
    pub experiment: &'static str,
    pub n_spheres: usize,
    pub lmax: usize,
    pub backend: &'static str,
    pub tolerance: f64,
    pub sphere: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub magnitude: f64,
    pub fd_fx: Option<f64>,
    pub fd_fy: Option<f64>,
    pub fd_fz: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForceSummaryRow {
    pub experiment: &'static str,
    pub n_spheres: usize,
    pub lmax: usize,
    pub backend: &'static str,
    pub tree_order: Option<usize>,
    pub tree_depth: Option<u32>,
    pub tolerance: f64,
    pub iterations: usize,
    pub energy: f64,
    pub force_sum_x: f64,
    pub force_sum_y: f64,
    pub force_sum_z: f64,
    pub magnitude_sum: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub force_seconds: f64,
}

pub fn force_rows(cfg: &RunConfig, system: SphereSystem) -> anyhow::Result<(Vec<ForceRow>, ForceSummaryRow)> {
    let s = solve_and_forces(system.clone(), cfg.lmax, cfg.backend.backend(), &cfg.solver)?;
    let ctx = &s.ctx;
    let sf = ctx.free_charge();
    let mut rows = Vec::with_capacity(ctx.n_spheres());
    for (i, f) in s.forces.forces.iter().enumerate() {
        let fd = match cfg.fd_step {
            Some(h) => {
                let (lmax, backend) = (cfg.lmax, cfg.backend.backend());
                Some(energy_gradient_fd(|sys| OperatorContext::new(sys, lmax, backend), &system, &sf, &cfg.solver, i, h)?)
            }
            None => None,
        };
        let c = system.spheres[i].center;
        rows.push(ForceRow {
            experiment: "forces",
            n_spheres: ctx.n_spheres(),
            lmax: cfg.lmax,
            backend: backend_label(ctx),
            tolerance: cfg.solver.tolerance,
            sphere: i,
            x: c.x,
            y: c.y,
            z: c.z,
            fx: f.x,
            fy: f.y,
            fz: f.z,
            magnitude: s.forces.magnitudes[i],
            fd_fx: fd.map(|v| v.x),
            fd_fy: fd.map(|v| v.y),
            fd_fz: fd.map(|v| v.z),
        });
    }
    let (tree_order, tree_depth) = tree_meta(ctx);
    let summary = ForceSummaryRow {
        experiment: "forces",
        n_spheres: ctx.n_spheres(),
        lmax: cfg.lmax,
        backend: backend_label(ctx),
        tree_order,
        tree_depth,
        tolerance: cfg.solver.tolerance,
        iterations: s.report.iterations,
        energy: s.forces.energy,
        force_sum_x: s.forces.force_sum.x,
        force_sum_y: s.forces.force_sum.y,
        force_sum_z: s.forces.force_sum.z,
        magnitude_sum: s.forces.magnitudes.iter().sum(),
        setup_seconds: s.setup_seconds,
        solve_seconds: s.solve_seconds,
        force_seconds: s.force_seconds,
    };
    Ok((rows, summary))
}

pub fn cmd_forces(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let (rows, summary) = force_rows(cfg, cfg.build_system()?)?;
    let files = vec![dir.join("forces.csv"), dir.join("forces_summary.csv")];
    write_csv(&files[0], &rows)?;
    write_csv(&files[1], &[summary])?;
    let m = write_manifest(&dir, "forces", cfg, &files)?;
    Ok(files.into_iter().chain([m]).collect())
}

// ----------------------------------------------------------- convergence

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub experiment: &'static str,
    pub n_spheres: usize,
    pub lmax: usize,
    pub reference_lmax: usize,
    pub backend: &'static str,
    pub tolerance: f64,
    pub iterations: usize,
    pub avg_force_error: f64,
    pub avg_charge_error: f64,
    pub avg_force_magnitude: f64,
}

/// Log-linear fit `ln(error) ≈ intercept + slope · lmax`; `rate = −slope`.
#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub experiment: &'static str,
    pub quantity: &'static str,
    pub points: usize,
    pub slope: f64,
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn convergence_rows(
    system: SphereSystem,
    sweep: &[usize],
    reference_lmax: usize,
    backend: BackendSpec,
    settings: &SolveSettings,
) -> anyhow::Result<(Vec<ConvergenceRow>, Vec<FitRow>)> {
    let reference = solve_and_forces(system.clone(), reference_lmax, backend.backend(), settings)?;
    let mut rows = Vec::new();
    for &lmax in sweep {
        let s = solve_and_forces(system.clone(), lmax, backend.backend(), settings)?;
        rows.push(ConvergenceRow {
            experiment: "convergence",
            n_spheres: system.len(),
            lmax,
            reference_lmax,
            backend: backend.label(),
            tolerance: settings.tolerance,
            iterations: s.report.iterations,
            avg_force_error: average_force_error(&s.forces.forces, &reference.forces.forces),
            avg_charge_error: average_charge_error(&reference.ctx, &s.report.nu, &reference.report.nu),
            avg_force_magnitude: reference.forces.magnitudes.iter().sum::<f64>() / system.len() as f64,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.lmax as f64).collect();
    let mut fits = Vec::new();
    for (quantity, ys) in [
        ("avg_force_error", rows.iter().map(|r| r.avg_force_error.ln()).collect::<Vec<_>>()),
        ("avg_charge_error", rows.iter().map(|r| r.avg_charge_error.ln()).collect()),
    ] {
        if let Some(f) = linear_fit(&x, &ys) {
            fits.push(FitRow {
                experiment: "convergence",
                quantity,
                points: x.len(),
                slope: f.slope,
                rate: -f.slope,
                intercept: f.intercept,
                r_squared: f.r_squared,
            });
        }
    }
    Ok((rows, fits))
}

pub fn cmd_convergence(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let c = &cfg.convergence;
    let (rows, fits) = convergence_rows(cfg.build_system()?, &c.lmax_sweep, c.reference_lmax, cfg.backend, &cfg.solver)?;
    let mut files = vec![dir.join("convergence.csv")];
    write_csv(&files[0], &rows)?;
    if !fits.is_empty() {
        files.push(dir.join("convergence_fit.csv"));
        write_csv(&files[1], &fits)?;
    }
    let m = write_manifest(&dir, "convergence", cfg, &files)?;
    Ok(files.into_iter().chain([m]).collect())
}

// ---------------------------------------------------------------- nstudy

#[derive(Debug, Clone, Serialize)]
pub struct NStudyRow {
    pub experiment: &'static str,
    pub lattice: &'static str,
    pub edge: f64,
    pub n_per_axis: usize,
    pub n_spheres: usize,
    pub lmax: usize,
    pub reference_lmax: usize,
    pub backend: &'static str,
    pub tolerance: f64,
    pub iterations: usize,
    pub reference_iterations: usize,
    pub avg_force_error: f64,
    pub avg_charge_error: f64,
}

pub fn nstudy_rows(
    generator: &GeneratorSpec,
    n_per_axis: &[usize],
    lmax_values: &[usize],
    reference_lmax: usize,
    backend: BackendSpec,
    settings: &SolveSettings,
) -> anyhow::Result<Vec<NStudyRow>> {
    let mut rows = Vec::new();
    for &n in n_per_axis {
        let system = generator.build(n);
        let reference = solve_and_forces(system.clone(), reference_lmax, backend.backend(), settings)?;
        for &lmax in lmax_values {
            let s = solve_and_forces(system.clone(), lmax, backend.backend(), settings)?;
            rows.push(NStudyRow {
                experiment: "nstudy",
                lattice: match generator.lattice {
                    LatticeKind::Alternating => "alternating",
                    LatticeKind::Layered => "layered",
                },
                edge: generator.edge,
                n_per_axis: n,
                n_spheres: system.len(),
                lmax,
                reference_lmax,
                backend: backend.label(),
                tolerance: settings.tolerance,
                iterations: s.report.iterations,
                reference_iterations: reference.report.iterations,
                avg_force_error: average_force_error(&s.forces.forces, &reference.forces.forces),
                avg_charge_error: average_charge_error(&reference.ctx, &s.report.nu, &reference.report.nu),
            });
        }
    }
    Ok(rows)
}

pub fn cmd_nstudy(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let Some(generator) = cfg.generator() else {
        bail!("nstudy needs a lattice generator as its system source");
    };
    let n = &cfg.nstudy;
    let rows = nstudy_rows(generator, &n.n_per_axis, &n.lmax_values, n.reference_lmax, cfg.backend, &cfg.solver)?;
    let files = vec![dir.join("nstudy.csv")];
    write_csv(&files[0], &rows)?;
    let m = write_manifest(&dir, "nstudy", cfg, &files)?;
    Ok(files.into_iter().chain([m]).collect())
}

// ------------------------------------------------------------ separation

#[derive(Debug, Clone, Serialize)]
pub struct SeparationRow {
    pub experiment: &'static str,
    pub r1: f64,
    pub r2: f64,
    pub kappa: f64,
    pub separation: f64,
    pub lmax: usize,
    pub reference_lmax: usize,
    pub tolerance: f64,
    pub iterations: usize,
    pub reference_iterations: usize,
    pub fz_first: f64,
    pub fz_first_reference: f64,
    pub relative_force_error: f64,
    /// Reference over approximate force on the first sphere.
    pub force_ratio: f64,
}

/// Spheres of radius 1 and `r2` on the z-axis with a surface gap `s`,
/// charges −1 and +1.
pub fn separation_pair(r2: f64, s: f64, kappa: f64) -> SphereSystem {
    SphereSystem::new(
        vec![
            SphereSpec::new(Vector3::zeros(), 1.0, kappa, -1.0),
            SphereSpec::new(Vector3::new(0.0, 0.0, 1.0 + r2 + s), r2, kappa, 1.0),
        ],
        1.0,
    )
}

pub fn separation_rows(sep: &SeparationConfig, settings: &SolveSettings) -> anyhow::Result<Vec<SeparationRow>> {
    let mut rows = Vec::new();
    for &r2 in &sep.second_radii {
        for &s in &sep.separations {
            let system = separation_pair(r2, s, sep.kappa);
            let reference = solve_and_forces(system.clone(), sep.reference_lmax, Backend::Direct, settings)?;
            let approx = solve_and_forces(system, sep.lmax, Backend::Direct, settings)?;
            let (fa, fr) = (approx.forces.forces[0].z, reference.forces.forces[0].z);
            rows.push(SeparationRow {
                experiment: "separation",
                r1: 1.0,
                r2,
                kappa: sep.kappa,
                separation: s,
                lmax: sep.lmax,
                reference_lmax: sep.reference_lmax,
                tolerance: settings.tolerance,
                iterations: approx.report.iterations,
                reference_iterations: reference.report.iterations,
                fz_first: fa,
                fz_first_reference: fr,
                relative_force_error: relative_force_error(&approx.forces.forces, &reference.forces.forces),
                force_ratio: fr / fa,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_separation(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let rows = separation_rows(&cfg.separation, &cfg.solver)?;
    let files = vec![dir.join("separation.csv")];
    write_csv(&files[0], &rows)?;
    let m = write_manifest(&dir, "separation", cfg, &files)?;
    Ok(files.into_iter().chain([m]).collect())
}

// --------------------------------------------------------------- scaling

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub experiment: &'static str,
    pub n_spheres: usize,
    pub backend: &'static str,
    pub lmax: usize,
    pub tree_order: Option<usize>,
    pub tree_depth: Option<u32>,
    pub mean_leaf_occupancy: Option<f64>,
    pub tolerance: f64,
    pub repeats: usize,
    pub iterations: usize,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub force_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingFitRow {
    pub experiment: &'static str,
    pub backend: &'static str,
    pub points: usize,
    /// Slope of `ln t` against `ln N`.
    pub exponent: f64,
    pub r_squared: f64,
}

fn timed_best(system: &SphereSystem, lmax: usize, backend: Backend, settings: &SolveSettings, repeats: usize) -> anyhow::Result<Solved> {
    let mut best: Option<Solved> = None;
    for _ in 0..repeats.max(1) {
        let s = solve_and_forces(system.clone(), lmax, backend, settings)?;
        if best.as_ref().is_none_or(|b| s.total_seconds() < b.total_seconds()) {
            best = Some(s);
        }
    }
    Ok(best.expect("at least one run"))
}

fn scaling_row(s: &Solved, lmax: usize, settings: &SolveSettings, repeats: usize) -> ScalingRow {
    let (tree_order, tree_depth) = tree_meta(&s.ctx);
    ScalingRow {
        experiment: "scaling",
        n_spheres: s.ctx.n_spheres(),
        backend: backend_label(&s.ctx),
        lmax,
        tree_order,
        tree_depth,
        mean_leaf_occupancy: s.ctx.octree().map(|t| t.mean_leaf_occupancy()),
        tolerance: settings.tolerance,
        repeats,
        iterations: s.report.iterations,
        setup_seconds: s.setup_seconds,
        solve_seconds: s.solve_seconds,
        force_seconds: s.force_seconds,
        total_seconds: s.total_seconds(),
    }
}

/// Times solve + forces over the lattice sweep (best of `repeats`) with the
/// tree backend, and with the direct backend up to `direct_max_spheres`.
pub fn scaling_rows(generator: &GeneratorSpec, sc: &ScalingConfig, max_iterations: usize) -> anyhow::Result<(Vec<ScalingRow>, Vec<ScalingFitRow>)> {
    let settings = SolveSettings {
        tolerance: sc.tolerance,
        max_iterations,
    };
    let tree = Backend::Tree {
        levels: sc.tree_depth,
        order: Some(sc.tree_order),
    };
    let mut rows = Vec::new();
    for &n in &sc.n_per_axis {
        let system = generator.build(n);
        let s = timed_best(&system, sc.lmax, tree, &settings, sc.repeats)?;
        rows.push(scaling_row(&s, sc.lmax, &settings, sc.repeats));
        if system.len() <= sc.direct_max_spheres {
            let d = timed_best(&system, sc.lmax, Backend::Direct, &settings, sc.repeats)?;
            rows.push(scaling_row(&d, sc.lmax, &settings, sc.repeats));
        }
    }
    let mut fits = Vec::new();
    for backend in ["tree", "direct"] {
        let pts: Vec<&ScalingRow> = rows.iter().filter(|r| r.backend == backend).collect();
        let x: Vec<f64> = pts.iter().map(|r| (r.n_spheres as f64).ln()).collect();
        let y: Vec<f64> = pts.iter().map(|r| r.total_seconds.ln()).collect();
        if let Some(f) = linear_fit(&x, &y) {
            fits.push(ScalingFitRow {
                experiment: "scaling",
                backend,
                points: x.len(),
                exponent: f.slope,
                r_squared: f.r_squared,
            });
        }
    }
    Ok((rows, fits))
}

pub fn cmd_scaling(cfg: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let dir = prepare_out(cfg)?;
    let default_gen = GeneratorSpec {
        lattice: LatticeKind::Alternating,
        n_per_axis: 8,
        edge: 6.0,
    };
    let generator = cfg.generator().unwrap_or(&default_gen);
    let (rows, fits) = scaling_rows(generator, &cfg.scaling, cfg.solver.max_iterations)?;
    let mut files = vec![dir.join("scaling.csv")];
    write_csv(&files[0], &rows)?;
    if !fits.is_empty() {
        files.push(dir.join("scaling_fit.csv"));
        write_csv(&files[1], &fits)?;
    }
    let m = write_manifest(&dir, "scaling", cfg, &files)?;
    Ok(files.into_iter().chain([m]).collect())
}
