//! Sphere systems, validation of the non-overlap assumptions, the benchmark
//! lattices, and the JSON system-file format.

use crate::error::{Error, Result};
use crate::harmonics::{n_coeffs, SurfaceCoeffs};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum FreeCharge {
    /// Total charge spread uniformly over the surface.
    Total(f64),
    /// Explicit surface density coefficients.
    Coeffs(SurfaceCoeffs),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereSpec {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub kappa: f64,
    pub free_charge: FreeCharge,
}

impl SphereSpec {
    pub fn new(center: Vector3<f64>, radius: f64, kappa: f64, charge: f64) -> Self {
        Self {
            center,
            radius,
            kappa,
            free_charge: FreeCharge::Total(charge),
        }
    }

    /// Free-charge density coefficients, truncated or padded to `lmax`.
    ///
    /// A uniform total charge `q` is the degree-0 coefficient `q / (√(4π) r²)`.
    pub fn free_charge_coeffs(&self, lmax: usize) -> SurfaceCoeffs {
        match &self.free_charge {
            FreeCharge::Total(q) => {
                let mut c = SurfaceCoeffs::zeros(lmax);
                c.coeffs[0] = q / ((4.0 * std::f64::consts::PI).sqrt() * self.radius * self.radius);
                c
            }
            FreeCharge::Coeffs(c) => c.resized(lmax),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereSystem {
    pub spheres: Vec<SphereSpec>,
    pub kappa0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub min_separation: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub kappa_range: (f64, f64),
    pub warnings: Vec<String>,
}

impl SphereSystem {
    pub fn new(spheres: Vec<SphereSpec>, kappa0: f64) -> Self {
        Self { spheres, kappa0 }
    }

    pub fn len(&self) -> usize {
        self.spheres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spheres.is_empty()
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        validate(self)
    }

    /// Copy with sphere `i` moved by `delta`.
    pub fn displaced(&self, i: usize, delta: Vector3<f64>) -> Self {
        let mut s = self.clone();
        s.spheres[i].center += delta;
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SystemFile::from(self)).expect("system serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        file.try_into()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

pub fn validate(system: &SphereSystem) -> Result<ValidationReport> {
    if system.is_empty() {
        return Err(Error::EmptySystem);
    }
    if !(system.kappa0 > 0.0) {
        return Err(Error::NonPositiveParameter(format!("kappa0 = {}", system.kappa0)));
    }
    let mut warnings = Vec::new();
    let mut min_radius = f64::INFINITY;
    let mut max_radius = 0.0f64;
    let mut kmin = f64::INFINITY;
    let mut kmax = 0.0f64;
    for (i, s) in system.spheres.iter().enumerate() {
        if !(s.radius > 0.0) {
            return Err(Error::NonPositiveParameter(format!("radius of sphere {i} = {}", s.radius)));
        }
        if !(s.kappa > 0.0) {
            return Err(Error::NonPositiveParameter(format!("kappa of sphere {i} = {}", s.kappa)));
        }
        if !s.center.iter().all(|v| v.is_finite()) {
            return Err(Error::Format(format!("center of sphere {i} is not finite")));
        }
        if s.kappa == system.kappa0 {
            warnings.push(format!("sphere {i} has kappa equal to kappa0; its induced charge is the scaled free charge"));
        }
        min_radius = min_radius.min(s.radius);
        max_radius = max_radius.max(s.radius);
        kmin = kmin.min(s.kappa);
        kmax = kmax.max(s.kappa);
    }
    let mut min_separation = f64::INFINITY;
    for (i, a) in system.spheres.iter().enumerate() {
        for (j, b) in system.spheres.iter().enumerate().skip(i + 1) {
            let gap = (a.center - b.center).norm() - a.radius - b.radius;
            if gap <= 0.0 {
                return Err(Error::Overlap(i, j));
            }
            min_separation = min_separation.min(gap);
        }
    }
    Ok(ValidationReport {
        min_separation,
        min_radius,
        max_radius,
        kappa_range: (kmin, kmax),
        warnings,
    })
}

fn lattice(n: usize, edge: f64, even: impl Fn(usize, usize, usize) -> bool) -> SphereSystem {
    let mut spheres = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let center = Vector3::new(i as f64, j as f64, k as f64) * edge;
                spheres.push(if even(i, j, k) {
                    SphereSpec::new(center, 3.0, 10.0, -1.0)
                } else {
                    SphereSpec::new(center, 2.0, 5.0, 1.0)
                });
            }
        }
    }
    SphereSystem::new(spheres, 1.0)
}

/// `n³` spheres on a cubic lattice; sites with even `i+j+k` carry radius 3,
/// κ = 10 and charge −1, odd sites radius 2, κ = 5 and charge +1. Usual
/// edge: 6.
pub fn make_alternating_lattice(n_per_axis: usize, edge: f64) -> SphereSystem {
    lattice(n_per_axis, edge, |i, j, k| (i + j + k) % 2 == 0)
}

/// Like [`make_alternating_lattice`] but alternating by layer index `k`.
/// Usual edge: 7.
pub fn make_layered_lattice(n_per_axis: usize, edge: f64) -> SphereSystem {
    lattice(n_per_axis, edge, |_, _, k| k % 2 == 0)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SphereRecord {
    center: [f64; 3],
    radius: f64,
    kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    charge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    kappa0: f64,
    spheres: Vec<SphereRecord>,
}

impl From<&SphereSystem> for SystemFile {
    fn from(s: &SphereSystem) -> Self {
        SystemFile {
            kappa0: s.kappa0,
            spheres: s
                .spheres
                .iter()
                .map(|sp| {
                    let (charge, coeffs) = match &sp.free_charge {
                        FreeCharge::Total(q) => (Some(*q), None),
                        FreeCharge::Coeffs(c) => (None, Some(c.coeffs.clone())),
                    };
                    SphereRecord {
                        center: [sp.center[0], sp.center[1], sp.center[2]],
                        radius: sp.radius,
                        kappa: sp.kappa,
                        charge,
                        coeffs,
                    }
                })
                .collect(),
        }
    }
}

impl TryFrom<SystemFile> for SphereSystem {
    type Error = Error;

    fn try_from(f: SystemFile) -> Result<Self> {
        let spheres = f
            .spheres
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let free_charge = match (r.charge, r.coeffs) {
                    (Some(q), None) => FreeCharge::Total(q),
                    (None, Some(c)) => {
                        let d = (c.len() as f64).sqrt().round() as usize;
                        if d == 0 || n_coeffs(d - 1) != c.len() {
                            return Err(Error::Format(format!(
                                "sphere {i}: coefficient count {} is not a perfect square",
                                c.len()
                            )));
                        }
                        FreeCharge::Coeffs(SurfaceCoeffs::from_vec(d - 1, c)?)
                    }
                    (None, None) => FreeCharge::Total(0.0),
                    (Some(_), Some(_)) => {
                        return Err(Error::Format(format!("sphere {i}: both charge and coeffs given")))
                    }
                };
                Ok(SphereSpec {
                    center: Vector3::from(r.center),
                    radius: r.radius,
                    kappa: r.kappa,
                    free_charge,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SphereSystem::new(spheres, f.kappa0))
    }
}
