//! Induced surface charges, electrostatic energies and forces for systems of
//! charged, mutually polarizing dielectric spheres.
//!
//! The unknown induced charge on every sphere is expanded in real spherical
//! harmonics up to a common degree `lmax`. Cross-sphere interactions are
//! evaluated exactly through solid-harmonic translations, either pairwise
//! ([`operators::Backend::Direct`]) or through an octree
//! ([`operators::Backend::Tree`]) for linear cost in the number of spheres.
//!
//! ```
//! use spherepol::geometry::make_alternating_lattice;
//! use spherepol::operators::{Backend, OperatorContext};
//! use spherepol::solver::{solve_induced_charge, SolveSettings};
//! use spherepol::forces::compute_all_forces;
//!
//! let system = make_alternating_lattice(2, 6.0);
//! let ctx = OperatorContext::new(system, 4, Backend::Direct).unwrap();
//! let sigma_f = ctx.free_charge();
//! let report = solve_induced_charge(&ctx, &sigma_f, &SolveSettings::default()).unwrap();
//! let forces = compute_all_forces(&ctx, &report.nu).unwrap();
//! assert_eq!(forces.forces.len(), 8);
//! ```

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forces;
pub mod geometry;
pub mod harmonics;
pub mod operators;
pub mod par;
pub mod solver;
pub mod translations;

pub use error::{Error, Result};
pub use nalgebra::Vector3;
