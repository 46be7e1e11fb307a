//! Algebraic toolkit for non-Hermitian three-mode couplers.
//!
//! A coupler is described by a 3×3 complex mode-coupling matrix `M(z)` acting
//! as `-i ∂z E = M E`. After removing the trace, the matrix lives in sl(3,ℂ)
//! and is handled in the isospin–hypercharge basis `{I0, Y, I±, U±, V±}`.
//!
//! The crate is organised as
//!
//! * [`algebra`]: basis decomposition, trace gauge and generator exponentials,
//! * [`spectral`]: trace invariants, discriminant, exceptional-point
//!   classification, the depressed-cubic eigensolver, biorthogonal frames and
//!   branch tracking,
//! * [`propagator`]: the Wei–Norman factorised propagator, a direct matrix
//!   integrator used as its oracle, constant-matrix exponentials and loop
//!   holonomy,
//! * [`fock`]: fixed-excitation bosonic sectors, promoted bilinears and
//!   photonic propagation,
//! * [`families`]: the concrete coupler families, EP3 loops, EP2 search and
//!   discriminant maps.

// `!(x > 0.0)` deliberately rejects NaN together with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
mod error;
pub mod families;
pub mod fock;
pub mod ode;
pub mod propagator;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Dense 3×3 complex matrix (a mode-coupling matrix or a group element).
pub type ComplexMatrix = nalgebra::Matrix3<C64>;

/// Complex 3-vector of mode amplitudes.
pub type FieldVector = nalgebra::Vector3<C64>;

pub use algebra::{Coupling, GellMannCoefficients, GeneratorLabel};
pub use families::{CouplerFamily, FamilyKind, LoopSpec, Profile};
pub use fock::{FockBasis, FockVector, WeightPoint};
pub use propagator::{PropagationOptions, PropagationResult, WeiNormanCoords};
pub use spectral::{Invariants, Regime, SpectralFrame};
