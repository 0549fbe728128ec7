//! Dirac brackets for reducible second-class constraint systems.
//!
//! The crate computes the Dirac bracket of a second-order reducible set of
//! second-class constraints in four equivalent ways (independent subset,
//! noninvertible projector form, invertible form, irreducible reformulation)
//! and certifies numerically that they coincide on the constraint surface.

extern crate openblas_src;

pub mod constraints;
pub mod error;
pub mod first_order;
pub mod irreducible;
pub mod numerics;
pub mod oracle;
pub mod phase;
pub mod report;
pub mod second_order;
pub mod threeform;

pub use constraints::{ConstraintSet, Reducibility, SystemFile};
pub use error::{Error, Result};
pub use first_order::{FirstOrderArtifacts, FirstOrderLift};
pub use irreducible::{EhatChoice, ExtendedPoint, IrreducibleSystem};
pub use numerics::{DenseMatrix, Tolerance, Vector};
pub use oracle::{Method, SubsetSelection};
pub use phase::{PhaseFunction, PhasePoint, PhaseSpec};
pub use report::{CheckRecord, CheckReport};
pub use second_order::{BracketMode, SecondOrderArtifacts};
pub use threeform::{Derivative, LatticeSpec, ThreeFormSystem};
