//! Geometric control of the (4,7) trident mechanism: kinematics and
//! controllability, the nilpotent approximation and its group, infinitesimal
//! symmetries, and normal extremals of the maximum principle.

pub mod error;
pub mod expr;
pub mod field;
pub mod mechanism;
pub mod nilpotent;
pub mod numeric;
pub mod pmp;
pub mod point;
pub mod symmetry;
pub mod system;
pub mod trajectory;

pub use error::{Error, Result};
pub use expr::{Expr, DIM};
pub use field::{eval_field, lie_bracket, Chart, VectorFieldSym};
pub use point::{AdaptedPoint, Configuration, GroupElement};
pub use system::{ControlSystem, SystemRegistry};
pub use pmp::{BracketMotionParams, ExtremalSolver, FibreState, SolutionConstants, SolverRegistry};
pub use symmetry::SymmetryField;
pub use trajectory::{Sample, Trajectory};
