//! Numerical toolkit for weighted variable-exponent analysis on the first
//! Heisenberg group and Euclidean boxes: Luxemburg norms, Muckenhoupt
//! `A_{p(·),q(·)}` constants, maximal and fractional-integral operators with
//! the Rubio de Francia iteration, empirical Poincaré–Sobolev ratio sweeps,
//! and a variational solver for the degenerate p(x)-Laplacian Dirichlet
//! problem.
//!
//! Everything is evaluated at desk scale on rectangular grids; integrals are
//! cell-center sums and ball measures come from cell counting, so all the
//! quantities are mutually consistent discretizations of the same measure.

pub mod carnot;
pub mod error;
pub mod exec;
pub mod expr;
pub mod grid;
pub mod lebesgue;
pub mod muckenhoupt;
pub mod operators;
pub mod plaplacian;
pub mod poincare;

pub use carnot::{ball_measure, CarnotGroup, GroupKind, Point};
pub use error::{Error, Result};
pub use grid::{GridDomain, GridFunction};
pub use lebesgue::{ExponentField, Weight};
