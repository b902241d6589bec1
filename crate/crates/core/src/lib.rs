//! Solvers for the Chern–Simons Higgs equation for the p-Laplacian on a
//! connected finite graph,
//!
//! ```text
//! Δ_p u = λ e^u (e^u - 1) + f,
//! ```
//!
//! together with the machinery behind its existence theory: explicit a priori
//! bounds, upper/lower-solution iteration, constrained minimization,
//! homotopy continuation and the Brouwer degree of the associated map.

pub mod cli;
pub mod degree;
pub mod estimates;
pub mod graph;
pub mod solvers;

pub use graph::{Exponent, Graph, GraphError, VertexFunction};
