//! Solvers for `Δ_p u = λ e^{2u} + ε f` and for the full equation
//! `Δ_p u = λ e^u (e^u - σ) + f`.
//!
//! * [`monotone_iterate`]: upper/lower-solution iteration (λ > 0),
//! * [`constrained_minimize`]: minimization on the mass constraint set (λ < 0),
//! * [`newton_solve`] and [`homotopy_track`]: Newton correction and parameter
//!   continuation along the two homotopy families,
//! * [`solve_csh`]: the full pipeline.

mod auxiliary;
mod constrained;
pub(crate) mod engine;
mod homotopy;
mod monotone;
pub(crate) mod newton;
mod pipeline;

use serde::Serialize;
use thiserror::Error;

use crate::estimates::EstimateError;
use crate::graph::{GraphError, VertexFunction};

pub use auxiliary::solve_auxiliary;
pub use constrained::{constrained_minimize, multiplier_estimate};
pub use homotopy::{homotopy_track, HomotopyPath};
pub use monotone::{construct_bracket, monotone_iterate, monotone_iterates, solve_inner, Bracket};
pub use newton::{family_residual, newton_solve, Family};
pub use pipeline::{
    eq33_residual, mass_identity_error, solve_csh, solve_csh_detailed, solve_small_eps,
    stage_epsilon, CshRun,
};

/// How the monotone scheme chooses its shift `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MonotoneAnchor {
    /// `k = 2λ e^{2u_+}` for the whole run.
    Fixed,
    /// `k = 2λ e^{2u_n}`, re-evaluated at the current iterate, which is
    /// itself an upper solution.
    Reanchor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Sup norm of the equation residual accepted as converged.
    pub residual_tol: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub inner_tol: f64,
    pub line_search_shrink: f64,
    pub multistart_count: usize,
    pub seed: u64,
    /// Parameter steps per homotopy leg.
    pub homotopy_steps: usize,
    /// Overrides the small-ε stage parameter (default `eps0 / 2`).
    pub epsilon: Option<f64>,
    pub monotone_anchor: MonotoneAnchor,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            residual_tol: 1e-10,
            max_outer_iters: 500,
            max_inner_iters: 200,
            inner_tol: 1e-12,
            line_search_shrink: 0.5,
            multistart_count: 32,
            seed: 0,
            homotopy_steps: 16,
            epsilon: None,
            monotone_anchor: MonotoneAnchor::Reanchor,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = [
            ("residual_tol", self.residual_tol),
            ("inner_tol", self.inner_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SolveError::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        if !(self.line_search_shrink > 0.0 && self.line_search_shrink < 1.0) {
            return Err(SolveError::InvalidConfig(
                "line_search_shrink must lie in (0, 1)".into(),
            ));
        }
        if self.max_outer_iters == 0
            || self.max_inner_iters == 0
            || self.multistart_count == 0
            || self.homotopy_steps == 0
        {
            return Err(SolveError::InvalidConfig(
                "iteration caps must be >= 1".into(),
            ));
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(SolveError::InvalidConfig("epsilon must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Monotone,
    ConstrainedMin,
    Newton,
    Homotopy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub residual_sup: f64,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub solution: VertexFunction,
    /// Homotopy parameter (`t` or `σ`) for elements of a continuation chain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<f64>,
    pub residual_sup: f64,
    pub iterations: usize,
    pub method: Method,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    /// Writes the trace as `iteration,residual,objective` CSV.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "residual", "objective"])?;
        for t in &self.trace {
            let objective = t.objective.map(|v| format!("{v:?}")).unwrap_or_default();
            w.write_record([
                t.iteration.to_string(),
                format!("{:?}", t.residual_sup),
                objective,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pipeline stage, attached to errors from [`solve_csh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Bounds,
    SmallEpsilon,
    GHomotopy,
    FHomotopy,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Bounds => "bounds",
            Stage::SmallEpsilon => "small-epsilon solve",
            Stage::GHomotopy => "G homotopy",
            Stage::FHomotopy => "F homotopy",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Error)]
pub enum SolveError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("{what} did not converge (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        residual: f64,
        best: VertexFunction,
    },
    #[error("bracket search diverged")]
    BracketDiverged,
    #[error("order-preservation failed at iteration {iteration}, vertex {vertex} (violation {violation:e})")]
    OrderPreservation {
        iteration: usize,
        vertex: usize,
        violation: f64,
    },
    #[error("feasibility bisection failed")]
    FeasibilityFailed,
    #[error("multiplier check failed: estimated {estimate}, expected 0.5")]
    MultiplierMismatch { estimate: f64 },
    #[error("non-regular point (scaled determinant {scaled_det:e})")]
    NonRegular {
        point: VertexFunction,
        scaled_det: f64,
    },
    #[error("homotopy step failed at parameter {parameter} after {halvings} halvings")]
    HomotopyFailed {
        parameter: f64,
        halvings: usize,
        partial: Vec<SolveReport>,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<SolveError>,
    },
}

impl SolveError {
    pub(crate) fn at(self, stage: Stage) -> SolveError {
        SolveError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of the hypothesis or the input data rather than of
    /// the numerics.
    pub fn is_hypothesis_violation(&self) -> bool {
        match self {
            SolveError::Estimate(EstimateError::HypothesisFails { .. }) => true,
            SolveError::Precondition(_) => true,
            SolveError::Stage { source, .. } => source.is_hypothesis_violation(),
            _ => false,
        }
    }
}

pub(crate) fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
