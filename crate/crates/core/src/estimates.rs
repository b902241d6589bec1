//! Explicit a priori bounds for solutions of
//! `Δ_p u = λ e^u (e^u - σ) + f`, uniform in `σ ∈ [0, 1]`, and the
//! small-ε uniqueness threshold for `Δ_p u = λ e^{2u} + ε f`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    diameter_path_length, poincare_constant, Exponent, Graph, GraphError, PoincareMode,
    VertexFunction,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("lambda must be a finite non-zero real, got {0}")]
    InvalidLambda(f64),
    #[error("hypothesis λ∫f<0 fails (λ = {lambda}, ∫f = {integral_f})")]
    HypothesisFails { lambda: f64, integral_f: f64 },
}

/// Graph, coupling `λ`, source `f` and exponent `p` of one problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    graph: Graph,
    lambda: f64,
    f: VertexFunction,
    exponent: Exponent,
    relaxed: bool,
}

impl ProblemData {
    /// Builds problem data satisfying `λ ∫_V f < 0`.
    pub fn new(
        graph: Graph,
        lambda: f64,
        f: VertexFunction,
        exponent: Exponent,
    ) -> Result<Self, EstimateError> {
        let pd = Self::relaxed(graph, lambda, f, exponent)?;
        if !pd.hypothesis_holds() {
            return Err(EstimateError::HypothesisFails {
                lambda,
                integral_f: pd.integral_f(),
            });
        }
        Ok(ProblemData {
            relaxed: false,
            ..pd
        })
    }

    /// Skips the sign condition. Such data is flagged, and the bounds and
    /// solvers refuse it; it exists for exploratory residual checks.
    pub fn relaxed(
        graph: Graph,
        lambda: f64,
        f: VertexFunction,
        exponent: Exponent,
    ) -> Result<Self, EstimateError> {
        if !lambda.is_finite() || lambda == 0.0 {
            return Err(EstimateError::InvalidLambda(lambda));
        }
        graph.check_dim(&f)?;
        Ok(ProblemData {
            graph,
            lambda,
            f,
            exponent,
            relaxed: true,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn f(&self) -> &VertexFunction {
        &self.f
    }

    pub fn exponent(&self) -> Exponent {
        self.exponent
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    pub fn integral_f(&self) -> f64 {
        self.f.iter().sum()
    }

    /// `f̄ = (1/|V|) ∫_V f`.
    pub fn f_mean(&self) -> f64 {
        self.integral_f() / self.vertex_count() as f64
    }

    pub fn hypothesis_holds(&self) -> bool {
        self.lambda * self.integral_f() < 0.0
    }

    /// Errors unless the data was built by [`ProblemData::new`] (or is
    /// relaxed data that happens to satisfy the hypothesis).
    pub fn require_hypothesis(&self) -> Result<(), EstimateError> {
        if self.relaxed || !self.hypothesis_holds() {
            return Err(EstimateError::HypothesisFails {
                lambda: self.lambda,
                integral_f: self.integral_f(),
            });
        }
        Ok(())
    }
}

/// Every explicit constant of the a priori estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AprioriBounds {
    pub a: f64,
    /// Upper bound on `max_V u`.
    pub upper: f64,
    /// Bound on `‖Δ_p u‖_∞`.
    pub b: f64,
    /// Bound on the oscillation `max_V u - min_V u`.
    pub c0: f64,
    pub zeta: f64,
    #[serde(rename = "A")]
    pub a_shift: f64,
    /// `-A - c0`, lower bound on `min_V u`.
    pub lower: f64,
    pub eta: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    pub eps0: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub poincare_c: f64,
    pub path_l: usize,
}

impl AprioriBounds {
    /// Evaluates the bound formulas for a given Poincaré constant and path
    /// length. Any valid upper bound for the constant gives valid bounds.
    pub fn from_constants(pd: &ProblemData, poincare_c: f64, path_l: usize) -> Self {
        let n = pd.vertex_count() as f64;
        let lambda = pd.lambda();
        let fbar = pd.f_mean();
        let p = pd.exponent().p();
        let q = pd.exponent().q();

        let a = n * (1.0 + fbar.abs() / lambda.abs());
        // e^{max u} is at most the positive root of s^2 - s = a.
        let root = (1.0 + (1.0 + 4.0 * a).sqrt()) / 2.0;
        let upper = root.ln();
        let f_sup = pd.f().sup_norm();
        let b = lambda.abs() * (root * root + root) + f_sup;

        let chain = (2.0 * ((path_l - 1) as f64).powf(p - 1.0) * n * poincare_c).powf(1.0 / p);
        let c0 = b.powf(q / p) * chain;

        let zeta = -fbar * n / lambda;
        let a_shift = -(1.0_f64.min(zeta / (4.0 * n))).ln();
        let lower = -a_shift - c0;

        let eta = zeta;
        let c3 = 4.0 * eta * lambda.abs() * chain;
        let eps0 = 1.0 / (2.0 * c3);
        let r0 = upper.abs().max(lower.abs()) + 1.0;

        AprioriBounds {
            a,
            upper,
            b,
            c0,
            zeta,
            a_shift,
            lower,
            eta,
            c3,
            eps0,
            r0,
            poincare_c,
            path_l,
        }
    }

    /// True iff `lower ≤ u(x) ≤ upper` at every vertex.
    pub fn contains(&self, u: &VertexFunction) -> bool {
        u.iter().all(|&v| self.lower <= v && v <= self.upper)
    }
}

/// Computes the a priori bounds with the numerically estimated mean-zero
/// Poincaré constant and the diameter path length.
pub fn compute_bounds(pd: &ProblemData) -> Result<AprioriBounds, EstimateError> {
    pd.require_hypothesis()?;
    let c = poincare_constant(pd.graph(), pd.exponent(), &PoincareMode::MeanZero)?;
    let l = diameter_path_length(pd.graph());
    Ok(AprioriBounds::from_constants(pd, c, l))
}

pub fn check_bound(pd: &ProblemData, bounds: &AprioriBounds, u: &VertexFunction) -> bool {
    u.len() == pd.vertex_count() && bounds.contains(u)
}
