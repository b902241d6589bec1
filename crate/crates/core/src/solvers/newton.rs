use serde::Serialize;

use crate::degree::{jacobian_family, scaled_determinant};
use crate::estimates::ProblemData;
use crate::graph::VertexFunction;

use super::engine::{Globalization, NewtonFailure, NewtonOptions, VertexSystem, VertexTerm};
use super::{Method, SolveError, SolveReport, SolverConfig, TraceEntry};

/// The two homotopy families.
///
/// * `F(u, σ) = -Δ_p u + λ e^u (e^u - σ) + f`
/// * `G_ε(u, t) = -Δ_p u + λ e^{2u} + (t + (1 - t) ε) f`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    F { sigma: f64 },
    G { eps: f64, t: f64 },
}

impl Family {
    /// The full equation `Δ_p u = λ e^u (e^u - 1) + f`.
    pub const TARGET: Family = Family::F { sigma: 1.0 };

    /// `Δ_p u = λ e^{2u} + ε f`.
    pub fn small_eps(eps: f64) -> Family {
        Family::G { eps, t: 0.0 }
    }
}

pub(crate) struct FamilyTerm<'a> {
    lambda: f64,
    f: &'a [f64],
    family: Family,
}

impl<'a> FamilyTerm<'a> {
    pub fn new(pd: &'a ProblemData, family: Family) -> Self {
        FamilyTerm {
            lambda: pd.lambda(),
            f: pd.f().values(),
            family,
        }
    }
}

impl VertexTerm for FamilyTerm<'_> {
    fn value(&self, x: usize, u: f64) -> f64 {
        let e = u.exp();
        match self.family {
            Family::F { sigma } => self.lambda * e * (e - sigma) + self.f[x],
            Family::G { eps, t } => self.lambda * e * e + (t + (1.0 - t) * eps) * self.f[x],
        }
    }

    fn derivative(&self, _x: usize, u: f64) -> f64 {
        let e = u.exp();
        match self.family {
            Family::F { sigma } => self.lambda * e * (2.0 * e - sigma),
            Family::G { .. } => 2.0 * self.lambda * e * e,
        }
    }
}

pub(crate) fn system<'a>(pd: &'a ProblemData, family: Family) -> VertexSystem<'a, FamilyTerm<'a>> {
    VertexSystem::new(pd.graph(), pd.exponent(), FamilyTerm::new(pd, family))
}

/// Sup norm of the selected map at `u`.
pub fn family_residual(
    pd: &ProblemData,
    family: Family,
    u: &VertexFunction,
) -> Result<f64, SolveError> {
    pd.graph().check_dim(u)?;
    Ok(system(pd, family).residual_sup(u))
}

/// Damped Newton on the selected map, halving the step until `‖R‖²`
/// decreases sufficiently.
pub fn newton_solve(
    pd: &ProblemData,
    family: Family,
    u0: &VertexFunction,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    newton_with(pd, family, u0, cfg, Globalization::Armijo)
}

pub(crate) fn newton_with(
    pd: &ProblemData,
    family: Family,
    u0: &VertexFunction,
    cfg: &SolverConfig,
    globalization: Globalization,
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    pd.graph().check_dim(u0)?;
    let sys = system(pd, family);
    let opts = NewtonOptions {
        tol: cfg.residual_tol,
        max_iters: cfg.max_outer_iters,
        shrink: cfg.line_search_shrink,
        globalization,
    };
    let out = sys.solve(u0.values(), &opts);
    if out.failure == Some(NewtonFailure::Singular) {
        let point = VertexFunction::from_vec_unchecked(out.u);
        let jac = jacobian_family(pd, family, &point);
        return Err(SolveError::NonRegular {
            scaled_det: scaled_determinant(&jac.entries).abs(),
            point,
        });
    }
    let converged = out.converged();
    let solution = VertexFunction::from_vec_unchecked(out.u);
    Ok(SolveReport {
        solution,
        parameter: None,
        residual_sup: out.residual,
        iterations: out.iterations,
        method: Method::Newton,
        converged,
        trace: out
            .trace
            .into_iter()
            .map(|(iteration, residual_sup)| TraceEntry {
                iteration,
                residual_sup,
                objective: None,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Exponent, Graph};

    fn k2(lambda: f64, f: f64, p: f64) -> ProblemData {
        ProblemData::new(
            Graph::complete(2).unwrap(),
            lambda,
            VertexFunction::constant(2, f),
            Exponent::new(p).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn golden_ratio_on_k2() {
        let pd = k2(1.0, -1.0, 2.0);
        let rep = newton_solve(
            &pd,
            Family::TARGET,
            &VertexFunction::constant(2, 0.3),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(rep.converged);
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        assert!(rep.solution.iter().all(|u| (u - golden).abs() < 1e-10));
        assert!(rep.residual_sup <= 1e-10);
    }

    #[test]
    fn exact_start_takes_no_steps() {
        let pd = k2(1.0, -1.0, 3.0);
        let golden = ((1.0 + 5f64.sqrt()) / 2.0).ln();
        let rep = newton_solve(
            &pd,
            Family::TARGET,
            &VertexFunction::constant(2, golden),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn small_eps_solution_obeys_pointwise_bound() {
        let pd = k2(-1.0, 1.0, 2.0);
        let eps = 1e-3;
        let rep = newton_solve(
            &pd,
            Family::small_eps(eps),
            &VertexFunction::constant(2, -2.0),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(rep.converged);
        // e^{2u} = ε f̄ / |λ|, and η = 2 here
        for u in rep.solution.iter() {
            assert!(((2.0 * u).exp() - eps).abs() < 1e-12);
            assert!((2.0 * u).exp() <= 2.0 * eps);
        }
    }

    #[test]
    fn flux_form_newton_for_p_below_two() {
        let g = Graph::path(3).unwrap();
        let pd = ProblemData::new(
            g,
            1.0,
            VertexFunction::new(vec![-0.4, -0.6, -0.5]).unwrap(),
            Exponent::new(1.5).unwrap(),
        )
        .unwrap();
        let rep = newton_solve(
            &pd,
            Family::TARGET,
            &VertexFunction::constant(3, 0.4),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(rep.converged, "{}", rep.residual_sup);
    }
}
