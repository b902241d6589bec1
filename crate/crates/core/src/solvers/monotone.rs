use serde::Serialize;

use crate::estimates::ProblemData;
use crate::graph::{p_laplacian_into, Exponent, Graph, VertexFunction};

use super::auxiliary::convex_solve;
use super::pipeline::eq33_residual_raw;
use super::{
    solve_auxiliary, sup, Method, MonotoneAnchor, SolveError, SolveReport, SolverConfig, TraceEntry,
};

const ORDER_SLACK: f64 = 1e-9;
const MAX_DOUBLINGS: u32 = 60;

/// Ordered pair of a lower and an upper solution of
/// `Δ_p u = λ e^{2u} + ε f` together with the shift `k = 2λ e^{2u_+}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bracket {
    pub u_minus: VertexFunction,
    pub u_plus: VertexFunction,
    pub k: VertexFunction,
    pub v_eps: VertexFunction,
    #[serde(rename = "A_shift")]
    pub a_shift: f64,
    pub b_shift: f64,
}

/// `Δ_p u - λ e^{2u} - ε f` at each vertex.
fn defect(pd: &ProblemData, eps: f64, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    p_laplacian_into(pd.graph(), u, pd.exponent(), &mut out);
    let lambda = pd.lambda();
    for (x, d) in out.iter_mut().enumerate() {
        *d -= lambda * (2.0 * u[x]).exp() + eps * pd.f()[x];
    }
    out
}

fn require_positive_case(pd: &ProblemData, eps: f64) -> Result<(), SolveError> {
    pd.require_hypothesis()?;
    if pd.lambda() <= 0.0 {
        return Err(SolveError::Precondition(
            "monotone scheme needs λ > 0".into(),
        ));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SolveError::Precondition("ε must be positive".into()));
    }
    Ok(())
}

/// `u_- = v_ε - A`, `u_+ = v_ε + b`, with `A` and `b` doubled from 1 until the
/// lower/upper solution inequalities hold at every vertex.
pub fn construct_bracket(
    pd: &ProblemData,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<Bracket, SolveError> {
    require_positive_case(pd, eps)?;
    // The sign conditions below are checked on the shifted functions
    // themselves, so an inexact auxiliary solution only costs larger shifts.
    let v = match solve_auxiliary(pd.graph(), pd.f(), eps, pd.exponent(), cfg) {
        Err(SolveError::NotConverged { best, .. }) => best,
        other => other?,
    };
    let tol = cfg.residual_tol;
    let shifted = |s: f64| -> Vec<f64> { v.iter().map(|w| w + s).collect() };

    let search = |ok: &dyn Fn(&[f64]) -> bool, sign: f64| -> Result<f64, SolveError> {
        let mut shift = 1.0;
        for _ in 0..=MAX_DOUBLINGS {
            if ok(&shifted(sign * shift)) {
                return Ok(shift);
            }
            shift *= 2.0;
        }
        Err(SolveError::BracketDiverged)
    };
    let a_shift = search(&|u| defect(pd, eps, u).iter().all(|&d| d >= -tol), -1.0)?;
    let b_shift = search(&|u| defect(pd, eps, u).iter().all(|&d| d <= tol), 1.0)?;

    let u_plus = shifted(b_shift);
    let k = u_plus
        .iter()
        .map(|&u| 2.0 * pd.lambda() * (2.0 * u).exp())
        .collect();
    Ok(Bracket {
        u_minus: VertexFunction::from_vec_unchecked(shifted(-a_shift)),
        u_plus: VertexFunction::from_vec_unchecked(u_plus),
        k: VertexFunction::from_vec_unchecked(k),
        v_eps: v,
        a_shift,
        b_shift,
    })
}

/// Unique `w` with `Δ_p w - k w = rhs`.
pub fn solve_inner(
    g: &Graph,
    k: &VertexFunction,
    rhs: &VertexFunction,
    exponent: Exponent,
    cfg: &SolverConfig,
) -> Result<VertexFunction, SolveError> {
    g.check_dim(k)?;
    g.check_dim(rhs)?;
    if k.iter().any(|&v| v <= 0.0) {
        return Err(SolveError::Precondition("inner solve needs k > 0".into()));
    }
    let n = g.vertex_count();
    // Start from the constant-free guess w = -rhs / k.
    let w0: Vec<f64> = (0..n).map(|x| -rhs[x] / k[x]).collect();
    inner(g, k, rhs, exponent, w0, cfg)
}

fn inner(
    g: &Graph,
    k: &[f64],
    rhs: &[f64],
    exponent: Exponent,
    w0: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<VertexFunction, SolveError> {
    // Δ_p w - k w = rhs  ⇔  -Δ_p w + k w + rhs = 0
    match convex_solve(g, exponent, k, rhs, false, w0, cfg.inner_tol, cfg) {
        Ok(w) => Ok(VertexFunction::from_vec_unchecked(w)),
        // Near-equal neighbor values at p < 2 limit attainable accuracy;
        // the outer tolerance still bounds the error.
        Err((best, residual)) if residual <= cfg.residual_tol => {
            Ok(VertexFunction::from_vec_unchecked(best))
        }
        Err((best, residual)) => Err(SolveError::NotConverged {
            what: "inner solve",
            residual,
            best: VertexFunction::from_vec_unchecked(best),
        }),
    }
}

/// Monotone iteration `Δ_p u_{n+1} - k u_{n+1} = λ e^{2u_n} + ε f - k u_n`
/// from `u_0 = u_+`.
///
/// With [`MonotoneAnchor::Reanchor`] the shift is `k_n = 2λ e^{2u_n}`.
/// Every iterate is an upper solution above `u_-`, so this `k_n` keeps
/// `s ↦ λe^{2s} - k_n s` nonincreasing on `[u_-, u_n]` and the ordering
/// argument goes through unchanged.
pub fn monotone_iterate(
    pd: &ProblemData,
    eps: f64,
    br: &Bracket,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    monotone_run(pd, eps, br, cfg, false).map(|(rep, _)| rep)
}

/// [`monotone_iterate`], also returning every iterate `u_0 = u_+, u_1, …`.
pub fn monotone_iterates(
    pd: &ProblemData,
    eps: f64,
    br: &Bracket,
    cfg: &SolverConfig,
) -> Result<(SolveReport, Vec<VertexFunction>), SolveError> {
    monotone_run(pd, eps, br, cfg, true)
}

fn monotone_run(
    pd: &ProblemData,
    eps: f64,
    br: &Bracket,
    cfg: &SolverConfig,
    keep: bool,
) -> Result<(SolveReport, Vec<VertexFunction>), SolveError> {
    require_positive_case(pd, eps)?;
    cfg.validate()?;
    let g = pd.graph();
    let n = pd.vertex_count();
    let lambda = pd.lambda();
    let f = pd.f();
    for x in 0..n {
        if br.u_minus[x] > br.u_plus[x] || br.k[x] <= 0.0 {
            return Err(SolveError::Precondition("invalid bracket".into()));
        }
    }

    let mut u = br.u_plus.values().to_vec();
    let mut k = br.k.values().to_vec();
    let mut iterates = Vec::new();
    if keep {
        iterates.push(br.u_plus.clone());
    }
    let mut trace = vec![TraceEntry {
        iteration: 0,
        residual_sup: eq33_residual_raw(pd, eps, &u),
        objective: None,
    }];
    let mut rhs = vec![0.0; n];
    for it in 1..=cfg.max_outer_iters {
        if cfg.monotone_anchor == MonotoneAnchor::Reanchor {
            for x in 0..n {
                k[x] = 2.0 * lambda * (2.0 * u[x]).exp();
            }
        }
        for x in 0..n {
            rhs[x] = lambda * (2.0 * u[x]).exp() + eps * f[x] - k[x] * u[x];
        }
        let next = match inner(g, &k, &rhs, pd.exponent(), u.clone(), cfg) {
            Ok(w) => w.into_vec(),
            // Report the last good iterate as unconverged.
            Err(SolveError::NotConverged { .. }) => break,
            Err(e) => return Err(e),
        };

        for x in 0..n {
            let violation = (next[x] - u[x]).max(br.u_minus[x] - next[x]);
            if violation > ORDER_SLACK {
                return Err(SolveError::OrderPreservation {
                    iteration: it,
                    vertex: x,
                    violation,
                });
            }
        }
        let change = sup(&next.iter().zip(&u).map(|(a, b)| a - b).collect::<Vec<_>>());
        u = next;
        if keep {
            iterates.push(VertexFunction::from_vec_unchecked(u.clone()));
        }
        let residual = eq33_residual_raw(pd, eps, &u);
        trace.push(TraceEntry {
            iteration: it,
            residual_sup: residual,
            objective: None,
        });
        if change <= cfg.residual_tol && residual <= cfg.residual_tol {
            let rep = SolveReport {
                solution: VertexFunction::from_vec_unchecked(u),
                parameter: None,
                residual_sup: residual,
                iterations: it,
                method: Method::Monotone,
                converged: true,
                trace,
            };
            return Ok((rep, iterates));
        }
    }
    let residual = eq33_residual_raw(pd, eps, &u);
    let rep = SolveReport {
        solution: VertexFunction::from_vec_unchecked(u),
        parameter: None,
        residual_sup: residual,
        iterations: trace.len() - 1,
        method: Method::Monotone,
        converged: false,
        trace,
    };
    Ok((rep, iterates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::compute_bounds;

    fn pd(g: Graph, lambda: f64, f: Vec<f64>, p: f64) -> ProblemData {
        ProblemData::new(
            g,
            lambda,
            VertexFunction::new(f).unwrap(),
            Exponent::new(p).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn k2_bracket_accepts_first_shifts() {
        let data = pd(Graph::complete(2).unwrap(), 1.0, vec![-1.0, -1.0], 2.0);
        let br = construct_bracket(&data, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(br.a_shift, 1.0);
        assert_eq!(br.b_shift, 1.0);
        assert_eq!(br.u_minus.values(), &[-1.0, -1.0]);
        assert_eq!(br.u_plus.values(), &[1.0, 1.0]);
        assert!(br.k.iter().all(|&k| (k - 2.0 * 2f64.exp()).abs() < 1e-12));
    }

    #[test]
    fn bracket_requires_positive_lambda() {
        let data = pd(Graph::complete(2).unwrap(), -1.0, vec![1.0, 1.0], 2.0);
        assert!(matches!(
            construct_bracket(&data, 1.0, &SolverConfig::default()),
            Err(SolveError::Precondition(_))
        ));
    }

    #[test]
    fn inner_examples() {
        let g = Graph::complete(2).unwrap();
        let e = Exponent::new(2.0).unwrap();
        let cfg = SolverConfig::default();
        let vf = |v: &[f64]| VertexFunction::new(v.to_vec()).unwrap();
        let w = solve_inner(&g, &vf(&[1.0, 1.0]), &vf(&[0.0, 0.0]), e, &cfg).unwrap();
        assert_eq!(w.values(), &[0.0, 0.0]);
        let w = solve_inner(&g, &vf(&[1.0, 1.0]), &vf(&[-1.0, -1.0]), e, &cfg).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
        let w = solve_inner(&g, &vf(&[2.0, 2.0]), &vf(&[-1.0, 1.0]), e, &cfg).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-12 && (w[1] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn inner_residual_for_p_below_two() {
        let g = Graph::cycle(4).unwrap();
        let e = Exponent::new(1.5).unwrap();
        let k = VertexFunction::new(vec![0.5, 1.0, 2.0, 0.1]).unwrap();
        let rhs = VertexFunction::new(vec![0.3, -0.2, 0.0, 0.05]).unwrap();
        let w = solve_inner(&g, &k, &rhs, e, &SolverConfig::default()).unwrap();
        let lap = crate::graph::p_laplacian(&g, &w, e).unwrap();
        for x in 0..4 {
            assert!((lap[x] - k[x] * w[x] - rhs[x]).abs() <= 1e-12);
        }
    }

    #[test]
    fn k2_constant_solutions() {
        let cfg = SolverConfig::default();
        let data = pd(Graph::complete(2).unwrap(), 1.0, vec![-1.0, -1.0], 2.0);
        let br = construct_bracket(&data, 1.0, &cfg).unwrap();
        let rep = monotone_iterate(&data, 1.0, &br, &cfg).unwrap();
        assert!(rep.converged);
        assert!(rep.solution.iter().all(|u| u.abs() < 1e-10));

        let data = pd(Graph::complete(2).unwrap(), 2.0, vec![-1.0, -1.0], 3.0);
        let br = construct_bracket(&data, 1.0, &cfg).unwrap();
        let rep = monotone_iterate(&data, 1.0, &br, &cfg).unwrap();
        assert!(rep.converged);
        assert!(rep
            .solution
            .iter()
            .all(|u| (u + 0.5 * 2f64.ln()).abs() < 1e-10));
        let bounds = compute_bounds(&data).unwrap();
        assert!(bounds.contains(&rep.solution));
    }

    #[test]
    fn fixed_anchor_also_converges() {
        let cfg = SolverConfig {
            monotone_anchor: MonotoneAnchor::Fixed,
            max_outer_iters: 5000,
            ..SolverConfig::default()
        };
        let data = pd(Graph::path(3).unwrap(), 1.0, vec![-1.0, -0.5, -0.8], 2.0);
        let br = construct_bracket(&data, 0.5, &cfg).unwrap();
        let rep = monotone_iterate(&data, 0.5, &br, &cfg).unwrap();
        assert!(rep.converged, "{}", rep.residual_sup);
    }
}
