use crate::estimates::ProblemData;
use crate::graph::{gradient_p_energy_raw, p_laplacian_into, VertexFunction};

use super::engine::Globalization;
use super::newton::{newton_with, Family};
use super::pipeline::eq33_residual_raw;
use super::{sup, Method, SolveError, SolveReport, SolverConfig, TraceEntry};

const MULTIPLIER_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: u32 = 60;
/// Projected-gradient phase ends once the tangential gradient is this small
/// relative to `1 + ε‖f‖_∞`; Newton finishes from there.
const HANDOFF: f64 = 1e-7;

struct Constrained<'a> {
    pd: &'a ProblemData,
    eps: f64,
    /// Target mass `∫ e^{2u} = ε f̄ |V| / (-λ)`.
    mass: f64,
}

impl Constrained<'_> {
    /// `I(u) = (1/p)∫|∇u|^p + ε∫ f u`.
    fn objective(&self, u: &[f64]) -> f64 {
        let e = self.pd.exponent();
        let source: f64 = u.iter().zip(self.pd.f().iter()).map(|(a, b)| a * b).sum();
        gradient_p_energy_raw(self.pd.graph(), u, e) / e.p() + self.eps * source
    }

    /// `λ∫e^{2u} + ε f̄ |V|`.
    fn constraint(&self, u: &[f64]) -> f64 {
        let n = u.len() as f64;
        self.pd.lambda() * u.iter().map(|v| (2.0 * v).exp()).sum::<f64>()
            + self.eps * self.pd.f_mean() * n
    }

    /// Shift `u ↦ u + s` onto the constraint set. The constraint in log form,
    /// `ln∫e^{2(u+s)} - ln(mass) = 2s + ln∫e^{2u} - ln(mass)`, is affine in
    /// `s`, so one Newton step from `s = 0` is exact.
    fn project(&self, u: &mut [f64]) {
        let top = u.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let log_mass = 2.0 * top + u.iter().map(|v| (2.0 * (v - top)).exp()).sum::<f64>().ln();
        let s = -(log_mass - self.mass.ln()) / 2.0;
        u.iter_mut().for_each(|v| *v += s);
    }

    /// Bisection on `φ(t) = -λ∫e^{2(t·l + (1-t)(-l))}` against `ε f̄ |V|`,
    /// doubling `l` until the endpoints straddle the constraint.
    fn feasible_start(&self) -> Result<Vec<f64>, SolveError> {
        let n = self.pd.vertex_count();
        let value = |t: f64, l: f64| self.constraint(&vec![(2.0 * t - 1.0) * l; n]);
        let mut l = n as f64;
        for _ in 0..=MAX_DOUBLINGS {
            // λ < 0: the constraint decreases in t
            if value(0.0, l) > 0.0 && value(1.0, l) < 0.0 {
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if value(mid, l) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let mut u = vec![(2.0 * (0.5 * (lo + hi)) - 1.0) * l; n];
                self.project(&mut u);
                return Ok(u);
            }
            l *= 2.0;
        }
        Err(SolveError::FeasibilityFailed)
    }

    /// `-Δ_p u + ε f` with its component along the constraint normal `e^{2u}`
    /// removed.
    fn tangent_gradient(&self, u: &[f64], lap: &mut [f64]) -> Vec<f64> {
        p_laplacian_into(self.pd.graph(), u, self.pd.exponent(), lap);
        let mut grad: Vec<f64> = (0..u.len())
            .map(|x| -lap[x] + self.eps * self.pd.f()[x])
            .collect();
        let normal: Vec<f64> = u.iter().map(|v| (2.0 * v).exp()).collect();
        let nn: f64 = normal.iter().map(|v| v * v).sum();
        let gn: f64 = grad.iter().zip(&normal).map(|(a, b)| a * b).sum();
        grad.iter_mut()
            .zip(&normal)
            .for_each(|(g, m)| *g -= gn / nn * m);
        grad
    }
}

/// `τ̂ = ⟨Δ_p u - ε f, 2λe^{2u}⟩ / ‖2λe^{2u}‖²`, the least-squares multiplier
/// in `Δ_p u = 2λτ e^{2u} + ε f`. Equals `1/2` at solutions.
pub fn multiplier_estimate(
    pd: &ProblemData,
    eps: f64,
    u: &VertexFunction,
) -> Result<f64, SolveError> {
    pd.graph().check_dim(u)?;
    let mut lap = vec![0.0; u.len()];
    p_laplacian_into(pd.graph(), u, pd.exponent(), &mut lap);
    let mut num = 0.0;
    let mut den = 0.0;
    for x in 0..u.len() {
        let w = 2.0 * pd.lambda() * (2.0 * u[x]).exp();
        num += (lap[x] - eps * pd.f()[x]) * w;
        den += w * w;
    }
    Ok(num / den)
}

/// Minimizes `I(u) = (1/p)∫|∇u|^p + ε∫f u` on
/// `B = {λ∫e^{2u} + ε f̄|V| = 0}` (`λ < 0`), then polishes the
/// Euler–Lagrange equation `Δ_p u = λe^{2u} + εf` with Newton and checks
/// that the multiplier is `1/2`.
pub fn constrained_minimize(
    pd: &ProblemData,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    pd.require_hypothesis()?;
    cfg.validate()?;
    if pd.lambda() >= 0.0 {
        return Err(SolveError::Precondition(
            "constrained minimization needs λ < 0".into(),
        ));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SolveError::Precondition("ε must be positive".into()));
    }
    let n = pd.vertex_count();
    let problem = Constrained {
        pd,
        eps,
        mass: eps * pd.f_mean() * n as f64 / -pd.lambda(),
    };

    let mut u = problem.feasible_start()?;
    let mut obj = problem.objective(&u);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        residual_sup: eq33_residual_raw(pd, eps, &u),
        objective: Some(obj),
    }];
    let scale = 1.0 + eps * pd.f().sup_norm();
    let mut lap = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut step = 1.0;
    let mut iterations = 0;
    for it in 1..=cfg.max_outer_iters {
        let grad = problem.tangent_gradient(&u, &mut lap);
        if sup(&grad) <= HANDOFF * scale {
            break;
        }
        let gsq: f64 = grad.iter().map(|v| v * v).sum();
        step *= 2.0;
        let mut accepted = false;
        while step > 1e-16 {
            for x in 0..n {
                trial[x] = u[x] - step * grad[x];
            }
            problem.project(&mut trial);
            let t_obj = problem.objective(&trial);
            if t_obj <= obj - 1e-4 * step * gsq {
                std::mem::swap(&mut u, &mut trial);
                obj = t_obj;
                accepted = true;
                break;
            }
            step *= cfg.line_search_shrink;
        }
        if !accepted {
            break;
        }
        iterations = it;
        trace.push(TraceEntry {
            iteration: it,
            residual_sup: eq33_residual_raw(pd, eps, &u),
            objective: Some(obj),
        });
    }

    let start = VertexFunction::from_vec_unchecked(u);
    let mut polished = None;
    for globalization in [Globalization::Armijo, Globalization::TrustRegion] {
        let rep = newton_with(pd, Family::small_eps(eps), &start, cfg, globalization)?;
        if rep.converged {
            polished = Some(rep);
            break;
        }
    }
    let Some(polish) = polished else {
        let residual = eq33_residual_raw(pd, eps, start.values());
        return Ok(SolveReport {
            solution: start,
            parameter: None,
            residual_sup: residual,
            iterations,
            method: Method::ConstrainedMin,
            converged: false,
            trace,
        });
    };
    for t in polish.trace.iter().skip(1) {
        trace.push(TraceEntry {
            iteration: iterations + t.iteration,
            residual_sup: t.residual_sup,
            objective: None,
        });
    }
    let u = polish.solution;
    let tau = multiplier_estimate(pd, eps, &u)?;
    if (tau - 0.5).abs() > MULTIPLIER_TOL {
        return Err(SolveError::MultiplierMismatch { estimate: tau });
    }
    let residual = eq33_residual_raw(pd, eps, u.values()).max(problem.constraint(u.values()).abs());
    Ok(SolveReport {
        solution: u,
        parameter: None,
        residual_sup: residual,
        iterations: iterations + polish.iterations,
        method: Method::ConstrainedMin,
        converged: residual <= cfg.residual_tol,
        trace,
    })
}
