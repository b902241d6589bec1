use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::degree::scaled_determinant;
use crate::estimates::ProblemData;
use crate::graph::VertexFunction;

use super::engine::Globalization;
use super::newton::{newton_with, system, Family};
use super::{Method, SolveError, SolveReport, SolverConfig};

const MAX_HALVINGS: usize = 3;

/// Parameter path of a homotopy, run from parameter 0 to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum HomotopyPath {
    /// `G_ε(·, t)`, `t: 0 → 1`.
    G { eps: f64 },
    /// `F(·, σ)`, `σ: 0 → 1`.
    F,
}

impl HomotopyPath {
    pub fn at(self, s: f64) -> Family {
        match self {
            HomotopyPath::G { eps } => Family::G { eps, t: s },
            HomotopyPath::F => Family::F { sigma: s },
        }
    }

    /// `∂R/∂s` at `u`.
    fn parameter_derivative(self, pd: &ProblemData, u: &[f64]) -> Vec<f64> {
        match self {
            HomotopyPath::G { eps } => pd.f().iter().map(|fx| (1.0 - eps) * fx).collect(),
            HomotopyPath::F => u.iter().map(|v| -pd.lambda() * v.exp()).collect(),
        }
    }
}

fn correct(
    pd: &ProblemData,
    family: Family,
    u: &VertexFunction,
    cfg: &SolverConfig,
) -> Option<SolveReport> {
    for globalization in [Globalization::Armijo, Globalization::TrustRegion] {
        if let Ok(rep) = newton_with(pd, family, u, cfg, globalization) {
            if rep.converged {
                return Some(rep);
            }
        }
    }
    None
}

/// Euler predictor `u + h · du/ds`, with `J du/ds = -∂R/∂s`. Where `J` is
/// nearly singular the tangent is unreliable and the secant through the
/// previous chain point is used instead.
fn predict(
    pd: &ProblemData,
    path: HomotopyPath,
    s: f64,
    u: &[f64],
    h: f64,
    previous: Option<(f64, &[f64])>,
) -> Vec<f64> {
    let jac = system(pd, path.at(s)).jacobian(u);
    if scaled_determinant(&jac).abs() < PREDICTOR_REGULARITY {
        return match previous {
            Some((s0, u0)) if s > s0 => u
                .iter()
                .zip(u0)
                .map(|(a, b)| a + h * (a - b) / (s - s0))
                .collect(),
            _ => u.to_vec(),
        };
    }
    let rhs = DVector::from_iterator(
        u.len(),
        path.parameter_derivative(pd, u).into_iter().map(|v| -v),
    );
    match jac.lu().solve(&rhs) {
        Some(du) if du.iter().all(|v| v.is_finite()) => {
            u.iter().zip(du.iter()).map(|(a, d)| a + h * d).collect()
        }
        _ => u.to_vec(),
    }
}

const PREDICTOR_REGULARITY: f64 = 1e-8;

/// Natural-parameter continuation along `path` from a solution at
/// parameter 0, with `steps` nominal steps. A failed corrector halves the
/// step (at most three times in a row) and retries from the last good point.
///
/// Returns the chain of converged points including both ends and every
/// nominal grid point `k/steps`.
pub fn homotopy_track(
    pd: &ProblemData,
    path: HomotopyPath,
    start: &VertexFunction,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<Vec<SolveReport>, SolveError> {
    cfg.validate()?;
    pd.graph().check_dim(start)?;
    if steps == 0 {
        return Err(SolveError::InvalidConfig(
            "homotopy needs at least one step".into(),
        ));
    }
    let Some(first) = correct(pd, path.at(0.0), start, cfg) else {
        return Err(SolveError::HomotopyFailed {
            parameter: 0.0,
            halvings: 0,
            partial: Vec::new(),
        });
    };
    natural_track(pd, path, first, steps, cfg)
}

fn tag(mut rep: SolveReport, s: f64) -> SolveReport {
    rep.method = Method::Homotopy;
    rep.parameter = Some(s);
    rep
}

/// Start of a chain: `start` corrected at parameter 0.
pub(crate) fn chain_start(
    pd: &ProblemData,
    path: HomotopyPath,
    start: &VertexFunction,
    cfg: &SolverConfig,
) -> Option<SolveReport> {
    correct(pd, path.at(0.0), start, cfg)
}

/// Natural-parameter stepping from `first` (the chain's point at 0).
pub(crate) fn natural_track(
    pd: &ProblemData,
    path: HomotopyPath,
    first: SolveReport,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<Vec<SolveReport>, SolveError> {
    let mut chain = vec![tag(first, 0.0)];
    let nominal = 1.0 / steps as f64;
    let mut s = 0.0;
    let mut h = nominal;
    let mut halvings = 0;
    while s < 1.0 {
        // Never step past the next nominal grid point, so the chain always
        // contains every multiple of 1/steps.
        let grid = ((s / nominal + 1e-9).floor() + 1.0) * nominal;
        let mut next = (s + h).min(grid);
        if next > 1.0 - 1e-9 * nominal {
            next = 1.0;
        }
        let u = chain
            .last()
            .expect("chain is never empty")
            .solution
            .values();
        let previous = chain.len().checked_sub(2).map(|i| {
            (
                chain[i].parameter.unwrap_or(0.0),
                chain[i].solution.values(),
            )
        });
        let guess = VertexFunction::from_vec_unchecked(predict(pd, path, s, u, next - s, previous));
        let guess = if guess.is_finite() {
            guess
        } else {
            chain.last().expect("chain is never empty").solution.clone()
        };
        match correct(pd, path.at(next), &guess, cfg) {
            Some(rep) => {
                chain.push(tag(rep, next));
                s = next;
                halvings = 0;
                h = (2.0 * h).min(nominal);
            }
            None => {
                if halvings == MAX_HALVINGS {
                    return Err(SolveError::HomotopyFailed {
                        parameter: next,
                        halvings,
                        partial: chain,
                    });
                }
                halvings += 1;
                h *= 0.5;
            }
        }
    }
    Ok(chain)
}

/// Pseudo-arclength continuation along `path` from a solution at parameter
/// 0. Follows the solution curve in `(u, s)` space, so it passes folds where
/// [`homotopy_track`] stalls. Every crossing of a grid value `k/steps` is
/// corrected at fixed parameter and kept, in the order met.
pub(crate) fn arclength_track(
    pd: &ProblemData,
    path: HomotopyPath,
    first: SolveReport,
    steps: usize,
    cfg: &SolverConfig,
) -> Result<Vec<SolveReport>, SolveError> {
    let fail = |parameter: f64, chain: Vec<SolveReport>| SolveError::HomotopyFailed {
        parameter,
        halvings: MAX_HALVINGS,
        partial: chain,
    };
    let n = first.solution.len();
    let nominal = 1.0 / steps as f64;
    let mut u = first.solution.values().to_vec();
    let mut s = 0.0_f64;
    let mut chain = vec![tag(first, 0.0)];
    let mut tangent = match arc_tangent(pd, path, &u, s, None) {
        Some(t) => t,
        None => return Err(fail(0.0, chain)),
    };
    let h_max = 4.0 * nominal * (1.0 + l2(&u));
    let mut h = nominal;
    for _ in 0..MAX_ARC_STEPS {
        let (v, t) = match arc_correct(pd, path, &u, s, &tangent, h, cfg) {
            Some(point) => point,
            None => {
                h *= 0.5;
                if h < 1e-10 * nominal {
                    return Err(fail(s, chain));
                }
                continue;
            }
        };
        // Grid values strictly between s and t, then t itself if it is one.
        let (lo, hi) = if t > s { (s, t) } else { (t, s) };
        let mut crossings: Vec<f64> = ((lo / nominal).floor() as i64 + 1
            ..=(hi / nominal).ceil() as i64)
            .map(|k| k as f64 * nominal)
            .filter(|&g| g > lo && g <= hi && (0.0..=1.0).contains(&g))
            .collect();
        crossings.retain(|g| (g - s).abs() >= 1e-12);
        if t < s {
            crossings.reverse();
        }
        let crossings_len = crossings.len();
        let mut found = Vec::new();
        for g in crossings {
            let w = (g - s) / (t - s);
            let guess: Vec<f64> = (0..n).map(|x| u[x] + w * (v[x] - u[x])).collect();
            match correct(
                pd,
                path.at(g),
                &VertexFunction::from_vec_unchecked(guess),
                cfg,
            ) {
                Some(rep) => found.push(tag(rep, g)),
                None => break,
            }
        }
        if found.len() < crossings_len {
            // A crossing too close to a fold for the interpolated guess;
            // retry with a shorter arc step.
            h *= 0.5;
            if h < 1e-10 * nominal {
                return Err(fail(s, chain));
            }
            continue;
        }
        let done = found.last().is_some_and(|r| r.parameter == Some(1.0));
        chain.extend(found);
        if done {
            return Ok(chain);
        }
        if t < -ARC_OVERSHOOT {
            return Err(fail(t, chain));
        }
        let Some(next) = arc_tangent(pd, path, &v, t, Some(&tangent)) else {
            return Err(fail(t, chain));
        };
        u = v;
        s = t;
        tangent = next;
        h = (1.5 * h).min(h_max);
    }
    Err(fail(s, chain))
}

const MAX_ARC_STEPS: usize = 20_000;
/// The curve may leave `[0, 1]` below 0 and turn back; it is followed that
/// far before giving up.
const ARC_OVERSHOOT: f64 = 1.0;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `[J  ∂R/∂s]` at `(u, s)`, one extra column.
fn extended_jacobian(pd: &ProblemData, path: HomotopyPath, u: &[f64], s: f64) -> DMatrix<f64> {
    let n = u.len();
    let jac = system(pd, path.at(s)).jacobian(u);
    let ds = path.parameter_derivative(pd, u);
    let mut ext = DMatrix::zeros(n + 1, n + 1);
    ext.view_mut((0, 0), (n, n)).copy_from(&jac);
    for x in 0..n {
        ext[(x, n)] = ds[x];
    }
    ext
}

/// Unit tangent of the solution curve, oriented along `previous` (or with
/// increasing parameter at the start).
fn arc_tangent(
    pd: &ProblemData,
    path: HomotopyPath,
    u: &[f64],
    s: f64,
    previous: Option<&DVector<f64>>,
) -> Option<DVector<f64>> {
    let n = u.len();
    let mut m = extended_jacobian(pd, path, u, s);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;
    match previous {
        Some(prev) => {
            for k in 0..=n {
                m[(n, k)] = prev[k];
            }
        }
        None => m[(n, n)] = 1.0,
    }
    let t = m.lu().solve(&rhs)?;
    let norm = t.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return None;
    }
    Some(t / norm)
}

/// Predictor `(u, s) + h·τ`, then Newton on `R(v, t) = 0` with the
/// hyperplane condition `τ·((v, t) - prediction) = 0`.
fn arc_correct(
    pd: &ProblemData,
    path: HomotopyPath,
    u: &[f64],
    s: f64,
    tangent: &DVector<f64>,
    h: f64,
    cfg: &SolverConfig,
) -> Option<(Vec<f64>, f64)> {
    let n = u.len();
    let predicted: Vec<f64> = (0..=n)
        .map(|k| if k < n { u[k] } else { s } + h * tangent[k])
        .collect();
    let mut z = predicted.clone();
    let mut r = vec![0.0; n];
    let tol = cfg.residual_tol.max(1e-12 * (1.0 + l2(u)));
    let mut last = f64::INFINITY;
    for _ in 0..ARC_NEWTON_ITERS {
        let family = path.at(z[n]);
        let sys = system(pd, family);
        sys.residual(&z[..n], &mut r);
        let res = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !res.is_finite() || res > 2.0 * last {
            return None;
        }
        if res <= tol {
            return Some((z[..n].to_vec(), z[n]));
        }
        last = res;
        let mut m = extended_jacobian(pd, path, &z[..n], z[n]);
        for k in 0..=n {
            m[(n, k)] = tangent[k];
        }
        let mut rhs = DVector::zeros(n + 1);
        for x in 0..n {
            rhs[x] = -r[x];
        }
        rhs[n] = -(0..=n)
            .map(|k| tangent[k] * (z[k] - predicted[k]))
            .sum::<f64>();
        let dz = m.lu().solve(&rhs)?;
        if !dz.iter().all(|v| v.is_finite()) {
            return None;
        }
        for k in 0..=n {
            z[k] += dz[k];
        }
    }
    None
}

const ARC_NEWTON_ITERS: usize = 12;
