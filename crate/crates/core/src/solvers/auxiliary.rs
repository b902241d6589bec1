use crate::graph::{Exponent, Graph, VertexFunction};

use super::engine::{Globalization, NewtonOptions, VertexSystem, VertexTerm};
use super::{sup, SolveError, SolverConfig};
use crate::graph::p_laplacian_into;

/// `v ↦ k_x v + c_x`.
pub(crate) struct Affine<'a> {
    pub k: &'a [f64],
    pub c: &'a [f64],
}

impl VertexTerm for Affine<'_> {
    fn value(&self, x: usize, v: f64) -> f64 {
        self.k[x] * v + self.c[x]
    }
    fn derivative(&self, x: usize, _v: f64) -> f64 {
        self.k[x]
    }
}

/// Minimizes `(1/p)∫|∇v|^p + (1/2)∫k v² + ∫c v` (optionally over mean-zero
/// `v`) by gradient descent with backtracking, then polishes the
/// Euler–Lagrange equation `-Δ_p v + k v + c = 0` with Newton.
pub(crate) fn convex_solve(
    g: &Graph,
    exponent: Exponent,
    k: &[f64],
    c: &[f64],
    mean_zero: bool,
    v0: Vec<f64>,
    tol: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>, (Vec<f64>, f64)> {
    let term = Affine { k, c };
    let mut system = VertexSystem::new(g, exponent, term);
    if mean_zero {
        system = system.with_mean(0.0);
    }
    let mut v = v0;
    if mean_zero {
        center(&mut v);
    }
    // Newton alone stalls at constants for p != 2, where the edge weights
    // vanish or blow up.
    if exponent.p() != 2.0 {
        v = descend(g, exponent, k, c, mean_zero, v, cfg);
    }
    let mut best = (v.clone(), system.residual_sup(&v));
    if best.1 <= tol {
        return Ok(v);
    }
    for globalization in [Globalization::Armijo, Globalization::TrustRegion] {
        let opts = NewtonOptions {
            tol,
            max_iters: cfg.max_inner_iters,
            shrink: cfg.line_search_shrink,
            globalization,
        };
        let out = system.solve(&best.0, &opts);
        if out.converged() {
            return Ok(out.u);
        }
        if out.residual < best.1 {
            best = (out.u, out.residual);
        }
    }
    Err(best)
}

fn energy(g: &Graph, exponent: Exponent, k: &[f64], c: &[f64], v: &[f64]) -> f64 {
    let p = exponent.p();
    let grad: f64 = g
        .edges()
        .iter()
        .map(|&(i, j)| (v[j] - v[i]).abs().powf(p))
        .sum();
    let rest: f64 = v
        .iter()
        .enumerate()
        .map(|(x, &w)| 0.5 * k[x] * w * w + c[x] * w)
        .sum();
    grad / p + rest
}

fn center(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|w| *w -= m);
}

/// Gradient descent on the convex energy; stops once the gradient is small
/// enough for a Newton polish to take over.
fn descend(
    g: &Graph,
    exponent: Exponent,
    k: &[f64],
    c: &[f64],
    mean_zero: bool,
    mut v: Vec<f64>,
    cfg: &SolverConfig,
) -> Vec<f64> {
    let n = v.len();
    let mut lap = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut e = energy(g, exponent, k, c, &v);
    let scale = 1.0 + sup(c);
    let mut step = 1.0;
    for _ in 0..cfg.max_inner_iters {
        p_laplacian_into(g, &v, exponent, &mut lap);
        for x in 0..n {
            grad[x] = -lap[x] + k[x] * v[x] + c[x];
        }
        if mean_zero {
            center(&mut grad);
        }
        let gsq: f64 = grad.iter().map(|d| d * d).sum();
        if sup(&grad) <= 1e-6 * scale {
            break;
        }
        step *= 2.0;
        let mut accepted = false;
        while step > 1e-14 {
            for x in 0..n {
                trial[x] = v[x] - step * grad[x];
            }
            let et = energy(g, exponent, k, c, &trial);
            if et <= e - 1e-4 * step * gsq {
                std::mem::swap(&mut v, &mut trial);
                e = et;
                accepted = true;
                break;
            }
            step *= cfg.line_search_shrink;
        }
        if !accepted {
            break;
        }
    }
    v
}

/// Mean-zero solution of `Δ_p v = ε(f - f̄)`.
pub fn solve_auxiliary(
    g: &Graph,
    f: &VertexFunction,
    eps: f64,
    exponent: Exponent,
    cfg: &SolverConfig,
) -> Result<VertexFunction, SolveError> {
    cfg.validate()?;
    g.check_dim(f)?;
    let n = g.vertex_count();
    let fbar = f.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = f.iter().map(|&fx| eps * (fx - fbar)).collect();
    if sup(&c) == 0.0 {
        return Ok(VertexFunction::zeros(n));
    }
    let k = vec![0.0; n];
    match convex_solve(
        g,
        exponent,
        &k,
        &c,
        true,
        vec![0.0; n],
        cfg.residual_tol,
        cfg,
    ) {
        Ok(v) => Ok(VertexFunction::from_vec_unchecked(v)),
        Err((best, residual)) => Err(SolveError::NotConverged {
            what: "auxiliary solve",
            residual,
            best: VertexFunction::from_vec_unchecked(best),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::p_laplacian;

    fn vf(v: &[f64]) -> VertexFunction {
        VertexFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn constant_source_gives_zero() {
        let g = Graph::path(4).unwrap();
        let v = solve_auxiliary(
            &g,
            &VertexFunction::constant(4, 3.0),
            0.5,
            Exponent::new(3.0).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(v.values(), &[0.0; 4]);
    }

    #[test]
    fn k2_linear_case() {
        let g = Graph::complete(2).unwrap();
        let v = solve_auxiliary(
            &g,
            &vf(&[1.0, -1.0]),
            1.0,
            Exponent::new(2.0).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((v[0] + 0.5).abs() < 1e-12 && (v[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn linear_in_eps_at_p2() {
        let g = Graph::cycle(5).unwrap();
        let f = vf(&[0.3, -1.0, 2.0, 0.1, 0.7]);
        let e = Exponent::new(2.0).unwrap();
        let cfg = SolverConfig::default();
        let v1 = solve_auxiliary(&g, &f, 0.25, e, &cfg).unwrap();
        let v2 = solve_auxiliary(&g, &f, 0.5, e, &cfg).unwrap();
        for x in 0..5 {
            assert!((v2[x] - 2.0 * v1[x]).abs() < 1e-10);
        }
    }

    #[test]
    fn residual_and_mean_for_several_exponents() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)]).unwrap();
        let f = vf(&[1.0, -0.4, 0.2, 0.9, -2.0]);
        let fbar = f.iter().sum::<f64>() / 5.0;
        for p in [1.5, 2.0, 3.0, 4.5] {
            let e = Exponent::new(p).unwrap();
            let v = solve_auxiliary(&g, &f, 0.1, e, &SolverConfig::default()).unwrap();
            let lap = p_laplacian(&g, &v, e).unwrap();
            for x in 0..5 {
                assert!((lap[x] - 0.1 * (f[x] - fbar)).abs() <= 1e-10, "p={p}");
            }
            assert!(v.iter().sum::<f64>().abs() < 1e-10);
        }
    }
}
