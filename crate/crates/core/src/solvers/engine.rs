//! Newton iteration for vertex systems `R(u) = -Δ_p u + N(u) = 0`, where
//! `N` acts vertex by vertex.
//!
//! For `p ≥ 2` the iteration runs on `u` directly. For `1 < p < 2` the edge
//! flux `s_e = |d_e|^(p-2) d_e` has infinite slope at `d_e = 0`, which makes
//! plain Newton cycle on solutions with nearly equal neighbor values. There
//! the unknowns are extended by one flux per edge and the system
//!
//! ```text
//! Bᵀ s + N(u) = 0,     |s_e|^(q-2) s_e - (B u)_e = 0
//! ```
//!
//! is solved instead (`B` is the edge–vertex incidence matrix, `q` the
//! conjugate exponent). Its inverse flux map is C¹, and eliminating `s`
//! gives back the Jacobian of `R`, so the two forms share solutions and
//! orientation.

use nalgebra::{DMatrix, DVector};

use crate::graph::{edge_flux, equal_value_threshold, Exponent, Graph};

/// Vertex-wise nonlinearity `N_x(u_x)`.
pub(crate) trait VertexTerm {
    fn value(&self, x: usize, u: f64) -> f64;
    fn derivative(&self, x: usize, u: f64) -> f64;
}

impl<T: VertexTerm + ?Sized> VertexTerm for &T {
    fn value(&self, x: usize, u: f64) -> f64 {
        (**self).value(x, u)
    }
    fn derivative(&self, x: usize, u: f64) -> f64 {
        (**self).derivative(x, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Globalization {
    /// Backtracking on `‖r‖²` with Armijo constant `1e-4`.
    Armijo,
    /// Powell dogleg trust region on `‖r‖²`.
    TrustRegion,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub shrink: f64,
    pub globalization: Globalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NewtonFailure {
    Singular,
    Stalled,
    IterationCap,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    /// Sup norm of `-Δ_p u + N(u)` at `u`.
    pub residual: f64,
    pub iterations: usize,
    pub failure: Option<NewtonFailure>,
    pub trace: Vec<(usize, f64)>,
}

impl NewtonOutcome {
    pub fn converged(&self) -> bool {
        self.failure.is_none()
    }
}

/// `-Δ_p u + N(u)`, optionally with the side condition `mean(u) = target`
/// (handled by a bordering multiplier that vanishes at solutions).
pub(crate) struct VertexSystem<'a, T> {
    pub graph: &'a Graph,
    pub exponent: Exponent,
    pub term: T,
    pub mean: Option<f64>,
}

const FLUX_SLOPE_FLOOR: f64 = 1e-10;

impl<'a, T: VertexTerm> VertexSystem<'a, T> {
    pub fn new(graph: &'a Graph, exponent: Exponent, term: T) -> Self {
        VertexSystem {
            graph,
            exponent,
            term,
            mean: None,
        }
    }

    pub fn with_mean(mut self, mean: f64) -> Self {
        self.mean = Some(mean);
        self
    }

    fn n(&self) -> usize {
        self.graph.vertex_count()
    }

    fn flux_form(&self) -> bool {
        self.exponent.is_singular()
    }

    /// `-Δ_p u + N(u)` in the original variables.
    pub fn residual(&self, u: &[f64], out: &mut [f64]) {
        for (x, r) in out.iter_mut().enumerate() {
            *r = self.term.value(x, u[x]);
        }
        for &(i, j) in self.graph.edges() {
            let s = edge_flux(u[j] - u[i], self.exponent);
            out[i] -= s;
            out[j] += s;
        }
    }

    pub fn residual_sup(&self, u: &[f64]) -> f64 {
        let mut r = vec![0.0; self.n()];
        self.residual(u, &mut r);
        let mut sup = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !sup.is_finite() {
            sup = f64::INFINITY;
        }
        if let Some(target) = self.mean {
            let mean = u.iter().sum::<f64>() / u.len() as f64;
            sup = sup.max((mean - target).abs());
        }
        sup
    }

    /// Jacobian of `-Δ_p u + N(u)` with the equal-value exclusion for `p < 2`.
    pub fn jacobian(&self, u: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut jac = DMatrix::zeros(n, n);
        add_p_laplacian_jacobian(self.graph, u, self.exponent, &mut jac);
        for x in 0..n {
            jac[(x, x)] += self.term.derivative(x, u[x]);
        }
        jac
    }

    fn dim(&self) -> usize {
        let mut d = self.n();
        if self.flux_form() {
            d += self.graph.edge_count();
        }
        if self.mean.is_some() {
            d += 1;
        }
        d
    }

    fn lift(&self, u: &[f64]) -> Vec<f64> {
        let mut state = u.to_vec();
        if self.flux_form() {
            state.extend(
                self.graph
                    .edges()
                    .iter()
                    .map(|&(i, j)| edge_flux(u[j] - u[i], self.exponent)),
            );
        }
        if self.mean.is_some() {
            state.push(0.0);
        }
        state
    }

    /// Residual of the (possibly extended) system.
    fn state_residual(&self, state: &[f64], out: &mut [f64]) {
        let n = self.n();
        let u = &state[..n];
        if self.flux_form() {
            let m = self.graph.edge_count();
            let s = &state[n..n + m];
            let q = self.exponent.q();
            for (x, r) in out[..n].iter_mut().enumerate() {
                *r = self.term.value(x, u[x]);
            }
            for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
                out[i] -= s[e];
                out[j] += s[e];
                out[n + e] = signed_pow(s[e], q - 1.0) - (u[j] - u[i]);
            }
        } else {
            self.residual(u, &mut out[..n]);
        }
        if let Some(target) = self.mean {
            let last = state.len() - 1;
            let mu = state[last];
            out[..n].iter_mut().for_each(|r| *r += mu);
            out[last] = u.iter().sum::<f64>() / n as f64 - target;
        }
    }

    fn state_jacobian(&self, state: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let d = self.dim();
        let mut jac = DMatrix::zeros(d, d);
        let u = &state[..n];
        if self.flux_form() {
            let q = self.exponent.q();
            for x in 0..n {
                jac[(x, x)] = self.term.derivative(x, u[x]);
            }
            for (e, &(i, j)) in self.graph.edges().iter().enumerate() {
                let s = state[n + e];
                jac[(i, n + e)] = -1.0;
                jac[(j, n + e)] = 1.0;
                jac[(n + e, i)] = 1.0;
                jac[(n + e, j)] = -1.0;
                let slope = (q - 1.0) * s.abs().powf(q - 2.0);
                jac[(n + e, n + e)] = slope.max(FLUX_SLOPE_FLOOR);
            }
        } else {
            add_p_laplacian_jacobian(self.graph, u, self.exponent, &mut jac);
            for x in 0..n {
                jac[(x, x)] += self.term.derivative(x, u[x]);
            }
        }
        if self.mean.is_some() {
            let last = d - 1;
            for x in 0..n {
                jac[(x, last)] = 1.0;
                jac[(last, x)] = 1.0 / n as f64;
            }
        }
        jac
    }

    pub fn solve(&self, u0: &[f64], opts: &NewtonOptions) -> NewtonOutcome {
        let n = self.n();
        let d = self.dim();
        let mut state = self.lift(u0);
        let mut r = vec![0.0; d];
        self.state_residual(&state, &mut r);
        let mut merit = norm_sq(&r);
        let mut trace = Vec::new();
        let mut radius = 1.0_f64.max(0.1 * l2(&state[..n]));
        let mut trial = vec![0.0; d];
        let mut r_trial = vec![0.0; d];

        let finish = |state: &[f64], iterations, failure, trace| {
            let u = state[..n].to_vec();
            let residual = self.residual_sup(&u);
            NewtonOutcome {
                u,
                residual,
                iterations,
                failure,
                trace,
            }
        };

        for it in 0..=opts.max_iters {
            let true_res = self.residual_sup(&state[..n]);
            trace.push((it, true_res));
            if true_res <= opts.tol {
                return finish(&state, it, None, trace);
            }
            if it == opts.max_iters {
                break;
            }
            if !merit.is_finite() {
                return finish(&state, it, Some(NewtonFailure::Stalled), trace);
            }
            let jac = self.state_jacobian(&state);
            let rhs = DVector::from_iterator(d, r.iter().map(|v| -v));
            let newton = jac
                .clone()
                .lu()
                .solve(&rhs)
                .filter(|s| s.iter().all(|v| v.is_finite()));

            match opts.globalization {
                Globalization::Armijo => {
                    let Some(step) = newton else {
                        return finish(&state, it, Some(NewtonFailure::Singular), trace);
                    };
                    let mut t = 1.0;
                    loop {
                        for k in 0..d {
                            trial[k] = state[k] + t * step[k];
                        }
                        self.state_residual(&trial, &mut r_trial);
                        let m = norm_sq(&r_trial);
                        if m.is_finite() && m <= (1.0 - 2e-4 * t) * merit {
                            std::mem::swap(&mut state, &mut trial);
                            std::mem::swap(&mut r, &mut r_trial);
                            merit = m;
                            break;
                        }
                        t *= opts.shrink;
                        if t < 1e-10 {
                            return finish(&state, it, Some(NewtonFailure::Stalled), trace);
                        }
                    }
                }
                Globalization::TrustRegion => {
                    let r_vec = DVector::from_column_slice(&r);
                    let grad = jac.transpose() * &r_vec;
                    let accepted = loop {
                        let step = dogleg(&jac, &grad, newton.as_ref(), radius);
                        let step_norm = step.norm();
                        let predicted = merit - (&r_vec + &jac * &step).norm_squared();
                        for k in 0..d {
                            trial[k] = state[k] + step[k];
                        }
                        self.state_residual(&trial, &mut r_trial);
                        let m = norm_sq(&r_trial);
                        let ratio = if m.is_finite() && predicted > 0.0 {
                            (merit - m) / predicted
                        } else {
                            -1.0
                        };
                        if ratio < 0.25 {
                            radius = 0.25 * step_norm.min(radius);
                        } else if ratio > 0.75 && step_norm >= 0.99 * radius {
                            radius = (2.0 * radius).min(1e3);
                        }
                        if ratio > 1e-4 {
                            break Some(m);
                        }
                        if !(radius.is_finite() && radius >= 1e-13 * (1.0 + l2(&state))) {
                            break None;
                        }
                    };
                    let Some(m) = accepted else {
                        return finish(&state, it, Some(NewtonFailure::Stalled), trace);
                    };
                    std::mem::swap(&mut state, &mut trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    merit = m;
                }
            }
        }
        finish(
            &state,
            opts.max_iters,
            Some(NewtonFailure::IterationCap),
            trace,
        )
    }
}

fn dogleg(
    jac: &DMatrix<f64>,
    grad: &DVector<f64>,
    newton: Option<&DVector<f64>>,
    radius: f64,
) -> DVector<f64> {
    if let Some(step) = newton {
        if step.norm() <= radius {
            return step.clone();
        }
    }
    let g_norm = grad.norm();
    if g_norm == 0.0 {
        return DVector::zeros(grad.len());
    }
    let jg = jac * grad;
    let jg_sq = jg.norm_squared();
    let cauchy = if jg_sq > 0.0 {
        grad * (-(g_norm * g_norm) / jg_sq)
    } else {
        grad * (-radius / g_norm)
    };
    let c_norm = cauchy.norm();
    let Some(step) = newton else {
        return if c_norm <= radius {
            cauchy
        } else {
            cauchy * (radius / c_norm)
        };
    };
    if c_norm >= radius {
        return grad * (-radius / g_norm);
    }
    // cauchy + t (newton - cauchy) with |.| = radius
    let diff = step - &cauchy;
    let a = diff.norm_squared();
    let b = 2.0 * cauchy.dot(&diff);
    let c = c_norm * c_norm - radius * radius;
    let t = (-b + (b * b - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a);
    cauchy + diff * t
}

/// Adds `-∂Δ_p u/∂u` (a weighted graph Laplacian with weights
/// `(p-1)|u(y)-u(x)|^(p-2)`) to the leading block of `jac`.
pub(crate) fn add_p_laplacian_jacobian(
    g: &Graph,
    u: &[f64],
    exponent: Exponent,
    jac: &mut DMatrix<f64>,
) -> usize {
    let tau = equal_value_threshold(u);
    let mut excluded = 0;
    for &(i, j) in g.edges() {
        let Some(w) = edge_weight(u[j] - u[i], exponent, tau) else {
            excluded += 1;
            continue;
        };
        jac[(i, i)] += w;
        jac[(j, j)] += w;
        jac[(i, j)] -= w;
        jac[(j, i)] -= w;
    }
    excluded
}

/// `(p-1)|d|^(p-2)`; `None` for an excluded equal-value edge when `p < 2`.
pub(crate) fn edge_weight(d: f64, exponent: Exponent, tau: f64) -> Option<f64> {
    let p = exponent.p();
    if p == 2.0 {
        Some(1.0)
    } else if p < 2.0 {
        (d.abs() > tau).then(|| (p - 1.0) * d.abs().powf(p - 2.0))
    } else if d == 0.0 {
        Some(0.0)
    } else {
        Some((p - 1.0) * d.abs().powf(p - 2.0))
    }
}

fn signed_pow(s: f64, e: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(e)
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn l2(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Linear {
        k: Vec<f64>,
        rhs: Vec<f64>,
    }

    impl VertexTerm for Linear {
        fn value(&self, x: usize, u: f64) -> f64 {
            self.k[x] * u + self.rhs[x]
        }
        fn derivative(&self, x: usize, _u: f64) -> f64 {
            self.k[x]
        }
    }

    fn opts(globalization: Globalization) -> NewtonOptions {
        NewtonOptions {
            tol: 1e-12,
            max_iters: 100,
            shrink: 0.5,
            globalization,
        }
    }

    #[test]
    fn linear_system_in_one_step() {
        // -Δw + 2w + (1, -1) = 0 on K2  ⇔  [[3,-1],[-1,3]] w = (-1, 1)
        let g = Graph::complete(2).unwrap();
        let term = Linear {
            k: vec![2.0, 2.0],
            rhs: vec![1.0, -1.0],
        };
        let sys = VertexSystem::new(&g, Exponent::new(2.0).unwrap(), term);
        let out = sys.solve(&[0.0, 0.0], &opts(Globalization::Armijo));
        assert!(out.converged());
        assert_eq!(out.iterations, 1);
        assert!((out.u[0] + 0.25).abs() < 1e-14 && (out.u[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn flux_form_handles_small_differences() {
        let g = Graph::cycle(4).unwrap();
        let e = Exponent::new(1.5).unwrap();
        for glob in [Globalization::Armijo, Globalization::TrustRegion] {
            let term = Linear {
                k: vec![1.0; 4],
                rhs: vec![1e-3, -2e-3, 0.5e-3, 0.5e-3],
            };
            let sys = VertexSystem::new(&g, e, term);
            let out = sys.solve(&[0.3, -0.2, 0.1, 0.0], &opts(glob));
            assert!(out.converged(), "{glob:?}: {:?}", out.failure);
            assert!(sys.residual_sup(&out.u) <= 1e-12);
        }
    }

    #[test]
    fn mean_constraint_pins_the_kernel() {
        // -Δ_p v + (1, -1) = 0 with mean zero on K2: v = (-0.5, 0.5)
        let g = Graph::complete(2).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let term = Linear {
                k: vec![0.0; 2],
                rhs: vec![1.0, -1.0],
            };
            let sys = VertexSystem::new(&g, Exponent::new(p).unwrap(), term).with_mean(0.0);
            let out = sys.solve(&[0.0, 0.1], &opts(Globalization::Armijo));
            assert!(out.converged(), "p={p}: {:?}", out.failure);
            // |d|^(p-2) d = 1 with d = v1 - v0 > 0 ⇒ d = 1
            assert!((out.u[0] + 0.5).abs() < 1e-10 && (out.u[1] - 0.5).abs() < 1e-10);
        }
    }
}
