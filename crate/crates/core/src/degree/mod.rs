//! Jacobians of the p-Laplacian maps, their spectra and determinant signs,
//! and the Brouwer degree of `F(·, σ)` on a ball containing every solution.

mod search;

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::estimates::{EstimateError, ProblemData};
use crate::graph::{equal_value_threshold, Exponent, Graph, GraphError, VertexFunction};
use crate::solvers::engine::add_p_laplacian_jacobian;
use crate::solvers::{Family, SolveError};

pub use search::{global_degree, global_degree_for, DegreeReport};

/// Hadamard-scaled determinant below which a matrix counts as singular.
pub const REGULARITY_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, Error)]
pub enum DegreeError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("non-regular solution (scaled determinant {scaled_det:e})")]
    NonRegularMatrix { scaled_det: f64 },
    #[error(
        "degree undefined at regular-value level; perturb f \
         (e.g. f + 1e-8·noise): solution {solution} has scaled determinant {scaled_det:e}"
    )]
    NonRegularSolution {
        solution: VertexFunction,
        scaled_det: f64,
    },
    #[error("radius {radius} is below the a priori radius R0 = {r0}")]
    RadiusTooSmall { radius: f64, r0: f64 },
}

/// Dense Jacobian of one of the maps, with a note when equal-value edges
/// were dropped (`p < 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianMatrix {
    pub entries: DMatrix<f64>,
    pub regularization_note: Option<String>,
}

impl JacobianMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let m = &self.entries;
        (&m.transpose() - m)
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn max_row_sum(&self) -> f64 {
        self.entries
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0_f64, f64::max)
    }
}

/// `-∂Δ_p u/∂u`: the graph Laplacian with edge weights `(p-1)|u(y)-u(x)|^(p-2)`.
pub fn jacobian_p_laplacian(
    g: &Graph,
    u: &VertexFunction,
    exponent: Exponent,
) -> Result<JacobianMatrix, GraphError> {
    g.check_dim(u)?;
    let n = g.vertex_count();
    let mut entries = DMatrix::zeros(n, n);
    let excluded = add_p_laplacian_jacobian(g, u, exponent, &mut entries);
    let regularization_note = (excluded > 0).then(|| {
        format!(
            "{excluded} equal-value edge(s) dropped (|u(y)-u(x)| <= {:e})",
            equal_value_threshold(u)
        )
    });
    Ok(JacobianMatrix {
        entries,
        regularization_note,
    })
}

fn with_diagonal(
    g: &Graph,
    u: &VertexFunction,
    exponent: Exponent,
    diag: impl Fn(f64) -> f64,
) -> Result<JacobianMatrix, GraphError> {
    let mut jac = jacobian_p_laplacian(g, u, exponent)?;
    for (x, &v) in u.iter().enumerate() {
        jac.entries[(x, x)] += diag(v);
    }
    Ok(jac)
}

/// Jacobian of `F(u, σ) = -Δ_p u + λ e^u (e^u - σ) + f`.
pub fn jacobian_f(
    g: &Graph,
    u: &VertexFunction,
    lambda: f64,
    sigma: f64,
    exponent: Exponent,
) -> Result<JacobianMatrix, GraphError> {
    with_diagonal(g, u, exponent, |v| {
        let e = v.exp();
        lambda * e * (2.0 * e - sigma)
    })
}

/// Jacobian of `G_ε(u, t) = -Δ_p u + λ e^{2u} + (t + (1-t)ε) f` (independent
/// of `ε` and `t`).
pub fn jacobian_g(
    g: &Graph,
    u: &VertexFunction,
    lambda: f64,
    exponent: Exponent,
) -> Result<JacobianMatrix, GraphError> {
    with_diagonal(g, u, exponent, |v| 2.0 * lambda * (2.0 * v).exp())
}

pub(crate) fn jacobian_family(
    pd: &ProblemData,
    family: Family,
    u: &VertexFunction,
) -> JacobianMatrix {
    let res = match family {
        Family::F { sigma } => jacobian_f(pd.graph(), u, pd.lambda(), sigma, pd.exponent()),
        Family::G { .. } => jacobian_g(pd.graph(), u, pd.lambda(), pd.exponent()),
    };
    res.expect("dimension checked by caller")
}

/// Eigenvalues in ascending order.
pub fn spectrum(m: &JacobianMatrix) -> Vec<f64> {
    let mut eig: Vec<f64> = SymmetricEigen::new(m.entries.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Sign and Hadamard ratio `|det| / Π‖row_i‖₂ ∈ [0, 1]` from Gaussian
/// elimination with partial pivoting.
pub(crate) fn determinant_sign(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    if n == 0 {
        return (1.0, 1.0);
    }
    let mut a = m.clone();
    let mut log_ratio = -m.row_iter().map(|r| r.norm().ln()).sum::<f64>();
    if !log_ratio.is_finite() {
        return (0.0, 0.0);
    }
    let mut sign = 1.0;
    for k in 0..n {
        let (offset, pivot_abs) =
            a.view((k, k), (n - k, 1))
                .iter()
                .enumerate()
                .fold((0, -1.0), |best, (i, v)| {
                    if v.abs() > best.1 {
                        (i, v.abs())
                    } else {
                        best
                    }
                });
        if pivot_abs == 0.0 {
            return (0.0, 0.0);
        }
        let p = k + offset;
        if p != k {
            a.swap_rows(p, k);
            sign = -sign;
        }
        let pivot = a[(k, k)];
        if pivot < 0.0 {
            sign = -sign;
        }
        log_ratio += pivot_abs.ln();
        for i in k + 1..n {
            let factor = a[(i, k)] / pivot;
            if factor != 0.0 {
                for j in k + 1..n {
                    a[(i, j)] -= factor * a[(k, j)];
                }
            }
        }
    }
    (sign, log_ratio.exp().min(1.0))
}

/// For `p < 2`, merges the endpoints of equal-value edges and returns
/// `Pᵀ m P`, where `P` maps merged vertices back to the originals. Such an
/// edge has infinite stiffness, which only adds a positive definite block, so
/// the determinant sign of the result is the local index of the map at `u`.
/// Returns `m` unchanged when no edge is merged.
pub fn contract_equal_values(
    g: &Graph,
    u: &VertexFunction,
    exponent: Exponent,
    m: &DMatrix<f64>,
) -> DMatrix<f64> {
    if exponent.p() >= 2.0 {
        return m.clone();
    }
    let tau = equal_value_threshold(u);
    let n = g.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merged = false;
    for &(i, j) in g.edges() {
        if (u[j] - u[i]).abs() <= tau {
            let (a, b) = (root(&mut parent, i), root(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
                merged = true;
            }
        }
    }
    if !merged {
        return m.clone();
    }
    let mut class = vec![usize::MAX; n];
    let mut k = 0;
    for x in 0..n {
        let r = root(&mut parent, x);
        if class[r] == usize::MAX {
            class[r] = k;
            k += 1;
        }
        class[x] = class[r];
    }
    let mut out = DMatrix::zeros(k, k);
    for x in 0..n {
        for y in 0..n {
            out[(class[x], class[y])] += m[(x, y)];
        }
    }
    out
}

/// `sgn(det m) · (|det m| / Π‖row_i‖₂)`.
pub fn scaled_determinant(m: &DMatrix<f64>) -> f64 {
    let (sign, ratio) = determinant_sign(m);
    sign * ratio
}

/// `sgn det m`, refusing matrices whose Hadamard-scaled determinant is below
/// [`REGULARITY_THRESHOLD`].
pub fn local_degree(m: &JacobianMatrix) -> Result<i32, DegreeError> {
    let (sign, ratio) = determinant_sign(&m.entries);
    if ratio < REGULARITY_THRESHOLD {
        return Err(DegreeError::NonRegularMatrix { scaled_det: ratio });
    }
    Ok(if sign > 0.0 { 1 } else { -1 })
}

/// `λ_1 - 2|λ| max_x e^{2u(x)}`, where `λ_1` is the second-smallest eigenvalue
/// of the linearized p-Laplacian at `u`.
pub fn spectral_gap_check(
    g: &Graph,
    u_eps: &VertexFunction,
    lambda: f64,
    exponent: Exponent,
) -> Result<f64, GraphError> {
    let jac = jacobian_p_laplacian(g, u_eps, exponent)?;
    let eig = spectrum(&jac);
    let lambda1 = eig.get(1).copied().unwrap_or(0.0);
    let peak = u_eps
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max((2.0 * v).exp()));
    Ok(lambda1 - 2.0 * lambda.abs() * peak)
}
