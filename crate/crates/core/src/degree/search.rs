use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::estimates::{compute_bounds, AprioriBounds, ProblemData};
use crate::graph::VertexFunction;
use crate::solvers::engine::{Globalization, NewtonOptions};
use crate::solvers::{newton::system, solve_csh, Family, SolverConfig};

use super::{
    contract_equal_values, determinant_sign, jacobian_family, spectral_gap_check, DegreeError,
    REGULARITY_THRESHOLD,
};

/// Solutions closer than this in sup norm are merged.
const DEDUP_TOL: f64 = 1e-6;
/// Offsets applied to one vertex of a known solution to reach neighboring
/// solutions.
const OFFSETS: [f64; 8] = [-2.0, -0.8, -0.3, -0.1, 0.1, 0.3, 0.8, 2.0];
const SEARCH_ITERS: usize = 60;
/// Extra room around the hull of known solutions for random starts.
const HULL_MARGIN: f64 = 1.0;
/// Consecutive fruitless random batches that end the search.
const QUIET_BATCHES: usize = 3;

fn n_factor(n: usize) -> usize {
    n.max(1)
}

/// Hard cap on Newton runs per degree computation.
const MAX_RUNS: usize = 400_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    #[serde(rename = "radius_R")]
    pub radius: f64,
    pub family: Family,
    pub solutions: Vec<VertexFunction>,
    pub local_signs: Vec<i32>,
    pub degree: i32,
    /// `λ_1 - 2|λ| max e^{2u}` at each solution.
    pub spectral_gaps: Vec<f64>,
    pub matches_sgn_lambda: bool,
    /// Newton runs spent on the search.
    pub newton_runs: usize,
}

struct Search<'a> {
    pd: &'a ProblemData,
    family: Family,
    radius: f64,
    opts: NewtonOptions,
    found: Vec<Vec<f64>>,
    queue: VecDeque<usize>,
    runs: usize,
}

impl Search<'_> {
    /// Runs Newton from `u0`; returns true if a new solution was recorded.
    fn attempt(&mut self, u0: &[f64]) -> bool {
        self.runs += 1;
        let out = system(self.pd, self.family).solve(u0, &self.opts);
        if !out.converged() || out.u.iter().any(|v| v.abs() > self.radius) {
            return false;
        }
        let u = out.u;
        if self
            .found
            .iter()
            .any(|s| s.iter().zip(&u).all(|(a, b)| (a - b).abs() < DEDUP_TOL))
        {
            return false;
        }
        self.found.push(u);
        self.queue.push_back(self.found.len() - 1);
        true
    }

    /// Moves one vertex of each queued solution at a time: by each of
    /// [`OFFSETS`], and to the solution's largest and smallest value.
    fn explore(&mut self) {
        while let Some(idx) = self.queue.pop_front() {
            let base = self.found[idx].clone();
            let top = base.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let bottom = base.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            for x in 0..base.len() {
                let targets = OFFSETS.iter().map(|d| base[x] + d).chain([top, bottom]);
                for target in targets {
                    if self.runs >= MAX_RUNS {
                        return;
                    }
                    if target == base[x] {
                        continue;
                    }
                    let mut u0 = base.clone();
                    u0[x] = target;
                    self.attempt(&u0);
                }
            }
        }
    }

    /// Uniform starts, alternating between the a priori box and the box
    /// spanned by the solutions found so far (widened by [`HULL_MARGIN`]).
    fn random_batch(
        &mut self,
        rng: &mut ChaCha8Rng,
        bounds: &AprioriBounds,
        count: usize,
    ) -> usize {
        let n = self.pd.vertex_count();
        let before = self.found.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for u in &self.found {
            for &v in u {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let hull = (lo - HULL_MARGIN).max(bounds.lower)..=(hi + HULL_MARGIN).min(bounds.upper);
        for i in 0..count {
            let range = if i % 2 == 1 && lo <= hi {
                hull.clone()
            } else {
                bounds.lower..=bounds.upper
            };
            let u0: Vec<f64> = (0..n).map(|_| rng.random_range(range.clone())).collect();
            self.attempt(&u0);
        }
        self.found.len() - before
    }
}

/// Brouwer degree of `F(·, 1)` on the ball of radius `radius`.
pub fn global_degree(
    pd: &ProblemData,
    radius: f64,
    cfg: &SolverConfig,
) -> Result<DegreeReport, DegreeError> {
    global_degree_for(pd, Family::TARGET, radius, cfg)
}

/// Brouwer degree of the selected map on the sup-norm ball of radius
/// `radius`, as the sum of `sgn det` over all solutions found.
///
/// Solutions are collected from the pipeline solution, uniform random starts
/// in the a priori box, and single-vertex perturbations of every solution
/// found. The search stops once several consecutive batches of random
/// starts, each followed by a full exploration pass, add nothing new.
/// Completeness is heuristic.
pub fn global_degree_for(
    pd: &ProblemData,
    family: Family,
    radius: f64,
    cfg: &SolverConfig,
) -> Result<DegreeReport, DegreeError> {
    cfg.validate()?;
    let bounds = compute_bounds(pd)?;
    if !(radius >= bounds.r0) {
        return Err(DegreeError::RadiusTooSmall {
            radius,
            r0: bounds.r0,
        });
    }
    let mut search = Search {
        pd,
        family,
        radius,
        opts: NewtonOptions {
            tol: cfg.residual_tol,
            max_iters: SEARCH_ITERS,
            shrink: cfg.line_search_shrink,
            globalization: Globalization::TrustRegion,
        },
        found: Vec::new(),
        queue: VecDeque::new(),
        runs: 0,
    };
    if let Ok(rep) = solve_csh(pd, cfg) {
        search.attempt(rep.solution.values());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    search.random_batch(&mut rng, &bounds, cfg.multistart_count);
    let batch = cfg.multistart_count.max(1) * n_factor(pd.vertex_count());
    let mut quiet = 0;
    while quiet < QUIET_BATCHES && search.runs < MAX_RUNS {
        search.explore();
        if search.random_batch(&mut rng, &bounds, batch) == 0 {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }

    // Deterministic order independent of discovery order.
    search.found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut solutions = Vec::with_capacity(search.found.len());
    let mut local_signs = Vec::with_capacity(search.found.len());
    let mut spectral_gaps = Vec::with_capacity(search.found.len());
    for u in search.found {
        let u = VertexFunction::from_vec_unchecked(u);
        let jac = jacobian_family(pd, family, &u);
        let reduced = contract_equal_values(pd.graph(), &u, pd.exponent(), &jac.entries);
        let (sign, ratio) = determinant_sign(&reduced);
        if ratio < REGULARITY_THRESHOLD {
            return Err(DegreeError::NonRegularSolution {
                solution: u,
                scaled_det: ratio,
            });
        }
        local_signs.push(if sign > 0.0 { 1 } else { -1 });
        spectral_gaps.push(spectral_gap_check(
            pd.graph(),
            &u,
            pd.lambda(),
            pd.exponent(),
        )?);
        solutions.push(u);
    }
    let degree = local_signs.iter().sum();
    let sgn_lambda = if pd.lambda() > 0.0 { 1 } else { -1 };
    Ok(DegreeReport {
        radius,
        family,
        solutions,
        local_signs,
        degree,
        spectral_gaps,
        matches_sgn_lambda: degree == sgn_lambda,
        newton_runs: search.runs,
    })
}
