//! Numerical estimate of the graph Poincaré constant
//! `sup { ∫|u|^p / ∫|∇u|^p : u on a hyperplane missing the constants }`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::operators::{gradient_p_energy_raw, p_laplacian_into};
use super::{Exponent, Graph, GraphError, VertexFunction};

/// Multiplier applied to the best ratio found; any upper bound is admissible
/// downstream, so over-estimating only loosens the bounds.
pub const POINCARE_SAFETY: f64 = 1.25;

const RANDOM_STARTS: usize = 12;
const MAX_INDICATOR_STARTS: usize = 12;
const MAX_ITERS: usize = 20_000;
const SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, PartialEq)]
pub enum PoincareMode {
    /// Functions with `ū = 0`.
    MeanZero,
    /// Functions with `ū_f = ∫ f u / ∫ f = 0`.
    FWeighted(VertexFunction),
}

/// Upper estimate `Ĉ` of the best constant in `∫|u|^p ≤ C ∫|∇u|^p`, found by
/// multistart projected gradient ascent on the Rayleigh-type quotient and
/// inflated by [`POINCARE_SAFETY`].
pub fn poincare_constant(
    g: &Graph,
    exponent: Exponent,
    mode: &PoincareMode,
) -> Result<f64, GraphError> {
    let n = g.vertex_count();
    let normal = match mode {
        PoincareMode::MeanZero => vec![1.0; n],
        PoincareMode::FWeighted(f) => {
            g.check_dim(f)?;
            if f.iter().sum::<f64>() == 0.0 {
                return Err(GraphError::DegenerateWeight);
            }
            f.values().to_vec()
        }
    };
    let problem = Quotient {
        g,
        exponent,
        normal_sq: normal.iter().map(|c| c * c).sum(),
        normal,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut starts: Vec<Vec<f64>> = (0..RANDOM_STARTS)
        .map(|_| {
            (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    for x in 0..n.min(MAX_INDICATOR_STARTS) {
        let mut e = vec![0.0; n];
        e[x] = 1.0;
        starts.push(e);
    }

    let mut best = 0.0_f64;
    let mut best_converged = false;
    for start in starts {
        let Some(outcome) = problem.ascend(start) else {
            continue;
        };
        if outcome.ratio > best {
            best = outcome.ratio;
            best_converged = outcome.converged;
        }
    }
    if !best_converged || best <= 0.0 {
        return Err(GraphError::PoincareNotConverged { best });
    }
    Ok(POINCARE_SAFETY * best)
}

struct Quotient<'a> {
    g: &'a Graph,
    exponent: Exponent,
    normal: Vec<f64>,
    normal_sq: f64,
}

struct Ascent {
    ratio: f64,
    converged: bool,
}

impl Quotient<'_> {
    fn project(&self, u: &mut [f64]) {
        let dot: f64 = u.iter().zip(&self.normal).map(|(a, b)| a * b).sum();
        let s = dot / self.normal_sq;
        u.iter_mut()
            .zip(&self.normal)
            .for_each(|(a, b)| *a -= s * b);
    }

    fn normalize(u: &mut [f64]) -> bool {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return false;
        }
        u.iter_mut().for_each(|v| *v /= norm);
        true
    }

    fn ratio(&self, u: &[f64]) -> f64 {
        let p = self.exponent.p();
        let num: f64 = u.iter().map(|v| v.abs().powf(p)).sum();
        let den = gradient_p_energy_raw(self.g, u, self.exponent);
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Projected gradient of the quotient at `u` (which has ratio `r`).
    fn gradient(&self, u: &[f64], r: f64, lap: &mut [f64]) -> Vec<f64> {
        let p = self.exponent.p();
        p_laplacian_into(self.g, u, self.exponent, lap);
        let den = gradient_p_energy_raw(self.g, u, self.exponent);
        let mut grad: Vec<f64> = u
            .iter()
            .zip(lap.iter())
            .map(|(&v, &l)| {
                let da = if v == 0.0 {
                    0.0
                } else {
                    p * v.signum() * v.abs().powf(p - 1.0)
                };
                // ∂/∂u ∫|∇u|^p = -p Δ_p u
                (da + r * p * l) / den
            })
            .collect();
        self.project(&mut grad);
        grad
    }

    fn ascend(&self, mut u: Vec<f64>) -> Option<Ascent> {
        let n = u.len();
        self.project(&mut u);
        if !Self::normalize(&mut u) {
            return None;
        }
        let mut lap = vec![0.0; n];
        let mut r = self.ratio(&u);
        let mut step = 1.0;
        let mut trial = vec![0.0; n];
        for _ in 0..MAX_ITERS {
            let grad = self.gradient(&u, r, &mut lap);
            let gnorm_sq: f64 = grad.iter().map(|v| v * v).sum();
            if gnorm_sq.sqrt() <= 1e-11 * r {
                return Some(Ascent {
                    ratio: r,
                    converged: true,
                });
            }
            let mut accepted = false;
            step *= 4.0;
            while step > 1e-18 {
                trial
                    .iter_mut()
                    .zip(u.iter().zip(&grad))
                    .for_each(|(t, (a, g))| *t = a + step * g);
                self.project(&mut trial);
                if Self::normalize(&mut trial) {
                    let rt = self.ratio(&trial);
                    if rt >= r + 1e-4 * step * gnorm_sq {
                        accepted = true;
                        let gain = rt - r;
                        std::mem::swap(&mut u, &mut trial);
                        r = rt;
                        if gain <= 1e-15 * r {
                            return Some(Ascent {
                                ratio: r,
                                converged: true,
                            });
                        }
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                // No ascent direction left at working precision: a (possibly
                // non-smooth) local maximum.
                return Some(Ascent {
                    ratio: r,
                    converged: true,
                });
            }
        }
        Some(Ascent {
            ratio: r,
            converged: false,
        })
    }
}
