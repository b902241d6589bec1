#![allow(dead_code)]

use graph_csh::estimates::ProblemData;
use graph_csh::{Exponent, Graph, VertexFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LAMBDAS: [f64; 4] = [1.0, -1.0, 2.0, -2.0];
pub const EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];

pub struct Case {
    pub name: String,
    pub lambda: f64,
    pub p: f64,
    pub pd: ProblemData,
}

pub fn graphs() -> Vec<(String, Graph)> {
    let mut out = vec![
        ("K2".to_string(), Graph::complete(2).unwrap()),
        ("P3".to_string(), Graph::path(3).unwrap()),
        ("K3".to_string(), Graph::complete(3).unwrap()),
        ("C4".to_string(), Graph::cycle(4).unwrap()),
    ];
    for (seed, n) in [(1u64, 5usize), (2, 8), (3, 8)] {
        out.push((
            format!("R{n}s{seed}"),
            Graph::random_connected(n, 0.3, seed).unwrap(),
        ));
    }
    out
}

/// `f ≡ -sgn(λ)·(0.5 + jitter)` with per-vertex jitter uniform in `[-0.1, 0.1]`.
pub fn jittered_source(n: usize, lambda: f64, seed: u64) -> VertexFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n)
        .map(|_| -lambda.signum() * (0.5 + rng.random_range(-0.1..=0.1)))
        .collect();
    VertexFunction::new(values).unwrap()
}

/// Every graph × λ × p combination of the acceptance grid (84 cases).
pub fn grid() -> Vec<Case> {
    let mut cases = Vec::new();
    for (gi, (gname, g)) in graphs().into_iter().enumerate() {
        for (li, &lambda) in LAMBDAS.iter().enumerate() {
            let f = jittered_source(g.vertex_count(), lambda, (gi * 10 + li) as u64);
            for &p in &EXPONENTS {
                let pd = ProblemData::new(g.clone(), lambda, f.clone(), Exponent::new(p).unwrap())
                    .unwrap();
                cases.push(Case {
                    name: format!("{gname} λ={lambda} p={p}"),
                    lambda,
                    p,
                    pd,
                });
            }
        }
    }
    cases
}
