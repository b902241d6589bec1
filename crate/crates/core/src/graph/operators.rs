use super::{Exponent, Graph, GraphError, VertexFunction};

/// Differences at or below this size count as "equal neighbor values" when
/// `p < 2`; those edges are dropped from the Jacobian, whose weight
/// `|d|^(p-2)` blows up there.
pub fn equal_value_threshold(u: &[f64]) -> f64 {
    let sup = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    1e-12 * (1.0 + sup)
}

/// `|d|^(p-2) d`, the flux carried by an edge with difference `d`, extended
/// by continuity with 0 at `d = 0`.
#[inline]
pub fn edge_flux(d: f64, exponent: Exponent) -> f64 {
    let p = exponent.p();
    if p == 2.0 {
        d
    } else if d == 0.0 {
        0.0
    } else {
        d.signum() * d.abs().powf(p - 1.0)
    }
}

pub(crate) fn p_laplacian_into(g: &Graph, u: &[f64], exponent: Exponent, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &(i, j) in g.edges() {
        let flux = edge_flux(u[j] - u[i], exponent);
        out[i] += flux;
        out[j] -= flux;
    }
}

/// `Δ_p u(x) = Σ_{y~x} |u(y)-u(x)|^(p-2) (u(y)-u(x))`.
pub fn p_laplacian(
    g: &Graph,
    u: &VertexFunction,
    exponent: Exponent,
) -> Result<VertexFunction, GraphError> {
    g.check_dim(u)?;
    let mut out = vec![0.0; g.vertex_count()];
    // Accumulate per vertex in neighbor order so each entry is an ordered
    // sum over its own neighborhood.
    for (x, slot) in out.iter_mut().enumerate() {
        *slot = g
            .neighbors(x)
            .iter()
            .map(|&y| edge_flux(u[y] - u[x], exponent))
            .sum();
    }
    Ok(VertexFunction::from_vec_unchecked(out))
}

/// `∫|∇u|^p = (1/2) Σ_x Σ_{y~x} |u(y)-u(x)|^p`, i.e. one term per edge.
pub fn gradient_p_energy(
    g: &Graph,
    u: &VertexFunction,
    exponent: Exponent,
) -> Result<f64, GraphError> {
    g.check_dim(u)?;
    Ok(gradient_p_energy_raw(g, u, exponent))
}

pub(crate) fn gradient_p_energy_raw(g: &Graph, u: &[f64], exponent: Exponent) -> f64 {
    let p = exponent.p();
    g.edges()
        .iter()
        .map(|&(i, j)| (u[j] - u[i]).abs().powf(p))
        .sum()
}

pub fn integral(g: &Graph, u: &VertexFunction) -> Result<f64, GraphError> {
    g.check_dim(u)?;
    Ok(u.iter().sum())
}

pub fn mean(g: &Graph, u: &VertexFunction) -> Result<f64, GraphError> {
    Ok(integral(g, u)? / g.vertex_count() as f64)
}

/// `ū_f = ∫ f u / ∫ f`.
pub fn f_weighted_mean(
    g: &Graph,
    u: &VertexFunction,
    f: &VertexFunction,
) -> Result<f64, GraphError> {
    g.check_dim(u)?;
    g.check_dim(f)?;
    let weight: f64 = f.iter().sum();
    if weight == 0.0 {
        return Err(GraphError::DegenerateWeight);
    }
    let weighted: f64 = f.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
    Ok(weighted / weight)
}

/// `∫ v Δ_p u + (1/2) Σ_x Σ_{y~x} |u(y)-u(x)|^(p-2) (u(y)-u(x)) (v(y)-v(x))`,
/// which vanishes identically (summation by parts).
pub fn integration_by_parts_check(
    g: &Graph,
    u: &VertexFunction,
    v: &VertexFunction,
    exponent: Exponent,
) -> Result<f64, GraphError> {
    g.check_dim(v)?;
    let lap = p_laplacian(g, u, exponent)?;
    let volume: f64 = v.iter().zip(lap.iter()).map(|(a, b)| a * b).sum();
    let mut dirichlet = 0.0;
    for x in 0..g.vertex_count() {
        for &y in g.neighbors(x) {
            dirichlet += edge_flux(u[y] - u[x], exponent) * (v[y] - v[x]);
        }
    }
    Ok(volume + 0.5 * dirichlet)
}

/// Number of vertices on a longest shortest path (graph diameter + 1).
pub fn diameter_path_length(g: &Graph) -> usize {
    let diameter = (0..g.vertex_count())
        .flat_map(|s| g.bfs_distances(s))
        .max()
        .unwrap_or(0);
    diameter + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vf(v: &[f64]) -> VertexFunction {
        VertexFunction::new(v.to_vec()).unwrap()
    }

    fn exp(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    #[test]
    fn constant_functions_are_harmonic() {
        let g = Graph::complete(2).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let lap = p_laplacian(&g, &vf(&[4.2, 4.2]), exp(p)).unwrap();
            assert_eq!(lap.values(), &[0.0, 0.0]);
            assert_eq!(
                gradient_p_energy(&g, &vf(&[4.2, 4.2]), exp(p)).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn hand_evaluated_laplacians() {
        let k2 = Graph::complete(2).unwrap();
        let lap = p_laplacian(&k2, &vf(&[0.0, 1.0]), exp(3.0)).unwrap();
        assert_eq!(lap.values(), &[1.0, -1.0]);
        assert_eq!(
            gradient_p_energy(&k2, &vf(&[0.0, 1.0]), exp(3.0)).unwrap(),
            1.0
        );

        let p3 = Graph::path(3).unwrap();
        let lap = p_laplacian(&p3, &vf(&[0.0, 1.0, 3.0]), exp(2.0)).unwrap();
        assert_eq!(lap.values(), &[1.0, 1.0, -2.0]);
        assert_eq!(
            gradient_p_energy(&p3, &vf(&[0.0, 1.0, 3.0]), exp(2.0)).unwrap(),
            5.0
        );
    }

    #[test]
    fn flux_is_continuous_at_equal_values() {
        let k2 = Graph::complete(2).unwrap();
        let lap = p_laplacian(&k2, &vf(&[1.0, 1.0]), exp(1.5)).unwrap();
        assert_eq!(lap.values(), &[0.0, 0.0]);
        let lap = p_laplacian(&k2, &vf(&[1.0, 1.0 + 1e-12]), exp(1.5)).unwrap();
        assert!(lap[0] > 0.0 && lap[0] < 2e-6);
        assert_eq!(lap[0], -lap[1]);
    }

    #[test]
    fn means() {
        let k2 = Graph::complete(2).unwrap();
        assert_eq!(integral(&k2, &vf(&[0.0, 1.0])).unwrap(), 1.0);
        assert_eq!(mean(&k2, &vf(&[0.0, 1.0])).unwrap(), 0.5);
        assert_eq!(
            f_weighted_mean(&k2, &vf(&[3.0, 3.0]), &vf(&[1.0, 2.0])).unwrap(),
            3.0
        );
        assert_eq!(
            f_weighted_mean(&k2, &vf(&[0.0, 1.0]), &vf(&[1.0, -3.0])).unwrap(),
            1.5
        );
        assert_eq!(
            f_weighted_mean(&k2, &vf(&[0.0, 1.0]), &vf(&[1.0, -1.0])),
            Err(GraphError::DegenerateWeight)
        );
    }

    #[test]
    fn summation_by_parts_examples() {
        let k2 = Graph::complete(2).unwrap();
        let r = integration_by_parts_check(&k2, &vf(&[0.0, 1.0]), &vf(&[2.0, 5.0]), exp(3.0));
        assert_eq!(r.unwrap(), 0.0);
        let r = integration_by_parts_check(&k2, &vf(&[7.0, 7.0]), &vf(&[2.0, -5.0]), exp(1.5));
        assert_eq!(r.unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let k2 = Graph::complete(2).unwrap();
        let err = p_laplacian(&k2, &vf(&[0.0, 1.0, 2.0]), exp(2.0)).unwrap_err();
        assert_eq!(
            err,
            GraphError::DimensionMismatch {
                expected: 2,
                found: 3
            }
        );
        assert!(gradient_p_energy(&k2, &vf(&[0.0]), exp(2.0)).is_err());
    }

    #[test]
    fn diameter_paths() {
        assert_eq!(diameter_path_length(&Graph::complete(2).unwrap()), 2);
        assert_eq!(diameter_path_length(&Graph::path(3).unwrap()), 3);
        assert_eq!(diameter_path_length(&Graph::complete(3).unwrap()), 2);
        assert_eq!(diameter_path_length(&Graph::cycle(6).unwrap()), 4);
    }
}
