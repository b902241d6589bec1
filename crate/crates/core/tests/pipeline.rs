mod common;

use graph_csh::degree::global_degree_for;
use graph_csh::estimates::{check_bound, compute_bounds, ProblemData};
use graph_csh::solvers::{
    family_residual, homotopy_track, solve_csh_detailed, solve_small_eps, Family, HomotopyPath,
    SolveError, SolverConfig,
};
use graph_csh::{Exponent, Graph, VertexFunction};

fn case(name: &str) -> common::Case {
    common::grid()
        .into_iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("no grid case {name}"))
}

#[test]
fn continuation_passes_a_fold() {
    let c = case("R8s3 λ=-1 p=2");
    let cfg = SolverConfig::default();
    let run = solve_csh_detailed(&c.pd, &cfg).unwrap();
    assert!(run.report.converged);

    // Plain parameter stepping cannot get past the turning point.
    let natural = homotopy_track(
        &c.pd,
        HomotopyPath::G { eps: run.eps },
        &run.small.solution,
        cfg.homotopy_steps,
        &cfg,
    );
    let natural_f = homotopy_track(
        &c.pd,
        HomotopyPath::F,
        &run.g_chain.last().unwrap().solution,
        cfg.homotopy_steps,
        &cfg,
    );
    assert!(
        matches!(natural, Err(SolveError::HomotopyFailed { .. }))
            || matches!(natural_f, Err(SolveError::HomotopyFailed { .. }))
    );

    for (chain, path) in [
        (&run.g_chain, HomotopyPath::G { eps: run.eps }),
        (&run.f_chain, HomotopyPath::F),
    ] {
        for k in 0..=cfg.homotopy_steps {
            let s = k as f64 / cfg.homotopy_steps as f64;
            let point = chain
                .iter()
                .find(|r| r.parameter == Some(s))
                .unwrap_or_else(|| panic!("grid point {s} missing"));
            assert!(family_residual(&c.pd, path.at(s), &point.solution).unwrap() <= 1e-10);
        }
        assert_eq!(chain.last().unwrap().parameter, Some(1.0));
    }
}

#[test]
fn chains_stay_in_the_a_priori_box() {
    for name in ["K3 λ=2 p=3", "C4 λ=-2 p=1.5", "R5s1 λ=1 p=2"] {
        let c = case(name);
        let run = solve_csh_detailed(&c.pd, &SolverConfig::default()).unwrap();
        assert!(run.report.residual_sup <= 1e-10, "{name}");
        for r in run
            .f_chain
            .iter()
            .filter(|r| r.parameter.is_some_and(|s| (0.0..=1.0).contains(&s)))
        {
            assert!(
                check_bound(&c.pd, &run.bounds, &r.solution),
                "{name} at σ = {:?}",
                r.parameter
            );
        }
    }
}

#[test]
fn small_eps_solution_obeys_the_sup_bound() {
    for name in ["P3 λ=1 p=1.5", "K3 λ=-1 p=3", "C4 λ=2 p=2"] {
        let c = case(name);
        let b = compute_bounds(&c.pd).unwrap();
        let eps = b.eps0 / 2.0;
        let small = solve_small_eps(&c.pd, eps, &SolverConfig::default()).unwrap();
        assert!(small.converged, "{name}");
        assert!(
            (2.0 * small.solution.max()).exp() <= b.eta * eps + 1e-8,
            "{name}"
        );
    }
}

#[test]
fn degree_is_constant_along_the_homotopy() {
    let cfg = SolverConfig::default();
    for c in common::grid()
        .iter()
        .filter(|c| c.p == 2.0 && ["K3", "C4", "R5s1"].iter().any(|g| c.name.starts_with(g)))
    {
        let r0 = compute_bounds(&c.pd).unwrap().r0;
        for sigma in [0.0, 0.5, 1.0] {
            let rep = global_degree_for(&c.pd, Family::F { sigma }, r0, &cfg).unwrap();
            assert_eq!(
                rep.degree,
                c.lambda.signum() as i32,
                "{} at σ = {sigma}",
                c.name
            );
        }
    }
}

#[test]
fn degree_radius_must_cover_the_bounds() {
    let c = case("K2 λ=1 p=2");
    let r0 = compute_bounds(&c.pd).unwrap().r0;
    assert!(global_degree_for(&c.pd, Family::TARGET, 0.5 * r0, &SolverConfig::default()).is_err());
    let rep = global_degree_for(&c.pd, Family::TARGET, 2.0 * r0, &SolverConfig::default()).unwrap();
    assert_eq!(rep.degree, 1);
}

#[test]
fn symmetric_solutions_count_with_the_right_sign_below_p_two() {
    let pd = ProblemData::new(
        Graph::complete(3).unwrap(),
        -1.0,
        VertexFunction::constant(3, 1.0),
        Exponent::new(1.5).unwrap(),
    )
    .unwrap();
    let rep = global_degree_for(
        &pd,
        Family::TARGET,
        compute_bounds(&pd).unwrap().r0,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(rep.solutions.iter().any(|u| u.max() - u.min() < 1e-9));
    assert_eq!(rep.degree, -1);
}
