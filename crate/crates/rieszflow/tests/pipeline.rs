use rieszflow::cache::{obtain_operator, OperatorCache};
use rieszflow::evolve::{self, EvolveConfig};
use rieszflow::steady::{self, SolverConfig, Stationarity};
use rieszflow::{ModelParams, RadialGrid};

#[test]
fn cached_operator_gives_identical_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = OperatorCache::new(tmp.path()).unwrap();
    let g = RadialGrid::uniform(1, 128, 3.0).unwrap();
    let (a, first) = obtain_operator(Some(&cache), &g, 0.2).unwrap();
    let (b, second) = obtain_operator(Some(&cache), &g, 0.2).unwrap();
    assert!(!first.cache_hit && second.cache_hit);
    assert_eq!(first.sha256, second.sha256);
    let pr = ModelParams::new(1, 0.4, 2.0, 3.0, 1.0, 1.0).unwrap();
    let cfg = SolverConfig::default();
    let ra = steady::solve_el(&pr, &cfg, &a).unwrap();
    let rb = steady::solve_el(&pr, &cfg, &b).unwrap();
    assert_eq!(ra.rho.values(), rb.rho.values());
}

#[test]
fn three_dimensional_steady_state_is_stationary_under_the_flow() {
    let pr = ModelParams::new(3, 1.0, 2.0, 2.5, 1.0, 1.0).unwrap();
    assert!(pr.m > pr.m_c());
    let g = RadialGrid::uniform(3, 96, 3.0).unwrap();
    let (op, _) = obtain_operator(None, &g, pr.half_order()).unwrap();
    let st = steady::solve_el(&pr, &SolverConfig::default(), &op).unwrap();
    assert!(st.converged, "{}", st.el_residual);
    assert_eq!(st.stationarity, Stationarity::Minimizer);
    assert!(st.monotone && !st.edge_supported);
    let cfg = EvolveConfig {
        t_end: 0.05,
        ..EvolveConfig::default()
    };
    let run = evolve::run(&pr, &op, &st.rho, &cfg, None).unwrap();
    assert!(run.steps > 10 && run.mass_drift < 1e-10);
    assert!(run.final_rho.l1_distance(&st.rho).unwrap() < 1e-2);
}
