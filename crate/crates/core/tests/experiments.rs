use corrosion::experiments::{
    max_rho0, run_noise_sweep, run_oscillation_sweep, three_spheres_check, BasisKind, BasisSettings, ExperimentConfig,
    Scenario,
};

fn xy_sweep(seeds: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Scenario::manufactured_xy());
    cfg.levels = vec![1e-2, 1e-4, 1e-6];
    cfg.seeds = seeds;
    cfg
}

#[test]
fn sweep_is_deterministic() {
    let mut cfg = xy_sweep(6);
    cfg.scenario.mesh_n = 32;
    let a = run_noise_sweep(&cfg).unwrap();
    let b = run_noise_sweep(&cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn manufactured_medians_fall_with_noise() {
    let curve = run_noise_sweep(&xy_sweep(10)).unwrap();
    let med: Vec<f64> = curve.levels.iter().map(|r| r.median).collect();
    assert!(med[0] >= med[1] && med[1] >= med[2], "{med:?}");
    assert_eq!(curve.inversions, 0);
    assert_eq!(curve.eps0, Some(1e-2));
}

/// On the manufactured case the exact solution lies in the span of the
/// harmonic polynomials, so the error falls like a power of ε rather than a
/// power of |log ε|; the log-rate exponent comes out near 4.5.
#[test]
#[ignore = "fails: fitted log-rate exponent on u = xy is about 4.5, outside (0, 1]"]
fn manufactured_log_rate_exponent_in_unit_interval() {
    let mut cfg = ExperimentConfig::new(Scenario::manufactured_xy());
    cfg.seeds = 10;
    let fit = run_noise_sweep(&cfg).unwrap().fit.unwrap();
    assert!(fit.exponent > 0.0 && fit.exponent <= 1.0, "theta = {}", fit.exponent);
}

#[test]
fn oscillation_positive_for_positive_flux() {
    let mut cfg = ExperimentConfig::new(Scenario::manufactured_xy());
    cfg.scenario.mesh_n = 32;
    let curve = run_oscillation_sweep(&cfg, &[0.0, 0.2, 0.5, 1.0]).unwrap();
    assert_eq!(curve.records[0].osc, 0.0);
    assert!(curve.records[1..].iter().all(|r| r.osc > 0.0));
    assert!(curve.truncated_at.is_none());
}

#[test]
fn three_spheres_for_every_basis_kind() {
    let sc = Scenario::exponential_default();
    let center = [0.4, 0.55];
    let rho0 = max_rho0(&sc.domain, center);
    for kind in [
        BasisKind::Polynomials { degree: 10 },
        BasisKind::Polynomials { degree: 3 },
        BasisKind::FundamentalSolutions { count: 64, offset_factor: 0.5 },
    ] {
        let basis = BasisSettings { kind, ..Default::default() }.build(&sc.domain).unwrap();
        let taus = three_spheres_check(&sc.domain, &basis, 50, rho0, center, 11).unwrap();
        assert!(taus.iter().all(|&t| t > 0.0), "{kind:?}: {taus:?}");
    }
}
