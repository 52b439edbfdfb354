use picatom::devices::*;
use picatom::fdtd::FdtdConfig;
use picatom::geometry::GratingSpec;
use picatom::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn exp_samples(decay: f64, amp: f64, n: usize, span_mm: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let z = span_mm * k as f64 / (n - 1) as f64;
            (z, amp * (-decay * z).exp())
        })
        .collect()
}

#[test]
fn fit_recovers_exponential() {
    let f = fit_decay(&exp_samples(8.3, 1.0, 40, 0.45)).unwrap();
    assert!((f.decay_per_mm / 8.3 - 1.0).abs() < 1e-9);
    assert!(f.r_squared > 1.0 - 1e-12);
    let flat = fit_decay(&exp_samples(0.0, 2.5, 12, 0.3)).unwrap();
    assert!(flat.decay_per_mm.abs() < 1e-12);

    assert!(matches!(fit_decay(&exp_samples(8.3, 1.0, 4, 0.45)), Err(Error::Fit(_))));
    let mut s = exp_samples(8.3, 1.0, 10, 0.45);
    s[3].1 = 0.0;
    assert!(matches!(fit_decay(&s), Err(Error::Fit(_))));
    let same: Vec<_> = (0..6).map(|k| (0.1, 1.0 + k as f64)).collect();
    assert!(matches!(fit_decay(&same), Err(Error::Fit(_))));
}

#[test]
fn fit_under_one_percent_noise() {
    let normal = Normal::new(0.0, 0.01).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<_> = exp_samples(8.3, 1.0, 50, 0.45)
            .into_iter()
            .map(|(z, a)| (z, a * (1.0 + normal.sample(&mut rng))))
            .collect();
        let f = fit_decay(&s).unwrap();
        worst = worst.max((f.decay_per_mm - 8.3).abs());
    }
    assert!(worst <= 0.2, "worst error {worst}");
}

proptest! {
    #[test]
    fn fit_is_scale_invariant(decay in 0.0f64..30.0, scale in 1e-6f64..1e6, n in 5usize..80) {
        let a = fit_decay(&exp_samples(decay, 1.0, n, 0.4)).unwrap();
        let b = fit_decay(&exp_samples(decay, scale, n, 0.4)).unwrap();
        prop_assert!((a.decay_per_mm - b.decay_per_mm).abs() <= 1e-12);
    }
}

#[test]
fn analytic_angle() {
    let a = grating_angle_analytic(780.0 / 510.0, 510.0, 780.0, 1).unwrap().unwrap();
    assert!(a.abs() < 1e-12);
    let a = grating_angle_analytic(1.788, 510.0, 780.0, 1).unwrap().unwrap();
    assert!((a - 15.0).abs() < 0.1, "{a}");
    assert_eq!(grating_angle_analytic(1.3, 510.0, 780.0, 2).unwrap(), None);
    assert!(grating_angle_analytic(1.788, 510.0, 780.0, 0).is_err());
}

#[test]
fn bridge_inputs_are_validated() {
    assert!(BridgeSpec::chip(-1.0).is_err());
    assert!(BridgeSpec::new(0.0, 5.0, 780.0).is_err());
    let spec = BridgeSpec::chip(7.0).unwrap();
    let cfg = FdtdConfig::default();
    assert!(bridge_sweep(&[], &spec, &cfg).is_err());
    assert!(matches!(bridge_sweep(&[0.0, -2.0], &spec, &cfg), Err(Error::Validation(_))));

    let curve = TransmissionCurve {
        points: vec![(0.0, 1.001), (2.0, 0.999), (4.0, 1.002), (7.0, 0.98)],
        converged: vec![true; 4],
    };
    assert_eq!(curve.overshoots(), vec![0, 2]);
    assert!((curve.max_rise() - 0.003).abs() < 1e-12);
    assert!(curve.to_csv().starts_with("wall_length_um,efficiency,converged\n"));
}

/// Cheap stand-in for the FDTD evaluator: first-order emission with an
/// index that grows with tooth fill and thickness, and a decay that scales
/// with the perturbation strength.
fn surrogate(g: &GratingSpec) -> picatom::Result<(Option<f64>, f64)> {
    let fill = g.tooth_width_nm / g.pitch_nm;
    let t = g.tooth_thickness_nm / 100.0;
    let n_eff = 1.745 + 0.08 * fill * t;
    let angle = grating_angle_analytic(n_eff, g.pitch_nm, 780.0, 1)?;
    let decay = 8.3 * fill * (1.0 - fill) / (0.59 * 0.41) * t * t;
    Ok((angle, decay))
}

fn template() -> GratingSpec {
    chip_grating(90, 780.0).unwrap().1
}

#[test]
fn design_search_finds_basin() {
    let targets = DesignTargets::new(15.0, 8.3);
    let bounds = DesignBounds::around(510.0, 301.0 / 510.0, 100.0, 0.1);
    let r = design_search_with(&targets, &bounds, 60, &template(), 40.0, surrogate).unwrap();
    assert!(r.log.len() <= 60);
    assert!((r.best.pitch_nm - 510.0).abs() <= 15.0, "pitch {}", r.best.pitch_nm);
    assert!(r.best_evaluation.objective < 0.05, "{}", r.gap_report());
    for e in &r.log {
        assert!(r.best_evaluation.objective <= e.objective);
    }
    let again = design_search_with(&targets, &bounds, 60, &template(), 40.0, surrogate).unwrap();
    assert_eq!(r.log, again.log);
}

#[test]
fn design_search_budget_one() {
    let targets = DesignTargets::new(15.0, 8.3);
    let bounds = DesignBounds::around(510.0, 0.59, 100.0, 0.1);
    let r = design_search_with(&targets, &bounds, 1, &template(), 40.0, surrogate).unwrap();
    assert_eq!(r.log.len(), 1);
    assert_eq!(r.best_evaluation, r.log[0]);
    assert!(design_search_with(&targets, &bounds, 0, &template(), 40.0, surrogate).is_err());
}

#[test]
fn design_search_reports_unreachable_target() {
    let targets = DesignTargets::new(89.0, 8.3);
    let bounds = DesignBounds::around(510.0, 0.59, 100.0, 0.1);
    let r = design_search_with(&targets, &bounds, 30, &template(), 40.0, surrogate).unwrap();
    let (ga, _) = r.gap();
    let ga = ga.expect("best candidate radiates");
    assert!(ga < -50.0);
    let report = r.gap_report();
    assert!(report.contains("target_angle_deg = 89"));
    assert!(report.contains("angle_gap_deg = "));
}

#[test]
fn design_search_empty_feasible_set() {
    let targets = DesignTargets::new(15.0, 8.3);
    let bounds = DesignBounds::around(510.0, 0.59, 100.0, 0.1);
    let r = design_search_with(&targets, &bounds, 10, &template(), 400.0, surrogate);
    assert!(matches!(r, Err(Error::EmptyFeasibleSet(_))));
    let bad = DesignBounds { fill: (0.8, 0.2), ..bounds };
    assert!(matches!(design_search_with(&targets, &bad, 10, &template(), 40.0, surrogate), Err(Error::Validation(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn design_search_best_is_never_beaten(angle in 0.0f64..40.0, decay in 0.0f64..20.0, budget in 1usize..40, rel in 0.02f64..0.2) {
        let targets = DesignTargets::new(angle, decay);
        let bounds = DesignBounds::around(510.0, 0.59, 100.0, rel);
        let r = design_search_with(&targets, &bounds, budget, &template(), 40.0, surrogate).unwrap();
        prop_assert!(r.log.len() <= budget && !r.log.is_empty());
        for e in &r.log {
            prop_assert!(r.best_evaluation.objective <= e.objective);
        }
    }
}

#[test]
fn grating_without_teeth_does_not_radiate() {
    let (stack, g) = chip_grating(30, 780.0).unwrap();
    let flat = GratingSpec::new(g.pitch_nm, 0.0, g.tooth_thickness_nm, g.tooth_material.clone(), g.n_periods).unwrap();
    let cfg = FdtdConfig { run_time: 150.0, ..FdtdConfig::default() };
    let r = analyze_grating(&stack, &flat, 780.0, &cfg).unwrap();
    eprintln!("{}", r.to_report());
    assert!(r.decay_factor.abs() < 0.1, "decay {}", r.decay_factor);
    assert_eq!(r.emission_angle_deg, None);
    assert!(r.upward_fraction < 1e-3);
}
