use posverify::harness::{
    compute_noise_scale, deploy, preset, run_experiment, CalibrationSpec, ExperimentConfig,
    ExperimentReport, FilterMode, NoiseMode, SignalSpec, ThetaSource, PRESETS,
};
use posverify::{Error, Region};

fn small(filter_mode: FilterMode, theta_source: ThetaSource) -> ExperimentConfig {
    ExperimentConfig {
        n: 20,
        n0: 13,
        region: Region::square(50.0).unwrap(),
        signal: SignalSpec::default(),
        noise_mode: NoiseMode::Significant,
        faking: None,
        filter_mode,
        theta_source,
        calibration: CalibrationSpec {
            num_x0: 3,
            num_x_per_x0: 2,
            seed: 4,
        },
        seed: 77,
        trials: 3,
    }
}

#[test]
fn noise_scale_examples() {
    let unit = Region::square(1.0).unwrap();
    // α = 1 ⇔ λ = 4π
    let spec = SignalSpec {
        transmit_power: 1.0,
        wavelength: 4.0 * std::f64::consts::PI,
        path_loss_exponent: 2.0,
    };
    assert!((compute_noise_scale(&spec, &unit).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    let doubled = SignalSpec {
        transmit_power: 2.0,
        ..spec
    };
    assert!((compute_noise_scale(&doubled, &unit).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    let smaller = Region::square(0.5).unwrap();
    assert!(
        compute_noise_scale(&spec, &smaller).unwrap() > compute_noise_scale(&spec, &unit).unwrap()
    );
}

#[test]
fn deployment_invariants() {
    let cfg = small(FilterMode::Standard, ThetaSource::Fixed(3.0));
    let nodes = deploy(&cfg, 5).unwrap();
    assert_eq!(nodes.len(), 20);
    let faking = cfg.faking();
    for (i, node) in nodes.iter().enumerate() {
        assert_eq!(node.id, i as u32);
        assert!(cfg.region.contains(&node.true_position));
        assert!(cfg.region.contains(&node.claimed_position));
        if i < 13 {
            assert!(node.is_genuine());
            assert_eq!(node.claimed_position, node.true_position);
        } else {
            assert!(!node.is_genuine());
            assert!(node.claimed_position.distance(&node.true_position) >= faking.exclusion_radius);
        }
    }
    assert_eq!(nodes, deploy(&cfg, 5).unwrap());
    assert_ne!(nodes, deploy(&cfg, 6).unwrap());

    let all_genuine = ExperimentConfig { n0: 20, ..cfg };
    assert!(deploy(&all_genuine, 5)
        .unwrap()
        .iter()
        .all(|n| n.is_genuine()));
}

#[test]
fn report_conservation_and_round_trip() {
    let cfg = small(FilterMode::Quantile, ThetaSource::Recalibrate);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.per_trial.len(), 3);
    assert_eq!(report.schedule.len(), 11);
    for t in &report.per_trial {
        assert_eq!(t.malicious_removed + t.malicious_retained, 7);
        assert_eq!(t.genuine_removed + t.genuine_retained, 13);
        assert_eq!(
            t.success,
            t.malicious_retained == 0 && t.genuine_retained > 0
        );
        let deleted: usize = t
            .rounds
            .iter()
            .map(|r| r.genuine_deleted + r.malicious_deleted)
            .sum();
        assert_eq!(deleted, t.genuine_removed + t.malicious_removed);
        assert_eq!(t.initial_genuine_approvals.len(), 13);
    }
    let back = ExperimentReport::from_json(&report.to_json()).unwrap();
    assert_eq!(back, report);
    assert_eq!(report.to_json(), run_experiment(&cfg).unwrap().to_json());
}

#[test]
fn csv_layout() {
    let cfg = small(FilterMode::Standard, ThetaSource::Fixed(3.0));
    let mut report = run_experiment(&cfg).unwrap();
    let csv = report.to_csv();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(
        rows[0],
        "trial,step,genuine_total,malicious_total,threshold,genuine_deleted,malicious_deleted,deleted_approvals"
    );
    assert!(rows[1].starts_with("0,0,13,7,11.50,"));
    assert!(rows.iter().skip(1).all(|r| r.split(',').count() == 8));
    let passes: usize = report.per_trial.iter().map(|t| t.rounds.len()).sum();
    assert_eq!(rows.len(), 1 + passes);

    report.per_trial.clear();
    assert_eq!(report.to_csv().lines().count(), 1);
}

#[test]
fn config_json_round_trip_and_defaults() {
    let text = r#"{"n": 100, "n0": 52, "noise_mode": "negligible", "filter_mode": "standard",
                  "theta_source": {"fixed": 2.0}, "trials": 5}"#;
    let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
    assert_eq!(cfg.region, Region::square(100.0).unwrap());
    assert_eq!(cfg.signal, SignalSpec::default());
    assert_eq!(cfg.trials, 5);
    let back: ExperimentConfig =
        serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);

    let explicit: ExperimentConfig = serde_json::from_str(
        r#"{"n": 10, "n0": 6, "noise_mode": {"explicit": 1e-9}, "filter_mode": "quantile",
            "theta_source": {"path": "t.json"}}"#,
    )
    .unwrap();
    assert_eq!(explicit.noise_mode, NoiseMode::Explicit(1e-9));
    assert_eq!(explicit.noise_sigma().unwrap(), 1e-9);
}

#[test]
fn invalid_configs() {
    let base = small(FilterMode::Standard, ThetaSource::Fixed(1.0));
    for bad in [
        ExperimentConfig {
            n0: 1,
            ..base.clone()
        },
        ExperimentConfig {
            n0: 21,
            ..base.clone()
        },
        ExperimentConfig {
            trials: 0,
            ..base.clone()
        },
        ExperimentConfig {
            filter_mode: FilterMode::Quantile,
            ..base.clone()
        },
        ExperimentConfig {
            noise_mode: NoiseMode::Explicit(-1.0),
            ..base.clone()
        },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
    }
    let missing = ExperimentConfig {
        theta_source: ThetaSource::Path("/definitely/not/here.json".into()),
        ..base
    };
    assert!(matches!(run_experiment(&missing), Err(Error::Io { .. })));
}

#[test]
fn presets_are_valid() {
    for name in PRESETS {
        let cfg = preset(name).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.trials, 1);
    }
    assert!(preset("neg-noise-50").is_err());
    assert_eq!(preset("sig-noise-q-55").unwrap().n1(), 45);
}
