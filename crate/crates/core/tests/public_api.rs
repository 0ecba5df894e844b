use shuffled_sgd::constants::{hat_constant, ratio_stats, sampled_permutation, tilde_constant};
use shuffled_sgd::{
    gen_gaussian, load_libsvm, parse_libsvm_str, ConstantsReport, Dataset, Dataset32, PowerIteration, RatioConfig,
    Regularity, RegularityDiag,
};

fn sonar() -> Dataset {
    load_libsvm(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sonar_scale"), None).unwrap()
}

#[test]
fn sonar_fixture_shape() {
    let ds = sonar();
    assert_eq!((ds.n(), ds.d()), (208, 60));
    assert!(ds.labels().iter().all(|&t| t == 1.0 || t == -1.0));
    assert!(ds.rows().all(|r| r.values.iter().all(|v| v.abs() <= 1.0)));
}

#[test]
fn libsvm_round_trip() {
    let ds = sonar();
    let mut buf = Vec::new();
    ds.write_libsvm(&mut buf).unwrap();
    let back: Dataset = parse_libsvm_str(std::str::from_utf8(&buf).unwrap(), Some(ds.d())).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn single_precision_tracks_double() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sonar_scale")).unwrap();
    let d64: Dataset = parse_libsvm_str(&text, None).unwrap();
    let d32: Dataset32 = parse_libsvm_str(&text, None).unwrap();
    let perm = sampled_permutation(d64.n(), 1, 0);
    let pw = PowerIteration::default().with_tol(1e-5);
    for b in [1, 8, 208] {
        let h64 = hat_constant(&d64, &Regularity::identity(d64.n()), &perm, b, &pw).unwrap();
        let h32 = hat_constant(&d32, &RegularityDiag::<f32>::identity(d32.n()), &perm, b, &pw).unwrap();
        let t64 = tilde_constant(&d64, &Regularity::identity(d64.n()), &perm, b, &pw).unwrap();
        let t32 = tilde_constant(&d32, &RegularityDiag::<f32>::identity(d32.n()), &perm, b, &pw).unwrap();
        assert!((h64 - f64::from(h32)).abs() <= 1e-3 * h64, "b={b}: {h64} vs {h32}");
        assert!((t64 - f64::from(t32)).abs() <= 1e-3 * t64, "b={b}: {t64} vs {t32}");
    }
}

#[test]
fn report_serializes_and_reloads() {
    let ds = sonar();
    let cfg = RatioConfig {
        num_perms: 16,
        seed: 9,
        ..RatioConfig::default()
    };
    let report = ratio_stats(&ds, &Regularity::identity(ds.n()), &cfg).unwrap();
    let json = report.to_json().unwrap();
    let back: ConstantsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for key in ["schema_version", "L", "hatL", "tildeL", "ratios", "samples", "non_converged"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }

    let mut csv = Vec::new();
    report.write_csv(&mut csv, &["seed = 9".to_string()]).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# seed = 9"));
    assert_eq!(lines.next(), Some("perm_seed,hatL,tildeL,ratio"));
    assert_eq!(lines.count(), 16);
}

#[test]
fn permutation_seeds_regenerate_samples() {
    let ds = sonar();
    let cfg = RatioConfig {
        num_perms: 4,
        seed: 2,
        with_tilde: false,
        ..RatioConfig::default()
    };
    let reg = Regularity::identity(ds.n());
    let report = ratio_stats(&ds, &reg, &cfg).unwrap();
    for s in &report.samples {
        let perm = shuffled_sgd::rng::permutation(ds.n(), s.perm_seed, 0);
        let hat = hat_constant(&ds, &reg, &perm, 1, &cfg.power).unwrap();
        assert_eq!(hat, s.hat_l);
    }
}

#[test]
fn gaussian_generator_is_seeded() {
    let a: Dataset = gen_gaussian(30, 7, 5).unwrap();
    let b: Dataset = gen_gaussian(30, 7, 5).unwrap();
    let c: Dataset = gen_gaussian(30, 7, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let values: Vec<f64> = a.rows().flat_map(|r| r.values.to_vec()).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    assert!(mean.abs() < 0.3);
}
