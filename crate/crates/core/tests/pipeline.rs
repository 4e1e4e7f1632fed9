use squadmds::io::{load_embedding, load_matrix, write_embedding, write_matrix, DelimitedOptions, MatrixFormat};
use squadmds::parallel::Workers;
use squadmds::quality::quality_curve;
use squadmds::synthetic;
use squadmds::telemetry::{NoTelemetry, VecTelemetry};
use squadmds::{embed, Error, Method, RunConfig};

#[test]
fn every_method_yields_a_finite_layout() {
    let d = synthetic::hierarchical_mixture(240, 3, 2, 8, 1);
    for method in Method::ALL {
        let mut cfg = RunConfig::new(method).with_seed(3);
        if method != Method::Pca {
            cfg.iterations = Some(50);
        }
        let e = embed(&d, &cfg, &mut NoTelemetry).unwrap().embedding;
        assert_eq!(e.n(), 240, "{method}");
        assert!(e.is_finite(), "{method}");
        assert!(e.span() > 0.0, "{method}");
    }
}

#[test]
fn files_survive_the_full_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = synthetic::swiss_roll(300, 2);
    let hd = dir.path().join("hd.bin");
    write_matrix(&hd, d.points(), MatrixFormat::Raw).unwrap();
    let back = load_matrix(&hd, MatrixFormat::Raw, &DelimitedOptions::default()).unwrap();
    assert_eq!(back.points(), d.points());

    let e = embed(&back, &RunConfig::new(Method::SquadMds).with_iterations(500), &mut NoTelemetry).unwrap().embedding;
    let ld = dir.path().join("ld.csv");
    write_embedding(&ld, &e, d.labels()).unwrap();
    let e2 = load_embedding(&ld).unwrap();
    assert_eq!(e, e2);
    let w = Workers::sequential();
    assert_eq!(quality_curve(&d, &e, &w).unwrap(), quality_curve(&back, &e2, &w).unwrap());
}

#[test]
fn telemetry_follows_the_schedule() {
    let d = synthetic::gaussian_blob(80, 4, 5);
    let mut sink = VecTelemetry::default();
    let cfg = RunConfig::new(Method::SquadMds).with_iterations(100);
    embed(&d, &cfg, &mut sink).unwrap();
    assert_eq!(sink.0.len(), 100);
    let lr: Vec<f64> = sink.0.iter().map(|r| r.lr).collect();
    assert!(lr.windows(2).all(|w| w[1] < w[0]));
    // eta(T) = eta0 / (1 + 9): the last recorded step is at t = T - 1.
    let expect_last = lr[0] / (1.0 + 9.0 * 99.0 / 100.0);
    assert!((lr[99] - expect_last).abs() < 1e-12 * lr[0]);
}

#[test]
fn invalid_configs_are_rejected_before_work() {
    let d = synthetic::gaussian_blob(50, 3, 6);
    let mut cfg = RunConfig::new(Method::Hybrid);
    cfg.lr_mds = 0.0;
    cfg.lr_tsne = 0.0;
    assert!(matches!(embed(&d, &cfg, &mut NoTelemetry), Err(Error::InvalidConfig(_))));
    let mut cfg = RunConfig::new(Method::SquadMds);
    cfg.gamma = 1.0;
    assert!(matches!(embed(&d, &cfg, &mut NoTelemetry), Err(Error::InvalidConfig(_))));
}
