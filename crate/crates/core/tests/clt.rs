use specden::clt::{run_clt_cdf, run_clt_density, CltExperimentConfig, TargetMode, VERDICT_VARIANCE};
use specden::ensembles::{EnsembleConfig, EntryDistribution};
use specden::estimation::EstimatorConfig;
use specden::kernel::KernelSpec;
use specden::spectral_law::SpectralMeasure;

fn density_config(n: usize, seed: u64, scale: f64, reps: usize) -> CltExperimentConfig {
    let h = SpectralMeasure::point(scale).unwrap();
    let ens = EnsembleConfig::new(n, n / 5, EntryDistribution::StandardNormal, h, seed).unwrap();
    let bw = scale * (n as f64).powf(-0.37);
    let est = EstimatorConfig::new(KernelSpec::gaussian(), bw, vec![0.7 * scale, 1.3 * scale]).unwrap();
    CltExperimentConfig {
        law_grid_points: 2001,
        ..CltExperimentConfig::density(ens, reps, est)
    }
}

#[test]
fn identical_configs_give_identical_matrices() {
    let cfg = density_config(400, 17, 1.0, 60);
    let a = run_clt_density(&cfg).unwrap();
    let b = run_clt_density(&cfg).unwrap();
    assert_eq!(a.z_matrix, b.z_matrix);
    assert_eq!(a.z_matrix.len(), 60);
    for (s, t) in a.summary.iter().zip(a.recompute_summary()) {
        assert!((s.mean - t.mean).abs() <= 1e-12 * s.mean.abs().max(1.0));
        assert!((s.variance - t.variance).abs() <= 1e-12 * s.variance.abs().max(1.0));
    }
}

#[test]
fn self_centring_gives_zero_statistics() {
    let mut cfg = density_config(400, 3, 1.0, 50);
    cfg.target = TargetMode::SelfCentered;
    let r = run_clt_density(&cfg).unwrap();
    assert!(r.z_matrix.iter().flatten().all(|&z| z == 0.0));
    assert!(r.summary.iter().all(|s| s.mean == 0.0 && s.variance == 0.0 && s.skewness == 0.0));
    let r = run_clt_cdf(&cfg).unwrap();
    assert!(r.z_matrix.iter().flatten().all(|&z| z == 0.0));
}

#[test]
fn rescaling_t_leaves_the_variance_verdict_unchanged() {
    let a = run_clt_density(&density_config(400, 8, 1.0, 80)).unwrap();
    let b = run_clt_density(&density_config(400, 8, 2.5, 80)).unwrap();
    let va: Vec<_> = a.verdicts_for(VERDICT_VARIANCE).collect();
    let vb: Vec<_> = b.verdicts_for(VERDICT_VARIANCE).collect();
    for (x, y) in va.iter().zip(&vb) {
        assert_eq!(x.passed, y.passed);
        assert!((x.value - y.value).abs() < 0.05 * x.value, "{} vs {}", x.value, y.value);
    }
}

fn variance_margin(n: usize, seed: u64) -> f64 {
    let r = run_clt_density(&density_config(n, seed, 1.0, 100)).unwrap();
    r.verdicts_for(VERDICT_VARIANCE).map(|v| (v.value - 1.0).abs()).fold(0.0, f64::max)
}

#[test]
fn variance_margin_tightens_with_n() {
    let wins = (0..10u64)
        .filter(|&b| variance_margin(1600, 500 + b) <= variance_margin(400, 100 + b))
        .count();
    assert!(wins >= 7, "{wins} of 10 batches");
}
