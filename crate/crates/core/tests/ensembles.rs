use proptest::prelude::*;
use specden::ensembles::{generate_sample, EnsembleConfig, EntryDistribution};
use specden::spectral_law::SpectralMeasure;

fn outside_fraction(n: usize, c: f64, seed: u64) -> f64 {
    let p = (c * n as f64) as usize;
    let s = generate_sample(&EnsembleConfig::gaussian(n, p, seed).unwrap()).unwrap();
    let (a, b) = ((1.0 - c.sqrt()).powi(2) - 0.1, (1.0 + c.sqrt()).powi(2) + 0.1);
    s.eigenvalues.iter().filter(|&&l| l < a || l > b).count() as f64 / p as f64
}

#[test]
fn typical_seeds_stay_inside_the_slack_bound() {
    let upper = (1.0 + 0.5f64.sqrt()).powi(2) * 1.5;
    for seed in 0..100 {
        let s = generate_sample(&EnsembleConfig::gaussian(100, 50, seed).unwrap()).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.eigenvalues[0] >= 0.0, "seed {seed}: {}", s.eigenvalues[0]);
        assert!(s.eigenvalues[49] <= upper, "seed {seed}: {}", s.eigenvalues[49]);
    }
}

#[test]
fn fraction_outside_support_shrinks_with_n() {
    let small: f64 = (0..5).map(|s| outside_fraction(200, 0.25, s)).sum();
    let large: f64 = (0..5).map(|s| outside_fraction(800, 0.25, s)).sum();
    assert!(large <= small, "{large} > {small}");
    assert!(large / 5.0 < 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectra_are_sorted_psd_and_reproducible(
        n in 20usize..120,
        ratio in 0.05f64..0.9,
        seed in any::<u64>(),
        rademacher in any::<bool>(),
        t2 in 0.2f64..5.0,
    ) {
        let p = ((ratio * n as f64) as usize).clamp(1, n - 1);
        let h = SpectralMeasure::from_weighted(&[(1.0, 0.5), (t2, 0.5)]).unwrap();
        let dist = if rademacher { EntryDistribution::Rademacher4 } else { EntryDistribution::StandardNormal };
        let cfg = EnsembleConfig::new(n, p, dist, h, seed).unwrap();
        let a = generate_sample(&cfg).unwrap();
        let b = generate_sample(&cfg).unwrap();
        prop_assert_eq!(a.len(), p);
        prop_assert!(a.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let max = a.eigenvalues[p - 1];
        prop_assert!(a.eigenvalues[0] >= -1e-10 * max);
        prop_assert_eq!(a.eigenvalues, b.eigenvalues);
    }
}
