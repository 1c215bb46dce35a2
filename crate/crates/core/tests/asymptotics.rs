use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use specden::asymptotics::{
    bias_term, leading_mise, mean_diagnostic, mise_and_optimal_bandwidth, mise_and_optimal_bandwidth_with, sigma2,
    BandwidthOptions, Contour,
};
use specden::kernel::KernelSpec;
use specden::spectral_law::{identity_t_closed_form, LawSolution, SolverOptions, SpectralMeasure};

/// σ² of the standard Gaussian kernel, frozen from the two quadrature schemes.
const SIGMA2_GAUSSIAN: f64 = 0.050_660_591_821_176_17;
/// h* for c = 1/4, H = δ₁, Gaussian kernel, n = 800, x₀ = 1.
const H_STAR_MP_800: f64 = 0.140_535_630_363_011_06;

#[test]
fn gaussian_sigma2_is_frozen() {
    let r = sigma2(&KernelSpec::gaussian(), 1e-10).unwrap();
    assert!((r.sigma2 - SIGMA2_GAUSSIAN).abs() < 1e-12, "{:.17}", r.sigma2);
    assert!((r.scheme_autocorrelation - r.scheme_tensor).abs() < 1e-8 * r.sigma2);
    assert!(r.quad_error_estimate < 1e-10);
    assert!((r.sigma2 * 2.0 * PI * PI - 1.0).abs() < 1e-10);
}

#[test]
fn argument_rescaling_leaves_sigma2_unchanged() {
    let base = sigma2(&KernelSpec::gaussian(), 1e-10).unwrap().sigma2;
    for lambda in [0.5, 2.0] {
        let s = sigma2(&KernelSpec::gaussian().argument_dilated(lambda), 1e-10).unwrap().sigma2;
        assert!((s / base - 1.0).abs() < 1e-6, "λ = {lambda}: {s}");
        let s = sigma2(&KernelSpec::gaussian().dilated(lambda), 1e-10).unwrap().sigma2;
        assert!((s / base - lambda * lambda).abs() < 1e-6, "λ = {lambda}: {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sigma2_is_positive(shift in -2.0f64..2.0, dilation in 0.3f64..3.0, which in 0usize..2) {
        let k = [KernelSpec::gaussian(), KernelSpec::biweight()][which]
            .argument_dilated(dilation)
            .scaled(dilation)
            .translated(shift);
        let r = sigma2(&k, 1e-8).unwrap();
        prop_assert!(r.sigma2 > 0.0);
    }
}

fn mp_density(c: f64, x: f64) -> f64 {
    let (a, b) = ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2));
    ((b - x) * (x - a)).sqrt() / (2.0 * PI * c * x)
}

#[test]
fn optimal_bandwidth_matches_closed_form_curvature() {
    let law = LawSolution::solve(0.25, &SpectralMeasure::identity()).unwrap();
    let opts = BandwidthOptions {
        x0: Some(1.0),
        ..Default::default()
    };
    let r = mise_and_optimal_bandwidth_with(&KernelSpec::gaussian(), &law, 800, opts).unwrap();
    assert!((r.h_star - H_STAR_MP_800).abs() < 1e-10 * H_STAR_MP_800, "{:.17}", r.h_star);

    let d = 1e-3;
    let f2 = (mp_density(0.25, 1.0 + d) - 2.0 * mp_density(0.25, 1.0) + mp_density(0.25, 1.0 - d)) / (d * d);
    let c1 = 0.5 * f2;
    let oracle = (SIGMA2_GAUSSIAN * 2.0 / (2.0 * 800.0 * 800.0 * c1 * c1)).powf(1.0 / 6.0);
    assert!((r.h_star / oracle - 1.0).abs() < 1e-5, "{} vs {oracle}", r.h_star);
}

#[test]
fn mise_curve_is_convex_in_log_h_near_optimum() {
    let law = LawSolution::solve(0.25, &SpectralMeasure::identity()).unwrap();
    let r = mise_and_optimal_bandwidth(&KernelSpec::gaussian(), &law, 800).unwrap();
    let l = |lh: f64| leading_mise(r.c1, r.sigma2, r.support_length, 800, lh.exp());
    let centre = r.h_star.ln();
    for k in 1..=10 {
        let step = 0.05 * k as f64;
        let second = l(centre + step) - 2.0 * l(centre) + l(centre - step);
        assert!(second > 0.0);
    }
    assert!((r.curve_argmin / r.h_star - 1.0).abs() < 0.02);
}

#[test]
fn bias_denominator_matches_identity_form_on_contour() {
    let c = 0.25;
    let h = SpectralMeasure::identity();
    let contour = Contour::around(c, &h, 1.0, 0.08);
    let opts = SolverOptions::default();
    let mut zs = Vec::new();
    for i in 0..30 {
        zs.push(Complex64::new(contour.a_l + (contour.a_r - contour.a_l) * i as f64 / 29.0, contour.height));
    }
    for i in 1..=10 {
        let v = contour.height * i as f64 / 10.0;
        zs.push(Complex64::new(contour.a_l, v));
        zs.push(Complex64::new(contour.a_r, v));
    }
    assert_eq!(zs.len(), 50);
    for z in zs {
        let b = bias_term(c, &h, z, &opts).unwrap();
        let m = identity_t_closed_form(c, z).unwrap().m_under;
        let d7 = 1.0 - (1.0 + z * m).powi(2) / c;
        assert!((b.denominator - d7).norm() < 1e-10, "z = {z}");
        assert!(b.value.is_finite());
    }
}

#[test]
fn mean_diagnostic_shrinks_as_n_doubles() {
    let h = SpectralMeasure::identity();
    let k = KernelSpec::gaussian();
    let value = |n: f64| {
        let bw = n.powf(-0.37);
        mean_diagnostic(0.25, &h, &k, bw, 1.0, Contour::around(0.25, &h, 1.0, bw)).unwrap()
    };
    let (a, b) = (value(800.0), value(1600.0));
    assert!(b.abs() < a.abs(), "{a} -> {b}");
}
