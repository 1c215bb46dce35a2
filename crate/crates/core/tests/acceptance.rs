//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use specden::asymptotics::{mise_and_optimal_bandwidth, sigma2};
use specden::clt::{check_contour_conditions, run_clt_cdf, run_clt_density, CltExperimentConfig, CltExperimentResult};
use specden::ensembles::EnsembleConfig;
use specden::estimation::{smoothed_target, EstimatorConfig};
use specden::kernel::{check_kernel, KernelSpec, CHECK_MASS};
use specden::spectral_law::{
    find_support, identity_t_closed_form, solve_stieltjes_with, LawSolution, SolverOptions, SpectralMeasure,
};

/// σ² of the standard Gaussian kernel, 1/(2π²).
const SIGMA2_GAUSSIAN: f64 = 0.050_660_591_821_168_89;
const MC_SEED: u64 = 2026;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn closed_form_oracle() -> Outcome {
    let c = 0.25;
    let h = SpectralMeasure::identity();
    let opts = SolverOptions {
        closed_form_fast_path: false,
        ..SolverOptions::default()
    };
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let z = Complex64::new(0.3 + 1.9 * i as f64 / 99.0, 0.01);
        let got = solve_stieltjes_with(c, &h, z, None, &opts).unwrap().m_under;
        let want = identity_t_closed_form(c, z).unwrap().m_under;
        worst = worst.max((got - want).norm());
    }
    outcome(worst < 1e-8, format!("max |m̲ - closed form| = {worst:.2e} (< 1e-8)"))
}

fn support_recovery() -> Outcome {
    let s = find_support(0.25, &SpectralMeasure::identity()).unwrap();
    let ok = s.len() == 1 && (s[0].lo - 0.25).abs() < 1e-6 && (s[0].hi - 2.25).abs() < 1e-6;
    outcome(ok, format!("support {:?} (want [0.25, 2.25] ± 1e-6)", s))
}

fn density_normalization() -> Outcome {
    let a = LawSolution::solve(0.25, &SpectralMeasure::identity()).unwrap().mass();
    let two = SpectralMeasure::from_weighted(&[(1.0, 0.5), (3.0, 0.5)]).unwrap();
    let b = LawSolution::solve(0.5, &two).unwrap().mass();
    let ok = (a - 1.0).abs() < 1e-3 && (b - 1.0).abs() < 1e-3;
    outcome(ok, format!("∫f = {a:.6} (c = 0.25, δ₁), {b:.6} (c = 0.5, ½δ₁ + ½δ₃) (± 1e-3)"))
}

fn sigma2_schemes() -> Outcome {
    let g = KernelSpec::gaussian();
    let base = sigma2(&g, 1e-10).unwrap();
    let agree = (base.scheme_autocorrelation - base.scheme_tensor).abs() / base.sigma2;
    let frozen = (base.sigma2 - SIGMA2_GAUSSIAN).abs() / SIGMA2_GAUSSIAN;
    let shifted = sigma2(&g.translated(0.7), 1e-10).unwrap().sigma2;
    let translation = (shifted / base.sigma2 - 1.0).abs();
    let mut scale: f64 = 0.0;
    let mut ratios = Vec::new();
    for lambda in [0.5, 2.0] {
        let s = sigma2(&g.dilated(lambda), 1e-10).unwrap().sigma2;
        ratios.push(s / base.sigma2);
        scale = scale.max((s / base.sigma2 - 1.0).abs());
    }
    let ok = agree < 1e-8 && frozen < 1e-8 && translation < 1e-6 && scale < 1e-6;
    outcome(
        ok,
        format!(
            "schemes agree to {agree:.1e}; σ² = {:.15}; translation Δ = {translation:.1e}; \
             λK(λu) ratios {:.6?} for λ = 0.5, 2 (want 1 ± 1e-6)",
            base.sigma2, ratios
        ),
    )
}

fn clt_summary(res: &CltExperimentResult) -> String {
    let failed: Vec<String> = res
        .verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| match v.point {
            Some(j) => format!("{}@x={} = {:.4} not in ({:.4}, {:.4})", v.criterion, res.eval_points[j], v.value, v.bounds.0, v.bounds.1),
            None => format!("{} = {:.4}", v.criterion, v.value),
        })
        .collect();
    let ratios: Vec<String> = res
        .summary
        .iter()
        .map(|s| format!("{:.3}", s.variance / res.reference_variance))
        .collect();
    format!(
        "{} verdicts, var ratios [{}]{}",
        res.verdicts.len(),
        ratios.join(", "),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failed: {}", failed.join("; "))
        }
    )
}

fn clt_density() -> Outcome {
    let ens = EnsembleConfig::gaussian(800, 160, MC_SEED).unwrap();
    let est = EstimatorConfig::with_exponent(KernelSpec::gaussian(), 800, 0.37, vec![0.7, 1.3]).unwrap();
    let res = run_clt_density(&CltExperimentConfig::density(ens, 500, est)).unwrap();
    let frozen = (res.reference_variance - SIGMA2_GAUSSIAN).abs() < 1e-9;
    outcome(res.all_passed() && frozen, clt_summary(&res))
}

fn clt_cdf() -> Outcome {
    let ens = EnsembleConfig::gaussian(800, 160, MC_SEED).unwrap();
    let est = EstimatorConfig::with_exponent(KernelSpec::gaussian(), 800, 0.3, vec![1.0]).unwrap();
    let res = run_clt_cdf(&CltExperimentConfig::cdf(ens, 500, est)).unwrap();
    let ratio = res.summary[0].variance / res.reference_variance;
    outcome(
        (0.5..=2.0).contains(&ratio),
        format!("variance ratio {ratio:.3} (want [0.5, 2.0]); {}", clt_summary(&res)),
    )
}

fn bias_scaling() -> Outcome {
    let law = LawSolution::solve(0.25, &SpectralMeasure::identity()).unwrap();
    let k = KernelSpec::gaussian();
    let f = law.density_exact(1.0).unwrap();
    let bias = |h: f64| (smoothed_target(&law, &k, h, 1.0).unwrap() - f).abs();
    let ratio = bias(0.04) / bias(0.02);
    outcome(
        (ratio - 4.0).abs() <= 0.6,
        format!("bias(0.04)/bias(0.02) = {ratio:.4} (want 4 ± 15%)"),
    )
}

fn optimal_bandwidth() -> Outcome {
    let law = LawSolution::solve(0.25, &SpectralMeasure::identity()).unwrap();
    let k = KernelSpec::gaussian();
    let a = mise_and_optimal_bandwidth(&k, &law, 800).unwrap();
    let b = mise_and_optimal_bandwidth(&k, &law, 1600).unwrap();
    let rel = (a.curve_argmin / a.h_star - 1.0).abs();
    let ratio_err = (b.h_star / a.h_star - 2f64.powf(-1.0 / 3.0)).abs();
    outcome(
        rel < 0.02 && ratio_err < 1e-12,
        format!(
            "h* = {:.6}, curve argmin = {:.6} (rel {rel:.1e}); h*(2n)/h*(n) - 2^(-1/3) = {ratio_err:.1e}",
            a.h_star, a.curve_argmin
        ),
    )
}

fn condition_scan() -> Outcome {
    let h = SpectralMeasure::identity();
    let bw = 800f64.powf(-0.37);
    let full = check_contour_conditions(0.25, &h, 800, bw, 1.0, 200).unwrap();
    let half = check_contour_conditions(0.25, &h, 800, bw / 2.0, 1.0, 200).unwrap();
    let change = (full.min_d1_ratio / half.min_d1_ratio).max(half.min_d1_ratio / full.min_d1_ratio);
    let probe_h = SpectralMeasure::from_weighted(&[(1.0, 0.999), (3.0, 0.001)]).unwrap();
    let probe = check_contour_conditions(0.25, &probe_h, 800, bw, 1.0, 200).unwrap();
    let ok = full.min_d1_ratio > 0.0 && half.min_d1_ratio > 0.0 && change < 2.0 && !probe.f11_passed;
    outcome(
        ok,
        format!(
            "min d1 ratio {:.4} (h) / {:.4} (h/2), change {change:.3}×; probe max_f11 = {:.1} vs M = {} flagged = {}",
            full.min_d1_ratio, half.min_d1_ratio, probe.max_f11, probe.bound, !probe.f11_passed
        ),
    )
}

fn kernel_gate() -> Outcome {
    let g = check_kernel(&KernelSpec::gaussian(), 1e-10);
    let doubled = check_kernel(&KernelSpec::gaussian().scaled(2.0), 1e-10);
    let failed = doubled.failed();
    let ok = g.all_passed() && failed == [CHECK_MASS];
    outcome(
        ok,
        format!("Gaussian all passed = {}; 2·Gaussian failed {:?}", g.all_passed(), failed),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 10] = [
        (1, "closed-form oracle", closed_form_oracle, Duration::from_secs(1)),
        (2, "support recovery", support_recovery, Duration::from_secs(1)),
        (3, "density normalization", density_normalization, Duration::from_secs(10)),
        (4, "σ² dual-scheme agreement and invariance", sigma2_schemes, Duration::from_secs(30)),
        (5, "density CLT experiment", clt_density, Duration::from_secs(600)),
        (6, "distribution CLT experiment", clt_cdf, Duration::from_secs(600)),
        (7, "bias scaling", bias_scaling, Duration::from_secs(10)),
        (8, "optimal bandwidth", optimal_bandwidth, Duration::from_secs(10)),
        (9, "contour condition scan", condition_scan, Duration::from_secs(30)),
        (10, "kernel gate", kernel_gate, Duration::from_secs(5)),
    ];
    let mut failures = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = out.passed && in_time;
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {} [{:.2}s / {}s budget{}]",
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
