use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{companion_off_axis, Contour};
use crate::ensembles::{generate_replication, EnsembleConfig, EntryDistribution};
use crate::error::{Error, Result};
use crate::spectral_law::{SolverOptions, SpectralMeasure};

/// Default M in the bounds ∫ dH / |1 + t m̲|⁴ < M. For H = δ₁ the supremum
/// over the contour approaches ((1 + √c)/√c)⁴ at the right edge, 81 at c = 1/4.
pub const DEFAULT_INTEGRAL_BOUND: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub bound: f64,
    /// Replications used to estimate E m̲_n; 0 substitutes m̲⁰.
    pub expectation_reps: usize,
    pub seed: u64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            bound: DEFAULT_INTEGRAL_BOUND,
            expectation_reps: 0,
            seed: 0,
        }
    }
}

/// Source of the transform inside the first fourth-power integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationSource {
    /// m̲⁰ in place of E m̲_n.
    CompanionProxy,
    /// Average of m̲_n over simulated Gaussian ensembles.
    MonteCarlo { reps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub re: f64,
    pub im: f64,
    /// |1 - c (m̲⁰)² ∫ t² dH/(1 + t m̲⁰)²| / √v.
    pub d1_ratio: f64,
    /// ∫ dH / |1 + t E m̲_n|⁴ (or its proxy).
    pub expectation_integral: f64,
    /// ∫ dH / |1 + t m̲⁰|⁴.
    pub companion_integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourFailure {
    pub re: f64,
    pub im: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourConditionReport {
    pub c: f64,
    pub n: usize,
    pub bandwidth: f64,
    pub v0: f64,
    pub grid: usize,
    pub contour: Contour,
    pub min_d1_ratio: f64,
    /// z = (re, im) attaining `min_d1_ratio`.
    pub min_d1_at: (f64, f64),
    pub max_f11: f64,
    pub max_f11_at: (f64, f64),
    pub max_g38: f64,
    pub max_g38_at: (f64, f64),
    pub expectation_source: ExpectationSource,
    pub bound: f64,
    pub d1_passed: bool,
    pub f11_passed: bool,
    pub g38_passed: bool,
    pub points: Vec<ContourPoint>,
    pub failures: Vec<ContourFailure>,
    pub notes: Vec<String>,
}

impl ContourConditionReport {
    pub fn all_passed(&self) -> bool {
        self.d1_passed && self.f11_passed && self.g38_passed && self.failures.is_empty()
    }
}

/// Upper-half contour samples: `grid` points on the top side and on each
/// vertical side. The lower half is the mirror image, and every statistic is
/// invariant under z → z̄.
fn contour_points(contour: &Contour, grid: usize) -> Vec<Complex64> {
    let v = contour.height;
    let mut zs = Vec::with_capacity(3 * grid + 2);
    for k in 0..=grid {
        let u = contour.a_l + (contour.a_r - contour.a_l) * k as f64 / grid as f64;
        zs.push(Complex64::new(u, v));
    }
    for k in 1..grid {
        let vk = v * k as f64 / grid as f64;
        zs.push(Complex64::new(contour.a_l, vk));
        zs.push(Complex64::new(contour.a_r, vk));
    }
    zs
}

fn fourth_power_integral(h: &SpectralMeasure, m: Complex64) -> f64 {
    h.atoms().iter().map(|a| a.w / (1.0 + a.t * m).norm().powi(4)).sum()
}

/// E m̲_n(z) at every z, averaged over `reps` Gaussian ensembles.
fn expected_companion(c: f64, h: &SpectralMeasure, n: usize, zs: &[Complex64], opts: &ConditionOptions) -> Result<Vec<Complex64>> {
    let p = ((c * n as f64).round() as usize).max(1);
    let config = EnsembleConfig::new(n, p, EntryDistribution::StandardNormal, h.clone(), opts.seed)?;
    let c_n = config.ratio();
    let samples = (0..opts.expectation_reps as u64)
        .into_par_iter()
        .map(|r| generate_replication(&config, r))
        .collect::<Result<Vec<_>>>()?;
    let reps = samples.len() as f64;
    Ok(zs
        .iter()
        .map(|&z| {
            let total: Complex64 = samples
                .iter()
                .map(|s| {
                    let m: Complex64 = s.eigenvalues.iter().map(|&l| 1.0 / (l - z)).sum::<Complex64>() / p as f64;
                    -(1.0 - c_n) / z + c_n * m
                })
                .sum();
            total / reps
        })
        .collect())
}

/// Scans the contour conditions over the rectangle of height v₀h around the
/// support bracket of F^{c,H}.
pub fn check_contour_conditions(
    c: f64,
    h: &SpectralMeasure,
    n: usize,
    bandwidth: f64,
    v0: f64,
    grid: usize,
) -> Result<ContourConditionReport> {
    check_contour_conditions_with(c, h, n, bandwidth, v0, grid, &ConditionOptions::default())
}

pub fn check_contour_conditions_with(
    c: f64,
    h: &SpectralMeasure,
    n: usize,
    bandwidth: f64,
    v0: f64,
    grid: usize,
    opts: &ConditionOptions,
) -> Result<ContourConditionReport> {
    const OP: &str = "clt::check_contour_conditions";
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::config(OP, format!("c = {c} must lie in (0, 1)")));
    }
    if !(bandwidth > 0.0 && v0 > 0.0) {
        return Err(Error::config(OP, "bandwidth and v0 must be positive"));
    }
    if grid < 2 {
        return Err(Error::config(OP, "grid must be at least 2"));
    }
    let contour = Contour::around(c, h, v0, bandwidth);
    let zs = contour_points(&contour, grid);
    let solver = SolverOptions::default();
    let companions: Vec<Result<Complex64>> = zs.par_iter().map(|&z| companion_off_axis(c, h, z, &solver)).collect();

    let expectations = if opts.expectation_reps > 0 {
        Some(expected_companion(c, h, n, &zs, opts)?)
    } else {
        None
    };

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (i, (&z, m)) in zs.iter().zip(companions).enumerate() {
        let m = match m {
            Ok(m) => m,
            Err(e) => {
                failures.push(ContourFailure {
                    re: z.re,
                    im: z.im,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let d1 = 1.0 - c * m * m * h.resolvent_moment(m, 2, 2);
        let g38 = fourth_power_integral(h, m);
        let f11 = match &expectations {
            Some(e) => fourth_power_integral(h, e[i]),
            None => g38,
        };
        points.push(ContourPoint {
            re: z.re,
            im: z.im,
            d1_ratio: d1.norm() / z.im.sqrt(),
            expectation_integral: f11,
            companion_integral: g38,
        });
    }
    if points.is_empty() {
        return Err(Error::config(OP, "the solver failed at every contour point"));
    }

    let extreme = |key: fn(&ContourPoint) -> f64, max: bool| {
        let best = points
            .iter()
            .max_by(|a, b| {
                let o = key(a).total_cmp(&key(b));
                if max { o } else { o.reverse() }
            })
            .expect("non-empty");
        (key(best), (best.re, best.im))
    };
    let (min_d1_ratio, min_d1_at) = extreme(|p| p.d1_ratio, false);
    let (max_f11, max_f11_at) = extreme(|p| p.expectation_integral, true);
    let (max_g38, max_g38_at) = extreme(|p| p.companion_integral, true);

    let expectation_source = match expectations {
        Some(_) => ExpectationSource::MonteCarlo {
            reps: opts.expectation_reps,
        },
        None => ExpectationSource::CompanionProxy,
    };
    let mut notes = Vec::new();
    if expectation_source == ExpectationSource::CompanionProxy {
        notes.push("max_f11 uses m̲⁰ in place of E m̲_n; it equals max_g38 by construction".to_string());
    }
    if !failures.is_empty() {
        notes.push(format!("solver failed at {} contour points", failures.len()));
    }
    Ok(ContourConditionReport {
        c,
        n,
        bandwidth,
        v0,
        grid,
        contour,
        min_d1_ratio,
        min_d1_at,
        max_f11,
        max_f11_at,
        max_g38,
        max_g38_at,
        expectation_source,
        bound: opts.bound,
        d1_passed: min_d1_ratio > 0.0 && min_d1_ratio.is_finite(),
        f11_passed: max_f11 < opts.bound,
        g38_passed: max_g38 < opts.bound,
        points,
        failures,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum_satisfies_the_bounds() {
        let h = SpectralMeasure::identity();
        let bw = 800f64.powf(-0.37);
        let r = check_contour_conditions(0.25, &h, 800, bw, 1.0, 200).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures.first());
        assert!(r.min_d1_ratio > 0.0 && r.min_d1_ratio.is_finite());
        let sup = ((1.0 + 0.5) / 0.5f64).powi(4);
        assert!(r.max_g38 < sup && r.max_g38 > 0.5 * sup, "{}", r.max_g38);
        assert_eq!(r.max_f11, r.max_g38);
        assert!(r.notes.iter().any(|n| n.contains("in place of")));
        assert!(r.all_passed());
        assert!(r.points.iter().all(|p| p.im > 0.0 && p.im <= r.contour.height));
    }

    #[test]
    fn monte_carlo_expectation_is_close_to_proxy() {
        let h = SpectralMeasure::identity();
        let opts = ConditionOptions {
            expectation_reps: 4,
            seed: 3,
            ..Default::default()
        };
        let r = check_contour_conditions_with(0.25, &h, 400, 0.1, 1.0, 20, &opts).unwrap();
        assert_eq!(r.expectation_source, ExpectationSource::MonteCarlo { reps: 4 });
        assert!(r.f11_passed);
        let rel = (r.max_f11 - r.max_g38).abs() / r.max_g38;
        assert!(rel < 0.2, "{} vs {}", r.max_f11, r.max_g38);
    }

    #[test]
    fn pole_proximity_fails_the_bound() {
        let h = SpectralMeasure::from_weighted(&[(1.0, 0.999), (3.0, 0.001)]).unwrap();
        let r = check_contour_conditions(0.25, &h, 800, 800f64.powf(-0.37), 1.0, 200).unwrap();
        assert!(!r.f11_passed && !r.g38_passed, "{}", r.max_f11);
        assert!(r.d1_passed);
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = SpectralMeasure::identity();
        assert!(check_contour_conditions(1.5, &h, 800, 0.1, 1.0, 10).is_err());
        assert!(check_contour_conditions(0.25, &h, 800, 0.0, 1.0, 10).is_err());
        assert!(check_contour_conditions(0.25, &h, 800, 0.1, 1.0, 1).is_err());
    }
}
