//! Kernel estimators of the limiting spectral density and distribution.
//!
//! f_n(x) = (1/(p h)) Σ K((x - λ_i)/h) and F_n(x) = ∫₀^x f_n, together with
//! the smoothed limits they fluctuate around:
//! (1/h) ∫ K((x - y)/h) f(y) dy and its running integral.

use serde::{Deserialize, Serialize};

use crate::ensembles::SpectrumSample;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::quadrature::{integrate_breaks, QuadOptions};
use crate::spectral_law::LawSolution;

/// h = n^{-0.37}: inside the window n h^{5/2} → ∞, n h³ → 0.
pub const DEFAULT_H_EXPONENT: f64 = 0.37;
/// The density grid must resolve the bandwidth by this factor.
pub const GRID_RESOLUTION_FACTOR: f64 = 10.0;

const TARGET_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kernel: KernelSpec,
    pub bandwidth: f64,
    pub eval_points: Vec<f64>,
}

impl EstimatorConfig {
    /// Requires h > 0 and finite, ascending evaluation points.
    pub fn new(kernel: KernelSpec, bandwidth: f64, eval_points: Vec<f64>) -> Result<Self> {
        const OP: &str = "estimation::EstimatorConfig";
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::config(OP, format!("bandwidth must be positive, got {bandwidth}")));
        }
        if eval_points.iter().any(|x| !x.is_finite()) {
            return Err(Error::config(OP, "evaluation points must be finite"));
        }
        if eval_points.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config(OP, "evaluation points must be sorted ascending"));
        }
        Ok(Self {
            kernel,
            bandwidth,
            eval_points,
        })
    }

    /// h = n^{-exponent}.
    pub fn with_exponent(kernel: KernelSpec, n: usize, exponent: f64, eval_points: Vec<f64>) -> Result<Self> {
        Self::new(kernel, (n as f64).powf(-exponent), eval_points)
    }

    /// Every evaluation point must lie strictly inside the support.
    pub fn require_interior(&self, law: &LawSolution) -> Result<()> {
        for &x in &self.eval_points {
            let inside = law.support.iter().any(|iv| iv.lo < x && x < iv.hi);
            if !inside {
                return Err(Error::config(
                    "estimation::EstimatorConfig",
                    format!("evaluation point {x} is not inside the support"),
                ));
            }
        }
        Ok(())
    }
}

/// f_n(x) for ascending eigenvalues.
pub fn density_at(eigenvalues: &[f64], kernel: &KernelSpec, h: f64, x: f64) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    // K((x - λ)/h) vanishes unless λ lies within shift·h ± cutoff·h of x.
    let centre = x - kernel.shift * h;
    let reach = kernel.cutoff() * h;
    let lo = eigenvalues.partition_point(|&l| l < centre - reach);
    let hi = eigenvalues.partition_point(|&l| l <= centre + reach);
    let sum: f64 = eigenvalues[lo..hi].iter().map(|&l| kernel.value((x - l) / h)).sum();
    sum / (eigenvalues.len() as f64 * h)
}

/// (x, f_n(x)) at every evaluation point.
pub fn estimate_density(sample: &SpectrumSample, config: &EstimatorConfig) -> Vec<(f64, f64)> {
    config
        .eval_points
        .iter()
        .map(|&x| (x, density_at(&sample.eigenvalues, &config.kernel, config.bandwidth, x)))
        .collect()
}

/// F_n(x) = (1/p) Σ [𝒦((x - λ_i)/h) - 𝒦(-λ_i/h)], or quadrature of f_n when
/// the kernel has no closed-form antiderivative.
pub fn cdf_at(eigenvalues: &[f64], kernel: &KernelSpec, h: f64, x: f64) -> f64 {
    if eigenvalues.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for &l in eigenvalues {
        match (kernel.antiderivative((x - l) / h), kernel.antiderivative(-l / h)) {
            (Some(a), Some(b)) => sum += a - b,
            _ => return cdf_by_quadrature(eigenvalues, kernel, h, x),
        }
    }
    sum / eigenvalues.len() as f64
}

/// ∫₀^x f_n by adaptive quadrature, split at every eigenvalue's kernel window.
pub fn cdf_by_quadrature(eigenvalues: &[f64], kernel: &KernelSpec, h: f64, x: f64) -> f64 {
    let (lo, hi) = if x >= 0.0 { (0.0, x) } else { (x, 0.0) };
    let mut points = vec![lo, hi];
    for &l in eigenvalues {
        for b in kernel.breakpoints() {
            points.push(l + b * h);
        }
        points.push(l + kernel.shift * h);
    }
    points.retain(|&p| p >= lo && p <= hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let value = integrate_breaks(
        |y| density_at(eigenvalues, kernel, h, y),
        &points,
        QuadOptions::with_tol(1e-12, 1e-12),
    )
    .value;
    if x >= 0.0 {
        value
    } else {
        -value
    }
}

pub fn estimate_cdf(sample: &SpectrumSample, config: &EstimatorConfig, x: f64) -> f64 {
    cdf_at(&sample.eigenvalues, &config.kernel, config.bandwidth, x)
}

fn require_resolution(law: &LawSolution, h: f64) -> Result<()> {
    let spacing = law.max_spacing();
    let limit = h / GRID_RESOLUTION_FACTOR;
    if spacing > limit {
        return Err(Error::GridTooCoarse {
            op: "estimation::smoothed_target",
            spacing,
            limit,
        });
    }
    Ok(())
}

/// y-breakpoints spreading the kernel window around x over a few panels.
fn window_breaks(kernel: &KernelSpec, h: f64, x: f64) -> Vec<f64> {
    let centre = x - kernel.shift * h;
    let reach = kernel.cutoff() * h;
    let mut out: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|k| centre + k * h)
        .filter(|y| (y - centre).abs() < reach)
        .collect();
    out.extend(kernel.breakpoints().iter().map(|b| x - b * h));
    out
}

/// (1/h) ∫ K((x - y)/h) f(y) dy against the interpolated limiting density.
pub fn smoothed_target(law: &LawSolution, kernel: &KernelSpec, h: f64, x: f64) -> Result<f64> {
    require_resolution(law, h)?;
    let centre = x - kernel.shift * h;
    let reach = kernel.cutoff() * h;
    let value = law.integrate_against(
        |y| kernel.value((x - y) / h),
        centre - reach,
        centre + reach,
        &window_breaks(kernel, h, x),
        QuadOptions::with_tol(TARGET_TOL, TARGET_TOL),
    );
    Ok(value / h)
}

/// ∫_{-∞}^x of the smoothed target, = ∫ f(y) 𝒦((x - y)/h) dy.
pub fn smoothed_cdf_target(law: &LawSolution, kernel: &KernelSpec, h: f64, x: f64) -> Result<f64> {
    require_resolution(law, h)?;
    let hull = law.hull();
    Ok(law.integrate_against(
        |y| kernel.cdf((x - y) / h),
        hull.lo,
        hull.hi,
        &window_breaks(kernel, h, x),
        QuadOptions::with_tol(TARGET_TOL, TARGET_TOL),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// n h^{5/2} large and n h³ small.
    Density,
    /// n h³ √ln(1/h) large.
    Distribution,
    Both,
    Neither,
}

/// Where (n, h) sits relative to the two asymptotic bandwidth windows.
/// A product counts as "large" above 1 and "small" below 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub n: usize,
    pub h: f64,
    /// α with h = n^{-α}.
    pub exponent: f64,
    pub n_h52: f64,
    pub n_h3: f64,
    pub n_h3_sqrt_log: f64,
    pub density_regime: bool,
    pub distribution_regime: bool,
    pub regime: Regime,
}

impl RegimeReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_h52 <= 1.0 {
            out.push(format!("n·h^(5/2) = {:.3} is not large; h is too small for the density CLT", self.n_h52));
        }
        if self.n_h3 >= 1.0 {
            out.push(format!("n·h³ = {:.3} is not small; the density CLT bias does not vanish", self.n_h3));
        }
        out
    }
}

pub fn bandwidth_regime(n: usize, h: f64) -> Result<RegimeReport> {
    const OP: &str = "estimation::bandwidth_regime";
    if n < 2 {
        return Err(Error::config(OP, "n must be at least 2"));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::config(OP, format!("h = {h} must lie in (0, 1)")));
    }
    let nf = n as f64;
    let n_h52 = nf * h.powf(2.5);
    let n_h3 = nf * h.powi(3);
    let n_h3_sqrt_log = n_h3 * (1.0 / h).ln().sqrt();
    let density_regime = n_h52 > 1.0 && n_h3 < 1.0;
    let distribution_regime = n_h3_sqrt_log > 1.0;
    let regime = match (density_regime, distribution_regime) {
        (true, true) => Regime::Both,
        (true, false) => Regime::Density,
        (false, true) => Regime::Distribution,
        (false, false) => Regime::Neither,
    };
    Ok(RegimeReport {
        n,
        h,
        exponent: (1.0 / h).ln() / nf.ln(),
        n_h52,
        n_h3,
        n_h3_sqrt_log,
        density_regime,
        distribution_regime,
        regime,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EnsembleConfig;
    use crate::spectral_law::SpectralMeasure;

    fn sample(eigs: Vec<f64>) -> SpectrumSample {
        let cfg = EnsembleConfig::gaussian(eigs.len() + 1, eigs.len(), 0).unwrap();
        SpectrumSample::from_eigenvalues(eigs, cfg).unwrap()
    }

    #[test]
    fn single_atom_density() {
        let k = KernelSpec::gaussian();
        assert!((density_at(&[0.0], &k, 1.0, 0.0) - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn two_atom_density() {
        let s = sample(vec![1.0, 2.0]);
        let cfg = EstimatorConfig::new(KernelSpec::gaussian(), 0.5, vec![1.5]).unwrap();
        let f = estimate_density(&s, &cfg)[0].1;
        // (1/(2·0.5))·[K(1) + K(-1)] = 2·0.241971 / 1.
        assert!((f - 0.483941).abs() < 1e-6);
    }

    #[test]
    fn cdf_examples() {
        let k = KernelSpec::gaussian();
        assert!((cdf_at(&[1.0], &k, 0.5, 1.0) - 0.47725).abs() < 1e-5);
        assert!((cdf_at(&[1.0, 2.0], &k, 0.05, 1e6) - 1.0).abs() < 1e-10);
        assert!(cdf_at(&[1.0, 2.0], &k, 0.05, 0.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_fallback_agrees() {
        let eigs = [0.3, 0.35, 0.9, 1.4, 2.0];
        for k in [KernelSpec::gaussian(), KernelSpec::biweight()] {
            for x in [0.2, 1.0, 2.5] {
                let closed = cdf_at(&eigs, &k, 0.1, x);
                let quad = cdf_by_quadrature(&eigs, &k, 0.1, x);
                assert!((closed - quad).abs() < 1e-8, "{} at {x}", k.id());
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(KernelSpec::gaussian(), 0.0, vec![]).is_err());
        assert!(EstimatorConfig::new(KernelSpec::gaussian(), 0.1, vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn regime_examples() {
        let h = 800f64.powf(-0.37);
        let r = bandwidth_regime(800, h).unwrap();
        assert!((r.n_h52 - 1.66).abs() < 0.01);
        assert!((r.n_h3 - 0.48).abs() < 0.01);
        assert_eq!(r.regime, Regime::Density);
        assert!((r.exponent - 0.37).abs() < 1e-12);

        let r = bandwidth_regime(800, 800f64.powf(-0.5)).unwrap();
        assert!((r.n_h52 - 800f64.powf(-0.25)).abs() < 1e-12);
        assert!(!r.density_regime);

        let r = bandwidth_regime(800, 800f64.powf(-0.3)).unwrap();
        assert!((r.n_h3 - 800f64.powf(0.1)).abs() < 1e-9);
        assert_eq!(r.regime, Regime::Distribution);
        assert!(!r.warnings().is_empty());
    }

    #[test]
    fn smoothed_target_examples() {
        let law = LawSolution::solve(0.25, &SpectralMeasure::identity()).unwrap();
        let k = KernelSpec::gaussian();
        let t = smoothed_target(&law, &k, 0.01, 1.0).unwrap();
        assert!((t - law.density_at(1.0)).abs() < 0.01);
        assert!(matches!(
            smoothed_target(&law, &k, 1e-4, 1.0),
            Err(Error::GridTooCoarse { .. })
        ));
        // Far right of the support the CDF target is the total mass.
        let far = smoothed_cdf_target(&law, &k, 0.05, 10.0).unwrap();
        assert!((far - law.mass()).abs() < 1e-9);
    }
}
