//! Limit quantities of the estimator CLTs.
//!
//! * [`sigma2`]: σ² = -(1/2π²) ∬ K′(u₁) K′(u₂) ln (u₁ - u₂)² du₁ du₂, by
//!   two independent quadratures that must agree.
//! * [`cdf_variance`]: the kernel-free variance 1/(2π²) of the F_n CLT.
//! * [`bias_term`] and [`mean_diagnostic`]: the finite-n mean integrand and
//!   its contour integral.
//! * [`mise_and_optimal_bandwidth`]: L(h) = (c₁h²)² + σ²(b - a)/(n²h²) and
//!   its minimiser h* = (σ²(b - a)/(2n²c₁²))^{1/6}.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::quadrature::{integrate_breaks, QuadOptions};
use crate::spectral_law::{solve_stieltjes_with, LawSolution, SolverOptions, SpectralMeasure};

/// Half-width of the strip |u₁ - u₂| ≤ δ integrated analytically.
pub const LOG_STRIP_DELTA: f64 = 1e-4;
/// |1 - c m̲² ∫t²dH/(1+tm̲)²| below this is treated as degenerate.
pub const DEGENERACY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceResult {
    pub sigma2: f64,
    /// max(|A - B|, quadrature error estimates), absolute.
    pub quad_error_estimate: f64,
    pub kernel_id: String,
    /// Value from the 1-D autocorrelation scheme.
    pub scheme_autocorrelation: f64,
    /// Value from the tensor-product scheme.
    pub scheme_tensor: f64,
}

/// 1/(2π²).
pub fn cdf_variance() -> f64 {
    0.5 / (PI * PI)
}

fn opts(tol: f64) -> QuadOptions {
    QuadOptions {
        abs_tol: tol,
        rel_tol: tol,
        max_subdivisions: 5000,
    }
}

fn sorted_points(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.push(lo);
    pts.push(hi);
    pts.retain(|&p| p >= lo && p <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    pts
}

/// σ² = -(2/π²) ∫₀^∞ R(s) ln s ds with R(s) = ∫ K′(u) K′(u - s) du.
/// On [0, 1] the log is subtracted out: ∫₀¹ (R(s) - R(0)) ln s ds - R(0).
fn sigma2_autocorrelation(k: &KernelSpec, tol: f64) -> (f64, f64) {
    let (lo, hi) = k.integration_range();
    let span = hi - lo;
    let kinks = k.breakpoints();
    let autocorr = |s: f64| -> (f64, f64) {
        let mut pts: Vec<f64> = kinks.clone();
        pts.extend(kinks.iter().map(|b| b + s));
        pts.push(k.shift);
        pts.push(k.shift + s);
        let r = integrate_breaks(|u| k.deriv1(u) * k.deriv1(u - s), &sorted_points(pts, lo.max(lo + s), hi.min(hi + s)), opts(0.1 * tol));
        (r.value, r.error)
    };
    let (r0, _) = autocorr(0.0);
    let mut s_breaks: Vec<f64> = Vec::new();
    for a in &kinks {
        for b in &kinks {
            if a - b > 0.0 {
                s_breaks.push(a - b);
            }
        }
    }
    let scale = 1.0 / k.dilation;
    s_breaks.extend([0.25 * scale, 0.5 * scale, 2.0 * scale, 4.0 * scale, 8.0 * scale]);

    let mut err = 0.0;
    let near = integrate_breaks(
        |s: f64| {
            if s == 0.0 {
                0.0
            } else {
                (autocorr(s).0 - r0) * s.ln()
            }
        },
        &sorted_points(s_breaks.clone(), 0.0, 1.0),
        opts(tol),
    );
    err += near.error;
    let far = integrate_breaks(|s: f64| autocorr(s).0 * s.ln(), &sorted_points(s_breaks, 1.0, span.max(1.0)), opts(tol));
    err += far.error;
    let integral = near.value - r0 + far.value;
    (-2.0 / (PI * PI) * integral, 2.0 / (PI * PI) * err)
}

/// Tensor-product scheme: for each u₁, ∫ K′(u₂) ln (u₁ - u₂)² du₂ with the
/// strip |u₂ - u₁| ≤ δ replaced by K′(u₁) · 4(δ ln δ - δ).
fn sigma2_tensor(k: &KernelSpec, tol: f64) -> (f64, f64) {
    let (lo, hi) = k.integration_range();
    let delta = LOG_STRIP_DELTA / k.dilation;
    let kinks = k.breakpoints();
    let strip = 4.0 * (delta * delta.ln() - delta);
    let inner = |u1: f64| -> (f64, f64) {
        let g = |u2: f64| k.deriv1(u2) * ((u1 - u2) * (u1 - u2)).ln();
        let mut left_pts = kinks.clone();
        let mut right_pts = kinks.clone();
        for step in [1e-3, 1e-2, 1e-1, 1.0] {
            left_pts.push(u1 - step / k.dilation);
            right_pts.push(u1 + step / k.dilation);
        }
        let side = |pts: Vec<f64>, a: f64, b: f64| {
            if b > a {
                let r = integrate_breaks(g, &sorted_points(pts, a, b), opts(0.1 * tol));
                (r.value, r.error)
            } else {
                (0.0, 0.0)
            }
        };
        let (left, el) = side(left_pts, lo, u1 - delta);
        let (right, er) = side(right_pts, u1 + delta, hi);
        (left + right + k.deriv1(u1) * strip, el + er)
    };
    let mut outer_pts = kinks.clone();
    outer_pts.push(k.shift);
    let scale = 1.0 / k.dilation;
    outer_pts.extend([-4.0, -2.0, -1.0, 1.0, 2.0, 4.0].iter().map(|m| k.shift + m * scale));
    let outer = integrate_breaks(|u1| k.deriv1(u1) * inner(u1).0, &sorted_points(outer_pts, lo, hi), opts(tol));
    (-outer.value / (2.0 * PI * PI), outer.error / (2.0 * PI * PI))
}

/// σ² of `kernel`, cross-checked between the two schemes at relative `tol`.
pub fn sigma2(kernel: &KernelSpec, tol: f64) -> Result<VarianceResult> {
    const OP: &str = "asymptotics::sigma2";
    if !(tol > 0.0) {
        return Err(Error::config(OP, "tol must be positive"));
    }
    let quad_tol = (1e-3 * tol).max(1e-14);
    let (a, ea) = sigma2_autocorrelation(kernel, quad_tol);
    let (b, eb) = sigma2_tensor(kernel, quad_tol);
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature {
            op: OP,
            msg: format!("non-finite σ² estimates {a}, {b}"),
        });
    }
    if (a - b).abs() > 10.0 * tol * a.abs() {
        return Err(Error::SchemeDisagreement {
            op: OP,
            first: a,
            second: b,
            tol,
        });
    }
    Ok(VarianceResult {
        sigma2: a,
        quad_error_estimate: (a - b).abs().max(ea).max(eb),
        kernel_id: kernel.id(),
        scheme_autocorrelation: a,
        scheme_tensor: b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasTermResult {
    pub z: Complex64,
    pub m_under: Complex64,
    /// c m̲³ ∫ t² dH / (1 + t m̲)³
    pub numerator: Complex64,
    /// 1 - c m̲² ∫ t² dH / (1 + t m̲)², before squaring.
    pub denominator: Complex64,
    /// numerator / denominator².
    pub value: Complex64,
}

/// Bias integrand from a known m̲⁰(z).
pub fn bias_from_m(c: f64, h: &SpectralMeasure, z: Complex64, m: Complex64) -> Result<BiasTermResult> {
    let numerator = c * m * m * m * h.resolvent_moment(m, 2, 3);
    let denominator = 1.0 - c * m * m * h.resolvent_moment(m, 2, 2);
    if denominator.norm() < DEGENERACY_FLOOR {
        return Err(Error::DegenerateDenominator {
            op: "asymptotics::bias_term",
            z,
            magnitude: denominator.norm(),
        });
    }
    Ok(BiasTermResult {
        z,
        m_under: m,
        numerator,
        denominator,
        value: numerator / (denominator * denominator),
    })
}

/// m̲⁰ at z off the real axis, using m̲(z̄) = conj m̲(z).
pub fn companion_off_axis(c: f64, h: &SpectralMeasure, z: Complex64, opts: &SolverOptions) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::domain("asymptotics::bias_term", "z must be off the real axis"));
    }
    if z.im > 0.0 {
        Ok(solve_stieltjes_with(c, h, z, None, opts)?.m_under)
    } else {
        Ok(solve_stieltjes_with(c, h, z.conj(), None, opts)?.m_under.conj())
    }
}

pub fn bias_term(c: f64, h: &SpectralMeasure, z: Complex64, opts: &SolverOptions) -> Result<BiasTermResult> {
    let m = companion_off_axis(c, h, z, opts)?;
    bias_from_m(c, h, z, m)
}

/// Rectangle a_l ≤ Re z ≤ a_r, |Im z| ≤ height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub a_l: f64,
    pub a_r: f64,
    pub height: f64,
}

impl Contour {
    /// a_l = ½ and a_r = 3/2 of the bracket ends, height v₀h.
    pub fn around(c: f64, h: &SpectralMeasure, v0: f64, bandwidth: f64) -> Self {
        let b = crate::spectral_law::support_bracket(c, h);
        Self {
            a_l: 0.5 * b.lo,
            a_r: 1.5 * b.hi,
            height: v0 * bandwidth,
        }
    }
}

/// (1/(4πi)) ∮ K((x - z)/h) B(z) dz counter-clockwise over the contour, B the
/// bias integrand. Conjugate symmetry makes the result real:
/// (1/2π) [∫₀^V Re(g(a_r + iv) - g(a_l + iv)) dv - ∫ Im g(u + iV) du].
pub fn mean_diagnostic(
    c: f64,
    hm: &SpectralMeasure,
    kernel: &KernelSpec,
    bandwidth: f64,
    x: f64,
    contour: Contour,
) -> Result<f64> {
    let solver = SolverOptions::default();
    let g = |z: Complex64| -> Result<Complex64> {
        let b = bias_term(c, hm, z, &solver)?;
        Ok(kernel.value_complex((x - z) / bandwidth) * b.value)
    };
    let quad = QuadOptions::with_tol(1e-10, 1e-8);
    let mut failure: Option<Error> = None;
    let mut guard = |z: Complex64| match g(z) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            Complex64::new(0.0, 0.0)
        }
    };
    let v_top = contour.height;
    let reach = kernel.cutoff() * bandwidth;
    let mut pts = vec![contour.a_l, contour.a_r];
    for k in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
        pts.push(x + k * bandwidth);
    }
    pts.push(x - reach);
    pts.push(x + reach);
    let pts = sorted_points(pts, contour.a_l, contour.a_r);
    let top = integrate_breaks(|u| guard(Complex64::new(u, v_top)).im, &pts, quad).value;
    let right = integrate_breaks(|v| guard(Complex64::new(contour.a_r, v)).re, &[0.0, v_top], quad).value;
    let left = integrate_breaks(|v| guard(Complex64::new(contour.a_l, v)).re, &[0.0, v_top], quad).value;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((right - left - top) / (2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthOptions {
    /// Representative point for f″; defaults to the support midpoint.
    pub x0: Option<f64>,
    /// Precomputed σ²; computed at tol 1e-8 when absent.
    pub sigma2: Option<f64>,
    pub curve_points: usize,
}

impl Default for BandwidthOptions {
    fn default() -> Self {
        Self {
            x0: None,
            sigma2: None,
            curve_points: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthResult {
    pub h_star: f64,
    pub sigma2: f64,
    pub c1: f64,
    pub x0: f64,
    /// f″(x0) by five-point differences.
    pub curvature: f64,
    /// b - a, total support length.
    pub support_length: f64,
    pub n: usize,
    /// Numerical minimiser of the sampled curve.
    pub curve_argmin: f64,
    /// (h, L(h)) on a log grid over [1/n, 1].
    pub mise_curve: Vec<(f64, f64)>,
}

/// L(h) = (c₁h²)² + σ²(b - a)/(n²h²).
pub fn leading_mise(c1: f64, sigma2: f64, support_length: f64, n: usize, h: f64) -> f64 {
    let nf = n as f64;
    (c1 * h * h).powi(2) + sigma2 * support_length / (nf * nf * h * h)
}

/// h* = (σ²(b - a)/(2n²c₁²))^{1/6}.
pub fn optimal_bandwidth(c1: f64, sigma2: f64, support_length: f64, n: usize) -> f64 {
    let nf = n as f64;
    (sigma2 * support_length / (2.0 * nf * nf * c1 * c1)).powf(1.0 / 6.0)
}

/// Five-point second difference of the interpolated density at x0.
pub fn density_curvature(law: &LawSolution, x0: f64) -> Result<f64> {
    const OP: &str = "asymptotics::density_curvature";
    let iv = law
        .support
        .iter()
        .find(|iv| iv.lo < x0 && x0 < iv.hi)
        .ok_or_else(|| Error::CurvatureUnavailable {
            op: OP,
            msg: format!("x0 = {x0} is not inside the support"),
        })?;
    let d = (0.01 * iv.width()).min(0.25 * (x0 - iv.lo).min(iv.hi - x0));
    let spacing = law.max_spacing();
    if d < 2.0 * spacing {
        return Err(Error::CurvatureUnavailable {
            op: OP,
            msg: format!("step {d:.3e} is not resolved by grid spacing {spacing:.3e}"),
        });
    }
    let f = |k: f64| law.density_at(x0 + k * d);
    let f2 = (-f(2.0) + 16.0 * f(1.0) - 30.0 * f(0.0) + 16.0 * f(-1.0) - f(-2.0)) / (12.0 * d * d);
    if !f2.is_finite() {
        return Err(Error::CurvatureUnavailable {
            op: OP,
            msg: "non-finite second difference".into(),
        });
    }
    Ok(f2)
}

pub fn mise_and_optimal_bandwidth(kernel: &KernelSpec, law: &LawSolution, n: usize) -> Result<BandwidthResult> {
    mise_and_optimal_bandwidth_with(kernel, law, n, BandwidthOptions::default())
}

pub fn mise_and_optimal_bandwidth_with(
    kernel: &KernelSpec,
    law: &LawSolution,
    n: usize,
    opts: BandwidthOptions,
) -> Result<BandwidthResult> {
    const OP: &str = "asymptotics::mise_and_optimal_bandwidth";
    if n < 2 {
        return Err(Error::config(OP, "n must be at least 2"));
    }
    if opts.curve_points < 3 {
        return Err(Error::config(OP, "need at least 3 curve points"));
    }
    let hull = law.hull();
    let x0 = opts.x0.unwrap_or(0.5 * (hull.lo + hull.hi));
    let curvature = density_curvature(law, x0)?;
    let c1 = 0.5 * curvature * kernel.moments(1e-12).moment2;
    if c1.abs() < 1e-300 {
        return Err(Error::CurvatureUnavailable {
            op: OP,
            msg: format!("f″({x0}) vanishes; h* is unbounded"),
        });
    }
    let sigma2 = match opts.sigma2 {
        Some(s) => s,
        None => sigma2(kernel, 1e-8)?.sigma2,
    };
    let support_length = law.support_length();
    let h_star = optimal_bandwidth(c1, sigma2, support_length, n);

    let (lo, hi) = ((1.0 / n as f64).ln(), 0.0);
    let mise_curve: Vec<(f64, f64)> = (0..opts.curve_points)
        .map(|i| {
            let h = (lo + (hi - lo) * i as f64 / (opts.curve_points - 1) as f64).exp();
            (h, leading_mise(c1, sigma2, support_length, n, h))
        })
        .collect();
    let curve_argmin = argmin_log_parabola(&mise_curve);
    Ok(BandwidthResult {
        h_star,
        sigma2,
        c1,
        x0,
        curvature,
        support_length,
        n,
        curve_argmin,
        mise_curve,
    })
}

/// Discrete minimiser refined by a parabola through its neighbours in log h.
fn argmin_log_parabola(curve: &[(f64, f64)]) -> f64 {
    let i = curve
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if i == 0 || i + 1 == curve.len() {
        return curve[i].0;
    }
    let (x0, x1, x2) = (curve[i - 1].0.ln(), curve[i].0.ln(), curve[i + 1].0.ln());
    let (y0, y1, y2) = (curve[i - 1].1, curve[i].1, curve[i + 1].1);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if a <= 0.0 {
        return curve[i].0;
    }
    (-b / (2.0 * a)).exp()
}
