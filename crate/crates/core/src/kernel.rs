//! Smoothing kernels and their admissibility checks.
//!
//! A [`KernelSpec`] is a base shape under an affine change of variables,
//! K(u) = a · K₀(b (u - s)). Mass-preserving rescaling λK(λu) is
//! `dilated(λ)`, `scaled(a)` multiplies the mass, and `translated(s)`
//! shifts the centre.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_breaks, QuadOptions};

/// Beyond |u| = 38 the standard Gaussian is below 1e-16 relative to its peak.
pub const GAUSSIAN_CUTOFF: f64 = 38.0;
/// Quadrature truncation for Gaussian-type integrals; K′ is negligible outside.
pub const GAUSSIAN_QUAD_RANGE: f64 = 40.0;
/// Default half-width v₀ of the strip on which analyticity is checked.
pub const DEFAULT_STRIP_HALFWIDTH: f64 = 1.0;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// (2π)^{-1/2} e^{-u²/2}; entire.
    Gaussian,
    /// (3/(4√5))(1 - u²/5) on |u| ≤ √5, unit variance; not analytic.
    Epanechnikov,
    /// (15/16)(1 - u²)² on |u| ≤ 1; C¹ but not analytic.
    Biweight,
}

impl Shape {
    /// Half-width of the support, `None` when unbounded.
    fn radius(self) -> Option<f64> {
        match self {
            Shape::Gaussian => None,
            Shape::Epanechnikov => Some(SQRT5),
            Shape::Biweight => Some(1.0),
        }
    }

    /// Derivative of order `j` ≤ 2, at a complex point. Compact shapes use
    /// their polynomial piece inside the support strip and zero outside.
    fn eval(self, j: u8, w: Complex64) -> Complex64 {
        match self {
            Shape::Gaussian => {
                let g = (-0.5 * w * w).exp() * INV_SQRT_2PI;
                match j {
                    0 => g,
                    1 => -w * g,
                    _ => (w * w - 1.0) * g,
                }
            }
            Shape::Epanechnikov => {
                if w.re.abs() > SQRT5 {
                    return Complex64::new(0.0, 0.0);
                }
                let a = 3.0 / (4.0 * SQRT5);
                match j {
                    0 => a * (1.0 - w * w / 5.0),
                    1 => -a * 0.4 * w,
                    _ => Complex64::new(-a * 0.4, 0.0),
                }
            }
            Shape::Biweight => {
                if w.re.abs() > 1.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let a = 15.0 / 16.0;
                let q = 1.0 - w * w;
                match j {
                    0 => a * q * q,
                    1 => -4.0 * a * w * q,
                    _ => -4.0 * a * (1.0 - 3.0 * w * w),
                }
            }
        }
    }

    fn eval_real(self, j: u8, w: f64) -> f64 {
        match self {
            Shape::Gaussian => {
                let g = (-0.5 * w * w).exp() * INV_SQRT_2PI;
                match j {
                    0 => g,
                    1 => -w * g,
                    _ => (w * w - 1.0) * g,
                }
            }
            _ => self.eval(j, Complex64::new(w, 0.0)).re,
        }
    }

    /// ∫_{-∞}^w K₀.
    fn cdf(self, w: f64) -> f64 {
        match self {
            Shape::Gaussian => 0.5 * erfc(-w / std::f64::consts::SQRT_2),
            Shape::Epanechnikov => {
                let v = (w / SQRT5).clamp(-1.0, 1.0);
                0.5 + 0.75 * (v - v * v * v / 3.0)
            }
            Shape::Biweight => {
                let v = w.clamp(-1.0, 1.0);
                0.5 + (15.0 / 16.0) * (v - 2.0 * v.powi(3) / 3.0 + v.powi(5) / 5.0)
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Shape::Gaussian => "gaussian",
            Shape::Epanechnikov => "epanechnikov",
            Shape::Biweight => "biweight",
        }
    }
}

/// K(u) = amplitude · shape(dilation · (u - shift)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub shape: Shape,
    pub amplitude: f64,
    pub dilation: f64,
    pub shift: f64,
    /// v₀ in the strip condition.
    pub strip_halfwidth: f64,
}

impl KernelSpec {
    pub fn new(shape: Shape) -> Self {
        Self {
            shape,
            amplitude: 1.0,
            dilation: 1.0,
            shift: 0.0,
            strip_halfwidth: DEFAULT_STRIP_HALFWIDTH,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(Shape::Gaussian)
    }

    pub fn epanechnikov() -> Self {
        Self::new(Shape::Epanechnikov)
    }

    pub fn biweight() -> Self {
        Self::new(Shape::Biweight)
    }

    /// Parses `gaussian`, `epanechnikov` or `biweight`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Self::gaussian()),
            "epanechnikov" => Ok(Self::epanechnikov()),
            "biweight" | "quartic" => Ok(Self::biweight()),
            other => Err(Error::config("kernel::by_name", format!("unknown kernel '{other}'"))),
        }
    }

    /// a · K.
    pub fn scaled(mut self, a: f64) -> Self {
        self.amplitude *= a;
        self
    }

    /// λ K(λ u), mass preserving.
    pub fn dilated(self, lambda: f64) -> Self {
        self.scaled(lambda).argument_dilated(lambda)
    }

    /// K(λ u).
    pub fn argument_dilated(mut self, lambda: f64) -> Self {
        self.dilation *= lambda;
        self.shift /= lambda;
        self
    }

    /// K(u - m).
    pub fn translated(mut self, m: f64) -> Self {
        self.shift += m;
        self
    }

    pub fn id(&self) -> String {
        let mut s = self.shape.name().to_string();
        if self.amplitude != 1.0 {
            s.push_str(&format!("*{}", self.amplitude));
        }
        if self.dilation != 1.0 {
            s.push_str(&format!("@{}", self.dilation));
        }
        if self.shift != 0.0 {
            s.push_str(&format!("+{}", self.shift));
        }
        s
    }

    pub fn is_entire(&self) -> bool {
        self.shape.radius().is_none()
    }

    fn arg(&self, u: f64) -> f64 {
        self.dilation * (u - self.shift)
    }

    pub fn value(&self, u: f64) -> f64 {
        self.amplitude * self.shape.eval_real(0, self.arg(u))
    }

    pub fn deriv1(&self, u: f64) -> f64 {
        self.amplitude * self.dilation * self.shape.eval_real(1, self.arg(u))
    }

    pub fn deriv2(&self, u: f64) -> f64 {
        self.amplitude * self.dilation * self.dilation * self.shape.eval_real(2, self.arg(u))
    }

    /// K^{(j)}(z) for j ≤ 2. For compact shapes this is the piecewise
    /// polynomial extension, which is not analytic across the support edges.
    pub fn derivative_complex(&self, j: u8, z: Complex64) -> Complex64 {
        let w = self.dilation * (z - self.shift);
        self.amplitude * self.dilation.powi(j as i32) * self.shape.eval(j.min(2), w)
    }

    pub fn value_complex(&self, z: Complex64) -> Complex64 {
        self.derivative_complex(0, z)
    }

    /// 𝒦(u) = ∫_{-∞}^u K.
    pub fn antiderivative(&self, u: f64) -> Option<f64> {
        Some(self.amplitude / self.dilation * self.shape.cdf(self.arg(u)))
    }

    /// 𝒦(u), by quadrature when there is no closed form.
    pub fn cdf(&self, u: f64) -> f64 {
        self.antiderivative(u).unwrap_or_else(|| {
            let (lo, hi) = self.integration_range();
            if u <= lo {
                return 0.0;
            }
            let mut pts: Vec<f64> = self.panels().into_iter().filter(|&p| p < u).collect();
            pts.push(u.min(hi));
            integrate_breaks(|s| self.value(s), &pts, QuadOptions::with_tol(1e-13, 1e-13)).value
        })
    }

    /// |u - shift| beyond which K is zero or below 1e-16 of its peak.
    pub fn cutoff(&self) -> f64 {
        self.shape.radius().unwrap_or(GAUSSIAN_CUTOFF) / self.dilation
    }

    /// Interval carrying every integral over K, K′ and K″.
    pub fn integration_range(&self) -> (f64, f64) {
        let r = self.shape.radius().unwrap_or(GAUSSIAN_QUAD_RANGE) / self.dilation;
        (self.shift - r, self.shift + r)
    }

    /// Points where K′ or K″ is not smooth, for quadrature splitting.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.shape.radius() {
            Some(r) => vec![self.shift - r / self.dilation, self.shift + r / self.dilation],
            None => Vec::new(),
        }
    }

    /// Breakpoints of the integration range, including its ends.
    fn panels(&self) -> Vec<f64> {
        let (lo, hi) = self.integration_range();
        let mut pts = vec![lo, self.shift, hi];
        pts.extend(self.breakpoints());
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
        pts
    }

    /// ∫ g(u) du over the integration range.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, g: F, tol: f64) -> crate::quadrature::QuadResult<f64> {
        integrate_breaks(g, &self.panels(), QuadOptions::with_tol(tol, tol))
    }

    pub fn moments(&self, tol: f64) -> KernelMoments {
        KernelMoments {
            moment0: self.integrate(|u| self.value(u), tol).value,
            moment1: self.integrate(|u| u * self.value(u), tol).value,
            moment2: self.integrate(|u| u * u * self.value(u), tol).value,
            moment2_abs: self.integrate(|u| u * u * self.value(u).abs(), tol).value,
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian()
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelMoments {
    /// ∫K
    pub moment0: f64,
    /// ∫uK
    pub moment1: f64,
    /// ∫u²K
    pub moment2: f64,
    /// ∫u²|K|
    pub moment2_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    /// The quantity compared against the threshold.
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub kernel_id: String,
    pub moments: KernelMoments,
    pub checks: Vec<ConditionCheck>,
    /// Conditions the checker cannot settle numerically.
    pub notes: Vec<String>,
}

impl AdmissibilityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_MASS: &str = "unit_mass";
pub const CHECK_CENTERED: &str = "zero_first_moment";
pub const CHECK_SECOND_MOMENT: &str = "finite_second_abs_moment";
pub const CHECK_DERIV1: &str = "finite_abs_u_deriv1";
pub const CHECK_DERIV2: &str = "finite_abs_deriv2";
pub const CHECK_TAIL: &str = "tail_decay";
pub const CHECK_STRIP: &str = "strip_analyticity";

const MOMENT_TOL: f64 = 1e-10;
const TAIL_POINT: f64 = 50.0;
const TAIL_TOL: f64 = 1e-8;
const STRIP_LEVELS: usize = 8;

/// Finite-integral test: the integral over the natural range converges and
/// doubling the range changes it by less than `rel`.
fn finite_integral<F: Fn(f64) -> f64>(k: &KernelSpec, g: F, tol: f64) -> (bool, f64, String) {
    let (lo, hi) = k.integration_range();
    let inner = k.integrate(&g, tol);
    let pad = 0.5 * (hi - lo);
    let opts = QuadOptions::with_tol(tol, tol);
    let left = integrate(&g, lo - pad, lo, opts);
    let right = integrate(&g, hi, hi + pad, opts);
    let tail = left.value.abs() + right.value.abs();
    let ok = inner.converged && inner.value.is_finite() && tail <= 1e-6 * inner.value.abs().max(1e-300);
    let detail = if ok {
        format!("integral {:.6e}", inner.value)
    } else if !inner.converged {
        format!("quadrature did not converge (error {:.2e})", inner.error)
    } else {
        format!("tail mass {tail:.2e} does not vanish")
    };
    (ok, inner.value, detail)
}

/// Checks the kernel conditions one by one with quadrature tolerance `quad_tol`.
pub fn check_kernel(kernel: &KernelSpec, quad_tol: f64) -> AdmissibilityReport {
    let k = *kernel;
    let moments = k.moments(quad_tol);
    let mut checks = Vec::new();

    let mass_err = (moments.moment0 - 1.0).abs();
    checks.push(ConditionCheck {
        name: CHECK_MASS.into(),
        passed: mass_err <= MOMENT_TOL,
        value: moments.moment0,
        detail: format!("|∫K - 1| = {mass_err:.2e}"),
    });
    checks.push(ConditionCheck {
        name: CHECK_CENTERED.into(),
        passed: moments.moment1.abs() <= MOMENT_TOL,
        value: moments.moment1,
        detail: format!("|∫uK| = {:.2e}", moments.moment1.abs()),
    });

    for (name, g) in [
        (CHECK_SECOND_MOMENT, Box::new(move |u: f64| u * u * k.value(u).abs()) as Box<dyn Fn(f64) -> f64>),
        (CHECK_DERIV1, Box::new(move |u: f64| (u * k.deriv1(u)).abs())),
        (CHECK_DERIV2, Box::new(move |u: f64| k.deriv2(u).abs())),
    ] {
        let (passed, value, detail) = finite_integral(&k, g, quad_tol);
        checks.push(ConditionCheck {
            name: name.into(),
            passed,
            value,
            detail,
        });
    }

    let tail = [-TAIL_POINT, TAIL_POINT]
        .iter()
        .map(|&u| (u * k.value(u)).abs().max((u * k.deriv1(u)).abs()))
        .fold(0.0, f64::max);
    checks.push(ConditionCheck {
        name: CHECK_TAIL.into(),
        passed: tail < TAIL_TOL,
        value: tail,
        detail: format!("max |uK|, |uK′| at |u| = {TAIL_POINT}: {tail:.2e}"),
    });

    checks.push(strip_check(&k, quad_tol));

    let mut notes = Vec::new();
    if k.is_entire() {
        notes.push("analytic on every real interval: entire kernel".into());
    } else {
        notes.push(
            "analyticity on the growing interval [(a₂-a₁)/h, (a₁-a₂)/h] is not verifiable numerically".into(),
        );
    }
    AdmissibilityReport {
        kernel_id: k.id(),
        moments,
        checks,
        notes,
    }
}

/// For v on a grid in (0, v₀], ∫|K^{(j)}(u + iv)| du must stay bounded and,
/// since an analytic integrable K has shift-invariant line integrals,
/// ∫K^{(j)}(u + iv) du must equal ∫K^{(j)}(u) du.
fn strip_check(k: &KernelSpec, tol: f64) -> ConditionCheck {
    let v0 = k.strip_halfwidth;
    let mut worst_shift: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let mut converged = true;
    for j in 0..3u8 {
        let line = |v: f64| {
            let re = k.integrate(|u| k.derivative_complex(j, Complex64::new(u, v)).re, tol);
            let im = k.integrate(|u| k.derivative_complex(j, Complex64::new(u, v)).im, tol);
            let abs = k.integrate(|u| k.derivative_complex(j, Complex64::new(u, v)).norm(), tol);
            (Complex64::new(re.value, im.value), abs.value, re.converged && im.converged && abs.converged)
        };
        let (base, _, ok0) = line(0.0);
        converged &= ok0;
        for level in 1..=STRIP_LEVELS {
            for sign in [-1.0, 1.0] {
                let v = sign * v0 * level as f64 / STRIP_LEVELS as f64;
                let (val, abs, ok) = line(v);
                converged &= ok;
                worst_abs = worst_abs.max(abs);
                worst_shift = worst_shift.max((val - base).norm());
            }
        }
    }
    let bounded = converged && worst_abs.is_finite();
    let shift_tol = 1e-8_f64.max(100.0 * tol);
    let passed = bounded && worst_shift <= shift_tol;
    let detail = if !bounded {
        "strip integrals did not converge".to_string()
    } else if passed {
        format!("max ∫|K^(j)(u+iv)| = {worst_abs:.4e} for |v| ≤ {v0}")
    } else {
        format!(
            "line integrals move by {worst_shift:.2e} off the real axis: K is not analytic in |Im u| ≤ {v0}"
        )
    };
    ConditionCheck {
        name: CHECK_STRIP.into(),
        passed,
        value: worst_shift,
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        let k = KernelSpec::gaussian();
        assert!((k.value(0.0) - 0.398942).abs() < 1e-6);
        assert!((k.value(1.0) - 0.241971).abs() < 1e-6);
        assert!((k.antiderivative(-2.0).unwrap() - 0.02275).abs() < 1e-5);
        assert!(k.value(GAUSSIAN_CUTOFF) < 1e-16 * k.value(0.0));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for k in [KernelSpec::gaussian().dilated(1.7).translated(0.3), KernelSpec::biweight().dilated(0.6)] {
            for u in [-0.9, -0.2, 0.4, 1.1] {
                let d = 1e-5;
                let fd1 = (k.value(u + d) - k.value(u - d)) / (2.0 * d);
                let fd2 = (k.deriv1(u + d) - k.deriv1(u - d)) / (2.0 * d);
                assert!((k.deriv1(u) - fd1).abs() < 1e-7, "{} at {u}", k.id());
                assert!((k.deriv2(u) - fd2).abs() < 1e-6, "{} at {u}", k.id());
            }
        }
    }

    #[test]
    fn antiderivatives_integrate_kernels() {
        for k in [KernelSpec::gaussian(), KernelSpec::epanechnikov(), KernelSpec::biweight().translated(0.5)] {
            let (lo, _) = k.integration_range();
            for u in [-0.7f64, 0.1, 0.9] {
                let q = integrate_breaks(|s| k.value(s), &[lo, u.min(k.shift), u], QuadOptions::default());
                assert!((k.antiderivative(u).unwrap() - q.value).abs() < 1e-10, "{}", k.id());
            }
        }
    }

    #[test]
    fn moments_of_base_shapes() {
        for k in [KernelSpec::gaussian(), KernelSpec::epanechnikov()] {
            let m = k.moments(1e-12);
            assert!((m.moment0 - 1.0).abs() < 1e-10);
            assert!(m.moment1.abs() < 1e-10);
            assert!((m.moment2 - 1.0).abs() < 1e-10);
        }
        let m = KernelSpec::biweight().moments(1e-12);
        assert!((m.moment2 - 1.0 / 7.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_is_admissible() {
        let r = check_kernel(&KernelSpec::gaussian(), 1e-12);
        assert!(r.all_passed(), "{:?}", r.failed());
    }

    #[test]
    fn doubled_mass_fails_only_mass() {
        let r = check_kernel(&KernelSpec::gaussian().scaled(2.0), 1e-12);
        assert_eq!(r.failed(), vec![CHECK_MASS]);
    }

    #[test]
    fn epanechnikov_fails_strip_only() {
        let r = check_kernel(&KernelSpec::epanechnikov(), 1e-12);
        assert_eq!(r.failed(), vec![CHECK_STRIP]);
        // The polynomial piece gives ∫K(u + iv)du = 1 + 0.3v² instead of 1.
        let v = 0.5;
        let k = KernelSpec::epanechnikov();
        let q = k.integrate(|u| k.value_complex(Complex64::new(u, v)).re, 1e-12).value;
        assert!((q - (1.0 + 0.3 * v * v)).abs() < 1e-10);
    }

    #[test]
    fn by_name_parses() {
        assert_eq!(KernelSpec::by_name("Gaussian").unwrap(), KernelSpec::gaussian());
        assert!(KernelSpec::by_name("box").is_err());
    }
}
