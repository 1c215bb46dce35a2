//! Companion Stieltjes transform of the limiting spectral law.
//!
//! For Im z > 0, m̲(z) is the unique upper-half-plane solution of
//!
//! ```text
//! m̲ = -1 / (z - c ∫ t dH(t) / (1 + t m̲)),
//! ```
//!
//! equivalently of `z = z(m̲) := -1/m̲ + c ∫ t/(1 + t m̲) dH(t)`.
//! The solver runs the damped fixed-point map until the residual is small,
//! then polishes with Newton steps on the inverse map. Near the real axis the
//! damped map contracts slowly; the solver then walks down from a larger
//! imaginary part, warm-starting each level.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::measure::SpectralMeasure;
use crate::error::{Error, Result};

const POLE_EPS: f64 = 1e-14;
/// Damped iterations before falling back to continuation in Im z.
const STALL_ITERATIONS: usize = 200;
/// Cold starts with Im z below this fraction of 1 + |Re z| go straight to
/// continuation; the damped map is too weakly contractive near the axis and
/// can settle on a spurious real root of the inverse map.
const COLD_START_RATIO: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StieltjesValue {
    pub z: Complex64,
    /// Companion transform m̲(z).
    pub m_under: Complex64,
    /// Transform m(z) of the limiting law of the p-dimensional ESD.
    pub m: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight α of the damped update m ← (1-α)m + α G(m).
    pub damping: f64,
    /// Residual below which Newton polishing takes over.
    pub newton_switch: f64,
    /// Use the closed form when H is a point mass.
    pub closed_form_fast_path: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
            damping: 0.5,
            newton_switch: 1e-3,
            closed_form_fast_path: true,
        }
    }
}

/// ∫ t/(1 + t m) dH.
fn s_integral(h: &SpectralMeasure, m: Complex64) -> Complex64 {
    h.resolvent_moment(m, 1, 1)
}

/// The fixed-point map G(m̲) = -(z - c ∫ t dH/(1 + t m̲))^{-1}.
fn fixed_point_map(c: f64, h: &SpectralMeasure, z: Complex64, m: Complex64) -> Complex64 {
    -1.0 / (z - c * s_integral(h, m))
}

/// |m̲ - G(m̲)|.
pub fn fixed_point_residual(c: f64, h: &SpectralMeasure, z: Complex64, m: Complex64) -> f64 {
    (m - fixed_point_map(c, h, z, m)).norm()
}

fn inverse_unchecked(c: f64, h: &SpectralMeasure, m: Complex64) -> Complex64 {
    -1.0 / m + c * s_integral(h, m)
}

/// dz/dm̲ of the inverse map.
pub fn inverse_map_derivative(c: f64, h: &SpectralMeasure, m: Complex64) -> Complex64 {
    1.0 / (m * m) - c * h.resolvent_moment(m, 2, 2)
}

/// z = -1/m̲ + c ∫ t/(1 + t m̲) dH(t).
pub fn inverse_map(c: f64, h: &SpectralMeasure, m_under: Complex64) -> Result<Complex64> {
    const OP: &str = "spectral_law::inverse_map";
    if m_under.norm() < POLE_EPS {
        return Err(Error::domain(OP, "m must be non-zero"));
    }
    let (distance, atom) = h.nearest_pole(m_under);
    if distance < POLE_EPS {
        return Err(Error::Pole {
            op: OP,
            m_under,
            atom,
            distance,
        });
    }
    Ok(inverse_unchecked(c, h, m_under))
}

/// Converts the companion transform to m(z) using
/// m̲ = -(1-c)/z + c m.
pub fn companion_to_m(c: f64, h: &SpectralMeasure, z: Complex64, m_under: Complex64) -> Complex64 {
    if c == 0.0 {
        // F^{0,H} = H.
        h.atoms().iter().map(|a| a.w / (a.t - z)).sum()
    } else {
        (m_under + (1.0 - c) / z) / c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub m_under: Complex64,
    pub m: Complex64,
}

/// Closed-form companion transform for T = I:
/// m̲(z) = [-(z + 1 - c) + √((z - 1 - c)² - 4c)] / (2z), with the branch
/// giving Im m̲ > 0 for Im z > 0. On the real axis outside the support
/// the real root on the increasing branch of the inverse map is returned.
pub fn identity_t_closed_form(c: f64, z: Complex64) -> Result<ClosedForm> {
    const OP: &str = "spectral_law::identity_t_closed_form";
    if !(0.0..1.0).contains(&c) || c == 0.0 {
        return Err(Error::domain(OP, format!("c = {c} must lie in (0, 1)")));
    }
    if z.im < 0.0 {
        return Err(Error::domain(OP, "Im z must be >= 0"));
    }
    if z.norm() == 0.0 {
        return Err(Error::domain(OP, "z must be non-zero"));
    }
    let disc = (z - 1.0 - c).powi(2) - 4.0 * c;
    let root = disc.sqrt();
    let b = -(z + 1.0 - c);
    let roots = [(b + root) / (2.0 * z), (b - root) / (2.0 * z)];
    let slope = |m: Complex64| {
        let mr = m.re;
        1.0 / (mr * mr) - c / ((1.0 + mr) * (1.0 + mr))
    };
    let m_under = if z.im > 0.0 {
        let best = if roots[0].im >= roots[1].im { roots[0] } else { roots[1] };
        if best.im < -1e-14 * (1.0 + best.norm()) {
            return Err(Error::Branch { op: OP, z });
        }
        best
    } else {
        let real = |m: Complex64| m.im.abs() <= 1e-12 * (1.0 + m.norm());
        if real(roots[0]) && real(roots[1]) {
            // Off the support the valid root has z'(m̲) > 0; at an edge the
            // two roots merge and z' vanishes.
            let m = if slope(roots[0]) >= slope(roots[1]) { roots[0] } else { roots[1] };
            if slope(m) < -1e-8 * (1.0 + 1.0 / (m.re * m.re)) {
                return Err(Error::Branch { op: OP, z });
            }
            Complex64::new(m.re, 0.0)
        } else if roots[0].im >= 0.0 {
            roots[0]
        } else if roots[1].im >= 0.0 {
            roots[1]
        } else {
            return Err(Error::Branch { op: OP, z });
        }
    };
    let m = (m_under + (1.0 - c) / z) / c;
    Ok(ClosedForm { m_under, m })
}

/// Solves for m̲(z) with default tuning except `tol` and `max_iter`.
pub fn solve_stieltjes(
    c: f64,
    h: &SpectralMeasure,
    z: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<StieltjesValue> {
    let opts = SolverOptions {
        tol,
        max_iter,
        ..SolverOptions::default()
    };
    solve_stieltjes_with(c, h, z, None, &opts)
}

/// Solves for m̲(z), optionally warm-started from `init` (ignored unless
/// it lies in the upper half plane).
pub fn solve_stieltjes_with(
    c: f64,
    h: &SpectralMeasure,
    z: Complex64,
    init: Option<Complex64>,
    opts: &SolverOptions,
) -> Result<StieltjesValue> {
    const OP: &str = "spectral_law::solve_stieltjes";
    if !(z.im > 0.0) {
        return Err(Error::domain(OP, format!("Im z = {} must be positive", z.im)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::domain(OP, "tol must be positive"));
    }
    if !(0.0..1.0).contains(&c) {
        return Err(Error::domain(OP, format!("c = {c} must lie in [0, 1)")));
    }
    let finish = |m_under: Complex64, iterations: usize| {
        let residual = fixed_point_residual(c, h, z, m_under);
        StieltjesValue {
            z,
            m_under,
            m: companion_to_m(c, h, z, m_under),
            residual,
            iterations,
        }
    };
    if c == 0.0 {
        return Ok(finish(-1.0 / z, 0));
    }

    let mut warm = false;
    let mut m = match init {
        Some(m0) if m0.im > 0.0 && m0.is_finite() => {
            warm = true;
            m0
        }
        _ => -1.0 / z,
    };
    if opts.closed_form_fast_path {
        if let Some(t) = h.as_point() {
            if let Ok(cf) = identity_t_closed_form(c, z / t) {
                m = cf.m_under / t;
                warm = true;
            }
        }
    }

    let mut iterations = 0;
    if !warm && z.im < COLD_START_RATIO * (1.0 + z.re.abs()) {
        let (mc, used) = continuation(c, h, z, Complex64::new(0.0, 0.0), opts);
        m = mc;
        iterations += used;
    }
    let mut residual = fixed_point_residual(c, h, z, m);
    let mut best = (m, residual);

    // Damped fixed-point phase.
    let damped_budget = STALL_ITERATIONS.min(opts.max_iter);
    while residual >= opts.newton_switch && residual >= opts.tol && iterations < damped_budget {
        m = (1.0 - opts.damping) * m + opts.damping * fixed_point_map(c, h, z, m);
        residual = fixed_point_residual(c, h, z, m);
        iterations += 1;
        if residual < best.1 {
            best = (m, residual);
        }
    }

    if residual >= opts.newton_switch && residual >= opts.tol && iterations < opts.max_iter {
        let (mc, used) = continuation(c, h, z, best.0, opts);
        iterations += used;
        let rc = fixed_point_residual(c, h, z, mc);
        if rc < best.1 {
            best = (mc, rc);
        }
        m = best.0;
        residual = best.1;
    }

    // Newton polishing.
    while residual >= opts.tol && iterations < opts.max_iter {
        iterations += 1;
        match newton_step(c, h, z, m) {
            Some(next) => {
                m = next;
                residual = fixed_point_residual(c, h, z, m);
            }
            None => {
                m = (1.0 - opts.damping) * m + opts.damping * fixed_point_map(c, h, z, m);
                residual = fixed_point_residual(c, h, z, m);
            }
        }
        if residual < best.1 {
            best = (m, residual);
        }
    }

    if best.1 < opts.tol {
        Ok(finish(best.0, iterations))
    } else {
        Err(Error::MaxIterExceeded {
            op: OP,
            iterations,
            best: best.0,
            residual: best.1,
        })
    }
}

/// One backtracking Newton step on z(m̲) - z = 0 that stays in the upper
/// half plane and decreases |z(m̲) - z|.
fn newton_step(c: f64, h: &SpectralMeasure, z: Complex64, m: Complex64) -> Option<Complex64> {
    let f = inverse_unchecked(c, h, m) - z;
    let fp = inverse_map_derivative(c, h, m);
    if !(fp.norm() > 0.0) || !f.is_finite() {
        return None;
    }
    let step = f / fp;
    let f0 = f.norm();
    let mut lambda = 1.0;
    while lambda > 1e-10 {
        let cand = m - lambda * step;
        if cand.im > 0.0 && h.nearest_pole(cand).0 > POLE_EPS {
            let fc = (inverse_unchecked(c, h, cand) - z).norm();
            if fc < f0 || fc == 0.0 {
                return Some(cand);
            }
        }
        lambda *= 0.5;
    }
    None
}

/// Tracks the root from z + i(V - v) down to z, halving the imaginary part.
fn continuation(
    c: f64,
    h: &SpectralMeasure,
    z: Complex64,
    start: Complex64,
    opts: &SolverOptions,
) -> (Complex64, usize) {
    let scale = 1.0 + z.re.abs();
    let top = (2.0 * z.im).max(scale);
    let mut used = 0;
    let mut level = Complex64::new(z.re, top);
    let mut m = if start.im > 0.0 { start } else { -1.0 / level };
    // Converge at the top level with the damped map.
    for _ in 0..STALL_ITERATIONS {
        if used >= opts.max_iter || fixed_point_residual(c, h, level, m) < opts.newton_switch {
            break;
        }
        m = (1.0 - opts.damping) * m + opts.damping * fixed_point_map(c, h, level, m);
        used += 1;
    }
    loop {
        for _ in 0..50 {
            if used >= opts.max_iter {
                return (m, used);
            }
            if fixed_point_residual(c, h, level, m) < 1e-10 {
                break;
            }
            used += 1;
            match newton_step(c, h, level, m) {
                Some(next) => m = next,
                None => {
                    m = (1.0 - opts.damping) * m
                        + opts.damping * fixed_point_map(c, h, level, m);
                }
            }
        }
        if level.im <= z.im {
            return (m, used);
        }
        level.im = (0.5 * level.im).max(z.im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_law::measure::Atom;

    fn two_atoms() -> SpectralMeasure {
        SpectralMeasure::new(vec![Atom { t: 1.0, w: 0.5 }, Atom { t: 3.0, w: 0.5 }]).unwrap()
    }

    fn no_fast_path() -> SolverOptions {
        SolverOptions {
            closed_form_fast_path: false,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn zero_ratio_gives_minus_inverse_z() {
        let v = solve_stieltjes(0.0, &two_atoms(), Complex64::i(), 1e-12, 100).unwrap();
        assert!((v.m_under - Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn rejects_lower_half_plane() {
        let h = SpectralMeasure::identity();
        let err = solve_stieltjes(0.25, &h, Complex64::new(1.0, 0.0), 1e-12, 100).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
        assert!(err.to_string().contains("solve_stieltjes"));
    }

    #[test]
    fn iterative_path_matches_closed_form() {
        let h = SpectralMeasure::identity();
        let z = Complex64::new(1.0, 0.01);
        let v = solve_stieltjes_with(0.25, &h, z, None, &no_fast_path()).unwrap();
        let cf = identity_t_closed_form(0.25, z).unwrap();
        assert!((v.m_under - cf.m_under).norm() < 1e-8);
        assert!((v.m - cf.m).norm() < 1e-8);
    }

    #[test]
    fn reaches_tiny_imaginary_part() {
        let h = two_atoms();
        for x in [0.2, 1.0, 2.0, 4.0, 9.0] {
            let z = Complex64::new(x, 1e-7);
            let v = solve_stieltjes_with(0.5, &h, z, None, &no_fast_path()).unwrap();
            assert!(v.residual < 1e-12);
            assert!(v.m_under.im > 0.0);
        }
    }

    #[test]
    fn inverse_map_of_unit_atom_at_i() {
        let c = 0.3;
        let z = inverse_map(c, &SpectralMeasure::identity(), Complex64::i()).unwrap();
        let expected = Complex64::i() + c * (Complex64::new(1.0, -1.0)) / 2.0;
        assert!((z - expected).norm() < 1e-15);
    }

    #[test]
    fn inverse_map_real_off_poles() {
        let z = inverse_map(0.25, &SpectralMeasure::identity(), Complex64::new(-2.0, 0.0)).unwrap();
        assert_eq!(z.im, 0.0);
        assert!((z.re - (0.5 + 0.25 * 1.0 / (1.0 - 2.0))).abs() < 1e-15);
    }

    #[test]
    fn inverse_map_pole() {
        let err = inverse_map(0.25, &SpectralMeasure::identity(), Complex64::new(-1.0, 0.0));
        assert!(matches!(err, Err(Error::Pole { .. })));
    }

    #[test]
    fn round_trip_through_inverse_map() {
        let h = SpectralMeasure::identity();
        let z = Complex64::new(1.5, 0.01);
        let v = solve_stieltjes_with(0.25, &h, z, None, &no_fast_path()).unwrap();
        let back = inverse_map(0.25, &h, v.m_under).unwrap();
        assert!((back - z).norm() < 1e-9);
    }

    #[test]
    fn closed_form_real_outside_support() {
        let cf = identity_t_closed_form(0.25, Complex64::new(3.0, 0.0)).unwrap();
        assert!(cf.m_under.im.abs() < 1e-12);
        // Stieltjes transform of a law on [0, 3) is negative at z = 3.
        assert!(cf.m_under.re < 0.0);
        let cf = identity_t_closed_form(0.25, Complex64::new(0.1, 0.0)).unwrap();
        assert!(cf.m_under.im.abs() < 1e-12);
    }

    #[test]
    fn closed_form_near_unit_ratio_edge() {
        let c = 1.0 - 1e-9;
        let cf = identity_t_closed_form(c, Complex64::new(4.0, 1e-6)).unwrap();
        assert!(cf.m_under.is_finite());
        assert!(cf.m_under.norm() < 10.0);
    }

    #[test]
    fn companion_relation_definition() {
        let h = two_atoms();
        let z = Complex64::new(2.0, 0.3);
        let v = solve_stieltjes(0.5, &h, z, 1e-13, 1000).unwrap();
        let lhs = v.m_under;
        let rhs = -(1.0 - 0.5) / z + 0.5 * v.m;
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn max_iter_reports_best_iterate() {
        let h = two_atoms();
        let z = Complex64::new(2.0, 1e-4);
        let opts = SolverOptions {
            max_iter: 2,
            closed_form_fast_path: false,
            tol: 1e-14,
            ..SolverOptions::default()
        };
        match solve_stieltjes_with(0.5, &h, z, None, &opts) {
            Err(Error::MaxIterExceeded { residual, best, .. }) => {
                assert!(residual.is_finite());
                assert!(best.im > 0.0);
            }
            other => panic!("expected MaxIterExceeded, got {other:?}"),
        }
    }
}
