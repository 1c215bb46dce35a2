//! Limiting spectral law F^{c,H} of sample covariance matrices: companion
//! Stieltjes transform, support, and density.

mod measure;
mod spline;
mod stieltjes;
mod support;

pub use measure::{Atom, SpectralMeasure};
pub use spline::CubicSpline;
pub use stieltjes::{
    companion_to_m, fixed_point_residual, identity_t_closed_form, inverse_map,
    inverse_map_derivative, solve_stieltjes, solve_stieltjes_with, ClosedForm, SolverOptions,
    StieltjesValue,
};
pub use support::{find_support, support_bracket, Interval, SCAN_POINTS};

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_breaks, QuadOptions};

/// Default number of density grid points per support interval.
pub const DEFAULT_GRID_POINTS: usize = 4001;

/// ε = max(1e-6, 1e-3 · width) for density recovery near the real axis.
pub fn default_epsilon(support: &[Interval]) -> f64 {
    let width = support.last().map(|l| l.hi).unwrap_or(1.0) - support.first().map(|f| f.lo).unwrap_or(0.0);
    (1e-3 * width).max(1e-6)
}

/// Density f_{c,H}(x) as (1/π) Im m(x + iε), Richardson-extrapolated from
/// ε and ε/2, and zero off the support.
pub fn density(c: f64, h: &SpectralMeasure, x: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("spectral_law::density", "epsilon must be positive"));
    }
    let support = find_support(c, h)?;
    if !support.iter().any(|iv| iv.contains(x)) {
        return Ok(0.0);
    }
    Ok(point_density(c, h, x, epsilon, None, &SolverOptions::default())?.0)
}

/// Density at a point inside the support plus the m̲ at x + iε/2 for
/// warm-starting a neighbour.
fn point_density(
    c: f64,
    h: &SpectralMeasure,
    x: f64,
    epsilon: f64,
    init: Option<Complex64>,
    opts: &SolverOptions,
) -> Result<(f64, Option<Complex64>)> {
    if opts.closed_form_fast_path {
        if let Some(t) = h.as_point() {
            if x > 0.0 {
                let cf = identity_t_closed_form(c, Complex64::new(x / t, 0.0))?;
                let m_under = cf.m_under / t;
                return Ok(((m_under.im / (c * PI)).max(0.0), None));
            }
        }
    }
    let at = |eps: f64, init: Option<Complex64>| {
        solve_stieltjes_with(c, h, Complex64::new(x, eps), init, opts)
    };
    let coarse = at(epsilon, init)?;
    let fine = at(0.5 * epsilon, Some(coarse.m_under))?;
    let f = (2.0 * fine.m.im - coarse.m.im) / PI;
    Ok((f.max(0.0), Some(coarse.m_under)))
}

#[derive(Debug, Clone, Copy)]
pub struct LawOptions {
    pub grid_points: usize,
    pub epsilon: Option<f64>,
    pub solver: SolverOptions,
}

impl Default for LawOptions {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            epsilon: None,
            solver: SolverOptions::default(),
        }
    }
}

/// Density on one support interval, tabulated uniformly in θ where
/// x = lo + (hi - lo)(1 - cos θ)/2. The square-root edges become smooth in θ.
#[derive(Debug, Clone)]
struct Piece {
    interval: Interval,
    spline: CubicSpline,
}

impl Piece {
    fn theta(&self, x: f64) -> f64 {
        let s = ((x - self.interval.lo) / self.interval.width()).clamp(0.0, 1.0);
        2.0 * s.sqrt().asin()
    }

    fn x_of(&self, theta: f64) -> f64 {
        self.interval.lo + self.interval.width() * 0.5 * (1.0 - theta.cos())
    }
}

/// Solved limiting law: support, density grid, and interpolant.
#[derive(Debug, Clone)]
pub struct LawSolution {
    pub c: f64,
    pub h: SpectralMeasure,
    pub support: Vec<Interval>,
    pub epsilon: f64,
    /// (x, f_{c,H}(x)) pairs, ascending in x.
    pub density_grid: Vec<(f64, f64)>,
    solver: SolverOptions,
    pieces: Vec<Piece>,
}

impl LawSolution {
    pub fn solve(c: f64, h: &SpectralMeasure) -> Result<Self> {
        Self::solve_with(c, h, LawOptions::default())
    }

    pub fn solve_with(c: f64, h: &SpectralMeasure, opts: LawOptions) -> Result<Self> {
        if opts.grid_points < 8 {
            return Err(Error::config("spectral_law::LawSolution", "need at least 8 grid points"));
        }
        let support = find_support(c, h)?;
        let epsilon = opts.epsilon.unwrap_or_else(|| default_epsilon(&support));
        let n = opts.grid_points;
        let mut pieces = Vec::with_capacity(support.len());
        let mut density_grid = Vec::with_capacity(n * support.len());
        for iv in &support {
            let dtheta = PI / (n - 1) as f64;
            let mut values = Vec::with_capacity(n);
            let mut warm = None;
            for k in 0..n {
                let theta = k as f64 * dtheta;
                let x = iv.lo + iv.width() * 0.5 * (1.0 - theta.cos());
                let (f, next) = point_density(c, h, x, epsilon, warm, &opts.solver)?;
                warm = next;
                values.push(f);
                density_grid.push((x, f));
            }
            pieces.push(Piece {
                interval: *iv,
                spline: CubicSpline::uniform(0.0, dtheta, values),
            });
        }
        Ok(Self {
            c,
            h: h.clone(),
            support,
            epsilon,
            density_grid,
            solver: opts.solver,
            pieces,
        })
    }

    /// Convex hull [a, b] of the support.
    pub fn hull(&self) -> Interval {
        Interval {
            lo: self.support[0].lo,
            hi: self.support[self.support.len() - 1].hi,
        }
    }

    /// Total length of the support intervals.
    pub fn support_length(&self) -> f64 {
        self.support.iter().map(Interval::width).sum()
    }

    pub fn in_support(&self, x: f64) -> bool {
        self.support.iter().any(|iv| iv.contains(x))
    }

    /// Largest gap between neighbouring grid abscissae.
    pub fn max_spacing(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                let n = p.spline.len();
                let dt = PI / (n - 1) as f64;
                (0..n - 1)
                    .map(|k| p.x_of((k + 1) as f64 * dt) - p.x_of(k as f64 * dt))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Interpolated density; zero off the support.
    pub fn density_at(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.interval.contains(x))
            .map(|p| p.spline.eval(p.theta(x)).max(0.0))
            .unwrap_or(0.0)
    }

    /// Density from a fresh Stieltjes solve (no interpolation).
    pub fn density_exact(&self, x: f64) -> Result<f64> {
        if !self.in_support(x) {
            return Ok(0.0);
        }
        Ok(point_density(self.c, &self.h, x, self.epsilon, None, &self.solver)?.0)
    }

    pub fn stieltjes(&self, z: Complex64) -> Result<StieltjesValue> {
        solve_stieltjes_with(self.c, &self.h, z, None, &self.solver)
    }

    /// ∫ over one piece up to `x`, integrating in θ.
    fn piece_mass(&self, piece: &Piece, x: f64) -> f64 {
        let top = piece.theta(x.min(piece.interval.hi));
        if top <= 0.0 {
            return 0.0;
        }
        let half_width = 0.5 * piece.interval.width();
        integrate(
            |theta: f64| piece.spline.eval(theta).max(0.0) * half_width * theta.sin(),
            0.0,
            top,
            QuadOptions::with_tol(1e-13, 1e-12),
        )
        .value
    }

    /// ∫_{lo}^{hi} g(y) f(y) dy against the interpolated density, integrating
    /// each support piece in θ so the square-root edges cost nothing.
    /// `breaks` are extra y-points where g changes scale.
    pub fn integrate_against<G: Fn(f64) -> f64>(
        &self,
        g: G,
        lo: f64,
        hi: f64,
        breaks: &[f64],
        opts: QuadOptions,
    ) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.interval.hi > lo && p.interval.lo < hi)
            .map(|p| {
                let (a, b) = (lo.max(p.interval.lo), hi.min(p.interval.hi));
                let mut thetas = vec![p.theta(a), p.theta(b)];
                thetas.extend(breaks.iter().filter(|&&y| y > a && y < b).map(|&y| p.theta(y)));
                thetas.sort_by(f64::total_cmp);
                thetas.dedup();
                let half_width = 0.5 * p.interval.width();
                integrate_breaks(
                    |theta: f64| {
                        let y = p.x_of(theta);
                        g(y) * p.spline.eval(theta).max(0.0) * half_width * theta.sin()
                    },
                    &thetas,
                    opts,
                )
                .value
            })
            .sum()
    }

    /// Total mass of the interpolated density.
    pub fn mass(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| self.piece_mass(p, p.interval.hi))
            .sum()
    }

    /// F^{c,H}(x) from the interpolated density.
    pub fn cdf(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.interval.lo < x)
            .map(|p| self.piece_mass(p, x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp_density(c: f64, x: f64) -> f64 {
        let (a, b) = ((1.0 - c.sqrt()).powi(2), (1.0 + c.sqrt()).powi(2));
        if x <= a || x >= b {
            0.0
        } else {
            ((b - x) * (x - a)).sqrt() / (2.0 * PI * c * x)
        }
    }

    #[test]
    fn density_at_one_matches_closed_form() {
        let f = density(0.25, &SpectralMeasure::identity(), 1.0, 2e-3).unwrap();
        assert!((f - 0.616338).abs() < 1e-4);
        assert!((f - mp_density(0.25, 1.0)).abs() < 1e-10);
    }

    #[test]
    fn density_vanishes_off_support() {
        assert_eq!(density(0.25, &SpectralMeasure::identity(), 0.1, 2e-3).unwrap(), 0.0);
        assert_eq!(density(0.25, &SpectralMeasure::identity(), 3.0, 2e-3).unwrap(), 0.0);
    }

    #[test]
    fn extrapolated_density_without_fast_path() {
        let h = SpectralMeasure::identity();
        let opts = SolverOptions {
            closed_form_fast_path: false,
            ..SolverOptions::default()
        };
        for x in [0.5, 1.0, 1.8] {
            let (f, _) = point_density(0.25, &h, x, 2e-3, None, &opts).unwrap();
            assert!((f - mp_density(0.25, x)).abs() < 1e-5, "x = {x}: {f}");
        }
    }

    #[test]
    fn grid_interpolant_tracks_closed_form() {
        let law = LawSolution::solve(0.25, &SpectralMeasure::identity()).unwrap();
        for x in [0.26, 0.4, 1.0, 1.7, 2.24] {
            assert!((law.density_at(x) - mp_density(0.25, x)).abs() < 1e-6, "x = {x}");
        }
        assert!((law.mass() - 1.0).abs() < 1e-6);
        assert!((law.cdf(3.0) - 1.0).abs() < 1e-6);
        assert_eq!(law.cdf(0.1), 0.0);
        assert_eq!(law.density_at(2.5), 0.0);
    }

    #[test]
    fn grid_spacing_reported() {
        let opts = LawOptions {
            grid_points: 101,
            ..LawOptions::default()
        };
        let law = LawSolution::solve_with(0.25, &SpectralMeasure::identity(), opts).unwrap();
        let s = law.max_spacing();
        assert!(s > 0.03 && s < 0.035, "{s}");
    }
}
