//! Support of the limiting law via the real inverse map.
//!
//! On the real m̲-axis away from the poles -1/t, a point z(m̲) lies outside
//! the support exactly when z'(m̲) > 0. The scan locates the zeros of z'
//! on each pole-free segment, refines them by bisection, and returns the
//! complement of the images of the increasing pieces.

use serde::{Deserialize, Serialize};

use super::measure::SpectralMeasure;
use crate::error::{Error, Result};

/// Grid points per pole-free segment of the m̲-axis.
pub const SCAN_POINTS: usize = 10_000;
const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// [λ_min(T)(1-√c)², λ_max(T)(1+√c)²], which contains the support.
pub fn support_bracket(c: f64, h: &SpectralMeasure) -> Interval {
    let s = c.sqrt();
    Interval {
        lo: h.min_location() * (1.0 - s).powi(2),
        hi: h.max_location() * (1.0 + s).powi(2),
    }
}

fn z_real(c: f64, h: &SpectralMeasure, m: f64) -> f64 {
    -1.0 / m + c * h.atoms().iter().map(|a| a.w * a.t / (1.0 + a.t * m)).sum::<f64>()
}

fn z_prime(c: f64, h: &SpectralMeasure, m: f64) -> f64 {
    1.0 / (m * m)
        - c * h
            .atoms()
            .iter()
            .map(|a| {
                let d = 1.0 + a.t * m;
                a.w * a.t * a.t / (d * d)
            })
            .sum::<f64>()
}

/// How z(m̲) behaves at one end of a pole-free segment.
#[derive(Clone, Copy)]
enum End {
    /// m̲ → -∞: z → 0⁺.
    MinusInfinity,
    /// m̲ → 0⁻: z → +∞.
    Zero,
    /// Approaching a pole from the right: z → +∞ while decreasing.
    PoleRight,
    /// Approaching a pole from the left: z → -∞ while decreasing.
    PoleLeft,
}

struct Segment {
    points: Vec<f64>,
    left: End,
    right: End,
}

fn segments(h: &SpectralMeasure) -> Vec<Segment> {
    let poles: Vec<f64> = h.atoms().iter().map(|a| -1.0 / a.t).collect();
    let mut out = Vec::with_capacity(poles.len() + 1);

    // (-∞, p_1): log-spaced offsets from the pole.
    let p1 = poles[0];
    let (lo, hi) = ((1e-10 * p1.abs()).ln(), (1e10 * p1.abs()).ln());
    let left: Vec<f64> = (0..SCAN_POINTS)
        .rev()
        .map(|i| p1 - (lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).exp())
        .collect();
    out.push(Segment {
        points: left,
        left: End::MinusInfinity,
        right: End::PoleLeft,
    });

    // Finite segments (p_k, p_{k+1}) and (p_K, 0), clustered at both ends.
    let mut ends = poles.clone();
    ends.push(0.0);
    for (k, w) in ends.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let pts = (1..=SCAN_POINTS)
            .map(|i| {
                let u = i as f64 / (SCAN_POINTS + 1) as f64;
                a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * u).cos())
            })
            .collect();
        let right = if k + 1 == poles.len() { End::Zero } else { End::PoleLeft };
        out.push(Segment {
            points: pts,
            left: End::PoleRight,
            right,
        });
    }
    out
}

fn bisect(c: f64, h: &SpectralMeasure, mut a: f64, mut b: f64) -> f64 {
    let mut fa = z_prime(c, h, a);
    while (b - a).abs() > BISECTION_TOL * a.abs().max(b.abs()).max(1e-300) {
        let mid = 0.5 * (a + b);
        let fm = z_prime(c, h, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Disjoint, sorted support intervals of F^{c,H}.
pub fn find_support(c: f64, h: &SpectralMeasure) -> Result<Vec<Interval>> {
    const OP: &str = "spectral_law::find_support";
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::domain(OP, format!("c = {c} must lie in (0, 1)")));
    }
    if h.as_point().is_some() {
        return Ok(vec![support_bracket(c, h)]);
    }

    // Images (z_lo, z_hi) of the maximal pieces where z' > 0.
    let mut outside: Vec<(f64, f64)> = vec![(f64::NEG_INFINITY, 0.0)];
    for seg in segments(h) {
        let pts = &seg.points;
        let mut zeros = Vec::new();
        let mut last_change: Option<usize> = None;
        let mut prev = z_prime(c, h, pts[0]);
        for i in 1..pts.len() {
            let cur = z_prime(c, h, pts[i]);
            if (cur > 0.0) != (prev > 0.0) {
                if let Some(j) = last_change {
                    if j + 1 == i {
                        return Err(Error::Resolution {
                            op: OP,
                            first: pts[j],
                            second: pts[i],
                        });
                    }
                }
                last_change = Some(i);
                zeros.push(bisect(c, h, pts[i - 1], pts[i]));
            }
            prev = cur;
        }

        // Walk the pieces between consecutive zeros.
        let mut bounds: Vec<Option<f64>> = vec![None];
        bounds.extend(zeros.iter().map(|&m| Some(m)));
        bounds.push(None);
        let mut increasing = z_prime(c, h, pts[0]) > 0.0;
        for (i, w) in bounds.windows(2).enumerate() {
            if increasing {
                let lo = match w[0] {
                    Some(m) => z_real(c, h, m),
                    None => match seg.left {
                        End::MinusInfinity => 0.0,
                        End::PoleRight | End::PoleLeft => f64::INFINITY,
                        End::Zero => f64::NEG_INFINITY,
                    },
                };
                let hi = match w[1] {
                    Some(m) => z_real(c, h, m),
                    None => match seg.right {
                        End::Zero => f64::INFINITY,
                        End::PoleLeft | End::PoleRight => f64::NEG_INFINITY,
                        End::MinusInfinity => 0.0,
                    },
                };
                if hi > lo {
                    outside.push((lo, hi));
                }
            }
            if i + 1 < bounds.len() - 1 {
                increasing = !increasing;
            }
        }
    }

    outside.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in outside {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let support: Vec<Interval> = merged
        .windows(2)
        .map(|w| Interval {
            lo: w[0].1,
            hi: w[1].0,
        })
        .filter(|iv| iv.hi > iv.lo)
        .collect();
    if support.is_empty() {
        return Err(Error::domain(OP, "no support found; scan inconsistent"));
    }
    Ok(support)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_law::measure::Atom;

    fn assert_interval(iv: Interval, lo: f64, hi: f64, tol: f64) {
        assert!((iv.lo - lo).abs() < tol, "lo {} vs {}", iv.lo, lo);
        assert!((iv.hi - hi).abs() < tol, "hi {} vs {}", iv.hi, hi);
    }

    #[test]
    fn marchenko_pastur_edges() {
        let s = find_support(0.25, &SpectralMeasure::identity()).unwrap();
        assert_eq!(s.len(), 1);
        assert_interval(s[0], 0.25, 2.25, 1e-6);
        let s = find_support(0.09, &SpectralMeasure::identity()).unwrap();
        assert_interval(s[0], 0.49, 1.69, 1e-6);
    }

    #[test]
    fn scan_path_agrees_with_point_mass_edges() {
        // Two coincident-location atoms bypass the point-mass fast path.
        let h = SpectralMeasure::new(vec![
            Atom { t: 2.0, w: 0.5 },
            Atom { t: 2.0 + 1e-13, w: 0.5 },
        ])
        .unwrap();
        let s = find_support(0.25, &h).unwrap();
        assert_eq!(s.len(), 1);
        assert_interval(s[0], 0.5, 4.5, 1e-6);
    }

    #[test]
    fn separated_atoms_split_support() {
        let h = SpectralMeasure::new(vec![Atom { t: 1.0, w: 0.5 }, Atom { t: 10.0, w: 0.5 }])
            .unwrap();
        let s = find_support(0.1, &h).unwrap();
        assert_eq!(s.len(), 2);
        let bracket = support_bracket(0.1, &h);
        for iv in &s {
            assert!(iv.lo >= bracket.lo - 1e-9 && iv.hi <= bracket.hi + 1e-9);
        }
        assert!(s[0].hi < s[1].lo);
    }

    #[test]
    fn close_atoms_merge_support() {
        let h = SpectralMeasure::new(vec![Atom { t: 1.0, w: 0.5 }, Atom { t: 3.0, w: 0.5 }])
            .unwrap();
        let s = find_support(0.5, &h).unwrap();
        assert_eq!(s.len(), 1);
        let bracket = support_bracket(0.5, &h);
        assert!(s[0].lo >= bracket.lo && s[0].hi <= bracket.hi);
    }
}
