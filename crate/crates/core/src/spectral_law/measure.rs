use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;

/// One atom of a discrete population spectrum: location `t` with mass `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub t: f64,
    pub w: f64,
}

/// Discrete population spectrum H, the eigenvalue distribution of T.
///
/// Atoms are kept sorted by location; weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure")]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawMeasure {
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for SpectralMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        SpectralMeasure::new(raw.atoms)
    }
}

impl SpectralMeasure {
    pub fn new(mut atoms: Vec<Atom>) -> Result<Self> {
        const OP: &str = "spectral_law::SpectralMeasure";
        if atoms.is_empty() {
            return Err(Error::config(OP, "measure needs at least one atom"));
        }
        for a in &atoms {
            if !(a.t.is_finite() && a.t > 0.0) {
                return Err(Error::config(OP, format!("atom location {} must be positive", a.t)));
            }
            if !(a.w.is_finite() && a.w > 0.0) {
                return Err(Error::config(OP, format!("atom weight {} must be positive", a.w)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.w).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::config(OP, format!("weights sum to {total}, expected 1")));
        }
        atoms.sort_by(|a, b| a.t.total_cmp(&b.t));
        Ok(Self { atoms })
    }

    /// H = δ_t.
    pub fn point(t: f64) -> Result<Self> {
        Self::new(vec![Atom { t, w: 1.0 }])
    }

    pub fn identity() -> Self {
        Self {
            atoms: vec![Atom { t: 1.0, w: 1.0 }],
        }
    }

    /// Builds a measure from unnormalized `(t, w)` pairs, merging equal
    /// locations and rescaling weights to sum to one.
    pub fn from_weighted(pairs: &[(f64, f64)]) -> Result<Self> {
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return Err(Error::config(
                "spectral_law::SpectralMeasure",
                "weights must have positive total",
            ));
        }
        let mut atoms: Vec<Atom> = Vec::with_capacity(pairs.len());
        let mut sorted = pairs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, w) in sorted {
            match atoms.last_mut() {
                Some(last) if last.t == t => last.w += w / total,
                _ => atoms.push(Atom { t, w: w / total }),
            }
        }
        // Absorb rounding so the weight invariant holds exactly enough.
        let sum: f64 = atoms.iter().map(|a| a.w).sum();
        for a in &mut atoms {
            a.w /= sum;
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn min_location(&self) -> f64 {
        self.atoms[0].t
    }

    pub fn max_location(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].t
    }

    /// `Some(t)` when H is a single point mass.
    pub fn as_point(&self) -> Option<f64> {
        match self.atoms.as_slice() {
            [a] => Some(a.t),
            _ => None,
        }
    }

    /// ∫ t^k dH(t).
    pub fn moment(&self, k: i32) -> f64 {
        self.atoms.iter().map(|a| a.w * a.t.powi(k)).sum()
    }

    /// ∫ t^k / (1 + t m)^j dH(t).
    pub fn resolvent_moment(&self, m: Complex64, k: i32, j: i32) -> Complex64 {
        self.atoms
            .iter()
            .map(|a| a.w * a.t.powi(k) / (1.0 + a.t * m).powi(j))
            .sum()
    }

    /// Smallest |1 + t m| over the atoms, with the offending atom.
    pub fn nearest_pole(&self, m: Complex64) -> (f64, f64) {
        self.atoms
            .iter()
            .map(|a| ((1.0 + a.t * m).norm(), a.t))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .expect("measure is non-empty")
    }

    /// T → sT.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.atoms
                .iter()
                .map(|a| Atom { t: a.t * s, w: a.w })
                .collect(),
        )
    }
}
