//! Sample covariance ensembles A_n = (1/n) T^{1/2} X Xᵀ T^{1/2}.
//!
//! T is represented by its spectrum and applied as a diagonal scaling,
//! which leaves the eigenvalue distribution unchanged. Every replication
//! `r` draws from its own ChaCha stream `(seed, r)`, so replications can
//! run in any order or in parallel and still reproduce bit for bit.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_law::SpectralMeasure;

const MOMENT_TOL: f64 = 1e-9;

/// Symmetric four-point law: ±1/√2 with probability 4/9 each and ±√5
/// with probability 1/18 each. Mean 0, variance 1, fourth moment 3.
pub const RADEMACHER4_INNER: f64 = std::f64::consts::FRAC_1_SQRT_2;
pub const RADEMACHER4_OUTER: f64 = 2.236_067_977_499_79;
pub const RADEMACHER4_OUTER_PROB: f64 = 1.0 / 9.0;

/// A discrete entry law given by `(value, probability)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteLaw {
    /// Validates mean 0, variance 1 and fourth moment 3.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        const OP: &str = "ensembles::DiscreteLaw";
        if atoms.iter().any(|&(v, p)| !v.is_finite() || !(p > 0.0)) {
            return Err(Error::config(OP, "atoms need finite values and positive probabilities"));
        }
        let moment = |k: i32| atoms.iter().map(|&(v, p)| p * v.powi(k)).sum::<f64>();
        let checks = [(0, 1.0, "total probability"), (1, 0.0, "mean"), (2, 1.0, "variance"), (4, 3.0, "fourth moment")];
        for (k, want, name) in checks {
            let got = moment(k);
            if (got - want).abs() > MOMENT_TOL {
                return Err(Error::config(OP, format!("{name} is {got}, expected {want}")));
            }
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.atoms[self.atoms.len() - 1].0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDistribution {
    StandardNormal,
    Rademacher4,
    Custom(DiscreteLaw),
}

impl EntryDistribution {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            EntryDistribution::StandardNormal => rng.sample(StandardNormal),
            EntryDistribution::Rademacher4 => {
                let u: f64 = rng.random();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                if u < RADEMACHER4_OUTER_PROB {
                    sign * RADEMACHER4_OUTER
                } else {
                    sign * RADEMACHER4_INNER
                }
            }
            EntryDistribution::Custom(law) => law.sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub p: usize,
    pub entry_dist: EntryDistribution,
    pub t_spectrum: SpectralMeasure,
    pub seed: u64,
}

impl EnsembleConfig {
    pub fn new(
        n: usize,
        p: usize,
        entry_dist: EntryDistribution,
        t_spectrum: SpectralMeasure,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            n,
            p,
            entry_dist,
            t_spectrum,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Standard normal entries, T = I.
    pub fn gaussian(n: usize, p: usize, seed: u64) -> Result<Self> {
        Self::new(n, p, EntryDistribution::StandardNormal, SpectralMeasure::identity(), seed)
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "ensembles::EnsembleConfig";
        if self.p == 0 || self.n == 0 {
            return Err(Error::config(OP, "n and p must be positive"));
        }
        if self.p >= self.n {
            return Err(Error::config(OP, format!("p must be < n (p = {}, n = {})", self.p, self.n)));
        }
        if let EntryDistribution::Custom(law) = &self.entry_dist {
            DiscreteLaw::new(law.atoms.clone())?;
        }
        Ok(())
    }

    /// c_n = p/n.
    pub fn ratio(&self) -> f64 {
        self.p as f64 / self.n as f64
    }

    /// Diagonal of T: each atom repeated round(w·p) times, with
    /// largest-remainder rounding so the counts sum to p.
    pub fn diagonal(&self) -> Vec<f64> {
        let atoms = self.t_spectrum.atoms();
        let exact: Vec<f64> = atoms.iter().map(|a| a.w * self.p as f64).collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut short = self.p - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| {
            let ri = exact[i] - exact[i].floor();
            let rj = exact[j] - exact[j].floor();
            rj.total_cmp(&ri).then(i.cmp(&j))
        });
        for &i in order.iter().cycle() {
            if short == 0 {
                break;
            }
            counts[i] += 1;
            short -= 1;
        }
        atoms
            .iter()
            .zip(counts)
            .flat_map(|(a, k)| std::iter::repeat_n(a.t, k))
            .collect()
    }

    /// H_n = F^T, the spectrum actually realized on the diagonal.
    pub fn realized_spectrum(&self) -> Result<SpectralMeasure> {
        let pairs: Vec<(f64, f64)> = self.diagonal().into_iter().map(|t| (t, 1.0)).collect();
        SpectralMeasure::from_weighted(&pairs)
    }
}

/// Eigenvalues of one draw of A_n, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<f64>,
    pub config: EnsembleConfig,
    pub replication: u64,
}

impl SpectrumSample {
    /// Builds a sample from externally computed eigenvalues (sorted here).
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, config: EnsembleConfig) -> Result<Self> {
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("ensembles::SpectrumSample", "eigenvalues must be finite"));
        }
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self {
            eigenvalues,
            config,
            replication: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Spectrum of the n×n companion B_n = (1/n) Xᵀ T X: the p eigenvalues
    /// of A_n plus n - p zeros, ascending.
    pub fn companion_eigenvalues(&self) -> Vec<f64> {
        let zeros = self.config.n.saturating_sub(self.eigenvalues.len());
        let mut out = vec![0.0; zeros];
        out.extend_from_slice(&self.eigenvalues);
        out.sort_by(f64::total_cmp);
        out
    }
}

/// The RNG stream owned by replication `r`.
pub fn replication_rng(seed: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication);
    rng
}

/// Y = T^{1/2} X (p × n), entries drawn row by row from stream `r`.
pub fn draw_scaled_entries(config: &EnsembleConfig, replication: u64) -> DMatrix<f64> {
    let mut rng = replication_rng(config.seed, replication);
    let roots: Vec<f64> = config.diagonal().into_iter().map(f64::sqrt).collect();
    let (p, n) = (config.p, config.n);
    let mut data = Vec::with_capacity(p * n);
    for root in &roots {
        for _ in 0..n {
            data.push(root * config.entry_dist.sample(&mut rng));
        }
    }
    DMatrix::from_row_slice(p, n, &data)
}

pub fn generate_sample(config: &EnsembleConfig) -> Result<SpectrumSample> {
    generate_replication(config, 0)
}

/// All p eigenvalues of A_n for replication `r`.
pub fn generate_replication(config: &EnsembleConfig, replication: u64) -> Result<SpectrumSample> {
    config.validate()?;
    let y = draw_scaled_entries(config, replication);
    let a = (&y * y.transpose()) / config.n as f64;
    let mut eigenvalues: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    if eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::EigenNonConvergence {
            op: "ensembles::generate_sample",
        });
    }
    eigenvalues.sort_by(f64::total_cmp);
    Ok(SpectrumSample {
        eigenvalues,
        config: config.clone(),
        replication,
    })
}

/// (1/p) #{λ_k ≤ x}.
pub fn empirical_cdf(sample: &SpectrumSample, x: f64) -> f64 {
    if sample.eigenvalues.is_empty() {
        return 0.0;
    }
    let count = sample.eigenvalues.partition_point(|&l| l <= x);
    count as f64 / sample.eigenvalues.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_law::Atom;

    #[test]
    fn rademacher4_moments() {
        let inner = RADEMACHER4_INNER;
        let outer = RADEMACHER4_OUTER;
        let q = RADEMACHER4_OUTER_PROB;
        assert!((outer * outer - 5.0).abs() < 1e-13);
        let var = (1.0 - q) * inner.powi(2) + q * outer.powi(2);
        let fourth = (1.0 - q) * inner.powi(4) + q * outer.powi(4);
        assert!((var - 1.0).abs() < 1e-12);
        assert!((fourth - 3.0).abs() < 1e-12);
    }

    #[test]
    fn custom_law_validated() {
        let r4 = DiscreteLaw::new(vec![
            (-RADEMACHER4_OUTER, 1.0 / 18.0),
            (-RADEMACHER4_INNER, 4.0 / 9.0),
            (RADEMACHER4_INNER, 4.0 / 9.0),
            (RADEMACHER4_OUTER, 1.0 / 18.0),
        ]);
        assert!(r4.is_ok());
        // Rademacher ±1 has fourth moment 1.
        assert!(DiscreteLaw::new(vec![(-1.0, 0.5), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn rejects_p_not_below_n() {
        let err = EnsembleConfig::gaussian(10, 20, 0).unwrap_err();
        assert!(err.to_string().contains("p must be < n"));
        assert!(EnsembleConfig::gaussian(10, 10, 0).is_err());
    }

    #[test]
    fn diagonal_counts_sum_to_p() {
        let h = SpectralMeasure::new(vec![
            Atom { t: 1.0, w: 1.0 / 3.0 },
            Atom { t: 2.0, w: 1.0 / 3.0 },
            Atom { t: 5.0, w: 1.0 / 3.0 },
        ])
        .unwrap();
        let cfg = EnsembleConfig::new(100, 10, EntryDistribution::StandardNormal, h, 1).unwrap();
        let d = cfg.diagonal();
        assert_eq!(d.len(), 10);
        assert_eq!(d.iter().filter(|&&t| t == 1.0).count(), 4);
        let realized = cfg.realized_spectrum().unwrap();
        assert!((realized.atoms()[0].w - 0.4).abs() < 1e-15);
    }

    #[test]
    fn one_by_one_case() {
        // With X = (1,1,1,1) and T = I, A = (1/4)·4 = 1.
        let y = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 1.0]);
        let a = (&y * y.transpose()) / 4.0;
        assert_eq!(a[(0, 0)], 1.0);
    }

    #[test]
    fn empirical_cdf_counts() {
        let cfg = EnsembleConfig::gaussian(10, 3, 0).unwrap();
        let s = SpectrumSample::from_eigenvalues(vec![3.0, 1.0, 2.0], cfg).unwrap();
        assert!((empirical_cdf(&s, 2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(empirical_cdf(&s, 0.5), 0.0);
        assert_eq!(empirical_cdf(&s, 3.0), 1.0);
        assert_eq!(s.companion_eigenvalues().len(), 10);
    }

    #[test]
    fn reproducible_and_independent_streams() {
        let cfg = EnsembleConfig::gaussian(60, 20, 99).unwrap();
        let a = generate_replication(&cfg, 3).unwrap();
        let b = generate_replication(&cfg, 3).unwrap();
        let c = generate_replication(&cfg, 4).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_ne!(a.eigenvalues, c.eigenvalues);
    }

    #[test]
    fn trace_identity() {
        let h = SpectralMeasure::new(vec![Atom { t: 0.5, w: 0.5 }, Atom { t: 2.0, w: 0.5 }]).unwrap();
        let cfg = EnsembleConfig::new(80, 30, EntryDistribution::Rademacher4, h, 5).unwrap();
        let s = generate_sample(&cfg).unwrap();
        let y = draw_scaled_entries(&cfg, 0);
        let trace = y.iter().map(|v| v * v).sum::<f64>() / cfg.n as f64;
        let sum: f64 = s.eigenvalues.iter().sum();
        assert!(((sum - trace) / trace).abs() < 1e-10);
        assert!(s.eigenvalues[0] >= -1e-10 * s.eigenvalues[s.len() - 1]);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}
