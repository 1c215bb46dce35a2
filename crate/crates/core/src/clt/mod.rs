//! Monte Carlo checks of the estimator CLTs and scans of the contour
//! conditions on the population spectrum.
//!
//! Each replication r draws A_n from its own RNG stream, forms f_n or F_n at
//! the evaluation points, and records a standardized deviation
//!
//! * density: Z = s · h · (f_n(x) - target(x)),
//! * distribution: Z = s / √ln(1/h) · (F_n(x) - target(x)),
//!
//! with s = p ([`Scaling::Dimension`], the default) or s = n
//! ([`Scaling::SampleSize`]). Verdicts compare the sample moments of Z
//! against σ²(K) or 1/(2π²) using declared finite-n slack.

mod conditions;
pub mod stats;

pub use conditions::{
    check_contour_conditions, check_contour_conditions_with, ConditionOptions, ContourConditionReport, ContourFailure,
    ContourPoint, ExpectationSource, DEFAULT_INTEGRAL_BOUND,
};
pub use stats::PointSummary;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{cdf_variance, mean_diagnostic, sigma2, Contour};
use crate::ensembles::{generate_replication, EnsembleConfig};
use crate::error::{Error, Result};
use crate::estimation::{cdf_at, density_at, smoothed_cdf_target, smoothed_target, EstimatorConfig};
use crate::spectral_law::{LawOptions, LawSolution};

/// Minimum number of replications before any verdict is issued.
pub const MIN_REPS_FOR_VERDICT: usize = 50;
/// Evaluation points must be further apart than this many bandwidths.
pub const MIN_SEPARATION_BANDWIDTHS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// (1/h) ∫ K((x - y)/h) dF^{c_n,H_n}(y).
    SmoothedTarget,
    /// f_{c_n,H_n}(x).
    LimitDensity,
    /// ∫_{-∞}^x of the smoothed target.
    SmoothedCdf,
    /// F^{c_n,H_n}(x); reported, never asserted.
    LimitCdf,
    /// Each replication centred at its own estimate; Z ≡ 0.
    SelfCentered,
}

impl TargetMode {
    pub fn is_density(self) -> bool {
        matches!(self, TargetMode::SmoothedTarget | TargetMode::LimitDensity)
    }

    pub fn is_cdf(self) -> bool {
        matches!(self, TargetMode::SmoothedCdf | TargetMode::LimitCdf)
    }
}

/// Multiplier in front of the estimator deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// p, matching the 1/p in f_n and F_n.
    #[default]
    Dimension,
    /// n.
    SampleSize,
}

/// Declared tolerances for the finite-n verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    /// |mean| must lie within this many standard errors of 0.
    pub mean_se: f64,
    /// Allowed window for var / reference variance.
    pub variance_ratio: (f64, f64),
    pub correlation: f64,
    /// Skewness and excess kurtosis bounds are this multiple of √(6/R), √(24/R).
    pub moment_se: f64,
}

impl Slack {
    pub fn density() -> Self {
        Self {
            mean_se: 3.0,
            variance_ratio: (0.7, 1.3),
            correlation: 0.15,
            moment_se: 3.0,
        }
    }

    pub fn cdf() -> Self {
        Self {
            mean_se: 3.0,
            variance_ratio: (0.5, 2.0),
            correlation: 0.2,
            moment_se: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltExperimentConfig {
    pub ensemble: EnsembleConfig,
    pub reps: usize,
    pub estimator: EstimatorConfig,
    pub target: TargetMode,
    #[serde(default)]
    pub scaling: Scaling,
    pub slack: Slack,
    /// Density grid points per support interval for the centring law.
    #[serde(default = "default_grid_points")]
    pub law_grid_points: usize,
}

fn default_grid_points() -> usize {
    crate::spectral_law::DEFAULT_GRID_POINTS
}

impl CltExperimentConfig {
    /// Density experiment with the Gaussian-density slack defaults.
    pub fn density(ensemble: EnsembleConfig, reps: usize, estimator: EstimatorConfig) -> Self {
        Self {
            ensemble,
            reps,
            estimator,
            target: TargetMode::SmoothedTarget,
            scaling: Scaling::Dimension,
            slack: Slack::density(),
            law_grid_points: default_grid_points(),
        }
    }

    pub fn cdf(ensemble: EnsembleConfig, reps: usize, estimator: EstimatorConfig) -> Self {
        Self {
            target: TargetMode::SmoothedCdf,
            slack: Slack::cdf(),
            ..Self::density(ensemble, reps, estimator)
        }
    }

    pub fn validate(&self) -> Result<()> {
        const OP: &str = "clt::CltExperimentConfig";
        self.ensemble.validate()?;
        if self.reps == 0 {
            return Err(Error::config(OP, "reps must be positive"));
        }
        let pts = &self.estimator.eval_points;
        if pts.is_empty() {
            return Err(Error::config(OP, "need at least one evaluation point"));
        }
        let gap = MIN_SEPARATION_BANDWIDTHS * self.estimator.bandwidth;
        if pts.windows(2).any(|w| w[1] - w[0] <= gap) {
            return Err(Error::config(
                OP,
                format!("evaluation points must be more than {MIN_SEPARATION_BANDWIDTHS}h = {gap:.4} apart"),
            ));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match self.scaling {
            Scaling::Dimension => self.ensemble.p as f64,
            Scaling::SampleSize => self.ensemble.n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    /// Evaluation point index, or `None` for pairwise criteria.
    pub point: Option<usize>,
    pub passed: bool,
    pub value: f64,
    /// (lower, upper) bound the value was compared against.
    pub bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltExperimentResult {
    pub config: CltExperimentConfig,
    pub eval_points: Vec<f64>,
    /// Centring values; per-replication for [`TargetMode::SelfCentered`].
    pub targets: Vec<f64>,
    /// R × J, row r for replication r.
    pub z_matrix: Vec<Vec<f64>>,
    pub summary: Vec<PointSummary>,
    pub cross_corr: Vec<Vec<f64>>,
    /// σ²(K) for density modes, 1/(2π²) for distribution modes.
    pub reference_variance: f64,
    /// Empty when R < [`MIN_REPS_FOR_VERDICT`].
    pub verdicts: Vec<Verdict>,
    /// Contour mean diagnostic per point, [`TargetMode::LimitDensity`] only.
    pub bias_diagnostic: Option<Vec<f64>>,
}

impl CltExperimentResult {
    pub fn all_passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdicts_for<'a>(&'a self, criterion: &'a str) -> impl Iterator<Item = &'a Verdict> {
        self.verdicts.iter().filter(move |v| v.criterion == criterion)
    }

    /// Recomputes the summary from `z_matrix`.
    pub fn recompute_summary(&self) -> Vec<PointSummary> {
        summarize(&self.eval_points, &self.z_matrix)
    }
}

pub const VERDICT_MEAN: &str = "mean";
pub const VERDICT_VARIANCE: &str = "variance_ratio";
pub const VERDICT_CORRELATION: &str = "cross_correlation";
pub const VERDICT_SKEWNESS: &str = "skewness";
pub const VERDICT_KURTOSIS: &str = "excess_kurtosis";

fn summarize(points: &[f64], z: &[Vec<f64>]) -> Vec<PointSummary> {
    points
        .iter()
        .enumerate()
        .map(|(j, &x)| PointSummary::from_column(x, &stats::column(z, j)))
        .collect()
}

fn verdicts(summary: &[PointSummary], corr: &[Vec<f64>], reference: f64, slack: &Slack, reps: usize) -> Vec<Verdict> {
    if reps < MIN_REPS_FOR_VERDICT {
        return Vec::new();
    }
    let r = reps as f64;
    let skew_bound = slack.moment_se * (6.0 / r).sqrt();
    let kurt_bound = slack.moment_se * (24.0 / r).sqrt();
    let mut out = Vec::new();
    for (j, s) in summary.iter().enumerate() {
        let se_bound = slack.mean_se * s.standard_error;
        out.push(Verdict {
            criterion: VERDICT_MEAN.into(),
            point: Some(j),
            passed: s.mean.abs() < se_bound,
            value: s.mean,
            bounds: (-se_bound, se_bound),
        });
        let ratio = s.variance / reference;
        out.push(Verdict {
            criterion: VERDICT_VARIANCE.into(),
            point: Some(j),
            passed: ratio >= slack.variance_ratio.0 && ratio <= slack.variance_ratio.1,
            value: ratio,
            bounds: slack.variance_ratio,
        });
        out.push(Verdict {
            criterion: VERDICT_SKEWNESS.into(),
            point: Some(j),
            passed: s.skewness.abs() < skew_bound,
            value: s.skewness,
            bounds: (-skew_bound, skew_bound),
        });
        out.push(Verdict {
            criterion: VERDICT_KURTOSIS.into(),
            point: Some(j),
            passed: s.excess_kurtosis.abs() < kurt_bound,
            value: s.excess_kurtosis,
            bounds: (-kurt_bound, kurt_bound),
        });
    }
    for a in 0..corr.len() {
        for b in a + 1..corr.len() {
            out.push(Verdict {
                criterion: VERDICT_CORRELATION.into(),
                point: None,
                passed: corr[a][b].abs() < slack.correlation,
                value: corr[a][b],
                bounds: (-slack.correlation, slack.correlation),
            });
        }
    }
    out
}

/// Law of (c_n, H_n) with the realized diagonal of T.
pub fn centring_law(config: &CltExperimentConfig) -> Result<LawSolution> {
    let h_n = config.ensemble.realized_spectrum()?;
    LawSolution::solve_with(
        config.ensemble.ratio(),
        &h_n,
        LawOptions {
            grid_points: config.law_grid_points,
            ..LawOptions::default()
        },
    )
}

fn fixed_targets(config: &CltExperimentConfig, law: &LawSolution) -> Result<Vec<f64>> {
    let k = &config.estimator.kernel;
    let h = config.estimator.bandwidth;
    config
        .estimator
        .eval_points
        .iter()
        .map(|&x| match config.target {
            TargetMode::SmoothedTarget => smoothed_target(law, k, h, x),
            TargetMode::LimitDensity => law.density_exact(x),
            TargetMode::SmoothedCdf => smoothed_cdf_target(law, k, h, x),
            TargetMode::LimitCdf => Ok(law.cdf(x)),
            TargetMode::SelfCentered => Ok(0.0),
        })
        .collect()
}

fn run(config: &CltExperimentConfig, cdf: bool) -> Result<CltExperimentResult> {
    const OP: &str = "clt::run";
    config.validate()?;
    if config.target != TargetMode::SelfCentered && config.target.is_cdf() != cdf {
        return Err(Error::config(OP, format!("target {:?} does not match the experiment kind", config.target)));
    }
    let law = centring_law(config)?;
    if config.target != TargetMode::SelfCentered {
        config.estimator.require_interior(&law)?;
    }
    let targets = fixed_targets(config, &law)?;
    let kernel = config.estimator.kernel;
    let h = config.estimator.bandwidth;
    let points = config.estimator.eval_points.clone();
    let factor = if cdf {
        config.scale() / (1.0 / h).ln().sqrt()
    } else {
        config.scale() * h
    };

    let rows: Vec<Result<Vec<f64>>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| {
            let sample = generate_replication(&config.ensemble, r).map_err(|e| Error::Replication {
                op: OP,
                replication: r,
                source: Box::new(e),
            })?;
            let est = |x: f64| {
                if cdf {
                    cdf_at(&sample.eigenvalues, &kernel, h, x)
                } else {
                    density_at(&sample.eigenvalues, &kernel, h, x)
                }
            };
            Ok(points
                .iter()
                .zip(&targets)
                .map(|(&x, &t)| {
                    let v = est(x);
                    let centre = if config.target == TargetMode::SelfCentered { v } else { t };
                    factor * (v - centre)
                })
                .collect())
        })
        .collect();
    let z_matrix = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let reference_variance = if cdf {
        cdf_variance()
    } else {
        sigma2(&kernel, 1e-8)?.sigma2
    };
    let summary = summarize(&points, &z_matrix);
    let cross_corr = stats::correlation_matrix(&z_matrix, points.len());
    let verdicts = if config.target == TargetMode::LimitCdf {
        Vec::new()
    } else {
        verdicts(&summary, &cross_corr, reference_variance, &config.slack, config.reps)
    };
    let bias_diagnostic = if config.target == TargetMode::LimitDensity {
        let contour = Contour::around(law.c, &law.h, 1.0, h);
        Some(
            points
                .iter()
                .map(|&x| mean_diagnostic(law.c, &law.h, &kernel, h, x, contour))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(CltExperimentResult {
        config: config.clone(),
        eval_points: points,
        targets,
        z_matrix,
        summary,
        cross_corr,
        reference_variance,
        verdicts,
        bias_diagnostic,
    })
}

/// Density CLT experiment (targets SmoothedTarget, LimitDensity or SelfCentered).
pub fn run_clt_density(config: &CltExperimentConfig) -> Result<CltExperimentResult> {
    run(config, false)
}

/// Distribution CLT experiment (targets SmoothedCdf, LimitCdf or SelfCentered).
pub fn run_clt_cdf(config: &CltExperimentConfig) -> Result<CltExperimentResult> {
    run(config, true)
}
