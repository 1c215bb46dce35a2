use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use specden::asymptotics::{mise_and_optimal_bandwidth_with, sigma2, BandwidthOptions};
use specden::clt::{
    check_contour_conditions_with, run_clt_cdf, run_clt_density, CltExperimentConfig, CltExperimentResult,
    ConditionOptions, Scaling, Slack, TargetMode,
};
use specden::ensembles::{generate_replication, EnsembleConfig, EntryDistribution};
use specden::estimation::{cdf_at, density_at, smoothed_target, EstimatorConfig, GRID_RESOLUTION_FACTOR};
use specden::kernel::{check_kernel, KernelSpec};
use specden::spectral_law::{default_epsilon, density, find_support, LawOptions, LawSolution, SpectralMeasure};

use crate::args::*;
use crate::config::absolute;
use crate::output::{
    digests, ensure_dir, parent_dir, print_stdout_json, read_column, sha256_file, write_csv, write_json, FileDigest,
    Manifest, MANIFEST_NAME,
};
use crate::CliError;

const MAX_GRID_POINTS: usize = 10_000_000;

/// Everything a subcommand reports back for its manifest and summary.
struct Run {
    out_dir: PathBuf,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    seeds: Vec<u64>,
    summary: serde_json::Value,
}

pub fn run(cli: &crate::args::Cli, resolved: &[String]) -> Result<(), CliError> {
    let start = Instant::now();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let (config, result) = match &cli.command {
        Command::Simulate(a) => (to_value(a), simulate(a)),
        Command::Density(a) => (to_value(a), density_cmd(a)),
        Command::Estimate(a) => (to_value(a), estimate(a)),
        Command::Bandwidth(a) => (to_value(a), bandwidth(a)),
        Command::Clt(a) => (to_value(a), clt(a)),
        Command::CheckConditions(a) => (to_value(a), check_conditions(a)),
        Command::Sigma2(a) => return sigma2_cmd(a),
        Command::CheckKernel(a) => return check_kernel_cmd(a),
        Command::Rerun(a) => return rerun(a, cli.json),
    };
    let Some(run) = result? else {
        return Ok(());
    };
    let out_dir = absolute(&run.out_dir)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: cli.command.name().to_string(),
        argv: resolved.to_vec(),
        config,
        inputs: input_digests(&run.inputs)?,
        outputs: digests(&out_dir, &abs_all(&run.outputs)?)?,
        seeds: run.seeds,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        started_unix_seconds: started,
    };
    let manifest_path = out_dir.join(MANIFEST_NAME);
    write_json(&manifest_path, &manifest)?;
    eprintln!("wrote {} files and {}", manifest.outputs.len(), manifest_path.display());
    if cli.json {
        print_stdout_json(&run.summary);
    }
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn abs_all(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    paths.iter().map(|p| absolute(p)).collect()
}

fn input_digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    abs_all(paths)?
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.to_string_lossy().into_owned(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

fn load_spectrum(path: &Option<PathBuf>) -> Result<SpectralMeasure, CliError> {
    match path {
        None => Ok(SpectralMeasure::identity()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))
        }
    }
}

fn entry_dist(d: Dist) -> EntryDistribution {
    match d {
        Dist::Normal => EntryDistribution::StandardNormal,
        Dist::Rademacher4 => EntryDistribution::Rademacher4,
    }
}

/// Parses `a:b:step` into a, a + step, …, up to b.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::usage(format!("grid `{spec}` must be a:b:step with a <= b and step > 0"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let vals: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (a, b, step) = (vals[0], vals[1], vals[2]);
    if !(a.is_finite() && b.is_finite() && step > 0.0 && step.is_finite() && a <= b) {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    if count > MAX_GRID_POINTS {
        return Err(CliError::usage(format!("grid `{spec}` has {count} points (limit {MAX_GRID_POINTS})")));
    }
    Ok((0..count).map(|i| a + step * i as f64).collect())
}

fn ensure_parent(file: &Path) -> Result<PathBuf, CliError> {
    let dir = parent_dir(file);
    ensure_dir(&dir)?;
    Ok(dir)
}

fn simulate(a: &SimulateArgs) -> Result<Option<Run>, CliError> {
    let h = load_spectrum(&a.t_spectrum)?;
    let config = EnsembleConfig::new(a.n, a.p, entry_dist(a.dist), h, a.seed)?;
    if a.reps == 0 {
        return Err(CliError::usage("reps must be positive"));
    }
    ensure_dir(&a.out)?;
    let samples = (0..a.reps as u64)
        .into_par_iter()
        .map(|r| generate_replication(&config, r))
        .collect::<Result<Vec<_>, _>>()?;
    let mut outputs = Vec::with_capacity(a.reps);
    for (r, s) in samples.iter().enumerate() {
        let path = a.out.join(format!("eig_{r}.csv"));
        write_csv(&path, &["lambda"], s.eigenvalues.iter().map(|&l| vec![l]))?;
        outputs.push(path);
    }
    let extremes: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.eigenvalues[0], s.eigenvalues[s.eigenvalues.len() - 1]))
        .collect();
    eprintln!("simulated {} replications of n = {}, p = {}", a.reps, a.n, a.p);
    Ok(Some(Run {
        out_dir: a.out.clone(),
        inputs: a.t_spectrum.iter().cloned().collect(),
        outputs,
        seeds: vec![a.seed],
        summary: json!({ "reps": a.reps, "c_n": config.ratio(), "extremes": extremes }),
    }))
}

fn density_cmd(a: &DensityArgs) -> Result<Option<Run>, CliError> {
    let h = load_spectrum(&a.t_spectrum)?;
    let grid = parse_grid(&a.grid)?;
    let support = find_support(a.c, &h)?;
    let eps = a.eps.unwrap_or_else(|| default_epsilon(&support));
    let values = grid
        .par_iter()
        .map(|&x| density(a.c, &h, x, eps).map(|f| vec![x, f]))
        .collect::<Result<Vec<_>, _>>()?;
    let dir = ensure_parent(&a.out)?;
    write_csv(&a.out, &["x", "f"], values)?;
    let support: Vec<(f64, f64)> = support.iter().map(|iv| (iv.lo, iv.hi)).collect();
    eprintln!("support {support:?}, ε = {eps:e}, {} grid points", grid.len());
    Ok(Some(Run {
        out_dir: dir,
        inputs: a.t_spectrum.iter().cloned().collect(),
        outputs: vec![a.out.clone()],
        seeds: vec![],
        summary: json!({ "support": support, "epsilon": eps, "points": grid.len() }),
    }))
}

/// Grid size whose largest spacing resolves h / GRID_RESOLUTION_FACTOR.
fn law_grid_for(c: f64, h_measure: &SpectralMeasure, h: f64) -> Result<usize, CliError> {
    let support = find_support(c, h_measure)?;
    let widest = support.iter().map(|iv| iv.width()).fold(0.0, f64::max);
    let needed = (2.0 * GRID_RESOLUTION_FACTOR * widest / h).ceil() as usize + 1;
    Ok(needed.max(LawOptions::default().grid_points))
}

fn estimate(a: &EstimateArgs) -> Result<Option<Run>, CliError> {
    let kernel = KernelSpec::by_name(&a.kernel)?;
    let mut eig = read_column(&a.eig, "lambda")?;
    if eig.is_empty() {
        return Err(CliError::usage(format!("{}: no eigenvalues", a.eig.display())));
    }
    eig.sort_by(f64::total_cmp);
    let bw = match (a.h, a.n) {
        (Some(h), _) => h,
        (None, Some(n)) => (n as f64).powf(-a.h_exponent),
        (None, None) => return Err(CliError::usage("need --h, or --n with --h-exponent")),
    };
    let grid = parse_grid(&a.grid)?;
    let est = EstimatorConfig::new(kernel, bw, grid)?;
    let c = match (a.c, a.n) {
        (Some(c), _) => Some(c),
        (None, Some(n)) => Some(eig.len() as f64 / n as f64),
        (None, None) if a.t_spectrum.is_some() => return Err(CliError::usage("--t-spectrum needs --c or --n")),
        (None, None) => None,
    };
    let law = match c {
        Some(c) => {
            let h = load_spectrum(&a.t_spectrum)?;
            let points = match a.law_grid_points {
                Some(g) => g,
                None => law_grid_for(c, &h, bw)?,
            };
            let opts = LawOptions {
                grid_points: points,
                ..LawOptions::default()
            };
            Some(LawSolution::solve_with(c, &h, opts)?)
        }
        None => None,
    };
    let rows = est
        .eval_points
        .par_iter()
        .map(|&x| {
            let (target, limit) = match &law {
                Some(law) => (smoothed_target(law, &est.kernel, bw, x)?, law.density_at(x)),
                None => (f64::NAN, f64::NAN),
            };
            Ok(vec![x, density_at(&eig, &est.kernel, bw, x), cdf_at(&eig, &est.kernel, bw, x), target, limit])
        })
        .collect::<Result<Vec<_>, specden::Error>>()?;
    let dir = ensure_parent(&a.out)?;
    write_csv(&a.out, &["x", "fn", "Fn", "smoothed_target", "f_limit"], rows)?;
    eprintln!("estimated {} points from p = {} eigenvalues with h = {bw}", est.eval_points.len(), eig.len());
    let mut inputs = vec![a.eig.clone()];
    inputs.extend(a.t_spectrum.iter().cloned());
    Ok(Some(Run {
        out_dir: dir,
        inputs,
        outputs: vec![a.out.clone()],
        seeds: vec![],
        summary: json!({ "p": eig.len(), "h": bw, "c": c, "points": est.eval_points.len() }),
    }))
}

fn sigma2_cmd(a: &Sigma2Args) -> Result<(), CliError> {
    let kernel = KernelSpec::by_name(&a.kernel)?;
    let r = sigma2(&kernel, a.tol)?;
    eprintln!("σ²({}) = {} (error estimate {:e})", r.kernel_id, r.sigma2, r.quad_error_estimate);
    print_stdout_json(&to_value(&r));
    Ok(())
}

fn check_kernel_cmd(a: &KernelArgs) -> Result<(), CliError> {
    let kernel = KernelSpec::by_name(&a.kernel)?;
    let report = check_kernel(&kernel, a.tol);
    if report.all_passed() {
        eprintln!("{}: all checks passed", report.kernel_id);
    } else {
        eprintln!("{}: failed {:?}", report.kernel_id, report.failed());
    }
    print_stdout_json(&to_value(&report));
    Ok(())
}

#[derive(Serialize)]
struct BandwidthSummary {
    h_star: f64,
    sigma2: f64,
    c1: f64,
    x0: f64,
    curvature: f64,
    support_length: f64,
    n: usize,
    curve_argmin: f64,
}

fn bandwidth(a: &BandwidthArgs) -> Result<Option<Run>, CliError> {
    let kernel = KernelSpec::by_name(&a.kernel)?;
    let h = load_spectrum(&a.t_spectrum)?;
    let law = LawSolution::solve(a.c, &h)?;
    let opts = BandwidthOptions {
        x0: a.x0,
        curve_points: a.curve_points,
        ..BandwidthOptions::default()
    };
    let r = mise_and_optimal_bandwidth_with(&kernel, &law, a.n, opts)?;
    let summary = BandwidthSummary {
        h_star: r.h_star,
        sigma2: r.sigma2,
        c1: r.c1,
        x0: r.x0,
        curvature: r.curvature,
        support_length: r.support_length,
        n: r.n,
        curve_argmin: r.curve_argmin,
    };
    eprintln!("h* = {} (curve argmin {}), c₁ = {} at x₀ = {}", r.h_star, r.curve_argmin, r.c1, r.x0);
    print_stdout_json(&to_value(&summary));
    let Some(out) = &a.out else {
        return Ok(None);
    };
    ensure_dir(out)?;
    let json_path = out.join("bandwidth.json");
    let curve_path = out.join("mise_curve.csv");
    write_json(&json_path, &summary)?;
    write_csv(&curve_path, &["h", "mise"], r.mise_curve.iter().map(|&(h, l)| vec![h, l]))?;
    Ok(Some(Run {
        out_dir: out.clone(),
        inputs: a.t_spectrum.iter().cloned().collect(),
        outputs: vec![json_path, curve_path],
        seeds: vec![],
        summary: to_value(&summary),
    }))
}

fn clt_config(a: &CltArgs) -> Result<CltExperimentConfig, CliError> {
    let kernel = KernelSpec::by_name(&a.kernel)?;
    let h = load_spectrum(&a.t_spectrum)?;
    let ensemble = EnsembleConfig::new(a.n, a.p, entry_dist(a.dist), h, a.seed)?;
    let exponent = a.h_exponent.unwrap_or(match a.mode {
        Mode::Density => 0.37,
        Mode::Cdf => 0.3,
    });
    let bw = a.h.unwrap_or((a.n as f64).powf(-exponent));
    let mut points = a.points.clone();
    points.sort_by(f64::total_cmp);
    let est = EstimatorConfig::new(kernel, bw, points)?;
    let mut config = match a.mode {
        Mode::Density => CltExperimentConfig::density(ensemble, a.reps, est),
        Mode::Cdf => CltExperimentConfig::cdf(ensemble, a.reps, est),
    };
    if let Some(t) = a.target {
        config.target = match t {
            Target::SmoothedTarget => TargetMode::SmoothedTarget,
            Target::LimitDensity => TargetMode::LimitDensity,
            Target::SmoothedCdf => TargetMode::SmoothedCdf,
            Target::LimitCdf => TargetMode::LimitCdf,
            Target::SelfCentered => TargetMode::SelfCentered,
        };
    }
    config.scaling = match a.scaling {
        ScalingArg::Dimension => Scaling::Dimension,
        ScalingArg::SampleSize => Scaling::SampleSize,
    };
    let base = match a.mode {
        Mode::Density => Slack::density(),
        Mode::Cdf => Slack::cdf(),
    };
    config.slack = Slack {
        mean_se: a.mean_se.unwrap_or(base.mean_se),
        variance_ratio: (
            a.var_ratio_lo.unwrap_or(base.variance_ratio.0),
            a.var_ratio_hi.unwrap_or(base.variance_ratio.1),
        ),
        correlation: a.corr_slack.unwrap_or(base.correlation),
        moment_se: a.moment_se.unwrap_or(base.moment_se),
    };
    config.law_grid_points = a.law_grid_points;
    Ok(config)
}

fn clt(a: &CltArgs) -> Result<Option<Run>, CliError> {
    let config = clt_config(a)?;
    let dir = ensure_parent(&a.out)?;
    let result: CltExperimentResult = match a.mode {
        Mode::Density => run_clt_density(&config)?,
        Mode::Cdf => run_clt_cdf(&config)?,
    };
    write_json(&a.out, &result)?;
    let z_path = dir.join("z_matrix.csv");
    let header: Vec<String> = (1..=result.eval_points.len()).map(|j| format!("z_{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&z_path, &header, result.z_matrix.iter().cloned())?;

    for (j, s) in result.summary.iter().enumerate() {
        eprintln!(
            "x = {}: mean {:.4}, var {:.4} (ratio {:.3}), skew {:.3}, kurt {:.3}",
            result.eval_points[j],
            s.mean,
            s.variance,
            s.variance / result.reference_variance,
            s.skewness,
            s.excess_kurtosis
        );
    }
    let failed: Vec<&str> = result.verdicts.iter().filter(|v| !v.passed).map(|v| v.criterion.as_str()).collect();
    if result.verdicts.is_empty() {
        eprintln!("no verdicts (too few replications or a report-only target)");
    } else if failed.is_empty() {
        eprintln!("all {} verdicts passed", result.verdicts.len());
    } else {
        eprintln!("failed verdicts: {failed:?}");
    }
    Ok(Some(Run {
        out_dir: dir,
        inputs: a.t_spectrum.iter().cloned().collect(),
        outputs: vec![a.out.clone(), z_path],
        seeds: vec![a.seed],
        summary: json!({
            "eval_points": result.eval_points,
            "targets": result.targets,
            "reference_variance": result.reference_variance,
            "summary": result.summary,
            "all_passed": result.all_passed(),
            "verdicts": result.verdicts,
        }),
    }))
}

fn check_conditions(a: &ConditionArgs) -> Result<Option<Run>, CliError> {
    let h = load_spectrum(&a.t_spectrum)?;
    let bw = a.h.unwrap_or((a.n as f64).powf(-a.h_exponent));
    let opts = ConditionOptions {
        bound: a.bound,
        expectation_reps: a.expectation_reps,
        seed: a.seed,
    };
    let report = check_contour_conditions_with(a.c, &h, a.n, bw, a.v0, a.grid, &opts)?;
    let dir = ensure_parent(&a.out)?;
    write_json(&a.out, &report)?;
    let csv_path = dir.join("contour.csv");
    write_csv(
        &csv_path,
        &["re", "im", "d1_ratio", "expectation_integral", "companion_integral"],
        report
            .points
            .iter()
            .map(|p| vec![p.re, p.im, p.d1_ratio, p.expectation_integral, p.companion_integral]),
    )?;
    eprintln!(
        "min d1 ratio {:.4}, max f11 {:.3}, max g38 {:.3} (M = {}): {}",
        report.min_d1_ratio,
        report.max_f11,
        report.max_g38,
        report.bound,
        if report.all_passed() { "passed" } else { "failed" }
    );
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    let seeds = if a.expectation_reps > 0 { vec![a.seed] } else { vec![] };
    Ok(Some(Run {
        out_dir: dir,
        inputs: a.t_spectrum.iter().cloned().collect(),
        outputs: vec![a.out.clone(), csv_path],
        seeds,
        summary: json!({
            "min_d1_ratio": report.min_d1_ratio,
            "max_f11": report.max_f11,
            "max_g38": report.max_g38,
            "bound": report.bound,
            "all_passed": report.all_passed(),
            "expectation_source": report.expectation_source,
        }),
    }))
}

#[derive(Serialize)]
struct RerunFile {
    path: String,
    expected: String,
    actual: Option<String>,
    matched: bool,
}

/// Commands whose `--out` names a directory rather than a file.
fn out_is_dir(subcommand: &str) -> bool {
    matches!(subcommand, "simulate" | "bandwidth")
}

fn rerun(a: &RerunArgs, json_out: bool) -> Result<(), CliError> {
    let old = Manifest::read(&a.manifest)?;
    if old.subcommand == "rerun" {
        return Err(CliError::usage("cannot replay a rerun"));
    }
    let out_dir = absolute(&a.out_dir)?;
    let mut argv = old.argv.clone();
    let pos = argv
        .iter()
        .position(|t| t == "--out")
        .ok_or_else(|| CliError::usage(format!("{}: argv has no --out", a.manifest.display())))?;
    let old_out = PathBuf::from(&argv[pos + 1]);
    let new_out = if out_is_dir(&old.subcommand) {
        out_dir.clone()
    } else {
        let name = old_out
            .file_name()
            .ok_or_else(|| CliError::usage(format!("--out {} has no file name", old_out.display())))?;
        out_dir.join(name)
    };
    argv[pos + 1] = new_out.to_string_lossy().into_owned();
    for input in &old.inputs {
        let actual = sha256_file(Path::new(&input.path))?;
        if actual != input.sha256 {
            return Err(CliError::usage(format!("input {} changed since the original run", input.path)));
        }
    }
    eprintln!("replaying: {}", argv.join(" "));
    let (cli, resolved) = match crate::resolve(&argv)? {
        Ok(v) => v,
        Err(e) => return Err(CliError::usage(e.to_string())),
    };
    run(&cli, &resolved)?;

    let new = Manifest::read(&out_dir.join(MANIFEST_NAME))?;
    let files: Vec<RerunFile> = old
        .outputs
        .iter()
        .map(|FileDigest { path, sha256 }| {
            let actual = new.outputs.iter().find(|d| &d.path == path).map(|d| d.sha256.clone());
            RerunFile {
                path: path.clone(),
                matched: actual.as_deref() == Some(sha256.as_str()),
                expected: sha256.clone(),
                actual,
            }
        })
        .collect();
    let identical = files.iter().all(|f| f.matched) && new.outputs.len() == old.outputs.len();
    for f in files.iter().filter(|f| !f.matched) {
        eprintln!("mismatch: {}", f.path);
    }
    eprintln!(
        "{} of {} outputs reproduced bit-identically",
        files.iter().filter(|f| f.matched).count(),
        files.len()
    );
    if json_out {
        print_stdout_json(&json!({ "identical": identical, "files": files }));
    }
    if identical {
        Ok(())
    } else {
        Err(CliError::usage("replayed outputs differ from the manifest"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_both_ends() {
        let g = parse_grid("0:1:0.25").unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0.2:0.3:0.1").unwrap().len(), 2);
        assert_eq!(parse_grid("1:1:0.5").unwrap(), vec![1.0]);
    }

    #[test]
    fn grid_rejects_malformed_specs() {
        for bad in ["0:1", "1:0:0.1", "0:1:0", "0:1:-1", "a:1:0.1", "0:1e9:1e-3"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
