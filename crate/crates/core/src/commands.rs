//! The four pipeline commands behind the CLI. Each returns what it computed
//! and writes its CSVs into the configured output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::bounds::{
    avg_bound, estimate_bounds, fit_all, max_bound, min_bound, Aggregator, BoundTable, RhoParams,
};
use crate::config::RunConfig;
use crate::data::{fit_parameters, AssumptionParams, Dataset};
use crate::error::{Error, Result};
use crate::oracle::{
    chain_from_column, child_seed, generate_tf, simulate_chain, simulate_column, EdgePolicy, FeatureTable,
    TfMethod,
};
use crate::parallel;
use crate::selector::{ensemble_select, ensemble_select_real, rank_recall, relative_error_quartiles, ImportanceReport};
use crate::spectral::{LambdaMethod, SpectralQuantities};
use crate::window::{stationary_mixture, WindowKind};

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
    Ok(BufWriter::new(file))
}

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let (e, a) = cfg.inputs()?;
    Dataset::load(e, a)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub fit: Duration,
    pub estimate: Duration,
    pub select: Duration,
}

impl std::fmt::Display for Timings {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "fit {:.3}s, estimate {:.3}s, select {:.3}s",
            self.fit.as_secs_f64(),
            self.estimate.as_secs_f64(),
            self.select.as_secs_f64()
        )
    }
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub bounds: BoundTable,
    pub report: ImportanceReport,
    pub timings: Timings,
}

/// Fit, bound and rank without touching the filesystem.
pub fn run_estimate(dataset: &Dataset, cfg: &RunConfig) -> Result<EstimateOutput> {
    cfg.validate()?;
    let t = Instant::now();
    let fitted = fit_all(dataset, &cfg.estimate)?;
    let fit = t.elapsed();
    let t = Instant::now();
    let bounds = estimate_bounds(&fitted, &cfg.estimate);
    let estimate = t.elapsed();
    let t = Instant::now();
    let report = ensemble_select(&bounds, &dataset.entities.target(), cfg.ensembles, cfg.trees, cfg.seed)?;
    let select = t.elapsed();
    Ok(EstimateOutput { bounds, report, timings: Timings { fit, estimate, select } })
}

/// Writes `bounds.csv`, `importance.csv` and, with `emit_ensembles`,
/// `importance_ensembles.csv`.
pub fn cmd_estimate(cfg: &RunConfig, emit_ensembles: bool) -> Result<EstimateOutput> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    let out = run_estimate(&dataset, cfg)?;
    out.bounds.write_csv(create(&cfg.output_dir, "bounds.csv")?)?;
    out.report.write_csv(create(&cfg.output_dir, "importance.csv")?)?;
    if emit_ensembles {
        out.report.write_ensembles_csv(create(&cfg.output_dir, "importance_ensembles.csv")?)?;
    }
    Ok(out)
}

/// Writes the real feature table to `feature_table.csv`.
pub fn cmd_generate(cfg: &RunConfig, method: TfMethod, policy: EdgePolicy) -> Result<FeatureTable> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    if dataset.actions.is_empty() {
        log::warn!("action table is empty: every feature is null");
    }
    let tf = generate_tf(&dataset, &cfg.estimate, policy, method)?;
    tf.write_csv(create(&cfg.output_dir, "feature_table.csv")?)?;
    Ok(tf)
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub recall: Vec<(f64, f64)>,
    pub quartiles: (f64, f64, f64),
    pub estimated: ImportanceReport,
    pub actual: ImportanceReport,
    pub timings: Timings,
}

/// Fractions `0.05, 0.10, ..., 1.00`.
pub fn recall_fractions() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

/// Ranks features from the bounds and from the real feature table.
/// `debug_real` replaces the estimate with the real table (self-comparison).
pub fn run_compare(
    dataset: &Dataset,
    cfg: &RunConfig,
    method: TfMethod,
    policy: EdgePolicy,
    debug_real: bool,
) -> Result<CompareOutput> {
    cfg.validate()?;
    let y = dataset.entities.target();
    let tf = generate_tf(dataset, &cfg.estimate, policy, method)?;
    let actual = ensemble_select_real(&tf, &y, cfg.ensembles, cfg.trees, cfg.seed)?;
    let (estimated, timings) = if debug_real {
        (ensemble_select_real(&tf, &y, cfg.ensembles, cfg.trees, cfg.seed)?, Timings::default())
    } else {
        let out = run_estimate(dataset, cfg)?;
        (out.report, out.timings)
    };
    let recall = recall_fractions()
        .into_iter()
        .map(|f| rank_recall(&estimated, &actual, f).map(|r| (f, r)))
        .collect::<Result<Vec<_>>>()?;
    let quartiles = relative_error_quartiles(&estimated, &actual)?;
    Ok(CompareOutput { recall, quartiles, estimated, actual, timings })
}

/// Writes `recall.csv` (`fraction,recall`), `relative_error.csv`
/// (`q1,median,q3`) and both importance reports.
pub fn cmd_compare(cfg: &RunConfig, method: TfMethod, policy: EdgePolicy, debug_real: bool) -> Result<CompareOutput> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    let out = run_compare(&dataset, cfg, method, policy, debug_real)?;
    let mut w = create(&cfg.output_dir, "recall.csv")?;
    writeln!(w, "fraction,recall")?;
    for (f, r) in &out.recall {
        writeln!(w, "{f:.2},{r}")?;
    }
    w.flush()?;
    let mut w = create(&cfg.output_dir, "relative_error.csv")?;
    writeln!(w, "q1,median,q3")?;
    writeln!(w, "{},{},{}", out.quartiles.0, out.quartiles.1, out.quartiles.2)?;
    w.flush()?;
    out.estimated.write_csv(create(&cfg.output_dir, "importance_estimated.csv")?)?;
    out.actual.write_csv(create(&cfg.output_dir, "importance_actual.csv")?)?;
    Ok(out)
}

/// How often the true aggregate of a simulated entity lands in its bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub aggregator: Aggregator,
    pub covered: usize,
    /// Trials with at least one non-empty window.
    pub trials: usize,
    pub no_records: usize,
}

impl Coverage {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            f64::NAN
        } else {
            self.covered as f64 / self.trials as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageSetup {
    pub kind: WindowKind,
    /// True generating law; `c_min`, `c_max` and `ell` are ignored.
    pub params: AssumptionParams,
    pub w: usize,
    pub ell: usize,
    pub trials: usize,
    pub seed: u64,
    pub rho: RhoParams,
    pub lambda_method: LambdaMethod,
}

/// Each trial simulates one entity column exactly per the assumption, fits
/// its parameters like real data, bounds it and checks the true aggregates.
pub fn simulate_coverage(setup: &CoverageSetup) -> Vec<Coverage> {
    let outcomes = parallel::map_range(setup.trials, |i| {
        let col = simulate_column(&setup.params, setup.ell, child_seed(setup.seed, i as u64));
        let Ok(fitted) = fit_parameters(&col, Some(setup.params.kind), Some(setup.params.m)) else {
            return None;
        };
        let chain = chain_from_column(&col, setup.kind, setup.w, 0);
        let mixture = stationary_mixture(setup.kind, &fitted, setup.w);
        let sq = SpectralQuantities::compute(setup.kind, &fitted, &mixture, setup.w, setup.lambda_method);
        let bounds = [
            avg_bound(&mixture, &sq, &fitted, setup.w, &setup.rho),
            max_bound(&mixture, &fitted, setup.w, &setup.rho, sq.lambda),
            min_bound(&mixture, &fitted, setup.w, &setup.rho, sq.lambda),
        ];
        let mut hit = [None; 3];
        for (slot, (agg, b)) in hit.iter_mut().zip(Aggregator::ALL.iter().zip(bounds)) {
            if let (Some(truth), Ok(b)) = (chain.aggregate(*agg), b) {
                *slot = Some(b.contains(truth));
            }
        }
        Some(hit)
    });
    Aggregator::ALL
        .iter()
        .enumerate()
        .map(|(j, &aggregator)| {
            let mut c = Coverage { aggregator, covered: 0, trials: 0, no_records: 0 };
            for o in &outcomes {
                match o.and_then(|h| h[j]) {
                    Some(hit) => {
                        c.trials += 1;
                        c.covered += usize::from(hit);
                    }
                    None => c.no_records += 1,
                }
            }
            c
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub kind: WindowKind,
    pub params: AssumptionParams,
    pub w: usize,
    pub steps: usize,
    pub seed: u64,
    pub bins: usize,
    pub coverage_trials: usize,
    pub coverage_ell: usize,
    pub rho: RhoParams,
    pub lambda_method: LambdaMethod,
    pub output_dir: PathBuf,
}

/// One histogram bin of the non-empty window values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
    pub count: usize,
    /// Density the stationary mixture predicts for this bin.
    pub mixture_density: f64,
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub histogram: Vec<HistogramBin>,
    pub max_density_gap: f64,
    pub coverage: Vec<Coverage>,
}

/// Histogram of non-empty window values over `bins` equal bins spanning
/// the observed range, with the mixture's density per bin.
pub fn window_histogram(values: &[f64], bins: usize, predicted: impl Fn(f64, f64) -> f64) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let n = values.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let b_lo = lo + i as f64 * width;
            let b_hi = if i + 1 == bins { hi.max(lo + width) } else { lo + (i + 1) as f64 * width };
            HistogramBin {
                lo: b_lo,
                hi: b_hi,
                density: count as f64 / (n * width),
                count,
                mixture_density: predicted(b_lo, b_hi) / width,
            }
        })
        .collect()
}

pub fn run_simulate(opts: &SimulateOptions) -> Result<SimulateOutput> {
    if opts.w == 0 || opts.steps < opts.w {
        return Err(Error::Config(format!("need steps >= period >= 1, got {} and {}", opts.steps, opts.w)));
    }
    opts.rho.validate()?;
    let chain = simulate_chain(opts.kind, &opts.params, opts.w, opts.steps, opts.seed);
    let values: Vec<f64> = chain.nonempty().map(|(v, _)| v).collect();
    let mixture = stationary_mixture(opts.kind, &opts.params, opts.w);
    let histogram = window_histogram(&values, opts.bins, |a, b| mixture.nonempty_mass_between(a, b));
    let max_density_gap = histogram.iter().map(|b| (b.density - b.mixture_density).abs()).fold(0.0, f64::max);
    let coverage = if opts.coverage_trials > 0 {
        simulate_coverage(&CoverageSetup {
            kind: opts.kind,
            params: opts.params,
            w: opts.w,
            ell: opts.coverage_ell,
            trials: opts.coverage_trials,
            seed: child_seed(opts.seed, 1),
            rho: opts.rho,
            lambda_method: opts.lambda_method,
        })
    } else {
        Vec::new()
    };
    Ok(SimulateOutput { histogram, max_density_gap, coverage })
}

/// Writes `histogram.csv` (`bin_lo,bin_hi,density,component_count`),
/// `mixture_density.csv` and `coverage.csv`.
pub fn cmd_simulate(opts: &SimulateOptions) -> Result<SimulateOutput> {
    let out = run_simulate(opts)?;
    let dir = &opts.output_dir;
    let mut w = create(dir, "histogram.csv")?;
    writeln!(w, "bin_lo,bin_hi,density,component_count")?;
    for b in &out.histogram {
        writeln!(w, "{},{},{},{}", b.lo, b.hi, b.density, b.count)?;
    }
    w.flush()?;
    let mut w = create(dir, "mixture_density.csv")?;
    writeln!(w, "bin_lo,bin_hi,empirical_density,mixture_density")?;
    for b in &out.histogram {
        writeln!(w, "{},{},{},{}", b.lo, b.hi, b.density, b.mixture_density)?;
    }
    w.flush()?;
    let mut w = create(dir, "coverage.csv")?;
    writeln!(w, "aggregator,status,covered,trials,rate")?;
    for c in &out.coverage {
        if c.trials == 0 {
            writeln!(w, "{},NoRecords,0,0,", c.aggregator)?;
        } else {
            writeln!(w, "{},ok,{},{},{}", c.aggregator, c.covered, c.trials, c.rate())?;
        }
    }
    w.flush()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AssumptionKind;

    fn opts(p: f64, dir: &Path) -> SimulateOptions {
        SimulateOptions {
            kind: WindowKind::Sum,
            params: AssumptionParams {
                kind: AssumptionKind::Binomial,
                mu: 10.0,
                sigma: 1.0,
                p,
                m: 1,
                ell: 0,
                c_min: 0.0,
                c_max: 0.0,
            },
            w: 5,
            steps: 20_000,
            seed: 3,
            bins: 50,
            coverage_trials: 20,
            coverage_ell: 200,
            rho: RhoParams::default(),
            lambda_method: LambdaMethod::Full,
            output_dir: dir.to_path_buf(),
        }
    }

    #[test]
    fn simulate_zero_rate() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_simulate(&opts(0.0, dir.path())).unwrap();
        assert!(out.histogram.is_empty());
        assert!(out.coverage.iter().all(|c| c.trials == 0 && c.no_records == 20));
        let cov = std::fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
        assert!(cov.contains("max,NoRecords"));
        let hist = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
        assert_eq!(hist, "bin_lo,bin_hi,density,component_count\n");
    }

    #[test]
    fn simulate_is_reproducible() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let x = cmd_simulate(&opts(0.4, a.path())).unwrap();
        cmd_simulate(&opts(0.4, b.path())).unwrap();
        for f in ["histogram.csv", "mixture_density.csv", "coverage.csv"] {
            assert_eq!(
                std::fs::read(a.path().join(f)).unwrap(),
                std::fs::read(b.path().join(f)).unwrap()
            );
        }
        let total: f64 = x.histogram.iter().map(|b| b.density * (b.hi - b.lo)).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_bins() {
        let h = window_histogram(&[0.0, 1.0, 1.0, 4.0], 4, |_, _| 0.25);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 2, 0, 1]);
        assert_eq!(h[3].hi, 4.0);
        assert_eq!(h[0].mixture_density, 0.25);
    }
}
