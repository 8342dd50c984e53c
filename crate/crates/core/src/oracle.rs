//! Ground truth. Brute-force generation of the real feature table (by
//! slicing the dense resampled column, or by a rolling pass over the sorted
//! records) and Monte-Carlo simulation of the window chain.
//!
//! Both generators sum each window afresh in canonical record order, so their
//! outputs agree bit for bit.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::bounds::{Aggregator, ColumnKey, EstimateConfig};
use crate::data::{
    resample_on, sort_records, AssumptionKind, AssumptionParams, Dataset, Grid, ResampledColumn,
    Timestamp,
};
use crate::error::{Error, Result};
use crate::parallel;
use crate::window::WindowKind;

/// Which window positions are scanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EdgePolicy {
    /// Windows ending at buckets `w−1 .. ℓ−1`; every window spans `w` buckets.
    #[default]
    FullOnly,
    /// Windows ending at every bucket; the first `w−1` are truncated at the
    /// start of the grid.
    PartialStart,
}

impl EdgePolicy {
    fn first_end(self, w: usize) -> usize {
        match self {
            EdgePolicy::FullOnly => w - 1,
            EdgePolicy::PartialStart => 0,
        }
    }
}

impl fmt::Display for EdgePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgePolicy::FullOnly => "full-only",
            EdgePolicy::PartialStart => "partial-start",
        })
    }
}

impl FromStr for EdgePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-only" | "full" => Ok(EdgePolicy::FullOnly),
            "partial-start" | "partial" => Ok(EdgePolicy::PartialStart),
            other => Err(Error::Config(format!("unknown edge policy `{other}`"))),
        }
    }
}

/// The real feature table. `None` marks an entity with no non-empty window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub entity_ids: Vec<String>,
    pub features: Vec<String>,
    pub columns: Vec<ColumnKey>,
    /// Row-major `[entity][column]`.
    pub cells: Vec<Option<f64>>,
}

impl FeatureTable {
    pub fn n_rows(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[row * self.columns.len() + col]
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name(&self.features)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["entity_id".to_string()];
        header.extend(self.column_names());
        wtr.write_record(&header)?;
        for (row, id) in self.entity_ids.iter().enumerate() {
            let mut rec = Vec::with_capacity(self.n_cols() + 1);
            rec.push(id.clone());
            for col in 0..self.n_cols() {
                rec.push(self.get(row, col).map(|v| v.to_string()).unwrap_or_default());
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Running avg/max/min over the non-empty windows of one series.
#[derive(Debug, Clone, Copy)]
struct Agg {
    sum: f64,
    count: usize,
    max: f64,
    min: f64,
}

impl Agg {
    fn new() -> Self {
        Self { sum: 0.0, count: 0, max: f64::NEG_INFINITY, min: f64::INFINITY }
    }

    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
        self.max = self.max.max(v);
        self.min = self.min.min(v);
    }

    fn get(&self, agg: Aggregator) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        Some(match agg {
            Aggregator::Avg => self.sum / self.count as f64,
            Aggregator::Max => self.max,
            Aggregator::Min => self.min,
        })
    }
}

/// Window value from its record sum and count.
fn window_value(kind: WindowKind, sum: f64, count: usize) -> f64 {
    match kind {
        WindowKind::Sum => sum,
        WindowKind::Avg => sum / count as f64,
    }
}

/// Generation method for the real feature table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfMethod {
    Timecut,
    Sparse,
}

impl FromStr for TfMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "timecut" => Ok(TfMethod::Timecut),
            "sparse" => Ok(TfMethod::Sparse),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

fn timecut_series(col: &ResampledColumn, kind: WindowKind, w: usize, policy: EdgePolicy) -> Agg {
    let ell = col.ell();
    let mut agg = Agg::new();
    for end in policy.first_end(w)..ell {
        let start = (end + 1).saturating_sub(w);
        let mut sum = 0.0;
        let mut count = 0;
        for bucket in &col.values[start..=end] {
            for &v in bucket {
                sum += v;
            }
            count += bucket.len();
        }
        if count > 0 {
            agg.push(window_value(kind, sum, count));
        }
    }
    agg
}

/// `records` sorted canonically, already mapped to bucket indices. The live
/// records of a window are always the contiguous run `records[lo..hi]`.
fn sparse_series(records: &[(usize, f64)], ell: usize, kind: WindowKind, w: usize, policy: EdgePolicy) -> Agg {
    let mut agg = Agg::new();
    let (mut lo, mut hi) = (0, 0);
    let mut end = policy.first_end(w);
    while end < ell {
        while hi < records.len() && records[hi].0 <= end {
            hi += 1;
        }
        let start = (end + 1).saturating_sub(w);
        while lo < hi && records[lo].0 < start {
            lo += 1;
        }
        if lo == hi {
            // Nothing live until the next record enters.
            match records.get(hi) {
                Some(&(b, _)) => end = end.max(b),
                None => break,
            }
            continue;
        }
        let mut sum = 0.0;
        for &(_, v) in &records[lo..hi] {
            sum += v;
        }
        agg.push(window_value(kind, sum, hi - lo));
        end += 1;
    }
    agg
}

fn fill_cells(
    aggs: impl Fn(WindowKind, usize) -> Agg,
    cfg: &EstimateConfig,
    ell: usize,
    out: &mut Vec<Option<f64>>,
) {
    for &kind in &cfg.kinds {
        let per_period: Vec<Option<Agg>> =
            cfg.periods.iter().map(|&w| (w <= ell).then(|| aggs(kind, w))).collect();
        for &a in &cfg.aggregators {
            for p in &per_period {
                out.push(p.and_then(|p| p.get(a)));
            }
        }
    }
}

/// Real feature table of one dataset.
pub fn generate_tf(
    dataset: &Dataset,
    cfg: &EstimateConfig,
    policy: EdgePolicy,
    method: TfMethod,
) -> Result<FeatureTable> {
    let grid = cfg.grid(dataset)?;
    let n_feat = dataset.actions.features().len();
    let n_ent = dataset.entities.len();
    let block = cfg.kinds.len() * cfg.aggregators.len() * cfg.periods.len();
    let rows = parallel::map_range(n_ent, |e| {
        let mut cells = Vec::with_capacity(n_feat * block);
        for f in 0..n_feat {
            let records = dataset.actions.column_records(e, f);
            match grid {
                Some(grid) => entity_feature_cells(&records, &grid, cfg, policy, method, &mut cells),
                None => cells.extend(std::iter::repeat_n(None, block)),
            }
        }
        cells
    });
    Ok(FeatureTable {
        entity_ids: dataset.entities.ids().to_vec(),
        features: dataset.actions.features().to_vec(),
        columns: cfg.columns(n_feat),
        cells: rows.into_iter().flatten().collect(),
    })
}

fn entity_feature_cells(
    records: &[(Timestamp, f64)],
    grid: &Grid,
    cfg: &EstimateConfig,
    policy: EdgePolicy,
    method: TfMethod,
    out: &mut Vec<Option<f64>>,
) {
    let ell = grid.ell();
    match method {
        TfMethod::Timecut => match resample_on(records, grid) {
            Ok(col) => fill_cells(|k, w| timecut_series(&col, k, w, policy), cfg, ell, out),
            Err(_) => fill_cells(|_, _| Agg::new(), cfg, ell, out),
        },
        TfMethod::Sparse => {
            let mut sorted = records.to_vec();
            sort_records(&mut sorted);
            let bucketed: Vec<(usize, f64)> =
                sorted.iter().filter_map(|&(t, v)| grid.bucket(t).map(|b| (b, v))).collect();
            fill_cells(|k, w| sparse_series(&bucketed, ell, k, w, policy), cfg, ell, out)
        }
    }
}

/// Slices the dense resampled column for every window.
pub fn generate_tf_timecut(dataset: &Dataset, cfg: &EstimateConfig, policy: EdgePolicy) -> Result<FeatureTable> {
    generate_tf(dataset, cfg, policy, TfMethod::Timecut)
}

/// One pass over the sorted records with a rolling range of live records; cost
/// grows with the number of records rather than the grid length.
pub fn generate_tf_sparse(dataset: &Dataset, cfg: &EstimateConfig, policy: EdgePolicy) -> Result<FeatureTable> {
    generate_tf(dataset, cfg, policy, TfMethod::Sparse)
}

/// Window values of a simulated chain and their record counts. Windows
/// with count 0 carry value 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub values: Vec<f64>,
    pub counts: Vec<u32>,
    pub seed: u64,
}

impl ChainSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values of the non-empty windows.
    pub fn nonempty(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.values.iter().zip(&self.counts).filter(|(_, &c)| c > 0).map(|(&v, &c)| (v, c))
    }

    pub fn aggregate(&self, agg: Aggregator) -> Option<f64> {
        let mut acc = Agg::new();
        for (v, _) in self.nonempty() {
            acc.push(v);
        }
        acc.get(agg)
    }
}

/// Draws a resampled column of `ell` buckets: counts per the assumption
/// (Poisson draws capped at `m`), values `N(μ, σ²)`.
pub fn simulate_column(params: &AssumptionParams, ell: usize, seed: u64) -> ResampledColumn {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(params.mu, params.sigma.max(0.0)).expect("finite normal parameters");
    let poisson = (params.kind == AssumptionKind::Poisson && params.p > 0.0)
        .then(|| Poisson::new(params.p).expect("positive rate"));
    let mut counts = Vec::with_capacity(ell);
    let mut values = Vec::with_capacity(ell);
    for _ in 0..ell {
        let c = match params.kind {
            AssumptionKind::Always => 1,
            AssumptionKind::Binomial => u32::from(rng.random::<f64>() < params.p),
            AssumptionKind::Poisson => match &poisson {
                Some(d) => (d.sample(&mut rng) as u64).min(params.m as u64) as u32,
                None => 0,
            },
        };
        let vals: Vec<f64> = (0..c).map(|_| normal.sample(&mut rng)).collect();
        counts.push(c);
        values.push(vals);
    }
    ResampledColumn { counts, values, freq: 1, dropped: 0 }
}

/// Full-window chain over a resampled column.
pub fn chain_from_column(col: &ResampledColumn, kind: WindowKind, w: usize, seed: u64) -> ChainSample {
    let ell = col.ell();
    let len = (ell + 1).saturating_sub(w);
    let mut values = Vec::with_capacity(len);
    let mut counts = Vec::with_capacity(len);
    for end in (w - 1)..ell {
        let mut sum = 0.0;
        let mut count = 0usize;
        for bucket in &col.values[end + 1 - w..=end] {
            for &v in bucket {
                sum += v;
            }
            count += bucket.len();
        }
        counts.push(count as u32);
        values.push(if count == 0 { 0.0 } else { window_value(kind, sum, count) });
    }
    ChainSample { values, counts, seed }
}

/// Simulates `steps` buckets and rolls a period-`w` window over them, giving
/// `steps − w + 1` states.
pub fn simulate_chain(kind: WindowKind, params: &AssumptionParams, w: usize, steps: usize, seed: u64) -> ChainSample {
    assert!(w >= 1 && steps >= w, "need steps >= w >= 1");
    let col = simulate_column(params, steps, seed);
    chain_from_column(&col, kind, w, seed)
}

/// Seed of the `i`-th child stream of `master`.
pub fn child_seed(master: u64, i: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(i.wrapping_add(1));
    rng.random()
}
