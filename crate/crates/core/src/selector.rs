//! Feature ranking from bounds: sample fake feature tables cell-wise from the
//! bound intervals, score each with a random forest and average over a
//! bagging ensemble.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::BoundTable;
use crate::data::Target;
use crate::error::{Error, Result};
use crate::forest::{forest_importance, Matrix};
use crate::oracle::{child_seed, FeatureTable};
use crate::parallel;

/// A feature table drawn from the bounds. Null bounds become 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeFeatureTable {
    pub columns: Vec<String>,
    pub x: Matrix,
    pub seed: u64,
}

/// Uniform draw from `[lo, hi]` per cell; exact bounds give the point value.
pub fn sample_fake_tf(bounds: &BoundTable, seed: u64) -> FakeFeatureTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = bounds
        .cells
        .iter()
        .map(|cell| match cell {
            None => 0.0,
            Some(b) if b.exact || b.lo == b.hi => b.lo,
            Some(b) => {
                let u: f64 = rng.random();
                // Guard the upper end against rounding past `hi`.
                (b.lo + (b.hi - b.lo) * u).min(b.hi)
            }
        })
        .collect();
    FakeFeatureTable {
        columns: bounds.column_names(),
        x: Matrix::new(bounds.n_rows(), bounds.n_cols(), data),
        seed,
    }
}

/// The real feature table as a matrix, nulls as 0.
pub fn feature_matrix(tf: &FeatureTable) -> Matrix {
    Matrix::new(tf.n_rows(), tf.n_cols(), tf.cells.iter().map(|c| c.unwrap_or(0.0)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceReport {
    pub columns: Vec<String>,
    /// `[ensemble][column]`.
    pub per_ensemble: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Column indices, best first.
    pub order: Vec<usize>,
}

impl ImportanceReport {
    fn from_runs(columns: Vec<String>, per_ensemble: Vec<Vec<f64>>) -> Self {
        let f = columns.len();
        let k = per_ensemble.len() as f64;
        let mean: Vec<f64> = (0..f).map(|j| per_ensemble.iter().map(|r| r[j]).sum::<f64>() / k).collect();
        let std = (0..f)
            .map(|j| {
                if per_ensemble.len() < 2 {
                    return 0.0;
                }
                let ss: f64 = per_ensemble.iter().map(|r| (r[j] - mean[j]).powi(2)).sum();
                (ss / (k - 1.0)).sqrt()
            })
            .collect();
        let mut order: Vec<usize> = (0..f).collect();
        order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then_with(|| columns[a].cmp(&columns[b])));
        Self { columns, per_ensemble, mean, std, order }
    }

    /// 1-based rank of every column.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.columns.len()];
        for (pos, &j) in self.order.iter().enumerate() {
            r[j] = pos + 1;
        }
        r
    }

    /// Column names of the `k` best.
    pub fn top(&self, k: usize) -> Vec<&str> {
        self.order.iter().take(k).map(|&j| self.columns[j].as_str()).collect()
    }

    pub fn importance_of(&self, column: &str) -> Option<f64> {
        self.columns.iter().position(|c| c == column).map(|j| self.mean[j])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        wtr.write_record(["rank", "feature_column", "mean_importance", "std_importance"])?;
        for (pos, &j) in self.order.iter().enumerate() {
            wtr.write_record([
                (pos + 1).to_string(),
                self.columns[j].clone(),
                self.mean[j].to_string(),
                self.std[j].to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One row per column in rank order, one importance column per ensemble.
    pub fn write_ensembles_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header = vec!["feature_column".to_string()];
        header.extend((0..self.per_ensemble.len()).map(|i| format!("ensemble_{i}")));
        wtr.write_record(&header)?;
        for &j in &self.order {
            let mut rec = vec![self.columns[j].clone()];
            rec.extend(self.per_ensemble.iter().map(|r| r[j].to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Ensemble `i` draws its fake table and its forest from the child seed
/// `(master_seed, i)`.
pub fn ensemble_select(
    bounds: &BoundTable,
    y: &Target,
    ensembles: usize,
    trees: usize,
    master_seed: u64,
) -> Result<ImportanceReport> {
    run_ensembles(bounds.column_names(), ensembles, trees, master_seed, y, |seed| {
        sample_fake_tf(bounds, seed).x
    })
}

/// Same protocol on the real feature table: every ensemble sees the same
/// matrix and differs only in the forest's randomness.
pub fn ensemble_select_real(
    tf: &FeatureTable,
    y: &Target,
    ensembles: usize,
    trees: usize,
    master_seed: u64,
) -> Result<ImportanceReport> {
    let x = feature_matrix(tf);
    run_ensembles(tf.column_names(), ensembles, trees, master_seed, y, |_| x.clone())
}

fn run_ensembles<F>(
    columns: Vec<String>,
    ensembles: usize,
    trees: usize,
    master_seed: u64,
    y: &Target,
    sample: F,
) -> Result<ImportanceReport>
where
    F: Fn(u64) -> Matrix + Send + Sync,
{
    if ensembles == 0 {
        return Err(Error::Config("ensembles must be positive".into()));
    }
    let runs = parallel::try_map_range(ensembles, |i| {
        let seed = child_seed(master_seed, i as u64);
        let x = sample(child_seed(seed, 0));
        forest_importance(&x, y, trees, child_seed(seed, 1)).map(|r| r.importance)
    })?;
    Ok(ImportanceReport::from_runs(columns, runs))
}

/// `k = ⌈fraction · f⌉`, at least 1.
pub fn top_k(fraction: f64, f: usize) -> usize {
    ((fraction * f as f64 - 1e-9).ceil() as usize).clamp(1, f.max(1))
}

/// Share of the actual top-k recovered in the estimated top-k.
pub fn rank_recall(estimated: &ImportanceReport, actual: &ImportanceReport, fraction: f64) -> Result<f64> {
    check_columns(estimated, actual)?;
    let f = estimated.columns.len();
    if f == 0 {
        return Err(Error::Schema("no feature columns".into()));
    }
    let k = top_k(fraction, f);
    let mut in_actual = vec![false; f];
    for &j in actual.order.iter().take(k) {
        in_actual[j] = true;
    }
    let hits = estimated.order.iter().take(k).filter(|&&j| in_actual[j]).count();
    Ok(hits as f64 / k as f64)
}

fn check_columns(a: &ImportanceReport, b: &ImportanceReport) -> Result<()> {
    if a.columns != b.columns {
        return Err(Error::Schema("importance reports cover different feature columns".into()));
    }
    Ok(())
}

/// `(Q1, median, Q3)` of `|est − act| / act` over columns with positive
/// actual importance; linear interpolation between order statistics.
pub fn relative_error_quartiles(estimated: &ImportanceReport, actual: &ImportanceReport) -> Result<(f64, f64, f64)> {
    check_columns(estimated, actual)?;
    let mut rel: Vec<f64> = estimated
        .mean
        .iter()
        .zip(&actual.mean)
        .filter(|(_, &a)| a > 0.0)
        .map(|(&e, &a)| (e - a).abs() / a)
        .collect();
    if rel.is_empty() {
        return Ok((f64::NAN, f64::NAN, f64::NAN));
    }
    rel.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (rel.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        rel[lo] + (h - lo as f64) * (rel[hi] - rel[lo])
    };
    Ok((q(0.25), q(0.5), q(0.75)))
}
