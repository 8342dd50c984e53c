//! Random forest used only for its impurity-decrease feature importance.
//! CART trees on bootstrap samples; Gini impurity for class labels,
//! variance for numeric labels. Trees are grown until leaves are pure, hold
//! one sample, or cannot be split.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Target;
use crate::error::{Error, Result};
use crate::oracle::child_seed;
use crate::parallel;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "matrix shape mismatch");
        Self { n_rows, n_cols, data }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestImportance {
    pub importance: Vec<f64>,
    /// Labels (or features) carried no signal, importance is uniform.
    pub uniform: bool,
}

enum Labels<'a> {
    Classes { codes: &'a [usize], n_classes: usize },
    Numeric(&'a [f64]),
}

/// Per-node label statistics supporting O(1) moves from right to left.
struct SplitStats {
    // Classification: per-class counts and the sum of squared counts.
    left: Vec<usize>,
    right: Vec<usize>,
    sq_left: f64,
    sq_right: f64,
    // Regression: label sums.
    sum_left: f64,
    sum_right: f64,
}

impl Labels<'_> {
    fn is_pure(&self, idx: &[usize]) -> bool {
        match self {
            Labels::Classes { codes, .. } => idx.iter().all(|&i| codes[i] == codes[idx[0]]),
            Labels::Numeric(y) => idx.iter().all(|&i| y[i] == y[idx[0]]),
        }
    }

    /// Impurity decrease of the best threshold split on `values` (already
    /// sorted along with `idx`), as `(gain, split position)`.
    fn best_split(&self, idx: &[usize], values: &[f64], stats: &mut SplitStats) -> Option<(f64, usize)> {
        let n = idx.len();
        let mut best: Option<(f64, usize)> = None;
        match self {
            Labels::Classes { codes, n_classes } => {
                stats.left.clear();
                stats.left.resize(*n_classes, 0);
                stats.right.clear();
                stats.right.resize(*n_classes, 0);
                for &i in idx {
                    stats.right[codes[i]] += 1;
                }
                stats.sq_left = 0.0;
                stats.sq_right = stats.right.iter().map(|&c| (c * c) as f64).sum();
                let parent = stats.sq_right / n as f64;
                for pos in 1..n {
                    let k = codes[idx[pos - 1]];
                    stats.sq_left += (2 * stats.left[k] + 1) as f64;
                    stats.sq_right -= (2 * stats.right[k] - 1) as f64;
                    stats.left[k] += 1;
                    stats.right[k] -= 1;
                    if values[pos] == values[pos - 1] {
                        continue;
                    }
                    let gain = stats.sq_left / pos as f64 + stats.sq_right / (n - pos) as f64 - parent;
                    if best.is_none_or(|(g, _)| gain > g) {
                        best = Some((gain, pos));
                    }
                }
            }
            Labels::Numeric(y) => {
                let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
                // Centered labels keep the sums well conditioned.
                stats.sum_left = 0.0;
                stats.sum_right = idx.iter().map(|&i| y[i] - mean).sum();
                let parent = stats.sum_right * stats.sum_right / n as f64;
                for pos in 1..n {
                    let v = y[idx[pos - 1]] - mean;
                    stats.sum_left += v;
                    stats.sum_right -= v;
                    if values[pos] == values[pos - 1] {
                        continue;
                    }
                    let gain = stats.sum_left * stats.sum_left / pos as f64
                        + stats.sum_right * stats.sum_right / (n - pos) as f64
                        - parent;
                    if best.is_none_or(|(g, _)| gain > g) {
                        best = Some((gain, pos));
                    }
                }
            }
        }
        best.map(|(g, p)| (g.max(0.0), p))
    }
}

fn grow_tree(x: &Matrix, labels: &Labels<'_>, rows: Vec<usize>, max_features: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let f = x.n_cols;
    let mut importance = vec![0.0; f];
    let mut stats = SplitStats {
        left: Vec::new(),
        right: Vec::new(),
        sq_left: 0.0,
        sq_right: 0.0,
        sum_left: 0.0,
        sum_right: 0.0,
    };
    let mut order: Vec<usize> = (0..f).collect();
    let mut pairs: Vec<(f64, usize)> = Vec::new();
    let mut idx_buf: Vec<usize> = Vec::new();
    let mut val_buf: Vec<f64> = Vec::new();
    let mut stack = vec![rows];
    while let Some(node) = stack.pop() {
        if node.len() <= 1 || labels.is_pure(&node) {
            continue;
        }
        order.shuffle(rng);
        let mut best: Option<(f64, usize, usize)> = None; // gain, feature, position
        let mut best_idx: Vec<usize> = Vec::new();
        for (tried, &feat) in order.iter().enumerate() {
            // Only look past the candidate set when none of it could split.
            if tried >= max_features && best.is_some() {
                break;
            }
            pairs.clear();
            pairs.extend(node.iter().map(|&r| (x.get(r, feat), r)));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if pairs[0].0 == pairs[pairs.len() - 1].0 {
                continue;
            }
            idx_buf.clear();
            idx_buf.extend(pairs.iter().map(|p| p.1));
            val_buf.clear();
            val_buf.extend(pairs.iter().map(|p| p.0));
            if let Some((gain, pos)) = labels.best_split(&idx_buf, &val_buf, &mut stats) {
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, feat, pos));
                    best_idx.clone_from(&idx_buf);
                }
            }
        }
        let Some((gain, feat, pos)) = best else { continue };
        importance[feat] += gain;
        let right = best_idx.split_off(pos);
        stack.push(right);
        stack.push(best_idx);
    }
    importance
}

/// Mean impurity-decrease importance over `trees` bootstrap trees, normalized
/// to sum 1. Degenerate inputs (one class, constant labels or no split
/// anywhere) give the uniform vector `1/f` with a warning.
pub fn forest_importance(x: &Matrix, y: &Target, trees: usize, seed: u64) -> Result<ForestImportance> {
    let (n, f) = (x.n_rows, x.n_cols);
    if n < 2 || f == 0 {
        return Err(Error::Domain(format!("forest needs >= 2 rows and >= 1 column, got {n}x{f}")));
    }
    if y.len() != n {
        return Err(Error::Schema(format!("{} labels for {n} rows", y.len())));
    }
    if trees == 0 {
        return Err(Error::Config("trees must be positive".into()));
    }
    let labels = match y {
        Target::Classes { codes, names } => Labels::Classes { codes, n_classes: names.len() },
        Target::Numeric(v) => Labels::Numeric(v),
    };
    let uniform = || ForestImportance { importance: vec![1.0 / f as f64; f], uniform: true };
    let all: Vec<usize> = (0..n).collect();
    if labels.is_pure(&all) {
        log::warn!("single-class label: importance is uniform");
        return Ok(uniform());
    }
    let max_features = ((f as f64).sqrt().ceil() as usize).clamp(1, f);
    let per_tree = parallel::map_range(trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, t as u64));
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        grow_tree(x, &labels, rows, max_features, &mut rng)
    });
    let mut total = vec![0.0; f];
    for imp in &per_tree {
        for (t, v) in total.iter_mut().zip(imp) {
            *t += v;
        }
    }
    let sum: f64 = total.iter().sum();
    if !sum.is_finite() || sum <= 0.0 {
        log::warn!("no informative split in any tree: importance is uniform");
        return Ok(uniform());
    }
    Ok(ForestImportance { importance: total.into_iter().map(|v| v / sum).collect(), uniform: false })
}
