//! Confidence bounds for the avg/max/min aggregate of a sliding window
//! chain, and the per-table driver that produces one bound per
//! (entity, feature, window, aggregator, period).

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::data::{
    fit_parameters, resample_on, AssumptionKind, AssumptionParams, Dataset, Grid,
};
use crate::error::{Error, Result};
use crate::parallel;
use crate::spectral::{LambdaMethod, SpectralQuantities};
use crate::window::{stationary_mixture, StationaryMixture, WindowKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregator {
    Avg,
    Max,
    Min,
}

impl Aggregator {
    pub const ALL: [Aggregator; 3] = [Aggregator::Avg, Aggregator::Max, Aggregator::Min];

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregator::Avg => "avg",
            Aggregator::Max => "max",
            Aggregator::Min => "min",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(Aggregator::Avg),
            "max" => Ok(Aggregator::Max),
            "min" => Ok(Aggregator::Min),
            other => Err(Error::Config(format!("unknown aggregator `{other}`"))),
        }
    }
}

/// Confidence levels: `rho` for the avg bound, `(rho_l, rho_r)` quantiles for
/// the max/min bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoParams {
    pub rho: f64,
    pub rho_l: f64,
    pub rho_r: f64,
}

impl Default for RhoParams {
    fn default() -> Self {
        Self { rho: 0.9, rho_l: 0.05, rho_r: 0.95 }
    }
}

impl RhoParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.rho_l > 0.0 && self.rho_l < self.rho_r && self.rho_r < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < rho_l < rho_r < 1, got {} and {}",
                self.rho_l, self.rho_r
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateBound {
    pub lo: f64,
    pub hi: f64,
    pub aggregator: Aggregator,
    /// The real bound replaced (part of) the probabilistic bound.
    pub clipped: bool,
    /// Closed-form value; `lo == hi`.
    pub exact: bool,
    pub lambda_used: f64,
    pub rho: RhoParams,
}

impl AggregateBound {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Number of full windows `ℓ − w + 1`, if any.
pub fn chain_length(ell: usize, w: usize) -> Option<usize> {
    if w == 0 || w > ell {
        None
    } else {
        Some(ell - w + 1)
    }
}

fn full_chain_length(params: &AssumptionParams, w: usize) -> Result<usize> {
    chain_length(params.ell, w).ok_or_else(|| {
        Error::Domain(format!("period {w} leaves no full window on a grid of {}", params.ell))
    })
}

/// `τ = max(|μ − c_min|, |c_max − μ|)`.
pub fn tau(params: &AssumptionParams) -> f64 {
    (params.mu - params.c_min).abs().max((params.c_max - params.mu).abs())
}

/// Per-component Hoeffding half-widths `bₙ τ √(2 α aₙ ℓ_w log(2/(1−ρ)))` on
/// the window-sum scale, before any clipping.
pub fn avg_component_half_widths(
    mixture: &StationaryMixture,
    spectral: &SpectralQuantities,
    params: &AssumptionParams,
    ell_w: usize,
    rho: f64,
) -> Vec<f64> {
    let log_term = (2.0 / (1.0 - rho)).ln();
    let t = tau(params);
    let ell = ell_w as f64;
    mixture
        .weights
        .iter()
        .zip(&mixture.scale_means)
        .map(|(&a, &b)| b * t * (2.0 * spectral.alpha * a * ell * log_term).sqrt())
        .collect()
}

/// Un-clipped half-width of the avg bound on the aggregate scale.
pub fn avg_half_width_unclipped(
    mixture: &StationaryMixture,
    spectral: &SpectralQuantities,
    params: &AssumptionParams,
    ell_w: usize,
    rho: f64,
) -> f64 {
    let total: f64 = avg_component_half_widths(mixture, spectral, params, ell_w, rho)
        .iter()
        .skip(1)
        .sum();
    total / (mixture.nonempty_mass() * ell_w as f64)
}

pub fn avg_bound(
    mixture: &StationaryMixture,
    spectral: &SpectralQuantities,
    params: &AssumptionParams,
    w: usize,
    rho: &RhoParams,
) -> Result<AggregateBound> {
    let ell_w = full_chain_length(params, w)?;
    if params.kind == AssumptionKind::Always {
        let value = match mixture.kind {
            WindowKind::Sum => w as f64 * params.mu,
            WindowKind::Avg => params.mu,
        };
        return Ok(AggregateBound {
            lo: value,
            hi: value,
            aggregator: Aggregator::Avg,
            clipped: false,
            exact: true,
            lambda_used: spectral.lambda,
            rho: *rho,
        });
    }
    let nonempty = mixture.nonempty_mass();
    if nonempty <= 0.0 {
        return Err(Error::NoRecords);
    }
    let ell = ell_w as f64;
    let half = avg_component_half_widths(mixture, spectral, params, ell_w, rho.rho);
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut clipped = false;
    for (n, (&a, &h)) in mixture.weights.iter().zip(&half).enumerate().skip(1) {
        if a == 0.0 {
            continue;
        }
        let scale = a * mixture.scale_means[n] * ell;
        let center = scale * params.mu;
        let (r_lo, r_hi) = (scale * params.c_min, scale * params.c_max);
        // The real bound always holds; intersecting with it engages exactly
        // when the Hoeffding interval is wider than the values allow.
        let (c_lo, c_hi) = if spectral.degenerate {
            (r_lo, r_hi)
        } else {
            ((center - h).clamp(r_lo, r_hi), (center + h).clamp(r_lo, r_hi))
        };
        clipped |= spectral.degenerate || c_lo != center - h || c_hi != center + h;
        lo += c_lo;
        hi += c_hi;
    }
    let denom = nonempty * ell;
    Ok(AggregateBound {
        lo: lo / denom,
        hi: hi / denom,
        aggregator: Aggregator::Avg,
        clipped,
        exact: false,
        lambda_used: spectral.lambda,
        rho: *rho,
    })
}

/// Inverse of the Gumbel CDF `exp(−exp(−x))`: `log(1 / log(1/q))`.
pub fn gumbel_quantile(q: f64) -> f64 {
    -(-q.ln()).ln()
}

/// Normalizing constants `(α, β)` for the max of `len` standard Gaussians.
pub fn gaussian_max_norming(len: usize) -> (f64, f64) {
    let two_log = 2.0 * (len as f64).ln();
    let alpha = two_log.powf(-0.5);
    let beta = two_log.sqrt()
        - 0.5 * alpha * ((len as f64).ln().ln() + (4.0 * std::f64::consts::PI).ln());
    (alpha, beta)
}

/// Bound on the max of the chain scaled by `sign` (±1).
fn extreme_bound(
    mixture: &StationaryMixture,
    params: &AssumptionParams,
    w: usize,
    rho: &RhoParams,
    sign: f64,
) -> Result<(f64, f64, bool)> {
    let ell_w = full_chain_length(params, w)? as f64;
    if mixture.nonempty_mass() <= 0.0 {
        return Err(Error::NoRecords);
    }
    let x_l = gumbel_quantile(rho.rho_l);
    let x_r = gumbel_quantile(rho.rho_r);

    let component = |n: usize, len: usize| -> (f64, f64, bool) {
        let b = sign * mixture.scale_means[n];
        let mean = b * params.mu;
        let (r_lo, r_hi) = if sign >= 0.0 {
            (b * params.c_min, b * params.c_max)
        } else {
            (b * params.c_max, b * params.c_min)
        };
        if len < 3 {
            return (r_lo, r_hi, true);
        }
        let sd = mixture.scale_vars[n].sqrt() * params.sigma;
        let (alpha, beta) = gaussian_max_norming(len);
        let lo = mean + sd * (alpha * x_l + beta);
        let hi = mean + sd * (alpha * x_r + beta);
        let (c_lo, c_hi) = (lo.clamp(r_lo, r_hi), hi.clamp(r_lo, r_hi));
        (c_lo, c_hi, c_lo != lo || c_hi != hi)
    };

    let mut out: Option<(f64, f64, bool)> = None;
    for n in 1..mixture.len() {
        let len = (mixture.weights[n] * ell_w).round() as usize;
        if len == 0 {
            // Not expected to occur in the chain at all.
            continue;
        }
        let (lo, hi, clip) = component(n, len);
        out = Some(match out {
            None => (lo, hi, clip),
            Some((l, h, c)) => (l.max(lo), h.max(hi), c || clip),
        });
    }
    Ok(out.unwrap_or_else(|| {
        // Every component rounds to zero occurrences; the most likely
        // non-empty one stands in with its real bound.
        let mode = (1..mixture.len())
            .max_by(|&i, &j| mixture.weights[i].total_cmp(&mixture.weights[j]).then(j.cmp(&i)))
            .expect("mixture has a non-empty component");
        component(mode, 1)
    }))
}

pub fn max_bound(
    mixture: &StationaryMixture,
    params: &AssumptionParams,
    w: usize,
    rho: &RhoParams,
    lambda_used: f64,
) -> Result<AggregateBound> {
    let (lo, hi, clipped) = extreme_bound(mixture, params, w, rho, 1.0)?;
    Ok(AggregateBound {
        lo,
        hi,
        aggregator: Aggregator::Max,
        clipped,
        exact: false,
        lambda_used,
        rho: *rho,
    })
}

/// `min W = −max(−W)`: the max bound of the negated chain, negated with its
/// endpoints swapped.
pub fn min_bound(
    mixture: &StationaryMixture,
    params: &AssumptionParams,
    w: usize,
    rho: &RhoParams,
    lambda_used: f64,
) -> Result<AggregateBound> {
    let (lo, hi, clipped) = extreme_bound(mixture, params, w, rho, -1.0)?;
    Ok(AggregateBound {
        lo: -hi,
        hi: -lo,
        aggregator: Aggregator::Min,
        clipped,
        exact: false,
        lambda_used,
        rho: *rho,
    })
}

/// One output column: `<feature>__<window>__<aggregator>__<period>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ColumnKey {
    pub feature: usize,
    pub kind: WindowKind,
    pub aggregator: Aggregator,
    pub period: usize,
}

impl ColumnKey {
    pub fn name(&self, features: &[String]) -> String {
        format!("{}__{}__{}__{}", features[self.feature], self.kind, self.aggregator, self.period)
    }
}

/// Column layout shared by bound tables and feature tables: feature-major,
/// then window kind, aggregator and period in the order given.
pub fn column_layout(
    n_features: usize,
    kinds: &[WindowKind],
    aggregators: &[Aggregator],
    periods: &[usize],
) -> Vec<ColumnKey> {
    let mut cols = Vec::with_capacity(n_features * kinds.len() * aggregators.len() * periods.len());
    for feature in 0..n_features {
        for &kind in kinds {
            for &aggregator in aggregators {
                for &period in periods {
                    cols.push(ColumnKey { feature, kind, aggregator, period });
                }
            }
        }
    }
    cols
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub freq: i64,
    pub t0: Option<i64>,
    pub horizon: Option<i64>,
    pub periods: Vec<usize>,
    pub kinds: Vec<WindowKind>,
    pub aggregators: Vec<Aggregator>,
    pub assumption: Option<AssumptionKind>,
    pub m_cap: Option<usize>,
    pub rho: RhoParams,
    pub lambda_method: LambdaMethod,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            freq: 86_400,
            t0: None,
            horizon: None,
            periods: vec![7],
            kinds: WindowKind::ALL.to_vec(),
            aggregators: Aggregator::ALL.to_vec(),
            assumption: None,
            m_cap: None,
            rho: RhoParams::default(),
            lambda_method: LambdaMethod::Full,
        }
    }
}

impl EstimateConfig {
    /// Shared grid; defaults to the global min/max action timestamps.
    pub fn grid(&self, dataset: &Dataset) -> Result<Option<Grid>> {
        let covering = Grid::covering(&dataset.actions, self.freq)?;
        let t0 = self.t0.or(covering.map(|g| g.t0));
        let horizon = self.horizon.or(covering.map(|g| g.horizon));
        match (t0, horizon) {
            (Some(t0), Some(h)) => Grid::new(t0, self.freq, h).map(Some),
            _ => Ok(None),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.is_empty() || self.periods.contains(&0) {
            return Err(Error::Config("periods must be a non-empty list of positive integers".into()));
        }
        if self.kinds.is_empty() || self.aggregators.is_empty() {
            return Err(Error::Config("need at least one window and one aggregator".into()));
        }
        if self.freq <= 0 {
            return Err(Error::Config("freq_seconds must be positive".into()));
        }
        self.rho.validate()
    }

    pub fn columns(&self, n_features: usize) -> Vec<ColumnKey> {
        column_layout(n_features, &self.kinds, &self.aggregators, &self.periods)
    }
}

/// Fitted parameters for every (entity, feature); `None` for empty columns.
#[derive(Debug, Clone)]
pub struct FittedTable {
    pub entity_ids: Vec<String>,
    pub features: Vec<String>,
    pub grid: Option<Grid>,
    /// Row-major `[entity][feature]`.
    pub params: Vec<Option<AssumptionParams>>,
}

impl FittedTable {
    pub fn get(&self, entity: usize, feature: usize) -> Option<&AssumptionParams> {
        self.params[entity * self.features.len() + feature].as_ref()
    }
}

pub fn fit_all(dataset: &Dataset, cfg: &EstimateConfig) -> Result<FittedTable> {
    let grid = cfg.grid(dataset)?;
    let n_feat = dataset.actions.features().len();
    let n_ent = dataset.entities.len();
    let params = match grid {
        None => vec![None; n_ent * n_feat],
        Some(grid) => parallel::try_map_range(n_ent * n_feat, |task| {
            let (e, f) = (task / n_feat, task % n_feat);
            let records = dataset.actions.column_records(e, f);
            let fitted = resample_on(&records, &grid)
                .and_then(|col| fit_parameters(&col, cfg.assumption, cfg.m_cap));
            match fitted {
                Ok(p) => Ok(Some(p)),
                Err(Error::EmptyColumn) => Ok(None),
                Err(err) => Err(err.context(format!(
                    "entity `{}`, feature `{}`",
                    dataset.entities.ids()[e],
                    dataset.actions.features()[f]
                ))),
            }
        })?,
    };
    Ok(FittedTable {
        entity_ids: dataset.entities.ids().to_vec(),
        features: dataset.actions.features().to_vec(),
        grid,
        params,
    })
}

/// One bound per (entity, column); `None` where the column has no records or
/// no full window.
#[derive(Debug, Clone)]
pub struct BoundTable {
    pub entity_ids: Vec<String>,
    pub features: Vec<String>,
    pub columns: Vec<ColumnKey>,
    /// Row-major `[entity][column]`.
    pub cells: Vec<Option<AggregateBound>>,
}

impl BoundTable {
    pub fn n_rows(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&AggregateBound> {
        self.cells[row * self.columns.len() + col].as_ref()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name(&self.features)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        wtr.write_record([
            "entity_id", "feature", "window", "aggregator", "period", "lo", "hi", "clipped", "exact",
        ])?;
        for (row, id) in self.entity_ids.iter().enumerate() {
            for (col, key) in self.columns.iter().enumerate() {
                let base = [
                    id.clone(),
                    self.features[key.feature].clone(),
                    key.kind.to_string(),
                    key.aggregator.to_string(),
                    key.period.to_string(),
                ];
                let tail = match self.get(row, col) {
                    Some(b) => [
                        b.lo.to_string(),
                        b.hi.to_string(),
                        b.clipped.to_string(),
                        b.exact.to_string(),
                    ],
                    None => Default::default(),
                };
                wtr.write_record(base.iter().chain(tail.iter()))?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Bounds for every requested (kind, aggregator, period) of one column.
/// Output order matches [`column_layout`] restricted to one feature.
pub fn column_bounds(
    params: Option<&AssumptionParams>,
    cfg: &EstimateConfig,
) -> Vec<Option<AggregateBound>> {
    let mut out = Vec::with_capacity(cfg.kinds.len() * cfg.aggregators.len() * cfg.periods.len());
    for &kind in &cfg.kinds {
        let per_period: Vec<Vec<Option<AggregateBound>>> = cfg
            .periods
            .iter()
            .map(|&w| match params {
                Some(p) => period_bounds(kind, p, w, cfg),
                None => vec![None; cfg.aggregators.len()],
            })
            .collect();
        for agg_idx in 0..cfg.aggregators.len() {
            for bounds in &per_period {
                out.push(bounds[agg_idx]);
            }
        }
    }
    out
}

fn period_bounds(
    kind: WindowKind,
    params: &AssumptionParams,
    w: usize,
    cfg: &EstimateConfig,
) -> Vec<Option<AggregateBound>> {
    if chain_length(params.ell, w).is_none() {
        return vec![None; cfg.aggregators.len()];
    }
    let mixture = stationary_mixture(kind, params, w);
    let spectral = cfg
        .aggregators
        .contains(&Aggregator::Avg)
        .then(|| SpectralQuantities::compute(kind, params, &mixture, w, cfg.lambda_method));
    let lambda = spectral.map_or(f64::NAN, |s| s.lambda);
    cfg.aggregators
        .iter()
        .map(|agg| {
            let res = match agg {
                Aggregator::Avg => avg_bound(&mixture, spectral.as_ref().expect("computed"), params, w, &cfg.rho),
                Aggregator::Max => max_bound(&mixture, params, w, &cfg.rho, lambda),
                Aggregator::Min => min_bound(&mixture, params, w, &cfg.rho, lambda),
            };
            res.ok()
        })
        .collect()
}

/// Bounds from already-fitted parameters. Cost depends on the grid and the
/// fitted `m`, not on the number of records.
pub fn estimate_bounds(fitted: &FittedTable, cfg: &EstimateConfig) -> BoundTable {
    let n_feat = fitted.features.len();
    let n_ent = fitted.entity_ids.len();
    let blocks = parallel::map_range(n_ent * n_feat, |task| {
        column_bounds(fitted.get(task / n_feat, task % n_feat), cfg)
    });
    BoundTable {
        entity_ids: fitted.entity_ids.clone(),
        features: fitted.features.clone(),
        columns: cfg.columns(n_feat),
        cells: blocks.into_iter().flatten().collect(),
    }
}

pub fn estimate_all(dataset: &Dataset, cfg: &EstimateConfig) -> Result<BoundTable> {
    cfg.validate()?;
    let fitted = fit_all(dataset, cfg)?;
    Ok(estimate_bounds(&fitted, cfg))
}
