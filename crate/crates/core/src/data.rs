//! Entity/action tables, resampling onto a fixed grid and parameter fitting.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

/// Seconds since the Unix epoch.
pub type Timestamp = i64;

/// Entity table: one row per entity with its (string-typed) label.
#[derive(Debug, Clone)]
pub struct EntityTable {
    ids: Vec<String>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

/// Prediction target decoded from the entity labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Classes { codes: Vec<usize>, names: Vec<String> },
    Numeric(Vec<f64>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Classes { codes, .. } => codes.len(),
            Target::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl EntityTable {
    pub fn new(ids: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if ids.len() != labels.len() {
            return Err(Error::Schema("entity ids and labels differ in length".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate entity_id `{id}`")));
            }
        }
        Ok(Self { ids, labels, index })
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "entity_id" || &headers[1] != "label" {
            return Err(Error::Schema(format!(
                "entity CSV header must be `entity_id,label`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            ids.push(rec[0].to_string());
            labels.push(rec[1].to_string());
        }
        Self::new(ids, labels)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Labels are categorical unless every label parses as a number and at
    /// least one is non-integral.
    pub fn target(&self) -> Target {
        let numeric: Option<Vec<f64>> = self
            .labels
            .iter()
            .map(|l| l.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if let Some(values) = numeric {
            if values.iter().any(|v| v.fract() != 0.0) {
                return Target::Numeric(values);
            }
        }
        let mut names: Vec<String> = self.labels.clone();
        names.sort();
        names.dedup();
        let codes = self
            .labels
            .iter()
            .map(|l| names.binary_search(l).expect("label present"))
            .collect();
        Target::Classes { codes, names }
    }
}

/// Action table stored column-wise. Rows keep their file order.
#[derive(Debug, Clone, Default)]
pub struct ActionTable {
    entity: Vec<usize>,
    timestamp: Vec<Timestamp>,
    features: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
    by_entity: Vec<Vec<usize>>,
}

impl ActionTable {
    /// `entity` holds indices into `entities`.
    pub fn new(
        entities: &EntityTable,
        entity: Vec<usize>,
        timestamp: Vec<Timestamp>,
        features: Vec<String>,
        columns: Vec<Vec<Option<f64>>>,
    ) -> Result<Self> {
        if entity.len() != timestamp.len() || columns.iter().any(|c| c.len() != entity.len()) {
            return Err(Error::Schema("action table columns differ in length".into()));
        }
        if features.len() != columns.len() {
            return Err(Error::Schema("feature names and columns differ in count".into()));
        }
        let mut by_entity = vec![Vec::new(); entities.len()];
        for (row, &e) in entity.iter().enumerate() {
            let slot = by_entity
                .get_mut(e)
                .ok_or_else(|| Error::Schema(format!("row {row}: entity index {e} out of range")))?;
            slot.push(row);
        }
        for (f, col) in features.iter().zip(&columns) {
            if let Some(row) = col.iter().position(|v| v.is_some_and(|x| !x.is_finite())) {
                return Err(Error::Schema(format!("row {row}: non-finite value in `{f}`")));
            }
        }
        Ok(Self { entity, timestamp, features, columns, by_entity })
    }

    pub fn from_reader<R: Read>(reader: R, entities: &EntityTable) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "entity_id" || &headers[1] != "timestamp" {
            return Err(Error::Schema(
                "action CSV header must start with `entity_id,timestamp`".into(),
            ));
        }
        let features: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
        let mut entity = Vec::new();
        let mut timestamp = Vec::new();
        let mut columns = vec![Vec::new(); features.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let id = &rec[0];
            let e = entities.index_of(id).ok_or_else(|| {
                Error::Schema(format!("line {row}: entity_id `{id}` not in entity table"))
            })?;
            entity.push(e);
            timestamp.push(parse_timestamp(&rec[1]).map_err(|e| e.context(format!("line {row}")))?);
            for (j, col) in columns.iter_mut().enumerate() {
                let cell = rec.get(j + 2).unwrap_or("");
                if cell.is_empty() {
                    col.push(None);
                    continue;
                }
                let v: f64 = cell.parse().map_err(|_| {
                    Error::Schema(format!("line {row}: `{}` is not numeric: `{cell}`", features[j]))
                })?;
                if !v.is_finite() {
                    return Err(Error::Schema(format!(
                        "line {row}: `{}` is not finite",
                        features[j]
                    )));
                }
                col.push(Some(v));
            }
        }
        Self::new(entities, entity, timestamp, features, columns)
    }

    pub fn from_path(path: &Path, entities: &EntityTable) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, entities).map_err(|e| e.context(format!("reading {}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.entity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity.is_empty()
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamp
    }

    /// `(timestamp, value)` pairs of one entity/feature, present values only,
    /// in file order.
    pub fn column_records(&self, entity: usize, feature: usize) -> Vec<(Timestamp, f64)> {
        let col = &self.columns[feature];
        self.by_entity
            .get(entity)
            .map(|rows| {
                rows.iter()
                    .filter_map(|&r| col[r].map(|v| (self.timestamp[r], v)))
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Entity and action tables that belong together.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub entities: EntityTable,
    pub actions: ActionTable,
}

impl Dataset {
    pub fn load(entity_csv: &Path, action_csv: &Path) -> Result<Self> {
        let entities = EntityTable::from_path(entity_csv)?;
        let actions = ActionTable::from_path(action_csv, &entities)?;
        Ok(Self { entities, actions })
    }
}

/// Integer epoch seconds, RFC 3339, `YYYY-MM-DD[ T]HH:MM:SS[.f]` or a bare
/// date (midnight).
pub fn parse_timestamp(s: &str) -> Result<Timestamp> {
    let s = s.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Ok(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    Err(Error::Schema(format!("unrecognized timestamp `{s}`")))
}

/// Fixed-frequency timestamp grid `t0, t0 + freq, ...` up to `horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub t0: Timestamp,
    pub freq: i64,
    pub horizon: Timestamp,
}

impl Grid {
    pub fn new(t0: Timestamp, freq: i64, horizon: Timestamp) -> Result<Self> {
        if freq <= 0 {
            return Err(Error::Config(format!("frequency must be positive, got {freq}")));
        }
        if horizon < t0 {
            return Err(Error::Config("horizon precedes t0".into()));
        }
        Ok(Self { t0, freq, horizon })
    }

    /// Global grid from the min/max timestamp of the action table; `None`
    /// for an empty table.
    pub fn covering(actions: &ActionTable, freq: i64) -> Result<Option<Self>> {
        let ts = actions.timestamps();
        match (ts.iter().min(), ts.iter().max()) {
            (Some(&lo), Some(&hi)) => Self::new(lo, freq, hi).map(Some),
            _ => Ok(None),
        }
    }

    pub fn ell(&self) -> usize {
        ((self.horizon - self.t0) / self.freq) as usize + 1
    }

    pub fn bucket(&self, t: Timestamp) -> Option<usize> {
        if t < self.t0 || t > self.horizon {
            None
        } else {
            Some(((t - self.t0) / self.freq) as usize)
        }
    }
}

/// One column resampled onto a grid: per-bucket record counts and values.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledColumn {
    pub counts: Vec<u32>,
    pub values: Vec<Vec<f64>>,
    pub freq: i64,
    /// Records that fell outside `[t0, horizon]`.
    pub dropped: usize,
}

impl ResampledColumn {
    pub fn ell(&self) -> usize {
        self.counts.len()
    }

    pub fn total_records(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }
}

/// Canonical record order: by time, then by value. Makes resampling and
/// everything downstream independent of input row order.
pub fn sort_records(records: &mut [(Timestamp, f64)]) {
    records.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
}

pub fn resample(
    records: &[(Timestamp, f64)],
    t0: Timestamp,
    freq: i64,
    horizon: Timestamp,
) -> Result<ResampledColumn> {
    let grid = Grid::new(t0, freq, horizon)?;
    resample_on(records, &grid)
}

pub fn resample_on(records: &[(Timestamp, f64)], grid: &Grid) -> Result<ResampledColumn> {
    let ell = grid.ell();
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut counts = vec![0u32; ell];
    let mut values = vec![Vec::new(); ell];
    let mut dropped = 0;
    for (t, v) in sorted {
        match grid.bucket(t) {
            Some(i) => {
                counts[i] += 1;
                values[i].push(v);
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("resample: dropped {dropped} record(s) outside the grid");
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::EmptyColumn);
    }
    Ok(ResampledColumn { counts, values, freq: grid.freq, dropped })
}

/// Distribution family of the per-bucket record count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AssumptionKind {
    Always,
    Binomial,
    Poisson,
}

impl fmt::Display for AssumptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AssumptionKind::Always => "always",
            AssumptionKind::Binomial => "binomial",
            AssumptionKind::Poisson => "poisson",
        })
    }
}

impl FromStr for AssumptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "always" => Ok(Self::Always),
            "binomial" => Ok(Self::Binomial),
            "poisson" => Ok(Self::Poisson),
            other => Err(Error::Config(format!("unknown assumption `{other}`"))),
        }
    }
}

/// Fitted per-column parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionParams {
    pub kind: AssumptionKind,
    /// Sample mean of record values.
    pub mu: f64,
    /// Sample standard deviation (n − 1 denominator, 0 for a single record).
    pub sigma: f64,
    /// Binomial: fraction of non-empty buckets. Poisson: records per bucket.
    /// Always: 1.
    pub p: f64,
    /// Max records per bucket.
    pub m: usize,
    pub ell: usize,
    pub c_min: f64,
    pub c_max: f64,
}

impl AssumptionParams {
    /// Same parameters for the negated value sequence.
    pub fn negated(&self) -> Self {
        Self { mu: -self.mu, c_min: -self.c_max, c_max: -self.c_min, ..*self }
    }
}

/// 99.9th percentile (nearest rank) of bucket counts, at least 1.
pub fn default_m_cap(counts: &[u32]) -> usize {
    if counts.is_empty() {
        return 1;
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let rank = ((0.999 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    (sorted[rank - 1] as usize).max(1)
}

pub fn fit_parameters(
    col: &ResampledColumn,
    assumption: Option<AssumptionKind>,
    m_cap: Option<usize>,
) -> Result<AssumptionParams> {
    let ell = col.ell();
    let n = col.total_records();
    if ell == 0 || n == 0 {
        return Err(Error::EmptyColumn);
    }
    let min_count = *col.counts.iter().min().expect("non-empty");
    let max_count = *col.counts.iter().max().expect("non-empty");

    let kind = match assumption {
        None if min_count == 1 && max_count == 1 => AssumptionKind::Always,
        None if max_count <= 1 => AssumptionKind::Binomial,
        None => AssumptionKind::Poisson,
        Some(AssumptionKind::Always) => {
            if min_count != 1 || max_count != 1 {
                return Err(Error::AssumptionViolation(format!(
                    "`always` needs exactly one record per bucket, counts range {min_count}..={max_count}"
                )));
            }
            AssumptionKind::Always
        }
        Some(AssumptionKind::Binomial) => {
            if max_count > 1 {
                return Err(Error::AssumptionViolation(format!(
                    "`binomial` allows at most one record per bucket, found {max_count}"
                )));
            }
            AssumptionKind::Binomial
        }
        Some(AssumptionKind::Poisson) => AssumptionKind::Poisson,
    };

    let nf = n as f64;
    let mu = col.all_values().sum::<f64>() / nf;
    let sigma = if n > 1 {
        (col.all_values().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let (c_min, c_max) = col
        .all_values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    // Rounding in the mean can push it a hair outside the observed range.
    let mu = mu.clamp(c_min, c_max);

    let (p, m) = match kind {
        AssumptionKind::Always => (1.0, 1),
        AssumptionKind::Binomial => {
            let non_empty = col.counts.iter().filter(|&&c| c > 0).count();
            (non_empty as f64 / ell as f64, 1)
        }
        AssumptionKind::Poisson => {
            let cap = m_cap.unwrap_or_else(|| default_m_cap(&col.counts)).max(1);
            (nf / ell as f64, (max_count as usize).min(cap))
        }
    };
    Ok(AssumptionParams { kind, mu, sigma, p, m, ell, c_min, c_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DAY: i64 = 86_400;

    fn column(counts: &[u32], values: &[f64]) -> ResampledColumn {
        let mut it = values.iter().copied();
        let values = counts
            .iter()
            .map(|&c| (0..c).map(|_| it.next().unwrap()).collect())
            .collect();
        ResampledColumn { counts: counts.to_vec(), values, freq: DAY, dropped: 0 }
    }

    #[test]
    fn single_record_placement() {
        let col = resample(&[(0, 5.0)], 0, DAY, 2 * DAY).unwrap();
        assert_eq!(col.counts, vec![1, 0, 0]);
        assert_eq!(col.values, vec![vec![5.0], vec![], vec![]]);
    }

    #[test]
    fn same_bucket_collapse() {
        let col = resample(&[(0, 1.0), (1, 2.0)], 0, DAY, DAY).unwrap();
        assert_eq!(col.counts[0], 2);
    }

    #[test]
    fn daily_layout_one_record_per_day() {
        let recs = [(0, 1.0), (DAY, 2.0), (2 * DAY + 3600, 3.0)];
        let col = resample(&recs, 0, DAY, 2 * DAY + 3600).unwrap();
        assert_eq!(col.ell(), 3);
        assert_eq!(col.counts, vec![1, 1, 1]);
    }

    #[test]
    fn out_of_range_records_dropped() {
        let col = resample(&[(-5, 1.0), (0, 2.0), (10 * DAY, 3.0)], 0, DAY, DAY).unwrap();
        assert_eq!(col.dropped, 2);
        assert_eq!(col.total_records(), 1);
        assert!(matches!(resample(&[(-5, 1.0)], 0, DAY, DAY), Err(Error::EmptyColumn)));
        assert!(matches!(resample(&[], 0, DAY, DAY), Err(Error::EmptyColumn)));
        assert!(matches!(resample(&[(0, 1.0)], 0, 0, DAY), Err(Error::Config(_))));
    }

    #[test]
    fn fit_constant_column_always() {
        let p = fit_parameters(&column(&[1, 1, 1], &[10.0; 3]), None, None).unwrap();
        assert_eq!(p.kind, AssumptionKind::Always);
        assert_eq!((p.mu, p.sigma, p.p, p.m), (10.0, 0.0, 1.0, 1));
    }

    #[test]
    fn fit_binomial() {
        let counts = [1, 0, 0, 1, 0, 0, 1, 0, 0, 0];
        let p = fit_parameters(&column(&counts, &[1.0, 2.0, 3.0]), None, None).unwrap();
        assert_eq!(p.kind, AssumptionKind::Binomial);
        assert!((p.p - 0.3).abs() < 1e-15);
        assert_eq!(p.mu, 2.0);
        assert_eq!(p.sigma, 1.0);
        assert_eq!(p.m, 1);
        assert_eq!((p.c_min, p.c_max), (1.0, 3.0));
    }

    #[test]
    fn fit_poisson() {
        let p = fit_parameters(&column(&[2, 0, 1], &[4.0, 6.0, 5.0]), None, None).unwrap();
        assert_eq!(p.kind, AssumptionKind::Poisson);
        assert_eq!(p.p, 1.0);
        assert_eq!(p.m, 2);
        assert_eq!(p.mu, 5.0);
        let capped = fit_parameters(&column(&[2, 0, 1], &[4.0, 6.0, 5.0]), None, Some(1)).unwrap();
        assert_eq!(capped.m, 1);
    }

    #[test]
    fn fit_override_violations() {
        let col = column(&[1, 0, 1], &[1.0, 2.0]);
        assert!(matches!(
            fit_parameters(&col, Some(AssumptionKind::Always), None),
            Err(Error::AssumptionViolation(_))
        ));
        let col = column(&[2, 1], &[1.0, 2.0, 3.0]);
        assert!(matches!(
            fit_parameters(&col, Some(AssumptionKind::Binomial), None),
            Err(Error::AssumptionViolation(_))
        ));
        let p = fit_parameters(&col, Some(AssumptionKind::Poisson), None).unwrap();
        assert_eq!(p.kind, AssumptionKind::Poisson);
        let single = fit_parameters(&column(&[1, 0], &[7.0]), None, None).unwrap();
        assert_eq!(single.sigma, 0.0);
    }

    #[test]
    fn m_cap_percentile() {
        let mut counts = vec![1u32; 2000];
        counts[17] = 40;
        assert_eq!(default_m_cap(&counts), 1);
        counts[18] = 40;
        counts[19] = 40;
        assert_eq!(default_m_cap(&counts), 40);
        assert_eq!(default_m_cap(&[0, 0, 3]), 3);
        assert_eq!(default_m_cap(&[0, 0]), 1);
    }

    #[test]
    fn timestamps_parse() {
        assert_eq!(parse_timestamp("86400").unwrap(), DAY);
        assert_eq!(parse_timestamp("1970-01-02").unwrap(), DAY);
        assert_eq!(parse_timestamp("1970-01-02T00:00:01").unwrap(), DAY + 1);
        assert_eq!(parse_timestamp("1970-01-02 00:00:01").unwrap(), DAY + 1);
        assert_eq!(parse_timestamp("1970-01-02T01:00:00+01:00").unwrap(), DAY);
        assert!(parse_timestamp("yesterday").is_err());
    }

    #[test]
    fn csv_ingest() {
        let ents = EntityTable::from_reader("entity_id,label\na,1\nb,0\n".as_bytes()).unwrap();
        let acts = ActionTable::from_reader(
            "entity_id,timestamp,x,y\na,0,1.5,\nb,1970-01-02,,2\na,86400,3,4\n".as_bytes(),
            &ents,
        )
        .unwrap();
        assert_eq!(acts.len(), 3);
        assert_eq!(acts.features(), &["x".to_string(), "y".to_string()]);
        assert_eq!(acts.column_records(0, 0), vec![(0, 1.5), (DAY, 3.0)]);
        assert_eq!(acts.column_records(0, 1), vec![(DAY, 4.0)]);
        assert_eq!(acts.column_records(1, 0), vec![]);

        let bad = ActionTable::from_reader("entity_id,timestamp,x\nzz,0,1\n".as_bytes(), &ents);
        assert!(matches!(bad, Err(Error::Schema(_))));
        let bad = ActionTable::from_reader("entity_id,timestamp,x\na,0,abc\n".as_bytes(), &ents);
        assert!(matches!(bad, Err(Error::Schema(_))));
        let dup = EntityTable::from_reader("entity_id,label\na,1\na,0\n".as_bytes());
        assert!(matches!(dup, Err(Error::Schema(_))));
    }

    #[test]
    fn target_decoding() {
        let t = EntityTable::new(vec!["a".into(), "b".into()], vec!["yes".into(), "no".into()])
            .unwrap()
            .target();
        assert_eq!(t, Target::Classes { codes: vec![1, 0], names: vec!["no".into(), "yes".into()] });
        let t = EntityTable::new(vec!["a".into(), "b".into()], vec!["0.5".into(), "2".into()])
            .unwrap()
            .target();
        assert_eq!(t, Target::Numeric(vec![0.5, 2.0]));
    }

    proptest! {
        #[test]
        fn resample_order_independent_and_conserving(
            recs in prop::collection::vec((0i64..1_000_000, -100.0f64..100.0), 1..80),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a = resample(&recs, 0, 3600 * 7, 1_000_000).unwrap();
            let mut shuffled = recs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = resample(&shuffled, 0, 3600 * 7, 1_000_000).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.total_records(), recs.len());
            prop_assert!(a.counts.iter().zip(&a.values).all(|(&c, v)| c as usize == v.len()));

            let pa = fit_parameters(&a, None, None).unwrap();
            let pb = fit_parameters(&b, None, None).unwrap();
            prop_assert_eq!(pa, pb);
            prop_assert!(pa.c_min <= pa.mu && pa.mu <= pa.c_max);
            let always = a.counts.iter().all(|&c| c == 1);
            prop_assert_eq!(pa.kind == AssumptionKind::Always, always);
        }
    }
}
