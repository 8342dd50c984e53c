//! Run configuration: a `key = value` file (`#` starts a comment) plus
//! per-key overrides from the command line.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bounds::{Aggregator, EstimateConfig};
use crate::data::parse_timestamp;
use crate::error::{Error, Result};
use crate::window::WindowKind;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub entity_csv: Option<PathBuf>,
    pub action_csv: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub estimate: EstimateConfig,
    pub ensembles: usize,
    pub trees: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            entity_csv: None,
            action_csv: None,
            output_dir: PathBuf::from("."),
            estimate: EstimateConfig::default(),
            ensembles: 10,
            trees: 100,
            seed: 0,
        }
    }
}

pub const KEYS: &[&str] = &[
    "entity_csv",
    "action_csv",
    "output_dir",
    "freq_seconds",
    "t0",
    "horizon",
    "periods",
    "windows",
    "aggregators",
    "assumption",
    "m_cap",
    "rho",
    "rho_l",
    "rho_r",
    "ensembles",
    "trees",
    "seed",
    "lambda_method",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_enum_list<T>(value: &str) -> Result<Vec<T>>
where
    T: FromStr<Err = Error> + PartialEq,
{
    let mut out = Vec::new();
    for s in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v: T = s.parse()?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| e.context(format!("config line {}", i + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let est = &mut self.estimate;
        match key {
            "entity_csv" => self.entity_csv = Some(PathBuf::from(value)),
            "action_csv" => self.action_csv = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "freq_seconds" => est.freq = parse(key, value)?,
            "t0" => est.t0 = Some(parse_timestamp(value).map_err(|e| Error::Config(format!("t0: {e}")))?),
            "horizon" => {
                est.horizon = Some(parse_timestamp(value).map_err(|e| Error::Config(format!("horizon: {e}")))?)
            }
            "periods" => {
                let mut p: Vec<usize> = parse_list(key, value)?;
                p.sort_unstable();
                p.dedup();
                est.periods = p;
            }
            "windows" => est.kinds = parse_enum_list::<WindowKind>(value)?,
            "aggregators" => est.aggregators = parse_enum_list::<Aggregator>(value)?,
            "assumption" => {
                est.assumption = match value {
                    "" | "auto" => None,
                    v => Some(v.parse()?),
                }
            }
            "m_cap" => {
                est.m_cap = match value {
                    "" | "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "rho" => est.rho.rho = parse(key, value)?,
            "rho_l" => est.rho.rho_l = parse(key, value)?,
            "rho_r" => est.rho.rho_r = parse(key, value)?,
            "ensembles" => self.ensembles = parse(key, value)?,
            "trees" => self.trees = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lambda_method" => est.lambda_method = value.parse()?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.estimate.validate()?;
        if self.estimate.m_cap == Some(0) {
            return Err(Error::Config("m_cap must be positive".into()));
        }
        if self.ensembles == 0 || self.trees == 0 {
            return Err(Error::Config("ensembles and trees must be positive".into()));
        }
        Ok(())
    }

    /// Both input paths, or a config error naming the missing one.
    pub fn inputs(&self) -> Result<(&Path, &Path)> {
        let e = self.entity_csv.as_deref().ok_or_else(|| Error::Config("entity_csv is not set".into()))?;
        let a = self.action_csv.as_deref().ok_or_else(|| Error::Config("action_csv is not set".into()))?;
        Ok((e, a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::LambdaMethod;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.estimate.rho.rho, c.estimate.rho.rho_l, c.estimate.rho.rho_r), (0.9, 0.05, 0.95));
        assert_eq!((c.trees, c.ensembles), (100, 10));
        c.validate().unwrap();
    }

    #[test]
    fn parses_file_text() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# tianchi-like\nperiods = 60, 7,15 ,30,7\nassumption = poisson\nm_cap = 10\n\
             windows = sum\naggregators=max,min\nlambda_method = paper-degenerate\nseed = 12 # trailing\n",
        )
        .unwrap();
        assert_eq!(c.estimate.periods, vec![7, 15, 30, 60]);
        assert_eq!(c.estimate.m_cap, Some(10));
        assert_eq!(c.estimate.kinds, vec![WindowKind::Sum]);
        assert_eq!(c.estimate.aggregators, vec![Aggregator::Max, Aggregator::Min]);
        assert_eq!(c.estimate.lambda_method, LambdaMethod::PaperDegenerate);
        assert_eq!(c.seed, 12);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        assert!(c.set("bogus", "1").is_err());
        assert!(c.set("periods", "7,x").is_err());
        c.set("rho_l", "0.96").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = RunConfig::default();
        c.set("rho", "1").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("periods", "").unwrap();
        assert!(c.validate().is_err());
        assert!(c.apply_text("no equals sign").is_err());
    }
}
