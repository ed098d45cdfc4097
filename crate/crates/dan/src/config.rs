//! `key = value` run configuration with `#` comments.

use std::path::{Path, PathBuf};

use dan_core::train::TrainConfig;

use crate::dataset::HistogramReference;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: bad value {value:?} for {key}")]
    BadValue { line: usize, key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Training settings plus where to read data and write results.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// `first` (default), `none`, or a PGM path.
    pub histogram: HistogramReference,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            histogram: HistogramReference::FirstFrame,
        }
    }
}

pub const KEYS: &[&str] = &[
    "channels",
    "rdb_count",
    "convs_per_rdb",
    "growth",
    "k",
    "crop",
    "batch",
    "epochs",
    "lr",
    "seed",
    "data_dir",
    "out_dir",
    "deterministic",
    "histogram",
];

impl RunConfig {
    /// Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { line, key: key.into() });
            }
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate { line, key: key.into() });
            }
            seen.push(key);
            let bad = || ConfigError::BadValue {
                line,
                key: key.into(),
                value: value.into(),
            };
            let int = || value.parse::<usize>().map_err(|_| bad());
            let t = &mut cfg.train;
            match key {
                "channels" => t.model.channels = int()?,
                "rdb_count" => t.model.rdb_count = int()?,
                "convs_per_rdb" => t.model.convs_per_rdb = int()?,
                "growth" => t.model.growth = int()?,
                "k" => t.model.reduction = int()?,
                "crop" => t.crop = int()?,
                "batch" => t.batch = int()?,
                "epochs" => t.epochs = int()?,
                "lr" => t.lr = value.parse().map_err(|_| bad())?,
                "seed" => t.seed = value.parse().map_err(|_| bad())?,
                "deterministic" => t.deterministic = value.parse().map_err(|_| bad())?,
                "data_dir" => cfg.data_dir = base.join(value),
                "out_dir" => cfg.out_dir = base.join(value),
                "histogram" => {
                    cfg.histogram = match value {
                        "first" => HistogramReference::FirstFrame,
                        "none" => HistogramReference::Off,
                        path => HistogramReference::File(base.join(path)),
                    }
                }
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.train.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_key() {
        let text = "\
# desk run
channels = 16
rdb_count = 2
convs_per_rdb = 3
growth = 8
k = 4   # key reduction
crop = 32
batch = 2
epochs = 5
lr = 5e-4
seed = 17
data_dir = d
out_dir = o
deterministic = true
";
        let c = RunConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(c.train.model.channels, 16);
        assert_eq!(c.train.model.reduction, 4);
        assert_eq!(c.train.model.convs_per_rdb, 3);
        assert_eq!(c.train.crop, 32);
        assert_eq!(c.train.lr, 5e-4);
        assert_eq!(c.train.seed, 17);
        assert_eq!(c.data_dir, PathBuf::from("/base/d"));
        assert_eq!(c.out_dir, PathBuf::from("/base/o"));
        assert_eq!(c.histogram, HistogramReference::FirstFrame);
        let off = RunConfig::parse("histogram = none", Path::new(".")).unwrap();
        assert_eq!(off.histogram, HistogramReference::Off);
    }

    #[test]
    fn errors_name_the_line() {
        let p = Path::new(".");
        assert!(matches!(RunConfig::parse("crop 3", p), Err(ConfigError::Syntax { line: 1 })));
        assert!(matches!(RunConfig::parse("\nspeed = 3", p), Err(ConfigError::UnknownKey { line: 2, .. })));
        assert!(matches!(RunConfig::parse("seed = x", p), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("seed = 1\nseed = 2", p), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(RunConfig::parse("k = 3", p), Err(ConfigError::Invalid(_))));
    }
}
