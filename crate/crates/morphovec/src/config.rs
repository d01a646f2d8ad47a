//! Line-oriented `key = value` configuration files.
//!
//! Keys mirror the training configuration fields; `#` comments and blank
//! lines are skipped. Values from a file are defaults that command-line
//! flags override.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::{ModelKind, TrainConfig};

/// Ordered key/value pairs from a config file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileConfig {
    pub entries: Vec<(String, String)>,
}

impl FileConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        // last occurrence wins
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn parse_config_file(path: impl AsRef<Path>) -> Result<FileConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_text(&text, &path.display().to_string())
}

pub fn parse_config_text(text: &str, source: &str) -> Result<FileConfig> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(source, idx + 1, "expected `key = value`"));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::parse(source, idx + 1, "empty key"));
        }
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("unknown key {key:?} (expected one of {})", KNOWN_KEYS.join(", ")),
            ));
        }
        entries.push((key.to_string(), value.to_string()));
    }
    Ok(FileConfig { entries })
}

const KNOWN_KEYS: [&str; 11] = [
    "model",
    "dim",
    "window",
    "negatives",
    "epochs",
    "lr_start",
    "lr_min",
    "subsample_t",
    "min_count",
    "seed",
    "threads",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::usage(format!("invalid value {value:?} for {key}")))
}

/// Applies file entries onto a training config, in file order.
pub fn apply_to_train_config(file: &FileConfig, config: &mut TrainConfig) -> Result<()> {
    for (key, value) in &file.entries {
        match key.as_str() {
            "model" => config.model = ModelKind::parse(value)?,
            "dim" => config.dim = parse_value(key, value)?,
            "window" => config.window = parse_value(key, value)?,
            "negatives" => config.negatives = parse_value(key, value)?,
            "epochs" => config.epochs = parse_value(key, value)?,
            "lr_start" => config.set_lr_start(parse_value(key, value)?),
            "lr_min" => config.lr_min = parse_value(key, value)?,
            "subsample_t" => {
                config.subsample_t = match value.as_str() {
                    "off" | "none" | "disabled" => None,
                    other => Some(parse_value(key, other)?),
                }
            }
            "min_count" => config.min_count = parse_value(key, value)?,
            "seed" => config.seed = parse_value(key, value)?,
            "threads" => config.threads = parse_value(key, value)?,
            _ => unreachable!("keys validated at parse time"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_comments_and_blanks() {
        let text = "# training setup\nmodel = skipgram\ndim = 64\n\nsubsample_t = off\n";
        let file = parse_config_text(text, "mem").unwrap();
        assert_eq!(file.get("model"), Some("skipgram"));
        assert_eq!(file.get("dim"), Some("64"));

        let mut config = TrainConfig::new(ModelKind::Cbow);
        apply_to_train_config(&file, &mut config).unwrap();
        assert_eq!(config.model, ModelKind::SkipGram);
        assert_eq!(config.dim, 64);
        assert_eq!(config.subsample_t, None);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config_text("dim = 4\nbogus = 1\n", "mem").unwrap_err();
        assert!(err.to_string().starts_with("mem:2:"), "{err}");
    }

    #[test]
    fn missing_equals_reports_line() {
        let err = parse_config_text("dim 4\n", "mem").unwrap_err();
        assert!(err.to_string().contains("mem:1"), "{err}");
    }

    #[test]
    fn last_duplicate_wins() {
        let file = parse_config_text("seed = 1\nseed = 2\n", "mem").unwrap();
        assert_eq!(file.get("seed"), Some("2"));
    }

    #[test]
    fn bad_value_is_a_usage_error() {
        let file = parse_config_text("dim = many\n", "mem").unwrap();
        let mut config = TrainConfig::new(ModelKind::Cbow);
        let err = apply_to_train_config(&file, &mut config).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }
}
