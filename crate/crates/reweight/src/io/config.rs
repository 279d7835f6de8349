//! Flat `key = value` configuration files and run manifests.
//!
//! The manifest written next to every run's outputs uses the same format,
//! so a manifest can be fed back through `--config` to reproduce the run.

use super::IoError;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Parsed key-value pairs; later occurrences of a key override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(IoError::parse(lineno, format!("expected 'key = value', found '{line}'")));
            };
            let key = key.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(IoError::parse(lineno, format!("invalid key '{key}'")));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, IoError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| IoError::parse(0, format!("key '{key}': bad float '{v}'")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, IoError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| IoError::parse(0, format!("key '{key}': bad integer '{v}'")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, IoError> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| IoError::parse(0, format!("key '{key}': bad integer '{v}'")))
            })
            .transpose()
    }

    pub fn get_grid(&self, key: &str) -> Result<Option<Vec<usize>>, IoError> {
        self.get(key)
            .map(|v| {
                parse_grid(v).map_err(|e| IoError::parse(0, format!("key '{key}': {e}")))
            })
            .transpose()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }
}

/// Integer grids: either `start:end:step` (inclusive) or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<usize>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected start:end:step, found '{text}'"));
        }
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad integer '{p}'")))
            .collect::<Result<_, _>>()?;
        let (start, end, step) = (nums[0], nums[1], nums[2]);
        if step == 0 {
            return Err("step must be positive".into());
        }
        if end < start {
            return Err(format!("empty range {start}:{end}"));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        text.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad integer '{p}'")))
            .collect()
    }
}

/// Writes `(key, value)` pairs in the config format, in the given order.
pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<(), IoError> {
    let mut out = String::new();
    for (k, v) in entries {
        writeln!(out, "{k} = {v}").expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let text = "# defaults\neps_lambda = 1e-4\nq = 0.7\nq = 0.8\n";
        let cfg = ConfigMap::parse(text).unwrap();
        assert_eq!(cfg.get_f64("eps_lambda").unwrap(), Some(1e-4));
        assert_eq!(cfg.get_f64("q").unwrap(), Some(0.8));
        assert_eq!(cfg.get_f64("absent").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(ConfigMap::parse("just words\n").is_err());
        assert!(ConfigMap::parse("bad key! = 3\n").is_err());
        let cfg = ConfigMap::parse("tol = abc\n").unwrap();
        assert!(cfg.get_f64("tol").is_err());
    }

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_grid("2:8:2").unwrap(), vec![2, 4, 6, 8]);
        assert_eq!(parse_grid("1,5,9").unwrap(), vec![1, 5, 9]);
        assert_eq!(parse_grid("3:3:1").unwrap(), vec![3]);
        assert!(parse_grid("5:1:1").is_err());
        assert!(parse_grid("1:9:0").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = std::env::temp_dir().join("reweight_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run-manifest.txt");
        write_manifest(
            &path,
            &[
                ("command".into(), "cs-phase".into()),
                ("seed".into(), "7".into()),
            ],
        )
        .unwrap();
        let cfg = ConfigMap::load(&path).unwrap();
        assert_eq!(cfg.get("command"), Some("cs-phase"));
        assert_eq!(cfg.get_u64("seed").unwrap(), Some(7));
    }
}
