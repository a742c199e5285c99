//! Flat key=value configuration files and grid parsing.
//!
//! One option per line, `key = value`, `#` comments. Keys use the same
//! names as the command-line flags; flags override file values. Grids
//! are comma lists (`0.1,0.5,1.0`) or linspace specs (`lo:hi:count`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub struct ConfigFile {
    map: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "config line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                ));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
}

/// CLI value if present, else config value (parsed), else default.
pub fn resolve<T: Clone + std::str::FromStr>(
    cli: Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T, String> {
    if let Some(v) = cli {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| format!("config key `{key}`: cannot parse `{raw}`")),
        None => Ok(default),
    }
}

/// Same, but without a default: the option must come from somewhere.
pub fn resolve_required<T: Clone + std::str::FromStr>(
    cli: Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<T, String> {
    if let Some(v) = cli {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| format!("config key `{key}`: cannot parse `{raw}`")),
        None => Err(format!("missing required option `{key}`")),
    }
}

pub fn resolve_string(cli: Option<String>, cfg: &ConfigFile, key: &str) -> Option<String> {
    cli.or_else(|| cfg.get(key).map(str::to_string))
}

/// Parses `a,b,c` or `lo:hi:count` into a nonempty grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err("empty grid".into());
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("grid `{spec}`: expected lo:hi:count"));
        }
        let lo: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| format!("grid `{spec}`: bad lower bound"))?;
        let hi: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| format!("grid `{spec}`: bad upper bound"))?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("grid `{spec}`: bad count"))?;
        if count == 0 {
            return Err(format!("grid `{spec}`: count must be positive"));
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        return Ok((0..count).map(|i| lo + step * i as f64).collect());
    }
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("grid `{spec}`: cannot parse `{tok}`"))
        })
        .collect()
}

pub fn parse_usize_list(spec: &str) -> Result<Vec<usize>, String> {
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| format!("list `{spec}`: cannot parse `{tok}`"))
        })
        .collect()
}

/// Output destination: explicit path (joined onto `QPSPIN_OUTPUT_DIR`
/// when relative) or stdout.
pub fn resolve_output(path: Option<PathBuf>) -> Option<PathBuf> {
    let path = path?;
    if path.is_relative() {
        if let Ok(dir) = std::env::var("QPSPIN_OUTPUT_DIR") {
            if !dir.is_empty() {
                return Some(PathBuf::from(dir).join(path));
            }
        }
    }
    Some(path)
}
