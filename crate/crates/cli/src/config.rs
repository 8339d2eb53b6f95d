//! Run configuration: a TOML or JSON file plus `key.path=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use hsmcfl_core::dataio::{
    generate_synthetic, load_csv, load_dataset, normalize_minmax, split, CsvSchema, Dataset, SplitConfig,
    SyntheticSpec,
};
use hsmcfl_core::train::TrainConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file; a `<stem>.meta.json` sidecar next to it is honored.
    pub path: Option<PathBuf>,
    /// Needed for a CSV without sidecar.
    pub class_count: Option<usize>,
    pub has_header: Option<bool>,
    /// Generate the dataset instead of loading it.
    pub synthetic: Option<SyntheticSpec>,
    /// Path to a synthetic spec file, resolved relative to the config file.
    pub synthetic_spec: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    /// Repeats per ablation cell.
    pub repeats: usize,
    /// Also train the plain MLP reference during `ablate`.
    pub baseline: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            repeats: 10,
            baseline: false,
        }
    }
}

/// Parse a TOML (`.toml`) or JSON (anything else) file into a JSON tree.
pub fn read_tree(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        let v: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(serde_json::to_value(v)?)
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Split `a=1,b.c=x` on commas; a piece without `=` belongs to the value
/// before it, so `k=[1,2]` survives.
pub fn split_overrides(raw: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for arg in raw {
        let mut current: Option<String> = None;
        for piece in arg.split(',') {
            match current.as_mut() {
                Some(cur) if !piece.contains('=') => {
                    cur.push(',');
                    cur.push_str(piece);
                }
                _ => {
                    if let Some(done) = current.take() {
                        out.push(done);
                    }
                    current = Some(piece.to_string());
                }
            }
        }
        out.extend(current);
    }
    out
}

fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Set `dotted.key` in `tree`. Every key must already exist in `reference`
/// (the fully-defaulted config), so typos are rejected.
pub fn apply_override(tree: &mut Value, reference: &Value, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not KEY=VALUE"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut node = tree;
    let mut known = Some(reference);
    for (depth, part) in parts.iter().enumerate() {
        known = known.and_then(|k| k.get(part));
        let is_open_map = known.is_some_and(Value::is_null);
        if known.is_none() {
            bail!("unknown config key {key:?}");
        }
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("just made an object");
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), parse_value(value.trim()));
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Object(Default::default()));
        if is_open_map {
            // optional sections accept any nested key; serde validates later
            let rest = parts[depth + 1..].join(".");
            return set_unchecked(node, &rest, value.trim());
        }
    }
    Ok(())
}

fn set_unchecked(node: &mut Value, dotted: &str, value: &str) -> Result<()> {
    let mut node = node;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("just made an object");
        if depth + 1 == parts.len() {
            map.insert(part.to_string(), parse_value(value));
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert(Value::Object(Default::default()));
    }
    Ok(())
}

/// Load a config file (or defaults when `path` is `None`) and apply overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<(RunConfig, PathBuf)> {
    let mut tree = match path {
        Some(p) => read_tree(p)?,
        None => Value::Object(Default::default()),
    };
    let base_dir = path
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let overrides = split_overrides(overrides);
    if !overrides.is_empty() {
        let parsed: RunConfig = serde_json::from_value(tree.clone()).context("invalid configuration")?;
        let reference = serde_json::to_value(&parsed)?;
        for o in &overrides {
            apply_override(&mut tree, &reference, o)?;
        }
    }
    let cfg: RunConfig = serde_json::from_value(tree).context("invalid configuration")?;
    cfg.train.validate().context("invalid training configuration")?;
    Ok((cfg, base_dir))
}

impl DataConfig {
    fn resolve(base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    /// Load or generate the raw dataset.
    pub fn load(&self, base: &Path) -> Result<Dataset> {
        let spec = match (&self.synthetic, &self.synthetic_spec) {
            (Some(spec), _) => Some(spec.clone()),
            (None, Some(p)) => Some(read_spec(&Self::resolve(base, p))?),
            (None, None) => None,
        };
        match (&self.path, spec) {
            (Some(_), Some(_)) => bail!("data.path and a synthetic spec are mutually exclusive"),
            (None, Some(spec)) => Ok(generate_synthetic(&spec)?),
            (Some(p), None) => {
                let p = Self::resolve(base, p);
                let sidecar = p.with_extension("meta.json");
                if sidecar.exists() {
                    Ok(load_dataset(&p)?)
                } else {
                    let k = self
                        .class_count
                        .ok_or_else(|| anyhow!("data.class_count is required for {} (no metadata sidecar)", p.display()))?;
                    let mut schema = CsvSchema::new(k);
                    if let Some(h) = self.has_header {
                        schema.has_header = h;
                    }
                    Ok(load_csv(&p, &schema)?)
                }
            }
            (None, None) => bail!("no dataset configured: set data.path or data.synthetic_spec"),
        }
    }
}

pub fn read_spec(path: &Path) -> Result<SyntheticSpec> {
    let tree = read_tree(path)?;
    let spec: SyntheticSpec =
        serde_json::from_value(tree).with_context(|| format!("invalid synthetic spec {}", path.display()))?;
    spec.validate()?;
    Ok(spec)
}

/// Dataset ready for training: split assigned and min-max scaled on train.
pub fn prepare_dataset(cfg: &RunConfig, base: &Path) -> Result<Dataset> {
    let mut ds = cfg.data.load(base)?;
    if ds.split_assignment().is_none() {
        ds = split(&ds, &cfg.split)?;
    }
    if ds.norm_stats().is_none() {
        ds = normalize_minmax(&ds);
    }
    Ok(ds)
}
