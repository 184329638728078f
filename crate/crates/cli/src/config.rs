//! Strict flat key-value configuration files.
//!
//! The format is one `key = value` pair per line with dotted section
//! prefixes (`encoder.d_hidden = 64`). Blank lines and lines starting
//! with `#` are ignored. Parsing is strict: unknown keys, duplicate
//! keys, and malformed values are errors, so every accepted file
//! resolves to a fully-determined run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use entangle::encoder::EncoderKind;
use entangle::model::Readout;
use entangle::mpnn::{LayerKind, Regime};
use entangle::parallel::ExecMode;
use entangle::train::Monitor;

use crate::CliError;

/// Every key the parser accepts. Anything else is rejected with its
/// line number.
const KNOWN_KEYS: &[&str] = &[
    "data.graphs",
    "data.encodings",
    "data.name",
    "data.val_frac",
    "data.test_frac",
    "encoder.kind",
    "encoder.d_hidden",
    "encoder.joint",
    "encoder.mlp_depth",
    "mp.kind",
    "mp.regime",
    "mp.K",
    "mp.layers",
    "mp.epsilon",
    "decoder.hidden",
    "model.readout",
    "model.task",
    "train.lr",
    "train.patience",
    "train.factor",
    "train.floor",
    "train.max_epochs",
    "train.monitor",
    "train.exec",
    "sweep.encoders",
    "sweep.regimes",
    "sweep.seeds",
];

/// Raw parsed file: key → (line, value).
#[derive(Debug)]
pub struct ConfigMap {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigMap {
    pub fn parse_file(path: &Path) -> Result<ConfigMap, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
        ConfigMap::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<ConfigMap, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| CliError::Config {
                path: path.to_path_buf(),
                line,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("unknown key '{key}'"),
                });
            }
            if let Some((first, _)) = entries.insert(key.clone(), (line, value)) {
                return Err(CliError::Config {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("duplicate key '{key}' (first set on line {first})"),
                });
            }
        }
        Ok(ConfigMap { path: path.to_path_buf(), entries })
    }

    fn bad(&self, key: &str, msg: String) -> CliError {
        let line = self.entries.get(key).map_or(0, |(l, _)| *l);
        CliError::Config { path: self.path.clone(), line, msg }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key).ok_or_else(|| CliError::Config {
            path: self.path.clone(),
            line: 0,
            msg: format!("missing required key '{key}'"),
        })
    }

    pub fn parse_as<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| self.bad(key, format!("{key}: {e}"))),
        }
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parse_as(key)?.unwrap_or(default))
    }

    pub fn require_as<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.require(key)?;
        Ok(self.parse_as(key)?.expect("key present"))
    }
}

/// Target family named in a config; the decoder width is resolved from
/// the dataset when the run starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Regression,
    Multilabel,
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "regression" => Ok(TaskKind::Regression),
            "multilabel" => Ok(TaskKind::Multilabel),
            other => Err(format!("unknown task '{other}' (regression | multilabel)")),
        }
    }
}

/// A sweep cell: regime plus its K when sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegimeSpec(pub Regime);

impl RegimeSpec {
    /// Directory-name tag: `full`, `sparse10`, `none`.
    pub fn tag(&self) -> String {
        match self.0 {
            Regime::Full => "full".into(),
            Regime::Sparse { k } => format!("sparse{k}"),
            Regime::None => "none".into(),
        }
    }
}

impl std::str::FromStr for RegimeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(RegimeSpec(Regime::Full)),
            "none" => Ok(RegimeSpec(Regime::None)),
            other => {
                let k = other
                    .strip_prefix("sparse:")
                    .or_else(|| other.strip_prefix("sparse"))
                    .filter(|rest| !rest.is_empty())
                    .ok_or_else(|| {
                        format!("unknown regime '{other}' (full | sparse:<K> | none)")
                    })?;
                let k: usize =
                    k.parse().map_err(|_| format!("bad K in regime '{other}'"))?;
                Ok(RegimeSpec(Regime::Sparse { k }))
            }
        }
    }
}

/// Everything a config file can say, with defaults applied but data-
/// dependent dimensions (`d_in`, `k`, task width) not yet resolved.
#[derive(Debug, Clone)]
pub struct FileConfig {
    pub graphs: Option<PathBuf>,
    pub encodings: Option<PathBuf>,
    pub dataset_name: Option<String>,
    pub val_frac: f64,
    pub test_frac: f64,
    pub encoder: EncoderKind,
    pub d_hidden: usize,
    pub joint: bool,
    pub mlp_depth: usize,
    pub layer: LayerKind,
    pub regime: Regime,
    pub layers: usize,
    pub epsilon: f64,
    pub decoder_hidden: Option<usize>,
    pub readout: Readout,
    pub task: TaskKind,
    pub lr: f64,
    pub patience: usize,
    pub factor: f64,
    pub floor: f64,
    pub max_epochs: usize,
    pub monitor: Monitor,
    pub exec: String,
    pub sweep_encoders: Vec<EncoderKind>,
    pub sweep_regimes: Vec<RegimeSpec>,
    pub sweep_seeds: Vec<u64>,
}

fn parse_bool(map: &ConfigMap, key: &str, default: bool) -> Result<bool, CliError> {
    match map.raw(key) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(other) => Err(map.bad(key, format!("{key}: expected true|false, got '{other}'"))),
    }
}

fn parse_list<T: std::str::FromStr>(map: &ConfigMap, key: &str) -> Result<Option<Vec<T>>, CliError>
where
    T::Err: std::fmt::Display,
{
    let Some(raw) = map.raw(key) else { return Ok(None) };
    let mut out = Vec::new();
    for item in raw.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(map.bad(key, format!("{key}: empty list element")));
        }
        out.push(item.parse::<T>().map_err(|e| map.bad(key, format!("{key}: {e}")))?);
    }
    Ok(Some(out))
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let map = ConfigMap::parse_file(path)?;
        FileConfig::from_map(&map)
    }

    pub fn from_map(map: &ConfigMap) -> Result<FileConfig, CliError> {
        let regime: Regime = {
            let raw = map.require("mp.regime")?;
            match raw {
                "full" => Regime::Full,
                "none" => Regime::None,
                "sparse" => {
                    let k: usize = map.require_as("mp.K")?;
                    if k == 0 {
                        return Err(map.bad("mp.K", "mp.K: must be >= 1".into()));
                    }
                    Regime::Sparse { k }
                }
                other => {
                    return Err(map.bad(
                        "mp.regime",
                        format!("mp.regime: unknown regime '{other}' (full | sparse | none)"),
                    ))
                }
            }
        };
        if !matches!(regime, Regime::Sparse { .. }) && map.raw("mp.K").is_some() {
            return Err(map.bad("mp.K", "mp.K: only valid with mp.regime = sparse".into()));
        }

        let layers = match regime {
            Regime::None => {
                let l = map.parse_or("mp.layers", 0usize)?;
                if l != 0 {
                    return Err(map.bad(
                        "mp.layers",
                        "mp.layers: must be 0 when mp.regime = none".into(),
                    ));
                }
                0
            }
            _ => map.require_as("mp.layers")?,
        };

        let exec = map.parse_or("train.exec", default_exec().to_string())?;
        parse_exec(&exec).map_err(|msg| map.bad("train.exec", format!("train.exec: {msg}")))?;

        Ok(FileConfig {
            graphs: map.parse_as::<PathBuf>("data.graphs")?,
            encodings: map.parse_as::<PathBuf>("data.encodings")?,
            dataset_name: map.parse_as("data.name")?,
            val_frac: map.parse_or("data.val_frac", 0.1)?,
            test_frac: map.parse_or("data.test_frac", 0.1)?,
            encoder: map.require_as("encoder.kind")?,
            d_hidden: map.require_as("encoder.d_hidden")?,
            joint: parse_bool(map, "encoder.joint", true)?,
            mlp_depth: map.parse_or("encoder.mlp_depth", 1)?,
            layer: map.require_as("mp.kind")?,
            regime,
            layers,
            epsilon: map.parse_or("mp.epsilon", 0.0)?,
            decoder_hidden: map.parse_as("decoder.hidden")?,
            readout: map.parse_or("model.readout", Readout::Sum)?,
            task: map.parse_or("model.task", TaskKind::Regression)?,
            lr: map.parse_or("train.lr", entangle::train::DEFAULT_LR)?,
            patience: map.parse_or("train.patience", entangle::train::DEFAULT_PATIENCE)?,
            factor: map.parse_or("train.factor", entangle::train::DEFAULT_FACTOR)?,
            floor: map.parse_or("train.floor", entangle::train::DEFAULT_LR_FLOOR)?,
            max_epochs: map.parse_or("train.max_epochs", 1000)?,
            monitor: map.parse_or("train.monitor", Monitor::Validation)?,
            exec,
            sweep_encoders: parse_list(map, "sweep.encoders")?
                .unwrap_or_else(|| vec![EncoderKind::Concat, EncoderKind::Tensor]),
            sweep_regimes: parse_list(map, "sweep.regimes")?.unwrap_or_else(|| {
                vec![
                    RegimeSpec(Regime::Full),
                    RegimeSpec(Regime::Sparse { k: 10 }),
                    RegimeSpec(Regime::Sparse { k: 1 }),
                    RegimeSpec(Regime::None),
                ]
            }),
            sweep_seeds: parse_list(map, "sweep.seeds")?.unwrap_or_else(|| vec![1, 2, 3]),
        })
    }
}

/// Exec mode a config gets when it names none: the best one this
/// binary was built with.
pub fn default_exec() -> &'static str {
    #[cfg(feature = "parallel")]
    {
        "parallel"
    }
    #[cfg(not(feature = "parallel"))]
    {
        "sequential"
    }
}

/// Maps an exec name to a mode, failing when the binary lacks the
/// requested backend.
pub fn parse_exec(name: &str) -> Result<ExecMode, String> {
    match name {
        "sequential" => Ok(ExecMode::Sequential),
        #[cfg(feature = "parallel")]
        "parallel" => Ok(ExecMode::Parallel),
        #[cfg(not(feature = "parallel"))]
        "parallel" => Err("built without the parallel feature".into()),
        other => Err(format!("unknown exec mode '{other}' (parallel | sequential)")),
    }
}

/// Largest hidden width `<= requested` admissible for the encoder and
/// regime: tensor encoders and sparse projections need a perfect
/// square, concatenation needs an even split.
pub fn admissible_d_hidden(requested: usize, encoder: EncoderKind, regime: Regime) -> usize {
    let needs_square =
        encoder == EncoderKind::Tensor || matches!(regime, Regime::Sparse { .. });
    let needs_even = encoder == EncoderKind::Concat;
    let mut v = requested;
    while v > 0 {
        let square_ok = !needs_square || {
            let r = (v as f64).sqrt().round() as usize;
            r * r == v
        };
        let even_ok = !needs_even || (v % 2 == 0 && v >= 2);
        if square_ok && even_ok {
            return v;
        }
        v -= 1;
    }
    requested
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Result<FileConfig, CliError> {
        let map = ConfigMap::parse(Path::new("test.cfg"), text)?;
        FileConfig::from_map(&map)
    }

    const MINIMAL: &str = "\
encoder.kind = tensor
encoder.d_hidden = 64
mp.kind = gcn
mp.regime = full
mp.layers = 2
";

    #[test]
    fn minimal_config_resolves_defaults() {
        let c = cfg(MINIMAL).unwrap();
        assert_eq!(c.encoder, EncoderKind::Tensor);
        assert_eq!(c.d_hidden, 64);
        assert_eq!(c.layers, 2);
        assert!(c.joint);
        assert_eq!(c.mlp_depth, 1);
        assert_eq!(c.lr, 1e-3);
        assert_eq!(c.patience, 25);
        assert_eq!(c.monitor, Monitor::Validation);
        assert_eq!(c.sweep_seeds, vec![1, 2, 3]);
        assert_eq!(c.sweep_regimes.len(), 4);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = cfg("encoder.kind = tensor\nencoder.width = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("test.cfg:2"), "{msg}");
        assert!(msg.contains("unknown key 'encoder.width'"), "{msg}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let err = cfg("encoder.kind = tensor\nencoder.kind = concat\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key"), "{err}");
    }

    #[test]
    fn sparse_requires_k_and_none_forbids_layers() {
        let err = cfg("encoder.kind = tensor\nencoder.d_hidden = 64\nmp.kind = gcn\nmp.regime = sparse\nmp.layers = 1\n")
            .unwrap_err();
        assert!(err.to_string().contains("mp.K"), "{err}");

        let err = cfg("encoder.kind = tensor\nencoder.d_hidden = 64\nmp.kind = gcn\nmp.regime = none\nmp.layers = 1\n")
            .unwrap_err();
        assert!(err.to_string().contains("must be 0"), "{err}");

        let err = cfg("encoder.kind = tensor\nencoder.d_hidden = 64\nmp.kind = gcn\nmp.regime = full\nmp.layers = 1\nmp.K = 3\n")
            .unwrap_err();
        assert!(err.to_string().contains("only valid"), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let c = cfg("# header\n\nencoder.kind = concat\nencoder.d_hidden = 16\nmp.kind = sage\nmp.regime = none\n")
            .unwrap();
        assert_eq!(c.encoder, EncoderKind::Concat);
        assert_eq!(c.layers, 0);
    }

    #[test]
    fn regime_spec_round_trip() {
        for (s, tag) in [("full", "full"), ("sparse:10", "sparse10"), ("none", "none")] {
            let spec: RegimeSpec = s.parse().unwrap();
            assert_eq!(spec.tag(), tag);
        }
        assert!("sparse:".parse::<RegimeSpec>().is_err());
        assert!("dense".parse::<RegimeSpec>().is_err());
    }

    #[test]
    fn substitution_picks_largest_admissible_width() {
        use EncoderKind::*;
        // 328 is even, so concat keeps it; squares must drop to 324.
        assert_eq!(admissible_d_hidden(328, Concat, Regime::Full), 328);
        assert_eq!(admissible_d_hidden(328, Tensor, Regime::Full), 324);
        assert_eq!(admissible_d_hidden(328, Concat, Regime::Sparse { k: 1 }), 324);
        assert_eq!(admissible_d_hidden(64, Tensor, Regime::Sparse { k: 10 }), 64);
        assert_eq!(admissible_d_hidden(36, Tensor, Regime::None), 36);
        assert_eq!(admissible_d_hidden(17, Concat, Regime::Full), 16);
        assert_eq!(admissible_d_hidden(15, Tensor, Regime::Full), 9);
    }
}
