//! Run execution, evaluation, and sweep aggregation.
//!
//! A run directory is `<out_dir>/<name>/<seed>/` holding exactly one
//! manifest, one checkpoint pair, and one metrics CSV. Sweeps expand
//! the encoder × regime grid into such runs and aggregate their rows.

use std::path::{Path, PathBuf};

use entangle::dataset::{read_encodings, read_graphs, split_dataset};
use entangle::encoder::EncoderKind;
use entangle::model::{load_checkpoint, model_param_count, save_checkpoint, Task};
use entangle::mpnn::Regime;
use entangle::train::{
    self, aggregate, gain, Direction, Monitor, ReportRow, TrainData, TrainOptions, CSV_HEADER,
};
use entangle::{Graph, ModelConfig};

use crate::config::{admissible_d_hidden, parse_exec, FileConfig, RegimeSpec, TaskKind};
use crate::manifest::{
    file_checksum, ArtifactSection, DataSection, RunManifest, TrainSection, MANIFEST_FILE,
};
use crate::CliError;

/// Loaded dataset plus its split; owns what [`TrainData`] borrows.
pub struct LoadedData {
    pub graphs: Vec<Graph>,
    pub encodings: Vec<entangle::encoding::EncodingMatrix>,
    pub splits: entangle::dataset::Splits,
}

impl LoadedData {
    pub fn train_data(&self) -> TrainData<'_> {
        TrainData {
            graphs: &self.graphs,
            encodings: &self.encodings,
            splits: self.splits.clone(),
        }
    }
}

fn read_data_files(
    graphs_path: &Path,
    encodings_path: &Path,
    val_frac: f64,
    test_frac: f64,
) -> Result<LoadedData, CliError> {
    let graphs = read_graphs(graphs_path)
        .map_err(|source| CliError::Data { path: graphs_path.to_path_buf(), source })?;
    let encodings = read_encodings(encodings_path)
        .map_err(|source| CliError::Data { path: encodings_path.to_path_buf(), source })?;
    if graphs.len() != encodings.len() {
        return Err(CliError::Invalid(format!(
            "{} holds {} graphs but {} holds {} encodings",
            graphs_path.display(),
            graphs.len(),
            encodings_path.display(),
            encodings.len()
        )));
    }
    let splits = split_dataset(graphs.len(), val_frac, test_frac)
        .map_err(|source| CliError::Data { path: graphs_path.to_path_buf(), source })?;
    Ok(LoadedData { graphs, encodings, splits })
}

pub fn load_manifest_data(manifest: &RunManifest) -> Result<LoadedData, CliError> {
    read_data_files(
        &manifest.data.graphs,
        &manifest.data.encodings,
        manifest.data.val_frac,
        manifest.data.test_frac,
    )
}

fn dataset_label(cfg: &FileConfig, graphs_path: &Path) -> String {
    cfg.dataset_name.clone().unwrap_or_else(|| {
        graphs_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    })
}

/// Resolves a config file into a frozen manifest: reads the dataset to
/// fix `d_in`, encoding width, and the task dimension, and substitutes
/// the hidden width when the encoder/regime needs a different shape.
pub fn resolve_manifest(
    cfg: &FileConfig,
    name: &str,
    seed: u64,
) -> Result<(RunManifest, LoadedData), CliError> {
    let graphs_path = cfg
        .graphs
        .clone()
        .ok_or_else(|| CliError::Invalid("config is missing data.graphs".into()))?;
    let encodings_path = cfg
        .encodings
        .clone()
        .ok_or_else(|| CliError::Invalid("config is missing data.encodings".into()))?;
    let data = read_data_files(&graphs_path, &encodings_path, cfg.val_frac, cfg.test_frac)?;
    let first = data.graphs.first().ok_or_else(|| {
        CliError::Data { path: graphs_path.clone(), source: entangle::dataset::DatasetError::EmptySplit }
    })?;

    let d_in = first.feature_dim();
    let k = data.encodings[0].k;
    let dim = first.target.len();
    let task = match cfg.task {
        TaskKind::Regression => Task::Regression { dim },
        TaskKind::Multilabel => Task::Multilabel { dim },
    };

    let d_hidden = admissible_d_hidden(cfg.d_hidden, cfg.encoder, cfg.regime);
    let model = ModelConfig {
        encoder: cfg.encoder,
        joint: cfg.joint,
        mlp_depth: cfg.mlp_depth,
        d_in,
        k,
        d_hidden,
        layer: cfg.layer,
        regime: cfg.regime,
        layers: cfg.layers,
        epsilon: cfg.epsilon,
        decoder_hidden: cfg.decoder_hidden.unwrap_or(d_hidden),
        readout: cfg.readout,
        task,
        seed,
    };
    model.validate().map_err(|e| CliError::Invalid(e.to_string()))?;

    let manifest = RunManifest {
        name: name.to_string(),
        seed,
        data: DataSection {
            name: dataset_label(cfg, &graphs_path),
            graphs_fnv1a: file_checksum(&graphs_path)?,
            encodings_fnv1a: file_checksum(&encodings_path)?,
            graphs: graphs_path,
            encodings: encodings_path,
            val_frac: cfg.val_frac,
            test_frac: cfg.test_frac,
        },
        model,
        requested_d_hidden: (d_hidden != cfg.d_hidden).then_some(cfg.d_hidden),
        train: TrainSection {
            lr: cfg.lr,
            patience: cfg.patience,
            factor: cfg.factor,
            floor: cfg.floor,
            max_epochs: cfg.max_epochs,
            monitor: cfg.monitor.to_string(),
            exec: cfg.exec.clone(),
        },
        artifacts: ArtifactSection::default(),
    };
    Ok((manifest, data))
}

pub fn train_options(section: &TrainSection) -> Result<TrainOptions, CliError> {
    let monitor: Monitor = section
        .monitor
        .parse()
        .map_err(|e: String| CliError::Invalid(format!("manifest train.monitor: {e}")))?;
    let exec = parse_exec(&section.exec)
        .map_err(|e| CliError::Invalid(format!("manifest train.exec: {e}")))?;
    Ok(TrainOptions {
        lr: section.lr,
        patience: section.patience,
        factor: section.factor,
        floor: section.floor,
        max_epochs: section.max_epochs,
        monitor,
        exec,
    })
}

pub fn run_dir(out_dir: &Path, name: &str, seed: u64) -> PathBuf {
    out_dir.join(name).join(seed.to_string())
}

/// Trains one manifest and writes its run directory. Returns the
/// directory and the metrics row.
pub fn execute(
    manifest: &RunManifest,
    data: &LoadedData,
    out_dir: &Path,
) -> Result<(PathBuf, ReportRow), CliError> {
    let opts = train_options(&manifest.train)?;
    let outcome = train::train(&manifest.model, &data.train_data(), &opts)
        .map_err(|e| CliError::Train(e.to_string()))?;

    let dir = run_dir(out_dir, &manifest.name, manifest.seed);
    std::fs::create_dir_all(&dir)
        .map_err(|source| CliError::File { path: dir.clone(), source })?;
    manifest.write(&dir)?;
    save_checkpoint(&outcome.params, &dir.join(&manifest.artifacts.checkpoint))
        .map_err(|e| CliError::Invalid(format!("checkpoint: {e}")))?;

    let row = ReportRow {
        dataset: manifest.data.name.clone(),
        encoder: manifest.model.encoder,
        layer: manifest.model.layer,
        regime: manifest.model.regime,
        layers: manifest.model.layers,
        d_hidden: manifest.model.d_hidden,
        params: model_param_count(&manifest.model)
            .map_err(|e| CliError::Invalid(e.to_string()))?,
        seed: manifest.seed,
        train_metric: outcome.train_metric,
        test_metric: outcome.test_metric.unwrap_or(f64::NAN),
        epochs: outcome.epochs,
        wall_time_s: outcome.wall_time_s,
    };
    let metrics_path = dir.join(&manifest.artifacts.metrics);
    std::fs::write(&metrics_path, format!("{CSV_HEADER}\n{}\n", row.csv_line()))
        .map_err(|source| CliError::File { path: metrics_path, source })?;
    Ok((dir, row))
}

/// Splits metric values for a finished run, reusing its stored splits.
pub struct EvalReport {
    pub train: f64,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

pub fn evaluate(dir: &Path) -> Result<(RunManifest, EvalReport), CliError> {
    let manifest = RunManifest::read(&dir.join(MANIFEST_FILE))?;
    manifest.verify_checksums()?;
    let data = load_manifest_data(&manifest)?;
    let params = load_checkpoint(&dir.join(&manifest.artifacts.checkpoint))
        .map_err(|e| CliError::Invalid(format!("checkpoint: {e}")))?;
    if params.config != manifest.model {
        return Err(CliError::Invalid(format!(
            "{}: checkpoint config does not match the manifest",
            dir.display()
        )));
    }
    let opts = train_options(&manifest.train)?;
    let td = data.train_data();
    let metric = |range: &std::ops::Range<usize>| -> Result<f64, CliError> {
        train::split_metric(&params, &td, range, opts.exec)
            .map_err(|e| CliError::Train(e.to_string()))
    };
    let report = EvalReport {
        train: metric(&td.splits.train)?,
        val: if td.splits.val.is_empty() { None } else { Some(metric(&td.splits.val)?) },
        test: if td.splits.test.is_empty() { None } else { Some(metric(&td.splits.test)?) },
    };
    Ok((manifest, report))
}

/// One sweep cell: the combo name and its manifest.
pub struct SweepCell {
    pub run_name: String,
    pub manifest: RunManifest,
}

/// Expands the grid in deterministic order: encoders, then regimes,
/// then seeds, exactly as listed.
pub fn expand_sweep(
    cfg: &FileConfig,
    name: &str,
    seeds: &[u64],
) -> Result<Vec<(SweepCell, LoadedData)>, CliError> {
    let mut cells = Vec::new();
    for &encoder in &cfg.sweep_encoders {
        for spec in &cfg.sweep_regimes {
            let run_name = format!("{name}-{encoder}-{}", spec.tag());
            for &seed in seeds {
                let mut cell_cfg = cfg.clone();
                cell_cfg.encoder = encoder;
                cell_cfg.regime = spec.0;
                cell_cfg.layers = if spec.0 == Regime::None { 0 } else { cfg.layers };
                let (manifest, data) = resolve_manifest(&cell_cfg, &run_name, seed)?;
                cells.push((SweepCell { run_name: run_name.clone(), manifest }, data));
            }
        }
    }
    Ok(cells)
}

fn regime_rank(regime: Regime) -> (u8, i64) {
    match regime {
        Regime::Full => (0, 0),
        // Larger K first, matching the full / K=10 / K=1 / none layout.
        Regime::Sparse { k } => (1, -(k as i64)),
        Regime::None => (2, 0),
    }
}

/// Stable presentation order for rows and aggregates.
pub fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| {
        let ka = (a.encoder.to_string(), regime_rank(a.regime), a.seed);
        let kb = (b.encoder.to_string(), regime_rank(b.regime), b.seed);
        ka.cmp(&kb)
    });
}

pub fn parse_report_row(line: &str) -> Result<ReportRow, CliError> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != 13 {
        return Err(CliError::Invalid(format!(
            "metrics row has {} columns, expected 13: {line}",
            cols.len()
        )));
    }
    let bad = |what: &str| CliError::Invalid(format!("metrics row: bad {what}: {line}"));
    let k: usize = cols[4].parse().map_err(|_| bad("K"))?;
    let regime = match cols[3] {
        "full" => Regime::Full,
        "sparse" => Regime::Sparse { k },
        "none" => Regime::None,
        _ => return Err(bad("regime")),
    };
    Ok(ReportRow {
        dataset: cols[0].to_string(),
        encoder: cols[1].parse().map_err(|_| bad("encoder"))?,
        layer: cols[2].parse().map_err(|_| bad("layer"))?,
        regime,
        layers: cols[5].parse().map_err(|_| bad("L"))?,
        d_hidden: cols[6].parse().map_err(|_| bad("d_hidden"))?,
        params: cols[7].parse().map_err(|_| bad("params"))?,
        seed: cols[8].parse().map_err(|_| bad("seed"))?,
        train_metric: cols[9].parse().map_err(|_| bad("train_metric"))?,
        test_metric: cols[10].parse().map_err(|_| bad("test_metric"))?,
        epochs: cols[11].parse().map_err(|_| bad("epochs"))?,
        wall_time_s: cols[12].parse().map_err(|_| bad("wall_time_s"))?,
    })
}

/// Collects metrics rows from every `<dir>/<name>-*/<seed>/metrics.csv`.
pub fn collect_rows(dir: &Path, name: &str) -> Result<Vec<ReportRow>, CliError> {
    let prefix = format!("{name}-");
    let mut rows = Vec::new();
    let entries =
        std::fs::read_dir(dir).map_err(|source| CliError::File { path: dir.into(), source })?;
    for entry in entries {
        let entry = entry.map_err(|source| CliError::File { path: dir.into(), source })?;
        let run_path = entry.path();
        let run_name = entry.file_name().to_string_lossy().into_owned();
        if !run_path.is_dir() || !run_name.starts_with(&prefix) {
            continue;
        }
        let seeds = std::fs::read_dir(&run_path)
            .map_err(|source| CliError::File { path: run_path.clone(), source })?;
        for seed_entry in seeds {
            let seed_entry =
                seed_entry.map_err(|source| CliError::File { path: run_path.clone(), source })?;
            let metrics = seed_entry.path().join(crate::manifest::METRICS_FILE);
            if !metrics.is_file() {
                continue;
            }
            let text = std::fs::read_to_string(&metrics)
                .map_err(|source| CliError::File { path: metrics.clone(), source })?;
            for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                rows.push(parse_report_row(line)?);
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Invalid(format!(
            "no metrics found under {} for sweep '{name}'",
            dir.display()
        )));
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub const SUMMARY_HEADER: &str =
    "dataset,encoder,regime,K,L,d_hidden,params,n_seeds,train_mean,train_std,test_mean,test_std";

/// Renders the aggregate summary: one row per (encoder, regime) cell
/// plus a trailing gain row per regime present for both encoders.
/// Contains no wall-clock column, so reruns reproduce it exactly.
pub fn summarize(rows: &[ReportRow], direction: Direction) -> String {
    #[derive(Clone)]
    struct Cell {
        proto: ReportRow,
        train: Vec<f64>,
        test: Vec<f64>,
    }
    let mut cells: Vec<Cell> = Vec::new();
    for row in rows {
        let found = cells
            .iter_mut()
            .find(|c| c.proto.encoder == row.encoder && c.proto.regime == row.regime);
        match found {
            Some(c) => {
                c.train.push(row.train_metric);
                c.test.push(row.test_metric);
            }
            None => cells.push(Cell {
                proto: row.clone(),
                train: vec![row.train_metric],
                test: vec![row.test_metric],
            }),
        }
    }

    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in &cells {
        let tr = aggregate(&c.train);
        let te = aggregate(&c.test);
        let k = match c.proto.regime {
            Regime::Sparse { k } => k,
            _ => 0,
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.proto.dataset,
            c.proto.encoder,
            c.proto.regime,
            k,
            c.proto.layers,
            c.proto.d_hidden,
            c.proto.params,
            tr.n,
            tr.mean,
            tr.std,
            te.mean,
            te.std,
        ));
    }

    let mut regimes: Vec<Regime> = Vec::new();
    for c in &cells {
        if !regimes.contains(&c.proto.regime) {
            regimes.push(c.proto.regime);
        }
    }
    for regime in regimes {
        let mean_of = |encoder: EncoderKind, test: bool| -> Option<f64> {
            let c = cells
                .iter()
                .find(|c| c.proto.encoder == encoder && c.proto.regime == regime)?;
            Some(aggregate(if test { &c.test } else { &c.train }).mean)
        };
        let (Some(ctr), Some(ttr)) =
            (mean_of(EncoderKind::Concat, false), mean_of(EncoderKind::Tensor, false))
        else {
            continue;
        };
        let (cte, tte) =
            (mean_of(EncoderKind::Concat, true).unwrap(), mean_of(EncoderKind::Tensor, true).unwrap());
        let tag = RegimeSpec(regime).tag();
        out.push_str(&format!(
            "gain,{tag},{},{}\n",
            gain(direction, ctr, ttr),
            gain(direction, cte, tte),
        ));
    }
    out
}

/// Task direction for gain orientation, read from any manifest of the
/// sweep (all cells share the task).
pub fn sweep_direction(dir: &Path, name: &str) -> Result<Direction, CliError> {
    let prefix = format!("{name}-");
    let entries =
        std::fs::read_dir(dir).map_err(|source| CliError::File { path: dir.into(), source })?;
    let mut run_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .map(|n| n.to_string_lossy().starts_with(&prefix))
                    .unwrap_or(false)
        })
        .collect();
    run_dirs.sort();
    for run in run_dirs {
        let mut seed_dirs: Vec<PathBuf> = std::fs::read_dir(&run)
            .map_err(|source| CliError::File { path: run.clone(), source })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .collect();
        seed_dirs.sort();
        for seed_dir in seed_dirs {
            let manifest_path = seed_dir.join(MANIFEST_FILE);
            if manifest_path.is_file() {
                let manifest = RunManifest::read(&manifest_path)?;
                return Ok(Direction::for_task(manifest.model.task));
            }
        }
    }
    Err(CliError::Invalid(format!("no manifest found under {} for '{name}'", dir.display())))
}
