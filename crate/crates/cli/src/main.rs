//! `entangle` — dataset generation, training runs, and ablation sweeps.
//!
//! Every run directory holds one manifest (`manifest.json`), one
//! checkpoint pair (`model.json` + `model.bin`), and one metrics CSV.
//! Reruns from a manifest reproduce checkpoints and metric columns
//! bit-for-bit; only wall-clock times differ.

mod config;
mod manifest;
mod runs;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use entangle::dataset::{read_graphs, write_encodings, write_graphs, write_task, DatasetError};
use entangle::encoding::{laplacian_eig_encoding, rw_diag_encoding, EncodingMatrix};
use entangle::generate::multiplicative_task;
use entangle::graph::figure1_pair;
use entangle::model::{init_model, model_param_count, Task};
use entangle::train::CSV_HEADER;
use entangle::wl::{wl_equivalent, wl_refine};
use entangle::Graph;

use config::{admissible_d_hidden, FileConfig, TaskKind};
use manifest::RunManifest;
use runs::{evaluate, execute, expand_sweep, resolve_manifest, sort_rows, summarize};

/// Everything that can go wrong at the command surface. File-shaped
/// variants always carry the offending path.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Data { path: PathBuf, source: DatasetError },
    #[error("{path}:{line}: {msg}")]
    Config { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("{path}: checksum {actual} does not match recorded {recorded}")]
    ChecksumMismatch { path: PathBuf, recorded: String, actual: String },
    #[error("{0}")]
    Invalid(String),
    #[error("training failed: {0}")]
    Train(String),
}

#[derive(Parser)]
#[command(name = "entangle", version, about = "Structural-encoding ablation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multiplicative-task dataset (JSONL + bilinear sidecar).
    Generate {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 15)]
        nodes: usize,
        /// Erdős–Rényi edge probability.
        #[arg(long, default_value_t = 0.25)]
        edge_prob: f64,
        #[arg(long, default_value_t = 2)]
        d_in: usize,
        /// Random-walk steps used for the targets.
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Bilinear-map sidecar path; defaults to `<out>` with a `task.json` extension.
        #[arg(long)]
        task_out: Option<PathBuf>,
    },
    /// Write structural-encoding sidecars for a graph file.
    Encode {
        #[arg(long)]
        graphs: PathBuf,
        /// `rw_diag` or `laplacian_eig`.
        #[arg(long, default_value = "rw_diag")]
        kind: String,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model from a config file, or replay a manifest.
    Train {
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        name: Option<String>,
        #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
        seed: Option<u64>,
        /// Replay an existing manifest verbatim (checksums are verified).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Re-evaluate a finished run's checkpoint on its stored splits.
    Eval {
        /// Run directory (`runs/<name>/<seed>`).
        #[arg(long)]
        run: PathBuf,
        /// Optional CSV file for the evaluated metrics.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the encoder × regime grid and aggregate the rows.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        name: String,
        /// Comma-separated seed list; overrides `sweep.seeds`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// 1-WL refinement report for a pair of graphs.
    WlTest {
        /// Use the built-in 1-WL-equivalent pair.
        #[arg(long, conflicts_with = "graphs")]
        figure1: bool,
        #[arg(long, required_unless_present = "figure1")]
        graphs: Option<PathBuf>,
        /// Index of the first graph in the file.
        #[arg(long = "a", default_value_t = 0)]
        index_a: usize,
        /// Index of the second graph in the file.
        #[arg(long = "b", default_value_t = 1)]
        index_b: usize,
        /// Random-walk steps for the encoding comparison.
        #[arg(long, default_value_t = 20)]
        k: usize,
    },
    /// Per-block parameter counts for a model config.
    ParamCount {
        #[arg(long)]
        config: PathBuf,
        /// Feature width; read from `data.graphs` when omitted.
        #[arg(long)]
        d_in: Option<usize>,
        /// Encoding width; read from `data.encodings` when omitted.
        #[arg(long)]
        k: Option<usize>,
        /// Target width; read from `data.graphs` when omitted.
        #[arg(long)]
        task_dim: Option<usize>,
    },
    /// Aggregate per-run metrics of a sweep into the summary table.
    Report {
        #[arg(long, default_value = "runs")]
        dir: PathBuf,
        #[arg(long)]
        name: String,
        /// Summary CSV path; stdout only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { count, nodes, edge_prob, d_in, k, seed, out, task_out } => {
            generate_cmd(count, nodes, edge_prob, d_in, k, seed, &out, task_out)
        }
        Command::Encode { graphs, kind, k, out } => encode_cmd(&graphs, &kind, k, &out),
        Command::Train { config, name, seed, manifest, out_dir } => {
            train_cmd(config, name, seed, manifest, &out_dir)
        }
        Command::Eval { run, out } => eval_cmd(&run, out),
        Command::Sweep { config, name, seeds, out_dir } => {
            sweep_cmd(&config, &name, seeds, &out_dir)
        }
        Command::WlTest { figure1, graphs, index_a, index_b, k } => {
            wl_test_cmd(figure1, graphs, index_a, index_b, k)
        }
        Command::ParamCount { config, d_in, k, task_dim } => {
            param_count_cmd(&config, d_in, k, task_dim)
        }
        Command::Report { dir, name, out } => report_cmd(&dir, &name, out),
    }
}

#[allow(clippy::too_many_arguments)]
fn generate_cmd(
    count: usize,
    nodes: usize,
    edge_prob: f64,
    d_in: usize,
    k: usize,
    seed: u64,
    out: &Path,
    task_out: Option<PathBuf>,
) -> Result<(), CliError> {
    let (graphs, task) = multiplicative_task(count, nodes, edge_prob, d_in, k, seed)
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    write_graphs(out, &graphs).map_err(|source| CliError::Data { path: out.into(), source })?;
    let task_path = task_out.unwrap_or_else(|| out.with_extension("task.json"));
    write_task(&task_path, &task)
        .map_err(|source| CliError::Data { path: task_path.clone(), source })?;
    println!(
        "wrote {count} graphs (n={nodes}, p={edge_prob}, d_in={d_in}) to {}",
        out.display()
    );
    println!("bilinear task sidecar ({d_in}x{k}) at {}", task_path.display());
    Ok(())
}

fn encode_cmd(graphs_path: &Path, kind: &str, k: usize, out: &Path) -> Result<(), CliError> {
    let graphs = read_graphs(graphs_path)
        .map_err(|source| CliError::Data { path: graphs_path.into(), source })?;
    let encodings: Vec<EncodingMatrix> = match kind {
        "rw_diag" => graphs.iter().map(|g| rw_diag_encoding(&g.adjacency(), k)).collect(),
        "laplacian_eig" => graphs
            .iter()
            .map(|g| laplacian_eig_encoding(&g.adjacency(), k))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Invalid(format!("eigensolver: {e}")))?,
        other => {
            return Err(CliError::Invalid(format!(
                "unknown encoding kind '{other}' (rw_diag | laplacian_eig)"
            )))
        }
    };
    write_encodings(out, &encodings)
        .map_err(|source| CliError::Data { path: out.into(), source })?;
    println!("wrote {} {kind} encodings (k={k}) to {}", encodings.len(), out.display());
    Ok(())
}

fn train_cmd(
    config: Option<PathBuf>,
    name: Option<String>,
    seed: Option<u64>,
    manifest_path: Option<PathBuf>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let (manifest, data) = match manifest_path {
        Some(path) => {
            let manifest = RunManifest::read(&path)?;
            manifest.verify_checksums()?;
            let data = runs::load_manifest_data(&manifest)?;
            (manifest, data)
        }
        None => {
            let cfg = FileConfig::load(&config.expect("clap enforces --config"))?;
            resolve_manifest(&cfg, &name.expect("clap enforces --name"), seed.expect("clap enforces --seed"))?
        }
    };
    if let Some(requested) = manifest.requested_d_hidden {
        println!(
            "d_hidden {requested} -> {} (encoder/regime shape constraint)",
            manifest.model.d_hidden
        );
    }
    let (dir, row) = execute(&manifest, &data, out_dir)?;
    println!("run {}", dir.display());
    println!("{CSV_HEADER}");
    println!("{}", row.csv_line());
    Ok(())
}

fn eval_cmd(run: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let (manifest, report) = evaluate(run)?;
    let metric = match manifest.model.task {
        Task::Regression { .. } => "mae",
        Task::Multilabel { .. } => "ap",
    };
    println!("{}: {} ({metric})", run.display(), manifest.name);
    let mut csv = String::from("split,metric\n");
    let mut emit = |split: &str, value: Option<f64>| {
        if let Some(v) = value {
            println!("{split:5} {v}");
            csv.push_str(&format!("{split},{v}\n"));
        }
    };
    emit("train", Some(report.train));
    emit("val", report.val);
    emit("test", report.test);
    if let Some(path) = out {
        std::fs::write(&path, csv).map_err(|source| CliError::File { path, source })?;
    }
    Ok(())
}

fn sweep_cmd(
    config: &Path,
    name: &str,
    seeds: Option<String>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let cfg = FileConfig::load(config)?;
    let seeds: Vec<u64> = match seeds {
        Some(raw) => raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Invalid(format!("bad seed '{}'", s.trim())))
            })
            .collect::<Result<_, _>>()?,
        None => cfg.sweep_seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(CliError::Invalid("sweep needs at least one seed".into()));
    }

    let cells = expand_sweep(&cfg, name, &seeds)?;
    let mut rows = Vec::with_capacity(cells.len());
    for (cell, data) in &cells {
        let (dir, row) = execute(&cell.manifest, data, out_dir)?;
        println!(
            "{}/{}: train {} test {} epochs {} ({:.1}s)",
            cell.run_name,
            cell.manifest.seed,
            row.train_metric,
            row.test_metric,
            row.epochs,
            row.wall_time_s
        );
        let _ = dir;
        rows.push(row);
    }

    let all_path = out_dir.join(format!("{name}.csv"));
    let mut all = String::from(CSV_HEADER);
    all.push('\n');
    for row in &rows {
        all.push_str(&row.csv_line());
        all.push('\n');
    }
    std::fs::write(&all_path, all)
        .map_err(|source| CliError::File { path: all_path.clone(), source })?;

    let direction = entangle::train::Direction::for_task(cells[0].0.manifest.model.task);
    sort_rows(&mut rows);
    let summary = summarize(&rows, direction);
    let summary_path = out_dir.join(format!("{name}-summary.csv"));
    std::fs::write(&summary_path, &summary)
        .map_err(|source| CliError::File { path: summary_path.clone(), source })?;

    println!("wrote {} and {}", all_path.display(), summary_path.display());
    print!("{summary}");
    Ok(())
}

fn sorted_rows(enc: &EncodingMatrix) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> =
        (0..enc.rows.rows()).map(|i| enc.rows.row(i).to_vec()).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows
}

fn histogram_text(pairs: &[(usize, usize)]) -> String {
    let items: Vec<String> = pairs.iter().map(|(c, n)| format!("{c}:{n}")).collect();
    format!("{{{}}}", items.join(", "))
}

fn wl_test_cmd(
    figure1: bool,
    graphs: Option<PathBuf>,
    index_a: usize,
    index_b: usize,
    k: usize,
) -> Result<(), CliError> {
    let (a, b) = if figure1 {
        figure1_pair()
    } else {
        let path = graphs.expect("clap enforces --graphs");
        let all = read_graphs(&path)
            .map_err(|source| CliError::Data { path: path.clone(), source })?;
        let pick = |i: usize| -> Result<Graph, CliError> {
            all.get(i).cloned().ok_or_else(|| {
                CliError::Invalid(format!(
                    "{}: index {i} out of range ({} graphs)",
                    path.display(),
                    all.len()
                ))
            })
        };
        (pick(index_a)?, pick(index_b)?)
    };

    for (label, g) in [("a", &a), ("b", &b)] {
        let state = wl_refine(g, g.num_nodes.max(1));
        println!(
            "graph {label}: {} nodes, stable after {} rounds, colors {}",
            g.num_nodes,
            state.round,
            histogram_text(&state.histogram)
        );
    }
    let equivalent = wl_equivalent(&a, &b);
    println!("1-WL: {}", if equivalent { "equivalent" } else { "distinguishable" });

    let enc_a = sorted_rows(&rw_diag_encoding(&a.adjacency(), k));
    let enc_b = sorted_rows(&rw_diag_encoding(&b.adjacency(), k));
    if enc_a.len() != enc_b.len() {
        println!("rw-diag (k={k}): node counts differ, encodings not comparable");
        return Ok(());
    }
    let mut diff = None;
    'outer: for (i, (ra, rb)) in enc_a.iter().zip(&enc_b).enumerate() {
        for (j, (x, y)) in ra.iter().zip(rb.iter()).enumerate() {
            if (x - y).abs() > 1e-6 {
                diff = Some((i, j));
                break 'outer;
            }
        }
    }
    match diff {
        Some((i, j)) => {
            println!("rw-diag (k={k}): sorted row multisets differ, first at row {i} step {j}");
            let fmt = |r: &[f64]| {
                r.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(" ")
            };
            println!("  a[{i}] = [{}]", fmt(&enc_a[i]));
            println!("  b[{i}] = [{}]", fmt(&enc_b[i]));
        }
        None => println!("rw-diag (k={k}): sorted row multisets identical within 1e-6"),
    }
    Ok(())
}

fn param_count_cmd(
    config: &Path,
    d_in: Option<usize>,
    k: Option<usize>,
    task_dim: Option<usize>,
) -> Result<(), CliError> {
    let cfg = FileConfig::load(config)?;
    let (d_in, k, dim) = match (d_in, k, task_dim) {
        (Some(d), Some(k), Some(t)) => (d, k, t),
        (d, k, t) => {
            let graphs_path = cfg.graphs.clone().ok_or_else(|| {
                CliError::Invalid(
                    "pass --d-in/--k/--task-dim or set data.graphs/data.encodings".into(),
                )
            })?;
            let graphs = read_graphs(&graphs_path)
                .map_err(|source| CliError::Data { path: graphs_path.clone(), source })?;
            let first = graphs
                .first()
                .ok_or_else(|| CliError::Invalid(format!("{}: empty", graphs_path.display())))?;
            let enc_k = match k {
                Some(k) => k,
                None => {
                    let enc_path = cfg.encodings.clone().ok_or_else(|| {
                        CliError::Invalid("pass --k or set data.encodings".into())
                    })?;
                    let encs = entangle::dataset::read_encodings(&enc_path)
                        .map_err(|source| CliError::Data { path: enc_path.clone(), source })?;
                    encs.first()
                        .ok_or_else(|| {
                            CliError::Invalid(format!("{}: empty", enc_path.display()))
                        })?
                        .k
                }
            };
            (d.unwrap_or(first.feature_dim()), enc_k, t.unwrap_or(first.target.len()))
        }
    };

    let d_hidden = admissible_d_hidden(cfg.d_hidden, cfg.encoder, cfg.regime);
    if d_hidden != cfg.d_hidden {
        println!("d_hidden {} -> {d_hidden} (encoder/regime shape constraint)", cfg.d_hidden);
    }
    let task = match cfg.task {
        TaskKind::Regression => Task::Regression { dim },
        TaskKind::Multilabel => Task::Multilabel { dim },
    };
    let model = entangle::ModelConfig {
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
        seed: 0,
    };
    let params = init_model(&model).map_err(|e| CliError::Invalid(e.to_string()))?;

    let mut total = 0usize;
    params.visit(&mut |name: String, mat: &entangle::linalg::DMat| {
        let n = mat.rows() * mat.cols();
        println!("{name:<24} {:>5}x{:<5} {n:>10}", mat.rows(), mat.cols());
        total += n;
    });
    let expected = model_param_count(&model).map_err(|e| CliError::Invalid(e.to_string()))?;
    if total != expected {
        return Err(CliError::Invalid(format!(
            "block sum {total} disagrees with model_param_count {expected}"
        )));
    }
    println!("{:<24} {:>11} {total:>10}", "total", "");
    Ok(())
}

fn report_cmd(dir: &Path, name: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    let rows = runs::collect_rows(dir, name)?;
    let direction = runs::sweep_direction(dir, name)?;
    let summary = summarize(&rows, direction);
    if let Some(path) = out {
        std::fs::write(&path, &summary)
            .map_err(|source| CliError::File { path: path.clone(), source })?;
        println!("wrote {}", path.display());
    }
    print!("{summary}");
    Ok(())
}
