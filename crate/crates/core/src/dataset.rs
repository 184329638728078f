//! Dataset files: JSONL graphs, encoding sidecars, and the bilinear
//! task sidecar.
//!
//! Graphs are one JSON object per line with `num_nodes`, `edges`,
//! `features`, and `target`. Writers emit edges canonically sorted;
//! readers accept any edge order but validate every graph and report
//! the offending line on failure. Encoding sidecars mirror the graph
//! file line for line.

use std::io::{BufRead, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::{EncodingKind, EncodingMatrix};
use crate::generate::BilinearTask;
use crate::graph::{Graph, GraphError};
use crate::linalg::DMat;

/// Why a dataset file failed to read or make sense.
#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {source}")]
    Graph { line: usize, source: GraphError },
    #[error("line {line}: encoding row {row} has {len} entries, expected k = {k}")]
    RaggedEncoding { line: usize, row: usize, len: usize, k: usize },
    #[error("task matrix row {row} has {len} entries, expected k = {k}")]
    RaggedTask { row: usize, len: usize, k: usize },
    #[error("task matrix has {rows} rows, expected d_in = {d_in}")]
    TaskRowCount { rows: usize, d_in: usize },
    #[error("split fractions val {val} + test {test} must leave room for training data")]
    BadSplit { val: f64, test: f64 },
    #[error("cannot split an empty dataset")]
    EmptySplit,
}

/// Writes one canonical JSONL line per graph.
pub fn write_graphs(path: &Path, graphs: &[Graph]) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for g in graphs {
        let mut canonical = g.clone();
        canonical.canonicalize_edges();
        serde_json::to_writer(&mut out, &canonical)
            .map_err(|source| DatasetError::Json { line: 0, source })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads and validates a JSONL graph file; blank lines are skipped.
pub fn read_graphs(path: &Path) -> Result<Vec<Graph>, DatasetError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut graphs = Vec::new();
    for (idx, line) in file.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let g: Graph = serde_json::from_str(&text)
            .map_err(|source| DatasetError::Json { line: line_no, source })?;
        g.validate().map_err(|source| DatasetError::Graph { line: line_no, source })?;
        graphs.push(g);
    }
    Ok(graphs)
}

#[derive(Serialize, Deserialize)]
struct EncodingRecord {
    kind: EncodingKind,
    k: usize,
    rows: Vec<Vec<f64>>,
}

/// Writes one JSONL line per encoding matrix, aligned with the graph
/// file it was computed from.
pub fn write_encodings(path: &Path, encodings: &[EncodingMatrix]) -> Result<(), DatasetError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for enc in encodings {
        let record = EncodingRecord {
            kind: enc.kind,
            k: enc.k,
            rows: (0..enc.rows.rows()).map(|i| enc.rows.row(i).to_vec()).collect(),
        };
        serde_json::to_writer(&mut out, &record)
            .map_err(|source| DatasetError::Json { line: 0, source })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads an encoding sidecar; every row must be exactly `k` wide.
pub fn read_encodings(path: &Path) -> Result<Vec<EncodingMatrix>, DatasetError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut encodings = Vec::new();
    for (idx, line) in file.lines().enumerate() {
        let line_no = idx + 1;
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let record: EncodingRecord = serde_json::from_str(&text)
            .map_err(|source| DatasetError::Json { line: line_no, source })?;
        for (row, r) in record.rows.iter().enumerate() {
            if r.len() != record.k {
                return Err(DatasetError::RaggedEncoding {
                    line: line_no,
                    row,
                    len: r.len(),
                    k: record.k,
                });
            }
        }
        let n = record.rows.len();
        let data: Vec<f64> = record.rows.into_iter().flatten().collect();
        encodings.push(EncodingMatrix {
            kind: record.kind,
            k: record.k,
            rows: DMat::from_vec(n, record.k, data),
        });
    }
    Ok(encodings)
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    d_in: usize,
    k: usize,
    b: Vec<Vec<f64>>,
}

/// Writes the bilinear ground-truth map as a single JSON file.
pub fn write_task(path: &Path, task: &BilinearTask) -> Result<(), DatasetError> {
    let record = TaskRecord {
        d_in: task.d_in,
        k: task.k,
        b: (0..task.b.rows()).map(|i| task.b.row(i).to_vec()).collect(),
    };
    let json = serde_json::to_vec_pretty(&record)
        .map_err(|source| DatasetError::Json { line: 0, source })?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Reads a bilinear task sidecar back, checking the matrix shape.
pub fn read_task(path: &Path) -> Result<BilinearTask, DatasetError> {
    let record: TaskRecord = serde_json::from_slice(&std::fs::read(path)?)
        .map_err(|source| DatasetError::Json { line: 0, source })?;
    if record.b.len() != record.d_in {
        return Err(DatasetError::TaskRowCount { rows: record.b.len(), d_in: record.d_in });
    }
    for (row, r) in record.b.iter().enumerate() {
        if r.len() != record.k {
            return Err(DatasetError::RaggedTask { row, len: r.len(), k: record.k });
        }
    }
    let data: Vec<f64> = record.b.into_iter().flatten().collect();
    Ok(BilinearTask {
        d_in: record.d_in,
        k: record.k,
        b: DMat::from_vec(record.d_in, record.k, data),
    })
}

/// Contiguous index ranges over a dataset: train, then validation, then
/// test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Splits `count` items by tail fractions (rounded down), keeping at
/// least one training item. Generated datasets are exchangeable, so
/// contiguous ranges are as good as a shuffle and easier to reproduce.
pub fn split_dataset(count: usize, val_frac: f64, test_frac: f64) -> Result<Splits, DatasetError> {
    if count == 0 {
        return Err(DatasetError::EmptySplit);
    }
    if !(0.0..1.0).contains(&val_frac)
        || !(0.0..1.0).contains(&test_frac)
        || val_frac + test_frac >= 1.0
    {
        return Err(DatasetError::BadSplit { val: val_frac, test: test_frac });
    }
    let val = (count as f64 * val_frac).floor() as usize;
    let test = (count as f64 * test_frac).floor() as usize;
    let train = count - val - test;
    Ok(Splits {
        train: 0..train,
        val: train..train + val,
        test: train + val..count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::rw_diag_encoding;
    use crate::generate::multiplicative_task;

    #[test]
    fn graph_file_round_trips_and_canonicalizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graphs.jsonl");
        let (mut graphs, _) = multiplicative_task(4, 6, 0.5, 2, 3, 3).unwrap();
        // Scramble one edge list; the writer must restore canonical form.
        let (u, v) = graphs[0].edges[0];
        graphs[0].edges[0] = (v, u);
        write_graphs(&path, &graphs).unwrap();

        let back = read_graphs(&path).unwrap();
        assert_eq!(back.len(), graphs.len());
        let mut canonical = graphs[0].clone();
        canonical.canonicalize_edges();
        assert_eq!(back[0], canonical);
        assert_eq!(back[1..], graphs[1..]);
    }

    #[test]
    fn reader_reports_the_failing_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graphs.jsonl");
        std::fs::write(
            &path,
            concat!(
                r#"{"num_nodes":2,"edges":[[0,1]],"features":[[1.0],[1.0]],"target":[0.0]}"#,
                "\n",
                r#"{"num_nodes":2,"edges":[[0,5]],"features":[[1.0],[1.0]],"target":[0.0]}"#,
                "\n",
            ),
        )
        .unwrap();
        match read_graphs(&path) {
            Err(DatasetError::Graph { line: 2, source }) => {
                assert_eq!(source, GraphError::EdgeOutOfRange(0, 5, 2));
            }
            other => panic!("expected line-2 graph error, got {other:?}"),
        }

        std::fs::write(&path, "not json\n").unwrap();
        assert!(matches!(read_graphs(&path), Err(DatasetError::Json { line: 1, .. })));
    }

    #[test]
    fn encoding_sidecar_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.jsonl");
        let (graphs, _) = multiplicative_task(3, 5, 0.6, 2, 4, 5).unwrap();
        let encodings: Vec<EncodingMatrix> =
            graphs.iter().map(|g| rw_diag_encoding(&g.adjacency(), 4)).collect();
        write_encodings(&path, &encodings).unwrap();
        assert_eq!(read_encodings(&path).unwrap(), encodings);
    }

    #[test]
    fn ragged_encoding_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.jsonl");
        std::fs::write(&path, r#"{"kind":"rw_diag","k":2,"rows":[[0.1,0.2],[0.3]]}"#).unwrap();
        assert!(matches!(
            read_encodings(&path),
            Err(DatasetError::RaggedEncoding { line: 1, row: 1, len: 1, k: 2 })
        ));
    }

    #[test]
    fn task_sidecar_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("task.json");
        let (_, task) = multiplicative_task(2, 5, 0.5, 3, 4, 7).unwrap();
        write_task(&path, &task).unwrap();
        assert_eq!(read_task(&path).unwrap(), task);
    }

    #[test]
    fn splits_cover_the_dataset_without_overlap() {
        let s = split_dataset(100, 0.1, 0.2).unwrap();
        assert_eq!(s.train, 0..70);
        assert_eq!(s.val, 70..80);
        assert_eq!(s.test, 80..100);

        let tiny = split_dataset(3, 0.1, 0.1).unwrap();
        assert_eq!(tiny.train, 0..3);
        assert!(tiny.val.is_empty() && tiny.test.is_empty());

        assert!(split_dataset(0, 0.1, 0.1).is_err());
        assert!(split_dataset(10, 0.6, 0.5).is_err());
    }
}
