//! Structural node encodings: random-walk return probabilities and
//! Laplacian eigenvector coordinates.
//!
//! The random-walk operator is `R = A D⁻¹`, taken exactly in that
//! (column-stochastic) orientation; its diagonal powers agree with the
//! row-stochastic convention up to diagonal conjugation, so the encoding
//! does not depend on the choice. A degree-0 node gets a zero column —
//! no walk leaves it, so every return probability is 0.
//!
//! Laplacian encodings read node coordinates off the eigenvectors of
//! `L = D − A`, ascending by eigenvalue, skipping the trivial constant
//! eigenvector by default. Both choices can be flipped via
//! [`LapEigOptions`] for the descending / constant-included readings.

use serde::{Deserialize, Serialize};

use crate::graph::AdjacencyView;
use crate::linalg::{symmetric_eig, DMat, EigenError};

/// Default number of random-walk steps.
pub const DEFAULT_RW_K: usize = 20;

/// Which family an [`EncodingMatrix`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    RwDiag,
    LaplacianEig,
}

/// Per-node structural encodings: row `i` encodes node `i` in `k` reals.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMatrix {
    pub kind: EncodingKind,
    pub k: usize,
    /// `num_nodes × k`.
    pub rows: DMat,
}

/// Random-walk transition matrix `R = A D⁻¹`: entry `(i, j)` is the
/// probability of stepping from `j` to `i`.
pub fn rw_transition(adj: &AdjacencyView) -> DMat {
    let n = adj.num_nodes();
    let mut r = DMat::zeros(n, n);
    for j in 0..n {
        let d = adj.degree(j);
        if d == 0 {
            continue;
        }
        let p = 1.0 / d as f64;
        for &i in adj.neighbors(j) {
            r[(i, j)] = p;
        }
    }
    r
}

/// Row `i` = `[R_ii, (R²)_ii, …, (R^k)_ii]`, by iterated dense
/// multiplication.
pub fn rw_diag_encoding(adj: &AdjacencyView, k: usize) -> EncodingMatrix {
    assert!(k >= 1, "rw_diag_encoding needs k >= 1");
    let n = adj.num_nodes();
    let r = rw_transition(adj);
    let mut rows = DMat::zeros(n, k);
    let mut power = r.clone();
    for t in 0..k {
        for i in 0..n {
            rows[(i, t)] = power[(i, i)];
        }
        if t + 1 < k {
            power = power.matmul(&r);
        }
    }
    EncodingMatrix { kind: EncodingKind::RwDiag, k, rows }
}

/// Graph Laplacian `L = D − A`.
pub fn laplacian(adj: &AdjacencyView) -> DMat {
    let n = adj.num_nodes();
    let mut l = DMat::zeros(n, n);
    for i in 0..n {
        l[(i, i)] = adj.degree(i) as f64;
        for &j in adj.neighbors(i) {
            l[(i, j)] = -1.0;
        }
    }
    l
}

/// Eigenvector selection for [`laplacian_eig_encoding_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LapEigOptions {
    /// Take eigenvectors from the high end of the spectrum first.
    pub descending: bool,
    /// Keep the lowest (trivial, constant on connected graphs)
    /// eigenvector instead of skipping it.
    pub include_constant: bool,
}

impl Default for LapEigOptions {
    fn default() -> Self {
        LapEigOptions { descending: false, include_constant: false }
    }
}

/// Laplacian eigenvector encoding with the default selection:
/// ascending, constant eigenvector skipped.
pub fn laplacian_eig_encoding(
    adj: &AdjacencyView,
    k: usize,
) -> Result<EncodingMatrix, EigenError> {
    laplacian_eig_encoding_with(adj, k, LapEigOptions::default())
}

/// Row `i` = coordinates of node `i` in the first `k` selected
/// eigenvectors. When the graph supplies fewer than `k`, trailing
/// columns are exactly zero.
pub fn laplacian_eig_encoding_with(
    adj: &AdjacencyView,
    k: usize,
    opts: LapEigOptions,
) -> Result<EncodingMatrix, EigenError> {
    assert!(k >= 1, "laplacian_eig_encoding needs k >= 1");
    let n = adj.num_nodes();
    let eig = symmetric_eig(&laplacian(adj))?;

    let mut selected: Vec<usize> = (0..n).collect();
    if !opts.include_constant && !selected.is_empty() {
        selected.remove(0);
    }
    if opts.descending {
        selected.reverse();
    }
    selected.truncate(k);

    let mut rows = DMat::zeros(n, k);
    for (col, &src) in selected.iter().enumerate() {
        for i in 0..n {
            rows[(i, col)] = eig.vectors[(i, src)];
        }
    }
    Ok(EncodingMatrix { kind: EncodingKind::LaplacianEig, k, rows })
}
