//! Graph container, validation, CSR adjacency, and node relabeling.
//!
//! Graphs are simple and undirected: edges are stored as pairs, kept in
//! canonical form `(min, max)`, sorted and deduplicated. Every graph
//! carries per-node feature rows and a graph-level target vector,
//! because the training pipeline always consumes all three together.
//!
//! [`figure1_pair`] builds the canonical counterexample used throughout
//! the tests: two 10-node graphs — fused hexagons sharing an edge, and
//! two pentagons joined by a bridge — that color refinement cannot tell
//! apart even though they are not isomorphic.

use serde::{Deserialize, Serialize};

/// Why a graph failed validation.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("edge ({0}, {1}) references a node >= num_nodes {2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("features has {got} rows, expected num_nodes {expected}")]
    FeatureRowCount { got: usize, expected: usize },
    #[error("feature row {node} has {len} entries, expected {expected}")]
    RaggedFeatures { node: usize, len: usize, expected: usize },
    #[error("permutation of length {len} is not a bijection on {num_nodes} nodes")]
    BadPermutation { len: usize, num_nodes: usize },
}

/// Simple undirected graph with node features and a graph-level target
/// vector (one entry per regression output or binary label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub num_nodes: usize,
    /// Undirected edges; canonical form is `(min, max)`, sorted, deduped.
    pub edges: Vec<(usize, usize)>,
    /// One feature row per node, all rows the same length.
    pub features: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl Graph {
    /// Builds a graph with the given structure, constant feature `1.0`,
    /// and a zero scalar target.
    pub fn with_unit_features(num_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        Graph {
            num_nodes,
            edges,
            features: vec![vec![1.0]; num_nodes],
            target: vec![0.0],
        }
    }

    /// Number of entries in each feature row (0 for an empty graph).
    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Node features as an `n × d` matrix, rows in node order.
    pub fn feature_matrix(&self) -> crate::linalg::DMat {
        let d = self.feature_dim();
        let mut data = Vec::with_capacity(self.num_nodes * d);
        for row in &self.features {
            data.extend_from_slice(row);
        }
        crate::linalg::DMat::from_vec(self.num_nodes, d, data)
    }

    /// Checks structural and shape invariants. Edge order is not
    /// required to be canonical, but duplicates (in either orientation)
    /// and self-loops are rejected.
    pub fn validate(&self) -> Result<(), GraphError> {
        for &(u, v) in &self.edges {
            if u >= self.num_nodes || v >= self.num_nodes {
                return Err(GraphError::EdgeOutOfRange(u, v, self.num_nodes));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
        }
        let mut seen: Vec<(usize, usize)> =
            self.edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        seen.sort_unstable();
        for w in seen.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        if self.features.len() != self.num_nodes {
            return Err(GraphError::FeatureRowCount {
                got: self.features.len(),
                expected: self.num_nodes,
            });
        }
        let d = self.feature_dim();
        for (node, row) in self.features.iter().enumerate() {
            if row.len() != d {
                return Err(GraphError::RaggedFeatures { node, len: row.len(), expected: d });
            }
        }
        Ok(())
    }

    /// Rewrites edges into canonical form: `(min, max)`, sorted, deduped.
    pub fn canonicalize_edges(&mut self) {
        for e in &mut self.edges {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        self.edges.sort_unstable();
        self.edges.dedup();
    }

    /// CSR adjacency over the current edge list.
    pub fn adjacency(&self) -> AdjacencyView {
        AdjacencyView::build(self.num_nodes, &self.edges)
    }

    /// Sorted degree sequence.
    pub fn degree_sequence(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut degs: Vec<usize> = (0..self.num_nodes).map(|i| adj.degree(i)).collect();
        degs.sort_unstable();
        degs
    }
}

/// Compressed sparse rows over an undirected edge list: each edge
/// appears in both endpoint's neighbor lists, and lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyView {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl AdjacencyView {
    /// Builds the CSR structure. Endpoints must be in range; call
    /// [`Graph::validate`] first for untrusted input.
    pub fn build(num_nodes: usize, edges: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for i in 0..num_nodes {
            offsets.push(offsets[i] + degree[i]);
        }
        let mut neighbors = vec![0usize; offsets[num_nodes]];
        let mut cursor = offsets.clone();
        for &(u, v) in edges {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for i in 0..num_nodes {
            neighbors[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        AdjacencyView { offsets, neighbors }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Sorted neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Relabels nodes: old node `i` becomes `perm[i]`. Feature rows move
/// with their nodes, edges are re-canonicalized, the target is kept.
pub fn permute_graph(g: &Graph, perm: &[usize]) -> Result<Graph, GraphError> {
    if perm.len() != g.num_nodes {
        return Err(GraphError::BadPermutation { len: perm.len(), num_nodes: g.num_nodes });
    }
    let mut seen = vec![false; g.num_nodes];
    for &p in perm {
        if p >= g.num_nodes || seen[p] {
            return Err(GraphError::BadPermutation { len: perm.len(), num_nodes: g.num_nodes });
        }
        seen[p] = true;
    }

    let edges = g.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
    let mut features = vec![Vec::new(); g.num_nodes];
    for (i, row) in g.features.iter().enumerate() {
        features[perm[i]] = row.clone();
    }
    let mut out = Graph { num_nodes: g.num_nodes, edges, features, target: g.target.clone() };
    out.canonicalize_edges();
    Ok(out)
}

/// The classic 1-WL blind spot on 10 nodes: two hexagons sharing an
/// edge versus two pentagons joined by a bridge. Both are 2-regular
/// except for the two degree-3 junction nodes, and color refinement
/// stabilizes to the same histogram on each; only the left graph is
/// bipartite, so diagonal random-walk encodings separate them.
pub fn figure1_pair() -> (Graph, Graph) {
    // Hexagons 0-1-2-3-4-5 and 5-4-6-7-8-9 share the edge (4, 5).
    let fused_hexagons = Graph::with_unit_features(
        10,
        vec![
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (0, 5),
            (4, 6),
            (6, 7),
            (7, 8),
            (8, 9),
            (5, 9),
        ],
    );
    // Pentagons 0-1-2-3-4 and 5-6-7-8-9 joined by the bridge (4, 5).
    let bridged_pentagons = Graph::with_unit_features(
        10,
        vec![
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (0, 4),
            (5, 6),
            (6, 7),
            (7, 8),
            (8, 9),
            (5, 9),
            (4, 5),
        ],
    );
    (fused_hexagons, bridged_pentagons)
}
