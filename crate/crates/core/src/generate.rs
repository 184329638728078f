//! Synthetic graph generators and the multiplicative regression task.
//!
//! The multiplicative task is built so that the target genuinely couples
//! features to structure: a fixed random bilinear map `B` is drawn once
//! per dataset, and each graph's scalar target is `Σᵢ xᵢᵀ B pᵢ` over its
//! own nodes, where `xᵢ` is the node's feature row and `pᵢ` its
//! random-walk diagonal encoding. Predicting it requires the product of
//! the two channels, not either alone.
//!
//! Everything is deterministic given the seed; each generator draws from
//! its own labeled stream.

use rand::Rng;

use crate::encoding::rw_diag_encoding;
use crate::graph::Graph;
use crate::linalg::DMat;

/// Why a generator rejected its parameters.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GenerateError {
    #[error("a simple cycle needs at least 3 nodes, got {0}")]
    CycleTooShort(usize),
    #[error("edge probability must lie in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("{0} must be positive")]
    ZeroParam(&'static str),
}

/// Cycle graph `0 – 1 – … – (n−1) – 0`.
pub fn cycle(n: usize) -> Result<Graph, GenerateError> {
    if n < 3 {
        return Err(GenerateError::CycleTooShort(n));
    }
    let mut g = Graph::with_unit_features(n, (0..n).map(|i| (i, (i + 1) % n)).collect());
    g.canonicalize_edges();
    Ok(g)
}

/// G(n, p): each of the `n(n−1)/2` node pairs becomes an edge with
/// probability `p` (one draw per pair, in lexicographic pair order).
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph, GenerateError> {
    if n == 0 {
        return Err(GenerateError::ZeroParam("n"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GenerateError::BadProbability(p));
    }
    let mut rng = crate::rng::stream(seed, "erdos-renyi");
    Ok(erdos_renyi_with(n, p, &mut rng))
}

fn erdos_renyi_with(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::with_unit_features(n, edges)
}

/// Two cycles of lengths `a` and `b` sharing the single edge `(0, 1)`:
/// `a + b − 2` nodes, `a + b − 1` edges. `fused_cycles(6, 6)` is the
/// fused-hexagons topology of [`crate::graph::figure1_pair`]'s left
/// graph.
pub fn fused_cycles(a: usize, b: usize) -> Result<Graph, GenerateError> {
    if a < 3 {
        return Err(GenerateError::CycleTooShort(a));
    }
    if b < 3 {
        return Err(GenerateError::CycleTooShort(b));
    }
    let mut edges: Vec<(usize, usize)> = (0..a).map(|i| (i, (i + 1) % a)).collect();
    // Second cycle: 0 → a → a+1 → … → a+b−3 → 1, closing through the
    // shared edge (0, 1).
    let fresh = b - 2;
    edges.push((0, a));
    for t in 0..fresh - 1 {
        edges.push((a + t, a + t + 1));
    }
    edges.push((a + fresh - 1, 1));
    let mut g = Graph::with_unit_features(a + fresh, edges);
    g.canonicalize_edges();
    Ok(g)
}

/// The fixed bilinear ground-truth map of a multiplicative dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearTask {
    pub d_in: usize,
    /// Random-walk encoding width the targets were computed from.
    pub k: usize,
    /// `d_in × k` coefficients.
    pub b: DMat,
}

impl BilinearTask {
    /// Draws `B` with entries `uniform(±1)` from its own stream.
    pub fn draw(d_in: usize, k: usize, seed: u64) -> Result<Self, GenerateError> {
        if d_in == 0 {
            return Err(GenerateError::ZeroParam("d_in"));
        }
        if k == 0 {
            return Err(GenerateError::ZeroParam("k"));
        }
        let mut rng = crate::rng::stream(seed, "bilinear-task");
        let b = DMat::from_vec(
            d_in,
            k,
            (0..d_in * k).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        Ok(BilinearTask { d_in, k, b })
    }

    /// `Σᵢ xᵢᵀ B pᵢ` for one graph: features times `B`, contracted
    /// against the graph's own RW-diagonal encoding.
    pub fn target(&self, g: &Graph) -> f64 {
        let enc = rw_diag_encoding(&g.adjacency(), self.k);
        let xb = g.feature_matrix().matmul(&self.b);
        xb.data().iter().zip(enc.rows.data()).map(|(a, p)| a * p).sum()
    }
}

/// A generated multiplicative dataset: Erdős–Rényi graphs with random
/// features and scalar targets `Σᵢ xᵢᵀ B pᵢ` from one shared `B`.
pub fn multiplicative_task(
    count: usize,
    n: usize,
    p: f64,
    d_in: usize,
    k: usize,
    seed: u64,
) -> Result<(Vec<Graph>, BilinearTask), GenerateError> {
    if count == 0 {
        return Err(GenerateError::ZeroParam("count"));
    }
    if n == 0 {
        return Err(GenerateError::ZeroParam("n"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GenerateError::BadProbability(p));
    }
    let task = BilinearTask::draw(d_in, k, seed)?;
    let mut rng = crate::rng::stream(seed, "multiplicative-task");
    let mut graphs = Vec::with_capacity(count);
    for _ in 0..count {
        // Per graph: edges first, then feature rows, all on one stream.
        let mut g = erdos_renyi_with(n, p, &mut rng);
        g.features = (0..n)
            .map(|_| (0..d_in).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        g.canonicalize_edges();
        g.target = vec![task.target(&g)];
        graphs.push(g);
    }
    Ok((graphs, task))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::figure1_pair;
    use crate::wl::brute_force_isomorphic;

    #[test]
    fn cycle3_is_the_triangle() {
        let g = cycle(3).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(cycle(2), Err(GenerateError::CycleTooShort(2)));
    }

    #[test]
    fn erdos_renyi_edge_probability_extremes() {
        let empty = erdos_renyi(8, 0.0, 1).unwrap();
        assert!(empty.edges.is_empty());
        let complete = erdos_renyi(8, 1.0, 1).unwrap();
        assert_eq!(complete.edges.len(), 8 * 7 / 2);
        assert_eq!(
            erdos_renyi(8, 1.5, 1),
            Err(GenerateError::BadProbability(1.5))
        );
    }

    #[test]
    fn generators_are_deterministic_per_seed() {
        assert_eq!(erdos_renyi(12, 0.4, 9).unwrap(), erdos_renyi(12, 0.4, 9).unwrap());
        assert_ne!(erdos_renyi(12, 0.4, 9).unwrap(), erdos_renyi(12, 0.4, 10).unwrap());

        let (a, ta) = multiplicative_task(4, 9, 0.3, 3, 5, 2).unwrap();
        let (b, tb) = multiplicative_task(4, 9, 0.3, 3, 5, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn generated_graphs_validate() {
        for seed in 0..5 {
            erdos_renyi(10, 0.5, seed).unwrap().validate().unwrap();
        }
        let (graphs, _) = multiplicative_task(6, 8, 0.4, 2, 3, 11).unwrap();
        for g in &graphs {
            g.validate().unwrap();
            assert_eq!(g.feature_dim(), 2);
            assert_eq!(g.target.len(), 1);
        }
    }

    #[test]
    fn fused_hexagons_match_the_figure1_left_topology() {
        let g = fused_cycles(6, 6).unwrap();
        assert_eq!(g.num_nodes, 10);
        assert_eq!(g.edges.len(), 11);
        let mut degrees = g.degree_sequence();
        degrees.sort_unstable();
        assert_eq!(&degrees[..8], &[2; 8]);
        assert_eq!(&degrees[8..], &[3, 3]);

        let (left, right) = figure1_pair();
        assert!(brute_force_isomorphic(&g, &left));
        assert!(!brute_force_isomorphic(&g, &right));
    }

    #[test]
    fn fused_triangles_form_the_diamond() {
        let g = fused_cycles(3, 3).unwrap();
        assert_eq!(g.num_nodes, 4);
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]);
    }

    #[test]
    fn multiplicative_target_matches_loop_arithmetic() {
        let (graphs, task) = multiplicative_task(3, 7, 0.5, 2, 4, 13).unwrap();
        for g in &graphs {
            let enc = rw_diag_encoding(&g.adjacency(), task.k);
            let mut want = 0.0;
            for i in 0..g.num_nodes {
                for a in 0..task.d_in {
                    for b in 0..task.k {
                        want += g.features[i][a] * task.b[(a, b)] * enc.rows[(i, b)];
                    }
                }
            }
            assert!((g.target[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn targets_depend_on_both_channels() {
        // Re-deriving targets after zeroing features or encodings (via
        // an edgeless graph) changes them, so neither channel suffices.
        let (graphs, task) = multiplicative_task(5, 7, 0.6, 2, 4, 17).unwrap();
        let g = graphs
            .iter()
            .find(|g| g.target[0].abs() > 1e-6)
            .expect("some nonzero target");

        let mut zero_features = g.clone();
        for row in &mut zero_features.features {
            row.fill(0.0);
        }
        assert_eq!(task.target(&zero_features), 0.0);

        let mut edgeless = g.clone();
        edgeless.edges.clear();
        assert_eq!(task.target(&edgeless), 0.0);
    }
}
