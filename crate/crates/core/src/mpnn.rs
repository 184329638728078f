//! GCN / GIN / SAGE message-passing layers over three projection
//! regimes: full dense, entangled sparse, and none.
//!
//! A layer is "aggregate, then project, then relu". Aggregation is a
//! constant matrix built from the graph — symmetrically normalized
//! adjacency with self-loops for GCN, `(1+ε)I + A` for GIN, neighbor
//! mean for SAGE's second channel — so the same projection code serves
//! all three. The full regime projects with one `d_hidden × d_hidden`
//! matrix; the sparse regime replaces it with `K` factor pairs
//! `(Wₖ, Qₖ)` of size `√d_hidden` each, applied as
//! `vec(Σₖ Wₖ · Mat(h) · Qₖᵀ)` — the map `Σₖ Wₖ ⊗ Qₖ`, cutting the
//! parameter count from `d⁴` to `2K·d²`. The none regime means the
//! model has no layer stack at all; it never reaches this module.
//!
//! SAGE carries two independent projections (self and neighbor mean),
//! each factorized on its own when sparse. Projections are bias-free in
//! every regime, keeping the `d⁴` versus `2K·d²` accounting exact.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::AdjacencyView;
use crate::linalg::DMat;
use crate::tensor::{perfect_sqrt, Tape, TensorError, Var};

/// Projection regime for the layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Full,
    Sparse { k: usize },
    None,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::Full => f.write_str("full"),
            Regime::Sparse { .. } => f.write_str("sparse"),
            Regime::None => f.write_str("none"),
        }
    }
}

/// Message-function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Gcn,
    Gin,
    Sage,
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LayerKind::Gcn => "gcn",
            LayerKind::Gin => "gin",
            LayerKind::Sage => "sage",
        })
    }
}

impl std::str::FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gcn" => Ok(LayerKind::Gcn),
            "gin" => Ok(LayerKind::Gin),
            "sage" => Ok(LayerKind::Sage),
            other => Err(format!("unknown layer kind '{other}' (gcn | gin | sage)")),
        }
    }
}

/// Why projection parameters could not be built.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MpnnError {
    #[error("sparse regime needs a perfect-square d_hidden, got {0}")]
    NotSquareHidden(usize),
    #[error("sparse regime needs K >= 1")]
    ZeroFactors,
    #[error("regime none carries no projection parameters")]
    NoneRegime,
}

/// One projection: a dense map or its entangled factorization.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionParams {
    /// `d_hidden × d_hidden`.
    Full { w: DMat },
    /// K pairs of `d × d` factors with `d = √d_hidden`.
    Sparse { ws: Vec<DMat>, qs: Vec<DMat> },
}

/// Tape handles for one projection.
pub enum ProjectionVars {
    Full(Var),
    Sparse { ws: Vec<Var>, qs: Vec<Var> },
}

impl ProjectionParams {
    /// Draws fresh parameters. Full maps use `uniform(±1/√d_hidden)`;
    /// sparse factors use `uniform(±1/√d)` per factor so the composite
    /// map's scale matches the dense map's at K = 1. Draw order (W then
    /// Q, pair by pair) is part of the determinism contract.
    pub fn init(regime: Regime, d_hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self, MpnnError> {
        match regime {
            Regime::Full => {
                let bound = 1.0 / (d_hidden as f64).sqrt();
                Ok(ProjectionParams::Full { w: uniform_mat(rng, d_hidden, d_hidden, bound) })
            }
            Regime::Sparse { k } => {
                if k == 0 {
                    return Err(MpnnError::ZeroFactors);
                }
                let d = perfect_sqrt(d_hidden).ok_or(MpnnError::NotSquareHidden(d_hidden))?;
                let bound = 1.0 / (d as f64).sqrt();
                let mut ws = Vec::with_capacity(k);
                let mut qs = Vec::with_capacity(k);
                for _ in 0..k {
                    ws.push(uniform_mat(rng, d, d, bound));
                    qs.push(uniform_mat(rng, d, d, bound));
                }
                Ok(ProjectionParams::Sparse { ws, qs })
            }
            Regime::None => Err(MpnnError::NoneRegime),
        }
    }

    /// Scalar parameters: `d_hidden²` dense, `2K·d²` sparse.
    pub fn param_count(&self) -> usize {
        match self {
            ProjectionParams::Full { w } => w.numel(),
            ProjectionParams::Sparse { ws, qs } => {
                ws.iter().chain(qs).map(DMat::numel).sum()
            }
        }
    }

    fn bind(&self, tape: &mut Tape) -> ProjectionVars {
        match self {
            ProjectionParams::Full { w } => ProjectionVars::Full(tape.leaf(w.clone())),
            ProjectionParams::Sparse { ws, qs } => ProjectionVars::Sparse {
                ws: ws.iter().map(|m| tape.leaf(m.clone())).collect(),
                qs: qs.iter().map(|m| tape.leaf(m.clone())).collect(),
            },
        }
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a DMat)) {
        match self {
            ProjectionParams::Full { w } => f(format!("{prefix}.w"), w),
            ProjectionParams::Sparse { ws, qs } => {
                for (k, (w, q)) in ws.iter().zip(qs).enumerate() {
                    f(format!("{prefix}.w{k}"), w);
                    f(format!("{prefix}.q{k}"), q);
                }
            }
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut DMat)) {
        match self {
            ProjectionParams::Full { w } => f(format!("{prefix}.w"), w),
            ProjectionParams::Sparse { ws, qs } => {
                for (k, (w, q)) in ws.iter_mut().zip(qs).enumerate() {
                    f(format!("{prefix}.w{k}"), w);
                    f(format!("{prefix}.q{k}"), q);
                }
            }
        }
    }
}

pub(crate) fn uniform_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> DMat {
    DMat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect())
}

/// Applies the projection: `H · Wᵀ` dense, the entangled map sparse.
pub fn project(tape: &mut Tape, p: &ProjectionVars, h: Var) -> Result<Var, TensorError> {
    match p {
        ProjectionVars::Full(w) => tape.matmul_nt(h, *w),
        ProjectionVars::Sparse { ws, qs } => tape.factored_project(h, ws, qs),
    }
}

/// One message-passing layer. GIN's ε is a fixed hyperparameter, not a
/// trained scalar. SAGE stores a second projection for the neighbor
/// mean; the other kinds leave it empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub kind: LayerKind,
    pub proj: ProjectionParams,
    pub neighbor_proj: Option<ProjectionParams>,
    pub epsilon: f64,
}

/// Tape handles for one layer.
pub struct LayerVars {
    pub kind: LayerKind,
    pub proj: ProjectionVars,
    pub neighbor_proj: Option<ProjectionVars>,
    pub epsilon: f64,
}

impl LayerParams {
    /// Draws one layer's parameters: the main projection, then — for
    /// SAGE — the neighbor projection.
    pub fn init(
        kind: LayerKind,
        regime: Regime,
        d_hidden: usize,
        epsilon: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, MpnnError> {
        let proj = ProjectionParams::init(regime, d_hidden, rng)?;
        let neighbor_proj = match kind {
            LayerKind::Sage => Some(ProjectionParams::init(regime, d_hidden, rng)?),
            LayerKind::Gcn | LayerKind::Gin => None,
        };
        Ok(LayerParams { kind, proj, neighbor_proj, epsilon })
    }

    pub fn bind(&self, tape: &mut Tape) -> LayerVars {
        LayerVars {
            kind: self.kind,
            proj: self.proj.bind(tape),
            neighbor_proj: self.neighbor_proj.as_ref().map(|p| p.bind(tape)),
            epsilon: self.epsilon,
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a DMat)) {
        self.proj.visit(&format!("{prefix}.self"), f);
        if let Some(p) = &self.neighbor_proj {
            p.visit(&format!("{prefix}.nbr"), f);
        }
    }

    pub fn visit_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut DMat)) {
        self.proj.visit_mut(&format!("{prefix}.self"), f);
        if let Some(p) = &mut self.neighbor_proj {
            p.visit_mut(&format!("{prefix}.nbr"), f);
        }
    }

    /// Scalar parameters across all projections in the layer.
    pub fn param_count(&self) -> usize {
        self.proj.param_count()
            + self.neighbor_proj.as_ref().map_or(0, ProjectionParams::param_count)
    }
}

/// `D̂^{-1/2} Â D̂^{-1/2}` with `Â = A + I`.
pub fn gcn_norm_matrix(adj: &AdjacencyView) -> DMat {
    let n = adj.num_nodes();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / ((adj.degree(i) + 1) as f64).sqrt()).collect();
    let mut m = DMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = inv_sqrt[i] * inv_sqrt[i];
        for &j in adj.neighbors(i) {
            m[(i, j)] = inv_sqrt[i] * inv_sqrt[j];
        }
    }
    m
}

/// `(1 + ε) I + A`.
pub fn gin_agg_matrix(adj: &AdjacencyView, epsilon: f64) -> DMat {
    let n = adj.num_nodes();
    let mut m = DMat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0 + epsilon;
        for &j in adj.neighbors(i) {
            m[(i, j)] = 1.0;
        }
    }
    m
}

/// Row i averages the neighbors of node i; isolated nodes get a zero
/// row.
pub fn mean_agg_matrix(adj: &AdjacencyView) -> DMat {
    let n = adj.num_nodes();
    let mut m = DMat::zeros(n, n);
    for i in 0..n {
        let d = adj.degree(i);
        if d == 0 {
            continue;
        }
        let w = 1.0 / d as f64;
        for &j in adj.neighbors(i) {
            m[(i, j)] = w;
        }
    }
    m
}

/// Applies one layer: aggregate with the kind's constant matrix,
/// project, relu.
pub fn layer_forward(
    tape: &mut Tape,
    layer: &LayerVars,
    h: Var,
    adj: &AdjacencyView,
) -> Result<Var, TensorError> {
    let pre = match layer.kind {
        LayerKind::Gcn => {
            let agg = tape.leaf(gcn_norm_matrix(adj));
            let mixed = tape.matmul(agg, h)?;
            project(tape, &layer.proj, mixed)?
        }
        LayerKind::Gin => {
            let agg = tape.leaf(gin_agg_matrix(adj, layer.epsilon));
            let mixed = tape.matmul(agg, h)?;
            project(tape, &layer.proj, mixed)?
        }
        LayerKind::Sage => {
            let own = project(tape, &layer.proj, h)?;
            let agg = tape.leaf(mean_agg_matrix(adj));
            let mixed = tape.matmul(agg, h)?;
            let nbr_vars = layer
                .neighbor_proj
                .as_ref()
                .expect("sage layer is built with a neighbor projection");
            let nbr = project(tape, nbr_vars, mixed)?;
            tape.add(own, nbr)?
        }
    };
    Ok(tape.relu(pre))
}

/// Dense `d² × d²` matrix `Σₖ Wₖ ⊗ Qₖ` for a sparse projection — the
/// oracle the sparse path is checked against.
pub fn kron_sum_matrix(ws: &[DMat], qs: &[DMat]) -> DMat {
    let d = ws[0].rows();
    let mut big = DMat::zeros(d * d, d * d);
    for (w, q) in ws.iter().zip(qs) {
        for i in 0..d {
            for j in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        big[(i * d + a, j * d + b)] += w[(i, j)] * q[(a, b)];
                    }
                }
            }
        }
    }
    big
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;

    fn triangle_adj() -> AdjacencyView {
        Graph::with_unit_features(3, vec![(0, 1), (1, 2), (0, 2)]).adjacency()
    }

    fn single_node_adj() -> AdjacencyView {
        Graph::with_unit_features(1, vec![]).adjacency()
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMat {
        uniform_mat(rng, r, c, 1.0)
    }

    fn run_project(p: &ProjectionParams, h: &DMat) -> DMat {
        let mut tape = Tape::new();
        let vars = p.bind(&mut tape);
        let hv = tape.leaf(h.clone());
        let out = project(&mut tape, &vars, hv).unwrap();
        tape.value(out).clone()
    }

    fn run_layer(layer: &LayerParams, h: &DMat, adj: &AdjacencyView) -> DMat {
        let mut tape = Tape::new();
        let vars = layer.bind(&mut tape);
        let hv = tape.leaf(h.clone());
        let out = layer_forward(&mut tape, &vars, hv, adj).unwrap();
        tape.value(out).clone()
    }

    fn identity_layer(kind: LayerKind, d_hidden: usize, epsilon: f64) -> LayerParams {
        LayerParams {
            kind,
            proj: ProjectionParams::Full { w: DMat::identity(d_hidden) },
            neighbor_proj: match kind {
                LayerKind::Sage => {
                    Some(ProjectionParams::Full { w: DMat::identity(d_hidden) })
                }
                _ => None,
            },
            epsilon,
        }
    }

    #[test]
    fn sparse_identity_pair_is_identity_map() {
        let p = ProjectionParams::Sparse {
            ws: vec![DMat::identity(3)],
            qs: vec![DMat::identity(3)],
        };
        let mut rng = crate::rng::stream(1, "mpnn-test");
        let h = rand_mat(&mut rng, 4, 9);
        assert_eq!(run_project(&p, &h), h);
    }

    #[test]
    fn sparse_projection_matches_kron_sum_oracle() {
        let mut rng = crate::rng::stream(2, "mpnn-test");
        let p = ProjectionParams::init(Regime::Sparse { k: 3 }, 16, &mut rng).unwrap();
        let h = rand_mat(&mut rng, 5, 16);
        let sparse = run_project(&p, &h);

        let ProjectionParams::Sparse { ws, qs } = &p else { unreachable!() };
        let dense = h.matmul_nt(&kron_sum_matrix(ws, qs));
        for (a, b) in sparse.data().iter().zip(dense.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn sparse_projection_of_kron_row_is_outer_product_sum() {
        let mut rng = crate::rng::stream(3, "mpnn-test");
        let d = 3;
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut h = DMat::zeros(1, d * d);
        for p in 0..d {
            for q in 0..d {
                h[(0, p * d + q)] = a[p] * b[q];
            }
        }
        let params = ProjectionParams::init(Regime::Sparse { k: 2 }, d * d, &mut rng).unwrap();
        let out = run_project(&params, &h);

        let ProjectionParams::Sparse { ws, qs } = &params else { unreachable!() };
        let av = DMat::from_vec(d, 1, a);
        let bv = DMat::from_vec(d, 1, b);
        let mut want = DMat::zeros(d, d);
        for (w, q) in ws.iter().zip(qs) {
            let wa = w.matmul(&av);
            let qb = q.matmul(&bv);
            want.add_assign(&wa.matmul_nt(&qb));
        }
        for p in 0..d {
            for q in 0..d {
                assert_abs_diff_eq!(out[(0, p * d + q)], want[(p, q)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gcn_isolated_node_uses_only_the_self_loop() {
        let layer = identity_layer(LayerKind::Gcn, 2, 0.0);
        let h = DMat::from_vec(1, 2, vec![0.7, -0.3]);
        let out = run_layer(&layer, &h, &single_node_adj());
        assert_eq!(out.data(), &[0.7, 0.0]);
    }

    #[test]
    fn gcn_constant_features_stay_constant_on_regular_graphs() {
        let layer = identity_layer(LayerKind::Gcn, 2, 0.0);
        let h = DMat::from_vec(3, 2, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        let out = run_layer(&layer, &h, &triangle_adj());
        for i in 0..3 {
            for (got, want) in out.row(i).iter().zip(out.row(0)) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-15);
            }
        }
        // Normalized aggregation of equal rows is the row itself.
        for &x in out.data() {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gin_counts_self_plus_neighbors() {
        let layer = identity_layer(LayerKind::Gin, 2, 0.0);
        let h = DMat::from_vec(3, 2, vec![1.0; 6]);
        let out = run_layer(&layer, &h, &triangle_adj());
        for &x in out.data() {
            assert_eq!(x, 3.0);
        }
    }

    #[test]
    fn gin_epsilon_minus_one_zeroes_isolated_nodes() {
        let layer = identity_layer(LayerKind::Gin, 2, -1.0);
        let h = DMat::from_vec(1, 2, vec![5.0, -2.0]);
        let out = run_layer(&layer, &h, &single_node_adj());
        assert_eq!(out.data(), &[0.0, 0.0]);
    }

    #[test]
    fn sage_isolated_node_sees_only_itself() {
        let layer = identity_layer(LayerKind::Sage, 2, 0.0);
        let h = DMat::from_vec(1, 2, vec![0.4, -0.9]);
        let out = run_layer(&layer, &h, &single_node_adj());
        assert_eq!(out.data(), &[0.4, 0.0]);
    }

    #[test]
    fn sage_identity_projections_double_constant_features() {
        let layer = identity_layer(LayerKind::Sage, 2, 0.0);
        let h = DMat::from_vec(3, 2, vec![1.0; 6]);
        let out = run_layer(&layer, &h, &triangle_adj());
        for &x in out.data() {
            assert_abs_diff_eq!(x, 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn every_kind_matches_its_dense_oracle_in_sparse_regime() {
        let mut rng = crate::rng::stream(7, "mpnn-test");
        let d_hidden = 9;
        let adj = Graph::with_unit_features(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]).adjacency();
        let h = rand_mat(&mut rng, 4, d_hidden);
        for kind in [LayerKind::Gcn, LayerKind::Gin, LayerKind::Sage] {
            let sparse =
                LayerParams::init(kind, Regime::Sparse { k: 2 }, d_hidden, 0.5, &mut rng).unwrap();
            let densify = |p: &ProjectionParams| -> ProjectionParams {
                let ProjectionParams::Sparse { ws, qs } = p else { unreachable!() };
                ProjectionParams::Full { w: kron_sum_matrix(ws, qs) }
            };
            let dense = LayerParams {
                kind,
                proj: densify(&sparse.proj),
                neighbor_proj: sparse.neighbor_proj.as_ref().map(densify),
                epsilon: sparse.epsilon,
            };
            let a = run_layer(&sparse, &h, &adj);
            let b = run_layer(&dense, &h, &adj);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn param_counts_match_the_reduction_arithmetic() {
        let mut rng = crate::rng::stream(8, "mpnn-test");
        let full = ProjectionParams::init(Regime::Full, 64, &mut rng).unwrap();
        assert_eq!(full.param_count(), 4096);

        let k1 = ProjectionParams::init(Regime::Sparse { k: 1 }, 64, &mut rng).unwrap();
        assert_eq!(k1.param_count(), 128);
        assert_eq!(full.param_count() / k1.param_count(), 32); // d²/2K with d = 8

        let k10 = ProjectionParams::init(Regime::Sparse { k: 10 }, 64, &mut rng).unwrap();
        assert_eq!(k10.param_count(), 1280);

        let sage =
            LayerParams::init(LayerKind::Sage, Regime::Sparse { k: 10 }, 64, 0.0, &mut rng)
                .unwrap();
        assert_eq!(sage.param_count(), 2560);
    }

    #[test]
    fn sparse_k_embeds_into_k_plus_one_with_a_zero_pair() {
        let mut rng = crate::rng::stream(9, "mpnn-test");
        let d_hidden = 9;
        let p = ProjectionParams::init(Regime::Sparse { k: 2 }, d_hidden, &mut rng).unwrap();
        let ProjectionParams::Sparse { ws, qs } = &p else { unreachable!() };
        let mut ws3 = ws.clone();
        let mut qs3 = qs.clone();
        ws3.push(DMat::zeros(3, 3));
        qs3.push(DMat::zeros(3, 3));
        let p3 = ProjectionParams::Sparse { ws: ws3, qs: qs3 };

        let h = rand_mat(&mut rng, 3, d_hidden);
        assert_eq!(run_project(&p, &h), run_project(&p3, &h));
    }

    #[test]
    fn basis_factor_pairs_reconstruct_any_dense_map() {
        // K = d² pairs (e_i e_jᵀ scaled by target blocks) rebuild an
        // arbitrary dense matrix exactly.
        let mut rng = crate::rng::stream(10, "mpnn-test");
        let d = 2;
        let target = rand_mat(&mut rng, d * d, d * d);
        let mut ws = Vec::new();
        let mut qs = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let mut w = DMat::zeros(d, d);
                w[(i, j)] = 1.0;
                // Block (i·d.., j·d..) of the target becomes Q.
                let mut q = DMat::zeros(d, d);
                for a in 0..d {
                    for b in 0..d {
                        q[(a, b)] = target[(i * d + a, j * d + b)];
                    }
                }
                ws.push(w);
                qs.push(q);
            }
        }
        let rebuilt = kron_sum_matrix(&ws, &qs);
        assert_eq!(rebuilt, target);
    }

    #[test]
    fn layers_are_permutation_equivariant() {
        use crate::graph::permute_graph;
        let mut rng = crate::rng::stream(11, "mpnn-test");
        let d_hidden = 4;
        let g = Graph::with_unit_features(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)]);
        let perm = vec![2usize, 4, 0, 3, 1];
        let pg = permute_graph(&g, &perm).unwrap();
        let h = rand_mat(&mut rng, 5, d_hidden);
        let mut ph = DMat::zeros(5, d_hidden);
        for i in 0..5 {
            ph.row_mut(perm[i]).copy_from_slice(h.row(i));
        }

        for kind in [LayerKind::Gcn, LayerKind::Gin, LayerKind::Sage] {
            for regime in [Regime::Full, Regime::Sparse { k: 2 }] {
                let layer = LayerParams::init(kind, regime, d_hidden, 0.3, &mut rng).unwrap();
                let base = run_layer(&layer, &h, &g.adjacency());
                let moved = run_layer(&layer, &ph, &pg.adjacency());
                for i in 0..5 {
                    for (a, b) in base.row(i).iter().zip(moved.row(perm[i])) {
                        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn init_rejects_bad_configurations() {
        let mut rng = crate::rng::stream(12, "mpnn-test");
        assert_eq!(
            ProjectionParams::init(Regime::Sparse { k: 2 }, 8, &mut rng),
            Err(MpnnError::NotSquareHidden(8))
        );
        assert_eq!(
            ProjectionParams::init(Regime::Sparse { k: 0 }, 9, &mut rng),
            Err(MpnnError::ZeroFactors)
        );
        assert_eq!(
            ProjectionParams::init(Regime::None, 9, &mut rng),
            Err(MpnnError::NoneRegime)
        );
    }
}
