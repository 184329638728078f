//! 1-WL color refinement and a brute-force isomorphism oracle.
//!
//! Refinement starts from a uniform coloring and repeatedly replaces
//! each node's color with a canonical id for the pair (own color,
//! sorted multiset of neighbor colors). Canonical ids are the ranks of
//! the sorted distinct signatures of the round — not
//! first-appearance order, which depends on node numbering and would
//! make colorings incomparable across graphs. When two graphs are
//! compared, one shared rank table covers both, which is equivalent to
//! refining their disjoint union.
//!
//! [`brute_force_isomorphic`] settles what refinement cannot: an exact
//! backtracking search over degree-compatible node mappings, feasible
//! at the graph sizes used here.

use std::collections::BTreeMap;

use crate::graph::{AdjacencyView, Graph};

/// Result of running color refinement on one graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColoringState {
    /// Final color per node.
    pub colors: Vec<usize>,
    /// Rounds applied, including the final round that confirmed
    /// stability.
    pub round: usize,
    /// `(color, count)` pairs sorted by color.
    pub histogram: Vec<(usize, usize)>,
}

impl ColoringState {
    fn from_colors(colors: Vec<usize>, round: usize) -> Self {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &c in &colors {
            *counts.entry(c).or_insert(0) += 1;
        }
        ColoringState { colors, round, histogram: counts.into_iter().collect() }
    }

    /// Number of distinct color classes.
    pub fn num_classes(&self) -> usize {
        self.histogram.len()
    }
}

/// Refines all graphs in lockstep under one shared rank table per
/// round. Returns final colors and the number of rounds applied.
fn refine_joint(adjs: &[AdjacencyView], max_rounds: usize) -> (Vec<Vec<usize>>, usize) {
    let mut colors: Vec<Vec<usize>> = adjs.iter().map(|a| vec![0; a.num_nodes()]).collect();
    let mut round = 0;
    for r in 1..=max_rounds {
        let signatures: Vec<Vec<(usize, Vec<usize>)>> = adjs
            .iter()
            .zip(&colors)
            .map(|(adj, cols)| {
                (0..adj.num_nodes())
                    .map(|i| {
                        let mut nb: Vec<usize> =
                            adj.neighbors(i).iter().map(|&j| cols[j]).collect();
                        nb.sort_unstable();
                        (cols[i], nb)
                    })
                    .collect()
            })
            .collect();

        let mut ranks: BTreeMap<&(usize, Vec<usize>), usize> = BTreeMap::new();
        for sig in signatures.iter().flatten() {
            ranks.insert(sig, 0);
        }
        for (rank, slot) in ranks.values_mut().enumerate() {
            *slot = rank;
        }

        let new: Vec<Vec<usize>> = signatures
            .iter()
            .map(|sigs| sigs.iter().map(|s| ranks[s]).collect())
            .collect();
        let stable = new == colors;
        colors = new;
        round = r;
        if stable {
            break;
        }
    }
    (colors, round)
}

/// Enough rounds to guarantee the confirming round has run: the
/// partition strictly refines at most `n - 1` times.
fn rounds_for(n: usize) -> usize {
    n.max(1)
}

/// Runs color refinement on one graph until stable or `max_rounds`.
pub fn wl_refine(g: &Graph, max_rounds: usize) -> ColoringState {
    let (mut colors, round) = refine_joint(&[g.adjacency()], max_rounds);
    ColoringState::from_colors(colors.pop().unwrap(), round)
}

/// Refines two graphs under a shared color table so their histograms
/// are directly comparable.
pub fn wl_refine_pair(a: &Graph, b: &Graph, max_rounds: usize) -> (ColoringState, ColoringState) {
    let (mut colors, round) = refine_joint(&[a.adjacency(), b.adjacency()], max_rounds);
    let cb = colors.pop().unwrap();
    let ca = colors.pop().unwrap();
    (ColoringState::from_colors(ca, round), ColoringState::from_colors(cb, round))
}

/// True iff the stable refinement histograms of the two graphs match.
pub fn wl_equivalent(a: &Graph, b: &Graph) -> bool {
    let rounds = rounds_for(a.num_nodes.max(b.num_nodes));
    let (sa, sb) = wl_refine_pair(a, b, rounds);
    sa.histogram == sb.histogram
}

/// Exact isomorphism test by backtracking over degree-compatible node
/// mappings. Structure only: features and targets are ignored.
/// Intended for small oracle graphs; panics above 64 nodes.
pub fn brute_force_isomorphic(a: &Graph, b: &Graph) -> bool {
    if a.num_nodes != b.num_nodes || a.edges.len() != b.edges.len() {
        return false;
    }
    let n = a.num_nodes;
    assert!(n <= 64, "brute-force isomorphism oracle supports at most 64 nodes");
    if a.degree_sequence() != b.degree_sequence() {
        return false;
    }
    if n == 0 {
        return true;
    }

    let mask_of = |g: &Graph| -> Vec<u64> {
        let adj = g.adjacency();
        (0..n)
            .map(|i| adj.neighbors(i).iter().fold(0u64, |m, &j| m | (1 << j)))
            .collect()
    };
    let ma = mask_of(a);
    let mb = mask_of(b);
    let deg_a: Vec<u32> = ma.iter().map(|m| m.count_ones()).collect();
    let deg_b: Vec<u32> = mb.iter().map(|m| m.count_ones()).collect();

    // Map high-degree nodes first: fewer candidates, earlier conflicts.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(deg_a[i]));

    fn assign(
        idx: usize,
        order: &[usize],
        ma: &[u64],
        mb: &[u64],
        deg_a: &[u32],
        deg_b: &[u32],
        mapping: &mut [usize],
        used: u64,
    ) -> bool {
        if idx == order.len() {
            return true;
        }
        let u = order[idx];
        for v in 0..mb.len() {
            if used & (1 << v) != 0 || deg_b[v] != deg_a[u] {
                continue;
            }
            let consistent = order[..idx].iter().all(|&w| {
                let a_adj = ma[u] >> w & 1;
                let b_adj = mb[v] >> mapping[w] & 1;
                a_adj == b_adj
            });
            if !consistent {
                continue;
            }
            mapping[u] = v;
            if assign(idx + 1, order, ma, mb, deg_a, deg_b, mapping, used | (1 << v)) {
                return true;
            }
        }
        false
    }

    let mut mapping = vec![0usize; n];
    assign(0, &order, &ma, &mb, &deg_a, &deg_b, &mut mapping, 0)
}
