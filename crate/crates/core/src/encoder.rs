//! Initial-state encoder: embed features and structural encodings
//! separately, then fuse by concatenation or row-wise tensor product.
//!
//! Both fusions land on the same width so the layer stacks above them
//! are interchangeable. The compensation rule: concatenation embeds
//! into `d_hidden / 2` per channel (even widths only), the tensor
//! product into `√d_hidden` per channel (perfect squares only) — either
//! way the fused vector has `d_hidden` entries. An optional joint
//! projection (linear, or a two-layer relu MLP) mixes the fused vector;
//! with it disabled the fused vector is the initial state itself.
//!
//! No bias terms anywhere: parameter counts stay exactly
//! `d_emb·d_in + d_emb·k` plus the joint matrices.

use serde::{Deserialize, Serialize};

use crate::linalg::DMat;
use crate::tensor::{perfect_sqrt, Tape, TensorError, Var};

/// Fusion rule for features and structural encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Concat,
    Tensor,
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EncoderKind::Concat => "concat",
            EncoderKind::Tensor => "tensor",
        })
    }
}

impl std::str::FromStr for EncoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "concat" => Ok(EncoderKind::Concat),
            "tensor" => Ok(EncoderKind::Tensor),
            other => Err(format!("unknown encoder kind '{other}' (concat | tensor)")),
        }
    }
}

/// Inadmissible width for an encoder kind.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EncoderError {
    #[error("concat encoder needs an even d_hidden, got {0}")]
    OddHidden(usize),
    #[error("tensor encoder needs a perfect-square d_hidden, got {0}")]
    NotSquareHidden(usize),
}

/// Per-channel embedding width for a hidden width: `d_hidden / 2` for
/// concat, `√d_hidden` for tensor.
pub fn embed_dim(kind: EncoderKind, d_hidden: usize) -> Result<usize, EncoderError> {
    match kind {
        EncoderKind::Concat => {
            if d_hidden % 2 != 0 {
                return Err(EncoderError::OddHidden(d_hidden));
            }
            Ok(d_hidden / 2)
        }
        EncoderKind::Tensor => {
            perfect_sqrt(d_hidden).ok_or(EncoderError::NotSquareHidden(d_hidden))
        }
    }
}

/// Joint projection applied to the fused vector.
#[derive(Debug, Clone, PartialEq)]
pub enum JointEncoder {
    /// Fused vector is the initial state (ablation mode).
    Disabled,
    /// One linear map `d_hidden × d_hidden`, no activation.
    Linear { w: DMat },
    /// Two-layer relu MLP, both maps `d_hidden × d_hidden`.
    Mlp { w1: DMat, w2: DMat },
}

/// Encoder weights. `w_h` embeds features (`d_emb × d_in`), `w_p`
/// embeds structural encodings (`d_emb × k`).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub kind: EncoderKind,
    pub w_h: DMat,
    pub w_p: DMat,
    pub joint: JointEncoder,
}

/// Tape handles for one forward pass over [`EncoderParams`].
pub struct EncoderVars {
    pub kind: EncoderKind,
    pub w_h: Var,
    pub w_p: Var,
    pub joint: JointVars,
}

pub enum JointVars {
    Disabled,
    Linear(Var),
    Mlp(Var, Var),
}

impl EncoderParams {
    /// Registers every weight on the tape. Block order here must match
    /// [`EncoderParams::visit`].
    pub fn bind(&self, tape: &mut Tape) -> EncoderVars {
        EncoderVars {
            kind: self.kind,
            w_h: tape.leaf(self.w_h.clone()),
            w_p: tape.leaf(self.w_p.clone()),
            joint: match &self.joint {
                JointEncoder::Disabled => JointVars::Disabled,
                JointEncoder::Linear { w } => JointVars::Linear(tape.leaf(w.clone())),
                JointEncoder::Mlp { w1, w2 } => {
                    JointVars::Mlp(tape.leaf(w1.clone()), tape.leaf(w2.clone()))
                }
            },
        }
    }

    /// Walks parameter blocks in the fixed declaration order.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'static str, &'a DMat)) {
        f("encoder.w_h", &self.w_h);
        f("encoder.w_p", &self.w_p);
        match &self.joint {
            JointEncoder::Disabled => {}
            JointEncoder::Linear { w } => f("encoder.joint.w", w),
            JointEncoder::Mlp { w1, w2 } => {
                f("encoder.joint.w1", w1);
                f("encoder.joint.w2", w2);
            }
        }
    }

    /// Mutable twin of [`EncoderParams::visit`], same order.
    pub fn visit_mut(&mut self, f: &mut impl FnMut(&'static str, &mut DMat)) {
        f("encoder.w_h", &mut self.w_h);
        f("encoder.w_p", &mut self.w_p);
        match &mut self.joint {
            JointEncoder::Disabled => {}
            JointEncoder::Linear { w } => f("encoder.joint.w", w),
            JointEncoder::Mlp { w1, w2 } => {
                f("encoder.joint.w1", w1);
                f("encoder.joint.w2", w2);
            }
        }
    }

    /// Total scalar parameters.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, m| n += m.numel());
        n
    }
}

/// Fuses embedded features and encodings into initial hidden states,
/// one row per node, width `d_hidden`.
pub fn encode(
    tape: &mut Tape,
    vars: &EncoderVars,
    features: Var,
    enc: Var,
) -> Result<Var, TensorError> {
    let eh = tape.matmul_nt(features, vars.w_h)?;
    let ep = tape.matmul_nt(enc, vars.w_p)?;
    let fused = match vars.kind {
        EncoderKind::Concat => tape.row_concat(eh, ep)?,
        EncoderKind::Tensor => tape.kron_rows(eh, ep)?,
    };
    match &vars.joint {
        JointVars::Disabled => Ok(fused),
        JointVars::Linear(w) => tape.matmul_nt(fused, *w),
        JointVars::Mlp(w1, w2) => {
            let h = tape.matmul_nt(fused, *w1)?;
            let r = tape.relu(h);
            tape.matmul_nt(r, *w2)
        }
    }
}

/// Exact scalar-parameter count for the standard (depth-1 joint)
/// encoder layout at the given dimensions.
pub fn parameter_budget(
    kind: EncoderKind,
    d_in: usize,
    k: usize,
    d_hidden: usize,
    joint_enabled: bool,
) -> Result<usize, EncoderError> {
    let emb = embed_dim(kind, d_hidden)?;
    let joint = if joint_enabled { d_hidden * d_hidden } else { 0 };
    Ok(emb * d_in + emb * k + joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn identity_params(kind: EncoderKind, d_in: usize, k: usize, joint: bool) -> EncoderParams {
        let d_hidden = match kind {
            EncoderKind::Concat => d_in + k,
            EncoderKind::Tensor => d_in * k,
        };
        EncoderParams {
            kind,
            w_h: DMat::identity(d_in),
            w_p: DMat::identity(k),
            joint: if joint {
                JointEncoder::Linear { w: DMat::identity(d_hidden) }
            } else {
                JointEncoder::Disabled
            },
        }
    }

    fn run_encode(params: &EncoderParams, features: DMat, enc: DMat) -> DMat {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let f = tape.leaf(features);
        let e = tape.leaf(enc);
        let out = encode(&mut tape, &vars, f, e).unwrap();
        tape.value(out).clone()
    }

    #[test]
    fn tensor_kind_with_identities_reduces_to_kron() {
        let params = identity_params(EncoderKind::Tensor, 2, 2, true);
        let out = run_encode(
            &params,
            DMat::from_vec(1, 2, vec![1.0, 2.0]),
            DMat::from_vec(1, 2, vec![3.0, 4.0]),
        );
        assert_eq!(out.data(), &[3.0, 4.0, 6.0, 8.0]);
    }

    #[test]
    fn concat_kind_with_identities_stacks_channels() {
        let params = identity_params(EncoderKind::Concat, 2, 2, true);
        let out = run_encode(
            &params,
            DMat::from_vec(1, 2, vec![1.0, 2.0]),
            DMat::from_vec(1, 2, vec![3.0, 4.0]),
        );
        assert_eq!(out.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn tensor_kind_with_ones_encoding_replicates_embedded_features() {
        let mut rng = crate::rng::stream(2, "encoder-test");
        let d_in = 3;
        let k = 2;
        let emb = 2;
        let w_h = DMat::from_vec(
            emb,
            d_in,
            (0..emb * d_in).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let params = EncoderParams {
            kind: EncoderKind::Tensor,
            w_h: w_h.clone(),
            w_p: DMat::identity(k),
            joint: JointEncoder::Disabled,
        };
        let features = DMat::from_vec(2, d_in, (0..2 * d_in).map(|i| i as f64).collect());
        let ones = DMat::from_vec(2, k, vec![1.0; 2 * k]);
        let out = run_encode(&params, features.clone(), ones);

        let eh = features.matmul_nt(&w_h);
        for row in 0..2 {
            for p in 0..emb {
                for q in 0..k {
                    assert_eq!(out[(row, p * k + q)], eh[(row, p)]);
                }
            }
        }
    }

    #[test]
    fn output_width_is_d_hidden_for_both_kinds() {
        for kind in [EncoderKind::Concat, EncoderKind::Tensor] {
            let d_hidden = 16;
            let emb = embed_dim(kind, d_hidden).unwrap();
            let params = EncoderParams {
                kind,
                w_h: DMat::zeros(emb, 3),
                w_p: DMat::zeros(emb, 5),
                joint: JointEncoder::Disabled,
            };
            let out = run_encode(&params, DMat::zeros(4, 3), DMat::zeros(4, 5));
            assert_eq!((out.rows(), out.cols()), (4, d_hidden));
        }
    }

    #[test]
    fn budgets_match_hand_arithmetic() {
        assert_eq!(parameter_budget(EncoderKind::Tensor, 9, 20, 64, true).unwrap(), 4328);
        assert_eq!(parameter_budget(EncoderKind::Concat, 9, 20, 64, true).unwrap(), 5024);
        assert_eq!(
            parameter_budget(EncoderKind::Tensor, 9, 20, 64, false).unwrap(),
            4328 - 64 * 64
        );
        assert_eq!(
            parameter_budget(EncoderKind::Concat, 9, 20, 64, false).unwrap(),
            5024 - 64 * 64
        );
    }

    #[test]
    fn tensor_budget_never_exceeds_concat_budget() {
        for d_hidden in [4usize, 16, 36, 64, 100, 324] {
            for (d_in, k) in [(1, 1), (9, 20), (5, 3)] {
                let t = parameter_budget(EncoderKind::Tensor, d_in, k, d_hidden, true).unwrap();
                let c = parameter_budget(EncoderKind::Concat, d_in, k, d_hidden, true).unwrap();
                assert!(t <= c, "tensor {t} > concat {c} at d_hidden {d_hidden}");
            }
        }
    }

    #[test]
    fn inadmissible_widths_are_rejected() {
        assert_eq!(embed_dim(EncoderKind::Concat, 7), Err(EncoderError::OddHidden(7)));
        assert_eq!(embed_dim(EncoderKind::Tensor, 8), Err(EncoderError::NotSquareHidden(8)));
        assert!(parameter_budget(EncoderKind::Tensor, 3, 3, 10, false).is_err());
    }

    #[test]
    fn encode_is_permutation_equivariant() {
        let mut rng = crate::rng::stream(4, "encoder-test");
        let n = 5;
        let (d_in, k) = (3, 4);
        let emb = 3;
        let rand_mat = |rng: &mut rand_chacha::ChaCha8Rng, r: usize, c: usize| {
            DMat::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
        };
        let params = EncoderParams {
            kind: EncoderKind::Tensor,
            w_h: rand_mat(&mut rng, emb, d_in),
            w_p: rand_mat(&mut rng, emb, k),
            joint: JointEncoder::Linear { w: rand_mat(&mut rng, 9, 9) },
        };
        let features = rand_mat(&mut rng, n, d_in);
        let enc = rand_mat(&mut rng, n, k);
        let perm = [3usize, 0, 4, 1, 2];

        let base = run_encode(&params, features.clone(), enc.clone());
        let mut pf = DMat::zeros(n, d_in);
        let mut pe = DMat::zeros(n, k);
        for i in 0..n {
            pf.row_mut(perm[i]).copy_from_slice(features.row(i));
            pe.row_mut(perm[i]).copy_from_slice(enc.row(i));
        }
        let moved = run_encode(&params, pf, pe);
        for i in 0..n {
            assert_eq!(base.row(i), moved.row(perm[i]));
        }
    }

    #[test]
    fn mlp_joint_applies_relu_between_layers() {
        let params = EncoderParams {
            kind: EncoderKind::Concat,
            w_h: DMat::identity(1),
            w_p: DMat::identity(1),
            joint: JointEncoder::Mlp {
                w1: DMat::from_vec(2, 2, vec![1.0, 0.0, 0.0, -1.0]),
                w2: DMat::identity(2),
            },
        };
        // Fused = [2, 3]; w1·fused = [2, -3]; relu → [2, 0].
        let out = run_encode(
            &params,
            DMat::from_vec(1, 1, vec![2.0]),
            DMat::from_vec(1, 1, vec![3.0]),
        );
        assert_eq!(out.data(), &[2.0, 0.0]);
        assert_eq!(params.param_count(), 1 + 1 + 4 + 4);
    }
}
