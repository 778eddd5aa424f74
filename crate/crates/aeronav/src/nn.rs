//! Neural-network layers composed from tape operations: affine layers,
//! layer norm, feed-forward blocks, multi-head attention with optional
//! per-head additive score bias, and a pre-norm transformer block.
//!
//! Construction registers parameters into a [`ParamSet`] under dotted
//! names (`prefix.part`), so checkpoints and optimizers see a flat,
//! uniquely named list. Weights draw from the shared seeded RNG in
//! construction order; biases and norm offsets start at zero.

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{DiffValue, ParamSet, Parameter, Tape};
use crate::error::{Error, Result};

/// Additive score constant that removes a key from softmax attention.
/// Finite so that fully masked scores still exponentiate to exact zero
/// without producing NaN from inf − inf.
pub const MASK_SCORE: f64 = -1e30;

/// Affine map `x·W + b` with `W: [fan_in, fan_out]`.
pub struct Linear {
    weight: Parameter,
    bias: Parameter,
}

impl Linear {
    pub fn new(
        prefix: &str,
        fan_in: usize,
        fan_out: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(Linear {
            weight: params.add(Parameter::uniform(
                &format!("{prefix}.weight"),
                fan_in,
                fan_out,
                rng,
            ))?,
            bias: params.add(Parameter::zeros_vec(&format!("{prefix}.bias"), fan_out))?,
        })
    }

    pub fn forward(&self, tape: &Tape, x: &DiffValue) -> Result<DiffValue> {
        x.matmul(&tape.param(&self.weight))?
            .add_row(&tape.param(&self.bias))
    }
}

/// Row-wise layer normalization with learned gain and bias, eps = 1e-5.
pub struct LayerNorm {
    gain: Parameter,
    bias: Parameter,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(prefix: &str, d: usize, params: &mut ParamSet) -> Result<Self> {
        Ok(LayerNorm {
            gain: params.add(Parameter::full_vec(&format!("{prefix}.gain"), d, 1.0))?,
            bias: params.add(Parameter::zeros_vec(&format!("{prefix}.bias"), d))?,
        })
    }

    pub fn forward(&self, tape: &Tape, x: &DiffValue) -> Result<DiffValue> {
        x.layer_norm(&tape.param(&self.gain), &tape.param(&self.bias), LAYER_NORM_EPS)
    }
}

/// Two affine layers around a smooth activation; hidden width 4·d.
/// Residual connections are the caller's responsibility.
pub struct FeedForward {
    lin1: Linear,
    lin2: Linear,
}

impl FeedForward {
    pub fn new(prefix: &str, d: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(FeedForward {
            lin1: Linear::new(&format!("{prefix}.lin1"), d, 4 * d, params, rng)?,
            lin2: Linear::new(&format!("{prefix}.lin2"), 4 * d, d, params, rng)?,
        })
    }

    pub fn forward(&self, tape: &Tape, x: &DiffValue) -> Result<DiffValue> {
        self.lin2.forward(tape, &self.lin1.forward(tape, x)?.tanh())
    }
}

/// Multi-head scaled-dot-product attention.
///
/// Heads own separate query/key/value projections of width `d/heads` and
/// separate output projections back to `d` whose sum equals the usual
/// concat-then-project form. Scores are `QKᵀ/√(d/heads)`, plus an optional
/// per-head additive bias node and an optional key mask.
pub struct MultiHeadAttention {
    heads: Vec<HeadProjections>,
    out_bias: Parameter,
    d_head: usize,
}

struct HeadProjections {
    wq: Parameter,
    wk: Parameter,
    wv: Parameter,
    wo: Parameter,
}

impl MultiHeadAttention {
    pub fn new(
        prefix: &str,
        d: usize,
        n_heads: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if n_heads == 0 || d % n_heads != 0 {
            return Err(Error::Shape(format!(
                "head count {n_heads} must divide d_model {d}"
            )));
        }
        let d_head = d / n_heads;
        let mut heads = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            heads.push(HeadProjections {
                wq: params.add(Parameter::uniform(&format!("{prefix}.h{h}.wq"), d, d_head, rng))?,
                wk: params.add(Parameter::uniform(&format!("{prefix}.h{h}.wk"), d, d_head, rng))?,
                wv: params.add(Parameter::uniform(&format!("{prefix}.h{h}.wv"), d, d_head, rng))?,
                wo: params.add(Parameter::uniform(&format!("{prefix}.h{h}.wo"), d_head, d, rng))?,
            });
        }
        Ok(MultiHeadAttention {
            heads,
            out_bias: params.add(Parameter::zeros_vec(&format!("{prefix}.out_bias"), d))?,
            d_head,
        })
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    /// Attention output plus the per-head probability matrices.
    ///
    /// `score_bias`, when present, must hold one `[nq, nk]` node per head,
    /// added to the scaled scores before masking. `key_mask[j] = true`
    /// hides key `j` from every query; at least one key per query must
    /// remain visible.
    pub fn forward_with_probs(
        &self,
        tape: &Tape,
        queries: &DiffValue,
        keys_values: &DiffValue,
        score_bias: Option<&[DiffValue]>,
        key_mask: Option<&[bool]>,
    ) -> Result<(DiffValue, Vec<DiffValue>)> {
        let (nq, _) = queries.dim();
        let (nk, _) = keys_values.dim();
        if let Some(bias) = score_bias {
            if bias.len() != self.heads.len() {
                return Err(Error::Shape(format!(
                    "bias for {} heads given to {}-head attention",
                    bias.len(),
                    self.heads.len()
                )));
            }
        }
        let mask_node = match key_mask {
            Some(mask) => {
                if mask.len() != nk {
                    return Err(Error::Shape(format!(
                        "key mask length {} vs {} keys",
                        mask.len(),
                        nk
                    )));
                }
                if mask.iter().all(|&m| m) {
                    return Err(Error::Shape("every key is masked".into()));
                }
                let mut m = Array2::zeros((nq, nk));
                for (j, &hidden) in mask.iter().enumerate() {
                    if hidden {
                        m.column_mut(j).fill(MASK_SCORE);
                    }
                }
                Some(tape.constant(m))
            }
            None => None,
        };
        let scale = 1.0 / (self.d_head as f64).sqrt();
        let mut out: Option<DiffValue> = None;
        let mut probs = Vec::with_capacity(self.heads.len());
        for (h, head) in self.heads.iter().enumerate() {
            let q = queries.matmul(&tape.param(&head.wq))?;
            let k = keys_values.matmul(&tape.param(&head.wk))?;
            let v = keys_values.matmul(&tape.param(&head.wv))?;
            let mut scores = q.matmul(&k.transpose())?.scale(scale);
            if let Some(bias) = score_bias {
                scores = scores.add(&bias[h])?;
            }
            if let Some(m) = &mask_node {
                scores = scores.add(m)?;
            }
            let p = scores.softmax_rows();
            let head_out = p.matmul(&v)?.matmul(&tape.param(&head.wo))?;
            out = Some(match out {
                Some(acc) => acc.add(&head_out)?,
                None => head_out,
            });
            probs.push(p);
        }
        let out = out.unwrap().add_row(&tape.param(&self.out_bias))?;
        Ok((out, probs))
    }

    pub fn forward(
        &self,
        tape: &Tape,
        queries: &DiffValue,
        keys_values: &DiffValue,
        score_bias: Option<&[DiffValue]>,
        key_mask: Option<&[bool]>,
    ) -> Result<DiffValue> {
        Ok(self
            .forward_with_probs(tape, queries, keys_values, score_bias, key_mask)?
            .0)
    }
}

/// Pre-norm transformer block: `x + Attn(LN(x))` then `h + FFN(LN(h))`.
pub struct TransformerBlock {
    ln_attn: LayerNorm,
    attn: MultiHeadAttention,
    ln_ffn: LayerNorm,
    ffn: FeedForward,
}

impl TransformerBlock {
    pub fn new(
        prefix: &str,
        d: usize,
        n_heads: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(TransformerBlock {
            ln_attn: LayerNorm::new(&format!("{prefix}.ln_attn"), d, params)?,
            attn: MultiHeadAttention::new(&format!("{prefix}.attn"), d, n_heads, params, rng)?,
            ln_ffn: LayerNorm::new(&format!("{prefix}.ln_ffn"), d, params)?,
            ffn: FeedForward::new(&format!("{prefix}.ffn"), d, params, rng)?,
        })
    }

    pub fn forward(
        &self,
        tape: &Tape,
        x: &DiffValue,
        score_bias: Option<&[DiffValue]>,
        key_mask: Option<&[bool]>,
    ) -> Result<DiffValue> {
        let normed = self.ln_attn.forward(tape, x)?;
        let h = x.add(&self.attn.forward(tape, &normed, &normed, score_bias, key_mask)?)?;
        let out = h.add(&self.ffn.forward(tape, &self.ln_ffn.forward(tape, &h)?)?)?;
        Ok(out)
    }

    pub fn n_heads(&self) -> usize {
        self.attn.n_heads()
    }
}
