//! Input encoders: dialog tokenization with special-token layout, a small
//! contextual text encoder, the sine/cosine heading MLP, per-cell
//! observation featurization, and cross-attention pooling of grid features
//! into a single vector.

use std::collections::HashMap;

use ndarray::{Array2, Array3};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{DiffValue, ParamSet, Parameter, Tape};
use crate::error::{Error, Result};
use crate::geo::Heading;
use crate::nn::{FeedForward, Linear, MultiHeadAttention, TransformerBlock};

pub const PAD_ID: usize = 0;
pub const CLS_ID: usize = 1;
pub const QUE_ID: usize = 2;
pub const INS_ID: usize = 3;

pub const PAD_TOKEN: &str = "[PAD]";
pub const CLS_TOKEN: &str = "[CLS]";
pub const QUE_TOKEN: &str = "[QUE]";
pub const INS_TOKEN: &str = "[INS]";

/// Bijective token map with the four reserved ids fixed at 0..=3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    /// Vocabulary over the reserved tokens plus `words` in the given order.
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocabulary { tokens: Vec::new(), ids: HashMap::new() };
        for t in [PAD_TOKEN, CLS_TOKEN, QUE_TOKEN, INS_TOKEN] {
            vocab.push(t)?;
        }
        for w in words {
            vocab.push(w.as_ref())?;
        }
        Ok(vocab)
    }

    fn push(&mut self, token: &str) -> Result<()> {
        if token.is_empty() {
            return Err(Error::Vocabulary("empty token".into()));
        }
        if self.ids.contains_key(token) {
            return Err(Error::Vocabulary(format!("duplicate token {token}")));
        }
        self.ids.insert(token.to_string(), self.tokens.len());
        self.tokens.push(token.to_string());
        Ok(())
    }

    /// Parse the one-token-per-line file format; line number = id and the
    /// first four lines must be the reserved tokens.
    pub fn from_lines(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().collect();
        let reserved = [PAD_TOKEN, CLS_TOKEN, QUE_TOKEN, INS_TOKEN];
        if lines.len() < reserved.len() {
            return Err(Error::Vocabulary("vocabulary file too short".into()));
        }
        for (i, t) in reserved.iter().enumerate() {
            if lines[i] != *t {
                return Err(Error::Vocabulary(format!(
                    "line {i} must be {t}, found {}",
                    lines[i]
                )));
            }
        }
        Vocabulary::new(lines[reserved.len()..].iter().copied())
    }

    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn id(&self, token: &str) -> Result<usize> {
        self.ids
            .get(token)
            .copied()
            .ok_or_else(|| Error::Vocabulary(format!("unknown token {token}")))
    }

    pub fn token(&self, id: usize) -> Result<&str> {
        self.tokens
            .get(id)
            .map(String::as_str)
            .ok_or_else(|| Error::Vocabulary(format!("id {id} out of range")))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // reserved tokens are always present
    }
}

/// One dialog round: an optional question answered by an instruction.
/// The opening round of an episode has no question.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DialogRound {
    pub question: Option<String>,
    pub instruction: String,
}

impl DialogRound {
    pub fn instruction(text: &str) -> Self {
        DialogRound { question: None, instruction: text.to_string() }
    }

    pub fn exchange(question: &str, instruction: &str) -> Self {
        DialogRound { question: Some(question.to_string()), instruction: instruction.to_string() }
    }
}

/// Fixed-length id sequence: `[CLS]`, the current round, then history
/// rounds oldest first, padded with `[PAD]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    ids: Vec<usize>,
    n_real: usize,
}

impl TokenSequence {
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of leading non-`[PAD]` positions.
    pub fn n_real(&self) -> usize {
        self.n_real
    }

    /// `true` entries are `[PAD]` positions, hidden from attention.
    pub fn pad_mask(&self) -> Vec<bool> {
        self.ids.iter().map(|&id| id == PAD_ID).collect()
    }
}

fn round_ids(round: &DialogRound, vocab: &Vocabulary) -> Result<Vec<usize>> {
    let mut ids = Vec::new();
    if let Some(q) = &round.question {
        ids.push(QUE_ID);
        for w in q.split_whitespace() {
            ids.push(vocab.id(w)?);
        }
    }
    ids.push(INS_ID);
    for w in round.instruction.split_whitespace() {
        ids.push(vocab.id(w)?);
    }
    Ok(ids)
}

/// Lay out the dialog as `[CLS] current history...` with `[QUE]`/`[INS]`
/// markers before each segment. When the sequence would exceed
/// `max_text_len`, whole history rounds are dropped oldest first; a current
/// round that alone overflows is tail-truncated. Output is padded to
/// exactly `max_text_len`.
pub fn tokenize(
    current: &DialogRound,
    history: &[DialogRound],
    vocab: &Vocabulary,
    max_text_len: usize,
) -> Result<TokenSequence> {
    if max_text_len < 2 {
        return Err(Error::Usage(format!("max_text_len {max_text_len} too small")));
    }
    let mut ids = vec![CLS_ID];
    ids.extend(round_ids(current, vocab)?);
    ids.truncate(max_text_len);
    let mut history_blocks: Vec<Vec<usize>> =
        history.iter().map(|r| round_ids(r, vocab)).collect::<Result<_>>()?;
    // drop oldest history rounds until everything fits
    while !history_blocks.is_empty()
        && ids.len() + history_blocks.iter().map(Vec::len).sum::<usize>() > max_text_len
    {
        history_blocks.remove(0);
    }
    for block in history_blocks {
        ids.extend(block);
    }
    let n_real = ids.len();
    ids.resize(max_text_len, PAD_ID);
    Ok(TokenSequence { ids, n_real })
}

/// Contextual text encoder: token embedding plus learned absolute position
/// embedding, then `n_layers` self-attention blocks with `[PAD]` keys
/// masked. Zero layers returns the raw embedding sums.
pub struct TextEncoder {
    token_emb: Parameter,
    pos_emb: Parameter,
    blocks: Vec<TransformerBlock>,
    vocab_size: usize,
    max_text_len: usize,
}

impl TextEncoder {
    pub fn new(
        prefix: &str,
        vocab_size: usize,
        max_text_len: usize,
        d: usize,
        n_layers: usize,
        n_heads: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let token_emb =
            params.add(Parameter::uniform(&format!("{prefix}.token_emb"), vocab_size, d, rng))?;
        let pos_emb =
            params.add(Parameter::uniform(&format!("{prefix}.pos_emb"), max_text_len, d, rng))?;
        let mut blocks = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            blocks.push(TransformerBlock::new(
                &format!("{prefix}.layer{i}"),
                d,
                n_heads,
                params,
                rng,
            )?);
        }
        Ok(TextEncoder { token_emb, pos_emb, blocks, vocab_size, max_text_len })
    }

    /// Contextual embeddings, one row per position; row 0 is `[CLS]`.
    pub fn forward(&self, tape: &Tape, tokens: &TokenSequence) -> Result<DiffValue> {
        if tokens.len() != self.max_text_len {
            return Err(Error::Shape(format!(
                "sequence length {} vs encoder max {}",
                tokens.len(),
                self.max_text_len
            )));
        }
        let mut one_hot = Array2::zeros((tokens.len(), self.vocab_size));
        for (i, &id) in tokens.ids().iter().enumerate() {
            if id >= self.vocab_size {
                return Err(Error::Vocabulary(format!("token id {id} out of range")));
            }
            one_hot[[i, id]] = 1.0;
        }
        let mut x = tape
            .constant(one_hot)
            .matmul(&tape.param(&self.token_emb))?
            .add(&tape.param(&self.pos_emb))?;
        let mask = tokens.pad_mask();
        for block in &self.blocks {
            x = block.forward(tape, &x, None, Some(&mask))?;
        }
        Ok(x)
    }
}

/// Heading encoder: `[sin θ, cos θ]` through three affine layers with
/// smooth nonlinearities between.
pub struct DirectionEncoder {
    lin1: Linear,
    lin2: Linear,
    lin3: Linear,
}

impl DirectionEncoder {
    pub fn new(prefix: &str, d: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(DirectionEncoder {
            lin1: Linear::new(&format!("{prefix}.lin1"), 2, d, params, rng)?,
            lin2: Linear::new(&format!("{prefix}.lin2"), d, d, params, rng)?,
            lin3: Linear::new(&format!("{prefix}.lin3"), d, d, params, rng)?,
        })
    }

    /// Embedding of a canonical heading; 2π-periodic because [`Heading`]
    /// canonicalizes and sin/cos see only the canonical angle.
    pub fn forward(&self, tape: &Tape, heading: Heading) -> Result<DiffValue> {
        let theta = heading.radians();
        self.forward_features(tape, theta.sin(), theta.cos())
    }

    pub fn forward_features(&self, tape: &Tape, sin: f64, cos: f64) -> Result<DiffValue> {
        let x = tape.row(&[sin, cos]);
        let h = self.lin1.forward(tape, &x)?.tanh();
        let h = self.lin2.forward(tape, &h)?.tanh();
        self.lin3.forward(tape, &h)
    }
}

/// Semantic observation: `channels × G × G`, cell (row, col) with row 0 at
/// the top of the heading-aligned view. Values lie in `[0, 1]` as rendered;
/// augmentation may push them outside.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationGrid {
    data: Array3<f64>,
}

impl ObservationGrid {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite observation values".into()));
        }
        let (_, g_rows, g_cols) = data.dim();
        if g_rows != g_cols || g_rows == 0 {
            return Err(Error::Shape(format!(
                "observation grid must be square, got {g_rows}x{g_cols}"
            )));
        }
        Ok(ObservationGrid { data })
    }

    pub fn zeros(channels: usize, g: usize) -> Self {
        ObservationGrid { data: Array3::zeros((channels, g, g)) }
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn g(&self) -> usize {
        self.data.dim().1
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array3<f64> {
        &mut self.data
    }

    /// Row-major `[G², channels]` layout for the per-cell featurizer.
    pub fn to_rows(&self) -> Array2<f64> {
        let (c, g, _) = self.data.dim();
        let mut rows = Array2::zeros((g * g, c));
        for r in 0..g {
            for col in 0..g {
                for k in 0..c {
                    rows[[r * g + col, k]] = self.data[[k, r, col]];
                }
            }
        }
        rows
    }
}

/// Shared per-cell affine projection from channel vectors to d_model.
pub struct ObservationFeaturizer {
    proj: Linear,
    channels: usize,
}

impl ObservationFeaturizer {
    pub fn new(
        prefix: &str,
        channels: usize,
        d: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(ObservationFeaturizer {
            proj: Linear::new(&format!("{prefix}.proj"), channels, d, params, rng)?,
            channels,
        })
    }

    /// Grid features: `[G², d_model]`, rows in row-major cell order.
    pub fn forward(&self, tape: &Tape, obs: &ObservationGrid) -> Result<DiffValue> {
        if obs.channels() != self.channels {
            return Err(Error::Shape(format!(
                "observation has {} channels, featurizer expects {}",
                obs.channels(),
                self.channels
            )));
        }
        self.proj.forward(tape, &tape.constant(obs.to_rows()))
    }
}

/// Cross-attention pooling of grid features into one vector: multi-head
/// attention with the `[CLS]` text embedding as the only query, a residual
/// back onto that query, then a feed-forward block with its own residual.
pub struct MhcaPooler {
    attn: MultiHeadAttention,
    ffn: FeedForward,
}

impl MhcaPooler {
    pub fn new(
        prefix: &str,
        d: usize,
        n_heads: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(MhcaPooler {
            attn: MultiHeadAttention::new(&format!("{prefix}.attn"), d, n_heads, params, rng)?,
            ffn: FeedForward::new(&format!("{prefix}.ffn"), d, params, rng)?,
        })
    }

    /// Pooled feature `[1, d]` plus per-head attention rows over the cells.
    pub fn forward_with_probs(
        &self,
        tape: &Tape,
        i_cls: &DiffValue,
        f_t: &DiffValue,
    ) -> Result<(DiffValue, Vec<DiffValue>)> {
        if i_cls.dim().0 != 1 {
            return Err(Error::Shape(format!("query must be one row, got {:?}", i_cls.dim())));
        }
        let (mixed, probs) = self.attn.forward_with_probs(tape, i_cls, f_t, None, None)?;
        let h = i_cls.add(&mixed)?;
        let out = h.add(&self.ffn.forward(tape, &h)?)?;
        Ok((out, probs))
    }

    pub fn forward(&self, tape: &Tape, i_cls: &DiffValue, f_t: &DiffValue) -> Result<DiffValue> {
        Ok(self.forward_with_probs(tape, i_cls, f_t)?.0)
    }
}
