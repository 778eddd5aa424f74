//! The graph-biased cross-modal transformer agent.
//!
//! Per step, the pooled observation feature and the direction embedding are
//! appended to a [`MemoryBuffer`] together with the drone's planar location.
//! The fused sequence `[text ‖ history image tokens ‖ history direction
//! tokens]` (history tokens carry step encodings) runs through transformer
//! blocks whose attention scores receive, per head, an additive bias
//! `G = w_e·E + b_e`, where `E` holds pairwise planar distances between the
//! locations of the history tokens. Text tokens have no location, so their
//! bias entries are zero. Three heads read the fused tokens: action
//! (displacement + stop), target grounding (box + confidence), and a
//! per-cell attention map over the current observation.

use ndarray::Array2;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

use crate::autodiff::{DiffValue, ParamSet, Parameter, Tape};
use crate::config::ModelConfig;
use crate::encoders::{
    DirectionEncoder, MhcaPooler, ObservationFeaturizer, ObservationGrid, TextEncoder,
    TokenSequence,
};
use crate::error::{Error, Result};
use crate::geo::{location_distance_matrix, Action, Heading};
use crate::nn::{Linear, TransformerBlock};

/// Per-episode store of pooled observation features, direction embeddings,
/// and planar locations, ordered by step.
pub struct MemoryBuffer {
    entries: Vec<MemoryEntry>,
    max_steps: usize,
}

struct MemoryEntry {
    f_tilde: DiffValue,
    dir_emb: DiffValue,
    location: (f64, f64),
}

impl MemoryBuffer {
    pub fn new(max_steps: usize) -> Self {
        MemoryBuffer { entries: Vec::new(), max_steps }
    }

    /// Append the current step's entry; the next step index is implicit.
    pub fn append(
        &mut self,
        f_tilde: DiffValue,
        dir_emb: DiffValue,
        location: (f64, f64),
    ) -> Result<()> {
        if self.entries.len() >= self.max_steps {
            return Err(Error::Capacity(format!(
                "memory buffer is full at {} steps",
                self.max_steps
            )));
        }
        self.entries.push(MemoryEntry { f_tilde, dir_emb, location });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn locations(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| e.location).collect()
    }
}

/// Per-head affine map of the distance matrix: `G = w_e·E + b_e`.
///
/// `E` must be square, symmetric, and zero on the diagonal (a distance
/// matrix); the output is differentiable in both scalars.
pub fn build_bias(
    tape: &Tape,
    e: &Array2<f64>,
    w_e: &Parameter,
    b_e: &Parameter,
) -> Result<DiffValue> {
    if e.nrows() != e.ncols() {
        return Err(Error::Shape(format!("distance matrix must be square, got {:?}", e.dim())));
    }
    for i in 0..e.nrows() {
        if e[[i, i]] != 0.0 {
            return Err(Error::Shape("distance matrix diagonal must be zero".into()));
        }
        for j in 0..i {
            if e[[i, j]] != e[[j, i]] {
                return Err(Error::Shape("distance matrix must be symmetric".into()));
            }
        }
    }
    tape.constant(e.clone())
        .mul_scalar(&tape.param(w_e))?
        .add_scalar_value(&tape.param(b_e))
}

/// Transformer block plus per-head edge-bias scalars.
struct GatLayer {
    block: TransformerBlock,
    edge_params: Vec<(Parameter, Parameter)>,
}

impl GatLayer {
    fn new(
        prefix: &str,
        d: usize,
        n_heads: usize,
        params: &mut ParamSet,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let block = TransformerBlock::new(prefix, d, n_heads, params, rng)?;
        let mut edge_params = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            // zero init: training starts from unbiased attention
            let w_e = params.add(Parameter::scalar(&format!("{prefix}.h{h}.w_e"), 0.0))?;
            let b_e = params.add(Parameter::scalar(&format!("{prefix}.h{h}.b_e"), 0.0))?;
            edge_params.push((w_e, b_e));
        }
        Ok(GatLayer { block, edge_params })
    }

    /// Run the block; `located` maps the distance matrix rows into the
    /// fused sequence (`B = M·G·Mᵀ`), `None` skips the bias entirely.
    fn forward(
        &self,
        tape: &Tape,
        x: &DiffValue,
        located: Option<(&Array2<f64>, &Array2<f64>)>,
        key_mask: &[bool],
    ) -> Result<DiffValue> {
        let biases = match located {
            Some((e, placement)) => {
                let m = tape.constant(placement.clone());
                let mt = tape.constant(placement.t().to_owned());
                let mut per_head = Vec::with_capacity(self.edge_params.len());
                for (w_e, b_e) in &self.edge_params {
                    let g = build_bias(tape, e, w_e, b_e)?;
                    per_head.push(m.matmul(&g)?.matmul(&mt)?);
                }
                Some(per_head)
            }
            None => None,
        };
        self.block.forward(tape, x, biases.as_deref(), Some(key_mask))
    }
}

/// Fused embeddings feeding the prediction heads.
pub struct ForwardOutputs {
    /// Current direction token after fusion, `[1, d]`.
    pub action_input: DiffValue,
    /// Current image token after fusion, `[1, d]`.
    pub grounding_input: DiffValue,
}

/// Action head output: displacement in units of `max_step` plus stop
/// probability.
pub struct ActionPrediction {
    /// tanh-squashed `(dx, dy, dz)`, each in `(-1, 1)`, `[1, 3]`.
    pub squashed: DiffValue,
    /// `sigmoid(stop logit)`, `[1, 1]`.
    pub stop_prob: DiffValue,
}

impl ActionPrediction {
    /// Concrete action: displacement scaled by `max_step`; stop when the
    /// stop probability exceeds 0.5.
    pub fn to_action(&self, max_step: f64) -> Result<Action> {
        let s = self.squashed.value();
        let stop = self.stop_prob.scalar_value()? > 0.5;
        Ok(Action {
            dx: s[[0, 0]] * max_step,
            dy: s[[0, 1]] * max_step,
            dz: s[[0, 2]] * max_step,
            stop,
        })
    }
}

/// Grounding head output: sigmoid-bounded box and confidence.
pub struct GroundingPrediction {
    /// `(x, y, w, h)` in observation-normalized units, `[1, 4]`.
    pub box_xywh: DiffValue,
    /// Probability that the target intersects the observation, `[1, 1]`.
    pub confidence: DiffValue,
}

/// Two-affine-layer action head.
struct ActionHead {
    lin1: Linear,
    lin2: Linear,
}

impl ActionHead {
    fn new(prefix: &str, d: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(ActionHead {
            lin1: Linear::new(&format!("{prefix}.lin1"), d, d, params, rng)?,
            lin2: Linear::new(&format!("{prefix}.lin2"), d, 4, params, rng)?,
        })
    }

    fn forward(&self, tape: &Tape, x: &DiffValue) -> Result<ActionPrediction> {
        let raw = self.lin2.forward(tape, &self.lin1.forward(tape, x)?.tanh())?;
        let cols = raw.transpose();
        let squashed = cols.slice_rows(0, 3)?.transpose().tanh();
        let stop_prob = cols.slice_rows(3, 4)?.sigmoid();
        Ok(ActionPrediction { squashed, stop_prob })
    }
}

/// Three-affine-layer grounding head, sigmoid-bounded outputs.
struct GroundingHead {
    lin1: Linear,
    lin2: Linear,
    lin3: Linear,
}

impl GroundingHead {
    fn new(prefix: &str, d: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(GroundingHead {
            lin1: Linear::new(&format!("{prefix}.lin1"), d, d, params, rng)?,
            lin2: Linear::new(&format!("{prefix}.lin2"), d, d, params, rng)?,
            lin3: Linear::new(&format!("{prefix}.lin3"), d, 5, params, rng)?,
        })
    }

    fn forward(&self, tape: &Tape, x: &DiffValue) -> Result<GroundingPrediction> {
        let h = self.lin1.forward(tape, x)?.tanh();
        let h = self.lin2.forward(tape, &h)?.tanh();
        let out = self.lin3.forward(tape, &h)?.sigmoid();
        let cols = out.transpose();
        Ok(GroundingPrediction {
            box_xywh: cols.slice_rows(0, 4)?.transpose(),
            confidence: cols.slice_rows(4, 5)?,
        })
    }
}

/// Dot-product attention-map head over the current grid features.
struct AttentionMapHead {
    proj: Linear,
    d_model: usize,
}

impl AttentionMapHead {
    fn new(prefix: &str, d: usize, params: &mut ParamSet, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(AttentionMapHead {
            proj: Linear::new(&format!("{prefix}.proj"), d, d, params, rng)?,
            d_model: d,
        })
    }

    /// Per-cell probabilities `sigmoid(F_t·proj(e)ᵀ/√d)`, `[G², 1]`.
    fn forward(&self, tape: &Tape, img_emb: &DiffValue, f_t: &DiffValue) -> Result<DiffValue> {
        let q = self.proj.forward(tape, img_emb)?;
        Ok(f_t
            .matmul(&q.transpose())?
            .scale(1.0 / (self.d_model as f64).sqrt())
            .sigmoid())
    }
}

/// The complete agent: encoders, fusion trunk, and heads, with a flat
/// uniquely named parameter set.
pub struct Model {
    cfg: ModelConfig,
    params: ParamSet,
    text: TextEncoder,
    dir: DirectionEncoder,
    feat: ObservationFeaturizer,
    pool: MhcaPooler,
    step_table: Parameter,
    gat: Vec<GatLayer>,
    action: ActionHead,
    grounding: GroundingHead,
    attention: AttentionMapHead,
}

impl Model {
    pub fn new(cfg: &ModelConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = cfg.d_model;
        let text = TextEncoder::new(
            "text",
            vocab_size,
            cfg.max_text_len,
            d,
            cfg.n_text_layers,
            cfg.n_heads,
            &mut params,
            &mut rng,
        )?;
        let dir = DirectionEncoder::new("dir", d, &mut params, &mut rng)?;
        let feat = ObservationFeaturizer::new("obs", cfg.channels, d, &mut params, &mut rng)?;
        let pool = MhcaPooler::new("pool", d, cfg.n_heads, &mut params, &mut rng)?;
        let step_table =
            params.add(Parameter::uniform("step_table", cfg.max_steps, d, &mut rng))?;
        let mut gat = Vec::with_capacity(cfg.n_gat_layers);
        for i in 0..cfg.n_gat_layers {
            gat.push(GatLayer::new(&format!("gat.layer{i}"), d, cfg.n_heads, &mut params, &mut rng)?);
        }
        let action = ActionHead::new("action", d, &mut params, &mut rng)?;
        let grounding = GroundingHead::new("grounding", d, &mut params, &mut rng)?;
        let attention = AttentionMapHead::new("attmap", d, &mut params, &mut rng)?;
        Ok(Model {
            cfg: cfg.clone(),
            params,
            text,
            dir,
            feat,
            pool,
            step_table,
            gat,
            action,
            grounding,
            attention,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Contextual text embeddings for the episode dialog; row 0 is `[CLS]`.
    pub fn encode_text(&self, tape: &Tape, tokens: &TokenSequence) -> Result<DiffValue> {
        self.text.forward(tape, tokens)
    }

    pub fn encode_direction(&self, tape: &Tape, heading: Heading) -> Result<DiffValue> {
        self.dir.forward(tape, heading)
    }

    /// Grid features `[G², d]` of an observation.
    pub fn featurize(&self, tape: &Tape, obs: &ObservationGrid) -> Result<DiffValue> {
        if obs.g() != self.cfg.grid_g {
            return Err(Error::Shape(format!(
                "observation grid {} vs configured {}",
                obs.g(),
                self.cfg.grid_g
            )));
        }
        self.feat.forward(tape, obs)
    }

    /// Pooled observation feature `[1, d]` queried by the `[CLS]` text row.
    pub fn pool_observation(
        &self,
        tape: &Tape,
        i_cls: &DiffValue,
        f_t: &DiffValue,
    ) -> Result<DiffValue> {
        self.pool.forward(tape, i_cls, f_t)
    }

    /// Fuse text and memory through the graph-biased trunk.
    pub fn forward(
        &self,
        tape: &Tape,
        text_emb: &DiffValue,
        tokens: &TokenSequence,
        buffer: &MemoryBuffer,
    ) -> Result<ForwardOutputs> {
        self.forward_opts(tape, text_emb, tokens, buffer, true)
    }

    /// `forward` with the distance bias switchable off (ablation hook).
    pub fn forward_opts(
        &self,
        tape: &Tape,
        text_emb: &DiffValue,
        tokens: &TokenSequence,
        buffer: &MemoryBuffer,
        apply_graph_bias: bool,
    ) -> Result<ForwardOutputs> {
        if buffer.is_empty() {
            return Err(Error::Usage("forward needs the current step in memory".into()));
        }
        let t_steps = buffer.len();
        let l_text = tokens.len();
        if text_emb.dim() != (l_text, self.cfg.d_model) {
            return Err(Error::Shape(format!(
                "text embedding {:?} vs ({l_text}, {})",
                text_emb.dim(),
                self.cfg.d_model
            )));
        }

        // history tokens: image block then direction block, step encodings
        // added to both
        let step_rows = tape.param(&self.step_table);
        let mut parts = vec![text_emb.clone()];
        for (kind, pick) in [(0, true), (1, false)] {
            let _ = kind;
            for (i, entry) in buffer.entries.iter().enumerate() {
                let enc = step_rows.slice_rows(i, i + 1)?;
                let base = if pick { &entry.f_tilde } else { &entry.dir_emb };
                parts.push(base.add(&enc)?);
            }
        }
        let fused_in = DiffValue::concat_rows(&parts)?;
        let n = l_text + 2 * t_steps;

        // pairwise planar distances over located (history) tokens; the
        // image and direction token of a step share its location
        let located = if apply_graph_bias {
            let mut locs = buffer.locations();
            locs.extend(buffer.locations());
            let e = location_distance_matrix(&locs);
            let mut placement = Array2::zeros((n, 2 * t_steps));
            for k in 0..2 * t_steps {
                placement[[l_text + k, k]] = 1.0;
            }
            Some((e, placement))
        } else {
            None
        };

        let mut mask = tokens.pad_mask();
        mask.extend(std::iter::repeat(false).take(2 * t_steps));

        let mut x = fused_in;
        for layer in &self.gat {
            x = layer.forward(tape, &x, located.as_ref().map(|(e, m)| (e, m)), &mask)?;
        }

        let current_img = x.slice_rows(l_text + t_steps - 1, l_text + t_steps)?;
        let current_dir = x.slice_rows(n - 1, n)?;
        Ok(ForwardOutputs { action_input: current_dir, grounding_input: current_img })
    }

    pub fn predict_action(&self, tape: &Tape, action_input: &DiffValue) -> Result<ActionPrediction> {
        self.action.forward(tape, action_input)
    }

    pub fn predict_grounding(
        &self,
        tape: &Tape,
        grounding_input: &DiffValue,
    ) -> Result<GroundingPrediction> {
        self.grounding.forward(tape, grounding_input)
    }

    /// Per-cell attention probabilities over the current observation,
    /// `[G², 1]` in row-major cell order.
    pub fn predict_human_attention(
        &self,
        tape: &Tape,
        grounding_input: &DiffValue,
        f_t: &DiffValue,
    ) -> Result<DiffValue> {
        self.attention.forward(tape, grounding_input, f_t)
    }
}
