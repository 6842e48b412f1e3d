//! Attention-based value network over robot-centric crowd states.
//!
//! Two branches build one feature row per human: a spatial branch embeds
//! robot-human pairs from the latest frame and relates humans through
//! graph attention, and a temporal branch runs each human's recent
//! trajectory through a recurrent cell before its own graph attention
//! pass. Branch outputs are concatenated, pooled into a single crowd
//! feature by a learned soft attention over humans, and joined with the
//! robot's own state to produce a scalar state value.
//!
//! Ablation modes drop one branch; the crowd feature then comes from the
//! remaining branch alone, and the parameter set shrinks accordingly.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::checkpoint::{Param, ParamSet};
use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::state::{JointState, RobotCentricHumanState, RobotCentricRobotState};

/// Negative-side slope of the attention logit activation.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Width of each branch's per-human feature row.
pub const EMBED_DIM: usize = 32;
/// Hidden width of the pairwise spatial embedding.
pub const SPATIAL_HIDDEN: usize = 64;
/// Hidden width of the crowd-pooling attention scorer.
pub const ATTN_HIDDEN: usize = 64;
/// Hidden widths of the value head.
pub const VALUE_HIDDEN: [usize; 2] = [128, 64];
/// Default number of retained history frames.
pub const DEFAULT_HISTORY_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    SpatialOnly,
    TemporalOnly,
}

impl AblationMode {
    pub fn has_spatial(self) -> bool {
        self != AblationMode::TemporalOnly
    }

    pub fn has_temporal(self) -> bool {
        self != AblationMode::SpatialOnly
    }

    /// Width of one human's combined feature row.
    pub fn crowd_dim(self) -> usize {
        if self == AblationMode::Full {
            2 * EMBED_DIM
        } else {
            EMBED_DIM
        }
    }
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<AblationMode> {
        match s {
            "full" => Ok(AblationMode::Full),
            "spatial_only" => Ok(AblationMode::SpatialOnly),
            "temporal_only" => Ok(AblationMode::TemporalOnly),
            other => Err(Error::Usage(format!(
                "unknown ablation mode {other:?} (expected full, spatial_only, or temporal_only)"
            ))),
        }
    }
}

impl std::fmt::Display for AblationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AblationMode::Full => "full",
            AblationMode::SpatialOnly => "spatial_only",
            AblationMode::TemporalOnly => "temporal_only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AstgConfig {
    pub mode: AblationMode,
    pub history_len: usize,
}

impl Default for AstgConfig {
    fn default() -> Self {
        AstgConfig {
            mode: AblationMode::Full,
            history_len: DEFAULT_HISTORY_LEN,
        }
    }
}

/// Rolling window of the most recent joint states, oldest first.
#[derive(Debug, Clone)]
pub struct HistoryWindow {
    frames: VecDeque<JointState>,
    cap: usize,
}

impl HistoryWindow {
    pub fn new(cap: usize) -> HistoryWindow {
        assert!(cap > 0, "history window needs room for at least one frame");
        HistoryWindow {
            frames: VecDeque::new(),
            cap,
        }
    }

    /// Appends the newest frame, dropping the oldest when full. Every
    /// frame must describe the same set of humans, so the count is fixed.
    pub fn push(&mut self, frame: JointState) -> Result<()> {
        if let Some(first) = self.frames.front() {
            if first.humans.len() != frame.humans.len() {
                return Err(Error::Usage(format!(
                    "history frame has {} humans, window has {}",
                    frame.humans.len(),
                    first.humans.len()
                )));
            }
        }
        if self.frames.len() == self.cap {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        Ok(())
    }

    pub fn from_frames(cap: usize, frames: impl IntoIterator<Item = JointState>) -> Result<Self> {
        let mut w = HistoryWindow::new(cap);
        for f in frames {
            w.push(f)?;
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn latest(&self) -> Option<&JointState> {
        self.frames.back()
    }

    pub fn frames(&self) -> impl Iterator<Item = &JointState> {
        self.frames.iter()
    }
}

/// Parameters resolved to tensors: constants for inference, tape leaves
/// for training.
pub struct Bound {
    entries: Vec<(String, Tensor)>,
}

impl Bound {
    pub fn constants(params: &ParamSet) -> Bound {
        Bound {
            entries: params
                .iter()
                .map(|p| {
                    let t = Tensor::constant(&p.shape, p.values.clone())
                        .expect("stored parameter shapes are consistent");
                    (p.name.clone(), t)
                })
                .collect(),
        }
    }

    pub fn leaves(params: &ParamSet, tape: &Tape) -> Result<Bound> {
        let mut entries = Vec::with_capacity(params.len());
        for p in params.iter() {
            entries.push((p.name.clone(), tape.leaf(&p.shape, p.values.clone())?));
        }
        Ok(Bound { entries })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
    }

    pub fn entries(&self) -> impl Iterator<Item = &(String, Tensor)> {
        self.entries.iter()
    }
}

/// Forward-pass outputs. Attention tensors are absent when the branch is
/// ablated or there are no humans.
pub struct Valuation {
    /// State value, shape 1x1; tracked when the parameters were bound to
    /// a tape.
    pub value: Tensor,
    /// Row-stochastic human-to-human attention, shape n x n.
    pub spatial_attention: Option<Tensor>,
    pub temporal_attention: Option<Tensor>,
    /// Crowd-pooling weights over humans, shape n x 1, summing to one.
    pub crowd_weights: Option<Tensor>,
}

impl Valuation {
    pub fn scalar(&self) -> f64 {
        self.value.values()[0]
    }
}

fn xavier(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

fn linear_param(rng: &mut impl Rng, name: &str, fan_in: usize, fan_out: usize) -> [Param; 2] {
    [
        Param::new(
            &format!("{name}.w"),
            &[fan_in, fan_out],
            xavier(rng, fan_in, fan_out, fan_in * fan_out),
        ),
        Param::new(&format!("{name}.b"), &[fan_out], vec![0.0; fan_out]),
    ]
}

fn gat_params(rng: &mut impl Rng, name: &str, set: &mut ParamSet) {
    set.push(Param::new(
        &format!("{name}.w"),
        &[EMBED_DIM, EMBED_DIM],
        xavier(rng, EMBED_DIM, EMBED_DIM, EMBED_DIM * EMBED_DIM),
    ));
    // One attention vector over the concatenated pair, stored as its two
    // halves so pairwise logits factor into per-row terms.
    let a = xavier(rng, 2 * EMBED_DIM, 1, 2 * EMBED_DIM);
    set.push(Param::new(
        &format!("{name}.a_src"),
        &[EMBED_DIM, 1],
        a[..EMBED_DIM].to_vec(),
    ));
    set.push(Param::new(
        &format!("{name}.a_dst"),
        &[EMBED_DIM, 1],
        a[EMBED_DIM..].to_vec(),
    ));
}

/// Freshly initialized parameters for the given architecture: uniform
/// Xavier weights, zero biases. Deterministic in the generator state.
pub fn init_params(cfg: &AstgConfig, rng: &mut impl Rng) -> ParamSet {
    let mut set = ParamSet::new();
    let pair_dim = RobotCentricRobotState::DIM + RobotCentricHumanState::DIM;

    if cfg.mode.has_spatial() {
        let [w, b] = linear_param(rng, "spatial_embed.l1", pair_dim, SPATIAL_HIDDEN);
        set.push(w);
        set.push(b);
        let [w, b] = linear_param(rng, "spatial_embed.l2", SPATIAL_HIDDEN, EMBED_DIM);
        set.push(w);
        set.push(b);
        gat_params(rng, "spatial_gat", &mut set);
    }
    if cfg.mode.has_temporal() {
        let [w, b] = linear_param(rng, "temporal_embed", RobotCentricHumanState::DIM, EMBED_DIM);
        set.push(w);
        set.push(b);
        set.push(Param::new(
            "rnn.w_in",
            &[EMBED_DIM, EMBED_DIM],
            xavier(rng, EMBED_DIM, EMBED_DIM, EMBED_DIM * EMBED_DIM),
        ));
        set.push(Param::new(
            "rnn.w_rec",
            &[EMBED_DIM, EMBED_DIM],
            xavier(rng, EMBED_DIM, EMBED_DIM, EMBED_DIM * EMBED_DIM),
        ));
        set.push(Param::new("rnn.b", &[EMBED_DIM], vec![0.0; EMBED_DIM]));
        gat_params(rng, "temporal_gat", &mut set);
    }

    let crowd = cfg.mode.crowd_dim();
    let [w, b] = linear_param(rng, "attn.l1", 2 * crowd, ATTN_HIDDEN);
    set.push(w);
    set.push(b);
    let [w, b] = linear_param(rng, "attn.l2", ATTN_HIDDEN, 1);
    set.push(w);
    set.push(b);

    let value_in = RobotCentricRobotState::DIM + crowd;
    let [w, b] = linear_param(rng, "value.l1", value_in, VALUE_HIDDEN[0]);
    set.push(w);
    set.push(b);
    let [w, b] = linear_param(rng, "value.l2", VALUE_HIDDEN[0], VALUE_HIDDEN[1]);
    set.push(w);
    set.push(b);
    let [w, b] = linear_param(rng, "value.l3", VALUE_HIDDEN[1], 1);
    set.push(w);
    set.push(b);
    set
}

/// Zero-valued parameters with the architecture's names and shapes, for
/// validating loaded checkpoints.
pub fn param_template(cfg: &AstgConfig) -> ParamSet {
    struct Zero;
    impl rand::RngCore for Zero {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            dest.fill(0);
        }
    }
    let mut params = init_params(cfg, &mut Zero);
    for p in params.iter_mut() {
        p.values.iter_mut().for_each(|v| *v = 0.0);
    }
    params
}

fn linear(x: &Tensor, b: &Bound, name: &str) -> Result<Tensor> {
    x.matmul(b.get(&format!("{name}.w"))?)?
        .add(b.get(&format!("{name}.b"))?)
}

fn robot_row(js: &JointState) -> Result<Tensor> {
    Tensor::constant(
        &[1, RobotCentricRobotState::DIM],
        js.robot.features().to_vec(),
    )
}

fn human_rows(js: &JointState) -> Result<Tensor> {
    let n = js.humans.len();
    let mut vals = Vec::with_capacity(n * RobotCentricHumanState::DIM);
    for h in &js.humans {
        vals.extend_from_slice(&h.features());
    }
    Tensor::constant(&[n, RobotCentricHumanState::DIM], vals)
}

/// One graph-attention pass with a residual connection.
///
/// Logits score every ordered human pair by a linear form on the
/// concatenated projected features; rows are normalized with softmax, so
/// each human's refined feature is a convex mix of projected neighbors
/// (itself included) passed through a rectifier, then added back onto
/// the input. Returns the output features and the attention matrix.
fn gat(e: &Tensor, b: &Bound, name: &str) -> Result<(Tensor, Tensor)> {
    let n = e.shape()[0];
    let z = e.matmul(b.get(&format!("{name}.w"))?)?;
    let f = z.matmul(b.get(&format!("{name}.a_src"))?)?;
    let g = z.matmul(b.get(&format!("{name}.a_dst"))?)?;
    // logits[i][j] = f[i] + g[j], built as two rank-1 products
    let logits = f
        .matmul(&Tensor::ones(&[1, n]))?
        .add(&Tensor::ones(&[n, 1]).matmul(&g.transpose()?)?)?;
    let alpha = logits.leaky_relu(LEAKY_SLOPE)?.softmax(1)?;
    let refined = alpha.matmul(&z)?.relu()?;
    Ok((e.add(&refined)?, alpha))
}

/// Per-human spatial features from the latest frame: pairwise
/// robot-human embedding followed by graph attention.
pub fn spatial_branch(b: &Bound, latest: &JointState) -> Result<(Tensor, Tensor)> {
    let n = latest.humans.len();
    let humans = human_rows(latest)?;
    let robot_tiled = Tensor::ones(&[n, 1]).matmul(&robot_row(latest)?)?;
    let pairs = Tensor::concat(&[&robot_tiled, &humans], 1)?;
    let e = linear(&pairs, b, "spatial_embed.l1")?
        .relu()?
        .matmul(b.get("spatial_embed.l2.w")?)?
        .add(b.get("spatial_embed.l2.b")?)?
        .relu()?;
    gat(&e, b, "spatial_gat")
}

/// Per-human temporal features: each frame's human states are embedded,
/// folded through a recurrent cell (zero initial hidden state, shared
/// across humans), and the final hidden states pass through graph
/// attention.
pub fn temporal_branch<'a>(
    b: &Bound,
    frames: impl Iterator<Item = &'a JointState>,
) -> Result<(Tensor, Tensor)> {
    let w_in = b.get("rnn.w_in")?;
    let w_rec = b.get("rnn.w_rec")?;
    let bias = b.get("rnn.b")?;
    let mut hidden: Option<Tensor> = None;
    for frame in frames {
        let g = linear(&human_rows(frame)?, b, "temporal_embed")?.relu()?;
        let pre = match &hidden {
            None => g.matmul(w_in)?,
            Some(h) => g.matmul(w_in)?.add(&h.matmul(w_rec)?)?,
        };
        hidden = Some(pre.add(bias)?.tanh()?);
    }
    let hidden = hidden.ok_or_else(|| Error::Usage("temporal branch needs frames".into()))?;
    gat(&hidden, b, "temporal_gat")
}

/// Pools per-human features (n x d) into one crowd feature (1 x d):
/// every human is scored against the mean feature, scores are softmaxed
/// over humans, and features are averaged under those weights. Returns
/// the crowd feature and the weights.
pub fn social_attention(b: &Bound, features: &Tensor) -> Result<(Tensor, Tensor)> {
    let n = features.shape()[0];
    let mean = features.mean(0)?;
    let tiled = Tensor::ones(&[n, 1]).matmul(&mean)?;
    let scored = Tensor::concat(&[features, &tiled], 1)?;
    let scores = linear(&linear(&scored, b, "attn.l1")?.relu()?, b, "attn.l2")?;
    let weights = scores.softmax(0)?;
    let crowd = weights.transpose()?.matmul(features)?;
    Ok((crowd, weights))
}

fn value_head(b: &Bound, robot: &Tensor, crowd: &Tensor) -> Result<Tensor> {
    let joined = Tensor::concat(&[robot, crowd], 1)?;
    let h = linear(&joined, b, "value.l1")?.relu()?;
    let h = linear(&h, b, "value.l2")?.relu()?;
    linear(&h, b, "value.l3")
}

impl AstgConfig {
    /// Evaluates the network on a history window. Only the newest
    /// `history_len` frames participate; the latest frame drives the
    /// spatial branch and the value head. With no humans present the
    /// crowd feature is zero and no attention is produced.
    pub fn forward(&self, b: &Bound, window: &HistoryWindow) -> Result<Valuation> {
        let latest = window
            .latest()
            .ok_or_else(|| Error::Usage("forward on an empty history window".into()))?;
        let skip = window.len().saturating_sub(self.history_len);
        let n = latest.humans.len();
        let robot = robot_row(latest)?;

        if n == 0 {
            let crowd = Tensor::zeros(&[1, self.mode.crowd_dim()]);
            return Ok(Valuation {
                value: value_head(b, &robot, &crowd)?,
                spatial_attention: None,
                temporal_attention: None,
                crowd_weights: None,
            });
        }
        for f in window.frames() {
            if f.humans.len() != n {
                return Err(Error::Usage(format!(
                    "frame has {} humans, latest has {n}",
                    f.humans.len()
                )));
            }
        }

        let mut parts: Vec<Tensor> = Vec::new();
        let mut spatial_attention = None;
        let mut temporal_attention = None;
        if self.mode.has_spatial() {
            let (h, alpha) = spatial_branch(b, latest)?;
            parts.push(h);
            spatial_attention = Some(alpha);
        }
        if self.mode.has_temporal() {
            let (h, alpha) = temporal_branch(b, window.frames().skip(skip))?;
            parts.push(h);
            temporal_attention = Some(alpha);
        }
        let features = match parts.len() {
            1 => parts.pop().expect("one branch"),
            _ => Tensor::concat(&[&parts[0], &parts[1]], 1)?,
        };

        let (crowd, weights) = social_attention(b, &features)?;
        Ok(Valuation {
            value: value_head(b, &robot, &crowd)?,
            spatial_attention,
            temporal_attention,
            crowd_weights: Some(weights),
        })
    }

    /// Inference-only state value.
    pub fn value_of(&self, params: &ParamSet, window: &HistoryWindow) -> Result<f64> {
        let bound = Bound::constants(params);
        Ok(self.forward(&bound, window)?.scalar())
    }
}
