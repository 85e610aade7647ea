//! The scenario generator: lane encoder with multi-context gating, agent queries, a
//! query decoder (self- then cross-attention), and placement / attribute / motion heads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use scengen_core::code::StructuredScenario;
use scengen_core::geometry::{wrap_angle, Pose2, Vec2};
use scengen_core::scenario::{Agent, AgentState, MapRegion, Scenario, FPS};

use crate::error::ModelError;
use crate::features::{agent_encodings, LaneFeatureInput, LANE_FEATURES};
use crate::graph::{softmax, Graph, Var};
use crate::nn::{LayerNorm, Linear, Mlp, MultiHeadAttention};
use crate::params::{ParamId, ParamStore};
use crate::tensor::{Element, Tensor};

/// Floor added to every predicted variance.
pub const VARIANCE_FLOOR: f64 = 1e-4;
/// Lane placement logits are clamped to this magnitude.
pub const LOGIT_LIMIT: f64 = 15.0;
const MIN_SIZE: f64 = 0.1;
/// Lanes shorter than this have no usable direction.
pub const DEGENERATE_LANE_LENGTH: f64 = 1e-6;

/// Continuous agent attributes modelled by mixture heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    /// Heading relative to the placement lane's direction.
    Heading,
    Speed,
    /// (length, width)
    Size,
    /// (along, across) offset from the placement lane's midpoint.
    Shift,
}

impl Attribute {
    pub const ALL: [Attribute; 4] = [Attribute::Heading, Attribute::Speed, Attribute::Size, Attribute::Shift];

    pub fn dim(self) -> usize {
        match self {
            Attribute::Heading | Attribute::Speed => 1,
            Attribute::Size | Attribute::Shift => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Heading => "heading",
            Attribute::Speed => "speed",
            Attribute::Size => "size",
            Attribute::Shift => "shift",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub d: usize,
    pub mcg_blocks: usize,
    pub transformer_layers: usize,
    pub heads: usize,
    pub dropout: f64,
    pub gmm_components: usize,
    pub motion_modes: usize,
    pub attribute_mlp_width: usize,
    pub max_lanes: usize,
    pub max_agents: usize,
    pub horizon: usize,
    /// Multiplier applied to lane coordinates (metres) before the input projection.
    pub coord_scale: f64,
    /// Multiplier applied to the motion head's x/y outputs to obtain metres.
    pub traj_scale: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            d: 256,
            mcg_blocks: 5,
            transformer_layers: 2,
            heads: 4,
            dropout: 0.1,
            gmm_components: 5,
            motion_modes: 12,
            attribute_mlp_width: 512,
            max_lanes: 384,
            max_agents: 32,
            horizon: 50,
            coord_scale: 0.02,
            traj_scale: 10.0,
        }
    }
}

impl GeneratorConfig {
    /// The small configuration used for gradient checks.
    pub fn miniature() -> Self {
        Self { d: 8, max_lanes: 4, max_agents: 2, horizon: 5, gmm_components: 2, motion_modes: 2, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("d", self.d),
            ("mcg_blocks", self.mcg_blocks),
            ("transformer_layers", self.transformer_layers),
            ("heads", self.heads),
            ("gmm_components", self.gmm_components),
            ("motion_modes", self.motion_modes),
            ("attribute_mlp_width", self.attribute_mlp_width),
            ("max_lanes", self.max_lanes),
            ("max_agents", self.max_agents),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if self.horizon < 2 {
            return Err(ModelError::Config("horizon must be at least 2".into()));
        }
        if !self.d.is_multiple_of(8) {
            return Err(ModelError::Config(format!("d = {} must be a multiple of 8", self.d)));
        }
        if !self.d.is_multiple_of(self.heads) {
            return Err(ModelError::Config(format!("d = {} not divisible by {} heads", self.d, self.heads)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        for (name, v) in [("coord_scale", self.coord_scale), ("traj_scale", self.traj_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Numbers per trajectory mode: (T − 1) steps of (x, y, heading).
    pub fn mode_len(&self) -> usize {
        (self.horizon - 1) * 3
    }

    /// (sin, cos) pairs per code field.
    pub fn pe_pairs(&self) -> usize {
        self.d / 8
    }
}

#[derive(Debug, Clone, Copy)]
struct McgBlock {
    element: Mlp,
    context: Mlp,
    norm: LayerNorm,
}

#[derive(Debug, Clone, Copy)]
struct DecoderLayer {
    self_attn: MultiHeadAttention,
    self_norm: LayerNorm,
    cross_attn: MultiHeadAttention,
    cross_norm: LayerNorm,
}

#[derive(Debug, Clone)]
struct Layers {
    lane_in: Linear,
    mcg: Vec<McgBlock>,
    query_code: Mlp,
    query_slot: Mlp,
    slots: ParamId,
    decoder: Vec<DecoderLayer>,
    agent_embed: Mlp,
    lane_embed: Mlp,
    attributes: Vec<Mlp>,
    motion: Mlp,
}

/// Graph handles for one mixture head: means and variances are `N×(K·D)` laid out
/// component-major, log-weights are `N×K`.
#[derive(Debug, Clone, Copy)]
pub struct GmmVars {
    pub mean: Var,
    pub variance: Var,
    pub log_weight: Var,
    pub dim: usize,
    pub components: usize,
}

#[derive(Debug, Clone)]
pub struct ForwardVars {
    pub lane_features: Var,
    pub agent_embeddings: Var,
    pub lane_embeddings: Var,
    pub lane_logits: Var,
    pub lane_log_probs: Var,
    pub attributes: Vec<GmmVars>,
    /// `N×(K'·(T−1)·3)`, mode-major, then time, then (x, y, heading).
    pub trajectories: Var,
    pub mode_log_probs: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmParams {
    pub dim: usize,
    pub components: usize,
    pub means: Tensor<f64>,
    pub variances: Tensor<f64>,
    pub weights: Tensor<f64>,
}

impl GmmParams {
    pub fn mean(&self, agent: usize, k: usize) -> &[f64] {
        &self.means.row(agent)[k * self.dim..(k + 1) * self.dim]
    }

    pub fn top_component(&self, agent: usize) -> usize {
        argmax(self.weights.row(agent))
    }
}

/// Decoded distributions for every agent slot.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorOutput {
    pub lane_probs: Tensor<f64>,
    pub attributes: Vec<GmmParams>,
    pub trajectories: Tensor<f64>,
    pub mode_probs: Tensor<f64>,
    pub lane_embeddings: Tensor<f64>,
    pub agent_embeddings: Tensor<f64>,
    pub horizon: usize,
}

impl GeneratorOutput {
    pub fn agent_count(&self) -> usize {
        self.lane_probs.rows
    }

    pub fn attribute(&self, a: Attribute) -> &GmmParams {
        &self.attributes[Attribute::ALL.iter().position(|&x| x == a).expect("known attribute")]
    }

    /// Mode `k` of agent `i` as `(x, y, heading)` for frames 2..T in the agent's initial frame.
    pub fn mode(&self, agent: usize, k: usize) -> Vec<[f64; 3]> {
        let len = (self.horizon - 1) * 3;
        let row = &self.trajectories.row(agent)[k * len..(k + 1) * len];
        row.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Generator<T> {
    config: GeneratorConfig,
    params: ParamStore<T>,
    layers: Layers,
}

impl<T: Element> Generator<T> {
    /// Randomly initialized generator; identical seeds give identical weights.
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let d = config.d;
        let lane_in = Linear::new(&mut p, "map.input", LANE_FEATURES, d, &mut rng);
        let mcg = (0..config.mcg_blocks)
            .map(|b| McgBlock {
                element: Mlp::new(&mut p, &format!("map.mcg{b}.element"), d, d, d, &mut rng),
                context: Mlp::new(&mut p, &format!("map.mcg{b}.context"), d, d, d, &mut rng),
                norm: LayerNorm::new(&mut p, &format!("map.mcg{b}.norm"), d),
            })
            .collect();
        let query_code = Mlp::new(&mut p, "query.code", 2 * d, d, d, &mut rng);
        let query_slot = Mlp::new(&mut p, "query.slot", d, d, d, &mut rng);
        let slots = p.add_uniform("query.slots", config.max_agents, d, &mut rng);
        // Slot vectors are free embeddings; give them unit-scale spread.
        p.get_mut(slots).scale_assign(T::of((config.max_agents as f64).sqrt()));
        let decoder = (0..config.transformer_layers)
            .map(|l| DecoderLayer {
                self_attn: MultiHeadAttention::new(&mut p, &format!("decoder{l}.self"), d, config.heads, &mut rng),
                self_norm: LayerNorm::new(&mut p, &format!("decoder{l}.self_norm"), d),
                cross_attn: MultiHeadAttention::new(&mut p, &format!("decoder{l}.cross"), d, config.heads, &mut rng),
                cross_norm: LayerNorm::new(&mut p, &format!("decoder{l}.cross_norm"), d),
            })
            .collect();
        let agent_embed = Mlp::new(&mut p, "head.agent_embed", d, d, d, &mut rng);
        let lane_embed = Mlp::new(&mut p, "head.lane_embed", d, d, d, &mut rng);
        let k = config.gmm_components;
        let w = config.attribute_mlp_width;
        let attributes = Attribute::ALL
            .iter()
            .map(|a| Mlp::new(&mut p, &format!("head.{}", a.name()), d, w, k * (2 * a.dim() + 1), &mut rng))
            .collect();
        let motion_out = config.motion_modes * (config.mode_len() + 1);
        let motion = Mlp::new(&mut p, "head.motion", d, w, motion_out, &mut rng);
        let layers =
            Layers { lane_in, mcg, query_code, query_slot, slots, decoder, agent_embed, lane_embed, attributes, motion };
        Ok(Self { config, params: p, layers })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn lane_input(&self, map: &MapRegion) -> LaneFeatureInput {
        LaneFeatureInput::from_map(map, self.config.coord_scale)
    }

    fn check_inputs(&self, lanes: &LaneFeatureInput, agents: usize) -> Result<(), ModelError> {
        if lanes.len() > self.config.max_lanes {
            return Err(ModelError::Config(format!("{} lanes exceed the limit of {}", lanes.len(), self.config.max_lanes)));
        }
        if lanes.mask.len() != lanes.len() {
            return Err(ModelError::Shape(format!("lane mask has {} entries for {} rows", lanes.mask.len(), lanes.len())));
        }
        if lanes.live_count() == 0 {
            return Err(ModelError::EmptyMap);
        }
        if agents == 0 || agents > self.config.max_agents {
            return Err(ModelError::Config(format!("{agents} agents outside 1..={}", self.config.max_agents)));
        }
        Ok(())
    }

    fn row_mask(&self, lanes: &LaneFeatureInput) -> Option<Tensor<T>> {
        (!lanes.all_live()).then(|| {
            let d = self.config.d;
            let mut m = Tensor::zeros(lanes.len(), d);
            for (r, &live) in lanes.mask.iter().enumerate() {
                if live {
                    m.row_mut(r).fill(T::one());
                }
            }
            m
        })
    }

    /// Gated features `element(v) ⊙ context(maxpool(v))` of one block, without residual.
    pub fn mcg_gate(&self, g: &mut Graph<'_, T>, block: usize, v: Var, mask: Option<&[bool]>) -> Var {
        let b = self.layers.mcg[block];
        let elem = b.element.forward(g, v);
        let pooled = g.max_pool_rows(v, mask);
        let ctx = b.context.forward(g, pooled);
        g.mul_row(elem, ctx)
    }

    /// Lane features `S×d`; padded rows are zero.
    pub fn encode_map(&self, g: &mut Graph<'_, T>, lanes: &LaneFeatureInput) -> Result<Var, ModelError> {
        if lanes.len() > self.config.max_lanes {
            return Err(ModelError::Config(format!("{} lanes exceed the limit of {}", lanes.len(), self.config.max_lanes)));
        }
        if lanes.live_count() == 0 {
            return Err(ModelError::EmptyMap);
        }
        let raw: Vec<f64> = lanes.rows.iter().flatten().copied().collect();
        let x = g.constant(Tensor::from_f64(lanes.len(), LANE_FEATURES, &raw));
        let mask = (!lanes.all_live()).then_some(lanes.mask.as_slice());
        let row_mask = self.row_mask(lanes);
        let mut v = self.layers.lane_in.forward(g, x);
        if let Some(m) = &row_mask {
            v = g.mul_const(v, m.clone());
        }
        for block in 0..self.layers.mcg.len() {
            let gated = self.mcg_gate(g, block, v, mask);
            let sum = g.add(v, gated);
            v = self.layers.mcg[block].norm.forward(g, sum);
            if let Some(m) = &row_mask {
                v = g.mul_const(v, m.clone());
            }
        }
        Ok(v)
    }

    /// Agent queries `N×d` from the code embeddings and the per-slot learned vectors.
    pub fn build_queries(&self, g: &mut Graph<'_, T>, code: &StructuredScenario) -> Result<Var, ModelError> {
        let n = code.agents.len();
        if n == 0 || n > self.config.max_agents {
            return Err(ModelError::Config(format!("{n} agents outside 1..={}", self.config.max_agents)));
        }
        let pe: Vec<f64> = agent_encodings(code, self.config.pe_pairs()).concat();
        let pe = g.constant(Tensor::from_f64(n, 2 * self.config.d, &pe));
        let from_code = self.layers.query_code.forward(g, pe);
        let mut select = Tensor::zeros(n, self.config.max_agents);
        for i in 0..n {
            select.set(i, i, T::one());
        }
        let select = g.constant(select);
        let slots = g.param(self.layers.slots);
        let slots = g.matmul(select, slots);
        let from_slot = self.layers.query_slot.forward(g, slots);
        Ok(g.add(from_code, from_slot))
    }

    fn mixture(&self, g: &mut Graph<'_, T>, head: usize, q: Var) -> GmmVars {
        let dim = Attribute::ALL[head].dim();
        let k = self.config.gmm_components;
        let raw = self.layers.attributes[head].forward(g, q);
        let mean = g.slice_cols(raw, 0, k * dim);
        let var_raw = g.slice_cols(raw, k * dim, k * dim);
        let var = g.softplus(var_raw);
        let variance = g.add_scalar(var, T::of(VARIANCE_FLOOR));
        let logits = g.slice_cols(raw, 2 * k * dim, k);
        let log_weight = g.log_softmax_rows(logits, None);
        GmmVars { mean, variance, log_weight, dim, components: k }
    }

    /// Full forward pass; dropout is active when `g` is a training graph.
    pub fn forward(
        &self,
        g: &mut Graph<'_, T>,
        lanes: &LaneFeatureInput,
        code: &StructuredScenario,
    ) -> Result<ForwardVars, ModelError> {
        self.check_inputs(lanes, code.agents.len())?;
        let n = code.agents.len();
        let mask = (!lanes.all_live()).then_some(lanes.mask.as_slice());
        let features = self.encode_map(g, lanes)?;
        let mut q = self.build_queries(g, code)?;
        for layer in &self.layers.decoder {
            let attended = layer.self_attn.forward(g, q, q, None);
            let attended = g.dropout(attended);
            let sum = g.add(q, attended);
            q = layer.self_norm.forward(g, sum);
            let attended = layer.cross_attn.forward(g, q, features, mask);
            let attended = g.dropout(attended);
            let sum = g.add(q, attended);
            q = layer.cross_norm.forward(g, sum);
        }

        let agent_embeddings = self.layers.agent_embed.forward(g, q);
        let lane_embeddings = self.layers.lane_embed.forward(g, features);
        let logits = g.matmul_nt(agent_embeddings, lane_embeddings);
        let logits = g.scale(logits, T::one() / T::of(self.config.d as f64).sqrt());
        let limit = T::of(LOGIT_LIMIT);
        let lane_logits = g.clamp(logits, -limit, limit);
        let lane_log_probs = g.log_softmax_rows(lane_logits, mask);

        let attributes = (0..Attribute::ALL.len()).map(|h| self.mixture(g, h, q)).collect();

        let modes = self.config.motion_modes;
        let len = self.config.mode_len();
        let raw = self.layers.motion.forward(g, q);
        let traj = g.slice_cols(raw, 0, modes * len);
        let mut scale = Tensor::zeros(n, modes * len);
        let ts = T::of(self.config.traj_scale);
        for r in 0..n {
            for (c, v) in scale.row_mut(r).iter_mut().enumerate() {
                *v = if c % 3 == 2 { T::one() } else { ts };
            }
        }
        let trajectories = g.mul_const(traj, scale);
        let mode_logits = g.slice_cols(raw, modes * len, modes);
        let mode_log_probs = g.log_softmax_rows(mode_logits, None);

        Ok(ForwardVars {
            lane_features: features,
            agent_embeddings,
            lane_embeddings,
            lane_logits,
            lane_log_probs,
            attributes,
            trajectories,
            mode_log_probs,
        })
    }

    /// Inference-mode forward pass.
    pub fn infer(&self, lanes: &LaneFeatureInput, code: &StructuredScenario) -> Result<GeneratorOutput, ModelError> {
        let mut g = Graph::new(&self.params);
        let f = self.forward(&mut g, lanes, code)?;
        let to64 = |v: Var| g.value(v).cast::<f64>();
        let mask = (!lanes.all_live()).then_some(lanes.mask.as_slice());
        let lane_probs = softmax(&to64(f.lane_logits), mask);
        let attributes = f
            .attributes
            .iter()
            .map(|a| GmmParams {
                dim: a.dim,
                components: a.components,
                means: to64(a.mean),
                variances: to64(a.variance),
                weights: to64(a.log_weight).map(f64::exp),
            })
            .collect();
        let out = GeneratorOutput {
            lane_probs,
            attributes,
            trajectories: to64(f.trajectories),
            mode_probs: to64(f.mode_log_probs).map(f64::exp),
            lane_embeddings: to64(f.lane_embeddings),
            agent_embeddings: to64(f.agent_embeddings),
            horizon: self.config.horizon,
        };
        if !(out.lane_probs.all_finite() && out.trajectories.all_finite() && out.mode_probs.all_finite()) {
            return Err(ModelError::NonFinite("generator output".into()));
        }
        Ok(out)
    }

    /// Generate a scenario on `map` from a structured code.
    pub fn generate(&self, code: &StructuredScenario, map: &MapRegion) -> Result<(Scenario, Vec<String>), ModelError> {
        let lanes = self.lane_input(map);
        let out = self.infer(&lanes, code)?;
        sample_scenario(&out, code, map)
    }
}

/// Turn decoded distributions into a concrete scenario by taking the most probable values.
pub fn sample_scenario(
    output: &GeneratorOutput,
    code: &StructuredScenario,
    map: &MapRegion,
) -> Result<(Scenario, Vec<String>), ModelError> {
    let n = code.agents.len();
    if output.agent_count() != n {
        return Err(ModelError::Shape(format!("output has {} agents, code has {n}", output.agent_count())));
    }
    if output.lane_probs.cols != map.lanes.len() {
        return Err(ModelError::Shape(format!(
            "output covers {} lanes, map has {}",
            output.lane_probs.cols,
            map.lanes.len()
        )));
    }
    let mut warnings = Vec::new();
    let top = |a: Attribute, i: usize| {
        let p = output.attribute(a);
        p.mean(i, p.top_component(i)).to_vec()
    };
    let dt = 1.0 / FPS as f64;
    let mut agents = Vec::with_capacity(n);
    for i in 0..n {
        let lane = &map.lanes[argmax(output.lane_probs.row(i))];
        let shift = top(Attribute::Shift, i);
        let (origin, lane_heading) = if lane.length() > DEGENERATE_LANE_LENGTH {
            let u = lane.direction() * (1.0 / lane.length());
            (lane.midpoint() + u * shift[0] + u.perp() * shift[1], lane.heading())
        } else {
            warnings.push(format!("agent {i}: degenerate lane {} used at its start point", lane.id));
            (lane.start, 0.0)
        };
        let heading = wrap_angle(lane_heading + top(Attribute::Heading, i)[0]);
        let speed = top(Attribute::Speed, i)[0].max(0.0);
        let size = top(Attribute::Size, i);
        let mode = argmax(output.mode_probs.row(i));
        let pose = Pose2::new(origin, heading);
        let mut states = Vec::with_capacity(output.horizon);
        states.push(AgentState::new(origin, heading, speed));
        for step in output.mode(i, mode) {
            let p = pose.to_world(Vec2::new(step[0], step[1]));
            let prev = states.last().expect("initial state").position;
            states.push(AgentState::new(p, wrap_angle(heading + step[2]), p.distance(prev) / dt));
        }
        agents.push(Agent { id: i as i64, length: size[0].max(MIN_SIZE), width: size[1].max(MIN_SIZE), states });
    }
    let scenario = Scenario::new(map.clone(), agents, 0)?;
    Ok((scenario, warnings))
}
