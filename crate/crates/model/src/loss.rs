//! Training targets and the three loss terms.

use serde::{Deserialize, Serialize};

use scengen_core::code::StructuredScenario;
use scengen_core::geometry::wrap_angle;
use scengen_core::scenario::{MapRegion, Scenario};

use crate::error::ModelError;
use crate::generator::{Attribute, ForwardVars, GmmVars};
use crate::graph::{Graph, Var};
use crate::tensor::{Element, Tensor};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Ground truth for one scene, index-aligned with its agents.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTargets {
    /// Index into `map.lanes` of the lane each agent is placed on.
    pub lanes: Vec<usize>,
    /// Per attribute (in [`Attribute::ALL`] order), one value vector per agent.
    pub attributes: Vec<Vec<Vec<f64>>>,
    /// Per agent, frames 2..T as `(x, y, heading)` in the agent's initial frame.
    pub trajectories: Vec<Vec<[f64; 3]>>,
}

impl TrainingTargets {
    pub fn agent_count(&self) -> usize {
        self.lanes.len()
    }
}

/// Nearest center lane (by midpoint) to `p`; equal distances go to the lower lane id.
pub fn placement_lane(map: &MapRegion, p: scengen_core::Point) -> Option<usize> {
    map.lanes
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_center())
        .min_by(|(_, a), (_, b)| a.midpoint().distance(p).total_cmp(&b.midpoint().distance(p)).then(a.id.cmp(&b.id)))
        .map(|(i, _)| i)
}

/// Targets for a scene already expressed in its ego frame.
pub fn extract_targets(scenario: &Scenario) -> Result<TrainingTargets, ModelError> {
    let map = &scenario.map;
    let mut lanes = Vec::with_capacity(scenario.agents.len());
    let mut attributes = vec![Vec::new(); Attribute::ALL.len()];
    let mut trajectories = Vec::with_capacity(scenario.agents.len());
    for agent in &scenario.agents {
        let first = agent.initial();
        let l = placement_lane(map, first.position).ok_or(scengen_core::ScenarioError::NotFound {
            what: "center lane",
            id: map.region_id.clone(),
        })?;
        let lane = &map.lanes[l];
        let u = lane.direction() * (1.0 / lane.length());
        let offset = first.position - lane.midpoint();
        lanes.push(l);
        for (slot, a) in Attribute::ALL.iter().enumerate() {
            let v = match a {
                Attribute::Heading => vec![wrap_angle(first.heading - lane.heading())],
                Attribute::Speed => vec![first.speed],
                Attribute::Size => vec![agent.length, agent.width],
                Attribute::Shift => vec![offset.dot(u), offset.dot(u.perp())],
            };
            attributes[slot].push(v);
        }
        let pose = first.pose();
        trajectories.push(
            agent.states[1..]
                .iter()
                .map(|s| {
                    let p = pose.to_local(s.position);
                    [p.x, p.y, wrap_angle(s.heading - first.heading)]
                })
                .collect(),
        );
    }
    Ok(TrainingTargets { lanes, attributes, trajectories })
}

/// Training pairs prediction slot `i` with code entry `i` and scenario agent `i`.
pub fn pair_agents(predicted: usize, scenario: &Scenario, code: &StructuredScenario) -> Result<Vec<(usize, usize)>, ModelError> {
    if predicted != code.agents.len() || predicted != scenario.agents.len() {
        return Err(ModelError::Shape(format!(
            "agent counts differ: prediction {predicted}, code {}, scenario {}",
            code.agents.len(),
            scenario.agents.len()
        )));
    }
    Ok((0..predicted).map(|i| (i, i)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub position: f64,
    pub attr: f64,
    pub motion: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { position: 1.0, attr: 1.0, motion: 1.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub position: Var,
    pub attr: Var,
    pub motion: Var,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub total: f64,
    pub position: f64,
    pub attr: f64,
    pub motion: f64,
}

impl LossValues {
    pub fn read<T: Element>(g: &Graph<'_, T>, v: &LossVars) -> Self {
        let s = |x: Var| g.value(x).data[0].as_f64();
        Self { total: s(v.total), position: s(v.position), attr: s(v.attr), motion: s(v.motion) }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.position.is_finite() && self.attr.is_finite() && self.motion.is_finite()
    }

    pub fn add(&mut self, o: &Self) {
        self.total += o.total;
        self.position += o.position;
        self.attr += o.attr;
        self.motion += o.motion;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { total: self.total * s, position: self.position * s, attr: self.attr * s, motion: self.motion * s }
    }
}

/// `Σ_i −log p̂_i(l_i)` from row-wise log-probabilities.
pub fn position_loss<T: Element>(g: &mut Graph<'_, T>, log_probs: Var, lanes: &[usize]) -> Var {
    let picked = g.pick(log_probs, lanes.iter().enumerate().map(|(i, &l)| (i, l)).collect());
    let s = g.sum(picked);
    g.scale(s, -T::one())
}

/// Sum over agents of the diagonal-Gaussian-mixture negative log-likelihood of `targets`.
pub fn gmm_nll<T: Element>(g: &mut Graph<'_, T>, head: &GmmVars, targets: &[Vec<f64>]) -> Var {
    let (k, d) = (head.components, head.dim);
    let n = targets.len();
    let mut tiled = Tensor::zeros(n, k * d);
    for (i, t) in targets.iter().enumerate() {
        for c in 0..k {
            for j in 0..d {
                tiled.set(i, c * d + j, T::of(t[j]));
            }
        }
    }
    let target = g.constant(tiled);
    let diff = g.sub(head.mean, target);
    let sq = g.square(diff);
    let mahal = g.div(sq, head.variance);
    let log_var = g.log(head.variance);
    let per_dim = g.add(mahal, log_var);
    let blocks = block_sum(k, d, g);
    let per_comp = g.matmul(per_dim, blocks);
    let ll = g.scale(per_comp, T::of(-0.5));
    let ll = g.add_scalar(ll, T::of(-0.5 * d as f64 * LN_2PI));
    let joint = g.add(ll, head.log_weight);
    let lse = g.logsumexp_rows(joint);
    let s = g.sum(lse);
    g.scale(s, -T::one())
}

/// Constant `(blocks·width)×blocks` matrix summing each contiguous column block.
fn block_sum<T: Element>(blocks: usize, width: usize, g: &mut Graph<'_, T>) -> Var {
    let mut m = Tensor::zeros(blocks * width, blocks);
    for b in 0..blocks {
        for j in 0..width {
            m.set(b * width + j, b, T::one());
        }
    }
    g.constant(m)
}

/// Closest-mode motion loss. Returns the loss and the selected mode per agent.
pub fn motion_loss<T: Element>(
    g: &mut Graph<'_, T>,
    trajectories: Var,
    mode_log_probs: Var,
    targets: &[Vec<[f64; 3]>],
) -> (Var, Vec<usize>) {
    let modes = g.shape(mode_log_probs).1;
    let len = g.shape(trajectories).1 / modes;
    let n = targets.len();
    let mut tiled = Tensor::zeros(n, modes * len);
    for (i, t) in targets.iter().enumerate() {
        let flat: Vec<f64> = t.iter().flatten().copied().collect();
        assert_eq!(flat.len(), len, "target trajectory length");
        for k in 0..modes {
            for (j, &v) in flat.iter().enumerate() {
                tiled.set(i, k * len + j, T::of(v));
            }
        }
    }
    let target = g.constant(tiled);
    let diff = g.sub(trajectories, target);
    let sq = g.square(diff);
    let blocks = block_sum(modes, len, g);
    let sse = g.matmul(sq, blocks);
    let best: Vec<usize> = (0..n)
        .map(|i| {
            let row = g.value(sse).row(i);
            let mut best = 0;
            for k in 1..modes {
                if row[k] < row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    let at: Vec<(usize, usize)> = best.iter().enumerate().map(|(i, &k)| (i, k)).collect();
    let err = g.pick(sse, at.clone());
    let logp = g.pick(mode_log_probs, at);
    let per_agent = g.sub(err, logp);
    (g.sum(per_agent), best)
}

/// All three terms for one scene plus their weighted total.
pub fn compute_loss<T: Element>(
    g: &mut Graph<'_, T>,
    f: &ForwardVars,
    targets: &TrainingTargets,
    weights: &LossWeights,
) -> LossVars {
    let position = position_loss(g, f.lane_log_probs, &targets.lanes);
    let mut attr = None;
    for (head, values) in f.attributes.iter().zip(&targets.attributes) {
        let nll = gmm_nll(g, head, values);
        attr = Some(match attr {
            None => nll,
            Some(a) => g.add(a, nll),
        });
    }
    let attr = attr.expect("at least one attribute head");
    let (motion, _) = motion_loss(g, f.trajectories, f.mode_log_probs, &targets.trajectories);
    let wp = g.scale(position, T::of(weights.position));
    let wa = g.scale(attr, T::of(weights.attr));
    let wm = g.scale(motion, T::of(weights.motion));
    let pa = g.add(wp, wa);
    let total = g.add(pa, wm);
    LossVars { total, position, attr, motion }
}
