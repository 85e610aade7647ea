use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::document::scenario_from_json;
use crate::scenario::Scenario;

use super::{median_heuristic, mmd_squared, motion_errors, scenario_collision_rate, EvalError};

/// How the Gaussian kernel width is chosen for each attribute of each pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthPolicy {
    Median,
    Fixed(f64),
}

impl FromStr for BandwidthPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("median") {
            return Ok(Self::Median);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Self::Fixed(v)),
            _ => Err(format!("bandwidth must be `median` or a positive number, got `{s}`")),
        }
    }
}

impl Serialize for BandwidthPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Median => s.serialize_str("median"),
            Self::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl BandwidthPolicy {
    fn pick(&self, x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
        match *self {
            Self::Median => median_heuristic(x, y),
            Self::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AttributeValues {
    pub position: f64,
    pub heading: f64,
    pub speed: f64,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairMetrics {
    pub name: String,
    pub mmd: AttributeValues,
    pub bandwidth: AttributeValues,
    pub made: f64,
    pub mfde: f64,
    pub matched_agents: usize,
    pub surplus_agents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub mmd_position: f64,
    pub mmd_heading: f64,
    pub mmd_speed: f64,
    pub mmd_size: f64,
    pub made: f64,
    pub mfde: f64,
    pub scr: f64,
    pub pair_count: usize,
    pub generated_agents: usize,
    pub reference_agents: usize,
    pub surplus_agents: usize,
    pub bandwidth_policy: BandwidthPolicy,
    pub pairs: Vec<PairMetrics>,
}

type Features = [Vec<Vec<f64>>; 4];

fn features(s: &Scenario) -> Features {
    let init = || s.agents.iter().map(|a| (a, a.initial()));
    [
        init().map(|(_, st)| vec![st.position.x, st.position.y]).collect(),
        init().map(|(_, st)| vec![st.heading]).collect(),
        init().map(|(_, st)| vec![st.speed]).collect(),
        init().map(|(a, _)| vec![a.length, a.width]).collect(),
    ]
}

fn to_values(v: [f64; 4]) -> AttributeValues {
    AttributeValues { position: v[0], heading: v[1], speed: v[2], size: v[3] }
}

fn pair_metrics(name: &str, generated: &Scenario, reference: &Scenario, policy: BandwidthPolicy) -> Result<PairMetrics, EvalError> {
    let (g, r) = (features(generated), features(reference));
    let mut mmd = [0.0; 4];
    let mut bandwidth = [0.0; 4];
    for k in 0..4 {
        bandwidth[k] = policy.pick(&g[k], &r[k]);
        mmd[k] = mmd_squared(&g[k], &r[k], bandwidth[k])?;
    }
    let motion = motion_errors(generated, reference)?;
    Ok(PairMetrics {
        name: name.to_string(),
        mmd: to_values(mmd),
        bandwidth: to_values(bandwidth),
        made: motion.made,
        mfde: motion.mfde,
        matched_agents: motion.matched,
        surplus_agents: motion.surplus,
    })
}

/// Metrics over already-loaded `(name, generated, reference)` triples, in the given order.
pub fn evaluate_pairs(pairs: &[(String, Scenario, Scenario)], policy: BandwidthPolicy) -> Result<MetricReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoScenes);
    }
    let per_pair = pairs
        .iter()
        .map(|(name, g, r)| pair_metrics(name, g, r, policy))
        .collect::<Result<Vec<_>, _>>()?;
    let n = per_pair.len() as f64;
    let mean = |f: &dyn Fn(&PairMetrics) -> f64| per_pair.iter().map(f).sum::<f64>() / n;
    let generated: Vec<Scenario> = pairs.iter().map(|(_, g, _)| g.clone()).collect();
    Ok(MetricReport {
        mmd_position: mean(&|p| p.mmd.position),
        mmd_heading: mean(&|p| p.mmd.heading),
        mmd_speed: mean(&|p| p.mmd.speed),
        mmd_size: mean(&|p| p.mmd.size),
        made: mean(&|p| p.made),
        mfde: mean(&|p| p.mfde),
        scr: scenario_collision_rate(&generated)?,
        pair_count: pairs.len(),
        generated_agents: pairs.iter().map(|(_, g, _)| g.agents.len()).sum(),
        reference_agents: pairs.iter().map(|(_, _, r)| r.agents.len()).sum(),
        surplus_agents: per_pair.iter().map(|p| p.surplus_agents).sum(),
        bandwidth_policy: policy,
        pairs: per_pair,
    })
}

fn load_dir(dir: &Path) -> Result<BTreeMap<String, Scenario>, EvalError> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let scenario = scenario_from_json(&fs::read(&path)?)
            .and_then(|s| s.to_ego_frame())
            .map_err(|source| EvalError::Document { path: path.display().to_string(), source })?;
        out.insert(name, scenario);
    }
    Ok(out)
}

/// Pair scenario documents by filename and evaluate them. Both sides are moved to their
/// ego frame first so that generated and logged scenes share a coordinate convention.
pub fn evaluate_dataset(pred_dir: &Path, ref_dir: &Path, policy: BandwidthPolicy) -> Result<MetricReport, EvalError> {
    let mut pred = load_dir(pred_dir)?;
    let mut reference = load_dir(ref_dir)?;
    let orphans: Vec<String> = pred
        .keys()
        .filter(|k| !reference.contains_key(*k))
        .map(|k| format!("pred/{k}"))
        .chain(reference.keys().filter(|k| !pred.contains_key(*k)).map(|k| format!("ref/{k}")))
        .collect();
    if !orphans.is_empty() {
        return Err(EvalError::Orphans(orphans));
    }
    let names: Vec<String> = pred.keys().cloned().collect();
    let pairs: Vec<(String, Scenario, Scenario)> = names
        .into_iter()
        .map(|n| {
            let g = pred.remove(&n).expect("paired");
            let r = reference.remove(&n).expect("paired");
            (n, g, r)
        })
        .collect();
    evaluate_pairs(&pairs, policy)
}
