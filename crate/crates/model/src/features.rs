//! Numeric inputs to the generator: lane rows and sinusoidal code embeddings.

use scengen_core::code::StructuredScenario;
use scengen_core::scenario::{LaneType, LightState, MapRegion};

/// Width of one raw lane row: start (2), end (2), lane type one-hot (3), light one-hot (4).
pub const LANE_FEATURES: usize = 11;
const PE_BASE: f64 = 10_000.0;

/// Lane rows plus a validity mask; rows with `mask[i] == false` are padding.
#[derive(Debug, Clone, PartialEq)]
pub struct LaneFeatureInput {
    pub rows: Vec<[f64; LANE_FEATURES]>,
    pub mask: Vec<bool>,
}

impl LaneFeatureInput {
    pub fn from_map(map: &MapRegion, coord_scale: f64) -> Self {
        let rows = map
            .lanes
            .iter()
            .map(|l| {
                let mut row = [0.0; LANE_FEATURES];
                row[0] = l.start.x * coord_scale;
                row[1] = l.start.y * coord_scale;
                row[2] = l.end.x * coord_scale;
                row[3] = l.end.y * coord_scale;
                row[4 + l.lane_type.index()] = 1.0;
                row[4 + LaneType::ALL.len() + l.light.index()] = 1.0;
                row
            })
            .collect::<Vec<_>>();
        let mask = vec![true; rows.len()];
        Self { rows, mask }
    }

    /// Pad with masked zero rows up to `len`.
    pub fn padded(mut self, len: usize) -> Self {
        while self.rows.len() < len {
            self.rows.push([0.0; LANE_FEATURES]);
            self.mask.push(false);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn live_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn all_live(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }
}

const _: () = assert!(LANE_FEATURES == 4 + 3 + 4 && LightState::ALL.len() == 4);

/// Sinusoidal embedding of each integer field with `pairs` (sin, cos) pairs per field,
/// concatenated in field order.
pub fn positional_encoding(fields: &[i64], pairs: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(fields.len() * pairs * 2);
    for &v in fields {
        for j in 0..pairs {
            let freq = PE_BASE.powf(-(j as f64) / pairs as f64);
            let angle = v as f64 * freq;
            out.push(angle.sin());
            out.push(angle.cos());
        }
    }
    out
}

/// Per-agent embedding rows for a structured code.
pub fn agent_encodings(code: &StructuredScenario, pairs: usize) -> Vec<Vec<f64>> {
    code.agents.iter().map(|a| positional_encoding(&a.to_vec(), pairs)).collect()
}
