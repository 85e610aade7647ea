//! Map retrieval: cut source maps into regions around driving-trace locations,
//! precompute each region's map abstract, and sample regions matching a query abstract.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{MapAbstract, MAP_CODE_LEN};
use crate::document::{map_from_json, map_to_json};
use crate::encoder::abstract_map_at_origin;
use crate::error::ScenarioError;
use crate::geometry::{point_segment_distance, Pose2, Vec2};
use crate::scenario::{MapRegion, MAX_LANES};
use crate::Point;

pub const REGION_RADIUS: f64 = 60.0;
pub const DEFAULT_TOP_K: usize = 10;
const MANIFEST: &str = "index.json";
const REGION_DIR: &str = "regions";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("no trace points given")]
    NoTraces,
    #[error("trace {index} refers to unknown map `{map_id}`")]
    UnknownMap { index: usize, map_id: String },
    #[error("no trace point produced a usable region ({skipped} skipped)")]
    NoRegions { skipped: usize },
    #[error("region index is empty")]
    EmptyIndex,
    #[error("region `{0}` not found in index")]
    UnknownRegion(String),
    #[error("index manifest is inconsistent: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A full source map that regions are cut from.
#[derive(Debug, Clone)]
pub struct SourceMap {
    pub map_id: String,
    pub map: MapRegion,
}

/// Location and heading of the automated vehicle at one point of a driving trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub map_id: String,
    #[serde(with = "point_array")]
    pub position: Point,
    pub heading: f64,
}

mod point_array {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Point, s: S) -> Result<S::Ok, S::Error> {
        [p.x, p.y].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point, D::Error> {
        let [x, y] = <[f64; 2]>::deserialize(d)?;
        Ok(Vec2::new(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub radius: f64,
    pub max_lanes: usize,
}

impl Default for BuildParams {
    fn default() -> Self {
        Self { radius: REGION_RADIUS, max_lanes: MAX_LANES }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub region: MapRegion,
    pub abstract_code: MapAbstract,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionIndex {
    entries: Vec<IndexEntry>,
    params: BuildParams,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedTrace {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct BuildReport {
    pub index: RegionIndex,
    pub skipped: Vec<SkippedTrace>,
}

/// Cut the region around one trace point, expressed in the trace frame (+x = trace heading).
/// Returns `None` when no lane lies within the radius.
pub fn extract_region(source: &SourceMap, trace: &TracePoint, region_id: String, params: &BuildParams) -> Option<MapRegion> {
    let mut near: Vec<(f64, usize)> = source
        .map
        .lanes
        .iter()
        .enumerate()
        .map(|(i, l)| (point_segment_distance(trace.position, l.start, l.end), i))
        .filter(|(d, _)| *d <= params.radius)
        .collect();
    if near.is_empty() {
        return None;
    }
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(source.map.lanes[a.1].id.cmp(&source.map.lanes[b.1].id)));
    near.truncate(params.max_lanes);
    let pose = Pose2::new(trace.position, trace.heading);
    let lanes = near
        .iter()
        .map(|&(_, i)| {
            let l = &source.map.lanes[i];
            crate::scenario::LaneSegment { start: pose.to_local(l.start), end: pose.to_local(l.end), ..l.clone() }
        })
        .collect();
    Some(MapRegion { region_id, center: Vec2::zero(), lanes })
}

pub fn build_region_index(
    maps: &[SourceMap],
    traces: &[TracePoint],
    params: &BuildParams,
) -> Result<BuildReport, RetrievalError> {
    if traces.is_empty() {
        return Err(RetrievalError::NoTraces);
    }
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (i, trace) in traces.iter().enumerate() {
        let source = maps
            .iter()
            .find(|m| m.map_id == trace.map_id)
            .ok_or_else(|| RetrievalError::UnknownMap { index: i, map_id: trace.map_id.clone() })?;
        let region_id = format!("{}-{i:05}", trace.map_id);
        let Some(region) = extract_region(source, trace, region_id, params) else {
            skipped.push(SkippedTrace { index: i, reason: "no lanes within radius".into() });
            continue;
        };
        match abstract_map_at_origin(&region) {
            Ok(abstract_code) => entries.push(IndexEntry { region, abstract_code }),
            Err(e) => skipped.push(SkippedTrace { index: i, reason: e.to_string() }),
        }
    }
    if !skipped.is_empty() {
        log::warn!("{} trace points skipped while building the region index", skipped.len());
    }
    if entries.is_empty() {
        return Err(RetrievalError::NoRegions { skipped: skipped.len() });
    }
    Ok(BuildReport { index: RegionIndex::from_entries(entries, *params), skipped })
}

/// Euclidean distance between two map abstracts.
pub fn abstract_distance(a: &MapAbstract, b: &MapAbstract) -> f64 {
    let (a, b) = (a.to_vec(), b.to_vec());
    (0..MAP_CODE_LEN).map(|i| ((a[i] - b[i]) as f64).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub struct Retrieved<'a> {
    pub region: &'a MapRegion,
    pub abstract_code: MapAbstract,
    pub distance: f64,
    /// Position of the picked region in the ranking (0 = closest).
    pub rank: usize,
    pub warnings: Vec<String>,
}

impl RegionIndex {
    pub fn from_entries(mut entries: Vec<IndexEntry>, params: BuildParams) -> Self {
        entries.sort_by(|a, b| a.region.region_id.cmp(&b.region.region_id));
        Self { entries, params }
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn params(&self) -> &BuildParams {
        &self.params
    }

    pub fn get(&self, region_id: &str) -> Option<&IndexEntry> {
        self.entries.iter().find(|e| e.region.region_id == region_id)
    }

    /// Entry indices sorted by distance to `query`, ties broken by region id.
    pub fn rank(&self, query: &MapAbstract) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> =
            self.entries.iter().enumerate().map(|(i, e)| (i, abstract_distance(query, &e.abstract_code))).collect();
        ranked.sort_by(|a, b| {
            a.1.total_cmp(&b.1).then_with(|| self.entries[a.0].region.region_id.cmp(&self.entries[b.0].region.region_id))
        });
        ranked
    }

    /// Sample uniformly among the `k` closest regions.
    pub fn retrieve(&self, query: &MapAbstract, k: usize, seed: u64) -> Result<Retrieved<'_>, RetrievalError> {
        if self.entries.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        let mut warnings = Vec::new();
        let k = if k == 0 {
            warnings.push("k = 0 raised to 1".to_string());
            1
        } else if k > self.entries.len() {
            warnings.push(format!("k = {k} clamped to index size {}", self.entries.len()));
            self.entries.len()
        } else {
            k
        };
        let ranked = self.rank(query);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = rng.random_range(0..k);
        let (i, distance) = ranked[rank];
        let e = &self.entries[i];
        Ok(Retrieved { region: &e.region, abstract_code: e.abstract_code, distance, rank, warnings })
    }

    pub fn save(&self, dir: &Path) -> Result<(), RetrievalError> {
        fs::create_dir_all(dir.join(REGION_DIR))?;
        let mut records = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let file = format!("{REGION_DIR}/{}.json", e.region.region_id);
            fs::write(dir.join(&file), map_to_json(&e.region))?;
            records.push(ManifestEntry {
                region_id: e.region.region_id.clone(),
                file,
                abstract_code: e.abstract_code.to_vec().to_vec(),
            });
        }
        let manifest = Manifest { format: 1, entry_count: records.len(), params: self.params, entries: records };
        fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    /// Load a persisted index and check every stored abstract against a fresh computation.
    pub fn load(dir: &Path) -> Result<Self, RetrievalError> {
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
        if manifest.entry_count != manifest.entries.len() {
            return Err(RetrievalError::Corrupt(format!(
                "entry_count {} but {} entries listed",
                manifest.entry_count,
                manifest.entries.len()
            )));
        }
        let mut entries = Vec::with_capacity(manifest.entries.len());
        for rec in manifest.entries {
            let region = map_from_json(&fs::read(dir.join(&rec.file))?)?;
            if region.region_id != rec.region_id {
                return Err(RetrievalError::Corrupt(format!("{} holds region {}", rec.file, region.region_id)));
            }
            let abstract_code = abstract_map_at_origin(&region)?;
            if abstract_code.to_vec().as_slice() != rec.abstract_code.as_slice() {
                return Err(RetrievalError::Corrupt(format!("stale abstract for {}", rec.region_id)));
            }
            entries.push(IndexEntry { region, abstract_code });
        }
        Ok(Self::from_entries(entries, manifest.params))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: u32,
    entry_count: usize,
    params: BuildParams,
    entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    region_id: String,
    file: String,
    #[serde(rename = "abstract")]
    abstract_code: Vec<i64>,
}
