//! The YAML-like answer block: `Summary:` prose, a `Map:` vector and one vector per actor.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use scengen_core::code::{
    AgentAbstract, ClampWarning, DistanceBinning, MapAbstract, StructuredScenario, AGENT_CODE_LEN, MAP_CODE_LEN,
};
use scengen_core::scenario::MAX_AGENTS;

/// A line whose first bracket follows only labels (`Map:`, `Actor: 'V1':`, `- V2:`).
static VECTOR_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"^\s*(?:[-*]\s*)?((?:[^\[\]:]*:\s*)*)['"`]?\[([^\]]*)\]['"`]?\s*[,;.]?\s*$"#).expect("valid regex")
});

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("no `Map:` vector found")]
    MissingMap,
    #[error("more than one `Map:` vector (line {line})")]
    DuplicateMap { line: usize },
    #[error("line {line}: non-integer token {token:?}")]
    Token { line: usize, token: String },
    #[error("line {line}: {what} vector has {found} integers, expected {expected}")]
    Arity { line: usize, what: &'static str, found: usize, expected: usize },
    #[error("no actor vectors found")]
    NoActors,
}

/// Integer vectors exactly as written, before any range checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBlock {
    pub summary: String,
    pub map: Vec<i64>,
    pub agents: Vec<Vec<i64>>,
}

fn parse_ints(body: &str, line: usize) -> Result<Vec<i64>, BlockError> {
    body.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<i64>().map_err(|_| BlockError::Token { line, token: t.to_string() }))
        .collect()
}

fn is_map_label(labels: &str) -> bool {
    labels.split(':').any(|l| l.trim().trim_matches(['\'', '"', '`', '*']).eq_ignore_ascii_case("map"))
}

/// Tolerant scan of a model answer. Prose lines are skipped; vectors keep their listed order.
pub fn parse_block(raw: &str) -> Result<RawBlock, BlockError> {
    let mut map: Option<Vec<i64>> = None;
    let mut agents = Vec::new();
    let mut summary = Vec::new();
    let mut in_summary = false;
    for (i, text) in raw.lines().enumerate() {
        let line = i + 1;
        if let Some(caps) = VECTOR_LINE.captures(text) {
            in_summary = false;
            let values = parse_ints(&caps[2], line)?;
            if is_map_label(&caps[1]) {
                if map.is_some() {
                    return Err(BlockError::DuplicateMap { line });
                }
                if values.len() != MAP_CODE_LEN {
                    return Err(BlockError::Arity { line, what: "map", found: values.len(), expected: MAP_CODE_LEN });
                }
                map = Some(values);
            } else if map.is_some() {
                if values.len() != AGENT_CODE_LEN {
                    return Err(BlockError::Arity { line, what: "actor", found: values.len(), expected: AGENT_CODE_LEN });
                }
                agents.push(values);
            }
            continue;
        }
        let trimmed = text.trim();
        if let Some(rest) = trimmed.strip_prefix("Summary:") {
            in_summary = true;
            summary.push(rest.trim().to_string());
        } else if in_summary && !trimmed.is_empty() && !trimmed.contains(':') {
            summary.push(trimmed.to_string());
        } else {
            in_summary = false;
        }
    }
    let map = map.ok_or(BlockError::MissingMap)?;
    Ok(RawBlock { summary: summary.join(" ").trim().to_string(), map, agents })
}

impl RawBlock {
    /// Clamp every value into range, keep at most 32 actors, and report each adjustment.
    pub fn to_structured(&self, binning: &DistanceBinning) -> Result<(StructuredScenario, Vec<String>), BlockError> {
        if self.agents.is_empty() {
            return Err(BlockError::NoActors);
        }
        let mut warnings = Vec::new();
        let describe = |w: ClampWarning| w.message;
        let (map, w) = MapAbstract::from_slice_clamped(&self.map).map_err(|_| BlockError::Arity {
            line: 0,
            what: "map",
            found: self.map.len(),
            expected: MAP_CODE_LEN,
        })?;
        warnings.extend(w.into_iter().map(describe));
        let mut agents = Vec::with_capacity(self.agents.len().min(MAX_AGENTS));
        for (i, v) in self.agents.iter().enumerate() {
            if i == MAX_AGENTS {
                warnings.push(format!("{} actors listed; kept the first {MAX_AGENTS}", self.agents.len()));
                break;
            }
            let (a, w) = AgentAbstract::from_slice_clamped(v, binning).map_err(|_| BlockError::Arity {
                line: 0,
                what: "actor",
                found: v.len(),
                expected: AGENT_CODE_LEN,
            })?;
            warnings.extend(w.into_iter().map(|w| format!("V{}: {}", i + 1, w.message)));
            agents.push(a);
        }
        let code = StructuredScenario::new(map, agents).expect("clamped code is valid");
        Ok((code, warnings))
    }
}

/// Parse and clamp in one step.
pub fn parse_structured_block(raw: &str, binning: &DistanceBinning) -> Result<(StructuredScenario, Vec<String>), BlockError> {
    parse_block(raw)?.to_structured(binning)
}

fn list(values: &[i64]) -> String {
    let parts: Vec<String> = values.iter().map(i64::to_string).collect();
    format!("[{}]", parts.join(", "))
}

/// Canonical text form: `Map:` line, then `Actor:` with one `'Vi':` line per agent.
pub fn render_block(code: &StructuredScenario) -> String {
    let mut out = format!("Map: {}\nActor:\n", list(&code.map_abstract.to_vec()));
    for (i, a) in code.agents.iter().enumerate() {
        let _ = writeln!(out, "  'V{}': {}", i + 1, list(&a.to_vec()));
    }
    out
}

/// Canonical form preceded by a summary line.
pub fn render_answer(summary: &str, code: &StructuredScenario) -> String {
    format!("Summary: {summary}\n{}", render_block(code))
}
