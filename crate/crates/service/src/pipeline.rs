//! Language → code → region → scenario, and the three-stage editing loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use scengen_core::code::{DistanceBinning, StructuredScenario};
use scengen_core::document::{code_to_value, scenario_from_json, scenario_to_json};
use scengen_core::encoder::encode_scenario;
use scengen_core::retrieval::{RegionIndex, RetrievalError};
use scengen_core::scenario::{MapRegion, Scenario};
use scengen_interpreter::block::render_block;
use scengen_interpreter::{fallback_interpret, ChatClient, InterpretError, Interpreter, RuleEditClient};
use scengen_model::Generator32;

use crate::store::{document_id, ScenarioStore};

const EXCERPT_CHARS: usize = 400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub text: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub k: Option<usize>,
    /// A region id, or a source-map id restricting retrieval to regions cut from that map.
    #[serde(default)]
    pub map_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub id: String,
    pub scenario: serde_json::Value,
    /// Structured code in 20 m distance bins.
    pub code: serde_json::Value,
    pub region_id: String,
    pub summary: String,
    pub warnings: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRequest {
    #[serde(default)]
    pub scenario_id: Option<String>,
    #[serde(default)]
    pub scenario: Option<serde_json::Value>,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub id: String,
    pub scenario: serde_json::Value,
    /// Edited code in 5 m distance bins.
    pub code: serde_json::Value,
    /// Input scenario's code in 5 m distance bins.
    pub code_before: serde_json::Value,
    pub region_id: String,
    pub summary: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    NotFound(String),
    #[error("interpreter failed: {message}")]
    Interpreter { message: String, raw_excerpt: Option<String> },
    #[error("{0}")]
    Unavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::Validation(_) => 400,
            ServiceError::NotFound(_) => 404,
            ServiceError::Interpreter { .. } => 502,
            ServiceError::Unavailable(_) => 503,
            ServiceError::Internal(_) => 500,
        }
    }
}

fn excerpt(raw: &str) -> String {
    raw.chars().take(EXCERPT_CHARS).collect()
}

impl From<InterpretError> for ServiceError {
    fn from(e: InterpretError) -> Self {
        match e {
            InterpretError::EmptyInput(what) => ServiceError::Validation(format!("empty {what}")),
            InterpretError::Code(e) => ServiceError::Validation(e.to_string()),
            InterpretError::Parse { ref raw_response, .. } => {
                ServiceError::Interpreter { raw_excerpt: Some(excerpt(raw_response)), message: e.to_string() }
            }
            InterpretError::Transport(t) => ServiceError::Interpreter { message: t.to_string(), raw_excerpt: None },
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(format!("scenario store: {e}"))
    }
}

/// How language is turned into codes.
pub enum Interpretation {
    /// Fallback grammar for generation, rule-based client for edits; no network.
    Offline,
    /// A chat model used with the generation and editing prompts.
    Chat(Box<dyn ChatClient>),
}

/// Shared read-only state behind every request.
pub struct Pipeline {
    pub model: Generator32,
    pub index: RegionIndex,
    pub interpreter: Interpreter,
    pub interpretation: Interpretation,
    /// Where results are persisted; without one, ids are still content hashes.
    pub store: Option<ScenarioStore>,
    pub default_k: usize,
    pub default_seed: Option<u64>,
}

fn document_value(doc: &[u8]) -> serde_json::Value {
    serde_json::from_slice(doc).expect("stored documents are JSON")
}

impl Pipeline {
    pub fn is_offline(&self) -> bool {
        matches!(self.interpretation, Interpretation::Offline)
    }

    fn interpret(&self, text: &str) -> Result<(String, StructuredScenario, Vec<String>), ServiceError> {
        if text.trim().is_empty() {
            return Err(ServiceError::Validation("text must not be empty".into()));
        }
        match &self.interpretation {
            Interpretation::Offline => {
                let code = fallback_interpret(text).map_err(|e| ServiceError::Validation(e.to_string()))?;
                let summary = format!("Offline interpretation: {} agents.", code.agents.len());
                Ok((summary, code, Vec::new()))
            }
            Interpretation::Chat(client) => {
                let out = self.interpreter.interpret(text, client.as_ref())?;
                Ok((out.summary, out.structured, out.warnings))
            }
        }
    }

    fn candidate_index(&self, map_id: Option<&str>) -> Result<Option<RegionIndex>, ServiceError> {
        let Some(map_id) = map_id else { return Ok(None) };
        let prefix = format!("{map_id}-");
        let entries: Vec<_> = self
            .index
            .entries()
            .iter()
            .filter(|e| e.region.region_id == map_id || e.region.region_id.starts_with(&prefix))
            .cloned()
            .collect();
        if entries.is_empty() {
            return Err(ServiceError::NotFound(format!("no region or source map `{map_id}` in the index")));
        }
        Ok(Some(RegionIndex::from_entries(entries, *self.index.params())))
    }

    fn retrieve(&self, code: &StructuredScenario, req: &GenerateRequest, seed: u64) -> Result<(MapRegion, Vec<String>), ServiceError> {
        let restricted = self.candidate_index(req.map_id.as_deref())?;
        let index = restricted.as_ref().unwrap_or(&self.index);
        let k = req.k.unwrap_or(self.default_k);
        match index.retrieve(&code.map_abstract, k, seed) {
            Ok(r) => Ok((r.region.clone(), r.warnings)),
            Err(RetrievalError::EmptyIndex) => Err(ServiceError::Unavailable("the region index is empty".into())),
            Err(e) => Err(ServiceError::Internal(e.to_string())),
        }
    }

    fn synthesize(&self, code: &StructuredScenario, map: &MapRegion) -> Result<(String, Vec<u8>, Vec<String>), ServiceError> {
        let (scenario, warnings) = self.model.generate(code, map).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let (id, doc) = match &self.store {
            Some(store) => store.put(&scenario)?,
            None => {
                let doc = scenario_to_json(&scenario);
                (document_id(&doc), doc)
            }
        };
        Ok((id, doc, warnings))
    }

    pub fn generate(&self, req: &GenerateRequest) -> Result<GenerateResponse, ServiceError> {
        let (summary, code, mut warnings) = self.interpret(&req.text)?;
        let seed = req.seed.or(self.default_seed).unwrap_or_else(rand::random);
        let (region, w) = self.retrieve(&code, req, seed)?;
        warnings.extend(w);
        let (id, doc, w) = self.synthesize(&code, &region)?;
        warnings.extend(w);
        log::info!("generated {id} on {} (seed {seed})", region.region_id);
        Ok(GenerateResponse {
            id,
            scenario: document_value(&doc),
            code: code_to_value(&code),
            region_id: region.region_id,
            summary,
            warnings,
            seed,
        })
    }

    fn stored(&self, id: &str) -> Result<Option<Scenario>, ServiceError> {
        match &self.store {
            Some(store) => Ok(store.get(id)?),
            None => Ok(None),
        }
    }

    /// Stored document bytes for `id`.
    pub fn document(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        let bytes = match &self.store {
            Some(store) => store.get_bytes(id)?,
            None => None,
        };
        bytes.ok_or_else(|| ServiceError::NotFound(format!("unknown scenario `{id}`")))
    }

    fn edit_input(&self, req: &EditRequest) -> Result<Scenario, ServiceError> {
        match (&req.scenario_id, &req.scenario) {
            (Some(id), None) => self.stored(id)?.ok_or_else(|| ServiceError::NotFound(format!("unknown scenario `{id}`"))),
            (None, Some(doc)) => {
                let bytes = serde_json::to_vec(doc).map_err(|e| ServiceError::Validation(e.to_string()))?;
                scenario_from_json(&bytes).map_err(|e| ServiceError::Validation(format!("scenario: {e}")))
            }
            _ => Err(ServiceError::Validation("give exactly one of `scenario_id` and `scenario`".into())),
        }
    }

    pub fn edit(&self, req: &EditRequest) -> Result<EditResponse, ServiceError> {
        let scenario = self.edit_input(req)?;
        if req.instruction.trim().is_empty() {
            return Err(ServiceError::Validation("instruction must not be empty".into()));
        }
        let before = encode_scenario(&scenario, &DistanceBinning::EDITING)
            .map_err(|e| ServiceError::Validation(format!("scenario cannot be encoded: {e}")))?;
        let client: &dyn ChatClient = match &self.interpretation {
            Interpretation::Offline => &RuleEditClient,
            Interpretation::Chat(client) => client.as_ref(),
        };
        let out = self.interpreter.interpret_edit(&before, &req.instruction, client)?;
        let generation_code = out.structured.rebinned(&DistanceBinning::EDITING, &DistanceBinning::GENERATION);
        let mut warnings = out.warnings;
        let (id, doc, w) = self.synthesize(&generation_code, &scenario.map)?;
        warnings.extend(w);
        log::info!("edited into {id}:\n{}", render_block(&out.structured));
        Ok(EditResponse {
            id,
            scenario: document_value(&doc),
            code: code_to_value(&out.structured),
            code_before: code_to_value(&before),
            region_id: scenario.map.region_id.clone(),
            summary: out.summary,
            warnings,
        })
    }
}
