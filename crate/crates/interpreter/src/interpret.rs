//! Language to structured code through a chat model, with bounded parse retries.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::Serialize;
use thiserror::Error;

use scengen_core::code::StructuredScenario;

use crate::block::{parse_block, render_block, BlockError};
use crate::client::{ChatClient, ChatMessage, TransportError};
use crate::prompt::{PromptMode, PromptTemplate};

pub const TEMPERATURE: f64 = 0.2;
pub const PARSE_RETRIES: usize = 2;
pub(crate) const CURRENT_MARKER: &str = "Current scenario:";
pub(crate) const INSTRUCTION_MARKER: &str = "Instruction:";

const CORRECTION: &str = "Your answer could not be parsed. Reply again with a `Map:` line holding 6 integers \
and one line per actor holding 8 integers, each list in square brackets, exactly as in the example.";

#[derive(Debug, Clone, PartialEq)]
pub struct InterpreterOutput {
    pub summary: String,
    pub structured: StructuredScenario,
    pub raw_response: String,
    /// Clamped values, truncated actor lists and, for edits, changed unmentioned agents.
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum InterpretError {
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("unparseable answer after {attempts} attempts: {source}")]
    Parse { attempts: usize, source: BlockError, raw_response: String },
    #[error("input code: {0}")]
    Code(#[from] scengen_core::ScenarioError),
}

impl InterpretError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, InterpretError::Transport(_))
    }
}

#[derive(Serialize)]
struct TranscriptRecord<'a> {
    mode: PromptMode,
    attempt: usize,
    temperature: f64,
    messages: &'a [ChatMessage],
    response: Result<&'a str, String>,
}

/// Prompt templates plus call settings; the client is supplied per call.
#[derive(Debug)]
pub struct Interpreter {
    pub generation: PromptTemplate,
    pub editing: PromptTemplate,
    pub temperature: f64,
    pub retries: usize,
    transcript: Option<Mutex<PathBuf>>,
}

impl Default for Interpreter {
    fn default() -> Self {
        Self::new(PromptTemplate::bundled(PromptMode::Generation), PromptTemplate::bundled(PromptMode::Editing))
    }
}

impl Interpreter {
    pub fn new(generation: PromptTemplate, editing: PromptTemplate) -> Self {
        Self { generation, editing, temperature: TEMPERATURE, retries: PARSE_RETRIES, transcript: None }
    }

    /// Append every request and response as JSON lines to `path`.
    pub fn with_transcript(mut self, path: impl Into<PathBuf>) -> Self {
        self.transcript = Some(Mutex::new(path.into()));
        self
    }

    fn record(&self, mode: PromptMode, attempt: usize, messages: &[ChatMessage], response: &Result<String, TransportError>) {
        let Some(path) = &self.transcript else { return };
        let path = path.lock().expect("transcript lock");
        let rec = TranscriptRecord {
            mode,
            attempt,
            temperature: self.temperature,
            messages,
            response: response.as_deref().map_err(ToString::to_string),
        };
        let written = OpenOptions::new().create(true).append(true).open(&*path).and_then(|mut f| {
            let mut line = serde_json::to_vec(&rec).map_err(std::io::Error::other)?;
            line.push(b'\n');
            f.write_all(&line)
        });
        if let Err(e) = written {
            log::warn!("could not write transcript {}: {e}", path.display());
        }
    }

    fn run(&self, mode: PromptMode, query: &str, client: &dyn ChatClient) -> Result<InterpreterOutput, InterpretError> {
        let template = match mode {
            PromptMode::Generation => &self.generation,
            PromptMode::Editing => &self.editing,
        };
        let binning = mode.binning();
        let mut messages = template.messages(query);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let response = client.send(&messages, self.temperature);
            self.record(mode, attempt, &messages, &response);
            let raw = response?;
            match parse_block(&raw).and_then(|b| b.to_structured(&binning).map(|(c, w)| (b.summary, c, w))) {
                Ok((summary, structured, warnings)) => {
                    for w in &warnings {
                        log::warn!("{mode} answer: {w}");
                    }
                    return Ok(InterpreterOutput { summary, structured, raw_response: raw, warnings });
                }
                Err(source) if attempt > self.retries => {
                    return Err(InterpretError::Parse { attempts: attempt, source, raw_response: raw });
                }
                Err(source) => {
                    log::info!("{mode} answer unparseable ({source}); retrying");
                    messages.push(ChatMessage::assistant(raw));
                    messages.push(ChatMessage::user(format!("{CORRECTION} ({source})")));
                }
            }
        }
    }

    /// Scenario description to code in 20 m distance bins.
    pub fn interpret(&self, text: &str, client: &dyn ChatClient) -> Result<InterpreterOutput, InterpretError> {
        if text.trim().is_empty() {
            return Err(InterpretError::EmptyInput("scenario description"));
        }
        self.run(PromptMode::Generation, text.trim(), client)
    }

    /// Edit a code expressed in 5 m distance bins. Agents the instruction does not name must
    /// come back unchanged; any that do not are reported as warnings.
    pub fn interpret_edit(
        &self,
        code: &StructuredScenario,
        instruction: &str,
        client: &dyn ChatClient,
    ) -> Result<InterpreterOutput, InterpretError> {
        code.validate()?;
        if instruction.trim().is_empty() {
            return Err(InterpretError::EmptyInput("edit instruction"));
        }
        let query = edit_query(code, instruction.trim());
        let mut out = self.run(PromptMode::Editing, &query, client)?;
        out.warnings.extend(unchanged_agent_violations(code, &out.structured, instruction));
        Ok(out)
    }
}

/// The user turn sent for an edit.
pub fn edit_query(code: &StructuredScenario, instruction: &str) -> String {
    format!("{CURRENT_MARKER}\n{}{INSTRUCTION_MARKER} {instruction}", render_block(code))
}

/// Agent indices (0-based) an instruction refers to: `V3`, `vehicle 3`, `car #3`, or the ego.
pub fn mentioned_agents(instruction: &str) -> Vec<usize> {
    static NUMBERED: std::sync::LazyLock<regex::Regex> = std::sync::LazyLock::new(|| {
        regex::Regex::new(r"(?i)\b(?:vehicle|car|agent|actor|v)\s*#?\s*(\d+)\b").expect("valid regex")
    });
    let mut out: Vec<usize> = NUMBERED
        .captures_iter(instruction)
        .filter_map(|c| c[1].parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .map(|n| n - 1)
        .collect();
    let lower = instruction.to_lowercase();
    if lower.contains("ego") || lower.contains("center car") {
        out.push(0);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Unmentioned input agents whose exact vector is missing from the edited code.
fn unchanged_agent_violations(before: &StructuredScenario, after: &StructuredScenario, instruction: &str) -> Vec<String> {
    let mentioned = mentioned_agents(instruction);
    let mut available: Vec<Option<[i64; 8]>> = after.agents.iter().map(|a| Some(a.to_vec())).collect();
    let mut warnings = Vec::new();
    for (i, a) in before.agents.iter().enumerate() {
        if mentioned.contains(&i) {
            continue;
        }
        let v = a.to_vec();
        match available.iter_mut().find(|slot| **slot == Some(v)) {
            Some(slot) => *slot = None,
            None => warnings.push(format!("V{} was not mentioned but changed or disappeared", i + 1)),
        }
    }
    warnings
}
