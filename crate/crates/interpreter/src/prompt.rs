//! Prompt templates stored as sectioned plain-text files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use scengen_core::code::DistanceBinning;

use crate::client::ChatMessage;

const GENERATION: &str = include_str!("../prompts/generation.txt");
const EDITING: &str = include_str!("../prompts/editing.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptMode {
    Generation,
    Editing,
}

impl PromptMode {
    /// Distance binning the mode's representation text describes.
    pub fn binning(self) -> DistanceBinning {
        match self {
            PromptMode::Generation => DistanceBinning::GENERATION,
            PromptMode::Editing => DistanceBinning::EDITING,
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptMode::Generation => "generation",
            PromptMode::Editing => "editing",
        })
    }
}

impl FromStr for PromptMode {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "generation" => Ok(PromptMode::Generation),
            "editing" => Ok(PromptMode::Editing),
            other => Err(TemplateError::Header(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template header: {0}")]
    Header(String),
    #[error("template is missing section [{0}]")]
    MissingSection(&'static str),
    #[error("unknown template section [{0}]")]
    UnknownSection(String),
    #[error("example output without a preceding example input")]
    UnpairedExample,
    #[error("{mode} template must describe {width} m distance bins")]
    Binning { mode: PromptMode, width: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub version: u32,
    pub mode: PromptMode,
    pub task_description: String,
    pub cot_instructions: String,
    pub representation_spec: String,
    pub guidelines: String,
    pub few_shot_examples: Vec<(String, String)>,
}

impl PromptTemplate {
    /// The template shipped with the crate.
    pub fn bundled(mode: PromptMode) -> Self {
        let text = match mode {
            PromptMode::Generation => GENERATION,
            PromptMode::Editing => EDITING,
        };
        text.parse().expect("bundled prompt templates are valid")
    }

    pub fn from_file(path: &Path) -> Result<Self, TemplateError> {
        std::fs::read_to_string(path)?.parse()
    }

    /// The mode's distance-bin width must appear in the representation text.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let width = self.mode.binning().width;
        let phrase = format!("{width} m bins");
        if !self.representation_spec.contains(&phrase) {
            return Err(TemplateError::Binning { mode: self.mode, width });
        }
        Ok(())
    }

    pub fn system_prompt(&self) -> String {
        format!(
            "{}\n\nHow to think:\n{}\n\nStructured representation:\n{}\n\nGuidelines:\n{}",
            self.task_description, self.cot_instructions, self.representation_spec, self.guidelines
        )
    }

    /// System prompt, few-shot turns, then the query as the final user turn.
    pub fn messages(&self, query: &str) -> Vec<ChatMessage> {
        let mut m = vec![ChatMessage::system(self.system_prompt())];
        for (input, output) in &self.few_shot_examples {
            m.push(ChatMessage::user(input.clone()));
            m.push(ChatMessage::assistant(output.clone()));
        }
        m.push(ChatMessage::user(query.to_string()));
        m
    }
}

impl FromStr for PromptTemplate {
    type Err = TemplateError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut version = None;
        let mut mode = None;
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in text.lines() {
            let trimmed = line.trim();
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                if !name.contains(' ') && !name.contains(',') {
                    sections.push((name.to_string(), String::new()));
                    continue;
                }
            }
            match sections.last_mut() {
                Some((_, body)) => {
                    body.push_str(line);
                    body.push('\n');
                }
                None if trimmed.is_empty() => {}
                None => {
                    let (key, value) = trimmed
                        .split_once(':')
                        .ok_or_else(|| TemplateError::Header(format!("expected `key: value`, found {trimmed:?}")))?;
                    match key.trim() {
                        "version" => {
                            version = Some(value.trim().parse().map_err(|_| TemplateError::Header(format!("bad version {value:?}")))?)
                        }
                        "mode" => mode = Some(value.parse()?),
                        other => return Err(TemplateError::Header(format!("unknown key {other:?}"))),
                    }
                }
            }
        }
        let mut t = PromptTemplate {
            version: version.ok_or_else(|| TemplateError::Header("missing version".into()))?,
            mode: mode.ok_or_else(|| TemplateError::Header("missing mode".into()))?,
            task_description: String::new(),
            cot_instructions: String::new(),
            representation_spec: String::new(),
            guidelines: String::new(),
            few_shot_examples: Vec::new(),
        };
        let mut pending_input: Option<String> = None;
        for (name, body) in sections {
            let body = body.trim().to_string();
            match name.as_str() {
                "task" => t.task_description = body,
                "chain_of_thought" => t.cot_instructions = body,
                "representation" => t.representation_spec = body,
                "guidelines" => t.guidelines = body,
                "example_input" => pending_input = Some(body),
                "example_output" => {
                    let input = pending_input.take().ok_or(TemplateError::UnpairedExample)?;
                    t.few_shot_examples.push((input, body));
                }
                _ => return Err(TemplateError::UnknownSection(name)),
            }
        }
        if pending_input.is_some() {
            return Err(TemplateError::UnpairedExample);
        }
        for (name, body) in [
            ("task", &t.task_description),
            ("chain_of_thought", &t.cot_instructions),
            ("representation", &t.representation_spec),
            ("guidelines", &t.guidelines),
        ] {
            if body.is_empty() {
                return Err(TemplateError::MissingSection(name));
            }
        }
        t.validate()?;
        Ok(t)
    }
}
