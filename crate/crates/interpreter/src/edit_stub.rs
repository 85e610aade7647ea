//! An offline stand-in for the language model on editing prompts.
//!
//! It reads the serialized code and the instruction out of the last user turn and applies a
//! handful of literal rules, answering in the canonical block format.

use scengen_core::code::{Action, AgentAbstract, DistanceBinning, Orientation, StructuredScenario};

use crate::block::{parse_structured_block, render_answer};
use crate::client::{ChatClient, ChatMessage, Role, TransportError};
use crate::interpret::{mentioned_agents, CURRENT_MARKER, INSTRUCTION_MARKER};

#[derive(Debug, Clone, Copy, Default)]
pub struct RuleEditClient;

fn target(instruction: &str) -> Option<usize> {
    mentioned_agents(instruction).first().copied()
}

fn added(quadrant: u8, ego: &AgentAbstract) -> AgentAbstract {
    AgentAbstract {
        quadrant,
        distance_bin: 2,
        orientation: Orientation::North,
        speed_bin: ego.speed_bin,
        actions: [Action::Forward; 4],
    }
}

/// Apply one instruction; returns the edited code and a one-line summary.
pub fn apply_rules(code: &StructuredScenario, instruction: &str) -> (StructuredScenario, String) {
    let lower = instruction.to_lowercase();
    let mut out = code.clone();
    let n = out.agents.len();
    let summary = if lower.contains("keep everything") || lower.contains("no change") || lower.contains("unchanged") {
        "Nothing changes.".to_string()
    } else if lower.contains("remove") || lower.contains("delete") {
        match target(instruction) {
            Some(0) => "The ego vehicle cannot be removed; nothing changes.".to_string(),
            Some(i) if i < n && n > 1 => {
                out.agents.remove(i);
                format!("V{} is removed; the other vehicles are unchanged.", i + 1)
            }
            _ => "No such vehicle; nothing changes.".to_string(),
        }
    } else if lower.contains("add") {
        let ego = out.agents[0];
        let (quadrant, where_) = if lower.contains("behind") || lower.contains("back") {
            (4, "behind")
        } else if lower.contains("left") {
            (2, "ahead on the left of")
        } else {
            (1, "in front of")
        };
        if n < scengen_core::scenario::MAX_AGENTS {
            out.agents.push(added(quadrant, &ego));
            format!("A new vehicle V{} drives {where_} the ego vehicle.", n + 1)
        } else {
            "The scene is full; nothing changes.".to_string()
        }
    } else {
        let actions = [
            ("turn left", [Action::Forward, Action::TurnLeft, Action::TurnLeft, Action::TurnLeft], None),
            ("turn right", [Action::Forward, Action::TurnRight, Action::TurnRight, Action::TurnRight], None),
            ("accelerat", [Action::Accelerate; 4], None),
            ("decelerat", [Action::Decelerate; 4], None),
            ("slow down", [Action::Decelerate; 4], None),
            ("stop", [Action::Stop; 4], Some(0)),
        ];
        match (actions.iter().find(|(k, _, _)| lower.contains(k)), target(instruction)) {
            (Some((key, acts, speed)), Some(i)) if i < n => {
                out.agents[i].actions = *acts;
                if let Some(s) = speed {
                    out.agents[i].speed_bin = *s;
                }
                format!("V{} now follows \"{key}\"; the other vehicles are unchanged.", i + 1)
            }
            _ => "The instruction is not understood; nothing changes.".to_string(),
        }
    };
    (out, summary)
}

impl ChatClient for RuleEditClient {
    fn send(&self, messages: &[ChatMessage], _temperature: f64) -> Result<String, TransportError> {
        let last = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| TransportError::Payload("no user turn".into()))?;
        let text = &last.content;
        let start = text.find(CURRENT_MARKER).ok_or_else(|| TransportError::Payload("no current scenario".into()))?;
        let split = text.find(INSTRUCTION_MARKER).ok_or_else(|| TransportError::Payload("no instruction".into()))?;
        if split < start {
            return Err(TransportError::Payload("instruction precedes the scenario".into()));
        }
        let (code, _) = parse_structured_block(&text[start + CURRENT_MARKER.len()..split], &DistanceBinning::EDITING)
            .map_err(|e| TransportError::Payload(e.to_string()))?;
        let instruction = text[split + INSTRUCTION_MARKER.len()..].trim();
        let (edited, summary) = apply_rules(&code, instruction);
        Ok(render_answer(&summary, &edited))
    }
}
