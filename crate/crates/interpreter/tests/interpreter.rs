use scengen_core::code::{Action, DistanceBinning};
use scengen_interpreter::block::{parse_structured_block, render_answer, render_block};
use scengen_interpreter::client::{ChatClient, Role, StubClient, TransportError};
use scengen_interpreter::corpus::{CRASH_REPORT, CRASH_REPORT_ANSWER};
use scengen_interpreter::interpret::{edit_query, mentioned_agents, PARSE_RETRIES, TEMPERATURE};
use scengen_interpreter::prompt::{PromptMode, PromptTemplate, TemplateError};
use scengen_interpreter::{BlockError, InterpretError, Interpreter, RuleEditClient};

const VALID: &str = "Summary: one car.\nMap: [1, 1, 0, 0, 0, 1]\nActor:\n  'V1': [1, 0, 0, 2, 4, 4, 4, 4]\n";

fn editing_code(text: &str) -> scengen_core::code::StructuredScenario {
    parse_structured_block(text, &DistanceBinning::EDITING).unwrap().0
}

#[test]
fn bundled_templates_are_valid_and_keep_their_bins() {
    for mode in [PromptMode::Generation, PromptMode::Editing] {
        let t = PromptTemplate::bundled(mode);
        t.validate().unwrap();
        assert_eq!(t.mode, mode);
        assert!(!t.few_shot_examples.is_empty());
        for (_, output) in &t.few_shot_examples {
            parse_structured_block(output, &mode.binning()).unwrap();
        }
    }
    assert!(PromptTemplate::bundled(PromptMode::Generation).representation_spec.contains("20 m bins"));
    assert!(PromptTemplate::bundled(PromptMode::Editing).representation_spec.contains("5 m bins"));
}

#[test]
fn template_declaring_the_wrong_bins_is_refused() {
    let mut t = PromptTemplate::bundled(PromptMode::Editing);
    t.representation_spec = t.representation_spec.replace("5 m bins", "20 m bins");
    assert!(matches!(t.validate(), Err(TemplateError::Binning { mode: PromptMode::Editing, .. })));
}

#[test]
fn template_file_round_trip_and_header_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    std::fs::write(&path, include_str!("../prompts/editing.txt")).unwrap();
    assert_eq!(PromptTemplate::from_file(&path).unwrap(), PromptTemplate::bundled(PromptMode::Editing));
    assert!("mode: editing\n[task]\nx".parse::<PromptTemplate>().is_err());
    assert!("version: 1\nmode: drawing\n".parse::<PromptTemplate>().is_err());
}

#[test]
fn messages_end_with_the_query() {
    let t = PromptTemplate::bundled(PromptMode::Generation);
    let m = t.messages("two cars");
    assert_eq!(m[0].role, Role::System);
    assert_eq!(m.last().unwrap().role, Role::User);
    assert_eq!(m.last().unwrap().content, "two cars");
    assert_eq!(m.len(), 2 + 2 * t.few_shot_examples.len());
}

#[test]
fn crash_report_through_stub() {
    let stub = StubClient::fixed(CRASH_REPORT_ANSWER);
    let out = Interpreter::default().interpret(CRASH_REPORT, &stub).unwrap();
    assert_eq!(out.structured.map_abstract.to_vec(), [2, 2, 2, 2, 1, 1]);
    assert_eq!(out.structured.agents.len(), 2);
    assert_eq!(out.structured.agents[0].to_vec(), [1, 0, 0, 5, 4, 4, 4, 4]);
    assert_eq!(out.structured.agents[1].to_vec(), [2, 0, 1, 3, 3, 1, 1, 1]);
    assert!(out.warnings.is_empty());
    assert!(out.summary.starts_with("V1 travels north"));
    let ex = stub.exchanges();
    assert_eq!(ex.len(), 1);
    assert_eq!(ex[0].temperature, TEMPERATURE);
    assert_eq!(ex[0].messages.last().unwrap().content, CRASH_REPORT.trim());
}

#[test]
fn stub_round_trip_is_identity() {
    let code = editing_code(VALID);
    let stub = StubClient::fixed(render_answer("same", &code));
    let out = Interpreter::default().interpret("anything", &stub).unwrap();
    assert_eq!(out.structured, code);
}

#[test]
fn parse_failures_are_retried_then_reported() {
    let stub = StubClient::fixed("I cannot produce that.");
    let err = Interpreter::default().interpret("two cars", &stub).unwrap_err();
    match &err {
        InterpretError::Parse { attempts, source, raw_response } => {
            assert_eq!(*attempts, PARSE_RETRIES + 1);
            assert_eq!(*source, BlockError::MissingMap);
            assert_eq!(raw_response, "I cannot produce that.");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(!err.is_retryable());
    let ex = stub.exchanges();
    assert_eq!(ex.len(), 3);
    // Each retry carries the rejected answer and a correction.
    assert_eq!(ex[2].messages.len(), ex[0].messages.len() + 4);
    assert_eq!(ex[1].messages[ex[0].messages.len()].role, Role::Assistant);
}

#[test]
fn a_retry_can_recover() {
    let stub = StubClient::scripted(vec![Ok("Map: [1, 2]".into()), Ok(VALID.into())], false);
    let out = Interpreter::default().interpret("one car", &stub).unwrap();
    assert_eq!(out.structured.agents.len(), 1);
    assert_eq!(stub.exchanges().len(), 2);
}

#[test]
fn transport_errors_are_not_retried_here() {
    let stub = StubClient::scripted(vec![Err(TransportError::Status(503)), Ok(VALID.into())], false);
    let err = Interpreter::default().interpret("one car", &stub).unwrap_err();
    assert!(matches!(err, InterpretError::Transport(TransportError::Status(503))));
    assert!(err.is_retryable());
    assert_eq!(stub.exchanges().len(), 1);
}

#[test]
fn empty_input_is_refused_before_any_call() {
    let stub = StubClient::fixed(VALID);
    assert!(matches!(Interpreter::default().interpret("  \n", &stub), Err(InterpretError::EmptyInput(_))));
    assert!(stub.exchanges().is_empty());
}

#[test]
fn transcript_records_each_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let stub = StubClient::scripted(vec![Ok("nothing".into()), Ok(VALID.into())], false);
    Interpreter::default().with_transcript(&path).interpret("one car", &stub).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["attempt"], 1);
    assert_eq!(records[1]["mode"], "generation");
    assert_eq!(records[1]["temperature"], TEMPERATURE);
    assert_eq!(records[1]["response"]["Ok"], VALID);
}

const FOUR: &str = "Map: [2, 2, 0, 0, 15, 1]\nActor:\n  'V1': [1, 0, 0, 4, 4, 4, 4, 4]\n  'V2': [1, 3, 0, 4, 4, 4, 4, 4]\n  'V3': [2, 6, 1, 3, 4, 4, 4, 4]\n  'V4': [4, 2, 0, 2, 4, 4, 4, 4]\n";

#[test]
fn remove_one_vehicle() {
    let code = editing_code(FOUR);
    let out = Interpreter::default().interpret_edit(&code, "Remove vehicle 3", &RuleEditClient).unwrap();
    assert_eq!(out.structured.agents.len(), 3);
    assert_eq!(out.structured.agents, vec![code.agents[0], code.agents[1], code.agents[3]]);
    assert!(out.warnings.is_empty(), "{:?}", out.warnings);
}

#[test]
fn add_vehicle_behind() {
    let code = editing_code(FOUR);
    let out = Interpreter::default().interpret_edit(&code, "Add a vehicle behind the ego car", &RuleEditClient).unwrap();
    assert_eq!(out.structured.agents.len(), 5);
    assert!([3, 4].contains(&out.structured.agents[4].quadrant));
    assert_eq!(&out.structured.agents[..4], &code.agents[..]);
    assert!(out.warnings.is_empty());
}

#[test]
fn keep_everything_is_identity() {
    let code = editing_code(FOUR);
    let out = Interpreter::default().interpret_edit(&code, "Keep everything the same", &RuleEditClient).unwrap();
    assert_eq!(out.structured, code);
}

#[test]
fn per_vehicle_action_edit() {
    let code = editing_code(FOUR);
    let out = Interpreter::default().interpret_edit(&code, "Make V2 stop", &RuleEditClient).unwrap();
    assert_eq!(out.structured.agents[1].actions, [Action::Stop; 4]);
    assert_eq!(out.structured.agents[1].speed_bin, 0);
    assert_eq!(out.structured.agents[2], code.agents[2]);
}

#[test]
fn changed_unmentioned_agents_are_reported() {
    let code = editing_code(FOUR);
    let mut tampered = code.clone();
    tampered.agents[2].speed_bin = 7;
    let stub = StubClient::fixed(render_answer("oops", &tampered));
    let out = Interpreter::default().interpret_edit(&code, "Make vehicle 4 accelerate", &stub).unwrap();
    assert_eq!(out.warnings, vec!["V3 was not mentioned but changed or disappeared".to_string()]);
    let exchanges = stub.exchanges();
    let query = &exchanges[0].messages.last().unwrap().content;
    assert_eq!(*query, edit_query(&code, "Make vehicle 4 accelerate"));
    assert!(query.contains(&render_block(&code)));
}

#[test]
fn mention_forms() {
    assert_eq!(mentioned_agents("V3 and vehicle 2 and car #5"), vec![1, 2, 4]);
    assert_eq!(mentioned_agents("the ego vehicle turns"), vec![0]);
    assert!(mentioned_agents("add a car behind").is_empty());
}

#[test]
fn edit_stub_rejects_foreign_prompts() {
    let m = vec![scengen_interpreter::ChatMessage::user("hello")];
    assert!(matches!(RuleEditClient.send(&m, 0.2), Err(TransportError::Payload(_))));
}
