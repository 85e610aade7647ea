//! Natural language to structured scenario codes.
//!
//! [`Interpreter`] drives a [`ChatClient`] with the bundled prompt templates and parses the
//! answer block; [`fallback_interpret`] covers the attribute-description grammar offline.

pub mod block;
pub mod client;
pub mod corpus;
pub mod edit_stub;
pub mod fallback;
pub mod interpret;
pub mod prompt;

pub use block::{parse_block, parse_structured_block, render_answer, render_block, BlockError, RawBlock};
pub use client::{ChatClient, ChatConfig, ChatMessage, HttpChatClient, Role, StubClient, TransportError};
pub use edit_stub::RuleEditClient;
pub use fallback::{fallback_interpret, GrammarError};
pub use interpret::{InterpretError, Interpreter, InterpreterOutput};
pub use prompt::{PromptMode, PromptTemplate};
