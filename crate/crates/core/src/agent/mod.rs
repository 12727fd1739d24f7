//! LLM-driven trading agent: personas, prompts, response parsing, backends and
//! the daily decision loop.

pub mod backend;
pub mod memory;
pub mod parse;
pub mod persona;
pub mod prompt;
pub mod runtime;

pub use backend::{BackendError, ChatBackend, ChatBackendParams, HttpBackend, HttpBackendConfig, MockBackend, MockScript};
pub use memory::AgentMemory;
pub use parse::{parse_response, AgentResponse, ResponseError};
pub use persona::{Persona, PersonaError, PersonaId};
pub use prompt::{build_prompt, DailyPrompt, PromptContext};
pub use runtime::{Agent, AgentError, DayTrace, Episode, EpisodeFailure};
