//! Command-line entry points and the HTTP render service for `patchwarp`.

pub mod emit;
pub mod engine;
pub mod error;
pub mod server;

pub use emit::{emit_pairs, EmitConfig, EmitSummary, SamplerChoice};
pub use engine::{encode_png, Backend, Engine, EngineOptions, Output, RenderRequest, Rendered};
pub use error::{CliError, ErrorKind};
