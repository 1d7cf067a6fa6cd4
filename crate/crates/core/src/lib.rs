//! Self-knowledge guided retrieval-augmented question answering.
//!
//! The crate covers the whole loop at desk scale:
//!
//! - [`probe`] samples answers to build a self-knowledge dataset
//!   (`acc_rate` per question, Known/Unknown labels);
//! - [`reward`] and [`grpo`] turn that into a reinforcement signal and train
//!   a toy yes/no policy with group-relative, entropy-weighted advantages;
//! - [`filter`] splits retrieved documents into sentences and keeps those that
//!   raise the model's confidence;
//! - [`retrieval`], [`pipeline`] and [`eval`] retrieve, answer in three modes,
//!   and report accuracy and context size.
//!
//! All model access goes through [`gateway::LanguageModel`]. The
//! [`gateway::MockBackend`] makes every stage deterministic, and
//! [`scenario`] builds scripted worlds for it.

pub mod config;
pub mod error;
pub mod eval;
pub mod filter;
pub mod gateway;
pub mod grpo;
pub mod io;
mod parallel;
pub mod pipeline;
pub mod probe;
pub mod retrieval;
pub mod reward;
pub mod scenario;
pub mod templates;

pub use error::{Error, Result};
