//! Core engine for evolutionary, multi-agent research ideation.
//!
//! The engine evolves a population of entity clusters over a multi-level
//! knowledge graph, drives role-based agents through problem formulation,
//! collaborative exploration and structured review, and closes the loop with
//! evaluation-guided evolutionary operators plus two independent evaluation
//! harnesses (meta-review and tournament ranking).
//!
//! Module map:
//!
//! - [`graph`] — multi-level knowledge graph (disciplines, entities, edges)
//! - [`embedding`] — embedding acquisition, cosine similarity, clustering
//! - [`llm`] — chat-completion access, retry policy, structured extraction
//! - [`corpus`] — scientist dataset, role personas, team assembly
//! - [`problem`] — topic analysis and structured problem generation
//! - [`collab`] — task delegation, research state, hierarchical memory, ideas
//! - [`review`] — peer-review simulation, meta-review, tournament ranking
//! - [`evolution`] — cluster-level crossover/variation/selection/inheritance
//! - [`pipeline`] — end-to-end run controller with checkpoints and resume
//! - [`analysis`] — post-run convergence, term-growth and quality metrics

pub mod analysis;
pub mod collab;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evolution;
pub mod graph;
pub mod llm;
pub mod pipeline;
pub mod problem;
pub mod report;
pub mod review;
pub mod util;

pub use error::{Error, Result};
