//! Skill grounding for legged robots.
//!
//! The crate covers the offline half (distilling an LLM into a skill
//! database of motion descriptors) and the online half (retrieving the
//! descriptor that best matches a text or image query, then applying it
//! through the gait-phase schedule or the velocity-limit governor).
//!
//! Data-parallel inner loops (index construction, similarity scans,
//! evaluation sweeps, batch dispatch) go through [`par`], which uses rayon
//! when the `parallel` feature is enabled and plain iterators otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptor;
pub mod fixture;
pub mod gait;
pub mod genpipe;
pub mod nav;
pub mod par;
pub mod retrieval;
pub mod skilldb;

pub use descriptor::{BipedDescriptor, DescriptorBounds, GaitClass, MotionDescriptor, Violation};
pub use gait::{ComplianceConfig, GaitState};
pub use retrieval::{
    EncoderBackend, EmbeddingIndex, Method, Query, RasterImage, RetrievalResult,
};
pub use skilldb::{Category, SkillDatabase, SkillRecord};
