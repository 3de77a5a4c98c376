//! Crowd synthesis from exemplar video.
//!
//! The pipeline extracts sparse motion vectors from an input frame sequence,
//! aggregates them into per-cell orientation histograms, clusters the
//! survivors into spatially local dominant directions, grows those into
//! global paths, simulates a crowd of collision-avoiding agents following
//! per-agent diversified versions of the paths, renders the simulation back
//! into frames, and scores the result against the exemplar with sliding
//! window histograms of motion.

pub mod config;
pub mod error;
pub mod flow;
pub mod frame;
pub mod grid;
pub mod math;
pub mod pathgen;
pub mod pipeline;
pub mod scene;
pub mod score;
pub mod sim;
pub mod spectral;

pub use error::{Error, Result};
pub use frame::{FrameSequence, GrayFrame};
pub use math::Vec2;
