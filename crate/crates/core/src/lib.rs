//! Core of the octoplace placement engine.
//!
//! Given a scene image and the name of a virtual object, octoplace chains
//! region segmentation, patch captioning, noun extraction, visual question
//! answering, LLM noun selection and text grounding to pick a placement
//! pixel, then casts a ray into the scene to find the 3D anchor point.
//!
//! This crate holds everything that does not need an operating system:
//!
//! - [`scene`]: RGB images, depth scenes, intrinsics, boxes and cropping.
//! - [`capability`]: data types exchanged with the model capabilities
//!   (masks, POS tags, yes/no answers, heatmaps) and the rules that
//!   normalize raw provider output into them.
//! - [`pipeline`]: the pure steps between model calls (box extraction,
//!   noun filtering, prompt templates, selection parsing, heatmap argmax).
//! - [`geometry`]: pinhole rays, depth unprojection and first-hit mesh
//!   ray casting.
//! - [`evaluation`]: placement records, blinded pairwise schedules,
//!   judgments and win/tie/lose summaries.
//!
//! File formats, model backends, the orchestrator, the CLI and the judgment
//! service live in the `octoplace` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod capability;
pub mod evaluation;
pub mod geometry;
pub mod pipeline;
pub mod scene;

pub use capability::{Heatmap, PosTaggedToken, RegionMask, YesNoAnswer};
pub use geometry::{Ray, SceneModel, TriangleMesh, Vec3};
pub use scene::{
    BoundingBox, CameraIntrinsics, DepthScene, Placement2D, Placement3D, SceneImage,
};
