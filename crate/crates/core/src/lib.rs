//! Evaluation toolkit for weakly supervised object localization.
//!
//! The crate covers the full protocol: pseudo ground-truth boxes are built
//! from region proposals (a from-scratch Selective Search path, or ingested
//! RPN/CLIP artifacts) using only class-level supervision, binarization
//! thresholds are estimated on a validation split, and localization maps are
//! scored with IoU-family metrics — so model selection never touches manual
//! test-set boxes.

pub mod annotator;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod heatmap;
pub mod metrics;
pub mod perturb;
pub mod plot;
pub mod proposals;
pub mod selection;

mod union_find;

pub use error::{Error, Result};
pub use geometry::{BBox, BinaryMask, Connectivity, ExtractionMode};
pub use heatmap::{LocMap, NormalizedLocMap, ThresholdGrid};
pub use proposals::{ProposalSource, ScoredProposal};
