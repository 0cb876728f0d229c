//! Long-term body identification toolkit.
//!
//! Covers the full evaluation loop for body-shape identification on
//! precomputed features: corpus ingestion, image preprocessing, gallery/probe
//! template aggregation, CMC/ROC metrics, batch-hard triplet training of
//! embedding heads, clothing-disjoint protocols, a synthetic identity world,
//! and the experiment harness that strings them together.

pub mod corpus;
pub mod harness;
pub mod imageprep;
pub mod linalg;
pub mod metrics;
pub mod partitioner;
pub mod synthworld;
pub mod templates;
pub mod trainer;
