//! Detection of impact conflicts between concurrently running smart-home
//! services.
//!
//! The pipeline predicts the ambient trace produced by overlapping service
//! requests ([`dynamics`]), scores how far that trace strays from a
//! resident's requirement ([`stl`]), mines the resident's preferred range
//! from their history ([`preference`]) and combines the three into a
//! conflict likelihood ([`detection`]). [`ingest`] turns CASAS-style sensor
//! logs into service events and [`evaluation`] scores detectors against
//! planted ground truth.

// `!(x > 0.0)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dbscan;
pub mod detection;
pub mod dynamics;
pub mod error;
pub mod evaluation;
pub mod ingest;
pub mod model;
pub mod preference;
pub mod report;
pub mod signal;
pub mod stl;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    overlap_segment, EnvProperty, Impact, ImpactConflict, OverlapSegment, QualityAttribute,
    Service, ServiceEvent, ServiceRequest, TimeInterval, Timestamp,
};
pub use signal::Signal;
pub use stl::StlRequirement;
