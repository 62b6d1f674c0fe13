//! Field parcel delineation from aerial imagery.
//!
//! The pipeline turns an edge-probability map into candidate parcels,
//! drops implausible shapes, splits under-segmented parcels, and labels the
//! survivors as agricultural or not. An evaluation module scores detections
//! against ground-truth polygons.

pub mod classify;
pub mod edges;
pub mod error;
pub mod extract;
pub mod evaluate;
pub mod filter;
pub mod geojson;
pub mod geometry;
pub mod raster;
pub mod scalar;
pub mod split;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type EdgeMap = edges::EdgeMap<f64>;
pub type EdgeMap32 = edges::EdgeMap<f32>;
pub type HysteresisParams = edges::HysteresisParams<f64>;
pub type DirectionalDistanceField = geometry::DirectionalDistanceField<f64>;
pub type ConvexHull = geometry::ConvexHull<f64>;
pub type ExtractionParams = extract::ExtractionParams<f64>;
pub type ShapeThresholds = filter::ShapeThresholds<f64>;
pub type SplitParams = split::SplitParams<f64>;
pub type Cut = split::Cut<f64>;
