//! Geolocation and height estimation of street furniture from street-level
//! imagery detections.
//!
//! Detections of each object class are turned into rays, rays from different
//! frames are intersected into candidate nodes, a binary MRF over the nodes
//! is minimized with QPBO, and the surviving nodes are clustered into object
//! instances with elevation estimates.

pub mod cluster;
pub mod config;
pub mod error;
pub mod eval;
pub mod exec;
pub mod geometry;
pub mod height;
pub mod io;
pub mod mrf;
pub mod pipeline;
pub mod qpbo;
pub mod sim;
pub mod survey;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use pipeline::{run_pipeline, ObjectInstance};
pub use survey::Survey;
