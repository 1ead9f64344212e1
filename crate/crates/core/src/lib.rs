//! Virtual rephotography: evaluate 3D reconstructions by rendering them from
//! the poses of held-out photos and comparing the renders ("rephotos") with
//! the photos using masked image-difference metrics.
//!
//! The crate is organized bottom-up:
//!
//! * [`scene`]: pinhole cameras, view manifests, image and mask buffers.
//! * [`geometry`]: meshes and point clouds with PLY/OBJ IO.
//! * [`raster`]: deterministic z-buffered software renderer.
//! * [`metrics`]: Cb+Cr, 1-NCC, ZSSD, DSSIM and census error images.
//! * [`degrade`]: texture noise, geometry noise and mesh simplification.
//! * [`harness`]: fold splitting, evaluation, reports and statistics.
//! * [`errorproj`]: projecting error images back onto mesh vertices.
//! * [`synth`]: a procedural test scene.

pub mod degrade;
pub mod error;
pub mod errorproj;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod scene;
pub mod synth;

pub use crate::error::{Error, Result};
