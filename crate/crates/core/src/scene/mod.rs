//! Cameras, view manifests and image buffers shared by every other module.

mod camera;
mod image;
mod manifest;

pub use self::camera::{CameraRecord, PinholeCamera, Projection};
pub use self::image::{read_pfm, write_pfm, Mask, Rgb, RgbImage};
pub use self::manifest::{View, ViewManifest};
