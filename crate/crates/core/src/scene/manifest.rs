use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::camera::{CameraRecord, PinholeCamera};
use super::image::RgbImage;
use crate::error::{Error, Result};
use crate::io;

/// One calibrated photo.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub id: String,
    pub photo_path: PathBuf,
    pub camera: PinholeCamera,
}

impl View {
    /// Loads the photo and checks it against the camera resolution.
    pub fn load_photo(&self) -> Result<RgbImage> {
        let img = RgbImage::load(&self.photo_path)?;
        if img.width() != self.camera.width || img.height() != self.camera.height {
            return Err(Error::DimensionMismatch(format!(
                "view {}: photo is {}x{}, camera expects {}x{}",
                self.id,
                img.width(),
                img.height(),
                self.camera.width,
                self.camera.height
            )));
        }
        Ok(img)
    }
}

/// Ordered, non-empty list of views with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewManifest {
    views: Vec<View>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    views: Vec<ViewRecord>,
}

#[derive(Serialize, Deserialize)]
struct ViewRecord {
    id: String,
    image: String,
    camera: CameraRecord,
}

impl ViewManifest {
    pub fn new(views: Vec<View>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::validation("manifest has no views"));
        }
        let mut seen = HashSet::new();
        for v in &views {
            if !seen.insert(v.id.as_str()) {
                return Err(Error::validation(format!("duplicate view id {:?}", v.id)));
            }
            v.camera
                .validate()
                .map_err(|e| Error::validation(format!("view {}: {e}", v.id)))?;
        }
        Ok(ViewManifest { views })
    }

    pub fn views(&self) -> &[View] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&View> {
        self.views.iter().find(|v| v.id == id)
    }

    pub fn ids(&self) -> Vec<&str> {
        self.views.iter().map(|v| v.id.as_str()).collect()
    }

    /// Relative image paths resolve against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_to_string(path)?;
        let file: ManifestFile =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let views = file
            .views
            .iter()
            .map(|rec| {
                let camera = PinholeCamera::try_from(&rec.camera)
                    .map_err(|e| Error::validation(format!("view {}: {e}", rec.id)))?;
                Ok(View {
                    id: rec.id.clone(),
                    photo_path: base.join(&rec.image),
                    camera,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ViewManifest::new(views)
    }

    /// Writes the manifest with image paths made relative to `path`'s
    /// directory where possible.
    pub fn save(&self, path: &Path) -> Result<()> {
        let base = path.parent().unwrap_or(Path::new(""));
        let file = ManifestFile {
            views: self
                .views
                .iter()
                .map(|v| ViewRecord {
                    id: v.id.clone(),
                    image: v
                        .photo_path
                        .strip_prefix(base)
                        .unwrap_or(&v.photo_path)
                        .to_string_lossy()
                        .into_owned(),
                    camera: CameraRecord::from(&v.camera),
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Invariant(e.to_string()))?;
        io::write_bytes_atomic(path, json.as_bytes())
    }
}
