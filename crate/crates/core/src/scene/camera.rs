use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROTATION_TOL: f64 = 1e-6;

/// Result of projecting a world point into an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Camera-space depth.
    pub z: f64,
    /// Set when `z <= 0`; `u` and `v` are meaningless in that case.
    pub behind: bool,
}

/// Rectified pinhole camera with a world-to-camera pose.
///
/// Convention: `x_c = R * x_w + t`, the camera looks down `+z`, the image
/// origin is the top-left corner and pixel centers sit on integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl PinholeCamera {
    /// Builds a camera and checks its invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let cam = PinholeCamera {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with `up` roughly pointing up in
    /// the image. Intrinsics use a centered principal point.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        focal: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::validation("look_at: eye and target coincide"))?;
        // Image y grows downwards, so the camera's y axis is "down".
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::validation("look_at: up is parallel to the view direction"))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        PinholeCamera::new(
            focal,
            focal,
            (width as f64 - 1.0) / 2.0,
            (height as f64 - 1.0) / 2.0,
            width,
            height,
            rotation,
            translation,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::validation(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() || !self.translation.iter().all(|x| x.is_finite()) {
            return Err(Error::validation("camera parameters must be finite"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("image dimensions must be at least 1x1"));
        }
        let r = &self.rotation;
        let ortho = (r * r.transpose() - Matrix3::identity()).abs().max();
        if !(ortho <= ROTATION_TOL) {
            return Err(Error::validation(format!(
                "rotation is not orthonormal (max |R*R^T - I| = {ortho:e})"
            )));
        }
        let det = r.determinant();
        if !((det - 1.0).abs() <= ROTATION_TOL) {
            return Err(Error::validation(format!(
                "rotation determinant must be +1, got {det}"
            )));
        }
        Ok(())
    }

    /// World point to camera coordinates.
    #[inline]
    pub fn to_camera(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// Camera coordinates to pixel coordinates. Caller guarantees `z > 0`.
    #[inline]
    pub fn camera_to_pixel(&self, pc: &Vector3<f64>) -> (f64, f64) {
        (
            self.fx * pc.x / pc.z + self.cx,
            self.fy * pc.y / pc.z + self.cy,
        )
    }

    pub fn project(&self, point: &Vector3<f64>) -> Projection {
        let pc = self.to_camera(point);
        if pc.z <= 0.0 {
            return Projection {
                u: f64::NAN,
                v: f64::NAN,
                z: pc.z,
                behind: true,
            };
        }
        let (u, v) = self.camera_to_pixel(&pc);
        Projection {
            u,
            v,
            z: pc.z,
            behind: false,
        }
    }

    /// Inverse of [`project`](Self::project): the world point at depth `z`
    /// along the ray through pixel `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        let pc = Vector3::new((u - self.cx) / self.fx * z, (v - self.cy) / self.fy * z, z);
        self.rotation.transpose() * (pc - self.translation)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Unit direction (world frame) of the ray through pixel `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let d = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        (self.rotation.transpose() * d).normalize()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// On-disk camera record used in view manifests.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CameraRecord {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
}

impl TryFrom<&CameraRecord> for PinholeCamera {
    type Error = Error;

    fn try_from(rec: &CameraRecord) -> Result<Self> {
        PinholeCamera::new(
            rec.fx,
            rec.fy,
            rec.cx,
            rec.cy,
            rec.width,
            rec.height,
            Matrix3::from_row_slice(&rec.r),
            Vector3::from_row_slice(&rec.t),
        )
    }
}

impl From<&PinholeCamera> for CameraRecord {
    fn from(cam: &PinholeCamera) -> Self {
        let mut r = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                r[row * 3 + col] = cam.rotation[(row, col)];
            }
        }
        CameraRecord {
            width: cam.width,
            height: cam.height,
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            r,
            t: [cam.translation.x, cam.translation.y, cam.translation.z],
        }
    }
}
