//! Masked image-difference metrics.
//!
//! Every metric produces an [`ErrorImage`]: a non-negative value per pixel
//! plus a flag telling whether the pixel is defined. Only pixels the
//! reconstruction rendered can be defined; patch metrics additionally need
//! enough rendered support around the pixel.

mod color;
mod patch;

pub use self::color::{cbcr_error, image_to_ycbcr, luma, rgb_to_ycbcr};
pub use self::patch::{census_error, dssim_error, ncc_error, zssd_error};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{read_pfm, write_pfm, Mask, RgbImage};

/// Per-pixel error with a defined-pixel flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorImage {
    width: u32,
    height: u32,
    value: Vec<f64>,
    defined: Vec<bool>,
}

impl ErrorImage {
    pub fn undefined(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        ErrorImage {
            width,
            height,
            value: vec![0.0; n],
            defined: vec![false; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Raw values; entries at undefined pixels are 0.
    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn defined(&self) -> &[bool] {
        &self.defined
    }

    pub fn get(&self, x: u32, y: u32) -> Option<f64> {
        self.get_index(y as usize * self.width as usize + x as usize)
    }

    pub fn get_index(&self, i: usize) -> Option<f64> {
        self.defined[i].then(|| self.value[i])
    }

    pub fn set_index(&mut self, i: usize, v: f64) {
        self.value[i] = v;
        self.defined[i] = true;
    }

    pub fn iter_defined(&self) -> impl Iterator<Item = f64> + '_ {
        self.value
            .iter()
            .zip(&self.defined)
            .filter_map(|(&v, &d)| d.then_some(v))
    }

    pub fn defined_count(&self) -> usize {
        self.defined.iter().filter(|&&d| d).count()
    }

    /// Multiplies every defined value by `factor`.
    pub fn scaled(&self, factor: f64) -> ErrorImage {
        let mut out = self.clone();
        for (v, &d) in out.value.iter_mut().zip(&self.defined) {
            if d {
                *v *= factor;
            }
        }
        out
    }

    /// Writes a grayscale PFM; undefined pixels are stored as NaN.
    pub fn save_pfm(&self, path: &Path) -> Result<()> {
        let values: Vec<f32> = self
            .value
            .iter()
            .zip(&self.defined)
            .map(|(&v, &d)| if d { v as f32 } else { f32::NAN })
            .collect();
        write_pfm(path, self.width, self.height, &values)
    }

    /// Reads a PFM written by [`save_pfm`](Self::save_pfm); non-finite
    /// entries become undefined.
    pub fn load_pfm(path: &Path) -> Result<Self> {
        let (width, height, raw) = read_pfm(path)?;
        let mut img = ErrorImage::undefined(width, height);
        for (i, v) in raw.into_iter().enumerate() {
            if v.is_finite() {
                if v < 0.0 {
                    return Err(Error::validation(format!(
                        "{}: negative error value {v}",
                        path.display()
                    )));
                }
                img.set_index(i, v as f64);
            }
        }
        Ok(img)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cbcr,
    Ncc,
    Zssd,
    Dssim,
    Census,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Cbcr, Metric::Ncc, Metric::Zssd, Metric::Dssim, Metric::Census];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cbcr => "cbcr",
            Metric::Ncc => "ncc",
            Metric::Zssd => "zssd",
            Metric::Dssim => "dssim",
            Metric::Census => "census",
        }
    }

    /// Parses a comma-separated list such as `ncc,cbcr`.
    pub fn parse_list(s: &str) -> Result<Vec<Metric>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: Metric = part.parse()?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::validation("no metrics given"));
        }
        Ok(out)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown metric {s:?} (expected one of cbcr, ncc, zssd, dssim, census)"
                ))
            })
    }
}

/// Shared patch parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Odd window side in pixels.
    pub patch: u32,
    /// Minimum fraction of the window that must be rendered.
    pub min_valid_fraction: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            patch: 15,
            min_valid_fraction: 0.5,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch < 3 || self.patch % 2 == 0 {
            return Err(Error::validation(format!(
                "patch size must be odd and >= 3, got {}",
                self.patch
            )));
        }
        if !(self.min_valid_fraction > 0.0 && self.min_valid_fraction <= 1.0) {
            return Err(Error::validation(format!(
                "min_valid_fraction must be in (0, 1], got {}",
                self.min_valid_fraction
            )));
        }
        Ok(())
    }
}

fn check_dims(photo: &RgbImage, rephoto: &RgbImage, mask: &Mask) -> Result<()> {
    let dims = |w: u32, h: u32| (w, h);
    let p = dims(photo.width(), photo.height());
    let r = dims(rephoto.width(), rephoto.height());
    let m = dims(mask.width(), mask.height());
    if p != r || p != m {
        return Err(Error::DimensionMismatch(format!(
            "photo {}x{}, rephoto {}x{}, mask {}x{}",
            p.0, p.1, r.0, r.1, m.0, m.1
        )));
    }
    Ok(())
}

/// Computes one metric's error image.
pub fn error_image(
    metric: Metric,
    photo: &RgbImage,
    rephoto: &RgbImage,
    mask: &Mask,
    cfg: &MetricConfig,
) -> Result<ErrorImage> {
    match metric {
        Metric::Cbcr => cbcr_error(photo, rephoto, mask),
        Metric::Ncc => ncc_error(photo, rephoto, mask, cfg),
        Metric::Zssd => zssd_error(photo, rephoto, mask, cfg),
        Metric::Dssim => dssim_error(photo, rephoto, mask, cfg),
        Metric::Census => census_error(photo, rephoto, mask, cfg),
    }
}

/// Fraction of rendered pixels.
pub fn completeness(mask: &Mask) -> f64 {
    let n = mask.as_slice().len();
    if n == 0 {
        return 0.0;
    }
    mask.count_valid() as f64 / n as f64
}

/// Mean over defined pixels, `None` when nothing is defined.
pub fn mean_error(err: &ErrorImage) -> Option<f64> {
    let (sum, n) = err
        .iter_defined()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completeness_fractions() {
        assert_eq!(completeness(&Mask::new(3, 2, true)), 1.0);
        assert_eq!(completeness(&Mask::from_fn(2, 2, |x, y| x == 0 && y == 0)), 0.25);
    }

    #[test]
    fn mean_error_cases() {
        let mut e = ErrorImage::undefined(2, 2);
        assert_eq!(mean_error(&e), None);
        for i in 0..4 {
            e.set_index(i, 0.4);
        }
        assert!((mean_error(&e).unwrap() - 0.4).abs() < 1e-15);
        let mut e = ErrorImage::undefined(3, 2);
        for i in 0..3 {
            e.set_index(i, 0.1);
        }
        e.set_index(4, 0.5);
        assert!((mean_error(&e).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn metric_names_parse() {
        assert_eq!(Metric::parse_list("ncc, cbcr,ncc").unwrap(), vec![Metric::Ncc, Metric::Cbcr]);
        assert!(Metric::parse_list("ncc,icid").is_err());
        assert!(Metric::parse_list("").is_err());
        assert_eq!("DSSIM".parse::<Metric>().unwrap(), Metric::Dssim);
    }

    #[test]
    fn pfm_roundtrip_preserves_definedness() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.pfm");
        let mut e = ErrorImage::undefined(3, 2);
        e.set_index(1, 0.5);
        e.set_index(5, 1.25);
        e.save_pfm(&p).unwrap();
        assert_eq!(ErrorImage::load_pfm(&p).unwrap(), e);
    }
}
