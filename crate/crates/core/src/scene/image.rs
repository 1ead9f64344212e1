//! Image buffers and their file formats (PNG photos and masks, PFM scalars).

use std::io::Cursor;
use std::path::Path;

use image::{ColorType, ImageFormat};

use crate::error::{Error, Result};
use crate::io;

pub type Rgb = [f64; 3];

/// Linear RGB image with channels in `[0, 1]`, row-major, origin top-left.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        RgbImage {
            width,
            height,
            pixels: vec![clamp_rgb(fill); width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(clamp_rgb(f(x, y)));
            }
        }
        RgbImage {
            width,
            height,
            pixels,
        }
    }

    /// Wraps an existing buffer, clamping every channel to `[0, 1]`.
    pub fn from_pixels(width: u32, height: u32, mut pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        for p in &mut pixels {
            *p = clamp_rgb(*p);
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: Rgb) {
        self.pixels[y as usize * self.width as usize + x as usize] = clamp_rgb(c);
    }

    /// Snaps every channel to the nearest 8-bit level, i.e. what a PNG
    /// round trip would produce.
    pub fn quantize_8bit(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            pixels: self
                .pixels
                .iter()
                .map(|p| p.map(|c| to_u8(c) as f64 / 255.0))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = io::read_bytes(path)?;
        let img = decode_png(path, &bytes)?;
        let (width, height) = (img.width(), img.height());
        let rgb = match img.color() {
            ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => img.to_rgb8(),
            other => {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: {other:?} photos are not supported (expected 8-bit RGB or gray)",
                    path.display()
                )))
            }
        };
        let pixels = rgb
            .pixels()
            .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
            .collect();
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.pixels.iter().flat_map(|p| p.map(to_u8)).collect();
        let buf = image::RgbImage::from_raw(self.width, self.height, raw)
            .ok_or_else(|| Error::Invariant("rgb buffer size".into()))?;
        let bytes = encode_png(&image::DynamicImage::ImageRgb8(buf))?;
        io::write_bytes_atomic(path, &bytes)
    }
}

/// Per-pixel validity; `true` marks pixels the reconstruction rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    valid: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, valid: bool) -> Self {
        Mask {
            width,
            height,
            valid: vec![valid; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut valid = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                valid.push(f(x, y));
            }
        }
        Mask {
            width,
            height,
            valid,
        }
    }

    pub fn from_vec(width: u32, height: u32, valid: Vec<bool>) -> Result<Self> {
        if valid.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} mask entries for a {width}x{height} image",
                valid.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            valid,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.valid[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.valid[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = io::read_bytes(path)?;
        let img = decode_png(path, &bytes)?;
        if img.color() != ColorType::L8 {
            return Err(Error::UnsupportedFormat(format!(
                "{}: masks must be 8-bit grayscale PNG, got {:?}",
                path.display(),
                img.color()
            )));
        }
        let gray = img.into_luma8();
        let (width, height) = gray.dimensions();
        let mut valid = Vec::with_capacity(width as usize * height as usize);
        for (i, p) in gray.pixels().enumerate() {
            match p[0] {
                0 => valid.push(false),
                255 => valid.push(true),
                other => {
                    return Err(Error::validation(format!(
                        "{}: mask value {other} at pixel {} (only 0 and 255 allowed)",
                        path.display(),
                        i
                    )))
                }
            }
        }
        Ok(Mask {
            width,
            height,
            valid,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let raw: Vec<u8> = self.valid.iter().map(|&v| if v { 255 } else { 0 }).collect();
        let buf = image::GrayImage::from_raw(self.width, self.height, raw)
            .ok_or_else(|| Error::Invariant("mask buffer size".into()))?;
        let bytes = encode_png(&image::DynamicImage::ImageLuma8(buf))?;
        io::write_bytes_atomic(path, &bytes)
    }
}

#[inline]
fn clamp_rgb(c: Rgb) -> Rgb {
    // NaN maps to 0 so buffers never carry non-finite colors.
    c.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
}

#[inline]
fn to_u8(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<image::DynamicImage> {
    match image::guess_format(bytes) {
        Ok(ImageFormat::Png) => {}
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: only PNG images are supported",
                path.display()
            )))
        }
    }
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::parse(path, e.to_string()))
}

fn encode_png(img: &image::DynamicImage) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Invariant(format!("png encoding failed: {e}")))?;
    Ok(out.into_inner())
}

/// Writes a single-channel little-endian PFM ("Pf", scale -1.0).
/// Rows are stored bottom-to-top as the format requires.
pub fn write_pfm(path: &Path, width: u32, height: u32, values: &[f32]) -> Result<()> {
    if values.len() != width as usize * height as usize {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {width}x{height} PFM",
            values.len()
        )));
    }
    let mut bytes = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    bytes.reserve(values.len() * 4);
    for row in (0..height as usize).rev() {
        let start = row * width as usize;
        for v in &values[start..start + width as usize] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    io::write_bytes_atomic(path, &bytes)
}

/// Reads a single-channel PFM. Returns `(width, height, values)` with rows
/// top-to-bottom.
pub fn read_pfm(path: &Path) -> Result<(u32, u32, Vec<f32>)> {
    let bytes = io::read_bytes(path)?;
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    // Header: three whitespace-separated tokens after the magic, then a
    // single whitespace byte before the raster.
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, "truncated PFM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "Pf" {
        return Err(Error::UnsupportedFormat(format!(
            "{}: expected grayscale PFM (\"Pf\"), got {:?}",
            path.display(),
            fields[0]
        )));
    }
    let width: u32 = fields[1].parse().map_err(|_| Error::parse(path, "bad PFM width"))?;
    let height: u32 = fields[2].parse().map_err(|_| Error::parse(path, "bad PFM height"))?;
    let scale: f32 = fields[3].parse().map_err(|_| Error::parse(path, "bad PFM scale"))?;
    let little = scale < 0.0;
    let n = width as usize * height as usize;
    if bytes.len() < pos + 4 * n {
        return Err(Error::parse(path, "truncated PFM raster"));
    }
    let raster = &bytes[pos..pos + 4 * n];
    let mut values = vec![0.0f32; n];
    for row in 0..height as usize {
        let dst = (height as usize - 1 - row) * width as usize;
        for col in 0..width as usize {
            let i = (row * width as usize + col) * 4;
            let b = [raster[i], raster[i + 1], raster[i + 2], raster[i + 3]];
            values[dst + col] = if little {
                f32::from_le_bytes(b)
            } else {
                f32::from_be_bytes(b)
            };
        }
    }
    Ok((width, height, values))
}
