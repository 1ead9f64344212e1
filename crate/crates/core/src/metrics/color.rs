use super::{check_dims, ErrorImage};
use crate::error::Result;
use crate::scene::{Mask, Rgb, RgbImage};

/// Full-range BT.601 luma/chroma: `Y` in `[0, 1]`, `Cb`, `Cr` in `[-0.5, 0.5]`.
#[inline]
pub fn rgb_to_ycbcr(c: Rgb) -> [f64; 3] {
    let y = luma(c);
    [y, (c[2] - y) / 1.772, (c[0] - y) / 1.402]
}

#[inline]
pub fn luma(c: Rgb) -> f64 {
    0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]
}

pub fn image_to_ycbcr(image: &RgbImage) -> Vec<[f64; 3]> {
    image.pixels().iter().map(|&c| rgb_to_ycbcr(c)).collect()
}

pub(crate) fn luma_plane(image: &RgbImage) -> Vec<f64> {
    image.pixels().iter().map(|&c| luma(c)).collect()
}

/// `|dCb| + |dCr|` at every rendered pixel.
pub fn cbcr_error(photo: &RgbImage, rephoto: &RgbImage, mask: &Mask) -> Result<ErrorImage> {
    check_dims(photo, rephoto, mask)?;
    let (w, h) = (photo.width(), photo.height());
    let mut err = ErrorImage::undefined(w, h);
    for (i, (&a, &b)) in photo.pixels().iter().zip(rephoto.pixels()).enumerate() {
        if mask.as_slice()[i] {
            let ya = rgb_to_ycbcr(a);
            let yb = rgb_to_ycbcr(b);
            err.set_index(i, (ya[1] - yb[1]).abs() + (ya[2] - yb[2]).abs());
        }
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ycbcr_reference_values() {
        assert_eq!(rgb_to_ycbcr([0.0; 3]), [0.0, 0.0, 0.0]);
        let white = rgb_to_ycbcr([1.0; 3]);
        assert!((white[0] - 1.0).abs() < 1e-15 && white[1].abs() < 1e-15 && white[2].abs() < 1e-15);
        let red = rgb_to_ycbcr([1.0, 0.0, 0.0]);
        assert!((red[0] - 0.299).abs() < 1e-15);
        assert!((red[2] - 0.5).abs() < 1e-15);
        assert!((red[1] - -0.299 / 1.772).abs() < 1e-15);
        assert!((red[1] - -0.16874).abs() < 1e-5);
        let blue = rgb_to_ycbcr([0.0, 0.0, 1.0]);
        assert!((blue[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn red_versus_blue() {
        let photo = RgbImage::new(1, 1, [1.0, 0.0, 0.0]);
        let rephoto = RgbImage::new(1, 1, [0.0, 0.0, 1.0]);
        let e = cbcr_error(&photo, &rephoto, &Mask::new(1, 1, true)).unwrap();
        // Hand value from the two conversions above.
        let cb_r = -0.299 / 1.772;
        let cr_b = -0.114 / 1.402;
        let expect = (cb_r - 0.5f64).abs() + (0.5 - cr_b);
        assert!((e.get(0, 0).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 1.250048).abs() < 1e-6);
    }

    #[test]
    fn luminance_scaling_with_fixed_chroma_is_free() {
        // Build colors from (Y, Cb, Cr) and halve Y only.
        let to_rgb = |y: f64, cb: f64, cr: f64| {
            let r = y + 1.402 * cr;
            let b = y + 1.772 * cb;
            let g = (y - 0.299 * r - 0.114 * b) / 0.587;
            [r, g, b]
        };
        let photo = RgbImage::from_fn(4, 4, |x, y| to_rgb(0.6 + 0.02 * x as f64, 0.05 * y as f64 - 0.05, 0.03));
        let rephoto = RgbImage::from_fn(4, 4, |x, y| to_rgb(0.3 + 0.01 * x as f64, 0.05 * y as f64 - 0.05, 0.03));
        let e = cbcr_error(&photo, &rephoto, &Mask::new(4, 4, true)).unwrap();
        assert!(e.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn defined_exactly_on_mask() {
        let img = RgbImage::new(2, 2, [0.3, 0.5, 0.1]);
        let mask = Mask::from_fn(2, 2, |x, y| x == y);
        let e = cbcr_error(&img, &img, &mask).unwrap();
        assert_eq!(e.defined(), mask.as_slice());
        assert!(cbcr_error(&img, &RgbImage::new(3, 2, [0.0; 3]), &mask).is_err());
    }
}
