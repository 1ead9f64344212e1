//! Patch metrics on luminance: 1-NCC, ZSSD, census and DSSIM.
//!
//! Every metric shares the same support rule. Around a rendered pixel, the
//! window positions that are inside the image and rendered form the
//! support; with fewer than `min_valid_fraction * patch^2` positions the
//! pixel stays undefined.

use rayon::prelude::*;

use super::color::luma_plane;
use super::{check_dims, ErrorImage, MetricConfig};
use crate::error::Result;
use crate::scene::{Mask, RgbImage};

const FLAT_STD: f64 = 1e-6;
/// Luma differences this small are rounding noise and count as ties.
const CENSUS_TIE: f64 = 1e-12;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Gathered support of one window. `center` is the index of the window's
/// own pixel within `a`/`b`.
struct Support<'s> {
    a: &'s [f64],
    b: &'s [f64],
    center: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population (co)variances of the two samples around their means.
fn moments(a: &[f64], b: &[f64]) -> (f64, f64, f64, f64, f64) {
    let ma = mean(a);
    let mb = mean(b);
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let da = x - ma;
        let db = y - mb;
        va += da * da;
        vb += db * db;
        cov += da * db;
    }
    let n = a.len() as f64;
    (ma, mb, va / n, vb / n, cov / n)
}

fn ncc(s: &Support<'_>) -> Option<f64> {
    let (_, _, va, vb, cov) = moments(s.a, s.b);
    let (sa, sb) = (va.sqrt(), vb.sqrt());
    let flat_a = sa < FLAT_STD;
    let flat_b = sb < FLAT_STD;
    Some(match (flat_a, flat_b) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => (1.0 - cov / (sa * sb)).clamp(0.0, 2.0),
    })
}

fn zssd(s: &Support<'_>) -> Option<f64> {
    let ma = mean(s.a);
    let mb = mean(s.b);
    let sum: f64 = s
        .a
        .iter()
        .zip(s.b)
        .map(|(&x, &y)| {
            let d = (x - ma) - (y - mb);
            d * d
        })
        .sum();
    Some(sum / s.a.len() as f64)
}

fn census(s: &Support<'_>) -> Option<f64> {
    let ca = s.a[s.center];
    let cb = s.b[s.center];
    let mut compared = 0u32;
    let mut differing = 0u32;
    for i in 0..s.a.len() {
        if i == s.center {
            continue;
        }
        compared += 1;
        if (s.a[i] < ca - CENSUS_TIE) != (s.b[i] < cb - CENSUS_TIE) {
            differing += 1;
        }
    }
    (compared > 0).then(|| differing as f64 / compared as f64)
}

fn dssim(s: &Support<'_>) -> Option<f64> {
    let (ma, mb, va, vb, cov) = moments(s.a, s.b);
    let ssim = ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    Some(((1.0 - ssim) / 2.0).clamp(0.0, 1.0))
}

/// Applies `kernel` to the masked support of every rendered pixel.
fn patch_error<K>(
    photo: &RgbImage,
    rephoto: &RgbImage,
    mask: &Mask,
    cfg: &MetricConfig,
    kernel: K,
) -> Result<ErrorImage>
where
    K: Fn(&Support<'_>) -> Option<f64> + Sync,
{
    cfg.validate()?;
    check_dims(photo, rephoto, mask)?;
    let (w, h) = (photo.width() as usize, photo.height() as usize);
    let ya = luma_plane(photo);
    let yb = luma_plane(rephoto);
    let valid = mask.as_slice();
    let r = (cfg.patch / 2) as isize;
    let min_support = cfg.min_valid_fraction * (cfg.patch as f64 * cfg.patch as f64);
    let cap = (cfg.patch * cfg.patch) as usize;

    let rows: Vec<Vec<Option<f64>>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut a = Vec::with_capacity(cap);
            let mut b = Vec::with_capacity(cap);
            (0..w)
                .map(|x| {
                    if !valid[y * w + x] {
                        return None;
                    }
                    a.clear();
                    b.clear();
                    let mut center = 0;
                    for dy in -r..=r {
                        let yy = y as isize + dy;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for dx in -r..=r {
                            let xx = x as isize + dx;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let i = yy as usize * w + xx as usize;
                            if !valid[i] {
                                continue;
                            }
                            if dx == 0 && dy == 0 {
                                center = a.len();
                            }
                            a.push(ya[i]);
                            b.push(yb[i]);
                        }
                    }
                    if (a.len() as f64) < min_support {
                        return None;
                    }
                    kernel(&Support { a: &a, b: &b, center }).filter(|v| v.is_finite())
                })
                .collect()
        })
        .collect();

    let mut err = ErrorImage::undefined(w as u32, h as u32);
    for (i, v) in rows.into_iter().flatten().enumerate() {
        if let Some(v) = v {
            err.set_index(i, v);
        }
    }
    Ok(err)
}

/// One minus normalized cross-correlation, in `[0, 2]`.
pub fn ncc_error(photo: &RgbImage, rephoto: &RgbImage, mask: &Mask, cfg: &MetricConfig) -> Result<ErrorImage> {
    patch_error(photo, rephoto, mask, cfg, ncc)
}

/// Zero-mean sum of squared differences, normalized by the support size.
pub fn zssd_error(photo: &RgbImage, rephoto: &RgbImage, mask: &Mask, cfg: &MetricConfig) -> Result<ErrorImage> {
    patch_error(photo, rephoto, mask, cfg, zssd)
}

/// Fraction of differing census bits (neighbor strictly darker than center,
/// beyond a 1e-12 tie band).
pub fn census_error(photo: &RgbImage, rephoto: &RgbImage, mask: &Mask, cfg: &MetricConfig) -> Result<ErrorImage> {
    patch_error(photo, rephoto, mask, cfg, census)
}

/// `(1 - SSIM) / 2` with a uniform window.
pub fn dssim_error(photo: &RgbImage, rephoto: &RgbImage, mask: &Mask, cfg: &MetricConfig) -> Result<ErrorImage> {
    patch_error(photo, rephoto, mask, cfg, dssim)
}
