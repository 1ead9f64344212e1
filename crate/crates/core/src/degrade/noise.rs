//! Seeded 3D gradient noise (improved Perlin noise with a shuffled
//! permutation table).

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;

#[derive(Debug, Clone)]
pub struct GradientNoise {
    perm: [u8; 512],
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(t: f64, a: f64, b: f64) -> f64 {
    a + t * (b - a)
}

/// Dot product with one of the 12 cube-edge gradients.
#[inline]
fn grad(hash: u8, x: f64, y: f64, z: f64) -> f64 {
    let h = hash & 15;
    let u = if h < 8 { x } else { y };
    let v = if h < 4 {
        y
    } else if h == 12 || h == 14 {
        x
    } else {
        z
    };
    (if h & 1 == 0 { u } else { -u }) + (if h & 2 == 0 { v } else { -v })
}

impl GradientNoise {
    pub fn new(seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut table: Vec<u8> = (0..=255).collect();
        table.shuffle(&mut rng);
        let mut perm = [0u8; 512];
        for i in 0..512 {
            perm[i] = table[i & 255];
        }
        GradientNoise { perm }
    }

    /// Noise value in `[-1, 1]`; exactly zero on the integer lattice.
    pub fn sample(&self, p: &Vector3<f64>) -> f64 {
        let fx = p.x.floor();
        let fy = p.y.floor();
        let fz = p.z.floor();
        let xi = (fx as i64 & 255) as usize;
        let yi = (fy as i64 & 255) as usize;
        let zi = (fz as i64 & 255) as usize;
        let (x, y, z) = (p.x - fx, p.y - fy, p.z - fz);
        let (u, v, w) = (fade(x), fade(y), fade(z));
        let pm = &self.perm;
        let a = pm[xi] as usize + yi;
        let aa = pm[a] as usize + zi;
        let ab = pm[a + 1] as usize + zi;
        let b = pm[xi + 1] as usize + yi;
        let ba = pm[b] as usize + zi;
        let bb = pm[b + 1] as usize + zi;
        let n = lerp(
            w,
            lerp(
                v,
                lerp(u, grad(pm[aa], x, y, z), grad(pm[ba], x - 1.0, y, z)),
                lerp(u, grad(pm[ab], x, y - 1.0, z), grad(pm[bb], x - 1.0, y - 1.0, z)),
            ),
            lerp(
                v,
                lerp(u, grad(pm[aa + 1], x, y, z - 1.0), grad(pm[ba + 1], x - 1.0, y, z - 1.0)),
                lerp(
                    u,
                    grad(pm[ab + 1], x, y - 1.0, z - 1.0),
                    grad(pm[bb + 1], x - 1.0, y - 1.0, z - 1.0),
                ),
            ),
        );
        n.clamp(-1.0, 1.0)
    }
}

/// One-shot convenience; prefer [`GradientNoise`] for many samples.
pub fn noise3(seed: u64, p: &Vector3<f64>) -> f64 {
    GradientNoise::new(seed).sample(p)
}
