//! Deterministic procedural test images.
//!
//! The scenes mimic photographs: smooth sky gradients, fractal terrain with
//! texture of varying scale, and sensor grain. Everything is a pure function
//! of the dimensions and seed.

use crate::raster::Image;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice(ix: i64, iy: i64, seed: u64) -> f32 {
    let h = mix64(seed ^ mix64((ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (iy as u64)));
    (h >> 40) as f32 / (1u64 << 24) as f32
}

fn smoothstep(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear value noise in `[0, 1)`.
fn value_noise(x: f32, y: f32, seed: u64) -> f32 {
    let (fx, fy) = (x.floor(), y.floor());
    let (ix, iy) = (fx as i64, fy as i64);
    let (tx, ty) = (smoothstep(x - fx), smoothstep(y - fy));
    let a = lattice(ix, iy, seed);
    let b = lattice(ix + 1, iy, seed);
    let c = lattice(ix, iy + 1, seed);
    let d = lattice(ix + 1, iy + 1, seed);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Fractal sum of `octaves` noise layers, normalized to `[0, 1)`.
fn fbm(x: f32, y: f32, seed: u64, octaves: u32) -> f32 {
    let mut sum = 0.0;
    let mut amp = 1.0;
    let mut norm = 0.0;
    let mut freq = 1.0;
    for o in 0..octaves {
        sum += amp * value_noise(x * freq, y * freq, seed.wrapping_add(o as u64 * 7919));
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

/// Roughly Gaussian pixel noise with the given standard deviation.
fn grain(x: usize, y: usize, seed: u64, sigma: f32) -> [f32; 3] {
    let h = mix64(seed ^ mix64(((y as u64) << 32) | x as u64));
    let mut out = [0f32; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let bits = h >> (c * 21);
        // sum of three uniforms has variance 1/4
        let u: f32 = (0..3).map(|k| ((bits >> (k * 7)) & 0x7f) as f32 / 127.0).sum();
        *o = (u - 1.5) * 2.0 * sigma;
    }
    out
}

fn lerp3(a: [f32; 3], b: [f32; 3], t: f32) -> [f32; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn to_u8(p: [f32; 3]) -> [u8; 3] {
    p.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

fn unit(seed: u64, salt: u64) -> f32 {
    (mix64(seed.wrapping_mul(31).wrapping_add(salt)) >> 40) as f32 / (1u64 << 24) as f32
}

/// Sky over rolling terrain, with clouds, vegetation texture and grain.
pub fn landscape(width: usize, height: usize, seed: u64) -> Image<u8> {
    let scale = width.max(height) as f32;
    let horizon_base = 0.3 + 0.2 * unit(seed, 1);
    let warmth = unit(seed, 2);
    let sky_top = [30.0 + 40.0 * warmth, 80.0, 170.0 - 30.0 * warmth];
    let sky_low = [200.0 + 40.0 * warmth, 205.0, 225.0 - 40.0 * warmth];
    let grass = [50.0 + 40.0 * unit(seed, 3), 95.0, 35.0];
    let soil = [130.0, 105.0 + 20.0 * unit(seed, 4), 70.0];
    let rock = [110.0, 110.0, 115.0];
    Image::from_fn(width, height, |x, y| {
        let (u, v) = (x as f32 / scale, y as f32 / scale);
        let horizon = (horizon_base + 0.25 * (fbm(u * 3.0, 0.5, seed ^ 11, 5) - 0.5)) * height as f32;
        let yf = y as f32;
        let mut p = if yf < horizon {
            let t = (yf / horizon).clamp(0.0, 1.0);
            let sky = lerp3(sky_top, sky_low, t.powf(1.4));
            let cloud = fbm(u * 4.0, v * 8.0, seed ^ 13, 6);
            let cover = ((cloud - 0.5) * 3.0).clamp(0.0, 1.0);
            lerp3(sky, [245.0, 245.0, 248.0], cover * 0.85)
        } else {
            let depth = ((yf - horizon) / (height as f32 - horizon).max(1.0)).clamp(0.0, 1.0);
            let veg = fbm(u * 6.0, v * 6.0, seed ^ 17, 6);
            let rocky = ((fbm(u * 10.0, v * 10.0, seed ^ 19, 4) - 0.62) * 6.0).clamp(0.0, 1.0);
            let mut g = lerp3(grass, soil, ((veg - 0.35) * 2.5).clamp(0.0, 1.0));
            g = lerp3(g, rock, rocky);
            // fine texture gets coarser toward the viewer
            let tex_freq = 160.0 / (0.4 + depth);
            let tex = fbm(u * tex_freq, v * tex_freq, seed ^ 23, 3) - 0.5;
            let haze = (1.0 - depth).powi(3) * 0.5;
            let shade = 0.75 + 0.35 * depth;
            let textured = g.map(|c| c * shade + tex * 70.0);
            lerp3(textured, sky_low, haze)
        };
        let n = grain(x, y, seed, 2.0);
        for c in 0..3 {
            p[c] += n[c];
        }
        to_u8(p)
    })
    .expect("dimensions are positive")
}

/// Smooth sky with soft clouds and light grain; few strong edges.
pub fn sky(width: usize, height: usize, seed: u64) -> Image<u8> {
    let scale = width.max(height) as f32;
    let warmth = unit(seed, 5);
    let top = [20.0 + 30.0 * warmth, 60.0, 150.0];
    let bottom = [230.0, 190.0 + 30.0 * warmth, 150.0 + 60.0 * (1.0 - warmth)];
    Image::from_fn(width, height, |x, y| {
        let (u, v) = (x as f32 / scale, y as f32 / scale);
        let t = (y as f32 / height as f32 + 0.15 * (u - 0.5)).clamp(0.0, 1.0);
        let base = lerp3(top, bottom, t);
        let cloud = fbm(u * 2.5, v * 5.0, seed ^ 29, 5);
        let mut p = lerp3(base, [240.0, 240.0, 245.0], ((cloud - 0.45) * 1.5).clamp(0.0, 0.7));
        let n = grain(x, y, seed, 2.0);
        for c in 0..3 {
            p[c] += n[c];
        }
        to_u8(p)
    })
    .expect("dimensions are positive")
}

/// Diagonal colour ramp without noise.
pub fn gradient(width: usize, height: usize) -> Image<u8> {
    let span = (width + height).saturating_sub(2).max(1) as f32;
    Image::from_fn(width, height, |x, y| {
        let t = (x + y) as f32 / span;
        to_u8([255.0 * t, 255.0 * (1.0 - t), 128.0 + 100.0 * (t - 0.5)])
    })
    .expect("dimensions are positive")
}

/// Uniform random samples; handy for exactness tests.
pub fn noise(width: usize, height: usize, seed: u64) -> Image<u8> {
    Image::from_fn(width, height, |x, y| {
        let h = mix64(seed ^ mix64(((y as u64) << 32) | x as u64));
        [h as u8, (h >> 8) as u8, (h >> 16) as u8]
    })
    .expect("dimensions are positive")
}
