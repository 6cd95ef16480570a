//! Deterministic synthetic test frames.
//!
//! Each frame mixes a color gradient, oriented sinusoidal gratings, a
//! checkerboard patch, a few flat-shaded shapes and fine-grained value
//! noise, so it has smooth areas, sharp edges and texture at several
//! scales. The same `(width, height, seed)` always yields the same image.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::media::RgbImage;

/// Bilinearly interpolated lattice noise in `[-1, 1]`.
struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, width: usize, height: usize, cell: f64) -> Self {
        let cols = (width as f64 / cell).ceil() as usize + 2;
        let rows = (height as f64 / cell).ceil() as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self { cell, cols, lattice }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.cell, y / self.cell);
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let (fx, fy) = (gx - ix as f64, gy - iy as f64);
        let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
        let l = |c: usize, r: usize| self.lattice[r * self.cols + c];
        let top = l(ix, iy) * (1.0 - sx) + l(ix + 1, iy) * sx;
        let bottom = l(ix, iy + 1) * (1.0 - sx) + l(ix + 1, iy + 1) * sx;
        top * (1.0 - sy) + bottom * sy
    }
}

enum Shape {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Ellipse { cx, cy, rx, ry } => ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0,
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
        }
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(20.0..235.0), rng.random_range(20.0..235.0), rng.random_range(20.0..235.0)]
}

/// Seed of the fixed test image.
pub const TEST_IMAGE_SEED: u64 = 1;
/// Side of the fixed test image.
pub const TEST_IMAGE_SIZE: usize = 256;

/// The fixed 256×256 test image used by codec checks and QF sweeps.
pub fn test_image() -> RgbImage {
    synthetic_image(TEST_IMAGE_SIZE, TEST_IMAGE_SIZE, TEST_IMAGE_SEED)
}

/// Generates a `width`×`height` synthetic frame from `seed`.
pub fn synthetic_image(width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);

    let c0 = random_color(&mut rng);
    let c1 = random_color(&mut rng);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (gdx, gdy) = (angle.cos(), angle.sin());

    let gratings: Vec<(f64, f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let period = rng.random_range(4.0..40.0);
            let k = std::f64::consts::TAU / period;
            let amp = rng.random_range(8.0..30.0);
            let tint = [rng.random_range(0.5..1.0), rng.random_range(0.5..1.0), rng.random_range(0.5..1.0)];
            (k * theta.cos(), k * theta.sin(), amp, tint)
        })
        .collect();
    let phases: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();

    let checker_cell = rng.random_range(3..12) as f64;
    let (cx0, cy0) = (rng.random_range(0.0..w * 0.6), rng.random_range(0.0..h * 0.6));
    let checker = Shape::Rect {
        x0: cx0,
        y0: cy0,
        x1: cx0 + rng.random_range(w * 0.15..w * 0.4),
        y1: cy0 + rng.random_range(h * 0.15..h * 0.4),
    };
    let checker_amp = rng.random_range(20.0..60.0);

    let n_shapes = rng.random_range(3..8);
    let shapes: Vec<(Shape, [f64; 3])> = (0..n_shapes)
        .map(|_| {
            let shape = if rng.random_bool(0.5) {
                Shape::Ellipse {
                    cx: rng.random_range(0.0..w),
                    cy: rng.random_range(0.0..h),
                    rx: rng.random_range(w * 0.04..w * 0.25),
                    ry: rng.random_range(h * 0.04..h * 0.25),
                }
            } else {
                let (x0, y0) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
                Shape::Rect { x0, y0, x1: x0 + rng.random_range(w * 0.05..w * 0.3), y1: y0 + rng.random_range(h * 0.05..h * 0.3) }
            };
            (shape, random_color(&mut rng))
        })
        .collect();

    let coarse = ValueNoise::new(&mut rng, width, height, 24.0);
    let fine = ValueNoise::new(&mut rng, width, height, 2.5);
    let coarse_amp = rng.random_range(10.0..30.0);
    let fine_amp = rng.random_range(6.0..16.0);

    let norm = (w * w + h * h).sqrt();
    let mut data = Vec::with_capacity(width * height * 3);
    for py in 0..height {
        for px in 0..width {
            let (x, y) = (px as f64, py as f64);
            let t = (((x - w / 2.0) * gdx + (y - h / 2.0) * gdy) / norm + 0.5).clamp(0.0, 1.0);
            let mut rgb = [0.0; 3];
            for c in 0..3 {
                rgb[c] = c0[c] * (1.0 - t) + c1[c] * t;
            }
            if let Some((_, color)) = shapes.iter().rev().find(|(s, _)| s.contains(x, y)) {
                rgb = *color;
            }
            for (g, phase) in gratings.iter().zip(&phases) {
                let v = (g.0 * x + g.1 * y + phase).sin() * g.2;
                for c in 0..3 {
                    rgb[c] += v * g.3[c];
                }
            }
            if checker.contains(x, y) {
                let on = ((x / checker_cell).floor() as i64 + (y / checker_cell).floor() as i64) % 2 == 0;
                let v = if on { checker_amp } else { -checker_amp };
                for ch in rgb.iter_mut() {
                    *ch += v;
                }
            }
            let n = coarse.at(x, y) * coarse_amp + fine.at(x, y) * fine_amp;
            for ch in rgb.iter_mut() {
                *ch += n;
            }
            data.extend(rgb.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    RgbImage::new(width, height, data).expect("generator produces a full raster")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(synthetic_image(40, 30, 9), synthetic_image(40, 30, 9));
        assert_ne!(synthetic_image(40, 30, 9), synthetic_image(40, 30, 10));
    }

    #[test]
    fn uses_a_wide_value_range() {
        let img = synthetic_image(128, 128, 1);
        let min = *img.data().iter().min().unwrap();
        let max = *img.data().iter().max().unwrap();
        assert!(max - min > 100);
    }
}
