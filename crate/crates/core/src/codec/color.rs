//! Full-range BT.601 color conversion (the JFIF convention).

use crate::media::{PlaneImage, RgbImage};

/// 4:4:4 YCbCr image; all three planes have `width * height` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct YcbcrImage {
    pub width: usize,
    pub height: usize,
    pub y: Vec<u8>,
    pub cb: Vec<u8>,
    pub cr: Vec<u8>,
}

impl YcbcrImage {
    pub fn planes(&self) -> [PlaneImage; 3] {
        [&self.y, &self.cb, &self.cr].map(|p| {
            PlaneImage::new(self.width, self.height, p.clone()).expect("plane sizes are consistent")
        })
    }

    /// Builds an image from three equally sized planes.
    pub fn from_planes(y: PlaneImage, cb: PlaneImage, cr: PlaneImage) -> Self {
        assert!(
            y.width() == cb.width() && y.width() == cr.width() && y.height() == cb.height() && y.height() == cr.height(),
            "plane dimensions differ"
        );
        Self { width: y.width(), height: y.height(), y: y.into_data(), cb: cb.into_data(), cr: cr.into_data() }
    }
}

/// Rounds half away from zero and clamps to the 8-bit range.
#[inline]
pub(crate) fn to_sample(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn rgb_to_ycbcr_pixel([r, g, b]: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (r as f64, g as f64, b as f64);
    [
        to_sample(0.299 * r + 0.587 * g + 0.114 * b),
        to_sample(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b),
        to_sample(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b),
    ]
}

#[inline]
pub fn ycbcr_to_rgb_pixel([y, cb, cr]: [u8; 3]) -> [u8; 3] {
    let (y, cb, cr) = (y as f64, cb as f64 - 128.0, cr as f64 - 128.0);
    [
        to_sample(y + 1.402 * cr),
        to_sample(y - 0.344136 * cb - 0.714136 * cr),
        to_sample(y + 1.772 * cb),
    ]
}

pub fn rgb_to_ycbcr(image: &RgbImage) -> YcbcrImage {
    let n = image.width() * image.height();
    let (mut y, mut cb, mut cr) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for px in image.data().chunks_exact(3) {
        let [a, b, c] = rgb_to_ycbcr_pixel([px[0], px[1], px[2]]);
        y.push(a);
        cb.push(b);
        cr.push(c);
    }
    YcbcrImage { width: image.width(), height: image.height(), y, cb, cr }
}

pub fn ycbcr_to_rgb(image: &YcbcrImage) -> RgbImage {
    let mut data = Vec::with_capacity(image.width * image.height * 3);
    for i in 0..image.width * image.height {
        data.extend_from_slice(&ycbcr_to_rgb_pixel([image.y[i], image.cb[i], image.cr[i]]));
    }
    RgbImage::new(image.width, image.height, data).expect("dimensions carried over from a valid image")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn reference_colors() {
        assert_eq!(rgb_to_ycbcr_pixel([255, 255, 255]), [255, 128, 128]);
        assert_eq!(rgb_to_ycbcr_pixel([0, 0, 0]), [0, 128, 128]);
        // Y = 76.245, Cb = 84.97, Cr = 255.5 -> clamped
        assert_eq!(rgb_to_ycbcr_pixel([255, 0, 0]), [76, 85, 255]);
        assert_eq!(ycbcr_to_rgb_pixel([255, 128, 128]), [255, 255, 255]);
        assert_eq!(ycbcr_to_rgb_pixel([0, 128, 128]), [0, 0, 0]);
    }

    #[test]
    fn round_trip_error_at_most_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1_000_000 {
            let px: [u8; 3] = rng.random();
            let back = ycbcr_to_rgb_pixel(rgb_to_ycbcr_pixel(px));
            for c in 0..3 {
                assert!((px[c] as i32 - back[c] as i32).abs() <= 1, "{px:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn image_conversion_matches_pixel_conversion() {
        let img = RgbImage::new(2, 1, vec![255, 0, 0, 10, 200, 30]).unwrap();
        let ycc = rgb_to_ycbcr(&img);
        assert_eq!([ycc.y[0], ycc.cb[0], ycc.cr[0]], [76, 85, 255]);
        assert_eq!([ycc.y[1], ycc.cb[1], ycc.cr[1]], rgb_to_ycbcr_pixel([10, 200, 30]));
        let back = ycbcr_to_rgb(&ycc);
        assert_eq!(back.width(), 2);
    }
}
