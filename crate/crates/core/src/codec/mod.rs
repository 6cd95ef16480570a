//! Intra-frame transform coding: color conversion, 8×8 partitioning, DCT
//! and quantization, plus the inverse path.

mod color;
mod dct;
mod quant;

pub use color::{rgb_to_ycbcr, rgb_to_ycbcr_pixel, ycbcr_to_rgb, ycbcr_to_rgb_pixel, YcbcrImage};
pub use dct::{fdct, idct, Block8};
pub use quant::{
    base_quant_tables, dequantize, dequantize_real, quant_tables, quantize, scale_quant_table, QualityFactor,
    QuantTable, QuantizedBlock, MAX_COEFF,
};

use thiserror::Error;

use crate::media::{PlaneImage, RgbImage};

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("quality factor {0} outside 1..=100")]
    InvalidQuality(u32),
    #[error("quantizer divisor {0} outside 1..=255")]
    InvalidDivisor(u16),
    #[error("plane {width}x{height} is not a multiple of 8")]
    NotBlockAligned { width: usize, height: usize },
    #[error("expected {expected} blocks, got {found}")]
    BlockCountMismatch { expected: usize, found: usize },
    #[error("quantized coefficient {value} at index {index} exceeds the baseline range")]
    CoefficientOverflow { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Number of 8×8 blocks needed to cover `n` samples.
pub fn blocks_for(n: usize) -> usize {
    n.div_ceil(8)
}

/// Grows a plane to multiples of 8 by replicating its last row and column.
pub fn pad_to_block_multiple(plane: &PlaneImage) -> PlaneImage {
    let (w, h) = (plane.width(), plane.height());
    let (pw, ph) = (blocks_for(w) * 8, blocks_for(h) * 8);
    if (pw, ph) == (w, h) {
        return plane.clone();
    }
    let mut data = Vec::with_capacity(pw * ph);
    for y in 0..ph {
        let sy = y.min(h - 1);
        for x in 0..pw {
            data.push(plane.get(x.min(w - 1), sy));
        }
    }
    PlaneImage::new(pw, ph, data).expect("padded dims are positive")
}

/// Splits a block-aligned plane into level-shifted blocks, row-major.
pub fn partition_blocks(plane: &PlaneImage) -> Result<Vec<Block8>, CodecError> {
    let (w, h) = (plane.width(), plane.height());
    if w % 8 != 0 || h % 8 != 0 {
        return Err(CodecError::NotBlockAligned { width: w, height: h });
    }
    let data = plane.data();
    let mut blocks = Vec::with_capacity(w * h / 64);
    for by in 0..h / 8 {
        for bx in 0..w / 8 {
            let mut b = [0.0; 64];
            for r in 0..8 {
                let row = &data[(by * 8 + r) * w + bx * 8..][..8];
                for c in 0..8 {
                    b[r * 8 + c] = row[c] as f64 - 128.0;
                }
            }
            blocks.push(Block8(b));
        }
    }
    Ok(blocks)
}

/// Inverse of [`partition_blocks`]: adds 128, rounds and clamps.
pub fn merge_blocks(blocks: &[Block8], blocks_w: usize, blocks_h: usize) -> Result<PlaneImage, CodecError> {
    if blocks.len() != blocks_w * blocks_h || blocks.is_empty() {
        return Err(CodecError::BlockCountMismatch { expected: blocks_w * blocks_h, found: blocks.len() });
    }
    let w = blocks_w * 8;
    let mut data = vec![0u8; w * blocks_h * 8];
    for (i, block) in blocks.iter().enumerate() {
        let (bx, by) = (i % blocks_w, i / blocks_w);
        for r in 0..8 {
            let row = &mut data[(by * 8 + r) * w + bx * 8..][..8];
            for c in 0..8 {
                row[c] = color::to_sample(block.0[r * 8 + c] + 128.0);
            }
        }
    }
    Ok(PlaneImage::new(w, blocks_h * 8, data).expect("merged dims are positive"))
}

/// Grid of quantized blocks for one channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffPlane {
    pub blocks_w: usize,
    pub blocks_h: usize,
    pub blocks: Vec<QuantizedBlock>,
}

impl CoeffPlane {
    pub fn new(blocks_w: usize, blocks_h: usize, blocks: Vec<QuantizedBlock>) -> Result<Self, CodecError> {
        if blocks.len() != blocks_w * blocks_h {
            return Err(CodecError::BlockCountMismatch { expected: blocks_w * blocks_h, found: blocks.len() });
        }
        Ok(Self { blocks_w, blocks_h, blocks })
    }

    pub fn zeros(blocks_w: usize, blocks_h: usize) -> Self {
        Self { blocks_w, blocks_h, blocks: vec![QuantizedBlock::default(); blocks_w * blocks_h] }
    }
}

/// Quantized Y, Cb and Cr planes of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffPlanes {
    pub y: CoeffPlane,
    pub cb: CoeffPlane,
    pub cr: CoeffPlane,
}

impl CoeffPlanes {
    pub fn channels(&self) -> [&CoeffPlane; 3] {
        [&self.y, &self.cb, &self.cr]
    }
}

fn encode_plane(plane: &PlaneImage, table: &QuantTable) -> Result<CoeffPlane, CodecError> {
    let padded = pad_to_block_multiple(plane);
    let blocks = partition_blocks(&padded)?
        .iter()
        .map(|b| quantize(&fdct(b), table))
        .collect::<Result<Vec<_>, _>>()?;
    CoeffPlane::new(padded.width() / 8, padded.height() / 8, blocks)
}

/// Color transform, padding, partition, DCT and quantization for all three
/// channels. Y uses the luminance table, Cb/Cr the chrominance table.
pub fn encode_planes(image: &RgbImage, qf: QualityFactor) -> Result<CoeffPlanes, CodecError> {
    let (lum, chrom) = quant_tables(qf);
    let [y, cb, cr] = rgb_to_ycbcr(image).planes();
    Ok(CoeffPlanes { y: encode_plane(&y, &lum)?, cb: encode_plane(&cb, &chrom)?, cr: encode_plane(&cr, &chrom)? })
}

fn crop_plane(plane: &PlaneImage, width: usize, height: usize) -> PlaneImage {
    if plane.width() == width && plane.height() == height {
        return plane.clone();
    }
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        data.extend_from_slice(&plane.data()[y * plane.width()..][..width]);
    }
    PlaneImage::new(width, height, data).expect("crop dims are positive")
}

/// IDCT, level shift, merge, crop and color conversion of already
/// dequantized Y/Cb/Cr blocks.
pub fn reconstruct_image(
    dequantized: [&[Block8]; 3],
    blocks_w: usize,
    blocks_h: usize,
    width: usize,
    height: usize,
) -> Result<RgbImage, CodecError> {
    if width == 0 || height == 0 || blocks_for(width) != blocks_w || blocks_for(height) != blocks_h {
        return Err(CodecError::DimensionMismatch(format!(
            "{blocks_w}x{blocks_h} blocks do not cover a {width}x{height} image"
        )));
    }
    let planes = dequantized
        .map(|blocks| {
            let spatial: Vec<Block8> = blocks.iter().map(idct).collect();
            merge_blocks(&spatial, blocks_w, blocks_h).map(|p| crop_plane(&p, width, height))
        });
    let [y, cb, cr] = planes;
    Ok(ycbcr_to_rgb(&YcbcrImage::from_planes(y?, cb?, cr?)))
}

/// Decodes quantized planes whose tables are derived from `qf`.
pub fn decode_planes(planes: &CoeffPlanes, qf: QualityFactor, width: usize, height: usize) -> Result<RgbImage, CodecError> {
    decode_planes_with_tables(planes, &quant_tables(qf), width, height)
}

/// Like [`decode_planes`] with explicit (luminance, chrominance) tables.
pub fn decode_planes_with_tables(
    planes: &CoeffPlanes,
    (lum, chrom): &(QuantTable, QuantTable),
    width: usize,
    height: usize,
) -> Result<RgbImage, CodecError> {
    let (bw, bh) = (planes.y.blocks_w, planes.y.blocks_h);
    for p in [&planes.cb, &planes.cr] {
        if (p.blocks_w, p.blocks_h) != (bw, bh) {
            return Err(CodecError::DimensionMismatch("channel block grids differ".into()));
        }
    }
    let deq = |p: &CoeffPlane, t: &QuantTable| p.blocks.iter().map(|b| dequantize(b, t)).collect::<Vec<_>>();
    let (y, cb, cr) = (deq(&planes.y, lum), deq(&planes.cb, chrom), deq(&planes.cr, chrom));
    reconstruct_image([&y, &cb, &cr], bw, bh, width, height)
}
