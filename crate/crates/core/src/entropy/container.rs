//! The `IFR1` I-frame container.
//!
//! Layout (little-endian):
//!
//! ```text
//! "IFR1" | version u8 | width u16 | height u16 | qf u8 |
//! 3 × ( payload length u32 | Huffman payload )          // Y, Cb, Cr
//! ```
//!
//! Each channel is coded on its own with the DC predictor starting at zero.

use crate::codec::{blocks_for, CoeffPlane, CoeffPlanes, QualityFactor};

use super::huffman::{huffman_encode, read_block_symbols, BitReader, ChannelTables};
use super::rle::{rle_decode_block, rle_encode};
use super::zigzag::{inverse_zigzag, zigzag};
use super::EntropyError;

pub const MAGIC: &[u8; 4] = b"IFR1";
pub const VERSION: u8 = 1;
const HEADER_LEN: usize = 10;

/// Everything recovered from a stream, before any dequantization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedFrame {
    pub planes: CoeffPlanes,
    pub qf: QualityFactor,
    pub width: usize,
    pub height: usize,
}

fn channel_tables(index: usize) -> ChannelTables {
    if index == 0 {
        ChannelTables::luminance()
    } else {
        ChannelTables::chrominance()
    }
}

fn encode_channel(plane: &CoeffPlane, tables: &ChannelTables) -> Result<Vec<u8>, EntropyError> {
    let mut prev_dc = 0i32;
    let mut symbols = Vec::new();
    for block in &plane.blocks {
        let v = zigzag(block);
        symbols.extend(rle_encode(&v, prev_dc)?);
        prev_dc = v.0[0] as i32;
    }
    huffman_encode(&symbols, tables)
}

fn decode_channel(
    payload: &[u8],
    blocks_w: usize,
    blocks_h: usize,
    tables: &ChannelTables,
) -> Result<CoeffPlane, EntropyError> {
    let mut r = BitReader::new(payload);
    let mut prev_dc = 0i32;
    let mut blocks = Vec::with_capacity(blocks_w * blocks_h);
    for _ in 0..blocks_w * blocks_h {
        let symbols = read_block_symbols(&mut r, tables)?;
        let (v, _) = rle_decode_block(&symbols, prev_dc)?;
        prev_dc = v.0[0] as i32;
        blocks.push(inverse_zigzag(&v));
    }
    Ok(CoeffPlane { blocks_w, blocks_h, blocks })
}

/// Entropy-codes three coefficient planes into an `IFR1` stream.
pub fn serialize(planes: &CoeffPlanes, qf: QualityFactor, width: usize, height: usize) -> Result<Vec<u8>, EntropyError> {
    if width == 0 || height == 0 || width > u16::MAX as usize || height > u16::MAX as usize {
        return Err(EntropyError::DimensionOverflow { width, height });
    }
    let (bw, bh) = (blocks_for(width), blocks_for(height));
    for p in planes.channels() {
        if (p.blocks_w, p.blocks_h) != (bw, bh) || p.blocks.len() != bw * bh {
            return Err(EntropyError::GridMismatch { width, height });
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 64);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(width as u16).to_le_bytes());
    out.extend_from_slice(&(height as u16).to_le_bytes());
    out.push(qf.get());
    for (i, p) in planes.channels().into_iter().enumerate() {
        let payload = encode_channel(p, &channel_tables(i))?;
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&payload);
    }
    Ok(out)
}

/// Parses an `IFR1` stream back into quantized coefficients only.
pub fn extract_quantized_coeffs(stream: &[u8]) -> Result<ExtractedFrame, EntropyError> {
    if stream.len() < HEADER_LEN {
        if stream.len() >= 4 && &stream[..4] != MAGIC {
            return Err(EntropyError::BadMagic);
        }
        return Err(EntropyError::TruncatedPayload);
    }
    if &stream[..4] != MAGIC {
        return Err(EntropyError::BadMagic);
    }
    if stream[4] != VERSION {
        return Err(EntropyError::UnsupportedVersion(stream[4]));
    }
    let width = u16::from_le_bytes([stream[5], stream[6]]) as usize;
    let height = u16::from_le_bytes([stream[7], stream[8]]) as usize;
    if width == 0 || height == 0 {
        return Err(EntropyError::BadHeader("zero dimension"));
    }
    let qf = QualityFactor::new(stream[9] as u32).map_err(|_| EntropyError::BadHeader("quality factor out of range"))?;
    let (bw, bh) = (blocks_for(width), blocks_for(height));
    let mut pos = HEADER_LEN;
    let mut planes = Vec::with_capacity(3);
    for i in 0..3 {
        let len_bytes = stream.get(pos..pos + 4).ok_or(EntropyError::TruncatedPayload)?;
        let len = u32::from_le_bytes(len_bytes.try_into().expect("4 bytes")) as usize;
        pos += 4;
        let payload = stream.get(pos..pos + len).ok_or(EntropyError::TruncatedPayload)?;
        pos += len;
        let plane = decode_channel(payload, bw, bh, &channel_tables(i)).map_err(|e| match e {
            EntropyError::Truncated => EntropyError::TruncatedPayload,
            other => other,
        })?;
        planes.push(plane);
    }
    if pos != stream.len() {
        return Err(EntropyError::TrailingBytes(stream.len() - pos));
    }
    let cr = planes.pop().expect("three planes");
    let cb = planes.pop().expect("three planes");
    let y = planes.pop().expect("three planes");
    Ok(ExtractedFrame { planes: CoeffPlanes { y, cb, cr }, qf, width, height })
}
