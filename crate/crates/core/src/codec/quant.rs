//! Quantization tables, quality scaling and (de)quantization.

use std::fmt;

use super::dct::Block8;
use super::CodecError;

/// Largest coefficient magnitude representable in the baseline size categories.
pub const MAX_COEFF: i16 = 2047;

/// JPEG-style quality factor in `1..=100`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QualityFactor(u8);

impl QualityFactor {
    pub fn new(value: u32) -> Result<Self, CodecError> {
        if (1..=100).contains(&value) {
            Ok(Self(value as u8))
        } else {
            Err(CodecError::InvalidQuality(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u32> for QualityFactor {
    type Error = CodecError;
    fn try_from(value: u32) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl fmt::Display for QualityFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 8×8 quantizer divisors in natural (row-major) order, each in `1..=255`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantTable([u16; 64]);

impl QuantTable {
    pub fn new(divisors: [u16; 64]) -> Result<Self, CodecError> {
        if let Some(&bad) = divisors.iter().find(|&&d| !(1..=255).contains(&d)) {
            return Err(CodecError::InvalidDivisor(bad));
        }
        Ok(Self(divisors))
    }

    pub fn divisors(&self) -> &[u16; 64] {
        &self.0
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.0[row * 8 + col]
    }
}

// ITU-T T.81 Annex K.1, natural order.
const LUMINANCE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

const CHROMINANCE: [u16; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// The standard (luminance, chrominance) base tables.
pub fn base_quant_tables() -> (QuantTable, QuantTable) {
    (QuantTable(LUMINANCE), QuantTable(CHROMINANCE))
}

/// IJG quality scaling.
pub fn scale_quant_table(base: &QuantTable, qf: QualityFactor) -> QuantTable {
    let q = qf.get() as u32;
    let s = if q < 50 { 5000 / q } else { 200 - 2 * q };
    QuantTable(base.0.map(|b| ((b as u32 * s + 50) / 100).clamp(1, 255) as u16))
}

/// Scaled (luminance, chrominance) tables for a quality factor.
pub fn quant_tables(qf: QualityFactor) -> (QuantTable, QuantTable) {
    let (l, c) = base_quant_tables();
    (scale_quant_table(&l, qf), scale_quant_table(&c, qf))
}

/// 8×8 block of quantized coefficients, natural order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizedBlock(pub [i16; 64]);

impl Default for QuantizedBlock {
    fn default() -> Self {
        QuantizedBlock([0; 64])
    }
}

pub fn quantize(block: &Block8, table: &QuantTable) -> Result<QuantizedBlock, CodecError> {
    let mut out = [0i16; 64];
    for (i, o) in out.iter_mut().enumerate() {
        let q = (block.0[i] / table.0[i] as f64).round();
        if q.abs() > MAX_COEFF as f64 {
            return Err(CodecError::CoefficientOverflow { index: i, value: q });
        }
        *o = q as i16;
    }
    Ok(QuantizedBlock(out))
}

pub fn dequantize(block: &QuantizedBlock, table: &QuantTable) -> Block8 {
    let mut out = [0.0; 64];
    for (i, o) in out.iter_mut().enumerate() {
        *o = block.0[i] as f64 * table.0[i] as f64;
    }
    Block8(out)
}

/// Dequantizes real-valued coefficients (model predictions). For integral
/// inputs this is bit-identical to [`dequantize`].
pub fn dequantize_real(coeffs: &[f64; 64], table: &QuantTable) -> Block8 {
    let mut out = [0.0; 64];
    for (i, o) in out.iter_mut().enumerate() {
        *o = coeffs[i] * table.0[i] as f64;
    }
    Block8(out)
}
