//! I-frame codec and DCT-domain restoration pipeline.
//!
//! The codec follows the baseline JPEG intra path (YCbCr 4:4:4, 8×8 DCT,
//! IJG-scaled quantization, run-length + Huffman coding) inside a small
//! `IFR1` container. On top of it sit the quality metrics, the dataset
//! builder and the enhanced decoder that restores low-quality coefficients
//! with a trained network before dequantizing them with a higher-quality
//! table.

pub mod codec;
pub mod dataset;
pub mod enhance;
pub mod entropy;
pub mod media;
pub mod metrics;
pub mod synth;
