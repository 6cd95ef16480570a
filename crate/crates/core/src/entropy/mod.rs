//! Entropy coding: zig-zag scan, run-length symbols, baseline Huffman
//! tables and the `IFR1` stream container.

mod container;
mod huffman;
mod rle;
mod zigzag;

pub use container::{extract_quantized_coeffs, serialize, ExtractedFrame, MAGIC, VERSION};
pub use huffman::{huffman_decode, huffman_encode, BitReader, BitWriter, ChannelTables, HuffmanTable};
pub use rle::{rle_decode, rle_decode_block, rle_encode, size_category, RleSymbol};
pub use zigzag::{inverse_zigzag, zigzag, ZigzagVector, ZIGZAG_ORDER};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntropyError {
    #[error("value {value} exceeds size category {max_category}")]
    AmplitudeOutOfRange { value: i32, max_category: u8 },
    #[error("symbol value {0:#04x} has no code in the table")]
    UncodedSymbol(u8),
    #[error("invalid Huffman table: {0}")]
    InvalidTable(&'static str),
    #[error("invalid Huffman prefix")]
    InvalidPrefix,
    #[error("bitstream ended early")]
    Truncated,
    #[error("run-length data overruns the 64-coefficient block")]
    Overrun,
    #[error("block is missing its end-of-block marker")]
    MissingEob,
    #[error("malformed symbol stream: {0}")]
    MalformedSymbols(&'static str),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported stream version {0}")]
    UnsupportedVersion(u8),
    #[error("bad header: {0}")]
    BadHeader(&'static str),
    #[error("truncated payload")]
    TruncatedPayload,
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("dimensions {width}x{height} do not fit the stream header")]
    DimensionOverflow { width: usize, height: usize },
    #[error("coefficient planes do not cover a {width}x{height} image")]
    GridMismatch { width: usize, height: usize },
}
