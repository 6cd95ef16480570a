//! Canonical Huffman coding with the default baseline tables, plus the
//! MSB-first bit I/O it needs.

use std::sync::OnceLock;

use super::rle::{size_category, RleSymbol, MAX_AC_CATEGORY, MAX_DC_CATEGORY};
use super::EntropyError;

// ITU-T T.81 Annex K.3 default tables.
const DC_LUMA_BITS: [u8; 16] = [0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0];
const DC_CHROMA_BITS: [u8; 16] = [0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
const DC_VALS: [u8; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

const AC_LUMA_BITS: [u8; 16] = [0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 125];
const AC_LUMA_VALS: [u8; 162] = [
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22, 0x71,
    0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72,
    0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37,
    0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83,
    0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3,
    0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3,
    0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
];

const AC_CHROMA_BITS: [u8; 16] = [0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 119];
const AC_CHROMA_VALS: [u8; 162] = [
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71, 0x13, 0x22,
    0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1,
    0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36,
    0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a,
    0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a,
    0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba,
    0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
    0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
];

/// A canonical Huffman code given by code-length counts and symbol values.
#[derive(Debug, Clone)]
pub struct HuffmanTable {
    bits: [u8; 16],
    vals: Vec<u8>,
    /// (code, length) per symbol value; length 0 = not coded.
    encode: [(u16, u8); 256],
    /// Largest code of each length, or -1.
    maxcode: [i32; 17],
    /// Smallest code of each length.
    mincode: [i32; 17],
    /// Index into `vals` of the first code of each length.
    valptr: [usize; 17],
}

impl HuffmanTable {
    pub fn new(bits: [u8; 16], vals: &[u8]) -> Result<Self, EntropyError> {
        let total: usize = bits.iter().map(|&b| b as usize).sum();
        if total != vals.len() || total == 0 || total > 256 {
            return Err(EntropyError::InvalidTable("code count does not match symbol count"));
        }
        let mut encode = [(0u16, 0u8); 256];
        let mut maxcode = [-1i32; 17];
        let mut mincode = [0i32; 17];
        let mut valptr = [0usize; 17];
        let mut code: u32 = 0;
        let mut k = 0usize;
        for len in 1..=16usize {
            let n = bits[len - 1] as usize;
            if n > 0 {
                valptr[len] = k;
                mincode[len] = code as i32;
                for _ in 0..n {
                    let v = vals[k] as usize;
                    if encode[v].1 != 0 {
                        return Err(EntropyError::InvalidTable("duplicate symbol"));
                    }
                    encode[v] = (code as u16, len as u8);
                    code += 1;
                    k += 1;
                }
                maxcode[len] = code as i32 - 1;
            }
            // all-ones codes are reserved, so the code space must not fill up
            if code >= (1 << len) {
                return Err(EntropyError::InvalidTable("code space overflow"));
            }
            code <<= 1;
        }
        Ok(Self { bits, vals: vals.to_vec(), encode, maxcode, mincode, valptr })
    }

    pub fn dc_luminance() -> &'static HuffmanTable {
        static T: OnceLock<HuffmanTable> = OnceLock::new();
        T.get_or_init(|| HuffmanTable::new(DC_LUMA_BITS, &DC_VALS).expect("standard table"))
    }

    pub fn dc_chrominance() -> &'static HuffmanTable {
        static T: OnceLock<HuffmanTable> = OnceLock::new();
        T.get_or_init(|| HuffmanTable::new(DC_CHROMA_BITS, &DC_VALS).expect("standard table"))
    }

    pub fn ac_luminance() -> &'static HuffmanTable {
        static T: OnceLock<HuffmanTable> = OnceLock::new();
        T.get_or_init(|| HuffmanTable::new(AC_LUMA_BITS, &AC_LUMA_VALS).expect("standard table"))
    }

    pub fn ac_chrominance() -> &'static HuffmanTable {
        static T: OnceLock<HuffmanTable> = OnceLock::new();
        T.get_or_init(|| HuffmanTable::new(AC_CHROMA_BITS, &AC_CHROMA_VALS).expect("standard table"))
    }

    pub fn bits(&self) -> &[u8; 16] {
        &self.bits
    }

    pub fn values(&self) -> &[u8] {
        &self.vals
    }

    /// (code, length) for a symbol value, if it is coded.
    pub fn code(&self, value: u8) -> Option<(u16, u8)> {
        let c = self.encode[value as usize];
        (c.1 != 0).then_some(c)
    }

    fn write(&self, w: &mut BitWriter, value: u8) -> Result<(), EntropyError> {
        let (code, len) = self.code(value).ok_or(EntropyError::UncodedSymbol(value))?;
        w.write_bits(code as u32, len);
        Ok(())
    }

    fn read(&self, r: &mut BitReader) -> Result<u8, EntropyError> {
        let mut code = 0i32;
        for len in 1..=16 {
            code = (code << 1) | r.read_bit()? as i32;
            if self.maxcode[len] >= code && code >= self.mincode[len] {
                return Ok(self.vals[self.valptr[len] + (code - self.mincode[len]) as usize]);
            }
        }
        Err(EntropyError::InvalidPrefix)
    }
}

/// The DC/AC pair used for one channel.
#[derive(Debug, Clone, Copy)]
pub struct ChannelTables {
    pub dc: &'static HuffmanTable,
    pub ac: &'static HuffmanTable,
}

impl ChannelTables {
    pub fn luminance() -> Self {
        Self { dc: HuffmanTable::dc_luminance(), ac: HuffmanTable::ac_luminance() }
    }

    pub fn chrominance() -> Self {
        Self { dc: HuffmanTable::dc_chrominance(), ac: HuffmanTable::ac_chrominance() }
    }
}

/// MSB-first bit packer; the final partial byte is padded with 1-bits.
#[derive(Debug, Default)]
pub struct BitWriter {
    out: Vec<u8>,
    acc: u32,
    nbits: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `n` bits of `bits` (n ≤ 16).
    pub fn write_bits(&mut self, bits: u32, n: u8) {
        debug_assert!(n <= 16);
        if n == 0 {
            return;
        }
        self.acc = (self.acc << n) | (bits & ((1 << n) - 1));
        self.nbits += n;
        while self.nbits >= 8 {
            self.nbits -= 8;
            self.out.push((self.acc >> self.nbits) as u8);
        }
        self.acc &= (1 << self.nbits) - 1;
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            let pad = 8 - self.nbits;
            self.write_bits((1 << pad) - 1, pad);
        }
        self.out
    }
}

/// MSB-first bit reader that never reads past its slice.
#[derive(Debug)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<u32, EntropyError> {
        let byte = *self.data.get(self.pos / 8).ok_or(EntropyError::Truncated)?;
        let bit = (byte >> (7 - self.pos % 8)) & 1;
        self.pos += 1;
        Ok(bit as u32)
    }

    pub fn read_bits(&mut self, n: u8) -> Result<u32, EntropyError> {
        let mut v = 0;
        for _ in 0..n {
            v = (v << 1) | self.read_bit()?;
        }
        Ok(v)
    }

    pub fn bits_consumed(&self) -> usize {
        self.pos
    }
}

/// Sign-magnitude extra bits: negative values store `v - 1` in `size` bits.
fn amplitude_bits(v: i32, size: u8) -> u32 {
    if v >= 0 {
        v as u32
    } else {
        (v + (1 << size) - 1) as u32
    }
}

fn extend(bits: u32, size: u8) -> i32 {
    if size == 0 {
        0
    } else if bits < (1 << (size - 1)) {
        bits as i32 - (1 << size) + 1
    } else {
        bits as i32
    }
}

pub fn write_symbol(w: &mut BitWriter, sym: &RleSymbol, tables: &ChannelTables) -> Result<(), EntropyError> {
    match *sym {
        RleSymbol::Dc(diff) => {
            let size = size_category(diff);
            if size > MAX_DC_CATEGORY {
                return Err(EntropyError::AmplitudeOutOfRange { value: diff, max_category: MAX_DC_CATEGORY });
            }
            tables.dc.write(w, size)?;
            w.write_bits(amplitude_bits(diff, size), size);
        }
        RleSymbol::Ac { run, value } => {
            let size = size_category(value as i32);
            if run > 15 || size == 0 || size > MAX_AC_CATEGORY {
                return Err(EntropyError::AmplitudeOutOfRange { value: value as i32, max_category: MAX_AC_CATEGORY });
            }
            tables.ac.write(w, (run << 4) | size)?;
            w.write_bits(amplitude_bits(value as i32, size), size);
        }
        RleSymbol::Zrl => tables.ac.write(w, 0xF0)?,
        RleSymbol::Eob => tables.ac.write(w, 0x00)?,
    }
    Ok(())
}

/// Reads the symbols of one block, stopping after EOB or position 63.
pub fn read_block_symbols(r: &mut BitReader, tables: &ChannelTables) -> Result<Vec<RleSymbol>, EntropyError> {
    let size = tables.dc.read(r)?;
    if size > MAX_DC_CATEGORY {
        return Err(EntropyError::InvalidPrefix);
    }
    let diff = extend(r.read_bits(size)?, size);
    let mut out = vec![RleSymbol::Dc(diff)];
    let mut pos = 1usize;
    while pos < 64 {
        let rs = tables.ac.read(r)?;
        let (run, size) = (rs >> 4, rs & 0x0F);
        match (run, size) {
            (0, 0) => {
                out.push(RleSymbol::Eob);
                break;
            }
            (15, 0) => {
                out.push(RleSymbol::Zrl);
                pos += 16;
            }
            (_, 0) => return Err(EntropyError::InvalidPrefix),
            _ => {
                let value = extend(r.read_bits(size)?, size) as i16;
                out.push(RleSymbol::Ac { run, value });
                pos += run as usize + 1;
            }
        }
    }
    if pos > 64 {
        return Err(EntropyError::Overrun);
    }
    Ok(out)
}

/// Huffman-codes a symbol stream into bytes.
pub fn huffman_encode(symbols: &[RleSymbol], tables: &ChannelTables) -> Result<Vec<u8>, EntropyError> {
    let mut w = BitWriter::new();
    for s in symbols {
        write_symbol(&mut w, s, tables)?;
    }
    Ok(w.finish())
}

/// Decodes `blocks` blocks worth of symbols from a payload.
pub fn huffman_decode(payload: &[u8], blocks: usize, tables: &ChannelTables) -> Result<Vec<RleSymbol>, EntropyError> {
    let mut r = BitReader::new(payload);
    let mut out = Vec::new();
    for _ in 0..blocks {
        out.extend(read_block_symbols(&mut r, tables)?);
    }
    Ok(out)
}
