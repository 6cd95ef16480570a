//! Run-length symbols for one zig-zag vector: a differential DC term,
//! then (zero-run, amplitude) pairs with ZRL/EOB markers.

use super::zigzag::ZigzagVector;
use super::EntropyError;

/// Largest DC-difference size category in the baseline tables.
pub const MAX_DC_CATEGORY: u8 = 11;
/// Largest AC amplitude size category in the baseline tables.
pub const MAX_AC_CATEGORY: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RleSymbol {
    /// DC difference from the previous block in the same channel.
    Dc(i32),
    /// `run` zeros (0..=15) followed by a nonzero `value`.
    Ac { run: u8, value: i16 },
    /// Sixteen zeros.
    Zrl,
    /// All remaining coefficients are zero.
    Eob,
}

/// Number of magnitude bits needed for `v` (0 for 0).
#[inline]
pub fn size_category(v: i32) -> u8 {
    (32 - v.unsigned_abs().leading_zeros()) as u8
}

pub fn rle_encode(vector: &ZigzagVector, prev_dc: i32) -> Result<Vec<RleSymbol>, EntropyError> {
    let v = &vector.0;
    let diff = v[0] as i32 - prev_dc;
    if size_category(diff) > MAX_DC_CATEGORY {
        return Err(EntropyError::AmplitudeOutOfRange { value: diff, max_category: MAX_DC_CATEGORY });
    }
    let mut out = vec![RleSymbol::Dc(diff)];
    let mut run = 0u8;
    for &a in &v[1..] {
        if a == 0 {
            run += 1;
            continue;
        }
        if size_category(a as i32) > MAX_AC_CATEGORY {
            return Err(EntropyError::AmplitudeOutOfRange { value: a as i32, max_category: MAX_AC_CATEGORY });
        }
        while run >= 16 {
            out.push(RleSymbol::Zrl);
            run -= 16;
        }
        out.push(RleSymbol::Ac { run, value: a });
        run = 0;
    }
    if run > 0 {
        out.push(RleSymbol::Eob);
    }
    Ok(out)
}

/// Decodes the symbols of exactly one block; returns the vector and the
/// number of symbols consumed.
pub fn rle_decode_block(symbols: &[RleSymbol], prev_dc: i32) -> Result<(ZigzagVector, usize), EntropyError> {
    let mut out = [0i16; 64];
    let Some(&RleSymbol::Dc(diff)) = symbols.first() else {
        return Err(EntropyError::MalformedSymbols("block does not start with a DC symbol"));
    };
    let dc = prev_dc + diff;
    if dc.unsigned_abs() > i16::MAX as u32 {
        return Err(EntropyError::MalformedSymbols("DC value out of range"));
    }
    out[0] = dc as i16;
    let mut pos = 1usize;
    let mut used = 1usize;
    while pos < 64 {
        let Some(sym) = symbols.get(used) else {
            return Err(EntropyError::MissingEob);
        };
        used += 1;
        match *sym {
            RleSymbol::Eob => return Ok((ZigzagVector(out), used)),
            RleSymbol::Zrl => pos += 16,
            RleSymbol::Ac { run, value } => {
                if run > 15 || value == 0 {
                    return Err(EntropyError::MalformedSymbols("invalid AC symbol"));
                }
                pos += run as usize;
                if pos >= 64 {
                    return Err(EntropyError::Overrun);
                }
                out[pos] = value;
                pos += 1;
            }
            RleSymbol::Dc(_) => return Err(EntropyError::MissingEob),
        }
    }
    if pos > 64 {
        return Err(EntropyError::Overrun);
    }
    Ok((ZigzagVector(out), used))
}

/// Decodes a complete single-block symbol stream.
pub fn rle_decode(symbols: &[RleSymbol], prev_dc: i32) -> Result<ZigzagVector, EntropyError> {
    let (v, used) = rle_decode_block(symbols, prev_dc)?;
    if used != symbols.len() {
        return Err(EntropyError::MalformedSymbols("trailing symbols after block end"));
    }
    Ok(v)
}
