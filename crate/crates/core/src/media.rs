//! Binary PPM (P6) and PGM (P5) raster I/O.
//!
//! Only 8-bit files with a max value of 255 are accepted. Header comments
//! (`#` to end of line) are skipped.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported magic {0:?}")]
    UnsupportedMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(&'static str),
    #[error("unsupported max value {0} (only 255 is supported)")]
    UnsupportedMaxValue(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
}

/// Interleaved 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(MediaError::InvalidImage(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "dimensions must be positive");
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copies out the `w`×`h` region whose top-left corner is (`x0`, `y0`).
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop out of bounds");
        let mut data = Vec::with_capacity(w * h * 3);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * 3;
            data.extend_from_slice(&self.data[start..start + w * 3]);
        }
        Self { width: w, height: h, data }
    }

    /// Extracts one color channel (0 = R, 1 = G, 2 = B).
    pub fn channel(&self, c: usize) -> PlaneImage {
        assert!(c < 3);
        let data = self.data.iter().skip(c).step_by(3).copied().collect();
        PlaneImage { width: self.width, height: self.height, data }
    }
}

/// Single-channel 8-bit raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl PlaneImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, MediaError> {
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(MediaError::InvalidImage(format!(
                "expected {} samples for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "dimensions must be positive");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

struct Header {
    width: usize,
    height: usize,
    payload_offset: usize,
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header, MediaError> {
    if bytes.len() < 2 {
        return Err(MediaError::MalformedHeader("file too short"));
    }
    if &bytes[..2] != magic {
        return Err(MediaError::UnsupportedMagic(
            String::from_utf8_lossy(&bytes[..2]).into_owned(),
        ));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments before each field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(MediaError::MalformedHeader("unexpected end of header")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(MediaError::MalformedHeader("expected a decimal number"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| MediaError::MalformedHeader("number out of range"))?;
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(MediaError::MalformedHeader("missing whitespace after max value")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(MediaError::MalformedHeader("zero dimension"));
    }
    if maxval != 255 {
        return Err(MediaError::UnsupportedMaxValue(maxval));
    }
    Ok(Header { width: width as usize, height: height as usize, payload_offset: pos })
}

fn payload(bytes: &[u8], header: &Header, channels: usize) -> Result<Vec<u8>, MediaError> {
    let expected = header.width * header.height * channels;
    let found = bytes.len() - header.payload_offset;
    if found < expected {
        return Err(MediaError::TruncatedPayload { expected, found });
    }
    Ok(bytes[header.payload_offset..header.payload_offset + expected].to_vec())
}

pub fn decode_ppm(bytes: &[u8]) -> Result<RgbImage, MediaError> {
    let header = parse_header(bytes, b"P6")?;
    let data = payload(bytes, &header, 3)?;
    RgbImage::new(header.width, header.height, data)
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.data);
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage, MediaError> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(image: &RgbImage, path: impl AsRef<Path>) -> Result<(), MediaError> {
    fs::write(path, encode_ppm(image))?;
    Ok(())
}

pub fn decode_pgm(bytes: &[u8]) -> Result<PlaneImage, MediaError> {
    let header = parse_header(bytes, b"P5")?;
    let data = payload(bytes, &header, 1)?;
    PlaneImage::new(header.width, header.height, data)
}

pub fn encode_pgm(plane: &PlaneImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", plane.width, plane.height).into_bytes();
    out.extend_from_slice(&plane.data);
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<PlaneImage, MediaError> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(plane: &PlaneImage, path: impl AsRef<Path>) -> Result<(), MediaError> {
    fs::write(path, encode_pgm(plane))?;
    Ok(())
}
