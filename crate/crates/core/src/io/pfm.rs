//! Single-channel Portable Float Map (`Pf`) codec.
//!
//! Layout: `"Pf\n<width> <height>\n<scale>\n"` followed by `width * height`
//! 32-bit floats, rows stored bottom to top. A negative scale marks
//! little-endian payloads, a positive one big-endian. The decoder is strict:
//! any deviation from the header grammar, a zero or non-finite scale, a short
//! payload or trailing bytes is rejected with the offending byte offset.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::DisparityMap;
use crate::tracking::IntensityImage;

/// Decoded float raster with rows ordered top to bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endian {
    Little,
    Big,
}

fn read_dimension(bytes: &[u8], start: usize, terminator: u8) -> Result<(usize, usize)> {
    let mut pos = start;
    let mut value: usize = 0;
    while let Some(&b) = bytes.get(pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(usize::from(b - b'0')))
            .ok_or_else(|| Error::format(pos, "dimension overflows"))?;
        pos += 1;
    }
    if pos == start {
        return Err(Error::format(start, "expected a decimal dimension"));
    }
    match bytes.get(pos) {
        Some(&b) if b == terminator => {}
        Some(_) => return Err(Error::format(pos, "unexpected byte after dimension")),
        None => return Err(Error::format(pos, "header ends inside dimensions")),
    }
    if value == 0 {
        return Err(Error::format(start, "dimension must be non-zero"));
    }
    Ok((value, pos + 1))
}

/// Parses the header; returns `(width, height, endian, payload_offset)`.
pub fn decode_header(bytes: &[u8]) -> Result<(usize, usize, Endian, usize)> {
    match bytes.get(..3) {
        Some(b"Pf\n") => {}
        Some(b"PF\n") => return Err(Error::format(0, "three-channel PFM is not supported")),
        _ => return Err(Error::format(0, "missing \"Pf\" magic")),
    }
    let (width, pos) = read_dimension(bytes, 3, b' ')?;
    let (height, pos) = read_dimension(bytes, pos, b'\n')?;
    let end = bytes[pos..]
        .iter()
        .position(|&b| b == b'\n')
        .map(|i| pos + i)
        .ok_or_else(|| Error::format(pos, "header ends inside scale"))?;
    let token = std::str::from_utf8(&bytes[pos..end])
        .map_err(|_| Error::format(pos, "scale is not ASCII"))?;
    if token.is_empty() || token.trim() != token {
        return Err(Error::format(pos, "malformed scale"));
    }
    let scale: f64 = token
        .parse()
        .map_err(|_| Error::format(pos, format!("malformed scale {token:?}")))?;
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::format(
            pos,
            format!("scale must be finite and non-zero, got {token}"),
        ));
    }
    let endian = if scale < 0.0 {
        Endian::Little
    } else {
        Endian::Big
    };
    Ok((width, height, endian, end + 1))
}

pub fn decode(bytes: &[u8]) -> Result<PfmImage> {
    let (width, height, endian, offset) = decode_header(bytes)?;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(3, "image dimensions overflow"))?;
    let payload = &bytes[offset..];
    if payload.len() < expected {
        return Err(Error::format(
            bytes.len(),
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            offset + expected,
            "trailing bytes after payload",
        ));
    }
    let mut data = vec![0f32; width * height];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let value = match endian {
            Endian::Little => f32::from_le_bytes(raw),
            Endian::Big => f32::from_be_bytes(raw),
        };
        let (file_row, col) = (i / width, i % width);
        data[(height - 1 - file_row) * width + col] = value;
    }
    Ok(PfmImage {
        width,
        height,
        data,
    })
}

/// Encodes little-endian with scale `-1.0`.
pub fn encode(image: &PfmImage) -> Vec<u8> {
    encode_with(image, Endian::Little)
}

pub fn encode_with(image: &PfmImage, endian: Endian) -> Vec<u8> {
    let scale = match endian {
        Endian::Little => "-1.0",
        Endian::Big => "1.0",
    };
    let mut out = format!("Pf\n{} {}\n{scale}\n", image.width, image.height).into_bytes();
    out.reserve(image.data.len() * 4);
    for row in image.data.chunks_exact(image.width).rev() {
        for &v in row {
            match endian {
                Endian::Little => out.extend_from_slice(&v.to_le_bytes()),
                Endian::Big => out.extend_from_slice(&v.to_be_bytes()),
            }
        }
    }
    out
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let img = decode(&read_bytes(path.as_ref())?)?;
    DisparityMap::new(img.width, img.height, img.data)
}

pub fn write_pfm(path: impl AsRef<Path>, map: &DisparityMap) -> Result<()> {
    write_bytes(path.as_ref(), &encode(&PfmImage::from(map)))
}

pub fn read_intensity(path: impl AsRef<Path>) -> Result<IntensityImage> {
    let img = decode(&read_bytes(path.as_ref())?)?;
    IntensityImage::new(img.width, img.height, img.data)
}

pub fn write_intensity(path: impl AsRef<Path>, image: &IntensityImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode(&PfmImage::from(image)))
}

impl From<&DisparityMap> for PfmImage {
    fn from(map: &DisparityMap) -> Self {
        Self {
            width: map.width(),
            height: map.height(),
            data: map.values().to_vec(),
        }
    }
}

impl From<&IntensityImage> for PfmImage {
    fn from(image: &IntensityImage) -> Self {
        Self {
            width: image.width(),
            height: image.height(),
            data: image.data().to_vec(),
        }
    }
}
