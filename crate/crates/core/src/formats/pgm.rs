//! Binary PGM ("P5") label maps. Pixel value = class index, maxval = VOID.
//! Maps with at most 255 classes use maxval 255, larger ones 16-bit samples
//! with maxval 65535 (big-endian, as netpbm prescribes).

use std::fs;
use std::path::Path;

use super::FormatError;
use crate::domain::{ClassId, LabelMap};

pub fn encode_label_map(map: &LabelMap) -> Vec<u8> {
    let wide = map.classes() > 255;
    let maxval: u32 = if wide { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", map.width(), map.height(), maxval).into_bytes();
    out.reserve(map.len() * if wide { 2 } else { 1 });
    for c in map.as_slice() {
        let v = if c.is_void() { maxval } else { c.0 as u32 };
        if wide {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    out
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&b) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, FormatError> {
        self.skip_space_and_comments();
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as u32))
                .ok_or_else(|| FormatError::Header {
                    offset: start,
                    reason: format!("{what} overflows"),
                })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(FormatError::Header { offset: start, reason: format!("expected {what}") });
        }
        Ok(value)
    }
}

/// Decodes a P5 label map with `classes` valid class indices.
pub fn decode_label_map(bytes: &[u8], classes: usize) -> Result<LabelMap, FormatError> {
    if !bytes.starts_with(b"P5") {
        return Err(FormatError::Header { offset: 0, reason: "missing P5 magic".into() });
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval_offset = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 && maxval != 65535 {
        return Err(FormatError::Header {
            offset: maxval_offset,
            reason: format!("maxval {maxval} unsupported (255 or 65535)"),
        });
    }
    if width == 0 || height == 0 {
        return Err(FormatError::Header { offset: 2, reason: "zero dimension".into() });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => {
            return Err(FormatError::Header {
                offset: cur.pos,
                reason: "expected single whitespace before payload".into(),
            })
        }
    }
    let sample = if maxval > 255 { 2 } else { 1 };
    let start = cur.pos;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(sample))
        .ok_or_else(|| FormatError::Header { offset: 2, reason: "dimensions overflow".into() })?;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(FormatError::Truncated { offset: start, expected, found: payload.len() });
    }
    let mut grid = Vec::with_capacity(width * height);
    for i in 0..width * height {
        let v = if sample == 2 {
            u16::from_be_bytes([payload[2 * i], payload[2 * i + 1]]) as u32
        } else {
            payload[i] as u32
        };
        if v == maxval {
            grid.push(ClassId::VOID);
        } else if (v as usize) < classes {
            grid.push(ClassId(v as u16));
        } else {
            return Err(FormatError::ClassOutOfRange { offset: start + i * sample, value: v, classes });
        }
    }
    Ok(LabelMap::new(width, height, classes, grid)?)
}

pub fn read_label_map(path: impl AsRef<Path>, classes: usize) -> Result<LabelMap, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_label_map(&bytes, classes)
}

pub fn write_label_map(map: &LabelMap, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode_label_map(map)).map_err(|e| FormatError::io(path, e))
}
