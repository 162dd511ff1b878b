//! SCM1 score maps: ASCII header `SCM1 <W> <H> <C>\n` followed by W*H*C
//! little-endian f32 values, pixel-major then class.

use std::fs;
use std::path::Path;

use super::FormatError;
use crate::domain::{ScoreMap, SCORE_SUM_TOLERANCE};

/// Vectors further than this from unit sum are rejected; closer ones are renormalized.
const RENORMALIZE_LIMIT: f64 = 1e-3;
const MAX_HEADER: usize = 96;

pub fn encode_score_map(map: &ScoreMap) -> Vec<u8> {
    let mut out = format!("SCM1 {} {} {}\n", map.width(), map.height(), map.classes()).into_bytes();
    out.reserve(map.as_slice().len() * 4);
    for v in map.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_score_map(bytes: &[u8]) -> Result<ScoreMap, FormatError> {
    let newline = bytes
        .iter()
        .take(MAX_HEADER)
        .position(|&b| b == b'\n')
        .ok_or_else(|| FormatError::Header { offset: 0, reason: "no header line".into() })?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| FormatError::Header { offset: 0, reason: "header is not ASCII".into() })?;
    let mut fields = header.split(' ');
    if fields.next() != Some("SCM1") {
        return Err(FormatError::Header { offset: 0, reason: "bad magic, expected SCM1".into() });
    }
    let mut dims = [0usize; 3];
    for (i, name) in ["width", "height", "classes"].iter().enumerate() {
        dims[i] = fields
            .next()
            .and_then(|f| f.parse::<usize>().ok())
            .filter(|&v| v > 0)
            .ok_or_else(|| FormatError::Header { offset: 0, reason: format!("bad {name}") })?;
    }
    if fields.next().is_some() {
        return Err(FormatError::Header { offset: 0, reason: "trailing header fields".into() });
    }
    let [width, height, classes] = dims;
    let start = newline + 1;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(classes))
        .ok_or_else(|| FormatError::Header { offset: 0, reason: "dimensions overflow".into() })?;
    let expected = count * 4;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(FormatError::Truncated { offset: start, expected, found: payload.len() });
    }
    let mut scores: Vec<f32> = payload[..expected]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    for (pixel, v) in scores.chunks_exact_mut(classes).enumerate() {
        let mut sum = 0.0f64;
        for (k, s) in v.iter().enumerate() {
            let offset = start + (pixel * classes + k) * 4;
            if !s.is_finite() {
                return Err(FormatError::NonFinite { offset });
            }
            if *s < 0.0 {
                return Err(FormatError::NegativeScore { offset, value: *s });
            }
            sum += *s as f64;
        }
        let dev = (sum - 1.0).abs();
        if dev > RENORMALIZE_LIMIT {
            return Err(FormatError::NotNormalized { pixel, sum });
        }
        if dev > SCORE_SUM_TOLERANCE {
            v.iter_mut().for_each(|s| *s = (*s as f64 / sum) as f32);
        }
    }
    Ok(ScoreMap::new(width, height, classes, scores)?)
}

pub fn read_score_map(path: impl AsRef<Path>) -> Result<ScoreMap, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    decode_score_map(&bytes)
}

pub fn write_score_map(map: &ScoreMap, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    fs::write(path, encode_score_map(map)).map_err(|e| FormatError::io(path, e))
}
