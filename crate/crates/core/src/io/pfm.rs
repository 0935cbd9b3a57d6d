//! Portable float map rasters: 32-bit little-endian samples, scanlines
//! stored bottom to top.

use std::path::Path;

use crate::forward::Image;
use crate::{Error, Result};

pub fn encode_pfm(img: &Image) -> Result<Vec<u8>> {
    let tag = match img.channels {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::format("pfm", format!("{c} channels; only 1 or 3 are representable"))),
    };
    let mut out = format!("{tag}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let row = img.width * img.channels;
    out.reserve(img.data.len() * 4);
    for y in (0..img.height).rev() {
        for v in &img.data[y * row..(y + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Next whitespace-delimited header token and the offset after its single
/// trailing whitespace byte.
fn token(bytes: &[u8], mut at: usize) -> Result<(&str, usize)> {
    while at < bytes.len() && bytes[at].is_ascii_whitespace() {
        at += 1;
    }
    let start = at;
    while at < bytes.len() && !bytes[at].is_ascii_whitespace() {
        at += 1;
    }
    if start == at || at >= bytes.len() {
        return Err(Error::format("pfm", "truncated header"));
    }
    let s = std::str::from_utf8(&bytes[start..at]).map_err(|_| Error::format("pfm", "non-ASCII header"))?;
    Ok((s, at + 1))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let (tag, at) = token(bytes, 0)?;
    let channels = match tag {
        "Pf" => 1,
        "PF" => 3,
        t => return Err(Error::format("pfm", format!("unknown tag {t:?}"))),
    };
    let (w, at) = token(bytes, at)?;
    let (h, at) = token(bytes, at)?;
    let (s, at) = token(bytes, at)?;
    let parse = |t: &str| t.parse::<usize>().map_err(|_| Error::format("pfm", format!("bad dimension {t:?}")));
    let (width, height) = (parse(w)?, parse(h)?);
    let scale: f32 = s.parse().map_err(|_| Error::format("pfm", format!("bad scale {s:?}")))?;
    let little = scale < 0.0;
    let n = width * height * channels;
    let body = &bytes[at..];
    if body.len() != 4 * n {
        return Err(Error::format("pfm", format!("expected {} data bytes, found {}", 4 * n, body.len())));
    }
    let mut img = Image::new(width, height, channels);
    let row = width * channels;
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (r, k) = (i / row, i % row);
        img.data[(height - 1 - r) * row + k] = v;
    }
    Ok(img)
}

pub fn write_pfm(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, encode_pfm(img)?).map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<Image> {
    decode_pfm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
