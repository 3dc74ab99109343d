//! Binary PPM (P6, maxval 255) reader and writer for display images.
//!
//! Quantization is `round(v·255)` with ties away from zero; dequantization is
//! `v/255`, so a round trip moves a channel by at most 1/510.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use drht_core::scene::LdrImage;

use crate::error::{Error, Result};

pub fn write_ppm(path: &Path, image: &LdrImage<f32>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io("create PPM", path, e))?;
    let mut out = BufWriter::new(file);
    let (w, h) = (image.width(), image.height());
    write!(out, "P6\n{w} {h}\n255\n").map_err(|e| Error::io("write PPM header", path, e))?;
    let mut row = Vec::with_capacity(3 * w);
    for y in 0..h {
        row.clear();
        for x in 0..w {
            for c in 0..3 {
                row.push((image.pixel(c, y, x) * 255.0).round() as u8);
            }
        }
        out.write_all(&row)
            .map_err(|e| Error::io("write PPM payload", path, e))?;
    }
    out.flush().map_err(|e| Error::io("flush PPM", path, e))?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<LdrImage<f32>> {
    let file = File::open(path).map_err(|e| Error::io("open PPM", path, e))?;
    let mut reader = BufReader::new(file);
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("read PPM", path, e))?;

    let mut pos = 0usize;
    let mut next_token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and '#' comment lines between header fields.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::PpmUnsupported("truncated header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = next_token(&bytes)?;
    if magic != "P6" {
        return Err(Error::PpmUnsupported(format!(
            "expected binary P6, got {magic:?}"
        )));
    }
    let w: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| Error::PpmUnsupported("bad width".into()))?;
    let h: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| Error::PpmUnsupported("bad height".into()))?;
    let maxval: usize = next_token(&bytes)?
        .parse()
        .map_err(|_| Error::PpmUnsupported("bad maxval".into()))?;
    if maxval != 255 {
        return Err(Error::PpmUnsupported(format!(
            "maxval must be 255, got {maxval}"
        )));
    }
    // Exactly one whitespace byte separates the header from the payload.
    pos += 1;
    let expected = 3 * w * h;
    if bytes.len() < pos || bytes.len() - pos != expected {
        return Err(Error::PpmUnsupported(format!(
            "payload must be {expected} bytes, got {}",
            bytes.len().saturating_sub(pos)
        )));
    }
    let mut data = vec![0.0f32; expected];
    for (i, &b) in bytes[pos..].iter().enumerate() {
        let pixel = i / 3;
        let c = i % 3;
        let (y, x) = (pixel / w, pixel % w);
        data[(c * h + y) * w + x] = b as f32 / 255.0;
    }
    Ok(LdrImage::from_planar(w, h, data)?)
}
