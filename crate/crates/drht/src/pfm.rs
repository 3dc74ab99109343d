//! Portable float map (PFM) reader and writer for HDR radiance images.
//!
//! Writer emits the color variant bit-exactly: header `PF\n<w> <h>\n-1.0\n`
//! (scale −1.0 marks little-endian), then rows bottom-to-top, three 32-bit
//! floats per pixel. The reader additionally accepts big-endian files
//! (positive scale) and byte-swaps; the scale magnitude is not applied.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use drht_core::scene::HdrImage;

use crate::error::{Error, Result};

pub fn write_pfm(path: &Path, image: &HdrImage<f32>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io("create PFM", path, e))?;
    let mut out = BufWriter::new(file);
    let (w, h) = (image.width(), image.height());
    write!(out, "PF\n{w} {h}\n-1.0\n").map_err(|e| Error::io("write PFM header", path, e))?;
    // Rows bottom-to-top, pixels interleaved RGB.
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..3 {
                out.write_all(&image.pixel(c, y, x).to_le_bytes())
                    .map_err(|e| Error::io("write PFM payload", path, e))?;
            }
        }
    }
    out.flush().map_err(|e| Error::io("flush PFM", path, e))?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<HdrImage<f32>> {
    let file = File::open(path).map_err(|e| Error::io("open PFM", path, e))?;
    let mut reader = BufReader::new(file);
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::io("read PFM header", path, e))?;
    if line.trim_end() != "PF" {
        return Err(Error::PfmHeader(format!(
            "expected color magic 'PF', got {:?}",
            line.trim_end()
        )));
    }
    line.clear();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::io("read PFM header", path, e))?;
    let mut dims = line.split_whitespace();
    let (w, h) = match (dims.next(), dims.next(), dims.next()) {
        (Some(w), Some(h), None) => {
            let w: usize = w
                .parse()
                .map_err(|_| Error::PfmHeader(format!("bad width {w:?}")))?;
            let h: usize = h
                .parse()
                .map_err(|_| Error::PfmHeader(format!("bad height {h:?}")))?;
            (w, h)
        }
        _ => {
            return Err(Error::PfmHeader(format!(
                "expected '<width> <height>', got {:?}",
                line.trim_end()
            )))
        }
    };
    if w == 0 || h == 0 {
        return Err(Error::PfmHeader("zero dimension".into()));
    }
    line.clear();
    reader
        .read_line(&mut line)
        .map_err(|e| Error::io("read PFM header", path, e))?;
    let scale: f32 = line
        .trim()
        .parse()
        .map_err(|_| Error::PfmHeader(format!("bad scale {:?}", line.trim())))?;
    let little_endian = scale < 0.0;

    let expected = w * h * 3 * 4;
    let mut payload = Vec::with_capacity(expected);
    reader
        .read_to_end(&mut payload)
        .map_err(|e| Error::io("read PFM payload", path, e))?;
    if payload.len() != expected {
        return Err(Error::PfmTruncated {
            expected,
            got: payload.len(),
        });
    }

    // File rows run bottom-to-top; unpack into planar top-down storage.
    let mut data = vec![0.0f32; 3 * w * h];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(bytes)
        } else {
            f32::from_be_bytes(bytes)
        };
        let pixel = i / 3;
        let c = i % 3;
        let y = h - 1 - pixel / w;
        let x = pixel % w;
        data[(c * h + y) * w + x] = v;
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::PfmNonFinite);
    }
    Ok(HdrImage::from_planar(w, h, data)?)
}
