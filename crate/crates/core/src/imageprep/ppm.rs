//! Binary PPM (P6), 8-bit only.

use std::fs;
use std::path::Path;

use super::{ImageBuffer, ImageError, Result};

fn next_token(data: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(ImageError::Ppm("unexpected end of header".into()));
    }
    Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = next_token(data, pos)?;
    tok.parse()
        .map_err(|_| ImageError::Ppm(format!("invalid {what}: {tok:?}")))
}

pub fn decode_ppm(data: &[u8]) -> Result<ImageBuffer> {
    let mut pos = 0;
    let magic = next_token(data, &mut pos)?;
    if magic != "P6" {
        return Err(ImageError::Ppm(format!("expected P6, found {magic:?}")));
    }
    let width = header_number(data, &mut pos, "width")?;
    let height = header_number(data, &mut pos, "height")?;
    let maxval = header_number(data, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(ImageError::Ppm(format!(
            "only maxval 255 is supported, found {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(ImageError::Ppm("missing raster separator".into()));
    }
    pos += 1;
    let need = width * height * 3;
    let raster = data.get(pos..pos + need).ok_or_else(|| {
        ImageError::Ppm(format!(
            "raster truncated: need {need} bytes, have {}",
            data.len() - pos
        ))
    })?;
    ImageBuffer::new(width, height, raster.to_vec())
}

pub fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    decode_ppm(&fs::read(path)?)
}

pub fn write_ppm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_ppm(img))?;
    Ok(())
}
