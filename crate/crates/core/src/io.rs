use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{Mask, Raster};

const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Loads a PGM (P5), PPM (P6) or 8-bit PNG image. Dispatch is by magic
/// bytes, not extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    if bytes.starts_with(b"P5") {
        parse_pnm(&bytes, 1)
    } else if bytes.starts_with(b"P6") {
        parse_pnm(&bytes, 3)
    } else if bytes.starts_with(&PNG_MAGIC) {
        decode_png(&bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "unknown magic, expected P5, P6 or PNG".into(),
        ))
    }
}

/// Saves by extension: `.pgm` single channel, `.ppm` three channels,
/// `.png` either. Samples are rounded to nearest and clamped to [0, 255].
pub fn save_image(path: impl AsRef<Path>, image: &Raster) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "pgm" => {
            require_channels(image, 1)?;
            write_pnm(path, image, b"P5")
        }
        "ppm" => {
            require_channels(image, 3)?;
            write_pnm(path, image, b"P6")
        }
        "png" => encode_png(path, image),
        other => Err(Error::UnsupportedFormat(format!(
            "cannot infer format from extension {other:?}"
        ))),
    }
}

/// Loads a single-channel image as a mask; nonzero samples mark the
/// target region.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let image = load_image(&path)?;
    if image.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: 1,
            actual: image.channels(),
        });
    }
    Mask::from_fn(image.width(), image.height(), |x, y| {
        image.sample(x, y, 0) != 0.0
    })
}

/// Marks pixels whose every channel equals `marker` as target.
pub fn sentinel_mask(image: &Raster, marker: f64) -> Result<Mask> {
    Mask::from_fn(image.width(), image.height(), |x, y| {
        image.pixel(x, y).iter().all(|&v| v == marker)
    })
}

/// Frees the marker value for in-band damage tagging by moving every
/// channel sample equal to `marker` down to `marker - 1`.
pub fn displace_sentinel(image: &Raster, marker: f64) -> Result<Raster> {
    if marker < 1.0 {
        return Err(Error::InvalidParam(format!(
            "marker {marker} has no lower neighbor to displace to"
        )));
    }
    Raster::from_fn(image.width(), image.height(), image.channels(), |x, y, c| {
        let v = image.sample(x, y, c);
        if v == marker {
            marker - 1.0
        } else {
            v
        }
    })
}

fn require_channels(image: &Raster, expected: usize) -> Result<()> {
    if image.channels() != expected {
        return Err(Error::ChannelMismatch {
            expected,
            actual: image.channels(),
        });
    }
    Ok(())
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

struct PnmHeader {
    width: usize,
    height: usize,
    payload_at: usize,
}

/// Header grammar: magic, then width, height, maxval as decimal tokens
/// separated by whitespace, `#` comments running to end of line, one
/// whitespace byte before the payload.
fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        *field = read_pnm_number(bytes, &mut pos)?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension);
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!(
            "maxval {maxval} outside the single-byte range"
        )));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => {
            return Err(Error::UnsupportedFormat(
                "missing whitespace before payload".into(),
            ))
        }
    }
    Ok(PnmHeader {
        width,
        height,
        payload_at: pos,
    })
}

fn read_pnm_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while !matches!(bytes.get(*pos), None | Some(b'\n')) {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_digit() => break,
            Some(b) => {
                return Err(Error::UnsupportedFormat(format!(
                    "unexpected byte 0x{b:02x} in header"
                )))
            }
            None => return Err(Error::UnsupportedFormat("truncated header".into())),
        }
    }
    let mut value = 0usize;
    while let Some(b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add((b - b'0') as usize))
            .ok_or_else(|| Error::UnsupportedFormat("header value overflows".into()))?;
        *pos += 1;
    }
    Ok(value)
}

fn parse_pnm(bytes: &[u8], channels: usize) -> Result<Raster> {
    let header = parse_pnm_header(bytes)?;
    let need = header.width * header.height * channels;
    let payload = &bytes[header.payload_at..];
    if payload.len() < need {
        return Err(Error::UnsupportedFormat(format!(
            "payload has {} bytes, needs {need}",
            payload.len()
        )));
    }
    Raster::from_vec(
        header.width,
        header.height,
        channels,
        payload[..need].iter().map(|&b| b as f64).collect(),
    )
}

fn write_pnm(path: &Path, image: &Raster, magic: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(32 + image.data().len());
    out.extend_from_slice(magic);
    out.extend_from_slice(format!("\n{} {}\n255\n", image.width(), image.height()).as_bytes());
    out.extend(image.data().iter().map(|&v| quantize(v)));
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn decode_png(bytes: &[u8]) -> Result<Raster> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(png_error)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::UnsupportedFormat("png dimensions overflow".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_error)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!(
            "png bit depth {:?}, only eight supported",
            info.bit_depth
        )));
    }
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb => 3,
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "png color type {other:?}, only grayscale and rgb supported"
            )))
        }
    };
    let need = info.width as usize * info.height as usize * channels;
    Raster::from_vec(
        info.width as usize,
        info.height as usize,
        channels,
        buf[..need].iter().map(|&b| b as f64).collect(),
    )
}

fn encode_png(path: &Path, image: &Raster) -> Result<()> {
    let file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        image.width() as u32,
        image.height() as u32,
    );
    encoder.set_color(match image.channels() {
        1 => png::ColorType::Grayscale,
        _ => png::ColorType::Rgb,
    });
    encoder.set_depth(png::BitDepth::Eight);
    let bytes: Vec<u8> = image.data().iter().map(|&v| quantize(v)).collect();
    let mut writer = encoder
        .write_header()
        .map_err(|e| png_encode_error(path, e))?;
    writer
        .write_image_data(&bytes)
        .map_err(|e| png_encode_error(path, e))?;
    Ok(())
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(source) => Error::Io {
            path: "<png stream>".into(),
            source,
        },
        other => Error::UnsupportedFormat(format!("png: {other}")),
    }
}

fn png_encode_error(path: &Path, e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(source) => Error::Io {
            path: path.to_owned(),
            source,
        },
        other => Error::UnsupportedFormat(format!("png: {other}")),
    }
}
