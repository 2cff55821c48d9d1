//! Binary PPM (P6) and PGM (P5) with maxval 255.
//!
//! RGB images load as `[3, H, W]` tensors scaled to `[0, 1]`; label maps are
//! stored as PGM with the class index as the gray value.

use std::path::Path;

use crate::error::{Error, ImageError, Result};
use crate::labels::LabelMap;
use crate::tensor::Tensor;

struct Header {
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8], magic: &'static str) -> Result<Header, ImageError> {
    if bytes.len() < 2 || &bytes[..2] != magic.as_bytes() {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(ImageError::Magic {
            expected: magic,
            found,
        });
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (k, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments are allowed between fields.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(ImageError::Header(format!("expected a number for field {}", k + 1)));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| ImageError::Header(format!("number {text} out of range")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(ImageError::Header("missing whitespace after maxval".into())),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(ImageError::Header(format!("zero dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(ImageError::Maxval(maxval));
    }
    Ok(Header {
        width: width as usize,
        height: height as usize,
        data_offset: pos,
    })
}

fn pixel_data<'a>(bytes: &'a [u8], header: &Header, channels: usize) -> Result<&'a [u8], ImageError> {
    let expected = header.width * header.height * channels;
    let data = &bytes[header.data_offset..];
    if data.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: data.len(),
        });
    }
    Ok(&data[..expected])
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Raw interleaved RGB bytes of a `[3, H, W]` tensor.
pub fn rgb_bytes(image: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = image.chw()?;
    if c != 3 {
        return Err(Error::Shape(format!("RGB image needs 3 channels, got {c}")));
    }
    let plane = h * w;
    let v = image.values();
    Ok((0..plane)
        .flat_map(|p| (0..3).map(move |ch| to_byte(v[ch * plane + p])))
        .collect())
}

pub fn encode_ppm(image: &Tensor) -> Result<Vec<u8>> {
    let (_, h, w) = image.chw()?;
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(rgb_bytes(image)?);
    Ok(out)
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Tensor> {
    let header = parse_header(bytes, "P6")?;
    let data = pixel_data(bytes, &header, 3)?;
    let plane = header.width * header.height;
    let mut values = vec![0.0; 3 * plane];
    for (p, px) in data.chunks_exact(3).enumerate() {
        for ch in 0..3 {
            values[ch * plane + p] = px[ch] as f64 / 255.0;
        }
    }
    Tensor::from_values(&[3, header.height, header.width], values)
}

pub fn encode_pgm(labels: &LabelMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", labels.width(), labels.height()).into_bytes();
    out.extend_from_slice(labels.values());
    out
}

/// Decodes a P5 label map, rejecting gray values `>= num_classes`.
pub fn decode_pgm(bytes: &[u8], num_classes: usize) -> Result<LabelMap> {
    let header = parse_header(bytes, "P5")?;
    let data = pixel_data(bytes, &header, 1)?;
    LabelMap::with_classes(header.height, header.width, data.to_vec(), num_classes)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    decode_ppm(&read(path.as_ref())?)
}

pub fn save_image(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_ppm(image)?)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    decode_pgm(&read(path.as_ref())?, crate::labels::NUM_CLASSES)
}

pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    super::write_atomic(path.as_ref(), &encode_pgm(labels))
}
