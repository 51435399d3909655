//! Binary netpbm codecs: P6 (RGB) for frames, P5 (gray) for masks and luminance images.
//!
//! Only `maxval = 255` is accepted. Comments (`#` to end of line) are allowed between
//! header tokens. Bytes after the raster are ignored.

use super::frame::{quantize_u8, ColorSpace, Frame};
use crate::error::{Error, Result};

struct Header {
    width: usize,
    height: usize,
    /// Offset of the first raster byte.
    data_start: usize,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
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

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| Error::decode(start, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(if self.pos >= self.bytes.len() {
                Error::decode(self.pos, format!("truncated header, expected {what}"))
            } else {
                Error::decode(self.pos, format!("expected decimal {what}"))
            });
        }
        Ok(value)
    }
}

fn parse_header(bytes: &[u8], magic: &[u8; 2]) -> Result<Header> {
    if bytes.len() < 2 {
        return Err(Error::decode(0, "truncated magic number"));
    }
    if &bytes[..2] != magic {
        return Err(Error::decode(0, format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    let mut cur = Cursor { bytes, pos: 2 };
    match bytes.get(2) {
        Some(b) if b.is_ascii_whitespace() || *b == b'#' => {}
        Some(_) => return Err(Error::decode(2, "missing whitespace after magic")),
        None => return Err(Error::decode(2, "truncated header")),
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    cur.skip_whitespace_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::decode(maxval_at, format!("zero image dimension {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::decode(maxval_at, format!("unsupported maxval {maxval}, only 255 is accepted")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => {}
        Some(_) => return Err(Error::decode(cur.pos, "expected single whitespace before raster")),
        None => return Err(Error::decode(cur.pos, "truncated header")),
    }
    Ok(Header { width, height, data_start: cur.pos + 1 })
}

fn raster<'a>(bytes: &'a [u8], header: &Header, channels: usize) -> Result<&'a [u8]> {
    let need = header
        .width
        .checked_mul(header.height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::decode(header.data_start, "image dimensions overflow"))?;
    let available = bytes.len() - header.data_start;
    if available < need {
        return Err(Error::decode(
            bytes.len(),
            format!("truncated pixel data: need {need} bytes, have {available}"),
        ));
    }
    Ok(&bytes[header.data_start..header.data_start + need])
}

/// Decode a binary P6 image into an RGB frame with samples `value / 255`.
pub fn decode_ppm(bytes: &[u8]) -> Result<Frame> {
    let header = parse_header(bytes, b"P6")?;
    let data = raster(bytes, &header, 3)?;
    let n = header.width * header.height;
    let mut planes = vec![Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for px in data.chunks_exact(3) {
        for c in 0..3 {
            planes[c].push(px[c] as f64 / 255.0);
        }
    }
    Frame::new(header.width, header.height, ColorSpace::Rgb, planes)
}

pub fn encode_ppm(frame: &Frame) -> Result<Vec<u8>> {
    frame.expect_space(ColorSpace::Rgb)?;
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.reserve(frame.len() * 3);
    let (r, g, b) = (frame.plane(0), frame.plane(1), frame.plane(2));
    for k in 0..frame.len() {
        out.extend_from_slice(&[quantize_u8(r[k]), quantize_u8(g[k]), quantize_u8(b[k])]);
    }
    Ok(out)
}

/// Decode a binary P5 image into a gray frame.
pub fn decode_pgm(bytes: &[u8]) -> Result<Frame> {
    let header = parse_header(bytes, b"P5")?;
    let data = raster(bytes, &header, 1)?;
    Frame::gray(header.width, header.height, data.iter().map(|&v| v as f64 / 255.0).collect())
}

pub fn encode_pgm(frame: &Frame) -> Result<Vec<u8>> {
    frame.expect_space(ColorSpace::Gray)?;
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend(frame.plane(0).iter().map(|&v| quantize_u8(v)));
    Ok(out)
}
