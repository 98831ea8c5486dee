use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const FORMAT: &str = "PGM";

/// Binary (P5) grayscale image. Samples are one byte when `maxval < 256`,
/// otherwise two bytes big-endian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples.
    pub data: Vec<u16>,
}

impl Pgm {
    /// Intensities scaled to `[0, 1]`.
    pub fn to_array(&self) -> Array2<f64> {
        let scale = f64::from(self.maxval);
        Array2::from_shape_fn((self.height, self.width), |(r, c)| {
            f64::from(self.data[r * self.width + c]) / scale
        })
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::malformed(FORMAT, format!("bad {what} in header")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Pgm> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::malformed(FORMAT, "not a binary PGM (missing P5 magic)"));
    }
    let mut hdr = Header { bytes, pos: 2 };
    if !hdr.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::malformed(FORMAT, "missing whitespace after magic"));
    }
    let width = hdr.number("width")?;
    let height = hdr.number("height")?;
    let maxval = hdr.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::malformed(FORMAT, format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::malformed(FORMAT, format!("maxval {maxval} outside [1, 65535]")));
    }
    if !bytes.get(hdr.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::malformed(FORMAT, "missing whitespace after maxval"));
    }
    let body = &bytes[hdr.pos + 1..];
    let depth = if maxval < 256 { 1 } else { 2 };
    let count = width
        .checked_mul(height)
        .filter(|n| n.checked_mul(depth).is_some())
        .ok_or_else(|| Error::malformed(FORMAT, "image dimensions overflow"))?;
    if body.len() < count * depth {
        return Err(Error::malformed(
            FORMAT,
            format!("truncated pixel data: need {} bytes, found {}", count * depth, body.len()),
        ));
    }
    let data: Vec<u16> = if depth == 1 {
        body[..count].iter().map(|&b| u16::from(b)).collect()
    } else {
        body[..2 * count]
            .chunks_exact(2)
            .map(|p| u16::from_be_bytes([p[0], p[1]]))
            .collect()
    };
    let maxval = maxval as u16;
    if let Some(v) = data.iter().find(|&&v| v > maxval) {
        return Err(Error::malformed(FORMAT, format!("sample {v} exceeds maxval {maxval}")));
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        data,
    })
}

pub fn encode_pgm(img: &Pgm) -> Result<Vec<u8>> {
    if img.data.len() != img.width * img.height || img.maxval == 0 {
        return Err(Error::invalid("inconsistent PGM image"));
    }
    if img.data.iter().any(|&v| v > img.maxval) {
        return Err(Error::invalid("PGM sample exceeds maxval"));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    if img.maxval < 256 {
        out.extend(img.data.iter().map(|&v| v as u8));
    } else {
        out.extend(img.data.iter().flat_map(|v| v.to_be_bytes()));
    }
    Ok(out)
}

/// Source of grayscale images for feature extraction.
pub trait ImageLoader: Sync {
    /// Intensities in `[0, 1]`, shape `height x width`.
    fn load(&self, path: &Path) -> Result<Array2<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PgmLoader;

impl ImageLoader for PgmLoader {
    fn load(&self, path: &Path) -> Result<Array2<f64>> {
        let bytes = std::fs::read(path).map_err(|e| {
            Error::invalid(format!("cannot read image {}: {e}", path.display()))
        })?;
        decode_pgm(&bytes)
            .map(|p| p.to_array())
            .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_both_depths() {
        for maxval in [255u16, 1000] {
            let img = Pgm {
                width: 3,
                height: 2,
                maxval,
                data: vec![0, 1, 2, maxval, 7, 200],
            };
            let bytes = encode_pgm(&img).unwrap();
            assert_eq!(decode_pgm(&bytes).unwrap(), img);
        }
    }

    #[test]
    fn header_comments_and_scaling() {
        let mut bytes = b"P5 # comment\n2 # w\n1\n# max\n255\n".to_vec();
        bytes.extend([0, 255]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 1));
        let a = img.to_array();
        assert_eq!(a[[0, 0]], 0.0);
        assert_eq!(a[[0, 1]], 1.0);
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode_pgm(b"").is_err());
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00\x00\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n70000\n\x00\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n10\n\x0b").is_err());
        assert!(decode_pgm(b"P5\n0 1\n255\n").is_err());
        assert!(decode_pgm(b"P5\n99999999999 99999999999\n255\n").is_err());
        assert!(decode_pgm(b"P5\n1 1\n255").is_err());
    }

    #[test]
    fn loader_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        std::fs::write(&p, b"P5\n1 1\n255\n\x80").unwrap();
        let a = PgmLoader.load(&p).unwrap();
        assert!((a[[0, 0]] - 128.0 / 255.0).abs() < 1e-15);
        assert!(PgmLoader.load(&dir.path().join("nope.pgm")).is_err());
    }
}
