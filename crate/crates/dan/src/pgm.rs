//! Binary 8-bit PGM (`P5`, maxval 255).

use std::path::Path;

use dan_core::image::ImageU8;

#[derive(Debug, thiserror::Error)]
pub enum PgmError {
    #[error("unsupported format {0:?}: only binary P5 is read")]
    UnsupportedFormat(String),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("maxval {0} is not supported, only 255")]
    MaxVal(u64),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u64, PgmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PgmError::BadHeader(format!("missing {what}")))
    }
}

pub fn read_pgm(bytes: &[u8]) -> Result<ImageU8, PgmError> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    if magic != b"P5" {
        return Err(PgmError::UnsupportedFormat(String::from_utf8_lossy(magic).into_owned()));
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(PgmError::MaxVal(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(PgmError::BadHeader("no whitespace after maxval".into()));
    }
    let start = h.pos + 1;
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader("zero extent".into()));
    }
    let expected = (width * height) as usize;
    let found = bytes.len() - start;
    if found < expected {
        return Err(PgmError::Truncated { expected, found });
    }
    ImageU8::new(width as usize, height as usize, bytes[start..start + expected].to_vec())
        .map_err(|e| PgmError::BadHeader(e.to_string()))
}

pub fn write_pgm(img: &ImageU8) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

pub fn read_pgm_file(path: &Path) -> Result<ImageU8, PgmError> {
    let bytes = std::fs::read(path).map_err(|source| PgmError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_pgm(&bytes)
}

pub fn write_pgm_file(path: &Path, img: &ImageU8) -> Result<(), PgmError> {
    std::fs::write(path, write_pgm(img)).map_err(|source| PgmError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_bytes() {
        let img = ImageU8::new(2, 2, vec![0, 128, 64, 255]).unwrap();
        let bytes = write_pgm(&img);
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 128, 64, 255]);
        assert_eq!(read_pgm(&bytes).unwrap(), img);
    }

    #[test]
    fn distinct_errors() {
        assert!(matches!(read_pgm(b"P2\n1 1\n255\n0"), Err(PgmError::UnsupportedFormat(m)) if m == "P2"));
        assert!(matches!(read_pgm(b"P5\n1 1\n65535\n00"), Err(PgmError::MaxVal(65535))));
        assert!(matches!(
            read_pgm(b"P5\n2 2\n255\n\x01\x02"),
            Err(PgmError::Truncated { expected: 4, found: 2 })
        ));
        assert!(matches!(read_pgm(b"P5\n2\n"), Err(PgmError::BadHeader(_))));
    }

    #[test]
    fn header_comments_are_skipped() {
        let img = read_pgm(b"P5\n# made by hand\n1 2\n255\n\x07\x09").unwrap();
        assert_eq!(img.pixels(), &[7, 9]);
    }
}
