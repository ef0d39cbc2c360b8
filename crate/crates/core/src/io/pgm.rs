//! 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).

use std::io::{Read, Write};

use super::IoError;
use crate::lineage::LabelFrame;

pub fn read_label_frame(mut reader: impl Read) -> Result<LabelFrame, IoError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn write_label_frame(frame: &LabelFrame, mut writer: impl Write) -> Result<(), IoError> {
    writer.write_all(&encode(frame))?;
    Ok(())
}

pub fn encode(frame: &LabelFrame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.labels().len() * 2);
    out.extend_from_slice(header.as_bytes());
    for &v in frame.labels() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<LabelFrame, IoError> {
    let mut cursor = Header { bytes, pos: 0 };
    if bytes.get(..2) != Some(b"P5") {
        return Err(IoError::Format("missing P5 magic".into()));
    }
    cursor.pos = 2;
    let width = cursor.number("width")?;
    let height = cursor.number("height")?;
    let maxval = cursor.number("maxval")?;
    if maxval != 65535 {
        return Err(IoError::Format(format!("maxval {maxval}, expected 65535")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(IoError::Format("no whitespace after maxval".into())),
    }
    if width == 0 || height == 0 {
        return Err(IoError::Format(format!("empty image {width}x{height}")));
    }
    let n = width as usize * height as usize;
    let raster = &bytes[cursor.pos..];
    if raster.len() < 2 * n {
        return Err(IoError::Truncated {
            expected: 2 * n,
            actual: raster.len(),
        });
    }
    let labels = raster[..2 * n]
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(LabelFrame::new(width, height, labels)?)
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_separators(&mut self) {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, IoError> {
        let before = self.pos;
        self.skip_separators();
        if self.pos == before {
            return Err(IoError::Format(format!(
                "expected whitespace before {what}"
            )));
        }
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| IoError::Format(format!("bad {what}")))
    }
}
