//! Binary portable pixmap (P6) images.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

pub const YELLOW: Rgb = [255, 230, 40];
pub const RED: Rgb = [220, 20, 30];
pub const BLUE: Rgb = [30, 60, 220];
pub const WHITE: Rgb = [255, 255, 255];
pub const GREY: Rgb = [128, 128, 128];

/// An RGB raster in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    /// Paint the `block × block` square whose top-left cell is `(bx, by)`
    /// in block coordinates.
    pub fn fill_block(&mut self, bx: usize, by: usize, block: usize, c: Rgb) {
        for y in by * block..(by + 1) * block {
            for x in bx * block..(bx + 1) * block {
                self.set(x, y, c);
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Input(format!("malformed PPM: {}", m));
        let mut fields = Vec::with_capacity(4);
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(
                std::str::from_utf8(&bytes[start..pos])
                    .map_err(|_| bad("header"))?
                    .to_string(),
            );
        }
        pos += 1;
        if fields[0] != "P6" || fields[3] != "255" {
            return Err(bad("only 8-bit P6 is supported"));
        }
        let width: usize = fields[1].parse().map_err(|_| bad("width"))?;
        let height: usize = fields[2].parse().map_err(|_| bad("height"))?;
        let body = bytes.get(pos..).ok_or_else(|| bad("missing raster"))?;
        if body.len() != width * height * 3 {
            return Err(bad("raster size"));
        }
        let pixels = body.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut img = Image::new(4, 2, YELLOW);
        img.fill_block(1, 0, 2, RED);
        let back = Image::decode(&img.encode()).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.get(2, 1), RED);
        assert_eq!(back.get(0, 0), YELLOW);
        assert!(Image::decode(b"P3\n1 1\n255\n").is_err());
    }
}
