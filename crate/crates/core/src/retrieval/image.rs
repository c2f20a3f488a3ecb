//! Grayscale rasters, PNG transport and text-to-image rendering.
//!
//! Text is drawn with the embedded 8x8 `font8x8` glyph set so that the same
//! string always yields the same bytes regardless of installed fonts.

use std::io::Cursor;

use font8x8::{UnicodeFonts, BASIC_FONTS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("cannot render an empty string")]
    EmptyText,
    #[error("text needs {needed} lines but the canvas fits {available}")]
    Overflow { needed: usize, available: usize },
    #[error("render config leaves no room for a single glyph")]
    CanvasTooSmall,
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    BadBuffer { got: usize, expected: usize },
    #[error("png: {0}")]
    Png(String),
}

/// 8-bit grayscale image, row-major, 0 = black.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, ImageError> {
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(ImageError::BadBuffer {
                got: pixels.len(),
                expected,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn blank(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    /// SHA-256 over dimensions and pixels.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(&self.pixels);
        h.finalize().into()
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(|e| ImageError::Png(e.to_string()))?;
            w.write_image_data(&self.pixels)
                .map_err(|e| ImageError::Png(e.to_string()))?;
        }
        Ok(out)
    }

    /// Decode any 8/16-bit PNG, converting color to luma.
    pub fn from_png(bytes: &[u8]) -> Result<Self, ImageError> {
        let png_err = |e: png::DecodingError| ImageError::Png(e.to_string());
        let mut dec = png::Decoder::new(Cursor::new(bytes));
        dec.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = dec.read_info().map_err(png_err)?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| ImageError::Png("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf).map_err(png_err)?;
        let channels = info.color_type.samples();
        let (w, h) = (info.width, info.height);
        let mut pixels = Vec::with_capacity(w as usize * h as usize);
        for row in buf.chunks(info.line_size).take(h as usize) {
            for px in row.chunks(channels).take(w as usize) {
                let luma = match channels {
                    1 | 2 => px[0],
                    _ => {
                        let (r, g, b) = (px[0] as u32, px[1] as u32, px[2] as u32);
                        ((299 * r + 587 * g + 114 * b) / 1000) as u8
                    }
                };
                pixels.push(luma);
            }
        }
        Self::new(w, h, pixels)
    }
}

/// Canvas and glyph layout for [`render_text_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    /// Integer upscale of the 8x8 glyphs.
    pub scale: u32,
    pub margin: u32,
    /// Extra pixels between lines.
    pub line_gap: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 224,
            height: 224,
            scale: 2,
            margin: 8,
            line_gap: 4,
        }
    }
}

impl RenderConfig {
    fn columns(&self) -> usize {
        (self.width.saturating_sub(2 * self.margin) / (8 * self.scale)) as usize
    }

    fn rows(&self) -> usize {
        let line = 8 * self.scale + self.line_gap;
        ((self.height.saturating_sub(2 * self.margin) + self.line_gap) / line) as usize
    }
}

/// Greedy word wrap; words longer than a line are split.
fn wrap(text: &str, columns: usize) -> Vec<Vec<char>> {
    let mut lines: Vec<Vec<char>> = Vec::new();
    let mut current: Vec<char> = Vec::new();
    for word in text.split_whitespace() {
        let mut chars: Vec<char> = word.chars().collect();
        while chars.len() > columns {
            if !current.is_empty() {
                lines.push(std::mem::take(&mut current));
            }
            let rest = chars.split_off(columns);
            lines.push(chars);
            chars = rest;
        }
        let needed = if current.is_empty() { chars.len() } else { current.len() + 1 + chars.len() };
        if needed > columns {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.extend(chars);
    }
    if !current.is_empty() {
        lines.push(current);
    }
    lines
}

/// Draw `text` in black on a white canvas.
pub fn render_text_image(text: &str, cfg: &RenderConfig) -> Result<RasterImage, ImageError> {
    if text.trim().is_empty() {
        return Err(ImageError::EmptyText);
    }
    let (columns, rows) = (cfg.columns(), cfg.rows());
    if columns == 0 || rows == 0 || cfg.scale == 0 {
        return Err(ImageError::CanvasTooSmall);
    }
    let lines = wrap(text, columns);
    if lines.len() > rows {
        return Err(ImageError::Overflow {
            needed: lines.len(),
            available: rows,
        });
    }
    let mut img = RasterImage::blank(cfg.width, cfg.height, 255);
    let glyph_px = 8 * cfg.scale;
    for (row, line) in lines.iter().enumerate() {
        let y0 = cfg.margin + row as u32 * (glyph_px + cfg.line_gap);
        for (col, &ch) in line.iter().enumerate() {
            let x0 = cfg.margin + col as u32 * glyph_px;
            let glyph = BASIC_FONTS
                .get(ch)
                .or_else(|| BASIC_FONTS.get('?'))
                .unwrap_or([0; 8]);
            for (gy, bits) in glyph.iter().enumerate() {
                for gx in 0..8u32 {
                    if bits & (1 << gx) == 0 {
                        continue;
                    }
                    for dy in 0..cfg.scale {
                        for dx in 0..cfg.scale {
                            let x = x0 + gx * cfg.scale + dx;
                            let y = y0 + gy as u32 * cfg.scale + dy;
                            img.pixels[(y * cfg.width + x) as usize] = 0;
                        }
                    }
                }
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_is_deterministic_and_nonblank() {
        let cfg = RenderConfig::default();
        let a = render_text_image("you are a horse", &cfg).unwrap();
        let b = render_text_image("you are a horse", &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_png().unwrap(), b.to_png().unwrap());
        assert!(a.pixels.contains(&0));
        assert!(a.pixels.contains(&255));
        assert_ne!(a, render_text_image("you are a frog", &cfg).unwrap());
    }

    #[test]
    fn empty_text_is_rejected() {
        assert_eq!(
            render_text_image("", &RenderConfig::default()),
            Err(ImageError::EmptyText)
        );
        assert_eq!(
            render_text_image("   ", &RenderConfig::default()),
            Err(ImageError::EmptyText)
        );
    }

    #[test]
    fn long_text_wraps_then_overflows() {
        let cfg = RenderConfig::default();
        // 13 columns by 10 rows at the default layout.
        assert_eq!((cfg.columns(), cfg.rows()), (13, 10));
        let wrapped = "run beautifully like a horse across the open field";
        assert!(render_text_image(wrapped, &cfg).is_ok());
        let long = "word ".repeat(200);
        assert!(matches!(
            render_text_image(&long, &cfg),
            Err(ImageError::Overflow { .. })
        ));
    }

    #[test]
    fn wrap_splits_long_words() {
        let lines = wrap("abcdefghij xy", 4);
        let as_str: Vec<String> = lines.iter().map(|l| l.iter().collect()).collect();
        assert_eq!(as_str, vec!["abcd", "efgh", "ij", "xy"]);
        let lines = wrap("ab cd ef", 5);
        let as_str: Vec<String> = lines.iter().map(|l| l.iter().collect()).collect();
        assert_eq!(as_str, vec!["ab cd", "ef"]);
    }

    #[test]
    fn png_round_trip() {
        let img = render_text_image("pronk!", &RenderConfig::default()).unwrap();
        let back = RasterImage::from_png(&img.to_png().unwrap()).unwrap();
        assert_eq!(back, img);
        assert!(RasterImage::from_png(b"not a png").is_err());
    }
}
