//! Windowed 8-bit grayscale slices.

use std::path::Path;
use std::str::FromStr;

use hire_core::ScalarVolume;

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(format!("axis must be x, y or z, got `{s}`")),
        }
    }
}

/// `round((clamp(v, lo, hi) − lo) / (hi − lo) · 255)`, halves away from zero.
pub fn window_level(v: f64, lo: f64, hi: f64) -> u8 {
    ((v.clamp(lo, hi) - lo) / (hi - lo) * 255.0).round() as u8
}

/// The slice through `index` along `axis`, as rows of pixels. The image
/// columns follow the lower remaining axis, rows the higher one.
pub fn slice_pixels(vol: &ScalarVolume, axis: Axis, index: usize, window: [f64; 2]) -> Result<(u32, u32, Vec<u8>)> {
    let [lo, hi] = window;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::Config(format!("window [{lo}, {hi}] must satisfy lo < hi")));
    }
    let [n1, n2, n3] = vol.grid().dims();
    let (extent, w, h) = match axis {
        Axis::X => (n1, n2, n3),
        Axis::Y => (n2, n1, n3),
        Axis::Z => (n3, n1, n2),
    };
    if index >= extent {
        return Err(CliError::SliceOutOfRange { index, extent });
    }
    let mut pixels = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let v = match axis {
                Axis::X => vol.get(index, c, r),
                Axis::Y => vol.get(c, index, r),
                Axis::Z => vol.get(c, r, index),
            };
            pixels.push(window_level(v, lo, hi));
        }
    }
    Ok((w as u32, h as u32, pixels))
}

pub fn encode_png(width: u32, height: u32, pixels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| CliError::Png(e.to_string()))?;
        writer
            .write_image_data(pixels)
            .map_err(|e| CliError::Png(e.to_string()))?;
    }
    Ok(out)
}

pub fn export_slice(vol: &ScalarVolume, axis: Axis, index: usize, window: [f64; 2], path: &Path) -> Result<()> {
    let (w, h, pixels) = slice_pixels(vol, axis, index, window)?;
    std::fs::write(path, encode_png(w, h, &pixels)?).map_err(|e| CliError::io(path, e))
}
