//! Per-site RGB rasters written as binary PPM or PNG. Site `(ix, iy)` maps to
//! a `scale × scale` block at column `ix`, row `iy` (top row first).

use std::io::Write;

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB triples.
    pub pixels: Vec<u8>,
}

pub type Rgb = [u8; 3];

impl Image {
    /// Paints one block per site with `color(e)`.
    pub fn from_sites(spec: &ProblemSpec, scale: usize, color: impl Fn(usize) -> Rgb) -> Self {
        let scale = scale.max(1);
        let (w, h) = (spec.nelx * scale, spec.nely * scale);
        let mut pixels = vec![0u8; w * h * 3];
        for py in 0..h {
            for px in 0..w {
                let rgb = color(spec.element_index(px / scale, py / scale));
                let k = 3 * (py * w + px);
                pixels[k..k + 3].copy_from_slice(&rgb);
            }
        }
        Self {
            width: w,
            height: h,
            pixels,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        let k = 3 * (y * self.width + x);
        [self.pixels[k], self.pixels[k + 1], self.pixels[k + 2]]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(png_err)?;
            w.write_image_data(&self.pixels).map_err(png_err)?;
        }
        Ok(out)
    }

    /// RGBA bytes for canvas drawing.
    pub fn to_rgba(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * 4);
        for p in self.pixels.chunks_exact(3) {
            out.extend_from_slice(p);
            out.push(255);
        }
        out
    }

    pub fn write_ppm(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_ppm())?;
        Ok(())
    }
}

fn png_err(e: png::EncodingError) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn check_len(spec: &ProblemSpec, len: usize) -> Result<()> {
    if len != spec.n_elements() {
        return Err(Error::MeshMismatch {
            expected: spec.n_elements(),
            actual: len,
        });
    }
    Ok(())
}

/// Density 0 white, 1 black.
pub fn grayscale(spec: &ProblemSpec, values: &[f64], scale: usize) -> Result<Image> {
    check_len(spec, values.len())?;
    Ok(Image::from_sites(spec, scale, |e| {
        let g = to_byte(1.0 - values[e].clamp(0.0, 1.0));
        [g, g, g]
    }))
}

/// Blue (0) to red (1) through the hue wheel at full saturation.
pub fn hue_blue_red(t: f64) -> Rgb {
    let h = 240.0 * (1.0 - t.clamp(0.0, 1.0));
    hsv(h, 1.0, 1.0)
}

/// Values normalized to `[lo, hi]` on the blue-red scale.
pub fn heatmap(spec: &ProblemSpec, values: &[f64], lo: f64, hi: f64, scale: usize) -> Result<Image> {
    check_len(spec, values.len())?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    Ok(Image::from_sites(spec, scale, |e| hue_blue_red((values[e] - lo) / span)))
}

/// Hue from normalized `T_c`, opacity from optimal density, over white.
pub fn importance_color(density: f64, t_c_norm: f64) -> Rgb {
    let a = density.clamp(0.0, 1.0);
    let c = hue_blue_red(t_c_norm);
    let blend = |v: u8| to_byte((a * v as f64 + (1.0 - a) * 255.0) / 255.0);
    [blend(c[0]), blend(c[1]), blend(c[2])]
}

pub fn importance_map(spec: &ProblemSpec, density: &[f64], t_c_norm: &[f64], scale: usize) -> Result<Image> {
    check_len(spec, density.len())?;
    check_len(spec, t_c_norm.len())?;
    Ok(Image::from_sites(spec, scale, |e| importance_color(density[e], t_c_norm[e])))
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn hsv(h: f64, s: f64, v: f64) -> Rgb {
    let c = v * s;
    let hp = (h / 60.0).rem_euclid(6.0);
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [to_byte(r + m), to_byte(g + m), to_byte(b + m)]
}
