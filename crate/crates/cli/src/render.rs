//! Raster images of classifications, holes and loops. PPM is always written;
//! PNG needs the `png` feature.

use std::path::Path;

use spiderweb_core::escape::ComponentMap;
use spiderweb_core::loops::{FundamentalHole, LoopExport};
use spiderweb_core::mask::Mask;
use spiderweb_core::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderSpec {
    /// Pixels per grid cell along each axis.
    pub scale: usize,
    pub overlay_loops: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self { scale: 1, overlay_loops: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

const LOOP_COLOR: [u8; 3] = [255, 255, 255];
const OVERFLOW_COLOR: [u8; 3] = [12, 12, 20];

impl Image {
    fn new(width: usize, height: usize) -> Self {
        Self { width, height, rgb: vec![0; width * height * 3] }
    }

    fn put(&mut self, x: i64, y: i64, c: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let k = (y as usize * self.width + x as usize) * 3;
        self.rgb[k..k + 3].copy_from_slice(&c);
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.rgb);
        out
    }

    #[cfg(feature = "png")]
    pub fn to_png(&self) -> std::io::Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().map_err(std::io::Error::other)?;
            w.write_image_data(&self.rgb).map_err(std::io::Error::other)?;
        }
        Ok(out)
    }

    /// Write `stem.ppm`, and `stem.png` when asked and compiled in.
    pub fn save(&self, dir: &Path, stem: &str, png: bool) -> std::io::Result<Vec<String>> {
        #[cfg_attr(not(feature = "png"), allow(unused_mut))]
        let mut written = vec![format!("{stem}.ppm")];
        std::fs::write(dir.join(&written[0]), self.to_ppm())?;
        if png {
            #[cfg(feature = "png")]
            {
                written.push(format!("{stem}.png"));
                std::fs::write(dir.join(&written[1]), self.to_png()?)?;
            }
            #[cfg(not(feature = "png"))]
            return Err(std::io::Error::other("built without the png feature"));
        }
        Ok(written)
    }
}

/// A saturated colour per component label, stable across runs.
fn component_color(label: u32) -> [u8; 3] {
    let mut h = label.wrapping_mul(0x9e37_79b9).rotate_left(13) ^ 0x5bd1_e995;
    h = h.wrapping_mul(0x85eb_ca6b);
    let hue = (h >> 8) as f64 / (1u32 << 24) as f64 * 6.0;
    let sector = hue as u32 % 6;
    let t = hue.fract();
    let (hi, lo) = (230.0, 70.0);
    let up = lo + (hi - lo) * t;
    let down = hi - (hi - lo) * t;
    let (r, g, b) = match sector {
        0 => (hi, up, lo),
        1 => (down, hi, lo),
        2 => (lo, hi, up),
        3 => (lo, down, hi),
        4 => (up, lo, hi),
        _ => (hi, lo, down),
    };
    [r as u8, g as u8, b as u8]
}

/// Grey for in-level cells, darker at higher levels.
fn level_shade(level: usize, levels: usize) -> [u8; 3] {
    let span = levels.max(1) as f64;
    let v = (200.0 - 150.0 * level as f64 / span) as u8;
    [v, v, v]
}

fn draw_loops(img: &mut Image, grid: &GridSpec, loops: &[LoopExport], scale: usize) {
    let origin = grid.origin();
    let px = scale as f64 / grid.cell_size();
    let h = img.height as f64;
    let to_px = |p: [f64; 2]| ((p[0] - origin.re) * px, h - (p[1] - origin.im) * px);
    for lp in loops {
        for pair in lp.vertices.windows(2) {
            let (x0, y0) = to_px(pair[0]);
            let (x1, y1) = to_px(pair[1]);
            let steps = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let x = x0 + (x1 - x0) * t;
                let y = y0 + (y1 - y0) * t;
                img.put(x.floor() as i64, y.floor() as i64, LOOP_COLOR);
            }
        }
    }
}

/// Paint per-cell colours with `+im` up.
fn paint(res: usize, scale: usize, color: impl Fn(usize, usize) -> [u8; 3]) -> Image {
    let mut img = Image::new(res * scale, res * scale);
    for j in 0..res {
        for i in 0..res {
            let c = color(i, j);
            let y0 = (res - 1 - j) * scale;
            for dy in 0..scale {
                for dx in 0..scale {
                    img.put((i * scale + dx) as i64, (y0 + dy) as i64, c);
                }
            }
        }
    }
    img
}

/// One classification raster: in-level cells shaded by the raster's level,
/// complement components in distinct colours.
pub fn render_classification(grid: &GridSpec, cells: &[u8], loops: &[LoopExport], rs: &RenderSpec) -> Image {
    let res = grid.resolution;
    let complement = Mask::from_bits(res, cells.iter().map(|&c| c == 1).collect());
    let cm = ComponentMap::from_mask(&complement);
    let shade = level_shade(grid.level.unsigned_abs() as usize, 8);
    let mut img = paint(res, rs.scale, |i, j| match cells[j * res + i] {
        1 => component_color(cm.label(i, j).unwrap_or(0)),
        2 => OVERFLOW_COLOR,
        _ => shade,
    });
    if rs.overlay_loops {
        draw_loops(&mut img, grid, loops, rs.scale);
    }
    img
}

/// Nested filled holes: each cell takes the colour of the smallest hole
/// containing it, cells outside every hole the in-level shade of the last.
pub fn render_holes(grid: &GridSpec, holes: &[FundamentalHole], loops: &[LoopExport], rs: &RenderSpec) -> Image {
    let res = grid.resolution;
    let n = holes.len();
    let mut img = paint(res, rs.scale, |i, j| match holes.iter().position(|h| h.filled.get(i, j)) {
        Some(k) if holes[k].cells.get(i, j) => component_color(k as u32),
        Some(k) => level_shade(k, n),
        None => level_shade(n, n),
    });
    if rs.overlay_loops {
        draw_loops(&mut img, grid, loops, rs.scale);
    }
    img
}
