//! 8-bit grayscale frames, directory I/O, and the small set of raster
//! primitives the renderer and debug overlays need.
//!
//! A frame sequence on disk is a directory of PNG or PGM files; lexicographic
//! file order defines time. Pixel (0, 0) is the top-left corner, x grows
//! right, y grows down, and subpixel coordinates address pixel centers.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::math::Vec2;

/// One 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize) -> Self {
        GrayFrame {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayFrame {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "frame buffer is {} bytes, expected {}x{}={}",
                data.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(GrayFrame {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.data[y * self.width + x] = value;
    }

    /// Intensity at integer coordinates, clamped at the borders.
    #[inline]
    pub fn at_clamped(&self, x: i64, y: i64) -> f64 {
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[yc * self.width + xc] as f64
    }

    /// Bilinear intensity sample at a subpixel position, clamped at borders.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xf = x.max(0.0).min(self.width as f64 - 1.0);
        let yf = y.max(0.0).min(self.height as f64 - 1.0);
        let x0 = xf.floor();
        let y0 = yf.floor();
        let ax = xf - x0;
        let ay = yf - y0;
        let x0 = x0 as i64;
        let y0 = y0 as i64;
        let i00 = self.at_clamped(x0, y0);
        let i10 = self.at_clamped(x0 + 1, y0);
        let i01 = self.at_clamped(x0, y0 + 1);
        let i11 = self.at_clamped(x0 + 1, y0 + 1);
        (1.0 - ax) * (1.0 - ay) * i00 + ax * (1.0 - ay) * i10 + (1.0 - ax) * ay * i01 + ax * ay * i11
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < self.width as f64 && p.y < self.height as f64
    }

    /// Draw a filled anti-aliased disk. The outer `rim_width` pixels of the
    /// disk are drawn in `rim`; everything inside in `fill`. The rim gives the
    /// disk internal texture so downstream feature detectors have corners to
    /// latch onto, not just the silhouette.
    pub fn draw_disk(&mut self, center: Vec2, radius: f64, fill: u8, rim: u8, rim_width: f64) {
        if radius <= 0.0 {
            return;
        }
        let x_min = ((center.x - radius - 1.0).floor().max(0.0)) as usize;
        let y_min = ((center.y - radius - 1.0).floor().max(0.0)) as usize;
        let x_max = ((center.x + radius + 1.0).ceil()).min(self.width as f64 - 1.0) as usize;
        let y_max = ((center.y + radius + 1.0).ceil()).min(self.height as f64 - 1.0) as usize;
        if x_min > x_max || y_min > y_max {
            return;
        }
        let inner = (radius - rim_width).max(0.0);
        for y in y_min..=y_max {
            for x in x_min..=x_max {
                let d = Vec2::new(x as f64, y as f64).distance(center);
                // Coverage ramps over one pixel at each radial boundary.
                let outer_cov = smooth_step(radius + 0.5 - d);
                if outer_cov <= 0.0 {
                    continue;
                }
                let rim_mix = smooth_step(d - inner + 0.5);
                let color = blend(fill, rim, rim_mix);
                let idx = y * self.width + x;
                self.data[idx] = blend(self.data[idx], color, outer_cov);
            }
        }
    }

    /// Draw an anti-aliased line segment of the given width.
    pub fn draw_line(&mut self, a: Vec2, b: Vec2, value: u8, width: f64) {
        let half = width.max(0.5) / 2.0;
        let pad = half + 1.0;
        let x_min = ((a.x.min(b.x) - pad).floor().max(0.0)) as usize;
        let y_min = ((a.y.min(b.y) - pad).floor().max(0.0)) as usize;
        let x_max = ((a.x.max(b.x) + pad).ceil()).min(self.width as f64 - 1.0) as usize;
        let y_max = ((a.y.max(b.y) + pad).ceil()).min(self.height as f64 - 1.0) as usize;
        if x_min > x_max || y_min > y_max {
            return;
        }
        let ab = b - a;
        let len_sq = ab.length_squared();
        for y in y_min..=y_max {
            for x in x_min..=x_max {
                let p = Vec2::new(x as f64, y as f64);
                let t = if len_sq > 0.0 {
                    (p - a).dot(ab).clamp(0.0, len_sq) / len_sq
                } else {
                    0.0
                };
                let d = p.distance(a + ab * t);
                let cov = smooth_step(half + 0.5 - d);
                if cov > 0.0 {
                    let idx = y * self.width + x;
                    self.data[idx] = blend(self.data[idx], value, cov);
                }
            }
        }
    }

    /// Draw a line with an arrowhead at `b`.
    pub fn draw_arrow(&mut self, a: Vec2, b: Vec2, value: u8, width: f64) {
        self.draw_line(a, b, value, width);
        let dir = (b - a).normalized();
        if dir == Vec2::ZERO {
            return;
        }
        let head = (width * 2.5).max(3.0);
        let left = b - dir * head + dir.perp() * (head * 0.5);
        let right = b - dir * head - dir.perp() * (head * 0.5);
        self.draw_line(b, left, value, width);
        self.draw_line(b, right, value, width);
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer matches dimensions");
        img.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Save as an RGB PNG (all three channels equal).
    pub fn save_png_rgb(&self, path: &Path) -> Result<()> {
        let mut rgb = Vec::with_capacity(self.data.len() * 3);
        for &v in &self.data {
            rgb.extend_from_slice(&[v, v, v]);
        }
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, rgb)
            .expect("buffer matches dimensions");
        img.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?
            .into_luma8();
        GrayFrame::from_raw(img.width() as usize, img.height() as usize, img.into_raw())
    }
}

#[inline]
fn smooth_step(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

#[inline]
fn blend(under: u8, over: u8, alpha: f64) -> u8 {
    (under as f64 * (1.0 - alpha) + over as f64 * alpha).round() as u8
}

/// An in-memory sequence of equally sized grayscale frames.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub frames: Vec<GrayFrame>,
    pub fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<GrayFrame>, fps: f64) -> Result<Self> {
        if fps <= 0.0 {
            return Err(Error::invalid("fps must be positive"));
        }
        if let Some(first) = frames.first() {
            let (w, h) = (first.width(), first.height());
            if let Some(i) = frames.iter().position(|f| f.width() != w || f.height() != h) {
                return Err(Error::invalid(format!(
                    "frame {} is {}x{}, expected {}x{}",
                    i,
                    frames[i].width(),
                    frames[i].height(),
                    w,
                    h
                )));
            }
        }
        Ok(FrameSequence { frames, fps })
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, GrayFrame::width)
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, GrayFrame::height)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Load every `.png` / `.pgm` file in `dir`, in lexicographic name order.
    pub fn load_dir(dir: &Path, fps: f64) -> Result<Self> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase),
                    Some(ref ext) if ext == "png" || ext == "pgm"
                )
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::invalid(format!(
                "no .png or .pgm frames found in {}",
                dir.display()
            )));
        }
        let frames = paths
            .iter()
            .map(|p| GrayFrame::load(p))
            .collect::<Result<Vec<_>>>()?;
        FrameSequence::new(frames, fps)
    }

    /// Write frames as zero-padded PNG files (`frame_000042.png`).
    pub fn save_dir(&self, dir: &Path, rgb: bool) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, frame) in self.frames.iter().enumerate() {
            let path = dir.join(format!("frame_{i:06}.png"));
            if rgb {
                frame.save_png_rgb(&path)?;
            } else {
                frame.save_png(&path)?;
            }
        }
        Ok(())
    }
}
