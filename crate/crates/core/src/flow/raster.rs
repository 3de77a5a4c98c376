//! Float-valued raster support for the tracker: pyramid construction and
//! Scharr gradients with bilinear subpixel sampling.

use crate::frame::GrayFrame;

/// Grayscale image with f64 samples; intermediate representation for
/// pyramid levels so repeated smoothing does not quantize.
#[derive(Debug, Clone)]
pub(crate) struct FloatImg {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FloatImg {
    pub fn from_frame(frame: &GrayFrame) -> Self {
        FloatImg {
            width: frame.width(),
            height: frame.height(),
            data: frame.data().iter().map(|&v| v as f64).collect(),
        }
    }

    #[inline]
    fn at_clamped(&self, x: i64, y: i64) -> f64 {
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sample with border clamping.
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

    /// Scharr x/y gradients at a subpixel position.
    pub fn scharr_at(&self, x: f64, y: f64) -> (f64, f64) {
        let s = |dx: f64, dy: f64| self.sample(x + dx, y + dy);
        let gx = (10.0 * (s(1.0, 0.0) - s(-1.0, 0.0))
            + 3.0 * (s(1.0, -1.0) - s(-1.0, -1.0))
            + 3.0 * (s(1.0, 1.0) - s(-1.0, 1.0)))
            / 32.0;
        let gy = (10.0 * (s(0.0, 1.0) - s(0.0, -1.0))
            + 3.0 * (s(-1.0, 1.0) - s(-1.0, -1.0))
            + 3.0 * (s(1.0, 1.0) - s(1.0, -1.0)))
            / 32.0;
        (gx, gy)
    }

    /// Downsample by 2 after a [1 2 1]/4 separable smoothing pass.
    pub fn half(&self) -> FloatImg {
        let w2 = self.width.div_ceil(2);
        let h2 = self.height.div_ceil(2);
        let mut blurred = vec![0.0; self.width * self.height];
        // Horizontal pass.
        for y in 0..self.height {
            for x in 0..self.width {
                let xi = x as i64;
                let yi = y as i64;
                blurred[y * self.width + x] = (self.at_clamped(xi - 1, yi)
                    + 2.0 * self.at_clamped(xi, yi)
                    + self.at_clamped(xi + 1, yi))
                    / 4.0;
            }
        }
        let horiz = FloatImg {
            width: self.width,
            height: self.height,
            data: blurred,
        };
        let mut out = vec![0.0; w2 * h2];
        for y2 in 0..h2 {
            for x2 in 0..w2 {
                let x = (x2 * 2) as i64;
                let y = (y2 * 2) as i64;
                out[y2 * w2 + x2] = (horiz.at_clamped(x, y - 1)
                    + 2.0 * horiz.at_clamped(x, y)
                    + horiz.at_clamped(x, y + 1))
                    / 4.0;
            }
        }
        FloatImg {
            width: w2,
            height: h2,
            data: out,
        }
    }
}

/// Image pyramid, level 0 full resolution.
pub(crate) fn build_pyramid(frame: &GrayFrame, levels: usize) -> Vec<FloatImg> {
    let mut pyr = Vec::with_capacity(levels + 1);
    pyr.push(FloatImg::from_frame(frame));
    for level in 0..levels {
        let prev = &pyr[level];
        if prev.width < 4 || prev.height < 4 {
            break;
        }
        pyr.push(prev.half());
    }
    pyr
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pyramid_halves_dimensions() {
        let frame = GrayFrame::filled(64, 48, 80);
        let pyr = build_pyramid(&frame, 3);
        assert_eq!(pyr.len(), 4);
        assert_eq!((pyr[1].width, pyr[1].height), (32, 24));
        assert_eq!((pyr[3].width, pyr[3].height), (8, 6));
        // Constant image stays constant through smoothing.
        assert!(pyr[3].data.iter().all(|&v| (v - 80.0).abs() < 1e-9));
    }

    #[test]
    fn scharr_of_linear_ramp() {
        let mut frame = GrayFrame::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                frame.set(x, y, (x * 3) as u8);
            }
        }
        let img = FloatImg::from_frame(&frame);
        let (gx, gy) = img.scharr_at(8.0, 8.0);
        assert!((gx - 3.0).abs() < 1e-9);
        assert!(gy.abs() < 1e-9);
    }
}
