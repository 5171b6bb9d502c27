//! Minimal floating-point raster used by hashing and augmentation.
//!
//! Pixels are stored row-major with interleaved channels. All resampling in
//! the crate goes through [`Raster::resize_bilinear`] and
//! [`Raster::rotate`], which use pixel-center alignment:
//! `src = (dst + 0.5) * src_len / dst_len - 0.5`, clamped to the image.

use image::DynamicImage;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height * channels, "raster buffer size");
        Raster {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Raster::new(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
    }

    /// Raw integer channel values of an RGB rendering of `img`, with the
    /// channel bit depth (8 or 16). Alpha is dropped.
    pub fn from_image(img: &DynamicImage) -> (Self, u32) {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let sixteen = matches!(
            img,
            DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA16(_)
                | DynamicImage::ImageRgb16(_)
                | DynamicImage::ImageRgba16(_)
        );
        if sixteen {
            let buf = img.to_rgb16();
            let data = buf.as_raw().iter().map(|&v| v as f64).collect();
            (Raster::new(w, h, 3, data), 16)
        } else {
            let buf = img.to_rgb8();
            let data = buf.as_raw().iter().map(|&v| v as f64).collect();
            (Raster::new(w, h, 3, data), 8)
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let idx = (y * self.width + x) * self.channels + c;
        self.data[idx] = v;
    }

    /// Luma plane with ITU-R BT.601 weights. Single-channel rasters are
    /// returned unchanged.
    pub fn luma(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        assert!(self.channels >= 3, "luma needs 1 or >=3 channels");
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2])
            .collect();
        Raster::new(self.width, self.height, 1, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster::new(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Bilinear sample at continuous coordinates already inside
    /// `[0, width-1] x [0, height-1]`.
    fn sample(&self, sx: f64, sy: f64, c: usize) -> f64 {
        let x0 = sx.floor() as usize;
        let y0 = sy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let top = lerp(self.get(x0, y0, c), self.get(x1, y0, c), fx);
        let bottom = lerp(self.get(x0, y1, c), self.get(x1, y1, c), fx);
        lerp(top, bottom, fy)
    }

    pub fn resize_bilinear(&self, width: usize, height: usize) -> Raster {
        assert!(width > 0 && height > 0, "resize target must be positive");
        if width == self.width && height == self.height {
            return self.clone();
        }
        let xs: Vec<f64> = (0..width).map(|x| align(x, width, self.width)).collect();
        let ys: Vec<f64> = (0..height).map(|y| align(y, height, self.height)).collect();
        let mut out = Raster::filled(width, height, self.channels, 0.0);
        for (y, &sy) in ys.iter().enumerate() {
            for (x, &sx) in xs.iter().enumerate() {
                for c in 0..self.channels {
                    out.set(x, y, c, self.sample(sx, sy, c));
                }
            }
        }
        out
    }

    /// Rotate counter-clockwise (as displayed, y axis pointing down) by
    /// `degrees` about the image center. Output keeps the input size; source
    /// coordinates falling outside the image are mirrored back in
    /// (reflect padding, edge pixel not repeated) and sampled bilinearly.
    pub fn rotate(&self, degrees: f64) -> Raster {
        if degrees == 0.0 {
            return self.clone();
        }
        let (sin, cos) = degrees.to_radians().sin_cos();
        let cx = (self.width as f64 - 1.0) / 2.0;
        let cy = (self.height as f64 - 1.0) / 2.0;
        let mut out = Raster::filled(self.width, self.height, self.channels, 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                // inverse mapping: output pixel pulls from the source rotated by -degrees
                let sx = reflect(cx + cos * dx - sin * dy, self.width);
                let sy = reflect(cy + sin * dx + cos * dy, self.height);
                for c in 0..self.channels {
                    out.set(x, y, c, self.sample(sx, sy, c));
                }
            }
        }
        out
    }

    pub fn flip_horizontal(&self) -> Raster {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.set(x, y, c, self.get(self.width - 1 - x, y, c));
                }
            }
        }
        out
    }

    pub fn flip_vertical(&self) -> Raster {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    out.set(x, y, c, self.get(x, self.height - 1 - y, c));
                }
            }
        }
        out
    }
}

fn align(dst: usize, dst_len: usize, src_len: usize) -> f64 {
    let s = (dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5;
    s.clamp(0.0, src_len as f64 - 1.0)
}

/// Exact when `a == b`, so flat regions stay flat.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

fn reflect(v: f64, len: usize) -> f64 {
    if len == 1 {
        return 0.0;
    }
    let last = len as f64 - 1.0;
    let period = 2.0 * last;
    let r = v.rem_euclid(period);
    let r = if r > last { period - r } else { r };
    r.clamp(0.0, last)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, ch: usize) -> Raster {
        let data = (0..w * h * ch).map(|i| (i * 7 % 251) as f64).collect();
        Raster::new(w, h, ch, data)
    }

    #[test]
    fn flips_are_involutions() {
        let r = ramp(7, 5, 3);
        assert_eq!(r.flip_horizontal().flip_horizontal(), r);
        assert_eq!(r.flip_vertical().flip_vertical(), r);
        assert_ne!(r.flip_horizontal(), r);
    }

    #[test]
    fn resize_to_same_size_is_identity() {
        let r = ramp(6, 4, 1);
        assert_eq!(r.resize_bilinear(6, 4), r);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let r = Raster::filled(13, 9, 3, 0.25);
        let s = r.resize_bilinear(4, 17);
        assert!(s.data.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn rotate_zero_is_identity_and_360_is_close() {
        let r = ramp(9, 9, 1);
        assert_eq!(r.rotate(0.0), r);
        let full = r.rotate(360.0);
        for (a, b) in full.data.iter().zip(&r.data) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rotate_90_on_square_moves_corners() {
        // 3x3 with a single bright top-left pixel; counter-clockwise quarter
        // turn moves it to bottom-left.
        let mut r = Raster::filled(3, 3, 1, 0.0);
        r.set(0, 0, 0, 1.0);
        let q = r.rotate(90.0);
        assert!((q.get(0, 2, 0) - 1.0).abs() < 1e-12);
        assert!(q.get(0, 0, 0).abs() < 1e-12);
    }

    #[test]
    fn reflect_mirrors_without_repeating_edge() {
        assert_eq!(reflect(-1.0, 5), 1.0);
        assert_eq!(reflect(5.0, 5), 3.0);
        assert_eq!(reflect(2.5, 5), 2.5);
        assert_eq!(reflect(-3.0, 1), 0.0);
    }

    #[test]
    fn luma_weights() {
        let r = Raster::new(1, 1, 3, vec![100.0, 50.0, 10.0]);
        let l = r.luma();
        assert!((l.data[0] - (29.9 + 29.35 + 1.14)).abs() < 1e-12);
    }
}
