use image::RgbImage;

/// Single-channel float image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: f32) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Rec. 601 luma of an 8-bit RGB image.
    pub fn from_rgb(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0;
                (0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32) / 255.0
            })
            .collect();
        Self {
            width: w as usize,
            height: h as usize,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Separable Gaussian blur with clamped borders.
    pub fn gaussian_blur(&self, sigma: f32) -> Self {
        if sigma <= 0.0 || self.data.is_empty() {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as isize;
        let mut kernel: Vec<f32> = (-radius..=radius)
            .map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f32 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= norm);

        let pass = |src: &GrayImage, horizontal: bool| {
            GrayImage::from_fn(src.width, src.height, |x, y| {
                kernel
                    .iter()
                    .zip(-radius..=radius)
                    .map(|(k, o)| {
                        let v = if horizontal {
                            src.get_clamped(x as isize + o, y as isize)
                        } else {
                            src.get_clamped(x as isize, y as isize + o)
                        };
                        k * v
                    })
                    .sum()
            })
        };
        pass(&pass(self, true), false)
    }

    /// Sobel derivatives scaled to intensity change per pixel.
    pub fn sobel(&self) -> Gradient {
        let (w, h) = (self.width, self.height);
        let mut gx = vec![0.0f32; w * h];
        let mut gy = vec![0.0f32; w * h];
        for y in 0..h {
            for x in 0..w {
                let p = |dx: isize, dy: isize| self.get_clamped(x as isize + dx, y as isize + dy);
                let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
                let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
                gx[y * w + x] = sx / 8.0;
                gy[y * w + x] = sy / 8.0;
            }
        }
        Gradient {
            width: w,
            height: h,
            gx,
            gy,
        }
    }
}

/// Per-pixel image gradient.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f32>,
    pub gy: Vec<f32>,
}

impl Gradient {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.gx[i], self.gy[i])
    }

    #[inline]
    pub fn magnitude(&self, x: usize, y: usize) -> f32 {
        let (gx, gy) = self.at(x, y);
        gx.hypot(gy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blur_preserves_constant_images() {
        let g = GrayImage::new(9, 7, 0.4);
        let b = g.gaussian_blur(1.5);
        assert!(b.data.iter().all(|v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn sobel_of_a_ramp_is_its_slope() {
        let g = GrayImage::from_fn(10, 10, |x, _| 0.05 * x as f32);
        let d = g.sobel();
        let (gx, gy) = d.at(5, 5);
        assert!((gx - 0.05).abs() < 1e-6 && gy.abs() < 1e-6);
    }

    #[test]
    fn luma_weights() {
        let mut img = RgbImage::new(1, 1);
        img.put_pixel(0, 0, image::Rgb([255, 255, 255]));
        assert!((GrayImage::from_rgb(&img).get(0, 0) - 1.0).abs() < 1e-6);
        img.put_pixel(0, 0, image::Rgb([255, 0, 0]));
        assert!((GrayImage::from_rgb(&img).get(0, 0) - 0.299).abs() < 1e-6);
    }
}
