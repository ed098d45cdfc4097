//! 8-bit grayscale frames, frame triplets, preprocessing, augmentation and
//! a synthetic moving-texture generator with exact midpoint ground truth.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageU8 {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::contract("image extents must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::dim("image", &[height, width], &[pixels.len()]));
        }
        Ok(ImageU8 { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn same_dims(&self, other: &ImageU8) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn histogram(&self) -> [u64; 256] {
        let mut h = [0u64; 256];
        for &p in &self.pixels {
            h[p as usize] += 1;
        }
        h
    }

    /// `[1, H, W]` with values `p / 255`.
    pub fn to_unit_tensor<T: Scalar>(&self) -> Tensor<T> {
        let s = T::from_f64(1.0 / 255.0);
        Tensor::new(vec![1, self.height, self.width], self.pixels.iter().map(|&p| T::from_f64(p as f64) * s).collect())
            .expect("extents are positive")
    }

    /// Inverse of [`ImageU8::to_unit_tensor`], rounding and clamping.
    pub fn from_unit_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let (c, h, w) = t.dims3("from_unit_tensor")?;
        if c != 1 {
            return Err(Error::dim("from_unit_tensor", t.shape(), &[1, h, w]));
        }
        let pixels = t
            .data()
            .iter()
            .map(|v| {
                let x = v.as_f64() * 255.0;
                if x.is_nan() {
                    0
                } else {
                    libm::round(x.clamp(0.0, 255.0)) as u8
                }
            })
            .collect();
        Self::new(w, h, pixels)
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::contract("crop window exceeds the image"));
        }
        Self::from_fn(width, height, |x, y| self.get(x0 + x, y0 + y))
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y)).expect("same extents")
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(x, self.height - 1 - y)).expect("same extents")
    }
}

/// Remaps levels so the cumulative histogram follows `reference`: level `v`
/// becomes the smallest `u` with `CDF_ref(u) ≥ CDF_src(v)`.
pub fn histogram_specification(src: &ImageU8, reference: &[u64; 256]) -> Result<ImageU8> {
    let total_ref: u64 = reference.iter().sum();
    if total_ref == 0 {
        return Err(Error::contract("reference histogram is empty"));
    }
    let hist = src.histogram();
    let total_src = src.pixels.len() as u128;
    let cumulative = |h: &[u64; 256]| {
        let mut acc = 0u64;
        h.map(|c| {
            acc += c;
            acc
        })
    };
    let (cdf_src, cdf_ref) = (cumulative(&hist), cumulative(reference));
    let mut map = [0u8; 256];
    let mut u = 0usize;
    for v in 0..256 {
        // fractions compared exactly by cross-multiplication
        while u < 255 && (cdf_ref[u] as u128) * total_src < (cdf_src[v] as u128) * total_ref as u128 {
            u += 1;
        }
        map[v] = u as u8;
    }
    ImageU8::new(src.width, src.height, src.pixels.iter().map(|&p| map[p as usize]).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub prev: ImageU8,
    pub mid: ImageU8,
    pub next: ImageU8,
}

impl Triplet {
    pub fn new(prev: ImageU8, mid: ImageU8, next: ImageU8) -> Result<Self> {
        if !prev.same_dims(&mid) || !prev.same_dims(&next) {
            return Err(Error::dim(
                "triplet",
                &[prev.height, prev.width],
                &[next.height, next.width],
            ));
        }
        Ok(Triplet { prev, mid, next })
    }

    pub fn width(&self) -> usize {
        self.prev.width
    }

    pub fn height(&self) -> usize {
        self.prev.height
    }

    pub fn map(&self, f: impl Fn(&ImageU8) -> Result<ImageU8>) -> Result<Self> {
        Triplet::new(f(&self.prev)?, f(&self.mid)?, f(&self.next)?)
    }

    /// `(prev, mid, next) → (next, mid, prev)`.
    pub fn swapped(&self) -> Self {
        Triplet {
            prev: self.next.clone(),
            mid: self.mid.clone(),
            next: self.prev.clone(),
        }
    }
}

/// Random crop (one window for all frames), independent horizontal and
/// vertical flips, and a temporal swap with probability 1/2.
pub fn augment(t: &Triplet, crop: usize, seed: u64) -> Result<Triplet> {
    if crop == 0 || crop > t.width() || crop > t.height() {
        return Err(Error::contract(alloc::format!(
            "crop {crop} does not fit a {}x{} frame",
            t.width(),
            t.height()
        )));
    }
    let mut rng = CounterRng::new(seed);
    let x0 = rng.below(t.width() - crop + 1);
    let y0 = rng.below(t.height() - crop + 1);
    let (fh, fv, swap) = (rng.coin(), rng.coin(), rng.coin());
    let out = t.map(|im| {
        let mut c = im.crop(x0, y0, crop, crop)?;
        if fh {
            c = c.flip_horizontal();
        }
        if fv {
            c = c.flip_vertical();
        }
        Ok(c)
    })?;
    Ok(if swap { out.swapped() } else { out })
}

/// A smooth random intensity field defined on the whole plane.
#[derive(Clone, Debug)]
pub struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
    blobs: Vec<Blob>,
    base: f64,
}

#[derive(Clone, Debug)]
struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    cos: f64,
    sin: f64,
    amp: f64,
}

impl Texture {
    /// Sinusoids with wavelengths between 6 and 24 pixels plus elliptical
    /// blobs with one-pixel soft edges, scattered over a `width×height` area.
    pub fn seeded(width: usize, height: usize, seed: u64) -> Self {
        let mut rng = CounterRng::new(seed);
        let waves = (0..10)
            .map(|_| {
                let wavelength = 6.0 + 18.0 * rng.next_f64();
                let theta = 2.0 * PI * rng.next_f64();
                let k = 2.0 * PI / wavelength;
                (k * libm::cos(theta), k * libm::sin(theta), 2.0 * PI * rng.next_f64(), 0.2 + 0.8 * rng.next_f64())
            })
            .collect::<Vec<_>>();
        let norm: f64 = waves.iter().map(|w| w.3).sum();
        let waves = waves.into_iter().map(|(a, b, c, d)| (a, b, c, 0.25 * d / norm)).collect();
        let (w, h) = (width as f64, height as f64);
        let blobs = (0..8)
            .map(|_| {
                let theta = PI * rng.next_f64();
                Blob {
                    cx: -0.1 * w + 1.2 * w * rng.next_f64(),
                    cy: -0.1 * h + 1.2 * h * rng.next_f64(),
                    rx: 3.0 + 9.0 * rng.next_f64(),
                    ry: 3.0 + 9.0 * rng.next_f64(),
                    cos: libm::cos(theta),
                    sin: libm::sin(theta),
                    amp: if rng.coin() { 1.0 } else { -1.0 } * (0.15 + 0.2 * rng.next_f64()),
                }
            })
            .collect();
        Texture {
            waves,
            blobs,
            base: 0.5,
        }
    }

    /// Intensity in `[0, 1]` at a real-valued point.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let mut v = self.base;
        for &(kx, ky, phase, amp) in &self.waves {
            v += amp * libm::sin(kx * x + ky * y + phase);
        }
        for b in &self.blobs {
            let (dx, dy) = (x - b.cx, y - b.cy);
            let u = (dx * b.cos + dy * b.sin) / b.rx;
            let w = (-dx * b.sin + dy * b.cos) / b.ry;
            let r = libm::sqrt(u * u + w * w);
            // soft edge about one pixel wide
            let edge = (r - 1.0) * b.rx.min(b.ry);
            v += b.amp / (1.0 + libm::exp(2.0 * edge));
        }
        v.clamp(0.0, 1.0)
    }

    pub fn render(&self, width: usize, height: usize, offset: impl Fn(f64, f64) -> (f64, f64)) -> ImageU8 {
        ImageU8::from_fn(width, height, |x, y| {
            let (px, py) = (x as f64, y as f64);
            let (dx, dy) = offset(px, py);
            libm::round(255.0 * self.sample(px + dx, py + dy)) as u8
        })
        .expect("positive extents")
    }
}

/// Motion of a synthetic triplet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticMotion {
    pub dx: i64,
    pub dy: i64,
    /// Amplitude in pixels of an extra smooth sinusoidal displacement; zero
    /// gives pure translation with an exact midpoint.
    pub warp: f64,
}

/// `prev(p) = T(p + d)`, `mid(p) = T(p)`, `next(p) = T(p − d)` for a seeded
/// texture `T` and a seeded integer shift `d ∈ [−max_shift, max_shift]²`.
pub fn make_synthetic_triplet(width: usize, height: usize, seed: u64, max_shift: usize) -> Result<Triplet> {
    synthetic_triplet(width, height, seed, max_shift, 0.0).map(|(t, _)| t)
}

pub fn synthetic_triplet(
    width: usize,
    height: usize,
    seed: u64,
    max_shift: usize,
    warp: f64,
) -> Result<(Triplet, SyntheticMotion)> {
    if width == 0 || height == 0 {
        return Err(Error::contract("synthetic frames need positive extents"));
    }
    if 4 * max_shift >= width.min(height) && max_shift > 0 {
        return Err(Error::contract("max_shift must be below a quarter of the smaller extent"));
    }
    let mut rng = CounterRng::new(seed).fork(1);
    let m = max_shift as i64;
    let motion = SyntheticMotion {
        dx: rng.range_inclusive(-m, m),
        dy: rng.range_inclusive(-m, m),
        warp,
    };
    let tex = Texture::seeded(width, height, seed);
    let (dx, dy) = (motion.dx as f64, motion.dy as f64);
    let (fx, fy) = (2.0 * PI / width as f64, 2.0 * PI / height as f64);
    let field = move |x: f64, y: f64| {
        (
            dx + warp * libm::sin(fy * y),
            dy + warp * libm::sin(fx * x),
        )
    };
    let prev = tex.render(width, height, field);
    let mid = tex.render(width, height, |_, _| (0.0, 0.0));
    let next = tex.render(width, height, |x, y| {
        let (a, b) = field(x, y);
        (-a, -b)
    });
    Ok((Triplet::new(prev, mid, next)?, motion))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_tensor_round_trip() {
        let im = ImageU8::from_fn(5, 3, |x, y| (x * 50 + y) as u8).unwrap();
        let t = im.to_unit_tensor::<f32>();
        assert_eq!(t.shape(), &[1, 3, 5]);
        assert_eq!(ImageU8::from_unit_tensor(&t).unwrap(), im);
    }

    #[test]
    fn constant_source_maps_to_reference_mode() {
        let src = ImageU8::filled(4, 4, 50).unwrap();
        let mut r = [0u64; 256];
        r[200] = 10;
        assert!(histogram_specification(&src, &r).unwrap().pixels().iter().all(|&p| p == 200));
        assert!(histogram_specification(&src, &[0; 256]).is_err());
    }

    #[test]
    fn flips_are_involutions() {
        let im = ImageU8::from_fn(4, 3, |x, y| (x + 4 * y) as u8).unwrap();
        assert_eq!(im.flip_horizontal().get(0, 0), 3);
        assert_eq!(im.flip_horizontal().flip_horizontal(), im);
        assert_eq!(im.flip_vertical().flip_vertical(), im);
    }

    #[test]
    fn swap_reverses_order() {
        let f = |v| ImageU8::filled(2, 2, v).unwrap();
        let t = Triplet::new(f(1), f(2), f(3)).unwrap();
        let s = t.swapped();
        assert_eq!((s.prev.get(0, 0), s.mid.get(0, 0), s.next.get(0, 0)), (3, 2, 1));
    }

    #[test]
    fn synthetic_contracts() {
        assert!(make_synthetic_triplet(16, 16, 1, 4).is_err());
        let t = make_synthetic_triplet(32, 32, 3, 0).unwrap();
        assert_eq!(t.prev, t.mid);
        assert_eq!(t.next, t.mid);
    }
}
