//! In-memory image planes and the channel pre-processing: percentile stretch
//! and the BF/GFP composite.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major image with one `P` per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plane<P> {
    width: u32,
    height: u32,
    samples: Vec<P>,
}

pub type GrayImage8 = Plane<u8>;
pub type GrayImage16 = Plane<u16>;
pub type RgbImage = Plane<[u8; 3]>;

impl<P: Copy> Plane<P> {
    pub fn from_samples(width: u32, height: u32, samples: Vec<P>) -> Result<Self> {
        let expected = width as usize * height as usize;
        if samples.len() != expected {
            return Err(Error::SampleCount {
                expected,
                found: samples.len(),
            });
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    pub fn filled(width: u32, height: u32, value: P) -> Self {
        Self {
            width,
            height,
            samples: vec![value; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[P] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [P] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<P> {
        self.samples
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> P {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: P) {
        let w = self.width as usize;
        self.samples[y as usize * w + x as usize] = value;
    }

    pub fn row(&self, y: u32) -> &[P] {
        let w = self.width as usize;
        &self.samples[y as usize * w..(y as usize + 1) * w]
    }

    pub fn map<Q: Copy>(&self, f: impl Fn(P) -> Q) -> Plane<Q> {
        Plane {
            width: self.width,
            height: self.height,
            samples: self.samples.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Pixel-exact copy of the `width x height` region at `(x, y)`.
    pub fn region(&self, x: u32, y: u32, width: u32, height: u32) -> Option<Self> {
        let fits = x.checked_add(width).is_some_and(|r| r <= self.width)
            && y.checked_add(height).is_some_and(|b| b <= self.height);
        if !fits {
            return None;
        }
        let mut samples = Vec::with_capacity(width as usize * height as usize);
        for row in y..y + height {
            let start = row as usize * self.width as usize + x as usize;
            samples.extend_from_slice(&self.samples[start..start + width as usize]);
        }
        Some(Self {
            width,
            height,
            samples,
        })
    }

    /// Writes `src` into this plane with its top-left corner at `(x, y)`.
    pub fn paste(&mut self, src: &Plane<P>, x: u32, y: u32) -> Result<()> {
        if x + src.width > self.width || y + src.height > self.height {
            return Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: x + src.width,
                right_height: y + src.height,
            });
        }
        for row in 0..src.height {
            let dst = (y + row) as usize * self.width as usize + x as usize;
            self.samples[dst..dst + src.width as usize].copy_from_slice(src.row(row));
        }
        Ok(())
    }
}

/// Scalar sample types with a bounded number of intensity levels.
pub trait Intensity: Copy {
    const LEVELS: usize;
    fn level(self) -> usize;
}

impl Intensity for u8 {
    const LEVELS: usize = 1 << 8;
    fn level(self) -> usize {
        self as usize
    }
}

impl Intensity for u16 {
    const LEVELS: usize = 1 << 16;
    fn level(self) -> usize {
        self as usize
    }
}

/// Percentiles by linear interpolation between order statistics (the rank of
/// percentile `p` among `n` samples is `p/100 * (n-1)`).
fn percentiles<P: Intensity>(img: &Plane<P>, ps: [f64; 2]) -> [f64; 2] {
    let mut hist = vec![0u64; P::LEVELS];
    for &s in &img.samples {
        hist[s.level()] += 1;
    }
    let n = img.samples.len() as u64;
    // k-th order statistic (0-based) read off the cumulative histogram
    let order_stat = |k: u64| -> f64 {
        let mut seen = 0u64;
        for (level, &count) in hist.iter().enumerate() {
            seen += count;
            if seen > k {
                return level as f64;
            }
        }
        (P::LEVELS - 1) as f64
    };
    ps.map(|p| {
        let rank = p / 100.0 * (n - 1) as f64;
        let lo = libm::floor(rank);
        let frac = rank - lo;
        let a = order_stat(lo as u64);
        if frac == 0.0 {
            a
        } else {
            let b = order_stat(lo as u64 + 1);
            a + (b - a) * frac
        }
    })
}

/// Linearly maps the `p_low` percentile to 0 and the `p_high` percentile to
/// 255, clamping outside. A window of zero width maps everything to 0.
pub fn percentile_stretch<P: Intensity>(img: &Plane<P>, p_low: f64, p_high: f64) -> Result<GrayImage8> {
    if !(0.0 <= p_low && p_low < p_high && p_high <= 100.0) {
        return Err(Error::InvalidPercentiles {
            low: p_low,
            high: p_high,
        });
    }
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let [lo, hi] = percentiles(img, [p_low, p_high]);
    if hi <= lo {
        return Ok(Plane::filled(img.width, img.height, 0));
    }
    let lut: Vec<u8> = (0..P::LEVELS)
        .map(|v| libm::round(((v as f64 - lo) / (hi - lo) * 255.0).clamp(0.0, 255.0)) as u8)
        .collect();
    Ok(img.map(|s| lut[s.level()]))
}

/// Composite used for detector input: bright field renders gray, the GFP
/// signal lifts only the green channel (`R = B = bf`, `G = max(bf, gfp)`).
pub fn merge_channels(bf: &GrayImage8, gfp: &GrayImage8) -> Result<RgbImage> {
    if bf.width != gfp.width || bf.height != gfp.height {
        return Err(Error::DimensionMismatch {
            left_width: bf.width,
            left_height: bf.height,
            right_width: gfp.width,
            right_height: gfp.height,
        });
    }
    let samples = bf
        .samples
        .iter()
        .zip(&gfp.samples)
        .map(|(&b, &g)| [b, b.max(g), b])
        .collect();
    Ok(Plane {
        width: bf.width,
        height: bf.height,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_stretches_to_zero() {
        let img = GrayImage16::filled(8, 8, 500);
        let out = percentile_stretch(&img, 1.0, 99.0).unwrap();
        assert!(out.samples().iter().all(|&v| v == 0));
    }

    #[test]
    fn two_level_image_hits_endpoints() {
        let mut s = vec![100u16; 50];
        s.extend(vec![900u16; 50]);
        let img = GrayImage16::from_samples(10, 10, s).unwrap();
        let out = percentile_stretch(&img, 0.0, 100.0).unwrap();
        assert!(out.samples()[..50].iter().all(|&v| v == 0));
        assert!(out.samples()[50..].iter().all(|&v| v == 255));
    }

    #[test]
    fn ramp_clamps_tails() {
        let img = GrayImage16::from_samples(256, 256, (0..=65535u16).collect()).unwrap();
        let out = percentile_stretch(&img, 1.0, 99.0).unwrap();
        // independent recomputation: rank = p * 65535 / 100 on values equal to their rank
        let lo = 0.01 * 65535.0;
        let hi = 0.99 * 65535.0;
        for (v, &o) in (0..=65535u32).zip(out.samples()) {
            let v = v as f64;
            if v <= lo {
                assert_eq!(o, 0, "value {v}");
            } else if v >= hi {
                assert_eq!(o, 255, "value {v}");
            } else {
                let expect = ((v - lo) / (hi - lo) * 255.0).round();
                assert_eq!(o as f64, expect, "value {v}");
            }
        }
    }

    #[test]
    fn stretch_rejects_bad_input() {
        let img = GrayImage8::filled(2, 2, 1);
        assert!(percentile_stretch(&img, 50.0, 50.0).is_err());
        assert!(percentile_stretch(&img, -1.0, 50.0).is_err());
        assert!(percentile_stretch(&img, 1.0, 101.0).is_err());
        let empty = GrayImage8::filled(0, 0, 0);
        assert_eq!(percentile_stretch(&empty, 1.0, 99.0), Err(Error::EmptyImage));
    }

    #[test]
    fn merge_examples() {
        let bf = GrayImage8::from_samples(2, 1, vec![0, 100]).unwrap();
        let gfp = GrayImage8::from_samples(2, 1, vec![200, 60]).unwrap();
        let rgb = merge_channels(&bf, &gfp).unwrap();
        assert_eq!(rgb.samples(), &[[0, 200, 0], [100, 100, 100]]);

        let zero = GrayImage8::filled(2, 1, 0);
        let gray = merge_channels(&bf, &zero).unwrap();
        assert!(gray.samples().iter().all(|p| p[0] == p[1] && p[1] == p[2]));
    }

    #[test]
    fn merge_size_mismatch() {
        let a = GrayImage8::filled(4, 3, 0);
        let b = GrayImage8::filled(3, 4, 0);
        assert!(matches!(
            merge_channels(&a, &b),
            Err(Error::DimensionMismatch {
                left_width: 4,
                left_height: 3,
                right_width: 3,
                right_height: 4
            })
        ));
    }

    #[test]
    fn region_and_paste_reassemble() {
        let img = Plane::from_samples(4, 2, (0u16..8).collect()).unwrap();
        let right = img.region(2, 0, 2, 2).unwrap();
        assert_eq!(right.samples(), &[2, 3, 6, 7]);
        assert!(img.region(3, 0, 2, 2).is_none());
        let mut canvas = Plane::filled(4, 2, 0u16);
        canvas.paste(&img.region(0, 0, 2, 2).unwrap(), 0, 0).unwrap();
        canvas.paste(&right, 2, 0).unwrap();
        assert_eq!(canvas, img);
    }

    proptest! {
        #[test]
        fn merge_is_monotone_in_gfp(bf in any::<u8>(), g1 in any::<u8>(), g2 in any::<u8>()) {
            let (lo, hi) = (g1.min(g2), g1.max(g2));
            let b = GrayImage8::filled(1, 1, bf);
            let a = merge_channels(&b, &GrayImage8::filled(1, 1, lo)).unwrap();
            let c = merge_channels(&b, &GrayImage8::filled(1, 1, hi)).unwrap();
            prop_assert!(a.samples()[0][1] <= c.samples()[0][1]);
        }

        #[test]
        fn stretch_idempotent_on_full_window(s in proptest::collection::vec(any::<u16>(), 1..200)) {
            let n = s.len() as u32;
            let img = GrayImage16::from_samples(n, 1, s).unwrap();
            let once = percentile_stretch(&img, 0.0, 100.0).unwrap();
            let twice = percentile_stretch(&once, 0.0, 100.0).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
