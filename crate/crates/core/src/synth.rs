//! Synthetic two-channel plates with exact ground truth, and a parametric
//! mock detector that plants known error rates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::geom::{to_norm, to_px, Annotation, BBoxPx, Detection, ImageMeta, NormBBox};
use crate::maskimport::InstanceMask;
use crate::raster::GrayImage16;
use crate::rng::{rng_for, stream, Rng};

/// Class-dependent GFP texture inside a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GfpPattern {
    /// Bright rim along the cell edge (ER-like).
    Rim,
    /// A few bright spots (mitochondria-like).
    Punctate,
    /// Whole cell lit (cytosol-like).
    Filled,
    /// Small central disc (nucleus-like).
    Inner,
}

impl GfpPattern {
    pub fn for_class_name(name: &str) -> Self {
        let n = name.to_ascii_lowercase();
        if n == "er" || n.starts_with("endoplasmic") {
            GfpPattern::Rim
        } else if n.starts_with("mito") || n == "m" {
            GfpPattern::Punctate
        } else if n.starts_with("nuc") || n == "n" {
            GfpPattern::Inner
        } else {
            GfpPattern::Filled
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    /// Inclusive range of cells per plate.
    pub cell_count: (usize, usize),
    /// Inclusive range of ellipse semi-axes in pixels.
    pub radius_px: (f64, f64),
    /// Largest IoU allowed between the boxes of two placed cells, in [0, 1).
    pub max_overlap: f64,
    pub class_id: usize,
    pub pattern: GfpPattern,
    pub bf_background: u16,
    pub bf_membrane: u16,
    pub gfp_background: u16,
    pub gfp_signal: u16,
    /// Gaussian sensor noise sigma, in intensity units.
    pub sensor_noise: f64,
    pub max_attempts: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 1344,
            height: 1024,
            cell_count: (100, 100),
            radius_px: (12.0, 22.0),
            max_overlap: 0.0,
            class_id: 0,
            pattern: GfpPattern::Filled,
            bf_background: 2000,
            bf_membrane: 1200,
            gfp_background: 300,
            gfp_signal: 3000,
            sensor_noise: 40.0,
            max_attempts: 200,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synth: {m}")));
        if self.width == 0 || self.height == 0 {
            return bad("image dimensions must be positive");
        }
        if self.cell_count.0 > self.cell_count.1 {
            return bad("cell count range is reversed");
        }
        let (r0, r1) = self.radius_px;
        if !(r0 > 0.0 && r0 <= r1 && r1.is_finite()) {
            return bad("radius range must be positive and ordered");
        }
        if !(0.0..1.0).contains(&self.max_overlap) {
            return bad("max overlap must lie in [0, 1)");
        }
        if self.sensor_noise.is_nan() || self.sensor_noise < 0.0 {
            return bad("sensor noise must be non-negative");
        }
        if self.max_attempts == 0 {
            return bad("max attempts must be positive");
        }
        Ok(())
    }

    pub fn meta(&self) -> ImageMeta {
        ImageMeta {
            width: self.width,
            height: self.height,
            well: None,
            tile: None,
        }
    }
}

/// Rotated ellipse in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub angle: f64,
}

impl Ellipse {
    /// Normalized radial coordinate of a point: 0 at the center, 1 on the
    /// boundary.
    pub fn radial(&self, x: f64, y: f64) -> f64 {
        let (s, c) = libm::sincos(self.angle);
        let (dx, dy) = (x - self.cx, y - self.cy);
        let u = (dx * c + dy * s) / self.rx;
        let v = (-dx * s + dy * c) / self.ry;
        libm::sqrt(u * u + v * v)
    }

    /// Axis-aligned box around the continuous ellipse.
    pub fn extent(&self) -> BBoxPx {
        let (s, c) = libm::sincos(self.angle);
        let hx = libm::sqrt((self.rx * c) * (self.rx * c) + (self.ry * s) * (self.ry * s));
        let hy = libm::sqrt((self.rx * s) * (self.rx * s) + (self.ry * c) * (self.ry * c));
        BBoxPx {
            x_min: self.cx - hx,
            y_min: self.cy - hy,
            x_max: self.cx + hx,
            y_max: self.cy + hy,
        }
    }

    /// Pixels whose centers fall inside the ellipse, clipped to the image.
    pub fn pixels(&self, width: u32, height: u32) -> Vec<(u32, u32)> {
        let e = self.extent();
        let x0 = libm::floor(e.x_min).max(0.0) as u32;
        let y0 = libm::floor(e.y_min).max(0.0) as u32;
        let x1 = (libm::ceil(e.x_max).max(0.0) as u32).min(width);
        let y1 = (libm::ceil(e.y_max).max(0.0) as u32).min(height);
        let mut out = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                if self.radial(x as f64 + 0.5, y as f64 + 0.5) <= 1.0 {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCell {
    /// Mask label, `1..=n` in placement order.
    pub label: u32,
    pub ellipse: Ellipse,
    /// Tight box of the pixels carrying `label`.
    pub bbox: BBoxPx,
    pub area_px: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub mask: InstanceMask,
    pub cells: Vec<PlantedCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPlate {
    pub bf: GrayImage16,
    pub gfp: GrayImage16,
    pub mask: InstanceMask,
    pub cells: Vec<PlantedCell>,
    pub annotations: Vec<Annotation>,
}

fn pixel_bbox(pixels: &[(u32, u32)]) -> BBoxPx {
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for &(x, y) in pixels {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    BBoxPx {
        x_min: x0 as f64,
        y_min: y0 as f64,
        x_max: x1 as f64 + 1.0,
        y_max: y1 as f64 + 1.0,
    }
}

/// Places cells and paints the instance mask. A pixel claimed by an earlier
/// cell keeps its label, and every planted box is the tight box of the pixels
/// that ended up with its label, so the mask and the boxes always agree.
pub fn gen_layout(cfg: &SynthConfig) -> Result<Layout> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, stream::SYNTH, 0);
    gen_layout_with(cfg, &mut rng)
}

fn gen_layout_with(cfg: &SynthConfig, rng: &mut Rng) -> Result<Layout> {
    let (w, h) = (cfg.width, cfg.height);
    let n = rng.random_range(cfg.cell_count.0..=cfg.cell_count.1);
    let mut mask = InstanceMask::filled(w, h, 0);
    let mut cells: Vec<PlantedCell> = Vec::with_capacity(n);
    let (r0, r1) = cfg.radius_px;
    for _ in 0..n {
        let label = cells.len() as u32 + 1;
        let mut placed = false;
        for _ in 0..cfg.max_attempts {
            let e = Ellipse {
                cx: rng.random_range(0.0..w as f64),
                cy: rng.random_range(0.0..h as f64),
                rx: if r0 < r1 { rng.random_range(r0..=r1) } else { r0 },
                ry: if r0 < r1 { rng.random_range(r0..=r1) } else { r0 },
                angle: rng.random_range(0.0..core::f64::consts::PI),
            };
            let pixels: Vec<(u32, u32)> = e
                .pixels(w, h)
                .into_iter()
                .filter(|&(x, y)| mask.get(x, y) == 0)
                .collect();
            if pixels.is_empty() {
                continue;
            }
            let bbox = pixel_bbox(&pixels);
            let clash = cells.iter().any(|c| {
                let v = crate::geom::iou(&c.bbox, &bbox);
                if cfg.max_overlap == 0.0 {
                    v > 0.0
                } else {
                    v > cfg.max_overlap
                }
            });
            if clash {
                continue;
            }
            for &(x, y) in &pixels {
                mask.set(x, y, label);
            }
            cells.push(PlantedCell {
                label,
                ellipse: e,
                bbox,
                area_px: pixels.len() as u64,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::PlacementFailed {
                placed: cells.len(),
                requested: n,
            });
        }
    }
    Ok(Layout { mask, cells })
}

fn gfp_profile(pattern: GfpPattern, r: f64, puncta: &[(f64, f64)], x: f64, y: f64) -> f64 {
    match pattern {
        GfpPattern::Rim => libm::exp(-((1.0 - r) / 0.2) * ((1.0 - r) / 0.2)),
        GfpPattern::Filled => 1.0 - r * r * r * r,
        GfpPattern::Inner => libm::exp(-(r / 0.35) * (r / 0.35)),
        GfpPattern::Punctate => puncta
            .iter()
            .map(|&(px, py)| {
                let d2 = (x - px) * (x - px) + (y - py) * (y - py);
                libm::exp(-d2 / (2.0 * 1.5 * 1.5))
            })
            .fold(0.0, f64::max),
    }
}

fn to_u16(v: f64) -> u16 {
    libm::round(v.clamp(0.0, 65535.0)) as u16
}

/// Full plate: layout, both channels and the annotations. Deterministic in
/// `cfg.seed`.
pub fn gen_plate(cfg: &SynthConfig) -> Result<SynthPlate> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, stream::SYNTH, 0);
    let Layout { mask, cells } = gen_layout_with(cfg, &mut rng)?;
    let (w, h) = (cfg.width, cfg.height);
    let mut bf = vec![cfg.bf_background as f64; w as usize * h as usize];
    let mut gfp = vec![cfg.gfp_background as f64; w as usize * h as usize];
    let membrane = cfg.bf_membrane as f64;
    let signal = cfg.gfp_signal as f64;
    for c in &cells {
        let e = &c.ellipse;
        let puncta: Vec<(f64, f64)> = (0..rng.random_range(3..=6))
            .map(|_| {
                let t = rng.random_range(0.0..core::f64::consts::TAU);
                let s = libm::sqrt(rng.random_range(0.0..0.5));
                let (sn, cs) = libm::sincos(t);
                (e.cx + s * e.rx * cs, e.cy + s * e.ry * sn)
            })
            .collect();
        let b = c.bbox;
        for y in b.y_min as u32..b.y_max as u32 {
            for x in b.x_min as u32..b.x_max as u32 {
                if mask.get(x, y) != c.label {
                    continue;
                }
                let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
                let r = e.radial(fx, fy).min(1.0);
                let i = y as usize * w as usize + x as usize;
                // dark membrane ring with a faintly brighter interior
                bf[i] += -membrane * libm::exp(-((1.0 - r) / 0.12) * ((1.0 - r) / 0.12)) + 0.1 * membrane * (1.0 - r);
                gfp[i] += signal * gfp_profile(cfg.pattern, r, &puncta, fx, fy);
            }
        }
    }
    if cfg.sensor_noise > 0.0 {
        let noise = Normal::new(0.0, cfg.sensor_noise).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
        for v in bf.iter_mut().chain(gfp.iter_mut()) {
            *v += noise.sample(&mut rng);
        }
    }
    let meta = cfg.meta();
    let annotations = cells
        .iter()
        .map(|c| {
            Ok(Annotation {
                class_id: cfg.class_id,
                bbox: to_norm(&c.bbox, &meta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthPlate {
        bf: GrayImage16::from_samples(w, h, bf.into_iter().map(to_u16).collect())?,
        gfp: GrayImage16::from_samples(w, h, gfp.into_iter().map(to_u16).collect())?,
        mask,
        cells,
        annotations,
    })
}

/// Confidence distribution of mock detections, clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceModel {
    /// Mean when the predicted class is right.
    pub correct_mean: f64,
    /// Mean for wrong classes and false positives.
    pub error_mean: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub jitter_sigma_px: f64,
    pub drop_prob: f64,
    /// Expected false positives per image (Poisson).
    pub false_positive_rate: f64,
    /// Row-stochastic: row = true class, column = emitted class.
    pub class_confusion: Vec<Vec<f64>>,
    pub confidence: ConfidenceModel,
    /// Side length range of false-positive boxes in pixels.
    pub fp_size_px: (f64, f64),
    pub seed: u64,
}

impl NoiseConfig {
    /// A detector that returns every ground-truth box unchanged with
    /// confidence 1.
    pub fn perfect(class_count: usize) -> Self {
        Self {
            jitter_sigma_px: 0.0,
            drop_prob: 0.0,
            false_positive_rate: 0.0,
            class_confusion: (0..class_count)
                .map(|i| (0..class_count).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            confidence: ConfidenceModel {
                correct_mean: 1.0,
                error_mean: 1.0,
                spread: 0.0,
            },
            fp_size_px: (10.0, 40.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidConfig(format!("noise: {m}")));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.drop_prob) {
            return bad(format!("drop probability {} outside [0, 1]", self.drop_prob));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return bad(format!("false-positive rate {} must be >= 0", self.false_positive_rate));
        }
        if self.jitter_sigma_px.is_nan() || self.jitter_sigma_px < 0.0 {
            return bad("jitter sigma must be >= 0".into());
        }
        let k = self.class_confusion.len();
        if k == 0 {
            return bad("confusion matrix is empty".into());
        }
        for (i, row) in self.class_confusion.iter().enumerate() {
            if row.len() != k || !row.iter().all(|&p| prob(p)) {
                return bad(format!("confusion row {i} must hold {k} probabilities"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return bad(format!("confusion row {i} sums to {sum}"));
            }
        }
        let c = &self.confidence;
        if !(prob(c.correct_mean) && prob(c.error_mean) && c.spread >= 0.0) {
            return bad("confidence means must lie in [0, 1] and spread >= 0".into());
        }
        let (s0, s1) = self.fp_size_px;
        if !(s0 > 0.0 && s0 <= s1) {
            return bad("false-positive size range must be positive and ordered".into());
        }
        Ok(())
    }
}

fn sample_row(row: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding slack: last class with nonzero mass
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn sample_confidence(mean: f64, spread: f64, rng: &mut Rng) -> f64 {
    if spread == 0.0 {
        return mean;
    }
    let z: f64 = rand_distr::StandardNormal.sample(rng);
    (mean + spread * z).clamp(0.0, 1.0)
}

/// Simulated detector output for one image. Each ground-truth box is dropped
/// with `drop_prob`; survivors get jittered, reclassified through the
/// confusion row of their true class and scored; then a Poisson number of
/// random false positives is added. `image_index` selects the random stream.
pub fn mock_detect(annos: &[Annotation], noise: &NoiseConfig, meta: &ImageMeta, image_index: u64) -> Result<Vec<Detection>> {
    noise.validate()?;
    let k = noise.class_confusion.len();
    let mut rng = rng_for(noise.seed, stream::NOISE, image_index);
    let mut out = Vec::with_capacity(annos.len());
    let (w, h) = (meta.width as f64, meta.height as f64);
    for a in annos {
        if a.class_id >= k {
            return Err(Error::ClassOutOfRange {
                class_id: a.class_id,
                class_count: k,
            });
        }
        let drop_draw: f64 = rng.random();
        if drop_draw < noise.drop_prob {
            continue;
        }
        let bbox = if noise.jitter_sigma_px > 0.0 {
            let px = to_px(&a.bbox, meta)?;
            let (cx, cy) = px.center();
            let mut j = || -> f64 { let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                noise.jitter_sigma_px * z };
            let (cx, cy) = (cx + j(), cy + j());
            let bw = (px.width() + j()).max(1.0);
            let bh = (px.height() + j()).max(1.0);
            let moved = BBoxPx {
                x_min: cx - bw / 2.0,
                y_min: cy - bh / 2.0,
                x_max: cx + bw / 2.0,
                y_max: cy + bh / 2.0,
            }
            .clamp_to(w, h);
            if moved.is_valid() {
                to_norm(&moved, meta)?
            } else {
                a.bbox
            }
        } else {
            a.bbox
        };
        let class_id = sample_row(&noise.class_confusion[a.class_id], &mut rng);
        let c = &noise.confidence;
        let mean = if class_id == a.class_id { c.correct_mean } else { c.error_mean };
        let confidence = sample_confidence(mean, c.spread, &mut rng);
        out.push(Detection::new(class_id, bbox, confidence)?);
    }
    if noise.false_positive_rate > 0.0 {
        let poisson =
            Poisson::new(noise.false_positive_rate).map_err(|e| Error::InvalidConfig(format!("noise: {e}")))?;
        let n = poisson.sample(&mut rng) as usize;
        let (s0, s1) = noise.fp_size_px;
        for _ in 0..n {
            let bw = if s0 < s1 { rng.random_range(s0..=s1) } else { s0 }.min(w);
            let bh = if s0 < s1 { rng.random_range(s0..=s1) } else { s0 }.min(h);
            let x = rng.random_range(0.0..=(w - bw));
            let y = rng.random_range(0.0..=(h - bh));
            let bbox = NormBBox::new((x + bw / 2.0) / w, (y + bh / 2.0) / h, bw / w, bh / h)?;
            let class_id = rng.random_range(0..k);
            let confidence = sample_confidence(noise.confidence.error_mean, noise.confidence.spread, &mut rng);
            out.push(Detection::new(class_id, bbox, confidence)?);
        }
    }
    Ok(out)
}
