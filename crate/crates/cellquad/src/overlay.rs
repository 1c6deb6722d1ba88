//! Detection overlays: box outlines in a fixed per-class palette with the
//! confidence printed above each box.

use cellquad_core::raster::RgbImage;
use cellquad_core::{to_px, Detection, ImageMeta};

const PALETTE: [[u8; 3]; 8] = [
    [230, 25, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [255, 255, 255],
];

pub fn class_color(class_id: usize) -> [u8; 3] {
    PALETTE[class_id % PALETTE.len()]
}

// 3x5 bitmaps, one row per nibble (bits 2..0 left to right).
const DIGITS: [[u8; 5]; 10] = [
    [7, 5, 5, 5, 7],
    [2, 6, 2, 2, 7],
    [7, 1, 7, 4, 7],
    [7, 1, 7, 1, 7],
    [5, 5, 7, 1, 1],
    [7, 4, 7, 1, 7],
    [7, 4, 7, 5, 7],
    [7, 1, 1, 1, 1],
    [7, 5, 7, 5, 7],
    [7, 5, 7, 1, 7],
];
const DOT: [u8; 5] = [0, 0, 0, 0, 2];

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.set(x as u32, y as u32, c);
    }
}

fn glyph(img: &mut RgbImage, bits: &[u8; 5], x: i64, y: i64, scale: i64, c: [u8; 3]) {
    for (row, b) in bits.iter().enumerate() {
        for col in 0..3 {
            if b & (4 >> col) != 0 {
                for dy in 0..scale {
                    for dx in 0..scale {
                        put(img, x + col * scale + dx, y + row as i64 * scale + dy, c);
                    }
                }
            }
        }
    }
}

/// Draws `text` (digits and '.') with its top-left corner at (x, y).
pub fn draw_text(img: &mut RgbImage, text: &str, x: i64, y: i64, scale: i64, c: [u8; 3]) {
    let mut cx = x;
    for ch in text.chars() {
        let bits = match ch {
            '.' => &DOT,
            d => match d.to_digit(10) {
                Some(v) => &DIGITS[v as usize],
                None => continue,
            },
        };
        glyph(img, bits, cx, y, scale, c);
        cx += 4 * scale;
    }
}

pub fn draw_rect(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, thickness: i64, c: [u8; 3]) {
    for t in 0..thickness {
        for x in x0..=x1 {
            put(img, x, y0 + t, c);
            put(img, x, y1 - t, c);
        }
        for y in y0..=y1 {
            put(img, x0 + t, y, c);
            put(img, x1 - t, y, c);
        }
    }
}

/// Returns a copy of `base` with every detection drawn on it. With no
/// detections the result equals `base`.
pub fn render(base: &RgbImage, meta: &ImageMeta, dets: &[Detection]) -> RgbImage {
    let mut img = base.clone();
    for d in dets {
        let Ok(b) = to_px(&d.bbox, meta) else { continue };
        let c = class_color(d.class_id);
        let (x0, y0) = (b.x_min.floor() as i64, b.y_min.floor() as i64);
        let (x1, y1) = (b.x_max.ceil() as i64 - 1, b.y_max.ceil() as i64 - 1);
        draw_rect(&mut img, x0, y0, x1, y1, 1, c);
        let label = format!("{:.2}", d.confidence);
        let ty = if y0 >= 7 { y0 - 7 } else { y1 + 2 };
        draw_text(&mut img, &label, x0, ty, 1, c);
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellquad_core::NormBBox;

    #[test]
    fn no_detections_is_base() {
        let base = RgbImage::filled(40, 30, [10, 20, 30]);
        let meta = ImageMeta::new(40, 30).unwrap();
        assert_eq!(render(&base, &meta, &[]), base);
    }

    #[test]
    fn box_outline_in_class_color() {
        let base = RgbImage::filled(40, 40, [0, 0, 0]);
        let meta = ImageMeta::new(40, 40).unwrap();
        let d = Detection::new(2, NormBBox::new(0.5, 0.5, 0.5, 0.5).unwrap(), 0.9).unwrap();
        let out = render(&base, &meta, &[d]);
        assert_eq!(out.get(10, 10), class_color(2));
        assert_eq!(out.get(29, 20), class_color(2));
        assert_eq!(out.get(20, 20), [0, 0, 0]);
    }

    #[test]
    fn palette_is_stable() {
        assert_eq!(class_color(0), class_color(8));
        assert_ne!(class_color(0), class_color(1));
    }
}
