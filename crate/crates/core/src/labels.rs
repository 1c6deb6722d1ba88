//! Darknet label files: `<class_id> <cx> <cy> <w> <h>` per line, reals
//! printed with exactly six decimals.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, LabelErrorKind, Result};
use crate::geom::{Annotation, NormBBox};

pub fn write_label_file(annos: &[Annotation]) -> String {
    let mut out = String::with_capacity(annos.len() * 40);
    for a in annos {
        let b = &a.bbox;
        // fmt::Write on String cannot fail
        let _ = writeln!(out, "{} {:.6} {:.6} {:.6} {:.6}", a.class_id, b.cx(), b.cy(), b.w(), b.h());
    }
    out
}

/// Parses a label file. Blank lines and surrounding whitespace are ignored;
/// errors carry the 1-based line number.
pub fn read_label_file(text: &str, class_count: usize) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let err = |kind| Error::LabelLine { line: i + 1, kind };
        if fields.len() != 5 {
            return Err(err(LabelErrorKind::FieldCount(fields.len())));
        }
        let parse_err = |field: usize| {
            err(LabelErrorKind::Parse {
                field,
                text: fields[field].to_string(),
            })
        };
        let class_id: usize = fields[0].parse().map_err(|_| parse_err(0))?;
        if class_id >= class_count {
            return Err(err(LabelErrorKind::ClassRange { class_id, class_count }));
        }
        let mut v = [0.0f64; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = fields[k + 1].parse().map_err(|_| parse_err(k + 1))?;
            if !slot.is_finite() {
                return Err(parse_err(k + 1));
            }
        }
        let [cx, cy, w, h] = v;
        if w <= 0.0 || h <= 0.0 {
            return Err(err(LabelErrorKind::Degenerate));
        }
        let bbox = NormBBox::new(cx, cy, w, h).map_err(|_| err(LabelErrorKind::OutOfBounds))?;
        out.push(Annotation { class_id, bbox });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn writes_six_decimals() {
        // 50/672 and 40/512
        let a = Annotation {
            class_id: 2,
            bbox: NormBBox::new(0.5, 0.5, 50.0 / 672.0, 40.0 / 512.0).unwrap(),
        };
        assert_eq!(write_label_file(&[a]), "2 0.500000 0.500000 0.074405 0.078125\n");
        let full = Annotation {
            class_id: 0,
            bbox: NormBBox::new(0.5, 0.5, 1.0, 1.0).unwrap(),
        };
        assert_eq!(write_label_file(&[full]), "0 0.500000 0.500000 1.000000 1.000000\n");
        assert_eq!(write_label_file(&[]), "");
    }

    #[test]
    fn read_errors_carry_line() {
        assert_eq!(
            read_label_file("9 .5 .5 .1 .1", 4),
            Err(Error::LabelLine {
                line: 1,
                kind: LabelErrorKind::ClassRange {
                    class_id: 9,
                    class_count: 4
                }
            })
        );
        assert_eq!(
            read_label_file("\n0 0.5 0.5 0.0 0.1\n", 4),
            Err(Error::LabelLine {
                line: 2,
                kind: LabelErrorKind::Degenerate
            })
        );
        assert!(matches!(
            read_label_file("0 0.5 0.5 0.1", 4),
            Err(Error::LabelLine { line: 1, kind: LabelErrorKind::FieldCount(4) })
        ));
        assert!(matches!(
            read_label_file("0 0.5 x 0.1 0.1", 4),
            Err(Error::LabelLine { kind: LabelErrorKind::Parse { field: 2, .. }, .. })
        ));
        assert!(matches!(
            read_label_file("0 0.99 0.5 0.1 0.1", 4),
            Err(Error::LabelLine { kind: LabelErrorKind::OutOfBounds, .. })
        ));
    }

    #[test]
    fn tolerates_whitespace() {
        let annos = read_label_file("  1   0.25 0.25\t0.5 0.5  \n\n\n0 0.5 0.5 1 1\n", 2).unwrap();
        assert_eq!(annos.len(), 2);
        assert_eq!(annos[0].class_id, 1);
        assert_eq!(annos[1].bbox.w(), 1.0);
        assert_eq!(read_label_file("", 2).unwrap(), vec![]);
    }

    fn annotation() -> impl Strategy<Value = Annotation> {
        (0usize..4, 1e-4f64..1.0, 1e-4f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(c, w, h, u, v)| {
            let x = u * (1.0 - w);
            let y = v * (1.0 - h);
            Annotation {
                class_id: c,
                bbox: NormBBox::new(x + w / 2.0, y + h / 2.0, w, h).unwrap(),
            }
        })
    }

    proptest! {
        #[test]
        fn round_trip(annos in proptest::collection::vec(annotation(), 0..50)) {
            let text = write_label_file(&annos);
            let back = read_label_file(&text, 4).unwrap();
            prop_assert_eq!(back.len(), annos.len());
            for (a, b) in annos.iter().zip(&back) {
                prop_assert_eq!(a.class_id, b.class_id);
                prop_assert!((a.bbox.cx() - b.bbox.cx()).abs() <= 5e-7);
                prop_assert!((a.bbox.cy() - b.bbox.cy()).abs() <= 5e-7);
                prop_assert!((a.bbox.w() - b.bbox.w()).abs() <= 5e-7);
                prop_assert!((a.bbox.h() - b.bbox.h()).abs() <= 5e-7);
            }
            prop_assert_eq!(write_label_file(&back), text);
        }
    }
}
