use cellquad_core::eval::{
    average_precision, classification_metrics, confusion_matrix, majority_vote, match_detections, plate_vote_from_tiles,
    ClassificationMetrics, Contingency,
};
use cellquad_core::tiler::{locate, tile_annotations, BorderPolicy, Placement};
use cellquad_core::{to_px, Annotation, ClassSet, Detection, ImageMeta, NormBBox};
use proptest::prelude::*;

fn norm_box() -> impl Strategy<Value = NormBBox> {
    (0.01f64..0.6, 0.01f64..0.6, 0.0f64..1.0, 0.0f64..1.0)
        .prop_map(|(w, h, u, v)| NormBBox::new(w / 2.0 + u * (1.0 - w), h / 2.0 + v * (1.0 - h), w, h).unwrap())
}

fn annotation(k: usize) -> impl Strategy<Value = Annotation> {
    (0..k, norm_box()).prop_map(|(class_id, bbox)| Annotation { class_id, bbox })
}

fn detection(k: usize) -> impl Strategy<Value = Detection> {
    (0..k, norm_box(), 0.0f64..=1.0).prop_map(|(c, b, conf)| Detection::new(c, b, conf).unwrap())
}

fn as_detection(a: &Annotation, confidence: f64) -> Detection {
    Detection::new(a.class_id, a.bbox, confidence).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn tiling_partitions_annotations(annos in prop::collection::vec(annotation(4), 0..40), hw in 8u32..400, hh in 8u32..400) {
        let meta = ImageMeta::new(hw * 2, hh * 2).unwrap();
        let tiled = tile_annotations(&annos, &meta, BorderPolicy::Drop).unwrap();
        prop_assert_eq!(tiled.kept() + tiled.straddling, annos.len());
        let inside = annos
            .iter()
            .filter(|a| matches!(locate(&to_px(&a.bbox, &meta).unwrap(), &meta), Placement::Inside(_)))
            .count();
        prop_assert_eq!(inside, tiled.kept());
    }

    #[test]
    fn clip_policy_keeps_at_least_drop(annos in prop::collection::vec(annotation(3), 0..30)) {
        let meta = ImageMeta::new(1344, 1024).unwrap();
        let drop = tile_annotations(&annos, &meta, BorderPolicy::Drop).unwrap();
        let clip = tile_annotations(&annos, &meta, BorderPolicy::Clip).unwrap();
        prop_assert!(clip.kept() >= drop.kept() + drop.straddling);
        prop_assert_eq!(clip.straddling, drop.straddling);
    }

    #[test]
    fn matching_is_one_to_one_and_above_threshold(
        gts in prop::collection::vec(annotation(3), 0..8),
        dets in prop::collection::vec(detection(3), 0..8),
        thresh in 0.05f64..=1.0,
        aware in any::<bool>(),
    ) {
        let m = match_detections(&gts, &dets, thresh, aware);
        let mut g_seen = vec![false; gts.len()];
        let mut d_seen = vec![false; dets.len()];
        for p in &m.pairs {
            prop_assert!(!g_seen[p.gt] && !d_seen[p.det]);
            g_seen[p.gt] = true;
            d_seen[p.det] = true;
            prop_assert!(p.iou >= thresh);
            if aware {
                prop_assert_eq!(gts[p.gt].class_id, dets[p.det].class_id);
            }
        }
        prop_assert_eq!(m.pairs.len() + m.unmatched_gt.len(), gts.len());
        prop_assert_eq!(m.pairs.len() + m.unmatched_det.len(), dets.len());
        prop_assert_eq!(m, match_detections(&gts, &dets, thresh, aware));
    }

    #[test]
    fn micro_metrics_coincide(rows in prop::collection::vec(prop::collection::vec(0u64..50, 4), 4)) {
        let c = Contingency::from_rows(&rows);
        match ClassificationMetrics::from_contingency(&c) {
            None => prop_assert_eq!(c.total(), 0),
            Some(m) => {
                let acc = c.trace() as f64 / c.total() as f64;
                for v in [m.micro_precision, m.micro_recall, m.micro_f1, m.accuracy] {
                    prop_assert!((v - acc).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn confusion_rows_sum_to_one(
        gts in prop::collection::vec(annotation(4), 1..12),
        noise in prop::collection::vec((0usize..4, 0.0f64..=1.0), 12),
    ) {
        let dets: Vec<Detection> = gts
            .iter()
            .zip(&noise)
            .map(|(g, &(c, conf))| Detection::new(c, g.bbox, conf).unwrap())
            .collect();
        let set = ClassSet::new(["a", "b", "c", "d"]).unwrap();
        let m = match_detections(&gts, &dets, 0.5, false);
        let cm = confusion_matrix(&m, &gts, &dets, &set);
        for row in cm.normalized.iter().flatten() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let metrics = classification_metrics(&m, &gts, &dets, 4).unwrap();
        prop_assert_eq!(metrics.pairs, gts.len() as u64);
    }

    #[test]
    fn adding_a_true_positive_never_lowers_ap(
        gts in prop::collection::vec(annotation(2), 1..8),
        dets in prop::collection::vec(detection(2), 0..8),
        pick in any::<prop::sample::Index>(),
        conf in 0.0f64..=1.0,
    ) {
        // Duplicate of a currently unmatched ground-truth box.
        let m = match_detections(&gts, &dets, 0.5, true);
        prop_assume!(!m.unmatched_gt.is_empty());
        let g = &gts[m.unmatched_gt[pick.index(m.unmatched_gt.len())]];
        let mut more = dets.clone();
        more.push(as_detection(g, conf));
        let m2 = match_detections(&gts, &more, 0.5, true);
        prop_assume!(m2.pairs.len() == m.pairs.len() + 1);
        for c in 0..2 {
            let before = average_precision(&gts, &dets, c, 0.5);
            let after = average_precision(&gts, &more, c, 0.5);
            if let (Some(b), Some(a)) = (before, after) {
                prop_assert!(a + 1e-12 >= b, "class {}: {} -> {}", c, b, a);
            }
        }
    }

    #[test]
    fn confidence_scaling_changes_nothing(
        gts in prop::collection::vec(annotation(3), 0..8),
        dets in prop::collection::vec(detection(3), 0..8),
        scale in 0.01f64..=1.0,
    ) {
        let scaled: Vec<Detection> = dets
            .iter()
            .map(|d| Detection::new(d.class_id, d.bbox, d.confidence * scale).unwrap())
            .collect();
        prop_assume!(order_preserved(&dets, &scaled));
        prop_assert_eq!(match_detections(&gts, &dets, 0.5, true), match_detections(&gts, &scaled, 0.5, true));
        prop_assert_eq!(match_detections(&gts, &dets, 0.5, false), match_detections(&gts, &scaled, 0.5, false));
        for c in 0..3 {
            prop_assert_eq!(average_precision(&gts, &dets, c, 0.5), average_precision(&gts, &scaled, c, 0.5));
        }
    }

    #[test]
    fn tile_vote_equals_union_vote(
        dets in prop::collection::vec((0usize..4, 0u32..=4), 0..60),
        split in prop::collection::vec(0usize..4, 60),
    ) {
        let b = NormBBox::new(0.5, 0.5, 0.1, 0.1).unwrap();
        let dets: Vec<Detection> = dets.iter().map(|&(c, q)| Detection::new(c, b, q as f64 / 4.0).unwrap()).collect();
        let mut tiles: [Vec<Detection>; 4] = Default::default();
        for (d, &t) in dets.iter().zip(&split) {
            tiles[t].push(*d);
        }
        prop_assert_eq!(plate_vote_from_tiles(&tiles, 4), majority_vote(&dets, 4));
        let mut rev = dets.clone();
        rev.reverse();
        prop_assert_eq!(majority_vote(&rev, 4), majority_vote(&dets, 4));
    }
}

/// False when scaling collapsed or swapped two confidences.
fn order_preserved(a: &[Detection], b: &[Detection]) -> bool {
    (0..a.len()).all(|i| {
        (0..a.len()).all(|j| a[i].confidence.partial_cmp(&a[j].confidence) == b[i].confidence.partial_cmp(&b[j].confidence))
    })
}
