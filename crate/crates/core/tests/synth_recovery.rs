use cellquad_core::eval::{match_detections, Contingency};
use cellquad_core::maskimport::instances_to_boxes;
use cellquad_core::synth::{gen_layout, gen_plate, mock_detect, ConfidenceModel, NoiseConfig, SynthConfig};
use cellquad_core::{to_norm, Annotation, ImageMeta};

fn layout_annotations(seed: u64, class_id: usize) -> (ImageMeta, Vec<Annotation>) {
    let cfg = SynthConfig {
        seed,
        cell_count: (100, 100),
        class_id,
        ..SynthConfig::default()
    };
    let meta = cfg.meta();
    let layout = gen_layout(&cfg).unwrap();
    let annos = layout
        .cells
        .iter()
        .map(|c| Annotation {
            class_id,
            bbox: to_norm(&c.bbox, &meta).unwrap(),
        })
        .collect();
    (meta, annos)
}

fn noise(k: usize, drop_prob: f64, confusion: Vec<Vec<f64>>, seed: u64) -> NoiseConfig {
    NoiseConfig {
        drop_prob,
        class_confusion: confusion,
        confidence: ConfidenceModel {
            correct_mean: 0.9,
            error_mean: 0.6,
            spread: 0.05,
        },
        seed,
        ..NoiseConfig::perfect(k)
    }
}

#[test]
fn mask_boxes_equal_planted_boxes() {
    for seed in 0..5 {
        let cfg = SynthConfig {
            seed,
            cell_count: (60, 90),
            ..SynthConfig::default()
        };
        let layout = gen_layout(&cfg).unwrap();
        let from_mask = instances_to_boxes(&layout.mask);
        assert_eq!(from_mask.len(), layout.cells.len());
        for (b, c) in from_mask.iter().zip(&layout.cells) {
            assert_eq!(b.instance_id, c.label);
            assert_eq!(b.bbox, c.bbox);
            assert_eq!(b.area_px, c.area_px);
        }
    }
}

#[test]
fn plate_and_layout_agree() {
    let cfg = SynthConfig {
        seed: 3,
        width: 320,
        height: 240,
        cell_count: (20, 20),
        ..SynthConfig::default()
    };
    let plate = gen_plate(&cfg).unwrap();
    let layout = gen_layout(&cfg).unwrap();
    assert_eq!(plate.mask, layout.mask);
    assert_eq!(plate.cells, layout.cells);
    assert_eq!(gen_plate(&cfg).unwrap().bf, plate.bf);
}

#[test]
fn drop_rate_within_binomial_tolerance() {
    let p = 0.1;
    let (mut gts, mut matched) = (0usize, 0usize);
    for plate in 0..100u64 {
        let (meta, annos) = layout_annotations(plate, 0);
        let dets = mock_detect(&annos, &noise(1, p, vec![vec![1.0]], 11), &meta, plate).unwrap();
        matched += match_detections(&annos, &dets, 0.5, false).pairs.len();
        gts += annos.len();
    }
    let n = gts as f64;
    let sigma = (p * (1.0 - p) / n).sqrt();
    let observed = 1.0 - matched as f64 / n;
    assert!((observed - p).abs() <= 3.0 * sigma, "drop {observed} vs {p} (sigma {sigma})");
}

#[test]
fn confusion_row_within_multinomial_tolerance() {
    let row = vec![0.931, 0.022, 0.012, 0.035];
    let mut confusion = vec![row.clone()];
    for i in 1..4 {
        let mut r = vec![0.0; 4];
        r[i] = 1.0;
        confusion.push(r);
    }
    let mut table = Contingency::new(4);
    for plate in 0..100u64 {
        let (meta, annos) = layout_annotations(1000 + plate, 0);
        let dets = mock_detect(&annos, &noise(4, 0.0, confusion.clone(), 5), &meta, plate).unwrap();
        let m = match_detections(&annos, &dets, 0.5, false);
        for pair in &m.pairs {
            table.add(annos[pair.gt].class_id, dets[pair.det].class_id, 1);
        }
    }
    let n = table.row_sum(0) as f64;
    assert_eq!(n, 10_000.0);
    for (j, &p) in row.iter().enumerate() {
        let est = table.get(0, j) as f64 / n;
        let sigma = (p * (1.0 - p) / n).sqrt();
        assert!((est - p).abs() <= 3.0 * sigma, "entry {j}: {est} vs {p}");
    }
}
