//! Detection matching, average precision, matched-pair classification
//! metrics, confusion matrices and plate-level majority votes.
//!
//! Two matchings are used on purpose. AP uses class-aware matching (a
//! detection can only hit a box of its own class). Classification metrics and
//! the confusion matrix use class-agnostic matching, so that a cell found in
//! the right place but given the wrong class shows up as a cross-class entry
//! instead of a miss. Unmatched boxes only appear in the counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::classes::ClassSet;
use crate::error::{Error, Result};
use crate::geom::{Annotation, Detection, ImageMeta};

pub const DEFAULT_IOU_THRESH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchPair {
    pub gt: usize,
    pub det: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    /// In detection processing order.
    pub pairs: Vec<MatchPair>,
    /// Ascending.
    pub unmatched_gt: Vec<usize>,
    /// Ascending.
    pub unmatched_det: Vec<usize>,
}

/// Detection indices by descending confidence, ties by lower index.
pub fn detection_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence).then(a.cmp(&b)));
    order
}

/// Greedy one-to-one matching. Detections are visited by descending
/// confidence; each takes the still-unmatched ground truth with the highest
/// IoU at or above `iou_thresh` (lowest index on ties), restricted to its own
/// class when `class_aware`.
pub fn match_detections(gts: &[Annotation], dets: &[Detection], iou_thresh: f64, class_aware: bool) -> MatchResult {
    let mut taken = vec![false; gts.len()];
    let mut det_matched = vec![false; dets.len()];
    let mut pairs = Vec::new();
    for d in detection_order(dets) {
        let det = &dets[d];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] || (class_aware && gt.class_id != det.class_id) {
                continue;
            }
            let v = gt.bbox.iou(&det.bbox);
            if v >= iou_thresh && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            taken[g] = true;
            det_matched[d] = true;
            pairs.push(MatchPair { gt: g, det: d, iou: v });
        }
    }
    MatchResult {
        pairs,
        unmatched_gt: (0..gts.len()).filter(|&g| !taken[g]).collect(),
        unmatched_det: (0..dets.len()).filter(|&d| !det_matched[d]).collect(),
    }
}

/// Ranked true/false-positive flags of one class, pooled over images.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ApAccumulator {
    gt_count: usize,
    // (confidence, image index, rank within image, true positive)
    entries: Vec<(f64, usize, usize, bool)>,
}

impl ApAccumulator {
    pub fn add_ground_truth(&mut self, n: usize) {
        self.gt_count += n;
    }

    pub fn add_detection(&mut self, confidence: f64, image: usize, rank: usize, true_positive: bool) {
        self.entries.push((confidence, image, rank, true_positive));
    }

    pub fn merge(&mut self, other: ApAccumulator) {
        self.gt_count += other.gt_count;
        self.entries.extend(other.entries);
    }

    pub fn gt_count(&self) -> usize {
        self.gt_count
    }

    pub fn det_count(&self) -> usize {
        self.entries.len()
    }

    /// All-point interpolated AP: area under the monotone precision envelope
    /// of the precision/recall curve. `None` without ground truth.
    pub fn average_precision(&self) -> Option<f64> {
        if self.gt_count == 0 {
            return None;
        }
        let mut entries = self.entries.clone();
        entries.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut tp = 0usize;
        let mut points = Vec::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if e.3 {
                tp += 1;
            }
            points.push((tp as f64 / self.gt_count as f64, tp as f64 / (i + 1) as f64));
        }
        // envelope: precision at recall r is the best precision at any recall >= r
        for i in (0..points.len().saturating_sub(1)).rev() {
            points[i].1 = points[i].1.max(points[i + 1].1);
        }
        let mut ap = 0.0;
        let mut prev_recall = 0.0;
        for (recall, precision) in points {
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
        Some(ap.clamp(0.0, 1.0))
    }
}

/// AP of one class on a single image.
pub fn average_precision(gts: &[Annotation], dets: &[Detection], class_id: usize, iou_thresh: f64) -> Option<f64> {
    let gts_c: Vec<Annotation> = gts.iter().copied().filter(|g| g.class_id == class_id).collect();
    let dets_c: Vec<Detection> = dets.iter().copied().filter(|d| d.class_id == class_id).collect();
    let m = match_detections(&gts_c, &dets_c, iou_thresh, true);
    let mut acc = ApAccumulator::default();
    acc.add_ground_truth(gts_c.len());
    let matched: BTreeSet<usize> = m.pairs.iter().map(|p| p.det).collect();
    for (rank, d) in dets_c.iter().enumerate() {
        acc.add_detection(d.confidence, 0, rank, matched.contains(&rank));
    }
    acc.average_precision()
}

/// Counts of (true class, predicted class) over matched pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    k: usize,
    counts: Vec<u64>,
}

impl Contingency {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let k = rows.len();
        let mut c = Self::new(k);
        for (t, row) in rows.iter().enumerate() {
            for (p, &n) in row.iter().enumerate().take(k) {
                c.counts[t * k + p] = n;
            }
        }
        c
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn add(&mut self, truth: usize, predicted: usize, n: u64) {
        self.counts[truth * self.k + predicted] += n;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn merge(&mut self, other: &Contingency) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.k).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, predicted)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k.max(1)).map(<[u64]>::to_vec).collect()
    }
}

/// Contingency of matched pairs from a class-agnostic matching.
pub fn contingency(m: &MatchResult, gts: &[Annotation], dets: &[Detection], class_count: usize) -> Contingency {
    let mut c = Contingency::new(class_count);
    for p in &m.pairs {
        c.add(gts[p.gt].class_id, dets[p.det].class_id, 1);
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub pairs: u64,
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl ClassificationMetrics {
    /// `None` for an empty contingency. Macro averages run over classes
    /// with nonzero true support.
    pub fn from_contingency(c: &Contingency) -> Option<Self> {
        let total = c.total();
        if total == 0 {
            return None;
        }
        let k = c.classes();
        // micro: every matched pair is one TP for its predicted class or one
        // FP for the predicted and one FN for the true class
        let tp: u64 = c.trace();
        let fp: u64 = (0..k).map(|p| c.col_sum(p) - c.get(p, p)).sum();
        let fn_: u64 = (0..k).map(|t| c.row_sum(t) - c.get(t, t)).sum();
        let micro_precision = tp as f64 / (tp + fp) as f64;
        let micro_recall = tp as f64 / (tp + fn_) as f64;
        let accuracy = tp as f64 / total as f64;

        let supported: Vec<usize> = (0..k).filter(|&t| c.row_sum(t) > 0).collect();
        let mut mp = 0.0;
        let mut mr = 0.0;
        let mut mf = 0.0;
        for &cls in &supported {
            let diag = c.get(cls, cls) as f64;
            let col = c.col_sum(cls);
            let p = if col > 0 { diag / col as f64 } else { 0.0 };
            let r = diag / c.row_sum(cls) as f64;
            mp += p;
            mr += r;
            mf += f1(p, r);
        }
        let n = supported.len() as f64;
        Some(Self {
            micro_precision,
            micro_recall,
            micro_f1: f1(micro_precision, micro_recall),
            accuracy,
            macro_precision: mp / n,
            macro_recall: mr / n,
            macro_f1: mf / n,
            pairs: total,
        })
    }
}

/// Matched-pair classification metrics. `m` must come from class-agnostic
/// matching.
pub fn classification_metrics(
    m: &MatchResult,
    gts: &[Annotation],
    dets: &[Detection],
    class_count: usize,
) -> Option<ClassificationMetrics> {
    ClassificationMetrics::from_contingency(&contingency(m, gts, dets, class_count))
}

/// Rows are true classes, columns predicted classes, both in class-set order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized counts; `None` for rows without support.
    pub normalized: Vec<Option<Vec<f64>>>,
}

impl ConfusionMatrix {
    pub fn from_contingency(c: &Contingency, class_set: &ClassSet) -> Self {
        let counts = c.rows();
        let normalized = counts
            .iter()
            .map(|row| {
                let sum: u64 = row.iter().sum();
                (sum > 0).then(|| row.iter().map(|&n| n as f64 / sum as f64).collect())
            })
            .collect();
        Self {
            classes: class_set.names().to_vec(),
            counts,
            normalized,
        }
    }

    pub fn unsupported_rows(&self) -> Vec<usize> {
        (0..self.normalized.len()).filter(|&i| self.normalized[i].is_none()).collect()
    }
}

pub fn confusion_matrix(m: &MatchResult, gts: &[Annotation], dets: &[Detection], class_set: &ClassSet) -> ConfusionMatrix {
    ConfusionMatrix::from_contingency(&contingency(m, gts, dets, class_set.len()), class_set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Vote {
    Class(usize),
    NoVote,
}

/// Confidence in integer millionths, so tie-break sums do not depend on
/// summation order.
fn micro_units(confidence: f64) -> u64 {
    libm::round(confidence.clamp(0.0, 1.0) * 1e6) as u64
}

/// The most frequent class among `dets`. Ties go to the larger summed
/// confidence, then to the lower class id.
pub fn majority_vote(dets: &[Detection], class_count: usize) -> Vote {
    let mut counts = vec![(0u64, 0u64); class_count];
    for d in dets {
        if let Some(slot) = counts.get_mut(d.class_id) {
            slot.0 += 1;
            slot.1 += micro_units(d.confidence);
        }
    }
    let mut best: Option<(usize, (u64, u64))> = None;
    for (cls, &score) in counts.iter().enumerate() {
        if score.0 == 0 {
            continue;
        }
        // strict comparison keeps the lower id on full ties
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((cls, score));
        }
    }
    best.map_or(Vote::NoVote, |(c, _)| Vote::Class(c))
}

/// Plate-level vote over all quadrant detections pooled together.
pub fn plate_vote_from_tiles(tiles: &[Vec<Detection>; 4], class_count: usize) -> Vote {
    let union: Vec<Detection> = tiles.iter().flatten().copied().collect();
    majority_vote(&union, class_count)
}

/// Ground truth of one evaluated image.
#[derive(Debug, Clone, PartialEq)]
pub struct GtImage {
    pub image: String,
    pub meta: ImageMeta,
    /// Class of the well the image belongs to, used for plate votes.
    pub label: Option<usize>,
    pub annotations: Vec<Annotation>,
}

/// Detector output for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEntry {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionFile {
    pub entries: Vec<DetectionEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub iou_thresh: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresh: DEFAULT_IOU_THRESH,
        }
    }
}

/// Per-image partial results. Merging is associative and commutative, so
/// images can be tallied in any order or in parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    pub ap: Vec<ApAccumulator>,
    pub contingency: Contingency,
    pub gt_count: u64,
    pub det_count: u64,
    pub true_positives: u64,
    pub matched_pairs: u64,
    pub unmatched_gt: u64,
    pub unmatched_det: u64,
}

impl Tally {
    pub fn new(class_count: usize) -> Self {
        Self {
            ap: vec![ApAccumulator::default(); class_count],
            contingency: Contingency::new(class_count),
            gt_count: 0,
            det_count: 0,
            true_positives: 0,
            matched_pairs: 0,
            unmatched_gt: 0,
            unmatched_det: 0,
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.ap.iter_mut().zip(other.ap) {
            a.merge(b);
        }
        self.contingency.merge(&other.contingency);
        self.gt_count += other.gt_count;
        self.det_count += other.det_count;
        self.true_positives += other.true_positives;
        self.matched_pairs += other.matched_pairs;
        self.unmatched_gt += other.unmatched_gt;
        self.unmatched_det += other.unmatched_det;
        self
    }
}

/// Matches one image both ways and records everything the report needs.
pub fn tally_image(image_index: usize, gts: &[Annotation], dets: &[Detection], class_count: usize, iou_thresh: f64) -> Tally {
    let mut t = Tally::new(class_count);
    t.gt_count = gts.len() as u64;
    t.det_count = dets.len() as u64;
    for g in gts {
        t.ap[g.class_id].add_ground_truth(1);
    }
    let aware = match_detections(gts, dets, iou_thresh, true);
    let mut is_tp = vec![false; dets.len()];
    for p in &aware.pairs {
        is_tp[p.det] = true;
    }
    t.true_positives = aware.pairs.len() as u64;
    for (rank, d) in dets.iter().enumerate() {
        t.ap[d.class_id].add_detection(d.confidence, image_index, rank, is_tp[rank]);
    }
    let agnostic = match_detections(gts, dets, iou_thresh, false);
    t.contingency = contingency(&agnostic, gts, dets, class_count);
    t.matched_pairs = agnostic.pairs.len() as u64;
    t.unmatched_gt = agnostic.unmatched_gt.len() as u64;
    t.unmatched_det = agnostic.unmatched_det.len() as u64;
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAp {
    pub class: String,
    pub ap: Option<f64>,
    pub gt_count: usize,
    pub det_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub struct DetectionCounts {
    pub gt_count: u64,
    pub det_count: u64,
    /// Class-aware matches (the AP notion of a hit).
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    /// Class-agnostic matches feeding the classification metrics.
    pub matched_pairs: u64,
    pub unmatched_gt: u64,
    pub unmatched_det: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteOutcome {
    pub well: String,
    pub images: usize,
    pub truth: Option<usize>,
    pub predicted: Vote,
}

impl VoteOutcome {
    pub fn correct(&self) -> Option<bool> {
        let truth = self.truth?;
        Some(self.predicted == Vote::Class(truth))
    }
}

/// Training-phase numbers produced outside this toolkit, carried through to
/// the report unchanged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct TrainingSummary {
    pub time: Option<String>,
    pub map: Option<String>,
    pub avg_loss: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub iou_thresh: f64,
    pub images: usize,
    pub per_class_ap: Vec<ClassAp>,
    /// Mean over classes with ground truth.
    pub map: Option<f64>,
    pub counts: DetectionCounts,
    pub classification: Option<ClassificationMetrics>,
    pub confusion: ConfusionMatrix,
    pub votes: Vec<VoteOutcome>,
    pub vote_accuracy: Option<f64>,
    /// Ground-truth images without a detection entry, scored as all misses.
    pub missing_images: Vec<String>,
    /// Detection entries without ground truth, scored as pure false positives.
    pub unexpected_images: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
}

impl EvalReport {
    /// Assembles the report from the reduced tally.
    pub fn from_tally(
        class_set: &ClassSet,
        cfg: &EvalConfig,
        images: usize,
        tally: Tally,
        votes: Vec<VoteOutcome>,
        missing_images: Vec<String>,
        unexpected_images: Vec<String>,
    ) -> Self {
        let mut warnings = Vec::new();
        let per_class_ap: Vec<ClassAp> = class_set
            .names()
            .iter()
            .zip(&tally.ap)
            .map(|(name, acc)| {
                let ap = acc.average_precision();
                if ap.is_none() {
                    warnings.push(format!("class {name:?} has no ground truth; AP undefined and excluded from mAP"));
                }
                ClassAp {
                    class: name.clone(),
                    ap,
                    gt_count: acc.gt_count(),
                    det_count: acc.det_count(),
                }
            })
            .collect();
        let defined: Vec<f64> = per_class_ap.iter().filter_map(|c| c.ap).collect();
        let map = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        let classification = ClassificationMetrics::from_contingency(&tally.contingency);
        if classification.is_none() {
            warnings.push("no matched pairs; classification metrics undefined".to_string());
        }
        let confusion = ConfusionMatrix::from_contingency(&tally.contingency, class_set);
        for r in confusion.unsupported_rows() {
            warnings.push(format!("confusion row {:?} has no matched ground truth", class_set.names()[r]));
        }
        let judged: Vec<bool> = votes.iter().filter_map(VoteOutcome::correct).collect();
        let vote_accuracy =
            (!judged.is_empty()).then(|| judged.iter().filter(|&&c| c).count() as f64 / judged.len() as f64);
        if !missing_images.is_empty() {
            warnings.push(format!("{} ground-truth images had no detections entry", missing_images.len()));
        }
        if !unexpected_images.is_empty() {
            warnings.push(format!("{} detection images have no ground truth", unexpected_images.len()));
        }
        Self {
            classes: class_set.names().to_vec(),
            iou_thresh: cfg.iou_thresh,
            images,
            per_class_ap,
            map,
            counts: DetectionCounts {
                gt_count: tally.gt_count,
                det_count: tally.det_count,
                true_positives: tally.true_positives,
                false_positives: tally.det_count - tally.true_positives,
                false_negatives: tally.gt_count - tally.true_positives,
                matched_pairs: tally.matched_pairs,
                unmatched_gt: tally.unmatched_gt,
                unmatched_det: tally.unmatched_det,
            },
            classification,
            confusion,
            votes,
            vote_accuracy,
            missing_images,
            unexpected_images,
            warnings,
            training: None,
        }
    }
}

/// Pairs every ground-truth image with its detections. Also returns the
/// detection entries that have no ground truth.
pub struct RunPlan<'a> {
    /// (image index, ground truth, detections) in ground-truth order; images
    /// without ground truth follow with empty annotations.
    pub items: Vec<(usize, &'a [Annotation], &'a [Detection])>,
    pub missing_images: Vec<String>,
    pub unexpected_images: Vec<String>,
}

/// Validates class ids and image names and lines up the two sides.
pub fn plan_run<'a>(class_set: &ClassSet, gts: &'a [GtImage], dets: &'a DetectionFile) -> Result<RunPlan<'a>> {
    let k = class_set.len();
    let mut by_name: BTreeMap<&str, &DetectionEntry> = BTreeMap::new();
    for e in &dets.entries {
        for (i, d) in e.detections.iter().enumerate() {
            if d.class_id >= k {
                return Err(Error::ClassSetMismatch(format!(
                    "image {:?} detection {i}: class id {} but only {k} classes",
                    e.image, d.class_id
                )));
            }
        }
        if by_name.insert(e.image.as_str(), e).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate detection entry for {:?}", e.image)));
        }
    }
    let mut seen = BTreeSet::new();
    let mut items = Vec::with_capacity(gts.len());
    let mut missing = Vec::new();
    for (i, g) in gts.iter().enumerate() {
        if let Some(a) = g.annotations.iter().find(|a| a.class_id >= k) {
            return Err(Error::ClassSetMismatch(format!(
                "ground truth {:?}: class id {} but only {k} classes",
                g.image, a.class_id
            )));
        }
        if !seen.insert(g.image.as_str()) {
            return Err(Error::InvalidConfig(format!("duplicate ground-truth image {:?}", g.image)));
        }
        match by_name.get(g.image.as_str()) {
            Some(e) => items.push((i, g.annotations.as_slice(), e.detections.as_slice())),
            None => {
                missing.push(g.image.clone());
                items.push((i, g.annotations.as_slice(), &[][..]));
            }
        }
    }
    let mut unexpected = Vec::new();
    for e in &dets.entries {
        if !seen.contains(e.image.as_str()) {
            unexpected.push(e.image.clone());
            items.push((gts.len() + unexpected.len() - 1, &[][..], e.detections.as_slice()));
        }
    }
    Ok(RunPlan {
        items,
        missing_images: missing,
        unexpected_images: unexpected,
    })
}

/// Plate votes: detections of all images of a well pooled, compared against
/// the well's label. Images without a well key vote alone.
pub fn plate_votes(class_set: &ClassSet, gts: &[GtImage], dets: &DetectionFile) -> Vec<VoteOutcome> {
    let by_name: BTreeMap<&str, &DetectionEntry> = dets.entries.iter().map(|e| (e.image.as_str(), e)).collect();
    let mut wells: BTreeMap<String, (usize, Option<usize>, Vec<Detection>)> = BTreeMap::new();
    for g in gts {
        let key = match &g.meta.well {
            Some(w) => w.to_string(),
            None => g.image.clone(),
        };
        let slot = wells.entry(key).or_insert((0, g.label, Vec::new()));
        slot.0 += 1;
        if slot.1.is_none() {
            slot.1 = g.label;
        }
        if let Some(e) = by_name.get(g.image.as_str()) {
            slot.2.extend_from_slice(&e.detections);
        }
    }
    wells
        .into_iter()
        .map(|(well, (images, truth, dets))| VoteOutcome {
            well,
            images,
            truth,
            predicted: majority_vote(&dets, class_set.len()),
        })
        .collect()
}

/// Full analysis of one run.
pub fn evaluate_run(class_set: &ClassSet, gts: &[GtImage], dets: &DetectionFile, cfg: &EvalConfig) -> Result<EvalReport> {
    if !(cfg.iou_thresh > 0.0 && cfg.iou_thresh <= 1.0) {
        return Err(Error::InvalidConfig(format!("IoU threshold {} outside (0, 1]", cfg.iou_thresh)));
    }
    let plan = plan_run(class_set, gts, dets)?;
    let k = class_set.len();
    let tally = plan
        .items
        .iter()
        .map(|&(i, g, d)| tally_image(i, g, d, k, cfg.iou_thresh))
        .fold(Tally::new(k), Tally::merge);
    let votes = plate_votes(class_set, gts, dets);
    Ok(EvalReport::from_tally(
        class_set,
        cfg,
        plan.items.len(),
        tally,
        votes,
        plan.missing_images,
        plan.unexpected_images,
    ))
}

/// One row of the per-fold table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub map: f64,
}

impl FoldRow {
    pub fn from_report(r: &EvalReport) -> Option<Self> {
        let c = r.classification?;
        Some(Self {
            precision: c.micro_precision,
            recall: c.micro_recall,
            f1: c.micro_f1,
            accuracy: c.accuracy,
            map: r.map.unwrap_or(0.0),
        })
    }
}

/// Arithmetic mean of fold rows.
pub fn average_rows(rows: &[FoldRow]) -> Option<FoldRow> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&FoldRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Some(FoldRow {
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        accuracy: mean(|r| r.accuracy),
        map: mean(|r| r.map),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::NormBBox;

    fn nb(x0: f64, y0: f64, x1: f64, y1: f64) -> NormBBox {
        NormBBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0).unwrap()
    }

    fn gt(c: usize, b: NormBBox) -> Annotation {
        Annotation { class_id: c, bbox: b }
    }

    fn det(c: usize, b: NormBBox, conf: f64) -> Detection {
        Detection::new(c, b, conf).unwrap()
    }

    #[test]
    fn single_perfect_match() {
        let b = nb(0.1, 0.1, 0.2, 0.2);
        let m = match_detections(&[gt(0, b)], &[det(0, b, 0.7)], 0.5, true);
        assert_eq!(m.pairs, vec![MatchPair { gt: 0, det: 0, iou: 1.0 }]);
        assert!(m.unmatched_gt.is_empty() && m.unmatched_det.is_empty());
    }

    #[test]
    fn higher_confidence_wins() {
        let b = nb(0.1, 0.1, 0.2, 0.2);
        let m = match_detections(&[gt(0, b)], &[det(0, b, 0.8), det(0, b, 0.9)], 0.5, true);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].det, 1);
        assert_eq!(m.unmatched_det, vec![0]);
    }

    #[test]
    fn class_aware_blocks_cross_class() {
        let b = nb(0.1, 0.1, 0.2, 0.2);
        let aware = match_detections(&[gt(0, b)], &[det(1, b, 0.9)], 0.5, true);
        assert!(aware.pairs.is_empty());
        let agnostic = match_detections(&[gt(0, b)], &[det(1, b, 0.9)], 0.5, false);
        assert_eq!(agnostic.pairs.len(), 1);
    }

    #[test]
    fn ap_hand_curve() {
        let g = nb(0.1, 0.1, 0.2, 0.2);
        let wrong = nb(0.6, 0.6, 0.7, 0.7);
        let ap = average_precision(&[gt(0, g)], &[det(0, wrong, 0.9), det(0, g, 0.8)], 0, 0.5).unwrap();
        assert!((ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ap_trivial_cases() {
        let g1 = nb(0.1, 0.1, 0.2, 0.2);
        let g2 = nb(0.5, 0.5, 0.6, 0.6);
        let gts = [gt(0, g1), gt(0, g2)];
        assert_eq!(average_precision(&gts, &[det(0, g1, 0.3), det(0, g2, 0.6)], 0, 0.5), Some(1.0));
        assert_eq!(average_precision(&gts, &[], 0, 0.5), Some(0.0));
        assert_eq!(average_precision(&gts, &[det(1, g1, 0.3)], 1, 0.5), None);
    }

    #[test]
    fn micro_metrics_fixture() {
        // 985 of 1000 matched pairs correct
        let c = Contingency::from_rows(&[vec![500, 10], vec![5, 485]]);
        let m = ClassificationMetrics::from_contingency(&c).unwrap();
        for v in [m.micro_precision, m.micro_recall, m.micro_f1, m.accuracy] {
            assert!((v - 0.985).abs() < 1e-12);
        }
    }

    #[test]
    fn swapped_half() {
        let c = Contingency::from_rows(&[vec![5, 5], vec![5, 5]]);
        let m = ClassificationMetrics::from_contingency(&c).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(ClassificationMetrics::from_contingency(&Contingency::new(3)), None);
    }

    #[test]
    fn confusion_rows() {
        let set = ClassSet::new(["ER", "C", "M", "N"]).unwrap();
        let c = Contingency::from_rows(&[vec![931, 22, 12, 34], vec![0, 10, 0, 0], vec![0; 4], vec![0, 0, 0, 3]]);
        let cm = ConfusionMatrix::from_contingency(&c, &set);
        let er = cm.normalized[0].as_ref().unwrap();
        for (got, want) in er.iter().zip([0.931, 0.022, 0.012, 0.034]) {
            assert!((got - want).abs() <= 0.002);
        }
        assert!((er.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(cm.unsupported_rows(), vec![2]);
    }

    #[test]
    fn votes() {
        let b = nb(0.1, 0.1, 0.2, 0.2);
        let mut dets = vec![];
        dets.extend((0..40).map(|_| det(1, b, 0.5)));
        dets.extend((0..3).map(|_| det(0, b, 0.9)));
        assert_eq!(majority_vote(&dets, 2), Vote::Class(1));
        assert_eq!(majority_vote(&[], 2), Vote::NoVote);

        // 5 vs 5; sums 4.2 vs 3.9
        let mut tied = vec![];
        tied.extend([0.9, 0.9, 0.8, 0.8, 0.8].map(|c| det(0, b, c)));
        tied.extend([0.7, 0.8, 0.8, 0.8, 0.8].map(|c| det(1, b, c)));
        assert_eq!(majority_vote(&tied, 2), Vote::Class(0));
        // full tie falls to the lower id
        let even = [det(1, b, 0.5), det(0, b, 0.5)];
        assert_eq!(majority_vote(&even, 2), Vote::Class(0));
    }

    #[test]
    fn tile_vote_dominant() {
        let b = nb(0.1, 0.1, 0.2, 0.2);
        let tiles = [
            vec![det(2, b, 0.9); 5],
            vec![det(2, b, 0.9), det(0, b, 0.9)],
            vec![det(2, b, 0.4); 3],
            vec![],
        ];
        assert_eq!(plate_vote_from_tiles(&tiles, 3), Vote::Class(2));
    }

    #[test]
    fn fold_average() {
        let r = FoldRow {
            precision: 0.9,
            recall: 0.9,
            f1: 0.9,
            accuracy: 0.9,
            map: 0.8,
        };
        let avg = average_rows(&[r, r, r]).unwrap();
        for (a, b) in [(avg.precision, r.precision), (avg.f1, r.f1), (avg.accuracy, r.accuracy), (avg.map, r.map)] {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(average_rows(&[]), None);
    }
}
