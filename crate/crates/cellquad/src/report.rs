//! Report export: JSON, per-fold and confusion tables, and a plain-text
//! summary.

use std::fmt::Write as _;
use std::path::Path;

use cellquad_core::eval::{average_rows, EvalReport, FoldRow, Vote};

use crate::error::Result;
use crate::fsutil::write_file;

pub fn report_json(report: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Per-fold metrics followed by an `AVG` row (arithmetic mean over folds).
pub fn fold_table(rows: &[(String, FoldRow)]) -> String {
    let mut out = String::from("fold,precision,recall,f1,accuracy,map\n");
    let line = |out: &mut String, name: &str, r: &FoldRow| {
        let _ = writeln!(
            out,
            "{name},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.precision, r.recall, r.f1, r.accuracy, r.map
        );
    };
    for (name, r) in rows {
        line(&mut out, name, r);
    }
    let plain: Vec<FoldRow> = rows.iter().map(|(_, r)| *r).collect();
    if let Some(avg) = average_rows(&plain) {
        line(&mut out, "AVG", &avg);
    }
    out
}

/// Row-normalized confusion matrix; rows without support read `NA`.
pub fn confusion_table(report: &EvalReport) -> String {
    let cm = &report.confusion;
    let mut out = String::from("true\\predicted");
    for c in &cm.classes {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (name, row) in cm.classes.iter().zip(&cm.normalized) {
        out.push_str(name);
        match row {
            Some(vals) => vals.iter().for_each(|v| {
                let _ = write!(out, ",{v:.6}");
            }),
            None => cm.classes.iter().for_each(|_| out.push_str(",NA")),
        }
        out.push('\n');
    }
    out
}

pub fn confusion_counts_table(report: &EvalReport) -> String {
    let cm = &report.confusion;
    let mut out = String::from("true\\predicted");
    for c in &cm.classes {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for (name, row) in cm.classes.iter().zip(&cm.counts) {
        out.push_str(name);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

pub fn summary_text(report: &EvalReport) -> String {
    let mut s = String::new();
    let c = &report.counts;
    let _ = writeln!(s, "images evaluated: {}", report.images);
    let _ = writeln!(s, "IoU threshold: {}", report.iou_thresh);
    let _ = writeln!(s, "ground truth: {}  detections: {}", c.gt_count, c.det_count);
    let _ = writeln!(
        s,
        "class-aware: TP {}  FP {}  FN {}",
        c.true_positives, c.false_positives, c.false_negatives
    );
    let _ = writeln!(
        s,
        "class-agnostic: matched {}  unmatched gt {}  unmatched det {}",
        c.matched_pairs, c.unmatched_gt, c.unmatched_det
    );
    let _ = writeln!(s, "\nAP@{}", report.iou_thresh);
    for a in &report.per_class_ap {
        let _ = writeln!(s, "  {:<16} {}  (gt {}, det {})", a.class, opt(a.ap), a.gt_count, a.det_count);
    }
    let _ = writeln!(s, "  {:<16} {}", "mAP", opt(report.map));
    match &report.classification {
        Some(m) => {
            let _ = writeln!(s, "\nPrecision Recall F1 Accuracy (matched pairs, micro)");
            let _ = writeln!(
                s,
                "  {:.3} {:.3} {:.3} {:.3}",
                m.micro_precision, m.micro_recall, m.micro_f1, m.accuracy
            );
            let _ = writeln!(
                s,
                "macro: precision {:.3} recall {:.3} F1 {:.3}",
                m.macro_precision, m.macro_recall, m.macro_f1
            );
        }
        None => {
            let _ = writeln!(s, "\nclassification metrics undefined (no matched pairs)");
        }
    }
    let _ = writeln!(s, "\nconfusion matrix (rows true, columns predicted)");
    let names = &report.confusion.classes;
    let _ = write!(s, "  {:<14}", "");
    for n in names {
        let _ = write!(s, " {:>8}", truncate(n, 8));
    }
    s.push('\n');
    for (n, row) in names.iter().zip(&report.confusion.normalized) {
        let _ = write!(s, "  {:<14}", truncate(n, 14));
        match row {
            Some(vals) => vals.iter().for_each(|v| {
                let _ = write!(s, " {v:>8.3}");
            }),
            None => names.iter().for_each(|_| {
                let _ = write!(s, " {:>8}", "NA");
            }),
        }
        s.push('\n');
    }
    let _ = writeln!(s, "  note: built from matched pairs only; unmatched cells are excluded and counted above");
    if !report.votes.is_empty() {
        let decided = report.votes.iter().filter(|v| v.predicted != Vote::NoVote).count();
        let _ = writeln!(
            s,
            "\nplate majority vote: {} wells, {} with a vote, accuracy {}",
            report.votes.len(),
            decided,
            opt(report.vote_accuracy)
        );
    }
    if let Some(t) = &report.training {
        let show = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "\ntraining (external): time {} / mAP {} / avg loss {}",
            show(&t.time),
            show(&t.map),
            show(&t.avg_loss)
        );
    }
    for w in &report.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn truncate(s: &str, n: usize) -> &str {
    match s.char_indices().nth(n) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Writes `report.json`, `table4.csv`, `table5.csv`, `table5_counts.csv` and
/// `summary.txt` into `dir`.
pub fn write_report(dir: &Path, report: &EvalReport, fold_name: &str) -> Result<()> {
    write_file(&dir.join("report.json"), report_json(report).as_bytes())?;
    let rows: Vec<(String, FoldRow)> = FoldRow::from_report(report).map(|r| (fold_name.to_string(), r)).into_iter().collect();
    write_file(&dir.join("table4.csv"), fold_table(&rows).as_bytes())?;
    write_file(&dir.join("table5.csv"), confusion_table(report).as_bytes())?;
    write_file(&dir.join("table5_counts.csv"), confusion_counts_table(report).as_bytes())?;
    write_file(&dir.join("summary.txt"), summary_text(report).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellquad_core::eval::{EvalConfig, Tally};
    use cellquad_core::ClassSet;

    #[test]
    fn avg_row_is_mean() {
        let r = |v: f64| FoldRow {
            precision: v,
            recall: v,
            f1: v,
            accuracy: v,
            map: v,
        };
        let t = fold_table(&[("1".into(), r(0.98)), ("2".into(), r(0.99))]);
        assert_eq!(t.lines().last().unwrap(), "AVG,0.985000,0.985000,0.985000,0.985000,0.985000");
    }

    #[test]
    fn unsupported_rows_marked() {
        let set = ClassSet::new(["ER", "M"]).unwrap();
        let mut tally = Tally::new(2);
        tally.contingency.add(0, 0, 3);
        let report = EvalReport::from_tally(&set, &EvalConfig::default(), 1, tally, vec![], vec![], vec![]);
        let t = confusion_table(&report);
        assert_eq!(t, "true\\predicted,ER,M\nER,1.000000,0.000000\nM,NA,NA\n");
        assert!(summary_text(&report).contains("NA"));
    }
}
