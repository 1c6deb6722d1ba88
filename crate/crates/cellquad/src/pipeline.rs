//! The subcommands. Every command writes only under the output root, names
//! files from (plate, well, tile) and reduces per-image results in input
//! order, so reruns are byte-identical regardless of thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cellquad_core::eval::{
    plan_run, plate_votes, tally_image, DetectionFile, EvalConfig, EvalReport, FoldRow, GtImage, Tally,
};
use cellquad_core::labels::{read_label_file, write_label_file};
use cellquad_core::maskimport::import_mask;
use cellquad_core::raster::merge_channels;
use cellquad_core::rng::{derive_seed, rng_for, stream};
use cellquad_core::split::{image_stem, plan_bundle, BundlePlan, SplitLists};
use cellquad_core::synth::{gen_plate, mock_detect, GfpPattern, SynthConfig};
use cellquad_core::tiler::{crop, tile_annotations, BorderPolicy};
use cellquad_core::{ImageMeta, PlateRecord, QuadrantTag};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::detections::{read_detections, write_detections};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_file};
use crate::imageio;
use crate::manifest::{load_manifest, manifest_text};
use crate::overlay;
use crate::report::{fold_table, write_report};

pub const IMAGES_DIR: &str = "images";
pub const TILES_DIR: &str = "tiles";

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

fn progress(cmd: &str, done: usize, total: usize, what: &str) {
    eprintln!("[{cmd}] {done}/{total} {what}");
}

pub fn manifest_path(cfg: &RunConfig) -> PathBuf {
    cfg.manifest.clone().unwrap_or_else(|| cfg.out.join("manifest.csv"))
}

pub fn masks_dir(cfg: &RunConfig) -> PathBuf {
    cfg.masks_dir.clone().unwrap_or_else(|| cfg.out.join("masks"))
}

pub fn detections_path(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.detections_path(fold).unwrap_or_else(|| cfg.out.join("detections.json"))
}

pub fn bundle_dir(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.out.join("bundles").join(&cfg.experiment.name).join(format!("fold{fold}"))
}

pub fn eval_dir(cfg: &RunConfig, fold: usize) -> PathBuf {
    cfg.out.join("eval").join(&cfg.experiment.name).join(format!("fold{fold}"))
}

/// Root-relative path of a composite or tile image from its stem.
pub fn image_rel(stem: &str, quadrants: bool) -> String {
    let dir = if quadrants { TILES_DIR } else { IMAGES_DIR };
    format!("{dir}/{stem}.png")
}

fn with_root(cfg: &RunConfig, rel: &str) -> String {
    match &cfg.path_root {
        Some(root) => format!("{}/{rel}", root.trim_end_matches('/')),
        None => rel.to_string(),
    }
}

/// Strips the configured root prefix and any leading `./` or `/`.
pub fn normalize_image_path(path: &str, root: Option<&str>) -> String {
    let mut p = path;
    if let Some(r) = root {
        let r = r.trim_end_matches('/');
        if !r.is_empty() {
            if let Some(rest) = p.strip_prefix(r) {
                p = rest;
            }
        }
    }
    loop {
        if let Some(rest) = p.strip_prefix("./") {
            p = rest;
        } else if let Some(rest) = p.strip_prefix('/') {
            p = rest;
        } else {
            break;
        }
    }
    p.to_string()
}

fn label_path(out: &Path, rel_png: &str) -> PathBuf {
    out.join(rel_png).with_extension("txt")
}

/// Manifest records, sorted by (plate, well), with channel paths resolved
/// against the manifest's directory.
pub fn load_records(cfg: &RunConfig) -> Result<Vec<PlateRecord>> {
    let path = manifest_path(cfg);
    let mut records = load_manifest(&path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    for r in &mut records {
        for p in [&mut r.bf_path, &mut r.gfp_path] {
            if Path::new(p.as_str()).is_relative() {
                *p = base.join(p.as_str()).to_string_lossy().into_owned();
            }
        }
    }
    records.sort_by_key(|r| r.key());
    Ok(records)
}

/// Records whose class belongs to the run's class set, with their class id.
fn experiment_records(cfg: &RunConfig, records: &[PlateRecord]) -> Vec<(PlateRecord, usize)> {
    records
        .iter()
        .filter_map(|r| cfg.class_set().id_of(&r.class_label).map(|c| (r.clone(), c)))
        .collect()
}

pub fn cmd_merge(cfg: &RunConfig) -> Result<usize> {
    let records = load_records(cfg)?;
    let total = records.len();
    let results: Vec<Result<()>> = pool(cfg.jobs)?.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let with_rec = |e: Error| match e {
                    Error::Core(c) => Error::Data(format!("plate {} well {}: {c}", r.plate_id, r.well)),
                    other => other,
                };
                let bf = imageio::read_channel(Path::new(&r.bf_path))?;
                let gfp = imageio::read_channel(Path::new(&r.gfp_path))?;
                let (bf8, gfp8) = match cfg.stretch {
                    Some((lo, hi)) => (bf.stretch(lo, hi).map_err(with_rec)?, gfp.stretch(lo, hi).map_err(with_rec)?),
                    None => (bf.to_u8(), gfp.to_u8()),
                };
                let rgb = merge_channels(&bf8, &gfp8).map_err(|e| with_rec(e.into()))?;
                let rel = image_rel(&image_stem(&r.key(), None), false);
                imageio::write_rgb_png(&cfg.out.join(rel), &rgb)?;
                progress("merge", i + 1, total, &format!("plate{}_{}", r.plate_id, r.well));
                Ok(())
            })
            .collect()
    });
    results.into_iter().collect::<Result<Vec<()>>>()?;
    eprintln!("[merge] wrote {total} composites");
    Ok(total)
}

fn find_mask(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["png", "tif", "tiff"]
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// Per-image mask-import statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskStats {
    pub image: String,
    pub instances: usize,
    pub kept: usize,
    pub too_small: usize,
    pub too_large: usize,
}

pub fn mask_stats_csv(stats: &[MaskStats]) -> String {
    let mut s = String::from("image,instances,kept,too_small,too_large\n");
    let mut t = (0, 0, 0, 0);
    for m in stats {
        let _ = writeln!(s, "{},{},{},{},{}", m.image, m.instances, m.kept, m.too_small, m.too_large);
        t = (t.0 + m.instances, t.1 + m.kept, t.2 + m.too_small, t.3 + m.too_large);
    }
    let _ = writeln!(s, "TOTAL,{},{},{},{}", t.0, t.1, t.2, t.3);
    s
}

pub fn cmd_import_masks(cfg: &RunConfig) -> Result<Vec<MaskStats>> {
    let records = experiment_records(cfg, &load_records(cfg)?);
    let dir = masks_dir(cfg);
    let total = records.len();
    let results: Vec<Result<Option<MaskStats>>> = pool(cfg.jobs)?.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, (r, class_id))| {
                let stem = image_stem(&r.key(), None);
                let Some(path) = find_mask(&dir, &stem) else {
                    return Ok(None);
                };
                let mask = imageio::read_mask(&path)?;
                let meta = ImageMeta::new(mask.width(), mask.height())?.with_well(r.key());
                let imported = import_mask(&mask, *class_id, &meta, &cfg.mask_import)?;
                let rel = image_rel(&stem, false);
                write_file(&label_path(&cfg.out, &rel), write_label_file(&imported.annotations).as_bytes())?;
                progress("import-masks", i + 1, total, &stem);
                Ok(Some(MaskStats {
                    image: stem,
                    instances: imported.instances,
                    kept: imported.annotations.len(),
                    too_small: imported.dropped.too_small,
                    too_large: imported.dropped.too_large,
                }))
            })
            .collect()
    });
    let mut stats = Vec::new();
    let mut missing = Vec::new();
    for ((r, _), res) in records.iter().zip(results) {
        match res? {
            Some(s) => stats.push(s),
            None => missing.push(image_stem(&r.key(), None)),
        }
    }
    let stats_dir = cfg.out.join("stats");
    write_file(&stats_dir.join("mask_import.csv"), mask_stats_csv(&stats).as_bytes())?;
    let mut missing_text = String::new();
    for m in &missing {
        let _ = writeln!(missing_text, "{m}");
    }
    write_file(&stats_dir.join("missing_masks.txt"), missing_text.as_bytes())?;
    let cells: usize = stats.iter().map(|s| s.kept).sum();
    eprintln!("[import-masks] {} images, {cells} cells", stats.len());
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "{} masks missing (listed in {}): {}",
            missing.len(),
            stats_dir.join("missing_masks.txt").display(),
            missing.join(", ")
        )));
    }
    Ok(stats)
}

/// Per-image tiling counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileStats {
    pub image: String,
    pub total: usize,
    pub per_tile: [usize; 4],
    pub straddling: usize,
}

pub fn tile_stats_csv(stats: &[TileStats]) -> String {
    let mut s = String::from("image,total,TL,TR,BL,BR,straddling\n");
    let mut t = [0usize; 6];
    for m in stats {
        let [a, b, c, d] = m.per_tile;
        let _ = writeln!(s, "{},{},{a},{b},{c},{d},{}", m.image, m.total, m.straddling);
        for (acc, v) in t.iter_mut().zip([m.total, a, b, c, d, m.straddling]) {
            *acc += v;
        }
    }
    let _ = writeln!(s, "TOTAL,{},{},{},{},{},{}", t[0], t[1], t[2], t[3], t[4], t[5]);
    s
}

pub fn cmd_tile(cfg: &RunConfig) -> Result<Vec<TileStats>> {
    let records = experiment_records(cfg, &load_records(cfg)?);
    let k = cfg.class_set().len();
    let total = records.len();
    let results: Vec<Result<TileStats>> = pool(cfg.jobs)?.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, (r, _))| {
                let stem = image_stem(&r.key(), None);
                let rel = image_rel(&stem, false);
                let img = imageio::read_rgb(&cfg.out.join(&rel))?;
                let lpath = label_path(&cfg.out, &rel);
                let annos = read_label_file(&read_to_string(&lpath)?, k)
                    .map_err(|e| Error::Data(format!("{}: {e}", lpath.display())))?;
                let meta = ImageMeta::new(img.width(), img.height())?.with_well(r.key());
                let tiled = tile_annotations(&annos, &meta, cfg.border_policy)?;
                let mut per_tile = [0; 4];
                for (spec, list) in &tiled.tiles {
                    let tstem = image_stem(&r.key(), Some(spec.tag));
                    let trel = image_rel(&tstem, true);
                    imageio::write_rgb_png(&cfg.out.join(&trel), &crop(&img, spec)?)?;
                    write_file(&label_path(&cfg.out, &trel), write_label_file(list).as_bytes())?;
                    per_tile[spec.tag.index()] = list.len();
                }
                if cfg.border_policy == BorderPolicy::Drop && tiled.kept() + tiled.straddling != annos.len() {
                    return Err(Error::Validation(format!(
                        "{stem}: {} kept + {} straddling != {} annotations",
                        tiled.kept(),
                        tiled.straddling,
                        annos.len()
                    )));
                }
                progress("tile", i + 1, total, &stem);
                Ok(TileStats {
                    image: stem,
                    total: annos.len(),
                    per_tile,
                    straddling: tiled.straddling,
                })
            })
            .collect()
    });
    let stats = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_file(&cfg.out.join("stats").join("tile_report.csv"), tile_stats_csv(&stats).as_bytes())?;
    let kept: usize = stats.iter().map(|s| s.per_tile.iter().sum::<usize>()).sum();
    let dropped: usize = stats.iter().map(|s| s.straddling).sum();
    eprintln!("[tile] {} images, {kept} tile annotations, {dropped} straddling", stats.len());
    Ok(stats)
}

fn lines_text(lines: &[String]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s
}

/// Wells whose entries appear in more than one split. Empty for every
/// valid plan.
pub fn leakage(lists: &SplitLists) -> Vec<String> {
    let mut splits_of: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
    for (i, part) in [&lists.train, &lists.valid, &lists.test].into_iter().enumerate() {
        for stem in part {
            let well = match stem.rsplit_once('_') {
                Some((head, tag)) if QuadrantTag::parse(tag).is_some() => head,
                _ => stem.as_str(),
            };
            splits_of.entry(well).or_default().insert(i);
        }
    }
    splits_of.into_iter().filter(|(_, s)| s.len() > 1).map(|(w, _)| w.to_string()).collect()
}

/// Writes the bundle for `fold` and returns its split lists (root-relative
/// image paths, prefixed by `path_root` when set).
pub fn cmd_build_fold(cfg: &RunConfig, records: &[PlateRecord], fold: usize) -> Result<(BundlePlan, SplitLists)> {
    let mut params = cfg.split;
    params.fold_index = fold;
    let plan = plan_bundle(records, &cfg.experiment, &params)?;
    let q = cfg.experiment.quadrants;
    let stems = plan.lists();
    let leaks = leakage(&stems);
    if !leaks.is_empty() {
        return Err(Error::Validation(format!("wells in more than one split: {}", leaks.join(", "))));
    }
    for stem in stems.train.iter().chain(&stems.valid).chain(&stems.test) {
        let rel = image_rel(stem, q);
        for p in [cfg.out.join(&rel), label_path(&cfg.out, &rel)] {
            if !p.is_file() {
                return Err(Error::Data(format!("bundle references missing file {}", p.display())));
            }
        }
    }
    let to_paths = |v: &[String]| v.iter().map(|s| with_root(cfg, &image_rel(s, q))).collect::<Vec<_>>();
    let lists = SplitLists {
        train: to_paths(&stems.train),
        valid: to_paths(&stems.valid),
        test: to_paths(&stems.test),
    };
    let dir = bundle_dir(cfg, fold);
    let rel_dir = format!("bundles/{}/fold{fold}", cfg.experiment.name);
    write_file(&dir.join("obj.names"), cfg.class_set().to_names_text().as_bytes())?;
    write_file(&dir.join("train.txt"), lines_text(&lists.train).as_bytes())?;
    write_file(&dir.join("valid.txt"), lines_text(&lists.valid).as_bytes())?;
    write_file(&dir.join("test.txt"), lines_text(&lists.test).as_bytes())?;
    let data = format!(
        "classes={}\ntrain={}\nvalid={}\nnames={}\n",
        cfg.class_set().len(),
        with_root(cfg, &format!("{rel_dir}/train.txt")),
        with_root(cfg, &format!("{rel_dir}/valid.txt")),
        with_root(cfg, &format!("{rel_dir}/obj.names")),
    );
    write_file(&dir.join("obj.data"), data.as_bytes())?;
    eprintln!(
        "[build] {} fold {fold}: train {} valid {} test {}",
        cfg.experiment.name,
        lists.train.len(),
        lists.valid.len(),
        lists.test.len()
    );
    Ok((plan, lists))
}

pub fn cmd_build(cfg: &RunConfig) -> Result<SplitLists> {
    let records = load_records(cfg)?;
    Ok(cmd_build_fold(cfg, &records, cfg.split.fold_index)?.1)
}

/// Outcome of one evaluation: the report plus bookkeeping that is not part
/// of the metrics.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    /// Detection entries for train/valid images of this bundle; not scored.
    pub ignored_entries: usize,
}

fn gt_images(cfg: &RunConfig, plan: &BundlePlan) -> Result<Vec<GtImage>> {
    let k = cfg.class_set().len();
    let q = cfg.experiment.quadrants;
    let mut items = Vec::new();
    for r in &plan.test {
        let label = cfg.class_set().id_of(&r.class_label);
        let tags: Vec<Option<QuadrantTag>> = if q {
            QuadrantTag::ALL.iter().copied().map(Some).collect()
        } else {
            vec![None]
        };
        for tag in tags {
            items.push((r.key(), tag, label));
        }
    }
    items
        .into_par_iter()
        .map(|(key, tag, label)| {
            let rel = image_rel(&image_stem(&key, tag), q);
            let (w, h) = imageio::dimensions(&cfg.out.join(&rel))?;
            let lpath = label_path(&cfg.out, &rel);
            let annotations = read_label_file(&read_to_string(&lpath)?, k)
                .map_err(|e| Error::Data(format!("{}: {e}", lpath.display())))?;
            let mut meta = ImageMeta::new(w, h)?.with_well(key);
            if let Some(t) = tag {
                meta = meta.with_tile(t);
            }
            Ok(GtImage {
                image: rel,
                meta,
                label,
                annotations,
            })
        })
        .collect()
}

fn write_overlays(cfg: &RunConfig, dir: &Path, gts: &[GtImage], dets: &DetectionFile, fold: usize) -> Result<()> {
    if cfg.overlay_count == 0 || gts.is_empty() {
        return Ok(());
    }
    let mut order: Vec<usize> = (0..gts.len()).collect();
    order.shuffle(&mut rng_for(cfg.split.seed, stream::OVERLAY, fold as u64));
    order.truncate(cfg.overlay_count);
    order.sort_unstable();
    let by_name: BTreeMap<&str, _> = dets.entries.iter().map(|e| (e.image.as_str(), &e.detections)).collect();
    order
        .par_iter()
        .map(|&i| {
            let g = &gts[i];
            let base = imageio::read_rgb(&cfg.out.join(&g.image))?;
            let d = by_name.get(g.image.as_str()).map_or(&[][..], |v| v.as_slice());
            let img = overlay::render(&base, &g.meta, d);
            let name = Path::new(&g.image).file_name().expect("image file name");
            imageio::write_rgb_png(&dir.join("overlays").join(name), &img)
        })
        .collect()
}

pub fn eval_fold(cfg: &RunConfig, records: &[PlateRecord], fold: usize) -> Result<EvalOutcome> {
    let mut params = cfg.split;
    params.fold_index = fold;
    let plan = plan_bundle(records, &cfg.experiment, &params)?;
    let k = cfg.class_set().len();
    let det_path = detections_path(cfg, fold);
    let raw = read_detections(&det_path, k)?;
    let q = cfg.experiment.quadrants;
    let stems = plan.lists();
    let not_scored: BTreeSet<String> = stems.train.iter().chain(&stems.valid).map(|s| image_rel(s, q)).collect();
    let mut dets = DetectionFile::default();
    let mut ignored = 0;
    for mut e in raw.entries {
        e.image = normalize_image_path(&e.image, cfg.path_root.as_deref());
        if not_scored.contains(&e.image) {
            ignored += 1;
        } else {
            dets.entries.push(e);
        }
    }
    let gts = gt_images(cfg, &plan)?;
    let eval_cfg = EvalConfig {
        iou_thresh: cfg.iou_thresh,
    };
    let run = plan_run(cfg.class_set(), &gts, &dets)?;
    let tally = run
        .items
        .par_iter()
        .map(|&(i, g, d)| tally_image(i, g, d, k, eval_cfg.iou_thresh))
        .reduce(|| Tally::new(k), Tally::merge);
    let votes = plate_votes(cfg.class_set(), &gts, &dets);
    let mut report = EvalReport::from_tally(
        cfg.class_set(),
        &eval_cfg,
        run.items.len(),
        tally,
        votes,
        run.missing_images,
        run.unexpected_images,
    );
    report.training = cfg.training.clone();
    if ignored > 0 {
        report
            .warnings
            .push(format!("{ignored} detection entries belong to train/valid images and were not scored"));
    }
    let dir = eval_dir(cfg, fold);
    write_report(&dir, &report, &(fold + 1).to_string())?;
    write_overlays(cfg, &dir, &gts, &dets, fold)?;
    eprintln!(
        "[eval] {} fold {fold}: {} images, mAP {}",
        cfg.experiment.name,
        report.images,
        report.map.map_or("n/a".into(), |m| format!("{m:.3}"))
    );
    Ok(EvalOutcome {
        report,
        ignored_entries: ignored,
    })
}

fn check_missing(cfg: &RunConfig, report: &EvalReport) -> Result<()> {
    if !report.missing_images.is_empty() && !cfg.allow_missing {
        return Err(Error::Validation(format!(
            "{} test images have no detections entry: {}",
            report.missing_images.len(),
            report.missing_images.join(", ")
        )));
    }
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalOutcome> {
    let records = load_records(cfg)?;
    let out = pool(cfg.jobs)?.install(|| eval_fold(cfg, &records, cfg.split.fold_index))?;
    check_missing(cfg, &out.report)?;
    Ok(out)
}

/// Per-fold rows plus their average.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalSummary {
    pub rows: Vec<(String, FoldRow)>,
    pub average: Option<FoldRow>,
}

pub fn cmd_crossval(cfg: &RunConfig) -> Result<CrossvalSummary> {
    let records = load_records(cfg)?;
    let workers = pool(cfg.jobs)?;
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for fold in 0..cfg.split.k {
        cmd_build_fold(cfg, &records, fold)?;
        let out = workers.install(|| eval_fold(cfg, &records, fold))?;
        missing.extend(out.report.missing_images.iter().cloned());
        match FoldRow::from_report(&out.report) {
            Some(r) => rows.push(((fold + 1).to_string(), r)),
            None => eprintln!("[crossval] fold {fold} has no matched pairs; excluded from the average"),
        }
    }
    let dir = cfg.out.join("crossval").join(&cfg.experiment.name);
    write_file(&dir.join("table4.csv"), fold_table(&rows).as_bytes())?;
    let plain: Vec<FoldRow> = rows.iter().map(|(_, r)| *r).collect();
    let average = cellquad_core::eval::average_rows(&plain);
    let json = serde_json::json!({
        "experiment": cfg.experiment.name,
        "folds": rows.iter().map(|(n, r)| serde_json::json!({"fold": n, "metrics": r})).collect::<Vec<_>>(),
        "average": average,
    });
    let mut text = serde_json::to_string_pretty(&json).expect("json");
    text.push('\n');
    write_file(&dir.join("crossval.json"), text.as_bytes())?;
    if !missing.is_empty() && !cfg.allow_missing {
        return Err(Error::Validation(format!("{} test images have no detections entry", missing.len())));
    }
    Ok(CrossvalSummary { rows, average })
}

/// Well name for the `i`-th synthetic well of a plate (16 x 24 layout).
pub fn synth_well_name(i: usize) -> String {
    let row = (b'A' + (i / 24 % 16) as u8) as char;
    format!("{row}{}", i % 24 + 1)
}

/// FNV-1a of an image path; the mock detector's per-image stream index.
pub fn image_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Generates `wells_per_class` plates per class: 16-bit channels, instance
/// masks and a manifest under the output root. Returns the planted cell
/// count.
pub fn cmd_synth(cfg: &RunConfig) -> Result<usize> {
    let s = &cfg.synth;
    let classes = cfg.class_set();
    let mut jobs = Vec::new();
    for (c, name) in classes.names().iter().enumerate() {
        for i in 0..s.wells_per_class {
            jobs.push((c, name.clone(), c as u32 + 1, synth_well_name(i)));
        }
    }
    let total = jobs.len();
    let seed = cfg.split.seed;
    let results: Vec<Result<(PlateRecord, usize)>> = pool(cfg.jobs)?.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(n, (c, name, plate, well))| {
                let synth = SynthConfig {
                    seed: derive_seed(seed, stream::SYNTH, n as u64),
                    width: s.width,
                    height: s.height,
                    cell_count: s.cells,
                    radius_px: s.radius_px,
                    max_overlap: s.max_overlap,
                    class_id: *c,
                    pattern: GfpPattern::for_class_name(name),
                    sensor_noise: s.sensor_noise,
                    ..SynthConfig::default()
                };
                let p = gen_plate(&synth)?;
                let stem = format!("plate{plate}_{well}");
                let bf = format!("raw/{stem}_bf.png");
                let gfp = format!("raw/{stem}_gfp.png");
                imageio::write_gray16_png(&cfg.out.join(&bf), &p.bf)?;
                imageio::write_gray16_png(&cfg.out.join(&gfp), &p.gfp)?;
                imageio::write_mask_png(&cfg.out.join("masks").join(format!("{stem}.png")), &p.mask)?;
                progress("synth", n + 1, total, &stem);
                Ok((PlateRecord::new(*plate, well.clone(), name.clone(), bf, gfp)?, p.cells.len()))
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut cells = 0;
    for r in results {
        let (rec, n) = r?;
        records.push(rec);
        cells += n;
    }
    write_file(&cfg.out.join("manifest.csv"), manifest_text(&records)?.as_bytes())?;
    eprintln!("[synth] {total} plates, {cells} planted cells");
    Ok(cells)
}

/// Runs the mock detector over every labelled image of the experiment and
/// writes one detections file.
pub fn cmd_mock_detect(cfg: &RunConfig) -> Result<usize> {
    let records = experiment_records(cfg, &load_records(cfg)?);
    let k = cfg.class_set().len();
    let q = cfg.experiment.quadrants;
    let mut names = Vec::new();
    for (r, _) in &records {
        if q {
            for t in QuadrantTag::ALL {
                names.push((r.key(), Some(t)));
            }
        } else {
            names.push((r.key(), None));
        }
    }
    let entries: Vec<Result<cellquad_core::eval::DetectionEntry>> = pool(cfg.jobs)?.install(|| {
        names
            .par_iter()
            .map(|(key, tag)| {
                let rel = image_rel(&image_stem(key, *tag), q);
                let (w, h) = imageio::dimensions(&cfg.out.join(&rel))?;
                let lpath = label_path(&cfg.out, &rel);
                let annos = read_label_file(&read_to_string(&lpath)?, k)
                    .map_err(|e| Error::Data(format!("{}: {e}", lpath.display())))?;
                let meta = ImageMeta::new(w, h)?;
                let detections = mock_detect(&annos, &cfg.noise, &meta, image_hash(&rel))?;
                Ok(cellquad_core::eval::DetectionEntry {
                    image: with_root(cfg, &rel),
                    width: w,
                    height: h,
                    detections,
                })
            })
            .collect()
    });
    let file = DetectionFile {
        entries: entries.into_iter().collect::<Result<_>>()?,
    };
    let path = detections_path(cfg, cfg.split.fold_index);
    write_detections(&file, &path)?;
    let n: usize = file.entries.iter().map(|e| e.detections.len()).sum();
    eprintln!("[synth] mock detector: {} images, {n} detections -> {}", file.entries.len(), path.display());
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_normalization() {
        assert_eq!(normalize_image_path("./images/a.png", None), "images/a.png");
        assert_eq!(normalize_image_path("/data/run/images/a.png", Some("/data/run")), "images/a.png");
        assert_eq!(normalize_image_path("/data/run/images/a.png", Some("/data/run/")), "images/a.png");
        assert_eq!(normalize_image_path("images/a.png", Some("/elsewhere")), "images/a.png");
    }

    #[test]
    fn well_names() {
        assert_eq!(synth_well_name(0), "A1");
        assert_eq!(synth_well_name(23), "A24");
        assert_eq!(synth_well_name(24), "B1");
        assert_eq!(synth_well_name(383), "P24");
    }

    #[test]
    fn stats_totals_are_sums() {
        let s = [
            MaskStats {
                image: "a".into(),
                instances: 5,
                kept: 4,
                too_small: 1,
                too_large: 0,
            },
            MaskStats {
                image: "b".into(),
                instances: 3,
                kept: 2,
                too_small: 0,
                too_large: 1,
            },
        ];
        assert!(mask_stats_csv(&s).ends_with("TOTAL,8,6,1,1\n"));
    }
}
