//! Run configuration: one flat TOML key/value file per experiment, with
//! command-line flags taking precedence.
//!
//! Relative paths inside the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use cellquad_core::eval::TrainingSummary;
use cellquad_core::maskimport::MaskImportParams;
use cellquad_core::split::{Experiment, SplitParams};
use cellquad_core::synth::{ConfidenceModel, NoiseConfig};
use cellquad_core::tiler::BorderPolicy;
use cellquad_core::ClassSet;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Keys accepted in a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub manifest: Option<PathBuf>,
    /// Preset `exp1`..`exp6`, or any name when `classes` is given.
    pub experiment: Option<String>,
    /// Ordered class names; overrides the preset's classes.
    pub classes: Option<Vec<String>>,
    pub quadrants: Option<bool>,
    pub folds: Option<usize>,
    pub fold: Option<usize>,
    pub seed: Option<u64>,
    pub valid_frac: Option<f64>,
    pub iou_thresh: Option<f64>,
    pub margin_frac: Option<f64>,
    pub min_area_px: Option<u64>,
    pub max_area_frac: Option<f64>,
    pub stretch: Option<bool>,
    pub stretch_low: Option<f64>,
    pub stretch_high: Option<f64>,
    /// `drop` or `clip`.
    pub border_policy: Option<String>,
    pub out: Option<PathBuf>,
    pub masks_dir: Option<PathBuf>,
    /// Detection file; `{fold}` is replaced by the fold index.
    pub detections: Option<String>,
    pub path_root: Option<String>,
    pub jobs: Option<usize>,
    pub overlay_count: Option<usize>,
    pub allow_missing: Option<bool>,
    pub training_time: Option<String>,
    pub training_map: Option<String>,
    pub training_avg_loss: Option<String>,
    pub synth_wells_per_class: Option<usize>,
    pub synth_width: Option<u32>,
    pub synth_height: Option<u32>,
    pub synth_cells_min: Option<usize>,
    pub synth_cells_max: Option<usize>,
    pub synth_radius_min: Option<f64>,
    pub synth_radius_max: Option<f64>,
    pub synth_max_overlap: Option<f64>,
    pub synth_sensor_noise: Option<f64>,
    pub noise_drop: Option<f64>,
    pub noise_fp_rate: Option<f64>,
    pub noise_jitter_px: Option<f64>,
    /// Rows separated by `;`, entries by `,`. Defaults to the identity.
    pub noise_confusion: Option<String>,
    pub noise_correct_confidence: Option<f64>,
    pub noise_error_confidence: Option<f64>,
    pub noise_confidence_spread: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(v) = p {
                if v.is_relative() {
                    *v = base.join(&*v);
                }
            }
        };
        rebase(&mut cfg.manifest);
        rebase(&mut cfg.out);
        rebase(&mut cfg.masks_dir);
        if let Some(d) = &mut cfg.detections {
            if Path::new(d.as_str()).is_relative() {
                *d = base.join(d.as_str()).to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub experiment: Option<String>,
    pub fold: Option<usize>,
    pub detections: Option<String>,
    pub clip: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub wells_per_class: usize,
    pub width: u32,
    pub height: u32,
    pub cells: (usize, usize),
    pub radius_px: (f64, f64),
    pub max_overlap: f64,
    pub sensor_noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub experiment: Experiment,
    pub split: SplitParams,
    pub iou_thresh: f64,
    pub mask_import: MaskImportParams,
    pub stretch: Option<(f64, f64)>,
    pub border_policy: BorderPolicy,
    pub out: PathBuf,
    pub masks_dir: Option<PathBuf>,
    pub detections: Option<String>,
    pub path_root: Option<String>,
    pub jobs: usize,
    pub overlay_count: usize,
    pub allow_missing: bool,
    pub training: Option<TrainingSummary>,
    pub synth: SynthSettings,
    pub noise: NoiseConfig,
}

impl RunConfig {
    pub fn class_set(&self) -> &ClassSet {
        &self.experiment.classes
    }

    pub fn detections_path(&self, fold: usize) -> Option<PathBuf> {
        self.detections
            .as_ref()
            .map(|d| PathBuf::from(d.replace("{fold}", &fold.to_string())))
    }

    pub fn resolve(file: ConfigFile, o: &Overrides) -> Result<Self> {
        let bad = |m: String| Err(Error::Config(m));
        let exp_name = o.experiment.clone().or(file.experiment.clone()).unwrap_or_else(|| "exp6".into());
        let mut experiment = match (Experiment::preset(&exp_name), &file.classes) {
            (_, Some(classes)) => Experiment {
                name: exp_name.clone(),
                classes: ClassSet::new(classes.iter().cloned())?,
                quadrants: false,
            },
            (Some(p), None) => p,
            (None, None) => return bad(format!("experiment {exp_name:?} is not a preset (exp1..exp6) and no classes were given")),
        };
        if file.classes.is_some() {
            experiment.quadrants = Experiment::preset(&exp_name).map(|p| p.quadrants).unwrap_or(false);
        }
        if let Some(q) = file.quadrants {
            experiment.quadrants = q;
        }

        let split = SplitParams {
            k: file.folds.unwrap_or(5),
            fold_index: o.fold.or(file.fold).unwrap_or(0),
            valid_frac: file.valid_frac.unwrap_or(0.1),
            seed: o.seed.or(file.seed).unwrap_or(0),
        };
        if split.k < 2 {
            return bad(format!("folds must be >= 2, got {}", split.k));
        }
        if split.fold_index >= split.k {
            return bad(format!("fold {} out of range for {} folds", split.fold_index, split.k));
        }
        if !(split.valid_frac > 0.0 && split.valid_frac < 1.0) {
            return bad(format!("valid_frac must lie in (0, 1), got {}", split.valid_frac));
        }
        let iou_thresh = file.iou_thresh.unwrap_or(cellquad_core::eval::DEFAULT_IOU_THRESH);
        if !(iou_thresh > 0.0 && iou_thresh <= 1.0) {
            return bad(format!("iou_thresh must lie in (0, 1], got {iou_thresh}"));
        }
        let mask_import = MaskImportParams {
            margin_frac: file.margin_frac.unwrap_or(cellquad_core::maskimport::DEFAULT_MARGIN_FRAC),
            min_area_px: file.min_area_px.unwrap_or(cellquad_core::maskimport::DEFAULT_MIN_AREA_PX),
            max_area_frac: file.max_area_frac.unwrap_or(cellquad_core::maskimport::DEFAULT_MAX_AREA_FRAC),
        };
        if mask_import.margin_frac < 0.0 || mask_import.max_area_frac < 0.0 {
            return bad("margin_frac and max_area_frac must be >= 0".into());
        }
        let stretch = if file.stretch.unwrap_or(true) {
            let (lo, hi) = (file.stretch_low.unwrap_or(1.0), file.stretch_high.unwrap_or(99.0));
            if !(0.0 <= lo && lo < hi && hi <= 100.0) {
                return bad(format!("stretch percentiles must satisfy 0 <= low < high <= 100, got ({lo}, {hi})"));
            }
            Some((lo, hi))
        } else {
            None
        };
        let border_policy = if o.clip {
            BorderPolicy::Clip
        } else {
            match file.border_policy.as_deref() {
                None | Some("drop") => BorderPolicy::Drop,
                Some("clip") => BorderPolicy::Clip,
                Some(other) => return bad(format!("border_policy must be `drop` or `clip`, got {other:?}")),
            }
        };
        let training = (file.training_time.is_some() || file.training_map.is_some() || file.training_avg_loss.is_some())
            .then(|| TrainingSummary {
                time: file.training_time.clone(),
                map: file.training_map.clone(),
                avg_loss: file.training_avg_loss.clone(),
            });

        let synth = SynthSettings {
            wells_per_class: file.synth_wells_per_class.unwrap_or(10),
            width: file.synth_width.unwrap_or(1344),
            height: file.synth_height.unwrap_or(1024),
            cells: (file.synth_cells_min.unwrap_or(80), file.synth_cells_max.unwrap_or(120)),
            radius_px: (file.synth_radius_min.unwrap_or(12.0), file.synth_radius_max.unwrap_or(22.0)),
            max_overlap: file.synth_max_overlap.unwrap_or(0.0),
            sensor_noise: file.synth_sensor_noise.unwrap_or(40.0),
        };
        let k = experiment.classes.len();
        let class_confusion = match &file.noise_confusion {
            Some(text) => parse_matrix(text, k)?,
            None => NoiseConfig::perfect(k).class_confusion,
        };
        let noise = NoiseConfig {
            jitter_sigma_px: file.noise_jitter_px.unwrap_or(0.0),
            drop_prob: file.noise_drop.unwrap_or(0.0),
            false_positive_rate: file.noise_fp_rate.unwrap_or(0.0),
            class_confusion,
            confidence: ConfidenceModel {
                correct_mean: file.noise_correct_confidence.unwrap_or(1.0),
                error_mean: file.noise_error_confidence.unwrap_or(1.0),
                spread: file.noise_confidence_spread.unwrap_or(0.0),
            },
            fp_size_px: (10.0, 40.0),
            seed: split.seed,
        };
        noise.validate()?;

        Ok(Self {
            manifest: o.manifest.clone().or(file.manifest),
            experiment,
            split,
            iou_thresh,
            mask_import,
            stretch,
            border_policy,
            out: o.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            masks_dir: file.masks_dir,
            detections: o.detections.clone().or(file.detections),
            path_root: file.path_root,
            jobs: o.jobs.or(file.jobs).unwrap_or(0),
            overlay_count: file.overlay_count.unwrap_or(8),
            allow_missing: file.allow_missing.unwrap_or(false),
            training,
            synth,
            noise,
        })
    }

    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let file = match path {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Self::resolve(file, o)
    }
}

/// `"1,0;0.1,0.9"` → `[[1, 0], [0.1, 0.9]]`, checked to be `k x k`.
pub fn parse_matrix(text: &str, k: usize) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("noise_confusion: bad number {v:?}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
        return Err(Error::Config(format!("noise_confusion must be {k}x{k}")));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_preset() {
        let c = RunConfig::resolve(ConfigFile::default(), &Overrides::default()).unwrap();
        assert_eq!(c.experiment.name, "exp6");
        assert!(c.experiment.quadrants);
        assert_eq!(c.split.k, 5);
        assert_eq!(c.iou_thresh, 0.5);
        assert_eq!(c.stretch, Some((1.0, 99.0)));
        assert_eq!(c.mask_import, MaskImportParams::default());
        assert_eq!(c.border_policy, BorderPolicy::Drop);
    }

    #[test]
    fn flags_override_file() {
        let file = ConfigFile::parse("experiment = \"exp1\"\nseed = 5\nfold = 1\nout = \"a\"\n").unwrap();
        let o = Overrides {
            seed: Some(9),
            out: Some("b".into()),
            clip: true,
            ..Default::default()
        };
        let c = RunConfig::resolve(file, &o).unwrap();
        assert_eq!(c.split.seed, 9);
        assert_eq!(c.split.fold_index, 1);
        assert_eq!(c.out, PathBuf::from("b"));
        assert_eq!(c.border_policy, BorderPolicy::Clip);
        assert_eq!(c.class_set().names(), &["Mitochondria"]);
    }

    #[test]
    fn custom_classes() {
        let file = ConfigFile::parse("experiment = \"mine\"\nclasses = [\"A\", \"B\"]\nquadrants = true\n").unwrap();
        let c = RunConfig::resolve(file, &Overrides::default()).unwrap();
        assert_eq!(c.class_set().len(), 2);
        assert!(c.experiment.quadrants);
        let file = ConfigFile::parse("experiment = \"mine\"\n").unwrap();
        assert_eq!(RunConfig::resolve(file, &Overrides::default()).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ConfigFile::parse("bogus = 1\n").is_err());
        let file = ConfigFile::parse("fold = 7\n").unwrap();
        assert!(RunConfig::resolve(file, &Overrides::default()).is_err());
        let file = ConfigFile::parse("border_policy = \"wrap\"\n").unwrap();
        assert!(RunConfig::resolve(file, &Overrides::default()).is_err());
    }

    #[test]
    fn confusion_matrix_parsing() {
        let m = parse_matrix("1,0;0.25,0.75", 2).unwrap();
        assert_eq!(m, vec![vec![1.0, 0.0], vec![0.25, 0.75]]);
        assert!(parse_matrix("1,0", 2).is_err());
        let file = ConfigFile::parse("experiment = \"exp2\"\nnoise_confusion = \"0.5,0.4;0,1\"\n").unwrap();
        assert!(RunConfig::resolve(file, &Overrides::default()).is_err());
    }

    #[test]
    fn detection_template() {
        let file = ConfigFile::parse("detections = \"dets/fold{fold}.json\"\n").unwrap();
        let c = RunConfig::resolve(file, &Overrides::default()).unwrap();
        assert_eq!(c.detections_path(3), Some(PathBuf::from("dets/fold3.json")));
    }
}
