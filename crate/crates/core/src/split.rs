//! Stratified k-fold assignment, the validation carve-out and experiment
//! bundle planning. The splitting unit is the well: all tiles of a well
//! always share a split.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::classes::ClassSet;
use crate::error::{Error, Result};
use crate::geom::{QuadrantTag, WellKey};
use crate::record::PlateRecord;
use crate::rng::{rng_for, stream};

/// Fold index of every well.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub map: BTreeMap<WellKey, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, key: &WellKey) -> Option<usize> {
        self.map.get(key).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = alloc::vec![0; self.k];
        for &f in self.map.values() {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Records grouped by class label, each group sorted by well key. Rejects
/// duplicate wells.
fn group_by_class(records: &[PlateRecord]) -> Result<BTreeMap<&str, Vec<&PlateRecord>>> {
    let mut sorted: Vec<&PlateRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (a.plate_id, &a.well).cmp(&(b.plate_id, &b.well)));
    for pair in sorted.windows(2) {
        if pair[0].plate_id == pair[1].plate_id && pair[0].well == pair[1].well {
            return Err(Error::InvalidConfig(format!(
                "duplicate well: plate {} well {}",
                pair[0].plate_id, pair[0].well
            )));
        }
    }
    let mut groups: BTreeMap<&str, Vec<&PlateRecord>> = BTreeMap::new();
    for r in sorted {
        groups.entry(r.class_label.as_str()).or_default().push(r);
    }
    Ok(groups)
}

/// Stratified assignment: within each class (in name order) the wells are
/// shuffled and dealt round-robin, continuing the deal where the previous
/// class stopped. Per-class fold sizes differ by at most one. The result
/// does not depend on the input order.
pub fn make_folds(records: &[PlateRecord], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidFoldCount(k));
    }
    let groups = group_by_class(records)?;
    if let Some((class, members)) = groups.iter().find(|(_, m)| m.len() < k) {
        return Err(Error::ClassTooSmall {
            class: String::from(*class),
            count: members.len(),
            k,
        });
    }
    let mut rng = rng_for(seed, stream::FOLDS, k as u64);
    let mut map = BTreeMap::new();
    let mut next = 0usize;
    for members in groups.values() {
        let mut members = members.clone();
        members.shuffle(&mut rng);
        for r in members {
            map.insert(r.key(), next % k);
            next += 1;
        }
    }
    Ok(FoldAssignment { k, map })
}

/// `ceil(frac * n)` without float noise pushing exact products up a step.
pub fn valid_count(n: usize, frac: f64) -> usize {
    libm::ceil(frac * n as f64 - 1e-9).max(0.0) as usize
}

/// Moves `ceil(frac * n)` records of every class into the validation set.
/// Both outputs are sorted by well key.
pub fn split_train_valid(
    records: &[PlateRecord],
    frac: f64,
    seed: u64,
) -> Result<(Vec<PlateRecord>, Vec<PlateRecord>)> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(Error::InvalidFraction(frac));
    }
    let groups = group_by_class(records)?;
    let mut rng = rng_for(seed, stream::VALID, 0);
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for (class, members) in groups {
        let nv = valid_count(members.len(), frac);
        if nv >= members.len() {
            return Err(Error::EmptyClassAfterSplit {
                class: String::from(class),
            });
        }
        let mut members = members;
        members.shuffle(&mut rng);
        valid.extend(members[..nv].iter().map(|r| (*r).clone()));
        train.extend(members[nv..].iter().map(|r| (*r).clone()));
    }
    let by_key = |a: &PlateRecord, b: &PlateRecord| (a.plate_id, &a.well).cmp(&(b.plate_id, &b.well));
    train.sort_by(by_key);
    valid.sort_by(by_key);
    Ok((train, valid))
}

/// One training configuration: which classes, and full frames or quadrants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Experiment {
    pub name: String,
    pub classes: ClassSet,
    pub quadrants: bool,
}

impl Experiment {
    /// The six preset configurations: `exp1`..`exp3` use full
    /// frames with 1, 2 and 4 classes; `exp4`..`exp6` repeat them on quadrants.
    pub fn preset(name: &str) -> Option<Self> {
        let n: usize = name.strip_prefix("exp")?.parse().ok()?;
        if !(1..=6).contains(&n) {
            return None;
        }
        let classes: &[&str] = match (n - 1) % 3 {
            0 => &["Mitochondria"],
            1 => &["ER", "Mitochondria"],
            _ => &["ER", "Cytosol", "Mitochondria", "Nucleus"],
        };
        Some(Self {
            name: String::from(name),
            classes: ClassSet::new(classes.iter().copied()).ok()?,
            quadrants: n > 3,
        })
    }
}

/// File stem shared by composites, tiles and label files:
/// `plate{P}_{WELL}` or `plate{P}_{WELL}_{TILE}`.
pub fn image_stem(key: &WellKey, tile: Option<QuadrantTag>) -> String {
    match tile {
        Some(t) => format!("plate{}_{}_{}", key.plate_id, key.well, t),
        None => format!("plate{}_{}", key.plate_id, key.well),
    }
}

/// Image stems a well contributes to a split list.
pub fn well_entries(key: &WellKey, quadrants: bool) -> Vec<String> {
    if quadrants {
        QuadrantTag::ALL.iter().map(|&t| image_stem(key, Some(t))).collect()
    } else {
        alloc::vec![image_stem(key, None)]
    }
}

/// Records of one fold of one experiment, split three ways.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePlan {
    pub experiment: Experiment,
    pub fold_index: usize,
    pub train: Vec<PlateRecord>,
    pub valid: Vec<PlateRecord>,
    pub test: Vec<PlateRecord>,
}

/// Image stems per split.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitLists {
    pub train: Vec<String>,
    pub valid: Vec<String>,
    pub test: Vec<String>,
}

impl BundlePlan {
    pub fn lists(&self) -> SplitLists {
        let q = self.experiment.quadrants;
        let entries = |rs: &[PlateRecord]| rs.iter().flat_map(|r| well_entries(&r.key(), q)).collect();
        SplitLists {
            train: entries(&self.train),
            valid: entries(&self.valid),
            test: entries(&self.test),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    pub k: usize,
    pub fold_index: usize,
    pub valid_frac: f64,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            k: 5,
            fold_index: 0,
            valid_frac: 0.1,
            seed: 0,
        }
    }
}

/// Test = the chosen fold, valid = `valid_frac` of the remaining wells per
/// class, train = the rest.
pub fn plan_bundle(records: &[PlateRecord], experiment: &Experiment, params: &SplitParams) -> Result<BundlePlan> {
    if params.fold_index >= params.k {
        return Err(Error::FoldIndexOutOfRange {
            index: params.fold_index,
            k: params.k,
        });
    }
    for name in experiment.classes.names() {
        if !records.iter().any(|r| &r.class_label == name) {
            return Err(Error::UnknownClass(name.clone()));
        }
    }
    let selected: Vec<PlateRecord> = records
        .iter()
        .filter(|r| experiment.classes.id_of(&r.class_label).is_some())
        .cloned()
        .collect();
    let folds = make_folds(&selected, params.k, params.seed)?;
    let (mut test, mut rest) = (Vec::new(), Vec::new());
    for r in selected {
        let fold = folds.fold_of(&r.key()).ok_or_else(|| Error::UnassignedRecord {
            plate: r.plate_id,
            well: r.well.clone(),
        })?;
        if fold == params.fold_index {
            test.push(r);
        } else {
            rest.push(r);
        }
    }
    test.sort_by(|a, b| (a.plate_id, &a.well).cmp(&(b.plate_id, &b.well)));
    let valid_seed = crate::rng::derive_seed(params.seed, stream::VALID, params.fold_index as u64);
    let (train, valid) = split_train_valid(&rest, params.valid_frac, valid_seed)?;
    Ok(BundlePlan {
        experiment: experiment.clone(),
        fold_index: params.fold_index,
        train,
        valid,
        test,
    })
}
