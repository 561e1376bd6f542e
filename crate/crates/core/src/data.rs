//! Records, manifests, fold assignment and feature vectors.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hash::id_hash;
use crate::{Error, Result};

/// Largest number of folds a manifest can carry (fold ids are 0..=9).
pub const MAX_FOLDS: usize = 10;

/// Binary class used for voting and evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn is_positive(self) -> bool {
        matches!(self, Label::Positive)
    }

    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

/// Finding tag carried by a record. Pneumothorax is the positive class;
/// the two other tags are both negatives, but only `NoFinding` records are
/// admitted into the semi-automated population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finding {
    Pneumothorax,
    NoFinding,
    Other,
}

impl Finding {
    pub fn label(self) -> Label {
        Label::from_bool(matches!(self, Finding::Pneumothorax))
    }

    /// Manifest CSV spelling.
    pub fn as_str(self) -> &'static str {
        match self {
            Finding::Pneumothorax => "pneumothorax",
            Finding::NoFinding => "normal",
            Finding::Other => "negative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pneumothorax" => Some(Finding::Pneumothorax),
            "normal" => Some(Finding::NoFinding),
            "negative" => Some(Finding::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "MIMIC_CXR")]
    MimicCxr,
    #[serde(rename = "CHEXPERT")]
    Chexpert,
    #[serde(rename = "CHESTXRAY14")]
    ChestXray14,
    #[serde(rename = "SYNTHETIC")]
    Synthetic,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::MimicCxr,
        Source::Chexpert,
        Source::ChestXray14,
        Source::Synthetic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::MimicCxr => "MIMIC_CXR",
            Source::Chexpert => "CHEXPERT",
            Source::ChestXray14 => "CHESTXRAY14",
            Source::Synthetic => "SYNTHETIC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Source::ALL.into_iter().find(|src| src.as_str() == s)
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// One labeled image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: String,
    pub finding: Finding,
    pub source: Source,
    pub fold: Option<u8>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, path: impl Into<String>, finding: Finding, source: Source) -> Self {
        Self {
            id: id.into(),
            path: path.into(),
            finding,
            source,
            fold: None,
        }
    }

    pub fn label(&self) -> Label {
        self.finding.label()
    }
}

/// Which archive population a search runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DatasetMode {
    /// Pneumothorax vs. normal (no finding) only.
    SemiAutomated,
    /// Pneumothorax vs. everything else.
    FullyAutomated,
}

impl DatasetMode {
    pub fn admits(self, finding: Finding) -> bool {
        match self {
            DatasetMode::SemiAutomated => finding != Finding::Other,
            DatasetMode::FullyAutomated => true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub positive: usize,
    pub negative: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.positive + self.negative
    }

    fn add(&mut self, label: Label) {
        match label {
            Label::Positive => self.positive += 1,
            Label::Negative => self.negative += 1,
        }
    }
}

/// Per-class tallies, overall and per source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCounts {
    pub total: ClassCounts,
    pub by_source: [ClassCounts; 4],
}

impl ManifestCounts {
    pub fn tally<'a>(records: impl IntoIterator<Item = &'a ImageRecord>) -> Self {
        let mut counts = ManifestCounts::default();
        for r in records {
            counts.total.add(r.label());
            counts.by_source[r.source.index()].add(r.label());
        }
        counts
    }

    pub fn source(&self, source: Source) -> ClassCounts {
        self.by_source[source.index()]
    }
}

/// A validated list of records. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    records: Vec<ImageRecord>,
    mode: DatasetMode,
    counts: ManifestCounts,
}

impl DatasetManifest {
    /// Validates ids, folds and mode admission, then tallies counts.
    pub fn new(records: Vec<ImageRecord>, mode: DatasetMode) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if r.id.is_empty() {
                return Err(Error::Invalid("record id is empty".into()));
            }
            if r.id.contains(['\n', '\r']) {
                return Err(Error::Invalid(format!("record id `{}` contains a line break", r.id.escape_debug())));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            if let Some(f) = r.fold {
                if usize::from(f) >= MAX_FOLDS {
                    return Err(Error::Invalid(format!("record `{}` has fold {f}, expected 0..=9", r.id)));
                }
            }
            if !mode.admits(r.finding) {
                return Err(Error::Invalid(format!(
                    "record `{}` has finding `{}`, which the semi-automated population excludes",
                    r.id,
                    r.finding.as_str()
                )));
            }
        }
        let counts = ManifestCounts::tally(&records);
        Ok(Self { records, mode, counts })
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ImageRecord> {
        self.records
    }

    pub fn mode(&self) -> DatasetMode {
        self.mode
    }

    pub fn counts(&self) -> &ManifestCounts {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Re-derive the manifest for another population. Narrowing to the
    /// semi-automated mode drops records with an `Other` finding.
    pub fn with_mode(&self, mode: DatasetMode) -> Self {
        let records: Vec<_> = self.records.iter().filter(|r| mode.admits(r.finding)).cloned().collect();
        let counts = ManifestCounts::tally(&records);
        Self { records, mode, counts }
    }

    /// Whether every record carries a fold.
    pub fn is_fully_assigned(&self) -> bool {
        self.records.iter().all(|r| r.fold.is_some())
    }

    /// Number of distinct folds present (max fold id + 1).
    pub fn fold_count(&self) -> Option<usize> {
        if !self.is_fully_assigned() || self.records.is_empty() {
            return None;
        }
        self.records.iter().filter_map(|r| r.fold).max().map(|f| usize::from(f) + 1)
    }
}

/// Deterministic fold assignment.
///
/// Ids are hashed with the seed, ordered by `(hash, id)` and dealt round-robin,
/// so a record's fold depends only on the id set, `folds` and `seed`.
pub fn assign_folds(manifest: &DatasetManifest, folds: usize, seed: u64, reassign: bool) -> Result<DatasetManifest> {
    if folds < 2 {
        return Err(Error::Invalid(format!("need at least 2 folds, got {folds}")));
    }
    if folds > MAX_FOLDS {
        return Err(Error::Invalid(format!("at most {MAX_FOLDS} folds are supported, got {folds}")));
    }
    if folds > manifest.len() {
        return Err(Error::Invalid(format!(
            "{folds} folds requested for {} records",
            manifest.len()
        )));
    }
    if !reassign && manifest.records.iter().any(|r| r.fold.is_some()) {
        return Err(Error::Invalid("manifest already has fold assignments; pass reassign to overwrite".into()));
    }

    let mut order: Vec<usize> = (0..manifest.len()).collect();
    order.sort_by(|&a, &b| manifest.records[a].id.cmp(&manifest.records[b].id));
    let mut keyed: Vec<(u64, usize)> = order
        .into_iter()
        .map(|i| (id_hash(&manifest.records[i].id, seed), i))
        .collect();
    keyed.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| manifest.records[a.1].id.cmp(&manifest.records[b.1].id))
    });

    let mut records = manifest.records.clone();
    for (pos, (_, i)) in keyed.into_iter().enumerate() {
        records[i].fold = Some((pos % folds) as u8);
    }
    Ok(DatasetManifest {
        records,
        mode: manifest.mode,
        counts: manifest.counts,
    })
}

/// Layout of a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureConfig {
    /// Whole image, `n` values.
    C1,
    /// Left half then flipped right half, `2n` values.
    C2,
    /// Left, flipped right, whole, `3n` values.
    C3,
    /// Output of a trained encoder.
    Encoded,
}

/// Width of an encoded vector.
pub const ENCODED_DIM: usize = 256;

impl FeatureConfig {
    pub fn tag(self) -> u8 {
        match self {
            FeatureConfig::C1 => 1,
            FeatureConfig::C2 => 2,
            FeatureConfig::C3 => 3,
            FeatureConfig::Encoded => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            1 => Some(FeatureConfig::C1),
            2 => Some(FeatureConfig::C2),
            3 => Some(FeatureConfig::C3),
            4 => Some(FeatureConfig::Encoded),
            _ => None,
        }
    }

    /// Number of extractor blocks concatenated (0 for encoded vectors).
    pub fn blocks(self) -> usize {
        match self {
            FeatureConfig::C1 => 1,
            FeatureConfig::C2 => 2,
            FeatureConfig::C3 => 3,
            FeatureConfig::Encoded => 0,
        }
    }

    pub fn expected_dim(self, base_dim: usize) -> usize {
        match self {
            FeatureConfig::Encoded => ENCODED_DIM,
            c => c.blocks() * base_dim,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureConfig::C1 => "c1",
            FeatureConfig::C2 => "c2",
            FeatureConfig::C3 => "c3",
            FeatureConfig::Encoded => "encoded",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" | "1" => Some(FeatureConfig::C1),
            "c2" | "2" => Some(FeatureConfig::C2),
            "c3" | "3" => Some(FeatureConfig::C3),
            "encoded" => Some(FeatureConfig::Encoded),
            _ => None,
        }
    }
}

/// An image's embedding plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub record_id: String,
    pub values: Vec<f32>,
    pub config: FeatureConfig,
    pub extractor_id: String,
}

impl FeatureVector {
    /// Builds a vector, rejecting empty or non-finite values.
    pub fn new(
        record_id: impl Into<String>,
        values: Vec<f32>,
        config: FeatureConfig,
        extractor_id: impl Into<String>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("feature vector values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(Self {
            record_id: record_id.into(),
            values,
            config,
            extractor_id: extractor_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Checks the width against the extractor's base width.
    pub fn check_dim(&self, base_dim: usize) -> Result<()> {
        let want = self.config.expected_dim(base_dim);
        if self.dim() != want {
            return Err(Error::Shape(format!(
                "`{}`: {:?} with base width {base_dim} must have {want} values, found {}",
                self.record_id,
                self.config,
                self.dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rec(id: &str, finding: Finding) -> ImageRecord {
        ImageRecord::new(id, format!("{id}.png"), finding, Source::Synthetic)
    }

    #[test]
    fn counts_tally_direct() {
        let m = DatasetManifest::new(
            vec![
                rec("a", Finding::Pneumothorax),
                rec("b", Finding::NoFinding),
                rec("c", Finding::Pneumothorax),
            ],
            DatasetMode::FullyAutomated,
        )
        .unwrap();
        assert_eq!(m.counts().total, ClassCounts { positive: 2, negative: 1 });
        assert_eq!(m.counts().source(Source::Synthetic).total(), 3);
    }

    #[test]
    fn duplicate_and_fold_range_rejected() {
        let err = DatasetManifest::new(
            vec![rec("a", Finding::Other), rec("a", Finding::Other)],
            DatasetMode::FullyAutomated,
        )
        .unwrap_err();
        assert_eq!(err, Error::DuplicateId("a".into()));

        let mut r = rec("x", Finding::NoFinding);
        r.fold = Some(12);
        assert!(matches!(
            DatasetManifest::new(vec![r], DatasetMode::FullyAutomated),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn semi_mode_rejects_other_findings() {
        assert!(DatasetManifest::new(vec![rec("o", Finding::Other)], DatasetMode::SemiAutomated).is_err());
        let full = DatasetManifest::new(
            vec![rec("o", Finding::Other), rec("p", Finding::Pneumothorax), rec("n", Finding::NoFinding)],
            DatasetMode::FullyAutomated,
        )
        .unwrap();
        let semi = full.with_mode(DatasetMode::SemiAutomated);
        assert_eq!(semi.len(), 2);
        assert_eq!(semi.counts().total, ClassCounts { positive: 1, negative: 1 });
    }

    #[test]
    fn even_split_and_determinism() {
        let records = (0..100).map(|i| rec(&format!("r{i:03}"), Finding::NoFinding)).collect();
        let m = DatasetManifest::new(records, DatasetMode::FullyAutomated).unwrap();
        let a = assign_folds(&m, 10, 42, false).unwrap();
        let b = assign_folds(&m, 10, 42, false).unwrap();
        assert_eq!(a, b);
        let mut sizes = [0usize; 10];
        for r in a.records() {
            sizes[r.fold.unwrap() as usize] += 1;
        }
        assert_eq!(sizes, [10; 10]);
        assert_eq!(a.fold_count(), Some(10));
    }

    #[test]
    fn fold_errors() {
        let m = DatasetManifest::new(vec![rec("a", Finding::NoFinding), rec("b", Finding::NoFinding)], DatasetMode::FullyAutomated)
            .unwrap();
        assert!(assign_folds(&m, 3, 0, false).is_err());
        assert!(assign_folds(&m, 1, 0, false).is_err());
        let assigned = assign_folds(&m, 2, 0, false).unwrap();
        assert!(assign_folds(&assigned, 2, 0, false).is_err());
        assert!(assign_folds(&assigned, 2, 1, true).is_ok());
    }

    #[test]
    fn feature_vector_dims() {
        let v = FeatureVector::new("a", vec![0.0; 3072], FeatureConfig::C3, "baseline").unwrap();
        v.check_dim(1024).unwrap();
        assert!(v.check_dim(512).is_err());
        assert!(FeatureVector::new("a", vec![f32::NAN], FeatureConfig::C1, "x").is_err());
        assert_eq!(FeatureConfig::Encoded.expected_dim(1024), 256);
    }
}
