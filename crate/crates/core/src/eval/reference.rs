//! Published reference numbers, attached to reports as annotations.
//!
//! These come from full-scale runs on pooled MIMIC-CXR / CheXpert /
//! ChestX-ray14 data with DenseNet121 features and are not expected to be
//! reproduced by the synthetic desk-scale runs.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{ClassCounts, DatasetMode, Source};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub method: String,
    pub k: Option<usize>,
    /// Percentages, averaged over 10 folds.
    pub sensitivity: u8,
    pub specificity: u8,
    pub auc: u8,
}

type Row = (&'static str, Option<usize>, u8, u8, u8);

const SEMI_ROWS: &[Row] = &[
    ("CheXNet classifier", None, 86, 76, 88),
    ("AutoThorax-Net", Some(1001), 86, 84, 92),
    ("AutoThorax-Net", Some(501), 86, 83, 92),
    ("AutoThorax-Net", Some(251), 84, 85, 92),
    ("AutoThorax-Net", Some(101), 85, 84, 92),
    ("AutoThorax-Net", Some(51), 85, 84, 92),
    ("AutoThorax-Net", Some(11), 81, 86, 90),
    ("C3", Some(1001), 85, 74, 88),
    ("C3", Some(501), 84, 76, 88),
    ("C3", Some(251), 81, 79, 89),
    ("C3", Some(101), 84, 78, 89),
    ("C3", Some(51), 86, 77, 89),
    ("C3", Some(11), 83, 80, 88),
    ("C2", Some(1001), 86, 70, 87),
    ("C2", Some(501), 85, 73, 88),
    ("C2", Some(251), 84, 75, 88),
    ("C2", Some(101), 84, 77, 88),
    ("C2", Some(51), 79, 81, 88),
    ("C2", Some(11), 80, 81, 87),
    ("C1", Some(1001), 80, 78, 88),
    ("C1", Some(501), 81, 78, 88),
    ("C1", Some(251), 80, 80, 89),
    ("C1", Some(101), 81, 80, 89),
    ("C1", Some(51), 83, 80, 89),
    ("C1", Some(11), 86, 76, 88),
];

const FULL_ROWS: &[Row] = &[
    ("CheXNet classifier", None, 72, 67, 77),
    ("AutoThorax-Net", Some(1001), 73, 75, 82),
    ("AutoThorax-Net", Some(501), 73, 75, 82),
    ("AutoThorax-Net", Some(251), 72, 75, 82),
    ("AutoThorax-Net", Some(101), 69, 78, 81),
    ("AutoThorax-Net", Some(51), 70, 75, 80),
    ("AutoThorax-Net", Some(11), 72, 67, 74),
    ("C3", Some(1001), 72, 63, 75),
    ("C3", Some(501), 70, 67, 76),
    ("C3", Some(251), 71, 67, 76),
    ("C3", Some(101), 74, 65, 77),
    ("C3", Some(51), 65, 74, 76),
    ("C3", Some(11), 72, 65, 72),
    ("C2", Some(1001), 67, 66, 74),
    ("C2", Some(501), 64, 70, 75),
    ("C2", Some(251), 74, 61, 75),
    ("C2", Some(101), 70, 66, 75),
    ("C2", Some(51), 73, 63, 75),
    ("C2", Some(11), 68, 66, 70),
    ("C1", Some(1001), 73, 61, 74),
    ("C1", Some(501), 67, 68, 75),
    ("C1", Some(251), 67, 69, 75),
    ("C1", Some(101), 70, 65, 75),
    ("C1", Some(51), 67, 68, 74),
    ("C1", Some(11), 71, 60, 69),
];

/// Reported rows for one population.
pub fn reference_rows(mode: DatasetMode) -> Vec<ReferenceRow> {
    let rows = match mode {
        DatasetMode::SemiAutomated => SEMI_ROWS,
        DatasetMode::FullyAutomated => FULL_ROWS,
    };
    rows.iter()
        .map(|&(method, k, sensitivity, specificity, auc)| ReferenceRow {
            method: method.to_string(),
            k,
            sensitivity,
            specificity,
            auc,
        })
        .collect()
}

/// Reported AUC (percent) of the PCA-vs-autoencoder comparison on the fully
/// automated population: `(k, pca, autoencoder)`.
pub const PCA_COMPARISON_AUC: [(usize, u8, u8); 2] = [(11, 72, 74), (51, 76, 80)];

/// Published per-source class counts of the two pooled datasets.
pub fn dataset_counts(mode: DatasetMode) -> [(Source, ClassCounts); 3] {
    let negatives = match mode {
        DatasetMode::SemiAutomated => [82_668, 16_974, 60_361],
        DatasetMode::FullyAutomated => [236_626, 173_334, 106_818],
    };
    let positives = [11_610, 17_693, 5_302];
    let sources = [Source::MimicCxr, Source::Chexpert, Source::ChestXray14];
    core::array::from_fn(|i| {
        (
            sources[i],
            ClassCounts {
                positive: positives[i],
                negative: negatives[i],
            },
        )
    })
}
