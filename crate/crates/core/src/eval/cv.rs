use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::reference::{reference_rows, ReferenceRow};
use super::{confusion, mean_std, roc, youden, Confusion, RocCurve};
use crate::data::{assign_folds, DatasetManifest, DatasetMode, FeatureConfig, FeatureVector, Label};
use crate::encoder::{fit_pipeline, pca_fit, pca_project, Encoder, EncoderPipelineConfig, PcaModel};
use crate::exec::Executor;
use crate::hash::derive_seed;
use crate::nn::Matrix;
use crate::search::{knn, SearchIndex, SearchOptions};
use crate::{Error, Result};

/// Neighbor counts used throughout the published experiments.
pub const DEFAULT_K_LIST: [usize; 6] = [11, 51, 101, 251, 501, 1001];

/// How archive and query vectors are prepared before searching.
#[derive(Debug, Clone)]
pub enum CvMethod {
    /// Search the extracted vectors directly.
    Raw,
    /// Train the two-step encoder on each fold's archive and search the
    /// 256-wide encodings.
    AutoThorax(EncoderPipelineConfig),
    /// Use already trained encoders, one per fold, in fold order.
    Pretrained(Vec<Encoder>),
    /// Fit PCA on each fold's archive and search the projections.
    Pca { components: usize },
}

impl CvMethod {
    pub fn name(&self) -> &'static str {
        match self {
            CvMethod::Raw => "raw",
            CvMethod::AutoThorax(_) | CvMethod::Pretrained(_) => "autothorax",
            CvMethod::Pca { .. } => "pca",
        }
    }
}

/// Where the Youden operating threshold is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// On the fold's own validation ROC.
    #[default]
    ValidationFold,
    /// On leave-one-out votes over the fold's archive, then applied to the
    /// validation scores.
    ArchiveHeldOut,
}

#[derive(Debug, Clone)]
pub struct CvSetup<'a> {
    pub manifest: &'a DatasetManifest,
    /// May contain vectors for records outside the manifest; those are ignored.
    pub vectors: &'a [FeatureVector],
    pub method: CvMethod,
    pub k_list: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub threshold_mode: ThresholdMode,
    pub search: SearchOptions,
}

impl<'a> CvSetup<'a> {
    pub fn new(manifest: &'a DatasetManifest, vectors: &'a [FeatureVector], method: CvMethod) -> Self {
        Self {
            manifest,
            vectors,
            method,
            k_list: DEFAULT_K_LIST.to_vec(),
            folds: 10,
            seed: 0,
            threshold_mode: ThresholdMode::default(),
            search: SearchOptions::default(),
        }
    }
}

/// Record indices (into the manifest) of one fold's two sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub fold: usize,
    pub archive: Vec<usize>,
    pub validation: Vec<usize>,
}

impl FoldPlan {
    /// Split a manifest whose records all carry folds `0..folds`.
    pub fn all(manifest: &DatasetManifest, folds: usize) -> Vec<FoldPlan> {
        (0..folds)
            .map(|f| {
                let (validation, archive) = (0..manifest.len())
                    .partition(|&i| manifest.records()[i].fold.map(usize::from) == Some(f));
                FoldPlan {
                    fold: f,
                    archive,
                    validation,
                }
            })
            .collect()
    }
}

/// Statistics of one fold at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub k: usize,
    /// Fractions in `[0, 1]`; tables render them as percentages.
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub confusion: Confusion,
    #[serde(with = "super::threshold_serde")]
    pub threshold: f64,
    pub youden_j: f64,
    pub archive_size: usize,
    pub validation_size: usize,
    /// Some queries had fewer than `k` archive candidates.
    pub truncated: bool,
    #[serde(skip)]
    pub roc: Option<RocCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledStats {
    pub auc: f64,
    #[serde(with = "super::threshold_serde")]
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Across-fold mean and sample standard deviation at one `k`, plus the
/// statistics of the ROC pooled over all folds' validation scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    pub k: usize,
    pub sensitivity_mean: f64,
    pub sensitivity_std: f64,
    pub specificity_mean: f64,
    pub specificity_std: f64,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub pooled: PooledStats,
    #[serde(skip)]
    pub pooled_roc: Option<RocCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: DatasetMode,
    pub feature_config: FeatureConfig,
    pub method: String,
    pub k_list: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub threshold_mode: ThresholdMode,
    pub records: usize,
    pub positives: usize,
    pub negatives: usize,
    pub per_fold: Vec<FoldReport>,
    pub summaries: Vec<KSummary>,
    pub encoder: Option<EncoderPipelineConfig>,
    pub references: Vec<ReferenceRow>,
}

impl ExperimentReport {
    pub fn summary(&self, k: usize) -> Option<&KSummary> {
        self.summaries.iter().find(|s| s.k == k)
    }

    pub fn fold_reports(&self, k: usize) -> impl Iterator<Item = &FoldReport> {
        self.per_fold.iter().filter(move |r| r.k == k)
    }

    /// Check stored means/deviations against the per-fold rows.
    pub fn summaries_consistent(&self) -> bool {
        self.summaries.iter().all(|s| {
            let folds: Vec<&FoldReport> = self.fold_reports(s.k).collect();
            let col = |f: fn(&FoldReport) -> f64| mean_std(&folds.iter().map(|r| f(r)).collect::<Vec<_>>());
            col(|r| r.sensitivity) == (s.sensitivity_mean, s.sensitivity_std)
                && col(|r| r.specificity) == (s.specificity_mean, s.specificity_std)
                && col(|r| r.auc) == (s.auc_mean, s.auc_std)
        })
    }
}

/// Result of one fold, before assembly into a report.
#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub reports: Vec<FoldReport>,
    /// Validation likelihoods per `k` (same order as `k_list`).
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

/// Archive vectors of one fold. Transforms are fitted from this type only,
/// so validation vectors cannot reach encoder or PCA training.
struct ArchiveSet {
    vectors: Vec<FeatureVector>,
    labels: Vec<Label>,
}

enum FittedTransform {
    Identity,
    Encoder(Encoder),
    Pca(PcaModel),
}

impl FittedTransform {
    fn fit(method: &CvMethod, archive: &ArchiveSet, fold: usize, seed: u64) -> Result<Self> {
        match method {
            CvMethod::Raw => Ok(FittedTransform::Identity),
            CvMethod::Pretrained(encoders) => encoders
                .get(fold)
                .cloned()
                .map(FittedTransform::Encoder)
                .ok_or_else(|| Error::Invalid(format!("no pretrained encoder for fold {fold}"))),
            CvMethod::AutoThorax(cfg) => {
                let rows: Vec<&[f32]> = archive.vectors.iter().map(|v| v.values.as_slice()).collect();
                let x = Matrix::from_rows(&rows)?;
                let trained = fit_pipeline(cfg, &x, &archive.labels, derive_seed(seed, fold as u64))?;
                Ok(FittedTransform::Encoder(trained.encoder))
            }
            CvMethod::Pca { components } => {
                let rows: Vec<&[f32]> = archive.vectors.iter().map(|v| v.values.as_slice()).collect();
                Ok(FittedTransform::Pca(pca_fit(&rows, *components, derive_seed(seed, fold as u64))?))
            }
        }
    }

    fn apply(&self, vectors: Vec<FeatureVector>) -> Result<Vec<FeatureVector>> {
        match self {
            FittedTransform::Identity => Ok(vectors),
            FittedTransform::Encoder(e) => e.encode_vectors(&vectors),
            FittedTransform::Pca(m) => vectors
                .iter()
                .map(|v| {
                    FeatureVector::new(
                        v.record_id.clone(),
                        pca_project(m, &v.values)?,
                        FeatureConfig::Encoded,
                        v.extractor_id.clone(),
                    )
                })
                .collect(),
        }
    }
}

fn validate_setup(setup: &CvSetup) -> Result<()> {
    if setup.k_list.is_empty() || setup.k_list.contains(&0) {
        return Err(Error::Invalid(format!("k values must be positive, got {:?}", setup.k_list)));
    }
    Ok(())
}

/// Fold-assigned manifest and the per-fold split.
///
/// Existing assignments are reused when they already cover `0..folds`;
/// otherwise folds are (re)assigned from `seed`. Both classes need at least
/// `folds` records.
pub fn plan_folds(manifest: &DatasetManifest, folds: usize, seed: u64) -> Result<(DatasetManifest, Vec<FoldPlan>)> {
    let counts = manifest.counts().total;
    if counts.positive < folds || counts.negative < folds {
        return Err(Error::Invalid(format!(
            "{folds} folds need at least {folds} records per class; have {} positive and {} negative",
            counts.positive, counts.negative
        )));
    }
    let manifest = if manifest.fold_count() == Some(folds) {
        manifest.clone()
    } else {
        assign_folds(manifest, folds, seed, true)?
    };
    let plans = FoldPlan::all(&manifest, folds);
    Ok((manifest, plans))
}

/// Evaluate one fold: fit the transform on the archive side, search every
/// validation query and score each `k`.
pub fn run_fold(
    setup: &CvSetup,
    manifest: &DatasetManifest,
    by_id: &BTreeMap<&str, &FeatureVector>,
    plan: &FoldPlan,
) -> Result<FoldOutcome> {
    let records = manifest.records();
    let gather = |idx: &[usize]| -> Result<(Vec<FeatureVector>, Vec<Label>)> {
        let mut vs = Vec::with_capacity(idx.len());
        let mut ls = Vec::with_capacity(idx.len());
        for &i in idx {
            let r = &records[i];
            let v = by_id
                .get(r.id.as_str())
                .ok_or_else(|| Error::MissingRecord(r.id.clone()))?;
            vs.push((*v).clone());
            ls.push(r.label());
        }
        Ok((vs, ls))
    };
    let (archive_vectors, archive_labels) = gather(&plan.archive)?;
    let archive = ArchiveSet {
        vectors: archive_vectors,
        labels: archive_labels,
    };
    let transform = FittedTransform::fit(&setup.method, &archive, plan.fold, setup.seed)?;
    let ArchiveSet {
        vectors: archive_vectors,
        labels: archive_labels,
    } = archive;
    let archive_vectors = transform.apply(archive_vectors)?;
    let label_map: BTreeMap<&str, Label> = archive_vectors
        .iter()
        .zip(&archive_labels)
        .map(|(v, &l)| (v.record_id.as_str(), l))
        .collect();
    let index = SearchIndex::build(&archive_vectors, |id| label_map.get(id).copied(), setup.search)?;

    let (validation_vectors, labels) = gather(&plan.validation)?;
    let validation_vectors = transform.apply(validation_vectors)?;
    let k_max = *setup.k_list.iter().max().expect("validated non-empty");

    let mut scores = alloc::vec![Vec::with_capacity(validation_vectors.len()); setup.k_list.len()];
    let mut truncated = alloc::vec![false; setup.k_list.len()];
    for q in &validation_vectors {
        let ns = knn(&index, &q.values, Some(&q.record_id), k_max)?;
        for (ki, &k) in setup.k_list.iter().enumerate() {
            let p = ns.prefix(k);
            truncated[ki] |= p.truncated;
            scores[ki].push(p.likelihood);
        }
    }

    let archive_thresholds = match setup.threshold_mode {
        ThresholdMode::ValidationFold => None,
        ThresholdMode::ArchiveHeldOut => {
            let mut held = alloc::vec![Vec::with_capacity(index.len()); setup.k_list.len()];
            for (row, id) in index.ids().iter().enumerate() {
                let ns = knn(&index, index.row(row), Some(id), k_max)?;
                for (ki, &k) in setup.k_list.iter().enumerate() {
                    held[ki].push(ns.prefix(k).likelihood);
                }
            }
            let thresholds = held
                .iter()
                .map(|s| roc(s, index.labels()).map(|c| youden(&c).threshold))
                .collect::<Result<Vec<_>>>()?;
            Some(thresholds)
        }
    };

    let mut reports = Vec::with_capacity(setup.k_list.len());
    for (ki, &k) in setup.k_list.iter().enumerate() {
        let curve = roc(&scores[ki], &labels).map_err(|e| match e {
            Error::Invalid(msg) => Error::Invalid(format!("fold {}: {msg}", plan.fold)),
            other => other,
        })?;
        let threshold = match &archive_thresholds {
            Some(t) => t[ki],
            None => youden(&curve).threshold,
        };
        let counts = confusion(&scores[ki], &labels, threshold)?;
        reports.push(FoldReport {
            fold: plan.fold,
            k,
            sensitivity: counts.sensitivity(),
            specificity: counts.specificity(),
            auc: curve.auc,
            confusion: counts,
            threshold,
            youden_j: counts.sensitivity() + counts.specificity() - 1.0,
            archive_size: index.len(),
            validation_size: labels.len(),
            truncated: truncated[ki],
            roc: Some(curve),
        });
    }
    Ok(FoldOutcome {
        reports,
        scores,
        labels,
    })
}

/// Ten-fold (or `setup.folds`-fold) search-as-classifier evaluation.
///
/// Each fold's archive is the union of the other folds. Folds run on `exec`
/// and are merged in fold order, so the report does not depend on the
/// number of workers.
pub fn run_cv<E: Executor>(setup: &CvSetup, exec: &E) -> Result<ExperimentReport> {
    validate_setup(setup)?;
    let (manifest, plans) = plan_folds(setup.manifest, setup.folds, setup.seed)?;
    let by_id: BTreeMap<&str, &FeatureVector> = setup.vectors.iter().map(|v| (v.record_id.as_str(), v)).collect();
    let feature_config = manifest
        .records()
        .iter()
        .find_map(|r| by_id.get(r.id.as_str()))
        .map(|v| v.config)
        .ok_or(Error::Empty("feature vectors for manifest records"))?;
    if let CvMethod::Pretrained(encoders) = &setup.method {
        if encoders.len() != setup.folds {
            return Err(Error::Invalid(format!(
                "{} pretrained encoders for {} folds",
                encoders.len(),
                setup.folds
            )));
        }
    }

    let outcomes: Vec<Result<FoldOutcome>> = exec.map(plans.len(), |i| run_fold(setup, &manifest, &by_id, &plans[i]));
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::with_capacity(setup.k_list.len());
    for (ki, &k) in setup.k_list.iter().enumerate() {
        let folds: Vec<&FoldReport> = outcomes.iter().map(|o| &o.reports[ki]).collect();
        let (sensitivity_mean, sensitivity_std) = mean_std(&folds.iter().map(|r| r.sensitivity).collect::<Vec<_>>());
        let (specificity_mean, specificity_std) = mean_std(&folds.iter().map(|r| r.specificity).collect::<Vec<_>>());
        let (auc_mean, auc_std) = mean_std(&folds.iter().map(|r| r.auc).collect::<Vec<_>>());
        let pooled_scores: Vec<f64> = outcomes.iter().flat_map(|o| o.scores[ki].iter().copied()).collect();
        let pooled_labels: Vec<Label> = outcomes.iter().flat_map(|o| o.labels.iter().copied()).collect();
        let curve = roc(&pooled_scores, &pooled_labels)?;
        let y = youden(&curve);
        summaries.push(KSummary {
            k,
            sensitivity_mean,
            sensitivity_std,
            specificity_mean,
            specificity_std,
            auc_mean,
            auc_std,
            pooled: PooledStats {
                auc: curve.auc,
                threshold: y.threshold,
                sensitivity: y.sensitivity,
                specificity: y.specificity,
            },
            pooled_roc: Some(curve),
        });
    }

    let counts = manifest.counts().total;
    let feature_config = match setup.method {
        CvMethod::Raw => feature_config,
        _ => FeatureConfig::Encoded,
    };
    Ok(ExperimentReport {
        mode: manifest.mode(),
        feature_config,
        method: setup.method.name().to_string(),
        k_list: setup.k_list.clone(),
        folds: setup.folds,
        seed: setup.seed,
        threshold_mode: setup.threshold_mode,
        records: manifest.len(),
        positives: counts.positive,
        negatives: counts.negative,
        per_fold: outcomes.into_iter().flat_map(|o| o.reports).collect(),
        summaries,
        encoder: match &setup.method {
            CvMethod::AutoThorax(cfg) => Some(cfg.clone()),
            _ => None,
        },
        references: reference_rows(manifest.mode()),
    })
}
