//! Pipeline stages behind the command-line subcommands. Each is a pure
//! function of its configuration, input files and seed.

use std::path::{Path, PathBuf};

use autothorax_core::data::{DatasetManifest, FeatureConfig, FeatureVector, Label};
use autothorax_core::encoder::{fit_pipeline, Encoder, EncoderPipelineConfig};
use autothorax_core::eval::{plan_folds, run_cv, CvMethod, CvSetup, ExperimentReport};
use autothorax_core::exec::Executor;
use autothorax_core::hash::derive_seed;
use autothorax_core::imaging::{extract_config, ExternalVectors, BASELINE_DIM};
use autothorax_core::nn::Matrix;
use autothorax_core::search::{knn_with, NeighborSet, SearchIndex, SearchOptions};
use autothorax_core::synth::{synth_vectors, SynthParams, SyntheticImageSet};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{encode_checkpoint, load_checkpoint, sidecar_path, EncoderSidecar};
use crate::config::{cache_dir, ExtractorKind, Method, RunConfig};
use crate::error::{Error, Result};
use crate::images::{load_gray, save_gray};
use crate::manifest::{load_manifest, write_manifest};
use crate::report::{render_table, roc_csv, ReportDocument};
use crate::store::{read_store, write_store};
use crate::write_file;

pub const MANIFEST_FILE: &str = "manifest.csv";

pub fn store_file(config: FeatureConfig) -> String {
    format!("{}.fvs", config.as_str())
}

pub fn checkpoint_file(fold: usize) -> String {
    format!("fold-{fold:02}.axnn")
}

fn require(path: &Option<PathBuf>, what: &'static str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| Error::Usage(format!("no {what} given; pass it as a flag or in the config file")))
}

fn stores_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.stores.clone().unwrap_or_else(|| cache_dir().join("stores"))
}

fn checkpoints_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.checkpoints.clone().unwrap_or_else(|| cache_dir().join("checkpoints"))
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output.clone().unwrap_or_else(|| cache_dir().join("reports"))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Manifest from the config, narrowed to the configured population.
pub fn load_population(cfg: &RunConfig) -> Result<DatasetManifest> {
    let path = require(&cfg.paths.manifest, "manifest path")?;
    if !path.exists() {
        return Err(Error::Missing { what: "manifest", path });
    }
    Ok(load_manifest(&path)?.with_mode(cfg.dataset.mode()))
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRequest {
    pub positives: usize,
    pub negatives: usize,
    pub separation: f64,
    pub other_fraction: f64,
    pub seed: u64,
    pub size: usize,
    /// Write Gaussian C1 vectors of this width instead of images.
    pub vector_dim: Option<usize>,
}

/// Write `manifest.csv` plus `images/*.png` (or `stores/C1.fvs` for vector
/// mode) and `synth.json` under `out`.
pub fn cmd_synth<E: Executor>(req: &SynthRequest, out: &Path, exec: &E) -> Result<DatasetManifest> {
    if req.positives == 0 || req.negatives == 0 {
        return Err(Error::Usage("class counts must be positive".into()));
    }
    let manifest = match req.vector_dim {
        Some(dim) => {
            let (manifest, vectors) = synth_vectors(req.positives, req.negatives, dim, req.separation, req.seed)?;
            write_store(&vectors, &out.join("stores").join(store_file(FeatureConfig::C1)))?;
            manifest
        }
        None => {
            let set = SyntheticImageSet::new(SynthParams {
                positives: req.positives,
                negatives: req.negatives,
                other_fraction: req.other_fraction,
                separation: req.separation,
                size: req.size,
                seed: req.seed,
            })?;
            let images = out.join("images");
            std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
            let written: Vec<Result<()>> = exec.map(set.len(), |i| {
                let rec = set.record(i);
                save_gray(&set.image(i), &images.join(&rec.path))
            });
            written.into_iter().collect::<Result<()>>()?;
            set.manifest()?
        }
    };
    write_manifest(&manifest, &out.join(MANIFEST_FILE))?;
    write_file(&out.join("synth.json"), to_json(req).as_bytes())?;
    Ok(manifest)
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub records: usize,
    pub positives: usize,
    pub negatives: usize,
    pub by_source: Vec<(String, usize, usize)>,
    pub folds: Option<usize>,
}

/// Validate a manifest for the configured population, optionally assign
/// folds, and write the normalized CSV.
pub fn cmd_ingest(cfg: &RunConfig, assign: bool, reassign: bool, out: &Path) -> Result<IngestSummary> {
    let mut manifest = load_population(cfg)?;
    if assign {
        manifest = autothorax_core::data::assign_folds(&manifest, cfg.folds, cfg.seed, reassign)?;
    }
    write_manifest(&manifest, out)?;
    let counts = manifest.counts();
    Ok(IngestSummary {
        records: manifest.len(),
        positives: counts.total.positive,
        negatives: counts.total.negative,
        by_source: autothorax_core::data::Source::ALL
            .iter()
            .map(|&s| {
                let c = counts.source(s);
                (s.as_str().to_string(), c.positive, c.negative)
            })
            .filter(|(_, p, n)| p + n > 0)
            .collect(),
        folds: manifest.fold_count(),
    })
}

// ---------------------------------------------------------------- extract

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ExtractProvenance {
    config: RunConfig,
    configs: Vec<FeatureConfig>,
    extractor_id: String,
    records: usize,
}

fn resolve_image(cfg: &RunConfig, record_path: &str) -> PathBuf {
    let p = Path::new(record_path);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    let base = cfg.paths.images.clone().or_else(|| {
        cfg.paths
            .manifest
            .as_ref()
            .and_then(|m| m.parent().map(|d| d.join("images")))
    });
    base.map_or_else(|| p.to_path_buf(), |b| b.join(p))
}

/// Extract every manifest record (all populations) and write one store per
/// requested configuration. C1 and C2 are the trailing and leading blocks
/// of C3, so C3 is computed once per image.
pub fn cmd_extract<E: Executor>(cfg: &RunConfig, configs: &[FeatureConfig], exec: &E) -> Result<Vec<PathBuf>> {
    if configs.is_empty() || configs.contains(&FeatureConfig::Encoded) {
        return Err(Error::Usage("extract writes C1, C2 and/or C3".into()));
    }
    let manifest_path = require(&cfg.paths.manifest, "manifest path")?;
    let manifest = load_manifest(&manifest_path)?;
    let records = manifest.records();
    let source = match cfg.extractor.kind {
        ExtractorKind::External => {
            let path = require(&cfg.extractor.path, "external vector store")?;
            let stored = read_store(&path)?;
            let base = stored.first().map_or(BASELINE_DIM, |v| v.dim() / v.config.blocks());
            let ext = ExternalVectors::new(stored, base)?;
            for r in records {
                ext.lookup(&r.id, FeatureConfig::C1).map_err(|_| {
                    Error::Store(format!("{}: no vector for record `{}`", path.display(), r.id))
                })?;
            }
            ext
        }
        ExtractorKind::Baseline => {
            let c3: Vec<Result<FeatureVector>> = exec.map(records.len(), |i| {
                let img = load_gray(&resolve_image(cfg, &records[i].path))?;
                Ok(extract_config(&records[i].id, &img, FeatureConfig::C3)?)
            });
            ExternalVectors::new(c3.into_iter().collect::<Result<Vec<_>>>()?, BASELINE_DIM)?
        }
    };
    let extractor_id = source.spec().extractor_id;
    let dir = stores_dir(cfg);
    let mut written = Vec::new();
    for &config in configs {
        let vectors = records
            .iter()
            .map(|r| source.lookup(&r.id, config))
            .collect::<autothorax_core::Result<Vec<_>>>()?;
        let path = dir.join(store_file(config));
        write_store(&vectors, &path)?;
        written.push(path);
    }
    let prov = ExtractProvenance {
        config: cfg.clone(),
        configs: configs.to_vec(),
        extractor_id,
        records: records.len(),
    };
    write_file(&dir.join("extract.json"), to_json(&prov).as_bytes())?;
    Ok(written)
}

// ---------------------------------------------------------------- train-encoder

fn load_method_store(cfg: &RunConfig) -> Result<Vec<FeatureVector>> {
    read_store(&stores_dir(cfg).join(store_file(cfg.method.input_config())))
}

/// One encoder per fold, each trained on its archive side only.
pub fn train_fold_encoders<E: Executor>(
    manifest: &DatasetManifest,
    vectors: &[FeatureVector],
    pipeline: &EncoderPipelineConfig,
    folds: usize,
    seed: u64,
    exec: &E,
) -> Result<Vec<(autothorax_core::encoder::TrainedPipeline, usize)>> {
    pipeline.validate()?;
    let (manifest, plans) = plan_folds(manifest, folds, seed)?;
    let by_id: std::collections::BTreeMap<&str, &FeatureVector> =
        vectors.iter().map(|v| (v.record_id.as_str(), v)).collect();
    let out: Vec<Result<_>> = exec.map(plans.len(), |f| {
        let plan = &plans[f];
        let mut rows = Vec::with_capacity(plan.archive.len());
        let mut labels: Vec<Label> = Vec::with_capacity(plan.archive.len());
        for &i in &plan.archive {
            let r = &manifest.records()[i];
            let v = by_id
                .get(r.id.as_str())
                .ok_or_else(|| autothorax_core::Error::MissingRecord(r.id.clone()))?;
            rows.push(v.values.as_slice());
            labels.push(r.label());
        }
        let x = Matrix::from_rows(&rows)?;
        let trained = fit_pipeline(pipeline, &x, &labels, derive_seed(seed, plan.fold as u64))?;
        Ok((trained, plan.archive.len()))
    });
    out.into_iter().collect()
}

/// Train and write `fold-NN.axnn` with a JSON sidecar for every fold.
pub fn cmd_train_encoder<E: Executor>(cfg: &RunConfig, exec: &E) -> Result<Vec<PathBuf>> {
    let manifest = load_population(cfg)?;
    let vectors = load_method_store(cfg)?;
    let dim = vectors.first().map_or(0, FeatureVector::dim);
    let pipeline = cfg.encoder.pipeline(dim);
    let trained = train_fold_encoders(&manifest, &vectors, &pipeline, cfg.folds, cfg.seed, exec)?;
    let dir = checkpoints_dir(cfg);
    let mut paths = Vec::new();
    for (fold, (t, archive_size)) in trained.iter().enumerate() {
        let bytes = encode_checkpoint(t.encoder.network());
        let path = dir.join(checkpoint_file(fold));
        write_file(&path, &bytes)?;
        let sidecar = EncoderSidecar {
            fold,
            folds: cfg.folds,
            seed: cfg.seed,
            input_dim: pipeline.input_dim,
            bottleneck: pipeline.bottleneck,
            hidden_schedule: pipeline.hidden_schedule.clone(),
            pipeline: pipeline.clone(),
            archive_size: *archive_size,
            step1_losses: t.autoencoder.history.epoch_losses.clone(),
            step2_losses: t.fine_tuned.history.epoch_losses.clone(),
            checkpoint_crc32: crc32fast::hash(&bytes),
            run: cfg.clone(),
        };
        write_file(&sidecar_path(&path), to_json(&sidecar).as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

// ---------------------------------------------------------------- search

/// Queries taken from `query_store` (all rows) or a single stored record.
pub fn cmd_search<E: Executor>(
    cfg: &RunConfig,
    config: FeatureConfig,
    k: usize,
    query_id: Option<&str>,
    query_store: Option<&Path>,
    exec: &E,
) -> Result<Vec<NeighborSet>> {
    let manifest = load_population(cfg)?;
    let archive: Vec<FeatureVector> = read_store(&stores_dir(cfg).join(store_file(config)))?
        .into_iter()
        .filter(|v| manifest.get(&v.record_id).is_some())
        .collect();
    let options = SearchOptions {
        normalize: cfg.normalize,
    };
    let index = SearchIndex::build(&archive, |id| manifest.get(id).map(|r| r.label()), options)?;
    let queries: Vec<FeatureVector> = match (query_id, query_store) {
        (Some(id), None) => vec![archive
            .iter()
            .find(|v| v.record_id == id)
            .cloned()
            .ok_or_else(|| autothorax_core::Error::MissingRecord(id.to_string()))?],
        (None, Some(path)) => read_store(path)?,
        _ => return Err(Error::Usage("give exactly one of --query-id or --query-store".into())),
    };
    queries
        .iter()
        .map(|q| Ok(knn_with(&index, &q.values, Some(&q.record_id), k, exec)?))
        .collect()
}

// ---------------------------------------------------------------- evaluate

fn load_pretrained(cfg: &RunConfig, dir: &Path) -> Result<Vec<Encoder>> {
    (0..cfg.folds)
        .map(|f| {
            let path = dir.join(checkpoint_file(f));
            Ok(Encoder::from_network(load_checkpoint(&path)?))
        })
        .collect()
}

/// Run cross-validation and return the report. With `use_checkpoints`, the
/// AUTOTHORAX method loads per-fold encoders instead of training them.
pub fn evaluate<E: Executor>(cfg: &RunConfig, use_checkpoints: bool, exec: &E) -> Result<ExperimentReport> {
    let manifest = load_population(cfg)?;
    let vectors = load_method_store(cfg)?;
    let method = match cfg.method {
        Method::C1 | Method::C2 | Method::C3 => CvMethod::Raw,
        Method::Pca => CvMethod::Pca {
            components: cfg.pca_components,
        },
        Method::Autothorax if use_checkpoints => CvMethod::Pretrained(load_pretrained(cfg, &checkpoints_dir(cfg))?),
        Method::Autothorax => {
            let dim = vectors.first().map_or(0, FeatureVector::dim);
            CvMethod::AutoThorax(cfg.encoder.pipeline(dim))
        }
    };
    let mut setup = CvSetup::new(&manifest, &vectors, method);
    setup.k_list = cfg.k_list.clone();
    setup.folds = cfg.folds;
    setup.seed = cfg.seed;
    setup.threshold_mode = cfg.threshold_mode;
    setup.search = SearchOptions {
        normalize: cfg.normalize,
    };
    Ok(run_cv(&setup, exec)?)
}

/// Write `report.json`, `report.txt` and pooled `roc-k<K>.csv` files.
pub fn cmd_evaluate<E: Executor>(cfg: &RunConfig, use_checkpoints: bool, exec: &E) -> Result<PathBuf> {
    let report = evaluate(cfg, use_checkpoints, exec)?;
    let dir = output_dir(cfg);
    for s in &report.summaries {
        if let Some(curve) = &s.pooled_roc {
            write_file(&dir.join(format!("roc-k{}.csv", s.k)), roc_csv(curve).as_bytes())?;
        }
    }
    write_file(&dir.join("report.txt"), render_table(&report).as_bytes())?;
    let doc = ReportDocument {
        config: cfg.clone(),
        report,
    };
    let path = dir.join("report.json");
    write_file(&path, doc.to_json().as_bytes())?;
    Ok(path)
}

// ---------------------------------------------------------------- report

pub fn cmd_report(path: &Path) -> Result<String> {
    let doc = ReportDocument::load(path)?;
    if !doc.report.summaries_consistent() {
        return Err(Error::Json {
            path: path.to_path_buf(),
            message: "stored averages do not match the per-fold rows".into(),
        });
    }
    Ok(render_table(&doc.report))
}
