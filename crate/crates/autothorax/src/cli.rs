//! Command-line interface. Exit codes: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use autothorax_core::data::FeatureConfig;
use autothorax_core::eval::ThresholdMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::{
    cmd_evaluate, cmd_extract, cmd_ingest, cmd_report, cmd_search, cmd_synth, cmd_train_encoder, SynthRequest,
};
use crate::config::{Dataset, ExtractorKind, Method, RunConfig};
use crate::error::{Error, Result};
use crate::exec::Threads;

#[derive(Debug, Parser)]
#[command(name = "autothorax", version, about = "Image search as a classifier for chest X-ray pneumothorax")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a manifest, optionally assign folds, write the normalized CSV.
    Ingest {
        #[command(flatten)]
        run: RunArgs,
        /// Assign folds (`--folds`, `--seed`).
        #[arg(long)]
        assign_folds: bool,
        /// Overwrite existing fold assignments.
        #[arg(long)]
        reassign: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic image set (or Gaussian vectors) with a manifest.
    Synth {
        #[arg(long, default_value_t = 1000)]
        positives: usize,
        #[arg(long, default_value_t = 1000)]
        negatives: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        /// Share of negatives with a non-pneumothorax finding.
        #[arg(long, default_value_t = 0.0)]
        other_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = autothorax_core::synth::SYNTH_SIZE)]
        size: usize,
        /// Write C1 vectors of this width instead of images.
        #[arg(long)]
        vectors: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract feature stores for C1/C2/C3.
    Extract {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "feature", value_enum, ignore_case = true, value_delimiter = ',', default_values_t = [Layout::C1, Layout::C2, Layout::C3])]
        features: Vec<Layout>,
    },
    /// Train one encoder per fold on that fold's archive.
    TrainEncoder {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Retrieve nearest archive neighbors and print them as JSON.
    Search {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, ignore_case = true, default_value_t = Layout::C3)]
        feature: Layout,
        #[arg(long, default_value_t = 11)]
        k: usize,
        #[arg(long)]
        query_id: Option<String>,
        #[arg(long)]
        query_store: Option<PathBuf>,
    },
    /// Cross-validate and write report.json, report.txt and ROC CSVs.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Load per-fold encoders from the checkpoint directory instead of
        /// training them.
        #[arg(long)]
        use_checkpoints: bool,
    },
    /// Print the table of a saved report.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Layout {
    C1,
    C2,
    C3,
}

impl From<Layout> for FeatureConfig {
    fn from(l: Layout) -> Self {
        match l {
            Layout::C1 => FeatureConfig::C1,
            Layout::C2 => FeatureConfig::C2,
            Layout::C3 => FeatureConfig::C3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Threshold {
    Validation,
    Archive,
}

/// Run configuration flags; each overrides the config file value.
#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, ignore_case = true)]
    dataset: Option<Dataset>,
    #[arg(long, value_enum, ignore_case = true)]
    method: Option<Method>,
    #[arg(long, value_enum, ignore_case = true)]
    extractor: Option<ExtractorKind>,
    /// Store of precomputed C3 vectors for the external extractor.
    #[arg(long)]
    external_store: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, ignore_case = true)]
    threshold: Option<Threshold>,
    /// L2-normalize vectors before searching.
    #[arg(long)]
    normalize: bool,
    /// Encoder hidden widths, e.g. `1024,512`.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    pca_components: Option<usize>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    stores: Option<PathBuf>,
    #[arg(long)]
    checkpoints: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, warn: &mut dyn Write) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $flag:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        set!(cfg.dataset, self.dataset);
        set!(cfg.method, self.method);
        set!(cfg.extractor.kind, self.extractor);
        if self.external_store.is_some() {
            cfg.extractor.path = self.external_store.clone();
        }
        set!(cfg.k_list, self.k);
        set!(cfg.folds, self.folds);
        set!(cfg.seed, self.seed);
        if let Some(t) = self.threshold {
            cfg.threshold_mode = match t {
                Threshold::Validation => ThresholdMode::ValidationFold,
                Threshold::Archive => ThresholdMode::ArchiveHeldOut,
            };
        }
        cfg.normalize |= self.normalize;
        if self.schedule.is_some() {
            cfg.encoder.hidden_schedule = self.schedule.clone();
        }
        set!(cfg.encoder.epochs, self.epochs);
        set!(cfg.encoder.batch_size, self.batch_size);
        set!(cfg.pca_components, self.pca_components);
        let p = &mut cfg.paths;
        for (slot, flag) in [
            (&mut p.manifest, &self.manifest),
            (&mut p.images, &self.images),
            (&mut p.stores, &self.stores),
            (&mut p.checkpoints, &self.checkpoints),
            (&mut p.output, &self.output),
        ] {
            if flag.is_some() {
                *slot = flag.clone();
            }
        }
        for w in cfg.validate()? {
            let _ = writeln!(warn, "warning: {w}");
        }
        Ok(cfg)
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let exec = cli.threads.map_or_else(Threads::available, Threads::new);
    let mut say = |s: String| writeln!(out, "{s}").map_err(|e| Error::io("<stdout>", e));
    match cli.command {
        Command::Ingest {
            run,
            assign_folds,
            reassign,
            out: path,
        } => {
            let cfg = run.resolve(err)?;
            let summary = cmd_ingest(&cfg, assign_folds, reassign, &path)?;
            say(json(&summary))
        }
        Command::Synth {
            positives,
            negatives,
            separation,
            other_fraction,
            seed,
            size,
            vectors,
            out: dir,
        } => {
            let req = SynthRequest {
                positives,
                negatives,
                separation,
                other_fraction,
                seed,
                size,
                vector_dim: vectors,
            };
            let m = cmd_synth(&req, &dir, &exec)?;
            say(format!("wrote {} records to {}", m.len(), dir.display()))
        }
        Command::Extract { run, features } => {
            let cfg = run.resolve(err)?;
            let configs: Vec<FeatureConfig> = features.into_iter().map(Into::into).collect();
            for p in cmd_extract(&cfg, &configs, &exec)? {
                say(p.display().to_string())?;
            }
            Ok(())
        }
        Command::TrainEncoder { run } => {
            let cfg = run.resolve(err)?;
            for p in cmd_train_encoder(&cfg, &exec)? {
                say(p.display().to_string())?;
            }
            Ok(())
        }
        Command::Search {
            run,
            feature,
            k,
            query_id,
            query_store,
        } => {
            let cfg = run.resolve(err)?;
            if k == 0 {
                return Err(Error::Usage("k must be positive".into()));
            }
            let sets = cmd_search(&cfg, feature.into(), k, query_id.as_deref(), query_store.as_deref(), &exec)?;
            let rows: Vec<serde_json::Value> = sets
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "query_id": s.query_id,
                        "k": s.k,
                        "hits": s.hits,
                        "likelihood": s.likelihood,
                    })
                })
                .collect();
            if rows.len() == 1 {
                say(json(&rows[0]))
            } else {
                say(json(&rows))
            }
        }
        Command::Evaluate { run, use_checkpoints } => {
            let cfg = run.resolve(err)?;
            let path = cmd_evaluate(&cfg, use_checkpoints, &exec)?;
            say(cmd_report(&path)?)?;
            say(format!("report: {}", path.display()))
        }
        Command::Report { input, format } => match format {
            ReportFormat::Table => say(cmd_report(&input)?),
            ReportFormat::Json => {
                let doc = crate::report::ReportDocument::load(&input)?;
                say(json(&doc.report))
            }
        },
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
