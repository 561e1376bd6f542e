//! Feature compression: the two-step autoencoder pipeline (unsupervised
//! reconstruction, then supervised fine-tuning through a one-unit sigmoid
//! head) and a PCA baseline.

mod pca;

pub use pca::{pca_fit, pca_project, PcaModel, PCA_EXACT_LIMIT, PCA_MAX_SAMPLES};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureConfig, FeatureVector, Label, ENCODED_DIM};
use crate::hash::derive_seed;
use crate::nn::{train, Activation, AdamConfig, DenseLayer, LossKind, Matrix, Network, TrainConfig, TrainHistory};
use crate::{Error, Result};

/// Input widths of the three feature configurations with a 1024-wide extractor.
pub const REPLICATION_INPUT_DIMS: [usize; 3] = [1024, 2048, 3072];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderPipelineConfig {
    pub input_dim: usize,
    pub bottleneck: usize,
    /// Encoder widths between the input and the bottleneck; the decoder
    /// mirrors them in reverse.
    pub hidden_schedule: Vec<usize>,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden_activation: Activation,
    pub adam: AdamConfig,
    /// Enforce the published setup: 256-wide bottleneck, inputs of
    /// 1024/2048/3072 values and fine-tuning before deployment.
    pub replication: bool,
    /// Train on per-dimension standardized inputs (archive statistics) and
    /// fold the affine map into the first layer afterwards, so the
    /// deployed encoder still takes raw vectors.
    #[serde(default = "default_true")]
    pub standardize_inputs: bool,
}

fn default_true() -> bool {
    true
}

impl EncoderPipelineConfig {
    /// Published setup for one of the replication input widths, with the
    /// default taper: `[512]` for 1024 inputs, `[1024, 512]` otherwise.
    pub fn for_input(input_dim: usize) -> Self {
        let hidden_schedule = match input_dim {
            1024 => vec![512],
            2048 | 3072 => vec![1024, 512],
            _ => Vec::new(),
        };
        Self {
            input_dim,
            bottleneck: ENCODED_DIM,
            hidden_schedule,
            dropout: 0.2,
            epochs: 10,
            batch_size: 128,
            hidden_activation: Activation::Relu,
            adam: AdamConfig::default(),
            replication: true,
            standardize_inputs: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replication {
            if self.bottleneck != ENCODED_DIM {
                return Err(Error::Config(format!(
                    "bottleneck must be {ENCODED_DIM} in replication mode, got {}",
                    self.bottleneck
                )));
            }
            if !REPLICATION_INPUT_DIMS.contains(&self.input_dim) {
                return Err(Error::Config(format!(
                    "input width {} is not one of {REPLICATION_INPUT_DIMS:?}",
                    self.input_dim
                )));
            }
        }
        if self.input_dim == 0 || self.bottleneck == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut prev = self.input_dim;
        for &w in self.hidden_schedule.iter().chain(core::iter::once(&self.bottleneck)) {
            if w >= prev {
                return Err(Error::Config(format!(
                    "hidden schedule {:?} must shrink strictly from {} toward the bottleneck {}",
                    self.hidden_schedule, self.input_dim, self.bottleneck
                )));
            }
            prev = w;
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }

    /// Widths of the full autoencoder, input to reconstruction.
    pub fn autoencoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_schedule);
        dims.push(self.bottleneck);
        dims.extend(self.hidden_schedule.iter().rev());
        dims.push(self.input_dim);
        dims
    }

    /// Number of layers from the input up to and including the bottleneck.
    pub fn encoder_layers(&self) -> usize {
        self.hidden_schedule.len() + 1
    }

    /// Dimensionality reduction factor, `input_dim / bottleneck`.
    pub fn compression_factor(&self) -> f64 {
        self.input_dim as f64 / self.bottleneck as f64
    }

    fn train_config(&self, loss: LossKind, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            loss,
            seed,
            adam: self.adam,
        }
    }
}

/// Randomly initialized autoencoder: hidden layers use the configured
/// activation, the bottleneck and reconstruction layers are linear.
pub fn build_autoencoder(cfg: &EncoderPipelineConfig, seed: u64) -> Result<Network<f32>> {
    cfg.validate()?;
    let dims = cfg.autoencoder_dims();
    let enc = cfg.encoder_layers();
    let activations: Vec<Activation> = (0..dims.len() - 1)
        .map(|i| {
            if i + 1 == enc || i + 2 == dims.len() {
                Activation::Linear
            } else {
                cfg.hidden_activation
            }
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Network::init(&dims, &activations, cfg.dropout, &mut rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Encoder + decoder after unsupervised training.
    Autoencoder,
    /// Encoder + one-unit sigmoid head after supervised fine-tuning.
    FineTuned,
}

/// A network at one stage of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub config: EncoderPipelineConfig,
    pub network: Network<f32>,
    pub stage: Stage,
    pub history: TrainHistory,
}

impl PipelineModel {
    /// Head probability `p` for each row (fine-tuned models only).
    pub fn head_probability(&self, vectors: &Matrix<f32>) -> Result<Vec<f32>> {
        if self.stage != Stage::FineTuned {
            return Err(Error::Invalid("only fine-tuned models have a classification head".into()));
        }
        Ok(self.network.predict(vectors)?.into_vec())
    }
}

/// Step 1: reconstruct the inputs under MSE with Adam.
pub fn train_step1_unsupervised(
    mut net: Network<f32>,
    vectors: &Matrix<f32>,
    cfg: &EncoderPipelineConfig,
    seed: u64,
) -> Result<PipelineModel> {
    cfg.validate()?;
    if net.dims() != cfg.autoencoder_dims() {
        return Err(Error::Shape(format!(
            "network widths {:?} do not match the configured autoencoder {:?}",
            net.dims(),
            cfg.autoencoder_dims()
        )));
    }
    if vectors.cols() != cfg.input_dim {
        return Err(Error::Shape(format!(
            "vectors have {} values, encoder expects {}",
            vectors.cols(),
            cfg.input_dim
        )));
    }
    let history = train(&mut net, vectors, vectors, &cfg.train_config(LossKind::Mse, seed))?;
    Ok(PipelineModel {
        config: cfg.clone(),
        network: net,
        stage: Stage::Autoencoder,
        history,
    })
}

/// Step 2: drop the decoder, attach a one-unit sigmoid head behind the
/// bottleneck and train every layer under binary cross-entropy.
pub fn train_step2_finetune(
    autoencoder: &PipelineModel,
    vectors: &Matrix<f32>,
    labels: &[Label],
    seed: u64,
) -> Result<PipelineModel> {
    if autoencoder.stage != Stage::Autoencoder {
        return Err(Error::Invalid("fine-tuning starts from a step-1 autoencoder".into()));
    }
    if labels.len() != vectors.rows() {
        return Err(Error::Shape(format!(
            "{} vectors but {} labels",
            vectors.rows(),
            labels.len()
        )));
    }
    let cfg = &autoencoder.config;
    let encoder = autoencoder.network.truncated(cfg.encoder_layers())?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x4845_4144));
    let head = DenseLayer::init(cfg.bottleneck, 1, Activation::Sigmoid, &mut rng)?;
    let mut layers = encoder.layers().to_vec();
    layers.push(head);
    let mut net = Network::new(layers, cfg.dropout)?;
    let targets = Matrix::from_vec(
        labels.len(),
        1,
        labels.iter().map(|l| if l.is_positive() { 1.0 } else { 0.0 }).collect(),
    )?;
    let history = train(&mut net, vectors, &targets, &cfg.train_config(LossKind::Bce, seed))?;
    Ok(PipelineModel {
        config: cfg.clone(),
        network: net,
        stage: Stage::FineTuned,
        history,
    })
}

/// Deployable encoder producing bottleneck vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    network: Network<f32>,
}

/// Remove the head (or, when `allow_unfinetuned` is set, the decoder of a
/// step-1 model). Replication mode refuses step-1 models.
pub fn strip_to_encoder(model: &PipelineModel, allow_unfinetuned: bool) -> Result<Encoder> {
    let layers = model.config.encoder_layers();
    match model.stage {
        Stage::FineTuned => {}
        Stage::Autoencoder if allow_unfinetuned && !model.config.replication => {}
        Stage::Autoencoder => {
            return Err(Error::Invalid(
                "encoder requested before fine-tuning; disable replication mode to strip a step-1 model".into(),
            ))
        }
    }
    Ok(Encoder {
        network: model.network.truncated(layers)?,
    })
}

impl Encoder {
    /// Wrap an existing network, e.g. one loaded from a checkpoint.
    pub fn from_network(network: Network<f32>) -> Self {
        Self { network }
    }

    pub fn network(&self) -> &Network<f32> {
        &self.network
    }

    pub fn input_dim(&self) -> usize {
        self.network.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.network.out_dim()
    }

    pub fn encode(&self, values: &[f32]) -> Result<Vec<f32>> {
        let m = Matrix::from_vec(1, values.len(), values.to_vec())?;
        Ok(self.network.predict(&m)?.into_vec())
    }

    pub fn encode_batch(&self, batch: &Matrix<f32>) -> Result<Matrix<f32>> {
        self.network.predict(batch)
    }

    /// Encode feature vectors, keeping ids and extractor provenance.
    pub fn encode_vectors(&self, vectors: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
        if vectors.is_empty() {
            return Ok(Vec::new());
        }
        let rows: Vec<&[f32]> = vectors.iter().map(|v| v.values.as_slice()).collect();
        let encoded = self.encode_batch(&Matrix::from_rows(&rows)?)?;
        vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                FeatureVector::new(
                    v.record_id.clone(),
                    encoded.row(i).to_vec(),
                    FeatureConfig::Encoded,
                    v.extractor_id.clone(),
                )
            })
            .collect()
    }
}

/// Outcome of running both training steps.
#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    /// Takes raw vectors; any input scaling is already folded in.
    pub encoder: Encoder,
    /// Step-1 and step-2 networks, in standardized coordinates when
    /// `scaling` is set.
    pub autoencoder: PipelineModel,
    pub fine_tuned: PipelineModel,
    pub scaling: Option<Standardizer>,
}

/// Build, pre-train, fine-tune and strip in one call.
pub fn fit_pipeline(
    cfg: &EncoderPipelineConfig,
    vectors: &Matrix<f32>,
    labels: &[Label],
    seed: u64,
) -> Result<TrainedPipeline> {
    let net = build_autoencoder(cfg, derive_seed(seed, 1))?;
    let scaling = if cfg.standardize_inputs {
        Some(Standardizer::fit(vectors)?)
    } else {
        None
    };
    let scaled;
    let x = match &scaling {
        Some(s) => {
            scaled = s.apply(vectors)?;
            &scaled
        }
        None => vectors,
    };
    let autoencoder = train_step1_unsupervised(net, x, cfg, derive_seed(seed, 2))?;
    let fine_tuned = train_step2_finetune(&autoencoder, x, labels, derive_seed(seed, 3))?;
    let mut encoder = strip_to_encoder(&fine_tuned, false)?;
    if let Some(s) = &scaling {
        encoder = Encoder::from_network(s.fold_into(&encoder.network)?);
    }
    Ok(TrainedPipeline {
        encoder,
        autoencoder,
        fine_tuned,
        scaling,
    })
}

/// Per-dimension affine map `(x - mean) / scale`. Constant dimensions keep
/// scale 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(vectors: &Matrix<f32>) -> Result<Self> {
        let (n, d) = vectors.shape();
        if n == 0 {
            return Err(Error::Empty("standardizer rows"));
        }
        let mut mean = vec![0.0f64; d];
        for i in 0..n {
            for (m, &v) in mean.iter_mut().zip(vectors.row(i)) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0f64; d];
        for i in 0..n {
            for ((s, &v), m) in var.iter_mut().zip(vectors.row(i)).zip(&mean) {
                *s += (f64::from(v) - m) * (f64::from(v) - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = libm::sqrt(s / n as f64);
                if sd > 1e-8 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, vectors: &Matrix<f32>) -> Result<Matrix<f32>> {
        if vectors.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "standardizer fitted on {} values, got {}",
                self.mean.len(),
                vectors.cols()
            )));
        }
        let d = self.mean.len();
        let data = vectors
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| ((f64::from(v) - self.mean[i % d]) / self.scale[i % d]) as f32)
            .collect();
        Matrix::from_vec(vectors.rows(), d, data)
    }

    /// Network on raw inputs equivalent to `net` on standardized ones:
    /// `W' = W / scale` row-wise and `b' = b - W' mean`.
    pub fn fold_into(&self, net: &Network<f32>) -> Result<Network<f32>> {
        let mut layers = net.layers().to_vec();
        let first = &layers[0];
        let (din, dout) = (first.in_dim(), first.out_dim());
        if din != self.mean.len() {
            return Err(Error::Shape(format!("standardizer has {} values, layer takes {din}", self.mean.len())));
        }
        let mut w = Vec::with_capacity(din * dout);
        let mut shift = vec![0.0f64; dout];
        for k in 0..din {
            for j in 0..dout {
                let wk = f64::from(first.weights()[k * dout + j]) / self.scale[k];
                shift[j] += wk * self.mean[k];
                w.push(wk as f32);
            }
        }
        let b = first
            .bias()
            .iter()
            .zip(&shift)
            .map(|(&b, s)| (f64::from(b) - s) as f32)
            .collect();
        layers[0] = DenseLayer::new(din, dout, w, b, first.activation())?;
        Network::new(layers, net.dropout())
    }
}
