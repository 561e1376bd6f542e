//! Deterministic synthetic chest radiographs and feature vectors for tests
//! and desk-scale experiments.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetManifest, DatasetMode, FeatureConfig, FeatureVector, Finding, ImageRecord, Source};
use crate::hash::derive_seed;
use crate::imaging::GrayImage;
use crate::{Error, Result};

pub const SYNTH_SIZE: usize = 256;

/// Standard normal draw (Box-Muller).
pub fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

pub fn synth_id(index: usize) -> String {
    format!("syn-{index:05}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub positives: usize,
    pub negatives: usize,
    /// Share of negatives that show some other finding.
    pub other_fraction: f64,
    /// Strength of the pneumothorax cue; 0 makes the classes identical.
    pub separation: f64,
    pub size: usize,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(positives: usize, negatives: usize, seed: u64) -> Self {
        Self {
            positives,
            negatives,
            other_fraction: 0.0,
            separation: 1.0,
            size: SYNTH_SIZE,
            seed,
        }
    }
}

/// Lazily rendered image set. Index `i` is positive for `i < positives`
/// after a seeded shuffle of the finding list.
#[derive(Debug, Clone)]
pub struct SyntheticImageSet {
    params: SynthParams,
    findings: Vec<Finding>,
}

impl SyntheticImageSet {
    pub fn new(params: SynthParams) -> Result<Self> {
        if params.positives == 0 || params.negatives == 0 {
            return Err(Error::Invalid("synthetic set needs both classes".into()));
        }
        if !(0.0..=1.0).contains(&params.other_fraction) || !params.separation.is_finite() || params.size < 16 {
            return Err(Error::Invalid("bad synthetic parameters".into()));
        }
        let others = (params.negatives as f64 * params.other_fraction) as usize;
        let mut findings = Vec::with_capacity(params.positives + params.negatives);
        findings.extend(core::iter::repeat(Finding::Pneumothorax).take(params.positives));
        findings.extend(core::iter::repeat(Finding::Other).take(others));
        findings.extend(core::iter::repeat(Finding::NoFinding).take(params.negatives - others));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, 0x5348_5546));
        // Fisher-Yates
        for i in (1..findings.len()).rev() {
            let j = rng.gen_range(0..=i);
            findings.swap(i, j);
        }
        Ok(Self { params, findings })
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn params(&self) -> &SynthParams {
        &self.params
    }

    pub fn finding(&self, index: usize) -> Finding {
        self.findings[index]
    }

    pub fn record(&self, index: usize) -> ImageRecord {
        let id = synth_id(index);
        let path = format!("{id}.png");
        ImageRecord::new(id, path, self.findings[index], Source::Synthetic)
    }

    pub fn records(&self) -> Vec<ImageRecord> {
        (0..self.len()).map(|i| self.record(i)).collect()
    }

    /// Manifest in the fully automated mode (all records).
    pub fn manifest(&self) -> Result<DatasetManifest> {
        DatasetManifest::new(self.records(), DatasetMode::FullyAutomated)
    }

    /// Render image `index`.
    pub fn image(&self, index: usize) -> GrayImage {
        let n = self.params.size;
        let nf = n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.params.seed, index as u64 + 1));
        let body = 0.62 + 0.06 * (rng.gen::<f64>() - 0.5);
        let shift = 0.03 * nf * (rng.gen::<f64>() - 0.5);
        let lung_rx = nf * (0.17 + 0.02 * rng.gen::<f64>());
        let lung_ry = nf * (0.30 + 0.03 * rng.gen::<f64>());
        let cy = nf * 0.48;
        let centers = [nf * 0.30 + shift, nf * 0.70 + shift];
        let lung_level = 0.22 + 0.05 * rng.gen::<f64>();

        let finding = self.findings[index];
        // Positives: bright band along the apex of one lung.
        let side = usize::from(rng.gen::<bool>());
        let rim_gain = 0.35 * self.params.separation;
        // Other findings: a soft opacity somewhere inside a lung.
        let blob_side = usize::from(rng.gen::<bool>());
        let blob_dy = (rng.gen::<f64>() - 0.3) * lung_ry;
        let blob_r = nf * (0.05 + 0.04 * rng.gen::<f64>());

        let mut pixels = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
                let edge = libm::fabs(xf - nf / 2.0) / (nf / 2.0);
                let mut v = body * (1.0 - 0.35 * edge * edge);
                for (l, &cx) in centers.iter().enumerate() {
                    let dx = (xf - cx) / lung_rx;
                    let dy = (yf - cy) / lung_ry;
                    let r2 = dx * dx + dy * dy;
                    if r2 < 1.0 {
                        let mut lv = lung_level + 0.08 * r2;
                        if finding == Finding::Pneumothorax && l == side && dy < -0.2 && r2 > 0.55 {
                            lv += rim_gain * (1.0 - libm::fabs(dx));
                        }
                        if finding == Finding::Other && l == blob_side {
                            let bx = xf - cx;
                            let by = yf - (cy + blob_dy);
                            let d2 = (bx * bx + by * by) / (blob_r * blob_r);
                            lv += 0.25 * libm::exp(-d2);
                        }
                        v = lv;
                    }
                }
                v += 0.02 * gaussian(&mut rng);
                pixels.push(v.clamp(0.0, 1.0) as f32);
            }
        }
        GrayImage::new(n, n, pixels).expect("square synthetic image")
    }
}

/// Gaussian class-conditional vectors: negatives ~ N(0, I), positives
/// ~ N(mu, I) with `|mu| = separation` spread evenly over all dims. The
/// Bayes-optimal AUC is `Phi(separation / sqrt(2))`.
pub fn synth_vectors(
    positives: usize,
    negatives: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<(DatasetManifest, Vec<FeatureVector>)> {
    if dim == 0 {
        return Err(Error::Invalid("dim must be positive".into()));
    }
    let set = SyntheticImageSet::new(SynthParams {
        separation,
        ..SynthParams::new(positives, negatives, seed)
    })?;
    let shift = separation / libm::sqrt(dim as f64);
    let manifest = set.manifest()?;
    let vectors = (0..set.len())
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ 0x5645_4354, i as u64));
            let mu = if set.finding(i) == Finding::Pneumothorax { shift } else { 0.0 };
            let values = (0..dim).map(|_| (mu + gaussian(&mut rng)) as f32).collect();
            FeatureVector::new(synth_id(i), values, FeatureConfig::C1, "synthetic-gaussian")
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let set = SyntheticImageSet::new(SynthParams::new(5, 7, 3)).unwrap();
        assert_eq!(set.len(), 12);
        let pos = (0..12).filter(|&i| set.finding(i) == Finding::Pneumothorax).count();
        assert_eq!(pos, 5);
        assert_eq!(set.image(4), set.image(4));
        assert_ne!(set.image(4).pixels(), set.image(5).pixels());
        let again = SyntheticImageSet::new(SynthParams::new(5, 7, 3)).unwrap();
        assert_eq!(set.image(9), again.image(9));
    }

    #[test]
    fn other_fraction() {
        let mut p = SynthParams::new(4, 10, 1);
        p.other_fraction = 0.5;
        let set = SyntheticImageSet::new(p).unwrap();
        let m = set.manifest().unwrap();
        assert_eq!(m.with_mode(DatasetMode::SemiAutomated).len(), 9);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let xs: Vec<f64> = (0..20000).map(|_| gaussian(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.05);
    }
}
