//! Preprocessing and the three chest-side feature configurations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{FeatureConfig, FeatureVector};
use crate::{Error, Result};

/// Side length every network input is resized to.
pub const INPUT_SIZE: usize = 224;
/// Patch grid of the baseline extractor (32 x 32 = 1024 features).
pub const BASELINE_GRID: usize = 32;
pub const BASELINE_DIM: usize = BASELINE_GRID * BASELINE_GRID;
pub const BASELINE_ID: &str = "baseline-pool-32x32";

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("image"));
        }
        if pixels.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Invalid("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::new(width, height, alloc::vec![value; width * height])
    }

    /// 8-bit grayscale samples.
    pub fn from_gray8(width: usize, height: usize, samples: &[u8]) -> Result<Self> {
        Self::new(width, height, samples.iter().map(|&s| f32::from(s) / 255.0).collect())
    }

    /// 8-bit interleaved RGB, converted with 0.299/0.587/0.114 luminance weights.
    pub fn from_rgb8(width: usize, height: usize, samples: &[u8]) -> Result<Self> {
        if samples.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{width}x{height} RGB image needs {} samples, got {}",
                width * height * 3,
                samples.len()
            )));
        }
        let pixels = samples
            .chunks_exact(3)
            .map(|c| {
                let y = 0.299 * f32::from(c[0]) + 0.587 * f32::from(c[1]) + 0.114 * f32::from(c[2]);
                (y / 255.0).clamp(0.0, 1.0)
            })
            .collect();
        Self::new(width, height, pixels)
    }

    /// Quantize back to 8-bit samples.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| libm::roundf(p * 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / self.pixels.len() as f64
    }

    fn columns(&self, cols: impl Iterator<Item = usize> + Clone) -> GrayImage {
        let mut pixels = Vec::new();
        for y in 0..self.height {
            let row = &self.pixels[y * self.width..(y + 1) * self.width];
            pixels.extend(cols.clone().map(|x| row[x]));
        }
        let width = pixels.len() / self.height;
        GrayImage {
            width,
            height: self.height,
            pixels,
        }
    }
}

/// Source coordinate for a destination index under half-pixel alignment.
fn source_coord(dst: usize, scale: f64, src_len: usize) -> (usize, usize, f32) {
    let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let lo = s as usize;
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, (s - lo as f64) as f32)
}

/// Bilinear resize with pixel-center alignment and edge clamping.
pub fn resize(image: &GrayImage, width: usize, height: usize) -> Result<GrayImage> {
    if width == 0 || height == 0 {
        return Err(Error::Invalid(format!("target size {width}x{height} is empty")));
    }
    if image.width == width && image.height == height {
        return Ok(image.clone());
    }
    let sx = image.width as f64 / width as f64;
    let sy = image.height as f64 / height as f64;
    let xs: Vec<_> = (0..width).map(|x| source_coord(x, sx, image.width)).collect();
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        let (y0, y1, fy) = source_coord(y, sy, image.height);
        let r0 = &image.pixels[y0 * image.width..(y0 + 1) * image.width];
        let r1 = &image.pixels[y1 * image.width..(y1 + 1) * image.width];
        for &(x0, x1, fx) in &xs {
            let top = r0[x0] + (r0[x1] - r0[x0]) * fx;
            let bottom = r1[x0] + (r1[x1] - r1[x0]) * fx;
            pixels.push((top + (bottom - top) * fy).clamp(0.0, 1.0));
        }
    }
    Ok(GrayImage { width, height, pixels })
}

/// Viewer-left half and horizontally mirrored right half. For odd widths the
/// center column belongs to neither side.
pub fn split_and_flip(image: &GrayImage) -> Result<(GrayImage, GrayImage)> {
    if image.width < 2 {
        return Err(Error::Invalid(format!("cannot split an image {} pixel(s) wide", image.width)));
    }
    let half = image.width / 2;
    let right_start = image.width - half;
    let left = image.columns(0..half);
    let right_flipped = image.columns((right_start..image.width).rev());
    Ok((left, right_flipped))
}

/// 32 x 32 grid of patch means over the 224 x 224 resized image.
pub fn baseline_extract(image: &GrayImage) -> Result<Vec<f32>> {
    let img = resize(image, INPUT_SIZE, INPUT_SIZE)?;
    let patch = INPUT_SIZE / BASELINE_GRID;
    let norm = (patch * patch) as f64;
    let mut out = Vec::with_capacity(BASELINE_DIM);
    for gy in 0..BASELINE_GRID {
        for gx in 0..BASELINE_GRID {
            let mut acc = 0.0f64;
            for y in gy * patch..(gy + 1) * patch {
                let row = &img.pixels[y * INPUT_SIZE + gx * patch..y * INPUT_SIZE + (gx + 1) * patch];
                acc += row.iter().map(|&p| f64::from(p)).sum::<f64>();
            }
            out.push((acc / norm) as f32);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorKind {
    BaselinePool,
    ExternalFile,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorSpec {
    pub extractor_id: String,
    pub base_dim: usize,
    pub kind: ExtractorKind,
}

impl ExtractorSpec {
    pub fn baseline() -> Self {
        Self {
            extractor_id: BASELINE_ID.into(),
            base_dim: BASELINE_DIM,
            kind: ExtractorKind::BaselinePool,
        }
    }
}

/// Vectors computed elsewhere, keyed by record id.
#[derive(Debug, Clone, Default)]
pub struct ExternalVectors {
    spec_id: String,
    base_dim: usize,
    by_id: BTreeMap<String, FeatureVector>,
}

impl ExternalVectors {
    /// All vectors must share one configuration and extractor id.
    pub fn new(vectors: Vec<FeatureVector>, base_dim: usize) -> Result<Self> {
        let first = vectors.first().ok_or(Error::Empty("external vectors"))?;
        let spec_id = first.extractor_id.clone();
        let config = first.config;
        let mut by_id = BTreeMap::new();
        for v in vectors {
            if v.config != config || v.extractor_id != spec_id {
                return Err(Error::Invalid("external vectors mix configurations or extractors".into()));
            }
            v.check_dim(base_dim)?;
            if by_id.contains_key(&v.record_id) {
                return Err(Error::DuplicateId(v.record_id));
            }
            by_id.insert(v.record_id.clone(), v);
        }
        Ok(Self { spec_id, base_dim, by_id })
    }

    pub fn spec(&self) -> ExtractorSpec {
        ExtractorSpec {
            extractor_id: self.spec_id.clone(),
            base_dim: self.base_dim,
            kind: ExtractorKind::ExternalFile,
        }
    }

    /// Look up a record, slicing blocks out of a wider stored layout when the
    /// requested configuration is a sub-block (C1 from C3, C2 from C3).
    pub fn lookup(&self, record_id: &str, config: FeatureConfig) -> Result<FeatureVector> {
        let v = self
            .by_id
            .get(record_id)
            .ok_or_else(|| Error::MissingRecord(record_id.into()))?;
        let n = self.base_dim;
        let values = match (v.config, config) {
            (a, b) if a == b => v.values.clone(),
            (FeatureConfig::C3, FeatureConfig::C2) => v.values[..2 * n].to_vec(),
            (FeatureConfig::C3, FeatureConfig::C1) => v.values[2 * n..].to_vec(),
            (have, want) => {
                return Err(Error::Invalid(format!(
                    "external vectors hold {have:?}; cannot derive {want:?}"
                )))
            }
        };
        FeatureVector::new(record_id, values, config, self.spec_id.clone())
    }
}

/// Feature extractor backends.
#[derive(Debug, Clone)]
pub enum Extractor {
    Baseline,
    External(ExternalVectors),
}

impl Extractor {
    pub fn spec(&self) -> ExtractorSpec {
        match self {
            Extractor::Baseline => ExtractorSpec::baseline(),
            Extractor::External(e) => e.spec(),
        }
    }

    /// Extract one record in the requested configuration. The baseline
    /// backend needs the image; the external backend only the id.
    pub fn extract(&self, record_id: &str, image: Option<&GrayImage>, config: FeatureConfig) -> Result<FeatureVector> {
        match self {
            Extractor::Baseline => {
                let image = image.ok_or_else(|| Error::Invalid(format!("no image supplied for `{record_id}`")))?;
                extract_config(record_id, image, config)
            }
            Extractor::External(e) => e.lookup(record_id, config),
        }
    }
}

/// Baseline-extractor features for one image in configuration C1, C2 or C3.
///
/// The whole image is resized to 224 x 224, split into halves, and each half
/// is resized back to 224 x 224 before extraction. Block order is
/// `[left, right_flipped, whole]`.
pub fn extract_config(record_id: &str, image: &GrayImage, config: FeatureConfig) -> Result<FeatureVector> {
    let whole = resize(image, INPUT_SIZE, INPUT_SIZE)?;
    let mut values = Vec::with_capacity(config.expected_dim(BASELINE_DIM));
    if matches!(config, FeatureConfig::C2 | FeatureConfig::C3) {
        let (left, right) = split_and_flip(&whole)?;
        values.extend(baseline_extract(&resize(&left, INPUT_SIZE, INPUT_SIZE)?)?);
        values.extend(baseline_extract(&resize(&right, INPUT_SIZE, INPUT_SIZE)?)?);
    }
    match config {
        FeatureConfig::C1 | FeatureConfig::C3 => values.extend(baseline_extract(&whole)?),
        FeatureConfig::C2 => {}
        FeatureConfig::Encoded => {
            return Err(Error::Invalid("encoded vectors come from an encoder, not an extractor".into()))
        }
    }
    FeatureVector::new(record_id, values, config, BASELINE_ID)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn row(values: &[f32]) -> GrayImage {
        GrayImage::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(37, 91, 0.5).unwrap();
        let out = resize(&img, 224, 224).unwrap();
        assert_eq!((out.width(), out.height()), (224, 224));
        assert!(out.pixels().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn upsampled_ramp_is_monotone() {
        let out = resize(&row(&[0.0, 1.0]), 4, 1).unwrap();
        assert!(out.pixels().windows(2).all(|w| w[0] <= w[1]), "{:?}", out.pixels());
        assert_eq!(out.pixels(), &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn split_even_and_odd() {
        let (l, r) = split_and_flip(&row(&[0.1, 0.2, 0.3, 0.4])).unwrap();
        assert_eq!(l.pixels(), &[0.1, 0.2]);
        assert_eq!(r.pixels(), &[0.4, 0.3]);
        let (l, r) = split_and_flip(&row(&[0.1, 0.2, 0.3, 0.4, 0.5])).unwrap();
        assert_eq!(l.pixels(), &[0.1, 0.2]);
        assert_eq!(r.pixels(), &[0.5, 0.4]);
        assert!(split_and_flip(&row(&[0.3])).is_err());
    }

    #[test]
    fn mirror_symmetric_split_matches() {
        let img = GrayImage::new(4, 2, vec![0.1, 0.7, 0.7, 0.1, 0.3, 0.9, 0.9, 0.3]).unwrap();
        let (l, r) = split_and_flip(&img).unwrap();
        assert_eq!(l, r);
    }

    #[test]
    fn baseline_constant_and_halves() {
        let f = baseline_extract(&GrayImage::filled(224, 224, 0.25).unwrap()).unwrap();
        assert_eq!(f.len(), 1024);
        assert!(f.iter().all(|&v| v == 0.25));

        let px: Vec<f32> = (0..224 * 224).map(|i| if i % 224 < 112 { 0.0 } else { 1.0 }).collect();
        let f = baseline_extract(&GrayImage::new(224, 224, px).unwrap()).unwrap();
        for gy in 0..32 {
            for gx in 0..32 {
                let want = if gx < 16 { 0.0 } else { 1.0 };
                assert!((f[gy * 32 + gx] - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn config_dims() {
        let img = GrayImage::filled(50, 40, 0.3).unwrap();
        assert_eq!(extract_config("a", &img, FeatureConfig::C1).unwrap().dim(), 1024);
        assert_eq!(extract_config("a", &img, FeatureConfig::C2).unwrap().dim(), 2048);
        assert_eq!(extract_config("a", &img, FeatureConfig::C3).unwrap().dim(), 3072);
        assert!(extract_config("a", &img, FeatureConfig::Encoded).is_err());
    }

    #[test]
    fn external_lookup_and_slicing() {
        let vals: Vec<f32> = (0..6).map(|i| i as f32).collect();
        let ext = ExternalVectors::new(
            vec![FeatureVector::new("a", vals, FeatureConfig::C3, "dn121").unwrap()],
            2,
        )
        .unwrap();
        let ex = Extractor::External(ext);
        assert_eq!(ex.extract("a", None, FeatureConfig::C2).unwrap().values, vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(ex.extract("a", None, FeatureConfig::C1).unwrap().values, vec![4.0, 5.0]);
        assert_eq!(ex.extract("zz", None, FeatureConfig::C3), Err(Error::MissingRecord("zz".into())));
        assert_eq!(ex.spec().kind, ExtractorKind::ExternalFile);
    }

    #[test]
    fn rgb_luminance() {
        let img = GrayImage::from_rgb8(1, 1, &[255, 255, 255]).unwrap();
        assert!((img.get(0, 0) - 1.0).abs() < 1e-6);
        let img = GrayImage::from_rgb8(1, 1, &[255, 0, 0]).unwrap();
        assert!((img.get(0, 0) - 0.299).abs() < 1e-6);
    }
}
