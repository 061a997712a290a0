//! The bridge module: pooled spectrogram-similarity features, a linear
//! predictor of the agreement score `S`, the clip to the mixing
//! coefficient `S'`, the MSE/SGD training loop, and model serialization.
//!
//! The model is deliberately tiny — a handful of weights over pooled
//! cosine-similarity statistics — so it can be trained from labels that are
//! nothing more than "pure speech" (1) and "pure noise" (0), without
//! touching the recognizer.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oa::aligned_len;
use crate::sample::Sample;
use crate::spectral::{frame_cosine_similarity, stft_slice, SpectralError, StftConfig};
use crate::wav::{read_wav, WavError, Waveform};

/// Default clip floor of the mixing coefficient: at least 60% of the
/// original observation always survives the blend.
pub const DEFAULT_CLIP_FLOOR: f64 = 0.6;
/// Default clip ceiling.
pub const DEFAULT_CLIP_CEIL: f64 = 1.0;

/// Floor on the per-feature standard deviation used by the internal
/// train-time standardization. Similarity statistics live in [0, 1], so
/// 0.05 is 5% of the full feature range: features that barely vary over
/// the training set are left near their natural scale instead of being
/// blown up to unit variance, which keeps the folded-back weights from
/// leaning on statistics that carry almost no spread.
const STD_FLOOR: f64 = 0.05;

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("feature dimension mismatch: model has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("signal lengths {left} and {right} differ by more than 1%")]
    LengthMismatch { left: usize, right: usize },
    #[error("sample rates differ: {left_hz} Hz vs {right_hz} Hz")]
    SampleRateMismatch { left_hz: u32, right_hz: u32 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {value} outside [0, 1]")]
    InvalidLabel { value: f64 },
    #[error("empty training dataset")]
    EmptyDataset,
    #[error("cannot read training item {path}: {source}")]
    ItemRead {
        path: String,
        #[source]
        source: WavError,
    },
    #[error("training item {path}: noisy ({noisy_len}) and enhanced ({enhanced_len}) lengths differ by more than 1%")]
    ItemLengthMismatch { path: String, noisy_len: usize, enhanced_len: usize },
    #[error("training item {path}: {len} samples is shorter than one {window_len}-sample STFT window")]
    ItemTooShort { path: String, len: usize, window_len: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("model file has format_version {found}, expected 1")]
    VersionMismatch { found: u64 },
    #[error("model file violates the schema: {reason}")]
    SchemaViolation { reason: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Pooling statistics over the valid similarity frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Std,
    Min,
    Max,
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Std => "std",
            Statistic::Min => "min",
            Statistic::Max => "max",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "mean" => Some(Statistic::Mean),
            "std" => Some(Statistic::Std),
            "min" => Some(Statistic::Min),
            "max" => Some(Statistic::Max),
            _ => None,
        }
    }
}

/// Ordered, duplicate-free list of pooling statistics; its length is the
/// feature (and weight) dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureConfig {
    statistics: Vec<Statistic>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { statistics: vec![Statistic::Mean, Statistic::Std, Statistic::Min, Statistic::Max] }
    }
}

impl FeatureConfig {
    pub fn new(statistics: Vec<Statistic>) -> Result<Self, BridgeError> {
        if statistics.is_empty() {
            return Err(BridgeError::InvalidConfig { reason: "feature statistics list is empty".into() });
        }
        for (i, s) in statistics.iter().enumerate() {
            if statistics[..i].contains(s) {
                return Err(BridgeError::InvalidConfig {
                    reason: format!("duplicate feature statistic {:?}", s.name()),
                });
            }
        }
        Ok(Self { statistics })
    }

    pub fn statistics(&self) -> &[Statistic] {
        &self.statistics
    }

    pub fn dim(&self) -> usize {
        self.statistics.len()
    }
}

/// A pooled feature vector plus the degenerate-input flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Features<T: Sample> {
    pub values: Vec<T>,
    /// True when no similarity frame was valid (all-silent input); the
    /// feature vector is all zeros in that case.
    pub silent: bool,
}

/// The trained bridge: a linear map over pooled similarity features and the
/// clip range applied to its output.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeModel<T: Sample> {
    weights: Vec<T>,
    bias: T,
    clip_floor: T,
    clip_ceil: T,
    feature_config: FeatureConfig,
    stft_config: StftConfig,
}

impl<T: Sample> BridgeModel<T> {
    pub fn new(
        weights: Vec<T>,
        bias: T,
        clip_floor: T,
        clip_ceil: T,
        feature_config: FeatureConfig,
        stft_config: StftConfig,
    ) -> Result<Self, BridgeError> {
        if weights.len() != feature_config.dim() {
            return Err(BridgeError::DimensionMismatch {
                expected: feature_config.dim(),
                got: weights.len(),
            });
        }
        if !weights.iter().chain([&bias]).all(|v| v.is_finite()) {
            return Err(BridgeError::InvalidConfig { reason: "non-finite weight or bias".into() });
        }
        let (floor, ceil) = (clip_floor.to_f64_lossy(), clip_ceil.to_f64_lossy());
        if !(0.0..=1.0).contains(&floor) || !(0.0..=1.0).contains(&ceil) || floor >= ceil {
            return Err(BridgeError::InvalidConfig {
                reason: format!("clip range [{floor}, {ceil}] must satisfy 0 <= floor < ceil <= 1"),
            });
        }
        stft_config.validate()?;
        Ok(Self { weights, bias, clip_floor, clip_ceil, feature_config, stft_config })
    }

    /// A zeroed model with bias 0.5 (the label midpoint): the optimizer's
    /// deterministic starting point.
    pub fn initial(feature_config: FeatureConfig, stft_config: StftConfig) -> Result<Self, BridgeError> {
        let dim = feature_config.dim();
        Self::new(
            vec![T::zero(); dim],
            T::from_f64_const(0.5),
            T::from_f64_const(DEFAULT_CLIP_FLOOR),
            T::from_f64_const(DEFAULT_CLIP_CEIL),
            feature_config,
            stft_config,
        )
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> T {
        self.bias
    }

    pub fn clip_floor(&self) -> T {
        self.clip_floor
    }

    pub fn clip_ceil(&self) -> T {
        self.clip_ceil
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.feature_config
    }

    pub fn stft_config(&self) -> &StftConfig {
        &self.stft_config
    }

    /// Features, score, and coefficient for one noisy/enhanced pair.
    pub fn predict_pair(&self, noisy: &Waveform<T>, enhanced: &Waveform<T>) -> Result<Prediction<T>, BridgeError> {
        let features = extract_features(noisy, enhanced, &self.feature_config, &self.stft_config)?;
        let (s, s_prime) = predict(self, &features.values)?;
        Ok(Prediction { s, s_prime, silent: features.silent })
    }
}

/// Output of [`BridgeModel::predict_pair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<T: Sample> {
    /// Pre-clip agreement score.
    pub s: T,
    /// Clipped mixing coefficient.
    pub s_prime: T,
    /// True when the input pair had no valid similarity frames.
    pub silent: bool,
}

/// Pools a similarity sequence into the configured statistics. Population
/// standard deviation, so a single valid frame is still well-defined.
fn pooled_stats<T: Sample>(values: &[T], cfg: &FeatureConfig) -> Vec<T> {
    debug_assert!(!values.is_empty());
    let n = T::from_f64_const(values.len() as f64);
    let mean = values.iter().copied().sum::<T>() / n;
    cfg.statistics
        .iter()
        .map(|stat| match stat {
            Statistic::Mean => mean,
            Statistic::Std => {
                let var = values.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / n;
                var.sqrt()
            }
            Statistic::Min => values.iter().copied().fold(T::infinity(), T::min),
            Statistic::Max => values.iter().copied().fold(T::neg_infinity(), T::max),
        })
        .collect()
}

/// Feature extraction on pre-aligned sample slices.
fn featurize_slices<T: Sample>(
    noisy: &[T],
    enhanced: &[T],
    sample_rate_hz: u32,
    cfg: &FeatureConfig,
    stft_cfg: &StftConfig,
) -> Result<Features<T>, BridgeError> {
    let a = stft_slice(noisy, sample_rate_hz, stft_cfg)?;
    let b = stft_slice(enhanced, sample_rate_hz, stft_cfg)?;
    let sim = frame_cosine_similarity(&a, &b)?;
    let valid: Vec<T> = sim.valid_values().collect();
    if valid.is_empty() {
        return Ok(Features { values: vec![T::zero(); cfg.dim()], silent: true });
    }
    Ok(Features { values: pooled_stats(&valid, cfg), silent: false })
}

/// Pooled cosine-similarity features for a noisy/enhanced pair.
///
/// Lengths are aligned by truncation to the shorter signal (more than 1%
/// difference is an error). Statistics run over valid similarity frames
/// only; if every frame is silent the result is the all-zero vector with
/// the `silent` flag set.
pub fn extract_features<T: Sample>(
    noisy: &Waveform<T>,
    enhanced: &Waveform<T>,
    cfg: &FeatureConfig,
    stft_cfg: &StftConfig,
) -> Result<Features<T>, BridgeError> {
    if noisy.sample_rate_hz != enhanced.sample_rate_hz {
        return Err(BridgeError::SampleRateMismatch {
            left_hz: noisy.sample_rate_hz,
            right_hz: enhanced.sample_rate_hz,
        });
    }
    let len = aligned_len(noisy.len(), enhanced.len())
        .map_err(|_| BridgeError::LengthMismatch { left: noisy.len(), right: enhanced.len() })?;
    featurize_slices(&noisy.samples[..len], &enhanced.samples[..len], noisy.sample_rate_hz, cfg, stft_cfg)
}

/// `clip(s) = max(floor, min(ceil, s))`; the inference-time constraint on
/// the mixing coefficient. Callers guarantee `floor < ceil`.
pub fn clip<T: Sample>(s: T, floor: T, ceil: T) -> T {
    s.min(ceil).max(floor)
}

/// Linear score and clipped coefficient: `S = w'f + b`,
/// `S' = clip(S, floor, ceil)`.
pub fn predict<T: Sample>(model: &BridgeModel<T>, features: &[T]) -> Result<(T, T), BridgeError> {
    if features.len() != model.weights.len() {
        return Err(BridgeError::DimensionMismatch { expected: model.weights.len(), got: features.len() });
    }
    let s = dot(&model.weights, features) + model.bias;
    Ok((s, clip(s, model.clip_floor, model.clip_ceil)))
}

fn dot<T: Sample>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn linear_loss_grad<T: Sample>(weights: &[T], bias: T, batch: &[(Vec<T>, T)]) -> (T, Vec<T>, T) {
    let n = T::from_f64_const(batch.len() as f64);
    let mut loss = T::zero();
    let mut grad_w = vec![T::zero(); weights.len()];
    let mut grad_b = T::zero();
    let two = T::from_f64_const(2.0);
    for (features, label) in batch {
        let err = dot(weights, features) + bias - *label;
        loss += err * err;
        for (g, f) in grad_w.iter_mut().zip(features) {
            *g += two * err * *f;
        }
        grad_b += two * err;
    }
    loss = loss / n;
    for g in grad_w.iter_mut() {
        *g = *g / n;
    }
    grad_b = grad_b / n;
    (loss, grad_w, grad_b)
}

/// Mean squared error of the **pre-clip** score over a batch, with its
/// analytic gradient: `grad_w = mean(2*(S-y)*f)`, `grad_b = mean(2*(S-y))`.
///
/// Clipping is excluded from the training graph — a hard clip has zero
/// gradient outside its range and would stall learning; it constrains only
/// the final output.
pub fn loss_and_grad<T: Sample>(
    model: &BridgeModel<T>,
    batch: &[(Vec<T>, T)],
) -> Result<(T, Vec<T>, T), BridgeError> {
    if batch.is_empty() {
        return Err(BridgeError::EmptyBatch);
    }
    for (features, label) in batch {
        if features.len() != model.weights.len() {
            return Err(BridgeError::DimensionMismatch {
                expected: model.weights.len(),
                got: features.len(),
            });
        }
        let y = label.to_f64_lossy();
        if !(0.0..=1.0).contains(&y) {
            return Err(BridgeError::InvalidLabel { value: y });
        }
    }
    Ok(linear_loss_grad(&model.weights, model.bias, batch))
}

/// SGD hyperparameters. The defaults are the ones the rest of the toolkit
/// assumes: lr 1e-4, momentum 0.9, batch 32, 2 s crops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub crop_len_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            momentum: 0.9,
            batch_size: 32,
            epochs: 50,
            seed: 0,
            crop_len_samples: 32_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), BridgeError> {
        // learning_rate == 0 is allowed: it degenerates to "return the
        // initialization", which is occasionally useful as a baseline.
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(BridgeError::InvalidConfig {
                reason: format!("learning_rate {} must be finite and >= 0", self.learning_rate),
            });
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(BridgeError::InvalidConfig {
                reason: format!("momentum {} must be in [0, 1)", self.momentum),
            });
        }
        if self.batch_size == 0 {
            return Err(BridgeError::InvalidConfig { reason: "batch_size must be positive".into() });
        }
        if self.epochs == 0 {
            return Err(BridgeError::InvalidConfig { reason: "epochs must be positive".into() });
        }
        if self.crop_len_samples == 0 {
            return Err(BridgeError::InvalidConfig { reason: "crop_len_samples must be positive".into() });
        }
        Ok(())
    }
}

/// One training pair on disk plus its target (1 for pure speech, 0 for
/// pure noise; fractional targets are accepted).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem {
    pub noisy_path: std::path::PathBuf,
    pub enhanced_path: std::path::PathBuf,
    pub label: f64,
}

/// Trained model plus per-epoch mean losses and any non-fatal warnings.
#[derive(Debug, Clone)]
pub struct TrainOutcome<T: Sample> {
    pub model: BridgeModel<T>,
    /// Mean training loss of each epoch (averaged over the batches as they
    /// were visited).
    pub epoch_losses: Vec<f64>,
    pub warnings: Vec<String>,
}

struct LoadedPair<T: Sample> {
    noisy: Vec<T>,
    enhanced: Vec<T>,
    label: T,
    len: usize,
}

/// Trains the linear bridge with SGD plus classical momentum
/// (`v <- momentum*v - lr*grad; param <- param + v`).
///
/// Weights start at zero and the bias at 0.5; batches are reshuffled every
/// epoch and each pair longer than `crop_len_samples` is re-cropped at a
/// seeded random offset every epoch, all from one seeded generator, so a
/// fixed seed reproduces the model bit-for-bit (single-threaded by design).
///
/// Internally, features are standardized to zero mean / unit variance over
/// the (uncropped) training set before optimization and the affine change
/// of variables is folded back into the returned weights and bias at the
/// end. The similarity statistics live on wildly different scales, and
/// without this the default learning rate is orders of magnitude too small
/// to converge; the returned model is still a plain linear map over raw
/// features and `learning_rate == 0` still returns the exact
/// initialization.
pub fn train<T: Sample>(
    dataset: &[TrainItem],
    cfg: &TrainConfig,
    feature_cfg: &FeatureConfig,
    stft_cfg: &StftConfig,
) -> Result<TrainOutcome<T>, BridgeError> {
    cfg.validate()?;
    stft_cfg.validate()?;
    if dataset.is_empty() {
        return Err(BridgeError::EmptyDataset);
    }
    if cfg.crop_len_samples < stft_cfg.window_len {
        return Err(BridgeError::InvalidConfig {
            reason: format!(
                "crop_len_samples {} is shorter than the {}-sample STFT window",
                cfg.crop_len_samples, stft_cfg.window_len
            ),
        });
    }

    let mut warnings = Vec::new();
    let mut pairs: Vec<LoadedPair<T>> = Vec::with_capacity(dataset.len());
    for item in dataset {
        if !(0.0..=1.0).contains(&item.label) {
            return Err(BridgeError::InvalidLabel { value: item.label });
        }
        let display = item.noisy_path.display().to_string();
        let noisy: Waveform<T> = read_wav(&item.noisy_path)
            .map_err(|e| BridgeError::ItemRead { path: display.clone(), source: e })?;
        let enhanced: Waveform<T> = read_wav(&item.enhanced_path)
            .map_err(|e| BridgeError::ItemRead { path: item.enhanced_path.display().to_string(), source: e })?;
        let len = aligned_len(noisy.len(), enhanced.len()).map_err(|_| BridgeError::ItemLengthMismatch {
            path: display.clone(),
            noisy_len: noisy.len(),
            enhanced_len: enhanced.len(),
        })?;
        if len < stft_cfg.window_len {
            return Err(BridgeError::ItemTooShort { path: display, len, window_len: stft_cfg.window_len });
        }
        pairs.push(LoadedPair {
            noisy: noisy.samples,
            enhanced: enhanced.samples,
            label: T::from_f64_const(item.label),
            len,
        });
    }

    if dataset.windows(2).all(|w| w[0].label == w[1].label) && dataset.len() > 1 || dataset.len() == 1 {
        warnings.push(
            "single-class dataset: every item has the same label; the model cannot learn a contrast"
                .to_string(),
        );
    }

    let dim = feature_cfg.dim();
    let rate = crate::wav::PIPELINE_SAMPLE_RATE_HZ;

    // Standardization statistics from the full-length pairs (no crops, no
    // randomness), computed once.
    let mut full_features: Vec<Vec<T>> = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let f = featurize_slices(&p.noisy[..p.len], &p.enhanced[..p.len], rate, feature_cfg, stft_cfg)?;
        if f.silent {
            warnings.push(format!(
                "training item {} ({}): no valid similarity frames; features are all zero",
                i,
                dataset[i].noisy_path.display()
            ));
        }
        full_features.push(f.values);
    }
    let n_t = T::from_f64_const(pairs.len() as f64);
    let mut mu = vec![T::zero(); dim];
    for f in &full_features {
        for (m, v) in mu.iter_mut().zip(f) {
            *m += *v;
        }
    }
    for m in mu.iter_mut() {
        *m = *m / n_t;
    }
    let mut sd = vec![T::zero(); dim];
    for f in &full_features {
        for (s, (v, m)) in sd.iter_mut().zip(f.iter().zip(&mu)) {
            let d = *v - *m;
            *s += d * d;
        }
    }
    let floor = T::from_f64_const(STD_FLOOR);
    for s in sd.iter_mut() {
        *s = (*s / n_t).sqrt();
        if *s < floor {
            *s = floor;
        }
    }
    let standardize = |values: &[T]| -> Vec<T> {
        values.iter().zip(mu.iter().zip(&sd)).map(|(v, (m, s))| (*v - *m) / *s).collect()
    };

    // Features of items at or under the crop length never change; cache them.
    let cached: Vec<Option<Vec<T>>> = pairs
        .iter()
        .zip(&full_features)
        .map(|(p, f)| (p.len <= cfg.crop_len_samples).then(|| standardize(f)))
        .collect();

    let mut weights = vec![T::zero(); dim];
    let mut bias = T::from_f64_const(0.5);
    let mut vel_w = vec![T::zero(); dim];
    let mut vel_b = T::zero();
    let lr = T::from_f64_const(cfg.learning_rate);
    let momentum = T::from_f64_const(cfg.momentum);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<(Vec<T>, T)> = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            for &i in chunk {
                let p = &pairs[i];
                let features = match &cached[i] {
                    Some(f) => f.clone(),
                    None => {
                        let off = rng.random_range(0..=p.len - cfg.crop_len_samples);
                        let f = featurize_slices(
                            &p.noisy[off..off + cfg.crop_len_samples],
                            &p.enhanced[off..off + cfg.crop_len_samples],
                            rate,
                            feature_cfg,
                            stft_cfg,
                        )?;
                        standardize(&f.values)
                    }
                };
                batch.push((features, p.label));
            }
            let (loss, grad_w, grad_b) = linear_loss_grad(&weights, bias, &batch);
            for ((v, w), g) in vel_w.iter_mut().zip(weights.iter_mut()).zip(&grad_w) {
                *v = momentum * *v - lr * *g;
                *w += *v;
            }
            vel_b = momentum * vel_b - lr * grad_b;
            bias += vel_b;
            loss_sum += loss.to_f64_lossy() * chunk.len() as f64;
        }
        epoch_losses.push(loss_sum / pairs.len() as f64);
    }

    // Fold the standardization back into the affine map: the returned model
    // acts on raw features.
    let folded_weights: Vec<T> = weights.iter().zip(&sd).map(|(w, s)| *w / *s).collect();
    let correction: T = weights.iter().zip(mu.iter().zip(&sd)).map(|(w, (m, s))| *w * *m / *s).sum();
    let folded_bias = bias - correction;

    let model = BridgeModel::new(
        folded_weights,
        folded_bias,
        T::from_f64_const(DEFAULT_CLIP_FLOOR),
        T::from_f64_const(DEFAULT_CLIP_CEIL),
        feature_cfg.clone(),
        *stft_cfg,
    )?;
    Ok(TrainOutcome { model, epoch_losses, warnings })
}

#[derive(Serialize, Deserialize)]
struct ModelFileStft {
    window_len: usize,
    hop_len: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    stft: ModelFileStft,
    features: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    clip_floor: f64,
    clip_ceil: f64,
}

/// Writes the model as a small self-describing JSON object; numbers keep
/// full round-trip precision.
pub fn save_model<T: Sample>(model: &BridgeModel<T>, path: impl AsRef<Path>) -> Result<(), BridgeError> {
    let path = path.as_ref();
    let file = ModelFile {
        format_version: 1,
        stft: ModelFileStft {
            window_len: model.stft_config.window_len,
            hop_len: model.stft_config.hop_len,
        },
        features: model.feature_config.statistics().iter().map(|s| s.name().to_string()).collect(),
        weights: model.weights.iter().map(|w| w.to_f64_lossy()).collect(),
        bias: model.bias.to_f64_lossy(),
        clip_floor: model.clip_floor.to_f64_lossy(),
        clip_ceil: model.clip_ceil.to_f64_lossy(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serialization cannot fail");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| BridgeError::Io { path: path.display().to_string(), source: e })
}

/// Loads and validates a model written by [`save_model`].
pub fn load_model<T: Sample>(path: impl AsRef<Path>) -> Result<BridgeModel<T>, BridgeError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| BridgeError::Io { path: path.display().to_string(), source: e })?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| BridgeError::SchemaViolation { reason: e.to_string() })?;
    if file.format_version != 1 {
        return Err(BridgeError::VersionMismatch { found: file.format_version });
    }
    let statistics = file
        .features
        .iter()
        .map(|name| {
            Statistic::from_name(name).ok_or_else(|| BridgeError::SchemaViolation {
                reason: format!("unknown feature statistic {name:?}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let feature_config = FeatureConfig::new(statistics)?;
    let stft_config = StftConfig {
        window_len: file.stft.window_len,
        hop_len: file.stft.hop_len,
        window: Default::default(),
    };
    BridgeModel::new(
        file.weights.into_iter().map(T::from_f64_const).collect(),
        T::from_f64_const(file.bias),
        T::from_f64_const(file.clip_floor),
        T::from_f64_const(file.clip_ceil),
        feature_config,
        stft_config,
    )
}
