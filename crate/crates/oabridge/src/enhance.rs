//! Built-in stand-in enhancers.
//!
//! These exist so the full pipeline runs and is testable without any neural
//! model: an identity pass-through, an oracle that returns the known clean
//! reference of a synthetic mix, and classical magnitude spectral
//! subtraction. Real enhancers plug in as external commands through
//! [`crate::adapter`].

use thiserror::Error;

use crate::sample::Sample;
use crate::spectral::{istft, stft, Spectrogram, SpectralError, StftConfig};
use crate::wav::Waveform;

#[derive(Debug, Error)]
pub enum EnhanceError {
    #[error("enhancer input of {input} samples does not match the {reference}-sample reference")]
    LengthMismatch { input: usize, reference: usize },
    #[error("sample rates differ: {input_hz} Hz vs {reference_hz} Hz")]
    SampleRateMismatch { input_hz: u32, reference_hz: u32 },
    #[error("signal has {frames} STFT frames but the noise profile needs {noise_frames}")]
    TooFewFrames { frames: usize, noise_frames: usize },
    #[error("invalid spectral subtraction parameter: {reason}")]
    InvalidParameter { reason: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Spectral subtraction knobs; the defaults assume roughly stationary noise
/// and a little leading non-speech audio to estimate it from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecSubParams {
    /// Leading frames averaged into the noise magnitude profile.
    pub noise_frames: usize,
    /// Over-subtraction factor applied to the noise profile.
    pub alpha: f64,
    /// Spectral floor: no magnitude drops below `beta * |X|`.
    pub beta: f64,
}

impl Default for SpecSubParams {
    fn default() -> Self {
        Self { noise_frames: 10, alpha: 1.0, beta: 0.02 }
    }
}

impl SpecSubParams {
    fn validate(&self) -> Result<(), EnhanceError> {
        if self.noise_frames == 0 {
            return Err(EnhanceError::InvalidParameter { reason: "noise_frames must be positive".into() });
        }
        if !(self.alpha >= 0.0) {
            return Err(EnhanceError::InvalidParameter { reason: format!("alpha {} must be >= 0", self.alpha) });
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(EnhanceError::InvalidParameter { reason: format!("beta {} must be in [0, 1]", self.beta) });
        }
        Ok(())
    }
}

/// The degenerate enhancer: returns the input unchanged.
pub fn se_identity<T: Sample>(x: &Waveform<T>) -> Waveform<T> {
    x.clone()
}

/// Perfect-enhancement stand-in: returns the known clean reference.
///
/// Only meaningful for synthetic mixes where the reference exists; lengths
/// must match exactly since both signals describe the same utterance.
pub fn se_oracle<T: Sample>(x: &Waveform<T>, clean_ref: &Waveform<T>) -> Result<Waveform<T>, EnhanceError> {
    if x.sample_rate_hz != clean_ref.sample_rate_hz {
        return Err(EnhanceError::SampleRateMismatch {
            input_hz: x.sample_rate_hz,
            reference_hz: clean_ref.sample_rate_hz,
        });
    }
    if x.len() != clean_ref.len() {
        return Err(EnhanceError::LengthMismatch { input: x.len(), reference: clean_ref.len() });
    }
    Ok(clean_ref.clone())
}

/// The spectral-domain half of [`se_spectral_subtraction`]: estimates a
/// noise magnitude profile from the leading frames and subtracts it with a
/// spectral floor, keeping the original phase.
///
/// Exposed separately so the magnitude bounds
/// (`beta*|X| <= |X_hat| <= |X| + alpha*profile`) can be checked before any
/// resynthesis blurs them.
pub fn spectral_subtraction_spectrogram<T: Sample>(
    x: &Waveform<T>,
    stft_cfg: &StftConfig,
    params: &SpecSubParams,
) -> Result<Spectrogram<T>, EnhanceError> {
    params.validate()?;
    let mut spec = stft(x, stft_cfg)?;
    if spec.frames() < params.noise_frames {
        return Err(EnhanceError::TooFewFrames { frames: spec.frames(), noise_frames: params.noise_frames });
    }

    let inv = T::one() / T::from_f64_const(params.noise_frames as f64);
    let profile: Vec<T> = (0..spec.bins())
        .map(|k| {
            let mut acc = T::zero();
            for t in 0..params.noise_frames {
                acc += spec.magnitude(t, k);
            }
            acc * inv
        })
        .collect();

    let alpha = T::from_f64_const(params.alpha);
    let beta = T::from_f64_const(params.beta);
    spec.map_magnitudes(|_, k, m| (m - alpha * profile[k]).max(beta * m));
    Ok(spec)
}

/// Classical magnitude spectral subtraction.
///
/// Uses the default 400/100 STFT, subtracts the estimated noise profile per
/// bin, keeps the noisy phase, and resynthesizes via weighted overlap-add.
/// The output is zero-padded to the input length (the dropped partial frame
/// costs under one hop of samples at the tail).
///
/// The first and last `window_len - hop_len` samples are muted: they lie in
/// the partial-overlap region, where resynthesis divides by a near-zero
/// accumulated window, and once the magnitudes have been modified the
/// overlap-add inconsistency there would otherwise be amplified into loud
/// clicks.
pub fn se_spectral_subtraction<T: Sample>(
    x: &Waveform<T>,
    params: &SpecSubParams,
) -> Result<Waveform<T>, EnhanceError> {
    let cfg = StftConfig::default();
    let spec = spectral_subtraction_spectrogram(x, &cfg, params)?;
    let mut out = istft(&spec);
    let guard = cfg.window_len - cfg.hop_len;
    let n = out.len();
    for s in out.samples.iter_mut().take(guard.min(n)) {
        *s = T::zero();
    }
    for s in out.samples.iter_mut().skip(n.saturating_sub(guard)) {
        *s = T::zero();
    }
    out.samples.resize(x.len(), T::zero());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_noise, rms, NoiseKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tone_after_silence() -> Waveform<f64> {
        // 0.3 s silence then a 440 Hz tone.
        let mut samples = vec![0.0f64; 4800];
        for i in 0..11200 {
            samples.push(0.3 * (std::f64::consts::TAU * 440.0 * i as f64 / 16000.0).sin());
        }
        Waveform::new(samples, 16000)
    }

    #[test]
    fn identity_is_identity() {
        let x = tone_after_silence();
        let y = se_identity(&x);
        assert_eq!(x, y);
        assert!(se_identity(&Waveform::<f64>::new(vec![], 16000)).is_empty());
    }

    #[test]
    fn oracle_returns_reference() {
        let x = tone_after_silence();
        let clean = Waveform::new(vec![0.25; x.len()], 16000);
        assert_eq!(se_oracle(&x, &clean).unwrap(), clean);
        let short = Waveform::new(vec![0.25; x.len() - 1], 16000);
        assert!(matches!(se_oracle(&x, &short), Err(EnhanceError::LengthMismatch { .. })));
    }

    #[test]
    fn specsub_passes_tone_through_after_silence() {
        let x = tone_after_silence();
        let y = se_spectral_subtraction(&x, &SpecSubParams::default()).unwrap();
        assert_eq!(y.len(), x.len());

        // Noise profile is estimated from pure silence, so the tone region
        // reduces to the ISTFT round trip; compare well inside the edges.
        let (a, b) = (&x.samples[5200..15600], &y.samples[5200..15600]);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(a), mean(b));
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (x, y) in a.iter().zip(b) {
            num += (x - ma) * (y - mb);
            da += (x - ma).powi(2);
            db += (y - mb).powi(2);
        }
        let corr = num / (da * db).sqrt();
        assert!(corr > 0.99, "correlation {corr}");
    }

    #[test]
    fn specsub_attenuates_stationary_noise() {
        let x = gen_noise::<f64>(1.0, NoiseKind::White, 11).unwrap();
        let y = se_spectral_subtraction(&x, &SpecSubParams::default()).unwrap();
        assert!(rms(&y).unwrap() < rms(&x).unwrap());
    }

    #[test]
    fn specsub_magnitude_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Waveform::new((0..3000).map(|_| rng.random_range(-0.4..0.4)).collect::<Vec<f64>>(), 16000);
        let cfg = StftConfig::default();
        let params = SpecSubParams::default();
        let before = stft(&x, &cfg).unwrap();
        let after = spectral_subtraction_spectrogram(&x, &cfg, &params).unwrap();

        let inv = 1.0 / params.noise_frames as f64;
        for k in 0..before.bins() {
            let profile: f64 = (0..params.noise_frames).map(|t| before.magnitude(t, k)).sum::<f64>() * inv;
            for t in 0..before.frames() {
                let m = before.magnitude(t, k);
                let e = after.magnitude(t, k);
                assert!(e >= params.beta * m - 1e-12, "floor violated at ({t},{k}): {e} < {}", params.beta * m);
                assert!(e <= m + params.alpha * profile + 1e-12, "ceiling violated at ({t},{k})");
            }
        }
    }

    #[test]
    fn specsub_needs_enough_frames() {
        // 500 samples -> 2 frames < 10.
        let x = Waveform::new(vec![0.1f64; 500], 16000);
        assert!(matches!(
            se_spectral_subtraction(&x, &SpecSubParams::default()),
            Err(EnhanceError::TooFewFrames { frames: 2, noise_frames: 10 })
        ));
    }

    #[test]
    fn specsub_validates_parameters() {
        let x = tone_after_silence();
        let bad = SpecSubParams { noise_frames: 0, ..Default::default() };
        assert!(matches!(se_spectral_subtraction(&x, &bad), Err(EnhanceError::InvalidParameter { .. })));
        let bad = SpecSubParams { beta: 1.5, ..Default::default() };
        assert!(matches!(se_spectral_subtraction(&x, &bad), Err(EnhanceError::InvalidParameter { .. })));
    }
}
