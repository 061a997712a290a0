//! Short-time spectral analysis/synthesis and the frame-wise cosine
//! similarity the bridge features are pooled from.
//!
//! Conventions are deliberately rigid: a periodic Hann window, no padding or
//! centering (a trailing partial frame is dropped), and weighted overlap-add
//! synthesis with the same window applied again at synthesis time. With the
//! default 400/100 window/hop this reconstructs interior samples of a
//! round trip essentially exactly.

use num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::sample::Sample;
use crate::wav::Waveform;

/// Frames whose magnitude norm falls below this are treated as silent and
/// excluded from similarity aggregation.
pub const SILENT_FRAME_NORM_EPS: f64 = 1e-12;

/// Overlap-add positions with less accumulated squared-window weight than
/// this are emitted as zero instead of being divided by a vanishing sum.
const WOLA_WEIGHT_EPS: f64 = 1e-8;

/// Analysis window shapes. Only Hann is implemented; the enum keeps the
/// configuration self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowKind {
    #[default]
    Hann,
}

/// STFT analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop_len: usize,
    pub window: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { window_len: 400, hop_len: 100, window: WindowKind::Hann }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), SpectralError> {
        if self.window_len < 2 {
            return Err(SpectralError::WindowTooShort { len: self.window_len });
        }
        if self.hop_len == 0 || self.hop_len > self.window_len {
            return Err(SpectralError::InvalidHop { hop_len: self.hop_len, window_len: self.window_len });
        }
        Ok(())
    }

    /// Number of full frames for a signal of `n` samples; `None` when the
    /// signal is shorter than one window.
    pub fn num_frames(&self, n: usize) -> Option<usize> {
        if n < self.window_len {
            None
        } else {
            Some((n - self.window_len) / self.hop_len + 1)
        }
    }

    /// Number of nonredundant bins of the real-input transform.
    pub fn num_bins(&self) -> usize {
        self.window_len / 2 + 1
    }
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("window length {len} is too short (need at least 2 samples)")]
    WindowTooShort { len: usize },
    #[error("hop length {hop_len} must be in 1..=window length ({window_len})")]
    InvalidHop { hop_len: usize, window_len: usize },
    #[error("signal of {len} samples is shorter than one window of {window_len}")]
    SignalTooShort { len: usize, window_len: usize },
    #[error("spectrogram shapes differ: {a_frames}x{a_bins} vs {b_frames}x{b_bins}")]
    ShapeMismatch { a_frames: usize, a_bins: usize, b_frames: usize, b_bins: usize },
}

/// Periodic Hann window: `w[n] = 0.5 * (1 - cos(2*pi*n / len))`.
pub fn hann_window<T: Sample>(len: usize) -> Result<Vec<T>, SpectralError> {
    if len < 2 {
        return Err(SpectralError::WindowTooShort { len });
    }
    Ok((0..len)
        .map(|n| {
            let x = std::f64::consts::TAU * n as f64 / len as f64;
            T::from_f64_const(0.5 * (1.0 - x.cos()))
        })
        .collect())
}

/// Complex STFT of a mono signal, frames by rows.
///
/// Instances only come out of [`stft`], so the shape invariants
/// (`bins == window_len/2 + 1`, one complex row per frame) hold by
/// construction. Magnitudes are the moduli of the stored complex values;
/// [`Spectrogram::map_magnitudes`] rescales values while retaining phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T: Sample> {
    config: StftConfig,
    sample_rate_hz: u32,
    frames: usize,
    bins: usize,
    values: Vec<Complex<T>>,
}

impl<T: Sample> Spectrogram<T> {
    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn value(&self, frame: usize, bin: usize) -> Complex<T> {
        assert!(frame < self.frames && bin < self.bins, "spectrogram index out of range");
        self.values[frame * self.bins + bin]
    }

    pub fn magnitude(&self, frame: usize, bin: usize) -> T {
        self.value(frame, bin).norm()
    }

    fn frame_values(&self, frame: usize) -> &[Complex<T>] {
        &self.values[frame * self.bins..(frame + 1) * self.bins]
    }

    /// Replaces each magnitude with `f(frame, bin, magnitude)`, keeping the
    /// phase. Negative replacement values are treated as zero; bins whose
    /// current magnitude is zero have no phase and stay at the replacement
    /// magnitude with zero phase.
    pub fn map_magnitudes(&mut self, mut f: impl FnMut(usize, usize, T) -> T) {
        for t in 0..self.frames {
            for k in 0..self.bins {
                let v = self.values[t * self.bins + k];
                let mag = v.norm();
                let new_mag = f(t, k, mag).max(T::zero());
                self.values[t * self.bins + k] = if mag > T::zero() {
                    v * (new_mag / mag)
                } else {
                    Complex::new(new_mag, T::zero())
                };
            }
        }
    }

    /// Drops all frames past the first `frames`.
    pub fn truncate_frames(&mut self, frames: usize) {
        if frames < self.frames {
            self.frames = frames;
            self.values.truncate(frames * self.bins);
        }
    }
}

/// Windowed short-time Fourier transform.
///
/// Frames start at multiples of the hop with no padding: a signal of `N`
/// samples yields `floor((N - window_len)/hop_len) + 1` frames. Each frame
/// is multiplied by the Hann window and transformed by a DFT of size
/// `window_len`; the `window_len/2 + 1` nonredundant bins are kept.
pub fn stft<T: Sample>(w: &Waveform<T>, cfg: &StftConfig) -> Result<Spectrogram<T>, SpectralError> {
    stft_slice(&w.samples, w.sample_rate_hz, cfg)
}

/// [`stft`] on a bare sample slice; lets callers analyze crops without
/// copying them into a new waveform first.
pub(crate) fn stft_slice<T: Sample>(
    samples: &[T],
    sample_rate_hz: u32,
    cfg: &StftConfig,
) -> Result<Spectrogram<T>, SpectralError> {
    cfg.validate()?;
    let n = samples.len();
    let frames = cfg
        .num_frames(n)
        .ok_or(SpectralError::SignalTooShort { len: n, window_len: cfg.window_len })?;
    let bins = cfg.num_bins();
    let window = hann_window::<T>(cfg.window_len)?;

    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(cfg.window_len);
    let mut buf: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); cfg.window_len];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];

    let mut values = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        let off = t * cfg.hop_len;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(window[i] * samples[off + i], T::zero());
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        values.extend_from_slice(&buf[..bins]);
    }

    Ok(Spectrogram { config: *cfg, sample_rate_hz, frames, bins, values })
}

/// Weighted overlap-add inverse of [`stft`].
///
/// The Hann window is applied again at synthesis and every output position
/// is divided by its accumulated squared-window weight; positions with
/// weight below 1e-8 (the first and last couple of samples) are emitted as
/// zero. For an unmodified spectrogram this reproduces interior samples of
/// the analyzed signal to within rounding.
pub fn istft<T: Sample>(s: &Spectrogram<T>) -> Waveform<T> {
    if s.frames == 0 {
        return Waveform::new(Vec::new(), s.sample_rate_hz);
    }
    let win = s.config.window_len;
    let hop = s.config.hop_len;
    let window = hann_window::<T>(win).expect("spectrogram config was validated by stft");
    let out_len = (s.frames - 1) * hop + win;

    let mut planner = FftPlanner::<T>::new();
    let ifft = planner.plan_fft_inverse(win);
    let mut buf: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); win];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); ifft.get_inplace_scratch_len()];

    let inv_n = T::one() / T::from_f64_const(win as f64);
    let mut out = vec![T::zero(); out_len];
    let mut weight = vec![T::zero(); out_len];
    for t in 0..s.frames {
        let half = s.frame_values(t);
        // Rebuild the full Hermitian spectrum; forcing DC and Nyquist real
        // keeps the inverse transform exactly real-valued.
        buf[0] = Complex::new(half[0].re, T::zero());
        for k in 1..s.bins - 1 {
            buf[k] = half[k];
            buf[win - k] = half[k].conj();
        }
        buf[win / 2] = Complex::new(half[s.bins - 1].re, T::zero());
        ifft.process_with_scratch(&mut buf, &mut scratch);

        let off = t * hop;
        for i in 0..win {
            let sample = buf[i].re * inv_n;
            out[off + i] += window[i] * sample;
            weight[off + i] += window[i] * window[i];
        }
    }

    let eps = T::from_f64_const(WOLA_WEIGHT_EPS);
    for (o, w) in out.iter_mut().zip(&weight) {
        if *w < eps {
            *o = T::zero();
        } else {
            *o = *o / *w;
        }
    }
    Waveform::new(out, s.sample_rate_hz)
}

/// Per-frame cosine similarity between two magnitude spectrograms, with a
/// validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSimilarity<T: Sample> {
    /// Cosine similarity per frame; `0` placeholder for invalid frames.
    pub values: Vec<T>,
    /// `false` where either frame's magnitude norm fell below
    /// [`SILENT_FRAME_NORM_EPS`]; such frames carry no evidence and are
    /// excluded downstream.
    pub valid: Vec<bool>,
}

impl<T: Sample> FrameSimilarity<T> {
    pub fn num_frames(&self) -> usize {
        self.values.len()
    }

    pub fn num_valid(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Similarities of the valid frames only, in frame order.
    pub fn valid_values(&self) -> impl Iterator<Item = T> + '_ {
        self.values.iter().zip(&self.valid).filter(|(_, ok)| **ok).map(|(v, _)| *v)
    }
}

/// Cosine similarity `dot(|A_t|, |B_t|) / (||A_t|| * ||B_t||)` per frame.
///
/// Magnitudes are nonnegative, so similarities land in `[0, 1]` (clamped
/// against rounding). Frames where either norm is below
/// [`SILENT_FRAME_NORM_EPS`] are marked invalid.
pub fn frame_cosine_similarity<T: Sample>(
    a: &Spectrogram<T>,
    b: &Spectrogram<T>,
) -> Result<FrameSimilarity<T>, SpectralError> {
    if a.frames != b.frames || a.bins != b.bins {
        return Err(SpectralError::ShapeMismatch {
            a_frames: a.frames,
            a_bins: a.bins,
            b_frames: b.frames,
            b_bins: b.bins,
        });
    }
    let eps = T::from_f64_const(SILENT_FRAME_NORM_EPS);
    let mut values = Vec::with_capacity(a.frames);
    let mut valid = Vec::with_capacity(a.frames);
    for t in 0..a.frames {
        let (mut dot, mut na2, mut nb2) = (T::zero(), T::zero(), T::zero());
        for (va, vb) in a.frame_values(t).iter().zip(b.frame_values(t)) {
            let ma = va.norm();
            let mb = vb.norm();
            dot += ma * mb;
            na2 += ma * ma;
            nb2 += mb * mb;
        }
        let na = na2.sqrt();
        let nb = nb2.sqrt();
        if na < eps || nb < eps {
            values.push(T::zero());
            valid.push(false);
        } else {
            values.push((dot / (na * nb)).max(T::zero()).min(T::one()));
            valid.push(true);
        }
    }
    Ok(FrameSimilarity { values, valid })
}
