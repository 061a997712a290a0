//! Bridging speech enhancement and speech recognition by adding the
//! observation back.
//!
//! Aggressive speech enhancement (SE) removes noise but leaves processing
//! artifacts that can hurt a downstream recognizer (ASR) more than the
//! original noise would have. This crate implements a small, fully
//! deterministic pipeline that softens the hand-off between the two:
//!
//! 1. an enhancer produces `x_hat` from the noisy observation `x`
//!    ([`enhance`], or any external tool via [`adapter`]);
//! 2. a *bridge* scores how much the enhanced spectrogram still agrees with
//!    the observation (per-frame cosine similarity pooled into a fixed
//!    feature vector, then a trained linear layer) and clips the score into
//!    a mixing coefficient `S'` ([`spectral`], [`bridge`]);
//! 3. the waveforms are blended as `S' * x + (1 - S') * x_hat`, so the
//!    recognizer always keeps at least a floor's worth of the original
//!    observation ([`oa`]).
//!
//! Around that core live the supporting pieces a desk-scale experiment
//! needs: WAV I/O ([`wav`]), deterministic pseudo-speech/noise synthesis and
//! SNR-controlled mixing ([`synth`]), JSONL dataset manifests ([`manifest`]),
//! subprocess adapters for external SE/ASR models ([`adapter`]), a WER
//! scorer ([`wer`]), and a manifest-driven evaluation harness ([`harness`]).
//!
//! Everything is generic over the scalar type via [`Sample`]; the shipped
//! binaries and the type aliases below pin `f64`.

pub mod adapter;
pub mod bridge;
pub mod enhance;
pub mod harness;
pub mod manifest;
pub mod oa;
pub mod sample;
pub mod spectral;
pub mod synth;
mod util;
pub mod wav;
pub mod wer;

pub use sample::Sample;
pub use wav::{Waveform, PIPELINE_SAMPLE_RATE_HZ};

/// Single-precision waveform.
pub type Waveform32 = wav::Waveform<f32>;
/// Double-precision waveform; what the CLI pipeline uses throughout.
pub type Waveform64 = wav::Waveform<f64>;
/// Double-precision spectrogram.
pub type Spectrogram64 = spectral::Spectrogram<f64>;
/// Double-precision bridge model; what the CLI trains, saves, and loads.
pub type BridgeModel64 = bridge::BridgeModel<f64>;
