//! Deterministic test-signal generation and SNR-controlled mixing.
//!
//! Everything here is a pure function of its arguments and a seed: the
//! pseudo-speech and noise generators draw from a counter-based generator,
//! and [`synth_dataset`] walks its inputs in sorted order, so a dataset can
//! be reproduced byte-for-byte from the manifest alone.

use std::fs;
use std::path::{Component, Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::manifest::{self, ManifestError, UtteranceRecord};
use crate::sample::Sample;
use crate::util::float_key;
use crate::wav::{read_wav, write_wav, WavEncoding, WavError, Waveform, PIPELINE_SAMPLE_RATE_HZ};

/// Peak amplitude of generated signals; leaves headroom for mixing.
const GEN_PEAK: f64 = 0.5;

/// One-pole low-pass coefficient of the pink-ish noise generator.
const PINK_POLE: f64 = 0.98;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("empty waveform has no RMS")]
    EmptyWaveform,
    #[error("{which} signal is silent; cannot set an SNR")]
    SilentInput { which: &'static str },
    #[error("noise of {noise_len} samples is shorter than the clean signal of {clean_len}")]
    NoiseTooShort { noise_len: usize, clean_len: usize },
    #[error("sample rates differ: clean {clean_hz} Hz vs noise {noise_hz} Hz")]
    SampleRateMismatch { clean_hz: u32, noise_hz: u32 },
    #[error("duration {seconds} s does not yield at least one sample")]
    InvalidDuration { seconds: f64 },
    #[error("no .wav files found in {dir}")]
    EmptyDir { dir: String },
    #[error("clean files {a:?} and {b:?} share the stem {stem:?}; record ids would collide")]
    DuplicateStem { stem: String, a: String, b: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
}

/// Root-mean-square amplitude: `sqrt(mean(x^2))`.
pub fn rms<T: Sample>(w: &Waveform<T>) -> Result<T, SynthError> {
    if w.is_empty() {
        return Err(SynthError::EmptyWaveform);
    }
    Ok(rms_slice(&w.samples))
}

pub(crate) fn rms_slice<T: Sample>(samples: &[T]) -> T {
    let sum: T = samples.iter().map(|s| *s * *s).sum();
    (sum / T::from_f64_const(samples.len() as f64)).sqrt()
}

/// Mixes noise into a clean signal at an exact full-signal SNR.
///
/// The noise is truncated to the clean length (from offset 0, for
/// determinism) and scaled by
/// `g = rms(clean) / (rms(noise) * 10^(snr_db/20))`, so that
/// `20*log10(rms(clean)/rms(g*noise))` equals `snr_db` up to rounding.
/// Returns the mix and the applied noise gain.
pub fn mix_at_snr<T: Sample>(
    clean: &Waveform<T>,
    noise: &Waveform<T>,
    snr_db: f64,
) -> Result<(Waveform<T>, T), SynthError> {
    if clean.sample_rate_hz != noise.sample_rate_hz {
        return Err(SynthError::SampleRateMismatch {
            clean_hz: clean.sample_rate_hz,
            noise_hz: noise.sample_rate_hz,
        });
    }
    if noise.len() < clean.len() {
        return Err(SynthError::NoiseTooShort { noise_len: noise.len(), clean_len: clean.len() });
    }
    let clean_rms = rms(clean)?;
    let noise_trunc = &noise.samples[..clean.len()];
    let noise_rms = rms_slice(noise_trunc);
    if clean_rms == T::zero() {
        return Err(SynthError::SilentInput { which: "clean" });
    }
    if noise_rms == T::zero() {
        return Err(SynthError::SilentInput { which: "noise" });
    }
    let gain = clean_rms / (noise_rms * T::from_f64_const(10f64.powf(snr_db / 20.0)));
    let samples = clean
        .samples
        .iter()
        .zip(noise_trunc)
        .map(|(c, n)| *c + gain * *n)
        .collect();
    Ok((Waveform::new(samples, clean.sample_rate_hz), gain))
}

fn num_samples(duration_s: f64) -> Result<usize, SynthError> {
    if !(duration_s > 0.0) {
        return Err(SynthError::InvalidDuration { seconds: duration_s });
    }
    let n = (duration_s * PIPELINE_SAMPLE_RATE_HZ as f64).round() as usize;
    if n == 0 {
        return Err(SynthError::InvalidDuration { seconds: duration_s });
    }
    Ok(n)
}

fn normalize_peak(raw: &mut [f64]) {
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let k = GEN_PEAK / peak;
        for v in raw.iter_mut() {
            *v *= k;
        }
    }
}

fn to_waveform<T: Sample>(raw: Vec<f64>) -> Waveform<T> {
    Waveform::new(raw.into_iter().map(T::from_f64_const).collect(), PIPELINE_SAMPLE_RATE_HZ)
}

/// Deterministic stand-in for clean speech: 3–5 harmonics of a seeded
/// fundamental in 90–250 Hz, amplitude-modulated at a seeded 2–6 Hz
/// "syllabic" rate, peak-normalized to 0.5.
pub fn gen_pseudo_speech<T: Sample>(duration_s: f64, seed: u64) -> Result<Waveform<T>, SynthError> {
    let n = num_samples(duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0: f64 = rng.random_range(90.0..250.0);
    let harmonics: usize = rng.random_range(3..=5);
    let syllabic_rate: f64 = rng.random_range(2.0..6.0);
    let syllabic_phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let phases: Vec<f64> =
        (0..harmonics).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();

    let mut raw = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / PIPELINE_SAMPLE_RATE_HZ as f64;
        let envelope =
            0.5 * (1.0 - (std::f64::consts::TAU * syllabic_rate * t + syllabic_phase).cos());
        let mut v = 0.0;
        for (k, phase) in phases.iter().enumerate() {
            let h = (k + 1) as f64;
            // 1/k harmonic rolloff keeps the timbre vaguely vowel-like.
            v += (std::f64::consts::TAU * f0 * h * t + phase).sin() / h;
        }
        raw.push(envelope * v);
    }
    normalize_peak(&mut raw);
    Ok(to_waveform(raw))
}

/// Flavors of generated noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Independent Gaussian samples.
    White,
    /// White noise through a fixed one-pole low-pass
    /// (`y[i] = 0.98*y[i-1] + x[i]`); a crude pink-ish spectrum.
    Pink,
}

/// Seeded stationary noise, peak-normalized to 0.5.
pub fn gen_noise<T: Sample>(duration_s: f64, kind: NoiseKind, seed: u64) -> Result<Waveform<T>, SynthError> {
    let n = num_samples(duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    if kind == NoiseKind::Pink {
        let mut prev = 0.0f64;
        for v in raw.iter_mut() {
            *v += PINK_POLE * prev;
            prev = *v;
        }
    }
    normalize_peak(&mut raw);
    Ok(to_waveform(raw))
}

/// Lists `*.wav` files directly inside `dir`, sorted by name.
fn list_wavs(dir: &Path) -> Result<Vec<PathBuf>, SynthError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| SynthError::Io { path: dir.display().to_string(), source: e })?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| SynthError::Io { path: dir.display().to_string(), source: e })?;
        let path = entry.path();
        let is_wav = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"));
        if path.is_file() && is_wav {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(SynthError::EmptyDir { dir: dir.display().to_string() });
    }
    Ok(out)
}

/// Expresses `target` relative to `base` (both canonical absolute paths),
/// or `None` when they share no root.
fn relative_to(base: &Path, target: &Path) -> Option<PathBuf> {
    let base: Vec<Component> = base.components().collect();
    let target: Vec<Component> = target.components().collect();
    let common = base.iter().zip(&target).take_while(|(a, b)| a == b).count();
    if common == 0 {
        return None;
    }
    let mut rel = PathBuf::new();
    for _ in common..base.len() {
        rel.push("..");
    }
    for c in &target[common..] {
        rel.push(c);
    }
    Some(rel)
}

/// Manifest path string for `target`, relative to `manifest_dir` when the
/// two share a filesystem root (they always do on Unix).
fn manifest_path_string(manifest_dir: &Path, target: &Path) -> Result<String, SynthError> {
    let canon = |p: &Path| {
        fs::canonicalize(p).map_err(|e| SynthError::Io { path: p.display().to_string(), source: e })
    };
    let base = canon(manifest_dir)?;
    let target = canon(target)?;
    let p = relative_to(&base, &target).unwrap_or(target);
    Ok(p.to_string_lossy().into_owned())
}

/// Builds a noisy dataset: every clean file is mixed with a seeded random
/// noise file at every requested SNR, the mixes are written to `out_dir` as
/// float32 WAVs, and a `manifest.jsonl` describing them is written there
/// too. Returns the manifest path.
///
/// Clean files are processed in sorted order and SNRs in the given order,
/// with one noise draw per (clean, SNR) pair, so a fixed seed reproduces
/// the manifest and audio byte-for-byte. Mixes are stored as float32
/// because low-SNR mixes exceed `[-1, 1]` and PCM16 clipping would bend
/// their measured SNR.
pub fn synth_dataset<T: Sample>(
    clean_dir: &Path,
    noise_dir: &Path,
    snrs_db: &[f64],
    seed: u64,
    out_dir: &Path,
) -> Result<PathBuf, SynthError> {
    let clean_files = list_wavs(clean_dir)?;
    let noise_files = list_wavs(noise_dir)?;
    fs::create_dir_all(out_dir)
        .map_err(|e| SynthError::Io { path: out_dir.display().to_string(), source: e })?;

    let mut stems: Vec<String> = Vec::with_capacity(clean_files.len());
    for (i, path) in clean_files.iter().enumerate() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(j) = stems.iter().position(|s| *s == stem) {
            return Err(SynthError::DuplicateStem {
                stem,
                a: clean_files[j].display().to_string(),
                b: clean_files[i].display().to_string(),
            });
        }
        stems.push(stem);
    }

    let clean_wavs: Vec<Waveform<T>> =
        clean_files.iter().map(read_wav).collect::<Result<_, _>>()?;
    let noise_wavs: Vec<Waveform<T>> =
        noise_files.iter().map(read_wav).collect::<Result<_, _>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(clean_files.len() * snrs_db.len());
    for (ci, clean) in clean_wavs.iter().enumerate() {
        for &snr_db in snrs_db {
            let ni = rng.random_range(0..noise_wavs.len());
            let (noisy, _gain) = mix_at_snr(clean, &noise_wavs[ni], snr_db)?;
            let id = format!("{}__snr{}", stems[ci], float_key(snr_db));
            let noisy_name = format!("{id}.wav");
            write_wav(&noisy, out_dir.join(&noisy_name), WavEncoding::Float32)?;
            records.push(UtteranceRecord {
                id,
                clean_path: Some(manifest_path_string(out_dir, &clean_files[ci])?),
                noise_path: Some(manifest_path_string(out_dir, &noise_files[ni])?),
                noisy_path: noisy_name,
                enhanced_path: None,
                snr_db: Some(snr_db),
                transcript: None,
            });
        }
    }

    let manifest_path = out_dir.join("manifest.jsonl");
    manifest::write_manifest(&records, &manifest_path)?;
    Ok(manifest_path)
}
