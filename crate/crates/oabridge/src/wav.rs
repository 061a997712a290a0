//! Mono RIFF/WAVE decoding and encoding.
//!
//! Only what the pipeline needs: 16 kHz mono files holding 16-bit integer
//! PCM (format tag 1) or 32-bit IEEE float (format tag 3) samples,
//! little-endian, with unknown chunks skipped. No resampling is performed;
//! files at any other rate are rejected so every downstream stage can rely
//! on one clock.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::sample::Sample;

/// The only sample rate the pipeline accepts.
pub const PIPELINE_SAMPLE_RATE_HZ: u32 = 16_000;

/// Symmetric PCM16 normalization constant; keeps `-32768 -> -1.0` exact.
const PCM16_SCALE: f64 = 32_768.0;

/// A mono audio signal in memory.
///
/// Samples are nominally in `[-1, 1]`; decoded PCM16 always is, while float
/// data (and observation-adding outputs) may exceed that range slightly.
/// Encoding to PCM16 clamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T: Sample> {
    pub samples: Vec<T>,
    pub sample_rate_hz: u32,
}

impl<T: Sample> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: u32) -> Self {
        Self { samples, sample_rate_hz }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// On-disk sample encodings supported by [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    /// 16-bit integer PCM, format tag 1. Lossy: samples are clamped to
    /// `[-1, 1]` and quantized to 1/32768 steps.
    Pcm16,
    /// 32-bit IEEE float, format tag 3. Lossless for `f32` data.
    Float32,
}

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a usable RIFF/WAVE file: {reason}")]
    Malformed { reason: String },
    #[error("unsupported encoding: format tag {format_tag} with {bits_per_sample} bits per sample (need PCM16 or float32)")]
    UnsupportedEncoding { format_tag: u16, bits_per_sample: u16 },
    #[error("unsupported channel count {channels} (only mono is accepted)")]
    UnsupportedChannels { channels: u16 },
    #[error("unsupported sample rate {rate_hz} Hz (the pipeline runs at {PIPELINE_SAMPLE_RATE_HZ} Hz; resample externally)")]
    UnsupportedSampleRate { rate_hz: u32 },
    #[error("non-finite sample at index {index} cannot be encoded")]
    NonFiniteSample { index: usize },
    #[error("waveform of {samples} samples is too long for a RIFF container")]
    TooLong { samples: usize },
}

fn io_err(path: &Path, source: std::io::Error) -> WavError {
    WavError::Io { path: path.display().to_string(), source }
}

fn malformed(reason: impl Into<String>) -> WavError {
    WavError::Malformed { reason: reason.into() }
}

/// Reads a mono 16 kHz WAV file.
///
/// PCM16 data is normalized by 32768 into `[-1, 1)`; float data is taken
/// as stored. Decoding is bit-deterministic: identical files yield
/// identical sample sequences.
pub fn read_wav<T: Sample>(path: impl AsRef<Path>) -> Result<Waveform<T>, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_wav(&bytes)
}

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Decodes an in-memory RIFF/WAVE image. Split out from [`read_wav`] so the
/// parser can be exercised on crafted byte buffers.
fn decode_wav<T: Sample>(bytes: &[u8]) -> Result<Waveform<T>, WavError> {
    if bytes.len() < 12 {
        return Err(malformed("file shorter than a RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing WAVE form type"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut offset = 12usize;
    while offset < bytes.len() {
        if offset + 8 > bytes.len() {
            return Err(malformed("truncated chunk header"));
        }
        let id = &bytes[offset..offset + 4];
        let size = u32::from_le_bytes(bytes[offset + 4..offset + 8].try_into().unwrap()) as usize;
        let body_start = offset + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| malformed(format!("chunk {:?} overruns the file", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk shorter than 16 bytes"));
                }
                fmt = Some(FmtChunk {
                    format_tag: u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    channels: u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    sample_rate: u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    bits_per_sample: u16::from_le_bytes(body[14..16].try_into().unwrap()),
                });
            }
            b"data" => {
                data = Some(body);
            }
            // LIST, fact, cue, bext, ... are all irrelevant here.
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        offset = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| malformed("missing fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("missing data chunk"))?;

    let encoding = match (fmt.format_tag, fmt.bits_per_sample) {
        (1, 16) => WavEncoding::Pcm16,
        (3, 32) => WavEncoding::Float32,
        (tag, bits) => {
            return Err(WavError::UnsupportedEncoding { format_tag: tag, bits_per_sample: bits })
        }
    };
    if fmt.channels != 1 {
        return Err(WavError::UnsupportedChannels { channels: fmt.channels });
    }
    if fmt.sample_rate != PIPELINE_SAMPLE_RATE_HZ {
        return Err(WavError::UnsupportedSampleRate { rate_hz: fmt.sample_rate });
    }

    let samples = match encoding {
        WavEncoding::Pcm16 => {
            if data.len() % 2 != 0 {
                return Err(malformed("PCM16 data size is not a multiple of 2"));
            }
            data.chunks_exact(2)
                .map(|b| {
                    let v = i16::from_le_bytes(b.try_into().unwrap());
                    T::from_f64_const(v as f64 / PCM16_SCALE)
                })
                .collect()
        }
        WavEncoding::Float32 => {
            if data.len() % 4 != 0 {
                return Err(malformed("float32 data size is not a multiple of 4"));
            }
            data.chunks_exact(4)
                .map(|b| T::from_f64_const(f32::from_le_bytes(b.try_into().unwrap()) as f64))
                .collect()
        }
    };

    Ok(Waveform::new(samples, fmt.sample_rate))
}

/// Writes a waveform with the requested encoding.
///
/// For [`WavEncoding::Pcm16`] samples are clamped to `[-1, 1]` and then
/// rounded, so a read-back agrees within `1/32768`; for
/// [`WavEncoding::Float32`] a read-back of `f32` data is exact. Non-finite
/// samples are rejected before anything is written.
pub fn write_wav<T: Sample>(
    w: &Waveform<T>,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<(), WavError> {
    let path = path.as_ref();
    let bytes = encode_wav(w, encoding)?;
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn encode_wav<T: Sample>(w: &Waveform<T>, encoding: WavEncoding) -> Result<Vec<u8>, WavError> {
    if let Some(index) = w.samples.iter().position(|s| !s.is_finite()) {
        return Err(WavError::NonFiniteSample { index });
    }
    let bytes_per_sample: usize = match encoding {
        WavEncoding::Pcm16 => 2,
        WavEncoding::Float32 => 4,
    };
    let data_len = w.samples.len() * bytes_per_sample;
    let riff_len = 36usize.checked_add(data_len).ok_or(WavError::TooLong { samples: w.len() })?;
    if u32::try_from(riff_len).is_err() {
        return Err(WavError::TooLong { samples: w.len() });
    }

    let (format_tag, bits): (u16, u16) = match encoding {
        WavEncoding::Pcm16 => (1, 16),
        WavEncoding::Float32 => (3, 32),
    };
    let block_align = bytes_per_sample as u16;
    let byte_rate = w.sample_rate_hz * bytes_per_sample as u32;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(riff_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&w.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    match encoding {
        WavEncoding::Pcm16 => {
            for s in &w.samples {
                let v = s.to_f64_lossy().clamp(-1.0, 1.0);
                // 1.0 would round to 32768, one past i16::MAX, hence the clamp.
                let q = (v * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
        }
        WavEncoding::Float32 => {
            for s in &w.samples {
                out.extend_from_slice(&(s.to_f64_lossy() as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    /// Builds a minimal WAV image for parser tests.
    fn make_wav(format_tag: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&((36 + data.len()) as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format_tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * u32::from(bits / 8)).to_le_bytes());
        out.extend_from_slice(&(bits / 8).to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    fn pcm_bytes(values: &[i16]) -> Vec<u8> {
        values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    #[test]
    fn pcm16_normalizes_by_32768() {
        let img = make_wav(1, 1, 16000, 16, &pcm_bytes(&[0, 16384, -32768]));
        let w: Waveform<f64> = decode_wav(&img).unwrap();
        assert_eq!(w.samples, vec![0.0, 0.5, -1.0]);
        assert_eq!(w.sample_rate_hz, 16000);
    }

    #[test]
    fn empty_data_chunk_is_a_valid_empty_waveform() {
        let img = make_wav(1, 1, 16000, 16, &[]);
        let w: Waveform<f64> = decode_wav(&img).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn wrong_sample_rate_is_a_distinct_error() {
        let img = make_wav(1, 1, 8000, 16, &pcm_bytes(&[0]));
        match decode_wav::<f64>(&img) {
            Err(WavError::UnsupportedSampleRate { rate_hz: 8000 }) => {}
            other => panic!("expected sample-rate error, got {other:?}"),
        }
    }

    #[test]
    fn stereo_is_rejected() {
        let img = make_wav(1, 2, 16000, 16, &pcm_bytes(&[0, 0]));
        match decode_wav::<f64>(&img) {
            Err(WavError::UnsupportedChannels { channels: 2 }) => {}
            other => panic!("expected channel error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_codec_is_rejected() {
        let img = make_wav(85, 1, 16000, 16, &[0, 0]);
        match decode_wav::<f64>(&img) {
            Err(WavError::UnsupportedEncoding { format_tag: 85, bits_per_sample: 16 }) => {}
            other => panic!("expected encoding error, got {other:?}"),
        }
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(decode_wav::<f64>(b"RIFX....WAVE"), Err(WavError::Malformed { .. })));
        assert!(matches!(decode_wav::<f64>(b"RI"), Err(WavError::Malformed { .. })));
    }

    #[test]
    fn missing_data_chunk_is_malformed() {
        let mut img = make_wav(1, 1, 16000, 16, &[]);
        img.truncate(36); // cut off the data chunk header
        img[4..8].copy_from_slice(&28u32.to_le_bytes());
        assert!(matches!(decode_wav::<f64>(&img), Err(WavError::Malformed { .. })));
    }

    #[test]
    fn overrunning_chunk_is_malformed() {
        let mut img = make_wav(1, 1, 16000, 16, &pcm_bytes(&[1, 2]));
        let at = img.len() - 8;
        img[at..at + 4].copy_from_slice(&99u32.to_le_bytes()); // declared size > actual
        assert!(matches!(decode_wav::<f64>(&img), Err(WavError::Malformed { .. })));
    }

    #[test]
    fn odd_pcm16_data_size_is_malformed() {
        let img = make_wav(1, 1, 16000, 16, &[0u8; 3]);
        assert!(matches!(decode_wav::<f64>(&img), Err(WavError::Malformed { .. })));
    }

    #[test]
    fn extra_chunks_are_skipped() {
        let mut img = Vec::new();
        let data = pcm_bytes(&[16384]);
        img.extend_from_slice(b"RIFF");
        img.extend_from_slice(&0u32.to_le_bytes()); // size patched below
        img.extend_from_slice(b"WAVE");
        img.extend_from_slice(b"LIST");
        img.extend_from_slice(&5u32.to_le_bytes());
        img.extend_from_slice(b"INFOx");
        img.push(0); // pad byte for the odd-sized chunk
        img.extend_from_slice(b"fmt ");
        img.extend_from_slice(&16u32.to_le_bytes());
        img.extend_from_slice(&1u16.to_le_bytes());
        img.extend_from_slice(&1u16.to_le_bytes());
        img.extend_from_slice(&16000u32.to_le_bytes());
        img.extend_from_slice(&32000u32.to_le_bytes());
        img.extend_from_slice(&2u16.to_le_bytes());
        img.extend_from_slice(&16u16.to_le_bytes());
        img.extend_from_slice(b"data");
        img.extend_from_slice(&(data.len() as u32).to_le_bytes());
        img.extend_from_slice(&data);
        let size = (img.len() - 8) as u32;
        img[4..8].copy_from_slice(&size.to_le_bytes());

        let w: Waveform<f64> = decode_wav(&img).unwrap();
        assert_eq!(w.samples, vec![0.5]);
    }

    #[test]
    fn pcm16_round_trip_within_half_step() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let w = Waveform::new(vec![0.0f64, 0.5], 16000);
        write_wav(&w, &path, WavEncoding::Pcm16).unwrap();
        let back: Waveform<f64> = read_wav(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in w.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn pcm16_clamps_before_encoding() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("hot.wav");
        write_wav(&Waveform::new(vec![1.5f64, -2.0], 16000), &path, WavEncoding::Pcm16).unwrap();
        let back: Waveform<f64> = read_wav(&path).unwrap();
        assert!((back.samples[0] - 1.0).abs() <= 1.0 / 32768.0);
        assert_eq!(back.samples[1], -1.0);
    }

    #[test]
    fn float32_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("f.wav");
        let w = Waveform::new(vec![0.25f32, -0.75, 1.25], 16000);
        write_wav(&w, &path, WavEncoding::Float32).unwrap();
        let back: Waveform<f32> = read_wav(&path).unwrap();
        assert_eq!(w.samples, back.samples);
    }

    #[test]
    fn non_finite_samples_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nan.wav");
        let res = write_wav(&Waveform::new(vec![0.0f64, f64::NAN], 16000), &path, WavEncoding::Pcm16);
        match res {
            Err(WavError::NonFiniteSample { index: 1 }) => {}
            other => panic!("expected non-finite error, got {other:?}"),
        }
        assert!(!path.exists(), "nothing should be written on error");
    }

    #[test]
    fn encoding_is_deterministic() {
        let w = Waveform::new(vec![0.1f64, -0.2, 0.3], 16000);
        assert_eq!(encode_wav(&w, WavEncoding::Pcm16).unwrap(), encode_wav(&w, WavEncoding::Pcm16).unwrap());
        assert_eq!(encode_wav(&w, WavEncoding::Float32).unwrap(), encode_wav(&w, WavEncoding::Float32).unwrap());
    }

    proptest! {
        #[test]
        fn prop_pcm16_round_trip(samples in proptest::collection::vec(-1.0f64..=1.0, 0..64)) {
            let w = Waveform::new(samples, 16000);
            let bytes = encode_wav(&w, WavEncoding::Pcm16).unwrap();
            let back: Waveform<f64> = decode_wav(&bytes).unwrap();
            prop_assert_eq!(w.len(), back.len());
            for (a, b) in w.samples.iter().zip(&back.samples) {
                prop_assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }

        #[test]
        fn prop_float32_round_trip(samples in proptest::collection::vec(-2.0f32..=2.0, 0..64)) {
            let w = Waveform::new(samples, 16000);
            let bytes = encode_wav(&w, WavEncoding::Float32).unwrap();
            let back: Waveform<f32> = decode_wav(&bytes).unwrap();
            prop_assert_eq!(w.samples, back.samples);
        }
    }
}
