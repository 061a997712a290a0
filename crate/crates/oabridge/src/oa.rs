//! Observation adding: convex blending of the noisy observation with its
//! enhanced version, `x_tilde = s' * x + (1 - s') * x_hat`.
//!
//! The coefficient `s'` comes from the bridge model's clipped output, so
//! with the default floor of 0.6 the recognizer always hears most of the
//! original observation no matter how aggressive the enhancer was.

use thiserror::Error;

use crate::sample::Sample;
use crate::wav::Waveform;

/// Relative length difference beyond which two signals are considered to
/// be different utterances rather than the same one with edge effects.
const MAX_RELATIVE_LENGTH_DIFF: f64 = 0.01;

#[derive(Debug, Error)]
pub enum OaError {
    #[error("mixing coefficient {value} outside [0, 1]")]
    CoefficientOutOfRange { value: f64 },
    #[error("sample rates differ: {x_hz} Hz vs {x_hat_hz} Hz")]
    SampleRateMismatch { x_hz: u32, x_hat_hz: u32 },
    #[error("lengths {x} and {x_hat} differ by more than {}%", MAX_RELATIVE_LENGTH_DIFF * 100.0)]
    LengthMismatch { x: usize, x_hat: usize },
}

pub(crate) fn aligned_len(a: usize, b: usize) -> Result<usize, OaError> {
    let (lo, hi) = (a.min(b), a.max(b));
    if (hi - lo) as f64 > MAX_RELATIVE_LENGTH_DIFF * hi as f64 {
        return Err(OaError::LengthMismatch { x: a, x_hat: b });
    }
    Ok(lo)
}

/// Blends `x` and `x_hat` elementwise with coefficient `s_prime`.
///
/// Lengths may differ by at most 1% (enhancers can shave edge samples);
/// both signals are truncated to the shorter before mixing. The endpoints
/// are exact: `s_prime == 1` returns `x` and `s_prime == 0` returns `x_hat`
/// bit-for-bit, and every output sample is kept inside
/// `[min(x, x_hat), max(x, x_hat)]` so the blend is convex even under
/// floating-point rounding.
pub fn oa_mix<T: Sample>(
    x: &Waveform<T>,
    x_hat: &Waveform<T>,
    s_prime: T,
) -> Result<Waveform<T>, OaError> {
    if !(s_prime >= T::zero() && s_prime <= T::one()) {
        return Err(OaError::CoefficientOutOfRange { value: s_prime.to_f64_lossy() });
    }
    if x.sample_rate_hz != x_hat.sample_rate_hz {
        return Err(OaError::SampleRateMismatch { x_hz: x.sample_rate_hz, x_hat_hz: x_hat.sample_rate_hz });
    }
    let len = aligned_len(x.len(), x_hat.len())?;

    // Bit-exact early outs for the endpoints.
    if s_prime == T::one() {
        return Ok(Waveform::new(x.samples[..len].to_vec(), x.sample_rate_hz));
    }
    if s_prime == T::zero() {
        return Ok(Waveform::new(x_hat.samples[..len].to_vec(), x.sample_rate_hz));
    }

    let one_minus = T::one() - s_prime;
    let samples = x.samples[..len]
        .iter()
        .zip(&x_hat.samples[..len])
        .map(|(a, b)| {
            let blended = s_prime * *a + one_minus * *b;
            // Guard against the ~1 ulp the two roundings can add; keeps the
            // convexity invariant exact.
            blended.max(a.min(*b)).min(a.max(*b))
        })
        .collect();
    Ok(Waveform::new(samples, x.sample_rate_hz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wf(samples: Vec<f64>) -> Waveform<f64> {
        Waveform::new(samples, 16000)
    }

    #[test]
    fn endpoints_are_bit_exact() {
        let x = wf(vec![0.123456789, -0.987654321, 0.3]);
        let y = wf(vec![0.5, 0.25, -0.125]);
        let at_one = oa_mix(&x, &y, 1.0).unwrap();
        let at_zero = oa_mix(&x, &y, 0.0).unwrap();
        for i in 0..3 {
            assert_eq!(at_one.samples[i].to_bits(), x.samples[i].to_bits());
            assert_eq!(at_zero.samples[i].to_bits(), y.samples[i].to_bits());
        }
    }

    #[test]
    fn worked_example() {
        let out = oa_mix(&wf(vec![0.5, -0.5]), &wf(vec![0.1, -0.1]), 0.6).unwrap();
        assert!((out.samples[0] - 0.34).abs() < 1e-12);
        assert!((out.samples[1] + 0.34).abs() < 1e-12);
    }

    #[test]
    fn coefficient_range_is_enforced() {
        let x = wf(vec![0.0]);
        assert!(matches!(oa_mix(&x, &x, 1.2), Err(OaError::CoefficientOutOfRange { .. })));
        assert!(matches!(oa_mix(&x, &x, -0.1), Err(OaError::CoefficientOutOfRange { .. })));
        assert!(matches!(oa_mix(&x, &x, f64::NAN), Err(OaError::CoefficientOutOfRange { .. })));
    }

    #[test]
    fn length_alignment() {
        let long = wf(vec![0.1; 1000]);
        let short = wf(vec![0.2; 995]);
        let out = oa_mix(&long, &short, 0.5).unwrap();
        assert_eq!(out.len(), 995);
        let too_short = wf(vec![0.2; 900]);
        assert!(matches!(oa_mix(&long, &too_short, 0.5), Err(OaError::LengthMismatch { .. })));
    }

    #[test]
    fn sample_rate_mismatch_is_an_error() {
        let x = wf(vec![0.0]);
        let y = Waveform::new(vec![0.0], 8000);
        assert!(matches!(oa_mix(&x, &y, 0.5), Err(OaError::SampleRateMismatch { .. })));
    }

    proptest! {
        #[test]
        fn prop_convexity(
            pairs in proptest::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 1..64),
            s in 0.0f64..=1.0,
        ) {
            let x = wf(pairs.iter().map(|p| p.0).collect());
            let y = wf(pairs.iter().map(|p| p.1).collect());
            let out = oa_mix(&x, &y, s).unwrap();
            for i in 0..pairs.len() {
                let (lo, hi) = (pairs[i].0.min(pairs[i].1), pairs[i].0.max(pairs[i].1));
                prop_assert!(out.samples[i] >= lo && out.samples[i] <= hi);
            }
        }

        #[test]
        fn prop_linearity_in_coefficient(
            pairs in proptest::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 1..32),
            s1 in 0.0f64..=1.0,
            s2 in 0.0f64..=1.0,
        ) {
            let x = wf(pairs.iter().map(|p| p.0).collect());
            let y = wf(pairs.iter().map(|p| p.1).collect());
            let a = oa_mix(&x, &y, s1).unwrap();
            let b = oa_mix(&x, &y, s2).unwrap();
            let mid = oa_mix(&x, &y, (s1 + s2) / 2.0).unwrap();
            for i in 0..pairs.len() {
                let avg = (a.samples[i] + b.samples[i]) / 2.0;
                prop_assert!((avg - mid.samples[i]).abs() < 1e-12);
            }
        }
    }
}
