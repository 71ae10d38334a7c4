use alloc::vec::Vec;

use super::SampledSignal;
use crate::fft::FftPlan;
use crate::{Error, Result};

/// Teager energy operator, `psi[n] = x[n]^2 - x[n+1] x[n-1]`.
///
/// Only interior samples are defined, so the output has `N - 2` samples;
/// output index `i` corresponds to input index `i + 1`.
pub fn teager_energy(signal: &SampledSignal) -> Result<SampledSignal> {
    let x = signal.samples();
    if x.len() < 3 {
        return Err(Error::invalid("Teager energy needs at least 3 samples"));
    }
    let out = x.windows(3).map(|w| w[1] * w[1] - w[2] * w[0]).collect();
    Ok(signal.with_samples(out))
}

/// Magnitude of the analytic signal, built in the frequency domain over
/// the whole buffer.
///
/// Accuracy is only meaningful away from the edges: the implied periodic
/// extension produces transients over the first and last few percent.
pub fn hilbert_envelope(signal: &SampledSignal) -> Result<SampledSignal> {
    let x = signal.samples();
    let n = x.len();
    if n == 0 {
        return Err(Error::invalid("Hilbert envelope of an empty signal"));
    }
    let plan = FftPlan::new(n);
    let mut spec = plan.forward_real(x);
    // Keep DC (and Nyquist for even n), double positive frequencies, zero
    // the negative ones.
    let half = n / 2;
    for (k, v) in spec.iter_mut().enumerate() {
        let weight = if k == 0 || (n.is_multiple_of(2) && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *v *= weight;
    }
    plan.inverse(&mut spec);
    let env: Vec<f64> = spec.iter().map(|c| c.norm()).collect();
    Ok(signal.with_samples(env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    #[test]
    fn teager_constant_is_zero() {
        let s = SampledSignal::new(vec![1.5; 10], 100.0).unwrap();
        let t = teager_energy(&s).unwrap();
        assert_eq!(t.len(), 8);
        assert!(t.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn teager_direct_example() {
        let s = SampledSignal::new(vec![2.0, 0.0, -2.0], 100.0).unwrap();
        assert_eq!(teager_energy(&s).unwrap().samples(), &[4.0]);
    }

    #[test]
    fn teager_rejects_short() {
        let s = SampledSignal::new(vec![1.0, 2.0], 100.0).unwrap();
        assert!(teager_energy(&s).is_err());
    }

    #[test]
    fn teager_sinusoid_identity() {
        let omega = PI / 4.0;
        let x: Vec<f64> = (0..64).map(|n| libm::cos(omega * n as f64)).collect();
        let t = teager_energy(&SampledSignal::new(x, 1.0).unwrap()).unwrap();
        for v in t.samples() {
            assert!((v - 0.5).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn teager_identity_random(a in 0.01f64..10.0, omega in 0.01f64..3.13, phase in 0.0f64..core::f64::consts::TAU) {
            let x: Vec<f64> = (0..32).map(|n| a * libm::cos(omega * n as f64 + phase)).collect();
            let t = teager_energy(&SampledSignal::new(x, 1.0).unwrap()).unwrap();
            let expected = a * a * libm::sin(omega) * libm::sin(omega);
            for v in t.samples() {
                prop_assert!((v - expected).abs() <= 1e-8 * expected.max(a * a));
            }
        }
    }

    #[test]
    fn envelope_of_sinusoid() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..1000)
            .map(|i| 0.5 * libm::sin(2.0 * PI * 10.0 * i as f64 / fs))
            .collect();
        let env = hilbert_envelope(&SampledSignal::new(x, fs).unwrap()).unwrap();
        assert!(env.samples().iter().all(|&v| v >= 0.0));
        for v in &env.samples()[50..950] {
            assert!((v - 0.5).abs() <= 0.01, "{v}");
        }
    }

    #[test]
    fn envelope_of_zero_is_zero() {
        let env = hilbert_envelope(&SampledSignal::new(vec![0.0; 64], 100.0).unwrap()).unwrap();
        assert!(env.samples().iter().all(|&v| v == 0.0));
        assert!(hilbert_envelope(&SampledSignal::new(vec![], 100.0).unwrap()).is_err());
    }

    #[test]
    fn envelope_tracks_am_modulator() {
        let fs = 1000.0;
        let n = 2000;
        let modulator = |t: f64| 1.0 + 0.5 * libm::cos(2.0 * PI * 2.0 * t);
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                modulator(t) * libm::sin(2.0 * PI * 50.0 * t)
            })
            .collect();
        let env = hilbert_envelope(&SampledSignal::new(x, fs).unwrap()).unwrap();
        let edge = n / 20;
        for i in edge..n - edge {
            let m = modulator(i as f64 / fs);
            assert!((env.samples()[i] - m).abs() <= 0.03 * m);
        }
    }
}
