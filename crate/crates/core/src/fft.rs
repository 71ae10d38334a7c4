//! Complex FFT for arbitrary lengths.
//!
//! Power-of-two sizes use an iterative radix-2 transform; every other size
//! goes through Bluestein's chirp-z algorithm on a power-of-two grid.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

pub use num_complex::Complex64;

/// Precomputed transform of a fixed length `n`.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    kind: PlanKind,
}

#[derive(Debug, Clone)]
enum PlanKind {
    Radix2(Radix2),
    Bluestein(Bluestein),
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<u32>,
}

#[derive(Debug, Clone)]
struct Bluestein {
    inner: Radix2,
    chirp: Vec<Complex64>,
    kernel_spectrum: Vec<Complex64>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let bits = n.trailing_zeros();
        let bitrev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        Radix2 { n, twiddles, bitrev }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i] as usize;
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        // chirp[k] = exp(-i*pi*k^2/n); k^2 reduced mod 2n to keep the angle small.
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let k2 = ((k as u128 * k as u128) % (2 * n as u128)) as f64;
                let angle = -PI * k2 / n as f64;
                Complex64::new(libm::cos(angle), libm::sin(angle))
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.run(&mut kernel, false);
        Bluestein {
            inner,
            chirp,
            kernel_spectrum: kernel,
        }
    }

    fn run(&self, buf: &mut [Complex64], inverse: bool) {
        let n = buf.len();
        let m = self.inner.n;
        let mut work = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..n {
            let x = if inverse { buf[k].conj() } else { buf[k] };
            work[k] = x * self.chirp[k];
        }
        self.inner.run(&mut work, false);
        for (w, h) in work.iter_mut().zip(&self.kernel_spectrum) {
            *w *= h;
        }
        self.inner.run(&mut work, true);
        let scale = 1.0 / m as f64;
        for k in 0..n {
            let y = work[k] * scale * self.chirp[k];
            buf[k] = if inverse { y.conj() } else { y };
        }
    }
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let kind = if n.is_power_of_two() {
            PlanKind::Radix2(Radix2::new(n))
        } else {
            PlanKind::Bluestein(Bluestein::new(n))
        };
        FftPlan { n, kind }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unscaled forward transform, `X[k] = sum x[n] e^{-2 pi i k n / N}`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        match &self.kind {
            PlanKind::Radix2(r) => r.run(buf, false),
            PlanKind::Bluestein(b) => b.run(buf, false),
        }
    }

    /// Inverse transform scaled by `1/N`, so `inverse(forward(x)) == x`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n);
        match &self.kind {
            PlanKind::Radix2(r) => r.run(buf, true),
            PlanKind::Bluestein(b) => b.run(buf, true),
        }
        let scale = 1.0 / self.n as f64;
        for x in buf.iter_mut() {
            *x *= scale;
        }
    }

    /// Forward transform of a real buffer, zero-padded to the plan length.
    pub fn forward_real(&self, input: &[f64]) -> Vec<Complex64> {
        assert!(input.len() <= self.n);
        let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(self.n, Complex64::new(0.0, 0.0));
        self.forward(&mut buf);
        buf
    }
}
