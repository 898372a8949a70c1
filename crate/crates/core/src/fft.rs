//! In-place radix-2 complex FFT, used by the circulant-embedding sampler.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{domain, Result};

/// Precomputed bit-reversal permutation and twiddles for one power-of-two length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    bits: u32,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(domain("FFT length must be a power of two"));
        }
        let half = n / 2;
        let mut cos = Vec::with_capacity(half);
        let mut sin = Vec::with_capacity(half);
        for k in 0..half {
            let (s, c) = (-2.0 * PI * k as f64 / n as f64).sin_cos();
            cos.push(c);
            sin.push(s);
        }
        Ok(Self { n, bits: n.trailing_zeros(), cos, sin })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward DFT `X_k = Σ_j x_j e^{−2πi jk/n}`, in place, on a
    /// signal stored as separate real and imaginary parts.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) -> Result<()> {
        let n = self.n;
        if re.len() != n || im.len() != n {
            return Err(domain("FFT buffer length does not match the plan"));
        }
        if self.bits == 0 {
            return Ok(());
        }
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - self.bits);
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let (c, s) = (self.cos[k * stride], self.sin[k * stride]);
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * c - im[b] * s;
                    let ti = re[b] * s + im[b] * c;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
        Ok(())
    }
}

/// One-shot forward FFT; builds a throwaway [`FftPlan`].
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) -> Result<()> {
    if re.len() != im.len() {
        return Err(domain("FFT real and imaginary parts differ in length"));
    }
    FftPlan::new(re.len())?.forward(re, im)
}
