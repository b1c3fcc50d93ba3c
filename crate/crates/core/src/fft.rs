//! Radix-2 complex FFT used for the wide convolutions of heavy-tailed
//! lattice laws.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

fn bit_reverse(buf: &mut [Complex64]) {
    let n = buf.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
}

/// In-place transform; `buf.len()` must be a power of two. The inverse is
/// unnormalized.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    bit_reverse(buf);
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles computed directly per index to keep the error flat in n.
        let tw: Vec<Complex64> = (0..half)
            .map(|k| Complex64::new(libm::cos(ang * k as f64), libm::sin(ang * k as f64)))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let u = buf[start + k];
                let v = buf[start + k + half] * tw[k];
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

/// Linear convolution of a fixed real kernel against many inputs of a
/// bounded length.
#[derive(Debug, Clone)]
pub struct FftConvolver {
    size: usize,
    kernel_len: usize,
    max_input: usize,
    kernel_hat: Vec<Complex64>,
}

impl FftConvolver {
    pub fn new(kernel: &[f64], max_input: usize) -> Self {
        let size = (kernel.len() + max_input - 1).next_power_of_two();
        let mut kernel_hat = vec![Complex64::new(0.0, 0.0); size];
        for (slot, &k) in kernel_hat.iter_mut().zip(kernel) {
            slot.re = k;
        }
        fft_in_place(&mut kernel_hat, false);
        FftConvolver {
            size,
            kernel_len: kernel.len(),
            max_input,
            kernel_hat,
        }
    }

    /// Full linear convolution, length `input.len() + kernel.len() - 1`.
    pub fn convolve(&self, input: &[f64]) -> Vec<f64> {
        assert!(input.len() <= self.max_input);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (slot, &x) in buf.iter_mut().zip(input) {
            slot.re = x;
        }
        fft_in_place(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= *k;
        }
        fft_in_place(&mut buf, true);
        let scale = 1.0 / self.size as f64;
        buf.iter()
            .take(input.len() + self.kernel_len - 1)
            .map(|c| c.re * scale)
            .collect()
    }
}

/// Direct or FFT convolution, whichever is cheaper.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) <= 64 {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    } else {
        FftConvolver::new(b, a.len()).convolve(a)
    }
}
