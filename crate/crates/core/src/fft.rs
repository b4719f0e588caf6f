//! Radix-2 decimation-in-time FFT on complex f64 buffers.
//!
//! The transform is unnormalized: `sum(|FFT(x)|^2) == n * sum(|x|^2)`.

use num_complex::Complex64;

/// In-place forward FFT. `data.len()` must be a power of two.
///
/// Panics on non-power-of-two lengths; all internal callers use fixed
/// power-of-two windows.
pub fn fft_in_place(data: &mut [Complex64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two, got {n}");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }

    // Butterfly passes with per-stage twiddle recurrence.
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        for chunk in data.chunks_mut(len) {
            let (lo, hi) = chunk.split_at_mut(len / 2);
            let mut w = Complex64::new(1.0, 0.0);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let t = w * *b;
                *b = *a - t;
                *a += t;
                w *= wlen;
            }
        }
        len <<= 1;
    }
}

/// Forward FFT into a fresh buffer.
pub fn fft(input: &[Complex64]) -> Vec<Complex64> {
    let mut out = input.to_vec();
    fft_in_place(&mut out);
    out
}

/// Reorders FFT bins so index 0 is -fs/2 and index n/2 is DC.
pub fn fftshift(bins: &[Complex64]) -> Vec<Complex64> {
    let n = bins.len();
    let half = n / 2;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&bins[half..]);
    out.extend_from_slice(&bins[..half]);
    out
}

/// Center frequency of shifted row `r` for an `n`-point FFT at `fs`.
pub fn shifted_bin_freq(r: usize, n: usize, fs: f64) -> f64 {
    (r as f64 - (n / 2) as f64) * fs / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// O(n^2) reference DFT, the independent oracle for the fast path.
    fn naive_dft(input: &[Complex64]) -> Vec<Complex64> {
        let n = input.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &x) in input.iter().enumerate() {
                    let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                    acc += x * Complex64::new(ang.cos(), ang.sin());
                }
                acc
            })
            .collect()
    }

    fn random_signal(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = crate::rng::DetRng::new(seed);
        (0..n)
            .map(|_| {
                let (a, b) = rng.normal_pair();
                Complex64::new(a, b)
            })
            .collect()
    }

    fn max_rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn matches_naive_dft_on_required_sizes() {
        for (i, &n) in [2usize, 8, 1024].iter().enumerate() {
            let x = random_signal(n, 100 + i as u64);
            let fast = fft(&x);
            let slow = naive_dft(&x);
            let err = max_rel_err(&fast, &slow);
            assert!(err <= 1e-9, "n={n}: rel err {err}");
        }
    }

    #[test]
    fn parseval_energy_identity() {
        let x = random_signal(1024, 7);
        let y = fft(&x);
        let time: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let freq: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        let rel = (freq - 1024.0 * time).abs() / (1024.0 * time);
        assert!(rel <= 1e-9, "parseval rel err {rel}");
    }

    #[test]
    fn single_tone_lands_on_its_bin() {
        let n = 1024;
        let k = 100;
        let x: Vec<Complex64> = (0..n)
            .map(|j| {
                let ang = 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        let shifted = fftshift(&fft(&x));
        let peak = shifted
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, n / 2 + k);
    }

    #[test]
    fn shifted_bin_freq_convention() {
        assert_eq!(shifted_bin_freq(0, 1024, 100e6), -50e6);
        assert_eq!(shifted_bin_freq(512, 1024, 100e6), 0.0);
        assert_eq!(shifted_bin_freq(612, 1024, 100e6), 100.0 * 100e6 / 1024.0);
    }
}
