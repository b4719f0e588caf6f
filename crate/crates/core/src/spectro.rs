//! Spectrogram snapshots: non-overlapping 1024-point FFT columns, dB
//! magnitude, fixed min-max normalization.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;
use crate::siggen::IqBuffer;

/// FFT window length; one spectrogram column per window.
pub const WINDOW: usize = 1024;
/// Maximum snapshot length in windows.
pub const MAX_SNAPSHOT_LEN: usize = 34;
/// Log floor added to FFT magnitudes so silent input stays finite.
pub const LOG_FLOOR: f64 = 1e-12;
/// Fixed min-max normalization bounds, in dB.
pub const NORM_MIN_DB: f64 = -182.77;
pub const NORM_MAX_DB: f64 = -17.12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpectroError {
    #[error("buffer holds {got} samples, need at least {need}")]
    TooShort { got: usize, need: usize },
}

/// Raw dB magnitudes, one column per full window. Rows run from -fs/2 to
/// +fs/2 (fftshift order).
#[derive(Debug, Clone)]
pub struct DbMatrix {
    /// Column-by-column storage; cell (bin, col) at `col * WINDOW + bin`.
    pub values: Vec<f64>,
    pub n_cols: usize,
}

impl DbMatrix {
    pub fn cell(&self, bin: usize, col: usize) -> f64 {
        self.values[col * WINDOW + bin]
    }
}

/// Normalized 1024 x n_t snapshot, every cell clamped to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// Column-by-column storage; cell (bin, col) at `col * WINDOW + bin`.
    pub grid: Vec<f32>,
    pub n_t: usize,
    /// (min_db, max_db) bounds the grid was normalized with.
    pub raw_db_range: (f64, f64),
}

impl Spectrogram {
    pub fn cell(&self, bin: usize, col: usize) -> f32 {
        self.grid[col * WINDOW + bin]
    }

    /// Keeps the first `n_t` columns.
    pub fn truncate(&self, n_t: usize) -> Spectrogram {
        assert!(n_t >= 1 && n_t <= self.n_t);
        Spectrogram {
            grid: self.grid[..n_t * WINDOW].to_vec(),
            n_t,
            raw_db_range: self.raw_db_range,
        }
    }
}

/// Splits `x` into full 1024-sample windows (rectangular, no overlap) and
/// returns 20*log10(|FFT| + LOG_FLOOR) per bin. Trailing partial windows are
/// discarded.
pub fn stft_db(x: &IqBuffer) -> Result<DbMatrix, SpectroError> {
    let n = x.samples.len();
    if n < WINDOW {
        return Err(SpectroError::TooShort { got: n, need: WINDOW });
    }
    let n_cols = n / WINDOW;
    let mut values = Vec::with_capacity(n_cols * WINDOW);
    let mut buf = vec![Complex64::new(0.0, 0.0); WINDOW];
    for col in 0..n_cols {
        buf.copy_from_slice(&x.samples[col * WINDOW..(col + 1) * WINDOW]);
        fft::fft_in_place(&mut buf);
        // fftshift: row r holds bin (r + WINDOW/2) % WINDOW.
        for r in 0..WINDOW {
            let k = (r + WINDOW / 2) % WINDOW;
            values.push(20.0 * (buf[k].norm() + LOG_FLOOR).log10());
        }
    }
    Ok(DbMatrix { values, n_cols })
}

/// Min-max normalization with the fixed dB bounds; out-of-range values clamp.
pub fn normalize(raw: &DbMatrix) -> Spectrogram {
    let span = NORM_MAX_DB - NORM_MIN_DB;
    let grid = raw
        .values
        .iter()
        .map(|&v| (((v - NORM_MIN_DB) / span).clamp(0.0, 1.0)) as f32)
        .collect();
    Spectrogram {
        grid,
        n_t: raw.n_cols,
        raw_db_range: (NORM_MIN_DB, NORM_MAX_DB),
    }
}

/// Full snapshot pipeline: STFT, keep the first `n_t` columns, normalize.
pub fn frame_snapshot(x: &IqBuffer, n_t: usize) -> Result<Spectrogram, SpectroError> {
    assert!((1..=MAX_SNAPSHOT_LEN).contains(&n_t), "n_t must be in 1..=34");
    let need = n_t * WINDOW;
    if x.samples.len() < need {
        return Err(SpectroError::TooShort { got: x.samples.len(), need });
    }
    let raw = stft_db(x)?;
    let truncated = DbMatrix {
        values: raw.values[..n_t * WINDOW].to_vec(),
        n_cols: n_t,
    };
    Ok(normalize(&truncated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::DetRng;

    fn buffer_of(samples: Vec<Complex64>) -> IqBuffer {
        IqBuffer::new(samples, 100e6).unwrap()
    }

    /// Random buffer scaled so raw dB magnitudes land inside the
    /// normalization window instead of clamping at its ceiling.
    fn random_buffer(n: usize, seed: u64) -> IqBuffer {
        let mut rng = DetRng::new(seed);
        buffer_of(
            (0..n)
                .map(|_| {
                    let (a, b) = rng.normal_pair();
                    Complex64::new(a * 1e-5, b * 1e-5)
                })
                .collect(),
        )
    }

    /// Naive O(n^2) DFT column oracle for one window, in dB.
    fn naive_column_db(window: &[Complex64]) -> Vec<f64> {
        let n = window.len();
        let mut out = vec![0.0; n];
        for r in 0..n {
            let k = (r + n / 2) % n;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &x) in window.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                acc += x * Complex64::new(ang.cos(), ang.sin());
            }
            out[r] = 20.0 * (acc.norm() + LOG_FLOOR).log10();
        }
        out
    }

    #[test]
    fn bin_exponential_peaks_at_shifted_row() {
        let k = 100;
        let x: Vec<Complex64> = (0..WINDOW)
            .map(|j| {
                let ang = 2.0 * std::f64::consts::PI * (k * j) as f64 / WINDOW as f64;
                Complex64::new(ang.cos(), ang.sin())
            })
            .collect();
        let m = stft_db(&buffer_of(x)).unwrap();
        let peak_row = (0..WINDOW)
            .max_by(|&a, &b| m.cell(a, 0).total_cmp(&m.cell(b, 0)))
            .unwrap();
        assert_eq!(peak_row, 512 + k);
        // All other rows sit at the epsilon floor. FFT roundoff leaves
        // residual magnitudes of order 1e-13, which the floor constant
        // dominates; allow the couple of dB that roundoff moves the log.
        for r in 0..WINDOW {
            if r != peak_row {
                assert!(m.cell(r, 0) < -220.0, "row {r}: {}", m.cell(r, 0));
            }
        }
        assert!((m.cell(peak_row, 0) - 20.0 * 1024f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn matches_naive_dft_column() {
        let x = random_buffer(WINDOW, 21);
        let m = stft_db(&x).unwrap();
        let oracle = naive_column_db(&x.samples);
        for r in 0..WINDOW {
            assert!(
                (m.cell(r, 0) - oracle[r]).abs() <= 1e-9,
                "row {r}: {} vs {}",
                m.cell(r, 0),
                oracle[r]
            );
        }
    }

    #[test]
    fn all_zero_input_hits_exact_floor() {
        let x = buffer_of(vec![Complex64::new(0.0, 0.0); WINDOW * 2]);
        let m = stft_db(&x).unwrap();
        for &v in &m.values {
            assert_eq!(v, -240.0);
        }
    }

    #[test]
    fn too_short_is_rejected() {
        let x = buffer_of(vec![Complex64::new(1.0, 0.0); 1023]);
        assert_eq!(
            stft_db(&x).unwrap_err(),
            SpectroError::TooShort { got: 1023, need: 1024 }
        );
    }

    #[test]
    fn trailing_partial_window_is_discarded() {
        let x = random_buffer(WINDOW * 2 + 500, 3);
        assert_eq!(stft_db(&x).unwrap().n_cols, 2);
    }

    #[test]
    fn normalize_endpoints_midpoint_and_clamp() {
        let raw = DbMatrix {
            values: {
                let mut v = vec![-182.77; WINDOW];
                v[0] = -17.12;
                v[1] = -99.945;
                v[2] = -300.0;
                v[3] = 0.0;
                v
            },
            n_cols: 1,
        };
        let s = normalize(&raw);
        assert_eq!(s.cell(0, 0), 1.0);
        assert!((s.cell(1, 0) - 0.5).abs() < 1e-6);
        assert_eq!(s.cell(2, 0), 0.0);
        assert_eq!(s.cell(3, 0), 1.0); // above max clamps
        assert_eq!(s.cell(4, 0), 0.0); // exactly min
    }

    #[test]
    fn frame_prefix_consistency() {
        let x = random_buffer(WINDOW * 34, 9);
        let full = frame_snapshot(&x, 34).unwrap();
        let ten = frame_snapshot(&x, 10).unwrap();
        assert_eq!(full.truncate(10), ten);
        let one = frame_snapshot(&x, 1).unwrap();
        assert_eq!(full.truncate(1), one);
        assert_eq!(full.n_t, 34);
        assert_eq!(full.grid.len(), 34 * WINDOW);
    }

    #[test]
    fn columns_are_independent_windows() {
        let mut x = random_buffer(WINDOW * 3, 13);
        let before = frame_snapshot(&x, 3).unwrap();
        // Perturb only window 1; columns 0 and 2 must not move.
        x.samples[WINDOW + 5] = Complex64::new(3.0, -1.0);
        let after = frame_snapshot(&x, 3).unwrap();
        for r in 0..WINDOW {
            assert_eq!(before.cell(r, 0), after.cell(r, 0));
            assert_eq!(before.cell(r, 2), after.cell(r, 2));
        }
        assert_ne!(before.grid, after.grid);
    }

    #[test]
    fn cells_stay_in_unit_range() {
        let x = random_buffer(WINDOW * 4, 17);
        let s = frame_snapshot(&x, 4).unwrap();
        assert!(s.grid.iter().all(|&c| (0.0..=1.0).contains(&c)));
    }
}
