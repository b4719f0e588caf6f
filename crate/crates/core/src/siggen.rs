//! Complex-baseband waveform synthesis for the six interference categories.
//!
//! All generators share the same calibration contract: the returned buffer's
//! mean power `avg |x|^2` equals `10^(power_dbm/10)` (0 dBm = unit
//! mean-square amplitude), except the no-interference case which is all
//! zeros — the channel stage adds the receiver noise floor.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fft;
use crate::rng::DetRng;

/// Default chirp sweep period: one 1024-sample FFT window at 100 MHz, so a
/// spectrogram column shows one full sweep.
pub const DEFAULT_SWEEP_PERIOD_S: f64 = 10.24e-6;
/// Default hop dwell: two FFT windows.
pub const DEFAULT_HOP_DWELL_S: f64 = 20.48e-6;
/// Number of evenly spaced hop frequencies spanning the two-sided bandwidth.
pub const HOP_GRID_SIZE: usize = 8;
/// Default tone count for the multitone jammer.
pub const DEFAULT_TONE_COUNT: usize = 5;
/// Default pulse duty cycle.
pub const DEFAULT_PULSE_DUTY: f64 = 0.3;
/// Pulse repetition period: eight FFT windows at 100 MHz, so the on/off
/// pattern stays visible after the encoder's time decimation.
pub const PULSE_PERIOD_S: f64 = 81.92e-6;

#[derive(Debug, Error, PartialEq)]
pub enum SigGenError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("bandwidth {bandwidth_mhz} MHz exceeds sample rate {sample_rate_hz} Hz")]
    NyquistViolation { bandwidth_mhz: f64, sample_rate_hz: f64 },
}

/// Complex baseband sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl IqBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self, SigGenError> {
        if samples.is_empty() {
            return Err(SigGenError::InvalidSpec("empty sample buffer".into()));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(SigGenError::InvalidSpec(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(SigGenError::InvalidSpec("non-finite sample".into()));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    /// Average |x|^2 over the buffer.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Interference category, numbered as in the dataset labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JammerCategory {
    None = 0,
    Noise = 1,
    Chirp = 2,
    FreqHopper = 3,
    Modulated = 4,
    Multitone = 5,
    Pulsed = 6,
}

impl JammerCategory {
    pub const ALL: [JammerCategory; 7] = [
        JammerCategory::None,
        JammerCategory::Noise,
        JammerCategory::Chirp,
        JammerCategory::FreqHopper,
        JammerCategory::Modulated,
        JammerCategory::Multitone,
        JammerCategory::Pulsed,
    ];

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<JammerCategory> {
        Self::ALL.into_iter().find(|c| c.as_u8() == v)
    }

    pub fn name(self) -> &'static str {
        match self {
            JammerCategory::None => "None",
            JammerCategory::Noise => "Noise",
            JammerCategory::Chirp => "Chirp",
            JammerCategory::FreqHopper => "FreqHopper",
            JammerCategory::Modulated => "Modulated",
            JammerCategory::Multitone => "Multitone",
            JammerCategory::Pulsed => "Pulsed",
        }
    }
}

impl std::fmt::Display for JammerCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for JammerCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown jammer category '{s}'"))
    }
}

/// Per-type waveform parameters. Fields not relevant to a category are
/// ignored by its generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JammerParams {
    /// Chirp sweep period in seconds.
    pub sweep_period_s: f64,
    /// FreqHopper dwell time per tone in seconds.
    pub hop_dwell_s: f64,
    /// Multitone tone count.
    pub tone_count: usize,
    /// Pulsed duty cycle in (0, 1).
    pub pulse_duty: f64,
    /// BPSK symbol rate in Hz; `None` resolves to bandwidth/2.
    pub mod_rate_hz: Option<f64>,
}

impl Default for JammerParams {
    fn default() -> Self {
        Self {
            sweep_period_s: DEFAULT_SWEEP_PERIOD_S,
            hop_dwell_s: DEFAULT_HOP_DWELL_S,
            tone_count: DEFAULT_TONE_COUNT,
            pulse_duty: DEFAULT_PULSE_DUTY,
            mod_rate_hz: None,
        }
    }
}

/// Generative label for one interference source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JammerSpec {
    pub category: JammerCategory,
    pub bandwidth_mhz: f64,
    pub power_dbm: f64,
    #[serde(default)]
    pub params: JammerParams,
}

impl JammerSpec {
    pub fn new(category: JammerCategory, bandwidth_mhz: f64, power_dbm: f64) -> Self {
        Self {
            category,
            bandwidth_mhz,
            power_dbm,
            params: JammerParams::default(),
        }
    }

    pub fn none() -> Self {
        Self::new(JammerCategory::None, 0.0, 0.0)
    }

    /// Checks the spec invariants against a target sample rate.
    pub fn validate(&self, sample_rate_hz: f64) -> Result<(), SigGenError> {
        if !(sample_rate_hz > 0.0) {
            return Err(SigGenError::InvalidSpec("sample rate must be positive".into()));
        }
        if !self.bandwidth_mhz.is_finite() || self.bandwidth_mhz < 0.0 {
            return Err(SigGenError::InvalidSpec(format!(
                "bandwidth must be finite and >= 0, got {}",
                self.bandwidth_mhz
            )));
        }
        if !self.power_dbm.is_finite() {
            return Err(SigGenError::InvalidSpec("power must be finite".into()));
        }
        if self.category == JammerCategory::None && self.bandwidth_mhz != 0.0 {
            return Err(SigGenError::InvalidSpec(
                "no-interference spec must have zero bandwidth".into(),
            ));
        }
        // Two-sided occupied band [-BW/2, +BW/2] must fit in [-fs/2, +fs/2].
        if self.bandwidth_mhz * 1e6 > sample_rate_hz {
            return Err(SigGenError::NyquistViolation {
                bandwidth_mhz: self.bandwidth_mhz,
                sample_rate_hz,
            });
        }
        let p = &self.params;
        if !(p.sweep_period_s > 0.0) || !(p.hop_dwell_s > 0.0) {
            return Err(SigGenError::InvalidSpec("periods must be positive".into()));
        }
        if self.category == JammerCategory::Multitone && p.tone_count < 2 {
            return Err(SigGenError::InvalidSpec(format!(
                "multitone needs at least 2 tones, got {}",
                p.tone_count
            )));
        }
        if self.category == JammerCategory::Pulsed && !(p.pulse_duty > 0.0 && p.pulse_duty < 1.0) {
            return Err(SigGenError::InvalidSpec(format!(
                "pulse duty must be in (0, 1), got {}",
                p.pulse_duty
            )));
        }
        if let Some(r) = p.mod_rate_hz {
            if !(r > 0.0) {
                return Err(SigGenError::InvalidSpec("mod rate must be positive".into()));
            }
        }
        Ok(())
    }

    fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_mhz * 1e6
    }
}

/// Deterministic phase law of the spec's waveform kernel at time `t`.
///
/// Chirp: sawtooth sweep `2*pi*(f0*tau + k*tau^2/2)` with `f0 = -BW/2`,
/// `k = BW/period`, `tau = t mod period`. Multitone: phase of the lowest
/// tone. Categories whose content is drawn inside [`synth`] (noise, hopping,
/// symbols, gating) report the 0 Hz carrier reference, i.e. zero.
pub fn waveform_phase(spec: &JammerSpec, t: f64) -> Result<f64, SigGenError> {
    if !(t >= 0.0) {
        return Err(SigGenError::InvalidSpec(format!("t must be >= 0, got {t}")));
    }
    let bw = spec.bandwidth_hz();
    let two_pi = 2.0 * std::f64::consts::PI;
    match spec.category {
        JammerCategory::Chirp => {
            let period = spec.params.sweep_period_s;
            let tau = t % period;
            let f0 = -bw / 2.0;
            let k = bw / period;
            Ok(two_pi * (f0 * tau + 0.5 * k * tau * tau))
        }
        JammerCategory::Multitone => Ok(two_pi * (-bw / 2.0) * t),
        _ => Ok(0.0),
    }
}

/// Evenly spaced hop frequencies spanning [-BW/2, +BW/2].
pub fn hop_grid(bandwidth_hz: f64) -> Vec<f64> {
    let n = HOP_GRID_SIZE;
    (0..n)
        .map(|i| -bandwidth_hz / 2.0 + bandwidth_hz * i as f64 / (n - 1) as f64)
        .collect()
}

/// Synthesizes `n_samples` of the interference waveform described by `spec`.
pub fn synth(
    spec: &JammerSpec,
    n_samples: usize,
    sample_rate_hz: f64,
    rng: &mut DetRng,
) -> Result<IqBuffer, SigGenError> {
    if n_samples == 0 {
        return Err(SigGenError::InvalidSpec("n_samples must be >= 1".into()));
    }
    spec.validate(sample_rate_hz)?;

    let dt = 1.0 / sample_rate_hz;
    let bw = spec.bandwidth_hz();
    let mut samples: Vec<Complex64> = match spec.category {
        JammerCategory::None => {
            // Zeros by contract; the channel stage adds the noise floor.
            return Ok(IqBuffer {
                samples: vec![Complex64::new(0.0, 0.0); n_samples],
                sample_rate_hz,
            });
        }
        JammerCategory::Chirp => (0..n_samples)
            .map(|n| {
                let phase = waveform_phase(spec, n as f64 * dt).expect("t >= 0");
                Complex64::from_polar(1.0, phase)
            })
            .collect(),
        JammerCategory::FreqHopper => {
            let grid = hop_grid(bw);
            let dwell = (spec.params.hop_dwell_s * sample_rate_hz).round().max(1.0) as usize;
            let mut phase = 0.0f64;
            let mut freq = 0.0f64;
            let mut out = Vec::with_capacity(n_samples);
            for n in 0..n_samples {
                if n % dwell == 0 {
                    freq = grid[rng.below(grid.len())];
                }
                out.push(Complex64::from_polar(1.0, phase));
                // Accumulating keeps the phase continuous across hops.
                phase += 2.0 * std::f64::consts::PI * freq * dt;
            }
            out
        }
        JammerCategory::Modulated => {
            let rate = spec.params.mod_rate_hz.unwrap_or(bw / 2.0);
            if rate <= 0.0 {
                // Zero-bandwidth degenerate case: unmodulated carrier.
                vec![Complex64::new(1.0, 0.0); n_samples]
            } else {
                let sym_len = (sample_rate_hz / rate).round().max(1.0) as usize;
                let mut out = Vec::with_capacity(n_samples);
                let mut sign = 1.0;
                for n in 0..n_samples {
                    if n % sym_len == 0 {
                        sign = if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
                    }
                    out.push(Complex64::new(sign, 0.0));
                }
                out
            }
        }
        JammerCategory::Multitone => {
            let k = spec.params.tone_count;
            let freqs: Vec<f64> = (0..k)
                .map(|i| -bw / 2.0 + bw * i as f64 / (k - 1) as f64)
                .collect();
            let amp = 1.0 / (k as f64).sqrt();
            (0..n_samples)
                .map(|n| {
                    let t = n as f64 * dt;
                    freqs
                        .iter()
                        .map(|&f| {
                            Complex64::from_polar(amp, 2.0 * std::f64::consts::PI * f * t)
                        })
                        .sum()
                })
                .collect()
        }
        JammerCategory::Noise => band_limited_noise(n_samples, bw, sample_rate_hz, rng),
        JammerCategory::Pulsed => {
            let mut out = band_limited_noise(n_samples, bw, sample_rate_hz, rng);
            let period = (PULSE_PERIOD_S * sample_rate_hz).round().max(2.0) as usize;
            let on_len = ((spec.params.pulse_duty * period as f64).round() as usize)
                .clamp(1, period - 1);
            for (n, s) in out.iter_mut().enumerate() {
                if n % period >= on_len {
                    *s = Complex64::new(0.0, 0.0);
                }
            }
            out
        }
    };

    // Exact power calibration to 10^(P/10).
    let target = 10f64.powf(spec.power_dbm / 10.0);
    let mean = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n_samples as f64;
    if mean > 0.0 {
        let scale = (target / mean).sqrt();
        for s in &mut samples {
            *s *= scale;
        }
    }
    IqBuffer::new(samples, sample_rate_hz)
}

/// Complex white Gaussian noise confined to [-BW/2, +BW/2], built block by
/// block directly in the frequency domain (1024-bin brick wall per block, so
/// spectrogram columns see the exact band).
fn band_limited_noise(
    n_samples: usize,
    bandwidth_hz: f64,
    sample_rate_hz: f64,
    rng: &mut DetRng,
) -> Vec<Complex64> {
    const BLOCK: usize = 1024;
    let half_bw = bandwidth_hz / 2.0;
    let in_band: Vec<usize> = (0..BLOCK)
        .filter(|&k| {
            let k_signed = if k <= BLOCK / 2 { k as f64 } else { k as f64 - BLOCK as f64 };
            let f = k_signed * sample_rate_hz / BLOCK as f64;
            f.abs() <= half_bw + 1e-9
        })
        .collect();

    let mut out = Vec::with_capacity(n_samples);
    let mut spec_buf = vec![Complex64::new(0.0, 0.0); BLOCK];
    while out.len() < n_samples {
        for v in spec_buf.iter_mut() {
            *v = Complex64::new(0.0, 0.0);
        }
        for &k in &in_band {
            let (a, b) = rng.normal_pair();
            spec_buf[k] = Complex64::new(a, b);
        }
        // Inverse FFT via conjugation; overall scale is irrelevant because
        // the caller recalibrates power.
        let mut time: Vec<Complex64> = spec_buf.iter().map(|c| c.conj()).collect();
        fft::fft_in_place(&mut time);
        let take = (n_samples - out.len()).min(BLOCK);
        out.extend(time[..take].iter().map(|c| c.conj() / BLOCK as f64));
    }
    out
}
