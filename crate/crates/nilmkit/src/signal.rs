//! Mains waveform primitives.
//!
//! Everything downstream (event detection, V-I features, scenario synthesis)
//! works on sampled mains-frequency waveforms whose cycle length is a power
//! of two, so single cycles can be transformed with a radix-2 FFT and sliced
//! without interpolation.
//!
//! ## Features
//!
//! - `Waveform`: a sampled channel locked to an integer power-of-two number
//!   of samples per mains cycle (resampling helper for corpora that are not)
//! - `CyclePair`: one phase-aligned voltage/current cycle
//! - `dft` / `idft`: radix-2 transform, unnormalized forward, `1/N` inverse
//! - `rms`, `add_noise` (SNR-calibrated, seeded), `extract_cycle`
//!   (zero-crossing aligned)
//!
//! ## Example
//!
//! ```
//! use nilmkit::signal::{Waveform, extract_cycle};
//!
//! let spc = 256; // samples per cycle at 15 360 Hz / 60 Hz
//! let wave: Vec<f64> = (0..4 * spc)
//!     .map(|k| (2.0 * std::f64::consts::PI * k as f64 / spc as f64).sin())
//!     .collect();
//! let v = Waveform::new(wave.clone(), 15_360.0, 60.0).unwrap();
//! let i = Waveform::new(wave, 15_360.0, 60.0).unwrap();
//! let cycle = extract_cycle(&v, &i, 0).unwrap();
//! assert_eq!(cycle.n(), 256);
//! ```

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Default sampling rate: 256 samples per cycle at 60 Hz mains.
pub const DEFAULT_SAMPLE_RATE: f64 = 15_360.0;
/// Default mains frequency.
pub const DEFAULT_MAINS_FREQ: f64 = 60.0;
/// Smallest cycle length the feature extractors accept.
pub const MIN_CYCLE_LEN: usize = 64;

// ---------------------------------------------------------------------------
// Waveform
// ---------------------------------------------------------------------------

/// A sampled mains-locked signal.
///
/// Invariant: `sample_rate / mains_freq` is an integer power of two, so every
/// cycle occupies the same whole number of samples. Use [`Waveform::resampled`]
/// for source material recorded at other rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: f64,
    mains_freq: f64,
    samples_per_cycle: usize,
}

impl Waveform {
    /// Wraps samples recorded at `sample_rate` with the given mains frequency.
    ///
    /// Fails if `sample_rate / mains_freq` is not an integer power of two.
    /// Validation is O(1); the samples themselves are not scanned.
    pub fn new(samples: Vec<f64>, sample_rate: f64, mains_freq: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Argument(format!("sample_rate must be positive, got {sample_rate}")));
        }
        if !(mains_freq.is_finite() && mains_freq > 0.0) {
            return Err(Error::Argument(format!("mains_freq must be positive, got {mains_freq}")));
        }
        let ratio = sample_rate / mains_freq;
        let spc = ratio.round();
        if (ratio - spc).abs() > 1e-6 * ratio || spc < 1.0 {
            return Err(Error::Size {
                what: "samples per cycle",
                details: format!("{sample_rate} Hz / {mains_freq} Hz = {ratio} is not an integer"),
            });
        }
        let spc = spc as usize;
        if !spc.is_power_of_two() {
            return Err(Error::Size {
                what: "samples per cycle",
                details: format!("{spc} is not a power of two; resample first"),
            });
        }
        Ok(Waveform { samples, sample_rate, mains_freq, samples_per_cycle: spc })
    }

    /// Linearly resamples onto the nearest power-of-two-per-cycle grid.
    ///
    /// E.g. material recorded at 16.5 kHz / 60 Hz (275 samples per cycle)
    /// lands on 256 samples per cycle, i.e. 15 360 Hz.
    pub fn resampled(samples: &[f64], sample_rate: f64, mains_freq: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Argument(format!("sample_rate must be positive, got {sample_rate}")));
        }
        if !(mains_freq.is_finite() && mains_freq > 0.0) {
            return Err(Error::Argument(format!("mains_freq must be positive, got {mains_freq}")));
        }
        if samples.len() < 2 {
            return Err(Error::Size { what: "resample input", details: "need at least 2 samples".into() });
        }
        let ratio = sample_rate / mains_freq;
        let target_spc = 1usize << (ratio.log2().round() as u32);
        let step = ratio / target_spc as f64; // source samples per output sample
        let n_out = ((samples.len() - 1) as f64 / step).floor() as usize + 1;
        let mut out = Vec::with_capacity(n_out);
        for k in 0..n_out {
            let pos = k as f64 * step;
            let j = pos.floor() as usize;
            if j + 1 < samples.len() {
                let frac = pos - j as f64;
                out.push(samples[j] + frac * (samples[j + 1] - samples[j]));
            } else {
                out.push(samples[samples.len() - 1]);
            }
        }
        Waveform::new(out, mains_freq * target_spc as f64, mains_freq)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn mains_freq(&self) -> f64 {
        self.mains_freq
    }

    pub fn samples_per_cycle(&self) -> usize {
        self.samples_per_cycle
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of whole cycles in the record.
    pub fn num_cycles(&self) -> usize {
        self.samples.len() / self.samples_per_cycle
    }
}

// ---------------------------------------------------------------------------
// CyclePair
// ---------------------------------------------------------------------------

/// One phase-aligned mains cycle of voltage and current.
///
/// Invariant: both channels have the same length `N`, with `N >= 64` and a
/// power of two.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePair {
    v: Vec<f64>,
    i: Vec<f64>,
    mains_freq: f64,
}

impl CyclePair {
    pub fn new(v: Vec<f64>, i: Vec<f64>, mains_freq: f64) -> Result<Self> {
        if v.len() != i.len() {
            return Err(Error::Size {
                what: "cycle pair",
                details: format!("v has {} samples, i has {}", v.len(), i.len()),
            });
        }
        if v.len() < MIN_CYCLE_LEN || !v.len().is_power_of_two() {
            return Err(Error::Size {
                what: "cycle pair",
                details: format!("cycle length {} must be a power of two >= {MIN_CYCLE_LEN}", v.len()),
            });
        }
        if !(mains_freq.is_finite() && mains_freq > 0.0) {
            return Err(Error::Argument(format!("mains_freq must be positive, got {mains_freq}")));
        }
        Ok(CyclePair { v, i, mains_freq })
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn i(&self) -> &[f64] {
        &self.i
    }

    pub fn mains_freq(&self) -> f64 {
        self.mains_freq
    }

    /// Sampling rate implied by the cycle length.
    pub fn sample_rate(&self) -> f64 {
        self.mains_freq * self.n() as f64
    }

    /// Mean instantaneous power `mean(v * i)` over the cycle.
    pub fn active_power(&self) -> f64 {
        let n = self.n() as f64;
        self.v.iter().zip(&self.i).map(|(v, i)| v * i).sum::<f64>() / n
    }

    /// Returns a copy with the current channel negated (voltage untouched).
    pub fn with_negated_current(&self) -> CyclePair {
        CyclePair { v: self.v.clone(), i: self.i.iter().map(|x| -x).collect(), mains_freq: self.mains_freq }
    }
}

// ---------------------------------------------------------------------------
// Spectrum
// ---------------------------------------------------------------------------

/// Complex DFT coefficients of a real or complex signal.
///
/// For real inputs the coefficients are conjugate-symmetric:
/// `coeff[N - k] == conj(coeff[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
    bin_hz: f64,
}

impl Spectrum {
    /// Transforms `samples` recorded at `sample_rate`.
    pub fn analyze(samples: &[f64], sample_rate: f64) -> Result<Spectrum> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Argument(format!("sample_rate must be positive, got {sample_rate}")));
        }
        let coeffs = dft_real(samples)?;
        let bin_hz = sample_rate / samples.len() as f64;
        Ok(Spectrum { coeffs, bin_hz })
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>, bin_hz: f64) -> Result<Spectrum> {
        if coeffs.is_empty() || !coeffs.len().is_power_of_two() {
            return Err(Error::Size {
                what: "spectrum",
                details: format!("{} bins is not a power of two", coeffs.len()),
            });
        }
        Ok(Spectrum { coeffs, bin_hz })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Width of one frequency bin in Hz.
    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    /// Magnitude of bin `k`.
    pub fn magnitude(&self, k: usize) -> f64 {
        self.coeffs[k].norm()
    }

    /// Largest deviation from conjugate symmetry, relative to the largest
    /// coefficient magnitude. Near zero for spectra of real signals.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.coeffs.len();
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
        let mut worst = self.coeffs[0].im.abs();
        for k in 1..n {
            worst = worst.max((self.coeffs[k] - self.coeffs[n - k].conj()).norm());
        }
        worst / scale
    }
}

// ---------------------------------------------------------------------------
// Transforms
// ---------------------------------------------------------------------------

fn fft_in_place(x: &mut [Complex64], inverse: bool) {
    let n = x.len();
    // Bit-reversal permutation.
    let mut j = 0usize;
    for k in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if k < j {
            x.swap(k, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut m = 2;
    while m <= n {
        let theta = sign * 2.0 * std::f64::consts::PI / m as f64;
        let w_m = Complex64::from_polar(1.0, theta);
        for start in (0..n).step_by(m) {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..m / 2 {
                let a = x[start + k];
                let b = x[start + k + m / 2] * w;
                x[start + k] = a + b;
                x[start + k + m / 2] = a - b;
                w *= w_m;
            }
        }
        m <<= 1;
    }
}

fn check_fft_len(n: usize, what: &'static str) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Size { what, details: format!("length {n} is not a nonzero power of two") });
    }
    Ok(())
}

/// Forward DFT of a complex sequence: `X_k = sum_t x_t e^{-2 pi i k t / N}`.
/// Unnormalized; the length must be a power of two.
pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    check_fft_len(x.len(), "dft input")?;
    let mut out = x.to_vec();
    fft_in_place(&mut out, false);
    Ok(out)
}

/// Forward DFT of a real sequence.
pub fn dft_real(x: &[f64]) -> Result<Vec<Complex64>> {
    check_fft_len(x.len(), "dft input")?;
    let mut out: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    fft_in_place(&mut out, false);
    Ok(out)
}

/// Inverse DFT with `1/N` normalization: `idft(dft(x)) == x`.
pub fn idft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    check_fft_len(x.len(), "idft input")?;
    let mut out = x.to_vec();
    fft_in_place(&mut out, true);
    let scale = 1.0 / out.len() as f64;
    for c in out.iter_mut() {
        *c *= scale;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

/// Root mean square of a sequence. Errors on empty input.
pub fn rms(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Size { what: "rms input", details: "empty sequence".into() });
    }
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    Ok(ms.sqrt())
}

/// Adds zero-mean Gaussian noise calibrated to a signal-to-noise ratio.
///
/// The noise variance is `P_x / 10^(snr_db / 10)` where `P_x` is the mean
/// square of `x`. `None` means no noise (the waveform is returned unchanged).
/// The same `seed` always produces bit-identical output.
pub fn add_noise(x: &Waveform, snr_db: Option<f64>, seed: u64) -> Result<Waveform> {
    let Some(snr) = snr_db else {
        return Ok(x.clone());
    };
    if !snr.is_finite() {
        return Err(Error::Argument(format!("snr_db must be finite, got {snr}")));
    }
    if x.is_empty() {
        return Err(Error::Size { what: "add_noise input", details: "empty waveform".into() });
    }
    let p_x = x.samples().iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let sigma = (p_x * 10f64.powf(-snr / 10.0)).sqrt();
    let mut rng = rng_from_seed(seed);
    let samples = x
        .samples()
        .iter()
        .map(|&v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Waveform::new(samples, x.sample_rate(), x.mains_freq())
}

// ---------------------------------------------------------------------------
// Cycle extraction
// ---------------------------------------------------------------------------

/// Cuts one phase-aligned cycle from synchronized voltage/current waveforms.
///
/// The cycle starts at the first positive-going zero crossing of `v` at or
/// after sample `at` (the crossing position is linearly interpolated between
/// samples, then snapped to the nearest one). Errors if no crossing occurs
/// within one cycle of `at`, or the record ends before the cycle completes.
pub fn extract_cycle(v: &Waveform, i: &Waveform, at: usize) -> Result<CyclePair> {
    if v.sample_rate() != i.sample_rate()
        || v.mains_freq() != i.mains_freq()
        || v.len() != i.len()
    {
        return Err(Error::Argument("voltage and current waveforms must share rate, mains frequency and length".into()));
    }
    let n = v.samples_per_cycle();
    let vs = v.samples();
    if at >= v.len() {
        return Err(Error::Boundary(format!("start index {at} is past the end of the record ({})", v.len())));
    }
    let mut start = None;
    // The crossing can land exactly one cycle after `at` when v[at] sits an
    // epsilon above zero, so the search covers n + 1 sample pairs.
    for k in at..(at + n + 1).min(v.len().saturating_sub(1)) {
        let (a, b) = (vs[k], vs[k + 1]);
        let frac = if a < 0.0 && b >= 0.0 {
            a / (a - b)
        } else if a == 0.0 && b > 0.0 {
            0.0
        } else {
            continue;
        };
        start = Some(if frac <= 0.5 { k } else { k + 1 });
        break;
    }
    let Some(start) = start else {
        // Distinguish "ran out of record" from "one full cycle with no crossing".
        if at + n >= v.len() {
            return Err(Error::Boundary(format!(
                "no room for a full cycle search window at sample {at} (record has {})",
                v.len()
            )));
        }
        return Err(Error::MalformedSignal(format!(
            "no positive-going voltage zero crossing within one cycle of sample {at}"
        )));
    };
    if start + n > v.len() {
        return Err(Error::Boundary(format!(
            "cycle starting at sample {start} needs {n} samples but only {} remain",
            v.len() - start
        )));
    }
    CyclePair::new(
        vs[start..start + n].to_vec(),
        i.samples()[start..start + n].to_vec(),
        v.mains_freq(),
    )
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
