//! Frame-based spectral analysis shared by the detector, the quality
//! filter, the feature extractor, and the toy codec.
//!
//! All analysis runs on non-overlapping 40 ms frames (640 samples at
//! 16 kHz) with a Hann window, so one frame equals one column of the
//! timestamp matrix.

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::Error;
use crate::Result;

pub const SAMPLE_RATE: u32 = 16_000;
/// Samples per analysis frame (40 ms at 16 kHz).
pub const FRAME_LEN: usize = 640;
/// Seconds per analysis frame.
pub const FRAME_SECONDS: f64 = 0.04;
/// One-sided spectrum size.
pub const NUM_BINS: usize = FRAME_LEN / 2 + 1;
/// Hz per FFT bin.
pub const BIN_HZ: f64 = SAMPLE_RATE as f64 / FRAME_LEN as f64;

/// Number of analysis frames covering `len` samples (last frame zero-padded).
pub fn num_frames(len: usize) -> usize {
    len.div_ceil(FRAME_LEN)
}

/// Per-frame one-sided power spectrum, `frames x NUM_BINS`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub power: Array2<f64>,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.power.nrows()
    }

    /// Summed power in `[lo_hz, hi_hz)` for one frame.
    pub fn band_power(&self, frame: usize, lo_hz: f64, hi_hz: f64) -> f64 {
        let row = self.power.row(frame);
        bin_range(lo_hz, hi_hz).map(|k| row[k]).sum()
    }

    /// Band power for every frame.
    pub fn band_energies(&self, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
        (0..self.frames())
            .map(|t| self.band_power(t, lo_hz, hi_hz))
            .collect()
    }

    /// Total power for every frame.
    pub fn total_energies(&self) -> Vec<f64> {
        (0..self.frames())
            .map(|t| self.power.row(t).sum())
            .collect()
    }

    /// Power-weighted mean frequency of one frame, in Hz. 0 for silence.
    pub fn spectral_centroid(&self, frame: usize) -> f64 {
        let row = self.power.row(frame);
        let total: f64 = row.sum();
        if total <= 0.0 {
            return 0.0;
        }
        let weighted: f64 = row
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * BIN_HZ * p)
            .sum();
        weighted / total
    }

    /// Spectral flatness (geometric / arithmetic mean of power) of one frame.
    pub fn spectral_flatness(&self, frame: usize) -> f64 {
        let row = self.power.row(frame);
        let n = row.len() as f64;
        let floor = 1e-20;
        let arith: f64 = row.iter().map(|p| p + floor).sum::<f64>() / n;
        let geo = (row.iter().map(|p| (p + floor).ln()).sum::<f64>() / n).exp();
        geo / arith
    }
}

/// FFT bin indices whose center frequency lies in `[lo_hz, hi_hz)`.
pub fn bin_range(lo_hz: f64, hi_hz: f64) -> std::ops::Range<usize> {
    let lo = ((lo_hz / BIN_HZ).ceil().max(0.0)) as usize;
    let hi = ((hi_hz / BIN_HZ).ceil().max(0.0) as usize).min(NUM_BINS);
    lo..hi.max(lo)
}

/// Hann-windowed power spectrogram over non-overlapping frames.
///
/// Errors if the audio is shorter than one frame.
pub fn power_spectrogram(samples: &[f32]) -> Result<Spectrogram> {
    if samples.is_empty() {
        return Err(Error::EmptyAudio);
    }
    if samples.len() < FRAME_LEN {
        return Err(Error::AudioTooShort(samples.len(), FRAME_LEN));
    }
    let frames = num_frames(samples.len());
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(FRAME_LEN);
    let window = hann_window(FRAME_LEN);

    let mut power = Array2::<f64>::zeros((frames, NUM_BINS));
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME_LEN];
    for t in 0..frames {
        let start = t * FRAME_LEN;
        let end = (start + FRAME_LEN).min(samples.len());
        for (i, c) in buf.iter_mut().enumerate() {
            let s = if start + i < end {
                samples[start + i] as f64
            } else {
                0.0
            };
            *c = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        for k in 0..NUM_BINS {
            power[(t, k)] = buf[k].norm_sqr();
        }
    }
    Ok(Spectrogram { power })
}

pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let x = std::f64::consts::PI * i as f64 / len as f64;
            x.sin() * x.sin()
        })
        .collect()
}

/// Sum of squared Hann window samples; calibrates codec amplitudes.
pub fn hann_energy(len: usize) -> f64 {
    hann_window(len).iter().map(|w| w * w).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_arithmetic() {
        assert_eq!(num_frames(640), 1);
        assert_eq!(num_frames(641), 2);
        assert_eq!(num_frames(160_000), 250);
    }

    #[test]
    fn short_audio_rejected() {
        assert!(matches!(
            power_spectrogram(&[0.0; 100]),
            Err(Error::AudioTooShort(100, _))
        ));
        assert!(matches!(power_spectrogram(&[]), Err(Error::EmptyAudio)));
    }

    #[test]
    fn tone_energy_lands_in_band() {
        // 1000 Hz is bin 40 exactly; with a Hann window the energy stays
        // within a couple of bins.
        let n = FRAME_LEN * 4;
        let samples: Vec<f32> = (0..n)
            .map(|i| {
                (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / SAMPLE_RATE as f64).sin() as f32
            })
            .collect();
        let spec = power_spectrogram(&samples).unwrap();
        let in_band = spec.band_power(1, 900.0, 1100.0);
        let total: f64 = spec.power.row(1).sum();
        assert!(in_band / total > 0.99, "ratio {}", in_band / total);
    }

    #[test]
    fn centroid_tracks_tone() {
        let n = FRAME_LEN * 2;
        let samples: Vec<f32> = (0..n)
            .map(|i| {
                (2.0 * std::f64::consts::PI * 2000.0 * i as f64 / SAMPLE_RATE as f64).sin() as f32
            })
            .collect();
        let spec = power_spectrogram(&samples).unwrap();
        let c = spec.spectral_centroid(0);
        assert!((c - 2000.0).abs() < 50.0, "centroid {c}");
    }
}
