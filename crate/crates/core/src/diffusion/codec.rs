//! Analytic codec between audio and per-class band-energy latents.
//!
//! Encode: per 40 ms frame, scaled log band energy for every class plus
//! two broadband channels (log total energy, normalized centroid).
//! Decode: per class, three in-band sinusoid carriers amplitude-modulated
//! by the channel's energy envelope.

use ndarray::Array2;

use crate::bank::{check_disjoint_bands, EventClass};
use crate::caption::TimestampMatrix;
use crate::dsp::{self, FRAME_LEN, FRAME_SECONDS, SAMPLE_RATE};
use crate::error::Error;
use crate::Result;

/// Energy floor and log scaling shared by encode/decode (latent layout v1).
const ENERGY_FLOOR: f64 = 1e-8;
const LOG_OFFSET: f64 = 8.0;
const LOG_SCALE: f64 = 4.0;
/// Latent values below this decode to silence.
const SILENCE_GATE: f64 = 0.05;
/// Latent channels beyond the class channels.
pub const AUX_CHANNELS: usize = 2;

/// Frames x channels real latent on the 40 ms grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    /// frames x (classes + 2).
    pub data: Array2<f64>,
    pub frame_resolution: f64,
}

impl LatentSequence {
    pub fn frames(&self) -> usize {
        self.data.nrows()
    }
    pub fn channels(&self) -> usize {
        self.data.ncols()
    }
}

fn to_latent(energy: f64) -> f64 {
    ((energy + ENERGY_FLOOR).log10() + LOG_OFFSET) / LOG_SCALE
}

fn from_latent(value: f64) -> f64 {
    if value < SILENCE_GATE {
        return 0.0;
    }
    (10f64.powf(value * LOG_SCALE - LOG_OFFSET) - ENERGY_FLOOR).max(0.0)
}

/// Encode audio into the per-class band-energy latent.
pub fn toy_encode(audio: &[f32], classes: &[EventClass]) -> Result<LatentSequence> {
    check_disjoint_bands(classes)?;
    let spec = dsp::power_spectrogram(audio)?;
    let frames = spec.frames();
    let channels = classes.len() + AUX_CHANNELS;
    let mut data = Array2::<f64>::zeros((frames, channels));
    for (c, class) in classes.iter().enumerate() {
        let energies = spec.band_energies(class.band_lo(), class.band_hi());
        for t in 0..frames {
            data[(t, c)] = to_latent(energies[t]);
        }
    }
    let totals = spec.total_energies();
    for t in 0..frames {
        data[(t, classes.len())] = to_latent(totals[t]);
        data[(t, classes.len() + 1)] = spec.spectral_centroid(t) / (SAMPLE_RATE as f64 / 2.0);
    }
    Ok(LatentSequence {
        data,
        frame_resolution: FRAME_SECONDS,
    })
}

/// Decode a latent back to audio with per-class sinusoid carriers.
pub fn toy_decode(latent: &LatentSequence, classes: &[EventClass]) -> Result<Vec<f32>> {
    check_disjoint_bands(classes)?;
    if latent.channels() != classes.len() + AUX_CHANNELS {
        return Err(Error::ShapeMismatch(format!(
            "latent has {} channels, expected {}",
            latent.channels(),
            classes.len() + AUX_CHANNELS
        )));
    }
    let frames = latent.frames();
    let n = frames * FRAME_LEN;
    let mut out = vec![0.0f64; n];
    // Calibration: a steady sinusoid of amplitude a measured through the
    // Hann-windowed one-sided spectrogram yields roughly
    // N * a^2 * sum(w^2) / 4 of band energy; three carriers share it.
    let cal = FRAME_LEN as f64 * dsp::hann_energy(FRAME_LEN) / 4.0;
    let dt = 1.0 / SAMPLE_RATE as f64;
    for (c, class) in classes.iter().enumerate() {
        // Per-frame carrier amplitude from the channel energy.
        let amps: Vec<f64> = (0..frames)
            .map(|t| {
                let e = from_latent(latent.data[(t, c)].clamp(0.0, 3.0));
                (e / (3.0 * cal)).sqrt()
            })
            .collect();
        if amps.iter().all(|a| *a == 0.0) {
            continue;
        }
        // Three bin-aligned partials inside the band, phases fixed per class.
        let offsets = [-50.0, 0.0, 50.0];
        let freqs: Vec<f64> = offsets
            .iter()
            .map(|o| ((class.band_center + o) / dsp::BIN_HZ).round() * dsp::BIN_HZ)
            .collect();
        for i in 0..n {
            // Linear interpolation of amplitude between frame centers keeps
            // the spectral splatter from amplitude steps small.
            let pos = (i as f64 - FRAME_LEN as f64 / 2.0) / FRAME_LEN as f64;
            let a = if pos <= 0.0 {
                amps[0]
            } else {
                let lo = pos.floor() as usize;
                if lo + 1 >= frames {
                    amps[frames - 1]
                } else {
                    let frac = pos - lo as f64;
                    amps[lo] * (1.0 - frac) + amps[lo + 1] * frac
                }
            };
            if a == 0.0 {
                continue;
            }
            let t = i as f64 * dt;
            let mut v = 0.0;
            for (j, f) in freqs.iter().enumerate() {
                let phase = (class.id * 7 + j * 3) as f64;
                v += (std::f64::consts::TAU * f * t + phase).sin();
            }
            out[i] += a * v;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.95 { 0.95 / peak } else { 1.0 };
    Ok(out.iter().map(|v| (v * gain) as f32).collect())
}

/// Align a timestamp matrix (C x T) to `frames` latent rows, producing a
/// frames x C float matrix. Max-pooling preserves any-activity semantics
/// when downsampling; nearest-neighbor repeat upsamples.
pub fn align_to_frames(matrix: &TimestampMatrix, frames: usize) -> Array2<f64> {
    let classes = matrix.classes();
    let t_in = matrix.frames();
    let mut out = Array2::<f64>::zeros((frames, classes));
    if t_in == 0 || frames == 0 {
        return out;
    }
    for t_out in 0..frames {
        let lo = t_out * t_in / frames;
        let hi = (((t_out + 1) * t_in).div_ceil(frames)).min(t_in).max(lo + 1);
        for c in 0..classes {
            let any = (lo..hi).any(|t| matrix.data[(c, t)] != 0);
            out[(t_out, c)] = if any { 1.0 } else { 0.0 };
        }
    }
    out
}
