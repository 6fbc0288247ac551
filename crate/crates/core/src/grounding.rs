//! Band-energy event detector: locates per-class on/offsets in a clip.
//!
//! Per class the detector computes in-band energy on the 40 ms frame grid,
//! binarizes against a relative threshold, median-smooths the activity,
//! merges sub-burst gaps, and drops regions below a minimum length. All
//! thresholds are relative to the clip's own statistics, so detection is
//! invariant under global gain changes.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bank::EventClass;
use crate::dsp::{self, FRAME_SECONDS};
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    /// Frame hop in seconds.
    pub frame: f64,
    /// Activity threshold as a multiple of the clip's median frame energy.
    pub threshold_factor: f64,
    /// Median smoothing window in frames (odd).
    pub median_smooth: usize,
    /// Gaps shorter than this merge into one region (burst rule).
    pub merge_gap: f64,
    /// Regions shorter than this are dropped.
    pub min_region: f64,
    /// Peak-relative energy floor; guards the threshold when the median
    /// frame energy is near zero (event in otherwise silent band).
    pub rel_floor: f64,
    /// Peak-relative cap on the median threshold; keeps a clip that is
    /// mostly event from thresholding itself away.
    pub rel_cap: f64,
    /// Minimum mean in-band/total score for a region to survive; rejects
    /// pure spectral leakage from other bands.
    pub min_score: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            frame: FRAME_SECONDS,
            threshold_factor: 4.0,
            median_smooth: 3,
            merge_gap: 0.3,
            min_region: 0.08,
            rel_floor: 0.02,
            rel_cap: 0.15,
            min_score: 0.05,
        }
    }
}

/// One detected region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub onset: f64,
    pub offset: f64,
    pub confidence: f64,
}

/// Per-event detections over one clip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Event name -> sorted, non-overlapping regions.
    pub events: IndexMap<String, Vec<Detection>>,
    pub frame_resolution: f64,
    pub clip_length: f64,
}

impl DetectionResult {
    pub fn count_for(&self, event: &str) -> usize {
        self.events.get(event).map_or(0, |v| v.len())
    }

    pub fn total_detections(&self) -> usize {
        self.events.values().map(|v| v.len()).sum()
    }
}

/// Per-frame in-band/total energy ratio in [0, 1] for one class.
///
/// Silence scores 0 (0/0 defined as 0); a full-scale in-band tone scores
/// near 1. The score is monotone in in-band energy for fixed total energy.
pub fn frame_scores(audio: &[f32], class: &EventClass) -> Result<Vec<f64>> {
    let spec = dsp::power_spectrogram(audio)?;
    let in_band = spec.band_energies(class.band_lo(), class.band_hi());
    let total = spec.total_energies();
    Ok(in_band
        .iter()
        .zip(&total)
        .map(|(b, t)| if *t <= 0.0 { 0.0 } else { (b / t).clamp(0.0, 1.0) })
        .collect())
}

/// Detect on/offsets for every class.
pub fn detect_events(
    audio: &[f32],
    classes: &[EventClass],
    params: &DetectorParams,
) -> Result<DetectionResult> {
    crate::bank::check_disjoint_bands(classes)?;
    let spec = dsp::power_spectrogram(audio)?;
    let total = spec.total_energies();
    let clip_length = audio.len() as f64 / dsp::SAMPLE_RATE as f64;

    let mut events = IndexMap::new();
    for class in classes {
        let energies = spec.band_energies(class.band_lo(), class.band_hi());
        let max_e = energies.iter().cloned().fold(0.0f64, f64::max);
        let mut detections = Vec::new();
        if max_e > 0.0 {
            let med = median(&energies);
            let threshold = (params.threshold_factor * med)
                .min(params.rel_cap * max_e)
                .max(params.rel_floor * max_e);
            let raw: Vec<bool> = energies.iter().map(|e| *e > threshold).collect();
            let active = median_smooth(&raw, params.median_smooth);
            let regions =
                regions_from_activity(&active, params.frame, params.merge_gap, params.min_region);
            for (onset, offset) in regions {
                let a = (onset / params.frame).round() as usize;
                let b = ((offset / params.frame).round() as usize).min(energies.len());
                let mut score_sum = 0.0;
                for t in a..b {
                    let tot = total[t];
                    score_sum += if tot <= 0.0 { 0.0 } else { (energies[t] / tot).min(1.0) };
                }
                let confidence = if b > a { score_sum / (b - a) as f64 } else { 0.0 };
                if confidence >= params.min_score {
                    detections.push(Detection {
                        onset,
                        offset: offset.min(clip_length),
                        confidence,
                    });
                }
            }
        }
        events.insert(class.name.clone(), detections);
    }
    Ok(DetectionResult {
        events,
        frame_resolution: params.frame,
        clip_length,
    })
}

/// Turn a frame activity mask into merged (onset, offset) regions in
/// seconds: gaps shorter than `merge_gap` are bridged, regions shorter
/// than `min_region` dropped.
pub fn regions_from_activity(
    active: &[bool],
    frame: f64,
    merge_gap: f64,
    min_region: f64,
) -> Vec<(f64, f64)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (t, a) in active.iter().enumerate() {
        match (start, a) {
            (None, true) => start = Some(t),
            (Some(s), false) => {
                runs.push((s, t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, active.len()));
    }
    // Merge gaps below the burst constant.
    let gap_frames = (merge_gap / frame).round() as usize;
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match merged.last_mut() {
            Some(last) if run.0 - last.1 < gap_frames => last.1 = run.1,
            _ => merged.push(run),
        }
    }
    let min_frames = (min_region / frame).round() as usize;
    merged
        .into_iter()
        .filter(|(a, b)| b - a >= min_frames.max(1))
        .map(|(a, b)| (a as f64 * frame, b as f64 * frame))
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn median_smooth(active: &[bool], window: usize) -> Vec<bool> {
    if window <= 1 {
        return active.to_vec();
    }
    let half = window / 2;
    (0..active.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(active.len());
            let ones = active[lo..hi].iter().filter(|a| **a).count();
            2 * ones > hi - lo
        })
        .collect()
}
