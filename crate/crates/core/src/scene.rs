//! Scene simulation: sample events and onsets from the bank, mix audio,
//! and emit (audio, timestamp caption, frequency caption) pairs with
//! JSONL manifests.

use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::audio;
use crate::bank::Bank;
use crate::caption::{self, EventSchedule, Interval};
use crate::dsp::SAMPLE_RATE;
use crate::error::Error;
use crate::rngutil;
use crate::Result;

pub const MANIFEST_VERSION: u32 = 1;
/// Minimum silence between occurrences of the same event; above the
/// detector's burst-merge gap with slack for frame quantization.
const PLACEMENT_GAP: f64 = 0.5;
const EDGE_MARGIN: f64 = 0.25;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub clip_length: f64,
    pub sample_rate: u32,
    /// Events per clip for the multi-event splits (train, test_multi).
    pub events_min: usize,
    pub events_max: usize,
    /// Relative weights for 1/2/3 occurrences per event.
    pub occurrence_weights: [f64; 3],
    /// (train, test_single, test_multi) clip counts.
    pub split_sizes: (usize, usize, usize),
    pub master_seed: u64,
    /// Allow different events to overlap in time (same-event overlap is
    /// always forbidden).
    pub allow_cross_event_overlap: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            clip_length: 10.0,
            sample_rate: SAMPLE_RATE,
            events_min: 2,
            events_max: 3,
            occurrence_weights: [2.0, 2.0, 1.0],
            split_sizes: (500, 40, 20),
            master_seed: 0,
            allow_cross_event_overlap: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clip_length < 4.0 {
            return Err(Error::InvalidConfig("clip_length must be >= 4 s".into()));
        }
        if self.occurrence_weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::InvalidConfig(
                "occurrence weights must be positive".into(),
            ));
        }
        if self.events_min == 0 || self.events_min > self.events_max {
            return Err(Error::InvalidConfig("bad events_per_clip range".into()));
        }
        if self.sample_rate != SAMPLE_RATE {
            return Err(Error::InvalidConfig(format!(
                "sample_rate must be {SAMPLE_RATE}"
            )));
        }
        Ok(())
    }
}

/// A simulated clip with its ground truth and both caption renderings.
#[derive(Debug, Clone)]
pub struct ScenePair {
    pub audio: Vec<f32>,
    pub schedule: EventSchedule,
    pub timestamp_caption: String,
    pub frequency_caption: String,
    pub seed: u64,
}

/// Render both captions for a schedule.
pub fn annotate(schedule: &EventSchedule) -> (String, String) {
    let timestamp = caption::serialize_timestamp_caption(schedule);
    let spec = crate::caption::FrequencySpec {
        counts: schedule.counts(),
    };
    let frequency = caption::serialize_frequency_caption(&spec);
    (timestamp, frequency)
}

fn draw_occurrences(weights: &[f64; 3], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let x = rng.gen_range(0.0..total);
    if x < weights[0] {
        1
    } else if x < weights[0] + weights[1] {
        2
    } else {
        3
    }
}

/// Simulate one clip. `n_events` overrides the config range (used for the
/// single-event split). Deterministic given `seed`.
pub fn simulate_scene_with(
    bank: &Bank,
    config: &SimConfig,
    seed: u64,
    n_events: Option<usize>,
) -> Result<ScenePair> {
    config.validate()?;
    if bank.segments.is_empty() {
        return Err(Error::EmptyBank);
    }
    let mut rng = rngutil::rng_for(seed, 0xa5ce);
    let n_events = match n_events {
        Some(n) => n,
        None => rng.gen_range(config.events_min..=config.events_max),
    };
    let mut class_ids: Vec<usize> = bank
        .classes
        .iter()
        .map(|c| c.id)
        .filter(|id| !bank.segments_of(*id).is_empty())
        .collect();
    class_ids.shuffle(&mut rng);
    let chosen: Vec<usize> = class_ids.into_iter().take(n_events).collect();

    let clip_samples = (config.clip_length * config.sample_rate as f64).round() as usize;
    let mut mix = vec![0.0f32; clip_samples];
    let mut schedule = EventSchedule::empty(config.clip_length);
    // Track all placed intervals for the optional no-overlap mode.
    let mut all_placed: Vec<Interval> = Vec::new();

    for class_id in chosen {
        let class = &bank.classes[class_id];
        let segments = bank.segments_of(class_id);
        let usable = config.clip_length - 2.0 * EDGE_MARGIN;
        // Draw the occurrence count and a segment per occurrence, then
        // shrink the count until the total with mandatory gaps fits.
        let mut count = draw_occurrences(&config.occurrence_weights, &mut rng);
        let mut seg_idxs: Vec<usize> = (0..count)
            .map(|_| rng.gen_range(0..segments.len()))
            .collect();
        let total = |idxs: &[usize]| -> f64 {
            idxs.iter().map(|i| segments[*i].duration).sum::<f64>()
                + idxs.len().saturating_sub(1) as f64 * PLACEMENT_GAP
        };
        while count > 1 && total(&seg_idxs) > usable {
            count -= 1;
            seg_idxs.truncate(count);
        }
        if total(&seg_idxs) > usable {
            return Err(Error::InfeasiblePacking(format!(
                "segment of {:.2} s does not fit in {} s clip",
                segments[seg_idxs[0]].duration, config.clip_length
            )));
        }
        // Slot placement: distribute the leftover slack over the count + 1
        // inter-occurrence gaps at random. Same-event spacing is exact by
        // construction; cross-event overlap is rejected only in the strict
        // mode.
        let slack = usable - total(&seg_idxs);
        let mut placed: Vec<(Interval, usize)> = Vec::new();
        for _attempt in 0..100 {
            let extras: Vec<f64> = (0..=count).map(|_| rng.gen_range(0.0..1.0)).collect();
            let extra_sum: f64 = extras.iter().sum();
            let mut cursor = EDGE_MARGIN + slack * extras[0] / extra_sum;
            let mut candidate: Vec<(Interval, usize)> = Vec::with_capacity(count);
            for (i, &seg_idx) in seg_idxs.iter().enumerate() {
                let duration = segments[seg_idx].duration;
                let onset = caption::quantize10ms(cursor);
                candidate.push((Interval::new(onset, onset + duration), seg_idx));
                cursor = onset + duration + PLACEMENT_GAP + slack * extras[i + 1] / extra_sum;
            }
            let clash_cross = !config.allow_cross_event_overlap
                && candidate.iter().any(|(c, _)| {
                    all_placed
                        .iter()
                        .any(|iv| c.onset < iv.offset && iv.onset < c.offset)
                });
            if !clash_cross {
                placed = candidate;
                break;
            }
        }
        if placed.is_empty() {
            return Err(Error::InfeasiblePacking(format!(
                "could not place occurrences of {} after 100 attempts (seed {seed})",
                class.name
            )));
        }
        all_placed.extend(placed.iter().map(|(iv, _)| *iv));
        let mut intervals = Vec::new();
        for (iv, seg_idx) in &placed {
            let seg = segments[*seg_idx];
            let start = (iv.onset * config.sample_rate as f64).round() as usize;
            for (i, s) in seg.samples.iter().enumerate() {
                if start + i < mix.len() {
                    mix[start + i] += *s;
                }
            }
            intervals.push(Interval::new(
                iv.onset,
                caption::quantize10ms(iv.onset + seg.duration),
            ));
        }
        schedule.entries.insert(class.name.clone(), intervals);
    }

    let peak = mix.iter().fold(0.0f32, |m, s| m.max(s.abs()));
    if peak > 0.95 {
        let g = 0.95 / peak;
        for s in &mut mix {
            *s *= g;
        }
    }
    schedule.validate()?;
    let (timestamp_caption, frequency_caption) = annotate(&schedule);
    Ok(ScenePair {
        audio: mix,
        schedule,
        timestamp_caption,
        frequency_caption,
        seed,
    })
}

pub fn simulate_scene(bank: &Bank, config: &SimConfig, seed: u64) -> Result<ScenePair> {
    simulate_scene_with(bank, config, seed, None)
}

// --- manifests -------------------------------------------------------------

/// One line of a dataset manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub manifest_version: u32,
    pub clip_id: String,
    pub wav: String,
    pub timestamp_caption: String,
    pub frequency_caption: String,
    pub clip_length: f64,
    /// Event name -> [[onset, offset], ...] in seconds.
    pub schedule: IndexMap<String, Vec<[f64; 2]>>,
    pub seed: u64,
}

impl ManifestRecord {
    pub fn to_schedule(&self) -> EventSchedule {
        let entries = self
            .schedule
            .iter()
            .map(|(name, ivs)| {
                (
                    name.clone(),
                    ivs.iter().map(|iv| Interval::new(iv[0], iv[1])).collect(),
                )
            })
            .collect();
        EventSchedule {
            clip_length: self.clip_length,
            entries,
        }
    }
}

/// Per-split simulation summary (written next to the manifest).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSummary {
    pub split: String,
    pub requested: usize,
    pub written: usize,
    pub skipped_seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub manifest_version: u32,
    pub master_seed: u64,
    pub splits: Vec<SplitSummary>,
}

fn record_for(pair: &ScenePair, clip_id: &str, wav: &str) -> ManifestRecord {
    let schedule = pair
        .schedule
        .entries
        .iter()
        .map(|(name, ivs)| {
            (
                name.clone(),
                ivs.iter().map(|iv| [iv.onset, iv.offset]).collect(),
            )
        })
        .collect();
    ManifestRecord {
        manifest_version: MANIFEST_VERSION,
        clip_id: clip_id.to_string(),
        wav: wav.to_string(),
        timestamp_caption: pair.timestamp_caption.clone(),
        frequency_caption: pair.frequency_caption.clone(),
        clip_length: pair.schedule.clip_length,
        schedule,
        seed: pair.seed,
    }
}

/// Simulate all three splits to `out_dir`: `<split>.jsonl` manifests plus
/// `wav/<split>/<clip_id>.wav`, and a `summary.json`. Byte-reproducible
/// for a fixed master seed.
pub fn simulate_dataset(bank: &Bank, config: &SimConfig, out_dir: &Path) -> Result<DatasetSummary> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let splits: [(&str, usize, Option<usize>, u64); 3] = [
        ("train", config.split_sizes.0, None, 0x1000_0000),
        ("test_single", config.split_sizes.1, Some(1), 0x2000_0000),
        ("test_multi", config.split_sizes.2, None, 0x3000_0000),
    ];
    let mut summaries = Vec::new();
    for (split, size, n_events, stream_base) in splits {
        let wav_dir = out_dir.join("wav").join(split);
        std::fs::create_dir_all(&wav_dir)
            .map_err(|e| Error::io(wav_dir.display().to_string(), e))?;
        let manifest_path = out_dir.join(format!("{split}.jsonl"));
        let mut lines = Vec::new();
        let mut skipped = Vec::new();
        let mut written = 0usize;
        let mut index = 0u64;
        while written < size {
            let seed = rngutil::derive_seed(config.master_seed, stream_base + index);
            index += 1;
            if index > size as u64 * 10 {
                return Err(Error::InfeasiblePacking(format!(
                    "split {split}: too many infeasible scenes"
                )));
            }
            match simulate_scene_with(bank, config, seed, n_events) {
                Ok(pair) => {
                    let clip_id = format!("{split}_{written:05}");
                    let wav_rel = format!("wav/{split}/{clip_id}.wav");
                    audio::write_wav(&out_dir.join(&wav_rel), &pair.audio)?;
                    let record = record_for(&pair, &clip_id, &wav_rel);
                    lines.push(serde_json::to_string(&record)?);
                    written += 1;
                }
                Err(Error::InfeasiblePacking(_)) => skipped.push(seed),
                Err(e) => return Err(e),
            }
        }
        let mut body = lines.join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        std::fs::write(&manifest_path, body.as_bytes())
            .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;
        summaries.push(SplitSummary {
            split: split.to_string(),
            requested: size,
            written,
            skipped_seeds: skipped,
        });
    }
    let summary = DatasetSummary {
        manifest_version: MANIFEST_VERSION,
        master_seed: config.master_seed,
        splits: summaries,
    };
    let path = out_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(summary)
}

/// Read a JSONL manifest.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
