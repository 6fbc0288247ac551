//! Timestamp and frequency caption grammar, and conversions between
//! captions, schedules, and the binary timestamp matrix.
//!
//! Canonical forms:
//!   timestamp caption:  `event at a-b, c-d and other at e-f`
//!   frequency caption:  `event 3 times and other 1 times`

use indexmap::IndexMap;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rngutil;
use crate::Result;

/// Default matrix resolution: 40 ms per column.
pub const DEFAULT_RESOLUTION: f64 = 0.04;
/// Minimum silence between two occurrences of the same event so that
/// detection counts them separately (burst rule plus frame slack).
pub const MIN_EVENT_GAP: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub onset: f64,
    pub offset: f64,
}

impl Interval {
    pub fn new(onset: f64, offset: f64) -> Self {
        Self { onset, offset }
    }
    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }
}

/// Ground-truth or parsed mapping event -> sorted occurrence intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSchedule {
    pub clip_length: f64,
    pub entries: IndexMap<String, Vec<Interval>>,
}

impl EventSchedule {
    pub fn empty(clip_length: f64) -> Self {
        Self {
            clip_length,
            entries: IndexMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Validate ordering, bounds, and per-event non-overlap.
    pub fn validate(&self) -> Result<()> {
        for (event, intervals) in &self.entries {
            let mut prev_end = f64::NEG_INFINITY;
            for iv in intervals {
                if !(iv.onset >= 0.0 && iv.onset < iv.offset && iv.offset <= self.clip_length) {
                    return Err(Error::InvalidInterval {
                        onset: iv.onset,
                        offset: iv.offset,
                        msg: format!(
                            "event {event:?}: need 0 <= onset < offset <= {}",
                            self.clip_length
                        ),
                    });
                }
                if iv.onset < prev_end {
                    return Err(Error::OverlappingIntervals(event.clone()));
                }
                prev_end = iv.offset;
            }
        }
        Ok(())
    }

    /// Occurrence counts per event, in schedule order.
    pub fn counts(&self) -> IndexMap<String, u32> {
        self.entries
            .iter()
            .map(|(name, ivs)| (name.clone(), ivs.len() as u32))
            .collect()
    }
}

/// Binary C x T activity matrix on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampMatrix {
    /// C x T entries in {0, 1}.
    pub data: Array2<u8>,
    /// Seconds per column.
    pub resolution: f64,
    pub class_names: Vec<String>,
}

impl TimestampMatrix {
    pub fn classes(&self) -> usize {
        self.data.nrows()
    }
    pub fn frames(&self) -> usize {
        self.data.ncols()
    }
    pub fn row_sum(&self, row: usize) -> usize {
        self.data.row(row).iter().map(|v| *v as usize).sum()
    }
}

/// Per-event occurrence counts parsed from a frequency caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySpec {
    pub counts: IndexMap<String, u32>,
}

// --- number formatting -----------------------------------------------------

/// Canonical second rendering: integers bare, otherwise the shortest
/// decimal string that parses back to the same f64.
pub fn format_seconds(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

// --- timestamp caption parsing ---------------------------------------------

/// Parse `event at a-b, c-d and event2 at e-f` into a schedule.
pub fn parse_timestamp_caption(text: &str, clip_length: f64) -> Result<EventSchedule> {
    let mut schedule = EventSchedule::empty(clip_length);
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(schedule);
    }
    for clause in split_with_positions(text, " and ") {
        let (pos, clause_text) = clause;
        let at = clause_text.find(" at ").ok_or(Error::Syntax {
            pos,
            msg: format!("clause {clause_text:?} missing \" at \""),
        })?;
        let name = clause_text[..at].trim();
        if name.is_empty() {
            return Err(Error::Syntax {
                pos,
                msg: "empty event name".into(),
            });
        }
        let mut intervals = Vec::new();
        let list = &clause_text[at + 4..];
        let list_pos = pos + at + 4;
        for (ip, item) in split_with_positions(list, ",") {
            let item_pos = list_pos + ip;
            let item = item.trim();
            let dash = item.find('-').ok_or(Error::Syntax {
                pos: item_pos,
                msg: format!("interval {item:?} missing '-'"),
            })?;
            let onset = parse_number(&item[..dash], item_pos)?;
            let offset = parse_number(&item[dash + 1..], item_pos + dash + 1)?;
            if offset <= onset {
                return Err(Error::InvalidInterval {
                    onset,
                    offset,
                    msg: "offset <= onset".into(),
                });
            }
            if offset > clip_length {
                return Err(Error::InvalidInterval {
                    onset,
                    offset,
                    msg: format!("offset exceeds clip length {clip_length}"),
                });
            }
            intervals.push(Interval::new(onset, offset));
        }
        if schedule.entries.contains_key(name) {
            return Err(Error::Syntax {
                pos,
                msg: format!("event {name:?} appears twice"),
            });
        }
        schedule.entries.insert(name.to_string(), intervals);
    }
    schedule.validate()?;
    Ok(schedule)
}

fn parse_number(s: &str, pos: usize) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>().map_err(|_| Error::Syntax {
        pos,
        msg: format!("expected a number, got {t:?}"),
    })
}

fn split_with_positions<'a>(text: &'a str, sep: &str) -> Vec<(usize, &'a str)> {
    let mut out = Vec::new();
    let mut start = 0usize;
    while let Some(found) = text[start..].find(sep) {
        out.push((start, &text[start..start + found]));
        start += found + sep.len();
    }
    out.push((start, &text[start..]));
    out
}

/// Canonical timestamp caption for a schedule. Empty schedule -> "".
pub fn serialize_timestamp_caption(schedule: &EventSchedule) -> String {
    schedule
        .entries
        .iter()
        .map(|(name, intervals)| {
            let list = intervals
                .iter()
                .map(|iv| format!("{}-{}", format_seconds(iv.onset), format_seconds(iv.offset)))
                .collect::<Vec<_>>()
                .join(", ");
            format!("{name} at {list}")
        })
        .collect::<Vec<_>>()
        .join(" and ")
}

// --- frequency caption parsing ---------------------------------------------

/// Parse `event 3 times and other 1 times` (also accepts `once`/`twice`
/// and the singular `1 time`).
pub fn parse_frequency_caption(text: &str) -> Result<FrequencySpec> {
    let mut counts = IndexMap::new();
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Ok(FrequencySpec { counts });
    }
    for (pos, clause) in split_with_positions(text, " and ") {
        let clause = clause.trim();
        let words: Vec<&str> = clause.split_whitespace().collect();
        if words.is_empty() {
            return Err(Error::Syntax {
                pos,
                msg: "empty clause".into(),
            });
        }
        let (name_words, count) = match *words.last().unwrap() {
            "times" | "time" => {
                if words.len() < 3 {
                    return Err(Error::Syntax {
                        pos,
                        msg: format!("clause {clause:?} too short"),
                    });
                }
                let count_word = words[words.len() - 2];
                let count: u32 = count_word.parse().map_err(|_| Error::Syntax {
                    pos,
                    msg: format!("expected a count, got {count_word:?}"),
                })?;
                (&words[..words.len() - 2], count)
            }
            "once" => (&words[..words.len() - 1], 1),
            "twice" => (&words[..words.len() - 1], 2),
            other => {
                return Err(Error::Syntax {
                    pos,
                    msg: format!("clause must end with \"times\", got {other:?}"),
                })
            }
        };
        if count == 0 {
            return Err(Error::Syntax {
                pos,
                msg: "count 0 is not allowed".into(),
            });
        }
        if name_words.is_empty() {
            return Err(Error::Syntax {
                pos,
                msg: "empty event name".into(),
            });
        }
        let name = name_words.join(" ");
        if counts.contains_key(&name) {
            return Err(Error::Syntax {
                pos,
                msg: format!("event {name:?} appears twice"),
            });
        }
        counts.insert(name, count);
    }
    Ok(FrequencySpec { counts })
}

/// Canonical frequency caption. Empty spec -> "".
pub fn serialize_frequency_caption(spec: &FrequencySpec) -> String {
    spec.counts
        .iter()
        .map(|(name, count)| format!("{name} {count} times"))
        .collect::<Vec<_>>()
        .join(" and ")
}

// --- matrix conversions ----------------------------------------------------

/// Round-half-up grid column for time `x` at `resolution`.
fn grid_col(x: f64, resolution: f64) -> usize {
    ((x / resolution) + 0.5).floor().max(0.0) as usize
}

/// Number of grid columns covering `clip_length` (tolerant ceil).
pub fn grid_frames(clip_length: f64, resolution: f64) -> usize {
    ((clip_length / resolution) - 1e-9).ceil().max(0.0) as usize
}

/// Rasterize a schedule onto the grid: columns [round(on/res), round(off/res))
/// of the event's row are set.
pub fn schedule_to_matrix(
    schedule: &EventSchedule,
    class_names: &[String],
    resolution: f64,
) -> Result<TimestampMatrix> {
    let frames = grid_frames(schedule.clip_length, resolution);
    let mut data = Array2::<u8>::zeros((class_names.len(), frames));
    for (event, intervals) in &schedule.entries {
        let row = class_names
            .iter()
            .position(|n| n == event)
            .ok_or_else(|| Error::UnknownEvent(event.clone()))?;
        for iv in intervals {
            let a = grid_col(iv.onset, resolution).min(frames);
            let b = grid_col(iv.offset, resolution).min(frames);
            for t in a..b {
                data[(row, t)] = 1;
            }
        }
    }
    Ok(TimestampMatrix {
        data,
        resolution,
        class_names: class_names.to_vec(),
    })
}

/// Inverse on the grid: each maximal 1-run [a, b) becomes (a*res, b*res).
pub fn matrix_to_schedule(matrix: &TimestampMatrix) -> EventSchedule {
    let res = matrix.resolution;
    let clip_length = matrix.frames() as f64 * res;
    let mut entries = IndexMap::new();
    for (row, name) in matrix.class_names.iter().enumerate() {
        let mut intervals = Vec::new();
        let mut start: Option<usize> = None;
        for t in 0..=matrix.frames() {
            let on = t < matrix.frames() && matrix.data[(row, t)] != 0;
            match (start, on) {
                (None, true) => start = Some(t),
                (Some(s), false) => {
                    intervals.push(Interval::new(s as f64 * res, t as f64 * res));
                    start = None;
                }
                _ => {}
            }
        }
        if !intervals.is_empty() {
            entries.insert(name.clone(), intervals);
        }
    }
    EventSchedule {
        clip_length,
        entries,
    }
}

// --- frequency -> timestamp placement --------------------------------------

/// Deterministically place `k` occurrences of each event across the clip:
/// evenly spaced slots with seeded jitter, durations taken from the bank's
/// per-class median, per-event gaps kept above the burst constant.
pub fn freq_to_schedule(
    spec: &FrequencySpec,
    bank_stats: &IndexMap<String, f64>,
    clip_length: f64,
    seed: u64,
) -> Result<EventSchedule> {
    let margin = 0.5;
    // Placement keeps a little slack above the contract gap so 10 ms grid
    // quantization cannot push a gap under it.
    let gap = MIN_EVENT_GAP + 0.05;
    let mut schedule = EventSchedule::empty(clip_length);
    for (idx, (event, &k)) in spec.counts.iter().enumerate() {
        let d = *bank_stats
            .get(event)
            .ok_or_else(|| Error::UnknownEvent(event.clone()))?;
        let k = k as f64;
        if k * d > 0.8 * clip_length {
            return Err(Error::InfeasiblePacking(format!(
                "{event}: {k} x {d:.2} s > 0.8 x {clip_length} s"
            )));
        }
        let usable = clip_length - 2.0 * margin;
        if k * d + (k - 1.0) * gap > usable {
            return Err(Error::InfeasiblePacking(format!(
                "{event}: {k} occurrences of {d:.2} s with {gap} s gaps exceed {usable:.2} s"
            )));
        }
        let mut rng = rngutil::rng_for(seed, idx as u64);
        let n = k as usize;
        let mut intervals = Vec::new();
        if n == 1 {
            let lo = margin;
            let hi = clip_length - margin - d;
            let center = 0.5 * (lo + hi);
            let amp = 0.2 * (hi - lo) / 2.0;
            let onset = quantize10ms(center + rng.gen_range(-1.0..1.0) * amp);
            intervals.push(Interval::new(onset, quantize10ms(onset + d)));
        } else {
            let spacing = (usable - d) / (k - 1.0);
            // Bounded by the edge margin so the first and last occurrences
            // stay inside the clip.
            let jitter_amp = (0.2 * spacing)
                .min((spacing - d - gap) / 2.0)
                .min(margin - 0.05)
                .max(0.0);
            for i in 0..n {
                let base = margin + i as f64 * spacing;
                let onset = quantize10ms(base + rng.gen_range(-1.0..1.0) * jitter_amp);
                intervals.push(Interval::new(onset, quantize10ms(onset + d)));
            }
        }
        schedule.entries.insert(event.clone(), intervals);
    }
    schedule.validate()?;
    Ok(schedule)
}

/// Snap to the 10 ms grid used by all caption producers, so serialized
/// captions stay short.
pub fn quantize10ms(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_single_event() {
        let s = parse_timestamp_caption("dog barking at 2-3", 10.0).unwrap();
        assert_eq!(s.entries.len(), 1);
        assert_eq!(s.entries["dog barking"], vec![Interval::new(2.0, 3.0)]);
    }

    #[test]
    fn parse_two_events() {
        let s =
            parse_timestamp_caption("door knocking at 1-4 and door slamming at 6-8", 10.0).unwrap();
        assert_eq!(s.entries.len(), 2);
        assert_eq!(s.entries["door knocking"], vec![Interval::new(1.0, 4.0)]);
        assert_eq!(s.entries["door slamming"], vec![Interval::new(6.0, 8.0)]);
    }

    #[test]
    fn parse_rejects_reversed_interval() {
        let err = parse_timestamp_caption("dog barking at 3-2", 10.0).unwrap_err();
        assert!(matches!(err, Error::InvalidInterval { .. }), "{err}");
    }

    #[test]
    fn parse_rejects_overlap_and_overrun() {
        assert!(matches!(
            parse_timestamp_caption("dog barking at 1-3, 2-4", 10.0),
            Err(Error::OverlappingIntervals(_))
        ));
        assert!(matches!(
            parse_timestamp_caption("dog barking at 8-11", 10.0),
            Err(Error::InvalidInterval { .. })
        ));
    }

    #[test]
    fn parse_reports_position() {
        match parse_timestamp_caption("dog barking at 1-2 and gunshot near 5", 10.0) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 23),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn serialize_multi_interval() {
        let mut s = EventSchedule::empty(10.0);
        s.entries.insert(
            "dog barking".into(),
            vec![
                Interval::new(1.0, 2.0),
                Interval::new(3.0, 4.0),
                Interval::new(7.0, 9.0),
            ],
        );
        assert_eq!(
            serialize_timestamp_caption(&s),
            "dog barking at 1-2, 3-4, 7-9"
        );
        assert_eq!(serialize_timestamp_caption(&EventSchedule::empty(10.0)), "");
    }

    #[test]
    fn decimals_round_trip() {
        let s = parse_timestamp_caption("gunshot at 1.25-2.75, 4.1-4.9", 10.0).unwrap();
        assert_eq!(
            serialize_timestamp_caption(&s),
            "gunshot at 1.25-2.75, 4.1-4.9"
        );
    }

    #[test]
    fn frequency_parse_and_serialize() {
        let spec = parse_frequency_caption("dog barking 3 times").unwrap();
        assert_eq!(spec.counts["dog barking"], 3);
        let spec = parse_frequency_caption("dog barking 2 times and gunshot 1 times").unwrap();
        assert_eq!(spec.counts["dog barking"], 2);
        assert_eq!(spec.counts["gunshot"], 1);
        assert_eq!(
            serialize_frequency_caption(&spec),
            "dog barking 2 times and gunshot 1 times"
        );
        let spec = parse_frequency_caption("cow mooing once and car horn twice").unwrap();
        assert_eq!(spec.counts["cow mooing"], 1);
        assert_eq!(spec.counts["car horn"], 2);
    }

    #[test]
    fn frequency_zero_count_rejected() {
        assert!(parse_frequency_caption("dog barking 0 times").is_err());
        assert!(parse_frequency_caption("dog barking many times").is_err());
    }

    #[test]
    fn matrix_columns_for_canonical_example() {
        // 2-3 s at 40 ms -> columns 50..74 inclusive, 25 ones.
        let s = parse_timestamp_caption("dog barking at 2-3", 10.0).unwrap();
        let m = schedule_to_matrix(&s, &names(&["dog barking"]), DEFAULT_RESOLUTION).unwrap();
        assert_eq!(m.frames(), 250);
        assert_eq!(m.row_sum(0), 25);
        for t in 0..250 {
            assert_eq!(m.data[(0, t)] == 1, (50..75).contains(&t), "col {t}");
        }
    }

    #[test]
    fn empty_schedule_matrix_is_zero() {
        let m = schedule_to_matrix(
            &EventSchedule::empty(10.0),
            &names(&["a", "b"]),
            DEFAULT_RESOLUTION,
        )
        .unwrap();
        assert_eq!(m.frames(), 250);
        assert_eq!(m.data.iter().map(|v| *v as usize).sum::<usize>(), 0);
        assert!(matrix_to_schedule(&m).is_empty());
    }

    #[test]
    fn overlapping_events_set_both_rows() {
        let s = parse_timestamp_caption("a at 2-4 and b at 3-5", 10.0).unwrap();
        let m = schedule_to_matrix(&s, &names(&["a", "b"]), DEFAULT_RESOLUTION).unwrap();
        for t in 75..100 {
            assert_eq!(m.data[(0, t)], 1);
            assert_eq!(m.data[(1, t)], 1);
        }
    }

    #[test]
    fn unknown_event_is_error() {
        let s = parse_timestamp_caption("dog barking at 2-3", 10.0).unwrap();
        assert!(matches!(
            schedule_to_matrix(&s, &names(&["cat meowing"]), DEFAULT_RESOLUTION),
            Err(Error::UnknownEvent(_))
        ));
    }

    #[test]
    fn matrix_run_to_interval() {
        let mut data = Array2::<u8>::zeros((1, 250));
        for t in 50..75 {
            data[(0, t)] = 1;
        }
        let m = TimestampMatrix {
            data,
            resolution: DEFAULT_RESOLUTION,
            class_names: names(&["dog barking"]),
        };
        let s = matrix_to_schedule(&m);
        let iv = s.entries["dog barking"][0];
        assert!((iv.onset - 2.0).abs() < 1e-9);
        assert!((iv.offset - 3.0).abs() < 1e-9);
    }

    #[test]
    fn row_sums_match_scheduled_frames() {
        let s = parse_timestamp_caption("a at 0.5-1.3, 2-2.2 and b at 4-9.96", 10.0).unwrap();
        let m = schedule_to_matrix(&s, &names(&["a", "b"]), DEFAULT_RESOLUTION).unwrap();
        // Independent count from the schedule itself.
        for (row, (_, ivs)) in s.entries.iter().enumerate() {
            let expect: usize = ivs
                .iter()
                .map(|iv| {
                    let a = ((iv.onset / 0.04) + 0.5).floor() as usize;
                    let b = ((iv.offset / 0.04) + 0.5).floor() as usize;
                    b - a
                })
                .sum();
            assert_eq!(m.row_sum(row), expect);
        }
    }

    #[test]
    fn halving_resolution_doubles_runs() {
        let s = parse_timestamp_caption("a at 1-2.48, 5-6", 10.0).unwrap();
        let coarse = schedule_to_matrix(&s, &names(&["a"]), 0.04).unwrap();
        let fine = schedule_to_matrix(&s, &names(&["a"]), 0.02).unwrap();
        let runs = |m: &TimestampMatrix| {
            let sched = matrix_to_schedule(m);
            sched.entries["a"]
                .iter()
                .map(|iv| ((iv.offset - iv.onset) / m.resolution).round() as i64)
                .collect::<Vec<_>>()
        };
        for (c, f) in runs(&coarse).iter().zip(runs(&fine)) {
            assert!((2 * c - f).abs() <= 1, "coarse {c} fine {f}");
        }
    }

    #[test]
    fn freq_to_schedule_structural() {
        let mut stats = IndexMap::new();
        stats.insert("dog barking".to_string(), 1.0);
        let spec = FrequencySpec {
            counts: IndexMap::from_iter([("dog barking".to_string(), 3u32)]),
        };
        let s = freq_to_schedule(&spec, &stats, 10.0, 0).unwrap();
        let ivs = &s.entries["dog barking"];
        assert_eq!(ivs.len(), 3);
        for w in ivs.windows(2) {
            assert!(w[1].onset - w[0].offset >= MIN_EVENT_GAP, "{ivs:?}");
        }
        for iv in ivs {
            assert!((iv.duration() - 1.0).abs() <= 0.011);
        }
        // Deterministic.
        let s2 = freq_to_schedule(&spec, &stats, 10.0, 0).unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn freq_to_schedule_single_and_infeasible() {
        let mut stats = IndexMap::new();
        stats.insert("x".to_string(), 1.0);
        let one = FrequencySpec {
            counts: IndexMap::from_iter([("x".to_string(), 1u32)]),
        };
        let s = freq_to_schedule(&one, &stats, 10.0, 5).unwrap();
        assert_eq!(s.entries["x"].len(), 1);
        assert!((s.entries["x"][0].duration() - 1.0).abs() <= 0.011);

        let many = FrequencySpec {
            counts: IndexMap::from_iter([("x".to_string(), 12u32)]),
        };
        assert!(matches!(
            freq_to_schedule(&many, &stats, 10.0, 5),
            Err(Error::InfeasiblePacking(_))
        ));
        let absent = FrequencySpec {
            counts: IndexMap::from_iter([("y".to_string(), 1u32)]),
        };
        assert!(matches!(
            freq_to_schedule(&absent, &stats, 10.0, 5),
            Err(Error::UnknownEvent(_))
        ));
    }

    // --- property tests ----------------------------------------------------

    fn arb_schedule() -> impl Strategy<Value = EventSchedule> {
        // Times on the 10 ms grid inside a 10 s clip, 1..=3 events with
        // 1..=3 non-overlapping intervals each.
        let event_names = prop::sample::subsequence(
            vec!["dog barking", "gunshot", "car horn", "bird chirping"],
            1..=3,
        );
        (event_names, any::<u64>()).prop_map(|(names, seed)| {
            let mut rng = rngutil::rng_for(seed, 0);
            let mut schedule = EventSchedule::empty(10.0);
            for name in names {
                let n = rand::Rng::gen_range(&mut rng, 1..=3usize);
                let mut cursor = 0.0f64;
                let mut intervals = Vec::new();
                for _ in 0..n {
                    let onset = quantize10ms(cursor + rand::Rng::gen_range(&mut rng, 0.0..1.5));
                    let offset = quantize10ms(onset + rand::Rng::gen_range(&mut rng, 0.2..1.5));
                    if offset > 10.0 {
                        break;
                    }
                    cursor = offset + 0.05;
                    intervals.push(Interval::new(onset, offset));
                }
                if !intervals.is_empty() {
                    schedule.entries.insert(name.to_string(), intervals);
                }
            }
            schedule
        })
    }

    proptest! {
        #[test]
        fn parse_serialize_round_trip(schedule in arb_schedule()) {
            let text = serialize_timestamp_caption(&schedule);
            let back = parse_timestamp_caption(&text, schedule.clip_length).unwrap();
            prop_assert_eq!(back, schedule);
        }

        #[test]
        fn serialize_parse_is_idempotent(schedule in arb_schedule()) {
            let text = serialize_timestamp_caption(&schedule);
            let again =
                serialize_timestamp_caption(&parse_timestamp_caption(&text, 10.0).unwrap());
            prop_assert_eq!(text, again);
        }

        #[test]
        fn matrix_schedule_round_trip(schedule in arb_schedule()) {
            let class_names = names(&["dog barking", "gunshot", "car horn", "bird chirping"]);
            let m = schedule_to_matrix(&schedule, &class_names, DEFAULT_RESOLUTION).unwrap();
            let back = schedule_to_matrix(
                &matrix_to_schedule(&m), &class_names, DEFAULT_RESOLUTION).unwrap();
            prop_assert_eq!(back.data, m.data);
        }

        #[test]
        fn freq_counts_exact(seed in any::<u64>(), k in 1u32..6) {
            let mut stats = IndexMap::new();
            stats.insert("dog barking".to_string(), 1.0);
            stats.insert("gunshot".to_string(), 0.5);
            let spec = FrequencySpec { counts: IndexMap::from_iter([
                ("dog barking".to_string(), k),
                ("gunshot".to_string(), (k % 3) + 1),
            ]) };
            let s = freq_to_schedule(&spec, &stats, 10.0, seed).unwrap();
            prop_assert_eq!(s.counts(), spec.counts);
        }
    }
}
