//! Objective metrics: segment-based F1, frequency L1 error, and a Fréchet
//! score between Gaussian statistics of hand-computed spectral features.

use std::path::Path;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::audio;
use crate::bank::EventClass;
use crate::caption::{self, EventSchedule};
use crate::dsp;
use crate::error::Error;
use crate::grounding::{self, DetectionResult, DetectorParams};
use crate::scene::ManifestRecord;
use crate::Result;

/// Default segment length for segment-based F1, in seconds.
pub const DEFAULT_SEGMENT_LENGTH: f64 = 1.0;
/// Feature window length in seconds.
pub const FEATURE_WINDOW: f64 = 1.0;
/// Feature dimension: 18 class band log-energies + centroid + flatness.
pub const FEATURE_DIM: usize = 20;

// --- segment F1 ------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub segment_length: f64,
}

impl SegmentScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, segment_length: f64) -> Self {
        let precision = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            segment_length,
        }
    }
}

/// Raw TP/FP/FN counts; accumulate across clips and finish with
/// [`SegmentScore::from_counts`] for micro-averaged scores.
#[derive(Debug, Clone, Copy, Default)]
pub struct SegmentCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl SegmentCounts {
    pub fn merge(&mut self, other: SegmentCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn score(&self, segment_length: f64) -> SegmentScore {
        SegmentScore::from_counts(self.tp, self.fp, self.fn_, segment_length)
    }
}

fn any_overlap(intervals: &[(f64, f64)], lo: f64, hi: f64) -> bool {
    intervals.iter().any(|(a, b)| *a < hi && lo < *b)
}

/// Per-segment, per-class activity counts for one clip. The time axis is
/// tiled into fixed `segment_length` segments; a class is active in a
/// segment when any of its intervals overlaps it.
pub fn segment_counts(
    reference: &EventSchedule,
    hypothesis: &DetectionResult,
    segment_length: f64,
) -> Result<SegmentCounts> {
    if (reference.clip_length - hypothesis.clip_length).abs() > 0.5 {
        return Err(Error::ClipLengthMismatch(
            reference.clip_length,
            hypothesis.clip_length,
        ));
    }
    let mut class_names: Vec<String> = hypothesis.events.keys().cloned().collect();
    for name in reference.entries.keys() {
        if !class_names.contains(name) {
            class_names.push(name.clone());
        }
    }
    let segments = ((reference.clip_length / segment_length) - 1e-9).ceil() as usize;
    let mut counts = SegmentCounts::default();
    for name in &class_names {
        let ref_ivs: Vec<(f64, f64)> = reference
            .entries
            .get(name)
            .map(|v| v.iter().map(|iv| (iv.onset, iv.offset)).collect())
            .unwrap_or_default();
        let hyp_ivs: Vec<(f64, f64)> = hypothesis
            .events
            .get(name)
            .map(|v| v.iter().map(|d| (d.onset, d.offset)).collect())
            .unwrap_or_default();
        for s in 0..segments {
            let lo = s as f64 * segment_length;
            let hi = (lo + segment_length).min(reference.clip_length);
            let r = any_overlap(&ref_ivs, lo, hi);
            let h = any_overlap(&hyp_ivs, lo, hi);
            match (r, h) {
                (true, true) => counts.tp += 1,
                (false, true) => counts.fp += 1,
                (true, false) => counts.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(counts)
}

/// Micro-averaged segment F1 for a single clip.
pub fn segment_f1(
    reference: &EventSchedule,
    hypothesis: &DetectionResult,
    segment_length: f64,
) -> Result<SegmentScore> {
    Ok(segment_counts(reference, hypothesis, segment_length)?.score(segment_length))
}

// --- frequency L1 ----------------------------------------------------------

/// Mean absolute difference between specified and detected occurrence
/// counts, averaged over samples and the fixed class universe of size
/// `class_universe`. Events absent from a spec count as specified 0.
pub fn freq_l1(
    specs: &[caption::FrequencySpec],
    detections: &[DetectionResult],
    class_universe: usize,
) -> Result<f64> {
    if specs.len() != detections.len() {
        return Err(Error::MisalignedLists(specs.len(), detections.len()));
    }
    if specs.is_empty() || class_universe == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0f64;
    for (spec, det) in specs.iter().zip(detections) {
        let mut names: Vec<&String> = det.events.keys().collect();
        for name in spec.counts.keys() {
            if !names.contains(&name) {
                names.push(name);
            }
        }
        for name in names {
            let specified = spec.counts.get(name).copied().unwrap_or(0) as f64;
            let detected = det.count_for(name) as f64;
            total += (specified - detected).abs();
        }
    }
    Ok(total / (specs.len() as f64 * class_universe as f64))
}

// --- features --------------------------------------------------------------

/// Per 1 s window: log10 band energy for each of the 18 class bands, plus
/// normalized spectral centroid and flatness. Feature layout version 1.
pub fn extract_features(audio: &[f32], classes: &[EventClass]) -> Result<Vec<Vec<f64>>> {
    let window_samples = (FEATURE_WINDOW * dsp::SAMPLE_RATE as f64).round() as usize;
    if audio.len() < window_samples {
        return Err(Error::AudioTooShort(audio.len(), window_samples));
    }
    let spec = dsp::power_spectrogram(audio)?;
    let frames_per_window = (window_samples / dsp::FRAME_LEN).max(1);
    let windows = audio.len() / window_samples;
    let floor = 1e-10;
    let mut out = Vec::with_capacity(windows);
    for w in 0..windows {
        let f0 = w * frames_per_window;
        let f1 = f0 + frames_per_window;
        let mut v = Vec::with_capacity(classes.len() + 2);
        for class in classes {
            let e: f64 = (f0..f1)
                .map(|t| spec.band_power(t, class.band_lo(), class.band_hi()))
                .sum();
            v.push((e + floor).log10());
        }
        let centroid: f64 =
            (f0..f1).map(|t| spec.spectral_centroid(t)).sum::<f64>() / frames_per_window as f64;
        v.push(centroid / (dsp::SAMPLE_RATE as f64 / 2.0));
        let flatness: f64 =
            (f0..f1).map(|t| spec.spectral_flatness(t)).sum::<f64>() / frames_per_window as f64;
        v.push(flatness);
        out.push(v);
    }
    Ok(out)
}

// --- Gaussian statistics and Fréchet distance ------------------------------

/// Mergeable accumulator for (count, sum, outer-product sum).
#[derive(Debug, Clone)]
pub struct FeatureAccumulator {
    pub count: usize,
    pub sum: DVector<f64>,
    pub outer: DMatrix<f64>,
}

impl FeatureAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, v: &[f64]) {
        let x = DVector::from_column_slice(v);
        self.sum += &x;
        self.outer += &x * x.transpose();
        self.count += 1;
    }

    /// Associative merge; order does not change results beyond roundoff.
    pub fn merge(&mut self, other: &FeatureAccumulator) {
        self.count += other.count;
        self.sum += &other.sum;
        self.outer += &other.outer;
    }

    pub fn finalize(&self) -> Result<GaussianStats> {
        if self.count == 0 {
            return Err(Error::InsufficientSamples {
                count: 0,
                dim: self.sum.len(),
            });
        }
        let n = self.count as f64;
        let mean = &self.sum / n;
        let mut cov = &self.outer / n - &mean * mean.transpose();
        // Exact symmetrization.
        cov = (&cov + cov.transpose()) * 0.5;
        Ok(GaussianStats {
            mean,
            cov,
            count: self.count,
        })
    }
}

/// Mean and covariance of a feature set.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientSamples { count: 0, dim: 0 });
        }
        let dim = samples[0].len();
        let mut acc = FeatureAccumulator::new(dim);
        for s in samples {
            if s.len() != dim {
                return Err(Error::DimensionMismatch(s.len(), dim));
            }
            acc.push(s);
        }
        acc.finalize()
    }
}

/// Symmetric PSD square root via eigendecomposition; eigenvalues below
/// zero (roundoff) are clipped.
fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let sqrt_vals = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

/// Squared Fréchet distance between two Gaussians:
/// `|mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^{1/2})`, computed through the
/// symmetric form `Sa^{1/2} Sb Sa^{1/2}`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let dim = a.dim();
    for stats in [a, b] {
        if stats.count < dim + 1 {
            return Err(Error::InsufficientSamples {
                count: stats.count,
                dim,
            });
        }
    }
    let diff = &a.mean - &b.mean;
    let mean_term = diff.dot(&diff);
    let a_sqrt = sym_sqrt(&a.cov);
    let inner = &a_sqrt * &b.cov * &a_sqrt;
    let inner_sym = (&inner + inner.transpose()) * 0.5;
    let eig = inner_sym.symmetric_eigen();
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let d2 = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
    if !d2.is_finite() {
        return Err(Error::NonFinite("frechet distance".into()));
    }
    Ok(d2.max(0.0))
}

// --- system evaluation -----------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalParams {
    pub detector: DetectorParams,
    pub segment_length: f64,
    pub class_universe: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            segment_length: DEFAULT_SEGMENT_LENGTH,
            class_universe: 18,
        }
    }
}

/// Per-clip detail retained for the JSON dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipDetail {
    pub clip_id: String,
    pub f1: f64,
    pub detections: IndexMap<String, Vec<[f64; 2]>>,
}

/// Aggregate scores for one evaluated system/split.
///
/// NaN scores (e.g. a Fréchet term skipped for lack of samples) survive a
/// JSON round trip as null.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub clips: usize,
    #[serde(with = "nan_as_null")]
    pub f1_segment: f64,
    #[serde(with = "nan_as_null")]
    pub l1_freq: f64,
    #[serde(with = "nan_as_null")]
    pub frechet: f64,
    pub missing_files: Vec<String>,
    pub details: Vec<ClipDetail>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl EvalReport {
    pub fn is_partial(&self) -> bool {
        !self.missing_files.is_empty()
    }

    pub fn has_nan(&self) -> bool {
        !(self.f1_segment.is_finite() && self.l1_freq.is_finite() && self.frechet.is_finite())
    }
}

/// Mirror of the published results-table layout; the subjective columns
/// stay empty.
pub const REPORT_CSV_HEADER: &str = "label,clips,f1_segment,mos_control_ts,fad_ts,\
mos_quality_ts,l1_freq,mos_control_freq,fad_freq,mos_quality_freq";

pub fn report_csv_row(report: &EvalReport) -> String {
    format!(
        "{},{},{:.6},,{:.6},,{:.6},,{:.6},",
        report.label, report.clips, report.f1_segment, report.frechet, report.l1_freq,
        report.frechet
    )
}

/// Score generated audio against a manifest: detection F1 against the
/// stored schedules, frequency L1 against the frequency captions, and a
/// Fréchet score between generated-set and reference-set features.
///
/// Generated clips are looked up as `<gen_dir>/<clip_id>.wav`.
pub fn evaluate_system(
    manifest: &[ManifestRecord],
    manifest_dir: &Path,
    gen_dir: &Path,
    classes: &[EventClass],
    params: &EvalParams,
    label: &str,
) -> Result<EvalReport> {
    let mut counts = SegmentCounts::default();
    let mut specs = Vec::new();
    let mut detections = Vec::new();
    let mut missing = Vec::new();
    let mut details = Vec::new();
    let mut gen_acc = FeatureAccumulator::new(FEATURE_DIM);
    let mut ref_acc = FeatureAccumulator::new(FEATURE_DIM);

    for record in manifest {
        let gen_path = gen_dir.join(format!("{}.wav", record.clip_id));
        if !gen_path.exists() {
            missing.push(gen_path.display().to_string());
            continue;
        }
        let generated = audio::read_wav(&gen_path)?;
        let reference_audio = audio::read_wav(&manifest_dir.join(&record.wav))?;
        let detection = grounding::detect_events(&generated, classes, &params.detector)?;
        let schedule = record.to_schedule();
        let clip_counts = segment_counts(&schedule, &detection, params.segment_length)?;
        counts.merge(clip_counts);
        details.push(ClipDetail {
            clip_id: record.clip_id.clone(),
            f1: clip_counts.score(params.segment_length).f1,
            detections: detection
                .events
                .iter()
                .map(|(name, ds)| {
                    (
                        name.clone(),
                        ds.iter().map(|d| [d.onset, d.offset]).collect(),
                    )
                })
                .collect(),
        });
        specs.push(caption::parse_frequency_caption(&record.frequency_caption)?);
        detections.push(detection);
        for f in extract_features(&generated, classes)? {
            gen_acc.push(&f);
        }
        for f in extract_features(&reference_audio, classes)? {
            ref_acc.push(&f);
        }
    }

    let clips = detections.len();
    let f1_segment = counts.score(params.segment_length).f1;
    let l1 = freq_l1(&specs, &detections, params.class_universe)?;
    // Too few feature windows for a full-rank covariance is reported as
    // NaN rather than failing the whole evaluation.
    let frechet = if clips == 0 {
        f64::NAN
    } else {
        let stats = gen_acc.finalize().and_then(|g| Ok((g, ref_acc.finalize()?)));
        match stats.and_then(|(g, r)| frechet_distance(&g, &r)) {
            Ok(d) => d,
            Err(Error::InsufficientSamples { .. }) => f64::NAN,
            Err(e) => return Err(e),
        }
    };
    Ok(EvalReport {
        label: label.to_string(),
        clips,
        f1_segment,
        l1_freq: l1,
        frechet,
        missing_files: missing,
        details,
    })
}
