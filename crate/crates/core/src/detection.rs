//! Proxy seizure-onset detector and the one-minute-overlap TP/FP protocol.
//!
//! The detector tracks the channel-averaged 3-30 Hz wavelet energy of 2 s
//! epochs. An onset needs `onset_epochs` consecutive epochs above `k` times
//! the median of the preceding non-flagged epochs (a 120 s window); the
//! baseline is frozen while a section is open, and the section closes after
//! `end_epochs` consecutive epochs below `end_factor` times that median.
//! Sections separated by less than `merge_gap_s` are merged.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::signal::{FlagSection, Recording, SignalMatrix};
use crate::wavelet::{band_energies, dwt1d, max_levels};

/// Overlap that makes a compressed-run section a true positive, in seconds.
pub const MIN_OVERLAP_S: f64 = 60.0;
const OVERLAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub epoch_s: f64,
    pub baseline_s: f64,
    pub k: f64,
    pub onset_epochs: usize,
    pub end_factor: f64,
    pub end_epochs: usize,
    pub merge_gap_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            epoch_s: 2.0,
            baseline_s: 120.0,
            k: 5.0,
            onset_epochs: 3,
            end_factor: 2.0,
            end_epochs: 5,
            merge_gap_s: 30.0,
        }
    }
}

pub const DETECTOR_LABEL: &str = "onset";

/// Channel-averaged mid-band energy of each complete epoch.
pub fn epoch_statistic(m: &SignalMatrix, fs: u32, epoch_s: f64) -> Result<Vec<f64>> {
    let len = (epoch_s * f64::from(fs)).round() as usize;
    let levels = max_levels(len, 5);
    if levels == 0 {
        return Err(Error::Config(format!("epochs of {len} samples are too short")));
    }
    let count = m.n_samples() / len;
    let mut out = Vec::with_capacity(count);
    for e in 0..count {
        let mut sum = 0.0;
        for row in m.rows() {
            let pyr = dwt1d(&row[e * len..(e + 1) * len], levels)?;
            sum += band_energies(&pyr, f64::from(fs)).mid_band();
        }
        out.push(sum / m.n_channels() as f64);
    }
    Ok(out)
}

fn median(v: &VecDeque<f64>) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Runs the threshold rule over a precomputed epoch statistic. Returns
/// `(first, last)` epoch index pairs, inclusive, before merging.
pub fn detect_epochs(stat: &[f64], cfg: &DetectorConfig) -> Vec<(usize, usize)> {
    let window = (cfg.baseline_s / cfg.epoch_s).round().max(1.0) as usize;
    let mut history: VecDeque<f64> = VecDeque::with_capacity(window + 1);
    let mut pending: Vec<usize> = Vec::new();
    let mut sections = Vec::new();
    let mut open: Option<(usize, f64, usize, usize)> = None; // start, frozen median, last active, quiet run
    let push = |h: &mut VecDeque<f64>, v: f64| {
        h.push_back(v);
        if h.len() > window {
            h.pop_front();
        }
    };
    for (i, &s) in stat.iter().enumerate() {
        if let Some((start, med, last, quiet)) = open {
            if s < cfg.end_factor * med {
                let quiet = quiet + 1;
                if quiet >= cfg.end_epochs {
                    sections.push((start, last));
                    open = None;
                } else {
                    open = Some((start, med, last, quiet));
                }
            } else {
                open = Some((start, med, i, 0));
            }
            continue;
        }
        if history.len() < window {
            push(&mut history, s);
            continue;
        }
        let med = median(&history);
        if s > cfg.k * med && med > 0.0 {
            pending.push(i);
            if pending.len() >= cfg.onset_epochs {
                open = Some((pending[0], med, i, 0));
                pending.clear();
            }
        } else {
            for p in pending.drain(..) {
                push(&mut history, stat[p]);
            }
            push(&mut history, s);
        }
    }
    if let Some((start, _, last, _)) = open {
        sections.push((start, last));
    }
    sections
}

/// Merges sections whose gap is under `gap` seconds. Input sorted.
pub fn merge_sections(mut secs: Vec<FlagSection>, gap: f64) -> Vec<FlagSection> {
    secs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let mut out: Vec<FlagSection> = Vec::with_capacity(secs.len());
    for s in secs {
        match out.last_mut() {
            Some(last) if s.start_s - last.end_s < gap => last.end_s = last.end_s.max(s.end_s),
            _ => out.push(s),
        }
    }
    out
}

pub fn detect_matrix(m: &SignalMatrix, fs: u32, cfg: &DetectorConfig) -> Result<Vec<FlagSection>> {
    if fs == 0 {
        return Err(Error::Config("sampling rate must be positive".into()));
    }
    let stat = epoch_statistic(m, fs, cfg.epoch_s)?;
    let secs = detect_epochs(&stat, cfg)
        .into_iter()
        .map(|(a, b)| FlagSection {
            start_s: a as f64 * cfg.epoch_s,
            end_s: (b + 1) as f64 * cfg.epoch_s,
            label: DETECTOR_LABEL.to_string(),
        })
        .collect();
    Ok(merge_sections(secs, cfg.merge_gap_s))
}

pub fn detect(rec: &Recording, cfg: &DetectorConfig) -> Result<Vec<FlagSection>> {
    detect_matrix(&rec.samples, rec.fs, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionReport {
    pub ground_truth_count: usize,
    pub tp_count: usize,
    /// `None` when the original run flagged nothing.
    pub tp_percent: Option<f64>,
    pub fp_count: usize,
}

/// Classifies each compressed-run section in time order. A section is a
/// true positive when its summed overlap with the original sections not
/// yet credited reaches one minute; the original it overlaps most is then
/// credited.
pub fn match_flags(original: &[FlagSection], compressed: &[FlagSection]) -> DetectionReport {
    let mut credited = vec![false; original.len()];
    let mut tp = 0;
    for c in compressed {
        let mut total = 0.0;
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in original.iter().enumerate() {
            if credited[i] {
                continue;
            }
            let ov = c.overlap(o);
            total += ov;
            if ov > 0.0 && best.is_none_or(|(_, b)| ov > b) {
                best = Some((i, ov));
            }
        }
        if total + OVERLAP_EPS >= MIN_OVERLAP_S {
            credited[best.expect("positive overlap").0] = true;
            tp += 1;
        }
    }
    DetectionReport {
        ground_truth_count: original.len(),
        tp_count: tp,
        tp_percent: (!original.is_empty()).then(|| 100.0 * tp as f64 / original.len() as f64),
        fp_count: compressed.len() - tp,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    /// Mean over the reports that have a TP percentage.
    pub mean_tp_percent: Option<f64>,
    pub mean_fp: f64,
}

pub fn aggregate(reports: &[DetectionReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::Metric("no reports to aggregate".into()));
    }
    let tps: Vec<f64> = reports.iter().filter_map(|r| r.tp_percent).collect();
    Ok(Summary {
        mean_tp_percent: (!tps.is_empty()).then(|| tps.iter().sum::<f64>() / tps.len() as f64),
        mean_fp: reports.iter().map(|r| r.fp_count as f64).sum::<f64>() / reports.len() as f64,
    })
}

fn fmt_tp(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

/// CSV with one row per report plus an `Average` row.
pub fn report_csv(reports: &[DetectionReport]) -> Result<String> {
    let summary = aggregate(reports)?;
    let mut out = String::from("detections,tp_percent,fp_count\n");
    for r in reports {
        writeln!(out, "{},{},{}", r.ground_truth_count, fmt_tp(r.tp_percent), r.fp_count).unwrap();
    }
    writeln!(out, "Average,{},{:.2}", fmt_tp(summary.mean_tp_percent), summary.mean_fp).unwrap();
    Ok(out)
}
