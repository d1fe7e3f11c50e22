//! Stance segmentation, GRF peak metrics and summary statistics.

use serde::{Deserialize, Serialize};

use super::filters::{gaussian_lowpass, Series};
use crate::error::Result;

pub const CONTACT_THRESHOLD_N: f64 = 2.0;
/// Minimum prominence of a peak, as a fraction of its cycle maximum.
pub const PROMINENCE_FRACTION: f64 = 0.1;
/// Touchdown peaks are searched in this leading fraction of stance.
pub const TOUCHDOWN_WINDOW: f64 = 0.4;
/// Push-off peaks are searched after this fraction of stance.
pub const PUSHOFF_START: f64 = 0.6;
/// Gaps and stances shorter than this fraction of a gait cycle are chatter.
const CHATTER_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CyclePeaks {
    /// First and one-past-last sample of the stance.
    pub start: usize,
    pub end: usize,
    pub touchdown_peak: f64,
    pub touchdown_index: usize,
    pub touchdown_prominent: bool,
    pub pushoff_peak: f64,
    pub pushoff_index: usize,
    /// False when the push-off value is the fallback maximum.
    pub pushoff_prominent: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GrfRecord {
    pub cycles: Vec<CyclePeaks>,
    pub touchdown: Summary,
    pub pushoff: Summary,
    pub no_contact: bool,
}

/// Topographic prominence of every strict local maximum of `x`.
pub fn prominences(x: &[f64]) -> Vec<(usize, f64)> {
    let n = x.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            // Plateaus count once, at their first sample.
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                let mut left_min = x[i];
                let mut k = i;
                while k > 0 && x[k - 1] <= x[i] {
                    k -= 1;
                    left_min = left_min.min(x[k]);
                }
                let mut right_min = x[i];
                let mut k = j;
                while k + 1 < n && x[k + 1] <= x[i] {
                    k += 1;
                    right_min = right_min.min(x[k]);
                }
                out.push((i, x[i] - left_min.max(right_min)));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Complete stance intervals `[start, end)` where `fr ≥ threshold`, ignoring
/// chatter.
pub fn stance_intervals(fr: &Series, threshold: f64, cycle_duration: f64) -> Vec<(usize, usize)> {
    let min_len = ((CHATTER_FRACTION * cycle_duration / fr.dt).round() as usize).max(1);
    let mut raw: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (i, &f) in fr.values.iter().enumerate() {
        match (f >= threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                raw.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        raw.push((s, fr.len()));
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for iv in raw {
        match merged.last_mut() {
            Some(last) if iv.0 - last.1 < min_len => last.1 = iv.1,
            _ => merged.push(iv),
        }
    }
    // Stances cut by either end of the record are incomplete.
    merged.retain(|&(s, e)| e - s >= min_len && s > 0 && e < fr.len());
    merged
}

fn argmax(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        )
        .0
}

/// Peak metrics of one stance.
pub fn stance_peaks(x: &[f64], offset: usize) -> CyclePeaks {
    let n = x.len();
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_prominence = PROMINENCE_FRACTION * max;
    let peaks = prominences(x);
    let td_end = ((TOUCHDOWN_WINDOW * n as f64).ceil() as usize).clamp(1, n);
    let po_start = ((PUSHOFF_START * n as f64).floor() as usize).min(n - 1);
    let td_i = argmax(&x[..td_end]);
    let td_prominent = peaks.iter().any(|&(i, p)| i < td_end && p >= min_prominence);
    let prominent_late = peaks
        .iter()
        .filter(|&&(i, p)| i >= po_start && p >= min_prominence)
        .max_by(|a, b| x[a.0].total_cmp(&x[b.0]));
    let (po_i, po_prominent) = match prominent_late {
        Some(&(i, _)) => (i, true),
        None => (po_start + argmax(&x[po_start..]), false),
    };
    CyclePeaks {
        start: offset,
        end: offset + n,
        touchdown_peak: x[td_i],
        touchdown_index: offset + td_i,
        touchdown_prominent: td_prominent,
        pushoff_peak: x[po_i],
        pushoff_index: offset + po_i,
        pushoff_prominent: po_prominent,
    }
}

/// Splits a resultant GRF series into stances and extracts their peaks.
pub fn segment_and_peaks(fr: &Series, threshold: f64, cycle_duration: f64) -> Result<GrfRecord> {
    if !(threshold > 0.0) || !(cycle_duration > 0.0) {
        return Err(crate::Error::InvalidSpec(
            "segmentation needs a positive threshold and cycle duration".into(),
        ));
    }
    let cycles: Vec<CyclePeaks> = stance_intervals(fr, threshold, cycle_duration)
        .into_iter()
        .map(|(s, e)| stance_peaks(&fr.values[s..e], s))
        .collect();
    if cycles.is_empty() {
        return Ok(GrfRecord {
            no_contact: true,
            ..GrfRecord::default()
        });
    }
    let td: Vec<f64> = cycles.iter().map(|c| c.touchdown_peak).collect();
    let po: Vec<f64> = cycles.iter().map(|c| c.pushoff_peak).collect();
    Ok(GrfRecord {
        touchdown: summarize(&td),
        pushoff: summarize(&po),
        cycles,
        no_contact: false,
    })
}

/// Descriptive statistics; `sd` is the sample deviation, quartiles use linear
/// interpolation between order statistics at `p·(n − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Summary {
        n,
        mean,
        sd,
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[n - 1],
    }
}

/// Largest excursion above a Gaussian-smoothed baseline of width `baseline_sigma`
/// within `half_window` seconds of `t`.
pub fn spike_height(series: &Series, t: f64, half_window: f64, baseline_sigma: f64) -> Result<f64> {
    let base = gaussian_lowpass(series, baseline_sigma)?;
    let mut best: f64 = 0.0;
    for (i, (x, b)) in series.values.iter().zip(&base.values).enumerate() {
        if (series.time(i) - t).abs() <= half_window {
            best = best.max(x - b);
        }
    }
    Ok(best)
}
