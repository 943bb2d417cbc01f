//! Peak finding on spectra and matching of peaks to predicted resonances.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scan::{Column, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    /// Full width at half prominence.
    pub width: f64,
    pub prominence: f64,
}

/// Finds local maxima whose prominence is at least `min_prominence`.
///
/// `x` must be strictly increasing; non-finite samples are skipped. The
/// position and height come from the parabola through the maximum and its
/// two neighbours. Maxima on the first or last sample are not reported.
pub fn find_peaks_xy(x: &[f64], y: &[f64], min_prominence: f64) -> Vec<Peak> {
    assert_eq!(x.len(), y.len(), "x and y must have equal length");
    let (x, y): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    let n = y.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] <= y[i - 1] {
            i += 1;
            continue;
        }
        // walk across a flat top
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        if j + 1 >= n || y[j + 1] > y[i] {
            i = j + 1;
            continue;
        }
        let top = (i + j) / 2;
        let (left_lo, left_base) = base_left(&y, i);
        let (right_hi, right_base) = base_right(&y, j);
        let prominence = y[i] - left_base.max(right_base);
        if prominence >= min_prominence && prominence > 0.0 {
            let (position, height) = if i == j {
                parabola_vertex(&x[top - 1..=top + 1], &y[top - 1..=top + 1])
            } else {
                (0.5 * (x[i] + x[j]), y[i])
            };
            let half = y[i] - 0.5 * prominence;
            let width = crossing_right(&x, &y, j, right_hi, half) - crossing_left(&x, &y, i, left_lo, half);
            if height > 0.0 && width > 0.0 {
                peaks.push(Peak {
                    position,
                    height,
                    width,
                    prominence,
                });
            }
        }
        i = j + 1;
    }
    peaks
}

pub fn find_peaks(spectrum: &Spectrum, column: Column, min_prominence: f64) -> Vec<Peak> {
    find_peaks_xy(&spectrum.probes(), &spectrum.column(column), min_prominence)
}

/// Lowest point between `i` and the nearest sample to the left that is
/// higher than y[i] (or the start), with the index where the search stopped.
fn base_left(y: &[f64], i: usize) -> (usize, f64) {
    let mut lo = y[i];
    let mut k = i;
    while k > 0 && y[k - 1] <= y[i] {
        k -= 1;
        lo = lo.min(y[k]);
    }
    (k, lo)
}

fn base_right(y: &[f64], j: usize) -> (usize, f64) {
    let mut lo = y[j];
    let mut k = j;
    while k + 1 < y.len() && y[k + 1] <= y[j] {
        k += 1;
        lo = lo.min(y[k]);
    }
    (k, lo)
}

fn crossing_left(x: &[f64], y: &[f64], i: usize, limit: usize, level: f64) -> f64 {
    let mut k = i;
    while k > limit && y[k - 1] > level {
        k -= 1;
    }
    if k == limit {
        return x[k];
    }
    let t = (y[k] - level) / (y[k] - y[k - 1]);
    x[k] - t * (x[k] - x[k - 1])
}

fn crossing_right(x: &[f64], y: &[f64], j: usize, limit: usize, level: f64) -> f64 {
    let mut k = j;
    while k < limit && y[k + 1] > level {
        k += 1;
    }
    if k == limit {
        return x[k];
    }
    let t = (y[k] - level) / (y[k] - y[k + 1]);
    x[k] + t * (x[k + 1] - x[k])
}

/// Vertex of the parabola through three points, clamped to their span.
fn parabola_vertex(x: &[f64], y: &[f64]) -> (f64, f64) {
    // shift to the middle sample for conditioning
    let (h0, h2) = (x[0] - x[1], x[2] - x[1]);
    let (d0, d2) = (y[0] - y[1], y[2] - y[1]);
    // y − y1 = b t + c t² through (h0, d0) and (h2, d2)
    let det = h0 * h2 * (h2 - h0);
    if det == 0.0 {
        return (x[1], y[1]);
    }
    let c = (d2 * h0 - d0 * h2) / det;
    let b = (d0 * h2 * h2 - d2 * h0 * h0) / det;
    if c >= 0.0 {
        return (x[1], y[1]);
    }
    let t = (-b / (2.0 * c)).clamp(h0, h2);
    (x[1] + t, y[1] + b * t + c * t * t)
}

/// A predicted resonance position with its photon order label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub n: usize,
    pub position: f64,
}

/// Labels a sorted symmetric position list (−p_max … p_max) as produced by
/// the `dressed` formula functions: the order n is recovered from the rank
/// of |position|, largest first.
pub fn label_symmetric(positions: &[f64]) -> Vec<Prediction> {
    let mut magnitudes: Vec<f64> = positions.iter().map(|p| p.abs()).collect();
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    magnitudes.dedup();
    positions
        .iter()
        .map(|&position| Prediction {
            n: magnitudes.iter().position(|m| *m == position.abs()).unwrap_or(0),
            position,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeakAssignment {
    pub peak: Peak,
    /// None when no prediction lies within the tolerance.
    pub n: Option<usize>,
    pub predicted: Option<f64>,
    pub residual: Option<f64>,
}

/// Greedy nearest-first matching: pairs are taken in order of increasing
/// distance, each peak and each prediction at most once, and only pairs
/// closer than `tol`. The result has one entry per peak, in input order.
pub fn assign_orders(peaks: &[Peak], predictions: &[Prediction], tol: f64) -> Vec<PeakAssignment> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in peaks.iter().enumerate() {
        for (k, q) in predictions.iter().enumerate() {
            let d = (p.position - q.position).abs();
            if d <= tol {
                pairs.push((d, i, k));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out: Vec<PeakAssignment> = peaks
        .iter()
        .map(|&peak| PeakAssignment {
            peak,
            n: None,
            predicted: None,
            residual: None,
        })
        .collect();
    let mut used = vec![false; predictions.len()];
    for (_, i, k) in pairs {
        if out[i].n.is_some() || used[k] {
            continue;
        }
        used[k] = true;
        out[i].n = Some(predictions[k].n);
        out[i].predicted = Some(predictions[k].position);
        out[i].residual = Some(peaks[i].position - predictions[k].position);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeSpacing {
    pub mean: f64,
    pub std_dev: f64,
    /// Peaks inside the window.
    pub count: usize,
}

/// Mean and standard deviation of the gaps between consecutive peaks.
pub fn spacing_of(peaks: &[Peak]) -> Result<FringeSpacing> {
    if peaks.len() < 3 {
        return Err(Error::InsufficientPeaks { found: peaks.len() });
    }
    let mut pos: Vec<f64> = peaks.iter().map(|p| p.position).collect();
    pos.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = pos.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    Ok(FringeSpacing {
        mean,
        std_dev: var.sqrt(),
        count: pos.len(),
    })
}

/// Spacing of the peaks of `column` with position inside `window`.
pub fn fringe_spacing(
    spectrum: &Spectrum,
    column: Column,
    window: (f64, f64),
    min_prominence: f64,
) -> Result<FringeSpacing> {
    let inside: Vec<Peak> = find_peaks(spectrum, column, min_prominence)
        .into_iter()
        .filter(|p| p.position >= window.0 && p.position <= window.1)
        .collect();
    spacing_of(&inside)
}

pub fn write_peak_report<W: Write>(assignments: &[PeakAssignment], writer: W) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        position: f64,
        height: f64,
        width: f64,
        prominence: f64,
        n_assigned: Option<usize>,
        predicted: Option<f64>,
        residual: Option<f64>,
    }
    let mut w = csv::Writer::from_writer(writer);
    if assignments.is_empty() {
        w.write_record(["position", "height", "width", "prominence", "n_assigned", "predicted", "residual"])?;
    }
    for a in assignments {
        w.serialize(Row {
            position: a.peak.position,
            height: a.peak.height,
            width: a.peak.width,
            prominence: a.peak.prominence,
            n_assigned: a.n,
            predicted: a.predicted,
            residual: a.residual,
        })?;
    }
    w.flush()?;
    Ok(())
}
