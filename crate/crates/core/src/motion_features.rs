//! Motion histograms and the first, redundancy-reducing stage of key-frame
//! sampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::optical_flow::FlowField;

/// Flow vectors shorter than this have no defined direction.
const MIN_DIRECTED_MAGNITUDE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HistogramConfig {
    /// Number of magnitude bins.
    pub mag_bins: usize,
    /// Number of angle bins over `[0, 2*pi)`.
    pub ang_bins: usize,
    /// Magnitudes above this (pixels per frame) land in the last bin.
    pub mag_cap: f64,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self {
            mag_bins: 16,
            ang_bins: 16,
            mag_cap: 20.0,
        }
    }
}

impl HistogramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mag_bins == 0 || self.ang_bins == 0 {
            return Err(Error::InvalidParameter("bin counts must be >= 1".into()));
        }
        if !(self.mag_cap.is_finite() && self.mag_cap > 0.0) {
            return Err(Error::InvalidParameter(
                "mag_cap must be finite and > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Normalized magnitude and angle histograms of one frame's flow.
///
/// Each half sums to one on its own; the angle half is all zero when the
/// flow has no moving pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionHistogram {
    mag_bins: Vec<f64>,
    ang_bins: Vec<f64>,
    owner_index: usize,
}

impl MotionHistogram {
    /// Wraps precomputed bins. Entries must be finite and non-negative.
    pub fn from_bins(owner_index: usize, mag_bins: Vec<f64>, ang_bins: Vec<f64>) -> Result<Self> {
        if mag_bins.is_empty() || ang_bins.is_empty() {
            return Err(Error::EmptyInput("histogram bins"));
        }
        if mag_bins
            .iter()
            .chain(&ang_bins)
            .any(|b| !(b.is_finite() && *b >= 0.0))
        {
            return Err(Error::InvalidParameter(
                "histogram bins must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            mag_bins,
            ang_bins,
            owner_index,
        })
    }

    pub fn mag_bins(&self) -> &[f64] {
        &self.mag_bins
    }

    pub fn ang_bins(&self) -> &[f64] {
        &self.ang_bins
    }

    /// Index of the frame whose outgoing flow produced this histogram.
    pub fn owner_index(&self) -> usize {
        self.owner_index
    }

    /// Magnitude bins followed by angle bins.
    pub fn concatenated(&self) -> impl Iterator<Item = f64> + '_ {
        self.mag_bins.iter().chain(&self.ang_bins).copied()
    }

    fn shape(&self) -> (usize, usize) {
        (self.mag_bins.len(), self.ang_bins.len())
    }
}

/// Full-quadrant flow direction in `[0, 2*pi)`.
fn direction(u: f64, v: f64) -> f64 {
    let a = libm::atan2(v, u);
    if a < 0.0 {
        let wrapped = a + TAU;
        // a tiny negative angle can round up to exactly 2*pi
        if wrapped >= TAU {
            0.0
        } else {
            wrapped
        }
    } else {
        a
    }
}

fn bin_of(value: f64, upper: f64, bins: usize) -> usize {
    let b = libm::floor(value * bins as f64 / upper);
    if b <= 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

fn normalize(bins: &mut [f64]) {
    let total: f64 = bins.iter().sum();
    if total > 0.0 {
        bins.iter_mut().for_each(|b| *b /= total);
    }
}

/// Histograms of flow magnitude and direction for one frame.
pub fn motion_histogram(flow: &FlowField, config: &HistogramConfig) -> Result<MotionHistogram> {
    config.validate()?;
    let mut mag = vec![0.0; config.mag_bins];
    let mut ang = vec![0.0; config.ang_bins];
    for (u, v) in flow.vectors() {
        let m = libm::sqrt(u * u + v * v);
        if m < MIN_DIRECTED_MAGNITUDE {
            mag[0] += 1.0;
            continue;
        }
        mag[bin_of(m.min(config.mag_cap), config.mag_cap, config.mag_bins)] += 1.0;
        ang[bin_of(direction(u, v), TAU, config.ang_bins)] += 1.0;
    }
    normalize(&mut mag);
    normalize(&mut ang);
    Ok(MotionHistogram {
        mag_bins: mag,
        ang_bins: ang,
        owner_index: flow.index(),
    })
}

/// L1 distance between two motion histograms over all of their bins.
pub fn temporal_disparity(h1: &MotionHistogram, h2: &MotionHistogram) -> Result<f64> {
    if h1.shape() != h2.shape() {
        let (m1, a1) = h1.shape();
        let (m2, a2) = h2.shape();
        return Err(Error::LengthMismatch {
            expected: m1 + a1,
            found: m2 + a2,
        });
    }
    Ok(h1
        .concatenated()
        .zip(h2.concatenated())
        .map(|(a, b)| libm::fabs(a - b))
        .sum())
}

/// Consecutive disparities with their mean, sample deviation and the
/// redundancy threshold `mean - sample_std`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparitySeries {
    values: Vec<f64>,
    mean: f64,
    sample_std: f64,
    threshold: f64,
}

impl DisparitySeries {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_std(&self) -> f64 {
        self.sample_std
    }

    /// May be negative, in which case no frame is redundant.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// Computes the minimum-disparity threshold from a series of consecutive
/// disparities. The variance uses the `n - 1` denominator, so at least two
/// values are required.
pub fn redundancy_threshold(series: &[f64]) -> Result<DisparitySeries> {
    if series.len() < 2 {
        return Err(Error::NotEnoughSamples {
            needed: 2,
            found: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("disparities must be finite".into()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let ss: f64 = series.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sample_std = libm::sqrt(ss / (n - 1.0));
    Ok(DisparitySeries {
        values: series.to_vec(),
        mean,
        sample_std,
        threshold: mean - sample_std,
    })
}

/// Disparities between each histogram and its successor.
pub fn consecutive_disparities(histograms: &[MotionHistogram]) -> Result<Vec<f64>> {
    histograms
        .windows(2)
        .map(|pair| temporal_disparity(&pair[0], &pair[1]))
        .collect()
}

/// Drops temporally redundant frames.
///
/// The first frame is kept and becomes the anchor. Every later frame whose
/// disparity to the anchor is strictly below `threshold` is discarded;
/// otherwise it is kept and becomes the new anchor. Returns the owner
/// indices of the kept frames in input order.
pub fn reduce_redundancy(histograms: &[MotionHistogram], threshold: f64) -> Result<Vec<usize>> {
    let (first, rest) = histograms
        .split_first()
        .ok_or(Error::EmptyInput("motion histograms"))?;
    let mut kept = vec![first.owner_index];
    let mut anchor = first;
    for h in rest {
        if temporal_disparity(anchor, h)? < threshold {
            continue;
        }
        kept.push(h.owner_index);
        anchor = h;
    }
    Ok(kept)
}
