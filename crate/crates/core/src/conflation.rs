//! Discrete probability distributions and their conflation.
//!
//! Every operation here first smooths its inputs by adding
//! [`SMOOTHING_EPS`] to each class and renormalizing, so products and
//! logarithms never see an exact zero. The smoothed copies are local to the
//! call.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Mass added to every class before conflation or distance evaluation.
pub const SMOOTHING_EPS: f64 = 1e-12;

/// Tolerance on the total mass of a [`ProbDist`].
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Two Bhattacharyya distances closer than this count as a tie.
pub const DISTANCE_TIE: f64 = 1e-12;

/// A probability distribution over `L >= 2` classes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct ProbDist(Vec<f64>);

impl ProbDist {
    /// Validates `probs` as-is: finite, non-negative, at least two classes,
    /// total within [`SUM_TOLERANCE`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Self::check_entries(&probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Scales non-negative weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        Self::check_entries(&weights)?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidDistribution(
                "weights have no usable mass".into(),
            ));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::normalized(alloc::vec![1.0; classes])
    }

    fn check_entries(probs: &[f64]) -> Result<()> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is not a finite non-negative number"
            )));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the most probable class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * libm::log(p))
            .sum::<f64>()
    }

    /// Copy with every class raised by [`SMOOTHING_EPS`] and renormalized.
    pub fn smoothed(&self) -> Vec<f64> {
        let total: f64 = self.0.iter().map(|p| p + SMOOTHING_EPS).sum();
        self.0.iter().map(|p| (p + SMOOTHING_EPS) / total).collect()
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ProbDist {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> core::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(deserializer)?;
        ProbDist::new(probs).map_err(serde::de::Error::custom)
    }
}

fn check_lengths(p: &ProbDist, q: &ProbDist) -> Result<()> {
    if p.classes() != q.classes() {
        return Err(Error::LengthMismatch {
            expected: p.classes(),
            found: q.classes(),
        });
    }
    Ok(())
}

fn normalize_product(a: &[f64], b: &[f64]) -> ProbDist {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let total: f64 = prod.iter().sum();
    ProbDist(prod.into_iter().map(|x| x / total).collect())
}

fn bhattacharyya_raw(p: &[f64], q: &[f64]) -> f64 {
    let coefficient: f64 = p.iter().zip(q).map(|(a, b)| libm::sqrt(a * b)).sum();
    (-libm::log(coefficient)).max(0.0)
}

/// Normalized class-wise product of two distributions.
pub fn conflate(p1: &ProbDist, p2: &ProbDist) -> Result<ProbDist> {
    check_lengths(p1, p2)?;
    Ok(normalize_product(&p1.smoothed(), &p2.smoothed()))
}

/// `-ln(sum_i sqrt(p_i q_i))`, clamped at zero against rounding.
pub fn bhattacharyya_distance(p: &ProbDist, q: &ProbDist) -> Result<f64> {
    check_lengths(p, q)?;
    Ok(bhattacharyya_raw(&p.smoothed(), &q.smoothed()))
}

/// Which input a biased conflation leaned toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nearer {
    First,
    Second,
}

/// Biased conflation together with the quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedConflation {
    pub dist: ProbDist,
    /// Plain conflation of the two inputs.
    pub conflated: ProbDist,
    /// Distance from the conflation to the first input.
    pub d1: f64,
    /// Distance from the conflation to the second input.
    pub d2: f64,
    /// Weight given to the nearer input, in `[0, 1]`.
    pub beta: f64,
    /// `None` when the distances tie and no bias was applied.
    pub nearer: Option<Nearer>,
}

/// Conflation pulled toward whichever input it is closer to.
///
/// With `Pc` the conflation and `d1`, `d2` its Bhattacharyya distances to the
/// inputs, the result is `(1 - beta) Pc + beta P_near` renormalized, where
/// `beta = (d_far - d_near) / (d_far + d_near)`. Equal distances give plain
/// conflation; a conflation that already coincides with one input is pulled
/// all the way onto it.
pub fn biased_conflate_detailed(p1: &ProbDist, p2: &ProbDist) -> Result<BiasedConflation> {
    check_lengths(p1, p2)?;
    let s1 = p1.smoothed();
    let s2 = p2.smoothed();
    let conflated = normalize_product(&s1, &s2);
    let d1 = bhattacharyya_raw(&conflated.0, &s1);
    let d2 = bhattacharyya_raw(&conflated.0, &s2);

    let (nearer, near, d_near, d_far) = if (d1 - d2).abs() <= DISTANCE_TIE {
        (None, &s1, d1, d1)
    } else if d1 < d2 {
        (Some(Nearer::First), &s1, d1, d2)
    } else {
        (Some(Nearer::Second), &s2, d2, d1)
    };
    let spread = d_far + d_near;
    let beta = if nearer.is_some() && spread > 0.0 {
        ((d_far - d_near) / spread).clamp(0.0, 1.0)
    } else {
        0.0
    };

    let dist = if beta == 0.0 {
        conflated.clone()
    } else {
        let mixed: Vec<f64> = conflated
            .0
            .iter()
            .zip(near)
            .map(|(c, n)| (1.0 - beta) * c + beta * n)
            .collect();
        let total: f64 = mixed.iter().sum();
        ProbDist(mixed.into_iter().map(|x| x / total).collect())
    };

    Ok(BiasedConflation {
        dist,
        conflated,
        d1,
        d2,
        beta,
        nearer,
    })
}

/// See [`biased_conflate_detailed`].
pub fn biased_conflate(p1: &ProbDist, p2: &ProbDist) -> Result<ProbDist> {
    biased_conflate_detailed(p1, p2).map(|b| b.dist)
}
