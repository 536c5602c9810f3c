//! Second stage of key-frame sampling: greedy selection of distinctive,
//! temporally spread frames from a complete disparity graph.
//!
//! Every pair of candidate frames is joined by an edge weighted with their
//! temporal disparity. Each iteration takes the heaviest *viable* edge: its
//! two terminals must be more than `d_low` frames apart, and each terminal
//! must be more than `d_low` frames from every node chosen so far. An edge
//! that fails the test once is dropped for good.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::motion_features::{temporal_disparity, MotionHistogram};

/// Minimum accepted time gap between two key-frames: `floor(N / (2 n_kf - 1))`.
pub fn compute_d_low(total_frames: usize, n_kf: usize) -> Result<usize> {
    if n_kf < 2 {
        return Err(Error::InvalidParameter(format!(
            "key-frame count must be >= 2, got {n_kf}"
        )));
    }
    if total_frames == 0 {
        return Err(Error::InvalidParameter(
            "total frame count must be >= 1".into(),
        ));
    }
    Ok(total_frames / (2 * n_kf - 1))
}

/// Complete, symmetric graph over candidate frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGraph {
    timestamps: Vec<usize>,
    weights: Vec<f64>,
}

impl FrameGraph {
    /// Builds a graph from explicit timestamps and a row-major `n x n` weight
    /// matrix. The matrix must be symmetric, non-negative and zero on the
    /// diagonal; timestamps must be strictly increasing.
    pub fn from_weights(timestamps: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let n = timestamps.len();
        if n < 2 {
            return Err(Error::NotEnoughSamples {
                needed: 2,
                found: n,
            });
        }
        if weights.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                found: weights.len(),
            });
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGraph(
                "timestamps must be strictly increasing".into(),
            ));
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "non-zero diagonal at node {i}"
                )));
            }
            for j in i + 1..n {
                let w = weights[i * n + j];
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::InvalidGraph(format!(
                        "bad weight on edge ({i}, {j})"
                    )));
                }
                if w != weights[j * n + i] {
                    return Err(Error::InvalidGraph(format!("asymmetric edge ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            timestamps,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Timestamp (original frame index) of node `i`.
    pub fn timestamp(&self, i: usize) -> usize {
        self.timestamps[i]
    }

    pub fn timestamps(&self) -> &[usize] {
        &self.timestamps
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.len() + j]
    }

    fn gap(&self, i: usize, j: usize) -> usize {
        self.timestamps[i].abs_diff(self.timestamps[j])
    }
}

/// Complete graph over the reduced frame subset, weighted by temporal
/// disparity. Node timestamps are the histograms' owner frame indices.
pub fn build_frame_graph(subset: &[MotionHistogram]) -> Result<FrameGraph> {
    let n = subset.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples {
            needed: 2,
            found: n,
        });
    }
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let w = temporal_disparity(&subset[i], &subset[j])?;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    FrameGraph::from_weights(subset.iter().map(|h| h.owner_index()).collect(), weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChosenFrame {
    pub frame_index: usize,
    /// True when the frame was added to make up the requested count rather
    /// than picked through a viable edge.
    pub padded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Ascending by frame index.
    pub chosen: Vec<ChosenFrame>,
    /// Node-index pairs `(i, j)` with `i < j`, in selection order.
    pub chosen_edges: Vec<(usize, usize)>,
    /// The same edges expressed as frame-index pairs.
    pub chosen_edge_frames: Vec<(usize, usize)>,
    pub d_low: usize,
    pub n_kf: usize,
}

impl SelectionResult {
    pub fn chosen_frames(&self) -> Vec<usize> {
        self.chosen.iter().map(|c| c.frame_index).collect()
    }

    pub fn padded(&self) -> bool {
        self.chosen.iter().any(|c| c.padded)
    }
}

/// Smallest timestamp gap from `node` to any of `others`, `usize::MAX` if none.
fn min_gap(graph: &FrameGraph, node: usize, others: &[usize]) -> usize {
    others
        .iter()
        .map(|&c| graph.gap(node, c))
        .min()
        .unwrap_or(usize::MAX)
}

/// Greedy distinctive key-frame selection.
///
/// Runs `ceil(n_kf / 2)` iterations. When `n_kf` is odd the last iteration
/// keeps only the terminal of the winning edge that lies farther from the
/// frames already chosen. If the viable edges run out early the remaining
/// slots are filled with unchosen nodes that maximize the minimum gap to the
/// chosen set; those frames are flagged as padded.
///
/// Ties between equally heavy edges go to the edge whose earlier terminal
/// comes first in time, then to the earlier second terminal.
pub fn select_keyframes(
    graph: &FrameGraph,
    n_kf: usize,
    total_frames: usize,
) -> Result<SelectionResult> {
    let d_low = compute_d_low(total_frames, n_kf)?;
    let n = graph.len();
    let iterations = n_kf.div_ceil(2);

    // Lexicographic order doubles as the tie-break order, since timestamps increase with the node index.
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let mut picked: Vec<usize> = Vec::with_capacity(n_kf);
    let mut chosen_edges = Vec::with_capacity(iterations);

    for iteration in 0..iterations {
        candidates.retain(|&(i, j)| {
            graph.gap(i, j) > d_low
                && picked
                    .iter()
                    .all(|&c| graph.gap(i, c) > d_low && graph.gap(j, c) > d_low)
        });
        let mut best: Option<(usize, usize)> = None;
        for &(i, j) in &candidates {
            match best {
                Some((bi, bj)) if graph.weight(i, j) <= graph.weight(bi, bj) => {}
                _ => best = Some((i, j)),
            }
        }
        let Some((i, j)) = best else { break };
        chosen_edges.push((i, j));

        let single_pick = n_kf % 2 == 1 && iteration + 1 == iterations;
        if single_pick {
            // ties go to the earlier terminal i
            let pick = if min_gap(graph, j, &picked) > min_gap(graph, i, &picked) {
                j
            } else {
                i
            };
            picked.push(pick);
        } else {
            picked.push(i);
            picked.push(j);
        }
    }

    let organic = picked.len();
    while picked.len() < n_kf {
        let mut best: Option<(usize, usize)> = None;
        for node in (0..n).filter(|v| !picked.contains(v)) {
            let gap = min_gap(graph, node, &picked);
            if best.is_none_or(|(_, g)| gap > g) {
                best = Some((node, gap));
            }
        }
        match best {
            Some((node, _)) => picked.push(node),
            None => break,
        }
    }

    let mut chosen: Vec<ChosenFrame> = picked
        .iter()
        .enumerate()
        .map(|(pos, &node)| ChosenFrame {
            frame_index: graph.timestamp(node),
            padded: pos >= organic,
        })
        .collect();
    chosen.sort_by_key(|c| c.frame_index);
    let chosen_edge_frames = chosen_edges
        .iter()
        .map(|&(i, j)| (graph.timestamp(i), graph.timestamp(j)))
        .collect();

    Ok(SelectionResult {
        chosen,
        chosen_edges,
        chosen_edge_frames,
        d_low,
        n_kf,
    })
}
