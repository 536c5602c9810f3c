//! Straight-line reference implementations used as test oracles.
//!
//! Nothing here calls into the library's numerical code; the functions are
//! written from the definitions so they can check the optimized paths.

#![allow(dead_code)]

use std::collections::HashSet;

pub const EPS: f64 = 1e-12;

pub fn smooth(p: &[f64]) -> Vec<f64> {
    let s: Vec<f64> = p.iter().map(|x| x + EPS).collect();
    let total: f64 = s.iter().sum();
    s.iter().map(|x| x / total).collect()
}

pub fn conflate(p: &[f64], q: &[f64]) -> Vec<f64> {
    let (p, q) = (smooth(p), smooth(q));
    let mut out = vec![0.0; p.len()];
    let mut denom = 0.0;
    for b in 0..p.len() {
        denom += p[b] * q[b];
    }
    for a in 0..p.len() {
        out[a] = p[a] * q[a] / denom;
    }
    out
}

pub fn bhattacharyya(p: &[f64], q: &[f64]) -> f64 {
    let (p, q) = (smooth(p), smooth(q));
    let mut bc = 0.0;
    for i in 0..p.len() {
        bc += (p[i] * q[i]).sqrt();
    }
    (-bc.ln()).max(0.0)
}

pub fn biased_conflate(p1: &[f64], p2: &[f64]) -> Vec<f64> {
    let (s1, s2) = (smooth(p1), smooth(p2));
    let pc = conflate(p1, p2);
    // distances are taken between the conflation and the smoothed inputs
    let bc = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] * b[i]).sqrt();
        }
        (-s.ln()).max(0.0)
    };
    let d1 = bc(&pc, &s1);
    let d2 = bc(&pc, &s2);
    if (d1 - d2).abs() <= 1e-12 || d1 + d2 == 0.0 {
        return pc;
    }
    let (near, dn, df) = if d1 < d2 { (s1, d1, d2) } else { (s2, d2, d1) };
    let beta = (df - dn) / (df + dn);
    let mixed: Vec<f64> = (0..pc.len())
        .map(|i| (1.0 - beta) * pc[i] + beta * near[i])
        .collect();
    let total: f64 = mixed.iter().sum();
    mixed.iter().map(|x| x / total).collect()
}

pub fn fold(dists: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = dists[0].clone();
    for d in &dists[1..] {
        acc = biased_conflate(&acc, d);
    }
    acc
}

/// Default fusion DAG: `frames[m][k]` is modality `m` at key-frame `k`,
/// `videos[m]` the video-level prediction of modality `m`.
pub fn multi_tier(frames: &[Vec<Vec<f64>>], videos: &[Vec<f64>]) -> Vec<f64> {
    let n_kf = frames[0].len();
    let mut tier1 = Vec::new();
    for k in 0..n_kf {
        let column: Vec<Vec<f64>> = frames.iter().map(|m| m[k].clone()).collect();
        tier1.push(fold(&column));
    }
    let v_frames = fold(&tier1);
    let v_video = fold(videos);
    biased_conflate(&v_frames, &v_video)
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    let mean = sum / n;
    let mut var = 0.0;
    for v in values {
        var += (v - mean).powi(2);
    }
    (mean, (var / (n - 1.0)).sqrt())
}

/// Re-simulation of the greedy viable-edge selection, written without
/// incremental state: every iteration re-derives viability for each edge
/// from scratch and a set remembers edges that ever failed.
pub struct GreedyTrace {
    pub edges: Vec<(usize, usize)>,
    /// Frame timestamps, organic picks only, in pick order.
    pub picks: Vec<usize>,
    /// Node indices of all chosen frames (organic then padded).
    pub nodes: Vec<usize>,
    pub organic: usize,
    /// Viable edge sets per iteration, for replay checks.
    pub viable_per_iteration: Vec<HashSet<(usize, usize)>>,
}

pub fn greedy_oracle(
    timestamps: &[usize],
    weight: &dyn Fn(usize, usize) -> f64,
    n_kf: usize,
    total: usize,
) -> GreedyTrace {
    let d_low = total / (2 * n_kf - 1);
    let n = timestamps.len();
    let gap =
        |a: usize, b: usize| (timestamps[a] as i64 - timestamps[b] as i64).unsigned_abs() as usize;
    let mut dead: HashSet<(usize, usize)> = HashSet::new();
    let mut chosen: Vec<usize> = vec![];
    let mut edges = vec![];
    let mut viable_per_iteration = vec![];
    let iterations = n_kf.div_ceil(2);
    for it in 0..iterations {
        let mut viable = HashSet::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if dead.contains(&(i, j)) {
                    continue;
                }
                let mut ok = gap(i, j) > d_low;
                for &c in &chosen {
                    if gap(i, c) <= d_low || gap(j, c) <= d_low {
                        ok = false;
                    }
                }
                if ok {
                    viable.insert((i, j));
                } else {
                    dead.insert((i, j));
                }
            }
        }
        viable_per_iteration.push(viable.clone());
        if viable.is_empty() {
            break;
        }
        let mut sorted: Vec<(usize, usize)> = viable.into_iter().collect();
        // heaviest first; ties by earlier first timestamp then earlier second
        sorted.sort_by(|a, b| {
            weight(b.0, b.1)
                .partial_cmp(&weight(a.0, a.1))
                .unwrap()
                .then(timestamps[a.0].cmp(&timestamps[b.0]))
                .then(timestamps[a.1].cmp(&timestamps[b.1]))
        });
        let (i, j) = sorted[0];
        edges.push((i, j));
        if n_kf % 2 == 1 && it == iterations - 1 {
            let dist = |x: usize| {
                chosen
                    .iter()
                    .map(|&c| gap(x, c))
                    .min()
                    .unwrap_or(usize::MAX)
            };
            chosen.push(if dist(j) > dist(i) { j } else { i });
        } else {
            chosen.push(i);
            chosen.push(j);
        }
    }
    let organic = chosen.len();
    let picks = chosen.iter().map(|&c| timestamps[c]).collect();
    while chosen.len() < n_kf {
        let mut best: Option<(usize, usize)> = None;
        for v in 0..n {
            if chosen.contains(&v) {
                continue;
            }
            let d = chosen
                .iter()
                .map(|&c| gap(v, c))
                .min()
                .unwrap_or(usize::MAX);
            match best {
                Some((_, bd)) if d <= bd => {}
                _ => best = Some((v, d)),
            }
        }
        match best {
            Some((v, _)) => chosen.push(v),
            None => break,
        }
    }
    GreedyTrace {
        edges,
        picks,
        nodes: chosen,
        organic,
        viable_per_iteration,
    }
}
