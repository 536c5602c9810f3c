//! Subcommand bodies, independent of argument parsing.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use keyfuse_core::{
    build_frame_graph, compute_dense_flow, consecutive_disparities, evaluate_accuracy,
    magnitude_image, motion_histogram, predict_class, reduce_redundancy, redundancy_threshold,
    select_keyframes, AccuracyReport, ChosenFrame, DisparitySeries, FlowField, FlowParams, Frame,
    FrameTierOrder, FusionPlan, HistogramConfig, MotionHistogram, PredictionBundle, ReconcileOrder,
    SelectionResult,
};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::frames::{write_gray, FrameSequence};

/// Fewest frames that yield two consecutive disparities.
pub const MIN_FRAMES: usize = 4;

/// Runs `f` on a pool of `jobs` threads.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Flow from every frame to its successor.
pub fn compute_flows(frames: &[Frame], params: &FlowParams) -> Result<Vec<FlowField>> {
    frames
        .par_windows(2)
        .map(|w| compute_dense_flow(&w[0], &w[1], params).map_err(CliError::from))
        .collect()
}

pub fn motion_histograms(
    flows: &[FlowField],
    config: &HistogramConfig,
) -> Result<Vec<MotionHistogram>> {
    flows
        .par_iter()
        .map(|f| motion_histogram(f, config).map_err(CliError::from))
        .collect()
}

/// Everything the two sampling stages produced for one video.
#[derive(Debug, Clone)]
pub struct KeyframeRun {
    pub video_id: String,
    pub total_frames: usize,
    /// One per frame except the last.
    pub histograms: Vec<MotionHistogram>,
    pub series: DisparitySeries,
    /// Frame indices surviving redundancy reduction.
    pub reduced: Vec<usize>,
    /// Set when reduction left fewer than two frames and the graph was built
    /// over all candidates instead.
    pub reduction_bypassed: bool,
    pub selection: SelectionResult,
}

pub fn run_keyframes(seq: &FrameSequence, config: &PipelineConfig) -> Result<KeyframeRun> {
    let total = seq.len();
    if total < MIN_FRAMES {
        return Err(CliError::Data(format!(
            "{}: {total} frames, need at least {MIN_FRAMES}",
            seq.video_id
        )));
    }
    let flows = compute_flows(&seq.frames, &config.flow)?;
    let histograms = motion_histograms(&flows, &config.histogram)?;
    let series = redundancy_threshold(&consecutive_disparities(&histograms)?)?;
    let reduced = reduce_redundancy(&histograms, series.threshold())?;
    info!(
        "{}: {} candidate frames, threshold {:.4}, {} kept after reduction",
        seq.video_id,
        histograms.len(),
        series.threshold(),
        reduced.len()
    );

    let reduction_bypassed = reduced.len() < 2;
    let subset: Vec<MotionHistogram> = if reduction_bypassed {
        warn!(
            "{}: reduction kept a single frame, using all candidates",
            seq.video_id
        );
        histograms.clone()
    } else {
        // owner indices are 1..=N-1, in order
        reduced.iter().map(|&k| histograms[k - 1].clone()).collect()
    };
    let graph = build_frame_graph(&subset)?;
    let selection = select_keyframes(&graph, config.n_kf, total)?;
    if selection.padded() {
        warn!(
            "{}: only {} organic key-frames, padded to {}",
            seq.video_id,
            selection.chosen.iter().filter(|c| !c.padded).count(),
            selection.chosen.len()
        );
    }
    Ok(KeyframeRun {
        video_id: seq.video_id.clone(),
        total_frames: total,
        histograms,
        series,
        reduced,
        reduction_bypassed,
        selection,
    })
}

/// On-disk form of a key-frame selection. `edges` are frame-index pairs in
/// selection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDoc {
    pub video_id: String,
    pub n_kf: usize,
    pub d_low: usize,
    pub chosen: Vec<ChosenFrame>,
    pub edges: Vec<[usize; 2]>,
}

impl SelectionDoc {
    pub fn new(video_id: &str, selection: &SelectionResult) -> Self {
        Self {
            video_id: video_id.to_owned(),
            n_kf: selection.n_kf,
            d_low: selection.d_low,
            chosen: selection.chosen.clone(),
            edges: selection
                .chosen_edge_frames
                .iter()
                .map(|&(a, b)| [a, b])
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: bad selection file: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("selection serializes");
        text.push('\n');
        fs::write(path, text).map_err(CliError::io(path))
    }

    pub fn frame_indices(&self) -> Vec<usize> {
        self.chosen.iter().map(|c| c.frame_index).collect()
    }
}

/// Copies the chosen frames' source files into `dir`.
pub fn copy_keyframes(seq: &FrameSequence, doc: &SelectionDoc, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    doc.chosen
        .iter()
        .map(|c| {
            let src = seq.path(c.frame_index).ok_or_else(|| {
                CliError::Data(format!("frame {} not in sequence", c.frame_index))
            })?;
            let dst = dir.join(src.file_name().expect("frame files have names"));
            fs::copy(src, &dst).map_err(CliError::io(&dst))?;
            Ok(dst)
        })
        .collect()
}

pub fn write_histogram_csv(path: &Path, histograms: &[MotionHistogram]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    if let Some(first) = histograms.first() {
        let mut header = vec!["index".to_owned()];
        header.extend((0..first.mag_bins().len()).map(|i| format!("mag_{i}")));
        header.extend((0..first.ang_bins().len()).map(|i| format!("ang_{i}")));
        w.write_record(&header).map_err(csv_err(path))?;
    }
    for h in histograms {
        let mut row = vec![h.owner_index().to_string()];
        row.extend(h.concatenated().map(|b| b.to_string()));
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

pub fn write_disparity_csv(
    path: &Path,
    histograms: &[MotionHistogram],
    series: &DisparitySeries,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    w.write_record(["k", "td"]).map_err(csv_err(path))?;
    for (h, td) in histograms.iter().zip(series.values()) {
        w.write_record([h.owner_index().to_string(), td.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

/// Name of the flow-magnitude image of key-frame `frame_index`.
pub fn flow_image_name(video_id: &str, frame_index: usize, ext: &str) -> String {
    format!("{video_id}_k{frame_index}_flow.{ext}")
}

/// Writes the flow-magnitude image of each chosen key-frame (flow toward the
/// next frame) into `out_dir`.
pub fn run_flowfeat(
    seq: &FrameSequence,
    doc: &SelectionDoc,
    params: &FlowParams,
    out_dir: &Path,
    ext: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    doc.frame_indices()
        .par_iter()
        .map(|&k| {
            let (Some(prev), Some(next)) = (seq.frame(k), seq.frame(k + 1)) else {
                return Err(CliError::Data(format!(
                    "key-frame {k} has no successor in a {}-frame sequence",
                    seq.len()
                )));
            };
            let flow = compute_dense_flow(prev, next, params)?;
            let path = out_dir.join(flow_image_name(&doc.video_id, k, ext));
            write_gray(&path, &magnitude_image(&flow))?;
            Ok(path)
        })
        .collect()
}

/// Final prediction for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedRecord {
    pub video_id: String,
    pub dist: Vec<f64>,
    pub predicted_class: usize,
    pub modality_order: Vec<String>,
    pub frame_order: Vec<usize>,
    pub frame_tiers: FrameTierOrder,
    pub reconcile: ReconcileOrder,
}

/// Fuses every bundle on the current rayon pool. Output order follows input
/// order.
pub fn fuse_bundles(bundles: &[PredictionBundle], plan: &FusionPlan) -> Result<Vec<FusedRecord>> {
    bundles
        .par_iter()
        .map(|b| {
            let out = plan.fuse(b)?;
            Ok(FusedRecord {
                video_id: b.video_id().to_owned(),
                predicted_class: predict_class(&out.dist),
                dist: out.dist.into_vec(),
                modality_order: out.modality_order,
                frame_order: out.frame_order,
                frame_tiers: plan.frame_tiers,
                reconcile: plan.reconcile,
            })
        })
        .collect()
}

pub fn read_fused(path: &Path) -> Result<Vec<FusedRecord>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(CliError::io(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FusedRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    video_id: String,
    label: usize,
}

/// Reads `video_id,label` rows (with that header).
pub fn read_labels(path: &Path) -> Result<HashMap<String, usize>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["video_id", "label"] {
        return Err(CliError::Data(format!(
            "{}: header must be `video_id,label`",
            path.display()
        )));
    }
    let mut labels = HashMap::new();
    for row in reader.deserialize() {
        let row: LabelRow = row.map_err(csv_err(path))?;
        if labels.insert(row.video_id.clone(), row.label).is_some() {
            return Err(CliError::Data(format!(
                "{}: duplicate label for {}",
                path.display(),
                row.video_id
            )));
        }
    }
    Ok(labels)
}

/// Pairs fused predictions with labels and scores them. Videos without a
/// label are skipped with a warning.
pub fn run_eval(fused: &[FusedRecord], labels: &HashMap<String, usize>) -> Result<AccuracyReport> {
    let mut pairs = Vec::with_capacity(fused.len());
    for f in fused {
        match labels.get(&f.video_id) {
            Some(&truth) => pairs.push((f.predicted_class, truth)),
            None => warn!("{}: no ground-truth label, skipped", f.video_id),
        }
    }
    if pairs.is_empty() {
        return Err(CliError::Data("no fused prediction has a label".into()));
    }
    Ok(evaluate_accuracy(&pairs)?)
}

pub fn write_report(path: &Path, report: &AccuracyReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

/// `class,recall` rows for classes with support, recall as a fraction.
pub fn write_recall_csv(path: &Path, report: &AccuracyReport) -> Result<()> {
    let file = File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    let mut body = String::from("class,recall\n");
    for c in report.per_class.iter().filter(|c| c.support > 0) {
        body.push_str(&format!(
            "{},{}\n",
            c.class,
            c.correct as f64 / c.support as f64
        ));
    }
    w.write_all(body.as_bytes()).map_err(CliError::io(path))?;
    w.flush().map_err(CliError::io(path))
}
