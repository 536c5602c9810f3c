//! JSON-Lines prediction interchange.
//!
//! One record per line:
//!
//! ```json
//! {"video_id":"v1","modality":"spatial","level":"frame","frame_index":12,"dist":[0.6,0.4]}
//! {"video_id":"v1","modality":"spatial","level":"video","dist":[0.55,0.45]}
//! ```
//!
//! Unknown fields (for example `"source":"pooled"`) are ignored.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use keyfuse_core::{KeyframePred, ModalityPreds, PredictionBundle, ProbDist};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Accepted deviation of a record's mass from one before renormalizing.
pub const RECORD_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Frame,
    Video,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub modality: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<usize>,
    pub dist: Vec<f64>,
}

impl PredictionRecord {
    /// Checks the record and rescales `dist` to unit mass when it is off by
    /// more than rounding noise but within [`RECORD_SUM_TOLERANCE`].
    pub fn validate(mut self) -> std::result::Result<Self, String> {
        match (self.level, self.frame_index) {
            (Level::Frame, None) => return Err("frame-level record without frame_index".into()),
            (Level::Frame, Some(0)) => return Err("frame_index must be >= 1".into()),
            (Level::Video, Some(_)) => return Err("video-level record with frame_index".into()),
            _ => {}
        }
        if self.dist.len() < 2 {
            return Err(format!(
                "dist needs at least 2 classes, got {}",
                self.dist.len()
            ));
        }
        if self.dist.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err("dist entries must be finite and non-negative".into());
        }
        let total: f64 = self.dist.iter().sum();
        if (total - 1.0).abs() > RECORD_SUM_TOLERANCE {
            return Err(format!(
                "dist sums to {total}, outside 1 +/- {RECORD_SUM_TOLERANCE}"
            ));
        }
        // exact-enough sums are left untouched so parse/serialize round-trips
        if (total - 1.0).abs() > 1e-12 {
            self.dist.iter_mut().for_each(|p| *p /= total);
        }
        Ok(self)
    }

    pub fn prob_dist(&self) -> Result<ProbDist> {
        Ok(ProbDist::new(self.dist.clone())?)
    }
}

/// Parses and validates JSON-Lines records. Blank lines are skipped; errors
/// carry `origin:line`.
pub fn parse_prediction_lines(reader: impl BufRead, origin: &str) -> Result<Vec<PredictionRecord>> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| CliError::Data(format!("{origin}:{lineno}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{origin}:{lineno}: malformed record: {e}")))?;
        let record = record
            .validate()
            .map_err(|e| CliError::Data(format!("{origin}:{lineno}: {e}")))?;
        records.push(record);
    }
    Ok(records)
}

pub fn parse_prediction_records(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).map_err(CliError::io(path))?;
    parse_prediction_lines(BufReader::new(file), &path.display().to_string())
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, items: &[T]) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

/// Groups records into one bundle per video, ordered by video id.
///
/// `modality_order` fixes the fold order; when empty, modalities fold in
/// order of first appearance. A modality outside a non-empty order is an
/// error.
pub fn group_bundles(
    records: &[PredictionRecord],
    modality_order: &[String],
) -> Result<Vec<PredictionBundle>> {
    let mut by_video: BTreeMap<&str, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_video.entry(&r.video_id).or_default().push(r);
    }

    let mut bundles = Vec::with_capacity(by_video.len());
    for (video_id, recs) in by_video {
        let mut order: Vec<String> = modality_order.to_vec();
        for r in &recs {
            if !order.contains(&r.modality) {
                if !modality_order.is_empty() {
                    return Err(CliError::Data(format!(
                        "{video_id}: modality {:?} is not listed in the fusion plan",
                        r.modality
                    )));
                }
                order.push(r.modality.clone());
            }
        }

        let mut modalities = Vec::new();
        for name in &order {
            let mut m = ModalityPreds::new(name.clone());
            let mut frames: Vec<KeyframePred> = Vec::new();
            for r in recs.iter().filter(|r| &r.modality == name) {
                let dist = r.prob_dist()?;
                match (r.level, r.frame_index) {
                    (Level::Video, _) => {
                        if m.video.replace(dist).is_some() {
                            return Err(CliError::Data(format!(
                                "{video_id}: duplicate video-level record for {name:?}"
                            )));
                        }
                    }
                    (Level::Frame, Some(frame_index)) => {
                        frames.push(KeyframePred { frame_index, dist })
                    }
                    (Level::Frame, None) => unreachable!("validated records carry frame_index"),
                }
            }
            frames.sort_by_key(|f| f.frame_index);
            if let Some(w) = frames
                .windows(2)
                .find(|w| w[0].frame_index == w[1].frame_index)
            {
                return Err(CliError::Data(format!(
                    "{video_id}: duplicate frame-level record for {name:?} at frame {}",
                    w[0].frame_index
                )));
            }
            if frames.is_empty() && m.video.is_none() {
                continue;
            }
            m.frames = frames;
            modalities.push(m);
        }
        let bundle = PredictionBundle::new(video_id, modalities, None)
            .map_err(|e| CliError::Data(e.to_string()))?;
        bundles.push(bundle);
    }
    Ok(bundles)
}
