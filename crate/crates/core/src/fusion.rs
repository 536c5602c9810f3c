//! Multi-tier fusion of frame-level and video-level predictions.
//!
//! Two primitives are built on biased conflation: *cross-fusion* folds
//! predictions of different modalities at the same level, *self-fusion*
//! folds the key-frame predictions of one stream into a video-level
//! prediction. [`FusionPlan`] arranges them into tiers.
//!
//! Biased conflation is not associative, so fold order is part of the
//! result: modalities fold in declaration order, key-frames in temporal
//! order. Both orders are reported in [`FusionOutcome`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::conflation::{biased_conflate, ProbDist};
use crate::error::{Error, Result};

/// Frame-level prediction of one key-frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframePred {
    pub frame_index: usize,
    pub dist: ProbDist,
}

/// All predictions one modality produced for a video.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityPreds {
    pub name: String,
    /// Ordered by frame index. May be empty.
    pub frames: Vec<KeyframePred>,
    pub video: Option<ProbDist>,
}

impl ModalityPreds {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            frames: Vec::new(),
            video: None,
        }
    }

    pub fn with_frames(mut self, frames: Vec<KeyframePred>) -> Self {
        self.frames = frames;
        self
    }

    pub fn with_video(mut self, video: ProbDist) -> Self {
        self.video = Some(video);
        self
    }
}

/// Every prediction available for one video, modality order fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBundle {
    video_id: String,
    modalities: Vec<ModalityPreds>,
    label: Option<usize>,
}

impl PredictionBundle {
    /// Checks that all distributions share one class count, modality names
    /// are unique, key-frames are strictly increasing, and every modality
    /// with frame-level predictions covers the same key-frames.
    pub fn new(
        video_id: impl Into<String>,
        modalities: Vec<ModalityPreds>,
        label: Option<usize>,
    ) -> Result<Self> {
        let video_id = video_id.into();
        let bad = |msg: String| Error::InvalidBundle(format!("{video_id}: {msg}"));

        let mut names = BTreeSet::new();
        let mut classes: Option<usize> = None;
        let mut keyframes: Option<Vec<usize>> = None;
        for m in &modalities {
            if !names.insert(m.name.as_str()) {
                return Err(bad(format!("duplicate modality {:?}", m.name)));
            }
            let dists = m.frames.iter().map(|f| &f.dist).chain(m.video.as_ref());
            for d in dists {
                match classes {
                    None => classes = Some(d.classes()),
                    Some(l) if l != d.classes() => {
                        return Err(bad(format!(
                            "modality {:?} mixes {} and {} classes",
                            m.name,
                            l,
                            d.classes()
                        )))
                    }
                    _ => {}
                }
            }
            if m.frames.is_empty() {
                continue;
            }
            let indices: Vec<usize> = m.frames.iter().map(|f| f.frame_index).collect();
            if indices.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad(format!(
                    "key-frames of {:?} are not strictly increasing",
                    m.name
                )));
            }
            match &keyframes {
                None => keyframes = Some(indices),
                Some(k) if *k != indices => {
                    return Err(bad(format!(
                        "modality {:?} covers key-frames {:?}, expected {:?}",
                        m.name, indices, k
                    )))
                }
                _ => {}
            }
        }
        let classes = classes.ok_or_else(|| bad("no predictions".into()))?;
        if let Some(l) = label {
            if l >= classes {
                return Err(bad(format!("label {l} out of range for {classes} classes")));
            }
        }
        Ok(Self {
            video_id,
            modalities,
            label,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn modalities(&self) -> &[ModalityPreds] {
        &self.modalities
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn classes(&self) -> usize {
        self.modalities
            .iter()
            .flat_map(|m| m.frames.iter().map(|f| &f.dist).chain(m.video.as_ref()))
            .map(ProbDist::classes)
            .next()
            .unwrap_or(0)
    }

    /// Key-frame indices shared by the modalities with frame predictions.
    pub fn keyframes(&self) -> Vec<usize> {
        self.modalities
            .iter()
            .find(|m| !m.frames.is_empty())
            .map(|m| m.frames.iter().map(|f| f.frame_index).collect())
            .unwrap_or_default()
    }

    /// Applies `perm` to the classes of every distribution: class `c` of the
    /// input becomes class `perm[c]`.
    pub fn permute_classes(&self, perm: &[usize]) -> Result<Self> {
        let apply = |d: &ProbDist| -> Result<ProbDist> {
            if perm.len() != d.classes() {
                return Err(Error::LengthMismatch {
                    expected: d.classes(),
                    found: perm.len(),
                });
            }
            let mut out = alloc::vec![0.0; perm.len()];
            for (c, &p) in d.probs().iter().enumerate() {
                out[perm[c]] = p;
            }
            ProbDist::new(out)
        };
        let modalities = self
            .modalities
            .iter()
            .map(|m| {
                Ok(ModalityPreds {
                    name: m.name.clone(),
                    frames: m
                        .frames
                        .iter()
                        .map(|f| {
                            Ok(KeyframePred {
                                frame_index: f.frame_index,
                                dist: apply(&f.dist)?,
                            })
                        })
                        .collect::<Result<_>>()?,
                    video: m.video.as_ref().map(apply).transpose()?,
                })
            })
            .collect::<Result<_>>()?;
        Self::new(
            self.video_id.clone(),
            modalities,
            self.label.map(|l| perm[l]),
        )
    }
}

/// How the frame-level tiers are arranged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FrameTierOrder {
    /// Cross-fuse the modalities at each key-frame, then self-fuse the
    /// results over time.
    #[default]
    CrossThenSelf,
    /// Self-fuse each modality's key-frames, then cross-fuse the per-modality
    /// video-level results.
    SelfThenCross,
}

/// Argument order of the final frame-vs-video reconciliation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ReconcileOrder {
    #[default]
    FramesFirst,
    VideoFirst,
}

/// Declarative arrangement of the fusion tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FusionPlan {
    pub frame_tiers: FrameTierOrder,
    pub reconcile: ReconcileOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome {
    pub dist: ProbDist,
    /// Video-level prediction derived from the key-frames, if any.
    pub from_frames: Option<ProbDist>,
    /// Cross-fused video-level predictions, if any.
    pub from_video: Option<ProbDist>,
    /// Biased conflations performed while folding across modalities.
    pub cross_fusions: usize,
    /// Biased conflations performed while folding across key-frames.
    pub self_fusions: usize,
    pub modality_order: Vec<String>,
    pub frame_order: Vec<usize>,
}

fn fold(dists: &[ProbDist], counter: &mut usize, what: &'static str) -> Result<ProbDist> {
    let (first, rest) = dists.split_first().ok_or(Error::EmptyInput(what))?;
    let mut acc = first.clone();
    for d in rest {
        acc = biased_conflate(&acc, d)?;
        *counter += 1;
    }
    Ok(acc)
}

fn check_classes(dists: &[ProbDist]) -> Result<()> {
    if let Some(first) = dists.first() {
        if let Some(d) = dists.iter().find(|d| d.classes() != first.classes()) {
            return Err(Error::LengthMismatch {
                expected: first.classes(),
                found: d.classes(),
            });
        }
    }
    Ok(())
}

/// Left fold of biased conflation over one prediction per modality.
pub fn cross_fuse(dists: &[ProbDist]) -> Result<ProbDist> {
    check_classes(dists)?;
    fold(dists, &mut 0, "cross-fusion inputs")
}

/// Left fold of biased conflation over a stream's key-frame predictions,
/// in temporal order.
pub fn self_fuse(dists: &[ProbDist]) -> Result<ProbDist> {
    check_classes(dists)?;
    fold(dists, &mut 0, "self-fusion inputs")
}

impl FusionPlan {
    pub fn fuse(&self, bundle: &PredictionBundle) -> Result<FusionOutcome> {
        let mut cross = 0;
        let mut selfs = 0;
        let with_frames: Vec<&ModalityPreds> = bundle
            .modalities
            .iter()
            .filter(|m| !m.frames.is_empty())
            .collect();
        let videos: Vec<ProbDist> = bundle
            .modalities
            .iter()
            .filter_map(|m| m.video.clone())
            .collect();

        let from_frames = if with_frames.is_empty() {
            None
        } else {
            let n_kf = with_frames[0].frames.len();
            Some(match self.frame_tiers {
                FrameTierOrder::CrossThenSelf => {
                    let per_frame = (0..n_kf)
                        .map(|p| {
                            let column: Vec<ProbDist> = with_frames
                                .iter()
                                .map(|m| m.frames[p].dist.clone())
                                .collect();
                            fold(&column, &mut cross, "modalities")
                        })
                        .collect::<Result<Vec<_>>>()?;
                    fold(&per_frame, &mut selfs, "key-frames")?
                }
                FrameTierOrder::SelfThenCross => {
                    let per_modality = with_frames
                        .iter()
                        .map(|m| {
                            let stream: Vec<ProbDist> =
                                m.frames.iter().map(|f| f.dist.clone()).collect();
                            fold(&stream, &mut selfs, "key-frames")
                        })
                        .collect::<Result<Vec<_>>>()?;
                    fold(&per_modality, &mut cross, "modalities")?
                }
            })
        };
        let from_video = if videos.is_empty() {
            None
        } else {
            Some(fold(&videos, &mut cross, "modalities")?)
        };

        let dist = match (&from_frames, &from_video) {
            (Some(f), Some(v)) => match self.reconcile {
                ReconcileOrder::FramesFirst => biased_conflate(f, v)?,
                ReconcileOrder::VideoFirst => biased_conflate(v, f)?,
            },
            (Some(f), None) => f.clone(),
            (None, Some(v)) => v.clone(),
            (None, None) => {
                return Err(Error::InvalidBundle(format!(
                    "{}: neither frame-level nor video-level predictions",
                    bundle.video_id
                )))
            }
        };

        Ok(FusionOutcome {
            dist,
            from_frames,
            from_video,
            cross_fusions: cross,
            self_fusions: selfs,
            modality_order: bundle.modalities.iter().map(|m| m.name.clone()).collect(),
            frame_order: bundle.keyframes(),
        })
    }
}

/// Fuses a bundle with the default plan: per-key-frame cross-fusion,
/// self-fusion over key-frames, cross-fusion of the video-level
/// predictions, then biased conflation of the frame-derived result with the
/// video-level one.
pub fn multi_tier_fuse(bundle: &PredictionBundle) -> Result<FusionOutcome> {
    FusionPlan::default().fuse(bundle)
}

/// Most probable class, lowest index on ties.
pub fn predict_class(dist: &ProbDist) -> usize {
    dist.argmax()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassStats {
    pub class: usize,
    pub support: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccuracyReport {
    /// Percentage of correct predictions.
    pub overall_acc: f64,
    /// Mean per-class recall in percent over classes present in the ground truth.
    pub macro_acc: f64,
    pub per_class: Vec<ClassStats>,
}

/// Overall and class-averaged accuracy of `(predicted, truth)` pairs.
pub fn evaluate_accuracy(pairs: &[(usize, usize)]) -> Result<AccuracyReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("prediction/label pairs"));
    }
    let classes = pairs.iter().map(|&(p, t)| p.max(t)).max().unwrap_or(0) + 1;
    let mut per_class: Vec<ClassStats> = (0..classes)
        .map(|class| ClassStats {
            class,
            support: 0,
            correct: 0,
        })
        .collect();
    for &(pred, truth) in pairs {
        per_class[truth].support += 1;
        if pred == truth {
            per_class[truth].correct += 1;
        }
    }
    let correct: usize = per_class.iter().map(|c| c.correct).sum();
    let overall_acc = 100.0 * correct as f64 / pairs.len() as f64;
    let present: Vec<&ClassStats> = per_class.iter().filter(|c| c.support > 0).collect();
    let macro_acc = 100.0
        * present
            .iter()
            .map(|c| c.correct as f64 / c.support as f64)
            .sum::<f64>()
        / present.len() as f64;
    Ok(AccuracyReport {
        overall_acc,
        macro_acc,
        per_class,
    })
}
