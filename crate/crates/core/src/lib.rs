//! Motion-driven key-frame sampling and decision-level fusion for event
//! recognition in video.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! core: Horn–Schunck dense optical flow, motion histograms, redundancy
//! reduction, graph-based distinctive key-frame selection, conflation of
//! discrete distributions and the multi-tier fusion engine. File formats,
//! frame decoding and the command line live in the `keyfuse` crate.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

mod error;

pub mod conflation;
pub mod fusion;
pub mod keyframe_select;
pub mod motion_features;
pub mod optical_flow;

pub use conflation::{
    bhattacharyya_distance, biased_conflate, biased_conflate_detailed, conflate, BiasedConflation,
    Nearer, ProbDist, SMOOTHING_EPS,
};
pub use error::{Error, Result};
pub use fusion::{
    cross_fuse, evaluate_accuracy, multi_tier_fuse, predict_class, self_fuse, AccuracyReport,
    ClassStats, FrameTierOrder, FusionOutcome, FusionPlan, KeyframePred, ModalityPreds,
    PredictionBundle, ReconcileOrder,
};
pub use keyframe_select::{
    build_frame_graph, compute_d_low, select_keyframes, ChosenFrame, FrameGraph, SelectionResult,
};
pub use motion_features::{
    consecutive_disparities, motion_histogram, reduce_redundancy, redundancy_threshold,
    temporal_disparity, DisparitySeries, HistogramConfig, MotionHistogram,
};
pub use optical_flow::{compute_dense_flow, magnitude_image, FlowField, FlowParams, Frame};
