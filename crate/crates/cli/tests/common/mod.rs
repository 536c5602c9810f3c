//! Synthetic inputs shared by the integration and acceptance tests.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use keyfuse::frames::write_gray;
use keyfuse_core::Frame;

pub const SIDE: usize = 32;
const BLOCK: usize = 10;

/// Top-left corner of the block in frame `k` of a video whose motion starts
/// after `static_len` frames. Once moving, the block walks a square one
/// pixel per frame, turning every frame: right, down, left, up.
pub fn block_origin(k: usize, static_len: usize) -> (usize, usize) {
    const STEPS: [(usize, usize); 4] = [(11, 11), (12, 11), (12, 12), (11, 12)];
    if k <= static_len {
        STEPS[0]
    } else {
        STEPS[(k - static_len) % 4]
    }
}

/// Textured block on a flat background.
pub fn block_frame(k: usize, static_len: usize) -> Frame {
    let (bx, by) = block_origin(k, static_len);
    Frame::from_fn(SIDE, SIDE, k, |x, y| {
        if (bx..bx + BLOCK).contains(&x) && (by..by + BLOCK).contains(&y) {
            let (dx, dy) = (x - bx, y - by);
            (140 + 9 * dx + 6 * dy) as u8
        } else {
            60
        }
    })
    .unwrap()
}

/// Writes `total` frames `f0001.pgm...`: the block stays put for the first
/// `static_len` frames, then circles.
pub fn write_static_active_video(dir: &Path, total: usize, static_len: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for k in 1..=total {
        write_gray(
            &dir.join(format!("f{k:04}.pgm")),
            &block_frame(k, static_len),
        )
        .unwrap();
    }
}

pub fn keyfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keyfuse"))
        .args(args)
        .output()
        .expect("keyfuse binary runs")
}

pub fn path_arg(p: &Path) -> &str {
    p.to_str().expect("temp paths are UTF-8")
}

pub fn files_in(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}
