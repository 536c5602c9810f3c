//! Frame directories in, grayscale feature images out.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};
use keyfuse_core::Frame;

use crate::error::{CliError, Result};

const FRAME_EXTENSIONS: [&str; 3] = ["png", "pgm", "ppm"];

/// Frames of one video in timestamp order.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub video_id: String,
    pub frames: Vec<Frame>,
    pub paths: Vec<PathBuf>,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Frame with timestamp `index` (1-based).
    pub fn frame(&self, index: usize) -> Option<&Frame> {
        index.checked_sub(1).and_then(|i| self.frames.get(i))
    }

    pub fn path(&self, index: usize) -> Option<&Path> {
        index
            .checked_sub(1)
            .and_then(|i| self.paths.get(i))
            .map(PathBuf::as_path)
    }
}

/// ITU-R 601 luma, rounded to the nearest level.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)).round() as u8
}

fn has_frame_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| FRAME_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Sorted image files of a frame directory. Names are compared as plain
/// strings, so frame numbers must be zero-padded.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .map(|entry| entry.map(|e| e.path()).map_err(CliError::io(dir)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && has_frame_extension(p))
        .collect();
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Decodes one 8-bit grayscale or RGB(A) image into luma values.
pub fn read_gray(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let img = ImageReader::open(path)
        .map_err(CliError::io(path))?
        .with_guessed_format()
        .map_err(CliError::io(path))?
        .decode()
        .map_err(|source| CliError::Image {
            path: path.to_owned(),
            source,
        })?;
    let (w, h) = (img.width(), img.height());
    let pixels = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageRgb8(buf) => {
            buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
        DynamicImage::ImageRgba8(buf) => {
            buf.pixels().map(|p| luma(p.0[0], p.0[1], p.0[2])).collect()
        }
        other => {
            return Err(CliError::Data(format!(
                "{}: unsupported pixel format {:?} (need 8-bit gray or RGB)",
                path.display(),
                other.color()
            )))
        }
    };
    Ok((w, h, pixels))
}

/// Loads every frame of `dir`, assigning indices `1..=N` in filename order.
/// The directory name becomes the video id.
pub fn ingest_frame_sequence(dir: &Path) -> Result<FrameSequence> {
    let paths = list_frame_files(dir)?;
    if paths.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no PNG/PGM/PPM frames found",
            dir.display()
        )));
    }
    let mut frames = Vec::with_capacity(paths.len());
    let mut dims: Option<(u32, u32)> = None;
    for (i, path) in paths.iter().enumerate() {
        let (w, h, pixels) = read_gray(path)?;
        match dims {
            None => dims = Some((w, h)),
            Some((w0, h0)) if (w0, h0) != (w, h) => {
                return Err(CliError::Data(format!(
                    "{}: frame is {w}x{h}, expected {w0}x{h0}",
                    path.display()
                )))
            }
            _ => {}
        }
        let frame = Frame::new(w as usize, h as usize, i + 1, pixels)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        frames.push(frame);
    }
    Ok(FrameSequence {
        video_id: video_id_of(dir),
        frames,
        paths,
    })
}

pub fn video_id_of(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .as_deref()
        .unwrap_or(dir)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "video".to_owned())
}

/// Binary PGM (P5, maxval 255).
pub fn encode_pgm(frame: &Frame) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(frame.pixels());
    out
}

/// Writes a grayscale image as PGM or PNG depending on the extension.
pub fn write_gray(path: &Path, frame: &Frame) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => fs::write(path, encode_pgm(frame)).map_err(CliError::io(path)),
        Some("png") => {
            let buf = image::GrayImage::from_raw(
                frame.width() as u32,
                frame.height() as u32,
                frame.pixels().to_vec(),
            )
            .expect("frame buffer matches its dimensions");
            buf.save_with_format(path, ImageFormat::Png)
                .map_err(|source| CliError::Image {
                    path: path.to_owned(),
                    source,
                })
        }
        _ => Err(CliError::Config(format!(
            "{}: output must end in .pgm or .png",
            path.display()
        ))),
    }
}
