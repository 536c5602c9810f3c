//! Command-line surface.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use crate::config::{FusionPlanConfig, PipelineConfig};
use crate::error::{CliError, Result};
use crate::frames::ingest_frame_sequence;
use crate::pipeline::{
    copy_keyframes, fuse_bundles, read_fused, read_labels, run_eval, run_flowfeat, run_keyframes,
    with_jobs, write_disparity_csv, write_histogram_csv, write_recall_csv, write_report,
    SelectionDoc,
};
use crate::records::{group_bundles, parse_prediction_records, write_jsonl};

#[derive(Debug, Parser)]
#[command(
    name = "keyfuse",
    version,
    about = "Motion key-frames and multi-tier prediction fusion"
)]
pub struct Cli {
    /// Pipeline configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads. Defaults to the number of CPUs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select key-frames from a directory of frames.
    Keyframes {
        /// Frame directory; falls back to `paths.input` in the config.
        frames_dir: Option<PathBuf>,
        #[arg(long = "n-kf")]
        n_kf: Option<usize>,
        /// Selection JSON. Defaults to `<paths.output>/<video_id>_keyframes.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to copy the chosen frames. Defaults to `<video_id>_keyframes/`
        /// next to the selection file.
        #[arg(long)]
        copy_to: Option<PathBuf>,
        #[arg(long, conflicts_with = "copy_to")]
        no_copy: bool,
        /// Also write the per-frame motion histograms as CSV.
        #[arg(long)]
        histograms: Option<PathBuf>,
        /// Also write the consecutive temporal disparities as CSV.
        #[arg(long)]
        disparities: Option<PathBuf>,
    },
    /// Write flow-magnitude images for selected key-frames.
    Flowfeat {
        frames_dir: Option<PathBuf>,
        #[arg(long)]
        keyframes: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
        format: ImageFormat,
    },
    /// Fuse per-modality predictions into one prediction per video.
    Fuse {
        #[arg(long)]
        preds: PathBuf,
        /// Fusion plan (TOML). Defaults to the `[fusion]` table of the config.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score fused predictions against ground-truth labels.
    Eval {
        #[arg(long)]
        fused: PathBuf,
        /// CSV with header `video_id,label`.
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// `class,recall` CSV. Defaults to the report path with a `.csv`
        /// extension.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    fn extension(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("keyfuse: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };

    match cli.command {
        Command::Keyframes {
            frames_dir,
            n_kf,
            out,
            copy_to,
            no_copy,
            histograms,
            disparities,
        } => {
            if let Some(n) = n_kf {
                config.n_kf = n;
                config.validate()?;
            }
            let dir = frames_dir_or_config(frames_dir, &config)?;
            let seq = ingest_frame_sequence(&dir)?;
            let run = with_jobs(jobs, || run_keyframes(&seq, &config))??;
            let out = out.unwrap_or_else(|| {
                output_dir(&config).join(format!("{}_keyframes.json", seq.video_id))
            });
            ensure_parent(&out)?;
            let doc = SelectionDoc::new(&seq.video_id, &run.selection);
            doc.save(&out)?;
            info!("{}: key-frames {:?}", seq.video_id, doc.frame_indices());
            if !no_copy {
                let dest = copy_to
                    .unwrap_or_else(|| parent_of(&out).join(format!("{}_keyframes", seq.video_id)));
                copy_keyframes(&seq, &doc, &dest)?;
            }
            if let Some(path) = histograms {
                ensure_parent(&path)?;
                write_histogram_csv(&path, &run.histograms)?;
            }
            if let Some(path) = disparities {
                ensure_parent(&path)?;
                write_disparity_csv(&path, &run.histograms, &run.series)?;
            }
            Ok(())
        }
        Command::Flowfeat {
            frames_dir,
            keyframes,
            out_dir,
            format,
        } => {
            let dir = frames_dir_or_config(frames_dir, &config)?;
            let seq = ingest_frame_sequence(&dir)?;
            let doc = SelectionDoc::load(&keyframes)?;
            if doc.video_id != seq.video_id {
                log::warn!(
                    "selection is for {:?}, frames are from {:?}; names follow the selection",
                    doc.video_id,
                    seq.video_id
                );
            }
            let written = with_jobs(jobs, || {
                run_flowfeat(&seq, &doc, &config.flow, &out_dir, format.extension())
            })??;
            info!(
                "wrote {} flow images to {}",
                written.len(),
                out_dir.display()
            );
            Ok(())
        }
        Command::Fuse { preds, plan, out } => {
            let plan_cfg = match plan {
                Some(path) => FusionPlanConfig::load(&path)?,
                None => config.fusion.clone(),
            };
            let records = parse_prediction_records(&preds)?;
            let bundles = group_bundles(&records, &plan_cfg.modalities)?;
            if bundles.is_empty() {
                return Err(CliError::Data(format!(
                    "{}: no predictions",
                    preds.display()
                )));
            }
            let fused = with_jobs(jobs, || fuse_bundles(&bundles, &plan_cfg.plan()))??;
            ensure_parent(&out)?;
            let file = File::create(&out).map_err(CliError::io(&out))?;
            write_jsonl(BufWriter::new(file), &fused).map_err(CliError::io(&out))?;
            info!("fused {} videos into {}", fused.len(), out.display());
            Ok(())
        }
        Command::Eval {
            fused,
            labels,
            report,
            plot,
        } => {
            let fused = read_fused(&fused)?;
            let labels = read_labels(&labels)?;
            let result = run_eval(&fused, &labels)?;
            ensure_parent(&report)?;
            write_report(&report, &result)?;
            let plot = plot.unwrap_or_else(|| report.with_extension("csv"));
            ensure_parent(&plot)?;
            write_recall_csv(&plot, &result)?;
            info!(
                "overall {:.2}%, macro {:.2}%",
                result.overall_acc, result.macro_acc
            );
            Ok(())
        }
    }
}

fn frames_dir_or_config(arg: Option<PathBuf>, config: &PipelineConfig) -> Result<PathBuf> {
    arg.or_else(|| config.paths.input.clone()).ok_or_else(|| {
        CliError::Config("no frame directory given and `paths.input` is not set".into())
    })
}

fn output_dir(config: &PipelineConfig) -> PathBuf {
    config
        .paths
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("."))
}

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_owned(),
        _ => PathBuf::from("."),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    let parent = parent_of(path);
    std::fs::create_dir_all(&parent).map_err(CliError::io(parent))
}
