use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;

use wsol_core::formats::{read_box_records, write_box_records, write_json};
use wsol_core::perturb::{perturb_dataset, NoiseSpec};

#[derive(clap::Args)]
pub struct Args {
    /// Noise level 1..=10 (0 leaves boxes unchanged).
    #[arg(long)]
    level: u8,

    /// Stream seed; identical seeds reproduce identical files.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Input ground-truth boxes JSONL (rows need image dimensions).
    #[arg(long = "in")]
    input: PathBuf,

    /// Output noisy boxes JSONL.
    #[arg(long)]
    out: PathBuf,

    /// Optional summary JSON file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    let spec = NoiseSpec::new(args.level, args.seed)?;
    let records = read_box_records(&args.input)?;
    let (noisy, run_summary) = perturb_dataset(&records, &spec)?;
    write_box_records(&args.out, &noisy)?;
    let summary = json!({
        "command": "perturb",
        "level": run_summary.level,
        "seed": run_summary.seed,
        "boxes": run_summary.boxes,
        "mean_iou_vs_original": run_summary.mean_iou_vs_original,
        "out": args.out,
    });
    if let Some(path) = &args.summary {
        write_json(path, &summary)?;
    }
    Ok(summary)
}
