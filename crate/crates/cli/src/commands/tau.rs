use std::path::PathBuf;

use anyhow::Result;
use serde_json::json;

use wsol_core::formats::{boxes_by_image, read_box_records, write_json};
use wsol_core::selection::estimate_tau;

use super::{join_dataset, load_normalized_maps, mode_name, parse_connectivity, parse_mode,
    uniform_grid};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of validation localization maps.
    #[arg(long)]
    maps: PathBuf,

    /// Validation reference boxes JSONL (oracle or pseudo).
    #[arg(long)]
    boxes: PathBuf,

    #[arg(long, default_value_t = 1000)]
    grid: usize,

    #[arg(long, default_value_t = 0.5)]
    delta: f64,

    #[arg(long, default_value = "all-components")]
    mode: String,

    #[arg(long, default_value_t = 8)]
    connectivity: u8,

    /// Output JSON consumed by `wsol eval --tau-from`.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    let connectivity = parse_connectivity(args.connectivity)?;
    let mode = parse_mode(&args.mode)?;
    let grid = uniform_grid(args.grid)?;
    let maps = load_normalized_maps(&args.maps)?;
    let references = boxes_by_image(&read_box_records(&args.boxes)?);
    let images = join_dataset(maps, &references)?;
    let (tau_star, box_acc) = estimate_tau(&images, &grid, args.delta, connectivity, mode)?;
    let summary = json!({
        "command": "tau",
        "tau_star": tau_star,
        "box_acc": box_acc,
        "grid": args.grid,
        "delta": args.delta,
        "mode": mode_name(mode),
        "n_images": images.len(),
    });
    if let Some(path) = &args.out {
        write_json(path, &summary)?;
    }
    Ok(summary)
}
