use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use wsol_core::formats::{boxes_by_image, read_box_records, write_json, write_per_image_csv};
use wsol_core::heatmap::{otsu_threshold, DEFAULT_OTSU_BINS};
use wsol_core::metrics::{
    boxes_at_tau, evaluate_sweep, image_loc_score, EvalImage, PerImageScore,
};

use super::{join_dataset, load_normalized_maps, mode_name, parse_connectivity, parse_mode,
    uniform_grid};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of localization maps (.wslm / grayscale .png).
    #[arg(long)]
    maps: PathBuf,

    /// Reference boxes JSONL.
    #[arg(long)]
    boxes: PathBuf,

    /// Threshold policy: sweep, otsu, or fixed:<value>.
    #[arg(long, default_value = "sweep")]
    tau: String,

    /// Take the threshold from a JSON file produced by `wsol tau`.
    #[arg(long, conflicts_with = "tau")]
    tau_from: Option<PathBuf>,

    /// Grid size for the sweep policy.
    #[arg(long, default_value_t = 1000)]
    grid: usize,

    /// IoU cutoff for BoxAcc.
    #[arg(long, default_value_t = 0.5)]
    delta: f64,

    /// Box extraction: largest-component or all-components.
    #[arg(long, default_value = "all-components")]
    mode: String,

    /// Mask connectivity: 4 or 8.
    #[arg(long, default_value_t = 8)]
    connectivity: u8,

    /// Optional result JSON file.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Optional per-image CSV (image_id,iou,hit).
    #[arg(long)]
    per_image: Option<PathBuf>,
}

enum Policy {
    Sweep,
    Otsu,
    Fixed(f64),
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    let connectivity = parse_connectivity(args.connectivity)?;
    let mode = parse_mode(&args.mode)?;
    if !(args.delta > 0.0 && args.delta < 1.0) {
        bail!("delta must lie in (0, 1), got {}", args.delta);
    }

    let policy = if let Some(path) = &args.tau_from {
        let text = std::fs::read_to_string(path).map_err(|e| wsol_core::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let tau = value
            .get("tau_star")
            .and_then(|v| v.as_f64())
            .with_context(|| format!("{} has no numeric tau_star field", path.display()))?;
        Policy::Fixed(tau)
    } else if args.tau == "sweep" {
        Policy::Sweep
    } else if args.tau == "otsu" {
        Policy::Otsu
    } else if let Some(v) = args.tau.strip_prefix("fixed:") {
        Policy::Fixed(v.parse::<f64>().context("parsing fixed threshold")?)
    } else {
        bail!("--tau must be sweep, otsu, or fixed:<value>, got `{}`", args.tau);
    };

    let maps = load_normalized_maps(&args.maps)?;
    let references = boxes_by_image(&read_box_records(&args.boxes)?);
    let images = join_dataset(maps, &references)?;
    if images.is_empty() {
        bail!(wsol_core::Error::EmptyDataset);
    }

    let (policy_name, tau_value, per_image) = match policy {
        Policy::Sweep => {
            let grid = uniform_grid(args.grid)?;
            let result = evaluate_sweep(&images, &grid, args.delta, connectivity, mode)?;
            let summary = json!({
                "command": "eval",
                "policy": "sweep",
                "grid": args.grid,
                "delta": args.delta,
                "mode": mode_name(mode),
                "n_images": images.len(),
                "tau_star": result.tau_star,
                "max_box_acc": result.max_box_acc,
                "box_acc": result.max_box_acc,
                "mean_iou": result.mean_iou_at_tau,
            });
            if let Some(path) = &args.out {
                write_json(path, &result)?;
            }
            if let Some(path) = &args.per_image {
                write_per_image_csv(path, &result.per_image)?;
            }
            return Ok(summary);
        }
        Policy::Otsu => {
            let scored = score_at(&images, None, connectivity, mode, args.delta)?;
            ("otsu", None, scored)
        }
        Policy::Fixed(tau) => {
            if !(0.0..=1.0).contains(&tau) {
                bail!("threshold {tau} outside [0, 1]");
            }
            let scored = score_at(&images, Some(tau), connectivity, mode, args.delta)?;
            ("fixed", Some(tau), scored)
        }
    };

    let n = per_image.len() as f64;
    let box_acc = per_image.iter().filter(|s| s.hit).count() as f64 / n;
    let mean_iou = per_image.iter().map(|s| s.iou).sum::<f64>() / n;
    let summary = json!({
        "command": "eval",
        "policy": policy_name,
        "tau": tau_value,
        "delta": args.delta,
        "mode": mode_name(mode),
        "n_images": per_image.len(),
        "box_acc": box_acc,
        "mean_iou": mean_iou,
    });
    if let Some(path) = &args.out {
        write_json(
            path,
            &json!({ "summary": summary, "per_image": per_image }),
        )?;
    }
    if let Some(path) = &args.per_image {
        write_per_image_csv(path, &per_image)?;
    }
    Ok(summary)
}

/// Per-image scores at a fixed threshold, or per-image automatic thresholds
/// when `tau` is `None`.
fn score_at(
    images: &[EvalImage],
    tau: Option<f64>,
    connectivity: wsol_core::Connectivity,
    mode: wsol_core::ExtractionMode,
    delta: f64,
) -> Result<Vec<PerImageScore>> {
    images
        .par_iter()
        .map(|image| {
            let tau = match tau {
                Some(tau) => tau,
                None if image.map.is_degenerate() => {
                    return Ok(PerImageScore {
                        image_id: image.id.clone(),
                        iou: 0.0,
                        hit: false,
                    })
                }
                None => otsu_threshold(&image.map, DEFAULT_OTSU_BINS)?,
            };
            let predicted = boxes_at_tau(&image.map, tau, connectivity, mode)?;
            let iou = image_loc_score(&predicted, &image.boxes)?;
            Ok(PerImageScore {
                image_id: image.id.clone(),
                iou,
                hit: iou >= delta,
            })
        })
        .collect::<wsol_core::Result<Vec<_>>>()
        .map_err(Into::into)
}
