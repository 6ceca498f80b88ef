use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::json;

use wsol_core::formats::load_rgb_image;
use wsol_core::proposals::{
    felzenszwalb_segment, hierarchical_group, write_proposals, ProposalRow, ProposalSource,
    SimilarityWeights,
};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of PNG/PPM images (file stem becomes the image id).
    #[arg(long)]
    images: PathBuf,

    /// Output proposals JSONL.
    #[arg(long)]
    out: PathBuf,

    /// Segmentation scale parameter.
    #[arg(long, default_value_t = 300.0)]
    k: f64,

    /// Smallest surviving segmentation region in pixels.
    #[arg(long, default_value_t = 100)]
    min_size: usize,

    /// Seed for the tie-free objectness perturbation of initial regions.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Similarity weights color,texture,size,fill.
    #[arg(long, default_value = "1,1,1,1", value_parser = parse_weights)]
    weights: SimilarityWeights,
}

fn parse_weights(s: &str) -> Result<SimilarityWeights, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if parts.len() != 4 {
        return Err("expected four comma-separated weights".into());
    }
    Ok(SimilarityWeights {
        color: parts[0],
        texture: parts[1],
        size: parts[2],
        fill: parts[3],
    })
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    let entries = std::fs::read_dir(&args.images)
        .map_err(|e| wsol_core::Error::Io {
            path: args.images.clone(),
            source: e,
        })?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| wsol_core::Error::Io {
            path: args.images.clone(),
            source: e,
        })?;
    let mut image_paths: Vec<PathBuf> = entries
        .into_iter()
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("ppm")
            )
        })
        .collect();
    image_paths.sort();

    let per_image: Vec<(String, Vec<ProposalRow>)> = image_paths
        .par_iter()
        .map(|path| -> Result<(String, Vec<ProposalRow>)> {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .context("unreadable image file name")?
                .to_owned();
            let image = load_rgb_image(path)?;
            let seg = felzenszwalb_segment(&image, args.k, args.min_size)?;
            // Per-image seed derived from the image id keeps output stable
            // across thread counts and input orderings.
            let proposals = hierarchical_group(&seg, &args.weights, image_seed(args.seed, &id));
            let rows = proposals
                .iter()
                .map(|p| ProposalRow::from_proposal(&id, p, ProposalSource::Ss))
                .collect();
            Ok((id, rows))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut images = 0usize;
    for (_, mut image_rows) in per_image {
        images += 1;
        rows.append(&mut image_rows);
    }
    write_proposals(&args.out, &rows)?;

    Ok(json!({
        "command": "propose",
        "images": images,
        "proposals": rows.len(),
        "k": args.k,
        "min_size": args.min_size,
        "seed": args.seed,
        "out": args.out,
    }))
}

fn image_seed(seed: u64, image_id: &str) -> u64 {
    // FNV-1a over the id, mixed with the run seed.
    let mut hash = 0xcbf29ce484222325u64;
    for &b in image_id.as_bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash ^ seed
}
