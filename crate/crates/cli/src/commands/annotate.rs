use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Result};
use serde_json::json;

use wsol_core::annotator::{annotate_dataset, AnnotateOptions, ClipLargest, FilterKey, ImageRecord};
use wsol_core::formats::write_pseudo_boxes;
use wsol_core::proposals::{ingest_proposals, ProposalSource};

use super::load_normalized_maps;

#[derive(clap::Args)]
pub struct Args {
    /// Proposal source: ss, rpn, or clip.
    #[arg(long)]
    source: String,

    /// Proposals JSONL (ss/rpn paths).
    #[arg(long)]
    proposals: Option<PathBuf>,

    /// Directory of classifier maps, one per image (ss/rpn paths).
    #[arg(long)]
    cams: Option<PathBuf>,

    /// Directory of prompt-driven maps (clip path).
    #[arg(long)]
    maps: Option<PathBuf>,

    /// Fraction of proposals kept by the score filter.
    #[arg(long, default_value_t = 0.2)]
    fraction: f64,

    /// Filter key: objectness or classifier-score.
    #[arg(long, default_value = "objectness")]
    key: String,

    /// Final-box rule on the clip path: box-area or component-area.
    #[arg(long, default_value = "box-area")]
    largest: String,

    /// Output pseudo-box JSONL.
    #[arg(long)]
    out: PathBuf,

    /// Optional summary JSON file (the summary always goes to stdout).
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    let source = ProposalSource::from_str(&args.source)?;
    let mut opts = AnnotateOptions::new(source);
    opts.fraction = args.fraction;
    opts.key = match args.key.as_str() {
        "objectness" => FilterKey::Objectness,
        "classifier-score" => FilterKey::ClassifierScore,
        other => bail!("filter key must be objectness or classifier-score, got `{other}`"),
    };
    opts.clip_largest = match args.largest.as_str() {
        "box-area" => ClipLargest::BoxArea,
        "component-area" => ClipLargest::ComponentArea,
        other => bail!("largest rule must be box-area or component-area, got `{other}`"),
    };

    let (records, rejected) = match source {
        ProposalSource::Clip => {
            let Some(maps_dir) = &args.maps else {
                bail!("--maps is required for --source clip");
            };
            let maps = load_normalized_maps(maps_dir)?;
            let records = maps
                .into_iter()
                .map(|(image_id, map)| ImageRecord {
                    image_id,
                    clip_map: Some(map),
                    ..Default::default()
                })
                .collect::<Vec<_>>();
            (records, Vec::new())
        }
        ProposalSource::Ss | ProposalSource::Rpn => {
            let Some(proposals_path) = &args.proposals else {
                bail!("--proposals is required for --source {source}");
            };
            let Some(cams_dir) = &args.cams else {
                bail!("--cams is required for --source {source}");
            };
            let cams = load_normalized_maps(cams_dir)?;
            let dims: BTreeMap<String, (u32, u32)> = cams
                .iter()
                .map(|(id, m)| (id.clone(), (m.width() as u32, m.height() as u32)))
                .collect();
            let outcome = ingest_proposals(proposals_path, Some(&dims))?;
            let grouped = outcome.by_image(Some(source));
            let records = cams
                .into_iter()
                .map(|(image_id, cam)| ImageRecord {
                    proposals: grouped.get(&image_id).cloned().unwrap_or_default(),
                    image_id,
                    cam: Some(cam),
                    ..Default::default()
                })
                .collect::<Vec<_>>();
            (records, outcome.rejected)
        }
    };

    let (outcomes, report) = annotate_dataset(&records, &opts);
    write_pseudo_boxes(&args.out, &outcomes)?;

    let summary = json!({
        "command": "annotate",
        "source": source.to_string(),
        "images": records.len(),
        "annotated": report.annotated,
        "failed": report.failed,
        "fallback_count": report.fallback_count,
        "fallback_rate": report.fallback_rate(),
        "errors": report.errors,
        "rejected_rows": rejected,
        "out": args.out,
    });
    if let Some(path) = &args.summary {
        wsol_core::formats::write_json(path, &summary)?;
    }
    Ok(summary)
}
