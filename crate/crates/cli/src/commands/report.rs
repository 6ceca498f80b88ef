use std::path::PathBuf;

use anyhow::{Context, Result};
use serde_json::json;

use wsol_core::formats::read_run_manifest;
use wsol_core::plot::{histogram, line_chart, LineSeries};
use wsol_core::selection::epoch_diff_histogram;

#[derive(clap::Args)]
pub struct Args {
    /// Run manifest JSON files.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,

    /// Output directory for CSV and SVG files.
    #[arg(long)]
    out_dir: PathBuf,

    /// Criteria to histogram as epoch differences (needs two).
    #[arg(long)]
    hist_a: Option<String>,
    #[arg(long)]
    hist_b: Option<String>,
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let manifests = args
        .runs
        .iter()
        .map(|p| Ok(read_run_manifest(p)?))
        .collect::<Result<Vec<_>>>()?;

    let mut written = Vec::new();

    // Flat CSV of every epoch curve.
    let mut csv = String::from("run_id,split,epoch,classification_acc,source,loc_score\n");
    for manifest in &manifests {
        for (split, series) in [("val", &manifest.val), ("test", &manifest.test)] {
            for record in series {
                if record.loc_scores.is_empty() {
                    csv.push_str(&format!(
                        "{},{},{},{},,\n",
                        manifest.run_id, split, record.epoch, record.classification_acc
                    ));
                }
                for (source, score) in &record.loc_scores {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        manifest.run_id,
                        split,
                        record.epoch,
                        record.classification_acc,
                        source,
                        score
                    ));
                }
            }
        }
    }
    let csv_path = args.out_dir.join("curves.csv");
    std::fs::write(&csv_path, csv).map_err(|e| wsol_core::Error::Io {
        path: csv_path.clone(),
        source: e,
    })?;
    written.push(csv_path);

    // One epoch-curve chart per run (validation split): every localization
    // source plus classification accuracy.
    for manifest in &manifests {
        let mut series = Vec::new();
        let mut sources: Vec<String> = manifest
            .val
            .iter()
            .flat_map(|r| r.loc_scores.keys().cloned())
            .collect();
        sources.sort();
        sources.dedup();
        for source in sources {
            let points: Vec<(f64, f64)> = manifest
                .val
                .iter()
                .filter_map(|r| {
                    r.loc_scores
                        .get(&source)
                        .map(|s| (r.epoch as f64, *s))
                })
                .collect();
            series.push(LineSeries {
                label: format!("loc:{source}"),
                points,
            });
        }
        series.push(LineSeries {
            label: "classification".into(),
            points: manifest
                .val
                .iter()
                .map(|r| (r.epoch as f64, r.classification_acc))
                .collect(),
        });
        let svg = line_chart(&format!("validation curves: {}", manifest.run_id), &series);
        let path = args.out_dir.join(format!("curves_{}.svg", manifest.run_id));
        std::fs::write(&path, svg).map_err(|e| wsol_core::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        written.push(path);
    }

    if let (Some(a), Some(b)) = (&args.hist_a, &args.hist_b) {
        let hist = epoch_diff_histogram(&manifests, a, b)?;
        let bins: Vec<(i64, u64)> = hist.counts.iter().map(|(k, v)| (*k, *v)).collect();
        let svg = histogram(&format!("early-stop epoch difference: {a} - {b}"), &bins);
        let path = args.out_dir.join("epoch_diff.svg");
        std::fs::write(&path, svg).map_err(|e| wsol_core::Error::Io {
            path: path.clone(),
            source: e,
        })?;
        written.push(path);
    }

    Ok(json!({
        "command": "report",
        "runs": manifests.len(),
        "written": written,
    }))
}
