use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde_json::json;

use wsol_core::formats::{boxes_by_image, read_box_records, read_run_manifest, write_json};
use wsol_core::proposals::ProposalSource;
use wsol_core::selection::{
    early_stop, epoch_diff_histogram, protocol_matrix, protocol_matrix_from_curves, select_config,
    Criterion, MatrixEpoch, MatrixRun, ProtocolMatrix, RunManifest, Split, ValAnnotations,
};

use super::{load_normalized_maps, parse_connectivity, parse_mode, uniform_grid};

#[derive(clap::Args)]
pub struct Args {
    #[command(subcommand)]
    action: Action,
}

#[derive(clap::Subcommand)]
enum Action {
    /// Early-stopping epoch of one run on the validation series.
    EarlyStop {
        #[arg(long)]
        run: PathBuf,
        /// classification or loc:<source>.
        #[arg(long)]
        criterion: String,
    },
    /// Best hyperparameter configuration across runs.
    Config {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        criterion: String,
        #[arg(long, default_value = "val")]
        split: String,
    },
    /// Histogram of early-stopping epoch differences between two criteria.
    EpochDiff {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        source_a: String,
        #[arg(long)]
        source_b: String,
        /// Optional SVG rendering of the histogram.
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Selection-protocol matrix over a run suite.
    Matrix {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Test-split oracle boxes (required for map-archive manifests).
        #[arg(long)]
        test_oracle: Option<PathBuf>,
        /// Validation oracle boxes.
        #[arg(long)]
        val_oracle: Option<PathBuf>,
        /// Validation pseudo boxes, repeatable: <source>=<path>.
        #[arg(long, value_parser = parse_source_path)]
        val_pseudo: Vec<(String, PathBuf)>,
        /// Sources for the curves-only matrix (manifests without map refs).
        #[arg(long, value_delimiter = ',')]
        sources: Vec<String>,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value = "all-components")]
        mode: String,
        #[arg(long, default_value_t = 8)]
        connectivity: u8,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
}

fn parse_source_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((source, path)) if !source.is_empty() && !path.is_empty() => {
            Ok((source.to_owned(), PathBuf::from(path)))
        }
        _ => Err("expected <source>=<path>".into()),
    }
}

pub fn run(args: Args) -> Result<serde_json::Value> {
    match args.action {
        Action::EarlyStop { run, criterion } => {
            let manifest = read_run_manifest(&run)?;
            let criterion = Criterion::from_str(&criterion)?;
            let epoch = early_stop(&manifest, &criterion)?;
            Ok(json!({
                "command": "select.early-stop",
                "run_id": manifest.run_id,
                "criterion": criterion.to_string(),
                "epoch": epoch,
            }))
        }
        Action::Config {
            runs,
            criterion,
            split,
        } => {
            let manifests = load_runs(&runs)?;
            let criterion = Criterion::from_str(&criterion)?;
            let split = match split.as_str() {
                "val" => Split::Val,
                "test" => Split::Test,
                other => bail!("split must be val or test, got `{other}`"),
            };
            let (run_id, epoch, value) = select_config(&manifests, &criterion, split)?;
            Ok(json!({
                "command": "select.config",
                "criterion": criterion.to_string(),
                "split": split,
                "run_id": run_id,
                "epoch": epoch,
                "value": value,
            }))
        }
        Action::EpochDiff {
            runs,
            source_a,
            source_b,
            svg,
            out,
        } => {
            let manifests = load_runs(&runs)?;
            let hist = epoch_diff_histogram(&manifests, &source_a, &source_b)?;
            if let Some(path) = &svg {
                let bins: Vec<(i64, u64)> = hist.counts.iter().map(|(k, v)| (*k, *v)).collect();
                let svg_text = wsol_core::plot::histogram(
                    &format!("early-stop epoch difference: {source_a} - {source_b}"),
                    &bins,
                );
                std::fs::write(path, svg_text).map_err(|e| wsol_core::Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
            let summary = json!({
                "command": "select.epoch-diff",
                "source_a": source_a,
                "source_b": source_b,
                "mode": hist.mode,
                "mean": hist.mean,
                "counts": hist.counts,
                "runs": manifests.len(),
            });
            if let Some(path) = &out {
                write_json(path, &summary)?;
            }
            Ok(summary)
        }
        Action::Matrix {
            runs,
            test_oracle,
            val_oracle,
            val_pseudo,
            sources,
            grid,
            delta,
            mode,
            connectivity,
            out_json,
            out_csv,
        } => {
            let manifests_with_paths: Vec<(PathBuf, RunManifest)> = runs
                .iter()
                .map(|p| Ok((p.clone(), read_run_manifest(p)?)))
                .collect::<Result<_>>()?;
            let has_maps = manifests_with_paths
                .iter()
                .all(|(_, m)| m.val.iter().all(|r| r.maps.is_some()));

            let matrix = if has_maps {
                let Some(test_oracle_path) = &test_oracle else {
                    bail!("--test-oracle is required for map-archive manifests");
                };
                let test_boxes = boxes_by_image(&read_box_records(test_oracle_path)?);
                let mut val_annotations = ValAnnotations::default();
                if let Some(path) = &val_oracle {
                    val_annotations.oracle = Some(boxes_by_image(&read_box_records(path)?));
                }
                for (source, path) in &val_pseudo {
                    let source = ProposalSource::from_str(source)?;
                    val_annotations
                        .pseudo
                        .insert(source, boxes_by_image(&read_box_records(path)?));
                }
                let matrix_runs: Vec<MatrixRun> = manifests_with_paths
                    .iter()
                    .map(|(path, manifest)| load_matrix_run(path, manifest))
                    .collect::<Result<_>>()?;
                protocol_matrix(
                    &matrix_runs,
                    &val_annotations,
                    &test_boxes,
                    &uniform_grid(grid)?,
                    delta,
                    parse_connectivity(connectivity)?,
                    parse_mode(&mode)?,
                )?
            } else {
                let manifests: Vec<RunManifest> =
                    manifests_with_paths.into_iter().map(|(_, m)| m).collect();
                let sources = if sources.is_empty() {
                    vec!["oracle".to_string()]
                } else {
                    sources
                };
                protocol_matrix_from_curves(&manifests, &sources, delta)?
            };

            if let Some(path) = &out_json {
                write_json(path, &matrix)?;
            }
            if let Some(path) = &out_csv {
                write_matrix_csv(path, &matrix)?;
            }
            Ok(json!({
                "command": "select.matrix",
                "delta": matrix.delta,
                "cells": matrix.cells,
            }))
        }
    }
}

fn load_runs(paths: &[PathBuf]) -> Result<Vec<RunManifest>> {
    paths.iter().map(|p| Ok(read_run_manifest(p)?)).collect()
}

/// Resolves a manifest's per-epoch map directories (relative to the manifest
/// file) into in-memory matrix inputs.
fn load_matrix_run(manifest_path: &Path, manifest: &RunManifest) -> Result<MatrixRun> {
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut epochs = Vec::new();
    for (val_record, test_record) in manifest.val.iter().zip(&manifest.test) {
        let load = |record: &wsol_core::selection::EpochRecord| -> Result<Vec<(String, wsol_core::NormalizedLocMap)>> {
            let dir = record.maps.as_ref().with_context(|| {
                format!(
                    "run {} epoch {} has no map archive",
                    manifest.run_id, record.epoch
                )
            })?;
            let dir = if dir.is_absolute() {
                dir.clone()
            } else {
                base.join(dir)
            };
            Ok(load_normalized_maps(&dir)?.into_iter().collect())
        };
        epochs.push(MatrixEpoch {
            epoch: val_record.epoch,
            classification_val: val_record.classification_acc,
            classification_test: test_record.classification_acc,
            val_maps: load(val_record)?,
            test_maps: load(test_record)?,
        });
    }
    Ok(MatrixRun {
        run_id: manifest.run_id.clone(),
        epochs,
    })
}

fn write_matrix_csv(path: &Path, matrix: &ProtocolMatrix) -> Result<()> {
    // Rows are (config, tau) axis pairs; columns are annotation sources.
    let mut sources: Vec<String> = matrix.cells.iter().map(|c| c.source.clone()).collect();
    sources.sort();
    sources.dedup();
    let mut axes: Vec<(String, String)> = matrix
        .cells
        .iter()
        .map(|c| {
            (
                serde_json::to_value(c.config_axis).unwrap().as_str().unwrap().to_owned(),
                serde_json::to_value(c.tau_axis).unwrap().as_str().unwrap().to_owned(),
            )
        })
        .collect();
    axes.sort();
    axes.dedup();

    let mut table: BTreeMap<(String, String, String), f64> = BTreeMap::new();
    for cell in &matrix.cells {
        if let Some(value) = cell.value {
            let config = serde_json::to_value(cell.config_axis)
                .unwrap()
                .as_str()
                .unwrap()
                .to_owned();
            let tau = serde_json::to_value(cell.tau_axis)
                .unwrap()
                .as_str()
                .unwrap()
                .to_owned();
            table.insert((config, tau, cell.source.clone()), value);
        }
    }

    let mut out = String::from("select");
    for source in &sources {
        out.push(',');
        out.push_str(source);
    }
    out.push('\n');
    for (config, tau) in &axes {
        out.push_str(&format!("{config}-{tau}"));
        for source in &sources {
            out.push(',');
            if let Some(v) = table.get(&(config.clone(), tau.clone(), source.clone())) {
                out.push_str(&format!("{v:.6}"));
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| wsol_core::Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(())
}
