pub mod annotate;
pub mod eval;
pub mod perturb;
pub mod propose;
pub mod report;
pub mod select;
pub mod tau;
pub mod validate;

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use wsol_core::heatmap::{normalize, NormalizedLocMap, ThresholdGrid};
use wsol_core::geometry::{BBox, Connectivity, ExtractionMode};
use wsol_core::metrics::EvalImage;

/// Loads a map directory and normalizes every map, keyed by file stem.
pub fn load_normalized_maps(dir: &Path) -> Result<BTreeMap<String, NormalizedLocMap>> {
    let maps = wsol_core::formats::load_locmap_dir(dir)
        .with_context(|| format!("loading maps from {}", dir.display()))?;
    Ok(maps
        .into_iter()
        .map(|(id, map)| (id, normalize(&map)))
        .collect())
}

/// Joins maps with reference boxes into eval images; every map must have at
/// least one box.
pub fn join_dataset(
    maps: BTreeMap<String, NormalizedLocMap>,
    boxes: &BTreeMap<String, Vec<BBox>>,
) -> Result<Vec<EvalImage>> {
    maps.into_iter()
        .map(|(id, map)| {
            let boxes = boxes
                .get(&id)
                .filter(|b| !b.is_empty())
                .ok_or_else(|| wsol_core::Error::MissingAnnotation {
                    image_id: id.clone(),
                    annotation: "reference boxes".into(),
                })?;
            Ok(EvalImage {
                id,
                map,
                boxes: boxes.clone(),
            })
        })
        .collect()
}

pub fn parse_connectivity(value: u8) -> Result<Connectivity> {
    match value {
        4 => Ok(Connectivity::Four),
        8 => Ok(Connectivity::Eight),
        other => anyhow::bail!("connectivity must be 4 or 8, got {other}"),
    }
}

pub fn parse_mode(value: &str) -> Result<ExtractionMode> {
    match value {
        "largest-component" => Ok(ExtractionMode::LargestComponent),
        "all-components" => Ok(ExtractionMode::AllComponents),
        other => anyhow::bail!(
            "extraction mode must be largest-component or all-components, got `{other}`"
        ),
    }
}

pub fn uniform_grid(count: usize) -> Result<ThresholdGrid> {
    Ok(ThresholdGrid::uniform(count)?)
}

pub fn mode_name(mode: ExtractionMode) -> &'static str {
    match mode {
        ExtractionMode::LargestComponent => "largest-component",
        ExtractionMode::AllComponents => "all-components",
    }
}
