//! On-disk formats: the WSLM localization-map container, grayscale PNG maps,
//! box-record JSONL, run manifests, and per-image CSV emission.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotator::{AnnotationOutcome, StageTrace};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::heatmap::LocMap;
use crate::metrics::PerImageScore;
use crate::proposals::{ProposalRow, RgbGrid};
use crate::selection::RunManifest;

pub const WSLM_MAGIC: &[u8; 4] = b"WSLM";
pub const WSLM_VERSION: u8 = 0x01;

/// Reads a WSLM file: magic `WSLM`, version byte 0x01, u32-LE height then
/// width, then `height * width` f32-LE values, row-major.
pub fn read_wslm(path: &Path) -> Result<LocMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wslm(&bytes).map_err(|reason| Error::format(path, reason))
}

fn parse_wslm(bytes: &[u8]) -> std::result::Result<LocMap, String> {
    if bytes.len() < 13 {
        return Err("file too short for a WSLM header".into());
    }
    if &bytes[0..4] != WSLM_MAGIC {
        return Err("bad magic (expected WSLM)".into());
    }
    if bytes[4] != WSLM_VERSION {
        return Err(format!("unsupported WSLM version {}", bytes[4]));
    }
    let height = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = 13 + 4 * width * height;
    if bytes.len() != expected {
        return Err(format!(
            "payload length mismatch: expected {expected} bytes for {height}x{width}, got {}",
            bytes.len()
        ));
    }
    let values = bytes[13..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    LocMap::new(width, height, values).map_err(|e| e.to_string())
}

pub fn write_wslm(path: &Path, map: &LocMap) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writer.write_all(WSLM_MAGIC).map_err(io_err)?;
    writer.write_all(&[WSLM_VERSION]).map_err(io_err)?;
    writer
        .write_all(&(map.height() as u32).to_le_bytes())
        .map_err(io_err)?;
    writer
        .write_all(&(map.width() as u32).to_le_bytes())
        .map_err(io_err)?;
    for v in map.values() {
        writer.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    Ok(())
}

/// Loads a map from an 8- or 16-bit grayscale PNG, scaling to `[0, 1]`.
pub fn read_locmap_png(path: &Path) -> Result<LocMap> {
    let dynamic = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let values: Vec<f32> = match dynamic {
        image::DynamicImage::ImageLuma8(img) => {
            img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect()
        }
        image::DynamicImage::ImageLuma16(img) => img
            .into_raw()
            .into_iter()
            .map(|v| v as f32 / 65535.0)
            .collect(),
        other => {
            return Err(Error::format(
                path,
                format!(
                    "expected 8- or 16-bit grayscale PNG, got {:?}",
                    other.color()
                ),
            ))
        }
    };
    LocMap::new(w, h, values)
}

/// Loads a map by extension: `.wslm` or `.png`.
pub fn load_locmap(path: &Path) -> Result<LocMap> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("wslm") => read_wslm(path),
        Some("png") => read_locmap_png(path),
        _ => Err(Error::format(
            path,
            "unsupported map extension (expected .wslm or .png)",
        )),
    }
}

/// Loads every `.wslm`/`.png` map in a directory, keyed by file stem.
pub fn load_locmap_dir(dir: &Path) -> Result<BTreeMap<String, LocMap>> {
    let mut out = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if !matches!(ext, Some("wslm") | Some("png")) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::format(&path, "unreadable file stem"))?
            .to_owned();
        out.insert(stem, load_locmap(&path)?);
    }
    Ok(out)
}

/// Loads an RGB image (PNG or PPM) for the proposal pipeline.
pub fn load_rgb_image(path: &Path) -> Result<RgbGrid> {
    let dynamic = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let rgb = dynamic.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RgbGrid::new(w, h, pixels)
}

/// One reference or pseudo box tied to an image.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRecord {
    pub image_id: String,
    pub bbox: BBox,
    pub image_width: Option<u32>,
    pub image_height: Option<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BoxRow {
    image_id: String,
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_height: Option<u32>,
}

/// Reads a box JSONL file; every row must parse and carry a valid box.
pub fn read_box_records(path: &Path) -> Result<Vec<BoxRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: BoxRow = serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: path.to_owned(),
            line: index + 1,
            reason: format!("malformed row: {e}"),
        })?;
        let bbox = BBox::new(row.x_min, row.y_min, row.x_max, row.y_max).map_err(|e| {
            Error::Schema {
                path: path.to_owned(),
                line: index + 1,
                reason: e.to_string(),
            }
        })?;
        out.push(BoxRecord {
            image_id: row.image_id,
            bbox,
            image_width: row.image_width,
            image_height: row.image_height,
        });
    }
    Ok(out)
}

pub fn write_box_records(path: &Path, records: &[BoxRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    for record in records {
        let row = BoxRow {
            image_id: record.image_id.clone(),
            x_min: record.bbox.x_min(),
            y_min: record.bbox.y_min(),
            x_max: record.bbox.x_max(),
            y_max: record.bbox.y_max(),
            image_width: record.image_width,
            image_height: record.image_height,
        };
        serde_json::to_writer(&mut writer, &row)
            .map_err(|e| Error::format(path, e.to_string()))?;
        writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Groups records per image id.
pub fn boxes_by_image(records: &[BoxRecord]) -> BTreeMap<String, Vec<BBox>> {
    let mut out: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
    for record in records {
        out.entry(record.image_id.clone()).or_default().push(record.bbox);
    }
    out
}

/// One pseudo-annotation output row: the proposals schema plus the stage
/// trace of the refinement that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoBoxRow {
    #[serde(flatten)]
    pub row: ProposalRow,
    pub stage_trace: StageTrace,
}

/// Writes pseudo annotations as JSONL in the proposals schema with a sibling
/// `stage_trace` object per row.
pub fn write_pseudo_boxes(path: &Path, outcomes: &[AnnotationOutcome]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    for outcome in outcomes {
        let row = PseudoBoxRow {
            row: ProposalRow {
                image_id: outcome.image_id.clone(),
                x_min: outcome.bbox.x_min(),
                y_min: outcome.bbox.y_min(),
                x_max: outcome.bbox.x_max(),
                y_max: outcome.bbox.y_max(),
                objectness: 1.0,
                classifier_score: None,
                source: outcome.source,
            },
            stage_trace: outcome.stage_trace,
        };
        serde_json::to_writer(&mut writer, &row)
            .map_err(|e| Error::format(path, e.to_string()))?;
        writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_pseudo_boxes(path: &Path) -> Result<Vec<PseudoBoxRow>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PseudoBoxRow = serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: path.to_owned(),
            line: index + 1,
            reason: format!("malformed row: {e}"),
        })?;
        out.push(row);
    }
    Ok(out)
}

/// Loads and validates a run manifest from JSON.
pub fn read_run_manifest(path: &Path) -> Result<RunManifest> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut contents = String::new();
    std::io::BufReader::new(file)
        .read_to_string(&mut contents)
        .map_err(|e| Error::io(path, e))?;
    let manifest: RunManifest =
        serde_json::from_str(&contents).map_err(|e| Error::format(path, e.to_string()))?;
    manifest.validate().map_err(|reason| Error::InvalidManifest {
        manifest: path.display().to_string(),
        reason,
    })?;
    Ok(manifest)
}

pub fn write_run_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Writes per-image scores as `image_id,iou,hit` CSV.
pub fn write_per_image_csv(path: &Path, scores: &[PerImageScore]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(["image_id", "iou", "hit"])
        .map_err(|e| Error::format(path, e.to_string()))?;
    for score in scores {
        writer
            .write_record([
                score.image_id.as_str(),
                &score.iou.to_string(),
                if score.hit { "1" } else { "0" },
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Generic JSON emission used by summaries and reports.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}
