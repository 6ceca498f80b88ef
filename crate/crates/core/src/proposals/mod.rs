//! Region-proposal acquisition: a from-scratch Selective Search path for
//! unsupervised proposals plus ingestion of externally produced proposal
//! files (RPN / CLIP pipelines).

mod felzenszwalb;
mod grouping;

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp_rect, BBox};

pub use felzenszwalb::felzenszwalb_segment;
pub use grouping::{hierarchical_group, hierarchical_group_trace, MergeEvent};

/// Where a proposal or pseudo-annotation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalSource {
    Ss,
    Rpn,
    Clip,
}

impl fmt::Display for ProposalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProposalSource::Ss => write!(f, "ss"),
            ProposalSource::Rpn => write!(f, "rpn"),
            ProposalSource::Clip => write!(f, "clip"),
        }
    }
}

impl FromStr for ProposalSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ss" => Ok(ProposalSource::Ss),
            "rpn" => Ok(ProposalSource::Rpn),
            "clip" => Ok(ProposalSource::Clip),
            other => Err(Error::InvalidParameter {
                name: "source",
                reason: format!("unknown proposal source `{other}` (expected ss|rpn|clip)"),
            }),
        }
    }
}

/// Candidate box plus the scores used to rank it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredProposal {
    pub bbox: BBox,
    pub objectness: f64,
    pub classifier_score: Option<f64>,
}

/// 8-bit RGB pixel grid, row-major.
#[derive(Debug, Clone)]
pub struct RgbGrid {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::EmptyImage);
        }
        Ok(RgbGrid {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        RgbGrid::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

pub const COLOR_BINS_PER_CHANNEL: usize = 25;
pub const TEXTURE_ORIENTATIONS: usize = 8;
pub const TEXTURE_MAGNITUDE_BINS: usize = 10;

const COLOR_HIST_LEN: usize = 3 * COLOR_BINS_PER_CHANNEL;
const TEXTURE_HIST_LEN: usize = 3 * TEXTURE_ORIENTATIONS * TEXTURE_MAGNITUDE_BINS;
// Central differences of u8 channels stay within +-127.5 per axis.
const TEXTURE_MAGNITUDE_MAX: f64 = 180.32;

/// Per-region description used by the similarity function. Histograms are
/// L1-normalized so the self-intersection of a histogram is exactly 1.
#[derive(Debug, Clone)]
pub struct RegionFeatures {
    pub area: usize,
    pub bbox: BBox,
    pub color_hist: Vec<f64>,
    pub texture_hist: Vec<f64>,
}

impl RegionFeatures {
    /// Area-weighted combination of two regions' features.
    pub fn merged(&self, other: &RegionFeatures) -> RegionFeatures {
        let total = (self.area + other.area) as f64;
        let blend = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x * self.area as f64 + y * other.area as f64) / total)
                .collect()
        };
        RegionFeatures {
            area: self.area + other.area,
            bbox: self.bbox.enclosing(&other.bbox),
            color_hist: blend(&self.color_hist, &other.color_hist),
            texture_hist: blend(&self.texture_hist, &other.texture_hist),
        }
    }
}

/// A dense labeling of an image into regions with per-region features.
#[derive(Debug, Clone)]
pub struct Segmentation {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    regions: Vec<RegionFeatures>,
}

impl Segmentation {
    /// Builds a segmentation from a row-major grid of region ids that must be
    /// dense in `1..=region_count`.
    pub fn from_labels(image: &RgbGrid, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != image.width * image.height {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: "label grid does not match image dimensions".into(),
            });
        }
        let max_label = *labels.iter().max().unwrap_or(&0);
        if max_label == 0 {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: "segmentation needs at least one region".into(),
            });
        }
        let mut seen = vec![false; max_label as usize];
        for &label in &labels {
            if label == 0 {
                return Err(Error::InvalidParameter {
                    name: "labels",
                    reason: "segmentations have no background label".into(),
                });
            }
            seen[(label - 1) as usize] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidParameter {
                name: "labels",
                reason: "region ids must be dense in 1..=region_count".into(),
            });
        }
        let regions = build_region_features(image, &labels, max_label as usize);
        Ok(Segmentation {
            width: image.width,
            height: image.height,
            labels,
            regions,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Features of region `label` (1-based).
    pub fn region(&self, label: u32) -> &RegionFeatures {
        &self.regions[(label - 1) as usize]
    }

    pub fn regions(&self) -> &[RegionFeatures] {
        &self.regions
    }

    /// Pairs of adjacent region ids (8-neighbor pixel adjacency), each listed
    /// once with the smaller id first.
    pub fn adjacency(&self) -> Vec<(u32, u32)> {
        let mut pairs = std::collections::BTreeSet::new();
        let (w, h) = (self.width, self.height);
        let mut note = |a: u32, b: u32| {
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        };
        for y in 0..h {
            for x in 0..w {
                let here = self.label(x, y);
                if x + 1 < w {
                    note(here, self.label(x + 1, y));
                }
                if y + 1 < h {
                    note(here, self.label(x, y + 1));
                    if x + 1 < w {
                        note(here, self.label(x + 1, y + 1));
                    }
                    if x > 0 {
                        note(here, self.label(x - 1, y + 1));
                    }
                }
            }
        }
        pairs.into_iter().collect()
    }
}

fn texture_gradient(image: &RgbGrid, x: usize, y: usize, channel: usize) -> (f64, f64) {
    let sample = |x: isize, y: isize| -> f64 {
        let cx = x.clamp(0, image.width as isize - 1) as usize;
        let cy = y.clamp(0, image.height as isize - 1) as usize;
        image.get(cx, cy)[channel] as f64
    };
    let (x, y) = (x as isize, y as isize);
    let dx = (sample(x + 1, y) - sample(x - 1, y)) * 0.5;
    let dy = (sample(x, y + 1) - sample(x, y - 1)) * 0.5;
    (dx, dy)
}

fn build_region_features(image: &RgbGrid, labels: &[u32], count: usize) -> Vec<RegionFeatures> {
    let mut areas = vec![0usize; count];
    let mut extents = vec![(usize::MAX, usize::MAX, 0usize, 0usize); count];
    let mut color = vec![vec![0.0f64; COLOR_HIST_LEN]; count];
    let mut texture = vec![vec![0.0f64; TEXTURE_HIST_LEN]; count];

    for y in 0..image.height {
        for x in 0..image.width {
            let region = (labels[y * image.width + x] - 1) as usize;
            areas[region] += 1;
            let e = &mut extents[region];
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
            let rgb = image.get(x, y);
            for channel in 0..3 {
                let bin = rgb[channel] as usize * COLOR_BINS_PER_CHANNEL / 256;
                color[region][channel * COLOR_BINS_PER_CHANNEL + bin] += 1.0;

                let (dx, dy) = texture_gradient(image, x, y, channel);
                let angle = dy.atan2(dx);
                let orient = (((angle + std::f64::consts::PI)
                    / (2.0 * std::f64::consts::PI))
                    * TEXTURE_ORIENTATIONS as f64) as usize;
                let orient = orient.min(TEXTURE_ORIENTATIONS - 1);
                let magnitude = (dx * dx + dy * dy).sqrt();
                let mag_bin = ((magnitude / TEXTURE_MAGNITUDE_MAX)
                    * TEXTURE_MAGNITUDE_BINS as f64) as usize;
                let mag_bin = mag_bin.min(TEXTURE_MAGNITUDE_BINS - 1);
                texture[region][(channel * TEXTURE_ORIENTATIONS + orient)
                    * TEXTURE_MAGNITUDE_BINS
                    + mag_bin] += 1.0;
            }
        }
    }

    (0..count)
        .map(|i| {
            let norm = (3 * areas[i]) as f64;
            let e = extents[i];
            RegionFeatures {
                area: areas[i],
                bbox: BBox::new(e.0 as f64, e.1 as f64, (e.2 + 1) as f64, (e.3 + 1) as f64)
                    .expect("non-empty region extents form a valid box"),
                color_hist: color[i].iter().map(|c| c / norm).collect(),
                texture_hist: texture[i].iter().map(|c| c / norm).collect(),
            }
        })
        .collect()
}

/// Relative importance of the four similarity components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub color: f64,
    pub texture: f64,
    pub size: f64,
    pub fill: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights {
            color: 1.0,
            texture: 1.0,
            size: 1.0,
            fill: 1.0,
        }
    }
}

fn histogram_intersection(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

/// Weighted sum of color/texture histogram intersections plus the size and
/// fill terms, each clamped to `[0, 1]`.
pub fn similarity(
    a: &RegionFeatures,
    b: &RegionFeatures,
    image_area: usize,
    weights: &SimilarityWeights,
) -> f64 {
    let image_area = image_area as f64;
    let s_color = histogram_intersection(&a.color_hist, &b.color_hist).clamp(0.0, 1.0);
    let s_texture = histogram_intersection(&a.texture_hist, &b.texture_hist).clamp(0.0, 1.0);
    let s_size = (1.0 - (a.area + b.area) as f64 / image_area).clamp(0.0, 1.0);
    let enclosing = a.bbox.enclosing(&b.bbox);
    let s_fill = (1.0 - (enclosing.area() - a.area as f64 - b.area as f64) / image_area)
        .clamp(0.0, 1.0);
    weights.color * s_color + weights.texture * s_texture + weights.size * s_size
        + weights.fill * s_fill
}

/// One line of a proposals JSONL file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProposalRow {
    pub image_id: String,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub objectness: f64,
    pub classifier_score: Option<f64>,
    pub source: ProposalSource,
}

impl ProposalRow {
    pub fn from_proposal(
        image_id: &str,
        proposal: &ScoredProposal,
        source: ProposalSource,
    ) -> Self {
        ProposalRow {
            image_id: image_id.to_owned(),
            x_min: proposal.bbox.x_min(),
            y_min: proposal.bbox.y_min(),
            x_max: proposal.bbox.x_max(),
            y_max: proposal.bbox.y_max(),
            objectness: proposal.objectness,
            classifier_score: proposal.classifier_score,
            source,
        }
    }
}

/// A proposal row that passed validation (and clamping, when image
/// dimensions were known).
#[derive(Debug, Clone)]
pub struct AcceptedProposal {
    pub line: usize,
    pub image_id: String,
    pub proposal: ScoredProposal,
    pub source: ProposalSource,
}

#[derive(Debug, Clone, Serialize)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

/// Result of parsing a proposals file: valid rows plus an itemized report of
/// rejected lines. Duplicate boxes are preserved.
#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub accepted: Vec<AcceptedProposal>,
    pub rejected: Vec<RejectedRow>,
}

impl IngestOutcome {
    /// Groups accepted rows per image, optionally restricted to one source.
    pub fn by_image(&self, source: Option<ProposalSource>) -> BTreeMap<String, Vec<ScoredProposal>> {
        let mut out: BTreeMap<String, Vec<ScoredProposal>> = BTreeMap::new();
        for row in &self.accepted {
            if source.is_some_and(|s| s != row.source) {
                continue;
            }
            out.entry(row.image_id.clone())
                .or_default()
                .push(row.proposal.clone());
        }
        out
    }
}

/// Reads a proposals JSONL file. When `dims` is given, boxes are clamped to
/// their image's bounds and rows referencing unknown image ids are rejected;
/// without it boxes must already be in valid coordinates.
pub fn ingest_proposals(
    path: &Path,
    dims: Option<&BTreeMap<String, (u32, u32)>>,
) -> Result<IngestOutcome> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut outcome = IngestOutcome::default();
    for (index, line) in reader.lines().enumerate() {
        let line_no = index + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_proposal_row(&line, dims) {
            Ok(accepted) => outcome.accepted.push(AcceptedProposal {
                line: line_no,
                ..accepted
            }),
            Err(reason) => outcome.rejected.push(RejectedRow {
                line: line_no,
                reason,
            }),
        }
    }
    Ok(outcome)
}

fn parse_proposal_row(
    line: &str,
    dims: Option<&BTreeMap<String, (u32, u32)>>,
) -> std::result::Result<AcceptedProposal, String> {
    let row: ProposalRow =
        serde_json::from_str(line).map_err(|e| format!("malformed row: {e}"))?;
    let coords = [row.x_min, row.y_min, row.x_max, row.y_max];
    if coords.iter().any(|c| !c.is_finite()) {
        return Err("box coordinates must be finite".into());
    }
    if row.x_min >= row.x_max || row.y_min >= row.y_max {
        return Err(format!(
            "degenerate box ({}, {}, {}, {})",
            row.x_min, row.y_min, row.x_max, row.y_max
        ));
    }
    if !row.objectness.is_finite() {
        return Err("objectness score out of range".into());
    }
    if row.classifier_score.is_some_and(|s| !s.is_finite()) {
        return Err("classifier score out of range".into());
    }
    let bbox = match dims {
        Some(dims) => {
            let (w, h) = dims
                .get(&row.image_id)
                .copied()
                .ok_or_else(|| format!("unknown image id `{}`", row.image_id))?;
            clamp_rect(row.x_min, row.y_min, row.x_max, row.y_max, w, h)
        }
        None => BBox::new(row.x_min, row.y_min, row.x_max, row.y_max)
            .map_err(|e| e.to_string())?,
    };
    Ok(AcceptedProposal {
        line: 0,
        image_id: row.image_id,
        proposal: ScoredProposal {
            bbox,
            objectness: row.objectness,
            classifier_score: row.classifier_score,
        },
        source: row.source,
    })
}

/// Writes proposal rows as JSONL.
pub fn write_proposals(path: &Path, rows: &[ProposalRow]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = std::io::BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut writer, row)
            .map_err(|e| Error::format(path, e.to_string()))?;
        writer.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
