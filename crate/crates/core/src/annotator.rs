//! Pseudo ground-truth box generation: staged refinement of region proposals
//! via score filtering, pointing-game selection, and classifier-response
//! ranking, plus the map-threshold path for CLIP-style inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boxes_from_mask, BBox, Connectivity, ExtractionMode};
use crate::heatmap::{binarize, otsu_threshold, NormalizedLocMap, DEFAULT_OTSU_BINS};
use crate::proposals::{ProposalSource, ScoredProposal};

/// Score used when keeping the top fraction of proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKey {
    Objectness,
    /// Explicit classifier scores; proposals without one rank last.
    ClassifierScore,
}

/// How "largest" is read when picking the final box on the map path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipLargest {
    BoxArea,
    ComponentArea,
}

/// Survivor counts after each refinement stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub ingested: usize,
    pub top_fraction: usize,
    pub pointing_game: usize,
    pub final_count: usize,
    /// Set when the pointing game eliminated every candidate and ranking fell
    /// back to the top-fraction survivors.
    pub pointing_fallback: bool,
}

/// Pseudo annotation for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationOutcome {
    pub image_id: String,
    pub bbox: BBox,
    pub source: ProposalSource,
    pub stage_trace: StageTrace,
}

/// One dataset element the annotator works from.
#[derive(Debug, Clone, Default)]
pub struct ImageRecord {
    pub image_id: String,
    pub class_label: Option<String>,
    pub proposals: Vec<ScoredProposal>,
    /// Class-evidence map from the pretrained classifier (ss/rpn paths).
    pub cam: Option<NormalizedLocMap>,
    /// Prompt-driven map consumed directly on the clip path.
    pub clip_map: Option<NormalizedLocMap>,
}

#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    pub source: ProposalSource,
    pub fraction: f64,
    pub key: FilterKey,
    pub clip_largest: ClipLargest,
    pub otsu_bins: usize,
}

impl AnnotateOptions {
    pub fn new(source: ProposalSource) -> Self {
        AnnotateOptions {
            source,
            fraction: 0.2,
            key: FilterKey::Objectness,
            clip_largest: ClipLargest::BoxArea,
            otsu_bins: DEFAULT_OTSU_BINS,
        }
    }
}

/// Keeps the `ceil(fraction * n)` highest-scoring proposals; ties keep the
/// earlier list order, and tiny inputs always keep at least one candidate.
pub fn top_fraction_filter(
    proposals: &[ScoredProposal],
    fraction: f64,
    key: FilterKey,
) -> Result<Vec<ScoredProposal>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "fraction",
            reason: format!("fraction {fraction} outside (0, 1]"),
        });
    }
    if proposals.is_empty() {
        return Ok(Vec::new());
    }
    let keep = (fraction * proposals.len() as f64).ceil() as usize;
    let score = |p: &ScoredProposal| match key {
        FilterKey::Objectness => p.objectness,
        FilterKey::ClassifierScore => p.classifier_score.unwrap_or(f64::NEG_INFINITY),
    };
    let mut order: Vec<usize> = (0..proposals.len()).collect();
    // Stable sort keeps earlier rows first among equal scores.
    order.sort_by(|&a, &b| score(&proposals[b]).total_cmp(&score(&proposals[a])));
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    Ok(kept.into_iter().map(|i| proposals[i].clone()).collect())
}

/// Keeps proposals whose box contains the map's argmax pixel.
pub fn pointing_filter(
    proposals: &[ScoredProposal],
    cam: &NormalizedLocMap,
) -> Result<Vec<ScoredProposal>> {
    if cam.is_degenerate() {
        return Err(Error::DegenerateCam);
    }
    let (px, py) = cam.argmax();
    Ok(proposals
        .iter()
        .filter(|p| p.bbox.contains_point(px as f64, py as f64))
        .cloned()
        .collect())
}

fn mean_activation(cam: &NormalizedLocMap, bbox: &BBox) -> f64 {
    let x_lo = bbox.x_min().ceil().max(0.0) as usize;
    let y_lo = bbox.y_min().ceil().max(0.0) as usize;
    let x_hi = (bbox.x_max().ceil() as usize).min(cam.width());
    let y_hi = (bbox.y_max().ceil() as usize).min(cam.height());
    if x_lo >= x_hi || y_lo >= y_hi {
        return 0.0;
    }
    let mut sum = 0.0f64;
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            sum += cam.get(x, y) as f64;
        }
    }
    sum / ((x_hi - x_lo) * (y_hi - y_lo)) as f64
}

/// Picks the proposal with the highest classifier response. Explicit scores
/// win when every proposal carries one; otherwise each box is scored by its
/// mean map activation. Ties prefer the larger box, then the earlier row.
pub fn classifier_rank(
    proposals: &[ScoredProposal],
    cam: Option<&NormalizedLocMap>,
) -> Option<ScoredProposal> {
    if proposals.is_empty() {
        return None;
    }
    let explicit = proposals.iter().all(|p| p.classifier_score.is_some());
    let score = |p: &ScoredProposal| -> f64 {
        if explicit {
            p.classifier_score.unwrap()
        } else {
            match cam {
                Some(cam) => mean_activation(cam, &p.bbox),
                None => 0.0,
            }
        }
    };
    let mut best = 0usize;
    let mut best_score = score(&proposals[0]);
    for (i, p) in proposals.iter().enumerate().skip(1) {
        let s = score(p);
        if s > best_score || (s == best_score && p.bbox.area() > proposals[best].bbox.area()) {
            best = i;
            best_score = s;
        }
    }
    Some(proposals[best].clone())
}

/// Threshold-and-box path for a single prompt-driven map: an automatic
/// threshold binarizes the map, a box is built around every connected
/// component, and the largest one is returned.
pub fn clip_map_to_box(
    map: &NormalizedLocMap,
    largest: ClipLargest,
    bins: usize,
) -> Result<BBox> {
    if map.is_degenerate() {
        return Err(Error::DegenerateMap);
    }
    let tau = otsu_threshold(map, bins)?;
    let mask = binarize(map, tau)?;
    match largest {
        ClipLargest::ComponentArea => {
            let boxes = boxes_from_mask(&mask, Connectivity::Eight, ExtractionMode::LargestComponent);
            boxes.into_iter().next().ok_or(Error::NoForeground)
        }
        ClipLargest::BoxArea => {
            let boxes = boxes_from_mask(&mask, Connectivity::Eight, ExtractionMode::AllComponents);
            // Largest by box area; the component labeling's scan order makes
            // the first maximal box the smallest-label one.
            boxes
                .into_iter()
                .reduce(|best, b| if b.area() > best.area() { b } else { best })
                .ok_or(Error::NoForeground)
        }
    }
}

/// Runs the full per-image refinement for one record.
///
/// ss/rpn: top-fraction filter, pointing game, classifier ranking. When the
/// pointing game (or a degenerate map) leaves nothing, ranking falls back to
/// the top-fraction survivors and the trace is flagged. clip: the map
/// threshold path.
pub fn annotate(record: &ImageRecord, opts: &AnnotateOptions) -> Result<AnnotationOutcome> {
    match opts.source {
        ProposalSource::Clip => {
            let map = record
                .clip_map
                .as_ref()
                .ok_or_else(|| Error::NoProposals(record.image_id.clone()))?;
            let bbox = clip_map_to_box(map, opts.clip_largest, opts.otsu_bins)?;
            Ok(AnnotationOutcome {
                image_id: record.image_id.clone(),
                bbox,
                source: opts.source,
                stage_trace: StageTrace {
                    ingested: 1,
                    top_fraction: 1,
                    pointing_game: 1,
                    final_count: 1,
                    pointing_fallback: false,
                },
            })
        }
        ProposalSource::Ss | ProposalSource::Rpn => {
            if record.proposals.is_empty() {
                return Err(Error::NoProposals(record.image_id.clone()));
            }
            let filtered = top_fraction_filter(&record.proposals, opts.fraction, opts.key)?;
            let cam = record.cam.as_ref();
            let pointed = match cam {
                Some(cam) if !cam.is_degenerate() => pointing_filter(&filtered, cam)?,
                _ => Vec::new(),
            };
            let (candidates, fallback) = if pointed.is_empty() {
                (&filtered, true)
            } else {
                (&pointed, false)
            };
            let winner = classifier_rank(candidates, cam)
                .ok_or_else(|| Error::NoProposals(record.image_id.clone()))?;
            Ok(AnnotationOutcome {
                image_id: record.image_id.clone(),
                bbox: winner.bbox,
                source: opts.source,
                stage_trace: StageTrace {
                    ingested: record.proposals.len(),
                    top_fraction: filtered.len(),
                    pointing_game: pointed.len(),
                    final_count: 1,
                    pointing_fallback: fallback,
                },
            })
        }
    }
}

/// Per-image failures plus aggregate counters for a dataset run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DatasetAnnotationReport {
    pub annotated: usize,
    pub failed: usize,
    pub fallback_count: usize,
    pub errors: Vec<(String, String)>,
}

impl DatasetAnnotationReport {
    pub fn fallback_rate(&self) -> f64 {
        if self.annotated == 0 {
            0.0
        } else {
            self.fallback_count as f64 / self.annotated as f64
        }
    }
}

/// Annotates every record in parallel, aggregating outcomes and failures in
/// image-id order so the report is independent of the worker count.
pub fn annotate_dataset(
    records: &[ImageRecord],
    opts: &AnnotateOptions,
) -> (Vec<AnnotationOutcome>, DatasetAnnotationReport) {
    use rayon::prelude::*;

    let mut indices: Vec<usize> = (0..records.len()).collect();
    indices.sort_by(|&a, &b| records[a].image_id.cmp(&records[b].image_id));
    let results: Vec<(usize, Result<AnnotationOutcome>)> = indices
        .into_par_iter()
        .map(|i| (i, annotate(&records[i], opts)))
        .collect();

    let mut outcomes = Vec::new();
    let mut report = DatasetAnnotationReport::default();
    for (i, result) in results {
        match result {
            Ok(outcome) => {
                if outcome.stage_trace.pointing_fallback {
                    report.fallback_count += 1;
                }
                report.annotated += 1;
                outcomes.push(outcome);
            }
            Err(err) => {
                report.failed += 1;
                report.errors.push((records[i].image_id.clone(), err.to_string()));
            }
        }
    }
    (outcomes, report)
}
