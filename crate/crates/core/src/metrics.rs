//! Localization scoring: per-image IoU matching, BoxAcc(tau) curves,
//! MaxBoxAcc, mean IoU, pointing-game accuracy, and dataset-level measures
//! over oracle or pseudo annotations.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boxes_from_mask, iou, BBox, Connectivity, ExtractionMode};
use crate::heatmap::{binarize, otsu_threshold, NormalizedLocMap, ThresholdGrid, DEFAULT_OTSU_BINS};
use crate::proposals::ProposalSource;

/// One dataset element for map-based evaluation.
#[derive(Debug, Clone)]
pub struct EvalImage {
    pub id: String,
    pub map: NormalizedLocMap,
    pub boxes: Vec<BBox>,
}

/// BoxAcc value per grid threshold at a fixed IoU cutoff `delta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxAccCurve {
    pub grid: ThresholdGrid,
    pub acc: Vec<f64>,
    pub delta: f64,
}

/// Best IoU between any predicted box and any reference box; zero when no
/// box was predicted.
pub fn image_loc_score(predicted: &[BBox], gt: &[BBox]) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::EmptyReference);
    }
    let mut best = 0.0f64;
    for p in predicted {
        for g in gt {
            best = best.max(iou(p, g));
        }
    }
    Ok(best)
}

/// Boxes extracted from a map binarized at `tau`.
pub fn boxes_at_tau(
    map: &NormalizedLocMap,
    tau: f64,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Result<Vec<BBox>> {
    let mask = binarize(map, tau)?;
    Ok(boxes_from_mask(&mask, connectivity, mode))
}

fn check_dataset(images: &[EvalImage], delta: f64) -> Result<()> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("IoU cutoff {delta} outside (0, 1)"),
        });
    }
    for image in images {
        if image.boxes.is_empty() {
            return Err(Error::MissingAnnotation {
                image_id: image.id.clone(),
                annotation: "reference".into(),
            });
        }
    }
    Ok(())
}

/// Per-image best IoU against the references at every grid threshold.
///
/// Images are processed in parallel; each row of the result keeps dataset
/// order so every aggregate is reproducible regardless of worker count.
fn iou_table(
    images: &[EvalImage],
    grid: &ThresholdGrid,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Vec<Vec<f64>> {
    images
        .par_iter()
        .map(|image| {
            grid.iter()
                .map(|tau| {
                    let boxes = boxes_at_tau(&image.map, tau, connectivity, mode)
                        .expect("grid thresholds are in range");
                    image_loc_score(&boxes, &image.boxes).expect("references checked")
                })
                .collect()
        })
        .collect()
}

/// BoxAcc(tau) over the grid: the fraction of images whose extracted box
/// reaches IoU >= `delta` at that threshold. Images with an empty mask score
/// zero rather than being skipped.
pub fn box_acc_curve(
    images: &[EvalImage],
    grid: &ThresholdGrid,
    delta: f64,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Result<BoxAccCurve> {
    check_dataset(images, delta)?;
    let table = iou_table(images, grid, connectivity, mode);
    let n = images.len() as f64;
    let acc = (0..grid.len())
        .map(|t| {
            let hits = table.iter().filter(|row| row[t] >= delta).count();
            hits as f64 / n
        })
        .collect();
    Ok(BoxAccCurve {
        grid: grid.clone(),
        acc,
        delta,
    })
}

/// Argmax of a BoxAcc curve; ties resolve to the lowest threshold.
pub fn max_box_acc(curve: &BoxAccCurve) -> (f64, f64) {
    let mut best = 0usize;
    for i in 1..curve.acc.len() {
        if curve.acc[i] > curve.acc[best] {
            best = i;
        }
    }
    (curve.grid.get(best), curve.acc[best])
}

/// Mean over images of the raw best IoU at a fixed threshold.
pub fn mean_iou_at(
    images: &[EvalImage],
    tau: f64,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Result<f64> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for image in images {
        if image.boxes.is_empty() {
            return Err(Error::MissingAnnotation {
                image_id: image.id.clone(),
                annotation: "reference".into(),
            });
        }
    }
    let scores: Vec<f64> = images
        .par_iter()
        .map(|image| {
            let boxes = boxes_at_tau(&image.map, tau, connectivity, mode)?;
            image_loc_score(&boxes, &image.boxes)
        })
        .collect::<Result<_>>()?;
    // Summed in dataset order for bit-reproducible aggregation.
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerImageScore {
    pub image_id: String,
    pub iou: f64,
    pub hit: bool,
}

/// Outcome of a full threshold sweep over a dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub tau_star: f64,
    pub max_box_acc: f64,
    pub mean_iou_at_tau: f64,
    pub delta: f64,
    pub mode: ExtractionMode,
    pub per_image: Vec<PerImageScore>,
}

/// Sweeps the grid, picks the BoxAcc-optimal threshold, and reports both the
/// thresholded metric and the raw mean IoU at that threshold.
pub fn evaluate_sweep(
    images: &[EvalImage],
    grid: &ThresholdGrid,
    delta: f64,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Result<EvalResult> {
    check_dataset(images, delta)?;
    let table = iou_table(images, grid, connectivity, mode);
    let n = images.len() as f64;
    let acc: Vec<f64> = (0..grid.len())
        .map(|t| table.iter().filter(|row| row[t] >= delta).count() as f64 / n)
        .collect();
    let curve = BoxAccCurve {
        grid: grid.clone(),
        acc,
        delta,
    };
    let (tau_star, best_acc) = max_box_acc(&curve);
    let star_index = curve.grid.index_of(tau_star).expect("tau_star is a grid point");
    let per_image: Vec<PerImageScore> = images
        .iter()
        .zip(&table)
        .map(|(image, row)| PerImageScore {
            image_id: image.id.clone(),
            iou: row[star_index],
            hit: row[star_index] >= delta,
        })
        .collect();
    let mean_iou = per_image.iter().map(|s| s.iou).sum::<f64>() / n;
    Ok(EvalResult {
        tau_star,
        max_box_acc: best_acc,
        mean_iou_at_tau: mean_iou,
        delta,
        mode,
        per_image,
    })
}

/// Which localization similarity is aggregated by [`eval_measure`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    /// Scores one point when IoU reaches the cutoff.
    IouAtDelta(f64),
    /// The raw best-pair IoU.
    RawIou,
}

/// A localization similarity value tagged with the measure that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocScore {
    pub measure: Measure,
    pub value: f64,
}

impl LocScore {
    fn new(measure: Measure, value: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&value), "loc score {value} outside [0, 1]");
        LocScore { measure, value }
    }
}

/// How the predicted box is derived from a localization map.
#[derive(Debug, Clone, PartialEq)]
pub enum TauPolicy {
    Fixed(f64),
    /// One global threshold chosen to maximize the aggregate over the grid.
    Sweep(ThresholdGrid),
    /// Per-image automatic threshold; degenerate maps score zero.
    OtsuPerImage,
    /// A threshold estimated elsewhere (typically on a validation split).
    FromValidation(f64),
}

/// Which annotation a dataset-level measure is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AnnotationChoice {
    Oracle,
    Pseudo(ProposalSource),
}

impl std::fmt::Display for AnnotationChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnnotationChoice::Oracle => write!(f, "oracle"),
            AnnotationChoice::Pseudo(source) => write!(f, "{source}"),
        }
    }
}

/// Per-image boxes for every available annotation source.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    pub oracle: BTreeMap<String, Vec<BBox>>,
    pub pseudo: BTreeMap<ProposalSource, BTreeMap<String, Vec<BBox>>>,
}

impl AnnotationStore {
    pub fn resolve(&self, choice: AnnotationChoice, image_id: &str) -> Result<&[BBox]> {
        let table = match choice {
            AnnotationChoice::Oracle => &self.oracle,
            AnnotationChoice::Pseudo(source) => {
                self.pseudo.get(&source).ok_or(Error::MissingAnnotation {
                    image_id: image_id.to_owned(),
                    annotation: choice.to_string(),
                })?
            }
        };
        match table.get(image_id) {
            Some(boxes) if !boxes.is_empty() => Ok(boxes),
            _ => Err(Error::MissingAnnotation {
                image_id: image_id.to_owned(),
                annotation: choice.to_string(),
            }),
        }
    }
}

fn score_one(measure: Measure, iou_value: f64) -> f64 {
    match measure {
        Measure::IouAtDelta(delta) => {
            if iou_value >= delta {
                1.0
            } else {
                0.0
            }
        }
        Measure::RawIou => iou_value,
    }
}

/// Average localization performance of predicted boxes over a dataset, under
/// the requested annotation source, similarity measure, and threshold policy.
pub fn eval_measure(
    maps: &[(String, NormalizedLocMap)],
    store: &AnnotationStore,
    choice: AnnotationChoice,
    measure: Measure,
    policy: &TauPolicy,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Result<LocScore> {
    if maps.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let images: Vec<EvalImage> = maps
        .iter()
        .map(|(id, map)| {
            Ok(EvalImage {
                id: id.clone(),
                map: map.clone(),
                boxes: store.resolve(choice, id)?.to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    let fixed_tau_mean = |tau: f64| -> Result<f64> {
        let scores: Vec<f64> = images
            .par_iter()
            .map(|image| {
                let boxes = boxes_at_tau(&image.map, tau, connectivity, mode)?;
                Ok(score_one(measure, image_loc_score(&boxes, &image.boxes)?))
            })
            .collect::<Result<_>>()?;
        Ok(scores.iter().sum::<f64>() / scores.len() as f64)
    };

    let value = match policy {
        TauPolicy::Fixed(tau) | TauPolicy::FromValidation(tau) => fixed_tau_mean(*tau)?,
        TauPolicy::Sweep(grid) => {
            let table = iou_table(&images, grid, connectivity, mode);
            let n = images.len() as f64;
            (0..grid.len())
                .map(|t| table.iter().map(|row| score_one(measure, row[t])).sum::<f64>() / n)
                .fold(f64::NEG_INFINITY, f64::max)
        }
        TauPolicy::OtsuPerImage => {
            let scores: Vec<f64> = images
                .par_iter()
                .map(|image| {
                    if image.map.is_degenerate() {
                        return Ok(0.0);
                    }
                    let tau = otsu_threshold(&image.map, DEFAULT_OTSU_BINS)?;
                    let boxes = boxes_at_tau(&image.map, tau, connectivity, mode)?;
                    Ok(score_one(measure, image_loc_score(&boxes, &image.boxes)?))
                })
                .collect::<Result<_>>()?;
            scores.iter().sum::<f64>() / scores.len() as f64
        }
    };
    Ok(LocScore::new(measure, value))
}

/// Pointing-game outcome for one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pointing {
    Hit,
    Miss,
}

#[derive(Debug, Clone, Copy)]
pub struct PointingResult {
    pub outcome: Pointing,
    pub peak: (usize, usize),
    /// Set when the map was constant; such images count as misses.
    pub degenerate: bool,
}

/// Hit iff the map's argmax pixel lies inside any reference box. Degenerate
/// maps are counted as misses and flagged.
pub fn pointing_game(map: &NormalizedLocMap, boxes: &[BBox]) -> Result<PointingResult> {
    if boxes.is_empty() {
        return Err(Error::EmptyReference);
    }
    let peak = map.argmax();
    if map.is_degenerate() {
        return Ok(PointingResult {
            outcome: Pointing::Miss,
            peak,
            degenerate: true,
        });
    }
    let hit = boxes
        .iter()
        .any(|b| b.contains_point(peak.0 as f64, peak.1 as f64));
    Ok(PointingResult {
        outcome: if hit { Pointing::Hit } else { Pointing::Miss },
        peak,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct PointingSummary {
    pub hits: usize,
    pub misses: usize,
    pub degenerate: usize,
}

impl PointingSummary {
    pub fn accuracy(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}

/// Aggregate pointing-game accuracy `Hits / (Hits + Misses)` over a dataset.
pub fn pointing_accuracy<'a>(
    items: impl IntoIterator<Item = (&'a NormalizedLocMap, &'a [BBox])>,
) -> Result<PointingSummary> {
    let mut summary = PointingSummary::default();
    for (map, boxes) in items {
        let result = pointing_game(map, boxes)?;
        match result.outcome {
            Pointing::Hit => summary.hits += 1,
            Pointing::Miss => summary.misses += 1,
        }
        if result.degenerate {
            summary.degenerate += 1;
        }
    }
    Ok(summary)
}
