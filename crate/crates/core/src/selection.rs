//! Model-selection harness: early stopping over epoch curves, hyperparameter
//! configuration selection, validation-side threshold estimation, the
//! selection-protocol matrix, and epoch-difference histograms.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Connectivity, ExtractionMode};
use crate::heatmap::{NormalizedLocMap, ThresholdGrid};
use crate::metrics::{box_acc_curve, eval_measure, max_box_acc, AnnotationStore, EvalImage,
    Measure, TauPolicy};
use crate::proposals::ProposalSource;

/// Per-epoch scalar scores for one split of a run. `loc_scores` maps an
/// annotation source name (oracle / ss / rpn / clip) to the localization
/// score, and `maps` optionally points at a directory of per-image maps for
/// on-the-fly scoring.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub classification_acc: f64,
    #[serde(default)]
    pub loc_scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<PathBuf>,
}

/// One training run: a hyperparameter configuration with aligned per-epoch
/// validation and test series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    #[serde(default)]
    pub config: BTreeMap<String, serde_json::Value>,
    pub val: Vec<EpochRecord>,
    #[serde(default)]
    pub test: Vec<EpochRecord>,
}

impl RunManifest {
    /// Checks the structural invariants: strictly increasing epochs, scores
    /// in `[0, 1]`, and test epochs (when present) aligned with validation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let check_series = |name: &str, series: &[EpochRecord]| {
            for pair in series.windows(2) {
                if pair[0].epoch >= pair[1].epoch {
                    return Err(format!("{name} epochs must be strictly increasing"));
                }
            }
            for record in series {
                if !(0.0..=1.0).contains(&record.classification_acc) {
                    return Err(format!(
                        "{name} classification accuracy at epoch {} outside [0, 1]",
                        record.epoch
                    ));
                }
                for (source, score) in &record.loc_scores {
                    if !(0.0..=1.0).contains(score) {
                        return Err(format!(
                            "{name} loc score `{source}` at epoch {} outside [0, 1]",
                            record.epoch
                        ));
                    }
                }
            }
            Ok(())
        };
        check_series("val", &self.val)?;
        check_series("test", &self.test)?;
        if !self.test.is_empty() {
            let val_epochs: Vec<u32> = self.val.iter().map(|r| r.epoch).collect();
            let test_epochs: Vec<u32> = self.test.iter().map(|r| r.epoch).collect();
            if val_epochs != test_epochs {
                return Err("val and test series must be aligned by epoch".into());
            }
        }
        Ok(())
    }
}

/// Selection criterion over an epoch series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Criterion {
    Classification,
    /// Localization score under the named annotation source.
    Loc(String),
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Criterion::Classification => write!(f, "classification"),
            Criterion::Loc(source) => write!(f, "loc:{source}"),
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "classification" {
            Ok(Criterion::Classification)
        } else if let Some(source) = s.strip_prefix("loc:") {
            Ok(Criterion::Loc(source.to_owned()))
        } else {
            Err(Error::InvalidParameter {
                name: "criterion",
                reason: format!("expected `classification` or `loc:<source>`, got `{s}`"),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Val,
    Test,
}

fn criterion_value(record: &EpochRecord, criterion: &Criterion) -> Result<f64> {
    match criterion {
        Criterion::Classification => Ok(record.classification_acc),
        Criterion::Loc(source) => {
            record
                .loc_scores
                .get(source)
                .copied()
                .ok_or(Error::MissingCriterion {
                    criterion: format!("loc:{source}"),
                    epoch: record.epoch,
                })
        }
    }
}

/// Argmax epoch of a criterion over a series; ties take the earliest epoch.
pub fn early_stop_series(series: &[EpochRecord], criterion: &Criterion) -> Result<(u32, f64)> {
    if series.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut best_epoch = series[0].epoch;
    let mut best_value = criterion_value(&series[0], criterion)?;
    for record in &series[1..] {
        let value = criterion_value(record, criterion)?;
        if value > best_value {
            best_value = value;
            best_epoch = record.epoch;
        }
    }
    Ok((best_epoch, best_value))
}

/// Early stopping on the validation series.
pub fn early_stop(run: &RunManifest, criterion: &Criterion) -> Result<u32> {
    Ok(early_stop_series(&run.val, criterion)?.0)
}

/// Early-stops every run on `split` and returns the best run with its
/// stopped epoch and score; score ties take the lexicographically smallest
/// run id.
pub fn select_config(
    runs: &[RunManifest],
    criterion: &Criterion,
    split: Split,
) -> Result<(String, u32, f64)> {
    if runs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<&RunManifest> = runs.iter().collect();
    order.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let mut best: Option<(String, u32, f64)> = None;
    for run in order {
        let series = match split {
            Split::Val => &run.val,
            Split::Test => &run.test,
        };
        let (epoch, value) = early_stop_series(series, criterion)?;
        match &best {
            Some((_, _, best_value)) if *best_value >= value => {}
            _ => best = Some((run.run_id.clone(), epoch, value)),
        }
    }
    Ok(best.expect("non-empty run list"))
}

/// Estimates the binarization threshold on a validation set: the BoxAcc-optimal
/// grid point, replacing the per-test-image sweep with a single value.
pub fn estimate_tau(
    images: &[EvalImage],
    grid: &ThresholdGrid,
    delta: f64,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Result<(f64, f64)> {
    let curve = box_acc_curve(images, grid, delta, connectivity, mode)?;
    Ok(max_box_acc(&curve))
}

/// Integer-binned histogram of per-run early-stopping epoch differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochDiffHistogram {
    pub counts: BTreeMap<i64, u64>,
    pub mode: i64,
    pub mean: f64,
}

/// Histogram of `early_stop(source_a) - early_stop(source_b)` over runs,
/// both taken on the validation series.
pub fn epoch_diff_histogram(
    runs: &[RunManifest],
    source_a: &str,
    source_b: &str,
) -> Result<EpochDiffHistogram> {
    if runs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    let mut sum = 0i64;
    for run in runs {
        let a = early_stop(run, &Criterion::Loc(source_a.to_owned()))?;
        let b = early_stop(run, &Criterion::Loc(source_b.to_owned()))?;
        let diff = a as i64 - b as i64;
        *counts.entry(diff).or_insert(0) += 1;
        sum += diff;
    }
    let mode = counts
        .iter()
        .max_by(|(ka, va), (kb, vb)| va.cmp(vb).then(kb.cmp(ka)))
        .map(|(k, _)| *k)
        .unwrap();
    Ok(EpochDiffHistogram {
        mode,
        mean: sum as f64 / runs.len() as f64,
        counts,
    })
}

/// Hyperparameter-selection axis: best test vs best validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigAxis {
    #[serde(rename = "BT")]
    BestTest,
    #[serde(rename = "BV")]
    BestVal,
}

/// Threshold axis: swept on test, estimated on validation, per-image
/// automatic, or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauAxis {
    #[serde(rename = "TT")]
    TestSweep,
    #[serde(rename = "VT")]
    ValEstimated,
    #[serde(rename = "OT")]
    Otsu,
    #[serde(rename = "fixed")]
    Fixed,
}

/// One cell of the selection-protocol matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolCell {
    /// Annotation source driving the validation-side choices, or
    /// `classification` for the class-accuracy baseline columns.
    pub source: String,
    pub config_axis: ConfigAxis,
    pub tau_axis: TauAxis,
    pub value: Option<f64>,
    pub run_id: Option<String>,
    pub epoch: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolMatrix {
    pub delta: f64,
    pub cells: Vec<ProtocolCell>,
}

impl ProtocolMatrix {
    pub fn cell(&self, source: &str, config: ConfigAxis, tau: TauAxis) -> Option<&ProtocolCell> {
        self.cells
            .iter()
            .find(|c| c.source == source && c.config_axis == config && c.tau_axis == tau)
    }
}

/// Everything the full matrix needs for one epoch of one run: the maps
/// produced by that checkpoint on both splits plus its classification
/// accuracies.
#[derive(Debug, Clone)]
pub struct MatrixEpoch {
    pub epoch: u32,
    pub classification_val: f64,
    pub classification_test: f64,
    pub val_maps: Vec<(String, NormalizedLocMap)>,
    pub test_maps: Vec<(String, NormalizedLocMap)>,
}

#[derive(Debug, Clone)]
pub struct MatrixRun {
    pub run_id: String,
    pub epochs: Vec<MatrixEpoch>,
}

/// Validation-side annotations: oracle boxes (when the study has them) and
/// pseudo boxes per source.
#[derive(Debug, Clone, Default)]
pub struct ValAnnotations {
    pub oracle: Option<BTreeMap<String, Vec<BBox>>>,
    pub pseudo: BTreeMap<ProposalSource, BTreeMap<String, Vec<BBox>>>,
}

impl ValAnnotations {
    fn sources(&self) -> Vec<(String, &BTreeMap<String, Vec<BBox>>)> {
        let mut out = Vec::new();
        if let Some(oracle) = &self.oracle {
            out.push(("oracle".to_string(), oracle));
        }
        for (source, boxes) in &self.pseudo {
            out.push((source.to_string(), boxes));
        }
        out
    }
}

struct EpochScores {
    run_id: String,
    epoch: u32,
    classification_val: f64,
    /// MaxBoxAcc of the test sweep against the test oracle (the reported
    /// quantity; also the BT selection criterion).
    test_sweep: f64,
    /// Test BoxAcc at the tau estimated on validation, per source.
    test_at_val_tau: BTreeMap<String, f64>,
    /// Test score under per-image automatic thresholds.
    test_otsu: f64,
    /// Validation MaxBoxAcc per source (the BV selection criterion).
    val_score: BTreeMap<String, f64>,
}

fn images_with_boxes(
    maps: &[(String, NormalizedLocMap)],
    boxes: &BTreeMap<String, Vec<BBox>>,
) -> Result<Vec<EvalImage>> {
    maps.iter()
        .map(|(id, map)| {
            let boxes = boxes.get(id).filter(|b| !b.is_empty()).ok_or_else(|| {
                Error::MissingAnnotation {
                    image_id: id.clone(),
                    annotation: "matrix".into(),
                }
            })?;
            Ok(EvalImage {
                id: id.clone(),
                map: map.clone(),
                boxes: boxes.clone(),
            })
        })
        .collect()
}

/// Computes the full selection-protocol matrix from per-epoch map archives.
///
/// The reported quantity of every cell is the test-set BoxAcc against the
/// test oracle boxes. BT selects the run/epoch maximizing that reported
/// quantity (so the BT-TT cell upper-bounds the matrix by construction);
/// BV selects on the validation MaxBoxAcc under each annotation source; VT
/// applies the validation-estimated threshold to the test sweep; OT scores
/// the test set under per-image automatic thresholds. The classification
/// columns select by class accuracy instead of a localization criterion.
pub fn protocol_matrix(
    runs: &[MatrixRun],
    val_annotations: &ValAnnotations,
    test_oracle: &BTreeMap<String, Vec<BBox>>,
    grid: &ThresholdGrid,
    delta: f64,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Result<ProtocolMatrix> {
    if runs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let sources = val_annotations.sources();

    let mut order: Vec<&MatrixRun> = runs.iter().collect();
    order.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    // Each (run, epoch) is scored independently in parallel; the fold below
    // walks the sorted order, so the matrix does not depend on worker count
    // or input ordering.
    let pending: Vec<(&MatrixRun, &MatrixEpoch)> = order
        .iter()
        .flat_map(|run| run.epochs.iter().map(move |epoch| (*run, epoch)))
        .collect();
    let scored: Vec<EpochScores> = pending
        .into_par_iter()
        .map(|(run, epoch)| -> Result<EpochScores> {
            let test_images = images_with_boxes(&epoch.test_maps, test_oracle)?;
            let test_curve = box_acc_curve(&test_images, grid, delta, connectivity, mode)?;
            let (_, test_sweep) = max_box_acc(&test_curve);

            let test_store = AnnotationStore {
                oracle: test_oracle.clone(),
                ..Default::default()
            };
            let test_otsu = eval_measure(
                &epoch.test_maps,
                &test_store,
                crate::metrics::AnnotationChoice::Oracle,
                Measure::IouAtDelta(delta),
                &TauPolicy::OtsuPerImage,
                connectivity,
                mode,
            )?
            .value;

            let mut val_score = BTreeMap::new();
            let mut test_at_val_tau = BTreeMap::new();
            for (name, boxes) in &sources {
                let val_images = images_with_boxes(&epoch.val_maps, boxes)?;
                let val_curve = box_acc_curve(&val_images, grid, delta, connectivity, mode)?;
                let (tau_star, val_best) = max_box_acc(&val_curve);
                val_score.insert(name.clone(), val_best);
                let index = grid.index_of(tau_star).expect("tau_star is a grid point");
                test_at_val_tau.insert(name.clone(), test_curve.acc[index]);
            }

            Ok(EpochScores {
                run_id: run.run_id.clone(),
                epoch: epoch.epoch,
                classification_val: epoch.classification_val,
                test_sweep,
                test_at_val_tau,
                test_otsu,
                val_score,
            })
        })
        .collect::<Result<_>>()?;
    if scored.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Argmax over (run, epoch) in sorted order: strictly-greater comparison
    // keeps the smallest run id and earliest epoch on ties.
    let argmax = |value: &dyn Fn(&EpochScores) -> f64| -> usize {
        let mut best = 0usize;
        for (i, s) in scored.iter().enumerate().skip(1) {
            if value(s) > value(&scored[best]) {
                best = i;
            }
        }
        best
    };

    let mut cells = Vec::new();
    let make_cell = |source: &str,
                     config_axis: ConfigAxis,
                     tau_axis: TauAxis,
                     picked: &EpochScores,
                     value: Option<f64>,
                     note: Option<String>| ProtocolCell {
        source: source.to_owned(),
        config_axis,
        tau_axis,
        value,
        run_id: Some(picked.run_id.clone()),
        epoch: Some(picked.epoch),
        note,
    };

    // BT: selection by the reported quantity itself.
    let bt = &scored[argmax(&|s: &EpochScores| s.test_sweep)];
    cells.push(make_cell(
        "oracle",
        ConfigAxis::BestTest,
        TauAxis::TestSweep,
        bt,
        Some(bt.test_sweep),
        None,
    ));

    for (name, _) in &sources {
        // BT-VT: BT's checkpoint, threshold estimated on validation.
        cells.push(make_cell(
            name,
            ConfigAxis::BestTest,
            TauAxis::ValEstimated,
            bt,
            bt.test_at_val_tau.get(name).copied(),
            None,
        ));
        // BV rows under this source.
        let bv = &scored[argmax(&|s: &EpochScores| s.val_score[name])];
        cells.push(make_cell(
            name,
            ConfigAxis::BestVal,
            TauAxis::TestSweep,
            bv,
            Some(bv.test_sweep),
            None,
        ));
        cells.push(make_cell(
            name,
            ConfigAxis::BestVal,
            TauAxis::ValEstimated,
            bv,
            bv.test_at_val_tau.get(name).copied(),
            None,
        ));
    }

    // Classification-criterion baselines.
    let cl = &scored[argmax(&|s: &EpochScores| s.classification_val)];
    cells.push(make_cell(
        "classification",
        ConfigAxis::BestVal,
        TauAxis::TestSweep,
        cl,
        Some(cl.test_sweep),
        None,
    ));
    cells.push(make_cell(
        "classification",
        ConfigAxis::BestVal,
        TauAxis::Otsu,
        cl,
        Some(cl.test_otsu),
        None,
    ));

    Ok(ProtocolMatrix { delta, cells })
}

/// Protocol matrix from precomputed scalar curves. The threshold-coupled
/// cells (VT, OT) need map archives and are marked unavailable; TT columns
/// report the test-series oracle score at the selected run/epoch.
pub fn protocol_matrix_from_curves(
    runs: &[RunManifest],
    sources: &[String],
    delta: f64,
) -> Result<ProtocolMatrix> {
    if runs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for run in runs {
        if run.test.is_empty() {
            return Err(Error::InvalidManifest {
                manifest: run.run_id.clone(),
                reason: "protocol matrix needs a test series".into(),
            });
        }
    }
    let oracle = Criterion::Loc("oracle".to_owned());

    let mut cells = Vec::new();
    let (bt_run, bt_epoch, bt_value) = select_config(runs, &oracle, Split::Test)?;
    cells.push(ProtocolCell {
        source: "oracle".into(),
        config_axis: ConfigAxis::BestTest,
        tau_axis: TauAxis::TestSweep,
        value: Some(bt_value),
        run_id: Some(bt_run),
        epoch: Some(bt_epoch),
        note: None,
    });

    let test_value_at = |run_id: &str, epoch: u32| -> Result<f64> {
        let run = runs.iter().find(|r| r.run_id == run_id).unwrap();
        let record = run.test.iter().find(|r| r.epoch == epoch).ok_or(
            Error::MissingCriterion {
                criterion: "loc:oracle".into(),
                epoch,
            },
        )?;
        criterion_value(record, &oracle)
    };

    for source in sources {
        let criterion = Criterion::Loc(source.clone());
        let (run_id, epoch, _) = select_config(runs, &criterion, Split::Val)?;
        let value = test_value_at(&run_id, epoch)?;
        cells.push(ProtocolCell {
            source: source.clone(),
            config_axis: ConfigAxis::BestVal,
            tau_axis: TauAxis::TestSweep,
            value: Some(value),
            run_id: Some(run_id.clone()),
            epoch: Some(epoch),
            note: None,
        });
        cells.push(ProtocolCell {
            source: source.clone(),
            config_axis: ConfigAxis::BestVal,
            tau_axis: TauAxis::ValEstimated,
            value: None,
            run_id: Some(run_id),
            epoch: Some(epoch),
            note: Some("unavailable: needs per-epoch map archives".into()),
        });
    }

    let (cl_run, cl_epoch, _) = select_config(runs, &Criterion::Classification, Split::Val)?;
    let cl_value = test_value_at(&cl_run, cl_epoch)?;
    cells.push(ProtocolCell {
        source: "classification".into(),
        config_axis: ConfigAxis::BestVal,
        tau_axis: TauAxis::TestSweep,
        value: Some(cl_value),
        run_id: Some(cl_run),
        epoch: Some(cl_epoch),
        note: None,
    });

    Ok(ProtocolMatrix { delta, cells })
}
