//! Seeded noisy-box generator for annotation-robustness studies.
//!
//! Each noise level `L` in 1..=10 bounds every deformation magnitude at
//! `d = 5 * L` percent. A box is perturbed by (1) scaling width and height
//! independently about the center by factors `1 + u`, `u ~ U(-d, d)`, (2)
//! shifting the center per axis by a `U(-d, d)` fraction of the new box
//! dimensions, and (3) with probability `d` applying an area-preserving
//! aspect change (width times `1 + v`, height divided by the same), before
//! clamping to image bounds with a one-pixel minimum side.
//!
//! Randomness is pinned for cross-platform reproducibility: every box draws
//! exactly six uniforms from a ChaCha12 stream keyed by
//! `(seed, fnv1a64(image_id), box_index)`, each uniform taken as the top 53
//! bits of one `u64` output. Level 0 is accepted as an engineering extension
//! and leaves boxes unchanged.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp_rect, iou, BBox};
use crate::formats::BoxRecord;

/// Noise level and stream seed for one perturbation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    level: u8,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(level: u8, seed: u64) -> Result<Self> {
        if level > 10 {
            return Err(Error::InvalidParameter {
                name: "level",
                reason: format!("noise level {level} outside 0..=10"),
            });
        }
        Ok(NoiseSpec { level, seed })
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Maximum deformation as a fraction: `0.05 * level`.
    pub fn max_deformation(&self) -> f64 {
        self.level as f64 * 0.05
    }
}

/// Which deformation steps run; the full generator enables all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbSteps {
    pub scale: bool,
    pub shift: bool,
    pub aspect: bool,
}

impl Default for PerturbSteps {
    fn default() -> Self {
        PerturbSteps {
            scale: true,
            shift: true,
            aspect: true,
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Independent per-box stream so parallel and sequential runs agree.
pub fn box_rng(seed: u64, image_id: &str, box_index: usize) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(image_id.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&(box_index as u64).to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

/// Uniform in [0, 1) from the top 53 bits of one generator output.
fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [-bound, bound).
fn signed_uniform(rng: &mut impl RngCore, bound: f64) -> f64 {
    (2.0 * unit_uniform(rng) - 1.0) * bound
}

/// Applies the full deformation sequence to one box. Always consumes exactly
/// six uniforms so streams stay aligned whatever the level or step set.
pub fn perturb_box(
    bbox: &BBox,
    spec: &NoiseSpec,
    image_w: u32,
    image_h: u32,
    rng: &mut impl RngCore,
) -> BBox {
    perturb_box_steps(bbox, spec, image_w, image_h, rng, PerturbSteps::default())
}

/// [`perturb_box`] with individual deformation steps disabled (used by the
/// bound-checking suites).
pub fn perturb_box_steps(
    bbox: &BBox,
    spec: &NoiseSpec,
    image_w: u32,
    image_h: u32,
    rng: &mut impl RngCore,
    steps: PerturbSteps,
) -> BBox {
    let d = spec.max_deformation();
    let scale_w = 1.0 + signed_uniform(rng, d);
    let scale_h = 1.0 + signed_uniform(rng, d);
    let shift_x = signed_uniform(rng, d);
    let shift_y = signed_uniform(rng, d);
    let aspect_gate = unit_uniform(rng);
    let aspect = 1.0 + signed_uniform(rng, d);

    let mut cx = (bbox.x_min() + bbox.x_max()) * 0.5;
    let mut cy = (bbox.y_min() + bbox.y_max()) * 0.5;
    let mut w = bbox.width();
    let mut h = bbox.height();

    if steps.scale {
        w *= scale_w;
        h *= scale_h;
    }
    if steps.shift {
        cx += shift_x * w;
        cy += shift_y * h;
    }
    if steps.aspect && aspect_gate < d {
        w *= aspect;
        h /= aspect;
    }

    let clamped = clamp_rect(
        cx - w * 0.5,
        cy - h * 0.5,
        cx + w * 0.5,
        cy + h * 0.5,
        image_w,
        image_h,
    );
    enforce_min_side(&clamped, image_w, image_h)
}

/// Grows either side to one pixel if the clamp left it thinner, staying in
/// bounds.
fn enforce_min_side(bbox: &BBox, image_w: u32, image_h: u32) -> BBox {
    let fix_axis = |min: f64, max: f64, bound: f64| -> (f64, f64) {
        if max - min >= 1.0 {
            (min, max)
        } else if min + 1.0 <= bound {
            (min, min + 1.0)
        } else {
            ((bound - 1.0).max(0.0), bound)
        }
    };
    let (x_min, x_max) = fix_axis(bbox.x_min(), bbox.x_max(), image_w as f64);
    let (y_min, y_max) = fix_axis(bbox.y_min(), bbox.y_max(), image_h as f64);
    BBox::new(x_min, y_min, x_max, y_max).expect("min-side enforcement keeps boxes valid")
}

/// Summary of one perturbation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbSummary {
    pub level: u8,
    pub seed: u64,
    pub boxes: usize,
    /// Mean IoU between each noisy box and its original.
    pub mean_iou_vs_original: f64,
}

/// Perturbs every record, deriving each box's stream from
/// `(seed, image_id, index-within-image)`. Records must carry image
/// dimensions.
pub fn perturb_dataset(
    records: &[BoxRecord],
    spec: &NoiseSpec,
) -> Result<(Vec<BoxRecord>, PerturbSummary)> {
    let mut out = Vec::with_capacity(records.len());
    let mut iou_sum = 0.0f64;
    let mut per_image_index: std::collections::BTreeMap<&str, usize> = Default::default();
    for record in records {
        let (w, h) = match (record.image_width, record.image_height) {
            (Some(w), Some(h)) => (w, h),
            _ => {
                return Err(Error::MissingAnnotation {
                    image_id: record.image_id.clone(),
                    annotation: "image dimensions".into(),
                })
            }
        };
        let index = per_image_index.entry(record.image_id.as_str()).or_insert(0);
        let mut rng = box_rng(spec.seed, &record.image_id, *index);
        *index += 1;
        let noisy = perturb_box(&record.bbox, spec, w, h, &mut rng);
        iou_sum += iou(&noisy, &record.bbox);
        out.push(BoxRecord {
            bbox: noisy,
            ..record.clone()
        });
    }
    let summary = PerturbSummary {
        level: spec.level,
        seed: spec.seed,
        boxes: records.len(),
        mean_iou_vs_original: if records.is_empty() {
            1.0
        } else {
            iou_sum / records.len() as f64
        },
    };
    Ok((out, summary))
}
