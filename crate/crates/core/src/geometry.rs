//! Bounding-box arithmetic, binary-mask analysis, and box extraction.
//!
//! Boxes are axis-aligned with real-valued pixel coordinates and are half-open
//! on the max side: a box covers `[x_min, x_max) x [y_min, y_max)`, so the area
//! is exactly `(x_max - x_min) * (y_max - y_min)` and an integer-coordinate box
//! `(0, 0, 3, 3)` covers the nine pixels with coordinates in `0..3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// Axis-aligned rectangle in pixel coordinates, half-open on the max side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    /// Builds a box, rejecting non-finite, negative, or zero-area coordinates.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let reject = |reason| Error::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            reason,
        };
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(reject("coordinates must be finite"));
        }
        if coords.iter().any(|c| *c < 0.0) {
            return Err(reject("coordinates must be non-negative"));
        }
        if x_min >= x_max || y_min >= y_max {
            return Err(reject("box must have strictly positive area"));
        }
        Ok(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Half-open membership test for a point.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    /// Smallest box enclosing both operands.
    pub fn enclosing(&self, other: &BBox) -> BBox {
        BBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
        }
    }

    fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }
}

/// Intersection over union of two boxes; symmetric, zero when disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    inter / union
}

/// Intersects `b` with `[0, width) x [0, height)`. When the intersection is
/// empty or degenerate on an axis, that axis snaps to the nearest in-bounds
/// unit interval, so a fully out-of-bounds box becomes a 1x1 box at the
/// nearest corner.
pub fn clamp_box(b: &BBox, width: u32, height: u32) -> BBox {
    clamp_rect(b.x_min, b.y_min, b.x_max, b.y_max, width, height)
}

/// [`clamp_box`] for raw rectangle coordinates that may not satisfy the
/// [`BBox`] invariants yet (negative or out-of-bounds sides), as produced by
/// perturbation intermediates and unvalidated file rows. Inputs must be
/// finite with `x_min < x_max` and `y_min < y_max`.
pub fn clamp_rect(
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
    width: u32,
    height: u32,
) -> BBox {
    let clamp_axis = |min: f64, max: f64, bound: f64| -> (f64, f64) {
        let lo = min.max(0.0);
        let hi = max.min(bound);
        if lo < hi {
            (lo, hi)
        } else if max <= 0.0 {
            (0.0, 1.0_f64.min(bound))
        } else {
            ((bound - 1.0).max(0.0), bound)
        }
    };
    let (x_min, x_max) = clamp_axis(x_min, x_max, width as f64);
    let (y_min, y_max) = clamp_axis(y_min, y_max, height as f64);
    BBox {
        x_min,
        y_min,
        x_max,
        y_max,
    }
}

/// Row-major boolean pixel grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidParameter {
                name: "bits",
                reason: format!(
                    "expected {} bits for a {width}x{height} mask, got {}",
                    width * height,
                    bits.len()
                ),
            });
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count_foreground(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Pixel neighborhood used when growing connected components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Dense component labeling of a binary mask. Label 0 is background; labels
/// `1..=component_count` are assigned in scan order of each component's first
/// pixel.
#[derive(Debug, Clone)]
pub struct ComponentLabeling {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    areas: Vec<usize>,
}

impl ComponentLabeling {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn component_count(&self) -> usize {
        self.areas.len()
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Pixel count of component `label` (1-based).
    pub fn area(&self, label: u32) -> usize {
        self.areas[(label - 1) as usize]
    }

    pub fn areas(&self) -> &[usize] {
        &self.areas
    }
}

/// Labels connected foreground components of `mask` under the chosen
/// connectivity. An all-background mask yields zero components.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentLabeling {
    let (w, h) = (mask.width, mask.height);
    let mut forest = UnionFind::new(w * h);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let idx = (y * w + x) as u32;
            // Union with already-visited neighbors: W, N, and for 8-connectivity NW/NE.
            if x > 0 && mask.get(x - 1, y) {
                forest.union(idx, idx - 1);
            }
            if y > 0 {
                if mask.get(x, y - 1) {
                    forest.union(idx, idx - w as u32);
                }
                if connectivity == Connectivity::Eight {
                    if x > 0 && mask.get(x - 1, y - 1) {
                        forest.union(idx, idx - w as u32 - 1);
                    }
                    if x + 1 < w && mask.get(x + 1, y - 1) {
                        forest.union(idx, idx - w as u32 + 1);
                    }
                }
            }
        }
    }

    let mut labels = vec![0u32; w * h];
    let mut areas = Vec::new();
    let mut root_to_label = vec![0u32; w * h];
    for (i, label_slot) in labels.iter_mut().enumerate() {
        if !mask.bits[i] {
            continue;
        }
        let root = forest.find(i as u32) as usize;
        if root_to_label[root] == 0 {
            areas.push(0);
            root_to_label[root] = areas.len() as u32;
        }
        let label = root_to_label[root];
        *label_slot = label;
        areas[(label - 1) as usize] += 1;
    }

    ComponentLabeling {
        width: w,
        height: h,
        labels,
        areas,
    }
}

/// Which components of a mask are turned into boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionMode {
    /// One tight box around the component with the most pixels
    /// (ties broken by smallest label).
    LargestComponent,
    /// A tight box around every component, in label order.
    AllComponents,
}

/// Tight boxes around mask components. Empty masks yield an empty list.
pub fn boxes_from_mask(
    mask: &BinaryMask,
    connectivity: Connectivity,
    mode: ExtractionMode,
) -> Vec<BBox> {
    let labeling = connected_components(mask, connectivity);
    boxes_from_labeling(&labeling, mode)
}

/// Same as [`boxes_from_mask`] for a precomputed labeling.
pub fn boxes_from_labeling(labeling: &ComponentLabeling, mode: ExtractionMode) -> Vec<BBox> {
    let n = labeling.component_count();
    if n == 0 {
        return Vec::new();
    }
    // (min_x, min_y, max_x, max_y) in inclusive pixel coordinates.
    let mut extents = vec![(usize::MAX, usize::MAX, 0usize, 0usize); n];
    for y in 0..labeling.height {
        for x in 0..labeling.width {
            let label = labeling.label(x, y);
            if label == 0 {
                continue;
            }
            let e = &mut extents[(label - 1) as usize];
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
        }
    }
    let to_box = |e: &(usize, usize, usize, usize)| BBox {
        x_min: e.0 as f64,
        y_min: e.1 as f64,
        x_max: (e.2 + 1) as f64,
        y_max: (e.3 + 1) as f64,
    };
    match mode {
        ExtractionMode::AllComponents => extents.iter().map(to_box).collect(),
        ExtractionMode::LargestComponent => {
            let mut best = 0usize;
            for i in 1..n {
                if labeling.areas[i] > labeling.areas[best] {
                    best = i;
                }
            }
            vec![to_box(&extents[best])]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> BBox {
        BBox::new(x_min, y_min, x_max, y_max).unwrap()
    }

    #[test]
    fn iou_identity_is_one() {
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        let b = bbox(20.0, 20.0, 30.0, 30.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn iou_overlapping_pair() {
        // Pixel counting on an integer grid: intersection 5x5 = 25,
        // union 100 + 100 - 25 = 175.
        let a = bbox(0.0, 0.0, 10.0, 10.0);
        let b = bbox(5.0, 5.0, 15.0, 15.0);
        let expected = 25.0 / 175.0;
        assert!((iou(&a, &b) - expected).abs() < 1e-15);
        assert!((iou(&b, &a) - expected).abs() < 1e-15);
    }

    #[test]
    fn degenerate_boxes_rejected_at_construction() {
        assert!(BBox::new(0.0, 0.0, 0.0, 10.0).is_err());
        assert!(BBox::new(5.0, 0.0, 4.0, 10.0).is_err());
        assert!(BBox::new(-1.0, 0.0, 4.0, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::NAN, 10.0).is_err());
        assert!(BBox::new(0.0, 0.0, f64::INFINITY, 10.0).is_err());
    }

    #[test]
    fn connected_components_empty_mask() {
        let mask = BinaryMask::filled(4, 4, false);
        let labeling = connected_components(&mask, Connectivity::Eight);
        assert_eq!(labeling.component_count(), 0);
    }

    #[test]
    fn connected_components_full_mask() {
        let mask = BinaryMask::filled(4, 4, true);
        let labeling = connected_components(&mask, Connectivity::Four);
        assert_eq!(labeling.component_count(), 1);
        assert_eq!(labeling.area(1), 16);
    }

    #[test]
    fn connectivity_splits_diagonal_pixels() {
        let mut mask = BinaryMask::filled(2, 2, false);
        mask.set(0, 0, true);
        mask.set(1, 1, true);
        assert_eq!(
            connected_components(&mask, Connectivity::Four).component_count(),
            2
        );
        assert_eq!(
            connected_components(&mask, Connectivity::Eight).component_count(),
            1
        );
    }

    #[test]
    fn labels_are_dense_and_areas_sum_to_foreground() {
        let mask = BinaryMask::from_fn(8, 8, |x, y| (x + y) % 3 == 0);
        let labeling = connected_components(&mask, Connectivity::Four);
        let max_label = *labeling.labels().iter().max().unwrap();
        assert_eq!(max_label as usize, labeling.component_count());
        let total: usize = labeling.areas().iter().sum();
        assert_eq!(total, mask.count_foreground());
    }

    #[test]
    fn boxes_from_mask_tight_box() {
        let mask = BinaryMask::from_fn(8, 8, |x, y| x < 3 && y < 3);
        let boxes = boxes_from_mask(&mask, Connectivity::Eight, ExtractionMode::AllComponents);
        assert_eq!(boxes, vec![bbox(0.0, 0.0, 3.0, 3.0)]);
    }

    #[test]
    fn boxes_from_mask_empty() {
        let mask = BinaryMask::filled(4, 4, false);
        assert!(boxes_from_mask(&mask, Connectivity::Eight, ExtractionMode::AllComponents)
            .is_empty());
    }

    #[test]
    fn largest_component_picks_bigger_blob() {
        // 2x2 blob at origin, 3x3 blob at (4, 4).
        let mask = BinaryMask::from_fn(8, 8, |x, y| {
            (x < 2 && y < 2) || ((4..7).contains(&x) && (4..7).contains(&y))
        });
        let all = boxes_from_mask(&mask, Connectivity::Eight, ExtractionMode::AllComponents);
        assert_eq!(all.len(), 2);
        let largest = boxes_from_mask(&mask, Connectivity::Eight, ExtractionMode::LargestComponent);
        assert_eq!(largest, vec![bbox(4.0, 4.0, 7.0, 7.0)]);
    }

    #[test]
    fn largest_component_tie_takes_smallest_label() {
        // Two 2x2 blobs; the one whose first pixel appears earlier in scan
        // order gets label 1 and wins the tie.
        let mask = BinaryMask::from_fn(8, 8, |x, y| {
            (x < 2 && y < 2) || ((5..7).contains(&x) && (5..7).contains(&y))
        });
        let largest = boxes_from_mask(&mask, Connectivity::Eight, ExtractionMode::LargestComponent);
        assert_eq!(largest, vec![bbox(0.0, 0.0, 2.0, 2.0)]);
    }

    #[test]
    fn clamp_rect_truncates_negative_side() {
        assert_eq!(
            clamp_rect(-5.0, -5.0, 5.0, 5.0, 100, 100),
            bbox(0.0, 0.0, 5.0, 5.0)
        );
    }

    #[test]
    fn clamp_box_in_bounds_is_identity() {
        let inside = bbox(10.0, 10.0, 20.0, 20.0);
        assert_eq!(clamp_box(&inside, 100, 100), inside);
    }

    #[test]
    fn clamp_box_out_of_bounds_snaps_to_corner() {
        let b = bbox(150.0, 150.0, 160.0, 160.0);
        assert_eq!(clamp_box(&b, 100, 100), bbox(99.0, 99.0, 100.0, 100.0));
    }

    #[test]
    fn clamp_box_partial_overlap() {
        let b = bbox(90.0, 10.0, 160.0, 20.0);
        assert_eq!(clamp_box(&b, 100, 100), bbox(90.0, 10.0, 100.0, 20.0));
    }
}
