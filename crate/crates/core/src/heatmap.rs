//! Localization-map representation, normalization, binarization, and
//! automatic (Otsu) threshold computation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BinaryMask;

pub const DEFAULT_OTSU_BINS: usize = 256;
pub const DEFAULT_GRID_SIZE: usize = 1000;

/// H x W real-valued localization map with finite entries, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LocMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl LocMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMap("dimensions must be positive".into()));
        }
        if values.len() != width * height {
            return Err(Error::InvalidMap(format!(
                "expected {} values for a {width}x{height} map, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMap(format!(
                "non-finite value at row {} col {}",
                pos / width,
                pos % width
            )));
        }
        Ok(LocMap {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        LocMap::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// A [`LocMap`] rescaled to `[0, 1]`. A constant source map normalizes to all
/// zeros and is flagged degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedLocMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
    degenerate: bool,
}

impl NormalizedLocMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Coordinates of the maximum value; ties resolve to the lowest row-major
    /// index.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    /// Reinterprets the normalized grid as a plain map (for re-normalization
    /// checks and serialization).
    pub fn as_loc_map(&self) -> LocMap {
        LocMap {
            width: self.width,
            height: self.height,
            values: self.values.clone(),
        }
    }
}

/// Min-max normalization `(v - min) / (max - min)`. Constant maps become all
/// zeros with the degenerate flag set.
pub fn normalize(map: &LocMap) -> NormalizedLocMap {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    for &v in &map.values {
        min = min.min(v);
        max = max.max(v);
    }
    if min == max {
        return NormalizedLocMap {
            width: map.width,
            height: map.height,
            values: vec![0.0; map.values.len()],
            degenerate: true,
        };
    }
    let range = max - min;
    let values = map.values.iter().map(|v| (v - min) / range).collect();
    NormalizedLocMap {
        width: map.width,
        height: map.height,
        values,
        degenerate: false,
    }
}

/// Foreground mask `{v >= tau}`; the comparison is inclusive so `tau = 0`
/// selects every pixel.
pub fn binarize(map: &NormalizedLocMap, tau: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("threshold {tau} outside [0, 1]"),
        });
    }
    let bits = map.values.iter().map(|&v| v as f64 >= tau).collect();
    BinaryMask::new(map.width, map.height, bits)
}

/// Sorted binarization thresholds in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    thresholds: Vec<f64>,
}

impl ThresholdGrid {
    /// The evenly spaced grid `{i / count : i = 0..count-1}`.
    pub fn uniform(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter {
                name: "count",
                reason: "threshold grid needs at least one point".into(),
            });
        }
        let thresholds = (0..count).map(|i| i as f64 / count as f64).collect();
        Ok(ThresholdGrid { thresholds })
    }

    pub fn from_values(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidParameter {
                name: "thresholds",
                reason: "threshold grid needs at least one point".into(),
            });
        }
        for pair in thresholds.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidParameter {
                    name: "thresholds",
                    reason: "thresholds must be strictly increasing".into(),
                });
            }
        }
        if thresholds[0] < 0.0 || *thresholds.last().unwrap() >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "thresholds",
                reason: "thresholds must lie in [0, 1)".into(),
            });
        }
        Ok(ThresholdGrid { thresholds })
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.thresholds[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.thresholds.iter().copied()
    }

    /// Index of an exact grid point, if present.
    pub fn index_of(&self, tau: f64) -> Option<usize> {
        self.thresholds.iter().position(|t| *t == tau)
    }
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid::uniform(DEFAULT_GRID_SIZE).unwrap()
    }
}

/// Otsu threshold over a `bins`-bin histogram of the normalized map: every
/// interior bin boundary `i / bins` is evaluated and the one maximizing
/// between-class variance (equivalently minimizing weighted intra-class
/// variance) is returned; ties resolve to the lowest threshold.
pub fn otsu_threshold(map: &NormalizedLocMap, bins: usize) -> Result<f64> {
    if map.degenerate {
        return Err(Error::DegenerateMap);
    }
    if bins < 2 {
        return Err(Error::InvalidParameter {
            name: "bins",
            reason: "Otsu needs at least two histogram bins".into(),
        });
    }

    let mut hist = vec![0u64; bins];
    for &v in &map.values {
        let bin = ((v as f64 * bins as f64) as usize).min(bins - 1);
        hist[bin] += 1;
    }

    let total: u64 = hist.iter().sum();
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &c)| i as f64 * c as f64)
        .sum();

    // Prefix scan over boundaries i = 1..bins; background is bins < i.
    let mut best_boundary = 1usize;
    let mut best_var = f64::NEG_INFINITY;
    let mut count_bg = 0u64;
    let mut sum_bg = 0.0f64;
    for boundary in 1..bins {
        count_bg += hist[boundary - 1];
        sum_bg += (boundary - 1) as f64 * hist[boundary - 1] as f64;
        let count_fg = total - count_bg;
        if count_bg == 0 || count_fg == 0 {
            continue;
        }
        let mean_bg = sum_bg / count_bg as f64;
        let mean_fg = (total_sum - sum_bg) / count_fg as f64;
        let diff = mean_bg - mean_fg;
        let var_between = (count_bg as f64 / total as f64) * (count_fg as f64 / total as f64)
            * diff
            * diff;
        if var_between > best_var {
            best_var = var_between;
            best_boundary = boundary;
        }
    }
    if best_var == f64::NEG_INFINITY {
        // All mass in one bin even though the map is not constant can only
        // happen with very coarse binning; no boundary separates anything.
        return Err(Error::DegenerateMap);
    }
    Ok(best_boundary as f64 / bins as f64)
}
