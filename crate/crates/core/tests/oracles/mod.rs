//! Independent reference implementations used to cross-check the library.
//! Everything here recomputes results the slow, obvious way and never calls
//! the code paths under test.

// Shared by several test targets; each uses its own subset.
#![allow(dead_code)]

use wsol_core::geometry::{BBox, BinaryMask, Connectivity};
use wsol_core::heatmap::NormalizedLocMap;

/// IoU by counting pixels of integer-coordinate boxes on a raster.
pub fn rasterized_iou(a: &BBox, b: &BBox) -> f64 {
    let x_hi = a.x_max().max(b.x_max()).ceil() as usize;
    let y_hi = a.y_max().max(b.y_max()).ceil() as usize;
    let mut inter = 0u64;
    let mut union = 0u64;
    for y in 0..y_hi {
        for x in 0..x_hi {
            let (fx, fy) = (x as f64, y as f64);
            let in_a = a.contains_point(fx, fy);
            let in_b = b.contains_point(fx, fy);
            if in_a && in_b {
                inter += 1;
            }
            if in_a || in_b {
                union += 1;
            }
        }
    }
    inter as f64 / union as f64
}

/// Direct evaluation of the closed-form IoU, written independently of the
/// library's helpers.
pub fn analytic_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let ih = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let inter = iw * ih;
    let area = |r: &BBox| (r.x_max() - r.x_min()) * (r.y_max() - r.y_min());
    inter / (area(a) + area(b) - inter)
}

/// Connected components via explicit flood fill. Returns one sorted pixel-index
/// set per component, with the components sorted by their smallest pixel, so
/// two labelings can be compared up to label renaming.
pub fn flood_fill_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width(), mask.height());
    let mut visited = vec![false; w * h];
    let mut components = Vec::new();
    for start in 0..w * h {
        if visited[start] || !mask.get(start % w, start / w) {
            continue;
        }
        let mut stack = vec![start];
        let mut pixels = Vec::new();
        visited[start] = true;
        while let Some(idx) = stack.pop() {
            pixels.push(idx);
            let (x, y) = ((idx % w) as isize, (idx / w) as isize);
            let neighbors: &[(isize, isize)] = match connectivity {
                Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
                Connectivity::Eight => &[
                    (1, 0),
                    (-1, 0),
                    (0, 1),
                    (0, -1),
                    (1, 1),
                    (1, -1),
                    (-1, 1),
                    (-1, -1),
                ],
            };
            for (dx, dy) in neighbors {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if !visited[nidx] && mask.get(nx as usize, ny as usize) {
                    visited[nidx] = true;
                    stack.push(nidx);
                }
            }
        }
        pixels.sort_unstable();
        components.push(pixels);
    }
    components.sort_by_key(|pixels| pixels[0]);
    components
}

/// Pixel-index sets of a labeling produced by the library, in the same
/// canonical order as [`flood_fill_components`].
pub fn labeling_as_sets(labels: &[u32], component_count: usize) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); component_count];
    for (idx, &label) in labels.iter().enumerate() {
        if label > 0 {
            sets[(label - 1) as usize].push(idx);
        }
    }
    for set in &mut sets {
        set.sort_unstable();
    }
    sets.sort_by_key(|pixels| pixels[0]);
    sets
}

/// Brute-force Otsu: for every interior bin boundary, recompute both cluster
/// means and variances with plain loops and minimize the weighted intra-class
/// variance; ties take the lowest boundary.
pub fn brute_force_otsu(map: &NormalizedLocMap, bins: usize) -> f64 {
    let mut hist = vec![0u64; bins];
    for &v in map.values() {
        let bin = ((v as f64 * bins as f64) as usize).min(bins - 1);
        hist[bin] += 1;
    }
    let total: u64 = hist.iter().sum();
    let class_stats = |range: std::ops::Range<usize>| -> (u64, f64) {
        let count: u64 = range.clone().map(|i| hist[i]).sum();
        if count == 0 {
            return (0, 0.0);
        }
        let mean = range.clone().map(|i| i as f64 * hist[i] as f64).sum::<f64>() / count as f64;
        let variance = range
            .map(|i| hist[i] as f64 * (i as f64 - mean) * (i as f64 - mean))
            .sum::<f64>()
            / count as f64;
        (count, variance)
    };
    let mut best_boundary = 1usize;
    let mut best = f64::INFINITY;
    for boundary in 1..bins {
        let (n_bg, var_bg) = class_stats(0..boundary);
        let (n_fg, var_fg) = class_stats(boundary..bins);
        if n_bg == 0 || n_fg == 0 {
            continue;
        }
        let weighted =
            n_bg as f64 / total as f64 * var_bg + n_fg as f64 / total as f64 * var_fg;
        if weighted < best {
            best = weighted;
            best_boundary = boundary;
        }
    }
    best_boundary as f64 / bins as f64
}

/// Brute-force Otsu by maximizing between-class variance instead, for the
/// two-route agreement check.
pub fn brute_force_otsu_between(map: &NormalizedLocMap, bins: usize) -> f64 {
    let mut hist = vec![0u64; bins];
    for &v in map.values() {
        let bin = ((v as f64 * bins as f64) as usize).min(bins - 1);
        hist[bin] += 1;
    }
    let total: u64 = hist.iter().sum();
    let mut best_boundary = 1usize;
    let mut best = f64::NEG_INFINITY;
    for boundary in 1..bins {
        let n_bg: u64 = hist[..boundary].iter().sum();
        let n_fg = total - n_bg;
        if n_bg == 0 || n_fg == 0 {
            continue;
        }
        let mean_bg = hist[..boundary]
            .iter()
            .enumerate()
            .map(|(i, &c)| i as f64 * c as f64)
            .sum::<f64>()
            / n_bg as f64;
        let mean_fg = hist[boundary..]
            .iter()
            .enumerate()
            .map(|(i, &c)| (i + boundary) as f64 * c as f64)
            .sum::<f64>()
            / n_fg as f64;
        let var = n_bg as f64 * n_fg as f64 / (total as f64 * total as f64)
            * (mean_bg - mean_fg)
            * (mean_bg - mean_fg);
        if var > best {
            best = var;
            best_boundary = boundary;
        }
    }
    best_boundary as f64 / bins as f64
}

/// Per-image best IoU against references at one threshold, recomputed from
/// scratch: manual mask, flood-fill components, manual tight boxes.
pub fn brute_force_image_iou(
    map: &NormalizedLocMap,
    references: &[BBox],
    tau: f64,
    connectivity: Connectivity,
    largest_only: bool,
) -> f64 {
    let (w, h) = (map.width(), map.height());
    let mask = BinaryMask::from_fn(w, h, |x, y| map.get(x, y) as f64 >= tau);
    let components = flood_fill_components(&mask, connectivity);
    if components.is_empty() {
        return 0.0;
    }
    let candidate_sets: Vec<&Vec<usize>> = if largest_only {
        // Most pixels; ties by smallest first pixel, which the canonical
        // ordering already gives us.
        let best = components
            .iter()
            .enumerate()
            .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))
            .map(|(i, _)| i)
            .unwrap();
        vec![&components[best]]
    } else {
        components.iter().collect()
    };
    let mut best = 0.0f64;
    for pixels in candidate_sets {
        let xs: Vec<usize> = pixels.iter().map(|p| p % w).collect();
        let ys: Vec<usize> = pixels.iter().map(|p| p / w).collect();
        let bbox = BBox::new(
            *xs.iter().min().unwrap() as f64,
            *ys.iter().min().unwrap() as f64,
            (*xs.iter().max().unwrap() + 1) as f64,
            (*ys.iter().max().unwrap() + 1) as f64,
        )
        .unwrap();
        for reference in references {
            best = best.max(analytic_iou(&bbox, reference));
        }
    }
    best
}

/// Greedy merge order recomputed naively: every step rescans all adjacent
/// pairs for the global best similarity (ties to the smallest pair).
pub fn naive_merge_order(
    seg: &wsol_core::proposals::Segmentation,
    weights: &wsol_core::proposals::SimilarityWeights,
) -> Vec<(u32, u32)> {
    use std::collections::{BTreeMap, BTreeSet};
    use wsol_core::proposals::{similarity, RegionFeatures};

    let image_area = seg.width() * seg.height();
    let mut features: BTreeMap<u32, RegionFeatures> = (1..=seg.region_count() as u32)
        .map(|label| (label, seg.region(label).clone()))
        .collect();
    let mut adjacency: BTreeSet<(u32, u32)> = seg.adjacency().into_iter().collect();
    let mut order = Vec::new();
    let mut next_id = seg.region_count() as u32;

    while !adjacency.is_empty() {
        let mut best_pair = None;
        let mut best_sim = f64::NEG_INFINITY;
        for &(a, b) in &adjacency {
            let s = similarity(&features[&a], &features[&b], image_area, weights);
            if s > best_sim {
                best_sim = s;
                best_pair = Some((a, b));
            }
        }
        let (a, b) = best_pair.unwrap();
        order.push((a, b));
        next_id += 1;
        let merged = features[&a].merged(&features[&b]);
        features.remove(&a);
        features.remove(&b);
        let mut new_adjacency = BTreeSet::new();
        for &(p, q) in &adjacency {
            if (p, q) == (a, b) {
                continue;
            }
            let p2 = if p == a || p == b { next_id } else { p };
            let q2 = if q == a || q == b { next_id } else { q };
            if p2 != q2 {
                new_adjacency.insert((p2.min(q2), p2.max(q2)));
            }
        }
        adjacency = new_adjacency;
        features.insert(next_id, merged);
    }
    order
}
