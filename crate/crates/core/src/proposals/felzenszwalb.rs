//! Graph-based image segmentation over the 8-neighbor pixel graph.
//!
//! Edges weighted by Euclidean RGB distance are processed in ascending order;
//! two components merge when the connecting weight does not exceed either
//! component's internal difference plus `k / |C|`. A final pass absorbs
//! regions smaller than `min_size` through their lowest-weight boundary edge,
//! and labels are renumbered densely in scan order so the result is identical
//! across runs.

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

use super::{RgbGrid, Segmentation};

struct Edge {
    weight: f32,
    a: u32,
    b: u32,
}

fn color_distance(p: [u8; 3], q: [u8; 3]) -> f32 {
    let mut sum = 0.0f32;
    for c in 0..3 {
        let d = p[c] as f32 - q[c] as f32;
        sum += d * d;
    }
    sum.sqrt()
}

fn build_edges(image: &RgbGrid) -> Vec<Edge> {
    let (w, h) = (image.width(), image.height());
    let mut edges = Vec::with_capacity(4 * w * h);
    let idx = |x: usize, y: usize| (y * w + x) as u32;
    for y in 0..h {
        for x in 0..w {
            let here = image.get(x, y);
            let mut push = |nx: usize, ny: usize| {
                edges.push(Edge {
                    weight: color_distance(here, image.get(nx, ny)),
                    a: idx(x, y),
                    b: idx(nx, ny),
                });
            };
            if x + 1 < w {
                push(x + 1, y);
            }
            if y + 1 < h {
                push(x, y + 1);
                if x + 1 < w {
                    push(x + 1, y + 1);
                }
                if x > 0 {
                    push(x - 1, y + 1);
                }
            }
        }
    }
    // Stable order: ascending weight, then the pixel indices. Weights are
    // finite so total_cmp is a plain total order.
    edges.sort_unstable_by(|p, q| {
        p.weight
            .total_cmp(&q.weight)
            .then(p.a.cmp(&q.a))
            .then(p.b.cmp(&q.b))
    });
    edges
}

/// Segments `image` into regions; `k` controls the preference for larger
/// components and `min_size` the smallest surviving region.
pub fn felzenszwalb_segment(image: &RgbGrid, k: f64, min_size: usize) -> Result<Segmentation> {
    if k <= 0.0 || !k.is_finite() {
        return Err(Error::InvalidParameter {
            name: "k",
            reason: format!("scale parameter must be positive, got {k}"),
        });
    }
    if min_size == 0 {
        return Err(Error::InvalidParameter {
            name: "min_size",
            reason: "minimum region size must be at least 1".into(),
        });
    }

    let (w, h) = (image.width(), image.height());
    let n = w * h;
    let edges = build_edges(image);

    let mut forest = UnionFind::new(n);
    // Internal difference of each component, indexed by current root.
    let mut internal = vec![0.0f32; n];
    for edge in &edges {
        let ra = forest.find(edge.a);
        let rb = forest.find(edge.b);
        if ra == rb {
            continue;
        }
        let threshold_a = internal[ra as usize] + (k / forest.size_of(ra) as f64) as f32;
        let threshold_b = internal[rb as usize] + (k / forest.size_of(rb) as f64) as f32;
        if edge.weight <= threshold_a.min(threshold_b) {
            let root = forest.union(ra, rb);
            internal[root as usize] = edge.weight;
        }
    }

    // Absorb undersized regions through their cheapest boundary edges.
    for edge in &edges {
        let ra = forest.find(edge.a);
        let rb = forest.find(edge.b);
        if ra != rb
            && ((forest.size_of(ra) as usize) < min_size
                || (forest.size_of(rb) as usize) < min_size)
        {
            forest.union(ra, rb);
        }
    }

    // Dense labels in scan order of each region's first pixel.
    let mut labels = vec![0u32; n];
    let mut next = 0u32;
    let mut root_label = vec![0u32; n];
    for (i, label_slot) in labels.iter_mut().enumerate() {
        let root = forest.find(i as u32) as usize;
        if root_label[root] == 0 {
            next += 1;
            root_label[root] = next;
        }
        *label_slot = root_label[root];
    }

    Segmentation::from_labels(image, labels)
}
