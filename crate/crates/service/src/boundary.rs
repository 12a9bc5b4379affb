//! Decision boundaries of 2-D hypotheses as line segments, clipped to a box.

use serde::Serialize;

use prederr::domain::Label;
use prederr::learners::{predict, Hypothesis, LinearHypothesis};

/// Axis-aligned box `[lo.0, hi.0] × [lo.1, hi.1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lo: (f64, f64),
    pub hi: (f64, f64),
}

impl Bounds {
    /// Bounding box of `points`, widened by `pad` of its extent on every side
    /// (at least 0.5 so single points still get a box).
    pub fn around(points: &[[f64; 2]], pad: f64) -> Option<Bounds> {
        let first = points.first()?;
        let (mut lo, mut hi) = ((first[0], first[1]), (first[0], first[1]));
        for p in points {
            lo = (lo.0.min(p[0]), lo.1.min(p[1]));
            hi = (hi.0.max(p[0]), hi.1.max(p[1]));
        }
        let px = ((hi.0 - lo.0) * pad).max(0.5);
        let py = ((hi.1 - lo.1) * pad).max(0.5);
        Some(Bounds { lo: (lo.0 - px, lo.1 - py), hi: (hi.0 + px, hi.1 + py) })
    }

    fn contains(&self, p: [f64; 2], eps: f64) -> bool {
        p[0] >= self.lo.0 - eps && p[0] <= self.hi.0 + eps && p[1] >= self.lo.1 - eps && p[1] <= self.hi.1 + eps
    }
}

pub type Segment = [[f64; 2]; 2];

/// The line `w·v + b = 0` clipped to `bounds`; `None` when `w = 0` or the
/// line misses the box.
pub fn linear_segment(h: &LinearHypothesis, bounds: &Bounds) -> Option<Segment> {
    if h.w.len() != 2 {
        return None;
    }
    let (w1, w2, b) = (h.w[0], h.w[1], h.b);
    if w1 == 0.0 && w2 == 0.0 {
        return None;
    }
    let eps = 1e-9 * (bounds.hi.0 - bounds.lo.0).abs().max(bounds.hi.1 - bounds.lo.1).max(1.0);
    let mut hits: Vec<[f64; 2]> = Vec::new();
    if w2 != 0.0 {
        for x in [bounds.lo.0, bounds.hi.0] {
            hits.push([x, -(w1 * x + b) / w2]);
        }
    }
    if w1 != 0.0 {
        for y in [bounds.lo.1, bounds.hi.1] {
            hits.push([-(w2 * y + b) / w1, y]);
        }
    }
    hits.retain(|p| bounds.contains(*p, eps));
    hits.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    hits.dedup_by(|a, b| (a[0] - b[0]).abs() <= eps && (a[1] - b[1]).abs() <= eps);
    match hits.as_slice() {
        [p, .., q] => Some([*p, *q]),
        _ => None,
    }
}

/// Marching squares over the hypothesis' labels on an `n × n` grid.
pub fn traced_segments(h: &Hypothesis, bounds: &Bounds, n: usize) -> Vec<Segment> {
    let n = n.max(2);
    let at = |i: usize, j: usize| {
        [
            bounds.lo.0 + (bounds.hi.0 - bounds.lo.0) * i as f64 / (n - 1) as f64,
            bounds.lo.1 + (bounds.hi.1 - bounds.lo.1) * j as f64 / (n - 1) as f64,
        ]
    };
    let grid: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| matches!(predict(h, &at(i, j)), Ok(Label::One))).collect())
        .collect();
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];

    let mut out = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            // Corners counter-clockwise from bottom-left.
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mut crossings = Vec::new();
            for k in 0..4 {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                if grid[a.0][a.1] != grid[b.0][b.1] {
                    crossings.push(mid(at(a.0, a.1), at(b.0, b.1)));
                }
            }
            for pair in crossings.chunks_exact(2) {
                out.push([pair[0], pair[1]]);
            }
        }
    }
    out
}

/// Boundary of a 2-D hypothesis; empty for other dimensionalities.
pub fn boundary_segments(h: &Hypothesis, bounds: &Bounds) -> Vec<Segment> {
    if h.dim() != 2 {
        return Vec::new();
    }
    match h {
        Hypothesis::Linear(l) => linear_segment(l, bounds).into_iter().collect(),
        Hypothesis::Memorized(_) => traced_segments(h, bounds, 48),
    }
}
