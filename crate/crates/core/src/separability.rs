//! Strict linear separability of finite point sets.
//!
//! [`strictly_separable`] decides separability with a margin-1 linear
//! feasibility problem solved by the phase-1 simplex in [`crate::simplex`].
//! [`hulls_intersect`] is an independent small-scale oracle: it looks for a
//! common point of the two convex hulls by enumerating basic solutions of the
//! convex-combination system, without any simplex machinery. The two must
//! always disagree (separable ⇔ hulls disjoint).
//!
//! [`kirchberger_witness`] finds a minimum-cardinality non-separable subset;
//! by Kirchberger's theorem it never needs more than `d + 2` points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Label, Row};
use crate::learners::LinearHypothesis;
use crate::simplex::{self, LpError};

/// Phase-1 infeasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Point-count cap for [`hulls_intersect`].
pub const HULL_ORACLE_MAX_POINTS: usize = 12;
/// Dimension cap for [`hulls_intersect`].
pub const HULL_ORACLE_MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeparabilityError {
    #[error("point has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hull oracle supports at most {max_points} points in dimension <= {max_dim}; got {points} points in dimension {dim}")]
    SizeCap { points: usize, dim: usize, max_points: usize, max_dim: usize },
    #[error(transparent)]
    Solver(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityVerdict {
    pub separable: bool,
    /// Present iff `separable`; scores ≥ 1 on positives and ≤ −1 on negatives.
    pub witness: Option<LinearHypothesis>,
}

fn common_dim(pos: &[Vec<f64>], neg: &[Vec<f64>]) -> Result<usize, SeparabilityError> {
    let d = pos.first().or(neg.first()).map_or(0, Vec::len);
    for p in pos.iter().chain(neg) {
        if p.len() != d {
            return Err(SeparabilityError::DimensionMismatch { expected: d, got: p.len() });
        }
    }
    Ok(d)
}

/// Decides whether some hyperplane puts every point of `pos` strictly on one
/// side and every point of `neg` strictly on the other.
pub fn strictly_separable(
    pos: &[Vec<f64>],
    neg: &[Vec<f64>],
) -> Result<SeparabilityVerdict, SeparabilityError> {
    let d = common_dim(pos, neg)?;
    if pos.is_empty() || neg.is_empty() {
        let b = if neg.is_empty() { 2.0 } else { -2.0 };
        return Ok(SeparabilityVerdict {
            separable: true,
            witness: Some(LinearHypothesis { w: vec![0.0; d], b }),
        });
    }

    // Map every coordinate onto [0, 1] before solving.
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in pos.iter().chain(neg) {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let span: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| if h > l { h - l } else { 1.0 }).collect();
    let scale = |p: &[f64], sign: f64| -> Vec<f64> {
        let mut row: Vec<f64> = (0..d).map(|j| sign * (p[j] - lo[j]) / span[j]).collect();
        row.push(sign);
        row
    };

    let mut rows = Vec::with_capacity(pos.len() + neg.len());
    rows.extend(pos.iter().map(|p| scale(p, 1.0)));
    rows.extend(neg.iter().map(|q| scale(q, -1.0)));
    let rhs = vec![1.0; rows.len()];

    let Some(sol) = simplex::find_feasible(&rows, &rhs, d + 1, FEASIBILITY_TOL)? else {
        return Ok(SeparabilityVerdict { separable: false, witness: None });
    };
    let w: Vec<f64> = (0..d).map(|j| sol[j] / span[j]).collect();
    let b = sol[d] - w.iter().zip(&lo).map(|(w, l)| w * l).sum::<f64>();
    Ok(SeparabilityVerdict { separable: true, witness: Some(LinearHypothesis { w, b }) })
}

/// Separability of labeled rows: label 1 is the positive side.
pub fn separate_rows(rows: &[Row]) -> Result<SeparabilityVerdict, SeparabilityError> {
    let (pos, neg) = split_by_label(rows);
    strictly_separable(&pos, &neg)
}

pub(crate) fn split_by_label(rows: &[Row]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for r in rows {
        match r.label {
            Label::One => pos.push(r.x.clone()),
            Label::Zero => neg.push(r.x.clone()),
        }
    }
    (pos, neg)
}

/// True iff `conv(pos) ∩ conv(neg) ≠ ∅`, decided by exhaustive basic-solution
/// enumeration of `Σλᵢpᵢ − Σμⱼqⱼ = 0, Σλ = 1, Σμ = 1, λ, μ ≥ 0`.
///
/// Limited to [`HULL_ORACLE_MAX_POINTS`] points in dimension at most
/// [`HULL_ORACLE_MAX_DIM`].
pub fn hulls_intersect(pos: &[Vec<f64>], neg: &[Vec<f64>]) -> Result<bool, SeparabilityError> {
    let d = common_dim(pos, neg)?;
    let n = pos.len() + neg.len();
    if n > HULL_ORACLE_MAX_POINTS || d > HULL_ORACLE_MAX_DIM {
        return Err(SeparabilityError::SizeCap {
            points: n,
            dim: d,
            max_points: HULL_ORACLE_MAX_POINTS,
            max_dim: HULL_ORACLE_MAX_DIM,
        });
    }
    if pos.is_empty() || neg.is_empty() {
        return Ok(false);
    }

    // Columns of the equality system, one per point.
    let nrows = d + 2;
    let column = |i: usize| -> Vec<f64> {
        let mut c = vec![0.0; nrows];
        if i < pos.len() {
            c[..d].copy_from_slice(&pos[i]);
            c[d] = 1.0;
        } else {
            for (cj, qj) in c[..d].iter_mut().zip(&neg[i - pos.len()]) {
                *cj = -qj;
            }
            c[d + 1] = 1.0;
        }
        c
    };
    let cols: Vec<Vec<f64>> = (0..n).map(column).collect();
    let mut rhs = DVector::zeros(nrows);
    rhs[d] = 1.0;
    rhs[d + 1] = 1.0;

    // A feasible system has a basic feasible solution whose support columns
    // are linearly independent, hence of size at most d + 2.
    for size in 2..=nrows.min(n) {
        let mut found = false;
        for_each_combination(n, size, |support| {
            let m = DMatrix::from_fn(nrows, size, |r, c| cols[support[c]][r]);
            let svd = m.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= 1e-10 * smax.max(1.0) {
                return false;
            }
            let Ok(x) = svd.solve(&rhs, 1e-12) else {
                return false;
            };
            let resid = (&m * &x - &rhs).norm();
            if resid <= 1e-9 && x.iter().all(|&v| v >= -1e-12) {
                found = true;
                return true;
            }
            false
        });
        if found {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Calls `f` on each `k`-subset of `0..n` in lexicographic order until it
/// returns true. Returns whether it stopped early.
pub(crate) fn for_each_combination<F>(n: usize, k: usize, mut f: F) -> bool
where
    F: FnMut(&[usize]) -> bool,
{
    if k > n {
        return false;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return true;
        }
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return false;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return false;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Minimum-cardinality subset of `points` whose two label classes are not
/// strictly separable, or `None` when the whole set is separable.
///
/// Subsets are tried by increasing size and, within a size, in lexicographic
/// order of object id.
pub fn kirchberger_witness(points: &[Row], d: usize) -> Result<Option<Vec<Row>>, SeparabilityError> {
    for p in points {
        if p.x.len() != d {
            return Err(SeparabilityError::DimensionMismatch { expected: d, got: p.x.len() });
        }
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if separate_rows(&sorted)?.separable {
        return Ok(None);
    }
    let n = sorted.len();
    let mut err = None;
    let mut hit: Option<Vec<usize>> = None;
    // The lemma bounds the answer by d + 2; sizes beyond that are only a
    // guard against round-off in the solver.
    for size in 2..=n {
        for_each_combination(n, size, |idx| {
            let has_both = idx.iter().any(|&i| sorted[i].label == Label::One)
                && idx.iter().any(|&i| sorted[i].label == Label::Zero);
            if !has_both {
                return false;
            }
            let subset: Vec<Row> = idx.iter().map(|&i| sorted[i].clone()).collect();
            match separate_rows(&subset) {
                Ok(v) if !v.separable => {
                    hit = Some(idx.to_vec());
                    true
                }
                Ok(_) => false,
                Err(e) => {
                    err = Some(e);
                    true
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if let Some(idx) = hit {
            return Ok(Some(idx.into_iter().map(|i| sorted[i].clone()).collect()));
        }
    }
    Ok(Some(sorted))
}
