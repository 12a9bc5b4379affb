//! Dense phase-1 simplex for systems `A x >= b` over free variables.
//!
//! Free variables are split as `x = x⁺ - x⁻`; each row gets a surplus and an
//! artificial variable. Bland's rule is used for both the entering and the
//! leaving choice, so the method cannot cycle.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    Shape { row: usize, got: usize, expected: usize },
    #[error("simplex exceeded {0} pivots")]
    PivotLimit(usize),
}

const PIVOT_EPS: f64 = 1e-12;

/// Returns a point satisfying every `rows[i] · x >= rhs[i]`, or `None` when
/// the phase-1 optimum exceeds `tol`.
pub fn find_feasible(
    rows: &[Vec<f64>],
    rhs: &[f64],
    nvars: usize,
    tol: f64,
) -> Result<Option<Vec<f64>>, LpError> {
    let m = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != nvars {
            return Err(LpError::Shape { row: i, got: r.len(), expected: nvars });
        }
    }
    if m == 0 {
        return Ok(Some(vec![0.0; nvars]));
    }

    // Columns: x⁺ (nvars), x⁻ (nvars), surplus (m). Artificials are implicit:
    // they start basic and never re-enter, so their columns are not stored.
    let ncols = 2 * nvars + m;
    let width = ncols + 1;
    let mut tab = vec![0.0; m * width];
    for i in 0..m {
        let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut tab[i * width..(i + 1) * width];
        for j in 0..nvars {
            row[j] = sign * rows[i][j];
            row[nvars + j] = -sign * rows[i][j];
        }
        row[2 * nvars + i] = -sign;
        row[ncols] = sign * rhs[i];
    }
    // basis[i] = column index, or ncols + i for the row's artificial.
    let mut basis: Vec<usize> = (0..m).map(|i| ncols + i).collect();

    // Reduced costs of the phase-1 objective (sum of artificials).
    let mut cost = vec![0.0; width];
    for i in 0..m {
        for j in 0..width {
            cost[j] -= tab[i * width + j];
        }
    }

    let limit = 50 * (m + ncols) + 1000;
    let mut pivots = 0;
    while let Some(enter) = (0..ncols).find(|&j| cost[j] < -PIVOT_EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i * width + enter];
            if a > PIVOT_EPS {
                let ratio = tab[i * width + ncols] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        // Phase 1 is bounded below by zero, so an entering column always has
        // a blocking row; an empty ratio test only arises from round-off.
        let Some((r, _)) = leave else {
            break;
        };
        pivot(&mut tab, &mut cost, width, r, enter);
        basis[r] = enter;
        pivots += 1;
        if pivots > limit {
            return Err(LpError::PivotLimit(limit));
        }
    }

    let infeasibility = -cost[ncols];
    if infeasibility > tol {
        return Ok(None);
    }
    let mut x = vec![0.0; nvars];
    for (i, &b) in basis.iter().enumerate() {
        let v = tab[i * width + ncols];
        if b < nvars {
            x[b] += v;
        } else if b < 2 * nvars {
            x[b - nvars] -= v;
        }
    }
    Ok(Some(x))
}

fn pivot(tab: &mut [f64], cost: &mut [f64], width: usize, r: usize, c: usize) {
    let p = tab[r * width + c];
    for j in 0..width {
        tab[r * width + j] /= p;
    }
    let (before, rest) = tab.split_at_mut(r * width);
    let (prow, after) = rest.split_at_mut(width);
    for row in before.chunks_mut(width).chain(after.chunks_mut(width)) {
        let f = row[c];
        if f != 0.0 {
            for j in 0..width {
                row[j] -= f * prow[j];
            }
        }
    }
    let f = cost[c];
    if f != 0.0 {
        for j in 0..width {
            cost[j] -= f * prow[j];
        }
    }
}
