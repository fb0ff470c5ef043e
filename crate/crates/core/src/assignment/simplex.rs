//! Dense-tableau primal simplex for packing LPs:
//! maximize `cᵀx` subject to `A x ≤ 1`, `x ≥ 0`, with `A` 0/1.
//!
//! The all-slack basis is feasible, so no phase one is needed. Dantzig
//! pricing is used until the objective stalls, then Bland's rule takes over
//! to rule out cycling on the heavily degenerate packing vertices.

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;
const STALL_LIMIT: usize = 64;
const MAX_PIVOTS: usize = 200_000;

pub(crate) struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
}

/// `columns[j]` lists the constraint rows (in `0..num_rows`) that column `j` uses.
pub(crate) fn solve_packing_lp(
    costs: &[f64],
    columns: &[Vec<usize>],
    num_rows: usize,
) -> Result<LpSolution> {
    let n = costs.len();
    let m = num_rows;
    let width = n + m;
    let mut tab = vec![0.0; m * width];
    for (j, rows) in columns.iter().enumerate() {
        for &i in rows {
            tab[i * width + j] = 1.0;
        }
    }
    for i in 0..m {
        tab[i * width + n + i] = 1.0;
    }
    let mut rhs = vec![1.0; m];
    let mut reduced: Vec<f64> = costs
        .iter()
        .copied()
        .chain(std::iter::repeat_n(0.0, m))
        .collect();
    let mut basis: Vec<usize> = (n..width).collect();

    let mut bland = false;
    let mut stalled = 0;
    for _ in 0..MAX_PIVOTS {
        let entering = if bland {
            (0..width).find(|&j| reduced[j] > EPS)
        } else {
            let mut best = None;
            let mut best_val = EPS;
            for (j, &d) in reduced.iter().enumerate() {
                if d > best_val {
                    best_val = d;
                    best = Some(j);
                }
            }
            best
        };
        let Some(e) = entering else {
            let mut values = vec![0.0; n];
            for (i, &b) in basis.iter().enumerate() {
                if b < n {
                    values[b] = rhs[i];
                }
            }
            let objective = values.iter().zip(costs).map(|(x, c)| x * c).sum();
            return Ok(LpSolution { values, objective });
        };

        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab[i * width + e];
            if a > EPS {
                let ratio = rhs[i] / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - EPS
                            || (ratio <= best_ratio + EPS && basis[i] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(r) = leave else {
            return Err(Error::NumericalDegeneracy(
                "packing LP reported unbounded".into(),
            ));
        };

        let pivot = tab[r * width + e];
        for v in &mut tab[r * width..(r + 1) * width] {
            *v /= pivot;
        }
        rhs[r] /= pivot;
        let (before, rest) = tab.split_at_mut(r * width);
        let (pivot_row, after) = rest.split_at_mut(width);
        for (i, row) in before
            .chunks_exact_mut(width)
            .chain(after.chunks_exact_mut(width))
            .enumerate()
        {
            let i = if i < r { i } else { i + 1 };
            let f = row[e];
            if f != 0.0 {
                for (x, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * p;
                }
                rhs[i] -= f * rhs[r];
                if rhs[i] < 0.0 && rhs[i] > -EPS {
                    rhs[i] = 0.0;
                }
            }
        }
        let f = reduced[e];
        for (d, p) in reduced.iter_mut().zip(pivot_row.iter()) {
            *d -= f * p;
        }
        basis[r] = e;

        let gain = f * rhs[r];
        if gain > EPS {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > STALL_LIMIT {
                bland = true;
            }
        }
    }
    Err(Error::NumericalDegeneracy(format!(
        "simplex did not converge within {MAX_PIVOTS} pivots"
    )))
}
