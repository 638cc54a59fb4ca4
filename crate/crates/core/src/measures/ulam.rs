//! Ulam discretization of the transfer operator of a piecewise monotone interval map.
//!
//! Entry (i, j) is the Lebesgue fraction of cell i mapped into cell j. The fractions are
//! computed from exact branch preimages of the cell edges rather than by counting
//! quadrature nodes, i.e. the limit of infinitely many nodes per cell.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{IntervalMap, HALF};
use crate::measures::density::Density1D;

/// A piece of cell `source` whose image lies in cell `target`: the x-interval [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub target: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransferOperator {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |e| e.1)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Pushes a density forward: (P^T f)_j = Σ_i f_i P_ij (equal cell widths).
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            let fi = f[i];
            if fi == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += fi * p;
            }
        }
        out
    }

    pub fn push(&self, d: &Density1D) -> Result<Density1D> {
        if d.len() != self.n {
            return Err(Error::ShapeMismatch);
        }
        Density1D::new(self.apply(d.values()))
    }
}

/// Splits cell `i` of an N-cell grid into pieces by the image cell they land in.
pub fn cell_pieces(map: &dyn IntervalMap, n: usize, i: usize) -> Vec<Piece> {
    let w = 1.0 / n as f64;
    let edge = |k: usize| -HALF + k as f64 * w;
    let cell_of = |y: f64| (((y + HALF) * n as f64).floor().max(0.0) as usize).min(n - 1);
    let (c_lo, c_hi) = (edge(i), edge(i + 1));
    let bp = map.branch_points();
    let mut pieces = Vec::new();
    for k in 0..bp.len() - 1 {
        let (b_lo, b_hi) = (bp[k], bp[k + 1]);
        let lo = c_lo.max(b_lo);
        let hi = c_hi.min(b_hi);
        if hi <= lo {
            continue;
        }
        let (lim_lo, lim_hi) = map.branch_limits(k);
        let v_lo = if lo == b_lo { lim_lo } else { map.apply(lo) };
        let v_hi = if hi == b_hi { lim_hi } else { map.apply(hi) };
        let increasing = lim_hi >= lim_lo;
        let (y_min, y_max) = if v_lo <= v_hi {
            (v_lo, v_hi)
        } else {
            (v_hi, v_lo)
        };
        let (j0, j1) = (cell_of(y_min), cell_of(y_max));
        // x-coordinates of the preimages of the interior cell edges, in increasing y order
        let mut cuts = Vec::with_capacity(j1 - j0 + 2);
        cuts.push(if increasing { lo } else { hi });
        for j in j0 + 1..=j1 {
            let x = map.branch_inverse(k, edge(j)).clamp(lo, hi);
            cuts.push(x);
        }
        cuts.push(if increasing { hi } else { lo });
        for (off, pair) in cuts.windows(2).enumerate() {
            let (a, b) = if pair[0] <= pair[1] {
                (pair[0], pair[1])
            } else {
                (pair[1], pair[0])
            };
            if b > a {
                pieces.push(Piece {
                    target: j0 + off,
                    lo: a,
                    hi: b,
                });
            }
        }
    }
    pieces
}

pub fn ulam_operator(map: &dyn IntervalMap, n: usize) -> Result<TransferOperator> {
    if n < 16 {
        return Err(Error::InvalidArgument(format!(
            "need at least 16 cells, got {n}"
        )));
    }
    let w = 1.0 / n as f64;
    let rows: Vec<Result<Vec<(usize, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for p in cell_pieces(map, n, i) {
                let frac = (p.hi - p.lo) / w;
                match row.iter_mut().find(|(j, _)| *j == p.target) {
                    Some(e) => e.1 += frac,
                    None => row.push((p.target, frac)),
                }
            }
            let total: f64 = row.iter().map(|e| e.1).sum();
            if total <= 0.0 {
                return Err(Error::DegenerateCell(i));
            }
            for e in &mut row {
                e.1 /= total;
            }
            row.sort_by_key(|e| e.0);
            Ok(row)
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(TransferOperator { n, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub density: Density1D,
    pub iterations: usize,
    pub residual: f64,
    /// Geometric mean of successive residual ratios over the last iterations, an estimate
    /// of the second eigenvalue modulus.
    pub contraction: f64,
}

pub const RESIDUAL_TOL: f64 = 1e-10;
pub const ITERATION_CAP: usize = 100_000;

pub fn invariant_density(op: &TransferOperator) -> Result<Density1D> {
    power_iteration(op, RESIDUAL_TOL, ITERATION_CAP).map(|p| p.density)
}

pub fn power_iteration(op: &TransferOperator, tol: f64, cap: usize) -> Result<PowerIteration> {
    let n = op.len();
    let w = 1.0 / n as f64;
    let mut f = vec![1.0; n];
    let mut residuals: Vec<f64> = Vec::new();
    for it in 1..=cap {
        let mut g = op.apply(&f);
        let mass: f64 = g.iter().sum::<f64>() * w;
        for v in &mut g {
            *v /= mass;
        }
        let res: f64 = g.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
        f = g;
        residuals.push(res);
        if res < tol {
            let tail = &residuals[residuals.len().saturating_sub(20)..];
            let contraction = if tail.len() >= 2 && tail[0] > 0.0 && tail[tail.len() - 1] > 0.0 {
                (tail[tail.len() - 1] / tail[0]).powf(1.0 / (tail.len() - 1) as f64)
            } else {
                0.0
            };
            return Ok(PowerIteration {
                density: Density1D::new(f)?,
                iterations: it,
                residual: res,
                contraction,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: cap,
        residual: residuals.last().copied().unwrap_or(f64::NAN),
    })
}
