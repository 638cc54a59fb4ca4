//! Numerical check of the hypotheses of the quantitative recurrence theorem for the return
//! map, on the partition A_i = (±(1/(i+2), 1/(i+1))) × I° accumulating at the singular line.

use crate::maps::{ValidatedModel, HALF};
use crate::measures::{Density1D, LeafFamily};
use crate::statistics::fit::{linear_fit, LinearFit};

#[derive(Debug, Clone, PartialEq)]
pub struct SaussolReport {
    /// μ(A_i) for i = 1..=i_max.
    pub masses: Vec<f64>,
    /// Whether μ(A_i) ≤ 4·sup f0 / i² for every i.
    pub masses_within_bound: bool,
    /// log-log regression of μ(A_i) on i over `MASS_WINDOW`.
    pub mass_fit: LinearFit,
    /// Regression of log μ(dist(·, ∂A) < ε) on log ε: the slope is the exponent a.
    pub boundary_fit: LinearFit,
    /// Lipschitz constant of F on A_i in the sup metric.
    pub lipschitz: Vec<f64>,
    /// Σ_{i ≤ k} μ(A_i) log⁺ L(A_i) at k = 10, 100, ..., i_max.
    pub partial_sums: Vec<(usize, f64)>,
    /// Upper bound on the remaining tail Σ_{i > i_max}.
    pub tail_bound: f64,
    pub pass_boundary: bool,
    pub pass_lipschitz: bool,
}

pub const MASS_WINDOW: (usize, usize) = (8, 32);
pub const I_MAX: usize = 100_000;
pub const TAIL_TOL: f64 = 1e-3;

impl SaussolReport {
    pub fn pass(&self) -> bool {
        self.pass_boundary && self.pass_lipschitz
    }
}

/// sup ‖DF‖ (max row sum) over A_i: ∂x T is largest at the inner end, ∂(x,y) G at the outer.
fn lipschitz_on(model: &ValidatedModel, i: usize) -> f64 {
    let inner = 1.0 / (i + 2) as f64;
    let outer = 1.0 / (i + 1) as f64;
    let t_row = model.theta() * model.alpha() * inner.powf(model.alpha() - 1.0);
    let (s, b) = (model.sigma(), model.beta());
    let g_row = s * b * HALF * outer.powf(b - 1.0) + s * outer.powf(b);
    t_row.max(g_row)
}

fn strip_mass(d: &Density1D, i: usize) -> f64 {
    let (a, b) = (1.0 / (i + 2) as f64, 1.0 / (i + 1) as f64);
    d.interval_mass(a, b) + d.interval_mass(-b, -a)
}

/// μ of the ε-neighbourhood of the partition boundary: the lines x = ±1/k (k ≥ 2) and
/// x = 0, plus the edges y = ±1/2 (bounded by their row masses).
pub fn boundary_neighbourhood_mass(d: &Density1D, fam: &LeafFamily, eps: f64) -> f64 {
    // boundary abscissae above the point where neighbourhoods merge into one block at 0
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut k = 2usize;
    loop {
        let p = 1.0 / k as f64;
        let gap = p - 1.0 / (k + 1) as f64;
        if gap <= 2.0 * eps {
            intervals.push((0.0, p + eps));
            break;
        }
        intervals.push((p - eps, p + eps));
        k += 1;
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let x_part: f64 = merged
        .iter()
        .map(|&(a, b)| {
            // the block at 0 is symmetric and counted once
            if a <= 0.0 {
                d.interval_mass(-b, b)
            } else {
                d.interval_mass(a, b) + d.interval_mass(-b, -a)
            }
        })
        .sum();
    let m = fam.rows();
    let h = 1.0 / m as f64;
    let mut y_part = 0.0;
    for k in 0..m {
        let lo = -HALF + k as f64 * h;
        let near = |a: f64, b: f64| ((lo + h).min(b) - lo.max(a)).max(0.0) / h;
        let frac = near(-HALF, -HALF + eps) + near(HALF - eps, HALF);
        if frac > 0.0 {
            y_part += frac * (0..fam.columns()).map(|i| fam.column(i)[k]).sum::<f64>();
        }
    }
    x_part + y_part
}

pub fn saussol_check(model: &ValidatedModel, fam: &LeafFamily) -> crate::Result<SaussolReport> {
    let d = fam.marginal().normalized()?;
    let sup = d.sup();
    let masses: Vec<f64> = (1..=I_MAX).map(|i| strip_mass(&d, i)).collect();
    let masses_within_bound = masses
        .iter()
        .enumerate()
        .all(|(k, m)| *m <= 4.0 * sup / ((k + 1) as f64).powi(2) + 1e-15);
    let (lo, hi) = MASS_WINDOW;
    let xs: Vec<f64> = (lo..=hi).map(|i| (i as f64).ln()).collect();
    let ys: Vec<f64> = (lo..=hi).map(|i| masses[i - 1].ln()).collect();
    let mass_fit = linear_fit(&xs, &ys)?;

    let eps: Vec<f64> = (8..=20).map(|k| 2f64.powi(-k)).collect();
    let nb: Vec<f64> = eps
        .iter()
        .map(|&e| boundary_neighbourhood_mass(&d, fam, e))
        .collect();
    let boundary_fit = linear_fit(
        &eps.iter().map(|e| e.ln()).collect::<Vec<_>>(),
        &nb.iter().map(|m| m.ln()).collect::<Vec<_>>(),
    )?;

    let lipschitz: Vec<f64> = (1..=I_MAX).map(|i| lipschitz_on(model, i)).collect();
    let mut partial_sums = Vec::new();
    let mut acc = 0.0;
    let mut mark = 10;
    for i in 1..=I_MAX {
        acc += masses[i - 1] * lipschitz[i - 1].ln().max(0.0);
        if i == mark {
            partial_sums.push((i, acc));
            mark *= 10;
        }
    }
    // for large i, log L(A_i) ≤ ln(θα) + (1−α) ln(i+2); integrate that against 4 sup / i²
    let c0 = (model.theta() * model.alpha()).ln().max(0.0);
    let p = 1.0 - model.alpha();
    let big = I_MAX as f64;
    let tail_bound = 4.0 * sup * (c0 + p * ((big + 2.0).ln() + 1.0)) / big;
    Ok(SaussolReport {
        pass_boundary: boundary_fit.slope > 0.0 && nb.iter().all(|m| m.is_finite()),
        // the tail bound certifies the partial sums are Cauchy, given the mass bound
        pass_lipschitz: acc.is_finite() && masses_within_bound && tail_bound < TAIL_TOL,
        masses,
        masses_within_bound,
        mass_fit,
        boundary_fit,
        lipschitz,
        partial_sums,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_marginal_boundary_exponent_is_one_half() {
        // the boundary points 1/k accumulate at 0; their ε-neighbourhoods cover |x| ≲ √(2ε)
        let d = Density1D::uniform(4096);
        let fam = LeafFamily::lebesgue(64, 64);
        let e = 2f64.powi(-16);
        let m = boundary_neighbourhood_mass(&d, &fam, e);
        // y-edges contribute 2ε all by themselves under Lebesgue
        assert!(
            m > 2.0 * (2.0 * e).sqrt() && m < 5.0 * (2.0 * e).sqrt() + 2.0 * e,
            "{m}"
        );
    }

    #[test]
    fn strip_masses_for_lebesgue() {
        let d = Density1D::uniform(1024);
        assert_relative_eq!(strip_mass(&d, 1), 2.0 * (0.5 - 1.0 / 3.0), epsilon = 1e-12);
    }
}
