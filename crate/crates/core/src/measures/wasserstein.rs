//! W1 and the flat (bounded-Lipschitz) distance W1⁰ between finite measures on the line.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::maps::HALF;

/// A finite measure on I: either piecewise uniform on equal cells or a sum of atoms.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure1D {
    /// Cell masses on equal cells of I.
    Grid(Vec<f64>),
    /// (position, mass) pairs.
    Atoms(Vec<(f64, f64)>),
}

impl Measure1D {
    pub fn dirac(x: f64) -> Self {
        Measure1D::Atoms(vec![(x, 1.0)])
    }

    pub fn zero() -> Self {
        Measure1D::Atoms(Vec::new())
    }

    pub fn mass(&self) -> f64 {
        match self {
            Measure1D::Grid(m) => m.iter().sum(),
            Measure1D::Atoms(a) => a.iter().map(|p| p.1).sum(),
        }
    }

    /// Grid cell masses collapsed onto the cell centers.
    pub fn to_atoms(&self) -> Vec<(f64, f64)> {
        match self {
            Measure1D::Grid(m) => {
                let w = 1.0 / m.len() as f64;
                m.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(i, &v)| (-HALF + (i as f64 + 0.5) * w, v))
                    .collect()
            }
            Measure1D::Atoms(a) => {
                let mut a = a.clone();
                a.sort_by(|p, q| p.0.total_cmp(&q.0));
                a
            }
        }
    }

    fn cdf_model(&self) -> Cdf {
        match self {
            Measure1D::Grid(m) => {
                let mut cum = Vec::with_capacity(m.len() + 1);
                cum.push(0.0);
                let mut s = 0.0;
                for v in m {
                    s += v;
                    cum.push(s);
                }
                Cdf::Grid { cum }
            }
            Measure1D::Atoms(_) => {
                let atoms = self.to_atoms();
                let mut pos = Vec::with_capacity(atoms.len());
                let mut cum = Vec::with_capacity(atoms.len());
                let mut s = 0.0;
                for (x, m) in atoms {
                    s += m;
                    pos.push(x);
                    cum.push(s);
                }
                Cdf::Atoms { pos, cum }
            }
        }
    }
}

enum Cdf {
    Grid { cum: Vec<f64> },
    Atoms { pos: Vec<f64>, cum: Vec<f64> },
}

impl Cdf {
    fn knots(&self) -> Vec<f64> {
        match self {
            Cdf::Grid { cum } => {
                let n = cum.len() - 1;
                (0..=n).map(|i| -HALF + i as f64 / n as f64).collect()
            }
            Cdf::Atoms { pos, .. } => pos.clone(),
        }
    }

    /// (F(x-), F(x)).
    fn eval(&self, x: f64) -> (f64, f64) {
        match self {
            Cdf::Grid { cum } => {
                let n = cum.len() - 1;
                let t = ((x + HALF) * n as f64).clamp(0.0, n as f64);
                let i = (t.floor() as usize).min(n - 1);
                let v = cum[i] + (cum[i + 1] - cum[i]) * (t - i as f64);
                (v, v)
            }
            Cdf::Atoms { pos, cum } => {
                let le = pos.partition_point(|&p| p <= x);
                let lt = pos.partition_point(|&p| p < x);
                let at = |k: usize| if k == 0 { 0.0 } else { cum[k - 1] };
                (at(lt), at(le))
            }
        }
    }
}

/// ∫ |d(t)| over a segment of length `len` on which d is affine from d0 to d1.
fn abs_affine_integral(d0: f64, d1: f64, len: f64) -> f64 {
    if d0 * d1 >= 0.0 {
        0.5 * (d0.abs() + d1.abs()) * len
    } else {
        0.5 * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs()) * len
    }
}

fn check_masses(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::MassMismatch(a, b));
    }
    Ok(())
}

/// W1(μ, ν) = ∫ |F_μ - F_ν| for measures of equal mass.
pub fn w1_1d(mu: &Measure1D, nu: &Measure1D) -> Result<f64> {
    check_masses(mu.mass(), nu.mass())?;
    if let (Measure1D::Grid(a), Measure1D::Grid(b)) = (mu, nu) {
        if a.len() == b.len() {
            return Ok(w1_same_grid(a, b));
        }
    }
    let (ca, cb) = (mu.cdf_model(), nu.cdf_model());
    let mut knots = ca.knots();
    knots.extend(cb.knots());
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let d0 = ca.eval(x0).1 - cb.eval(x0).1;
        let d1 = ca.eval(x1).0 - cb.eval(x1).0;
        total += abs_affine_integral(d0, d1, x1 - x0);
    }
    Ok(total)
}

/// W1 between two piecewise-uniform measures on the same equal-cell grid of I.
pub fn w1_same_grid(a: &[f64], b: &[f64]) -> f64 {
    let h = 1.0 / a.len() as f64;
    let mut c = 0.0;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        let next = c + x - y;
        total += abs_affine_integral(c, next, h);
        c = next;
    }
    total
}

/// W1 between cell masses treated as atoms at the centers of the same equal-cell grid.
pub fn w1_same_grid_atoms(a: &[f64], b: &[f64]) -> f64 {
    let h = 1.0 / a.len() as f64;
    let mut c = 0.0;
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b).take(a.len().saturating_sub(1)) {
        c += x - y;
        total += c.abs();
    }
    total * h
}

#[derive(Clone, Copy)]
struct Breakpoint {
    at: f64,
    weight: f64,
}

impl PartialEq for Breakpoint {
    fn eq(&self, other: &Self) -> bool {
        self.at.total_cmp(&other.at) == Ordering::Equal
    }
}
impl Eq for Breakpoint {}
impl PartialOrd for Breakpoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Breakpoint {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at.total_cmp(&other.at)
    }
}

/// min Σ w_k |s_k - a_k| over nondecreasing s, by the convex slope-trick recursion.
pub fn isotonic_l1_cost(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut heap: BinaryHeap<Breakpoint> = BinaryHeap::new();
    let mut cost = 0.0;
    for (a, w) in points {
        if w <= 0.0 {
            continue;
        }
        heap.push(Breakpoint { at: a, weight: w });
        let mut need = w;
        while need > 0.0 {
            let top = match heap.peek() {
                Some(t) if t.at > a => *t,
                _ => break,
            };
            heap.pop();
            let t = need.min(top.weight);
            cost += t * (top.at - a);
            if top.weight > t {
                heap.push(Breakpoint {
                    at: top.at,
                    weight: top.weight - t,
                });
            }
            heap.push(Breakpoint { at: a, weight: t });
            need -= t;
        }
    }
    cost
}

/// W1⁰ of the signed atomic measure Σ s_k δ_{p_k}, positions ascending.
///
/// Dual form: with E = Σ s_k ≥ 0 and prefix sums C_k, the distance is
/// E + min Σ_k (p_{k+1} - p_k) |C_k - S_k| over nondecreasing S with values in [0, E]:
/// the excess mass is absorbed at unit cost, the rest transported. Signed absorbers never
/// help because transport across I costs less than 2.
pub fn flat_norm_sorted(positions: &[f64], signed: &[f64]) -> f64 {
    debug_assert_eq!(positions.len(), signed.len());
    let total: f64 = signed.iter().sum();
    let flip = if total < 0.0 { -1.0 } else { 1.0 };
    let e = total * flip;
    if positions.len() < 2 {
        return e;
    }
    let gaps: f64 = positions.last().unwrap() - positions[0];
    let big = 2.0 * gaps + 1.0;
    let mut c = 0.0;
    let mut pts = Vec::with_capacity(positions.len() + 1);
    pts.push((0.0, big));
    for k in 0..positions.len() - 1 {
        c += flip * signed[k];
        pts.push((c, positions[k + 1] - positions[k]));
    }
    pts.push((e, big));
    e + isotonic_l1_cost(pts)
}

/// W1⁰ on a uniform grid of atoms with spacing h.
pub fn flat_norm_uniform(signed: &[f64], h: f64) -> f64 {
    let total: f64 = signed.iter().sum();
    let flip = if total < 0.0 { -1.0 } else { 1.0 };
    let e = total * flip;
    if signed.len() < 2 {
        return e;
    }
    let big = 2.0 * h * signed.len() as f64 + 1.0;
    let mut c = 0.0;
    let pts = std::iter::once((0.0, big))
        .chain(signed[..signed.len() - 1].iter().map(|s| {
            c += flip * s;
            (c, h)
        }))
        .chain(std::iter::once((e, big)));
    e + isotonic_l1_cost(pts)
}

/// sup |∫g dμ - ∫g dν| over 1-Lipschitz g with |g| ≤ 1. Grid cells count as atoms at centers.
pub fn w1_zero(mu: &Measure1D, nu: &Measure1D) -> f64 {
    if let (Measure1D::Grid(a), Measure1D::Grid(b)) = (mu, nu) {
        if a.len() == b.len() {
            let s: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            return flat_norm_uniform(&s, 1.0 / a.len() as f64);
        }
    }
    let mut atoms: Vec<(f64, f64)> = mu.to_atoms();
    atoms.extend(nu.to_atoms().into_iter().map(|(x, m)| (x, -m)));
    atoms.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut pos: Vec<f64> = Vec::with_capacity(atoms.len());
    let mut s: Vec<f64> = Vec::with_capacity(atoms.len());
    for (x, m) in atoms {
        if pos.last() == Some(&x) {
            *s.last_mut().unwrap() += m;
        } else {
            pos.push(x);
            s.push(m);
        }
    }
    flat_norm_sorted(&pos, &s)
}
