//! Disintegrated measures on Σ: N columns (leaves of the stable foliation) by M y-cells.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{var_inv_derivative, SkewProduct, HALF};
use crate::measures::density::{variation, Density1D};
use crate::measures::ulam::{cell_pieces, invariant_density, ulam_operator};
use crate::measures::wasserstein::{flat_norm_uniform, w1_same_grid_atoms};

/// Cell masses of a measure on Σ, column-major by x.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGrid {
    pub n: usize,
    pub m: usize,
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafFamily {
    n: usize,
    m: usize,
    /// μ(column i × y-cell k) at index i·m + k.
    cells: Vec<f64>,
}

pub fn disintegrate(joint: &JointGrid) -> Result<LeafFamily> {
    LeafFamily::from_cells(joint.n, joint.m, joint.masses.clone())
}

impl LeafFamily {
    pub fn from_cells(n: usize, m: usize, cells: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 || cells.len() != n * m {
            return Err(Error::ShapeMismatch);
        }
        if let Some(v) = cells.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "cell mass {v} is not a nonnegative number"
            )));
        }
        Ok(LeafFamily { n, m, cells })
    }

    /// Marginal density × uniform leaves.
    pub fn product(marginal: &Density1D, m: usize) -> Self {
        let n = marginal.len();
        let masses = marginal.masses();
        let mut cells = Vec::with_capacity(n * m);
        for mi in masses {
            cells.extend(std::iter::repeat_n(mi / m as f64, m));
        }
        LeafFamily { n, m, cells }
    }

    pub fn lebesgue(n: usize, m: usize) -> Self {
        Self::product(&Density1D::uniform(n), m)
    }

    pub fn columns(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// Cell masses of column i (not normalized).
    pub fn column(&self, i: usize) -> &[f64] {
        &self.cells[i * self.m..(i + 1) * self.m]
    }

    /// The leaf restriction μ|_γ on column i: cell masses scaled so that its total is the
    /// marginal density value.
    pub fn leaf(&self, i: usize) -> Vec<f64> {
        let s = self.n as f64;
        self.column(i).iter().map(|v| v * s).collect()
    }

    pub fn column_mass(&self, i: usize) -> f64 {
        self.column(i).iter().sum()
    }

    pub fn column_masses(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.column_mass(i)).collect()
    }

    pub fn marginal(&self) -> Density1D {
        Density1D::from_masses(&self.column_masses()).expect("masses are nonnegative")
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn reassemble(&self) -> JointGrid {
        JointGrid {
            n: self.n,
            m: self.m,
            masses: self.cells.clone(),
        }
    }

    pub fn x_center(&self, i: usize) -> f64 {
        -HALF + (i as f64 + 0.5) / self.n as f64
    }

    pub fn y_center(&self, k: usize) -> f64 {
        -HALF + (k as f64 + 0.5) / self.m as f64
    }

    pub fn scaled(&self, c: f64) -> Self {
        LeafFamily {
            n: self.n,
            m: self.m,
            cells: self.cells.iter().map(|v| v * c).collect(),
        }
    }

    /// ∫ f dμ with f evaluated at the 2×2 Gauss points of each cell (exact for bilinear f
    /// against a piecewise-uniform measure).
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64 + Sync) -> f64 {
        let g = 0.5 / 3f64.sqrt();
        let (hx, hy) = (1.0 / self.n as f64, 1.0 / self.m as f64);
        let per_col: Vec<f64> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let xc = self.x_center(i);
                let mut s = 0.0;
                for (k, &w) in self.column(i).iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let yc = self.y_center(k);
                    let mut v = 0.0;
                    for dx in [-g, g] {
                        for dy in [-g, g] {
                            v += f(xc + dx * hx, yc + dy * hy);
                        }
                    }
                    s += w * v / 4.0;
                }
                s
            })
            .collect();
        per_col.iter().sum()
    }

    /// μ(B_r(x0, y0)) in the sup metric, treating each cell as uniform.
    pub fn ball_mass(&self, x0: f64, y0: f64, r: f64) -> f64 {
        let (hx, hy) = (1.0 / self.n as f64, 1.0 / self.m as f64);
        let overlap =
            |c_lo: f64, h: f64, a: f64, b: f64| ((c_lo + h).min(b) - c_lo.max(a)).max(0.0) / h;
        let col = |x: f64| (((x + HALF) / hx).floor().max(0.0) as usize).min(self.n - 1);
        let row = |y: f64| (((y + HALF) / hy).floor().max(0.0) as usize).min(self.m - 1);
        let (xa, xb, ya, yb) = (x0 - r, x0 + r, y0 - r, y0 + r);
        let mut total = 0.0;
        for i in col(xa)..=col(xb) {
            let fx = overlap(-HALF + i as f64 * hx, hx, xa, xb);
            if fx == 0.0 {
                continue;
            }
            let (k0, k1) = (row(ya), row(yb));
            for (k, v) in self.column(i)[k0..=k1].iter().enumerate() {
                let fy = overlap(-HALF + (k0 + k) as f64 * hy, hy, ya, yb);
                total += v * fx * fy;
            }
        }
        total
    }

    /// Cumulative cell masses, for sampling.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut s = 0.0;
        self.cells
            .iter()
            .map(|v| {
                s += v;
                s
            })
            .collect()
    }
}

/// One weighted fiber map applied to a whole source leaf.
#[derive(Debug, Clone, Copy)]
struct FiberNode {
    source: usize,
    weight: f64,
    a: f64,
    b: f64,
}

/// Precomputed pushforward F_* on (N, M) leaf families. The marginal evolves exactly by
/// the Ulam matrix of the base map; each piece of a column is split into a few x-nodes and
/// the source leaf is pushed through the affine fiber map at each node.
pub struct FamilyOperator {
    n: usize,
    m: usize,
    by_target: Vec<Vec<FiberNode>>,
}

pub const NODES_PER_PIECE: usize = 4;

impl FamilyOperator {
    pub fn new<S: SkewProduct>(s: &S, n: usize, m: usize) -> Result<Self> {
        Self::with_nodes(s, n, m, NODES_PER_PIECE)
    }

    pub fn with_nodes<S: SkewProduct>(s: &S, n: usize, m: usize, nodes: usize) -> Result<Self> {
        if n < 16 || m < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "bad grid {n} x {m}: need even N >= 16, M >= 2"
            )));
        }
        let w = 1.0 / n as f64;
        let pieces: Vec<Vec<(usize, FiberNode)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut out = Vec::new();
                for p in cell_pieces(s, n, i) {
                    let frac = (p.hi - p.lo) / w;
                    for q in 0..nodes {
                        let x = p.lo + (p.hi - p.lo) * (q as f64 + 0.5) / nodes as f64;
                        let (a, b) = s.fiber(x);
                        out.push((
                            p.target,
                            FiberNode {
                                source: i,
                                weight: frac / nodes as f64,
                                a,
                                b,
                            },
                        ));
                    }
                }
                out
            })
            .collect();
        let mut by_target: Vec<Vec<FiberNode>> = vec![Vec::new(); n];
        for row in pieces {
            for (j, node) in row {
                by_target[j].push(node);
            }
        }
        Ok(FamilyOperator { n, m, by_target })
    }

    pub fn apply(&self, fam: &LeafFamily) -> Result<LeafFamily> {
        if fam.n != self.n || fam.m != self.m {
            return Err(Error::ShapeMismatch);
        }
        let m = self.m;
        let cols: Vec<Vec<f64>> = self
            .by_target
            .par_iter()
            .map(|nodes| {
                let mut out = vec![0.0; m];
                for node in nodes {
                    push_leaf_into(
                        &mut out,
                        fam.column(node.source),
                        node.weight,
                        node.a,
                        node.b,
                    );
                }
                out
            })
            .collect();
        Ok(LeafFamily {
            n: self.n,
            m,
            cells: cols.concat(),
        })
    }
}

/// Adds `weight` × the pushforward of the y-cell masses `src` under y ↦ a·y + b (0 < a ≤ 1)
/// to `out`; each cell's image, at most one cell wide, is split between the cells it meets.
pub fn push_leaf_into(out: &mut [f64], src: &[f64], weight: f64, a: f64, b: f64) {
    let m = out.len();
    let h = 1.0 / m as f64;
    let width = a * h;
    for (k, &mass) in src.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let mass = mass * weight;
        let lo = a * (-HALF + k as f64 * h) + b;
        let t = (((lo + HALF) / h).floor().max(0.0) as usize).min(m - 1);
        let edge = -HALF + (t + 1) as f64 * h;
        if t + 1 >= m || lo + width <= edge {
            out[t] += mass;
        } else {
            let inside = (edge - lo) / width;
            out[t] += mass * inside;
            out[t + 1] += mass * (1.0 - inside);
        }
    }
}

pub fn push_forward<S: SkewProduct>(s: &S, fam: &LeafFamily) -> Result<LeafFamily> {
    FamilyOperator::new(s, fam.n, fam.m)?.apply(fam)
}

/// Iterates F_* `steps` times from (invariant 1D density) × (uniform leaves), using an
/// `n`-column Ulam marginal and `m` y-cells.
pub fn srb_iterate<S: SkewProduct>(s: &S, n: usize, m: usize, steps: usize) -> Result<LeafFamily> {
    let density = invariant_density(&ulam_operator(s, n)?)?;
    let op = FamilyOperator::new(s, n, m)?;
    let mut fam = LeafFamily::product(&density, m);
    for _ in 0..steps {
        fam = op.apply(&fam)?;
    }
    Ok(fam)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProdBound {
    /// sup over leaves of W1 between the normalized leaf measures.
    pub leaf_term: f64,
    /// Total variation distance of the marginals, ½‖μ_x - ν_x‖₁.
    pub marginal_term: f64,
}

impl ProdBound {
    pub fn total(&self) -> f64 {
        self.leaf_term + self.marginal_term
    }
}

/// Upper bound ε + δ on W1(a, b) for the sup metric on Σ. A 1-Lipschitz test function can be
/// shifted into [-1/2, 1/2] since diam Σ = 1, so the marginal term is the total variation.
/// Leaves are compared as atoms at the y-cell centers, which dominates the piecewise-uniform
/// value.
pub fn prod_bound(a: &LeafFamily, b: &LeafFamily) -> Result<ProdBound> {
    if a.n != b.n || a.m != b.m {
        return Err(Error::ShapeMismatch);
    }
    let (ma, mb) = (a.total_mass(), b.total_mass());
    if (ma - mb).abs() > 1e-9 * ma.max(mb).max(1.0) {
        return Err(Error::MassMismatch(ma, mb));
    }
    let per: Vec<(f64, f64)> = (0..a.n)
        .into_par_iter()
        .map(|i| {
            let (ca, cb) = (a.column(i), b.column(i));
            let (sa, sb): (f64, f64) = (ca.iter().sum(), cb.iter().sum());
            let leaf = if sa > 0.0 && sb > 0.0 {
                let na: Vec<f64> = ca.iter().map(|v| v / sa).collect();
                let nb: Vec<f64> = cb.iter().map(|v| v / sb).collect();
                w1_same_grid_atoms(&na, &nb)
            } else {
                0.0
            };
            (leaf, (sa - sb).abs())
        })
        .collect();
    Ok(ProdBound {
        leaf_term: per.iter().map(|p| p.0).fold(0.0, f64::max),
        marginal_term: 0.5 * per.iter().map(|p| p.1).sum::<f64>(),
    })
}

/// Variation of γ ↦ μ|_γ in the W1⁰ metric over adjacent columns.
pub fn var_g(fam: &LeafFamily) -> f64 {
    let h = 1.0 / fam.m as f64;
    let s = fam.n as f64;
    let terms: Vec<f64> = (0..fam.n.saturating_sub(1))
        .into_par_iter()
        .map(|i| {
            let d: Vec<f64> = fam
                .column(i)
                .iter()
                .zip(fam.column(i + 1))
                .map(|(u, v)| (u - v) * s)
                .collect();
            flat_norm_uniform(&d, h)
        })
        .collect();
    terms.iter().sum()
}

/// Constants entering the Lasota–Yorke-type bound on Var(G).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyConstants {
    /// x-Lipschitz constant k of the fiber maps.
    pub k: f64,
    /// Leaf contraction λ < 1.
    pub lambda: f64,
    pub var_inv_t_prime: f64,
    /// Uniform bound on the variation of the iterated marginals.
    pub marginal_variation: f64,
}

impl LyConstants {
    /// Measured constants for `s`, with the marginal bound from iterating `initial`
    /// `steps` times under the Ulam operator on `n` cells.
    pub fn measure<S: SkewProduct>(s: &S, initial: &Density1D, steps: usize) -> Result<Self> {
        let bp = s.branch_points();
        let mut k: f64 = 0.0;
        let mut lambda: f64 = 0.0;
        let samples = 4096;
        for w in bp.windows(2) {
            let node = |t: f64| w[0] + (w[1] - w[0]) * t;
            let mut prev: Option<(f64, f64, f64)> = None;
            for q in 0..=samples {
                let x = node((q as f64 / samples as f64).clamp(1e-9, 1.0 - 1e-9));
                let (a, b) = s.fiber(x);
                lambda = lambda.max(a);
                if let Some((xp, ap, bp)) = prev {
                    // |G(x1,y) - G(x2,y)| ≤ |a1 - a2| |y| + |b1 - b2| with |y| ≤ 1/2
                    k = k.max((HALF * (a - ap).abs() + (b - bp).abs()) / (x - xp));
                }
                prev = Some((x, a, b));
            }
        }
        let op = ulam_operator(s, initial.len())?;
        let mut d = initial.clone();
        let mut c = d.variation();
        for _ in 0..steps {
            d = op.push(&d)?;
            c = c.max(d.variation());
        }
        Ok(LyConstants {
            k,
            lambda,
            var_inv_t_prime: var_inv_derivative(s, 100_000),
            marginal_variation: c,
        })
    }

    /// K' = max(Var(G_0), (2 + 3C + (C+1)Var(1/T') + 2k(C+1)) / (1 - λ)).
    pub fn k_prime(&self, var_g0: f64) -> f64 {
        let c = self.marginal_variation;
        let tail = (2.0 + 3.0 * c + (c + 1.0) * self.var_inv_t_prime + 2.0 * self.k * (c + 1.0))
            / (1.0 - self.lambda);
        var_g0.max(tail)
    }

    /// Right side of the one-step inequality
    /// Var(G_1) ≤ 2 sup f̄₀ + Var(f̄₀) + sup f̄₀ Var(1/T') + 2k sup f̄₀ + λ Var(G_0).
    pub fn one_step_bound(&self, marginal: &Density1D, var_g0: f64) -> f64 {
        let sup = marginal.sup();
        2.0 * sup
            + marginal.variation()
            + sup * self.var_inv_t_prime
            + 2.0 * self.k * sup
            + self.lambda * var_g0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationReport {
    pub var_g: f64,
    pub k_prime: f64,
}

pub fn variation_report(fam: &LeafFamily, constants: &LyConstants, var_g0: f64) -> VariationReport {
    VariationReport {
        var_g: var_g(fam),
        k_prime: constants.k_prime(var_g0),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Restricted {
    pub family: LeafFamily,
    /// Var of f̄(γ) = ∫ f dμ|_γ.
    pub var_fbar: f64,
    /// 3ℓK' + ℓ.
    pub bound: f64,
}

impl Restricted {
    pub fn within_bound(&self) -> bool {
        self.var_fbar <= self.bound
    }
}

/// The family f·μ for an observable f ≥ 0 with Lipschitz constant and sup norm ≤ ℓ.
pub fn lipschitz_restrict(
    fam: &LeafFamily,
    f: impl Fn(f64, f64) -> f64,
    ell: f64,
    k_prime: f64,
) -> Result<Restricted> {
    let mut cells = fam.cells.clone();
    for i in 0..fam.n {
        let x = fam.x_center(i);
        for k in 0..fam.m {
            let v = f(x, fam.y_center(k));
            if v < 0.0 {
                return Err(Error::NegativeObservable(v));
            }
            cells[i * fam.m + k] *= v;
        }
    }
    let family = LeafFamily {
        n: fam.n,
        m: fam.m,
        cells,
    };
    let fbar: Vec<f64> = (0..family.n)
        .map(|i| family.column_mass(i) * family.n as f64)
        .collect();
    Ok(Restricted {
        var_fbar: variation(&fbar),
        bound: 3.0 * ell * k_prime + ell,
        family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{DoublingSkew, ValidatedModel};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_family(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LeafFamily {
        let mut cells: Vec<f64> = (0..n * m).map(|_| rng.random::<f64>().powi(3)).collect();
        let s: f64 = cells.iter().sum();
        cells.iter_mut().for_each(|v| *v /= s);
        LeafFamily::from_cells(n, m, cells).unwrap()
    }

    #[test]
    fn disintegration_examples() {
        let fam = LeafFamily::lebesgue(16, 8);
        assert!(fam
            .marginal()
            .values()
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-14));
        for i in 0..16 {
            let leaf = fam.leaf(i);
            assert!(leaf.iter().all(|&v| (v - 1.0 / 8.0).abs() < 1e-14));
        }
        let mut masses = vec![0.0; 16 * 8];
        masses[3 * 8 + 2] = 0.7;
        masses[3 * 8 + 5] = 0.3;
        let fam = disintegrate(&JointGrid {
            n: 16,
            m: 8,
            masses,
        })
        .unwrap();
        let marg = fam.marginal();
        assert_relative_eq!(marg.values()[3], 16.0, epsilon = 1e-12);
        assert_eq!(marg.values().iter().filter(|&&v| v != 0.0).count(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fam = random_family(&mut rng, 16, 8);
        let joint = fam.reassemble();
        assert_eq!(disintegrate(&joint).unwrap().reassemble(), joint);
        for i in 0..16 {
            let leaf_total: f64 = fam.leaf(i).iter().sum();
            assert_relative_eq!(leaf_total, fam.marginal().values()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn pushforward_conserves_mass_and_tracks_ulam() {
        let model = ValidatedModel::reference();
        let (n, m) = (128, 64);
        let op = FamilyOperator::new(&model, n, m).unwrap();
        let ulam = ulam_operator(&model, n).unwrap();
        let mut fam = LeafFamily::lebesgue(n, m);
        let mut marg = Density1D::uniform(n);
        for _ in 0..5 {
            fam = op.apply(&fam).unwrap();
            marg = ulam.push(&marg).unwrap();
            assert!((fam.total_mass() - 1.0).abs() < 1e-9);
            assert!(fam.marginal().sup_distance(&marg).unwrap() < 1e-9);
        }
    }

    #[test]
    fn srb_marginal_stays_invariant() {
        let model = ValidatedModel::reference();
        let (n, m) = (256, 64);
        let density = invariant_density(&ulam_operator(&model, n).unwrap()).unwrap();
        let fam0 = srb_iterate(&model, n, m, 0).unwrap();
        assert_eq!(fam0, LeafFamily::product(&density, m));
        let fam = srb_iterate(&model, n, m, 12).unwrap();
        assert!(fam.marginal().sup_distance(&density).unwrap() < 1e-6);
        assert!(fam.marginal().l1_distance(&density).unwrap() < 1e-6);
    }

    #[test]
    fn srb_iterates_are_cauchy() {
        let model = ValidatedModel::reference();
        let (n, m) = (256, 256);
        let op = FamilyOperator::new(&model, n, m).unwrap();
        let mut fam = srb_iterate(&model, n, m, 0).unwrap();
        let mut dists = Vec::new();
        for _ in 0..8 {
            let next = op.apply(&fam).unwrap();
            dists.push(prod_bound(&next, &fam).unwrap().total());
            fam = next;
        }
        let xs: Vec<f64> = (0..dists.len()).map(|i| i as f64).collect();
        let ys: Vec<f64> = dists.iter().map(|d| d.ln()).collect();
        let fit = crate::statistics::fit::linear_fit(&xs, &ys).unwrap();
        assert!(fit.slope < 0.0, "{dists:?}");
    }

    #[test]
    fn invariant_family_is_a_fixed_point() {
        let model = ValidatedModel::reference();
        let (n, m) = (512, 512);
        let fam = srb_iterate(&model, n, m, 30).unwrap();
        let next = push_forward(&model, &fam).unwrap();
        let h = 1.0 / m as f64;
        let s = n as f64;
        let worst = (0..n)
            .map(|i| {
                let d: Vec<f64> = fam
                    .column(i)
                    .iter()
                    .zip(next.column(i))
                    .map(|(a, b)| (a - b) * s)
                    .collect();
                flat_norm_uniform(&d, h)
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "leafwise W1⁰ residual {worst}");
    }

    #[test]
    fn prod_bound_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_family(&mut rng, 16, 16);
        assert_eq!(prod_bound(&a, &a).unwrap().total(), 0.0);
        // same leaves, marginals differing by total variation 0.1
        let mut b = a.clone();
        let (i, j) = (2, 9);
        let move_mass = 0.1f64.min(a.column_mass(i));
        let scale_i = (a.column_mass(i) - move_mass) / a.column_mass(i);
        let scale_j = (a.column_mass(j) + move_mass) / a.column_mass(j);
        for k in 0..16 {
            b.cells[i * 16 + k] *= scale_i;
            b.cells[j * 16 + k] *= scale_j;
        }
        let pb = prod_bound(&a, &b).unwrap();
        assert!(pb.leaf_term < 1e-12);
        assert!(pb.total() <= pb.leaf_term + move_mass + 1e-12);
        assert_relative_eq!(pb.marginal_term, move_mass, epsilon = 1e-12);
        let c = LeafFamily::lebesgue(16, 8);
        assert!(matches!(prod_bound(&a, &c), Err(Error::ShapeMismatch)));
        assert!(matches!(
            prod_bound(&a, &a.scaled(2.0)),
            Err(Error::MassMismatch(..))
        ));
    }

    #[test]
    fn var_g_examples() {
        assert_eq!(var_g(&LeafFamily::lebesgue(64, 32)), 0.0);
        let model = ValidatedModel::reference();
        let consts = LyConstants::measure(&model, &Density1D::uniform(128), 30).unwrap();
        let leb = LeafFamily::lebesgue(128, 128);
        let pushed = push_forward(&model, &leb).unwrap();
        let bound = consts.one_step_bound(&leb.marginal(), var_g(&leb));
        assert!(var_g(&pushed) <= bound, "{} > {bound}", var_g(&pushed));
    }

    #[test]
    fn ly_constants_reference() {
        let model = ValidatedModel::reference();
        let c = LyConstants::measure(&model, &Density1D::uniform(256), 10).unwrap();
        assert_relative_eq!(c.lambda, model.leaf_contraction(), epsilon = 1e-6);
        // |∂a/∂x| = σβ|x|^(β-1) ≤ σβ (1/2)^(β-1); b is constant on each branch
        assert!(c.k <= 0.5 * model.sigma() * model.beta() * 0.5f64.powf(model.beta() - 1.0) + 1e-6);
        assert_relative_eq!(
            c.var_inv_t_prime,
            2.0 / model.one_d_derivative(0.5).unwrap(),
            epsilon = 1e-6
        );
        let skew =
            LyConstants::measure(&DoublingSkew::cantor(), &Density1D::uniform(64), 3).unwrap();
        assert_eq!(skew.k, 0.0);
        assert_eq!(skew.var_inv_t_prime, 0.0);
    }

    #[test]
    fn restrict_examples() {
        let model = ValidatedModel::reference();
        let fam = srb_iterate(&model, 256, 64, 10).unwrap();
        let same = lipschitz_restrict(&fam, |_, _| 1.0, 1.0, 10.0).unwrap();
        assert_eq!(same.family, fam);
        assert!(same.within_bound());
        assert!(matches!(
            lipschitz_restrict(&fam, |x, _| x, 1.0, 10.0),
            Err(Error::NegativeObservable(_))
        ));
        // f constant on leaves: f̄ = f · marginal
        let r = lipschitz_restrict(&fam, |x, _| x + 0.5, 1.0, 10.0).unwrap();
        let marg = fam.marginal();
        let expected: Vec<f64> = (0..256)
            .map(|i| (fam.x_center(i) + 0.5) * marg.values()[i])
            .collect();
        assert_relative_eq!(r.var_fbar, variation(&expected), epsilon = 1e-9);
    }

    #[test]
    fn ball_mass_of_lebesgue() {
        let fam = LeafFamily::lebesgue(64, 64);
        for r in [0.05, 0.1, 0.2] {
            assert_relative_eq!(
                fam.ball_mass(0.013, -0.021, r),
                4.0 * r * r,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn integrate_bilinear_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fam = random_family(&mut rng, 16, 8);
        let direct: f64 = (0..16)
            .flat_map(|i| (0..8).map(move |k| (i, k)))
            .map(|(i, k)| fam.cells[i * 8 + k] * fam.x_center(i) * fam.y_center(k))
            .sum();
        assert_relative_eq!(fam.integrate(|x, y| x * y), direct, epsilon = 1e-14);
    }
}
