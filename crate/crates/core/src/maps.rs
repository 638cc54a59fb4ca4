//! The geometric Lorenz return map F(x, y) = (T(x), G(x, y)) on Σ = I × I, I = [-1/2, 1/2],
//! plus a few reference maps with known invariant measures used as oracles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HALF: f64 = 0.5;

/// Nudge applied to orbits that land exactly on a singular point.
pub const SINGULAR_NUDGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub theta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_offset_plus")]
    pub g_offset_plus: f64,
    #[serde(default = "default_offset_minus")]
    pub g_offset_minus: f64,
    #[serde(default = "default_travel")]
    pub outer_travel_time: f64,
}

fn default_sigma() -> f64 {
    1.0
}
fn default_offset_plus() -> f64 {
    -0.25
}
fn default_offset_minus() -> f64 {
    0.25
}
fn default_travel() -> f64 {
    0.1
}

impl Default for ModelParams {
    /// Eigenvalues (10, -15, -6) and θ = 1.4: α = 0.6, β = 1.5.
    fn default() -> Self {
        ModelParams {
            lambda1: 10.0,
            lambda2: -15.0,
            lambda3: -6.0,
            theta: 1.4,
            sigma: default_sigma(),
            g_offset_plus: default_offset_plus(),
            g_offset_minus: default_offset_minus(),
            outer_travel_time: default_travel(),
        }
    }
}

impl ModelParams {
    /// The textbook Lorenz eigenvalues (ρ = 28, σ = 10, b = 8/3). They are outside the
    /// admissible regime and are rejected by [`validate`].
    pub fn classical() -> Self {
        ModelParams {
            lambda1: 11.83,
            lambda2: -22.83,
            lambda3: -8.0 / 3.0,
            ..Self::default()
        }
    }

    pub fn from_toml_str(s: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat struct of floats always serializes")
    }

    pub fn validate(self) -> Result<ValidatedModel> {
        validate(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionPoint {
    pub x: f64,
    pub y: f64,
}

impl SectionPoint {
    pub fn new(x: f64, y: f64) -> Self {
        SectionPoint { x, y }
    }

    /// Sup-metric distance on Σ.
    pub fn dist(&self, other: &SectionPoint) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

/// A model whose constructability inequalities have all been checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidatedModel {
    params: ModelParams,
    alpha: f64,
    beta: f64,
    leaf_lambda: f64,
}

pub fn validate(p: ModelParams) -> Result<ValidatedModel> {
    let fields = [
        ("lambda1", p.lambda1),
        ("lambda2", p.lambda2),
        ("lambda3", p.lambda3),
        ("theta", p.theta),
        ("sigma", p.sigma),
        ("g_offset_plus", p.g_offset_plus),
        ("g_offset_minus", p.g_offset_minus),
        ("outer_travel_time", p.outer_travel_time),
    ];
    for (name, v) in fields {
        if !v.is_finite() {
            return Err(Error::NonFinite(name));
        }
    }
    let order = |detail| Error::EigenvalueOrderViolation {
        lambda1: p.lambda1,
        lambda2: p.lambda2,
        lambda3: p.lambda3,
        detail,
    };
    if p.lambda1 <= 0.0 {
        return Err(order("lambda1 must be positive"));
    }
    if -p.lambda3 < p.lambda1 / 2.0 {
        return Err(order("-lambda3 < lambda1/2"));
    }
    if -p.lambda3 >= p.lambda1 {
        return Err(order("-lambda3 >= lambda1"));
    }
    if p.lambda1 >= -p.lambda2 {
        return Err(order("lambda1 >= -lambda2"));
    }
    let alpha = -p.lambda3 / p.lambda1;
    let beta = -p.lambda2 / p.lambda1;

    if p.theta <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: "must be positive".into(),
        });
    }
    let top = p.theta * HALF.powf(alpha);
    if top >= 1.0 {
        return Err(Error::ThetaTooLarge { value: top });
    }
    let min_slope = p.theta * alpha * 2f64.powf(1.0 - alpha);
    if min_slope <= 1.0 {
        return Err(Error::ThetaTooSmall { value: min_slope });
    }
    if !(p.sigma > 0.0 && p.sigma <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("{} not in (0, 1]", p.sigma),
        });
    }
    if p.outer_travel_time < 0.0 {
        return Err(Error::InvalidParameter {
            name: "outer_travel_time",
            reason: "must be nonnegative".into(),
        });
    }
    // |σ y |x|^β| <= σ (1/2)^(β+1) on Σ, so each branch image is offset ± h.
    let h = p.sigma * HALF.powf(beta + 1.0);
    for g in [p.g_offset_plus, p.g_offset_minus] {
        if g.abs() + h > HALF {
            return Err(Error::LeafImageOutside {
                lo: g - h,
                hi: g + h,
            });
        }
    }
    let gap = (p.g_offset_plus - p.g_offset_minus).abs() - 2.0 * h;
    if gap <= 0.0 {
        return Err(Error::LeafImagesOverlap { gap });
    }
    let leaf_lambda = p.sigma * HALF.powf(beta);
    debug_assert!(leaf_lambda < 1.0);
    Ok(ValidatedModel {
        params: p,
        alpha,
        beta,
        leaf_lambda,
    })
}

impl ValidatedModel {
    pub fn reference() -> Self {
        validate(ModelParams::default()).expect("reference parameters are admissible")
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn theta(&self) -> f64 {
        self.params.theta
    }
    pub fn sigma(&self) -> f64 {
        self.params.sigma
    }
    pub fn lambda1(&self) -> f64 {
        self.params.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.params.lambda2
    }
    pub fn lambda3(&self) -> f64 {
        self.params.lambda3
    }
    pub fn outer_travel_time(&self) -> f64 {
        self.params.outer_travel_time
    }
    /// Uniform contraction factor of the fiber maps, σ (1/2)^β.
    pub fn leaf_contraction(&self) -> f64 {
        self.leaf_lambda
    }
    /// Branch offsets of the one-dimensional map: b₀ = -1/2 (x > 0), b₁ = +1/2 (x < 0).
    pub fn branch_offsets(&self) -> (f64, f64) {
        (-HALF, HALF)
    }
    /// The singular line sits at x = c.
    pub fn singular_coordinate(&self) -> f64 {
        0.0
    }

    pub fn one_d_map(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::SingularInput);
        }
        Ok(self.one_d_map_total(x))
    }

    /// T extended to x = 0 by T(0) = -1/2.
    pub fn one_d_map_total(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.params.theta * x.powf(self.alpha) - HALF
        } else if x < 0.0 {
            HALF - self.params.theta * (-x).powf(self.alpha)
        } else {
            -HALF
        }
    }

    pub fn one_d_derivative(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Err(Error::SingularInput);
        }
        Ok(self.params.theta * self.alpha * x.abs().powf(self.alpha - 1.0))
    }

    /// Fiber map on the leaf through x: y ↦ a·y + b.
    pub fn fiber_coefficients(&self, x: f64) -> (f64, f64) {
        let a = self.params.sigma * x.abs().powf(self.beta);
        let b = if x > 0.0 {
            self.params.g_offset_plus
        } else {
            self.params.g_offset_minus
        };
        (a, b)
    }

    pub fn poincare_map(&self, q: SectionPoint) -> Result<SectionPoint> {
        let x = self.one_d_map(q.x)?;
        let (a, b) = self.fiber_coefficients(q.x);
        Ok(SectionPoint { x, y: a * q.y + b })
    }

    /// Row-major Jacobian [[∂T/∂x, 0], [∂G/∂x, ∂G/∂y]].
    pub fn d_poincare(&self, q: SectionPoint) -> Result<[[f64; 2]; 2]> {
        let t_prime = self.one_d_derivative(q.x)?;
        let ax = q.x.abs();
        let s = self.params.sigma;
        let gx = s * self.beta * q.y * ax.powf(self.beta - 1.0) * q.x.signum();
        let gy = s * ax.powf(self.beta);
        Ok([[t_prime, 0.0], [gx, gy]])
    }

    fn inverse_branch(&self, positive: bool, y: f64) -> f64 {
        let inv = 1.0 / self.alpha;
        if positive {
            ((y + HALF).max(0.0) / self.params.theta)
                .powf(inv)
                .min(HALF)
        } else {
            -((HALF - y).max(0.0) / self.params.theta)
                .powf(inv)
                .min(HALF)
        }
    }
}

/// A piecewise monotone map of I, continuous and monotone on each branch.
pub trait IntervalMap: Sync {
    fn apply(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// Branch endpoints, ascending; each branch is the open interval between neighbours.
    fn branch_points(&self) -> Vec<f64>;

    /// One-sided limits of the map at the two ends of branch `k`.
    fn branch_limits(&self, k: usize) -> (f64, f64) {
        let bp = self.branch_points();
        let (lo, hi) = (bp[k], bp[k + 1]);
        let eps = (hi - lo) * 1e-13;
        (self.apply(lo + eps), self.apply(hi - eps))
    }

    /// The point of branch `k` mapped to `y`, clamped to the branch when `y` is outside its image.
    fn branch_inverse(&self, k: usize, y: f64) -> f64 {
        let bp = self.branch_points();
        let (mut lo, mut hi) = (bp[k], bp[k + 1]);
        let (vlo, vhi) = self.branch_limits(k);
        let increasing = vhi >= vlo;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let below = self.apply(mid) < y;
            if below == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Whether x is a point where the map is undefined.
    fn is_singular(&self, _x: f64) -> bool {
        false
    }
}

impl IntervalMap for ValidatedModel {
    fn apply(&self, x: f64) -> f64 {
        self.one_d_map_total(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.params.theta * self.alpha * x.abs().powf(self.alpha - 1.0)
    }
    fn branch_points(&self) -> Vec<f64> {
        vec![-HALF, 0.0, HALF]
    }
    fn branch_limits(&self, k: usize) -> (f64, f64) {
        let top = self.params.theta * HALF.powf(self.alpha);
        match k {
            0 => (HALF - top, HALF),
            _ => (-HALF, top - HALF),
        }
    }
    fn branch_inverse(&self, k: usize, y: f64) -> f64 {
        self.inverse_branch(k == 1, y)
    }
    fn is_singular(&self, x: f64) -> bool {
        x == 0.0
    }
}

/// A skew product F(x, y) = (T(x), a(x)·y + b(x)) with 0 < a < 1.
pub trait SkewProduct: IntervalMap {
    fn fiber(&self, x: f64) -> (f64, f64);

    fn map(&self, q: SectionPoint) -> Result<SectionPoint> {
        if self.is_singular(q.x) {
            return Err(Error::SingularInput);
        }
        let (a, b) = self.fiber(q.x);
        Ok(SectionPoint::new(self.apply(q.x), a * q.y + b))
    }

    /// One step of a simulated orbit. Exact singular hits are nudged off the singular line;
    /// implementations may also inject randomness where plain floating point would collapse.
    fn step(&self, q: SectionPoint, _rng: &mut ChaCha8Rng) -> SectionPoint {
        let mut q = q;
        if self.is_singular(q.x) {
            q.x += SINGULAR_NUDGE;
        }
        let (a, b) = self.fiber(q.x);
        SectionPoint::new(self.apply(q.x), a * q.y + b)
    }

    /// Whether `step` consumes randomness.
    fn randomized_step(&self) -> bool {
        false
    }
}

impl SkewProduct for ValidatedModel {
    fn fiber(&self, x: f64) -> (f64, f64) {
        self.fiber_coefficients(x)
    }
}

/// x ↦ 2x ∓ 1/2 on I.
#[derive(Debug, Clone, Copy, Default)]
pub struct Doubling;

impl IntervalMap for Doubling {
    fn apply(&self, x: f64) -> f64 {
        if x < 0.0 {
            2.0 * x + HALF
        } else {
            2.0 * x - HALF
        }
    }
    fn derivative(&self, _x: f64) -> f64 {
        2.0
    }
    fn branch_points(&self) -> Vec<f64> {
        vec![-HALF, 0.0, HALF]
    }
    fn branch_limits(&self, _k: usize) -> (f64, f64) {
        (-HALF, HALF)
    }
    fn branch_inverse(&self, k: usize, y: f64) -> f64 {
        let y = y.clamp(-HALF, HALF);
        if k == 0 {
            (y - HALF) / 2.0
        } else {
            (y + HALF) / 2.0
        }
    }
}

/// Symmetric tent map on I.
#[derive(Debug, Clone, Copy, Default)]
pub struct Tent;

impl IntervalMap for Tent {
    fn apply(&self, x: f64) -> f64 {
        if x < 0.0 {
            2.0 * x + HALF
        } else {
            HALF - 2.0 * x
        }
    }
    fn derivative(&self, x: f64) -> f64 {
        if x < 0.0 {
            2.0
        } else {
            -2.0
        }
    }
    fn branch_points(&self) -> Vec<f64> {
        vec![-HALF, 0.0, HALF]
    }
    fn branch_limits(&self, k: usize) -> (f64, f64) {
        if k == 0 {
            (-HALF, HALF)
        } else {
            (HALF, -HALF)
        }
    }
    fn branch_inverse(&self, k: usize, y: f64) -> f64 {
        let y = y.clamp(-HALF, HALF);
        if k == 0 {
            (y - HALF) / 2.0
        } else {
            (HALF - y) / 2.0
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl IntervalMap for Identity {
    fn apply(&self, x: f64) -> f64 {
        x
    }
    fn derivative(&self, _x: f64) -> f64 {
        1.0
    }
    fn branch_points(&self) -> Vec<f64> {
        vec![-HALF, HALF]
    }
    fn branch_limits(&self, _k: usize) -> (f64, f64) {
        (-HALF, HALF)
    }
    fn branch_inverse(&self, _k: usize, y: f64) -> f64 {
        y.clamp(-HALF, HALF)
    }
}

/// Doubling base with fiber maps y ↦ c·y ∓ 1/4. With c = 1/2 the invariant measure is
/// Lebesgue on Σ (dimension 2); with c = 1/3 it is Lebesgue × a Cantor measure of
/// dimension 1 + ln 2 / ln 3.
#[derive(Debug, Clone, Copy)]
pub struct DoublingSkew {
    pub contraction: f64,
}

const FIXED_BITS: u32 = 53;

impl DoublingSkew {
    pub fn baker() -> Self {
        DoublingSkew { contraction: 0.5 }
    }
    pub fn cantor() -> Self {
        DoublingSkew {
            contraction: 1.0 / 3.0,
        }
    }
    /// Exact dimension of the invariant measure.
    pub fn dimension(&self) -> f64 {
        1.0 + 2f64.ln() / (1.0 / self.contraction).ln()
    }
}

impl IntervalMap for DoublingSkew {
    fn apply(&self, x: f64) -> f64 {
        Doubling.apply(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        Doubling.derivative(x)
    }
    fn branch_points(&self) -> Vec<f64> {
        Doubling.branch_points()
    }
    fn branch_limits(&self, k: usize) -> (f64, f64) {
        Doubling.branch_limits(k)
    }
    fn branch_inverse(&self, k: usize, y: f64) -> f64 {
        Doubling.branch_inverse(k, y)
    }
}

impl SkewProduct for DoublingSkew {
    fn fiber(&self, x: f64) -> (f64, f64) {
        (self.contraction, if x >= 0.0 { -0.25 } else { 0.25 })
    }

    /// Doubling in floating point shifts one mantissa bit out per step and collapses onto
    /// -1/2 after ~53 steps. The orbit is kept on the 2^-53 lattice and the vacated low bit
    /// is refilled with a fair coin, which is exactly the symbolic dynamics of Lebesgue.
    fn step(&self, q: SectionPoint, rng: &mut ChaCha8Rng) -> SectionPoint {
        let scale = (1u64 << FIXED_BITS) as f64;
        let mask = (1u64 << FIXED_BITS) - 1;
        let k = (((q.x + HALF) * scale) as u64).min(mask);
        let bit = rng.random::<bool>() as u64;
        let next = ((k << 1) & mask) | bit;
        let (a, b) = self.fiber(q.x);
        SectionPoint::new(next as f64 / scale - HALF, a * q.y + b)
    }

    fn randomized_step(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomReport {
    pub lipschitz_k: f64,
    pub leaf_lambda: f64,
    pub min_t_prime: f64,
    pub var_inv_t_prime: f64,
    /// Conditions: bounded x-Lipschitz constant, leaf contraction, expansion, BV of 1/T'.
    pub pass: [bool; 4],
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|&p| p)
    }
}

/// Sampled estimates of the Lorenz-like conditions: |G(x1,y) - G(x2,y)| <= k|x1 - x2| on each
/// branch, |∂G/∂y| <= λ < 1, T' > 1, and 1/|T'| of bounded variation (summed over branches).
pub fn axiom_check(
    t: &dyn IntervalMap,
    g: &dyn Fn(f64, f64) -> f64,
    samples: usize,
) -> AxiomReport {
    let samples = samples.max(1000);
    let bp = t.branch_points();
    let ys = [-HALF, -0.25, 0.0, 0.25, HALF];
    let mut k_est: f64 = 0.0;
    let mut lam_est: f64 = 0.0;
    let mut min_tp = f64::INFINITY;
    let var_inv = var_inv_derivative(t, samples);
    let per_branch = samples / (bp.len() - 1);
    for w in bp.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let node = |i: usize| lo + (hi - lo) * (i as f64 + 0.5) / per_branch as f64;
        for i in 0..per_branch {
            let x = node(i);
            min_tp = min_tp.min(t.derivative(x).abs());
            let g0 = g(x, ys[0]);
            let g1 = g(x, ys[4]);
            lam_est = lam_est.max(((g1 - g0) / (ys[4] - ys[0])).abs());
            if i + 1 < per_branch {
                let x2 = node(i + 1);
                for &y in &ys {
                    k_est = k_est.max(((g(x2, y) - g(x, y)) / (x2 - x)).abs());
                }
            }
        }
    }
    let pass = [
        k_est.is_finite(),
        lam_est < 1.0 - 1e-9,
        min_tp > 1.0 + 1e-9,
        var_inv.is_finite(),
    ];
    AxiomReport {
        lipschitz_k: k_est,
        leaf_lambda: lam_est,
        min_t_prime: min_tp,
        var_inv_t_prime: var_inv,
        pass,
    }
}

/// Variation of 1/|T'| over I, summing the monotone oscillation on each branch.
pub fn var_inv_derivative(t: &dyn IntervalMap, samples_per_branch: usize) -> f64 {
    let bp = t.branch_points();
    let mut total = 0.0;
    for w in bp.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mut prev: Option<f64> = None;
        for i in 0..=samples_per_branch {
            // the endpoint nodes sit one ulp inside the branch
            let x = match i {
                0 => lo.next_up(),
                i if i == samples_per_branch => hi.next_down(),
                i => lo + (hi - lo) * i as f64 / samples_per_branch as f64,
            };
            let inv = 1.0 / t.derivative(x).abs();
            if let Some(p) = prev {
                total += (inv - p).abs();
            }
            prev = Some(inv);
        }
    }
    total
}
