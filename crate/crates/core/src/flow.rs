//! Suspension flow over the return map with roof t(x) = -ln|x|/λ₁ + Δ.
//!
//! Inside the cube [-1,1]³ the flow is linear, X^t(x,y,z) = (x e^{λ₁t}, y e^{λ₂t}, z e^{λ₃t}).
//! A point (x, y, 1) of the section reaches the face |x| = 1 after -ln|x|/λ₁; the outer
//! excursion back to the section is modelled as a fixed travel time Δ.

use crate::error::{Error, Result};
use crate::maps::{SectionPoint, SkewProduct, ValidatedModel};
use crate::measures::Density1D;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoofFunction {
    pub lambda1: f64,
    pub outer_travel_time: f64,
}

impl RoofFunction {
    pub fn of(model: &ValidatedModel) -> Self {
        RoofFunction {
            lambda1: model.lambda1(),
            outer_travel_time: model.outer_travel_time(),
        }
    }

    pub fn cube_time(&self, x: f64) -> f64 {
        -x.abs().ln() / self.lambda1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.cube_time(x) + self.outer_travel_time
    }

    /// Constants (K, C) with -ln(d)/K - C ≤ t ≤ -ln(d)/K + C for d = |x| the distance to Γ.
    pub fn log_bound_constants(&self) -> (f64, f64) {
        (self.lambda1, self.outer_travel_time)
    }

    /// ∫_a^b t(x) dx, exact.
    pub fn cell_integral(&self, a: f64, b: f64) -> f64 {
        neg_log_abs_integral(a, b) / self.lambda1 + self.outer_travel_time * (b - a)
    }
}

/// ∫_a^b -ln|x| dx for a ≤ b (finite also across 0).
pub fn neg_log_abs_integral(a: f64, b: f64) -> f64 {
    // antiderivative of -ln u on u > 0: u - u ln u, which vanishes at 0
    let prim = |u: f64| if u == 0.0 { 0.0 } else { u - u * u.ln() };
    if a >= 0.0 {
        prim(b) - prim(a)
    } else if b <= 0.0 {
        prim(-a) - prim(-b)
    } else {
        prim(-a) + prim(b)
    }
}

pub fn roof(model: &ValidatedModel, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::SingularInput);
    }
    Ok(RoofFunction::of(model).eval(x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionState {
    pub base: SectionPoint,
    pub phase: f64,
}

impl SuspensionState {
    pub fn at(base: SectionPoint) -> Self {
        SuspensionState { base, phase: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowPoint {
    Cube {
        x: f64,
        y: f64,
        z: f64,
    },
    /// On the excursion outside the cube; lands on the section at `landing` after `remaining`.
    Outer {
        landing: SectionPoint,
        remaining: f64,
    },
}

impl FlowPoint {
    pub fn cube(x: f64, y: f64, z: f64) -> Self {
        FlowPoint::Cube { x, y, z }
    }

    pub fn coords(&self) -> Option<[f64; 3]> {
        match *self {
            FlowPoint::Cube { x, y, z } => Some([x, y, z]),
            FlowPoint::Outer { .. } => None,
        }
    }

    /// Sup-metric distance between two in-cube points.
    pub fn dist(&self, other: &FlowPoint) -> Option<f64> {
        let (a, b) = (self.coords()?, other.coords()?);
        Some((0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max))
    }
}

pub fn linear_flow(model: &ValidatedModel, p: FlowPoint, t: f64) -> FlowPoint {
    match p {
        FlowPoint::Cube { x, y, z } => FlowPoint::Cube {
            x: x * (model.lambda1() * t).exp(),
            y: y * (model.lambda2() * t).exp(),
            z: z * (model.lambda3() * t).exp(),
        },
        outer => outer,
    }
}

/// Cube time and exit point L(x, y, 1) = (sgn x, y|x|^β, |x|^α).
pub fn cube_exit(model: &ValidatedModel, q: SectionPoint) -> Result<(f64, FlowPoint)> {
    if q.x == 0.0 {
        return Err(Error::SingularInput);
    }
    let ax = q.x.abs();
    Ok((
        RoofFunction::of(model).cube_time(q.x),
        FlowPoint::cube(
            q.x.signum(),
            q.y * ax.powf(model.beta()),
            ax.powf(model.alpha()),
        ),
    ))
}

pub fn advance(model: &ValidatedModel, s: SuspensionState, dt: f64) -> Result<SuspensionState> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative time step {dt}")));
    }
    let rf = RoofFunction::of(model);
    let mut base = s.base;
    let mut phase = s.phase + dt;
    loop {
        if base.x == 0.0 {
            return Err(Error::SingularInput);
        }
        let t = rf.eval(base.x);
        if phase < t {
            return Ok(SuspensionState { base, phase });
        }
        phase -= t;
        base = model.poincare_map(base)?;
    }
}

pub fn embed(model: &ValidatedModel, s: SuspensionState) -> FlowPoint {
    let rf = RoofFunction::of(model);
    let cube = rf.cube_time(s.base.x);
    if s.phase < cube {
        linear_flow(model, FlowPoint::cube(s.base.x, s.base.y, 1.0), s.phase)
    } else {
        FlowPoint::Outer {
            landing: model
                .poincare_map(s.base)
                .unwrap_or(SectionPoint::new(-0.5, s.base.y)),
            remaining: rf.eval(s.base.x) - s.phase,
        }
    }
}

/// ∫ t dμ for the density of the x-marginal, with exact cell integrals of the logarithm.
pub fn mean_return_time(model: &ValidatedModel, density: &Density1D) -> Result<f64> {
    let rf = RoofFunction::of(model);
    let d = density.normalized()?;
    let v = d.integrate_cells(|a, b| rf.cell_integral(a, b));
    if !v.is_finite() {
        return Err(Error::NonIntegrable);
    }
    Ok(v)
}

/// Birkhoff average of the roof along a simulated orbit of `n` returns.
pub fn birkhoff_roof_average(
    model: &ValidatedModel,
    start: SectionPoint,
    n: usize,
    rng: &mut Stream,
) -> f64 {
    let rf = RoofFunction::of(model);
    let mut q = start;
    let mut total = 0.0;
    for _ in 0..n {
        q = model.step(q, rng);
        total += rf.eval(q.x);
    }
    total / n as f64
}

/// Set of times t ≥ 0 with v·e^{rate t} ∈ [lo, hi], as a closed interval (possibly empty
/// or unbounded).
pub fn exp_band_times(v: f64, rate: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if v == 0.0 || rate == 0.0 {
        return (lo <= v && v <= hi).then_some((0.0, f64::INFINITY));
    }
    // work with the positive magnitude |v| e^{rate t}
    let s = v.signum();
    let (a, b) = if s > 0.0 { (lo, hi) } else { (-hi, -lo) };
    if b <= 0.0 {
        return None;
    }
    let m = v.abs();
    let t_of = |u: f64| (u / m).ln() / rate;
    let (t_a, t_b) = if a > 0.0 {
        (t_of(a), t_of(b))
    } else if rate > 0.0 {
        (f64::NEG_INFINITY, t_of(b))
    } else {
        (f64::INFINITY, t_of(b))
    };
    let (t0, t1) = if t_a <= t_b { (t_a, t_b) } else { (t_b, t_a) };
    let t0 = t0.max(0.0);
    (t0 <= t1).then_some((t0, t1))
}

/// Times in [0, cube time] at which the in-cube segment from q lies in the sup-ball B_r(c).
pub fn segment_ball_interval(
    model: &ValidatedModel,
    q: SectionPoint,
    c: [f64; 3],
    r: f64,
) -> Option<(f64, f64)> {
    if q.x == 0.0 {
        return None;
    }
    let tau = RoofFunction::of(model).cube_time(q.x);
    let (mut lo, mut hi) = (0.0f64, tau);
    for (v, rate, ci) in [
        (q.x, model.lambda1(), c[0]),
        (q.y, model.lambda2(), c[1]),
        (1.0, model.lambda3(), c[2]),
    ] {
        let (a, b) = exp_band_times(v, rate, ci - r, ci + r)?;
        lo = lo.max(a);
        hi = hi.min(b);
        if lo > hi {
            return None;
        }
    }
    Some((lo, hi))
}
