//! Hitting and recurrence times for sup-metric balls, for the return map and for the
//! suspension flow. All radii of a decreasing list are served by one orbit: the balls are
//! nested, so the first entrance times are nondecreasing along the list.

use crate::error::{Error, Result};
use crate::flow::{segment_ball_interval, RoofFunction, SuspensionState};
use crate::maps::{SectionPoint, SkewProduct, ValidatedModel};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome<T> {
    Hit(T),
    /// Not observed within the cap, which is carried along.
    Censored(T),
    /// Recurrence only: the orbit never left the ball within the cap.
    NeverLeft(T),
}

impl<T: Copy> Outcome<T> {
    pub fn hit(&self) -> Option<T> {
        match *self {
            Outcome::Hit(t) => Some(t),
            _ => None,
        }
    }

    pub fn value(&self) -> T {
        match *self {
            Outcome::Hit(t) | Outcome::Censored(t) | Outcome::NeverLeft(t) => t,
        }
    }

    pub fn map<U>(self, f: impl Fn(T) -> U) -> Outcome<U> {
        match self {
            Outcome::Hit(t) => Outcome::Hit(f(t)),
            Outcome::Censored(t) => Outcome::Censored(f(t)),
            Outcome::NeverLeft(t) => Outcome::NeverLeft(f(t)),
        }
    }

    pub fn is_hit(&self) -> bool {
        matches!(self, Outcome::Hit(_))
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::InvalidArgument(
            "radii must be positive and finite".into(),
        ));
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// First n ≥ 1 with Fⁿ(x) ∈ B_r(x0) (closed ball), for each radius.
pub fn hitting_times_map<S: SkewProduct>(
    s: &S,
    x: SectionPoint,
    x0: SectionPoint,
    radii: &[f64],
    cap: u64,
    rng: &mut Stream,
) -> Result<Vec<Outcome<u64>>> {
    check_radii(radii)?;
    let mut out = vec![Outcome::Censored(cap); radii.len()];
    let mut next = 0;
    let mut q = x;
    for n in 1..=cap {
        if s.is_singular(q.x) {
            return Err(Error::SingularOrbit);
        }
        q = s.step(q, rng);
        let d = q.dist(&x0);
        while next < radii.len() && d <= radii[next] {
            out[next] = Outcome::Hit(n);
            next += 1;
        }
        if next == radii.len() {
            break;
        }
    }
    Ok(out)
}

pub fn hitting_time_map<S: SkewProduct>(
    s: &S,
    x: SectionPoint,
    x0: SectionPoint,
    r: f64,
    cap: u64,
    rng: &mut Stream,
) -> Result<Outcome<u64>> {
    Ok(hitting_times_map(s, x, x0, &[r], cap, rng)?[0])
}

/// First return of the orbit of x0 to B_r(x0) after having left it, for each radius.
pub fn recurrence_times_map<S: SkewProduct>(
    s: &S,
    x0: SectionPoint,
    radii: &[f64],
    cap: u64,
    rng: &mut Stream,
) -> Result<Vec<Outcome<u64>>> {
    check_radii(radii)?;
    let mut out: Vec<Option<Outcome<u64>>> = vec![None; radii.len()];
    let mut left = vec![false; radii.len()];
    let mut open = radii.len();
    let mut q = x0;
    for n in 1..=cap {
        if s.is_singular(q.x) {
            return Err(Error::SingularOrbit);
        }
        q = s.step(q, rng);
        let d = q.dist(&x0);
        for j in 0..radii.len() {
            if out[j].is_some() {
                continue;
            }
            if !left[j] {
                left[j] = d > radii[j];
            } else if d <= radii[j] {
                out[j] = Some(Outcome::Hit(n));
                open -= 1;
            }
        }
        if open == 0 {
            break;
        }
    }
    Ok(out
        .iter()
        .zip(&left)
        .map(|(o, &l)| {
            o.unwrap_or(if l {
                Outcome::Censored(cap)
            } else {
                Outcome::NeverLeft(cap)
            })
        })
        .collect())
}

/// Single-radius recurrence; an orbit that never leaves the ball is an error.
pub fn recurrence_time_map<S: SkewProduct>(
    s: &S,
    x0: SectionPoint,
    r: f64,
    cap: u64,
    rng: &mut Stream,
) -> Result<Outcome<u64>> {
    match recurrence_times_map(s, x0, &[r], cap, rng)?[0] {
        Outcome::NeverLeft(c) => Err(Error::NeverLeft(c)),
        o => Ok(o),
    }
}

/// A point of the flow inside the cube, given by its section base and flow phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowTarget {
    pub base: SectionPoint,
    pub phase: f64,
    pub point: [f64; 3],
}

impl FlowTarget {
    pub fn new(model: &ValidatedModel, base: SectionPoint, phase: f64) -> Result<Self> {
        let cube = RoofFunction::of(model).cube_time(base.x);
        if base.x == 0.0 || !(0.0..cube).contains(&phase) {
            return Err(Error::InvalidArgument(format!(
                "phase {phase} outside the cube segment [0, {cube})"
            )));
        }
        Ok(FlowTarget {
            base,
            phase,
            point: [
                base.x * (model.lambda1() * phase).exp(),
                base.y * (model.lambda2() * phase).exp(),
                (model.lambda3() * phase).exp(),
            ],
        })
    }

    /// Target at a fraction `u` of the cube traversal of `base`.
    pub fn at_fraction(model: &ValidatedModel, base: SectionPoint, u: f64) -> Result<Self> {
        Self::new(model, base, u * RoofFunction::of(model).cube_time(base.x))
    }

    /// Whether B_r(point) lies inside the open cube and at distance ≥ r from the stable
    /// leaf x = 0 of the singularity.
    pub fn is_regular(&self, r: f64) -> bool {
        let [x, y, z] = self.point;
        x.abs() >= 2.0 * r && x.abs() + r < 1.0 && y.abs() + r < 1.0 && z - r > 0.0 && z + r < 1.0
    }

    pub fn as_state(&self) -> SuspensionState {
        SuspensionState {
            base: self.base,
            phase: self.phase,
        }
    }

    /// Section radius whose flow box lies inside B_r: every base within it crosses the
    /// ball at the target's phase.
    pub fn inner_radius(&self, model: &ValidatedModel, r: f64) -> f64 {
        r * (-model.lambda1() * self.phase).exp()
    }

    /// Section radius containing the base of every cube segment that meets B_r.
    pub fn outer_radius(&self, model: &ValidatedModel, r: f64) -> f64 {
        let (l1, l2, l3) = (model.lambda1(), model.lambda2(), model.lambda3());
        let z0 = self.point[2];
        // phases at which the z coordinate is within r of z0
        let t_lo = (z0 + r).min(1.0).ln() / l3;
        let t_hi = if z0 > r {
            (z0 - r).ln() / l3
        } else {
            f64::INFINITY
        };
        let drift = |rate: f64| {
            let a = (rate * (self.phase - t_lo)).exp() - 1.0;
            let b = (rate * (self.phase - t_hi)).exp() - 1.0;
            a.abs().max(b.abs())
        };
        let x_term = r * (-l1 * t_lo).exp() + self.base.x.abs() * drift(l1);
        let y_term = r * (-l2 * t_hi).exp() + self.base.y.abs() * drift(l2);
        x_term.max(y_term)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowHit {
    pub time: Outcome<f64>,
    /// Index k of the cube segment (from the k-th section crossing) where the hit occurs.
    pub segment: u64,
}

/// First t ≥ 0 with X^t(s) ∈ B_r(target) for each radius; the outer excursion never meets
/// a ball inside the cube. Crossings are solved in closed form per segment.
pub fn hitting_times_flow(
    model: &ValidatedModel,
    s: SuspensionState,
    target: [f64; 3],
    radii: &[f64],
    t_cap: f64,
    rng: &mut Stream,
) -> Result<Vec<FlowHit>> {
    check_radii(radii)?;
    let rf = RoofFunction::of(model);
    let mut out = vec![
        FlowHit {
            time: Outcome::Censored(t_cap),
            segment: 0,
        };
        radii.len()
    ];
    let mut next = 0;
    let mut q = s.base;
    let mut phase_lo = s.phase;
    // time elapsed when the orbit was at phase 0 of the current segment
    let mut seg_start = -s.phase;
    let mut k = 0u64;
    while seg_start <= t_cap {
        if q.x == 0.0 {
            return Err(Error::SingularOrbit);
        }
        while next < radii.len() {
            match segment_ball_interval(model, q, target, radii[next]) {
                Some((a, b)) if b >= phase_lo => {
                    let t = seg_start + a.max(phase_lo);
                    if t > t_cap {
                        break;
                    }
                    out[next] = FlowHit {
                        time: Outcome::Hit(t),
                        segment: k,
                    };
                    next += 1;
                }
                _ => break,
            }
        }
        if next == radii.len() {
            break;
        }
        seg_start += rf.eval(q.x);
        phase_lo = 0.0;
        q = model.step(q, rng);
        k += 1;
    }
    Ok(out)
}

pub fn hitting_time_flow(
    model: &ValidatedModel,
    s: SuspensionState,
    target: [f64; 3],
    r: f64,
    t_cap: f64,
    rng: &mut Stream,
) -> Result<Outcome<f64>> {
    Ok(hitting_times_flow(model, s, target, &[r], t_cap, rng)?[0].time)
}

/// Flow recurrence: first re-entrance of the trajectory of `x0` into B_r(x0) after leaving.
/// Within one cube segment each coordinate is monotone, so the ball is crossed at most once
/// per segment and the orbit has left once the starting segment's crossing ends.
pub fn recurrence_times_flow(
    model: &ValidatedModel,
    x0: &FlowTarget,
    radii: &[f64],
    t_cap: f64,
    rng: &mut Stream,
) -> Result<Vec<Outcome<f64>>> {
    check_radii(radii)?;
    let rf = RoofFunction::of(model);
    let mut out = vec![Outcome::Censored(t_cap); radii.len()];
    let mut q = x0.base;
    let mut seg_start = -x0.phase;
    let mut next = 0;
    let mut first = true;
    while seg_start <= t_cap && next < radii.len() {
        if q.x == 0.0 {
            return Err(Error::SingularOrbit);
        }
        if !first {
            while next < radii.len() {
                match segment_ball_interval(model, q, x0.point, radii[next]) {
                    Some((a, _)) if seg_start + a <= t_cap => {
                        out[next] = Outcome::Hit(seg_start + a);
                        next += 1;
                    }
                    _ => break,
                }
            }
        }
        first = false;
        seg_start += rf.eval(q.x);
        q = model.step(q, rng);
    }
    Ok(out)
}

/// One draw of the comparison between flow and section hitting. Section visits are
/// counted from k = 0 (the start itself) so that they index the same cube segments as the
/// flow. With ρ_in ≤ ρ_out the section radii of [`FlowTarget::inner_radius`] and
/// [`FlowTarget::outer_radius`], geometry forces n_out ≤ n_flow ≤ n_in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichSample {
    pub n_inner: u64,
    pub n_outer: u64,
    pub n_flow: u64,
    pub flow_time: f64,
    /// Σ_{k<n} t(F^k x) at n = n_outer, n_inner and n_inner + 1.
    pub sum_outer: f64,
    pub sum_inner: f64,
    pub sum_inner_next: f64,
    /// S_n / (n·t̄) at n = n_inner.
    pub c: f64,
}

impl SandwichSample {
    pub fn holds(&self) -> bool {
        self.n_outer <= self.n_flow
            && self.n_flow <= self.n_inner
            && self.sum_outer <= self.flow_time
            && self.flow_time <= self.sum_inner_next
    }
}

/// Runs the orbit of `start` until the inner section ball is visited. Returns `None` when
/// that does not happen within `cap` returns.
pub fn sandwich_sample(
    model: &ValidatedModel,
    start: SectionPoint,
    target: &FlowTarget,
    r: f64,
    mean_return: f64,
    cap: u64,
    rng: &mut Stream,
) -> Result<Option<SandwichSample>> {
    let rf = RoofFunction::of(model);
    let rho_in = target.inner_radius(model, r);
    let rho_out = target.outer_radius(model, r);
    let (mut n_in, mut n_out, mut flow): (Option<u64>, Option<u64>, Option<(u64, f64)>) =
        (None, None, None);
    let mut sum_outer = 0.0;
    let mut q = start;
    let mut sum = 0.0;
    for k in 0..=cap {
        if q.x == 0.0 {
            return Err(Error::SingularOrbit);
        }
        let d = q.dist(&target.base);
        if n_out.is_none() && d <= rho_out {
            n_out = Some(k);
            sum_outer = sum;
        }
        if flow.is_none() {
            if let Some((a, _)) = segment_ball_interval(model, q, target.point, r) {
                flow = Some((k, sum + a));
            }
        }
        let t = rf.eval(q.x);
        if d <= rho_in {
            n_in = Some(k);
        }
        if let Some(n) = n_in {
            let (n_flow, flow_time) = flow.unwrap_or((u64::MAX, f64::INFINITY));
            let n_outer = n_out.unwrap_or(u64::MAX);
            return Ok(Some(SandwichSample {
                n_inner: n,
                n_outer,
                n_flow,
                flow_time,
                sum_outer,
                sum_inner: sum,
                sum_inner_next: sum + t,
                c: if n == 0 {
                    f64::NAN
                } else {
                    sum / (n as f64 * mean_return)
                },
            }));
        }
        sum += t;
        q = model.step(q, rng);
    }
    Ok(None)
}
