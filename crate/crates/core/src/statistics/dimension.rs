//! Local dimension from ball masses, and logarithm-law slopes from hitting or recurrence
//! times, both as regressions over a dyadic window of radii.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{segment_ball_interval, RoofFunction};
use crate::maps::{SectionPoint, SkewProduct, ValidatedModel};
use crate::measures::LeafFamily;
use crate::rng::Streams;
use crate::statistics::fit::{linear_fit, median, LinearFit};
use crate::statistics::hitting::FlowTarget;
use crate::statistics::sampling::SrbSampler;

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionEstimate {
    pub point: Vec<f64>,
    pub slope: f64,
    pub ci_halfwidth: f64,
    pub r2: f64,
    pub radii: Vec<f64>,
}

impl DimensionEstimate {
    pub fn r_range(&self) -> (f64, f64) {
        let lo = self.radii.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.radii.iter().copied().fold(0.0, f64::max);
        (lo, hi)
    }

    fn from_fit(point: Vec<f64>, radii: &[f64], f: LinearFit) -> Self {
        DimensionEstimate {
            point,
            slope: f.slope,
            ci_halfwidth: f.ci_halfwidth,
            r2: f.r2,
            radii: radii.to_vec(),
        }
    }
}

pub const MIN_RADII: usize = 4;

fn check_window(radii: &[f64]) -> Result<()> {
    if radii.len() < MIN_RADII {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_RADII} radii, got {}",
            radii.len()
        )));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    if radii[0] / radii[radii.len() - 1] < 8.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(
            "radii must span at least three dyadic scales".into(),
        ));
    }
    Ok(())
}

/// Slope of log μ(B_r) against log r.
pub fn dimension_from_masses(
    point: Vec<f64>,
    radii: &[f64],
    masses: &[f64],
) -> Result<DimensionEstimate> {
    check_window(radii)?;
    if masses.len() != radii.len() {
        return Err(Error::ShapeMismatch);
    }
    if let Some(j) = masses.iter().position(|m| !(*m > 0.0)) {
        return Err(Error::EmptyBall(radii[j]));
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = masses.iter().map(|m| m.ln()).collect();
    Ok(DimensionEstimate::from_fit(
        point,
        radii,
        linear_fit(&xs, &ys)?,
    ))
}

/// Local dimension from ball masses of a grid family; each ball must cover at least two
/// cells on either side of its center.
pub fn grid_local_dimension(
    fam: &LeafFamily,
    x0: SectionPoint,
    radii: &[f64],
) -> Result<DimensionEstimate> {
    let cell = 1.0 / fam.columns().min(fam.rows()) as f64;
    if let Some(r) = radii.iter().find(|&&r| r < 2.0 * cell) {
        return Err(Error::InvalidArgument(format!(
            "radius {r} is below two grid cells ({cell})"
        )));
    }
    let masses: Vec<f64> = radii
        .iter()
        .map(|&r| fam.ball_mass(x0.x, x0.y, r))
        .collect();
    dimension_from_masses(vec![x0.x, x0.y], radii, &masses)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallCounts {
    /// counts[t][j]: visits of target t's ball of radius j.
    pub counts: Vec<Vec<u64>>,
    pub iterations: u64,
}

impl BallCounts {
    pub fn masses(&self, t: usize) -> Vec<f64> {
        self.counts[t]
            .iter()
            .map(|&c| c as f64 / self.iterations as f64)
            .collect()
    }
}

const OCCUPATION_DOMAIN: u32 = 7;

/// Empirical ball masses around many targets from `chunks` independent SRB orbits of
/// `per_chunk` iterates each.
#[allow(clippy::too_many_arguments)]
pub fn orbit_ball_counts<S: SkewProduct>(
    s: &S,
    sampler: &SrbSampler,
    targets: &[SectionPoint],
    radii: &[f64],
    per_chunk: u64,
    chunks: usize,
    burn_in: usize,
    streams: &Streams,
) -> Result<BallCounts> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be strictly decreasing".into(),
        ));
    }
    let r0 = radii[0];
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[a].x.total_cmp(&targets[b].x));
    let sorted_x: Vec<f64> = order.iter().map(|&t| targets[t].x).collect();
    let per: Vec<Vec<Vec<u64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![vec![0u64; radii.len()]; targets.len()];
            let mut rng = streams.get(OCCUPATION_DOMAIN, c as u64);
            let mut q = sampler.draw(s, burn_in, &mut rng);
            for _ in 0..per_chunk {
                q = s.step(q, &mut rng);
                let lo = sorted_x.partition_point(|&x| x < q.x - r0);
                for (&t, &tx) in order[lo..].iter().zip(&sorted_x[lo..]) {
                    if tx > q.x + r0 {
                        break;
                    }
                    let d = q.dist(&targets[t]);
                    for (j, &r) in radii.iter().enumerate() {
                        if d > r {
                            break;
                        }
                        counts[t][j] += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![vec![0u64; radii.len()]; targets.len()];
    for p in &per {
        for (a, b) in counts.iter_mut().zip(p) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    Ok(BallCounts {
        counts,
        iterations: per_chunk * chunks as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOccupation {
    /// time[t][j]: time spent in target t's ball of radius j.
    pub time: Vec<Vec<f64>>,
    pub total_time: f64,
}

impl FlowOccupation {
    pub fn masses(&self, t: usize) -> Vec<f64> {
        self.time[t].iter().map(|v| v / self.total_time).collect()
    }
}

/// Occupation times of flow balls along SRB orbits; each cube segment contributes the
/// exact length of its crossing.
#[allow(clippy::too_many_arguments)]
pub fn flow_occupation(
    model: &ValidatedModel,
    sampler: &SrbSampler,
    targets: &[FlowTarget],
    radii: &[f64],
    per_chunk: u64,
    chunks: usize,
    burn_in: usize,
    streams: &Streams,
) -> Result<FlowOccupation> {
    if radii.is_empty() || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "radii must be strictly decreasing".into(),
        ));
    }
    let rf = RoofFunction::of(model);
    let per: Vec<(Vec<Vec<f64>>, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut time = vec![vec![0.0; radii.len()]; targets.len()];
            let mut total = 0.0;
            let mut rng = streams.get(OCCUPATION_DOMAIN + 1, c as u64);
            let mut q = sampler.draw(model, burn_in, &mut rng);
            for _ in 0..per_chunk {
                q = model.step(q, &mut rng);
                total += rf.eval(q.x);
                for (t, tgt) in targets.iter().enumerate() {
                    // the segment runs from x to sgn(x), so only targets on that side qualify
                    if tgt.point[0].signum() != q.x.signum()
                        || tgt.point[0].abs() + radii[0] < q.x.abs()
                    {
                        continue;
                    }
                    for (j, &r) in radii.iter().enumerate() {
                        match segment_ball_interval(model, q, tgt.point, r) {
                            Some((a, b)) => time[t][j] += b - a,
                            None => break,
                        }
                    }
                }
            }
            (time, total)
        })
        .collect();
    let mut time = vec![vec![0.0; radii.len()]; targets.len()];
    let mut total_time = 0.0;
    for (p, t) in &per {
        total_time += t;
        for (a, b) in time.iter_mut().zip(p) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    Ok(FlowOccupation { time, total_time })
}

/// One observed hitting or recurrence time. `time` is the cap when censored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingSample {
    pub sample_id: u64,
    pub radius: f64,
    pub time: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSummary {
    pub radius: f64,
    pub median_log_time: f64,
    pub samples: usize,
    pub censored_fraction: f64,
}

pub const MIN_STARTS: usize = 100;
pub const MAX_CENSORED: f64 = 0.2;

/// Median of ln τ over uncensored samples per radius, in decreasing radius order.
pub fn summarize_by_radius(samples: &[HittingSample]) -> Result<Vec<RadiusSummary>> {
    let mut radii: Vec<f64> = samples.iter().map(|s| s.radius).collect();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();
    let mut out = Vec::with_capacity(radii.len());
    for &r in &radii {
        let group: Vec<&HittingSample> = samples.iter().filter(|s| s.radius == r).collect();
        if group.len() < MIN_STARTS {
            return Err(Error::InvalidArgument(format!(
                "radius {r}: {} samples, need at least {MIN_STARTS}",
                group.len()
            )));
        }
        let logs: Vec<f64> = group
            .iter()
            .filter(|s| !s.censored)
            .map(|s| s.time.ln())
            .collect();
        let fraction = 1.0 - logs.len() as f64 / group.len() as f64;
        if fraction > MAX_CENSORED {
            return Err(Error::TooCensored {
                radius: r,
                fraction,
            });
        }
        out.push(RadiusSummary {
            radius: r,
            median_log_time: median(&logs).unwrap_or(f64::NAN),
            samples: group.len(),
            censored_fraction: fraction,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoglawFit {
    pub estimate: DimensionEstimate,
    pub by_radius: Vec<RadiusSummary>,
}

/// Regression of median ln τ_r against −ln r.
pub fn loglaw_slope(samples: &[HittingSample]) -> Result<LoglawFit> {
    let by_radius = summarize_by_radius(samples)?;
    let radii: Vec<f64> = by_radius.iter().map(|s| s.radius).collect();
    check_window(&radii)?;
    let xs: Vec<f64> = radii.iter().map(|r| -r.ln()).collect();
    let ys: Vec<f64> = by_radius.iter().map(|s| s.median_log_time).collect();
    Ok(LoglawFit {
        estimate: DimensionEstimate::from_fit(Vec::new(), &radii, linear_fit(&xs, &ys)?),
        by_radius,
    })
}

/// Relative deviation beyond which a single start's own log-law slope is flagged.
pub const INDIVIDUAL_DEVIATION: f64 = 0.25;

/// Fraction of starts whose individual slope (ln τ_r against −ln r over their uncensored
/// radii, at least `MIN_RADII` of them) deviates from `reference` by more than
/// `INDIVIDUAL_DEVIATION`. Starts with too few hits are left out. Descriptive only: the
/// logarithm law allows an exceptional set of starts.
pub fn individual_deviation_fraction(samples: &[HittingSample], reference: f64) -> Option<f64> {
    let mut ids: Vec<u64> = samples.iter().map(|s| s.sample_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut flagged = 0usize;
    let mut fitted = 0usize;
    for id in ids {
        let own: Vec<&HittingSample> = samples
            .iter()
            .filter(|s| s.sample_id == id && !s.censored)
            .collect();
        if own.len() < MIN_RADII {
            continue;
        }
        let xs: Vec<f64> = own.iter().map(|s| -s.radius.ln()).collect();
        let ys: Vec<f64> = own.iter().map(|s| s.time.ln()).collect();
        if let Ok(f) = linear_fit(&xs, &ys) {
            fitted += 1;
            flagged +=
                usize::from((f.slope - reference).abs() > INDIVIDUAL_DEVIATION * reference.abs());
        }
    }
    (fitted > 0).then(|| flagged as f64 / fitted as f64)
}

/// Slopes over sliding windows of consecutive radii: finite-radius proxies for the lower
/// and upper recurrence exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSlopes {
    pub slopes: Vec<f64>,
    pub by_radius: Vec<RadiusSummary>,
}

impl WindowSlopes {
    pub fn min(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.slopes
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether d lies in [min·(1 − tol), max·(1 + tol)].
    pub fn contains(&self, d: f64, tol: f64) -> bool {
        self.min() * (1.0 - tol) <= d && d <= self.max() * (1.0 + tol)
    }
}

pub fn window_slopes(samples: &[HittingSample], window: usize) -> Result<WindowSlopes> {
    let by_radius = summarize_by_radius(samples)?;
    if window < 2 || by_radius.len() < window {
        return Err(Error::InvalidArgument(format!(
            "window {window} needs at least as many radii, got {}",
            by_radius.len()
        )));
    }
    let slopes = by_radius
        .windows(window)
        .map(|w| {
            let xs: Vec<f64> = w.iter().map(|s| -s.radius.ln()).collect();
            let ys: Vec<f64> = w.iter().map(|s| s.median_log_time).collect();
            linear_fit(&xs, &ys).map(|f| f.slope)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(WindowSlopes { slopes, by_radius })
}

/// Dyadic radii 2^-from .. 2^-to, decreasing.
pub fn dyadic_radii(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Density1D;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_interval_and_square() {
        let radii = dyadic_radii(3, 7);
        let masses_1d: Vec<f64> = radii.iter().map(|r| 2.0 * r).collect();
        let d1 = dimension_from_masses(vec![0.0], &radii, &masses_1d).unwrap();
        assert_relative_eq!(d1.slope, 1.0, epsilon = 1e-12);
        let fam = LeafFamily::lebesgue(256, 256);
        let d2 = grid_local_dimension(&fam, SectionPoint::new(0.01, -0.02), &radii).unwrap();
        assert!((d2.slope - 2.0).abs() < 0.05, "{}", d2.slope);
        assert_eq!(d2.r_range(), (2f64.powi(-7), 0.125));
    }

    #[test]
    fn window_requirements() {
        let m = vec![1.0; 3];
        assert!(dimension_from_masses(vec![], &dyadic_radii(1, 3), &m).is_err());
        let radii = [0.1, 0.09, 0.08, 0.07];
        assert!(dimension_from_masses(vec![], &radii, &[1.0; 4]).is_err());
        let radii = dyadic_radii(2, 5);
        assert_eq!(
            dimension_from_masses(vec![], &radii, &[0.1, 0.01, 0.001, 0.0]),
            Err(Error::EmptyBall(radii[3]))
        );
        let fam = LeafFamily::product(&Density1D::uniform(64), 64);
        assert!(
            grid_local_dimension(&fam, SectionPoint::new(0.0, 0.0), &dyadic_radii(3, 6)).is_err()
        );
    }

    fn samples_for(radii: &[f64], d: f64, censor_every: usize) -> Vec<HittingSample> {
        let mut out = Vec::new();
        for (j, &r) in radii.iter().enumerate() {
            for i in 0..MIN_STARTS {
                // spread of a factor e around the power law
                let t = r.powf(-d) * ((i as f64 / MIN_STARTS as f64) - 0.5).exp();
                out.push(HittingSample {
                    sample_id: (j * MIN_STARTS + i) as u64,
                    radius: r,
                    time: t,
                    censored: censor_every > 0 && i % censor_every == 0,
                });
            }
        }
        out
    }

    #[test]
    fn loglaw_recovers_power() {
        let radii = dyadic_radii(4, 9);
        let fit = loglaw_slope(&samples_for(&radii, 1.7, 0)).unwrap();
        assert_relative_eq!(fit.estimate.slope, 1.7, epsilon = 1e-9);
        // invariant under rescaling the metric: radii × c keeps the slope
        let scaled: Vec<HittingSample> = samples_for(&radii, 1.7, 0)
            .into_iter()
            .map(|s| HittingSample {
                radius: s.radius * 3.0,
                ..s
            })
            .collect();
        assert_relative_eq!(
            loglaw_slope(&scaled).unwrap().estimate.slope,
            1.7,
            epsilon = 1e-9
        );
        let w = window_slopes(&samples_for(&radii, 1.7, 0), 4).unwrap();
        assert_eq!(w.slopes.len(), 3);
        assert!(w.contains(1.7, 1e-6));
    }

    #[test]
    fn censoring_limits() {
        let radii = dyadic_radii(4, 8);
        assert!(loglaw_slope(&samples_for(&radii, 1.0, 10)).is_ok());
        match loglaw_slope(&samples_for(&radii, 1.0, 4)) {
            Err(Error::TooCensored { fraction, .. }) => assert_relative_eq!(fraction, 0.25),
            other => panic!("{other:?}"),
        }
        let few: Vec<HittingSample> = samples_for(&radii, 1.0, 0).into_iter().step_by(2).collect();
        assert!(loglaw_slope(&few).is_err());
    }

    #[test]
    fn individual_deviations() {
        let radii = dyadic_radii(2, 6);
        let mut samples = Vec::new();
        for id in 0..10u64 {
            // nine starts scale like r^-1, one like r^-2
            let d = if id == 0 { 2.0 } else { 1.0 };
            for &r in &radii {
                samples.push(HittingSample {
                    sample_id: id,
                    radius: r,
                    time: r.powf(-d),
                    censored: false,
                });
            }
        }
        let f = individual_deviation_fraction(&samples, 1.0).unwrap();
        assert!((f - 0.1).abs() < 1e-12);
        assert_eq!(individual_deviation_fraction(&samples[..3], 1.0), None);
    }
}
