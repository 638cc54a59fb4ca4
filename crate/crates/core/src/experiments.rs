//! End-to-end experiment protocols shared by the command line front-end and the acceptance
//! suite. Every random draw comes from a counter-based stream indexed by sample id, and
//! parallel results are collected in index order, so outputs do not depend on the thread
//! count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::{birkhoff_roof_average, mean_return_time, SuspensionState};
use crate::maps::{SectionPoint, SkewProduct, ValidatedModel};
use crate::measures::{
    invariant_density, power_iteration, ulam_operator, var_g, Density1D, LeafFamily, LyConstants,
};
use crate::rng::Streams;
use crate::statistics::correlation::{
    correlation_mc, correlation_measure, dominated, DecayFit, Linear, McCorrelation, McOptions,
    MeasureDecay, Observable,
};
use crate::statistics::dimension::{
    dimension_from_masses, dyadic_radii, flow_occupation, individual_deviation_fraction,
    loglaw_slope, orbit_ball_counts, window_slopes, DimensionEstimate, HittingSample, LoglawFit,
    WindowSlopes,
};
use crate::statistics::hitting::{
    hitting_times_flow, hitting_times_map, recurrence_times_map, sandwich_sample, FlowTarget,
    Outcome, SandwichSample,
};
use crate::statistics::sampling::{SrbSampler, DEFAULT_BURN_IN};

const TARGET_DOMAIN: u32 = 11;
const START_DOMAIN: u32 = 12;
const FLOW_TARGET_DOMAIN: u32 = 13;
const SANDWICH_DOMAIN: u32 = 14;
const RECURRENCE_DOMAIN: u32 = 15;
const BIRKHOFF_DOMAIN: u32 = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityReport {
    pub density: Density1D,
    pub iterations: usize,
    pub residual: f64,
    pub contraction: f64,
    pub variation: f64,
    /// Variation of the fixed point at half the resolution.
    pub variation_coarse: f64,
}

impl DensityReport {
    /// Ratio of the grid variations at N and N/2.
    pub fn variation_ratio(&self) -> f64 {
        self.variation / self.variation_coarse
    }
}

pub fn density_experiment(map: &dyn crate::maps::IntervalMap, n: usize) -> Result<DensityReport> {
    let p = power_iteration(
        &ulam_operator(map, n)?,
        crate::measures::ulam::RESIDUAL_TOL,
        crate::measures::ulam::ITERATION_CAP,
    )?;
    let coarse = invariant_density(&ulam_operator(map, n / 2)?)?;
    Ok(DensityReport {
        variation: p.density.variation(),
        variation_coarse: coarse.variation(),
        density: p.density,
        iterations: p.iterations,
        residual: p.residual,
        contraction: p.contraction,
    })
}

/// Grid approximation of the physical measure and a sampler for it.
pub struct Srb {
    pub family: LeafFamily,
    pub sampler: SrbSampler,
}

/// Pushes the product (1D invariant density) × (uniform leaves) forward until the leaves
/// have contracted below the grid scale.
pub fn srb<S: SkewProduct>(s: &S, n: usize, m: usize) -> Result<Srb> {
    let family = crate::measures::srb_iterate(s, n, m, SRB_STEPS)?;
    let sampler = SrbSampler::new(&family)?;
    Ok(Srb { family, sampler })
}

/// 2^-1.5 per step: thirty steps shrink a leaf below 2^-45.
pub const SRB_STEPS: usize = 30;

#[derive(Debug, Clone)]
pub struct PairResult {
    pub f: Linear,
    pub g: Linear,
    pub mc: McCorrelation,
    pub fit: Result<DecayFit>,
    pub bound: MeasureDecay,
    pub dominated: Vec<bool>,
}

pub const OBSERVABLE_PAIRS: [(Linear, Linear); 3] = [
    (Linear::X, Linear::X),
    (Linear::Y, Linear::X),
    (Linear::X_PLUS_Y, Linear::Y),
];

pub fn correlation_experiment<S: SkewProduct>(
    s: &S,
    srb: &Srb,
    pairs: &[(Linear, Linear)],
    opts: McOptions,
    streams: &Streams,
) -> Result<Vec<PairResult>> {
    pairs
        .iter()
        .enumerate()
        .map(|(k, &(f, g))| {
            let mc = correlation_mc(s, &srb.sampler, &f, &g, opts, &streams.child(k as u64))?;
            let bound = correlation_measure(s, &srb.family, &f, opts.n_max)?;
            let fit = restrict(&mc.series, 1, opts.n_max).fit();
            let dominated = dominated(&mc.series, &bound, g.lipschitz());
            Ok(PairResult {
                f,
                g,
                mc,
                fit,
                bound,
                dominated,
            })
        })
        .collect()
}

fn restrict(
    s: &crate::statistics::DecaySeries,
    lo: usize,
    hi: usize,
) -> crate::statistics::DecaySeries {
    let keep: Vec<usize> = (0..s.n.len())
        .filter(|&i| s.n[i] >= lo && s.n[i] <= hi)
        .collect();
    crate::statistics::DecaySeries {
        n: keep.iter().map(|&i| s.n[i]).collect(),
        value: keep.iter().map(|&i| s.value[i]).collect(),
        se: keep.iter().map(|&i| s.se[i]).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyReport {
    pub constants: LyConstants,
    pub k_prime: f64,
    /// Var(G) of Fⁿ_*(Leb), n = 0..=steps.
    pub var_g: Vec<f64>,
}

impl LyReport {
    pub fn holds(&self) -> bool {
        self.var_g.iter().all(|v| *v <= self.k_prime)
    }
}

pub fn lasota_yorke_sweep<S: SkewProduct>(
    s: &S,
    n: usize,
    m: usize,
    steps: usize,
) -> Result<LyReport> {
    let constants = LyConstants::measure(s, &Density1D::uniform(n), steps)?;
    let mut fam = LeafFamily::lebesgue(n, m);
    let op = crate::measures::FamilyOperator::new(s, n, m)?;
    let mut vars = vec![var_g(&fam)];
    for _ in 0..steps {
        fam = op.apply(&fam)?;
        vars.push(var_g(&fam));
    }
    Ok(LyReport {
        k_prime: constants.k_prime(vars[0]),
        constants,
        var_g: vars,
    })
}

/// Shared parameters of the logarithm-law protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct LoglawConfig {
    pub targets: usize,
    pub starts: usize,
    pub radii: Vec<f64>,
    /// Iterations (map) or flow time (flow) before a start is censored.
    pub cap: f64,
    /// Orbit length per chunk and number of chunks for the local-dimension ball masses.
    pub occupation_iterates: u64,
    pub occupation_chunks: usize,
}

impl Default for LoglawConfig {
    fn default() -> Self {
        LoglawConfig {
            targets: 10,
            starts: 200,
            radii: dyadic_radii(6, 12),
            cap: 1e8,
            occupation_iterates: 6_250_000,
            occupation_chunks: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapTargetResult {
    pub target: SectionPoint,
    pub samples: Vec<HittingSample>,
    pub loglaw: Result<LoglawFit>,
    pub local: Result<DimensionEstimate>,
}

impl MapTargetResult {
    /// |slope − d̂| / d̂.
    pub fn relative_error(&self) -> Option<f64> {
        let (l, d) = (self.loglaw.as_ref().ok()?, self.local.as_ref().ok()?);
        Some((l.estimate.slope - d.slope).abs() / d.slope)
    }

    /// Fraction of starts whose own slope is more than 25% off d̂.
    pub fn exceptional_fraction(&self) -> Option<f64> {
        individual_deviation_fraction(&self.samples, self.local.as_ref().ok()?.slope)
    }
}

pub fn srb_targets<S: SkewProduct>(
    s: &S,
    sampler: &SrbSampler,
    count: usize,
    streams: &Streams,
) -> Vec<SectionPoint> {
    (0..count)
        .map(|t| {
            sampler.draw(
                s,
                DEFAULT_BURN_IN,
                &mut streams.get(TARGET_DOMAIN, t as u64),
            )
        })
        .collect()
}

fn to_samples(outcomes: &[Outcome<f64>], radii: &[f64], sample_id: u64) -> Vec<HittingSample> {
    outcomes
        .iter()
        .zip(radii)
        .map(|(o, &r)| HittingSample {
            sample_id,
            radius: r,
            time: o.value(),
            censored: !o.is_hit(),
        })
        .collect()
}

fn as_f64(outcomes: &[Outcome<u64>]) -> Vec<Outcome<f64>> {
    outcomes.iter().map(|o| o.map(|t| t as f64)).collect()
}

/// Hitting times from SRB starts to SRB targets, with the log-law slope and the ball-mass
/// local dimension of each target over the same radii.
pub fn map_loglaw<S: SkewProduct>(
    s: &S,
    sampler: &SrbSampler,
    cfg: &LoglawConfig,
    streams: &Streams,
) -> Result<Vec<MapTargetResult>> {
    let targets = srb_targets(s, sampler, cfg.targets, streams);
    let cap = cfg.cap as u64;
    let runs: Vec<Result<Vec<HittingSample>>> = (0..cfg.targets * cfg.starts)
        .into_par_iter()
        .map(|idx| {
            let (t, i) = (idx / cfg.starts, idx % cfg.starts);
            let mut rng = streams.get(START_DOMAIN, idx as u64);
            let start = sampler.draw(s, DEFAULT_BURN_IN, &mut rng);
            let out = hitting_times_map(s, start, targets[t], &cfg.radii, cap, &mut rng)?;
            Ok(to_samples(&as_f64(&out), &cfg.radii, i as u64))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let counts = orbit_ball_counts(
        s,
        sampler,
        &targets,
        &cfg.radii,
        cfg.occupation_iterates,
        cfg.occupation_chunks,
        DEFAULT_BURN_IN,
        streams,
    )?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(t, &target)| {
            let samples: Vec<HittingSample> = runs[t * cfg.starts..(t + 1) * cfg.starts].concat();
            MapTargetResult {
                target,
                loglaw: loglaw_slope(&samples),
                local: dimension_from_masses(
                    vec![target.x, target.y],
                    &cfg.radii,
                    &counts.masses(t),
                ),
                samples,
            }
        })
        .collect())
}

/// Fraction range of the cube traversal where flow targets are placed.
pub const PHASE_FRACTION: (f64, f64) = (0.25, 0.75);

/// Regular flow targets: SRB bases, phase fraction uniform in [`PHASE_FRACTION`], and the
/// largest ball inside the cube away from the stable leaf.
pub fn flow_targets(
    model: &ValidatedModel,
    sampler: &SrbSampler,
    count: usize,
    r_max: f64,
    streams: &Streams,
) -> Result<Vec<FlowTarget>> {
    (0..count)
        .map(|t| {
            let mut rng = streams.get(FLOW_TARGET_DOMAIN, t as u64);
            for _ in 0..10_000 {
                let base = sampler.draw(model, DEFAULT_BURN_IN, &mut rng);
                let u = rng.random_range(PHASE_FRACTION.0..PHASE_FRACTION.1);
                if base.x == 0.0 {
                    continue;
                }
                let tgt = FlowTarget::at_fraction(model, base, u)?;
                if tgt.is_regular(r_max) {
                    return Ok(tgt);
                }
            }
            Err(Error::InvalidArgument(
                "no regular flow target found".into(),
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTargetResult {
    pub target: FlowTarget,
    pub samples: Vec<HittingSample>,
    pub loglaw: Result<LoglawFit>,
    /// Local dimension of the flow measure at the target.
    pub flow_local: Result<DimensionEstimate>,
    /// Local dimension of the section measure at the target's base.
    pub section_local: Result<DimensionEstimate>,
}

impl FlowTargetResult {
    /// |slope − (d̂_X − 1)| / (d̂_X − 1).
    pub fn relative_error(&self) -> Option<f64> {
        let (l, d) = (self.loglaw.as_ref().ok()?, self.flow_local.as_ref().ok()?);
        Some((l.estimate.slope - (d.slope - 1.0)).abs() / (d.slope - 1.0))
    }

    /// Fraction of starts whose own slope is more than 25% off d̂_X − 1.
    pub fn exceptional_fraction(&self) -> Option<f64> {
        individual_deviation_fraction(&self.samples, self.flow_local.as_ref().ok()?.slope - 1.0)
    }

    /// d̂_X − d̂_F.
    pub fn dimension_gap(&self) -> Option<f64> {
        Some(self.flow_local.as_ref().ok()?.slope - self.section_local.as_ref().ok()?.slope)
    }
}

pub fn flow_loglaw(
    model: &ValidatedModel,
    sampler: &SrbSampler,
    cfg: &LoglawConfig,
    streams: &Streams,
) -> Result<Vec<FlowTargetResult>> {
    let targets = flow_targets(model, sampler, cfg.targets, cfg.radii[0], streams)?;
    let runs: Vec<Result<Vec<HittingSample>>> = (0..cfg.targets * cfg.starts)
        .into_par_iter()
        .map(|idx| {
            let (t, i) = (idx / cfg.starts, idx % cfg.starts);
            let mut rng = streams.get(START_DOMAIN + 100, idx as u64);
            let start = SuspensionState::at(sampler.draw(model, DEFAULT_BURN_IN, &mut rng));
            let out = hitting_times_flow(
                model,
                start,
                targets[t].point,
                &cfg.radii,
                cfg.cap,
                &mut rng,
            )?;
            let times: Vec<Outcome<f64>> = out.iter().map(|h| h.time).collect();
            Ok(to_samples(&times, &cfg.radii, i as u64))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let occ = flow_occupation(
        model,
        sampler,
        &targets,
        &cfg.radii,
        cfg.occupation_iterates,
        cfg.occupation_chunks,
        DEFAULT_BURN_IN,
        streams,
    )?;
    let bases: Vec<SectionPoint> = targets.iter().map(|t| t.base).collect();
    let counts = orbit_ball_counts(
        model,
        sampler,
        &bases,
        &cfg.radii,
        cfg.occupation_iterates,
        cfg.occupation_chunks,
        DEFAULT_BURN_IN,
        &streams.child(1),
    )?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(t, tgt)| {
            let samples: Vec<HittingSample> = runs[t * cfg.starts..(t + 1) * cfg.starts].concat();
            FlowTargetResult {
                target: *tgt,
                loglaw: loglaw_slope(&samples),
                flow_local: dimension_from_masses(tgt.point.to_vec(), &cfg.radii, &occ.masses(t)),
                section_local: dimension_from_masses(
                    vec![tgt.base.x, tgt.base.y],
                    &cfg.radii,
                    &counts.masses(t),
                ),
                samples,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichConfig {
    pub targets: usize,
    pub starts: usize,
    pub radius: f64,
    /// Section returns before a start is dropped.
    pub cap: u64,
    /// Returns averaged for the Birkhoff mean of the roof.
    pub birkhoff_returns: usize,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        SandwichConfig {
            targets: 10,
            starts: 100,
            radius: 2f64.powi(-10),
            cap: 100_000_000,
            birkhoff_returns: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub mean_return_time: f64,
    pub birkhoff_mean: f64,
    pub targets: Vec<FlowTarget>,
    /// (target index, start index, sample); `None` when the start was censored.
    pub samples: Vec<(usize, usize, Option<SandwichSample>)>,
}

impl SandwichReport {
    pub fn birkhoff_relative_error(&self) -> f64 {
        (self.birkhoff_mean - self.mean_return_time).abs() / self.mean_return_time
    }

    /// Fraction of all starts with c(x, r) in [1 − tol, 1 + tol]; censored starts count as
    /// failures.
    pub fn c_fraction_within(&self, tol: f64) -> f64 {
        let ok = self
            .samples
            .iter()
            .filter(|(_, _, s)| s.is_some_and(|s| (s.c - 1.0).abs() <= tol))
            .count();
        ok as f64 / self.samples.len() as f64
    }

    pub fn all_hold(&self) -> bool {
        self.samples
            .iter()
            .all(|(_, _, s)| s.is_none_or(|s| s.holds()))
    }
}

pub fn sandwich_experiment(
    model: &ValidatedModel,
    srb: &Srb,
    cfg: &SandwichConfig,
    streams: &Streams,
) -> Result<SandwichReport> {
    let mean = mean_return_time(model, &srb.family.marginal())?;
    let targets = flow_targets(
        model,
        &srb.sampler,
        cfg.targets,
        cfg.radius,
        &streams.child(2),
    )?;
    let samples: Vec<Result<(usize, usize, Option<SandwichSample>)>> = (0..cfg.targets
        * cfg.starts)
        .into_par_iter()
        .map(|idx| {
            let (t, i) = (idx / cfg.starts, idx % cfg.starts);
            let mut rng = streams.get(SANDWICH_DOMAIN, idx as u64);
            let start = srb.sampler.draw(model, DEFAULT_BURN_IN, &mut rng);
            Ok((
                t,
                i,
                sandwich_sample(
                    model,
                    start,
                    &targets[t],
                    cfg.radius,
                    mean,
                    cfg.cap,
                    &mut rng,
                )?,
            ))
        })
        .collect();
    let mut rng = streams.get(BIRKHOFF_DOMAIN, 0);
    let start = srb.sampler.draw(model, DEFAULT_BURN_IN, &mut rng);
    Ok(SandwichReport {
        mean_return_time: mean,
        birkhoff_mean: birkhoff_roof_average(model, start, cfg.birkhoff_returns, &mut rng),
        targets,
        samples: samples.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceConfig {
    pub points: usize,
    pub radii: Vec<f64>,
    pub cap: u64,
    pub window: usize,
}

impl Default for RecurrenceConfig {
    fn default() -> Self {
        RecurrenceConfig {
            points: 200,
            radii: dyadic_radii(6, 11),
            cap: 1_000_000_000,
            window: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceReport {
    pub points: Vec<SectionPoint>,
    pub samples: Vec<HittingSample>,
    pub slopes: Result<WindowSlopes>,
}

/// Return times of SRB points to their own balls; sample ids index the points.
pub fn recurrence_experiment<S: SkewProduct>(
    s: &S,
    sampler: &SrbSampler,
    cfg: &RecurrenceConfig,
    streams: &Streams,
) -> Result<RecurrenceReport> {
    let runs: Vec<Result<(SectionPoint, Vec<HittingSample>)>> = (0..cfg.points)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.get(RECURRENCE_DOMAIN, i as u64);
            let x0 = sampler.draw(s, DEFAULT_BURN_IN, &mut rng);
            let out = recurrence_times_map(s, x0, &cfg.radii, cfg.cap, &mut rng)?;
            Ok((x0, to_samples(&as_f64(&out), &cfg.radii, i as u64)))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let samples: Vec<HittingSample> = runs.iter().flat_map(|r| r.1.clone()).collect();
    Ok(RecurrenceReport {
        points: runs.iter().map(|r| r.0).collect(),
        slopes: window_slopes(&samples, cfg.window),
        samples,
    })
}

/// Local dimensions at SRB points from orbit ball counts.
pub fn local_dimensions<S: SkewProduct>(
    s: &S,
    sampler: &SrbSampler,
    points: &[SectionPoint],
    radii: &[f64],
    iterates: u64,
    chunks: usize,
    streams: &Streams,
) -> Result<Vec<Result<DimensionEstimate>>> {
    let counts = orbit_ball_counts(
        s,
        sampler,
        points,
        radii,
        iterates,
        chunks,
        DEFAULT_BURN_IN,
        streams,
    )?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(t, p)| dimension_from_masses(vec![p.x, p.y], radii, &counts.masses(t)))
        .collect())
}
