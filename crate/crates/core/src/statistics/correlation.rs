//! Decay of correlations, estimated two ways: Monte Carlo over SRB-distributed orbits, and
//! an upper bound through the distance between the pushed-forward density f·μ and μ.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{SectionPoint, SkewProduct};
use crate::measures::{prod_bound, FamilyOperator, LeafFamily};
use crate::rng::Streams;
use crate::statistics::fit::linear_fit;
use crate::statistics::sampling::SrbSampler;

/// A Lipschitz observable on Σ, with constants for the sup metric.
pub trait Observable: Sync {
    fn eval(&self, q: SectionPoint) -> f64;
    fn lipschitz(&self) -> f64;
    fn infimum(&self) -> f64;
}

/// a·x + b·y + c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Linear {
    pub const X: Linear = Linear {
        a: 1.0,
        b: 0.0,
        c: 0.0,
    };
    pub const Y: Linear = Linear {
        a: 0.0,
        b: 1.0,
        c: 0.0,
    };
    pub const X_PLUS_Y: Linear = Linear {
        a: 1.0,
        b: 1.0,
        c: 0.0,
    };

    pub fn constant(c: f64) -> Self {
        Linear { a: 0.0, b: 0.0, c }
    }

    /// Parses "x", "y", "x+y", "1" and the like.
    pub fn parse(s: &str) -> Option<Self> {
        match s.replace(' ', "").as_str() {
            "x" => Some(Self::X),
            "y" => Some(Self::Y),
            "x+y" | "y+x" => Some(Self::X_PLUS_Y),
            other => other.parse::<f64>().ok().map(Self::constant),
        }
    }
}

impl Observable for Linear {
    fn eval(&self, q: SectionPoint) -> f64 {
        self.a * q.x + self.b * q.y + self.c
    }
    fn lipschitz(&self) -> f64 {
        self.a.abs() + self.b.abs()
    }
    fn infimum(&self) -> f64 {
        self.c - 0.5 * (self.a.abs() + self.b.abs())
    }
}

/// A decaying sequence indexed by lag. `se` is zero for deterministic series.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySeries {
    pub n: Vec<usize>,
    pub value: Vec<f64>,
    pub se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// Slope of ln(value) against n.
    pub rate: f64,
    /// 95% half-width of the rate from the envelope regression.
    pub ci_halfwidth: f64,
    pub prefactor: f64,
    /// Coefficient of determination on the log scale, for the tail envelope.
    pub quality: f64,
    /// The same for the raw magnitudes, which dip near sign changes.
    pub raw_quality: f64,
    pub lags: Vec<usize>,
}

/// A lag is resolved when its magnitude exceeds this many standard errors.
pub const RESOLVED_SE: f64 = 3.0;

impl DecaySeries {
    pub fn resolved_lags(&self) -> Vec<usize> {
        (0..self.n.len())
            .filter(|&i| {
                self.n[i] >= 1 && self.value[i] > 0.0 && self.value[i] > RESOLVED_SE * self.se[i]
            })
            .collect()
    }

    /// Exponential fit over the resolved lags n ≥ 1 of the envelope max_{k ≥ n} value_k,
    /// which is what a bound C·e^{-γn} has to dominate.
    pub fn fit(&self) -> Result<DecayFit> {
        let idx = self.resolved_lags();
        if idx.len() < 3 {
            return Err(Error::InsufficientSamples {
                resolved: idx.len(),
            });
        }
        let xs: Vec<f64> = idx.iter().map(|&i| self.n[i] as f64).collect();
        let raw: Vec<f64> = idx.iter().map(|&i| self.value[i].ln()).collect();
        let mut envelope = raw.clone();
        for k in (0..envelope.len().saturating_sub(1)).rev() {
            envelope[k] = envelope[k].max(envelope[k + 1]);
        }
        let f = linear_fit(&xs, &envelope)?;
        let r = linear_fit(&xs, &raw)?;
        Ok(DecayFit {
            rate: f.slope,
            ci_halfwidth: f.ci_halfwidth,
            prefactor: f.intercept.exp(),
            quality: f.r2,
            raw_quality: r.r2,
            lags: idx.iter().map(|&i| self.n[i]).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n_max: usize,
    pub trajectories: usize,
    /// Each trajectory contributes a time average over this many starting times.
    pub window: usize,
    pub burn_in: usize,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            n_max: 25,
            trajectories: 100_000,
            window: 512,
            burn_in: crate::statistics::sampling::DEFAULT_BURN_IN,
        }
    }
}

pub const MIN_TRAJECTORIES: usize = 10_000;
const CHUNK: usize = 256;
const STREAM_DOMAIN: u32 = 1;

#[derive(Debug, Clone)]
pub struct McCorrelation {
    /// |C_n| with standard errors.
    pub series: DecaySeries,
    /// Signed C_n.
    pub estimate: Vec<f64>,
    pub mean_f: f64,
    pub mean_g: f64,
}

/// Per-lag sums over trajectories of P = ⟨f_t g_{t+n}⟩, F = ⟨f_t⟩, G = ⟨g_{t+n}⟩ and of their
/// products, for the delta-method variance of P̄ − F̄·Ḡ.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    first: Vec<[f64; 3]>,
    second: Vec<[f64; 6]>,
}

impl Moments {
    fn new(lags: usize) -> Self {
        Moments {
            count: 0.0,
            first: vec![[0.0; 3]; lags],
            second: vec![[0.0; 6]; lags],
        }
    }

    fn add(&mut self, other: &Moments) {
        self.count += other.count;
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            (0..3).for_each(|i| a[i] += b[i]);
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            (0..6).for_each(|i| a[i] += b[i]);
        }
    }
}

/// Monte Carlo estimate of C_n = ∫ f·g∘Fⁿ dμ − ∫f dμ ∫g dμ for n = 0..=n_max, with
/// trajectories started from `sampler` and one counter-based stream per trajectory.
pub fn correlation_mc<S: SkewProduct>(
    s: &S,
    sampler: &SrbSampler,
    f: &dyn Observable,
    g: &dyn Observable,
    opts: McOptions,
    streams: &Streams,
) -> Result<McCorrelation> {
    if opts.trajectories < MIN_TRAJECTORIES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRAJECTORIES} trajectories, got {}",
            opts.trajectories
        )));
    }
    if opts.window == 0 {
        return Err(Error::InvalidArgument("window must be positive".into()));
    }
    let lags = opts.n_max + 1;
    let w = opts.window;
    let chunks = opts.trajectories.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::new(lags);
            let mut fv = vec![0.0; w + opts.n_max];
            let mut gv = vec![0.0; w + opts.n_max];
            for j in c * CHUNK..((c + 1) * CHUNK).min(opts.trajectories) {
                let mut rng = streams.get(STREAM_DOMAIN, j as u64);
                let mut q = sampler.draw(s, opts.burn_in, &mut rng);
                for t in 0..w + opts.n_max {
                    fv[t] = f.eval(q);
                    gv[t] = g.eval(q);
                    q = s.step(q, &mut rng);
                }
                let fm = fv[..w].iter().sum::<f64>() / w as f64;
                for n in 0..lags {
                    let gm = gv[n..n + w].iter().sum::<f64>() / w as f64;
                    let pm = (0..w).map(|t| fv[t] * gv[t + n]).sum::<f64>() / w as f64;
                    let a = &mut m.first[n];
                    a[0] += pm;
                    a[1] += fm;
                    a[2] += gm;
                    let b = &mut m.second[n];
                    b[0] += pm * pm;
                    b[1] += pm * fm;
                    b[2] += pm * gm;
                    b[3] += fm * fm;
                    b[4] += fm * gm;
                    b[5] += gm * gm;
                }
                m.count += 1.0;
            }
            m
        })
        .collect();
    let mut total = Moments::new(lags);
    for p in &partial {
        total.add(p);
    }
    let j = total.count;
    let mut estimate = Vec::with_capacity(lags);
    let mut se = Vec::with_capacity(lags);
    for n in 0..lags {
        let [sp, sf, sg] = total.first[n];
        let (p, fm, gm) = (sp / j, sf / j, sg / j);
        let b = total.second[n];
        let cov = |sxy: f64, mx: f64, my: f64| (sxy - j * mx * my) / (j - 1.0);
        let (vpp, vpf, vpg) = (cov(b[0], p, p), cov(b[1], p, fm), cov(b[2], p, gm));
        let (vff, vfg, vgg) = (cov(b[3], fm, fm), cov(b[4], fm, gm), cov(b[5], gm, gm));
        // z = P − Ḡ F − F̄ G
        let var_z = vpp + gm * gm * vff + fm * fm * vgg - 2.0 * gm * vpf - 2.0 * fm * vpg
            + 2.0 * fm * gm * vfg;
        estimate.push(p - fm * gm);
        se.push((var_z.max(0.0) / j).sqrt());
    }
    let first = total.first[0];
    Ok(McCorrelation {
        series: DecaySeries {
            n: (0..lags).collect(),
            value: estimate.iter().map(|c| c.abs()).collect(),
            se,
        },
        estimate,
        mean_f: first[1] / j,
        mean_g: first[2] / j,
    })
}

#[derive(Debug, Clone)]
pub struct MeasureDecay {
    /// Upper bound on W1(Fⁿ_*(f̃μ/∫f̃), μ) for each n.
    pub series: DecaySeries,
    /// ∫ f̃ dμ with f̃ = f − inf f.
    pub mass: f64,
}

/// Distance series of the normalized density f̃·μ pushed forward against μ, on the grid of
/// the SRB family `srb`. Since f̃ differs from f by a constant, the correlation of f with any
/// g is bounded by L(g)·mass·value.
pub fn correlation_measure<S: SkewProduct>(
    s: &S,
    srb: &LeafFamily,
    f: &dyn Observable,
    n_max: usize,
) -> Result<MeasureDecay> {
    let (n, m) = (srb.columns(), srb.rows());
    let srb = srb.scaled(1.0 / srb.total_mass());
    let inf = f.infimum();
    let mut cells = srb.cells().to_vec();
    for i in 0..n {
        for k in 0..m {
            let v = f.eval(SectionPoint::new(srb.x_center(i), srb.y_center(k))) - inf;
            cells[i * m + k] *= v.max(0.0);
        }
    }
    let weighted = LeafFamily::from_cells(n, m, cells)?;
    let mass = weighted.total_mass();
    let lags: Vec<usize> = (0..=n_max).collect();
    if mass <= 1e-15 {
        return Ok(MeasureDecay {
            series: DecaySeries {
                value: vec![0.0; lags.len()],
                se: vec![0.0; lags.len()],
                n: lags,
            },
            mass: 0.0,
        });
    }
    let op = FamilyOperator::new(s, n, m)?;
    let mut cur = weighted.scaled(1.0 / mass);
    let mut value = Vec::with_capacity(lags.len());
    for step in 0..=n_max {
        value.push(prod_bound(&cur, &srb)?.total());
        if step < n_max {
            cur = op.apply(&cur)?;
        }
    }
    Ok(MeasureDecay {
        series: DecaySeries {
            se: vec![0.0; lags.len()],
            value,
            n: lags,
        },
        mass,
    })
}

/// Pointwise check |C_n| ≤ L(g)·mass·bound_n + 3·SE_n.
pub fn dominated(mc: &DecaySeries, bound: &MeasureDecay, lipschitz_g: f64) -> Vec<bool> {
    mc.value
        .iter()
        .zip(&mc.se)
        .zip(&bound.series.value)
        .map(|((c, se), b)| *c <= lipschitz_g * bound.mass * b + RESOLVED_SE * se)
        .collect()
}
