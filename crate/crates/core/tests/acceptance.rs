//! Acceptance suite: one pass/fail line per criterion. Runs at full protocol scale, so it is
//! built optimized (see the workspace test profile).
//!
//! A failing criterion is reported, not hidden: the process exits non-zero only when
//! `ACCEPTANCE_STRICT` is set, or when a protocol errors out instead of producing a verdict.

use std::time::{Duration, Instant};

use glorenz::experiments::*;
use glorenz::maps::{Doubling, DoublingSkew, SkewProduct, ValidatedModel};
use glorenz::measures::wasserstein::w1_same_grid;
use glorenz::measures::{push_leaf_into, w1_1d, w1_zero, Density1D, Measure1D};
use glorenz::rng::Streams;
use glorenz::statistics::correlation::McOptions;
use glorenz::statistics::exact::{exact_dimension, STABILITY_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 2024;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> glorenz::Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

struct Outcome {
    id: usize,
    name: &'static str,
    verdict: glorenz::Result<Verdict>,
    elapsed: Duration,
    budget: Option<Duration>,
}

fn run(
    id: usize,
    name: &'static str,
    budget_s: Option<u64>,
    f: impl FnOnce() -> glorenz::Result<Verdict>,
) -> Outcome {
    let t = Instant::now();
    let verdict = f();
    let o = Outcome {
        id,
        name,
        verdict,
        elapsed: t.elapsed(),
        budget: budget_s.map(Duration::from_secs),
    };
    report(&o);
    o
}

impl Outcome {
    fn within_budget(&self) -> bool {
        self.budget.is_none_or(|b| self.elapsed <= b)
    }

    fn passed(&self) -> bool {
        matches!(&self.verdict, Ok(v) if v.pass) && self.within_budget()
    }
}

fn report(o: &Outcome) {
    let budget = match o.budget {
        Some(b) if o.elapsed > b => format!(" OVER BUDGET {}s", b.as_secs()),
        _ => String::new(),
    };
    let (tag, detail) = match &o.verdict {
        Ok(v) => (if o.passed() { "PASS" } else { "FAIL" }, v.detail.clone()),
        Err(e) => ("FAIL", format!("error: {e}")),
    };
    println!(
        "criterion {:>2} {} {}: {} [{:.1}s{}]",
        o.id,
        tag,
        o.name,
        detail,
        o.elapsed.as_secs_f64(),
        budget
    );
}

fn density() -> glorenz::Result<Verdict> {
    let m = ValidatedModel::reference();
    let r = density_experiment(&m, 4096)?;
    let ratio = r.variation_ratio();
    let change = ratio.max(1.0 / ratio);
    let d = density_experiment(&Doubling, 4096)?;
    let sup = d.density.sup_distance(&Density1D::uniform(4096))?;
    verdict(
        r.residual < 1e-10 && change < 2.0 && sup < 1e-3,
        format!(
            "residual {:.2e}, variation N/(N/2) {:.3}, doubling sup error {:.2e}",
            r.residual, ratio, sup
        ),
    )
}

fn correlations() -> glorenz::Result<Verdict> {
    let m = ValidatedModel::reference();
    let srb = srb(&m, 512, 512)?;
    let pairs = correlation_experiment(
        &m,
        &srb,
        &OBSERVABLE_PAIRS,
        McOptions::default(),
        &Streams::new(SEED),
    )?;
    let mut pass = true;
    let mut parts = Vec::new();
    for p in &pairs {
        let dom = p.dominated.iter().all(|d| *d);
        match &p.fit {
            Ok(f) => {
                pass &= f.rate < 0.0 && f.quality >= 0.95 && dom;
                parts.push(format!(
                    "({:?},{:?}) rate {:.3} R2 {:.3} (raw {:.3}, {} lags) dominated {}",
                    name(&p.f),
                    name(&p.g),
                    f.rate,
                    f.quality,
                    f.raw_quality,
                    f.lags.len(),
                    dom
                ));
            }
            Err(e) => {
                pass = false;
                parts.push(format!(
                    "({:?},{:?}) fit failed: {e}",
                    name(&p.f),
                    name(&p.g)
                ));
            }
        }
    }
    verdict(pass, parts.join("; "))
}

fn name(o: &glorenz::statistics::Linear) -> String {
    match (o.a, o.b) {
        (1.0, 0.0) => "x".into(),
        (0.0, 1.0) => "y".into(),
        (1.0, 1.0) => "x+y".into(),
        (a, b) => format!("{a}x+{b}y"),
    }
}

fn lasota_yorke() -> glorenz::Result<Verdict> {
    let m = ValidatedModel::reference();
    let r = lasota_yorke_sweep(&m, 512, 512, 30)?;
    let worst = r.var_g.iter().cloned().fold(0.0, f64::max);
    verdict(
        r.holds(),
        format!(
            "max Var(G) over n <= 30 = {worst:.4} vs K' = {:.4}",
            r.k_prime
        ),
    )
}

fn random_grid(rng: &mut ChaCha8Rng, n: usize, mass: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let s: f64 = v.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    v.iter().map(|x| x * mass / s).collect()
}

fn random_atoms(rng: &mut ChaCha8Rng, mass: f64) -> Measure1D {
    let k = rng.random_range(1..12);
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    Measure1D::Atoms(
        w.iter()
            .map(|x| (rng.random_range(-0.5..0.5), x * mass / s))
            .collect(),
    )
}

fn wasserstein_suite() -> glorenz::Result<Verdict> {
    const INSTANCES: usize = 1000;
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let model = ValidatedModel::reference();
    let lambda = model.leaf_contraction();
    let (mut axioms, mut convex, mut contraction, mut gap) = (0, 0, 0, 0);
    for _ in 0..INSTANCES {
        // metric axioms for W1 (equal mass) and W1⁰ (any masses)
        let (a, b, c) = (
            random_atoms(&mut rng, 1.0),
            random_atoms(&mut rng, 1.0),
            random_atoms(&mut rng, 1.0),
        );
        let (ab, ba, ac, bc) = (
            w1_1d(&a, &b)?,
            w1_1d(&b, &a)?,
            w1_1d(&a, &c)?,
            w1_1d(&b, &c)?,
        );
        let ok_w1 =
            w1_1d(&a, &a)? <= TOL && (ab - ba).abs() <= TOL && ac <= ab + bc + TOL && ab >= 0.0;
        let masses: [f64; 3] = [
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
            rng.random_range(0.1..2.0),
        ];
        let (p, q, r) = (
            random_atoms(&mut rng, masses[0]),
            random_atoms(&mut rng, masses[1]),
            random_atoms(&mut rng, masses[2]),
        );
        let (pq, qp, pr, qr) = (
            w1_zero(&p, &q),
            w1_zero(&q, &p),
            w1_zero(&p, &r),
            w1_zero(&q, &r),
        );
        let ok_w0 =
            w1_zero(&p, &p) <= TOL && (pq - qp).abs() <= TOL && pr <= pq + qr + TOL && pq >= 0.0;
        axioms += usize::from(!(ok_w1 && ok_w0));

        // convexity on random grid quadruples
        let n = 64;
        let mus: Vec<Vec<f64>> = (0..4).map(|_| random_grid(&mut rng, n, 1.0)).collect();
        let s: f64 = rng.random();
        let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(y)
                .map(|(u, v)| s * u + (1.0 - s) * v)
                .collect()
        };
        let lhs = w1_same_grid(&mix(&mus[0], &mus[1]), &mix(&mus[2], &mus[3]));
        let rhs = s * w1_same_grid(&mus[0], &mus[2]) + (1.0 - s) * w1_same_grid(&mus[1], &mus[3]);
        convex += usize::from(lhs > rhs + TOL);

        // leaf contraction: both leaves pushed through the same fiber map
        let m = *[16usize, 64, 256].get(rng.random_range(0..3)).unwrap();
        let (u, v) = (random_grid(&mut rng, m, 1.0), random_grid(&mut rng, m, 1.0));
        let x = loop {
            let x: f64 = rng.random_range(-0.5..0.5);
            if x != 0.0 {
                break x;
            }
        };
        let (fa, fb) = model.fiber(x);
        let (mut pu, mut pv) = (vec![0.0; m], vec![0.0; m]);
        push_leaf_into(&mut pu, &u, 1.0, fa, fb);
        push_leaf_into(&mut pv, &v, 1.0, fa, fb);
        contraction += usize::from(
            w1_same_grid(&pu, &pv) > lambda * w1_same_grid(&u, &v) + 2.0 / m as f64 + TOL,
        );

        // W1⁰ ≥ |mass difference|
        let (g1, g2) = (
            random_grid(&mut rng, n, masses[0]),
            random_grid(&mut rng, n, masses[1]),
        );
        let w = w1_zero(&Measure1D::Grid(g1), &Measure1D::Grid(g2));
        gap += usize::from(w + TOL < (masses[0] - masses[1]).abs());
    }
    verdict(
        axioms + convex + contraction + gap == 0,
        format!(
            "{INSTANCES} instances each; violations: axioms {axioms}, convexity {convex}, leaf contraction {contraction}, mass gap {gap}"
        ),
    )
}

fn map_law() -> glorenz::Result<Verdict> {
    let m = ValidatedModel::reference();
    let srb = srb(&m, 512, 512)?;
    let rs = map_loglaw(
        &m,
        &srb.sampler,
        &LoglawConfig::default(),
        &Streams::new(SEED),
    )?;
    let errs: Vec<Option<f64>> = rs.iter().map(|r| r.relative_error()).collect();
    let good = errs.iter().filter(|e| e.is_some_and(|e| e <= 0.15)).count();
    verdict(
        good >= 8,
        format!(
            "{good}/{} targets within 15%; relative errors {}",
            rs.len(),
            fmt_opts(&errs)
        ),
    )
}

fn fmt_opts(v: &[Option<f64>]) -> String {
    let s: Vec<String> = v
        .iter()
        .map(|e| e.map_or("n/a".into(), |e| format!("{e:.3}")))
        .collect();
    format!("[{}]", s.join(", "))
}

fn flow_law() -> glorenz::Result<Verdict> {
    let m = ValidatedModel::reference();
    let srb = srb(&m, 512, 512)?;
    let rs = flow_loglaw(
        &m,
        &srb.sampler,
        &LoglawConfig::default(),
        &Streams::new(SEED),
    )?;
    let errs: Vec<Option<f64>> = rs.iter().map(|r| r.relative_error()).collect();
    let gaps: Vec<Option<f64>> = rs.iter().map(|r| r.dimension_gap()).collect();
    let good = errs.iter().filter(|e| e.is_some_and(|e| e <= 0.15)).count();
    let gaps_ok = gaps
        .iter()
        .all(|g| g.is_some_and(|g| (g - 1.0).abs() <= 0.15));
    verdict(
        good >= 8 && gaps_ok,
        format!(
            "{good}/{} targets within 15% of d_X - 1; relative errors {}; d_X - d_F {}",
            rs.len(),
            fmt_opts(&errs),
            fmt_opts(&gaps)
        ),
    )
}

fn sandwich() -> glorenz::Result<Verdict> {
    let m = ValidatedModel::reference();
    let srb = srb(&m, 512, 512)?;
    let r = sandwich_experiment(&m, &srb, &SandwichConfig::default(), &Streams::new(SEED))?;
    let frac = r.c_fraction_within(0.05);
    let birk = r.birkhoff_relative_error();
    verdict(
        frac >= 0.9 && birk <= 0.02 && r.all_hold(),
        format!(
            "c in [0.95, 1.05] for {:.1}% of {} samples; sandwich inequalities hold {}; Birkhoff roof {:.6} vs mean return {:.6} ({:.2e})",
            100.0 * frac,
            r.samples.len(),
            r.all_hold(),
            r.birkhoff_mean,
            r.mean_return_time,
            birk
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn recurrence() -> glorenz::Result<Verdict> {
    const TOL: f64 = 0.2;
    let cfg = RecurrenceConfig::default();
    let streams = Streams::new(SEED);
    let baker = DoublingSkew::baker();
    let bs = srb(&baker, 256, 256)?;
    let rb = recurrence_experiment(&baker, &bs.sampler, &cfg, &streams)?;
    let wb = rb.slopes?;
    let ok_baker = wb.contains(baker.dimension(), TOL);

    let m = ValidatedModel::reference();
    let ms = srb(&m, 512, 512)?;
    let rm = recurrence_experiment(&m, &ms.sampler, &cfg, &streams)?;
    let wm = rm.slopes?;
    let local = local_dimensions(
        &m,
        &ms.sampler,
        &rm.points,
        &cfg.radii,
        6_250_000,
        16,
        &streams.child(8),
    )?;
    let d_hat = median(
        local
            .into_iter()
            .filter_map(|d| d.ok().map(|d| d.slope))
            .collect(),
    );
    let ok_ref = wm.contains(d_hat, TOL);
    verdict(
        ok_baker && ok_ref,
        format!(
            "oracle window [{:.3}, {:.3}] vs 2; reference window [{:.3}, {:.3}] vs median local dimension {:.3}; tolerance 20%",
            wb.min(),
            wb.max(),
            wm.min(),
            wm.max(),
            d_hat
        ),
    )
}

fn exact() -> glorenz::Result<Verdict> {
    let cantor = exact_dimension(&DoublingSkew::cantor(), &Density1D::uniform(4096))?;
    let oracle = 1.0 + 2f64.ln() / 3f64.ln();
    let ok_oracle = (cantor.value - oracle).abs() <= 1e-3;

    let m = ValidatedModel::reference();
    let srb = srb(&m, 4096, 64)?;
    let e = exact_dimension(&m, &srb.family.marginal())?;
    let stable = e.truncation_delta.iter().all(|d| *d < STABILITY_TOL);

    let streams = Streams::new(SEED).child(9);
    let pts = srb_targets(&m, &srb.sampler, 5, &streams);
    // Ball masses grow in a staircase (slope 1 inside a strand, jumps at strand gaps), and
    // the transverse part appears as ~0.2 jumps per octave: the window has to span many
    // octaves for the slope to resolve it.
    let radii = glorenz::statistics::dimension::dyadic_radii(6, 18);
    let local = local_dimensions(&m, &srb.sampler, &pts, &radii, 25_000_000, 16, &streams)?;
    let errs: Vec<Option<f64>> = local
        .iter()
        .map(|d| d.as_ref().ok().map(|d| (d.slope - e.value).abs() / e.value))
        .collect();
    let ok_local = errs.iter().all(|x| x.is_some_and(|x| x <= 0.15));
    let slopes: Vec<Option<f64>> = local
        .iter()
        .map(|d| d.as_ref().ok().map(|d| d.slope))
        .collect();
    verdict(
        ok_oracle && stable && ok_local,
        format!(
            "oracle {:.6} vs {:.6}; reference d = {:.4} (h {:.4}, int phi {:.4}, truncation change {:.1e}/{:.1e}); local dimensions {} (relative errors {})",
            cantor.value,
            oracle,
            e.value,
            e.entropy,
            e.int_phi,
            e.truncation_delta[0],
            e.truncation_delta[1],
            fmt_opts(&slopes),
            fmt_opts(&errs)
        ),
    )
}

/// Serializes a small run of each stochastic protocol; compared across thread counts.
fn small_runs() -> glorenz::Result<String> {
    let m = ValidatedModel::reference();
    let srb = srb(&m, 256, 64)?;
    let streams = Streams::new(SEED);
    let cfg = LoglawConfig {
        targets: 2,
        starts: 20,
        radii: glorenz::statistics::dimension::dyadic_radii(5, 8),
        cap: 1e7,
        occupation_iterates: 20_000,
        occupation_chunks: 3,
    };
    let mut out = String::new();
    for r in map_loglaw(&m, &srb.sampler, &cfg, &streams)? {
        for s in &r.samples {
            out += &format!(
                "map,{},{},{},{},{},{}\n",
                r.target.x, r.target.y, s.radius, s.sample_id, s.time, s.censored
            );
        }
        out += &format!("local,{:?}\n", r.local.map(|l| l.slope));
    }
    for r in flow_loglaw(&m, &srb.sampler, &cfg, &streams)? {
        for s in &r.samples {
            out += &format!(
                "flow,{:?},{},{},{},{}\n",
                r.target.point, s.radius, s.sample_id, s.time, s.censored
            );
        }
    }
    let opts = McOptions {
        trajectories: 20_000,
        window: 8,
        ..McOptions::default()
    };
    let pairs = correlation_experiment(&m, &srb, &OBSERVABLE_PAIRS[..1], opts, &streams)?;
    out += &format!(
        "corr,{:?},{:?}\n",
        pairs[0].mc.estimate, pairs[0].mc.series.se
    );
    Ok(out)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

fn determinism() -> glorenz::Result<Verdict> {
    let a = in_pool(1, small_runs)?;
    let b = in_pool(1, small_runs)?;
    let c = in_pool(4, small_runs)?;
    verdict(
        a == b && a == c,
        format!(
            "{} bytes; rerun identical {}, 1 vs 4 threads identical {}",
            a.len(),
            a == b,
            a == c
        ),
    )
}

fn main() {
    // `cargo test` passes filter arguments through; this suite has no sub-tests to select.
    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    let outcomes = [
        run(1, "invariant density", Some(60), density),
        run(2, "decay of correlations", Some(600), correlations),
        run(
            3,
            "Lasota-Yorke bound on leaf variation",
            Some(600),
            lasota_yorke,
        ),
        run(4, "W1 / W1-flat properties", Some(120), wasserstein_suite),
        run(5, "logarithm law, map", Some(900), map_law),
        run(6, "logarithm law, flow", Some(1800), flow_law),
        run(7, "flow/section sandwich", None, sandwich),
        run(8, "quantitative recurrence", None, recurrence),
        run(9, "exact dimensionality", None, exact),
        run(10, "determinism", None, determinism),
    ];
    let passed = outcomes.iter().filter(|o| o.passed()).count();
    let errored = outcomes.iter().any(|o| o.verdict.is_err());
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    if errored || (strict && passed < outcomes.len()) {
        std::process::exit(1);
    }
}
