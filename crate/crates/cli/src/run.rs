//! Runs one configured experiment and writes its artifacts: a manifest, and CSVs of
//! samples, fits, metrics and experiment-specific tables. Everything is collected first
//! and written once at the end, including when the experiment fails part-way.

use std::fs;
use std::path::Path;

use glorenz::experiments::{self as ex, Srb};
use glorenz::maps::{axiom_check, DoublingSkew, SectionPoint, SkewProduct, ValidatedModel};
use glorenz::measures::Density1D;
use glorenz::rng::Streams;
use glorenz::statistics::{
    exact_dimension, exact_dimension_closed_form, saussol_check, DimensionEstimate, HittingSample,
};
use serde::{Deserialize, Serialize};

use crate::config::{parse_pair, Experiment, ExperimentConfig, System};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub experiment_id: String,
    pub target_x: f64,
    pub target_y: f64,
    pub r: f64,
    pub sample_id: u64,
    pub time: f64,
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub experiment_id: String,
    pub slope: f64,
    pub ci: f64,
    pub n_samples: usize,
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub experiment_id: String,
    pub metric: String,
    pub value: f64,
}

/// A free-form table written as `<experiment>.<name>.csv`.
struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

#[derive(Default)]
struct Artifacts {
    samples: Vec<SampleRow>,
    fits: Vec<FitRow>,
    metrics: Vec<MetricRow>,
    tables: Vec<Table>,
    derived: toml::Table,
}

impl Artifacts {
    fn metric(&mut self, id: impl Into<String>, metric: &str, value: f64) {
        self.metrics.push(MetricRow {
            experiment_id: id.into(),
            metric: metric.into(),
            value,
        });
    }

    fn flag(&mut self, id: impl Into<String>, metric: &str, value: bool) {
        self.metric(id, metric, f64::from(u8::from(value)));
    }

    fn samples(&mut self, id: &str, target: SectionPoint, samples: &[HittingSample]) {
        self.samples.extend(samples.iter().map(|s| SampleRow {
            experiment_id: id.into(),
            target_x: target.x,
            target_y: target.y,
            r: s.radius,
            sample_id: s.sample_id,
            time: s.time,
            censored: s.censored,
        }));
    }

    fn dimension_fit(&mut self, id: String, d: &DimensionEstimate) {
        self.fits.push(FitRow {
            experiment_id: id,
            slope: d.slope,
            ci: d.ci_halfwidth,
            n_samples: d.radii.len(),
            quality: d.r2,
        });
    }
}

/// Loglaw fits count the uncensored hitting times they were built from.
fn loglaw_fit(
    art: &mut Artifacts,
    id: String,
    fit: &glorenz::statistics::dimension::LoglawFit,
    samples: &[HittingSample],
) {
    art.fits.push(FitRow {
        experiment_id: id,
        slope: fit.estimate.slope,
        ci: fit.estimate.ci_halfwidth,
        n_samples: samples.iter().filter(|s| !s.censored).count(),
        quality: fit.estimate.r2,
    });
}

pub const MANIFEST_PREFIX: &str = "manifest-";

pub fn run(cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    if cfg.experiment == Experiment::Report {
        return crate::report::report(&cfg.out).map(|text| print!("{text}"));
    }
    fs::create_dir_all(&cfg.out)
        .map_err(CliError::io(format!("creating {}", cfg.out.display())))?;
    let mut art = Artifacts::default();
    let result = execute(cfg, &mut art);
    write_all(cfg, &art, result.as_ref().err())?;
    result
}

fn execute(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<(), CliError> {
    let model = match cfg.system {
        System::Model => Some(validate_model(cfg, art)?),
        _ => None,
    };
    let failed = |source: glorenz::Error| CliError::ExperimentFailed {
        experiment: cfg.experiment.id(),
        source,
    };
    match (cfg.system, &model) {
        (System::Model, Some(m)) => dispatch(cfg, m, Some(m), art).map_err(failed),
        (System::Baker, _) => dispatch(cfg, &DoublingSkew::baker(), None, art).map_err(failed),
        (System::Cantor, _) => dispatch(cfg, &DoublingSkew::cantor(), None, art).map_err(failed),
        (System::Model, None) => unreachable!("model system always validates first"),
    }
}

fn validate_model(cfg: &ExperimentConfig, art: &mut Artifacts) -> Result<ValidatedModel, CliError> {
    let m = cfg
        .model_params()
        .validate()
        .map_err(CliError::ModelInvalid)?;
    let d = &mut art.derived;
    d.insert("alpha".into(), m.alpha().into());
    d.insert("beta".into(), m.beta().into());
    d.insert("leaf_contraction".into(), m.leaf_contraction().into());
    let (b0, b1) = m.branch_offsets();
    d.insert("branch_offset_minus".into(), b0.into());
    d.insert("branch_offset_plus".into(), b1.into());
    d.insert("singular_coordinate".into(), m.singular_coordinate().into());
    Ok(m)
}

/// Experiments that need the flow or the return-map partition only exist for the model.
fn require_model<'a>(
    cfg: &ExperimentConfig,
    model: Option<&'a ValidatedModel>,
) -> glorenz::Result<&'a ValidatedModel> {
    model.ok_or_else(|| {
        glorenz::Error::InvalidArgument(format!(
            "experiment {} needs system = \"model\"",
            cfg.experiment.id()
        ))
    })
}

fn dispatch<S: SkewProduct>(
    cfg: &ExperimentConfig,
    s: &S,
    model: Option<&ValidatedModel>,
    art: &mut Artifacts,
) -> glorenz::Result<()> {
    let streams = Streams::new(cfg.seed.unwrap_or(0));
    let id = cfg.experiment.id();
    match cfg.experiment {
        Experiment::Validate => {
            let m = require_model(cfg, model)?;
            let g = |x: f64, y: f64| {
                let (a, b) = m.fiber_coefficients(x);
                a * y + b
            };
            let r = axiom_check(m, &g, 4096);
            art.metric(id, "lipschitz_k", r.lipschitz_k);
            art.metric(id, "leaf_lambda", r.leaf_lambda);
            art.metric(id, "min_t_prime", r.min_t_prime);
            art.metric(id, "var_inv_t_prime", r.var_inv_t_prime);
            art.flag(id, "axioms_hold", r.all_pass());
            if !r.all_pass() {
                return Err(glorenz::Error::InvalidArgument(format!(
                    "axiom check failed: {:?}",
                    r.pass
                )));
            }
        }
        Experiment::Density => {
            let r = ex::density_experiment(s, cfg.n)?;
            art.metric(id, "residual", r.residual);
            art.metric(id, "iterations", r.iterations as f64);
            art.metric(id, "contraction", r.contraction);
            art.metric(id, "variation", r.variation);
            art.metric(id, "variation_half_grid", r.variation_coarse);
            art.metric(id, "variation_ratio", r.variation_ratio());
            art.tables.push(density_table(&r.density));
        }
        Experiment::Srb => {
            let srb = ex::srb(s, cfg.n, cfg.m)?;
            art.tables.push(Table {
                name: "cells",
                header: vec!["x", "y", "mass"],
                rows: (0..srb.family.columns())
                    .flat_map(|i| {
                        let fam = &srb.family;
                        (0..fam.rows()).filter_map(move |k| {
                            let v = fam.column(i)[k];
                            (v != 0.0).then(|| {
                                vec![
                                    fam.x_center(i).to_string(),
                                    fam.y_center(k).to_string(),
                                    v.to_string(),
                                ]
                            })
                        })
                    })
                    .collect(),
            });
            art.tables.push(density_table(&srb.family.marginal()));
            let ly = ex::lasota_yorke_sweep(s, cfg.n, cfg.m, cfg.steps)?;
            art.metric(id, "k_prime", ly.k_prime);
            art.metric(
                id,
                "max_var_g",
                ly.var_g.iter().cloned().fold(0.0, f64::max),
            );
            art.metric(id, "lipschitz_k", ly.constants.k);
            art.metric(id, "leaf_lambda", ly.constants.lambda);
            art.metric(id, "var_inv_t_prime", ly.constants.var_inv_t_prime);
            art.metric(id, "marginal_variation", ly.constants.marginal_variation);
            art.flag(id, "bound_holds", ly.holds());
            art.tables.push(Table {
                name: "variation",
                header: vec!["n", "var_g", "k_prime"],
                rows: ly
                    .var_g
                    .iter()
                    .enumerate()
                    .map(|(n, v)| vec![n.to_string(), v.to_string(), ly.k_prime.to_string()])
                    .collect(),
            });
        }
        Experiment::Correlations => {
            let srb = ex::srb(s, cfg.n, cfg.m)?;
            let pairs: Vec<_> = cfg
                .pairs
                .iter()
                .map(|p| parse_pair(p).expect("validated"))
                .collect();
            let results = ex::correlation_experiment(s, &srb, &pairs, cfg.mc(), &streams)?;
            let mut rows = Vec::new();
            let mut first_err = None;
            for (label, p) in cfg.pairs.iter().zip(&results) {
                let pid = format!("{id}/{label}");
                for (k, &n) in p.mc.series.n.iter().enumerate() {
                    let bound = p.bound.mass * p.bound.series.value[k];
                    rows.push(vec![
                        pid.clone(),
                        n.to_string(),
                        p.mc.estimate[k].to_string(),
                        p.mc.series.se[k].to_string(),
                        bound.to_string(),
                        p.dominated[k].to_string(),
                    ]);
                }
                art.flag(&pid, "dominated", p.dominated.iter().all(|d| *d));
                match &p.fit {
                    Ok(f) => {
                        art.fits.push(FitRow {
                            experiment_id: pid.clone(),
                            slope: f.rate,
                            ci: f.ci_halfwidth,
                            n_samples: f.lags.len(),
                            quality: f.quality,
                        });
                        art.metric(&pid, "raw_quality", f.raw_quality);
                        art.metric(&pid, "prefactor", f.prefactor);
                    }
                    Err(e) => {
                        first_err.get_or_insert(e.clone());
                    }
                }
            }
            art.tables.push(Table {
                name: "series",
                header: vec![
                    "experiment_id",
                    "n",
                    "correlation",
                    "se",
                    "bound",
                    "dominated",
                ],
                rows,
            });
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Experiment::HittingMap => {
            let srb = ex::srb(s, cfg.n, cfg.m)?;
            let results = ex::map_loglaw(s, &srb.sampler, &cfg.loglaw(), &streams)?;
            let mut first_err = None;
            for (t, r) in results.iter().enumerate() {
                let tid = format!("{id}/target-{t:02}");
                art.samples(id, r.target, &r.samples);
                match (&r.loglaw, &r.local) {
                    (Ok(l), Ok(d)) => {
                        loglaw_fit(art, format!("{tid}/loglaw"), l, &r.samples);
                        art.dimension_fit(format!("{tid}/local"), d);
                        art.metric(
                            &tid,
                            "relative_error",
                            r.relative_error().unwrap_or(f64::NAN),
                        );
                        art.metric(
                            &tid,
                            "exceptional_fraction",
                            r.exceptional_fraction().unwrap_or(f64::NAN),
                        );
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        first_err.get_or_insert(e.clone());
                    }
                }
            }
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Experiment::HittingFlow => {
            let m = require_model(cfg, model)?;
            let srb = ex::srb(m, cfg.n, cfg.m)?;
            let results = ex::flow_loglaw(m, &srb.sampler, &cfg.loglaw(), &streams)?;
            let mut first_err = None;
            for (t, r) in results.iter().enumerate() {
                let tid = format!("{id}/target-{t:02}");
                art.samples(id, r.target.base, &r.samples);
                art.metric(&tid, "phase", r.target.phase);
                match (&r.loglaw, &r.flow_local, &r.section_local) {
                    (Ok(l), Ok(dx), Ok(df)) => {
                        loglaw_fit(art, format!("{tid}/loglaw"), l, &r.samples);
                        art.dimension_fit(format!("{tid}/flow-local"), dx);
                        art.dimension_fit(format!("{tid}/section-local"), df);
                        art.metric(
                            &tid,
                            "relative_error",
                            r.relative_error().unwrap_or(f64::NAN),
                        );
                        art.metric(&tid, "dimension_gap", r.dimension_gap().unwrap_or(f64::NAN));
                        art.metric(
                            &tid,
                            "exceptional_fraction",
                            r.exceptional_fraction().unwrap_or(f64::NAN),
                        );
                    }
                    (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
                        first_err.get_or_insert(e.clone());
                    }
                }
            }
            sandwich(cfg, m, &srb, &streams, art)?;
            if let Some(e) = first_err {
                return Err(e);
            }
        }
        Experiment::Recurrence => {
            let srb = ex::srb(s, cfg.n, cfg.m)?;
            let rc = cfg.recurrence();
            let r = ex::recurrence_experiment(s, &srb.sampler, &rc, &streams)?;
            for (i, p) in r.points.iter().enumerate() {
                let own: Vec<HittingSample> = r
                    .samples
                    .iter()
                    .filter(|x| x.sample_id == i as u64)
                    .cloned()
                    .collect();
                art.samples(id, *p, &own);
            }
            let reference = match model {
                Some(_) => {
                    let local = ex::local_dimensions(
                        s,
                        &srb.sampler,
                        &r.points,
                        &rc.radii,
                        cfg.occupation_iterates,
                        cfg.occupation_chunks,
                        &streams.child(8),
                    )?;
                    let mut v: Vec<f64> = local
                        .into_iter()
                        .filter_map(|d| d.ok().map(|d| d.slope))
                        .collect();
                    v.sort_by(f64::total_cmp);
                    if v.is_empty() {
                        f64::NAN
                    } else if v.len() % 2 == 1 {
                        v[v.len() / 2]
                    } else {
                        0.5 * (v[v.len() / 2 - 1] + v[v.len() / 2])
                    }
                }
                None => oracle_dimension(cfg.system),
            };
            art.metric(id, "reference_dimension", reference);
            let w = r.slopes?;
            for (k, slope) in w.slopes.iter().enumerate() {
                art.fits.push(FitRow {
                    experiment_id: format!("{id}/window-{k:02}"),
                    slope: *slope,
                    ci: f64::NAN,
                    n_samples: rc.window,
                    quality: f64::NAN,
                });
            }
            art.metric(id, "window_min", w.min());
            art.metric(id, "window_max", w.max());
        }
        Experiment::Dimension => {
            let (marginal, srb): (Density1D, Srb) = {
                let srb = ex::srb(s, cfg.n, cfg.m)?;
                (srb.family.marginal(), srb)
            };
            let e = exact_dimension(s, &marginal)?;
            art.metric(id, "exact_dimension", e.value);
            art.metric(id, "entropy", e.entropy);
            art.metric(id, "int_psi", e.int_psi);
            art.metric(id, "int_phi", e.int_phi);
            art.metric(id, "truncation_change_psi", e.truncation_delta[0]);
            art.metric(id, "truncation_change_phi", e.truncation_delta[1]);
            if let Some(m) = model {
                art.metric(
                    id,
                    "closed_form_dimension",
                    exact_dimension_closed_form(m, &marginal)?.value,
                );
            } else {
                art.metric(id, "oracle_dimension", oracle_dimension(cfg.system));
            }
            let pts = ex::srb_targets(s, &srb.sampler, cfg.points, &streams);
            let local = ex::local_dimensions(
                s,
                &srb.sampler,
                &pts,
                &cfg.radii,
                cfg.occupation_iterates,
                cfg.occupation_chunks,
                &streams,
            )?;
            for (k, d) in local.into_iter().enumerate() {
                art.dimension_fit(format!("{id}/point-{k:02}/local"), &d?);
            }
        }
        Experiment::Saussol => {
            let m = require_model(cfg, model)?;
            let srb = ex::srb(m, cfg.n, cfg.m)?;
            let r = saussol_check(m, &srb.family)?;
            art.metric(id, "mass_decay_exponent", r.mass_fit.slope);
            art.metric(id, "boundary_exponent", r.boundary_fit.slope);
            art.metric(id, "boundary_fit_quality", r.boundary_fit.r2);
            art.metric(id, "tail_bound", r.tail_bound);
            art.flag(id, "masses_within_bound", r.masses_within_bound);
            art.flag(id, "pass_boundary", r.pass_boundary);
            art.flag(id, "pass_lipschitz", r.pass_lipschitz);
            for (k, v) in &r.partial_sums {
                art.metric(id, &format!("partial_sum_{k}"), *v);
            }
            art.tables.push(Table {
                name: "partition",
                header: vec!["i", "mass", "lipschitz"],
                rows: (0..r.masses.len().min(1000))
                    .map(|i| {
                        vec![
                            (i + 1).to_string(),
                            r.masses[i].to_string(),
                            r.lipschitz[i].to_string(),
                        ]
                    })
                    .collect(),
            });
        }
        Experiment::Report => unreachable!("handled before dispatch"),
    }
    Ok(())
}

fn oracle_dimension(system: System) -> f64 {
    match system {
        System::Baker => DoublingSkew::baker().dimension(),
        System::Cantor => DoublingSkew::cantor().dimension(),
        System::Model => f64::NAN,
    }
}

fn sandwich(
    cfg: &ExperimentConfig,
    m: &ValidatedModel,
    srb: &Srb,
    streams: &Streams,
    art: &mut Artifacts,
) -> glorenz::Result<()> {
    let id = "hitting-flow/sandwich";
    let r = ex::sandwich_experiment(m, srb, &cfg.sandwich(), &streams.child(3))?;
    art.metric(id, "radius", cfg.sandwich_radius);
    art.metric(id, "c_fraction_within_5pct", r.c_fraction_within(0.05));
    art.flag(id, "sandwich_holds", r.all_hold());
    art.metric(id, "mean_return_time", r.mean_return_time);
    art.metric(id, "birkhoff_mean", r.birkhoff_mean);
    art.metric(id, "birkhoff_relative_error", r.birkhoff_relative_error());
    art.tables.push(Table {
        name: "sandwich",
        header: vec![
            "target",
            "sample_id",
            "n_inner",
            "n_outer",
            "n_flow",
            "flow_time",
            "c",
            "censored",
        ],
        rows: r
            .samples
            .iter()
            .map(|(t, i, s)| match s {
                Some(s) => vec![
                    t.to_string(),
                    i.to_string(),
                    s.n_inner.to_string(),
                    s.n_outer.to_string(),
                    s.n_flow.to_string(),
                    s.flow_time.to_string(),
                    s.c.to_string(),
                    "false".into(),
                ],
                None => vec![
                    t.to_string(),
                    i.to_string(),
                    "".into(),
                    "".into(),
                    "".into(),
                    "".into(),
                    "".into(),
                    "true".into(),
                ],
            })
            .collect(),
    });
    Ok(())
}

fn density_table(d: &Density1D) -> Table {
    Table {
        name: "density",
        header: vec!["x", "density"],
        rows: (0..d.len())
            .map(|i| vec![d.center(i).to_string(), d.values()[i].to_string()])
            .collect(),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
        .map_err(CliError::io(format!("writing {}", path.display())))
}

fn write_all(
    cfg: &ExperimentConfig,
    art: &Artifacts,
    error: Option<&CliError>,
) -> Result<(), CliError> {
    let id = cfg.experiment.id();
    let dir = &cfg.out;
    if !art.samples.is_empty() {
        write_csv(&dir.join(format!("{id}.samples.csv")), &art.samples)?;
    }
    if !art.fits.is_empty() {
        write_csv(&dir.join(format!("{id}.fits.csv")), &art.fits)?;
    }
    if !art.metrics.is_empty() {
        write_csv(&dir.join(format!("{id}.metrics.csv")), &art.metrics)?;
    }
    for t in &art.tables {
        let path = dir.join(format!("{id}.{}.csv", t.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&t.header)?;
        for r in &t.rows {
            w.write_record(r)?;
        }
        w.flush()
            .map_err(CliError::io(format!("writing {}", path.display())))?;
    }
    let mut manifest = toml::Table::new();
    manifest.insert("library_version".into(), glorenz_version().into());
    manifest.insert("cli_version".into(), env!("CARGO_PKG_VERSION").into());
    manifest.insert("experiment".into(), id.into());
    manifest.insert(
        "status".into(),
        if error.is_some() { "failed" } else { "ok" }.into(),
    );
    if let Some(e) = error {
        manifest.insert("error".into(), e.to_string().into());
    }
    let mut resolved = cfg.to_toml();
    // the thread count is a hint that cannot change results; keep it out of the record
    resolved.remove("threads");
    manifest.insert("config".into(), toml::Value::Table(resolved));
    if !art.derived.is_empty() {
        manifest.insert("derived".into(), toml::Value::Table(art.derived.clone()));
    }
    let path = dir.join(format!("{MANIFEST_PREFIX}{id}.toml"));
    fs::write(
        &path,
        toml::to_string(&manifest).expect("manifest serializes"),
    )
    .map_err(CliError::io(format!("writing {}", path.display())))
}

fn glorenz_version() -> &'static str {
    glorenz::VERSION
}
