//! One-page text summary of a run directory: a section per experiment manifest, with the
//! fitted quantities set against their targets and the acceptance thresholds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::CliError;
use crate::run::{FitRow, MetricRow, MANIFEST_PREFIX};

/// Fraction of targets whose log-law slope must match its dimension target.
const TARGET_FRACTION: f64 = 0.8;
const LOGLAW_TOL: f64 = 0.15;
const GAP_TOL: f64 = 0.15;
const RECURRENCE_TOL: f64 = 0.2;
const DIMENSION_TOL: f64 = 0.15;

struct Section<'a> {
    id: &'a str,
    fits: Vec<FitRow>,
    metrics: Vec<MetricRow>,
}

impl Section<'_> {
    fn metric(&self, id: &str, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|m| m.experiment_id == id && m.metric == name)
            .map(|m| m.value)
    }

    fn top(&self, name: &str) -> Option<f64> {
        self.metric(self.id, name)
    }

    fn fit(&self, id: &str) -> Option<&FitRow> {
        self.fits.iter().find(|f| f.experiment_id == id)
    }

    /// Distinct `<experiment>/<child>` prefixes, in file order.
    fn children(&self, prefix: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let ids = self
            .fits
            .iter()
            .map(|f| &f.experiment_id)
            .chain(self.metrics.iter().map(|m| &m.experiment_id));
        for id in ids {
            if let Some(rest) = id.strip_prefix(&format!("{}/", self.id)) {
                let child = rest.split('/').next().unwrap_or(rest);
                if child.starts_with(prefix) && !out.iter().any(|c| c == child) {
                    out.push(child.to_string());
                }
            }
        }
        out
    }
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(CliError::from)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn fmt(v: Option<f64>) -> String {
    match v {
        None => "n/a".into(),
        Some(v) if v.is_nan() => "n/a".into(),
        Some(v) if v != 0.0 && v.abs() < 1e-3 => format!("{v:.2e}"),
        Some(v) => format!("{v:.4}"),
    }
}

pub fn report(dir: &Path) -> Result<String, CliError> {
    let entries = fs::read_dir(dir).map_err(|_| CliError::MissingArtifacts(dir.to_path_buf()))?;
    let mut manifests: Vec<_> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(MANIFEST_PREFIX) && n.ends_with(".toml"))
        })
        .collect();
    manifests.sort();
    if manifests.is_empty() {
        return Err(CliError::MissingArtifacts(dir.to_path_buf()));
    }
    let mut out = format!("run directory {}\n", dir.display());
    for path in &manifests {
        let text = fs::read_to_string(path)
            .map_err(CliError::io(format!("reading {}", path.display())))?;
        let manifest: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            CliError::config(path.display().to_string(), e.message().to_string())
        })?;
        let id = manifest
            .get("experiment")
            .and_then(|v| v.as_str())
            .unwrap_or("?")
            .to_string();
        let status = manifest
            .get("status")
            .and_then(|v| v.as_str())
            .unwrap_or("?");
        let cfg = manifest.get("config").and_then(|v| v.as_table());
        let get = |k: &str| match cfg.and_then(|c| c.get(k)) {
            Some(toml::Value::String(s)) => s.clone(),
            Some(v) => v.to_string(),
            None => "-".into(),
        };
        let _ = writeln!(
            out,
            "\n== {id} ==\nstatus {status}; system {}; seed {}; library {}",
            get("system"),
            get("seed"),
            manifest
                .get("library_version")
                .and_then(|v| v.as_str())
                .unwrap_or("?")
        );
        if let Some(e) = manifest.get("error").and_then(|v| v.as_str()) {
            let _ = writeln!(out, "error: {e}");
        }
        let section = Section {
            id: &id,
            fits: read_csv(&dir.join(format!("{id}.fits.csv")))?,
            metrics: read_csv(&dir.join(format!("{id}.metrics.csv")))?,
        };
        let body = match id.as_str() {
            "validate" => validate(&section, &manifest),
            "density" => density(&section),
            "srb" => srb(&section),
            "correlations" => correlations(&section),
            "hitting-map" => hitting_map(&section),
            "hitting-flow" => hitting_flow(&section),
            "recurrence" => recurrence(&section),
            "dimension" => dimension(&section),
            "saussol" => saussol(&section),
            _ => String::new(),
        };
        out += &body;
        if status != "ok" {
            out += "overall: FAIL (experiment did not complete)\n";
        }
    }
    let summary = dir.join("report.txt");
    fs::write(&summary, &out).map_err(CliError::io(format!("writing {}", summary.display())))?;
    Ok(out)
}

fn validate(s: &Section, manifest: &toml::Table) -> String {
    let mut out = String::new();
    if let Some(d) = manifest.get("derived").and_then(|v| v.as_table()) {
        for (k, v) in d {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    if let Some(v) = s.top("axioms_hold") {
        let _ = writeln!(out, "axioms: {}", verdict(v == 1.0));
    }
    out
}

fn density(s: &Section) -> String {
    let residual = s.top("residual");
    let ratio = s.top("variation_ratio");
    let ok = residual.is_some_and(|r| r < 1e-10) && ratio.is_some_and(|r| r.max(1.0 / r) < 2.0);
    format!(
        "residual {}; variation N vs N/2 ratio {}; contraction {}\ncriterion residual < 1e-10 and variation change < 2x: {}\n",
        fmt(residual),
        fmt(ratio),
        fmt(s.top("contraction")),
        verdict(ok)
    )
}

fn srb(s: &Section) -> String {
    format!(
        "max Var(G) {} vs K' {}\ncriterion leaf variation within K': {}\n",
        fmt(s.top("max_var_g")),
        fmt(s.top("k_prime")),
        verdict(s.top("bound_holds") == Some(1.0))
    )
}

fn correlations(s: &Section) -> String {
    let mut out = format!(
        "{:<16} {:>9} {:>8} {:>8} {:>8} {:>10} {:>6}\n",
        "pair", "rate", "ci", "R2", "raw R2", "dominated", ""
    );
    let mut all = true;
    let mut pairs: Vec<String> = s
        .metrics
        .iter()
        .filter(|m| m.metric == "dominated")
        .map(|m| m.experiment_id.clone())
        .collect();
    pairs.dedup();
    for pid in &pairs {
        let f = s.fit(pid);
        let dom = s.metric(pid, "dominated") == Some(1.0);
        let ok = f.is_some_and(|f| f.slope < 0.0 && f.quality >= 0.95) && dom;
        all &= ok;
        let _ = writeln!(
            out,
            "{:<16} {:>9} {:>8} {:>8} {:>8} {:>10} {:>6}",
            pid.split_once('/').map_or(pid.as_str(), |p| p.1),
            fmt(f.map(|f| f.slope)),
            fmt(f.map(|f| f.ci)),
            fmt(f.map(|f| f.quality)),
            fmt(s.metric(pid, "raw_quality")),
            dom,
            verdict(ok)
        );
    }
    let _ = writeln!(
        out,
        "criterion rate < 0, R2 >= 0.95 and bound dominates within 3 SE for every pair: {}",
        verdict(all && !pairs.is_empty())
    );
    out
}

fn loglaw_table(s: &Section, local: &str, offset: f64) -> (String, usize, usize) {
    let mut out = format!(
        "{:<10} {:>8} {:>8} {:>7} {:>8} {:>11}\n",
        "target", "slope", "d_hat", "ratio", "rel.err", "exceptional"
    );
    let (mut good, mut total) = (0, 0);
    for t in s.children("target-") {
        let slope = s.fit(&format!("{}/{t}/loglaw", s.id)).map(|f| f.slope);
        let d = s
            .fit(&format!("{}/{t}/{local}", s.id))
            .map(|f| f.slope - offset);
        let err = match (slope, d) {
            (Some(a), Some(b)) => Some((a - b).abs() / b),
            _ => None,
        };
        total += 1;
        good += usize::from(err.is_some_and(|e| e <= LOGLAW_TOL));
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>7} {:>8} {:>11}",
            t,
            fmt(slope),
            fmt(d),
            fmt(slope.zip(d).map(|(a, b)| a / b)),
            fmt(err),
            fmt(s.metric(&format!("{}/{t}", s.id), "exceptional_fraction"))
        );
    }
    (out, good, total)
}

fn hitting_map(s: &Section) -> String {
    let (mut out, good, total) = loglaw_table(s, "local", 0.0);
    let ok = total > 0 && good as f64 >= TARGET_FRACTION * total as f64;
    let _ = writeln!(
        out,
        "criterion slope within 15% of d_hat for >= 80% of targets: {} ({good}/{total})",
        verdict(ok)
    );
    out
}

fn hitting_flow(s: &Section) -> String {
    let (mut out, good, total) = loglaw_table(s, "flow-local", 1.0);
    let gaps: Vec<Option<f64>> = s
        .children("target-")
        .iter()
        .map(|t| s.metric(&format!("{}/{t}", s.id), "dimension_gap"))
        .collect();
    let gaps_ok = !gaps.is_empty()
        && gaps
            .iter()
            .all(|g| g.is_some_and(|g| (g - 1.0).abs() <= GAP_TOL));
    let ok = total > 0 && good as f64 >= TARGET_FRACTION * total as f64;
    let _ = writeln!(out, "(d_hat is the flow local dimension minus one)");
    let _ = writeln!(
        out,
        "dimension gaps d_X - d_F: {}",
        gaps.iter().map(|g| fmt(*g)).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(
        out,
        "criterion slope within 15% of d_X - 1 for >= 80% of targets: {} ({good}/{total})",
        verdict(ok)
    );
    let _ = writeln!(
        out,
        "criterion d_X - d_F = 1 +- 0.15 at every target: {}",
        verdict(gaps_ok)
    );
    let sw = "hitting-flow/sandwich";
    if let Some(frac) = s.metric(sw, "c_fraction_within_5pct") {
        let birk = s.metric(sw, "birkhoff_relative_error");
        let _ = writeln!(
            out,
            "sandwich: c in [0.95, 1.05] for {:.1}% of samples; inequalities hold {}; Birkhoff roof {} vs mean return {} (rel. {})",
            100.0 * frac,
            s.metric(sw, "sandwich_holds") == Some(1.0),
            fmt(s.metric(sw, "birkhoff_mean")),
            fmt(s.metric(sw, "mean_return_time")),
            birk.map_or("n/a".into(), |b| format!("{b:.2e}"))
        );
        let ok = frac >= 0.9
            && birk.is_some_and(|b| b <= 0.02)
            && s.metric(sw, "sandwich_holds") == Some(1.0);
        let _ = writeln!(
            out,
            "criterion c within 5% for >= 90% and Birkhoff mean within 2%: {}",
            verdict(ok)
        );
    }
    out
}

fn recurrence(s: &Section) -> String {
    let (lo, hi, d) = (
        s.top("window_min"),
        s.top("window_max"),
        s.top("reference_dimension"),
    );
    let ok = match (lo, hi, d) {
        (Some(lo), Some(hi), Some(d)) => {
            d >= lo * (1.0 - RECURRENCE_TOL) && d <= hi * (1.0 + RECURRENCE_TOL)
        }
        _ => false,
    };
    let slopes: Vec<String> = s
        .children("window-")
        .iter()
        .map(|w| fmt(s.fit(&format!("{}/{w}", s.id)).map(|f| f.slope)))
        .collect();
    format!(
        "window slopes {}\nslope window [{}, {}] vs dimension {}\ncriterion window contains the dimension within 20%: {}\n",
        slopes.join(" "),
        fmt(lo),
        fmt(hi),
        fmt(d),
        verdict(ok)
    )
}

fn dimension(s: &Section) -> String {
    let exact = s.top("exact_dimension");
    let mut out = format!(
        "exact dimension {} (entropy {}, int psi {}, int phi {}); truncation changes {} / {}\n",
        fmt(exact),
        fmt(s.top("entropy")),
        fmt(s.top("int_psi")),
        fmt(s.top("int_phi")),
        fmt(s.top("truncation_change_psi")),
        fmt(s.top("truncation_change_phi"))
    );
    let stable = s.top("truncation_change_psi").is_some_and(|d| d < 1e-4)
        && s.top("truncation_change_phi").is_some_and(|d| d < 1e-4);
    let mut ok = stable;
    if let Some(o) = s.top("oracle_dimension") {
        let good = exact.is_some_and(|e| (e - o).abs() <= 1e-3);
        ok &= good;
        let _ = writeln!(out, "oracle value {}: {}", fmt(Some(o)), verdict(good));
    }
    if let Some(c) = s.top("closed_form_dimension") {
        let _ = writeln!(out, "closed-form logarithmic moment gives {}", fmt(Some(c)));
    }
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>7}",
        "point", "local", "ci", "ratio"
    );
    for p in s.children("point-") {
        let f = s.fit(&format!("{}/{p}/local", s.id));
        let ratio = f.zip(exact).map(|(f, e)| f.slope / e);
        ok &= ratio.is_some_and(|r| (r - 1.0).abs() <= DIMENSION_TOL);
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>7}",
            p,
            fmt(f.map(|f| f.slope)),
            fmt(f.map(|f| f.ci)),
            fmt(ratio)
        );
    }
    let _ = writeln!(
        out,
        "criterion local dimensions within 15% of the exact value, quadrature stable at 1e-4: {}",
        verdict(ok)
    );
    out
}

fn saussol(s: &Section) -> String {
    format!(
        "boundary exponent a = {} (R2 {}); strip mass decay exponent {}; tail bound {}\ncriterion boundary scaling a > 0: {}\ncriterion sum of mass x log+ Lipschitz converges: {}\n",
        fmt(s.top("boundary_exponent")),
        fmt(s.top("boundary_fit_quality")),
        fmt(s.top("mass_decay_exponent")),
        s.top("tail_bound").map_or("n/a".into(), |t| format!("{t:.2e}")),
        verdict(s.top("pass_boundary") == Some(1.0)),
        verdict(s.top("pass_lipschitz") == Some(1.0))
    )
}
