//! Scenario execution and CSV output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::{render_manifest, AxisValue, NamedLayout, RunMode, Scenario};
use crate::alphamu::{fit_alpha_mu, outage_probability, AlphaMuParams};
use crate::channel_moments::{MomentEngine, MomentSet, PointingMethod};
use crate::error::{Error, Result};
use crate::geometry::{derive_budget, DerivedBudget, LinkGeometry};
use crate::pointing::PointingModel;
use crate::simulate::{conventional_outage, simulate, BaselinePlan, EmpiricalMoments, OutageEstimate, SimulationPlan};

pub const OUTAGE_COLUMNS: &[&str] = &[
    "layout",
    "series_value",
    "sweep_value",
    "p_gs",
    "p_th",
    "sigma_s",
    "w",
    "c",
    "threshold",
    "analytic_method",
    "alpha",
    "mu",
    "r_hat",
    "outage_analytic",
    "outage_empirical",
    "outage_empirical_se",
    "m1_analytic",
    "m2_analytic",
    "m4_analytic",
    "m1_empirical",
    "m2_empirical",
    "m4_empirical",
    "m1_empirical_se",
    "m2_empirical_se",
    "m4_empirical_se",
    "status",
];

pub const BASELINE_COLUMNS: &[&str] = &[
    "series_value",
    "sweep_value",
    "p_gs",
    "p_th",
    "sigma_s",
    "power_fraction",
    "p_t",
    "threshold",
    "outage_empirical",
    "outage_empirical_se",
    "status",
];

pub const MOMENT_COLUMNS: &[&str] = &[
    "layout",
    "sigma_ratio",
    "sigma_s",
    "order",
    "exact",
    "approx",
    "first_order",
    "rel_error_approx",
    "rel_error_first_order",
    "status",
];

/// Command-line overrides applied on top of the `[run]` section.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub mode: Option<RunMode>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) -> Result<()> {
        let run = &mut scenario.config.run;
        if let Some(v) = self.samples {
            run.samples = v;
        }
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.workers {
            run.workers = v;
        }
        if let Some(v) = self.mode {
            run.mode = v;
        }
        if run.samples == 0 && run.mode.monte_carlo() {
            return Err(Error::Config("--samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Files written by a run and the number of rows that hit a numerical
/// failure.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub failed_rows: usize,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

struct Table {
    text: String,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { text: format!("{}\n", columns.join(",")) }
    }

    fn row(&mut self, fields: &[String]) {
        let quoted: Vec<String> = fields.iter().map(|f| quote(f)).collect();
        let _ = writeln!(self.text, "{}", quoted.join(","));
    }

    fn write(&self, path: &Path, summary: &mut RunSummary) -> Result<()> {
        std::fs::write(path, &self.text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        summary.files.push(path.to_path_buf());
        Ok(())
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))
}

// Identity of the pointing statistics; sweep points that share it share
// the distribution of S.
fn pointing_key(m: &PointingModel) -> [u64; 3] {
    [m.w.to_bits(), m.sigma_s.to_bits(), m.a0.to_bits()]
}

// Groups indices by key in order of first appearance.
fn group_by<K: Eq + std::hash::Hash + Copy>(keys: &[Option<K>]) -> Vec<(K, Vec<usize>)> {
    let mut groups: Vec<(K, Vec<usize>)> = Vec::new();
    let mut slot = HashMap::new();
    for (i, key) in keys.iter().enumerate() {
        let Some(k) = *key else { continue };
        let g = *slot.entry(k).or_insert_with(|| {
            groups.push((k, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }
    groups
}

struct Point {
    sweep: AxisValue,
    geometry: LinkGeometry,
    budget: Result<DerivedBudget>,
}

impl Point {
    fn model(&self) -> Option<PointingModel> {
        let b = self.budget.as_ref().ok()?;
        PointingModel::new(b.w, self.geometry.sigma_s, b.a0).ok()
    }
}

#[derive(Default)]
struct RowResult {
    method: Option<&'static str>,
    analytic: Option<(MomentSet, AlphaMuParams, f64)>,
    empirical: Option<(EmpiricalMoments, OutageEstimate)>,
    errors: Vec<String>,
}

struct Timer<'a> {
    table: &'a mut Table,
}

impl Timer<'_> {
    fn time<T>(&mut self, stage: &str, layout: &str, series: Option<AxisValue>, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let value = f();
        self.table.row(&[
            stage.to_string(),
            layout.to_string(),
            opt(series.map(|s| s.raw)),
            num(start.elapsed().as_secs_f64()),
        ]);
        value
    }
}

fn analytic_fit(
    scenario: &Scenario,
    layout: &NamedLayout,
    model: PointingModel,
    method: PointingMethod,
) -> Result<(MomentSet, AlphaMuParams)> {
    let mut engine = MomentEngine::new(scenario.turbulence, layout.layout.clone(), model)?;
    let moments = engine.moment_set(method)?;
    let params = fit_alpha_mu(&moments)?;
    Ok((moments, params))
}

/// Runs every layout over the series and sweep and writes
/// `outage_<layout>.csv`, `baseline.csv` (when configured), `timings.csv`
/// and `manifest.toml` into `out`.
pub fn run_scenario(scenario: &Scenario, out: &Path) -> Result<RunSummary> {
    let run = &scenario.config.run;
    create_dir(out)?;
    let mut summary = RunSummary::default();
    let mut timings = Table::new(&["stage", "layout", "series_value", "seconds"]);
    let method = match run.mode {
        RunMode::AnalyticApprox => PointingMethod::Approx,
        _ => PointingMethod::Exact,
    };
    let method_name = match method {
        PointingMethod::Approx => "approx",
        _ => "exact",
    };

    for layout in &scenario.layouts {
        let mut table = Table::new(OUTAGE_COLUMNS);
        for series in scenario.series_points() {
            let points: Vec<Point> = scenario
                .sweep
                .values
                .iter()
                .map(|&sweep| {
                    let geometry = scenario.geometry_at(series, sweep);
                    Point { sweep, geometry, budget: derive_budget(&geometry) }
                })
                .collect();
            let mut results: Vec<RowResult> = points
                .iter()
                .map(|p| RowResult {
                    errors: p.budget.as_ref().err().map(|e| e.to_string()).into_iter().collect(),
                    ..RowResult::default()
                })
                .collect();
            let keys: Vec<Option<[u64; 3]>> = points.iter().map(|p| p.model().map(|m| pointing_key(&m))).collect();
            let groups = group_by(&keys);
            let mut timer = Timer { table: &mut timings };

            if run.mode.analytic() {
                for (_, members) in &groups {
                    let model = points[members[0]].model().expect("grouped points have a model");
                    let fit =
                        timer.time("analytic", &layout.name, series, || analytic_fit(scenario, layout, model, method));
                    for &i in members {
                        let result = &mut results[i];
                        result.method = Some(method_name);
                        match &fit {
                            Ok((moments, params)) => {
                                let p = &points[i];
                                let c = p.budget.as_ref().expect("grouped points have a budget").c;
                                match outage_probability(p.geometry.p_th, c, params) {
                                    Ok(o) => result.analytic = Some((*moments, *params, o)),
                                    Err(e) => result.errors.push(format!("analytic: {e}")),
                                }
                            }
                            Err(e) => result.errors.push(format!("analytic: {e}")),
                        }
                    }
                }
            }

            if run.mode.monte_carlo() {
                for (_, members) in &groups {
                    let model = points[members[0]].model().expect("grouped points have a model");
                    let thresholds: Vec<f64> = members
                        .iter()
                        .map(|&i| {
                            let p = &points[i];
                            p.budget
                                .as_ref()
                                .expect("grouped points have a budget")
                                .normalized_threshold(p.geometry.p_th)
                        })
                        .collect();
                    let plan = SimulationPlan {
                        samples: run.samples,
                        seed: run.seed,
                        workers: run.workers,
                        layout: layout.layout.clone(),
                        turbulence: scenario.turbulence,
                        pointing: model,
                    };
                    let report = timer.time("montecarlo", &layout.name, series, || simulate(&plan, &thresholds));
                    for (k, &i) in members.iter().enumerate() {
                        match &report {
                            Ok(r) => results[i].empirical = Some((r.moments, r.outage[k])),
                            Err(e) => results[i].errors.push(format!("montecarlo: {e}")),
                        }
                    }
                }
            }

            for (p, r) in points.iter().zip(&results) {
                let budget = p.budget.as_ref().ok();
                let threshold = budget.map(|b| b.normalized_threshold(p.geometry.p_th));
                let status = if r.errors.is_empty() { "ok".to_string() } else { r.errors.join("; ") };
                if !r.errors.is_empty() {
                    summary.failed_rows += 1;
                    log::warn!("layout {} sweep {}: {status}", layout.name, p.sweep.raw);
                }
                let a = r.analytic.as_ref();
                let e = r.empirical.as_ref();
                log::info!(
                    "layout {} series {} sweep {}: analytic {} empirical {}",
                    layout.name,
                    series.map(|s| s.raw.to_string()).unwrap_or_else(|| "-".into()),
                    p.sweep.raw,
                    a.map(|a| format!("{:.4e}", a.2)).unwrap_or_else(|| "-".into()),
                    e.map(|e| format!("{:.4e}", e.1.probability)).unwrap_or_else(|| "-".into()),
                );
                table.row(&[
                    layout.name.clone(),
                    opt(series.map(|s| s.raw)),
                    num(p.sweep.raw),
                    num(p.geometry.p_gs),
                    num(p.geometry.p_th),
                    num(p.geometry.sigma_s),
                    num(p.geometry.beamwidth()),
                    opt(budget.map(|b| b.c)),
                    opt(threshold),
                    r.method.unwrap_or_default().to_string(),
                    opt(a.map(|a| a.1.alpha)),
                    opt(a.map(|a| a.1.mu)),
                    opt(a.map(|a| a.1.r_hat)),
                    opt(a.map(|a| a.2)),
                    opt(e.map(|e| e.1.probability)),
                    opt(e.map(|e| e.1.standard_error)),
                    opt(a.map(|a| a.0.m1)),
                    opt(a.map(|a| a.0.m2)),
                    opt(a.map(|a| a.0.m4)),
                    opt(e.map(|e| e.0.m1)),
                    opt(e.map(|e| e.0.m2)),
                    opt(e.map(|e| e.0.m4)),
                    opt(e.map(|e| e.0.se1)),
                    opt(e.map(|e| e.0.se2)),
                    opt(e.map(|e| e.0.se4)),
                    status,
                ]);
            }
        }
        table.write(&out.join(format!("outage_{}.csv", layout.name)), &mut summary)?;
    }

    if let (Some(baseline), true) = (&scenario.config.baseline, run.mode.monte_carlo()) {
        let mut table = Table::new(BASELINE_COLUMNS);
        for series in scenario.series_points() {
            struct Entry {
                sweep: AxisValue,
                geometry: LinkGeometry,
                fraction: f64,
                threshold: Result<f64>,
                model: Option<PointingModel>,
            }
            let mut entries = Vec::new();
            for &sweep in &scenario.sweep.values {
                let geometry = scenario.geometry_at(series, sweep);
                for &fraction in &baseline.power_fractions {
                    let w = baseline.beamwidth.unwrap_or(geometry.beamwidth());
                    let a_rx = baseline.rx_radius.unwrap_or(geometry.a_gs);
                    let model = PointingModel::new(w, geometry.sigma_s, 2.0 * a_rx * a_rx / (w * w));
                    let threshold = geometry.transmittance().and_then(|h_l| {
                        let t = geometry.p_th / (baseline.rx_gain * h_l * fraction * geometry.p_gs);
                        if t.is_finite() {
                            Ok(t)
                        } else {
                            Err(Error::Domain(format!("baseline threshold {t} is not finite")))
                        }
                    });
                    let model = match (&threshold, model) {
                        (Ok(_), Ok(m)) => Some(m),
                        _ => None,
                    };
                    entries.push(Entry { sweep, geometry, fraction, threshold, model });
                }
            }
            let keys: Vec<Option<[u64; 3]>> = entries.iter().map(|e| e.model.map(|m| pointing_key(&m))).collect();
            let mut outcomes: Vec<Option<Result<OutageEstimate>>> = entries.iter().map(|_| None).collect();
            for (_, members) in group_by(&keys) {
                let model = entries[members[0]].model.expect("grouped entries have a model");
                let plan = BaselinePlan {
                    samples: run.samples,
                    seed: run.seed,
                    workers: run.workers,
                    turbulence: scenario.turbulence,
                    sigma_s: model.sigma_s,
                    beamwidth: model.w,
                    a0: model.a0,
                };
                let thresholds: Vec<f64> =
                    members.iter().map(|&i| *entries[i].threshold.as_ref().expect("grouped")).collect();
                let result = Timer { table: &mut timings }
                    .time("baseline", "", series, || conventional_outage(&plan, &thresholds));
                for (k, &i) in members.iter().enumerate() {
                    outcomes[i] = Some(match &result {
                        Ok(v) => Ok(v[k]),
                        Err(e) => Err(Error::Domain(e.to_string())),
                    });
                }
            }
            for (e, outcome) in entries.iter().zip(outcomes) {
                let outcome = match (&e.threshold, outcome) {
                    (Err(err), _) => Err(err.to_string()),
                    (_, Some(Ok(o))) => Ok(o),
                    (_, Some(Err(err))) => Err(err.to_string()),
                    (_, None) => Err("invalid baseline pointing parameters".to_string()),
                };
                if outcome.is_err() {
                    summary.failed_rows += 1;
                }
                let o = outcome.as_ref().ok();
                table.row(&[
                    opt(series.map(|s| s.raw)),
                    num(e.sweep.raw),
                    num(e.geometry.p_gs),
                    num(e.geometry.p_th),
                    num(e.geometry.sigma_s),
                    num(e.fraction),
                    num(e.fraction * e.geometry.p_gs),
                    opt(e.threshold.as_ref().ok().copied()),
                    opt(o.map(|o| o.probability)),
                    opt(o.map(|o| o.standard_error)),
                    outcome.err().unwrap_or_else(|| "ok".into()),
                ]);
            }
        }
        table.write(&out.join("baseline.csv"), &mut summary)?;
    }

    timings.write(&out.join("timings.csv"), &mut summary)?;
    write_manifest(scenario, out, &mut summary)?;
    Ok(summary)
}

fn write_manifest(scenario: &Scenario, out: &Path, summary: &mut RunSummary) -> Result<()> {
    let path = out.join("manifest.toml");
    std::fs::write(&path, render_manifest(scenario))
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    summary.files.push(path);
    Ok(())
}

/// Exact, second-order and first-order moments of S for orders 1, 2 and 4
/// over the configured `σ_s / w` ratios, one `moments_<layout>.csv` per
/// layout.
pub fn run_moment_report(scenario: &Scenario, out: &Path) -> Result<RunSummary> {
    let budget = derive_budget(&scenario.base)?;
    create_dir(out)?;
    let mut summary = RunSummary::default();
    for layout in &scenario.layouts {
        let mut table = Table::new(MOMENT_COLUMNS);
        for &ratio in &scenario.config.moments.ratios {
            let sigma_s = ratio * budget.w;
            let mut engine = PointingModel::new(budget.w, sigma_s, budget.a0)
                .and_then(|m| MomentEngine::new(scenario.turbulence, layout.layout.clone(), m));
            let mut row = |order: usize| -> Result<[f64; 3]> {
                let engine = engine.as_mut().map_err(|e| Error::Domain(e.to_string()))?;
                Ok([
                    engine.s_moment(order, PointingMethod::Exact)?,
                    engine.s_moment(order, PointingMethod::Approx)?,
                    engine.s_moment(order, PointingMethod::FirstOrder)?,
                ])
            };
            for order in [1usize, 2, 4] {
                let mut fields = vec![layout.name.clone(), num(ratio), num(sigma_s), order.to_string()];
                match row(order) {
                    Ok([exact, approx, first]) => {
                        fields.extend([exact, approx, first].map(num));
                        fields.push(num((approx - exact).abs() / exact));
                        fields.push(num((first - exact).abs() / exact));
                        fields.push("ok".into());
                    }
                    Err(e) => {
                        summary.failed_rows += 1;
                        fields.extend(std::iter::repeat_n(String::new(), 5));
                        fields.push(e.to_string());
                    }
                }
                table.row(&fields);
            }
        }
        table.write(&out.join(format!("moments_{}.csv", layout.name)), &mut summary)?;
    }
    write_manifest(scenario, out, &mut summary)?;
    Ok(summary)
}
