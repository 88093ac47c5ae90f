//! Scenario files: TOML with named sections, validated into a [`Scenario`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::channel_moments::TurbulenceParams;
use crate::error::{Error, Result};
use crate::geometry::{
    circular_positions, linear_positions, Attenuation, BeamSpec, CcrLayout, LinkGeometry, Position, DEFAULT_WAVELENGTH,
    MIN_CCR_SPACING,
};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Free-form notes; ignored by the runner.
    #[serde(default)]
    pub meta: Option<toml::Table>,
    pub geometry: GeometryConfig,
    pub turbulence: TurbulenceConfig,
    pub layout: BTreeMap<String, LayoutConfig>,
    #[serde(default)]
    pub series: Option<SeriesConfig>,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
    #[serde(default)]
    pub moments: MomentsConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub z: f64,
    #[serde(default = "default_wavelength")]
    pub lambda: f64,
    pub a_gs: f64,
    pub a_re: f64,
    pub visibility: Option<f64>,
    pub sigma_atm: Option<f64>,
    pub theta_gs: Option<f64>,
    pub w: Option<f64>,
    pub sigma_s: Option<f64>,
    pub rho_refl: f64,
    pub p_gs: Option<f64>,
    pub p_th: Option<f64>,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbulenceConfig {
    pub preset: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub rho_alpha: Option<f64>,
    pub rho_beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayoutKind {
    Linear,
    Circular,
    Explicit,
}

impl LayoutKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayoutKind::Linear => "linear",
            LayoutKind::Circular => "circular",
            LayoutKind::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub kind: LayoutKind,
    pub count: Option<usize>,
    pub spacing: Option<f64>,
    pub radius: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    pub min_spacing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    PGs,
    PTh,
    SigmaS,
    W,
}

impl Variable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variable::PGs => "p_gs",
            Variable::PTh => "p_th",
            Variable::SigmaS => "sigma_s",
            Variable::W => "w",
        }
    }

    fn is_power(&self) -> bool {
        matches!(self, Variable::PGs | Variable::PTh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum Unit {
    #[serde(rename = "W")]
    Watt,
    #[serde(rename = "dBm")]
    DecibelMilliwatt,
    #[serde(rename = "m")]
    Metre,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Watt => "W",
            Unit::DecibelMilliwatt => "dBm",
            Unit::Metre => "m",
        }
    }

    pub fn to_si(&self, value: f64) -> f64 {
        match self {
            Unit::DecibelMilliwatt => 10f64.powf((value - 30.0) / 10.0),
            Unit::Watt | Unit::Metre => value,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    pub variable: Variable,
    pub unit: Option<Unit>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: Variable,
    pub unit: Option<Unit>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    AnalyticExact,
    AnalyticApprox,
    Montecarlo,
    All,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::AnalyticExact => "analytic-exact",
            RunMode::AnalyticApprox => "analytic-approx",
            RunMode::Montecarlo => "montecarlo",
            RunMode::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [RunMode::AnalyticExact, RunMode::AnalyticApprox, RunMode::Montecarlo, RunMode::All]
            .into_iter()
            .find(|m| m.as_str() == s)
    }

    pub fn analytic(&self) -> bool {
        !matches!(self, RunMode::Montecarlo)
    }

    pub fn monte_carlo(&self) -> bool {
        matches!(self, RunMode::Montecarlo | RunMode::All)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_mode")]
    pub mode: RunMode,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
}

fn default_mode() -> RunMode {
    RunMode::All
}
fn default_samples() -> u64 {
    1_000_000
}
fn default_seed() -> u64 {
    1
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { mode: default_mode(), samples: default_samples(), seed: default_seed(), workers: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Beacon power as fractions of P_GS.
    pub power_fractions: Vec<f64>,
    /// Beacon footprint beamwidth; defaults to the scenario w.
    pub beamwidth: Option<f64>,
    /// Receive aperture radius; defaults to a_GS.
    pub rx_radius: Option<f64>,
    #[serde(default = "default_gain")]
    pub rx_gain: f64,
}

fn default_gain() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
}

fn default_ratios() -> Vec<f64> {
    vec![0.0, 0.01, 0.02, 0.05, 0.1]
}

impl Default for MomentsConfig {
    fn default() -> Self {
        Self { ratios: default_ratios() }
    }
}

/// A config value and the SI value it resolves to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisValue {
    pub raw: f64,
    pub si: f64,
}

#[derive(Debug, Clone)]
pub struct Axis {
    pub variable: Variable,
    pub unit: Unit,
    pub values: Vec<AxisValue>,
}

#[derive(Debug, Clone)]
pub struct NamedLayout {
    pub name: String,
    pub layout: CcrLayout,
}

/// A validated scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base: LinkGeometry,
    pub turbulence: TurbulenceParams,
    pub layouts: Vec<NamedLayout>,
    pub series: Option<Axis>,
    pub sweep: Axis,
}

impl Scenario {
    /// Link geometry at one (series, sweep) point.
    pub fn geometry_at(&self, series: Option<AxisValue>, sweep: AxisValue) -> LinkGeometry {
        let mut g = self.base;
        if let (Some(axis), Some(v)) = (&self.series, series) {
            apply(&mut g, axis.variable, v.si);
        }
        apply(&mut g, self.sweep.variable, sweep.si);
        g
    }

    /// Series values, or a single `None` when there is no series.
    pub fn series_points(&self) -> Vec<Option<AxisValue>> {
        match &self.series {
            Some(axis) => axis.values.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }
}

fn apply(g: &mut LinkGeometry, variable: Variable, value: f64) {
    match variable {
        Variable::PGs => g.p_gs = value,
        Variable::PTh => g.p_th = value,
        Variable::SigmaS => g.sigma_s = value,
        Variable::W => g.beam = BeamSpec::Width(value),
    }
}

/// A config error pinned to a line of the source text when possible.
struct Diagnostic<'a> {
    source: &'a str,
    origin: &'a str,
}

impl Diagnostic<'_> {
    fn error(&self, section: &str, key: &str, message: impl std::fmt::Display) -> Error {
        match locate(self.source, section, key) {
            Some(line) => Error::Config(format!("{}:{line}: {message}", self.origin)),
            None => Error::Config(format!("{}: {message}", self.origin)),
        }
    }
}

/// Line (1-based) that sets `key` inside `section`, written either under a
/// `[section]` header or as a dotted `section.key` assignment.
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut section_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = header.trim().to_string();
            if current == section {
                section_line.get_or_insert(i + 1);
            }
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs: String = lhs.chars().filter(|c| !c.is_whitespace()).collect();
        let full = if current.is_empty() { lhs.clone() } else { format!("{current}.{lhs}") };
        if full == format!("{section}.{key}") || (key.is_empty() && full.starts_with(&format!("{section}."))) {
            return Some(i + 1);
        }
    }
    section_line
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: cannot read config: {e}", path.display())))?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parses and validates scenario text; `origin` names it in diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        match e.span() {
            Some(span) => Error::Config(format!("{origin}:{}: {message}", line_of_offset(text, span.start))),
            None => Error::Config(format!("{origin}: {message}")),
        }
    })?;
    resolve(config, &Diagnostic { source: text, origin })
}

fn positive(d: &Diagnostic, section: &str, key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(d.error(section, key, format!("{section}.{key} must be finite and > 0, got {value}")))
    }
}

fn resolve(config: ScenarioConfig, d: &Diagnostic) -> Result<Scenario> {
    let g = &config.geometry;
    let attenuation = match (g.visibility, g.sigma_atm) {
        (Some(v), None) => Attenuation::Visibility(positive(d, "geometry", "visibility", v)?),
        (None, Some(s)) if s >= 0.0 && s.is_finite() => Attenuation::Coefficient(s),
        (None, Some(s)) => return Err(d.error("geometry", "sigma_atm", format!("sigma_atm must be >= 0, got {s}"))),
        _ => return Err(d.error("geometry", "", "geometry needs exactly one of visibility or sigma_atm")),
    };
    let swept = |v: Variable| config.sweep.variable == v || config.series.as_ref().is_some_and(|s| s.variable == v);
    let beam = match (g.w, g.theta_gs) {
        (Some(w), None) => BeamSpec::Width(positive(d, "geometry", "w", w)?),
        (None, Some(t)) => BeamSpec::Divergence(positive(d, "geometry", "theta_gs", t)?),
        (None, None) if swept(Variable::W) => BeamSpec::Width(1.0),
        _ => return Err(d.error("geometry", "", "geometry needs exactly one of w or theta_gs")),
    };
    let required = |key: &str, value: Option<f64>, variable: Variable| -> Result<f64> {
        match value {
            Some(v) => Ok(v),
            None if swept(variable) => Ok(1.0),
            None => Err(d.error("geometry", "", format!("geometry.{key} is required unless it is swept"))),
        }
    };
    let base = LinkGeometry {
        z: g.z,
        wavelength: g.lambda,
        a_gs: g.a_gs,
        a_re: g.a_re,
        attenuation,
        beam,
        sigma_s: required("sigma_s", g.sigma_s, Variable::SigmaS)?,
        rho_refl: g.rho_refl,
        p_gs: required("p_gs", g.p_gs, Variable::PGs)?,
        p_th: required("p_th", g.p_th, Variable::PTh)?,
    };
    base.validate().map_err(|e| {
        let text = e.to_string();
        let key = ["z", "lambda", "a_gs", "a_re", "sigma_s", "rho_refl", "p_gs", "p_th"]
            .into_iter()
            .find(|k| text.contains(&format!("{k} ")))
            .unwrap_or("");
        d.error("geometry", key, text)
    })?;

    let turbulence = resolve_turbulence(&config.turbulence, d)?;

    if config.layout.is_empty() {
        return Err(d.error("layout", "", "at least one [layout.<name>] table is required"));
    }
    let mut layouts = Vec::new();
    for (name, spec) in &config.layout {
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(d.error(&format!("layout.{name}"), "", format!("layout name {name:?} must be [A-Za-z0-9_-]+")));
        }
        let layout =
            build_layout(spec).map_err(|e| d.error(&format!("layout.{name}"), "", format!("layout {name}: {e}")))?;
        layouts.push(NamedLayout { name: name.clone(), layout });
    }

    let sweep = resolve_axis(d, "sweep", config.sweep.variable, config.sweep.unit, &config.sweep.values)?;
    let series = match &config.series {
        Some(s) => {
            if s.variable == config.sweep.variable {
                return Err(d.error("series", "variable", "series and sweep must use different variables"));
            }
            Some(resolve_axis(d, "series", s.variable, s.unit, &s.values)?)
        }
        None => None,
    };

    let run = &config.run;
    if run.samples == 0 && run.mode.monte_carlo() {
        return Err(d.error("run", "samples", "run.samples must be at least 1"));
    }
    if let Some(b) = &config.baseline {
        if b.power_fractions.is_empty() {
            return Err(d.error("baseline", "power_fractions", "baseline.power_fractions must not be empty"));
        }
        for &f in &b.power_fractions {
            positive(d, "baseline", "power_fractions", f)?;
        }
        if let Some(v) = b.beamwidth {
            positive(d, "baseline", "beamwidth", v)?;
        }
        if let Some(v) = b.rx_radius {
            positive(d, "baseline", "rx_radius", v)?;
        }
        positive(d, "baseline", "rx_gain", b.rx_gain)?;
    }
    if config.moments.ratios.is_empty() {
        return Err(d.error("moments", "ratios", "moments.ratios must not be empty"));
    }
    for &r in &config.moments.ratios {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(d.error("moments", "ratios", format!("moment ratios must be finite and >= 0, got {r}")));
        }
    }

    let scenario = Scenario { base, turbulence, layouts, series, sweep, config };
    for s in scenario.series_points() {
        for &v in &scenario.sweep.values {
            let section = if s.is_some() && scenario.sweep.variable != Variable::SigmaS { "series" } else { "sweep" };
            scenario
                .geometry_at(s, v)
                .validate()
                .map_err(|e| d.error(section, "values", format!("invalid {section} point: {e}")))?;
        }
    }
    Ok(scenario)
}

fn resolve_turbulence(t: &TurbulenceConfig, d: &Diagnostic) -> Result<TurbulenceParams> {
    let base = match &t.preset {
        Some(name) => Some(TurbulenceParams::preset(name).ok_or_else(|| {
            d.error("turbulence", "preset", format!("unknown turbulence preset {name:?} (weak, moderate, strong)"))
        })?),
        None => None,
    };
    let pick = |key: &str, explicit: Option<f64>, preset: Option<f64>| {
        explicit
            .or(preset)
            .ok_or_else(|| d.error("turbulence", "", format!("turbulence.{key} is required without a preset")))
    };
    let params = TurbulenceParams {
        alpha: pick("alpha", t.alpha, base.map(|b| b.alpha))?,
        beta: pick("beta", t.beta, base.map(|b| b.beta))?,
        rho_alpha: pick("rho_alpha", t.rho_alpha, base.map(|b| b.rho_alpha))?,
        rho_beta: pick("rho_beta", t.rho_beta, base.map(|b| b.rho_beta))?,
    };
    params.validate().map_err(|e| {
        let text = e.to_string();
        let key = ["rho_alpha", "rho_beta", "alpha", "beta"].into_iter().find(|k| text.contains(k)).unwrap_or("");
        d.error("turbulence", key, text)
    })?;
    Ok(params)
}

fn resolve_axis(d: &Diagnostic, section: &str, variable: Variable, unit: Option<Unit>, values: &[f64]) -> Result<Axis> {
    if values.is_empty() {
        return Err(d.error(section, "values", format!("{section}.values must not be empty")));
    }
    let unit = unit.unwrap_or(if variable.is_power() { Unit::Watt } else { Unit::Metre });
    let compatible = match unit {
        Unit::Watt | Unit::DecibelMilliwatt => variable.is_power(),
        Unit::Metre => !variable.is_power(),
    };
    if !compatible {
        return Err(d.error(
            section,
            "unit",
            format!("unit {} does not apply to {}", unit.as_str(), variable.as_str()),
        ));
    }
    let values = values
        .iter()
        .map(|&raw| {
            if !raw.is_finite() {
                return Err(d.error(section, "values", format!("{section} value {raw} is not finite")));
            }
            Ok(AxisValue { raw, si: unit.to_si(raw) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Axis { variable, unit, values })
}

pub fn build_layout(spec: &LayoutConfig) -> Result<CcrLayout> {
    let min_spacing = spec.min_spacing.unwrap_or(MIN_CCR_SPACING);
    let need = |name: &str, v: Option<f64>| {
        v.filter(|x| *x > 0.0 && x.is_finite())
            .ok_or_else(|| Error::Config(format!("{} layouts need a positive {name}", spec.kind.as_str())))
    };
    let count = || {
        spec.count
            .filter(|&c| c > 0)
            .ok_or_else(|| Error::Config(format!("{} layouts need count >= 1", spec.kind.as_str())))
    };
    let positions = match spec.kind {
        LayoutKind::Linear => linear_positions(count()?, need("spacing", spec.spacing)?),
        LayoutKind::Circular => circular_positions(count()?, need("radius", spec.radius)?),
        LayoutKind::Explicit => {
            let (Some(x), Some(y)) = (&spec.x, &spec.y) else {
                return Err(Error::Config("explicit layouts need x and y arrays".into()));
            };
            if x.len() != y.len() {
                return Err(Error::Config(format!("x has {} entries but y has {}", x.len(), y.len())));
            }
            if spec.count.is_some_and(|c| c != x.len()) {
                return Err(Error::Config("count disagrees with the number of coordinates".into()));
            }
            x.iter().zip(y).map(|(&x, &y)| Position::new(x, y)).collect()
        }
    };
    CcrLayout::new(positions, min_spacing)
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn float_list(values: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = values.into_iter().map(float).collect();
    format!("[{}]", items.join(", "))
}

/// Writes the resolved scenario as flat dotted-key TOML that loads back
/// into the same scenario.
pub fn render_manifest(s: &Scenario) -> String {
    let c = &s.config;
    let mut out = String::new();
    let mut line = |key: &str, value: String| {
        let _ = writeln!(out, "{key} = {value}");
    };
    line("meta.generator", format!("\"retrotrack {}\"", env!("CARGO_PKG_VERSION")));
    line("meta.seed", c.run.seed.to_string());

    let g = &s.base;
    line("geometry.z", float(g.z));
    line("geometry.lambda", float(g.wavelength));
    line("geometry.a_gs", float(g.a_gs));
    line("geometry.a_re", float(g.a_re));
    match g.attenuation {
        Attenuation::Visibility(v) => line("geometry.visibility", float(v)),
        Attenuation::Coefficient(v) => line("geometry.sigma_atm", float(v)),
    }
    match g.beam {
        BeamSpec::Width(w) => line("geometry.w", float(w)),
        BeamSpec::Divergence(t) => line("geometry.theta_gs", float(t)),
    }
    line("geometry.sigma_s", float(g.sigma_s));
    line("geometry.rho_refl", float(g.rho_refl));
    line("geometry.p_gs", float(g.p_gs));
    line("geometry.p_th", float(g.p_th));

    let t = &s.turbulence;
    line("turbulence.alpha", float(t.alpha));
    line("turbulence.beta", float(t.beta));
    line("turbulence.rho_alpha", float(t.rho_alpha));
    line("turbulence.rho_beta", float(t.rho_beta));

    for named in &s.layouts {
        let prefix = format!("layout.{}", named.name);
        let spec = &c.layout[&named.name];
        line(&format!("{prefix}.kind"), format!("\"{}\"", spec.kind.as_str()));
        if let Some(v) = spec.count {
            line(&format!("{prefix}.count"), v.to_string());
        }
        if let Some(v) = spec.spacing {
            line(&format!("{prefix}.spacing"), float(v));
        }
        if let Some(v) = spec.radius {
            line(&format!("{prefix}.radius"), float(v));
        }
        if let (Some(x), Some(y)) = (&spec.x, &spec.y) {
            line(&format!("{prefix}.x"), float_list(x.iter().copied()));
            line(&format!("{prefix}.y"), float_list(y.iter().copied()));
        }
        line(&format!("{prefix}.min_spacing"), float(spec.min_spacing.unwrap_or(MIN_CCR_SPACING)));
    }

    if let Some(axis) = &s.series {
        line("series.variable", format!("\"{}\"", axis.variable.as_str()));
        line("series.unit", format!("\"{}\"", axis.unit.as_str()));
        line("series.values", float_list(axis.values.iter().map(|v| v.raw)));
    }
    line("sweep.variable", format!("\"{}\"", s.sweep.variable.as_str()));
    line("sweep.unit", format!("\"{}\"", s.sweep.unit.as_str()));
    line("sweep.values", float_list(s.sweep.values.iter().map(|v| v.raw)));

    line("run.mode", format!("\"{}\"", c.run.mode.as_str()));
    line("run.samples", c.run.samples.to_string());
    line("run.seed", c.run.seed.to_string());
    line("run.workers", c.run.workers.to_string());

    if let Some(b) = &c.baseline {
        line("baseline.power_fractions", float_list(b.power_fractions.iter().copied()));
        if let Some(v) = b.beamwidth {
            line("baseline.beamwidth", float(v));
        }
        if let Some(v) = b.rx_radius {
            line("baseline.rx_radius", float(v));
        }
        line("baseline.rx_gain", float(b.rx_gain));
    }
    line("moments.ratios", float_list(c.moments.ratios.iter().copied()));
    out
}
