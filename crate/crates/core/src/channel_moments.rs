//! Moments of the composite fading `U = X·Y` and of the received sum
//! `S = Σ U_i Z_i`.
//!
//! `X` (uplink) and `Y` (downlink) are unit-mean Gamma-Gamma variables whose
//! large-scale factors share a correlation ρ_α and whose small-scale
//! factors share ρ_β. Each correlated pair follows the bivariate gamma law
//! whose joint moments are
//! `E[(X^{(α)} Y^{(α)})^n] = [Γ(α+n)/Γ(α)]² α^{-2n} ₂F₁(-n, -n; α; ρ_α)`.

use std::collections::HashMap;

use crate::error::{domain, Result};
use crate::geometry::CcrLayout;
use crate::numerics::{hyp2f1_neg_int, ln_gamma_unchecked, NeumaierSum, QuadratureSpec};
use crate::pointing::{joint_moment_exact, joint_moment_taylor, MomentIndex, PointingModel, TaylorOrder};

/// Gamma-Gamma shapes and uplink/downlink correlations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceParams {
    pub alpha: f64,
    pub beta: f64,
    pub rho_alpha: f64,
    pub rho_beta: f64,
}

/// Correlation coefficient used by every named preset.
pub const PRESET_CORRELATION: f64 = 0.7;

impl TurbulenceParams {
    pub fn new(alpha: f64, beta: f64, rho_alpha: f64, rho_beta: f64) -> Result<Self> {
        let p = Self { alpha, beta, rho_alpha, rho_beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("turbulence {name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [("rho_alpha", self.rho_alpha), ("rho_beta", self.rho_beta)] {
            if !(0.0..1.0).contains(&v) {
                return Err(domain(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn weak() -> Self {
        Self { alpha: 17.1, beta: 16.0, rho_alpha: PRESET_CORRELATION, rho_beta: PRESET_CORRELATION }
    }

    /// Intermediate regime (Rytov variance near 0.5).
    pub fn moderate() -> Self {
        Self { alpha: 6.0, beta: 4.4, rho_alpha: PRESET_CORRELATION, rho_beta: PRESET_CORRELATION }
    }

    pub fn strong() -> Self {
        Self { alpha: 4.0, beta: 1.9, rho_alpha: PRESET_CORRELATION, rho_beta: PRESET_CORRELATION }
    }

    /// Looks up `weak`, `moderate` or `strong`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "weak" => Some(Self::weak()),
            "moderate" => Some(Self::moderate()),
            "strong" => Some(Self::strong()),
            _ => None,
        }
    }
}

/// First, second and fourth moments of S.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
}

impl MomentSet {
    /// Checks positivity and the Jensen orderings `m2 ≥ m1²`, `m4 ≥ m2²`.
    pub fn validate(&self) -> Result<()> {
        if !(self.m1 > 0.0) || !self.m2.is_finite() || !self.m4.is_finite() {
            return Err(domain(format!("moments must be positive and finite: {self:?}")));
        }
        if self.m2 < self.m1 * self.m1 || self.m4 < self.m2 * self.m2 {
            return Err(domain(format!("moments violate Jensen ordering: {self:?}")));
        }
        Ok(())
    }

    pub fn get(&self, order: usize) -> Option<f64> {
        match order {
            1 => Some(self.m1),
            2 => Some(self.m2),
            4 => Some(self.m4),
            _ => None,
        }
    }
}

// Joint moment of one correlated Gamma pair with unit means.
fn pair_moment(n: u32, shape: f64, rho: f64) -> Result<f64> {
    let ln_ratio = ln_gamma_unchecked(shape + n as f64) - ln_gamma_unchecked(shape) - n as f64 * shape.ln();
    Ok((2.0 * ln_ratio).exp() * hyp2f1_neg_int(n, shape, rho)?)
}

/// `E[U^n]` for `U = X·Y`.
pub fn u_moment(n: u32, params: &TurbulenceParams) -> Result<f64> {
    params.validate()?;
    Ok(pair_moment(n, params.alpha, params.rho_alpha)? * pair_moment(n, params.beta, params.rho_beta)?)
}

/// How the joint pointing moments are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointingMethod {
    /// Bessel-kernel integral.
    Exact,
    /// Second-order Taylor expansion of the beam profile.
    Approx,
    /// First-order Taylor expansion of the beam profile.
    FirstOrder,
}

/// All compositions of `n` into `parts` nonnegative parts, in lexicographic
/// order with the first part largest first.
pub fn compositions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    fn recurse(remaining: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=remaining).rev() {
            prefix.push(k);
            recurse(remaining - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        recurse(n, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

fn multinomial(parts: &[usize]) -> f64 {
    let mut coef = 1.0;
    let mut total = 0usize;
    for &k in parts {
        for j in 1..=k {
            total += 1;
            coef *= total as f64 / j as f64;
        }
    }
    coef
}

/// Evaluates moments of S for one scenario, memoizing joint pointing
/// moments on their canonical index multiset.
#[derive(Debug, Clone)]
pub struct MomentEngine {
    turbulence: TurbulenceParams,
    layout: CcrLayout,
    model: PointingModel,
    spec: QuadratureSpec,
    pointing_cache: HashMap<(PointingMethod, MomentIndex), f64>,
}

impl MomentEngine {
    pub fn new(turbulence: TurbulenceParams, layout: CcrLayout, model: PointingModel) -> Result<Self> {
        turbulence.validate()?;
        Ok(Self { turbulence, layout, model, spec: QuadratureSpec::default(), pointing_cache: HashMap::new() })
    }

    pub fn with_quadrature(mut self, spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        self.spec = spec;
        self.pointing_cache.clear();
        Ok(self)
    }

    pub fn model(&self) -> &PointingModel {
        &self.model
    }

    /// Joint pointing moment for the multiset of CCR indices.
    pub fn pointing_moment(&mut self, idx: &MomentIndex, method: PointingMethod) -> Result<f64> {
        let key = (method, idx.clone());
        if let Some(&v) = self.pointing_cache.get(&key) {
            return Ok(v);
        }
        let v = match method {
            PointingMethod::Exact => joint_moment_exact(idx, &self.layout, &self.model, &self.spec)?,
            PointingMethod::Approx => joint_moment_taylor(idx, &self.layout, &self.model, TaylorOrder::Second)?,
            PointingMethod::FirstOrder => joint_moment_taylor(idx, &self.layout, &self.model, TaylorOrder::First)?,
        };
        self.pointing_cache.insert(key, v);
        Ok(v)
    }

    /// `E[S^{n0}]`, summing over every composition of `n0` into M parts the
    /// multinomial coefficient, the per-CCR fading moments and the joint
    /// pointing moment.
    pub fn s_moment(&mut self, n0: usize, method: PointingMethod) -> Result<f64> {
        if n0 == 0 {
            return Ok(1.0);
        }
        let u: Vec<f64> = (0..=n0 as u32).map(|k| u_moment(k, &self.turbulence)).collect::<Result<_>>()?;
        let mut sum = NeumaierSum::new();
        for parts in compositions(n0, self.layout.len()) {
            let fading: f64 = parts.iter().map(|&k| u[k]).product();
            let idx = MomentIndex::from_counts(&parts)?;
            sum.add(multinomial(&parts) * fading * self.pointing_moment(&idx, method)?);
        }
        Ok(sum.value())
    }

    pub fn moment_set(&mut self, method: PointingMethod) -> Result<MomentSet> {
        Ok(MomentSet { m1: self.s_moment(1, method)?, m2: self.s_moment(2, method)?, m4: self.s_moment(4, method)? })
    }
}

/// One-shot `E[S^{n0}]` without keeping the cache.
pub fn s_moment(
    n0: usize,
    turbulence: &TurbulenceParams,
    layout: &CcrLayout,
    model: &PointingModel,
    method: PointingMethod,
) -> Result<f64> {
    MomentEngine::new(*turbulence, layout.clone(), *model)?.s_moment(n0, method)
}
