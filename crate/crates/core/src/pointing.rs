//! Pointing loss of CCRs under a shared beam jitter.
//!
//! Each CCR `i` sits at a fixed boresight offset `s_i` from the beam
//! footprint centre. A single jitter vector `d ~ N(0, σ_s² I₂)` moves the
//! beam, so CCR `i` sees `Z_i = A₀ exp(-2 |s_i + d|² / w²)`. This module
//! provides the marginal density of `Z_i` and joint moments
//! `E[Z_{m_1} ⋯ Z_{m_n}]`, either through a one-dimensional Bessel-kernel
//! integral (exact) or through a Taylor expansion of the beam profile that
//! reduces to Rayleigh moments and cosine-product integrals (approximate).

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::geometry::CcrLayout;
use crate::numerics::{bessel_i0_scaled, integrate, integrate_semi_infinite, QuadratureSpec};

/// Largest joint-moment order handled by the Taylor expansion.
pub const MAX_TAYLOR_ORDER: usize = 4;

/// Beam and jitter parameters shared by every CCR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingModel {
    /// Beamwidth w at the footprint plane.
    pub w: f64,
    /// Jitter standard deviation σ_s per axis.
    pub sigma_s: f64,
    /// Peak gain A₀.
    pub a0: f64,
}

impl PointingModel {
    pub fn new(w: f64, sigma_s: f64, a0: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(domain(format!("beamwidth must be > 0, got {w}")));
        }
        if !(sigma_s >= 0.0) || !sigma_s.is_finite() {
            return Err(domain(format!("sigma_s must be >= 0, got {sigma_s}")));
        }
        if !(a0 > 0.0) || !a0.is_finite() {
            return Err(domain(format!("A0 must be > 0, got {a0}")));
        }
        Ok(Self { w, sigma_s, a0 })
    }

    /// Pointing loss at displacement `r` from the beam centre.
    #[inline]
    pub fn loss_at(&self, r_squared: f64) -> f64 {
        self.a0 * (-2.0 * r_squared / (self.w * self.w)).exp()
    }
}

/// A multiset of CCR indices (zero-based), stored in nonincreasing order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MomentIndex {
    indices: Vec<usize>,
}

impl MomentIndex {
    pub fn new(mut indices: Vec<usize>, ccr_count: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(domain("a moment index needs at least one factor"));
        }
        if let Some(&bad) = indices.iter().find(|&&m| m >= ccr_count) {
            return Err(domain(format!("CCR index {bad} out of range for {ccr_count} CCRs")));
        }
        indices.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { indices })
    }

    /// Builds the multiset in which CCR `i` appears `counts[i]` times.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        let indices: Vec<usize> = counts.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect();
        Self::new(indices, counts.len())
    }

    /// Number of factors n₀.
    pub fn order(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Density of the pointing loss `Z_i` of a CCR at boresight offset `s_i`.
pub fn pointing_pdf(z: f64, s_i: f64, model: &PointingModel) -> Result<f64> {
    let PointingModel { w, sigma_s, a0 } = *model;
    if !(sigma_s > 0.0) {
        return Err(domain("pointing_pdf requires sigma_s > 0"));
    }
    if !(z > 0.0 && z <= a0) {
        return Err(domain(format!("pointing loss {z} outside (0, A0 = {a0}]")));
    }
    let shape = w * w / (4.0 * sigma_s * sigma_s);
    let log_ratio = (z / a0).ln().min(0.0);
    let arg = s_i / (sigma_s * sigma_s) * (-0.5 * w * w * log_ratio).sqrt();
    let ln_i0 = bessel_i0_scaled(arg)?.ln() + arg;
    let ln_pdf = shape.ln() - z.ln() + shape * log_ratio - s_i * s_i / (2.0 * sigma_s * sigma_s) + ln_i0;
    Ok(ln_pdf.exp())
}

/// `2ν`-th moment of a Rayleigh variable with scale σ_s: `2^ν ν! σ_s^{2ν}`.
pub fn rayleigh_moment(nu: u32, sigma_s: f64) -> f64 {
    let mut value = 1.0;
    for k in 1..=nu {
        value *= 2.0 * k as f64 * sigma_s * sigma_s;
    }
    value
}

/// `∫₀^{2π} Π_i cos(θ - η_i) dθ` for an even number (at most eight) of angles.
///
/// Expanding each cosine into exponentials leaves only the balanced sign
/// patterns, so the integral is `2π / 2^{2ℓ}` times the sum of
/// `cos(Σ_{i∈A} η_i - Σ_{i∉A} η_i)` over the `ℓ`-subsets `A`. This is the
/// permutation sum with prefactor `2π / (2^{2ℓ} (ℓ!)²)` with each subset
/// counted once instead of `(ℓ!)²` times.
pub fn cosine_product_integral(etas: &[f64]) -> Result<f64> {
    let n = etas.len();
    if n % 2 == 1 {
        return Err(domain("cosine product of odd length integrates to zero; caller handles it"));
    }
    if n > 2 * MAX_TAYLOR_ORDER {
        return Err(domain(format!("at most {} angles supported, got {n}", 2 * MAX_TAYLOR_ORDER)));
    }
    if n == 0 {
        return Ok(2.0 * PI);
    }
    let half = (n / 2) as u32;
    let total: f64 = etas.iter().sum();
    let mut acc = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != half {
            continue;
        }
        let plus: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| etas[i]).sum();
        acc += (2.0 * plus - total).cos();
    }
    Ok(2.0 * PI * acc / (1u64 << n) as f64)
}

// Σ 2 s_{m_i}² / w² over the index multiset.
fn boresight_exponent(idx: &MomentIndex, layout: &CcrLayout, w: f64) -> f64 {
    idx.indices()
        .iter()
        .map(|&m| {
            let s = layout.position(m).norm();
            2.0 * s * s / (w * w)
        })
        .sum()
}

fn check_layout(idx: &MomentIndex, layout: &CcrLayout) -> Result<()> {
    match idx.indices().first() {
        Some(&m) if m >= layout.len() => {
            Err(domain(format!("moment index refers to CCR {m} but the layout has {}", layout.len())))
        }
        _ => Ok(()),
    }
}

/// Exact joint moment `E[Z_{m_1} ⋯ Z_{m_n}]` via the Bessel-kernel integral
///
/// ```text
/// A₀ⁿ e^{-Σ 2 s²/w²} ∫₀^∞ e^{-(2n/w² + 1/(2σ²)) δ²} (δ/σ²) I₀(K δ) dδ
/// ```
///
/// with `K = (4/w²) |Σ_i s_{m_i}|` taken from the vector sum of the CCR
/// positions. Any order is supported. `σ_s = 0` returns the deterministic
/// product.
pub fn joint_moment_exact(
    idx: &MomentIndex,
    layout: &CcrLayout,
    model: &PointingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_layout(idx, layout)?;
    let PointingModel { w, sigma_s, a0 } = *model;
    let n = idx.order() as f64;
    let ln_front = n * a0.ln() - boresight_exponent(idx, layout, w);
    if sigma_s == 0.0 {
        return Ok(ln_front.exp());
    }

    let (sx, sy) = idx.indices().iter().fold((0.0, 0.0), |(x, y), &m| {
        let p = layout.position(m);
        (x + p.x, y + p.y)
    });
    let k = 4.0 / (w * w) * sx.hypot(sy);
    let p = 2.0 * n / (w * w) + 1.0 / (2.0 * sigma_s * sigma_s);

    // δ = x/√p turns the Gaussian into e^{-x²}; with κ = K/√p the integrand
    // x e^{-x² + κx} e^{-κx} I₀(κx) peaks near κ/2 and is integrated around
    // that centre after pulling out e^{κ²/4}.
    let kappa = k / p.sqrt();
    let centre = 0.5 * kappa;
    let kernel = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let d = x - centre;
        x * (-d * d).exp() * crate::numerics::bessel_i0_scaled_unchecked(kappa * x)
    };
    let left = if centre > 0.0 { integrate(kernel, 0.0, centre, spec)? } else { 0.0 };
    let right = integrate_semi_infinite(|y| kernel(centre + y), spec)?;
    let integral = left + right;
    if !(integral > 0.0) {
        return Err(Error::Quadrature { estimate: integral, error_bound: f64::NAN, subdivisions: 0 });
    }
    let ln_value = ln_front - (p * sigma_s * sigma_s).ln() + centre * centre + integral.ln();
    Ok(ln_value.exp())
}

/// Truncation order of the beam-profile Taylor expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaylorOrder {
    /// Keep only the linear term in the jitter.
    First,
    /// Keep linear and quadratic terms.
    Second,
}

#[derive(Clone, Copy)]
enum Role {
    One,
    Linear,
    Quadratic,
    Flat,
}

/// Approximate joint moment from the second-order Taylor expansion of the
/// beam profile around each CCR position.
pub fn joint_moment_approx(idx: &MomentIndex, layout: &CcrLayout, model: &PointingModel) -> Result<f64> {
    joint_moment_taylor(idx, layout, model, TaylorOrder::Second)
}

/// Taylor-expanded joint moment.
///
/// Each factor is replaced by
/// `A₀ e^{-2s²/w²} [1 - (4s/w²) δ cos(φ-θ) + (8s²/w⁴) δ² cos²(φ-θ) - (2/w²) δ²]`
/// (only the first two terms for [`TaylorOrder::First`]). Expanding the
/// product groups terms by the power `2ν` of δ into polynomials
/// `P^{(2ν)}`; each is a sum over role assignments of its coefficient times
/// a cosine-product integral. The moment is then
/// `A₀ⁿ e^{-Σ2s²/w²} / (2π) · Σ_{ν=0}^{n} μ^{(2ν)} P^{(2ν)}` with `μ^{(2ν)}`
/// the Rayleigh moments.
pub fn joint_moment_taylor(
    idx: &MomentIndex,
    layout: &CcrLayout,
    model: &PointingModel,
    order: TaylorOrder,
) -> Result<f64> {
    check_layout(idx, layout)?;
    let n = idx.order();
    if n > MAX_TAYLOR_ORDER {
        return Err(Error::UnsupportedOrder(n));
    }
    let polys = taylor_polynomials(idx, layout, model.w, order)?;
    let total: f64 = polys.iter().enumerate().map(|(nu, p)| rayleigh_moment(nu as u32, model.sigma_s) * p).sum();
    let ln_front = n as f64 * model.a0.ln() - boresight_exponent(idx, layout, model.w);
    Ok(ln_front.exp() * total / (2.0 * PI))
}

/// The polynomials `P^{(2ν)}`, `ν = 0..=n`, of the Taylor-expanded moment.
pub fn taylor_polynomials(idx: &MomentIndex, layout: &CcrLayout, w: f64, order: TaylorOrder) -> Result<Vec<f64>> {
    let n = idx.order();
    if n > MAX_TAYLOR_ORDER {
        return Err(Error::UnsupportedOrder(n));
    }
    let roles: &[Role] = match order {
        TaylorOrder::First => &[Role::One, Role::Linear],
        TaylorOrder::Second => &[Role::One, Role::Linear, Role::Quadratic, Role::Flat],
    };
    let factors: Vec<(f64, f64)> = idx
        .indices()
        .iter()
        .map(|&m| {
            let p = layout.position(m);
            (p.norm(), p.angle())
        })
        .collect();
    let w2 = w * w;

    let mut polys = vec![0.0; n + 1];
    let assignments = roles.len().pow(n as u32);
    let mut angles = Vec::with_capacity(2 * n);
    for code in 0..assignments {
        let mut rest = code;
        let mut coef = 1.0;
        let mut power = 0;
        angles.clear();
        for &(s, phi) in &factors {
            match roles[rest % roles.len()] {
                Role::One => {}
                Role::Linear => {
                    coef *= -4.0 * s / w2;
                    power += 1;
                    angles.push(phi);
                }
                Role::Quadratic => {
                    coef *= 8.0 * s * s / (w2 * w2);
                    power += 2;
                    angles.push(phi);
                    angles.push(phi);
                }
                Role::Flat => {
                    coef *= -2.0 / w2;
                    power += 2;
                }
            }
            rest /= roles.len();
        }
        // Odd powers of δ carry an odd number of cosines and vanish.
        if power % 2 == 1 || coef == 0.0 {
            continue;
        }
        polys[power / 2] += coef * cosine_product_integral(&angles)?;
    }
    Ok(polys)
}
