//! The α-μ distribution and its moment-matching fit.
//!
//! With shape α, shape μ and scale r̂ the density is
//! `α μ^μ r^{αμ-1} / (r̂^{αμ} Γ(μ)) · exp(-μ r^α / r̂^α)` and the CDF is the
//! regularized lower incomplete gamma `P(μ, μ (r/r̂)^α)`.

use crate::channel_moments::MomentSet;
use crate::error::{domain, Error, Result};
use crate::numerics::{ln_gamma_shift, ln_gamma_unchecked, reg_lower_incomplete_gamma};

/// Parameters `(α, μ, r̂)` of an α-μ variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaMuParams {
    pub alpha: f64,
    pub mu: f64,
    pub r_hat: f64,
}

impl AlphaMuParams {
    pub fn new(alpha: f64, mu: f64, r_hat: f64) -> Result<Self> {
        let p = Self { alpha, mu, r_hat };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("mu", self.mu), ("r_hat", self.r_hat)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("alpha-mu {name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Relative residuals `m2/m1²` and `m4/m2²` of the fitted shape against
    /// the target moments (model ratio over target ratio, minus one).
    pub fn moment_residuals(&self, moments: &MomentSet) -> [f64; 2] {
        let (ln_r1, ln_r2) = ln_ratios(self.alpha, self.mu);
        let t1 = (moments.m2 / (moments.m1 * moments.m1)).ln();
        let t2 = (moments.m4 / (moments.m2 * moments.m2)).ln();
        [(ln_r1 - t1).exp_m1(), (ln_r2 - t2).exp_m1()]
    }
}

pub fn alpha_mu_pdf(r: f64, p: &AlphaMuParams) -> Result<f64> {
    p.validate()?;
    if !(r >= 0.0) {
        return Err(domain(format!("alpha-mu density needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        let power = p.alpha * p.mu - 1.0;
        return Ok(if power > 0.0 {
            0.0
        } else if power == 0.0 {
            p.alpha * p.mu / p.r_hat
        } else {
            f64::INFINITY
        });
    }
    let u = r / p.r_hat;
    let ln_pdf = p.alpha.ln() + p.mu * p.mu.ln() + (p.alpha * p.mu - 1.0) * u.ln()
        - p.r_hat.ln()
        - ln_gamma_unchecked(p.mu)
        - p.mu * u.powf(p.alpha);
    Ok(ln_pdf.exp())
}

pub fn alpha_mu_cdf(r: f64, p: &AlphaMuParams) -> Result<f64> {
    p.validate()?;
    if !(r >= 0.0) {
        return Err(domain(format!("alpha-mu CDF needs r >= 0, got {r}")));
    }
    if r == f64::INFINITY {
        return Ok(1.0);
    }
    reg_lower_incomplete_gamma(p.mu, p.mu * (r / p.r_hat).powf(p.alpha))
}

/// `E[R^k] = r̂^k Γ(μ + k/α) / (μ^{k/α} Γ(μ))`.
pub fn alpha_mu_moment(k: f64, p: &AlphaMuParams) -> Result<f64> {
    p.validate()?;
    let shifted = p.mu + k / p.alpha;
    if !(shifted > 0.0) {
        return Err(domain(format!("moment of order {k} diverges (mu + k/alpha = {shifted})")));
    }
    let ln_m = k * p.r_hat.ln() + ln_gamma_unchecked(shifted) - (k / p.alpha) * p.mu.ln() - ln_gamma_unchecked(p.mu);
    Ok(ln_m.exp())
}

/// `Prob[S < p_th / c]` under the fitted α-μ law.
pub fn outage_probability(p_th: f64, c: f64, p: &AlphaMuParams) -> Result<f64> {
    if !(p_th > 0.0) || !(c > 0.0) {
        return Err(domain(format!("outage needs p_th > 0 and c > 0, got {p_th}, {c}")));
    }
    alpha_mu_cdf(p_th / c, p)
}

// ln(m2/m1²) and ln(m4/m2²), written with shifted log-gammas so the
// large `(k/α) ln μ` parts cancel exactly.
fn ln_ratios(alpha: f64, mu: f64) -> (f64, f64) {
    let e1 = ln_gamma_shift(mu, 1.0 / alpha);
    let e2 = ln_gamma_shift(mu, 2.0 / alpha);
    let e4 = ln_gamma_shift(mu, 4.0 / alpha);
    (e2 - 2.0 * e1, e4 - 2.0 * e2)
}

const NEWTON_MAX_ITER: usize = 200;
const JACOBIAN_STEP: f64 = 1e-6;
const MAX_LOG_STEP: f64 = 2.0;
const GRID_SIZE: usize = 40;
const GRID_SEEDS: usize = 8;
/// Acceptance threshold on the relative moment-ratio residuals.
pub const FIT_TOLERANCE: f64 = 1e-10;

struct Targets {
    t1: f64,
    t2: f64,
}

impl Targets {
    // Residuals on ln(R - 1), which keeps near-deterministic inputs (R → 1)
    // well scaled.
    fn residual(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let (alpha, mu) = (x[0].exp(), x[1].exp());
        if !alpha.is_finite() || !mu.is_finite() || alpha <= 0.0 || mu <= 0.0 {
            return None;
        }
        let (l1, l2) = ln_ratios(alpha, mu);
        if !(l1 > 0.0) || !(l2 > 0.0) {
            return None;
        }
        let f = [l1.exp_m1().ln() - self.t1, l2.exp_m1().ln() - self.t2];
        f.iter().all(|v| v.is_finite()).then_some(f)
    }
}

fn norm(f: [f64; 2]) -> f64 {
    f[0].hypot(f[1])
}

// Damped Newton on (ln α, ln μ); returns the final point and residual norm.
fn newton(targets: &Targets, start: [f64; 2]) -> Option<([f64; 2], f64)> {
    let mut x = start;
    let mut f = targets.residual(x)?;
    for _ in 0..NEWTON_MAX_ITER {
        if norm(f) < 1e-13 {
            break;
        }
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += JACOBIAN_STEP;
            xm[j] -= JACOBIAN_STEP;
            let (fp, fm) = (targets.residual(xp)?, targets.residual(xm)?);
            for i in 0..2 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * JACOBIAN_STEP);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !det.is_finite() || det == 0.0 {
            return Some((x, norm(f)));
        }
        let mut step = [-(jac[1][1] * f[0] - jac[0][1] * f[1]) / det, -(-jac[1][0] * f[0] + jac[0][0] * f[1]) / det];
        let largest = step[0].abs().max(step[1].abs());
        if largest > MAX_LOG_STEP {
            step = [step[0] * MAX_LOG_STEP / largest, step[1] * MAX_LOG_STEP / largest];
        }
        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = [x[0] + damping * step[0], x[1] + damping * step[1]];
            if let Some(ft) = targets.residual(trial) {
                if norm(ft) < norm(f) {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            damping *= 0.5;
        }
        match accepted {
            Some((xn, fnew)) => {
                x = xn;
                f = fnew;
            }
            None => break,
        }
    }
    Some((x, norm(f)))
}

/// Matches `(α, μ, r̂)` to the first, second and fourth moments.
///
/// The two shape equations `m2/m1² = Γ(μ)Γ(μ+2/α)/Γ(μ+1/α)²` and
/// `m4/m2² = Γ(μ)Γ(μ+4/α)/Γ(μ+2/α)²` are solved by damped Newton in
/// `(ln α, ln μ)` from `(2, 1)`; if that fails, the best points of a log
/// grid over `[0.1, 100]²` reseed the iteration. The scale follows from
/// the first moment.
pub fn fit_alpha_mu(moments: &MomentSet) -> Result<AlphaMuParams> {
    moments.validate()?;
    let r1 = moments.m2 / (moments.m1 * moments.m1);
    let r2 = moments.m4 / (moments.m2 * moments.m2);
    if !(r1 > 1.0) || !(r2 > 1.0) {
        return Err(domain(format!("moment ratios must exceed one, got m2/m1² = {r1}, m4/m2² = {r2}")));
    }
    let targets = Targets { t1: (r1 - 1.0).ln(), t2: (r2 - 1.0).ln() };

    let mut best_residual = f64::INFINITY;
    let mut try_start = |start: [f64; 2]| -> Option<AlphaMuParams> {
        let (x, _) = newton(&targets, start)?;
        let (alpha, mu) = (x[0].exp(), x[1].exp());
        let ln_r_hat =
            (1.0 / alpha) * mu.ln() + ln_gamma_unchecked(mu) - ln_gamma_unchecked(mu + 1.0 / alpha) + moments.m1.ln();
        let p = AlphaMuParams { alpha, mu, r_hat: ln_r_hat.exp() };
        let residual = p.moment_residuals(moments).iter().fold(0.0f64, |a, r| a.max(r.abs()));
        if residual < FIT_TOLERANCE && p.validate().is_ok() {
            return Some(p);
        }
        best_residual = best_residual.min(residual);
        None
    };

    if let Some(p) = try_start([2f64.ln(), 0.0]) {
        return Ok(p);
    }
    log::debug!("alpha-mu Newton from (2, 1) failed; reseeding from the grid");
    let (lo, hi) = (0.1f64.ln(), 100f64.ln());
    let step = (hi - lo) / (GRID_SIZE - 1) as f64;
    let mut grid: Vec<(f64, [f64; 2])> = Vec::with_capacity(GRID_SIZE * GRID_SIZE);
    for i in 0..GRID_SIZE {
        for j in 0..GRID_SIZE {
            let x = [lo + i as f64 * step, lo + j as f64 * step];
            if let Some(f) = targets.residual(x) {
                grid.push((norm(f), x));
            }
        }
    }
    grid.sort_by(|a, b| a.0.total_cmp(&b.0));
    for &(_, x) in grid.iter().take(GRID_SEEDS) {
        if let Some(p) = try_start(x) {
            return Ok(p);
        }
    }
    Err(Error::Estimation { best_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadratureSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn moments_of(p: &AlphaMuParams) -> MomentSet {
        MomentSet {
            m1: alpha_mu_moment(1.0, p).unwrap(),
            m2: alpha_mu_moment(2.0, p).unwrap(),
            m4: alpha_mu_moment(4.0, p).unwrap(),
        }
    }

    #[test]
    fn cdf_limits_and_rayleigh_case() {
        let p = AlphaMuParams::new(2.0, 1.0, 1.3).unwrap();
        assert_eq!(alpha_mu_cdf(0.0, &p).unwrap(), 0.0);
        assert_eq!(alpha_mu_cdf(f64::INFINITY, &p).unwrap(), 1.0);
        assert!((alpha_mu_cdf(1e3, &p).unwrap() - 1.0).abs() < 1e-15);
        for &r in &[0.1f64, 0.7, 1.3, 2.5] {
            let want = 1.0 - (-(r * r) / (1.3f64 * 1.3)).exp();
            assert!((alpha_mu_cdf(r, &p).unwrap() - want).abs() < 1e-13);
        }
        assert!(alpha_mu_cdf(-1.0, &p).is_err());
    }

    #[test]
    fn pdf_normalises_and_integrates_to_cdf() {
        let spec = QuadratureSpec::default();
        for &alpha in &[0.5, 1.0, 2.7] {
            for &mu in &[0.6, 1.0, 3.2] {
                let p = AlphaMuParams::new(alpha, mu, 1.0).unwrap();
                let f = |r: f64| alpha_mu_pdf(r, &p).unwrap();
                // Split at r̂ so the integrable singularity at 0 sits on an endpoint.
                let mass = integrate(f, 0.0, 1.0, &spec).unwrap() + integrate(f, 1.0, 10.0, &spec).unwrap();
                let tail = 1.0 - alpha_mu_cdf(10.0, &p).unwrap();
                assert!((mass + tail - 1.0).abs() < 1e-8, "alpha={alpha} mu={mu}: {mass}");
                if alpha * mu >= 1.0 {
                    assert!((mass - 1.0).abs() < 1e-8 + tail);
                }
                for &r in &[0.3, 1.0, 2.0] {
                    let part = integrate(f, 0.0, r, &spec).unwrap();
                    assert!((part - alpha_mu_cdf(r, &p).unwrap()).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn moment_identities() {
        let p = AlphaMuParams::new(2.3, 1.7, 0.8).unwrap();
        let m = alpha_mu_moment(p.alpha, &p).unwrap();
        assert!((m - p.r_hat.powf(p.alpha)).abs() < 1e-13);
        let ray = AlphaMuParams::new(2.0, 1.0, 1.0).unwrap();
        assert!((alpha_mu_moment(2.0, &ray).unwrap() - 1.0).abs() < 1e-14);
        assert!(alpha_mu_moment(-5.0, &AlphaMuParams::new(1.0, 2.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn moments_match_sampled_mean() {
        let p = AlphaMuParams::new(1.6, 2.2, 0.7).unwrap();
        let gamma = Gamma::new(p.mu, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        for k in [1.0, 2.0, 4.0] {
            let draws: Vec<f64> = (0..n)
                .map(|_| {
                    let g: f64 = gamma.sample(&mut rng);
                    (p.r_hat * (g / p.mu).powf(1.0 / p.alpha)).powf(k)
                })
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            let want = alpha_mu_moment(k, &p).unwrap();
            assert!((mean - want).abs() < 3.0 * se, "k={k}: {mean} vs {want} (se {se})");
        }
    }

    #[test]
    fn fit_round_trip() {
        let p = AlphaMuParams::new(2.5, 1.8, 0.9).unwrap();
        let fit = fit_alpha_mu(&moments_of(&p)).unwrap();
        assert!((fit.alpha / p.alpha - 1.0).abs() < 1e-6);
        assert!((fit.mu / p.mu - 1.0).abs() < 1e-6);
        assert!((fit.r_hat / p.r_hat - 1.0).abs() < 1e-6);
    }

    #[test]
    fn fit_round_trip_grid() {
        for i in 0..5 {
            for j in 0..5 {
                let alpha = 0.7 * (6.0f64 / 0.7).powf(i as f64 / 4.0);
                let mu = 0.5 * 16f64.powf(j as f64 / 4.0);
                let p = AlphaMuParams::new(alpha, mu, 1.0 + 0.1 * i as f64).unwrap();
                let moments = moments_of(&p);
                let fit = fit_alpha_mu(&moments).unwrap();
                for (got, want) in [(fit.alpha, alpha), (fit.mu, mu), (fit.r_hat, p.r_hat)] {
                    assert!((got / want - 1.0).abs() < 1e-6, "{p:?} -> {fit:?}");
                }
                assert!(fit.moment_residuals(&moments).iter().all(|r| r.abs() < FIT_TOLERANCE));
            }
        }
    }

    #[test]
    fn fit_rejects_infeasible_ratios() {
        assert!(matches!(fit_alpha_mu(&MomentSet { m1: 1.0, m2: 1.0, m4: 1.0 }), Err(Error::Domain(_))));
        assert!(fit_alpha_mu(&MomentSet { m1: 1.0, m2: 0.5, m4: 2.0 }).is_err());
    }

    #[test]
    fn fit_near_deterministic_input_is_flagged_or_sharp() {
        let m1 = 2.0;
        let m2 = m1 * m1 * (1.0 + 1e-9);
        let m4 = m2 * m2 * (1.0 + 4e-9);
        match fit_alpha_mu(&MomentSet { m1, m2, m4 }) {
            Ok(p) => {
                // Either shape may run off to infinity; what matters is a
                // law concentrated at m1 with the requested moments.
                for (k, m) in [(1.0, m1), (2.0, m2), (4.0, m4)] {
                    assert!((alpha_mu_moment(k, &p).unwrap() / m - 1.0).abs() < 1e-6, "{p:?}");
                }
                assert!(alpha_mu_cdf(0.999 * m1, &p).unwrap() < 1e-3);
                assert!(alpha_mu_cdf(1.001 * m1, &p).unwrap() > 1.0 - 1e-3);
            }
            Err(Error::Estimation { best_residual }) => assert!(best_residual.is_finite()),
            Err(other) => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn outage_limits() {
        let p = AlphaMuParams::new(2.0, 3.0, 1.0).unwrap();
        assert!(outage_probability(1e-12, 1.0, &p).unwrap() < 1e-30);
        assert!((outage_probability(1e6, 1.0, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(outage_probability(0.0, 1.0, &p).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fit_is_scale_equivariant(
            alpha in 0.8f64..5.0,
            mu in 0.6f64..6.0,
            scale in 1e-6f64..1e6,
        ) {
            let p = AlphaMuParams::new(alpha, mu, 1.0).unwrap();
            let base = moments_of(&p);
            let scaled = MomentSet { m1: base.m1 * scale, m2: base.m2 * scale.powi(2), m4: base.m4 * scale.powi(4) };
            let a = fit_alpha_mu(&base).unwrap();
            let b = fit_alpha_mu(&scaled).unwrap();
            prop_assert!((a.alpha / b.alpha - 1.0).abs() < 1e-6);
            prop_assert!((a.mu / b.mu - 1.0).abs() < 1e-6);
            prop_assert!((b.r_hat / (a.r_hat * scale) - 1.0).abs() < 1e-6);
        }

        #[test]
        fn cdf_is_monotone_in_unit_interval(
            alpha in 0.3f64..6.0,
            mu in 0.3f64..8.0,
            mut rs in proptest::collection::vec(0.0f64..5.0, 2..20),
        ) {
            let p = AlphaMuParams::new(alpha, mu, 1.0).unwrap();
            rs.sort_by(f64::total_cmp);
            let mut last = 0.0;
            for r in rs {
                let v = alpha_mu_cdf(r, &p).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
                prop_assert!(v >= last);
                last = v;
            }
        }
    }
}
