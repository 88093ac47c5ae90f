use crate::error::{domain, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_406;

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural logarithm of the Gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("ln_gamma requires a finite positive argument, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the Lanczos sum in its accurate range.
        return ln_gamma_unchecked(x + 1.0) - x.ln();
    }
    let x = x - 1.0;
    let mut series = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + series.ln()
}

/// `ln Γ(x + a) - ln Γ(x) - a ln x` for `x > 0`, `a >= 0`.
///
/// Differences of log-gammas at large arguments lose most of their digits
/// to cancellation; here the leading `a ln x` is removed analytically and
/// the rest comes from differenced Stirling series, so second differences
/// in `a` stay accurate even when `x` is in the thousands.
pub(crate) fn ln_gamma_shift(x: f64, a: f64) -> f64 {
    const STIRLING_FLOOR: f64 = 10.0;
    if x < STIRLING_FLOOR {
        let n = (STIRLING_FLOOR - x).ceil();
        let mut acc = ln_gamma_shift(x + n, a) + a * (n / x).ln_1p();
        for k in 0..n as usize {
            acc -= (a / (x + k as f64)).ln_1p();
        }
        return acc;
    }
    // 1/(12y) - 1/(360y³) + 1/(1260y⁵) - 1/(1680y⁷) + 1/(1188y⁹)
    let tail = |y: f64| {
        let r = 1.0 / (y * y);
        (1.0 / 12.0 + r * (-1.0 / 360.0 + r * (1.0 / 1260.0 + r * (-1.0 / 1680.0 + r / 1188.0)))) / y
    };
    (x + a - 0.5) * (a / x).ln_1p() - a + tail(x + a) - tail(x)
}

const MAX_GAMMA_ITER: usize = 1_000_000;
const FPMIN: f64 = 1e-300;

/// Regularised lower incomplete gamma function `P(a, x) = γ(a, x) / Γ(a)`,
/// with `γ(a, x) = ∫₀ˣ t^{a-1} e^{-t} dt`.
pub fn reg_lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(format!("incomplete gamma requires a > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let ln_prefix = a * x.ln() - x - ln_gamma_unchecked(a);
    if x < a + 1.0 {
        let series = lower_series(a, x)?;
        Ok((ln_prefix.exp() * series).min(1.0))
    } else {
        let fraction = upper_continued_fraction(a, x)?;
        Ok((1.0 - ln_prefix.exp() * fraction).clamp(0.0, 1.0))
    }
}

fn lower_series(a: f64, x: f64) -> Result<f64> {
    let mut denom = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_GAMMA_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * f64::EPSILON * 0.5 {
            return Ok(sum);
        }
    }
    Err(Error::Series { what: "lower incomplete gamma series", iterations: MAX_GAMMA_ITER })
}

// Modified Lentz evaluation of the continued fraction for Γ(a, x) e^x x^{-a}.
fn upper_continued_fraction(a: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_GAMMA_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            return Ok(h);
        }
    }
    Err(Error::Series { what: "upper incomplete gamma continued fraction", iterations: MAX_GAMMA_ITER })
}

// Below this the power series is summed directly; above it the asymptotic
// expansion's smallest term is below e^{-2x} and the series is cut there.
const I0_SERIES_LIMIT: f64 = 20.0;

/// Exponentially scaled modified Bessel function `e^{-x} I₀(x)` for `x ≥ 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(domain(format!("bessel_i0_scaled requires x >= 0, got {x}")));
    }
    Ok(bessel_i0_scaled_unchecked(x))
}

pub(crate) fn bessel_i0_scaled_unchecked(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    if x <= I0_SERIES_LIMIT {
        let q = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k: f64 = 0.0;
        loop {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        (-x).exp() * sum
    } else {
        // e^{-x} I₀(x) ~ (2πx)^{-1/2} Σ_k ((2k-1)!!)² / (k! (8x)^k)
        let inv8x = 1.0 / (8.0 * x);
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k: f64 = 0.0;
        loop {
            k += 1.0;
            let next = term * (2.0 * k - 1.0).powi(2) * inv8x / k;
            if next >= term || next < sum * 1e-17 {
                if next < term {
                    sum += next;
                }
                break;
            }
            term = next;
            sum += term;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// Terminating Gauss hypergeometric series `₂F₁(-n, -n; a; ρ)`.
pub fn hyp2f1_neg_int(n: u32, a: f64, rho: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(format!("hyp2f1_neg_int requires a > 0, got {a}")));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(format!("hyp2f1_neg_int requires 0 <= rho < 1, got {rho}")));
    }
    let n = n as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    while k < n {
        term *= (n - k) * (n - k) / ((a + k) * (k + 1.0)) * rho;
        sum += term;
        k += 1.0;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate, QuadratureSpec};

    #[test]
    #[allow(clippy::excessive_precision)]
    fn ln_gamma_shift_matches_references() {
        for &(x, a) in &[(3.5, 0.5), (12.0, 2.25), (0.7, 3.0), (25.0, 0.0)] {
            let direct = ln_gamma_unchecked(x + a) - ln_gamma_unchecked(x) - a * f64::ln(x);
            assert!((ln_gamma_shift(x, a) - direct).abs() < 1e-13, "{x} {a}");
        }
        // 40-digit references.
        assert!((ln_gamma_shift(5000.0, 20.0) / 0.037_950_696_042_183_176 - 1.0).abs() < 1e-13);
        assert!((ln_gamma_shift(3369.5, 19.6) / 0.053_995_119_254_612_080 - 1.0).abs() < 1e-13);
        assert!((ln_gamma_shift(0.3, 40.0) / 154.798_908_957_954_25 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_shift_composes() {
        // Γ(x+a+b)/Γ(x) = Γ(x+b+a)/Γ(x+b) · Γ(x+b)/Γ(x).
        for &(x, a, b) in &[(0.4, 1.3, 7.0), (50.0, 3.0, 0.25), (2000.0, 40.0, 11.0)] {
            let whole = ln_gamma_shift(x, a + b);
            let parts = ln_gamma_shift(x + b, a) + ln_gamma_shift(x, b) + a * (b / x).ln_1p();
            assert!((whole - parts).abs() < 1e-13 * whole.abs().max(1.0), "{x} {a} {b}");
        }
    }

    // Stirling series after shifting the argument above 30.
    fn ln_gamma_stirling(x: f64) -> f64 {
        let mut z = x;
        let mut shift = 0.0;
        while z < 30.0 {
            shift += z.ln();
            z += 1.0;
        }
        let bernoulli = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0];
        let mut tail = 0.0;
        for (i, b) in bernoulli.iter().enumerate() {
            let k = (i + 1) as f64;
            tail += b / (2.0 * k * (2.0 * k - 1.0) * z.powf(2.0 * k - 1.0));
        }
        (z - 0.5) * z.ln() - z + LN_SQRT_2PI + tail - shift
    }

    fn i0_scaled_integral(x: f64) -> f64 {
        // e^{-x} I₀(x) = (1/π) ∫₀^π e^{x(cos θ - 1)} dθ, periodic trapezoid.
        let n = 4000;
        let h = std::f64::consts::PI / n as f64;
        let mut acc = 0.5 * (1.0 + (-2.0 * x).exp());
        for k in 1..n {
            acc += (x * ((k as f64 * h).cos() - 1.0)).exp();
        }
        acc * h / std::f64::consts::PI
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(ln_gamma(2.0).unwrap().abs() < 1e-15);
        let half = ln_gamma(0.5).unwrap();
        assert!((half - 0.572_364_942_924_700_1).abs() < 1e-15);
        assert!((ln_gamma(0.5).unwrap() - std::f64::consts::PI.sqrt().ln()).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_matches_stirling_oracle() {
        for &x in &[17.1, 0.01, 0.3, 0.9, 1.5, 3.7, 4.0, 16.0, 21.1, 55.5, 123.4, 1e4] {
            let got = ln_gamma(x).unwrap();
            let want = ln_gamma_stirling(x);
            let tol = 1e-13 * want.abs().max(1.0);
            assert!((got - want).abs() < tol, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn ln_gamma_rejects_bad_domain() {
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-1.0).is_err());
        assert!(ln_gamma(f64::NAN).is_err());
        assert!(ln_gamma(f64::INFINITY).is_err());
    }

    #[test]
    fn incomplete_gamma_exponential_cdf() {
        let p = reg_lower_incomplete_gamma(1.0, 1.0).unwrap();
        assert!((p - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(reg_lower_incomplete_gamma(2.5, 0.0).unwrap(), 0.0);
        assert_eq!(reg_lower_incomplete_gamma(2.5, f64::INFINITY).unwrap(), 1.0);
        assert!(reg_lower_incomplete_gamma(0.0, 1.0).is_err());
        assert!(reg_lower_incomplete_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn incomplete_gamma_matches_quadrature() {
        let spec = QuadratureSpec { relative_tolerance: 1e-13, absolute_tolerance: 1e-300, max_subdivisions: 4000 };
        for &(a, x) in &[(2.5, 3.7), (0.3, 0.2), (0.7, 5.0), (4.0, 1.0), (17.1, 20.0), (1.9, 9.0)] {
            // t = u^{1/a} removes the t^{a-1} endpoint singularity.
            let upper = f64::powf(x, a);
            let integral = integrate(|u: f64| (-u.powf(1.0 / a)).exp(), 0.0, upper, &spec).unwrap();
            let want = integral / a / ln_gamma(a).unwrap().exp();
            let got = reg_lower_incomplete_gamma(a, x).unwrap();
            assert!((got - want).abs() < 1e-12 * want, "a={a}, x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn bessel_small_and_large() {
        assert_eq!(bessel_i0_scaled(0.0).unwrap(), 1.0);
        let one = bessel_i0_scaled(1.0).unwrap();
        let mut series = 0.0;
        let mut term = 1.0;
        for k in 1..30 {
            series += term;
            term *= 0.25 / (k * k) as f64;
        }
        let oracle = (-1.0f64).exp() * series;
        assert!((one - oracle).abs() < 1e-15);
        assert!((one - 0.465_759_607_59).abs() < 1e-11);
        let x = 700.0;
        let asym = (1.0 + 1.0 / (8.0 * x) + 9.0 / (128.0 * x * x)) / (2.0 * std::f64::consts::PI * x).sqrt();
        let got = bessel_i0_scaled(x).unwrap();
        assert!(got.is_finite());
        assert!((got - asym).abs() < 1e-9 * asym);
        assert!(bessel_i0_scaled(-0.1).is_err());
    }

    #[test]
    fn bessel_matches_integral_representation() {
        let mut x = 0.0;
        while x <= 40.0 {
            let got = bessel_i0_scaled(x).unwrap();
            let want = i0_scaled_integral(x);
            assert!((got - want).abs() < 1e-13 * want, "x={x}: {got} vs {want}");
            x += 0.37;
        }
    }

    #[test]
    fn hyp2f1_hand_values() {
        assert_eq!(hyp2f1_neg_int(3, 5.0, 0.0).unwrap(), 1.0);
        let one = hyp2f1_neg_int(1, 17.1, 0.7).unwrap();
        assert!((one - (1.0 + 0.7 / 17.1)).abs() < 1e-15);
        let two = hyp2f1_neg_int(2, 1.9, 0.7).unwrap();
        let want = 1.0 + 4.0 * 0.7 / 1.9 + 2.0 * 0.49 / (1.9 * 2.9);
        assert!((two - want).abs() < 1e-14);
        assert!((two - 2.651_542_65).abs() < 1e-8);
        assert!(hyp2f1_neg_int(2, 1.0, 1.0).is_err());
        assert!(hyp2f1_neg_int(2, 0.0, 0.5).is_err());
    }
}
