use crate::error::{domain, Error, Result};

/// Tolerances and budget for adaptive Gauss-Kronrod integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { relative_tolerance: 1e-10, absolute_tolerance: 1e-14, max_subdivisions: 2000 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0) || !(self.absolute_tolerance > 0.0) {
            return Err(domain("quadrature tolerances must be strictly positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(domain("max_subdivisions must be at least 1"));
        }
        Ok(())
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

// 7-point Gauss / 15-point Kronrod pair with the QUADPACK error rescaling.
fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let res_abs = abs_sum * half.abs();
    let res_asc = asc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}

/// Adaptive 15-point Gauss-Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    if !a.is_finite() || !b.is_finite() {
        return Err(domain("integrate requires finite bounds; use integrate_semi_infinite"));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![gauss_kronrod_15(&f, a, b)];
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(domain("integrand produced a non-finite value"));
        }
        let tolerance = spec.absolute_tolerance.max(spec.relative_tolerance * value.abs());
        if error <= tolerance {
            return Ok(value);
        }
        let exhausted = Error::Quadrature { estimate: value, error_bound: error, subdivisions: segments.len() };
        if segments.len() >= spec.max_subdivisions {
            return Err(exhausted);
        }
        let worst = segments.iter().enumerate().max_by(|x, y| x.1.error.total_cmp(&y.1.error)).map(|(i, _)| i).unwrap();
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            return Err(exhausted);
        }
        segments.push(gauss_kronrod_15(&f, seg.a, mid));
        segments.push(gauss_kronrod_15(&f, mid, seg.b));
    }
}

/// Integral of `f` over `[0, ∞)` through the map `x = (1 - t) / t`.
///
/// The integrand should be of order one near `x ≈ 1`; callers rescale
/// their variable first when the mass sits far from that scale.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    let mapped = |t: f64| {
        let x = (1.0 - t) / t;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (t * t)
        }
    };
    integrate(mapped, 0.0, 1.0, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::bessel_i0_scaled;

    #[test]
    fn kronrod_weights_are_consistent() {
        let k: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        let g: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
        // Kronrod rule is exact for degree 22 polynomials.
        let seg = gauss_kronrod_15(&|x: f64| x.powi(22), -1.0, 1.0);
        assert!((seg.value - 2.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn semi_infinite_elementary() {
        let spec = QuadratureSpec::default();
        let v = integrate_semi_infinite(|x| (-x).exp(), &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate_semi_infinite(|x| x * (-x * x).exp(), &spec).unwrap();
        assert!((v - 0.5).abs() < 1e-10);
        let v = integrate_semi_infinite(|x| (-x * x).exp(), &spec).unwrap();
        assert!((v - 0.886_226_925_452_758).abs() < 1e-10);
    }

    #[test]
    fn gaussian_half_integral_matches_series() {
        // π from Machin's arctangent series.
        let pi = 16.0 * machin_atan(1.0 / 5.0) - 4.0 * machin_atan(1.0 / 239.0);
        let spec = QuadratureSpec::default();
        let v = integrate_semi_infinite(|x| (-x * x).exp(), &spec).unwrap();
        assert!((v - 0.5 * pi.sqrt()).abs() < 1e-10);
    }

    fn machin_atan(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut power = x;
        for k in 0..30 {
            sum += if k % 2 == 0 { power } else { -power } / (2 * k + 1) as f64;
            power *= x * x;
        }
        sum
    }

    #[test]
    fn bessel_kernel_with_zero_k() {
        let spec = QuadratureSpec::default();
        for &c in &[0.3, 1.0, 4.0] {
            let v =
                integrate_semi_infinite(|x| x * (-c * x * x).exp() * bessel_i0_scaled(0.0).unwrap(), &spec).unwrap();
            assert!((v - 0.5 / c).abs() < 1e-10 * (0.5 / c));
        }
    }

    #[test]
    fn exhausted_budget_reports_estimate() {
        let spec = QuadratureSpec { max_subdivisions: 2, ..QuadratureSpec::default() };
        let err = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, &spec).unwrap_err();
        match err {
            Error::Quadrature { estimate, error_bound, subdivisions } => {
                assert!(estimate.is_finite());
                assert!(error_bound > 0.0);
                assert_eq!(subdivisions, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = QuadratureSpec { relative_tolerance: 0.0, ..QuadratureSpec::default() };
        assert!(integrate(|x| x, 0.0, 1.0, &spec).is_err());
    }
}
