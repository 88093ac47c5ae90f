//! Link budget constants, beam parameters and CCR placement on the
//! beam-footprint plane.
//!
//! The footprint plane has the communication telescope at its origin. All
//! lengths are in metres, powers in watts and angles in radians.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{domain, Error, Result};

/// Smallest admissible distance between two CCRs, or between a CCR and the
/// telescope at the origin.
pub const MIN_CCR_SPACING: f64 = SQRT_2;

/// Default optical wavelength (1550 nm band).
pub const DEFAULT_WAVELENGTH: f64 = 1550e-9;

// Relative slack on spacing checks so that, e.g., a hexagon of radius √2
// (chord exactly √2) is not rejected by rounding.
const SPACING_SLACK: f64 = 1e-12;

/// How atmospheric extinction is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attenuation {
    /// Meteorological visibility in metres, converted with the Kim model.
    Visibility(f64),
    /// Extinction coefficient σ in 1/m.
    Coefficient(f64),
}

/// How the uplink beam size at range is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamSpec {
    /// Uplink divergence angle θ_GS; the footprint beamwidth is `z·θ_GS`.
    Divergence(f64),
    /// Beamwidth `w` directly at the footprint plane.
    Width(f64),
}

/// Physical parameters of the ground-station to CCR link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Propagation distance z.
    pub z: f64,
    pub wavelength: f64,
    /// Ground-station telescope radius a_GS.
    pub a_gs: f64,
    /// Effective CCR radius a_Re.
    pub a_re: f64,
    pub attenuation: Attenuation,
    pub beam: BeamSpec,
    /// Jitter standard deviation σ_s on the footprint plane.
    pub sigma_s: f64,
    /// Reflection efficiency ρ in (0, 1].
    pub rho_refl: f64,
    /// Ground-station transmit power P_GS.
    pub p_gs: f64,
    /// Optical threshold power P_th.
    pub p_th: f64,
}

impl LinkGeometry {
    /// The common parameter set used throughout the numerical study:
    /// 5 km link, 10 km visibility, 10 cm telescope, 5 cm CCRs, ρ = 0.5,
    /// 10 nW threshold, 1550 nm. Beamwidth, jitter and transmit power are
    /// scenario dependent; here w = 10 m, σ_s = 1 m, P_GS = 1 W.
    pub fn reference() -> Self {
        Self {
            z: 5_000.0,
            wavelength: DEFAULT_WAVELENGTH,
            a_gs: 0.10,
            a_re: 0.05,
            attenuation: Attenuation::Visibility(10_000.0),
            beam: BeamSpec::Width(10.0),
            sigma_s: 1.0,
            rho_refl: 0.5,
            p_gs: 1.0,
            p_th: 10e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("z", self.z),
            ("lambda", self.wavelength),
            ("a_gs", self.a_gs),
            ("a_re", self.a_re),
            ("p_gs", self.p_gs),
            ("p_th", self.p_th),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        match self.attenuation {
            Attenuation::Visibility(v) if !(v > 0.0) || !v.is_finite() => {
                return Err(Error::Config(format!("visibility must be > 0, got {v}")));
            }
            Attenuation::Coefficient(s) if !(s >= 0.0) || !s.is_finite() => {
                return Err(Error::Config(format!("sigma_atm must be >= 0, got {s}")));
            }
            _ => {}
        }
        let beam = match self.beam {
            BeamSpec::Divergence(t) => t,
            BeamSpec::Width(w) => w,
        };
        if !(beam > 0.0) || !beam.is_finite() {
            return Err(Error::Config(format!("beam size must be > 0, got {beam}")));
        }
        if !(self.sigma_s >= 0.0) || !self.sigma_s.is_finite() {
            return Err(Error::Config(format!("sigma_s must be >= 0, got {}", self.sigma_s)));
        }
        if !(self.rho_refl > 0.0 && self.rho_refl <= 1.0) {
            return Err(Error::Config(format!("rho_refl must lie in (0, 1], got {}", self.rho_refl)));
        }
        Ok(())
    }

    /// Footprint beamwidth w.
    pub fn beamwidth(&self) -> f64 {
        match self.beam {
            BeamSpec::Divergence(theta) => self.z * theta,
            BeamSpec::Width(w) => w,
        }
    }

    /// Extinction coefficient σ in 1/m.
    pub fn attenuation_coefficient(&self) -> Result<f64> {
        match self.attenuation {
            Attenuation::Visibility(v) => attenuation_coefficient(v, self.wavelength),
            Attenuation::Coefficient(s) => Ok(s),
        }
    }

    /// One-way Beer-Lambert transmittance `e^{-σz}`.
    pub fn transmittance(&self) -> Result<f64> {
        Ok((-self.attenuation_coefficient()? * self.z).exp())
    }
}

/// Extinction coefficient from visibility with Kim's size-distribution
/// exponent: `σ = (3.912 / V) (λ / 550 nm)^{-q}`.
pub fn attenuation_coefficient(visibility: f64, wavelength: f64) -> Result<f64> {
    if !(visibility > 0.0) || !visibility.is_finite() {
        return Err(domain(format!("visibility must be > 0, got {visibility}")));
    }
    if !(wavelength > 0.0) || !wavelength.is_finite() {
        return Err(domain(format!("wavelength must be > 0, got {wavelength}")));
    }
    let v_km = visibility / 1_000.0;
    let q = if v_km > 50.0 {
        1.6
    } else if v_km > 6.0 {
        1.3
    } else if v_km > 1.0 {
        0.16 * v_km + 0.34
    } else if v_km > 0.5 {
        v_km - 0.5
    } else {
        0.0
    };
    Ok(3.912 / visibility * (wavelength / 550e-9).powf(-q))
}

/// Constants derived from a [`LinkGeometry`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedBudget {
    /// Link constant scaling S to received power, including ρ and P_GS.
    pub c: f64,
    /// Peak pointing gain A₀ = 2 a_Re² / w².
    pub a0: f64,
    pub w: f64,
    /// Reflected-beam divergence θ_Re = 1.22 λ / a_Re.
    pub theta_re: f64,
    /// Downlink pointing gain g_p = 2 a_GS² / (z θ_Re)².
    pub g_p: f64,
}

impl DerivedBudget {
    /// Outage threshold on the normalised power S, i.e. `P_th / c`.
    pub fn normalized_threshold(&self, p_th: f64) -> f64 {
        p_th / self.c
    }
}

pub fn derive_budget(geom: &LinkGeometry) -> Result<DerivedBudget> {
    geom.validate()?;
    let sigma = geom.attenuation_coefficient()?;
    let w = geom.beamwidth();
    let theta_re = 1.22 * geom.wavelength / geom.a_re;
    let g_p = 2.0 * geom.a_gs.powi(2) / (geom.z * theta_re).powi(2);
    let geometric = 1.34 * geom.a_gs.powi(2) * geom.a_re.powi(2) / (geom.z.powi(2) * geom.wavelength.powi(2));
    let c = geometric * (-2.0 * sigma * geom.z).exp() * geom.rho_refl * geom.p_gs;
    let a0 = 2.0 * geom.a_re.powi(2) / w.powi(2);
    if a0 > 1.0 {
        log::warn!("peak pointing gain A0 = {a0} exceeds 1; beam is not in the far field");
    }
    Ok(DerivedBudget { c, a0, w, theta_re, g_p })
}

/// A point on the footprint plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    /// Boresight offset |s_i|.
    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Azimuth φ_i = arg(s_i).
    pub fn angle(&self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Positions of the M CCRs around the telescope.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrLayout {
    positions: Vec<Position>,
}

impl CcrLayout {
    /// Validates `positions` against a spacing floor that applies between
    /// every pair of CCRs and between each CCR and the origin.
    pub fn new(positions: Vec<Position>, min_spacing: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Config("a layout needs at least one CCR".into()));
        }
        if !(min_spacing >= 0.0) {
            return Err(Error::Config(format!("min_spacing must be >= 0, got {min_spacing}")));
        }
        let floor = min_spacing * (1.0 - SPACING_SLACK);
        for (i, p) in positions.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::Config(format!("CCR {i} has a non-finite position")));
            }
            if p.norm() < floor {
                return Err(Error::Config(format!(
                    "CCR {i} sits {:.4} m from the telescope, below the {min_spacing:.4} m floor",
                    p.norm()
                )));
            }
            for (j, q) in positions.iter().enumerate().skip(i + 1) {
                if p.distance(q) < floor {
                    return Err(Error::Config(format!(
                        "CCRs {i} and {j} are {:.4} m apart, below the {min_spacing:.4} m floor",
                        p.distance(q)
                    )));
                }
            }
        }
        Ok(Self { positions })
    }

    /// `count` CCRs on the x axis at ±spacing, ±2·spacing, …; the origin
    /// cell is left to the telescope and odd counts put the extra CCR on the
    /// positive side.
    pub fn linear(count: usize, spacing: f64) -> Result<Self> {
        Self::new(linear_positions(count, spacing), MIN_CCR_SPACING)
    }

    /// `count` CCRs equally spaced on a circle, the first at angle 0.
    pub fn circular(count: usize, radius: f64) -> Result<Self> {
        Self::new(circular_positions(count, radius), MIN_CCR_SPACING)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Position {
        self.positions[i]
    }
}

pub fn linear_positions(count: usize, spacing: f64) -> Vec<Position> {
    let positive = count.div_ceil(2);
    let negative = count - positive;
    let mut out = Vec::with_capacity(count);
    for k in (1..=negative).rev() {
        out.push(Position::new(-(k as f64) * spacing, 0.0));
    }
    for k in 1..=positive {
        out.push(Position::new(k as f64 * spacing, 0.0));
    }
    out
}

pub fn circular_positions(count: usize, radius: f64) -> Vec<Position> {
    (0..count).map(|i| Position::from_polar(radius, 2.0 * PI * i as f64 / count as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn kim_branches() {
        let sigma = attenuation_coefficient(10_000.0, 1550e-9).unwrap();
        let by_hand = 3.912e-4 * (1550.0f64 / 550.0).powf(-1.3);
        assert!(close(sigma, by_hand, 1e-14));
        assert!(close(sigma, 1.0183e-4, 2e-3));
        let green = attenuation_coefficient(10_000.0, 550e-9).unwrap();
        assert!(close(green, 3.912e-4, 1e-14));
        let clear = attenuation_coefficient(60_000.0, 1550e-9).unwrap();
        assert!(close(clear, 3.912 / 60_000.0 * (1550.0f64 / 550.0).powf(-1.6), 1e-14));
        let hazy = attenuation_coefficient(3_000.0, 1550e-9).unwrap();
        assert!(close(hazy, 3.912 / 3_000.0 * (1550.0f64 / 550.0).powf(-(0.16 * 3.0 + 0.34)), 1e-14));
        let fog = attenuation_coefficient(400.0, 1550e-9).unwrap();
        assert!(close(fog, 3.912 / 400.0, 1e-14));
        assert!(attenuation_coefficient(0.0, 1550e-9).is_err());
    }

    #[test]
    fn budget_reference_values() {
        let geom = LinkGeometry::reference();
        let b = derive_budget(&geom).unwrap();
        assert!(close(b.a0, 5.0e-5, 1e-14));
        let geometric = 1.34 * 0.01 * 0.0025 / (25e6 * 1550e-9f64.powi(2));
        assert!(close(geometric, 0.5578, 1e-3));
        let sigma = attenuation_coefficient(10_000.0, 1550e-9).unwrap();
        let loss = (-2.0 * sigma * 5000.0).exp();
        assert!(close(loss, 0.3614, 2e-3));
        assert!(close(b.c, geometric * loss * 0.5, 1e-14));
        assert!(close(b.c, 0.1008, 3e-3));
        assert!(close(b.theta_re, 1.22 * 1550e-9 / 0.05, 1e-14));
    }

    #[test]
    fn budget_without_attenuation() {
        let geom = LinkGeometry { attenuation: Attenuation::Coefficient(0.0), ..LinkGeometry::reference() };
        let b = derive_budget(&geom).unwrap();
        let geometric = 1.34 * 0.01 * 0.0025 / (25e6 * 1550e-9f64.powi(2));
        assert!(close(b.c, geometric * 0.5, 1e-14));
    }

    #[test]
    fn budget_scaling_properties() {
        let geom = LinkGeometry::reference();
        let base = derive_budget(&geom).unwrap();
        let doubled = derive_budget(&LinkGeometry { a_re: 0.1, ..geom }).unwrap();
        assert!(close(doubled.a0, 4.0 * base.a0, 1e-14));
        assert!(close(doubled.theta_re, 0.5 * base.theta_re, 1e-14));
        assert!(close(doubled.g_p * doubled.theta_re.powi(2), base.g_p * base.theta_re.powi(2), 1e-14));
        let mut last = f64::INFINITY;
        for z in [500.0, 1_000.0, 2_000.0, 5_000.0, 10_000.0] {
            let c = derive_budget(&LinkGeometry { z, ..geom }).unwrap().c;
            assert!(c < last);
            last = c;
        }
    }

    #[test]
    fn divergence_sets_beamwidth() {
        let geom = LinkGeometry { beam: BeamSpec::Divergence(1.7e-3), ..LinkGeometry::reference() };
        assert!(close(geom.beamwidth(), 8.5, 1e-12));
    }

    #[test]
    fn invalid_geometry() {
        let mut geom = LinkGeometry::reference();
        geom.rho_refl = 1.5;
        assert!(matches!(derive_budget(&geom), Err(Error::Config(_))));
        geom = LinkGeometry { sigma_s: -1.0, ..LinkGeometry::reference() };
        assert!(geom.validate().is_err());
    }

    #[test]
    fn layouts() {
        let c4 = CcrLayout::circular(4, SQRT_2).unwrap();
        for (i, p) in c4.positions().iter().enumerate() {
            assert!(close(p.norm(), SQRT_2, 1e-15));
            let want = i as f64 * PI / 2.0;
            let got = p.angle().rem_euclid(2.0 * PI);
            assert!((got - want).abs() < 1e-12);
        }
        let l2 = CcrLayout::linear(2, SQRT_2).unwrap();
        assert_eq!(l2.positions(), &[Position::new(-SQRT_2, 0.0), Position::new(SQRT_2, 0.0)]);
        let c3 = CcrLayout::circular(3, SQRT_2).unwrap();
        let chord = c3.position(0).distance(&c3.position(1));
        assert!(close(chord, 2.0 * SQRT_2 * (PI / 3.0).sin(), 1e-14));
        assert!(close(chord, 2.449, 1e-3));
        let l5 = CcrLayout::linear(5, 2.0).unwrap();
        assert_eq!(l5.positions().iter().filter(|p| p.x > 0.0).count(), 3);
        assert!(CcrLayout::circular(6, SQRT_2).is_ok());
        assert!(CcrLayout::circular(8, SQRT_2).is_err());
        assert!(CcrLayout::linear(2, 1.0).is_err());
        assert!(CcrLayout::linear(0, 2.0).is_err());
    }

    #[test]
    fn layouts_respect_floor() {
        for m in 1..=10 {
            for layout in [CcrLayout::linear(m, 1.5), CcrLayout::circular(m, 3.0)].into_iter().flatten() {
                let pts = layout.positions();
                for (i, p) in pts.iter().enumerate() {
                    assert!(p.norm() >= MIN_CCR_SPACING * (1.0 - 1e-12));
                    for q in &pts[i + 1..] {
                        assert!(p.distance(q) >= MIN_CCR_SPACING * (1.0 - 1e-12));
                    }
                }
            }
        }
    }
}
