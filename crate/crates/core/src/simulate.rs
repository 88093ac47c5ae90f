//! Monte Carlo estimates of the moments and outage of `S = Σ U_i Z_i`,
//! plus the single-beacon baseline.
//!
//! Samples are generated in fixed blocks of [`BLOCK_SIZE`]. Block `b` draws
//! from a ChaCha8 stream selected by `b`, and partial sums are merged in
//! block order, so results depend only on the seed and sample count and
//! never on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::channel_moments::TurbulenceParams;
use crate::error::{domain, Error, Result};
use crate::geometry::{CcrLayout, Position};
use crate::numerics::NeumaierSum;
use crate::pointing::PointingModel;

/// Samples per independently seeded block.
pub const BLOCK_SIZE: u64 = 1 << 16;

// Distinguishes the baseline stream from the CCR stream for the same seed.
const BASELINE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// One correlated uplink/downlink Gamma pair with unit means.
///
/// Draws `G ~ Gamma(a, 1)`, then `N ~ Poisson(G ρ/(1-ρ))`, then two
/// independent `Gamma(a + N, 1 - ρ)` variables scaled by `1/a`. Both
/// marginals are `Gamma(a, 1/a)`, the correlation is ρ and the joint moments
/// are those of the bivariate gamma law used for `E[U^n]`.
#[derive(Debug, Clone)]
pub struct CorrelatedGammaPair {
    shape: f64,
    rho: f64,
    mixing: Gamma<f64>,
}

impl CorrelatedGammaPair {
    pub fn new(shape: f64, rho: f64) -> Result<Self> {
        if !(shape > 0.0) || !(0.0..1.0).contains(&rho) {
            return Err(domain(format!("invalid correlated gamma pair ({shape}, {rho})")));
        }
        let mixing = Gamma::new(shape, 1.0).map_err(|e| domain(e.to_string()))?;
        Ok(Self { shape, rho, mixing })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let scale = 1.0 - self.rho;
        let n = if self.rho > 0.0 {
            let lambda = self.mixing.sample(rng) * self.rho / scale;
            if lambda > 0.0 {
                Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(0.0)
            } else {
                0.0
            }
        } else {
            0.0
        };
        let g = Gamma::new(self.shape + n, scale).expect("shape and scale are positive");
        (g.sample(rng) / self.shape, g.sample(rng) / self.shape)
    }
}

/// Sampler for the uplink and downlink Gamma-Gamma fading `(X, Y)`.
#[derive(Debug, Clone)]
pub struct FadingSampler {
    large: CorrelatedGammaPair,
    small: CorrelatedGammaPair,
}

impl FadingSampler {
    pub fn new(params: &TurbulenceParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            large: CorrelatedGammaPair::new(params.alpha, params.rho_alpha)?,
            small: CorrelatedGammaPair::new(params.beta, params.rho_beta)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let (xa, ya) = self.large.sample(rng);
        let (xb, yb) = self.small.sample(rng);
        (xa * xb, ya * yb)
    }
}

/// Draws one `(X, Y)` pair of correlated Gamma-Gamma fading.
pub fn sample_correlated_gg<R: Rng + ?Sized>(params: &TurbulenceParams, rng: &mut R) -> Result<(f64, f64)> {
    Ok(FadingSampler::new(params)?.sample(rng))
}

/// Draws one jitter vector `d ~ N(0, σ_s² I₂)`.
pub fn sample_jitter<R: Rng + ?Sized>(sigma_s: f64, rng: &mut R) -> Position {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    Position::new(sigma_s * dx, sigma_s * dy)
}

/// Pointing losses of every CCR for one shared jitter realization.
pub fn sample_pointing<R: Rng + ?Sized>(layout: &CcrLayout, model: &PointingModel, rng: &mut R, out: &mut Vec<f64>) {
    let d = sample_jitter(model.sigma_s, rng);
    out.clear();
    out.extend(layout.positions().iter().map(|s| {
        let (rx, ry) = (s.x + d.x, s.y + d.y);
        model.loss_at(rx * rx + ry * ry)
    }));
}

/// Inputs of a Monte Carlo run over the CCR system.
#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool choose.
    pub workers: usize,
    pub layout: CcrLayout,
    pub turbulence: TurbulenceParams,
    pub pointing: PointingModel,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        self.turbulence.validate()
    }
}

/// Sample moments of S with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMoments {
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
    pub se1: f64,
    pub se2: f64,
    pub se4: f64,
}

impl EmpiricalMoments {
    /// `(mean, standard error)` for order 1, 2 or 4.
    pub fn get(&self, order: usize) -> Option<(f64, f64)> {
        match order {
            1 => Some((self.m1, self.se1)),
            2 => Some((self.m2, self.se2)),
            4 => Some((self.m4, self.se4)),
            _ => None,
        }
    }
}

/// Fraction of samples below a threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub count: u64,
    pub probability: f64,
    /// Binomial standard error, with the count floored at one so an empty
    /// tail still reports the resolution of the run.
    pub standard_error: f64,
}

impl OutageEstimate {
    fn from_count(count: u64, samples: u64) -> Self {
        let n = samples as f64;
        let p = count as f64 / n;
        let p_floor = count.max(1) as f64 / n;
        Self { count, probability: p, standard_error: (p_floor * (1.0 - p).max(1.0 / n) / n).sqrt() }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub samples: u64,
    pub moments: EmpiricalMoments,
    /// One estimate per requested threshold, in the order given.
    pub outage: Vec<OutageEstimate>,
}

// Counts samples strictly below each threshold in one pass: every sample
// lands in the bin of the first sorted threshold above it, and a prefix sum
// turns bins into counts.
struct ThresholdCounter {
    sorted: Vec<f64>,
    order: Vec<usize>,
}

impl ThresholdCounter {
    fn new(thresholds: &[f64]) -> Result<Self> {
        if thresholds.iter().any(|t| t.is_nan()) {
            return Err(domain("outage thresholds must not be NaN"));
        }
        let mut order: Vec<usize> = (0..thresholds.len()).collect();
        order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
        let sorted = order.iter().map(|&i| thresholds[i]).collect();
        Ok(Self { sorted, order })
    }

    #[inline]
    fn bin(&self, value: f64) -> usize {
        self.sorted.partition_point(|&t| t <= value)
    }

    fn finish(&self, bins: &[u64], samples: u64) -> Vec<OutageEstimate> {
        let mut out = vec![OutageEstimate::from_count(0, samples); self.sorted.len()];
        let mut running = 0;
        for (j, &original) in self.order.iter().enumerate() {
            running += bins[j];
            out[original] = OutageEstimate::from_count(running, samples);
        }
        out
    }
}

struct BlockSums {
    powers: [NeumaierSum; 4],
    bins: Vec<u64>,
}

impl BlockSums {
    fn new(bins: usize) -> Self {
        Self { powers: Default::default(), bins: vec![0; bins + 1] }
    }

    fn merge(&mut self, other: &BlockSums) {
        for (a, b) in self.powers.iter_mut().zip(&other.powers) {
            a.merge(b);
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

fn run_blocks<F>(samples: u64, workers: usize, bins: usize, block: F) -> Result<BlockSums>
where
    F: Fn(u64, u64, &mut BlockSums) + Sync,
{
    let blocks = samples.div_ceil(BLOCK_SIZE);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let partials: Vec<BlockSums> = pool.install(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let len = BLOCK_SIZE.min(samples - b * BLOCK_SIZE);
                let mut sums = BlockSums::new(bins);
                block(b, len, &mut sums);
                sums
            })
            .collect()
    });
    let mut total = BlockSums::new(bins);
    for p in &partials {
        total.merge(p);
    }
    Ok(total)
}

fn moments_from(powers: &[NeumaierSum; 4], samples: u64) -> EmpiricalMoments {
    let n = samples as f64;
    let [s1, s2, s4, s8] = powers.each_ref().map(|s| s.value() / n);
    let se = |mean: f64, square: f64| ((square - mean * mean).max(0.0) / n).sqrt();
    EmpiricalMoments { m1: s1, m2: s2, m4: s4, se1: se(s1, s2), se2: se(s2, s4), se4: se(s4, s8) }
}

/// Runs the CCR system and reports moments of S and `Prob[S < t]` for every
/// threshold `t` on the normalised power scale.
pub fn simulate(plan: &SimulationPlan, thresholds: &[f64]) -> Result<SimulationReport> {
    plan.validate()?;
    let counter = ThresholdCounter::new(thresholds)?;
    let fading = FadingSampler::new(&plan.turbulence)?;
    let totals = run_blocks(plan.samples, plan.workers, thresholds.len(), |b, len, sums| {
        let mut rng = block_rng(plan.seed, b);
        let mut z = Vec::with_capacity(plan.layout.len());
        for _ in 0..len {
            sample_pointing(&plan.layout, &plan.pointing, &mut rng, &mut z);
            let s: f64 = z
                .iter()
                .map(|zi| {
                    let (x, y) = fading.sample(&mut rng);
                    x * y * zi
                })
                .sum();
            let s2 = s * s;
            let s4 = s2 * s2;
            sums.powers[0].add(s);
            sums.powers[1].add(s2);
            sums.powers[2].add(s4);
            sums.powers[3].add(s4 * s4);
            sums.bins[counter.bin(s)] += 1;
        }
    })?;
    Ok(SimulationReport {
        samples: plan.samples,
        moments: moments_from(&totals.powers, plan.samples),
        outage: counter.finish(&totals.bins, plan.samples),
    })
}

/// Moments of S and the outage at a single normalised threshold.
pub fn simulate_outage(plan: &SimulationPlan, threshold: f64) -> Result<(EmpiricalMoments, OutageEstimate)> {
    let report = simulate(plan, &[threshold])?;
    Ok((report.moments, report.outage[0]))
}

/// A single downlink beacon with Gamma-Gamma fading and zero-boresight
/// jitter, `B = h_a · A₀' exp(-2|d|²/w'²)`.
#[derive(Debug, Clone)]
pub struct BaselinePlan {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub turbulence: TurbulenceParams,
    pub sigma_s: f64,
    /// Beacon footprint beamwidth w'.
    pub beamwidth: f64,
    /// Peak pointing gain `A₀' = 2 a_rx² / w'²`.
    pub a0: f64,
}

/// `Prob[B < t]` for each threshold `t`; a received-power threshold maps to
/// `t = P_th / (G_rx e^{-σz} P_T)`.
pub fn conventional_outage(plan: &BaselinePlan, thresholds: &[f64]) -> Result<Vec<OutageEstimate>> {
    if plan.samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    plan.turbulence.validate()?;
    let model = PointingModel::new(plan.beamwidth, plan.sigma_s, plan.a0)?;
    let counter = ThresholdCounter::new(thresholds)?;
    let large = Gamma::new(plan.turbulence.alpha, 1.0 / plan.turbulence.alpha).map_err(|e| domain(e.to_string()))?;
    let small = Gamma::new(plan.turbulence.beta, 1.0 / plan.turbulence.beta).map_err(|e| domain(e.to_string()))?;
    let totals = run_blocks(plan.samples, plan.workers, thresholds.len(), |b, len, sums| {
        let mut rng = block_rng(plan.seed ^ BASELINE_SALT, b);
        for _ in 0..len {
            let d = sample_jitter(model.sigma_s, &mut rng);
            let h_p = model.loss_at(d.x * d.x + d.y * d.y);
            let h_a = large.sample(&mut rng) * small.sample(&mut rng);
            sums.bins[counter.bin(h_a * h_p)] += 1;
        }
    })?;
    Ok(counter.finish(&totals.bins, plan.samples))
}
