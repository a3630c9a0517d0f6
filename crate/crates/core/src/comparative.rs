//! Where does the high-reputation seller stop charging more?
//!
//! The premium `E(p_H) - E(p_L)` increases in the search cost `k` in both
//! games. Each game therefore has at most one threshold where the premium
//! changes sign. The benchmark threshold exists only when
//! `ln((r_H u - c) / ((r_H - r_L) u)) >= 1`. The competition threshold
//! always exists.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::equilibrium::{
    benchmark_distribution_high, competition_distribution_high, expected_prices, EquilibriumError,
    ExpectedPrices,
};
use crate::market::{MarketParams, ModelKind, ParamError, Role};
use crate::roots::bisect;

/// Thresholds are searched on `[EDGE u, (1 - EDGE) u]`.
pub const EDGE: f64 = 1e-9;
/// Bisection stops once the bracket is this narrow.
pub const BRACKET_WIDTH: f64 = 1e-12;
/// Grid used to confirm that the premium changes sign only once.
pub const SIGN_SCAN_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComparativeError {
    #[error("k grid must be ascending and inside (0, u)")]
    BadGrid,
    #[error("need at least {0} grid points")]
    TooFewPoints(usize),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// `ln((r_H u - c) / ((r_H - r_L) u))`; the benchmark threshold exists iff
/// this is at least one.
pub fn existence_condition(p: &MarketParams) -> f64 {
    let gap = p.reputation_gap();
    ((p.reservation_price(Role::High) - p.cost()) / gap).ln()
}

/// `E(p_H) - E(p_L)` at search cost `k`.
pub fn premium_at(p: &MarketParams, model: ModelKind, k: f64) -> Result<f64, ParamError> {
    Ok(expected_prices(&p.with_search_cost(k)?, model).premium())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    pub model: ModelKind,
    /// Search cost at which the premium is zero, if any.
    pub k_star: Option<f64>,
    pub existence_condition_value: f64,
    /// Final bisection bracket.
    pub bracket: Option<(f64, f64)>,
    /// `|E(p_H) - E(p_L)|` at `k_star`.
    pub residual: Option<f64>,
    /// Premium signs at the ends of the searched range.
    pub premium_at_edges: (f64, f64),
}

impl ThresholdResult {
    pub fn exists(&self) -> bool {
        self.k_star.is_some()
    }
}

fn find_threshold_in(
    p: &MarketParams,
    model: ModelKind,
    required: bool,
) -> Result<ThresholdResult, ParamError> {
    let u = p.utility();
    let (lo, hi) = (EDGE * u, (1.0 - EDGE) * u);
    let premium = |k: f64| premium_at(p, model, k).unwrap_or(f64::NAN);
    let edges = (premium(lo), premium(hi));
    let mut result = ThresholdResult {
        model,
        k_star: None,
        existence_condition_value: existence_condition(p),
        bracket: None,
        residual: None,
        premium_at_edges: edges,
    };
    if !required {
        return Ok(result);
    }
    if let Ok(root) = bisect(premium, lo, hi, BRACKET_WIDTH) {
        result.k_star = Some(root.root);
        result.bracket = Some((root.lo, root.hi));
        result.residual = Some(premium_at(p, model, root.root)?.abs());
    }
    Ok(result)
}

/// Benchmark threshold `k1*`; `k` in `p` is ignored.
///
/// Returns no root when the existence condition fails, or when it holds
/// with equality so that the premium only vanishes in the `k -> 0` limit.
pub fn find_threshold_benchmark(p: &MarketParams) -> ThresholdResult {
    let required = existence_condition(p) >= 1.0;
    find_threshold_in(p, ModelKind::Benchmark, required).expect("searched k stays inside (0, u)")
}

/// Competition threshold `k2*`, where `E(p_Hj) = r_L u`; `k` in `p` is ignored.
pub fn find_threshold_competition(p: &MarketParams) -> ThresholdResult {
    find_threshold_in(p, ModelKind::Competition, true).expect("searched k stays inside (0, u)")
}

pub fn find_threshold(p: &MarketParams, model: ModelKind) -> ThresholdResult {
    match model {
        ModelKind::Benchmark => find_threshold_benchmark(p),
        ModelKind::Competition => find_threshold_competition(p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiumPoint {
    pub k: f64,
    pub expected_low: f64,
    pub expected_high: f64,
    pub premium: f64,
    /// -1, 0 or 1.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiumMap {
    pub model: ModelKind,
    pub points: Vec<PremiumPoint>,
}

impl PremiumMap {
    /// Number of strict sign changes along the grid, zeros skipped.
    pub fn sign_changes(&self) -> usize {
        let signs: Vec<i8> = self
            .points
            .iter()
            .map(|q| q.sign)
            .filter(|s| *s != 0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Expected prices and premium along an ascending grid of search costs.
pub fn premium_map(
    p: &MarketParams,
    model: ModelKind,
    k_grid: &[f64],
) -> Result<PremiumMap, ComparativeError> {
    let u = p.utility();
    let ascending = k_grid.windows(2).all(|w| w[0] < w[1]);
    if !ascending || k_grid.iter().any(|k| !(*k > 0.0 && *k < u)) {
        return Err(ComparativeError::BadGrid);
    }
    let points = k_grid
        .iter()
        .map(|k| {
            let e = expected_prices(&p.with_search_cost(*k)?, model);
            Ok(PremiumPoint {
                k: *k,
                expected_low: e.low,
                expected_high: e.high,
                premium: e.premium(),
                sign: sign_of(e.premium()),
            })
        })
        .collect::<Result<Vec<_>, ParamError>>()?;
    Ok(PremiumMap { model, points })
}

/// `points` search costs spread evenly over the open interval `(0, u)`.
pub fn interior_grid(u: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|i| u * i as f64 / (points + 1) as f64)
        .collect()
}

/// How adding a second seller of each reputation moves prices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitionEffect {
    pub benchmark: ExpectedPrices,
    pub competition: ExpectedPrices,
    /// `E(p_Hj) <= E(p_H)`.
    pub high_price_falls: bool,
    /// `r_L u >= E(p_L)`.
    pub low_price_rises: bool,
    /// Largest `F_H(x) - F_Hj(x)` on the common support; at most zero when
    /// the competition law is stochastically lower.
    pub max_cdf_excess: f64,
    pub cdf_ordering_holds: bool,
    pub cdf_points: usize,
}

/// Compares expected prices and high-seller CDFs across the two games.
pub fn competition_effect_report(p: &MarketParams) -> Result<CompetitionEffect, ComparativeError> {
    let benchmark = expected_prices(p, ModelKind::Benchmark);
    let competition = expected_prices(p, ModelKind::Competition);
    let alone = benchmark_distribution_high(p)?;
    let rivals = competition_distribution_high(p)?;
    let lo = alone.lower().max(rivals.lower());
    let hi = alone.upper().min(rivals.upper());
    let cdf_points = 2001;
    let max_cdf_excess = (0..cdf_points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (cdf_points - 1) as f64;
            alone.cdf(x) - rivals.cdf(x)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CompetitionEffect {
        high_price_falls: competition.high <= benchmark.high,
        low_price_rises: competition.low >= benchmark.low,
        cdf_ordering_holds: max_cdf_excess <= 1e-12,
        max_cdf_excess,
        cdf_points,
        benchmark,
        competition,
    })
}

/// Finite-difference slopes of expected prices along `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub model: ModelKind,
    pub points: usize,
    pub tolerance: f64,
    pub min_slope_low: f64,
    pub min_slope_high: f64,
    pub min_slope_premium: f64,
    /// Both expected prices are nondecreasing within `tolerance`.
    pub prices_nondecreasing: bool,
    /// The premium strictly increases between every pair of grid points.
    pub premium_increasing: bool,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.prices_nondecreasing && self.premium_increasing
    }
}

pub fn monotonicity_check(
    p: &MarketParams,
    model: ModelKind,
    points: usize,
    tolerance: f64,
) -> Result<MonotonicityReport, ComparativeError> {
    if points < 2 {
        return Err(ComparativeError::TooFewPoints(2));
    }
    let map = premium_map(p, model, &interior_grid(p.utility(), points))?;
    let mut min_low = f64::INFINITY;
    let mut min_high = f64::INFINITY;
    let mut min_premium = f64::INFINITY;
    let mut premium_increasing = true;
    for w in map.points.windows(2) {
        let h = w[1].k - w[0].k;
        min_low = min_low.min((w[1].expected_low - w[0].expected_low) / h);
        min_high = min_high.min((w[1].expected_high - w[0].expected_high) / h);
        let step = w[1].premium - w[0].premium;
        min_premium = min_premium.min(step / h);
        premium_increasing &= step > 0.0;
    }
    Ok(MonotonicityReport {
        model,
        points,
        tolerance,
        min_slope_low: min_low,
        min_slope_high: min_high,
        min_slope_premium: min_premium,
        prices_nondecreasing: min_low >= -tolerance && min_high >= -tolerance,
        premium_increasing,
    })
}

/// Counts premium sign changes on a fine grid over `(0, u)`.
pub fn premium_sign_changes(
    p: &MarketParams,
    model: ModelKind,
    points: usize,
) -> Result<usize, ComparativeError> {
    Ok(premium_map(p, model, &interior_grid(p.utility(), points))?.sign_changes())
}

/// One randomly drawn market in the threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub u: f64,
    pub c: f64,
    pub r_low: f64,
    pub r_high: f64,
    pub existence_condition_value: f64,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k1_residual: Option<f64>,
    pub k2_residual: Option<f64>,
    /// Both thresholds exist and `k1 < k2`.
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub seed: u64,
    pub samples: usize,
    /// Draws discarded because the benchmark threshold could not exist.
    pub rejected: usize,
    pub points: Vec<SweepPoint>,
    pub all_ordered: bool,
    pub max_residual: f64,
}

fn draw_market<R: Rng>(rng: &mut R) -> MarketParams {
    loop {
        let u = rng.random_range(1.0..=10.0);
        let r_low = rng.random_range(0.1..0.9);
        let r_high = rng.random_range(r_low..1.0);
        let c = rng.random_range(0.0..0.5 * r_low * u);
        if let Ok(p) = MarketParams::new(u, c, r_low, r_high, 0.5 * u, 100) {
            return p;
        }
    }
}

/// Draws `samples` markets with `u` in [1, 10], `r_L` in (0.1, 0.9),
/// `r_H` in (r_L, 1) and `c` in [0, r_L u / 2), keeping only those where the
/// benchmark threshold exists, and compares the two thresholds.
pub fn threshold_sweep(samples: usize, seed: u64) -> SweepReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut markets = Vec::with_capacity(samples);
    let mut rejected = 0;
    while markets.len() < samples {
        let p = draw_market(&mut rng);
        if existence_condition(&p) >= 1.0 {
            markets.push(p);
        } else {
            rejected += 1;
        }
    }
    let points: Vec<SweepPoint> = markets
        .par_iter()
        .map(|p| {
            let one = find_threshold_benchmark(p);
            let two = find_threshold_competition(p);
            SweepPoint {
                u: p.utility(),
                c: p.cost(),
                r_low: p.r_low(),
                r_high: p.r_high(),
                existence_condition_value: one.existence_condition_value,
                ordered: matches!((one.k_star, two.k_star), (Some(a), Some(b)) if a < b),
                k1: one.k_star,
                k2: two.k_star,
                k1_residual: one.residual,
                k2_residual: two.residual,
            }
        })
        .collect();
    let max_residual = points
        .iter()
        .flat_map(|q| [q.k1_residual, q.k2_residual])
        .flatten()
        .fold(0.0, f64::max);
    SweepReport {
        seed,
        samples,
        rejected,
        all_ordered: points.iter().all(|q| q.ordered),
        points,
        max_residual,
    }
}
