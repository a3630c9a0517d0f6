//! Seeded Monte-Carlo replay of the market.
//!
//! Each round every seller draws a price from its strategy, then
//! `round(k/u · n)` uninformed buyers each visit one seller chosen
//! uniformly at random and the remaining informed buyers go to the seller
//! with the highest expected utility. Nobody buys at negative utility.
//!
//! Round `t` uses a ChaCha8 stream `t` under the configured seed, so
//! results do not depend on how rounds are scheduled across threads.
//! Statistics are accumulated over fixed chunks of rounds and merged in
//! chunk order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distribution::PriceDistribution;
use crate::equilibrium::{equilibrium, EquilibriumError};
use crate::market::{MarketParams, ModelKind, Role};

/// Rounds per aggregation chunk.
const CHUNK: u64 = 4096;
/// Fewest rounds accepted by [`mean_price_check`].
pub const MIN_CHECK_ROUNDS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("expected {expected} strategies, got {got}")]
    StrategyCount { expected: usize, got: usize },
    #[error("strategy of seat {seat} spans [{low}, {high}], outside [{min}, {max}]")]
    StrategyOutOfRange {
        seat: usize,
        low: f64,
        high: f64,
        min: f64,
        max: f64,
    },
    #[error("rounds must be positive")]
    NoRounds,
    #[error("{rounds} rounds is below the {minimum} needed for a mean-price check")]
    TooFewRounds { rounds: u64, minimum: u64 },
    #[error("seat {0} does not exist")]
    NoSuchSeat(usize),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    params: MarketParams,
    model: ModelKind,
    strategies: Vec<PriceDistribution>,
    rounds: u64,
    seed: u64,
}

impl SimulationConfig {
    /// `strategies` are given in seat order (see [`ModelKind::seats`]).
    pub fn new(
        params: MarketParams,
        model: ModelKind,
        strategies: Vec<PriceDistribution>,
        rounds: u64,
        seed: u64,
    ) -> Result<Self, SimError> {
        let seats = model.seats();
        if strategies.len() != seats.len() {
            return Err(SimError::StrategyCount {
                expected: seats.len(),
                got: strategies.len(),
            });
        }
        if rounds == 0 {
            return Err(SimError::NoRounds);
        }
        for (seat, (law, role)) in strategies.iter().zip(seats).enumerate() {
            let (min, max) = (params.cost(), params.reservation_price(*role));
            if law.lower() < min || law.upper() > max {
                return Err(SimError::StrategyOutOfRange {
                    seat,
                    low: law.lower(),
                    high: law.upper(),
                    min,
                    max,
                });
            }
        }
        Ok(SimulationConfig {
            params,
            model,
            strategies,
            rounds,
            seed,
        })
    }

    /// Every seller plays its closed-form equilibrium strategy.
    pub fn equilibrium(
        params: MarketParams,
        model: ModelKind,
        rounds: u64,
        seed: u64,
    ) -> Result<Self, SimError> {
        let laws = equilibrium(&params, model)?.seat_laws();
        Self::new(params, model, laws, rounds, seed)
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn model(&self) -> ModelKind {
        self.model
    }

    pub fn strategies(&self) -> &[PriceDistribution] {
        &self.strategies
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_rounds(mut self, rounds: u64) -> Result<Self, SimError> {
        if rounds == 0 {
            return Err(SimError::NoRounds);
        }
        self.rounds = rounds;
        Ok(self)
    }

    pub fn with_params(self, params: MarketParams) -> Result<Self, SimError> {
        Self::new(params, self.model, self.strategies, self.rounds, self.seed)
    }

    /// Number of uninformed buyers per round.
    pub fn uninformed_buyers(&self) -> u64 {
        (self.params.uninformed_fraction() * self.params.buyers_f64()).round() as u64
    }
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub round: u64,
    pub prices: Vec<f64>,
    pub informed_sales: Vec<u64>,
    pub uninformed_sales: Vec<u64>,
    pub profits: Vec<f64>,
}

impl RoundOutcome {
    pub fn total_profit(&self) -> f64 {
        self.profits.iter().sum()
    }

    pub fn units_sold(&self) -> u64 {
        self.informed_sales.iter().sum::<u64>() + self.uninformed_sales.iter().sum::<u64>()
    }
}

/// Plays round `round` of `config`.
pub fn play_round(config: &SimulationConfig, round: u64) -> RoundOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(round);
    let p = &config.params;
    let seats = config.model.seats();
    let m = seats.len();
    let prices: Vec<f64> = config
        .strategies
        .iter()
        .map(|law| law.draw(&mut rng))
        .collect();
    let utilities: Vec<f64> = seats
        .iter()
        .zip(&prices)
        .map(|(r, x)| p.buyer_utility(*r, *x))
        .collect();

    let uninformed = config.uninformed_buyers();
    let informed = p.buyers() - uninformed;
    let mut uninformed_sales = vec![0; m];
    for _ in 0..uninformed {
        let seat = rng.random_range(0..m);
        if utilities[seat] >= 0.0 {
            uninformed_sales[seat] += 1;
        }
    }

    let mut informed_sales = vec![0; m];
    let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best >= 0.0 {
        let winners: Vec<usize> = (0..m).filter(|s| utilities[*s] == best).collect();
        if let [only] = winners.as_slice() {
            informed_sales[*only] = informed;
        } else {
            for _ in 0..informed {
                informed_sales[winners[rng.random_range(0..winners.len())]] += 1;
            }
        }
    }

    let profits = prices
        .iter()
        .zip(informed_sales.iter().zip(&uninformed_sales))
        .map(|(x, (a, b))| (a + b) as f64 * (x - p.cost()))
        .collect();
    RoundOutcome {
        round,
        prices,
        informed_sales,
        uninformed_sales,
        profits,
    }
}

/// Running mean and sum of squared deviations (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / total as f64;
        self.count = total;
    }

    fn standard_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let variance = self.m2 / (self.count - 1) as f64;
        (variance / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Default)]
struct SeatMoments {
    profit: Moments,
    price: Moments,
    informed: Moments,
    uninformed: Moments,
}

impl SeatMoments {
    fn merge(&mut self, other: &SeatMoments) {
        self.profit.merge(&other.profit);
        self.price.merge(&other.price);
        self.informed.merge(&other.informed);
        self.uninformed.merge(&other.uninformed);
    }
}

/// Per-seller statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeatSummary {
    pub seat: usize,
    pub role: Role,
    pub mean_profit: f64,
    pub profit_se: f64,
    pub mean_price: f64,
    pub price_se: f64,
    pub mean_informed_sales: f64,
    pub informed_sales_se: f64,
    pub mean_uninformed_sales: f64,
    pub uninformed_sales_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub model: ModelKind,
    pub rounds: u64,
    pub seed: u64,
    pub buyers: u64,
    pub uninformed_buyers: u64,
    pub informed_buyers: u64,
    /// Rounded uninformed count minus the exact mass `k/u · n`.
    pub uninformed_rounding_error: f64,
    pub seats: Vec<SeatSummary>,
}

impl SimulationReport {
    pub fn seat(&self, seat: usize) -> Option<&SeatSummary> {
        self.seats.get(seat)
    }
}

fn chunk_moments(config: &SimulationConfig, start: u64, end: u64) -> Vec<SeatMoments> {
    let mut acc = vec![SeatMoments::default(); config.model.seller_count()];
    for round in start..end {
        let outcome = play_round(config, round);
        for (s, m) in acc.iter_mut().enumerate() {
            m.profit.push(outcome.profits[s]);
            m.price.push(outcome.prices[s]);
            m.informed.push(outcome.informed_sales[s] as f64);
            m.uninformed.push(outcome.uninformed_sales[s] as f64);
        }
    }
    acc
}

/// Runs every round and summarizes per seller.
pub fn simulate(config: &SimulationConfig) -> SimulationReport {
    let chunks = config.rounds.div_ceil(CHUNK);
    let parts: Vec<Vec<SeatMoments>> = (0..chunks)
        .into_par_iter()
        .map(|i| chunk_moments(config, i * CHUNK, ((i + 1) * CHUNK).min(config.rounds)))
        .collect();
    let mut total = vec![SeatMoments::default(); config.model.seller_count()];
    for part in &parts {
        for (t, m) in total.iter_mut().zip(part) {
            t.merge(m);
        }
    }
    let p = &config.params;
    let uninformed = config.uninformed_buyers();
    SimulationReport {
        model: config.model,
        rounds: config.rounds,
        seed: config.seed,
        buyers: p.buyers(),
        uninformed_buyers: uninformed,
        informed_buyers: p.buyers() - uninformed,
        uninformed_rounding_error: uninformed as f64 - p.uninformed_fraction() * p.buyers_f64(),
        seats: total
            .iter()
            .zip(config.model.seats())
            .enumerate()
            .map(|(seat, (m, role))| SeatSummary {
                seat,
                role: *role,
                mean_profit: m.profit.mean,
                profit_se: m.profit.standard_error(),
                mean_price: m.price.mean,
                price_se: m.price.standard_error(),
                mean_informed_sales: m.informed.mean,
                informed_sales_se: m.informed.standard_error(),
                mean_uninformed_sales: m.uninformed.mean,
                uninformed_sales_se: m.uninformed.standard_error(),
            })
            .collect(),
    }
}

/// Every round in order, for export.
pub fn simulate_trace(config: &SimulationConfig) -> Vec<RoundOutcome> {
    (0..config.rounds)
        .into_par_iter()
        .map(|t| play_round(config, t))
        .collect()
}

/// Simulated mean price of one seat against a reference expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanPriceCheck {
    pub seat: usize,
    pub rounds: u64,
    pub sample_mean: f64,
    pub standard_error: f64,
    pub expected: f64,
    /// `None` when the standard error is zero.
    pub z_score: Option<f64>,
    pub pass: bool,
}

impl MeanPriceCheck {
    /// Passes when the sample mean lies within three standard errors.
    pub fn from_report(
        report: &SimulationReport,
        seat: usize,
        expected: f64,
    ) -> Result<Self, SimError> {
        if report.rounds < MIN_CHECK_ROUNDS {
            return Err(SimError::TooFewRounds {
                rounds: report.rounds,
                minimum: MIN_CHECK_ROUNDS,
            });
        }
        let s = report.seat(seat).ok_or(SimError::NoSuchSeat(seat))?;
        let gap = (s.mean_price - expected).abs();
        Ok(MeanPriceCheck {
            seat,
            rounds: report.rounds,
            sample_mean: s.mean_price,
            standard_error: s.price_se,
            expected,
            z_score: (s.price_se > 0.0).then(|| (s.mean_price - expected) / s.price_se),
            pass: gap <= 3.0 * s.price_se,
        })
    }
}

/// Simulates `config` and checks one seat's mean price.
pub fn mean_price_check(
    config: &SimulationConfig,
    seat: usize,
    expected: f64,
) -> Result<MeanPriceCheck, SimError> {
    if config.rounds < MIN_CHECK_ROUNDS {
        return Err(SimError::TooFewRounds {
            rounds: config.rounds,
            minimum: MIN_CHECK_ROUNDS,
        });
    }
    MeanPriceCheck::from_report(&simulate(config), seat, expected)
}
