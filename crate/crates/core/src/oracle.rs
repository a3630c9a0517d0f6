//! Independent checks of the closed-form equilibria.
//!
//! Everything here works from the buyer-allocation rule alone: uninformed
//! buyers are shared equally by all sellers, informed buyers go to the
//! seller offering the highest expected utility `r u - p` and are split
//! equally among tied sellers. No closed-form law or profit is used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::distribution::{Atom, DistributionError, PriceDistribution};
use crate::equilibrium::EquilibriumError;
use crate::market::{MarketParams, ModelKind, Role};
use crate::roots::{bisect, RootError};

/// Default deviation grid per seller.
pub const DEFAULT_GRID: usize = 2001;
/// Smallest grid `verify_equilibrium` accepts.
pub const MIN_VERIFY_GRID: usize = 100;
/// Default certificate tolerance as a fraction of the equilibrium profit.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 0.01;
/// Default number of nodes used to tabulate a solved indifference law.
pub const DEFAULT_INDIFFERENCE_NODES: usize = (1 << 19) + 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("price {price} outside the admissible range [{lower}, {upper}]")]
    PriceOutOfRange { price: f64, lower: f64, upper: f64 },
    #[error("{role:?} seller index {index} does not exist in the {model} game")]
    InvalidSeller {
        model: ModelKind,
        role: Role,
        index: usize,
    },
    #[error("expected {expected} opponent laws, got {got}")]
    OpponentCount { expected: usize, got: usize },
    #[error("grid of {got} points is below the minimum {minimum}")]
    GridTooSmall { got: usize, minimum: usize },
    #[error("indifference condition has no probability solution at price {price} (value {value})")]
    NoSolution { price: f64, value: f64 },
    #[error("the pure-strategy search is defined for the benchmark game only")]
    BenchmarkOnly,
    #[error(transparent)]
    Root(#[from] RootError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// Identifies whose profit is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ProfitSpec {
    pub model: ModelKind,
    pub role: Role,
    /// Position among the sellers sharing `role` (always 0 in the benchmark).
    pub index: usize,
}

impl ProfitSpec {
    pub fn new(model: ModelKind, role: Role, index: usize) -> Result<Self, OracleError> {
        if model.seat_of(role, index).is_none() {
            return Err(OracleError::InvalidSeller { model, role, index });
        }
        Ok(ProfitSpec { model, role, index })
    }

    /// Position in [`ModelKind::seats`].
    pub fn seat(&self) -> usize {
        self.model
            .seat_of(self.role, self.index)
            .expect("validated in ProfitSpec::new")
    }

    /// Roles of the other sellers in seat order.
    pub fn opponent_roles(&self) -> Vec<Role> {
        let own = self.seat();
        self.model
            .seats()
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != own)
            .map(|(_, r)| *r)
            .collect()
    }
}

/// Probabilities that an opponent offers strictly less, and exactly the
/// same, expected utility as `utility`.
fn beaten_and_tied(
    p: &MarketParams,
    role: Role,
    law: &PriceDistribution,
    utility: f64,
) -> (f64, f64) {
    let parity_price = p.reservation_price(role) - utility;
    let mut beaten = (law.continuous_mass() - law.continuous_cdf(parity_price)).max(0.0);
    let mut tied = 0.0;
    for atom in law.atoms() {
        let w = p.buyer_utility(role, atom.price);
        if w < utility {
            beaten += atom.probability;
        } else if w == utility {
            tied += atom.probability;
        }
    }
    (beaten, tied)
}

/// Expected share of the informed buyers won against independent opponents
/// described by `(P(beaten), P(tied))` pairs.
fn informed_share(outcomes: &[(f64, f64)]) -> f64 {
    // coeff[t]: probability that no opponent is better and exactly t tie.
    let mut coeff = vec![1.0];
    for &(beaten, tied) in outcomes {
        let mut next = vec![0.0; coeff.len() + 1];
        for (t, c) in coeff.iter().enumerate() {
            next[t] += c * beaten;
            next[t + 1] += c * tied;
        }
        coeff = next;
    }
    coeff
        .iter()
        .enumerate()
        .map(|(t, c)| c / (t as f64 + 1.0))
        .sum()
}

/// Expected number of buyers served by a seller offering `utility`.
pub(crate) fn expected_units(
    p: &MarketParams,
    model: ModelKind,
    utility: f64,
    outcomes: &[(f64, f64)],
) -> f64 {
    if utility < 0.0 {
        return 0.0;
    }
    let n = p.buyers_f64();
    let uninformed = p.uninformed_fraction() * n / model.seller_count() as f64;
    uninformed + p.informed_fraction() * n * informed_share(outcomes)
}

fn check_price(p: &MarketParams, role: Role, price: f64) -> Result<(), OracleError> {
    let (lower, upper) = (p.cost(), p.reservation_price(role));
    if !(price >= lower && price <= upper) {
        return Err(OracleError::PriceOutOfRange {
            price,
            lower,
            upper,
        });
    }
    Ok(())
}

/// Expected profit of the seller in `spec` charging `own_price` while the
/// other sellers (in seat order) draw independently from `opponents`.
pub fn expected_profit(
    p: &MarketParams,
    spec: ProfitSpec,
    own_price: f64,
    opponents: &[&PriceDistribution],
) -> Result<f64, OracleError> {
    check_price(p, spec.role, own_price)?;
    let roles = spec.opponent_roles();
    if roles.len() != opponents.len() {
        return Err(OracleError::OpponentCount {
            expected: roles.len(),
            got: opponents.len(),
        });
    }
    let utility = p.buyer_utility(spec.role, own_price);
    let outcomes: Vec<(f64, f64)> = roles
        .iter()
        .zip(opponents)
        .map(|(role, law)| beaten_and_tied(p, *role, law, utility))
        .collect();
    Ok(expected_units(p, spec.model, utility, &outcomes) * (own_price - p.cost()))
}

/// Profits of every seat when each charges a fixed price.
pub fn pure_profits(p: &MarketParams, model: ModelKind, prices: &[f64]) -> Vec<f64> {
    let seats = model.seats();
    debug_assert_eq!(seats.len(), prices.len());
    let n = p.buyers_f64();
    let uninformed = p.uninformed_fraction() * n / seats.len() as f64;
    let informed = p.informed_fraction() * n;
    let utilities: Vec<f64> = seats
        .iter()
        .zip(prices)
        .map(|(r, x)| p.buyer_utility(*r, *x))
        .collect();
    let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners = utilities.iter().filter(|v| **v == best).count() as f64;
    utilities
        .iter()
        .zip(prices)
        .map(|(v, x)| {
            if *v < 0.0 {
                return 0.0;
            }
            let mut units = uninformed;
            if *v == best {
                units += informed / winners;
            }
            units * (x - p.cost())
        })
        .collect()
}

/// Uniform grid over `[c, r u]` with the end point set exactly.
pub fn price_grid(p: &MarketParams, role: Role, size: usize) -> Vec<f64> {
    let lo = p.cost();
    let hi = p.reservation_price(role);
    let size = size.max(2);
    let mut grid: Vec<f64> = (0..size)
        .map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64)
        .collect();
    grid[size - 1] = hi;
    grid
}

/// Certificate for one seller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub seat: usize,
    pub role: Role,
    pub grid_size: usize,
    /// Profit of the candidate mixed strategy against the opponents.
    pub equilibrium_profit: f64,
    pub best_deviation_profit: f64,
    /// Best grid profit minus the candidate's profit.
    pub max_gain: f64,
    pub argmax_price: f64,
    pub tolerance: f64,
    pub certified: bool,
}

/// Checks every seller's unilateral deviations on a `grid_size`-point grid;
/// laws are given per role.
pub fn verify_equilibrium(
    p: &MarketParams,
    model: ModelKind,
    low: &PriceDistribution,
    high: &PriceDistribution,
    grid_size: usize,
) -> Result<Vec<DeviationReport>, OracleError> {
    let laws: Vec<PriceDistribution> = model
        .seats()
        .iter()
        .map(|r| match r {
            Role::Low => low.clone(),
            Role::High => high.clone(),
        })
        .collect();
    verify_seats(p, model, &laws, grid_size, DEFAULT_RELATIVE_TOLERANCE)
}

/// Seat-by-seat version of [`verify_equilibrium`] with an explicit relative
/// tolerance.
pub fn verify_seats(
    p: &MarketParams,
    model: ModelKind,
    laws: &[PriceDistribution],
    grid_size: usize,
    relative_tolerance: f64,
) -> Result<Vec<DeviationReport>, OracleError> {
    if grid_size < MIN_VERIFY_GRID {
        return Err(OracleError::GridTooSmall {
            got: grid_size,
            minimum: MIN_VERIFY_GRID,
        });
    }
    let seats = model.seats();
    if laws.len() != seats.len() {
        return Err(OracleError::OpponentCount {
            expected: seats.len(),
            got: laws.len(),
        });
    }
    let mut reports = Vec::with_capacity(seats.len());
    for (seat, role) in seats.iter().enumerate() {
        let index = seats[..seat].iter().filter(|r| *r == role).count();
        let spec = ProfitSpec::new(model, *role, index)?;
        let opponents: Vec<&PriceDistribution> = laws
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != seat)
            .map(|(_, l)| l)
            .collect();
        let own = &laws[seat];
        check_price(p, *role, own.lower())?;
        check_price(p, *role, own.upper())?;

        let profit = |x: f64| expected_profit(p, spec, x, &opponents).unwrap_or(f64::NAN);
        // Profit jumps where our utility meets an opponent atom and kinks
        // at the parity images of opponent support ends.
        let mut breakpoints = Vec::new();
        for (role_o, law) in spec.opponent_roles().iter().zip(&opponents) {
            let shift = p.reservation_price(*role) - p.reservation_price(*role_o);
            breakpoints.extend(law.atoms().iter().map(|a| a.price + shift));
            breakpoints.push(law.lower() + shift);
            breakpoints.push(law.upper() + shift);
        }
        let candidate = own.integrate_continuous(profit, &breakpoints, 1e-10)
            + own
                .atoms()
                .iter()
                .map(|a| a.probability * profit(a.price))
                .sum::<f64>();

        let grid = price_grid(p, *role, grid_size);
        let values: Vec<f64> = grid.par_iter().map(|x| profit(*x)).collect();
        let (best_index, best) =
            values
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
                    if *v > acc.1 {
                        (i, *v)
                    } else {
                        acc
                    }
                });
        let max_gain = best - candidate;
        let tolerance = relative_tolerance * candidate.abs();
        reports.push(DeviationReport {
            seat,
            role: *role,
            grid_size,
            equilibrium_profit: candidate,
            best_deviation_profit: best,
            max_gain,
            argmax_price: grid[best_index],
            tolerance,
            certified: max_gain <= tolerance,
        });
    }
    Ok(reports)
}

/// Share scenarios used by the indifference solver: sold units when the
/// seller wins the informed buyers outright, and when it gets none.
struct Shares {
    win: f64,
    lose: f64,
}

fn shares(p: &MarketParams, model: ModelKind, role: Role) -> Shares {
    let spec_roles = {
        let own = model.seat_of(role, 0).expect("every role has a seat");
        model
            .seats()
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != own)
            .count()
    };
    let beaten = vec![(1.0, 0.0); spec_roles];
    let mut lost = beaten.clone();
    lost[0] = (0.0, 0.0);
    Shares {
        win: expected_units(p, model, 0.0, &beaten),
        lose: expected_units(p, model, 0.0, &lost),
    }
}

/// Lowest price at which winning every informed buyer pays as much as
/// `reservation_profit`.
fn undercut_floor(
    p: &MarketParams,
    role: Role,
    win_units: f64,
    reservation_profit: f64,
) -> Result<f64, OracleError> {
    let c = p.cost();
    let top = p.reservation_price(role);
    let found = bisect(
        |x| (x - c) * win_units - reservation_profit,
        c,
        top,
        1e-15 * top.max(1.0),
    )?;
    Ok(found.root)
}

/// Opponent CDF value that makes a seller with `shares` indifferent between
/// charging `price` and earning `target` profit.
fn indifference_value(
    c: f64,
    shares: &Shares,
    price: f64,
    target: f64,
) -> Result<f64, OracleError> {
    let margin = price - c;
    let value = (shares.win * margin - target) / ((shares.win - shares.lose) * margin);
    if !(value > -1e-9 && value < 1.0 + 1e-9) {
        return Err(OracleError::NoSolution { price, value });
    }
    Ok(value.clamp(0.0, 1.0))
}

fn tabulate(
    nodes: Vec<f64>,
    mut values: Vec<f64>,
    top: f64,
) -> Result<PriceDistribution, OracleError> {
    values[0] = 0.0;
    for i in 1..values.len() {
        if values[i] < values[i - 1] {
            if values[i - 1] - values[i] > 1e-12 {
                return Err(OracleError::NoSolution {
                    price: nodes[i],
                    value: values[i],
                });
            }
            values[i] = values[i - 1];
        }
    }
    let residual = 1.0 - values.last().unwrap();
    let atoms = if residual > 1e-12 {
        vec![Atom {
            price: top,
            probability: residual,
        }]
    } else {
        vec![]
    };
    let mut values = values;
    if atoms.is_empty() {
        *values.last_mut().unwrap() = 1.0;
    }
    Ok(PriceDistribution::tabulated(nodes, values, atoms)?)
}

fn uniform_nodes(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let count = count.max(2);
    let mut nodes: Vec<f64> = (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect();
    nodes[count - 1] = hi;
    nodes
}

/// Recovers the equilibrium law of `role` by solving the opponents'
/// indifference condition on [`DEFAULT_INDIFFERENCE_NODES`] nodes.
pub fn solve_indifference_cdf(
    p: &MarketParams,
    model: ModelKind,
    role: Role,
) -> Result<PriceDistribution, OracleError> {
    solve_indifference_cdf_with_nodes(p, model, role, DEFAULT_INDIFFERENCE_NODES)
}

/// [`solve_indifference_cdf`] with an explicit node count.
///
/// * Benchmark: the low seller's reservation profit is what it earns at
///   `r_L u` serving only its uninformed share. Its support floor is where
///   winning every informed buyer pays the same; the high floor sits at
///   equal buyer utility. Each seller's law is then read off the *other*
///   seller's indifference between every support price and its floor.
/// * Competition, high: the reference profit is the one at `r_H u`, where
///   the rival high seller takes the informed buyers; low sellers stay at
///   `r_L u`.
/// * Competition, low: the best grid response to the solved high law.
pub fn solve_indifference_cdf_with_nodes(
    p: &MarketParams,
    model: ModelKind,
    role: Role,
    nodes: usize,
) -> Result<PriceDistribution, OracleError> {
    let c = p.cost();
    let top_low = p.reservation_price(Role::Low);
    let top_high = p.reservation_price(Role::High);
    match model {
        ModelKind::Benchmark => {
            let low = shares(p, model, Role::Low);
            let high = shares(p, model, Role::High);
            let low_profit = (top_low - c) * low.lose;
            let low_floor = undercut_floor(p, Role::Low, low.win, low_profit)?;
            let high_floor = top_high - (top_low - low_floor);
            let high_profit = (high_floor - c) * high.win;
            match role {
                Role::Low => {
                    let xs = uniform_nodes(low_floor, top_low, nodes);
                    let values = xs
                        .iter()
                        .map(|x| {
                            let rival = top_high - (top_low - x);
                            indifference_value(c, &high, rival, high_profit)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    tabulate(xs, values, top_low)
                }
                Role::High => {
                    let xs = uniform_nodes(high_floor, top_high, nodes);
                    let values = xs
                        .iter()
                        .map(|x| {
                            let rival = top_low - (top_high - x);
                            indifference_value(c, &low, rival, low_profit)
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    tabulate(xs, values, top_high)
                }
            }
        }
        ModelKind::Competition => {
            let high_law = solve_competition_high(p, nodes)?;
            match role {
                Role::High => Ok(high_law),
                Role::Low => {
                    let spec = ProfitSpec::new(model, Role::Low, 0)?;
                    let rival = PriceDistribution::point(top_low);
                    let opponents = [&rival, &high_law, &high_law];
                    let grid = price_grid(p, Role::Low, DEFAULT_GRID);
                    let mut best = (top_low, f64::NEG_INFINITY);
                    for x in grid {
                        let v = expected_profit(p, spec, x, &opponents)?;
                        if v > best.1 {
                            best = (x, v);
                        }
                    }
                    Ok(PriceDistribution::point(best.0))
                }
            }
        }
    }
}

fn solve_competition_high(
    p: &MarketParams,
    nodes: usize,
) -> Result<PriceDistribution, OracleError> {
    let model = ModelKind::Competition;
    let c = p.cost();
    let top = p.reservation_price(Role::High);
    // Opponents of a high seat in seat order: low, low, rival high.
    let win = expected_units(p, model, 0.0, &[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
    let lose = expected_units(p, model, 0.0, &[(1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
    let at_top = expected_units(p, model, 0.0, &[(0.0, 1.0), (0.0, 1.0), (0.0, 0.0)]);
    let reference = (top - c) * at_top;
    let floor = undercut_floor(p, Role::High, win, reference)?;
    let shares = Shares { win, lose };
    let xs = uniform_nodes(floor, top, nodes);
    let values = xs
        .iter()
        .map(|x| indifference_value(c, &shares, *x, reference))
        .collect::<Result<Vec<_>, _>>()?;
    tabulate(xs, values, top)
}

/// A profitable unilateral deviation from a pure price pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PureWitness {
    pub low_price: f64,
    pub high_price: f64,
    pub deviator: Role,
    pub deviation_price: f64,
    pub gain: f64,
}

/// Exhaustive pure-strategy search over a grid of price pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PureSearchReport {
    pub grid_size: usize,
    pub pairs: usize,
    pub pairs_with_deviation: usize,
    pub every_pair_deviates: bool,
    /// Smallest best-deviation gain over all pairs.
    pub weakest_gain: f64,
    /// One witness per pair, low index major; `None` when no seller gains.
    pub witnesses: Vec<Option<PureWitness>>,
}

/// Benchmark game: checks that every pure pair on a `grid_size` ×
/// `grid_size` grid admits a profitable unilateral deviation.
pub fn no_pure_equilibrium_check(p: &MarketParams, grid_size: usize) -> PureSearchReport {
    let low_grid = price_grid(p, Role::Low, grid_size);
    let high_grid = price_grid(p, Role::High, grid_size);
    let g = low_grid.len();
    // profit[i * g + j] for low index i and high index j.
    let profits: Vec<[f64; 2]> = (0..g * g)
        .into_par_iter()
        .map(|ij| {
            let v = pure_profits(
                p,
                ModelKind::Benchmark,
                &[low_grid[ij / g], high_grid[ij % g]],
            );
            [v[0], v[1]]
        })
        .collect();
    let best_low: Vec<(usize, f64)> = (0..g)
        .map(|j| {
            (0..g).fold((0, f64::NEG_INFINITY), |acc, i| {
                let v = profits[i * g + j][0];
                if v > acc.1 {
                    (i, v)
                } else {
                    acc
                }
            })
        })
        .collect();
    let best_high: Vec<(usize, f64)> = (0..g)
        .map(|i| {
            (0..g).fold((0, f64::NEG_INFINITY), |acc, j| {
                let v = profits[i * g + j][1];
                if v > acc.1 {
                    (j, v)
                } else {
                    acc
                }
            })
        })
        .collect();
    let mut witnesses = Vec::with_capacity(g * g);
    let mut weakest_gain = f64::INFINITY;
    for i in 0..g {
        for j in 0..g {
            let [pl, ph] = profits[i * g + j];
            let gain_low = best_low[j].1 - pl;
            let gain_high = best_high[i].1 - ph;
            let witness = if gain_low >= gain_high {
                PureWitness {
                    low_price: low_grid[i],
                    high_price: high_grid[j],
                    deviator: Role::Low,
                    deviation_price: low_grid[best_low[j].0],
                    gain: gain_low,
                }
            } else {
                PureWitness {
                    low_price: low_grid[i],
                    high_price: high_grid[j],
                    deviator: Role::High,
                    deviation_price: high_grid[best_high[i].0],
                    gain: gain_high,
                }
            };
            weakest_gain = weakest_gain.min(witness.gain);
            witnesses.push((witness.gain > 0.0).then_some(witness));
        }
    }
    let pairs_with_deviation = witnesses.iter().filter(|w| w.is_some()).count();
    PureSearchReport {
        grid_size: g,
        pairs: g * g,
        pairs_with_deviation,
        every_pair_deviates: pairs_with_deviation == g * g,
        weakest_gain,
        witnesses,
    }
}

/// Best unilateral deviation from an arbitrary benchmark price pair, with
/// deviations searched on a `grid_size` grid per seller.
pub fn pure_deviation(
    p: &MarketParams,
    low_price: f64,
    high_price: f64,
    grid_size: usize,
) -> Option<PureWitness> {
    let base = pure_profits(p, ModelKind::Benchmark, &[low_price, high_price]);
    let mut best: Option<PureWitness> = None;
    let mut consider = |deviator: Role, price: f64, gain: f64| {
        if gain > 0.0 && best.is_none_or(|b| gain > b.gain) {
            best = Some(PureWitness {
                low_price,
                high_price,
                deviator,
                deviation_price: price,
                gain,
            });
        }
    };
    for x in price_grid(p, Role::Low, grid_size) {
        consider(
            Role::Low,
            x,
            pure_profits(p, ModelKind::Benchmark, &[x, high_price])[0] - base[0],
        );
    }
    for x in price_grid(p, Role::High, grid_size) {
        consider(
            Role::High,
            x,
            pure_profits(p, ModelKind::Benchmark, &[low_price, x])[1] - base[1],
        );
    }
    best
}

/// Outcome of a fictitious-play run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FictitiousPlayReport {
    pub model: ModelKind,
    pub iterations: usize,
    pub seed: u64,
    /// Price grid of each seat.
    pub grids: Vec<Vec<f64>>,
    /// Grid indices of the random opening profile.
    pub initial: Vec<usize>,
    /// Grid indices played in each iteration.
    pub played: Vec<Vec<usize>>,
    /// Empirical frequency of each grid price, opening profile included.
    pub average_strategies: Vec<Vec<f64>>,
    /// Realized profit of each seat in each iteration.
    pub payoff_trace: Vec<Vec<f64>>,
    /// Value of each seat's best response against the opponents'
    /// empirical mixtures, per iteration.
    pub best_response_trace: Vec<Vec<f64>>,
    /// Time average of `payoff_trace`.
    pub average_payoffs: Vec<f64>,
    /// Expected profit of each seat's time-averaged strategy against the
    /// others' time-averaged strategies.
    pub profile_payoffs: Vec<f64>,
}

/// Empirical mixture of one seat on its grid, with prefix sums for fast
/// utility comparisons.
struct Mixture {
    /// Buyer utilities of the grid prices, decreasing.
    utilities: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
    /// suffix[j] = counts[j] + ... + counts[last].
    suffix: Vec<u64>,
}

impl Mixture {
    fn new(p: &MarketParams, role: Role, grid: &[f64]) -> Self {
        Mixture {
            utilities: grid.iter().map(|x| p.buyer_utility(role, *x)).collect(),
            counts: vec![0; grid.len()],
            total: 0,
            suffix: vec![0; grid.len() + 1],
        }
    }

    fn refresh(&mut self) {
        let mut acc = 0;
        for j in (0..self.counts.len()).rev() {
            acc += self.counts[j];
            self.suffix[j] = acc;
        }
        self.suffix[self.counts.len()] = 0;
    }

    /// `(P(U < v), P(U = v))` under the empirical mixture.
    fn outcome(&self, v: f64) -> (f64, f64) {
        // Utilities decrease along the grid.
        let first_below = self.utilities.partition_point(|w| *w >= v);
        let first_tie = self.utilities.partition_point(|w| *w > v);
        let total = self.total as f64;
        let below = self.suffix[first_below] as f64 / total;
        let tied = (self.suffix[first_tie] - self.suffix[first_below]) as f64 / total;
        (below, tied)
    }
}

/// Simultaneous fictitious play on a `grid_size` price grid per seller.
///
/// Each iteration every seller best-responds to the empirical mixtures of
/// the others (ties broken uniformly at random); the opening profile is
/// drawn from `seed`. This is a diagnostic: convergence of the strategies
/// is not guaranteed, and between two sellers of equal reputation the
/// dynamic tends to cycle.
pub fn fictitious_play(
    p: &MarketParams,
    model: ModelKind,
    grid_size: usize,
    iterations: usize,
    seed: u64,
) -> FictitiousPlayReport {
    let seats = model.seats();
    let grids: Vec<Vec<f64>> = seats.iter().map(|r| price_grid(p, *r, grid_size)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mixtures: Vec<Mixture> = seats
        .iter()
        .zip(&grids)
        .map(|(r, g)| Mixture::new(p, *r, g))
        .collect();
    let initial: Vec<usize> = grids.iter().map(|g| rng.random_range(0..g.len())).collect();
    for (m, i) in mixtures.iter_mut().zip(&initial) {
        m.counts[*i] += 1;
        m.total += 1;
        m.refresh();
    }

    let c = p.cost();
    let mut played = Vec::with_capacity(iterations);
    let mut payoff_trace = Vec::with_capacity(iterations);
    let mut best_response_trace = Vec::with_capacity(iterations);
    let mut realized_sum = vec![0.0; seats.len()];
    let mut candidates = Vec::new();
    for _ in 0..iterations {
        let mut choice = Vec::with_capacity(seats.len());
        let mut values = Vec::with_capacity(seats.len());
        for (seat, grid) in grids.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            candidates.clear();
            let mut outcomes = Vec::with_capacity(seats.len() - 1);
            for (i, x) in grid.iter().enumerate() {
                let v = mixtures[seat].utilities[i];
                outcomes.clear();
                outcomes.extend(
                    mixtures
                        .iter()
                        .enumerate()
                        .filter(|(o, _)| *o != seat)
                        .map(|(_, m)| m.outcome(v)),
                );
                let profit = expected_units(p, model, v, &outcomes) * (x - c);
                if profit > best {
                    best = profit;
                    candidates.clear();
                    candidates.push(i);
                } else if profit == best {
                    candidates.push(i);
                }
            }
            let pick = if candidates.len() == 1 {
                candidates[0]
            } else {
                candidates[rng.random_range(0..candidates.len())]
            };
            choice.push(pick);
            values.push(best);
        }
        let prices: Vec<f64> = choice.iter().zip(&grids).map(|(i, g)| g[*i]).collect();
        let realized = pure_profits(p, model, &prices);
        for (sum, v) in realized_sum.iter_mut().zip(&realized) {
            *sum += v;
        }
        for (m, i) in mixtures.iter_mut().zip(&choice) {
            m.counts[*i] += 1;
            m.total += 1;
            m.refresh();
        }
        played.push(choice);
        payoff_trace.push(realized);
        best_response_trace.push(values);
    }
    let steps = iterations.max(1) as f64;
    let profile_payoffs = (0..seats.len())
        .map(|seat| {
            let own = &mixtures[seat];
            grids[seat]
                .iter()
                .enumerate()
                .filter(|(i, _)| own.counts[*i] > 0)
                .map(|(i, x)| {
                    let v = own.utilities[i];
                    let outcomes: Vec<(f64, f64)> = mixtures
                        .iter()
                        .enumerate()
                        .filter(|(o, _)| *o != seat)
                        .map(|(_, m)| m.outcome(v))
                        .collect();
                    own.counts[i] as f64 / own.total as f64
                        * expected_units(p, model, v, &outcomes)
                        * (x - c)
                })
                .sum()
        })
        .collect();
    FictitiousPlayReport {
        profile_payoffs,
        model,
        iterations,
        seed,
        average_strategies: mixtures
            .iter()
            .map(|m| {
                m.counts
                    .iter()
                    .map(|c| *c as f64 / m.total as f64)
                    .collect()
            })
            .collect(),
        grids,
        initial,
        played,
        payoff_trace,
        best_response_trace,
        average_payoffs: realized_sum.iter().map(|s| s / steps).collect(),
    }
}

impl FictitiousPlayReport {
    /// Role of each seat.
    pub fn roles(&self) -> &'static [Role] {
        self.model.seats()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{
        benchmark_distribution_high, benchmark_distribution_low, benchmark_supports,
    };

    fn reference() -> MarketParams {
        MarketParams::new(2.0, 1.0, 0.8, 0.9, 1.4, 100).unwrap()
    }

    #[test]
    fn low_seller_at_top_earns_uninformed_share() {
        let p = reference();
        let high = benchmark_distribution_high(&p).unwrap();
        let spec = ProfitSpec::new(ModelKind::Benchmark, Role::Low, 0).unwrap();
        let v = expected_profit(&p, spec, 1.6, &[&high]).unwrap();
        assert!((v - 21.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn high_seller_at_floor_wins_everything() {
        let p = reference();
        let low = benchmark_distribution_low(&p).unwrap();
        let (_, support) = benchmark_supports(&p);
        let spec = ProfitSpec::new(ModelKind::Benchmark, Role::High, 0).unwrap();
        let v = expected_profit(&p, spec, support.lower, &[&low]).unwrap();
        assert!((v - 34.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn equal_reputation_tie_splits_market() {
        let p = MarketParams::new(2.0, 1.0, 0.8, 0.9, 1.4, 100).unwrap();
        let spec = ProfitSpec::new(ModelKind::Competition, Role::High, 0).unwrap();
        let rival = PriceDistribution::point(1.5);
        let lows = PriceDistribution::point(1.6);
        let v = expected_profit(&p, spec, 1.5, &[&lows, &lows, &rival]).unwrap();
        // Uninformed quarter plus half of the informed buyers.
        let expected = (0.7 * 100.0 / 4.0 + 0.3 * 100.0 / 2.0) * 0.5;
        assert!((v - expected).abs() < 1e-12);
        let pure = pure_profits(&p, ModelKind::Competition, &[1.6, 1.6, 1.5, 1.5]);
        assert!((pure[2] - expected).abs() < 1e-12);
        assert_eq!(pure[2], pure[3]);
    }

    #[test]
    fn benchmark_tie_gives_half_of_all_buyers() {
        let p = reference();
        // Build an exact utility tie: 1.8 - x_H == 1.6 - x_L in floating point.
        let high_price = 1.8 - 0.25;
        let w = 1.8 - high_price;
        let low_price = 1.6 - w;
        assert_eq!(
            p.buyer_utility(Role::Low, low_price),
            p.buyer_utility(Role::High, high_price)
        );
        let pure = pure_profits(&p, ModelKind::Benchmark, &[low_price, high_price]);
        assert!((pure[0] - 50.0 * (low_price - 1.0)).abs() < 1e-12);
        assert!((pure[1] - 50.0 * (high_price - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn expected_profit_agrees_with_pure_profile() {
        let p = reference();
        for (xl, xh) in [(1.2, 1.7), (1.5, 1.55), (1.6, 1.8), (1.05, 1.1)] {
            let pure = pure_profits(&p, ModelKind::Benchmark, &[xl, xh]);
            let low = ProfitSpec::new(ModelKind::Benchmark, Role::Low, 0).unwrap();
            let high = ProfitSpec::new(ModelKind::Benchmark, Role::High, 0).unwrap();
            let a = expected_profit(&p, low, xl, &[&PriceDistribution::point(xh)]).unwrap();
            let b = expected_profit(&p, high, xh, &[&PriceDistribution::point(xl)]).unwrap();
            assert!((a - pure[0]).abs() < 1e-12);
            assert!((b - pure[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn profit_decreases_past_parity_against_pure_rival() {
        // Against a fixed rival the profit is linear in price on each side of
        // utility parity and drops at parity.
        let p = reference();
        let spec = ProfitSpec::new(ModelKind::Benchmark, Role::Low, 0).unwrap();
        let rival = PriceDistribution::point(1.7);
        let parity = 1.6 - (1.8 - 1.7);
        let below = expected_profit(&p, spec, parity - 0.01, &[&rival]).unwrap();
        let above = expected_profit(&p, spec, parity + 0.01, &[&rival]).unwrap();
        assert!(above < below);
        let slope_a = expected_profit(&p, spec, parity + 0.02, &[&rival]).unwrap() - above;
        let slope_b = expected_profit(&p, spec, parity + 0.03, &[&rival]).unwrap()
            - expected_profit(&p, spec, parity + 0.02, &[&rival]).unwrap();
        assert!((slope_a - slope_b).abs() < 1e-10);
    }

    #[test]
    fn rejects_out_of_range_and_bad_specs() {
        let p = reference();
        let spec = ProfitSpec::new(ModelKind::Benchmark, Role::Low, 0).unwrap();
        let rival = PriceDistribution::point(1.7);
        assert!(matches!(
            expected_profit(&p, spec, 1.7, &[&rival]),
            Err(OracleError::PriceOutOfRange { .. })
        ));
        assert!(matches!(
            expected_profit(&p, spec, 1.5, &[&rival, &rival]),
            Err(OracleError::OpponentCount { .. })
        ));
        assert!(ProfitSpec::new(ModelKind::Benchmark, Role::High, 1).is_err());
        assert!(matches!(
            verify_equilibrium(&p, ModelKind::Benchmark, &rival, &rival, 10),
            Err(OracleError::GridTooSmall { .. })
        ));
    }

    #[test]
    fn informed_share_handles_ties() {
        assert_eq!(informed_share(&[]), 1.0);
        assert_eq!(informed_share(&[(0.0, 1.0)]), 0.5);
        assert!((informed_share(&[(0.0, 1.0), (0.0, 1.0)]) - 1.0 / 3.0).abs() < 1e-15);
        // Half the time beaten, half tied.
        assert!((informed_share(&[(0.5, 0.5)]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn single_iteration_is_a_best_response() {
        let p = reference();
        let report = fictitious_play(&p, ModelKind::Benchmark, 101, 1, 5);
        assert_eq!(report.played.len(), 1);
        let grids = &report.grids;
        // The low seat's choice must maximise profit against the opening high price.
        let high_open = grids[1][report.initial[1]];
        let chosen = grids[0][report.played[0][0]];
        let best = grids[0]
            .iter()
            .map(|x| pure_profits(&p, ModelKind::Benchmark, &[*x, high_open])[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let got = pure_profits(&p, ModelKind::Benchmark, &[chosen, high_open])[0];
        assert_eq!(got, best);
    }

    #[test]
    fn fictitious_play_is_deterministic() {
        let p = reference();
        let a = fictitious_play(&p, ModelKind::Benchmark, 51, 200, 9);
        let b = fictitious_play(&p, ModelKind::Benchmark, 51, 200, 9);
        assert_eq!(a, b);
    }
}
