//! Closed-form mixed-strategy equilibria of the benchmark (one low, one high
//! seller) and competition (two of each) games.
//!
//! Every continuous equilibrium density has the shape `s / (p - q)^2`:
//!
//! | law                 | support lower bound                   | `s`                                  | `q`          |
//! |---------------------|---------------------------------------|--------------------------------------|--------------|
//! | benchmark, low      | `c + k/(2u-k) (r_L u - c)`            | `[(2u-k)(r_H u-c) - 2(u-k)(r_L u-c)] / 2(u-k)` | `c - (r_H-r_L)u` |
//! | benchmark, high     | low bound `+ (r_H - r_L)u`            | `k (r_L u - c) / 2(u-k)`             | `c + (r_H-r_L)u` |
//! | competition, high   | `c + k/(4u-3k) (r_H u - c)`           | `k (r_H u - c) / 4(u-k)`             | `c`          |
//!
//! The benchmark low seller also charges `r_L u` with probability
//! `(r_H - r_L)u / (r_H u - c)`; competing low sellers always charge `r_L u`.
//! CDFs are obtained by integrating these densities numerically.

use serde::Serialize;
use thiserror::Error;

use crate::distribution::{Atom, DistributionError, DistributionSummary, PriceDistribution};
use crate::market::{MarketParams, ModelKind, Role};

/// Parameter neighbourhoods closer than this to `r_H = r_L` or `k = u`
/// are refused.
pub const DEGENERACY_GAP: f64 = 1e-12;

/// Label recorded in reports for the competition density that is used.
pub const COMPETITION_DENSITY_FORM: &str = "k(r_H u - c) / (4(u-k)(p - c)^2)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibriumError {
    #[error("degenerate regime: {0}")]
    DegenerateRegime(&'static str),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Closed price interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Expected equilibrium prices per role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedPrices {
    pub low: f64,
    pub high: f64,
}

impl ExpectedPrices {
    /// `E_H - E_L`; negative means a negative price premium.
    pub fn premium(&self) -> f64 {
        self.high - self.low
    }
}

fn check_regime(p: &MarketParams) -> Result<(), EquilibriumError> {
    if p.r_high() - p.r_low() < DEGENERACY_GAP {
        return Err(EquilibriumError::DegenerateRegime(
            "r_H - r_L is below 1e-12",
        ));
    }
    if p.utility() - p.search_cost() < DEGENERACY_GAP {
        return Err(EquilibriumError::DegenerateRegime("u - k is below 1e-12"));
    }
    Ok(())
}

/// Price intervals `(low, high)` of the benchmark game.
pub fn benchmark_supports(p: &MarketParams) -> (Support, Support) {
    let (u, c, k) = (p.utility(), p.cost(), p.search_cost());
    let low_top = p.reservation_price(Role::Low);
    let low_bottom = c + k / (2.0 * u - k) * (low_top - c);
    (
        Support {
            lower: low_bottom,
            upper: low_top,
        },
        Support {
            lower: low_bottom + p.reputation_gap(),
            upper: p.reservation_price(Role::High),
        },
    )
}

/// Price intervals `(low, high)` of the competition game, each
/// `[c + k/(4u-3k) (r u - c), r u]`.
pub fn competition_supports(p: &MarketParams) -> (Support, Support) {
    let (u, c, k) = (p.utility(), p.cost(), p.search_cost());
    let interval = |role| {
        let top = p.reservation_price(role);
        Support {
            lower: c + k / (4.0 * u - 3.0 * k) * (top - c),
            upper: top,
        }
    };
    (interval(Role::Low), interval(Role::High))
}

/// Probability that the benchmark low seller charges its reservation price.
pub fn benchmark_low_mass(p: &MarketParams) -> f64 {
    p.reputation_gap() / (p.reservation_price(Role::High) - p.cost())
}

/// Benchmark low seller: density on `[p_L, r_L u)` and a mass at `r_L u`.
pub fn benchmark_distribution_low(p: &MarketParams) -> Result<PriceDistribution, EquilibriumError> {
    check_regime(p)?;
    let (u, c, k) = (p.utility(), p.cost(), p.search_cost());
    let (support, _) = benchmark_supports(p);
    let low_margin = p.reservation_price(Role::Low) - c;
    let high_margin = p.reservation_price(Role::High) - c;
    let scale = ((2.0 * u - k) * high_margin - 2.0 * (u - k) * low_margin) / (2.0 * (u - k));
    let pole = c - p.reputation_gap();
    let atom = Atom {
        price: support.upper,
        probability: benchmark_low_mass(p),
    };
    Ok(PriceDistribution::inverse_square(
        support.lower,
        support.upper,
        scale,
        pole,
        vec![atom],
    )?)
}

/// Benchmark high seller: purely continuous on `[p_H, r_H u]`.
pub fn benchmark_distribution_high(
    p: &MarketParams,
) -> Result<PriceDistribution, EquilibriumError> {
    check_regime(p)?;
    let (u, c, k) = (p.utility(), p.cost(), p.search_cost());
    let (_, support) = benchmark_supports(p);
    let scale = k * (p.reservation_price(Role::Low) - c) / (2.0 * (u - k));
    let pole = c + p.reputation_gap();
    Ok(PriceDistribution::inverse_square(
        support.lower,
        support.upper,
        scale,
        pole,
        vec![],
    )?)
}

/// Competing high sellers: purely continuous on the competition support.
pub fn competition_distribution_high(
    p: &MarketParams,
) -> Result<PriceDistribution, EquilibriumError> {
    check_regime(p)?;
    let (u, c, k) = (p.utility(), p.cost(), p.search_cost());
    let (_, support) = competition_supports(p);
    let scale = k * (p.reservation_price(Role::High) - c) / (4.0 * (u - k));
    Ok(PriceDistribution::inverse_square(
        support.lower,
        support.upper,
        scale,
        c,
        vec![],
    )?)
}

/// Competing low sellers always charge `r_L u`.
pub fn competition_price_low(p: &MarketParams) -> PriceDistribution {
    PriceDistribution::point(p.reservation_price(Role::Low))
}

/// Equilibrium law of `role` in `model`.
pub fn equilibrium_distribution(
    p: &MarketParams,
    model: ModelKind,
    role: Role,
) -> Result<PriceDistribution, EquilibriumError> {
    match (model, role) {
        (ModelKind::Benchmark, Role::Low) => benchmark_distribution_low(p),
        (ModelKind::Benchmark, Role::High) => benchmark_distribution_high(p),
        (ModelKind::Competition, Role::Low) => {
            check_regime(p)?;
            Ok(competition_price_low(p))
        }
        (ModelKind::Competition, Role::High) => competition_distribution_high(p),
    }
}

/// Closed-form expected prices.
///
/// Logarithms are evaluated with `ln_1p` so the formulas stay accurate as
/// `k` approaches `u`.
pub fn expected_prices(p: &MarketParams, model: ModelKind) -> ExpectedPrices {
    let (u, c, k) = (p.utility(), p.cost(), p.search_cost());
    let low_margin = p.reservation_price(Role::Low) - c;
    let high_margin = p.reservation_price(Role::High) - c;
    match model {
        ModelKind::Benchmark => {
            let a = (2.0 * u - k) * high_margin - 2.0 * (u - k) * low_margin;
            let low = c + a / (2.0 * (u - k)) * (2.0 * (u - k) * low_margin / a).ln_1p();
            let high = c
                + p.reputation_gap()
                + k * low_margin / (2.0 * (u - k)) * (2.0 * (u - k) / k).ln_1p();
            ExpectedPrices { low, high }
        }
        ModelKind::Competition => {
            let high = c + k * high_margin / (4.0 * (u - k)) * (4.0 * (u - k) / k).ln_1p();
            ExpectedPrices {
                low: p.reservation_price(Role::Low),
                high,
            }
        }
    }
}

/// Equilibrium profit of one seller of `role`, i.e. the profit it earns at
/// any price in its support.
pub fn equilibrium_profit(p: &MarketParams, model: ModelKind, role: Role) -> f64 {
    let (u, c, k, n) = (p.utility(), p.cost(), p.search_cost(), p.buyers_f64());
    let margin = p.reservation_price(role) - c;
    match (model, role) {
        (ModelKind::Benchmark, Role::Low) => k * n / (2.0 * u) * margin,
        (ModelKind::Benchmark, Role::High) => {
            k * n / (2.0 * u) * margin + (u - k) / u * n * p.reputation_gap()
        }
        (ModelKind::Competition, _) => k * n / (4.0 * u) * margin,
    }
}

/// Equilibrium summary for one role.
#[derive(Debug, Clone, Serialize)]
pub struct SellerEquilibrium {
    pub role: Role,
    pub sellers: usize,
    pub support: Support,
    pub law: DistributionSummary,
    pub expected_price: f64,
    /// Mean of the law computed by quadrature, for comparison.
    pub expected_price_numeric: f64,
    pub equilibrium_profit: f64,
    #[serde(skip)]
    pub distribution: PriceDistribution,
}

/// Full equilibrium of one game.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub model: ModelKind,
    pub params: MarketParams,
    pub uninformed_fraction: f64,
    /// Density used for the high sellers in the competition game.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub competition_density_form: Option<&'static str>,
    pub low: SellerEquilibrium,
    pub high: SellerEquilibrium,
}

impl EquilibriumReport {
    pub fn role(&self, role: Role) -> &SellerEquilibrium {
        match role {
            Role::Low => &self.low,
            Role::High => &self.high,
        }
    }

    /// Laws in seat order.
    pub fn seat_laws(&self) -> Vec<PriceDistribution> {
        self.model
            .seats()
            .iter()
            .map(|r| self.role(*r).distribution.clone())
            .collect()
    }
}

/// Solves the game: supports, laws, expected prices and profits.
pub fn equilibrium(
    p: &MarketParams,
    model: ModelKind,
) -> Result<EquilibriumReport, EquilibriumError> {
    let expected = expected_prices(p, model);
    let supports = match model {
        ModelKind::Benchmark => benchmark_supports(p),
        ModelKind::Competition => {
            let (_, high) = competition_supports(p);
            let top = p.reservation_price(Role::Low);
            (
                Support {
                    lower: top,
                    upper: top,
                },
                high,
            )
        }
    };
    let build = |role: Role,
                 support: Support,
                 expected_price: f64|
     -> Result<SellerEquilibrium, EquilibriumError> {
        let distribution = equilibrium_distribution(p, model, role)?;
        Ok(SellerEquilibrium {
            role,
            sellers: model.sellers_per_role(),
            support,
            law: distribution.summary(),
            expected_price,
            expected_price_numeric: distribution.mean(),
            equilibrium_profit: equilibrium_profit(p, model, role),
            distribution,
        })
    };
    Ok(EquilibriumReport {
        model,
        params: *p,
        uninformed_fraction: p.uninformed_fraction(),
        competition_density_form: (model == ModelKind::Competition)
            .then_some(COMPETITION_DENSITY_FORM),
        low: build(Role::Low, supports.0, expected.low)?,
        high: build(Role::High, supports.1, expected.high)?,
    })
}
