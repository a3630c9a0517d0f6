//! Model parameters shared by every part of the pricing game.
//!
//! A market has one product with buyer utility `u`, a common unit cost `c`,
//! two reputation levels `r_L < r_H`, a search cost `k` paid by informed
//! buyers and `n` buyers. A fraction `k/u` of the buyers is uninformed and
//! picks a seller at random; the rest compare expected utilities
//! `r_i * u - p_i` and buy from the best seller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reasons a parameter set is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{name}` is not a finite number")]
    NonFinite { name: &'static str },
    #[error("parameter `{name}` = {value} violates {constraint}")]
    NonPositive {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("buyer count must be a whole number, got {0}")]
    NonIntegerBuyers(f64),
    #[error("reputations must satisfy 0 < r_L < r_H < 1 (r_L = {r_low}, r_H = {r_high})")]
    ReputationOrder { r_low: f64, r_high: f64 },
    #[error("search cost must satisfy 0 < k < u (k = {k}, u = {u})")]
    SearchCostRange { k: f64, u: f64 },
    #[error(
        "low-reputation reservation price r_L*u = {reservation} does not exceed cost c = {cost}"
    )]
    UnprofitableMarket { reservation: f64, cost: f64 },
}

/// Which of the two games is played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// One low- and one high-reputation seller.
    Benchmark,
    /// Two low- and two high-reputation sellers.
    Competition,
}

/// Reputation class of a seller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Low,
    High,
}

const BENCHMARK_SEATS: [Role; 2] = [Role::Low, Role::High];
const COMPETITION_SEATS: [Role; 4] = [Role::Low, Role::Low, Role::High, Role::High];

impl ModelKind {
    /// Sellers in canonical order: all low-reputation seats first.
    pub fn seats(self) -> &'static [Role] {
        match self {
            ModelKind::Benchmark => &BENCHMARK_SEATS,
            ModelKind::Competition => &COMPETITION_SEATS,
        }
    }

    pub fn seller_count(self) -> usize {
        self.seats().len()
    }

    /// Number of sellers sharing a role.
    pub fn sellers_per_role(self) -> usize {
        self.seller_count() / 2
    }

    /// Seat index of the `index`-th seller with `role`, if it exists.
    pub fn seat_of(self, role: Role, index: usize) -> Option<usize> {
        self.seats()
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .nth(index)
            .map(|(seat, _)| seat)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Benchmark => "benchmark",
            ModelKind::Competition => "competition",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "benchmark" => Ok(ModelKind::Benchmark),
            "competition" => Ok(ModelKind::Competition),
            other => Err(format!(
                "unknown model `{other}` (expected benchmark|competition)"
            )),
        }
    }
}

/// Unvalidated parameters as they arrive from JSON or the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    pub u: f64,
    pub c: f64,
    #[serde(rename = "r_L")]
    pub r_low: f64,
    #[serde(rename = "r_H")]
    pub r_high: f64,
    pub k: f64,
    pub n: f64,
}

/// Validated market parameters. Construct through [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct MarketParams {
    u: f64,
    c: f64,
    r_low: f64,
    r_high: f64,
    k: f64,
    n: u64,
}

impl TryFrom<RawParams> for MarketParams {
    type Error = ParamError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        validate_params(raw)
    }
}

impl From<MarketParams> for RawParams {
    fn from(p: MarketParams) -> Self {
        p.raw()
    }
}

/// Checks every model constraint and returns the validated parameters.
pub fn validate_params(raw: RawParams) -> Result<MarketParams, ParamError> {
    let named = [
        ("u", raw.u),
        ("c", raw.c),
        ("r_L", raw.r_low),
        ("r_H", raw.r_high),
        ("k", raw.k),
        ("n", raw.n),
    ];
    for (name, value) in named {
        if !value.is_finite() {
            return Err(ParamError::NonFinite { name });
        }
    }
    if raw.u <= 0.0 {
        return Err(ParamError::NonPositive {
            name: "u",
            value: raw.u,
            constraint: "u > 0",
        });
    }
    if raw.c < 0.0 {
        return Err(ParamError::NonPositive {
            name: "c",
            value: raw.c,
            constraint: "c >= 0",
        });
    }
    if raw.n < 1.0 {
        return Err(ParamError::NonPositive {
            name: "n",
            value: raw.n,
            constraint: "n >= 1",
        });
    }
    if raw.n.fract() != 0.0 || raw.n > u64::MAX as f64 {
        return Err(ParamError::NonIntegerBuyers(raw.n));
    }
    if !(0.0 < raw.r_low && raw.r_low < raw.r_high && raw.r_high < 1.0) {
        return Err(ParamError::ReputationOrder {
            r_low: raw.r_low,
            r_high: raw.r_high,
        });
    }
    if !(0.0 < raw.k && raw.k < raw.u) {
        return Err(ParamError::SearchCostRange { k: raw.k, u: raw.u });
    }
    let reservation = raw.r_low * raw.u;
    if reservation <= raw.c {
        return Err(ParamError::UnprofitableMarket {
            reservation,
            cost: raw.c,
        });
    }
    Ok(MarketParams {
        u: raw.u,
        c: raw.c,
        r_low: raw.r_low,
        r_high: raw.r_high,
        k: raw.k,
        n: raw.n as u64,
    })
}

impl MarketParams {
    /// Convenience constructor; same checks as [`validate_params`].
    pub fn new(
        u: f64,
        c: f64,
        r_low: f64,
        r_high: f64,
        k: f64,
        n: u64,
    ) -> Result<Self, ParamError> {
        validate_params(RawParams {
            u,
            c,
            r_low,
            r_high,
            k,
            n: n as f64,
        })
    }

    pub fn raw(&self) -> RawParams {
        RawParams {
            u: self.u,
            c: self.c,
            r_low: self.r_low,
            r_high: self.r_high,
            k: self.k,
            n: self.n as f64,
        }
    }

    /// Same market with a different search cost.
    pub fn with_search_cost(&self, k: f64) -> Result<Self, ParamError> {
        validate_params(RawParams { k, ..self.raw() })
    }

    /// Same market with a different buyer count.
    pub fn with_buyers(&self, n: u64) -> Result<Self, ParamError> {
        validate_params(RawParams {
            n: n as f64,
            ..self.raw()
        })
    }

    pub fn utility(&self) -> f64 {
        self.u
    }

    pub fn cost(&self) -> f64 {
        self.c
    }

    pub fn r_low(&self) -> f64 {
        self.r_low
    }

    pub fn r_high(&self) -> f64 {
        self.r_high
    }

    pub fn search_cost(&self) -> f64 {
        self.k
    }

    pub fn buyers(&self) -> u64 {
        self.n
    }

    pub fn buyers_f64(&self) -> f64 {
        self.n as f64
    }

    pub fn reputation(&self, role: Role) -> f64 {
        match role {
            Role::Low => self.r_low,
            Role::High => self.r_high,
        }
    }

    /// Highest price a buyer accepts from a seller of this role, `r * u`.
    pub fn reservation_price(&self, role: Role) -> f64 {
        self.reputation(role) * self.u
    }

    /// Expected utility a buyer gets from a seller of `role` charging `price`.
    pub fn buyer_utility(&self, role: Role, price: f64) -> f64 {
        self.reservation_price(role) - price
    }

    /// Utility gap `(r_H - r_L) * u` between the two reputation classes.
    pub fn reputation_gap(&self) -> f64 {
        (self.r_high - self.r_low) * self.u
    }

    /// Fraction `k/u` of buyers that do not search.
    pub fn uninformed_fraction(&self) -> f64 {
        self.k / self.u
    }

    pub fn informed_fraction(&self) -> f64 {
        1.0 - self.uninformed_fraction()
    }
}

/// Fraction of uninformed buyers, `k/u`.
pub fn uninformed_fraction(p: &MarketParams) -> f64 {
    p.uninformed_fraction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(u: f64, c: f64, r_high: f64, r_low: f64, k: f64, n: f64) -> RawParams {
        RawParams {
            u,
            c,
            r_low,
            r_high,
            k,
            n,
        }
    }

    #[test]
    fn reference_parameters_validate() {
        let p = validate_params(raw(2.0, 1.0, 0.9, 0.8, 1.4, 100.0)).unwrap();
        assert_eq!(p.buyers(), 100);
        assert_eq!(p.uninformed_fraction(), 0.7);
        let b = p.with_search_cost(0.6).unwrap();
        assert!((b.uninformed_fraction() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn near_boundary_fraction() {
        let p = MarketParams::new(2.0, 1.0, 0.8, 0.9, 1.999, 100).unwrap();
        assert!((p.uninformed_fraction() - 0.9995).abs() < 1e-15);
    }

    #[test]
    fn rejects_each_violation() {
        assert!(matches!(
            validate_params(raw(2.0, 1.0, 0.8, 0.8, 1.4, 100.0)),
            Err(ParamError::ReputationOrder { .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, 1.0, 1.0, 0.8, 1.4, 100.0)),
            Err(ParamError::ReputationOrder { .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, 1.7, 0.9, 0.8, 1.4, 100.0)),
            Err(ParamError::UnprofitableMarket { .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, 1.6, 0.9, 0.8, 1.4, 100.0)),
            Err(ParamError::UnprofitableMarket { .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, 1.0, 0.9, 0.8, 0.0, 100.0)),
            Err(ParamError::SearchCostRange { .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, 1.0, 0.9, 0.8, 2.0, 100.0)),
            Err(ParamError::SearchCostRange { .. })
        ));
        assert!(matches!(
            validate_params(raw(0.0, 1.0, 0.9, 0.8, 1.0, 100.0)),
            Err(ParamError::NonPositive { name: "u", .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, -0.1, 0.9, 0.8, 1.0, 100.0)),
            Err(ParamError::NonPositive { name: "c", .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, 1.0, 0.9, 0.8, 1.0, 0.0)),
            Err(ParamError::NonPositive { name: "n", .. })
        ));
        assert!(matches!(
            validate_params(raw(2.0, 1.0, 0.9, 0.8, 1.0, 2.5)),
            Err(ParamError::NonIntegerBuyers(_))
        ));
        assert!(matches!(
            validate_params(raw(f64::NAN, 1.0, 0.9, 0.8, 1.0, 2.0)),
            Err(ParamError::NonFinite { name: "u" })
        ));
    }

    #[test]
    fn zero_cost_is_allowed() {
        assert!(MarketParams::new(2.0, 0.0, 0.8, 0.9, 1.0, 1).is_ok());
    }

    #[test]
    fn json_keys_round_trip() {
        let text = r#"{"u":2,"c":1,"r_L":0.8,"r_H":0.9,"k":1.4,"n":100}"#;
        let p: MarketParams = serde_json::from_str(text).unwrap();
        assert_eq!(p, MarketParams::new(2.0, 1.0, 0.8, 0.9, 1.4, 100).unwrap());
        let bad = r#"{"u":2,"c":1,"r_L":0.9,"r_H":0.8,"k":1.4,"n":100}"#;
        assert!(serde_json::from_str::<MarketParams>(bad).is_err());
        let back: MarketParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn seats_are_ordered_low_first() {
        assert_eq!(ModelKind::Competition.seat_of(Role::High, 1), Some(3));
        assert_eq!(ModelKind::Benchmark.seat_of(Role::High, 0), Some(1));
        assert_eq!(ModelKind::Benchmark.seat_of(Role::High, 1), None);
    }

    fn valid_raw() -> impl Strategy<Value = RawParams> {
        (
            0.5f64..10.0,
            0.01f64..0.98,
            0.0f64..1.0,
            0.01f64..0.99,
            0.0f64..0.9,
            1u64..10_000,
        )
            .prop_map(|(u, r_low, gap, kf, cf, n)| {
                let r_high = r_low + (0.999 - r_low) * (0.01 + 0.98 * gap);
                RawParams {
                    u,
                    c: cf * r_low * u,
                    r_low,
                    r_high,
                    k: kf * u,
                    n: n as f64,
                }
            })
    }

    proptest! {
        #[test]
        fn validation_is_idempotent(raw in valid_raw()) {
            let p = validate_params(raw).unwrap();
            prop_assert_eq!(validate_params(p.raw()).unwrap(), p);
        }

        #[test]
        fn buyer_fractions_sum_to_one(raw in valid_raw()) {
            let p = validate_params(raw).unwrap();
            prop_assert_eq!(p.uninformed_fraction() + p.informed_fraction(), 1.0);
        }
    }
}
