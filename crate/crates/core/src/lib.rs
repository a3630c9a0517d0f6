//! Reputation-dependent price competition between sellers facing informed
//! and uninformed buyers.
//!
//! * [`market`] validates parameters.
//! * [`equilibrium`] gives the closed-form mixed equilibria.
//! * [`oracle`] checks them independently: exact expected profits,
//!   deviation searches, numerically solved indifference conditions and a
//!   fictitious-play probe.
//! * [`sim`] replays the market with random buyers.
//! * [`comparative`] locates the search-cost thresholds where the price
//!   premium changes sign.
//! * [`empirics`] is the offering-data pipeline: cleaning, standardization,
//!   regression and median-split tests.

// `!(a < b)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparative;
pub mod distribution;
pub mod empirics;
pub mod equilibrium;
pub mod market;
pub mod oracle;
pub mod quadrature;
pub mod roots;
pub mod sim;

pub use distribution::{Atom, PriceDistribution};
pub use equilibrium::{EquilibriumReport, ExpectedPrices, Support};
pub use market::{validate_params, MarketParams, ModelKind, ParamError, RawParams, Role};
