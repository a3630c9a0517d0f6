//! Mixed-strategy price laws: an absolutely continuous part on an interval
//! plus finitely many point masses.
//!
//! Two continuous shapes are supported. `InverseSquare` is the density
//! `scale / (x - pole)^2`, which is the form every equilibrium density in
//! this game takes; its CDF is obtained by adaptive quadrature of the
//! density over a geometric node table. `Tabulated` is a piecewise-linear
//! CDF, used for laws recovered numerically by the oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quadrature::{gauss_kronrod15, integrate, integrate_with_breakpoints};

/// Total probability must be one within this tolerance.
pub const MASS_TOLERANCE: f64 = 1e-9;

const TABLE_SEGMENTS: usize = 128;
const SEGMENT_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid support [{lower}, {upper}]")]
    InvalidSupport { lower: f64, upper: f64 },
    #[error("point mass at {price} lies outside the support")]
    AtomOutsideSupport { price: f64 },
    #[error("negative or non-finite probability {0}")]
    BadProbability(f64),
    #[error("total probability {total} differs from 1")]
    Normalization { total: f64 },
    #[error("density pole {pole} is not below the support lower bound {lower}")]
    PoleInsideSupport { pole: f64, lower: f64 },
    #[error("malformed CDF table: {0}")]
    BadTable(String),
}

/// A price charged with positive probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub price: f64,
    pub probability: f64,
}

#[derive(Debug, Clone)]
struct InverseSquare {
    scale: f64,
    pole: f64,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl InverseSquare {
    fn new(lower: f64, upper: f64, scale: f64, pole: f64) -> Self {
        // Nodes are geometric in the distance to the pole so every segment
        // has the same relative width.
        let near = lower - pole;
        let far = upper - pole;
        let ratio = far / near;
        let mut nodes: Vec<f64> = (0..=TABLE_SEGMENTS)
            .map(|i| pole + near * ratio.powf(i as f64 / TABLE_SEGMENTS as f64))
            .collect();
        nodes[0] = lower;
        nodes[TABLE_SEGMENTS] = upper;
        let mut law = InverseSquare {
            scale,
            pole,
            nodes,
            cumulative: Vec::with_capacity(TABLE_SEGMENTS + 1),
        };
        let mut acc = 0.0;
        law.cumulative.push(0.0);
        for w in law.nodes.windows(2) {
            acc += integrate(|x| law.density(x), w[0], w[1], SEGMENT_TOL).value;
            law.cumulative.push(acc);
        }
        law
    }

    fn lower(&self) -> f64 {
        self.nodes[0]
    }

    fn upper(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn density(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        let d = x - self.pole;
        self.scale / (d * d)
    }

    fn segment(&self, x: f64) -> usize {
        self.nodes
            .partition_point(|n| *n <= x)
            .saturating_sub(1)
            .min(TABLE_SEGMENTS - 1)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return 0.0;
        }
        if x >= self.upper() {
            return *self.cumulative.last().unwrap();
        }
        let i = self.segment(x);
        self.cumulative[i] + integrate(|t| self.density(t), self.nodes[i], x, SEGMENT_TOL).value
    }

    fn quantile(&self, target: f64) -> f64 {
        let total = *self.cumulative.last().unwrap();
        if target <= 0.0 {
            return self.lower();
        }
        if target >= total {
            return self.upper();
        }
        let i = self
            .cumulative
            .partition_point(|c| *c <= target)
            .saturating_sub(1)
            .min(TABLE_SEGMENTS - 1);
        let (mut lo, mut hi) = (self.nodes[i], self.nodes[i + 1]);
        let base = self.cumulative[i];
        let span = self.cumulative[i + 1] - base;
        let mut x = if span > 0.0 {
            lo + (hi - lo) * (target - base) / span
        } else {
            lo
        };
        // Safeguarded Newton on the local integral.
        for _ in 0..60 {
            let value = base + gauss_kronrod15(&|t| self.density(t), self.nodes[i], x).0 - target;
            if value > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let step = value / self.density(x);
            let mut next = x - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - x).abs() <= 1e-16 * x.abs().max(1.0) || hi - lo <= 1e-16 * x.abs().max(1.0) {
                return next;
            }
            x = next;
        }
        x
    }
}

#[derive(Debug, Clone)]
struct Tabulated {
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Tabulated {
    fn lower(&self) -> f64 {
        self.nodes[0]
    }

    fn upper(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn segment(&self, x: f64) -> usize {
        self.nodes
            .partition_point(|n| *n <= x)
            .saturating_sub(1)
            .min(self.nodes.len() - 2)
    }

    fn slope(&self, i: usize) -> f64 {
        (self.cumulative[i + 1] - self.cumulative[i]) / (self.nodes[i + 1] - self.nodes[i])
    }

    fn density(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        self.slope(self.segment(x))
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return 0.0;
        }
        if x >= self.upper() {
            return *self.cumulative.last().unwrap();
        }
        let i = self.segment(x);
        self.cumulative[i] + self.slope(i) * (x - self.nodes[i])
    }

    fn quantile(&self, target: f64) -> f64 {
        let total = *self.cumulative.last().unwrap();
        if target <= 0.0 {
            return self.lower();
        }
        if target >= total {
            return self.upper();
        }
        let i = self
            .cumulative
            .partition_point(|c| *c <= target)
            .saturating_sub(1)
            .min(self.nodes.len() - 2);
        let slope = self.slope(i);
        if slope <= 0.0 {
            return self.nodes[i];
        }
        (self.nodes[i] + (target - self.cumulative[i]) / slope).min(self.nodes[i + 1])
    }
}

#[derive(Debug, Clone)]
enum Continuous {
    InverseSquare(InverseSquare),
    Tabulated(Tabulated),
}

impl Continuous {
    fn density(&self, x: f64) -> f64 {
        match self {
            Continuous::InverseSquare(d) => d.density(x),
            Continuous::Tabulated(d) => d.density(x),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Continuous::InverseSquare(d) => d.cdf(x),
            Continuous::Tabulated(d) => d.cdf(x),
        }
    }

    fn mass(&self) -> f64 {
        match self {
            Continuous::InverseSquare(d) => *d.cumulative.last().unwrap(),
            Continuous::Tabulated(d) => *d.cumulative.last().unwrap(),
        }
    }

    fn quantile(&self, target: f64) -> f64 {
        match self {
            Continuous::InverseSquare(d) => d.quantile(target),
            Continuous::Tabulated(d) => d.quantile(target),
        }
    }

    fn nodes(&self) -> &[f64] {
        match self {
            Continuous::InverseSquare(d) => &d.nodes,
            Continuous::Tabulated(d) => &d.nodes,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match self {
            Continuous::InverseSquare(d) => (d.lower(), d.upper()),
            Continuous::Tabulated(d) => (d.lower(), d.upper()),
        }
    }
}

/// A mixed pricing strategy.
#[derive(Debug, Clone)]
pub struct PriceDistribution {
    lower: f64,
    upper: f64,
    continuous: Option<Continuous>,
    atoms: Vec<Atom>,
}

/// Serializable description of a [`PriceDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub kind: &'static str,
    pub lower: f64,
    pub upper: f64,
    pub continuous_mass: f64,
    pub point_masses: Vec<Atom>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_pole: Option<f64>,
}

/// Measured CDF/density properties; see [`PriceDistribution::invariants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantReport {
    pub cdf_before_lower: f64,
    pub cdf_at_upper: f64,
    /// Point masses plus an independent quadrature of the density.
    pub total_mass: f64,
    pub largest_cdf_decrease: f64,
    pub smallest_density: f64,
}

impl InvariantReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.cdf_before_lower.abs() <= tol
            && (self.cdf_at_upper - 1.0).abs() <= tol
            && (self.total_mass - 1.0).abs() <= tol
            && self.largest_cdf_decrease <= tol
            && self.smallest_density >= 0.0
    }
}

fn check_atoms(atoms: &mut Vec<Atom>, lower: f64, upper: f64) -> Result<(), DistributionError> {
    for a in atoms.iter() {
        if !a.probability.is_finite() || a.probability < 0.0 {
            return Err(DistributionError::BadProbability(a.probability));
        }
        if !(a.price >= lower && a.price <= upper) {
            return Err(DistributionError::AtomOutsideSupport { price: a.price });
        }
    }
    atoms.retain(|a| a.probability > 0.0);
    atoms.sort_by(|a, b| a.price.total_cmp(&b.price));
    // Merge duplicates.
    let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms.drain(..) {
        match merged.last_mut() {
            Some(last) if last.price == a.price => last.probability += a.probability,
            _ => merged.push(a),
        }
    }
    *atoms = merged;
    Ok(())
}

fn check_total(total: f64) -> Result<(), DistributionError> {
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(DistributionError::Normalization { total });
    }
    Ok(())
}

impl PriceDistribution {
    /// Degenerate law: always charge `price`.
    pub fn point(price: f64) -> Self {
        PriceDistribution {
            lower: price,
            upper: price,
            continuous: None,
            atoms: vec![Atom {
                price,
                probability: 1.0,
            }],
        }
    }

    /// Purely discrete law. Probabilities must sum to one.
    pub fn discrete(atoms: Vec<Atom>) -> Result<Self, DistributionError> {
        let mut atoms = atoms;
        if atoms.is_empty() {
            return Err(DistributionError::Normalization { total: 0.0 });
        }
        let lower = atoms.iter().map(|a| a.price).fold(f64::INFINITY, f64::min);
        let upper = atoms
            .iter()
            .map(|a| a.price)
            .fold(f64::NEG_INFINITY, f64::max);
        if !lower.is_finite() || !upper.is_finite() {
            return Err(DistributionError::InvalidSupport { lower, upper });
        }
        check_atoms(&mut atoms, lower, upper)?;
        check_total(atoms.iter().map(|a| a.probability).sum())?;
        Ok(PriceDistribution {
            lower,
            upper,
            continuous: None,
            atoms,
        })
    }

    /// Density `scale / (x - pole)^2` on `[lower, upper]` plus `atoms`.
    ///
    /// The continuous mass is integrated numerically; the total, including
    /// atoms, must be one within [`MASS_TOLERANCE`].
    pub fn inverse_square(
        lower: f64,
        upper: f64,
        scale: f64,
        pole: f64,
        atoms: Vec<Atom>,
    ) -> Result<Self, DistributionError> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(DistributionError::InvalidSupport { lower, upper });
        }
        if !(pole < lower) {
            return Err(DistributionError::PoleInsideSupport { pole, lower });
        }
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(DistributionError::BadProbability(scale));
        }
        let mut atoms = atoms;
        check_atoms(&mut atoms, lower, upper)?;
        let continuous = InverseSquare::new(lower, upper, scale, pole);
        let total = *continuous.cumulative.last().unwrap()
            + atoms.iter().map(|a| a.probability).sum::<f64>();
        check_total(total)?;
        Ok(PriceDistribution {
            lower,
            upper,
            continuous: Some(Continuous::InverseSquare(continuous)),
            atoms,
        })
    }

    /// Piecewise-linear continuous CDF through `(nodes[i], cumulative[i])`,
    /// starting at zero, plus `atoms`.
    pub fn tabulated(
        nodes: Vec<f64>,
        cumulative: Vec<f64>,
        atoms: Vec<Atom>,
    ) -> Result<Self, DistributionError> {
        if nodes.len() < 2 || nodes.len() != cumulative.len() {
            return Err(DistributionError::BadTable(format!(
                "{} nodes, {} values",
                nodes.len(),
                cumulative.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            return Err(DistributionError::BadTable(
                "nodes must be finite and strictly increasing".into(),
            ));
        }
        if cumulative[0] != 0.0 {
            return Err(DistributionError::BadTable(
                "cumulative values must start at 0".into(),
            ));
        }
        if cumulative.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(DistributionError::BadTable(
                "cumulative values must be nondecreasing".into(),
            ));
        }
        let lower = nodes[0];
        let upper = *nodes.last().unwrap();
        let mut atoms = atoms;
        check_atoms(&mut atoms, lower, upper)?;
        let total = *cumulative.last().unwrap() + atoms.iter().map(|a| a.probability).sum::<f64>();
        check_total(total)?;
        Ok(PriceDistribution {
            lower,
            upper,
            continuous: Some(Continuous::Tabulated(Tabulated { nodes, cumulative })),
            atoms,
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_degenerate(&self) -> bool {
        self.continuous.is_none() && self.atoms.len() == 1
    }

    pub fn continuous_mass(&self) -> f64 {
        self.continuous.as_ref().map_or(0.0, Continuous::mass)
    }

    /// Probability of charging exactly `price`.
    pub fn mass_at(&self, price: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.price == price)
            .map(|a| a.probability)
            .sum()
    }

    /// Density of the continuous part (zero outside its interval).
    pub fn density(&self, x: f64) -> f64 {
        self.continuous.as_ref().map_or(0.0, |c| c.density(x))
    }

    /// `P(X <= x)` contributed by the continuous part alone.
    pub fn continuous_cdf(&self, x: f64) -> f64 {
        self.continuous.as_ref().map_or(0.0, |c| c.cdf(x))
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.price <= x)
            .map(|a| a.probability)
            .sum();
        (self.continuous_cdf(x) + atoms).min(1.0)
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.price < x)
            .map(|a| a.probability)
            .sum();
        (self.continuous_cdf(x) + atoms).min(1.0)
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.price > x)
            .map(|a| a.probability)
            .sum();
        let cont = self.continuous_mass() - self.continuous_cdf(x);
        (cont.max(0.0) + atoms).min(1.0)
    }

    /// `∫ g(x) f(x) dx` over the continuous part, to absolute tolerance `tol`.
    ///
    /// `breakpoints` should list discontinuities of `g`.
    pub fn integrate_continuous<G: Fn(f64) -> f64>(
        &self,
        g: G,
        breakpoints: &[f64],
        tol: f64,
    ) -> f64 {
        match &self.continuous {
            None => 0.0,
            Some(Continuous::InverseSquare(d)) => {
                let mut cuts: Vec<f64> = d.nodes.clone();
                cuts.extend_from_slice(breakpoints);
                integrate_with_breakpoints(
                    |x| g(x) * d.density(x),
                    d.lower(),
                    d.upper(),
                    tol,
                    &cuts,
                )
                .value
            }
            Some(Continuous::Tabulated(d)) => {
                let mut cuts: Vec<f64> = breakpoints
                    .iter()
                    .copied()
                    .filter(|x| *x > d.lower() && *x < d.upper())
                    .collect();
                cuts.sort_by(f64::total_cmp);
                let mut total = 0.0;
                let mut next_cut = 0;
                for i in 0..d.nodes.len() - 1 {
                    let slope = d.slope(i);
                    if slope == 0.0 {
                        continue;
                    }
                    let (a, b) = (d.nodes[i], d.nodes[i + 1]);
                    let mut left = a;
                    while next_cut < cuts.len() && cuts[next_cut] < b {
                        if cuts[next_cut] > left {
                            total += slope * gauss_kronrod15(&g, left, cuts[next_cut]).0;
                            left = cuts[next_cut];
                        }
                        next_cut += 1;
                    }
                    total += slope * gauss_kronrod15(&g, left, b).0;
                }
                total
            }
        }
    }

    /// Expected price.
    pub fn mean(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.price * a.probability).sum();
        atoms + self.integrate_continuous(|x| x, &[], 1e-13)
    }

    /// Smallest `x` with `F(x) > level`, for `level` in `[0, 1)`.
    pub fn quantile(&self, level: f64) -> f64 {
        let mut passed = 0.0;
        for atom in &self.atoms {
            let before = self.continuous_cdf(atom.price) + passed;
            // Levels within rounding of the atom's left limit belong to it.
            if level < before - 4.0 * f64::EPSILON {
                return self.continuous_quantile(level - passed);
            }
            passed += atom.probability;
            if level < before + atom.probability {
                return atom.price;
            }
        }
        match &self.continuous {
            Some(c) => c.quantile(level - passed),
            None => self.atoms.last().map_or(self.upper, |a| a.price),
        }
    }

    fn continuous_quantile(&self, target: f64) -> f64 {
        match &self.continuous {
            Some(c) => c.quantile(target),
            None => self.lower,
        }
    }

    /// One inverse-transform draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if let [atom] = self.atoms.as_slice() {
            if self.continuous.is_none() {
                return atom.price;
            }
        }
        self.quantile(rng.random::<f64>())
    }

    /// Continuous-part table nodes plus support ends and atom locations.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut points = vec![self.lower, self.upper];
        if let Some(c) = &self.continuous {
            points.extend_from_slice(c.nodes());
        }
        points.extend(self.atoms.iter().map(|a| a.price));
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    pub fn summary(&self) -> DistributionSummary {
        let (kind, scale, pole) = match &self.continuous {
            None => ("discrete", None, None),
            Some(Continuous::InverseSquare(d)) => ("inverse-square", Some(d.scale), Some(d.pole)),
            Some(Continuous::Tabulated(_)) => ("tabulated", None, None),
        };
        DistributionSummary {
            kind,
            lower: self.lower,
            upper: self.upper,
            continuous_mass: self.continuous_mass(),
            point_masses: self.atoms.clone(),
            density_scale: scale,
            density_pole: pole,
        }
    }

    /// Measures the CDF invariants on a `grid`-point mesh over the support.
    pub fn invariants(&self, grid: usize) -> InvariantReport {
        let grid = grid.max(2);
        let width = self.upper - self.lower;
        let before = self.lower - width.max(self.lower.abs()).max(1.0) * 1e-9;
        let density_integral = match &self.continuous {
            None => 0.0,
            Some(c) => {
                let (a, b) = c.bounds();
                integrate_with_breakpoints(|x| c.density(x), a, b, 1e-13, c.nodes()).value
            }
        };
        let total_mass = density_integral + self.atoms.iter().map(|a| a.probability).sum::<f64>();
        let mut largest_decrease: f64 = 0.0;
        let mut smallest_density = f64::INFINITY;
        let mut previous = self.cdf(before);
        for i in 0..=grid {
            let x = if i == grid {
                self.upper
            } else {
                self.lower + width * i as f64 / grid as f64
            };
            let value = self.cdf(x);
            largest_decrease = largest_decrease.max(previous - value);
            previous = value;
            smallest_density = smallest_density.min(self.density(x));
        }
        InvariantReport {
            cdf_before_lower: self.cdf(before),
            cdf_at_upper: self.cdf(self.upper),
            total_mass,
            largest_cdf_decrease: largest_decrease,
            smallest_density,
        }
    }
}

/// `count` deterministic inverse-transform draws from `law`.
pub fn sample_prices(law: &PriceDistribution, seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| law.draw(&mut rng)).collect()
}

/// Largest CDF gap, checked on `points` uniform prices over the joint
/// support plus both sides of every atom and table node of either law.
pub fn kolmogorov_distance(a: &PriceDistribution, b: &PriceDistribution, points: usize) -> f64 {
    let lo = a.lower.min(b.lower);
    let hi = a.upper.max(b.upper);
    let points = points.max(2);
    let mut xs: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    xs.extend(a.breakpoints());
    xs.extend(b.breakpoints());
    xs.iter()
        .map(|&x| {
            let right = (a.cdf(x) - b.cdf(x)).abs();
            let left = (a.cdf_left(x) - b.cdf_left(x)).abs();
            right.max(left)
        })
        .fold(0.0, f64::max)
}

/// Total variation distance `½(∫|f_a − f_b| + Σ|m_a − m_b|)`.
///
/// Between consecutive breakpoints of either law the density difference is
/// assumed to change sign at most twice; sign changes are located by
/// bisection and each sign-definite piece is integrated exactly through CDF
/// differences.
pub fn total_variation(a: &PriceDistribution, b: &PriceDistribution) -> f64 {
    let mut cuts = a.breakpoints();
    cuts.extend(b.breakpoints());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let diff = |x: f64| a.density(x) - b.density(x);
    let mass = |lo: f64, hi: f64| {
        let da = a.continuous_cdf(hi) - a.continuous_cdf(lo);
        let db = b.continuous_cdf(hi) - b.continuous_cdf(lo);
        (da - db).abs()
    };
    let mut continuous = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if !(hi > lo) {
            continue;
        }
        let probes = [0.0, 1e-9, 0.5, 1.0 - 1e-9, 1.0].map(|t| lo + (hi - lo) * t);
        let mut edges = vec![lo];
        for pair in probes[1..4].windows(2) {
            let (x0, x1) = (pair[0], pair[1]);
            let (d0, d1) = (diff(x0), diff(x1));
            if d0.signum() != d1.signum() && d0 != 0.0 && d1 != 0.0 {
                let (mut l, mut r) = (x0, x1);
                for _ in 0..80 {
                    let m = 0.5 * (l + r);
                    if diff(m).signum() == d0.signum() {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                edges.push(0.5 * (l + r));
            }
        }
        edges.push(hi);
        continuous += edges.windows(2).map(|e| mass(e[0], e[1])).sum::<f64>();
    }
    let mut prices: Vec<f64> = a
        .atoms
        .iter()
        .chain(b.atoms.iter())
        .map(|x| x.price)
        .collect();
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    let atoms: f64 = prices
        .iter()
        .map(|&x| (a.mass_at(x) - b.mass_at(x)).abs())
        .sum();
    0.5 * (continuous + atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_low() -> PriceDistribution {
        // Benchmark low seller at u=2, c=1, r=(0.8, 0.9), k=1.4.
        let lower = 1.0 + 1.4 / 2.6 * 0.6;
        PriceDistribution::inverse_square(
            lower,
            1.6,
            1.36 / 1.2,
            1.0 - 0.2,
            vec![Atom {
                price: 1.6,
                probability: 0.25,
            }],
        )
        .unwrap()
    }

    #[test]
    fn point_law_samples_are_constant() {
        let law = PriceDistribution::point(1.6);
        assert_eq!(sample_prices(&law, 7, 10), vec![1.6; 10]);
        assert_eq!(law.mean(), 1.6);
        assert!(law.is_degenerate());
    }

    #[test]
    fn cdf_edges_and_atom() {
        let law = reference_low();
        assert_eq!(law.cdf(law.lower()), 0.0);
        assert!((law.cdf_left(1.6) - 0.75).abs() < 1e-9);
        assert!((law.cdf(1.6) - 1.0).abs() < 1e-9);
        assert_eq!(law.mass_at(1.6), 0.25);
        assert!(law.invariants(1000).holds(1e-9));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let law = reference_low();
        for level in [0.0, 0.1, 0.3, 0.5, 0.7, 0.749] {
            let x = law.quantile(level);
            assert!(
                (law.cdf(x) - level).abs() < 1e-12,
                "level {level}: F({x}) = {}",
                law.cdf(x)
            );
        }
        assert_eq!(law.quantile(0.75), 1.6);
        assert_eq!(law.quantile(0.999), 1.6);
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = reference_low();
        assert_eq!(sample_prices(&law, 11, 100), sample_prices(&law, 11, 100));
        assert_ne!(sample_prices(&law, 11, 100), sample_prices(&law, 12, 100));
    }

    #[test]
    fn rejects_unnormalized_density() {
        let err = PriceDistribution::inverse_square(1.0, 2.0, 1.0, 0.0, vec![]).unwrap_err();
        assert!(matches!(err, DistributionError::Normalization { .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            PriceDistribution::inverse_square(1.0, 2.0, 2.0, 1.5, vec![]),
            Err(DistributionError::PoleInsideSupport { .. })
        ));
        assert!(matches!(
            PriceDistribution::inverse_square(2.0, 1.0, 2.0, 0.0, vec![]),
            Err(DistributionError::InvalidSupport { .. })
        ));
        assert!(matches!(
            PriceDistribution::discrete(vec![Atom {
                price: 1.0,
                probability: -0.5
            }]),
            Err(DistributionError::BadProbability(_))
        ));
        assert!(matches!(
            PriceDistribution::tabulated(
                vec![0.0, 1.0],
                vec![0.0, 0.5],
                vec![Atom {
                    price: 3.0,
                    probability: 0.5
                }]
            ),
            Err(DistributionError::AtomOutsideSupport { .. })
        ));
    }

    #[test]
    fn tabulated_linear_law() {
        let law = PriceDistribution::tabulated(
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.25, 0.5],
            vec![Atom {
                price: 2.0,
                probability: 0.5,
            }],
        )
        .unwrap();
        assert!((law.cdf(1.5) - 0.375).abs() < 1e-15);
        assert!((law.quantile(0.375) - 1.5).abs() < 1e-15);
        assert_eq!(law.quantile(0.6), 2.0);
        // Uniform 0.25 density on [0, 2] plus half the mass at 2.
        assert!((law.mean() - 1.5).abs() < 1e-14, "{}", law.mean());
        assert!(law.invariants(100).holds(1e-12));
    }

    #[test]
    fn distances_vanish_on_identical_laws() {
        let law = reference_low();
        assert_eq!(kolmogorov_distance(&law, &law, 1000), 0.0);
        assert!(total_variation(&law, &law) < 1e-15);
        let shifted = PriceDistribution::point(1.0);
        let point = PriceDistribution::point(2.0);
        assert!((total_variation(&shifted, &point) - 1.0).abs() < 1e-15);
        assert_eq!(kolmogorov_distance(&shifted, &point, 10), 1.0);
    }

    #[test]
    fn total_variation_of_uniforms() {
        // U[0,1] vs U[0,2]: TV = 1/2.
        let a = PriceDistribution::tabulated(vec![0.0, 1.0], vec![0.0, 1.0], vec![]).unwrap();
        let b = PriceDistribution::tabulated(vec![0.0, 2.0], vec![0.0, 1.0], vec![]).unwrap();
        assert!((total_variation(&a, &b) - 0.5).abs() < 1e-12);
    }
}
