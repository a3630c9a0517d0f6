//! Per-product standardization, OLS with classical standard errors, Welch
//! tests and descriptive tables.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use super::ingest::OfferingRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("the {0} group is empty")]
    EmptyGroup(&'static str),
    #[error("the {0} group needs at least two observations")]
    GroupTooSmall(&'static str),
    #[error("input columns have different lengths")]
    LengthMismatch,
}

/// A product whose prices cannot be standardized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateGroup {
    pub category: String,
    pub product: String,
    pub size: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizedRecord {
    pub record: OfferingRecord,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Standardized {
    pub records: Vec<StandardizedRecord>,
    pub excluded: Vec<DegenerateGroup>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); `None` below two values.
fn sample_sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// z-scores with the sample standard deviation.
pub fn standardize_values(xs: &[f64]) -> Result<Vec<f64>, String> {
    if xs.len() < 2 {
        return Err(format!("{} price(s); need at least two", xs.len()));
    }
    let m = mean(xs);
    let sd = sample_sd(xs).unwrap_or(0.0);
    if !(sd > 0.0) {
        return Err("all prices are equal".into());
    }
    Ok(xs.iter().map(|x| (x - m) / sd).collect())
}

/// Standardizes prices within each (category, product) group, keeping
/// input order. Groups that cannot be standardized are excluded.
pub fn standardize(records: &[OfferingRecord]) -> Standardized {
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry((&r.category, &r.product)).or_default().push(i);
    }
    let mut z = vec![None; records.len()];
    let mut excluded = Vec::new();
    for ((category, product), members) in groups {
        let prices: Vec<f64> = members.iter().map(|i| records[*i].price).collect();
        match standardize_values(&prices) {
            Ok(values) => {
                for (i, v) in members.iter().zip(values) {
                    z[*i] = Some(v);
                }
            }
            Err(reason) => excluded.push(DegenerateGroup {
                category: category.to_string(),
                product: product.to_string(),
                size: members.len(),
                reason,
            }),
        }
    }
    Standardized {
        records: records
            .iter()
            .zip(z)
            .filter_map(|(r, z)| {
                z.map(|z| StandardizedRecord {
                    record: r.clone(),
                    z,
                })
            })
            .collect(),
        excluded,
    }
}

/// `***` below 0.01, `**` below 0.05, `*` below 0.10.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.10 {
        "*"
    } else {
        ""
    }
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub name: &'static str,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub category: String,
    pub n: usize,
    pub df: usize,
    pub r_squared: f64,
    /// Intercept, sales, comments, rating.
    pub coefficients: Vec<Coefficient>,
}

impl RegressionResult {
    /// Two-sided confidence interval for coefficient `index` at `level`.
    pub fn confidence_interval(&self, index: usize, level: f64) -> (f64, f64) {
        let c = &self.coefficients[index];
        let dist = StudentsT::new(0.0, 1.0, self.df as f64).expect("positive degrees of freedom");
        let q = dist.inverse_cdf(0.5 + level / 2.0);
        (c.estimate - q * c.std_error, c.estimate + q * c.std_error)
    }
}

const NAMES: [&str; 4] = ["intercept", "sales", "comments", "rating"];

/// OLS of `y` on an intercept and the three regressors.
pub fn regress_arrays(
    y: &[f64],
    sales: &[f64],
    comments: &[f64],
    rating: &[f64],
) -> Result<RegressionResult, StatsError> {
    let n = y.len();
    if sales.len() != n || comments.len() != n || rating.len() != n {
        return Err(StatsError::LengthMismatch);
    }
    let p = NAMES.len();
    if n < 5 {
        return Err(StatsError::InsufficientData { needed: 5, have: n });
    }
    let column = |j: usize, i: usize| match j {
        0 => 1.0,
        1 => sales[i],
        2 => comments[i],
        _ => rating[i],
    };
    // Columns are scaled to unit max-norm before the factorization.
    let scale: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| column(j, i).abs()).fold(0.0, f64::max))
        .collect();
    if scale.contains(&0.0) {
        return Err(StatsError::RankDeficient);
    }
    let x = DMatrix::from_fn(n, p, |i, j| column(j, i) / scale[j]);
    let qr = x.clone().qr();
    let r = qr.r();
    let diag_max = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    if (0..p).any(|j| r[(j, j)].abs() <= 1e-10 * diag_max) {
        return Err(StatsError::RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let scaled_beta = r
        .solve_upper_triangular(&qty)
        .ok_or(StatsError::RankDeficient)?;
    let residuals = &yv - &x * &scaled_beta;
    let rss = residuals.norm_squared();
    let df = n - p;
    let sigma2 = rss / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(StatsError::RankDeficient)?;
    let cov = &r_inv * r_inv.transpose();
    let y_mean = mean(y);
    let tss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let coefficients = (0..p)
        .map(|j| {
            let estimate = scaled_beta[j] / scale[j];
            let std_error = (sigma2 * cov[(j, j)]).sqrt() / scale[j];
            let t_stat = if std_error > 0.0 {
                estimate / std_error
            } else if estimate == 0.0 {
                0.0
            } else {
                estimate.signum() * f64::INFINITY
            };
            let p_value = two_sided_p(t_stat, df as f64);
            Coefficient {
                name: NAMES[j],
                estimate,
                std_error,
                t_stat,
                p_value,
                stars: significance_stars(p_value),
            }
        })
        .collect();
    Ok(RegressionResult {
        category: String::new(),
        n,
        df,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { f64::NAN },
        coefficients,
    })
}

/// Regresses standardized price on sales, comments and rating within one
/// category. Unrated records are skipped.
pub fn regress(
    records: &[StandardizedRecord],
    category: &str,
) -> Result<RegressionResult, StatsError> {
    let rows: Vec<&StandardizedRecord> = records
        .iter()
        .filter(|r| r.record.category == category && r.record.rating.is_some())
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.z).collect();
    let sales: Vec<f64> = rows.iter().map(|r| r.record.sales as f64).collect();
    let comments: Vec<f64> = rows.iter().map(|r| r.record.comments as f64).collect();
    let rating: Vec<f64> = rows.iter().map(|r| r.record.rating.unwrap()).collect();
    let mut result = regress_arrays(&y, &sales, &comments, &rating)?;
    result.category = category.to_string();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Sign of `mean_low - mean_high`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    LowHigher,
    LowLower,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchTest {
    pub low: GroupStats,
    pub high: GroupStats,
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub direction: Direction,
}

/// Welch's unequal-variance t-test of `low` against `high`, two-sided.
pub fn welch_ttest(low: &[f64], high: &[f64]) -> Result<WelchTest, StatsError> {
    for (name, xs) in [("low", low), ("high", high)] {
        if xs.is_empty() {
            return Err(StatsError::EmptyGroup(name));
        }
        if xs.len() < 2 {
            return Err(StatsError::GroupTooSmall(name));
        }
    }
    let stats = |xs: &[f64]| GroupStats {
        n: xs.len(),
        mean: mean(xs),
        sd: sample_sd(xs).expect("two or more values"),
    };
    let (a, b) = (stats(low), stats(high));
    let va = a.sd * a.sd / a.n as f64;
    let vb = b.sd * b.sd / b.n as f64;
    let diff = a.mean - b.mean;
    let se = (va + vb).sqrt();
    let (t, df) = if se > 0.0 {
        let df = (va + vb).powi(2) / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
        (diff / se, df)
    } else {
        let t = if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        (t, (a.n + b.n - 2) as f64)
    };
    let direction = if diff > 0.0 {
        Direction::LowHigher
    } else if diff < 0.0 {
        Direction::LowLower
    } else {
        Direction::Equal
    };
    Ok(WelchTest {
        low: a,
        high: b,
        t,
        df,
        p_value: two_sided_p(t, df),
        direction,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestResult {
    pub category: String,
    pub median_rating: f64,
    #[serde(flatten)]
    pub test: WelchTest,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Splits a category at its median rating (ratings below the median are
/// "low", the rest "high") and compares standardized prices.
pub fn median_split_ttest(
    records: &[StandardizedRecord],
    category: &str,
) -> Result<TTestResult, StatsError> {
    let rows: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.record.category == category)
        .filter_map(|r| r.record.rating.map(|rating| (rating, r.z)))
        .collect();
    if rows.is_empty() {
        return Err(StatsError::EmptyGroup("low"));
    }
    let mut ratings: Vec<f64> = rows.iter().map(|r| r.0).collect();
    ratings.sort_by(f64::total_cmp);
    let m = median(&ratings);
    let low: Vec<f64> = rows.iter().filter(|r| r.0 < m).map(|r| r.1).collect();
    let high: Vec<f64> = rows.iter().filter(|r| r.0 >= m).map(|r| r.1).collect();
    Ok(TTestResult {
        category: category.to_string(),
        median_rating: m,
        test: welch_ttest(&low, &high)?,
    })
}

/// Descriptive statistics of one category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: String,
    pub products: usize,
    pub offerings: usize,
    pub min_price: f64,
    pub max_price: f64,
    pub min_standardized: Option<f64>,
    pub max_standardized: Option<f64>,
    pub rating_mean: Option<f64>,
    pub rating_median: Option<f64>,
    pub rating_sd: Option<f64>,
    pub rating_min: Option<f64>,
    pub rating_max: Option<f64>,
    pub above_4_0: usize,
    pub above_4_0_pct: f64,
    pub above_4_5: usize,
    pub above_4_5_pct: f64,
    pub notes: Vec<String>,
}

/// One summary per category, sorted by name. Rating counts use strict
/// inequalities.
pub fn summarize(records: &[OfferingRecord], standardized: &Standardized) -> Vec<CategorySummary> {
    let mut by_category: BTreeMap<&str, Vec<&OfferingRecord>> = BTreeMap::new();
    for r in records {
        by_category.entry(&r.category).or_default().push(r);
    }
    by_category
        .into_iter()
        .map(|(category, rows)| {
            let products: BTreeSet<&str> = rows.iter().map(|r| r.product.as_str()).collect();
            let prices: Vec<f64> = rows.iter().map(|r| r.price).collect();
            let mut ratings: Vec<f64> = rows.iter().filter_map(|r| r.rating).collect();
            ratings.sort_by(f64::total_cmp);
            let z: Vec<f64> = standardized
                .records
                .iter()
                .filter(|s| s.record.category == category)
                .map(|s| s.z)
                .collect();
            let mut notes = Vec::new();
            let rating_sd = sample_sd(&ratings);
            if rating_sd.is_none() {
                notes.push("rating SD undefined for fewer than two ratings".to_string());
            }
            if z.is_empty() {
                notes.push("no standardized prices".to_string());
            }
            let count = |cut: f64| ratings.iter().filter(|r| **r > cut).count();
            let pct = |k: usize| {
                if ratings.is_empty() {
                    0.0
                } else {
                    100.0 * k as f64 / ratings.len() as f64
                }
            };
            let (above_4_0, above_4_5) = (count(4.0), count(4.5));
            let extreme = |xs: &[f64], f: fn(f64, f64) -> f64| xs.iter().copied().reduce(f);
            CategorySummary {
                category: category.to_string(),
                products: products.len(),
                offerings: rows.len(),
                min_price: extreme(&prices, f64::min).unwrap_or(f64::NAN),
                max_price: extreme(&prices, f64::max).unwrap_or(f64::NAN),
                min_standardized: extreme(&z, f64::min),
                max_standardized: extreme(&z, f64::max),
                rating_mean: (!ratings.is_empty()).then(|| mean(&ratings)),
                rating_median: (!ratings.is_empty()).then(|| median(&ratings)),
                rating_sd,
                rating_min: ratings.first().copied(),
                rating_max: ratings.last().copied(),
                above_4_0,
                above_4_0_pct: pct(above_4_0),
                above_4_5,
                above_4_5_pct: pct(above_4_5),
                notes,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_standardization() {
        let z = standardize_values(&[10.0, 20.0]).unwrap();
        assert!((z[0] + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((z[1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(standardize_values(&[5.0, 5.0, 5.0]).is_err());
    }

    #[test]
    fn welch_hand_case() {
        let t = welch_ttest(&[1.0, 1.2, 0.8], &[-0.5, -0.3, -0.7]).unwrap();
        let expected = 1.5 / (0.04f64 / 3.0 + 0.04 / 3.0).sqrt();
        assert!((t.t - expected).abs() < 1e-6, "{}", t.t);
        assert!((t.t - 9.186).abs() < 1e-3);
        assert!((t.df - 4.0).abs() < 1e-9);
        assert_eq!(t.direction, Direction::LowHigher);
    }

    #[test]
    fn identical_groups_give_zero_t() {
        let t = welch_ttest(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.t, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.direction, Direction::Equal);
    }

    #[test]
    fn stars_follow_thresholds() {
        assert_eq!(significance_stars(0.009), "***");
        assert_eq!(significance_stars(0.01), "**");
        assert_eq!(significance_stars(0.049), "**");
        assert_eq!(significance_stars(0.05), "*");
        assert_eq!(significance_stars(0.0999), "*");
        assert_eq!(significance_stars(0.1), "");
    }

    #[test]
    fn constant_rating_is_rank_deficient() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = [1.0, 5.0, 2.0, 8.0, 3.0, 9.0];
        let c = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0];
        let r = [4.5; 6];
        assert_eq!(
            regress_arrays(&y, &s, &c, &r),
            Err(StatsError::RankDeficient)
        );
        assert_eq!(
            regress_arrays(&y[..4], &s[..4], &c[..4], &[1.0, 2.0, 3.0, 4.0]),
            Err(StatsError::InsufficientData { needed: 5, have: 4 })
        );
    }
}
