//! Cleaning rules, applied in order:
//!
//! 1. drop unrated sellers;
//! 2. drop used or refurbished offerings;
//! 3. drop official sellers;
//! 4. per product, drop prices more than five sample standard deviations
//!    from the product mean (one pass, statistics taken before removal);
//! 5. for products with a configured keyword, keep only offerings whose
//!    variant label contains it;
//! 6. when enabled, merge rows of one seller that share a product and
//!    variant label (colour variants) into one row at the mean price,
//!    rounded half-up to an integer.
//!
//! Every input row ends up either kept or in the audit log, never both.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ingest::OfferingRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanRule {
    NoRating,
    Used,
    Official,
    PriceOutlier,
    VariantKeyword,
    MergedVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub row: u64,
    pub rule: CleanRule,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    /// Outlier cutoff in standard deviations.
    pub outlier_sds: f64,
    /// Product name to the configuration keyword its variant label must
    /// contain (case-insensitive).
    pub variant_keywords: BTreeMap<String, String>,
    /// Merge colour variants sharing seller, product and variant label.
    pub average_variants: bool,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            outlier_sds: 5.0,
            variant_keywords: BTreeMap::new(),
            average_variants: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Cleaned {
    pub kept: Vec<OfferingRecord>,
    pub audit: Vec<AuditEntry>,
}

/// Half-up rounding to an integer.
fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

pub fn clean(records: &[OfferingRecord], config: &CleanConfig) -> Cleaned {
    let mut audit = Vec::new();
    let mut drop =
        |row: u64, rule: CleanRule, reason: String| audit.push(AuditEntry { row, rule, reason });

    let mut survivors: Vec<&OfferingRecord> = Vec::with_capacity(records.len());
    for r in records {
        if r.flags.no_rating || r.rating.is_none() {
            drop(r.row, CleanRule::NoRating, "seller has no rating".into());
        } else if r.flags.used {
            drop(
                r.row,
                CleanRule::Used,
                "used or refurbished offering".into(),
            );
        } else if r.flags.official {
            drop(r.row, CleanRule::Official, "official seller".into());
        } else {
            survivors.push(r);
        }
    }

    let mut groups: HashMap<(&str, &str), Vec<f64>> = HashMap::new();
    for r in &survivors {
        groups
            .entry((r.category.as_str(), r.product.as_str()))
            .or_default()
            .push(r.price);
    }
    let stats: HashMap<(&str, &str), (f64, f64)> = groups
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(key, v)| (key, mean_and_sd(&v)))
        .collect();
    let mut inliers = Vec::with_capacity(survivors.len());
    for r in survivors {
        if let Some((mean, sd)) = stats.get(&(r.category.as_str(), r.product.as_str())) {
            let cutoff = config.outlier_sds * sd;
            if (r.price - mean).abs() > cutoff {
                drop(
                    r.row,
                    CleanRule::PriceOutlier,
                    format!(
                        "price {} is more than {} SD from the product mean {mean:.4} (SD {sd:.4})",
                        r.price, config.outlier_sds
                    ),
                );
                continue;
            }
        }
        inliers.push(r);
    }

    let mut matched = Vec::with_capacity(inliers.len());
    for r in inliers {
        if let Some(keyword) = config.variant_keywords.get(&r.product) {
            let label = r.variant_group.as_deref().unwrap_or("");
            if !label.to_lowercase().contains(&keyword.to_lowercase()) {
                drop(
                    r.row,
                    CleanRule::VariantKeyword,
                    format!("variant `{label}` lacks configuration keyword `{keyword}`"),
                );
                continue;
            }
        }
        matched.push(r);
    }

    let mut kept: Vec<OfferingRecord> = Vec::with_capacity(matched.len());
    if config.average_variants {
        // Rows sharing a key merge into the first one seen.
        let mut members: Vec<Vec<&OfferingRecord>> = Vec::new();
        let mut slot: HashMap<(&str, &str, &str, &str), usize> = HashMap::new();
        for r in matched {
            match r.variant_group.as_deref() {
                Some(group) => {
                    let key = (
                        r.category.as_str(),
                        r.product.as_str(),
                        r.seller_id.as_str(),
                        group,
                    );
                    let i = *slot.entry(key).or_insert_with(|| {
                        members.push(Vec::new());
                        members.len() - 1
                    });
                    members[i].push(r);
                }
                None => members.push(vec![r]),
            }
        }
        for group in members {
            let first = group[0];
            let mut merged = first.clone();
            if group.len() > 1 {
                let mean = group.iter().map(|r| r.price).sum::<f64>() / group.len() as f64;
                merged.price = round_half_up(mean);
                for other in &group[1..] {
                    drop(
                        other.row,
                        CleanRule::MergedVariant,
                        format!(
                            "merged into row {} at averaged price {}",
                            first.row, merged.price
                        ),
                    );
                }
            }
            kept.push(merged);
        }
    } else {
        kept.extend(matched.into_iter().cloned());
    }
    audit.sort_by_key(|e| e.row);
    Cleaned { kept, audit }
}
