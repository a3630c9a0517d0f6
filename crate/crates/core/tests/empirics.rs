use std::collections::BTreeMap;
use std::io::Write;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StudentT};

use repricing::empirics::{
    clean, ingest, median_split_ttest, standardize, standardize_values, summarize, welch_ttest,
    CleanConfig, Direction, Flags, IngestError, OfferingRecord,
};

fn record(
    row: u64,
    product: &str,
    seller: &str,
    rating: Option<f64>,
    price: f64,
) -> OfferingRecord {
    OfferingRecord {
        row,
        category: "phone".into(),
        product: product.into(),
        seller_id: seller.into(),
        rating,
        sales: row * 3,
        comments: row,
        price,
        flags: Flags {
            no_rating: rating.is_none(),
            ..Flags::default()
        },
        variant_group: None,
    }
}

#[test]
fn ingests_file_and_reports_bad_rows() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(
        file,
        "category,product,seller_id,rating,sales,comments,price,flags,variant_group"
    )
    .unwrap();
    writeln!(file, "tv,A,s1,4.5,10,2,999.5,,").unwrap();
    writeln!(file, "tv,A,s2,,0,0,1000,official,").unwrap();
    writeln!(file, "tv,A,s3,7.5,1,1,1001,,").unwrap();
    writeln!(file, "tv,A,s4,4.0,1,1,cheap,,").unwrap();
    writeln!(file, "tv,A,s5,4.0,1,1,990,refurbished,").unwrap();
    let got = ingest(file.path()).unwrap();
    assert_eq!(got.records.len(), 2);
    assert_eq!(got.records[0].row, 2);
    assert_eq!(got.records[0].price, 999.5);
    assert!(got.records[1].flags.no_rating && got.records[1].flags.official);
    let rows: Vec<u64> = got.diagnostics.iter().map(|d| d.row).collect();
    assert_eq!(rows, vec![4, 5, 6]);
}

#[test]
fn missing_column_is_an_error() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "category,product,seller_id,sales,comments,price").unwrap();
    writeln!(file, "tv,A,s1,10,2,999").unwrap();
    assert!(matches!(
        ingest(file.path()),
        Err(IngestError::MissingColumn("rating"))
    ));
}

#[test]
fn summary_counts_ratings_strictly() {
    let rows = vec![
        record(2, "P", "a", Some(4.9), 100.0),
        record(3, "P", "b", Some(4.5), 110.0),
        record(4, "P", "c", Some(4.2), 120.0),
        record(5, "P", "d", Some(3.9), 130.0),
        record(6, "P", "e", None, 140.0),
    ];
    let s = summarize(&rows, &standardize(&rows));
    assert_eq!(s.len(), 1);
    let s = &s[0];
    assert_eq!((s.above_4_0, s.above_4_5), (3, 1));
    assert_eq!((s.above_4_0_pct, s.above_4_5_pct), (75.0, 25.0));
    assert_eq!(s.rating_median, Some(4.35));
    assert_eq!((s.min_price, s.max_price), (100.0, 140.0));
}

#[test]
fn singleton_products_are_excluded_from_standardization() {
    let rows = vec![
        record(2, "P", "a", Some(4.0), 10.0),
        record(3, "P", "b", Some(4.0), 20.0),
        record(4, "Q", "a", Some(4.0), 10.0),
        record(5, "R", "a", Some(4.0), 7.0),
        record(6, "R", "b", Some(4.0), 7.0),
    ];
    let s = standardize(&rows);
    assert_eq!(s.records.len(), 2);
    let excluded: Vec<&str> = s.excluded.iter().map(|g| g.product.as_str()).collect();
    assert_eq!(excluded, vec!["Q", "R"]);
}

#[test]
fn welch_statistic_is_antisymmetric() {
    let a = [4.1, 3.9, 4.4, 4.0, 4.2];
    let b = [3.0, 3.5, 2.9, 3.8];
    let ab = welch_ttest(&a, &b).unwrap();
    let ba = welch_ttest(&b, &a).unwrap();
    assert!((ab.t + ba.t).abs() < 1e-12);
    assert!((ab.df - ba.df).abs() < 1e-12);
    assert!((ab.p_value - ba.p_value).abs() < 1e-12);
    assert_eq!(ab.direction, Direction::LowHigher);
    assert_eq!(ba.direction, Direction::LowLower);
}

#[test]
fn welch_p_values_are_calibrated_under_the_null() {
    // Same-mean Student-t samples: about 5% of tests reject at 0.05.
    let noise = StudentT::new(10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rejections = 0;
    for _ in 0..2000 {
        let a: Vec<f64> = (0..30).map(|_| noise.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..20).map(|_| 2.0 * noise.sample(&mut rng)).collect();
        if welch_ttest(&a, &b).unwrap().p_value < 0.05 {
            rejections += 1;
        }
    }
    assert!((60..=140).contains(&rejections), "{rejections} rejections");
}

#[test]
fn median_split_compares_standardized_prices() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut rows = Vec::new();
    for i in 0..200u64 {
        let rating = if i % 2 == 0 { 4.8 } else { 4.2 };
        let premium = if rating > 4.5 { 30.0 } else { 0.0 };
        let product = format!("P{}", (i / 2) % 10);
        rows.push(record(
            i + 2,
            &product,
            &format!("s{i}"),
            Some(rating),
            1000.0 + premium + rng.random_range(-5.0..5.0),
        ));
    }
    let s = standardize(&rows);
    let r = median_split_ttest(&s.records, "phone").unwrap();
    assert_eq!(r.median_rating, 4.5);
    assert_eq!(r.test.direction, Direction::LowLower);
    assert!(r.test.p_value < 1e-6);
}

fn arb_record() -> impl Strategy<Value = OfferingRecord> {
    (
        0usize..3,
        0usize..3,
        proptest::option::weighted(0.9, 1.0f64..=5.0),
        100.0f64..110.0,
        any::<bool>(),
        any::<bool>(),
        proptest::option::of(prop_oneof![
            Just("128G Red"),
            Just("256g blue"),
            Just("256G")
        ]),
    )
        .prop_map(
            |(product, seller, rating, price, used, official, variant)| OfferingRecord {
                row: 0,
                category: "phone".into(),
                product: format!("P{product}"),
                seller_id: format!("s{seller}"),
                rating,
                sales: 1,
                comments: 1,
                price: price.round(),
                flags: Flags {
                    used,
                    official,
                    no_rating: rating.is_none(),
                },
                variant_group: variant.map(String::from),
            },
        )
}

proptest! {
    // Fewer than 26 rows per product, so no price can sit five sample SDs
    // from its group mean and every rule is idempotent.
    #[test]
    fn cleaning_is_idempotent(mut rows in proptest::collection::vec(arb_record(), 0..25), average in any::<bool>()) {
        for (i, r) in rows.iter_mut().enumerate() {
            r.row = i as u64 + 2;
        }
        let mut keywords = BTreeMap::new();
        keywords.insert("P0".to_string(), "256g".to_string());
        let config = CleanConfig { variant_keywords: keywords, average_variants: average, ..CleanConfig::default() };
        let once = clean(&rows, &config);
        let twice = clean(&once.kept, &config);
        prop_assert_eq!(&twice.kept, &once.kept);
        prop_assert!(twice.audit.is_empty());
        prop_assert_eq!(once.kept.len() + once.audit.len(), rows.len());
    }

    #[test]
    fn standardized_values_have_zero_mean_unit_sd(xs in proptest::collection::vec(-1e4f64..1e4, 2..60)) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-6));
        let z = standardize_values(&xs).unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!((var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn standardizing_twice_changes_nothing(xs in proptest::collection::vec(-1e4f64..1e4, 2..60)) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-6));
        let once = standardize_values(&xs).unwrap();
        let twice = standardize_values(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn standardization_ignores_affine_price_changes(
        xs in proptest::collection::vec(0.0f64..1e3, 2..30),
        scale in 0.01f64..100.0,
        shift in -1e3f64..1e3,
    ) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-3));
        let a = standardize_values(&xs).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let b = standardize_values(&moved).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-7);
        }
    }
}
