//! CSV input with header
//! `category,product,seller_id,rating,sales,comments,price,flags[,variant_group]`.
//!
//! `flags` holds `;`-separated tokens from `used`, `official` and
//! `no_rating`; it may be absent. An empty rating cell marks the row as
//! unrated. Rows that fail to parse become diagnostics.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("cannot read input: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub used: bool,
    pub official: bool,
    pub no_rating: bool,
}

impl Flags {
    fn parse(text: &str) -> Result<Self, String> {
        let mut flags = Flags::default();
        for token in text.split(';').map(str::trim).filter(|t| !t.is_empty()) {
            match token.to_ascii_lowercase().as_str() {
                "used" => flags.used = true,
                "official" => flags.official = true,
                "no_rating" => flags.no_rating = true,
                other => return Err(format!("unknown flag `{other}`")),
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferingRecord {
    /// 1-based line number in the source file.
    pub row: u64,
    pub category: String,
    pub product: String,
    pub seller_id: String,
    pub rating: Option<f64>,
    pub sales: u64,
    pub comments: u64,
    pub price: f64,
    pub flags: Flags,
    pub variant_group: Option<String>,
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub row: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Ingested {
    pub records: Vec<OfferingRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

const REQUIRED: [&str; 7] = [
    "category",
    "product",
    "seller_id",
    "rating",
    "sales",
    "comments",
    "price",
];

struct Columns {
    required: [usize; 7],
    flags: Option<usize>,
    variant_group: Option<usize>,
}

impl Columns {
    fn locate(header: &csv::StringRecord) -> Result<Self, IngestError> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let mut required = [0; 7];
        for (slot, name) in required.iter_mut().zip(REQUIRED) {
            *slot = find(name).ok_or(IngestError::MissingColumn(name))?;
        }
        Ok(Columns {
            required,
            flags: find("flags"),
            variant_group: find("variant_group"),
        })
    }
}

fn parse_row(
    row: u64,
    cells: &csv::StringRecord,
    cols: &Columns,
) -> Result<OfferingRecord, String> {
    let cell = |i: usize| cells.get(i).map(str::trim).unwrap_or("");
    let [category, product, seller, rating, sales, comments, price] = cols.required.map(cell);
    if category.is_empty() || product.is_empty() || seller.is_empty() {
        return Err("category, product and seller_id must be non-empty".into());
    }
    let mut flags = match cols.flags {
        Some(i) => Flags::parse(cell(i))?,
        None => Flags::default(),
    };
    let rating = if rating.is_empty() {
        flags.no_rating = true;
        None
    } else {
        let r: f64 = rating
            .parse()
            .map_err(|_| format!("rating `{rating}` is not a number"))?;
        if !(1.0..=5.0).contains(&r) {
            return Err(format!("rating {r} outside [1, 5]"));
        }
        Some(r)
    };
    let sales: u64 = sales
        .parse()
        .map_err(|_| format!("sales `{sales}` is not a nonnegative integer"))?;
    let comments: u64 = comments
        .parse()
        .map_err(|_| format!("comments `{comments}` is not a nonnegative integer"))?;
    let price: f64 = price
        .parse()
        .map_err(|_| format!("price `{price}` is not a number"))?;
    if !(price.is_finite() && price > 0.0) {
        return Err(format!("price {price} must be positive"));
    }
    let variant_group = cols
        .variant_group
        .map(cell)
        .filter(|v| !v.is_empty())
        .map(str::to_string);
    Ok(OfferingRecord {
        row,
        category: category.to_string(),
        product: product.to_string(),
        seller_id: seller.to_string(),
        rating,
        sales,
        comments,
        price,
        flags,
        variant_group,
    })
}

pub fn ingest_reader<R: Read>(reader: R) -> Result<Ingested, IngestError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let cols = Columns::locate(csv.headers()?)?;
    let mut out = Ingested::default();
    for result in csv.records() {
        let cells = result?;
        let row = cells.position().map_or(0, |p| p.line());
        match parse_row(row, &cells, &cols) {
            Ok(record) => out.records.push(record),
            Err(message) => out.diagnostics.push(Diagnostic { row, message }),
        }
    }
    Ok(out)
}

pub fn ingest(path: impl AsRef<Path>) -> Result<Ingested, IngestError> {
    ingest_reader(File::open(path)?)
}
