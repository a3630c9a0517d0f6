//! Offering-level marketplace data: ingest, clean, standardize, then
//! regress standardized price on sales, comments and rating, and compare
//! sellers above and below the median rating.

pub mod clean;
pub mod ingest;
pub mod stats;

pub use clean::{clean, AuditEntry, CleanConfig, CleanRule, Cleaned};
pub use ingest::{ingest, ingest_reader, Diagnostic, Flags, IngestError, Ingested, OfferingRecord};
pub use stats::{
    median_split_ttest, regress, regress_arrays, significance_stars, standardize,
    standardize_values, summarize, welch_ttest, CategorySummary, Coefficient, DegenerateGroup,
    Direction, GroupStats, RegressionResult, Standardized, StandardizedRecord, StatsError,
    TTestResult, WelchTest,
};
