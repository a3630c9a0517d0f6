//! Command-line front end: every subcommand writes its results into
//! `--out`, finishing with `manifest.json`.
//!
//! Exit status: 0 success, 1 I/O failure, 2 invalid parameters or input,
//! 3 a certificate or statistical check failed (artifacts are still
//! written).

mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use repricing::comparative::{
    competition_effect_report, find_threshold, interior_grid, premium_map, threshold_sweep,
    PremiumMap,
};
use repricing::distribution::Atom;
use repricing::empirics::{self, CleanConfig};
use repricing::equilibrium::{equilibrium, equilibrium_profit, expected_prices, EquilibriumReport};
use repricing::oracle::verify_seats;
use repricing::sim::{simulate, simulate_trace, SimulationConfig, MIN_CHECK_ROUNDS};
use repricing::{validate_params, MarketParams, ModelKind, PriceDistribution, RawParams, Role};

use output::{Cell, Failure, Outputs};

#[derive(Parser)]
#[command(
    name = "repricing",
    version,
    about = "Reputation-dependent price competition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form equilibrium and CDF grids.
    Equilibrium {
        #[command(flatten)]
        common: Common,
        /// Grid points per support.
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Deviation certificate for the closed-form equilibrium.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2001)]
        grid: usize,
        /// Allowed gain as a fraction of equilibrium profit.
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        /// Move the low seller's point mass to this price before verifying
        /// (benchmark only).
        #[arg(long)]
        move_mass: Option<f64>,
    },
    /// Monte-Carlo market replay with equilibrium strategies.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        rounds: u64,
        /// Also write every round.
        #[arg(long)]
        trace: bool,
    },
    /// Premium thresholds and premium maps for both games.
    Threshold {
        #[command(flatten)]
        common: Common,
        /// Search-cost grid points.
        #[arg(long, default_value_t = 512)]
        grid: usize,
    },
    /// Threshold ordering over randomly drawn markets.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Offering-data pipeline on a CSV file.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Cleaning configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Market parameters as JSON: {"u", "c", "r_L", "r_H", "k", "n"}.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "r-low")]
    r_low: Option<f64>,
    #[arg(long = "r-high")]
    r_high: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value = "benchmark", value_parser = parse_model)]
    model: ModelKind,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialParams {
    u: Option<f64>,
    c: Option<f64>,
    #[serde(rename = "r_L")]
    r_low: Option<f64>,
    #[serde(rename = "r_H")]
    r_high: Option<f64>,
    k: Option<f64>,
    n: Option<f64>,
}

impl Common {
    /// File values overridden by inline flags. `n` defaults to 100; a
    /// missing `k` falls back to `default_k(u)` when given.
    fn params(&self, default_k: Option<fn(f64) -> f64>) -> Result<MarketParams, Failure> {
        let mut base = PartialParams::default();
        if let Some(path) = &self.params {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
            base = serde_json::from_str(&text).map_err(|e| {
                Failure::Invalid(format!("bad parameter file {}: {e}", path.display()))
            })?;
        }
        let u = self.u.or(base.u);
        let k = self
            .k
            .or(base.k)
            .or_else(|| default_k.zip(u).map(|(f, u)| f(u)));
        let fields = [
            ("u", u),
            ("c", self.c.or(base.c)),
            ("r_L", self.r_low.or(base.r_low)),
            ("r_H", self.r_high.or(base.r_high)),
            ("k", k),
        ];
        let missing: Vec<&str> = fields
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(n, _)| *n)
            .collect();
        if !missing.is_empty() {
            return Err(Failure::Invalid(format!(
                "missing parameters: {}",
                missing.join(", ")
            )));
        }
        let [u, c, r_low, r_high, k] = fields.map(|(_, v)| v.unwrap());
        let n = self.n.map(|n| n as f64).or(base.n).unwrap_or(100.0);
        validate_params(RawParams {
            u,
            c,
            r_low,
            r_high,
            k,
            n,
        })
        .map_err(|e| Failure::Invalid(e.to_string()))
    }

    fn outputs(&self) -> Result<Outputs, Failure> {
        Outputs::create(&self.out)
    }
}

/// What a subcommand reports back for the manifest.
struct Run {
    outputs: Outputs,
    params: Option<RawParams>,
    model: Option<ModelKind>,
    seed: u64,
    passed: bool,
}

fn table_format(format: Format) -> &'static str {
    match format {
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

fn run_equilibrium(common: &Common, grid: usize) -> Result<Run, Failure> {
    let p = common.params(None)?;
    let report = equilibrium(&p, common.model).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut out = common.outputs()?;
    out.json("equilibrium.json", &report)?;

    let low = &report.role(Role::Low).distribution;
    let high = &report.role(Role::High).distribution;
    let mut prices = Vec::with_capacity(2 * grid);
    for law in [low, high] {
        let (a, b) = (law.lower(), law.upper());
        let count = grid.max(2);
        prices.extend((0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64));
        let last = prices.len() - 1;
        prices[last] = b;
    }
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    let rows = prices
        .iter()
        .map(|x| {
            vec![
                Cell::Num(*x),
                Cell::Num(low.cdf(*x)),
                Cell::Num(high.cdf(*x)),
            ]
        })
        .collect();
    out.table(
        "cdf",
        table_format(common.format),
        &["price", "cdf_low", "cdf_high"],
        rows,
    )?;
    Ok(Run {
        outputs: out,
        params: Some(p.raw()),
        model: Some(common.model),
        seed: common.seed,
        passed: true,
    })
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    model: ModelKind,
    params: RawParams,
    grid_size: usize,
    relative_tolerance: f64,
    moved_mass_to: Option<f64>,
    all_certified: bool,
    reports: &'a [repricing::oracle::DeviationReport],
}

fn moved_mass(report: &EquilibriumReport, price: f64) -> Result<PriceDistribution, Failure> {
    let law = &report.role(Role::Low).law;
    let (Some(scale), Some(pole)) = (law.density_scale, law.density_pole) else {
        return Err(Failure::Invalid(
            "the low seller's law has no point mass to move".into(),
        ));
    };
    let [atom] = law.point_masses.as_slice() else {
        return Err(Failure::Invalid(
            "the low seller's law has no point mass to move".into(),
        ));
    };
    PriceDistribution::inverse_square(
        law.lower,
        law.upper,
        scale,
        pole,
        vec![Atom {
            price,
            probability: atom.probability,
        }],
    )
    .map_err(|e| Failure::Invalid(e.to_string()))
}

fn run_verify(
    common: &Common,
    grid: usize,
    tolerance: f64,
    move_mass: Option<f64>,
) -> Result<Run, Failure> {
    let p = common.params(None)?;
    let model = common.model;
    let report = equilibrium(&p, model).map_err(|e| Failure::Invalid(e.to_string()))?;
    let mut laws = report.seat_laws();
    if let Some(price) = move_mass {
        if model != ModelKind::Benchmark {
            return Err(Failure::Invalid(
                "--move-mass applies to the benchmark game".into(),
            ));
        }
        laws[0] = moved_mass(&report, price)?;
    }
    let reports = verify_seats(&p, model, &laws, grid, tolerance)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let all_certified = reports.iter().all(|r| r.certified);
    let mut out = common.outputs()?;
    out.json(
        "verify.json",
        &VerifyOutput {
            model,
            params: p.raw(),
            grid_size: grid,
            relative_tolerance: tolerance,
            moved_mass_to: move_mass,
            all_certified,
            reports: &reports,
        },
    )?;
    Ok(Run {
        outputs: out,
        params: Some(p.raw()),
        model: Some(model),
        seed: common.seed,
        passed: all_certified,
    })
}

#[derive(Serialize)]
struct SimCheck {
    seat: usize,
    role: Role,
    quantity: &'static str,
    sample_mean: f64,
    standard_error: f64,
    expected: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SimulateOutput {
    params: RawParams,
    report: repricing::sim::SimulationReport,
    /// Omitted below the minimum round count.
    checks: Option<Vec<SimCheck>>,
}

fn run_simulate(common: &Common, rounds: u64, trace: bool) -> Result<Run, Failure> {
    let p = common.params(None)?;
    let model = common.model;
    let config = SimulationConfig::equilibrium(p, model, rounds, common.seed)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let report = simulate(&config);
    let expected = expected_prices(&p, model);
    let checks = (rounds >= MIN_CHECK_ROUNDS).then(|| {
        let mut checks = Vec::new();
        for s in &report.seats {
            let profit = equilibrium_profit(&p, model, s.role);
            let price = match s.role {
                Role::Low => expected.low,
                Role::High => expected.high,
            };
            for (quantity, mean, se, target) in [
                ("profit", s.mean_profit, s.profit_se, profit),
                ("price", s.mean_price, s.price_se, price),
            ] {
                checks.push(SimCheck {
                    seat: s.seat,
                    role: s.role,
                    quantity,
                    sample_mean: mean,
                    standard_error: se,
                    expected: target,
                    pass: (mean - target).abs() <= 3.0 * se,
                });
            }
        }
        checks
    });
    let passed = checks.as_ref().is_none_or(|c| c.iter().all(|c| c.pass));
    let mut out = common.outputs()?;
    out.json(
        "simulation.json",
        &SimulateOutput {
            params: p.raw(),
            report,
            checks,
        },
    )?;
    if trace {
        let seats = model.seller_count();
        let mut header = vec!["round".to_string()];
        for name in ["price", "profit", "informed", "uninformed"] {
            header.extend((0..seats).map(|s| format!("{name}_{s}")));
        }
        let rows = simulate_trace(&config)
            .into_iter()
            .map(|r| {
                let mut row = vec![Cell::Int(r.round as i64)];
                row.extend(r.prices.iter().map(|x| Cell::Num(*x)));
                row.extend(r.profits.iter().map(|x| Cell::Num(*x)));
                row.extend(r.informed_sales.iter().map(|x| Cell::Int(*x as i64)));
                row.extend(r.uninformed_sales.iter().map(|x| Cell::Int(*x as i64)));
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        out.table("trace", table_format(common.format), &header, rows)?;
    }
    Ok(Run {
        outputs: out,
        params: Some(p.raw()),
        model: Some(model),
        seed: common.seed,
        passed,
    })
}

fn premium_rows(maps: &[PremiumMap]) -> Vec<Vec<Cell>> {
    maps.iter()
        .flat_map(|m| {
            m.points.iter().map(move |q| {
                vec![
                    Cell::Text(m.model.name().to_string()),
                    Cell::Num(q.k),
                    Cell::Num(q.expected_low),
                    Cell::Num(q.expected_high),
                    Cell::Num(q.premium),
                    Cell::Int(q.sign as i64),
                ]
            })
        })
        .collect()
}

const PREMIUM_HEADER: [&str; 6] = [
    "model",
    "k",
    "expected_low",
    "expected_high",
    "premium",
    "sign",
];

fn run_threshold(common: &Common, grid: usize) -> Result<Run, Failure> {
    let p = common.params(Some(|u| u / 2.0))?;
    let invalid = |e: repricing::comparative::ComparativeError| Failure::Invalid(e.to_string());
    let thresholds: Vec<_> = [ModelKind::Benchmark, ModelKind::Competition]
        .iter()
        .map(|m| find_threshold(&p, *m))
        .collect();
    let ks = interior_grid(p.utility(), grid.max(2));
    let maps = [ModelKind::Benchmark, ModelKind::Competition]
        .iter()
        .map(|m| premium_map(&p, *m, &ks))
        .collect::<Result<Vec<_>, _>>()
        .map_err(invalid)?;
    let effect = competition_effect_report(&p).map_err(invalid)?;
    let passed = thresholds
        .iter()
        .all(|t| t.residual.is_none_or(|r| r <= 1e-10));

    #[derive(Serialize)]
    struct ThresholdOutput<'a> {
        params: RawParams,
        thresholds: &'a [repricing::comparative::ThresholdResult],
        sign_changes: Vec<(ModelKind, usize)>,
        competition_effect: repricing::comparative::CompetitionEffect,
    }
    let mut out = common.outputs()?;
    out.json(
        "threshold.json",
        &ThresholdOutput {
            params: p.raw(),
            thresholds: &thresholds,
            sign_changes: maps.iter().map(|m| (m.model, m.sign_changes())).collect(),
            competition_effect: effect,
        },
    )?;
    out.table(
        "premium_map",
        table_format(common.format),
        &PREMIUM_HEADER,
        premium_rows(&maps),
    )?;
    Ok(Run {
        outputs: out,
        params: Some(p.raw()),
        model: None,
        seed: common.seed,
        passed,
    })
}

fn run_sweep(common: &Common, samples: usize) -> Result<Run, Failure> {
    if samples == 0 {
        return Err(Failure::Invalid("--samples must be positive".into()));
    }
    let report = threshold_sweep(samples, common.seed);
    let passed = report.all_ordered && report.max_residual <= 1e-10;
    let mut out = common.outputs()?;
    out.json("sweep.json", &report)?;
    let opt = |x: Option<f64>| x.map_or(Cell::Null, Cell::Num);
    let rows = report
        .points
        .iter()
        .map(|q| {
            vec![
                Cell::Num(q.u),
                Cell::Num(q.c),
                Cell::Num(q.r_low),
                Cell::Num(q.r_high),
                Cell::Num(q.existence_condition_value),
                opt(q.k1),
                opt(q.k2),
                Cell::Bool(q.ordered),
            ]
        })
        .collect();
    out.table(
        "sweep",
        table_format(common.format),
        &["u", "c", "r_L", "r_H", "condition", "k1", "k2", "ordered"],
        rows,
    )?;
    Ok(Run {
        outputs: out,
        params: None,
        model: None,
        seed: common.seed,
        passed,
    })
}

#[derive(Serialize)]
struct CategoryAnalysis {
    category: String,
    regression: Result<empirics::RegressionResult, String>,
    median_split: Result<empirics::TTestResult, String>,
}

#[derive(Serialize)]
struct AnalyzeOutput {
    input_rows: usize,
    diagnostics: Vec<empirics::Diagnostic>,
    kept: usize,
    audit: Vec<empirics::AuditEntry>,
    excluded_groups: Vec<empirics::DegenerateGroup>,
    standardized: usize,
    summary: Vec<empirics::CategorySummary>,
    categories: Vec<CategoryAnalysis>,
}

fn run_analyze(common: &Common, input: &PathBuf, config: Option<&PathBuf>) -> Result<Run, Failure> {
    let config: CleanConfig = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                Failure::Invalid(format!("bad cleaning config {}: {e}", path.display()))
            })?
        }
        None => CleanConfig::default(),
    };
    let ingested = empirics::ingest(input).map_err(|e| match e {
        empirics::IngestError::Io(e) => {
            Failure::Io(format!("cannot read {}: {e}", input.display()))
        }
        other => Failure::Invalid(other.to_string()),
    })?;
    let input_rows = ingested.records.len() + ingested.diagnostics.len();
    let cleaned = empirics::clean(&ingested.records, &config);
    let standardized = empirics::standardize(&cleaned.kept);
    let summary = empirics::summarize(&cleaned.kept, &standardized);
    let categories: Vec<CategoryAnalysis> = summary
        .iter()
        .map(|s| CategoryAnalysis {
            category: s.category.clone(),
            regression: empirics::regress(&standardized.records, &s.category)
                .map_err(|e| e.to_string()),
            median_split: empirics::median_split_ttest(&standardized.records, &s.category)
                .map_err(|e| e.to_string()),
        })
        .collect();

    let mut out = common.outputs()?;
    let format = table_format(common.format);
    let opt = |x: Option<f64>| x.map_or(Cell::Null, Cell::Num);
    let summary_rows = summary
        .iter()
        .map(|s| {
            vec![
                Cell::Text(s.category.clone()),
                Cell::Int(s.products as i64),
                Cell::Int(s.offerings as i64),
                Cell::Num(s.min_price),
                Cell::Num(s.max_price),
                opt(s.min_standardized),
                opt(s.max_standardized),
                opt(s.rating_mean),
                opt(s.rating_median),
                opt(s.rating_sd),
                opt(s.rating_min),
                opt(s.rating_max),
                Cell::Int(s.above_4_0 as i64),
                Cell::Num(s.above_4_0_pct),
                Cell::Int(s.above_4_5 as i64),
                Cell::Num(s.above_4_5_pct),
            ]
        })
        .collect();
    out.table(
        "summary",
        format,
        &[
            "category",
            "products",
            "offerings",
            "min_price",
            "max_price",
            "min_standardized",
            "max_standardized",
            "rating_mean",
            "rating_median",
            "rating_sd",
            "rating_min",
            "rating_max",
            "above_4_0",
            "above_4_0_pct",
            "above_4_5",
            "above_4_5_pct",
        ],
        summary_rows,
    )?;
    let mut regression_rows = Vec::new();
    let mut ttest_rows = Vec::new();
    for c in &categories {
        if let Ok(r) = &c.regression {
            for coef in &r.coefficients {
                regression_rows.push(vec![
                    Cell::Text(c.category.clone()),
                    Cell::Text(coef.name.to_string()),
                    Cell::Num(coef.estimate),
                    Cell::Num(coef.std_error),
                    Cell::Num(coef.t_stat),
                    Cell::Num(coef.p_value),
                    Cell::Text(coef.stars.to_string()),
                    Cell::Int(r.n as i64),
                ]);
            }
        }
        if let Ok(t) = &c.median_split {
            let w = &t.test;
            ttest_rows.push(vec![
                Cell::Text(c.category.clone()),
                Cell::Num(t.median_rating),
                Cell::Int(w.low.n as i64),
                Cell::Num(w.low.mean),
                Cell::Num(w.low.sd),
                Cell::Int(w.high.n as i64),
                Cell::Num(w.high.mean),
                Cell::Num(w.high.sd),
                Cell::Num(w.t),
                Cell::Num(w.df),
                Cell::Num(w.p_value),
            ]);
        }
    }
    out.table(
        "regression",
        format,
        &[
            "category",
            "term",
            "estimate",
            "std_error",
            "t",
            "p_value",
            "stars",
            "n",
        ],
        regression_rows,
    )?;
    out.table(
        "median_split",
        format,
        &[
            "category",
            "median_rating",
            "low_n",
            "low_mean",
            "low_sd",
            "high_n",
            "high_mean",
            "high_sd",
            "t",
            "df",
            "p_value",
        ],
        ttest_rows,
    )?;
    out.json(
        "analysis.json",
        &AnalyzeOutput {
            input_rows,
            diagnostics: ingested.diagnostics,
            kept: cleaned.kept.len(),
            audit: cleaned.audit,
            excluded_groups: standardized.excluded.clone(),
            standardized: standardized.records.len(),
            summary,
            categories,
        },
    )?;
    Ok(Run {
        outputs: out,
        params: None,
        model: None,
        seed: common.seed,
        passed: true,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let started_unix_seconds = output::unix_seconds();
    let (name, common) = match &cli.command {
        Command::Equilibrium { common, .. } => ("equilibrium", common),
        Command::Verify { common, .. } => ("verify", common),
        Command::Simulate { common, .. } => ("simulate", common),
        Command::Threshold { common, .. } => ("threshold", common),
        Command::Sweep { common, .. } => ("sweep", common),
        Command::Analyze { common, .. } => ("analyze", common),
    };
    let result = match &cli.command {
        Command::Equilibrium { common, grid } => run_equilibrium(common, *grid),
        Command::Verify {
            common,
            grid,
            tolerance,
            move_mass,
        } => run_verify(common, *grid, *tolerance, *move_mass),
        Command::Simulate {
            common,
            rounds,
            trace,
        } => run_simulate(common, *rounds, *trace),
        Command::Threshold { common, grid } => run_threshold(common, *grid),
        Command::Sweep { common, samples } => run_sweep(common, *samples),
        Command::Analyze {
            common,
            input,
            config,
        } => run_analyze(common, input, config.as_ref()),
    };
    let run = match result {
        Ok(run) => run,
        Err(failure) => {
            eprintln!("error: {failure}");
            return ExitCode::from(failure.code());
        }
    };
    let passed = run.passed;
    let manifest = output::Manifest {
        subcommand: name,
        tool_version: env!("CARGO_PKG_VERSION"),
        parameters: run.params,
        model: run.model,
        seed: run.seed,
        format: table_format(common.format),
        outputs: run.outputs.files().to_vec(),
        started_unix_seconds,
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    if let Err(failure) = run.outputs.finish(&manifest) {
        eprintln!("error: {failure}");
        return ExitCode::from(failure.code());
    }
    if passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("check failed; see {}", common.out.display());
        ExitCode::from(3)
    }
}
