//! Command-line interface.

use std::path::PathBuf;
use std::time::Instant;

use basket_core::rng::DEFAULT_SEED;
use basket_core::{
    BiasConvention, EffectScale, EnumerationLimits, GicConfig, GofVariant, RankOptions, Strategy,
    WeightPolicy,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{self, AnalysisOptions, MethodChoice, TestOptions};
use crate::io::{self, IoError, StudyKind};
use crate::report::{self, Format};
use crate::runner;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Core(#[from] basket_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 2 for input and usage problems, 4 for oversized model spaces,
    /// 3 for other estimation failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Usage(_) => 2,
            CliError::Core(basket_core::Error::CombinatorialLimit { .. }) => 4,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "basket",
    version,
    about = "Common-effect analysis of basket trials"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value = "text")]
    pub format: FormatArg,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Basket estimates, common effects, global tests and homogeneity.
    Analyze(AnalyzeArgs),
    /// Rank subclass models by GIC.
    Models(ModelsArgs),
    /// Global null test only.
    Test(TestArgs),
    /// Homogeneity test only.
    Gof(GofArgs),
    /// Run simulation scenarios from a JSON file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Rd,
    Rr,
    Iwrr,
    Or,
    Iwor,
}

impl ScaleArg {
    /// A `weight` column switches the ratio scales to supplied weights.
    pub fn resolve(self, supplied: bool) -> EffectScale {
        let policy = |default| {
            if supplied {
                WeightPolicy::Supplied
            } else {
                default
            }
        };
        match self {
            ScaleArg::Rd => EffectScale::RD,
            ScaleArg::Rr => EffectScale::RiskRatio(policy(WeightPolicy::Constant)),
            ScaleArg::Iwrr => EffectScale::IW_RR,
            ScaleArg::Or => EffectScale::OddsRatio(policy(WeightPolicy::Constant)),
            ScaleArg::Iwor => EffectScale::OddsRatio(WeightPolicy::InverseNull),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Two,
    All,
    Nonsparse,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::Two => Strategy::TwoSubclass,
            StrategyArg::All => Strategy::AllSubclasses,
            StrategyArg::Nonsparse => Strategy::NonSparse,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BiasArg {
    Published,
    Link,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset: CSV with header `label,y,n,pi0[,weight]`, or a `.json` array.
    pub data: PathBuf,
    /// Two-sided CI level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TestFlags {
    /// Null distribution: exact (Monte Carlo if the lattice is too large) or mc.
    #[arg(long, value_enum, default_value = "exact")]
    pub method: MethodArg,
    /// Monte Carlo draws.
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Report (hits + 1) / (reps + 1) for Monte Carlo p-values.
    #[arg(long)]
    pub add_one: bool,
}

impl TestFlags {
    fn options(&self) -> TestOptions {
        TestOptions {
            method: match self.method {
                MethodArg::Exact => MethodChoice::Exact,
                MethodArg::Mc => MethodChoice::MonteCarlo,
            },
            reps: self.reps,
            seed: self.seed,
            add_one: self.add_one,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RankFlags {
    #[arg(long, value_enum, default_value = "two")]
    pub strategy: StrategyArg,
    /// Subclasses must have more patients than this (non-sparse strategy).
    #[arg(long = "min-patients", default_value_t = 10)]
    pub min_patients: u64,
    /// Best models to show.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Worst models to show.
    #[arg(long, default_value_t = 0)]
    pub last: usize,
    /// Models within this GIC distance of the best are flagged.
    #[arg(long, default_value_t = 1.0)]
    pub window: f64,
    #[arg(long, value_enum, default_value = "published")]
    pub bias: BiasArg,
}

impl RankFlags {
    fn options(&self, alpha: f64) -> RankOptions {
        RankOptions {
            strategy: self.strategy.into(),
            min_subclass_patients: self.min_patients,
            window: self.window,
            limits: EnumerationLimits::default(),
            gic: GicConfig {
                bias: match self.bias {
                    BiasArg::Published => BiasConvention::Published,
                    BiasArg::Link => BiasConvention::LinkDerivative,
                },
                alpha,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Effect scales; repeat for several.
    #[arg(long, value_enum, default_values = ["rd", "iwrr"])]
    pub scale: Vec<ScaleArg>,
    #[command(flatten)]
    pub test: TestFlags,
    /// Pearson denominator `n p (1 - p)` in the homogeneity statistic.
    #[arg(long)]
    pub pearson: bool,
    /// Also rank subclass models.
    #[arg(long)]
    pub models: bool,
    /// Scale used for the model ranking.
    #[arg(long, value_enum, default_value = "rd")]
    pub rank_scale: ScaleArg,
    #[command(flatten)]
    pub rank: RankFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ModelsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "rd")]
    pub scale: ScaleArg,
    #[command(flatten)]
    pub rank: RankFlags,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_values = ["rd", "iwrr"])]
    pub scale: Vec<ScaleArg>,
    #[command(flatten)]
    pub test: TestFlags,
}

#[derive(Debug, Clone, Args)]
pub struct GofArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_values = ["rd", "iwrr"])]
    pub scale: Vec<ScaleArg>,
    #[arg(long)]
    pub pearson: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario file: one scenario object or an array.
    pub scenarios: PathBuf,
    /// Override the replicate count of every scenario.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Override the seed of every scenario.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run only scenarios with these labels.
    #[arg(long)]
    pub only: Vec<String>,
    /// Directory for the result tables and the run manifest.
    #[arg(long = "out-dir", env = "BASKET_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

fn scales(args: &[ScaleArg], table: &basket_core::BasketTable) -> Vec<EffectScale> {
    let supplied = table.iter().any(|b| b.weight.is_some());
    let mut out: Vec<EffectScale> = Vec::new();
    for a in args {
        let s = a.resolve(supplied);
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--alpha {alpha} must lie in (0, 1)"
        )))
    }
}

fn gof_variant(pearson: bool) -> GofVariant {
    if pearson {
        GofVariant::Pearson
    } else {
        GofVariant::Standard
    }
}

/// Rendered output of one command.
pub struct Rendered {
    pub body: String,
    /// Extra files for `simulate`, relative to the output directory.
    pub files: Vec<(String, String)>,
}

fn render<T: Serialize>(
    format: Format,
    value: &T,
    text: impl FnOnce(&T) -> String,
    csv: impl FnOnce(&T) -> String,
) -> String {
    match format {
        Format::Text => text(value),
        Format::Json => report::to_json(value),
        Format::Csv => csv(value),
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    label: String,
    study: StudyKind,
    seed: u64,
    replicates: u64,
    strategy: &'static str,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct Manifest {
    version: &'static str,
    scenario_file: String,
    threads: usize,
    wall_seconds: f64,
    scenarios: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct SimulationOutput {
    estimation: Vec<basket_core::EstimationMetrics>,
    identification: Vec<basket_core::IdentificationMetrics>,
}

fn simulate(args: &SimulateArgs, format: Format) -> Result<Rendered, CliError> {
    let mut scenarios = io::read_scenarios(&args.scenarios)?;
    if !args.only.is_empty() {
        scenarios.retain(|s| args.only.contains(&s.spec.label));
        if scenarios.is_empty() {
            return Err(CliError::Usage(format!(
                "no scenario labelled {}",
                args.only.join(", ")
            )));
        }
    }
    for s in &mut scenarios {
        if let Some(r) = args.reps {
            s.spec.replicates = r;
        }
        if let Some(seed) = args.seed {
            s.spec.seed = seed;
        }
        s.spec.validate().map_err(|source| IoError::Invalid {
            origin: format!("{} ({})", args.scenarios.display(), s.spec.label),
            line: None,
            source,
        })?;
    }
    let started = Instant::now();
    let mut out = SimulationOutput {
        estimation: Vec::new(),
        identification: Vec::new(),
    };
    let mut entries = Vec::new();
    let mut text = String::new();
    for s in &scenarios {
        let t0 = Instant::now();
        eprintln!(
            "{}: {} replicates, seed {}",
            s.spec.label, s.spec.replicates, s.spec.seed
        );
        match s.study {
            StudyKind::Estimation => {
                let m = runner::estimation(&s.spec)?;
                text.push_str(&report::estimation_text(&m));
                out.estimation.push(m);
            }
            StudyKind::Identification => {
                let m = runner::identification(&s.spec)?;
                text.push_str(&report::identification_text(&m));
                out.identification.push(m);
            }
        }
        entries.push(ManifestEntry {
            label: s.spec.label.clone(),
            study: s.study,
            seed: s.spec.seed,
            replicates: s.spec.replicates,
            strategy: s.spec.strategy.name(),
            wall_seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        scenario_file: args.scenarios.display().to_string(),
        threads: rayon::current_num_threads(),
        wall_seconds: started.elapsed().as_secs_f64(),
        scenarios: entries,
    };
    let estimation_csv = report::estimation_csv(&out.estimation);
    let identification_csv = report::identification_csv(&out.identification);
    let body = match format {
        Format::Text => text,
        Format::Json => report::to_json(&out),
        Format::Csv => {
            let mut parts = Vec::new();
            if !out.estimation.is_empty() {
                parts.push(estimation_csv.clone());
            }
            if !out.identification.is_empty() {
                parts.push(identification_csv.clone());
            }
            parts.join("\n")
        }
    };
    let mut files = vec![("manifest.json".to_string(), report::to_json(&manifest))];
    if !out.estimation.is_empty() {
        files.push(("estimation.csv".into(), estimation_csv));
    }
    if !out.identification.is_empty() {
        files.push(("identification.csv".into(), identification_csv));
    }
    files.push(("results.json".into(), report::to_json(&out)));
    Ok(Rendered { body, files })
}

/// Runs a parsed command and returns its output.
pub fn execute(cli: &Cli) -> Result<Rendered, CliError> {
    let format: Format = cli.format.into();
    let body = match &cli.command {
        Command::Analyze(a) => {
            check_alpha(a.data.alpha)?;
            let table = io::read_table(&a.data.data)?;
            let scales = scales(&a.scale, &table);
            let rank_scale = scales_one(a.rank_scale, &table);
            let r = analysis::analyze(
                &table,
                AnalysisOptions {
                    scales: &scales,
                    alpha: a.data.alpha,
                    test: a.test.options(),
                    gof: gof_variant(a.pearson),
                    ranking: a.models.then(|| {
                        (
                            rank_scale,
                            a.rank.options(a.data.alpha),
                            a.rank.top,
                            a.rank.last,
                        )
                    }),
                },
            )?;
            render(format, &r, report::analysis_text, report::analysis_csv)
        }
        Command::Models(m) => {
            check_alpha(m.data.alpha)?;
            let table = io::read_table(&m.data.data)?;
            let r = analysis::ranking_report(
                &table,
                scales_one(m.scale, &table),
                m.rank.options(m.data.alpha),
                m.rank.top,
                m.rank.last,
            )?;
            render(format, &r, report::ranking_text, report::ranking_csv_only)
        }
        Command::Test(t) => {
            let table = io::read_table(&t.data.data)?;
            let rows = analysis::test_rows(&table, &scales(&t.scale, &table), t.test.options());
            if rows.iter().all(|r| r.result.value().is_none()) {
                let s = scales(&t.scale, &table)[0];
                analysis::run_test(&table, s, t.test.options())?;
            }
            render(
                format,
                &rows,
                |r| report::tests_only_text(r),
                |r| report::tests_csv_only(r),
            )
        }
        Command::Gof(g) => {
            let table = io::read_table(&g.data.data)?;
            let rows =
                analysis::gof_rows(&table, &scales(&g.scale, &table), gof_variant(g.pearson));
            if rows.iter().all(|r| r.result.value().is_none()) {
                let s = scales(&g.scale, &table)[0];
                basket_core::gof_test_with(&table, s, gof_variant(g.pearson))?;
            }
            render(
                format,
                &rows,
                |r| report::gof_only_text(r),
                |r| report::gof_csv_only(r),
            )
        }
        Command::Simulate(s) => return simulate(s, format),
    };
    Ok(Rendered {
        body,
        files: Vec::new(),
    })
}

fn scales_one(arg: ScaleArg, table: &basket_core::BasketTable) -> EffectScale {
    scales(&[arg], table)[0]
}

/// Parses `args`, runs the command and writes its output. Returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli).and_then(|r| emit(&cli, r)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(cli: &Cli, rendered: Rendered) -> Result<(), CliError> {
    if let Command::Simulate(SimulateArgs {
        out_dir: Some(dir), ..
    }) = &cli.command
    {
        for (name, contents) in &rendered.files {
            io::write_file(&dir.join(name), contents)?;
        }
        eprintln!("wrote {} files to {}", rendered.files.len(), dir.display());
    }
    match &cli.out {
        Some(path) => io::write_file(path, &rendered.body)?,
        None => print!("{}", rendered.body),
    }
    Ok(())
}
