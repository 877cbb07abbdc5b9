//! `concord`: panel-judgement analysis from the command line.
//!
//! Three subcommands cover the pipeline. `analyze` filters one judgement
//! table through a condition function, builds the agreement matrix and runs
//! the homogeneity test. `subgroups` repeats that pipeline over specialist
//! subsets and ranks them. `power` estimates rejection rates on simulated
//! panels. All output is deterministic for fixed flags and seed, whatever
//! the worker count.
//!
//! Exit codes report operational failures only, never the statistical
//! decision: 0 success, 2 unreadable input, 3 a request that cannot be
//! honored (bad parameter, unknown scenario, impossible bounds).

mod output;

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use concord::cochran::{run_test, Method, PermutationBudget};
use concord::condition::{
    apply_condition, build_w_matrix_with, leading_count, ConditionSpec, RowSelection,
};
use concord::judgement::{parse_judgement_csv, JudgementMatrix};
use concord::power::{builtin_scenario, builtin_scenarios, estimate_power_with, scenarios_from_json};
use concord::subgroup::analyze_subgroups_with;
use concord::{Error, Result};

#[derive(Parser)]
#[command(name = "concord", version, about = "Panel-judgement concordance analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter items by panel agreement and test specialist homogeneity
    Analyze(AnalyzeArgs),
    /// Rank specialist subsets by homogeneity-test p-value
    Subgroups(SubgroupsArgs),
    /// Estimate rejection rates on simulated panels
    Power(PowerArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Judgement CSV: header `item,<specialists...>[,theoretical]`
    #[arg(long)]
    input: PathBuf,

    /// Concordance cut in percent, 50..=100
    #[arg(long, default_value_t = 50, conflicts_with = "cvr")]
    ci: u32,

    /// Content-validity-ratio threshold in [-1, 1], replacing --ci
    #[arg(long)]
    cvr: Option<f64>,

    /// Which table rows feed the agreement matrix
    #[arg(long, value_enum, default_value_t = RowsArg::Retained)]
    rows: RowsArg,
}

impl InputArgs {
    fn load(&self) -> Result<JudgementMatrix> {
        let file = File::open(&self.input).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", self.input.display()),
            ))
        })?;
        parse_judgement_csv(BufReader::new(file))
    }

    fn condition(&self) -> Result<ConditionSpec> {
        match self.cvr {
            Some(threshold) => ConditionSpec::content_validity(threshold),
            None => ConditionSpec::concordance(self.ci),
        }
    }
}

#[derive(Args)]
struct TestArgs {
    /// P-value method
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,

    /// Decision level, open (0, 1)
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    /// Monte Carlo permutation replicates, at least 1000
    #[arg(long, default_value_t = 100_000)]
    mc_reps: u64,

    /// Largest arrangement count still enumerated in full
    #[arg(long, default_value_t = 10_000_000)]
    exact_cutoff: u64,

    /// Master seed for the permutation methods
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TestArgs {
    fn budget(&self) -> PermutationBudget {
        PermutationBudget {
            exact_cutoff: self.exact_cutoff,
            mc_replicates: self.mc_reps,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Report format
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,

    /// Worker threads for the parallel paths; output bytes are unaffected
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    test: TestArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct SubgroupsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    test: TestArgs,

    /// Smallest subset size
    #[arg(long, default_value_t = 6)]
    min_size: usize,

    /// Largest subset size; default is one below the panel size
    #[arg(long)]
    max_size: Option<usize>,

    /// Leave the full panel out of the survey
    #[arg(long)]
    no_full: bool,

    /// Show only the best K rows in text output
    #[arg(long)]
    top: Option<usize>,

    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct PowerArgs {
    /// Built-in scenario name, or `all`
    #[arg(long)]
    builtin: Option<String>,

    /// JSON scenario file, one object or an array of them
    #[arg(long, conflicts_with = "builtin")]
    scenario: Option<PathBuf>,

    /// Simulated panels per scenario, at least 1000
    #[arg(long, default_value_t = 10_000)]
    replicates: u64,

    /// Master seed; replicate streams derive from it
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Row rule applied to each simulated agreement matrix
    #[arg(long, value_enum, default_value_t = RowsArg::Retained)]
    rows: RowsArg,

    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Exact,
    #[value(alias = "monte-carlo")]
    Mc,
    Asymptotic,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Auto => Method::Auto,
            MethodArg::Exact => Method::Exact,
            MethodArg::Mc => Method::MonteCarlo,
            MethodArg::Asymptotic => Method::Asymptotic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RowsArg {
    Retained,
    Leading,
}

impl From<RowsArg> for RowSelection {
    fn from(value: RowsArg) -> Self {
        match value {
            RowsArg::Retained => RowSelection::Retained,
            RowsArg::Leading => RowSelection::LeadingCount,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            // 2: the input could not be read; 3: the request could not be
            // honored on this input.
            ExitCode::from(match err {
                Error::Parse { .. } | Error::Io(_) | Error::Csv(_) => 2,
                _ => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Subgroups(args) => cmd_subgroups(args),
        Command::Power(args) => cmd_power(args),
    }
}

fn init_workers(workers: Option<usize>) -> Result<()> {
    let Some(n) = workers else { return Ok(()) };
    if n == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    init_workers(args.out.workers)?;
    let matrix = args.input.load()?;
    let condition = args.input.condition()?;
    let selection = RowSelection::from(args.input.rows);
    let retention = apply_condition(&matrix, &condition);
    let available_rows = match selection {
        RowSelection::Retained => retention.n_retained(),
        RowSelection::LeadingCount => leading_count(&matrix),
    };
    let outcome = if available_rows == 0 {
        None
    } else {
        let w = build_w_matrix_with(&matrix, &retention, selection)?;
        let decision = run_test(&w, args.test.method.into(), &args.test.budget(), args.test.alpha)?;
        Some((w, decision))
    };
    let data = output::AnalyzeData {
        matrix: &matrix,
        condition: &condition,
        selection,
        alpha: args.test.alpha,
        retention: &retention,
        outcome: outcome.as_ref().map(|(w, d)| (w, d)),
    };
    let rendered = match args.out.format {
        FormatArg::Text => output::analyze_text(&data),
        FormatArg::Json => output::analyze_json(&data),
        FormatArg::Csv => retention.to_csv_string(),
    };
    print!("{rendered}");
    Ok(())
}

fn cmd_subgroups(args: SubgroupsArgs) -> Result<()> {
    init_workers(args.out.workers)?;
    let matrix = args.input.load()?;
    let condition = args.input.condition()?;
    let selection = RowSelection::from(args.input.rows);
    let min_size = args.min_size;
    let max_size = args.max_size.unwrap_or(matrix.n_specialists().saturating_sub(1));
    let report = analyze_subgroups_with(
        &matrix,
        &condition,
        args.test.method.into(),
        &args.test.budget(),
        args.test.alpha,
        min_size,
        max_size,
        !args.no_full,
        selection,
    )?;
    let data = output::SubgroupsData {
        matrix: &matrix,
        condition: &condition,
        selection,
        min_size,
        max_size,
        include_full: !args.no_full,
        report: &report,
        top: args.top,
    };
    let rendered = match args.out.format {
        FormatArg::Text => output::subgroups_text(&data),
        FormatArg::Json => output::subgroups_json(&data),
        FormatArg::Csv => report.to_csv_string(),
    };
    print!("{rendered}");
    Ok(())
}

fn cmd_power(args: PowerArgs) -> Result<()> {
    init_workers(args.out.workers)?;
    let scenarios = match (&args.builtin, &args.scenario) {
        (Some(name), None) if name == "all" => builtin_scenarios(),
        (Some(name), None) => vec![builtin_scenario(name).ok_or_else(|| {
            Error::Config(format!("unknown builtin scenario `{name}`"))
        })?],
        (None, Some(path)) => scenarios_from_json(path)?,
        (None, None) | (Some(_), Some(_)) => {
            return Err(Error::Config(
                "pick a scenario source: --builtin <name|all> or --scenario <file>".into(),
            ));
        }
    };
    let selection = RowSelection::from(args.rows);
    let estimates = scenarios
        .iter()
        .map(|spec| estimate_power_with(spec, args.replicates, args.seed, selection))
        .collect::<Result<Vec<_>>>()?;
    let rendered = match args.out.format {
        FormatArg::Text => output::power_text(&estimates),
        FormatArg::Json => output::power_json(&estimates, selection),
        FormatArg::Csv => concord::power::power_csv(&estimates),
    };
    print!("{rendered}");
    Ok(())
}
