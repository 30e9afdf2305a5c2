use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use log::warn;

use hilltail::diagnostics::{run_suite, CheckRecord, Depth, SUITES};
use hilltail::estimators::{diop_lo, functional_hill, kernel_hill, normalized_hill};
use hilltail::martingale::{centering_A, MartingaleConfig};
use hilltail::moments::{
    moment_approx, moment_exact, variance_approx, variance_exact, DEFAULT_EPSILON,
};
use hilltail::records::RecordWriter;
use hilltail::sampling::{load_sample, sample_model, write_sample, QuantileModel};
use hilltail::tables::{
    load_table, save_table, tabulate_null, DEFAULT_TABLE_K, DEFAULT_TABLE_REPS,
};
use hilltail::testing::{
    reproduce_table1, weibull_domain_test, TestResult, DEFAULT_LEVEL, TABLE1_K,
};
use hilltail::{Error, KernelFunction, RngStream, WeightFunction};

const EXIT_ERROR: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_REJECTED: u8 = 3;
const SAMPLE_FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "hilltail",
    version,
    about = "Functional Hill statistics and Weibull-domain tests"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from one of the registered quantile models.
    Simulate(SimulateArgs),
    /// Compute functional Hill statistics of a sample.
    Estimate(EstimateArgs),
    /// Tabulate the null law of W by Monte Carlo.
    Tabulate(TabulateArgs),
    /// Test whether a sample lies in the Weibull domain of attraction.
    Test(TestArgs),
    /// Query a null table: CDF values, quantiles or the full curve.
    Cdf(CdfArgs),
    /// Run the nine-model rejection-rate study.
    Table1(Table1Args),
    /// Exact and bracketed moments of the exponential functionals.
    Moments(MomentsArgs),
    /// Run verification suites.
    Check(CheckArgs),
}

#[derive(Args, Clone)]
struct WeightArgs {
    /// Power weight exponent, f(j) = j^tau.
    #[arg(long, conflicts_with = "weights")]
    tau: Option<f64>,
    /// Weight descriptor, `power:TAU` or `table:f1,f2,...`.
    #[arg(long)]
    weights: Option<String>,
}

impl WeightArgs {
    fn resolve(&self) -> Result<WeightFunction, Error> {
        match (&self.weights, self.tau) {
            (Some(d), _) => WeightFunction::parse_descriptor(d),
            (None, Some(tau)) => WeightFunction::power(tau),
            (None, None) => WeightFunction::power(0.25),
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Known upper endpoint of ln X; estimated by ln X_{n,n} when omitted.
    #[arg(long)]
    y0: Option<f64>,
}

#[derive(Args)]
struct TabulateArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value_t = DEFAULT_TABLE_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_TABLE_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[command(flatten)]
    weights: WeightArgs,
    #[arg(long, default_value_t = TABLE1_K)]
    k: usize,
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    #[arg(long)]
    y0: Option<f64>,
    /// Also write the result as a records file.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("query").required(true).multiple(true).args(["x", "p", "curve"])))]
struct CdfArgs {
    #[arg(long)]
    table: PathBuf,
    /// Points at which to report G(x) and P(|W| <= |x|).
    #[arg(long, allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Levels at which to report quantiles.
    #[arg(long)]
    p: Vec<f64>,
    /// Emit the full empirical CDF as CSV rows (value, probability).
    #[arg(long)]
    curve: bool,
    /// Destination of the curve; standard output when omitted.
    #[arg(long, requires = "curve")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Table1Args {
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Null table to use; tabulated at the study's k when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(subcommand)]
    command: MomentsCommand,
}

#[derive(Subcommand)]
enum MomentsCommand {
    /// Grid assertions: Monte Carlo oracles, bracket containment, integral
    /// bounds and boundedness scans.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        deep: bool,
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Exact value and bracket of E(S_{j,k}^m) and Var(S_{j,k}).
    Show {
        #[arg(long)]
        j: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        eps: f64,
    },
}

#[derive(Args)]
struct CheckArgs {
    /// Comma-separated suite names; all suites when omitted.
    #[arg(long, value_delimiter = ',')]
    suites: Vec<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Full replication counts.
    #[arg(long)]
    deep: bool,
    #[arg(long)]
    records: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::ConfigMismatch(_) => EXIT_CONFIG,
                _ => EXIT_ERROR,
            })
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Tabulate(a) => tabulate(a),
        Command::Test(a) => test(a),
        Command::Cdf(a) => cdf(a),
        Command::Table1(a) => table1(a),
        Command::Moments(a) => moments(a.command),
        Command::Check(a) => check(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn simulate(a: SimulateArgs) -> Result<ExitCode, Error> {
    let model = QuantileModel::lookup(&a.model, a.gamma)?;
    let sample = sample_model(&model, a.n, RngStream::new(a.seed, 0))?;
    let mut out = output(a.out.as_deref())?;
    write_sample(
        &mut out,
        &sample,
        &[
            ("format_version", SAMPLE_FORMAT_VERSION.to_string()),
            ("command", "simulate".into()),
            ("model", model.id()),
            ("gamma", a.gamma.to_string()),
            ("n", a.n.to_string()),
            ("seed", a.seed.to_string()),
        ],
    )?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn estimate(a: EstimateArgs) -> Result<ExitCode, Error> {
    let sample = load_sample(&a.input)?;
    let f = a.weights.resolve()?;
    let config = MartingaleConfig::new(a.gamma, f.clone(), a.k)?;
    let t = functional_hill(&sample, &f, a.k)?;
    let t_star = normalized_hill(&sample, &f, a.k - 1, a.y0)?;
    let centering = centering_A(&config);
    println!(
        "input={} n={} k={} weights={} gamma={} y0={}",
        a.input.display(),
        sample.len(),
        a.k,
        f,
        a.gamma,
        a.y0.map_or("estimated".to_string(), |y| y.to_string())
    );
    println!("T_n(f)      = {t:.10}");
    if let Some(tau) = f.tau() {
        println!("T_n/k^tau   = {:.10}", diop_lo(&sample, tau, a.k)?);
    }
    println!(
        "hill        = {:.10}",
        kernel_hill(&sample, &KernelFunction::constant(1.0), a.k)?
    );
    println!("T*_(k-1)(f) = {t_star:.10}");
    println!("A_k(f)      = {centering:.10}");
    println!("W*          = {:.10}", centering - t_star);
    Ok(ExitCode::SUCCESS)
}

fn warn_regime(f: &WeightFunction) {
    if let Some(tau) = f.tau() {
        if tau > 0.5 {
            warn!("tau = {tau} > 1/2 lies outside the non-Gaussian regime of W; computing anyway");
        }
    }
}

fn tabulate(a: TabulateArgs) -> Result<ExitCode, Error> {
    let f = a.weights.resolve()?;
    warn_regime(&f);
    let table = tabulate_null(a.gamma, &f, a.k, a.reps, a.seed)?;
    save_table(&table, &a.out)?;
    println!(
        "wrote {} (gamma={} weights={} k={} reps={} seed={})",
        a.out.display(),
        a.gamma,
        f,
        a.k,
        a.reps,
        a.seed
    );
    println!(
        "min={:.6} max={:.6} mean={:.6} sd={:.6}",
        table.min(),
        table.max(),
        table.mean(),
        table.std_dev()
    );
    for p in [0.01, 0.05, 0.5, 0.95, 0.99] {
        println!("q({p}) = {:.6}", table.quantile(p)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn test(a: TestArgs) -> Result<ExitCode, Error> {
    let sample = load_sample(&a.input)?;
    let table = load_table(&a.table)?;
    let f = a.weights.resolve()?;
    let r = weibull_domain_test(&sample, a.gamma, &f, a.k, &table, a.level, a.y0)?;
    println!(
        "input={} table={} n={} k={} gamma={} weights={} level={} y0={}",
        a.input.display(),
        a.table.display(),
        r.n,
        r.k,
        r.gamma,
        r.weights,
        r.level,
        a.y0.map_or("estimated".to_string(), |y| y.to_string())
    );
    println!(
        "table: k={} reps={} seed={}",
        r.table.k,
        r.table.reps,
        r.table.seed.map_or("none".to_string(), |s| s.to_string())
    );
    println!("T* = {:.10}", r.statistic_t);
    println!("W* = {:.10}", r.statistic_w);
    println!("p  = {:.6}", r.p_value);
    println!(
        "decision: {}",
        if r.reject {
            "reject Weibull domain"
        } else {
            "do not reject Weibull domain"
        }
    );
    if let Some(path) = &a.records {
        write_test_records(path, &a, &r)?;
    }
    Ok(if r.reject {
        ExitCode::from(EXIT_REJECTED)
    } else {
        ExitCode::SUCCESS
    })
}

fn write_test_records(path: &Path, a: &TestArgs, r: &TestResult) -> Result<(), Error> {
    let mut w = RecordWriter::new(
        File::create(path)?,
        &[
            ("command", "test".into()),
            ("input", a.input.display().to_string()),
            ("table", a.table.display().to_string()),
            (
                "y0",
                a.y0.map_or("estimated".to_string(), |y| y.to_string()),
            ),
        ],
        &[
            "n",
            "k",
            "gamma",
            "weights",
            "level",
            "statistic_t",
            "statistic_w",
            "p_value",
            "reject",
            "table_k",
            "table_reps",
        ],
    )?;
    w.write_row([
        r.n.to_string(),
        r.k.to_string(),
        r.gamma.to_string(),
        r.weights.clone(),
        r.level.to_string(),
        format!("{:.16e}", r.statistic_t),
        format!("{:.16e}", r.statistic_w),
        r.p_value.to_string(),
        r.reject.to_string(),
        r.table.k.to_string(),
        r.table.reps.to_string(),
    ])?;
    w.finish()?.flush()?;
    Ok(())
}

fn cdf(a: CdfArgs) -> Result<ExitCode, Error> {
    let table = load_table(&a.table)?;
    if !a.x.is_empty() || !a.p.is_empty() {
        println!(
            "table={} gamma={} weights={} k={} reps={}",
            a.table.display(),
            table.gamma,
            table.weights,
            table.k,
            table.reps
        );
    }
    for &x in &a.x {
        println!(
            "x={x} G(x)={:.6} P(|W|<=|x|)={:.6}",
            table.ecdf(x),
            table.abs_cdf(x)
        );
    }
    for &p in &a.p {
        println!("p={p} quantile={:.10}", table.quantile(p)?);
    }
    if a.curve {
        let out = output(a.out.as_deref())?;
        let mut w = RecordWriter::new(
            out,
            &[
                ("command", "cdf".into()),
                ("table", a.table.display().to_string()),
                ("gamma", table.gamma.to_string()),
                ("weights", table.weights.descriptor()),
                ("k", table.k.to_string()),
                ("reps", table.reps.to_string()),
            ],
            &["value", "probability"],
        )?;
        let n = table.reps as f64;
        for (i, v) in table.values().iter().enumerate() {
            w.write_row([format!("{v:.16e}"), ((i + 1) as f64 / n).to_string()])?;
        }
        w.finish()?.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn table1(a: Table1Args) -> Result<ExitCode, Error> {
    let table = a.table.as_deref().map(load_table).transpose()?;
    let report = reproduce_table1(a.seed, a.runs, table.as_ref())?;
    print!("{}", report.to_text());
    if let Some(path) = &a.records {
        let mut w = RecordWriter::new(
            File::create(path)?,
            &[
                ("command", "table1".into()),
                ("seed", a.seed.to_string()),
                ("runs", a.runs.to_string()),
                ("n", report.n.to_string()),
                ("k", report.k.to_string()),
                ("level", report.level.to_string()),
                ("table_k", report.table.k.to_string()),
                ("table_reps", report.table.reps.to_string()),
                ("table_weights", report.table.weights.clone()),
            ],
            &[
                "model",
                "runs",
                "rejection_rate",
                "mean_T",
                "mean_W",
                "mean_p",
                "reference_T",
                "reference_p",
            ],
        )?;
        for r in &report.rows {
            w.write_row([
                r.model.clone(),
                r.runs.to_string(),
                r.rejection_rate.to_string(),
                r.mean_t.to_string(),
                r.mean_w.to_string(),
                r.mean_p.to_string(),
                r.reference_t.to_string(),
                (r.reference_p / 100.0).to_string(),
            ])?;
        }
        w.finish()?.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

fn moments(command: MomentsCommand) -> Result<ExitCode, Error> {
    match command {
        MomentsCommand::Check {
            seed,
            deep,
            records,
        } => report_suites(
            &["moments-mc", "moments-grid", "harmonic", "k1"],
            seed,
            deep,
            records.as_deref(),
            "moments check",
        ),
        MomentsCommand::Show {
            j,
            k,
            m,
            gamma,
            eps,
        } => {
            println!("j={j} k={k} m={m} gamma={gamma} eps={eps}");
            println!("E(S^m)   exact = {:.12e}", moment_exact(j, k, m, gamma)?);
            match moment_approx(j, k, m, gamma, eps) {
                Ok(b) => println!(
                    "E(S^m)   bracket = [{:.12e}, {:.12e}] nominal {:.12e}",
                    b.lo, b.hi, b.nominal
                ),
                Err(e @ Error::Validity { .. }) => println!("E(S^m)   bracket unavailable: {e}"),
                Err(e) => return Err(e),
            }
            println!("Var(S)   exact = {:.12e}", variance_exact(j, k, gamma)?);
            match variance_approx(j, k, gamma, eps) {
                Ok(b) => println!(
                    "Var(S)   bracket = [{:.12e}, {:.12e}] nominal {:.12e}",
                    b.lo, b.hi, b.nominal
                ),
                Err(e @ Error::Validity { .. }) => println!("Var(S)   bracket unavailable: {e}"),
                Err(e) => return Err(e),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn check(a: CheckArgs) -> Result<ExitCode, Error> {
    let suites: Vec<&str> = if a.suites.is_empty() {
        SUITES.to_vec()
    } else {
        a.suites.iter().map(String::as_str).collect()
    };
    report_suites(&suites, a.seed, a.deep, a.records.as_deref(), "check")
}

fn report_suites(
    suites: &[&str],
    seed: u64,
    deep: bool,
    records: Option<&Path>,
    command: &str,
) -> Result<ExitCode, Error> {
    let depth = if deep { Depth::Deep } else { Depth::Fast };
    let results = run_suite(suites, seed, depth)?;
    println!(
        "{command}: suites={} seed={seed} depth={}",
        suites.join(","),
        if deep { "deep" } else { "fast" }
    );
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "{} of {} checks passed",
        results.len() - failed,
        results.len()
    );
    if let Some(path) = records {
        write_check_records(path, command, suites, seed, deep, &results)?;
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ERROR)
    })
}

fn write_check_records(
    path: &Path,
    command: &str,
    suites: &[&str],
    seed: u64,
    deep: bool,
    results: &[CheckRecord],
) -> Result<(), Error> {
    let mut w = RecordWriter::new(
        File::create(path)?,
        &[
            ("command", command.to_string()),
            ("suites", suites.join(";")),
            ("seed", seed.to_string()),
            ("depth", if deep { "deep" } else { "fast" }.to_string()),
        ],
        &[
            "suite",
            "name",
            "parameters",
            "observed",
            "expected",
            "tolerance",
            "passed",
        ],
    )?;
    for r in results {
        w.write_row([
            r.suite.clone(),
            r.name.clone(),
            r.parameters.clone(),
            format!("{:.16e}", r.observed),
            r.expected.to_string(),
            format!("{:.6e}", r.tolerance),
            r.passed.to_string(),
        ])?;
    }
    w.finish()?.flush()?;
    Ok(())
}
