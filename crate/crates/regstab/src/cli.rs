//! Command-line entry point.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use regstab_core::baselines::{double_residualization_test, freedman_lane_test};
use regstab_core::oracle::{condition_strength, limit_constant_null};
use regstab_core::pipeline::{rs_test, Nuisance, RsOptions};
use regstab_core::rng::{derive_seed, Purpose};
use regstab_core::selection::random_selection;
use regstab_core::sem::{sample_dataset, SemDesign};

use crate::error::{AppError, Result};
use crate::formats::{read_json, read_params, write_dataset_csv, write_json, ParamsFile};
use crate::harness::{run_q_sweep, run_type1_power_experiment, ExperimentConfig};
use crate::ingest::{load_csv, ols_comparator, run_real_analysis, ColumnSchema, RealMode, Table};
use crate::report::{emit_report, summary, ReportFormat};

#[derive(Debug, Parser)]
#[command(name = "regstab", version, about = "Coefficient-stability tests for causal effects under hidden confounding")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path (file or report stem).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report format: csv, json or both.
    #[arg(long, global = true, default_value = "csv")]
    format: String,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct TestFlags {
    /// Number of subsets.
    #[arg(long, default_value_t = 100)]
    m: usize,
    /// Subset size.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Number of permutations.
    #[arg(long = "M", default_value_t = 999)]
    permutations: usize,
    /// Also print `reject=<bool>` at this level.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV.
    data: PathBuf,
    /// Column schema JSON (default: `y` target, `x*` causes, rest background;
    /// for `real`, the College Distance roles).
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a dataset CSV from SEM parameters.
    Simulate {
        /// Parameter JSON; if absent, parameters are drawn from the default design.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 50)]
        q: usize,
        #[arg(long, default_value_t = 1)]
        r: usize,
        #[arg(long, default_value_t = 0.0)]
        rho_beta: f64,
        #[arg(long, default_value_t = 1.0)]
        rho_gamma: f64,
        /// Also write the drawn parameters as JSON.
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Random selection + model averaging + permutation test.
    RsTest {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        test: TestFlags,
        /// Nuisance estimator: uniform, aic or bic.
        #[arg(long, default_value = "uniform")]
        nuisance: String,
    },
    /// Freedman-Lane ridge permutation test.
    FlTest {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        test: TestFlags,
        /// Ridge penalty (default: GCV).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Double-residualisation ridge permutation test.
    DrTest {
        #[command(flatten)]
        input: DataArgs,
        #[command(flatten)]
        test: TestFlags,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Type-I error / power experiment from a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
    /// The same experiment over several background dimensions.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<usize>,
    },
    /// Real-data workflow on an environment-split CSV.
    Real {
        #[command(flatten)]
        input: DataArgs,
        /// Causes tested jointly (comma-separated); default: all causes.
        #[arg(long, value_delimiter = ',')]
        test: Vec<String>,
        /// Use random background subsets on pooled rows instead of environments.
        #[arg(long)]
        random_subsets: bool,
        #[command(flatten)]
        flags: TestFlags,
        /// Print the pooled OLS table as well.
        #[arg(long)]
        ols: bool,
    },
    /// Population diagnostics for a parameter file.
    Oracle {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value_t = 100)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
}

/// Parses `argv` (including the program name), runs, and returns the exit
/// code: 0 success, 2 usage error, 1 runtime error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout())
}

/// As [`cli_main`] with standard output redirected to `out`.
pub fn run_with<I, T, W>(argv: I, out: &mut W) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write + Send,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch<W: Write + Send>(cli: Cli, out: &mut W) -> Result<()> {
    let g = cli.global;
    let format: ReportFormat = g.format.parse()?;
    match g.threads {
        Some(0) => Err(AppError::Config("threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| AppError::Config(format!("thread pool: {e}")))?
            .install(|| execute(cli.command, &g, format, out)),
        None => execute(cli.command, &g, format, out),
    }
}

fn io_out(e: std::io::Error) -> AppError {
    AppError::io("<stdout>")(e)
}

fn load_single(input: &DataArgs) -> Result<regstab_core::Dataset> {
    let table = Table::read(&input.data)?;
    let schema = match &input.schema {
        Some(p) => read_json::<ColumnSchema>(p)?,
        None => ColumnSchema::default_for(&table.headers)?,
    };
    let schema = ColumnSchema { environment: None, min_env_size: 1, ..schema };
    Ok(crate::ingest::collection_from_table(&table, &schema)?.pooled)
}

fn print_p<W: Write>(out: &mut W, p: f64, alpha: Option<f64>) -> Result<()> {
    writeln!(out, "p={p}").map_err(io_out)?;
    if let Some(a) = alpha {
        writeln!(out, "reject={}", p <= a).map_err(io_out)?;
    }
    Ok(())
}

/// `report.csv` and `report.json` both map to the stem `report`.
fn report_stem(out: Option<&Path>) -> PathBuf {
    let path = out.map_or_else(|| PathBuf::from("report"), Path::to_path_buf);
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv" | "json") => path.with_extension(""),
        _ => path,
    }
}

fn execute<W: Write>(command: Command, g: &Global, format: ReportFormat, out: &mut W) -> Result<()> {
    match command {
        Command::Simulate { params, rows, d, q, r, rho_beta, rho_gamma, params_out } => {
            let params = match params {
                Some(p) => read_params(&p)?,
                None => SemDesign::new(d, q, r, rho_beta, rho_gamma).generate(derive_seed(g.seed, Purpose::Params, 0))?,
            };
            if let Some(p) = params_out {
                write_json(&p, &ParamsFile::from(&params))?;
            }
            let data = sample_dataset(&params, rows, derive_seed(g.seed, Purpose::Noise, 0))?;
            match &g.out {
                Some(path) => {
                    let file = std::fs::File::create(path).map_err(AppError::io(path))?;
                    write_dataset_csv(&data, file).map_err(AppError::csv(path))?;
                }
                None => write_dataset_csv(&data, &mut *out).map_err(AppError::csv("<stdout>"))?,
            }
        }
        Command::RsTest { input, test, nuisance } => {
            let data = load_single(&input)?;
            let nuisance = match nuisance.as_str() {
                "uniform" => Nuisance::Uniform,
                "aic" => Nuisance::SmoothedAic,
                "bic" => Nuisance::SmoothedBic,
                other => return Err(AppError::Config(format!("unknown nuisance `{other}` (uniform, aic, bic)"))),
            };
            let opts = RsOptions { m: test.m, k: test.k, permutations: test.permutations, nuisance, seed: g.seed };
            print_p(out, rs_test(&data, &opts)?.test.p_value, test.alpha)?;
        }
        Command::FlTest { input, test, lambda } => {
            let data = load_single(&input)?;
            print_p(out, freedman_lane_test(&data, lambda, test.permutations, g.seed)?.p_value, test.alpha)?;
        }
        Command::DrTest { input, test, lambda } => {
            let data = load_single(&input)?;
            print_p(out, double_residualization_test(&data, lambda, test.permutations, g.seed)?.p_value, test.alpha)?;
        }
        Command::Bench { config } => {
            let mut config: ExperimentConfig = read_json(&config)?;
            config.threads = g.threads.or(config.threads);
            let report = run_type1_power_experiment(&config)?;
            write!(out, "{}", summary(&report)).map_err(io_out)?;
            for path in emit_report(&[report], &report_stem(g.out.as_deref()), format)? {
                writeln!(out, "wrote {}", path.display()).map_err(io_out)?;
            }
        }
        Command::Sweep { config, q } => {
            let mut config: ExperimentConfig = read_json(&config)?;
            config.threads = g.threads.or(config.threads);
            let reports = run_q_sweep(&config, &q)?;
            for r in &reports {
                writeln!(out, "q={}", r.config.q).map_err(io_out)?;
                write!(out, "{}", summary(r)).map_err(io_out)?;
            }
            for path in emit_report(&reports, &report_stem(g.out.as_deref()), format)? {
                writeln!(out, "wrote {}", path.display()).map_err(io_out)?;
            }
        }
        Command::Real { input, test, random_subsets, flags, ols } => {
            let schema = match &input.schema {
                Some(p) => read_json::<ColumnSchema>(p)?,
                None => ColumnSchema::college_distance(&["dist", "momcoll", "dadcoll"]),
            };
            let collection = load_csv(&input.data, &schema)?;
            let tested = if test.is_empty() { schema.causes.clone() } else { test };
            let mode = if random_subsets { RealMode::RandomSubsets { m: flags.m, k: flags.k } } else { RealMode::Environments };
            writeln!(out, "environments={} rows={}", collection.len(), collection.total_rows()).map_err(io_out)?;
            let result = run_real_analysis(&collection, &tested, flags.permutations, g.seed, mode)?;
            if let Some(w) = &result.warning {
                eprintln!("warning: {w}");
            }
            print_p(out, result.p_value(), flags.alpha)?;
            if ols {
                for row in ols_comparator(&Table::read(&input.data)?, &schema)? {
                    writeln!(
                        out,
                        "{:<10} coef={:.4} stderr={:.4} t={:.3} p={:.4}",
                        row.name, row.coef, row.stderr, row.t, row.p
                    )
                        .map_err(io_out)?;
                }
            }
        }
        Command::Oracle { params, m, k } => {
            let params = read_params(&params)?;
            let family = random_selection(params.q(), k, m, derive_seed(g.seed, Purpose::Subsets, 0))?;
            let (strength, sigma) = condition_strength(&params, &family)?;
            writeln!(out, "condition_strength={strength}").map_err(io_out)?;
            if let Some(s) = sigma {
                writeln!(out, "sigma_strength={s}").map_err(io_out)?;
            }
            match limit_constant_null(&params, &family) {
                Ok(c) => writeln!(out, "limit_constant_null={c}").map_err(io_out)?,
                Err(e) => writeln!(out, "limit_constant_null=undefined ({e})").map_err(io_out)?,
            }
        }
    }
    Ok(())
}
