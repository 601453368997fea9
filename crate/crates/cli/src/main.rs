//! Single binary exposing the scoring pipeline:
//! ampute -> impute -> score -> validate, plus the self-contained spiral
//! demo.
//!
//! Every stochastic subcommand requires an explicit seed; there is no
//! wall-clock seeding. Outputs are byte-identical across reruns and across
//! `--threads` settings: parallel work items draw their randomness from
//! pre-derived sub-seeds and aggregation always runs in canonical order.
//!
//! Exit codes: 0 success, 1 input or parse error, 2 contract violation,
//! 3 numerical degeneracy.

mod demo;
mod error;
mod util;
mod validate;

use clap::{Parser, Subcommand, ValueEnum};
use error::CliError;
use iscore::ampute::{ampute_mar, ampute_mcar, ampute_spiral, default_n_patterns, random_mar_spec};
use iscore::impute::{
    impute_donor, impute_mean, impute_regress_mean, impute_sample, ImputationSet,
    DEFAULT_K_DONORS, DEFAULT_N_CYCLES, DEFAULT_N_IMPUTATIONS,
};
use iscore::inference::{DEFAULT_ALPHA, DEFAULT_B};
use iscore::projection::ProjectionMode;
use iscore::score::{dr_iscore, dr_iscore_with_ci, ForestClassifier, ScoreParams};
use iscore::seed;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "iscore",
    version,
    about = "Score missing-value imputation methods on incomplete data"
)]
struct Cli {
    /// Cap the worker thread pool (default: all cores). Results do not
    /// depend on this setting.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mechanism {
    Mcar,
    Mar,
    Spiral,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mean,
    Sample,
    RegressMean,
    Donor,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::Sample => "sample",
            Method::RegressMean => "regress-mean",
            Method::Donor => "donor",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjectionModeArg {
    Unrestricted,
    Full,
    Blocks,
}

#[derive(clap::Args)]
struct ScoreParamArgs {
    /// Projections per pattern group (default adapts to dimension:
    /// 50 / 100 / 200)
    #[arg(long)]
    num_proj: Option<usize>,
    #[arg(long, default_value_t = 5)]
    trees_per_proj: usize,
    #[arg(long, default_value_t = 10)]
    min_node: usize,
    #[arg(long, default_value_t = 0.75)]
    tau: f64,
    #[arg(long, value_enum, default_value = "unrestricted")]
    projection_mode: ProjectionModeArg,
    /// JSON file with a list of column-index lists (blocks mode)
    #[arg(long)]
    blocks_file: Option<PathBuf>,
}

impl ScoreParamArgs {
    fn build(&self, seed: u64) -> Result<ScoreParams, CliError> {
        let projection_mode = match self.projection_mode {
            ProjectionModeArg::Unrestricted => ProjectionMode::Unrestricted,
            ProjectionModeArg::Full => ProjectionMode::FullOnly,
            ProjectionModeArg::Blocks => {
                let path = self.blocks_file.as_ref().ok_or_else(|| {
                    CliError::input("--projection-mode blocks requires --blocks-file")
                })?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::input(format!("cannot read blocks file: {e}")))?;
                let blocks: Vec<Vec<usize>> = serde_json::from_str(&text)
                    .map_err(|e| CliError::input(format!("invalid blocks JSON: {e}")))?;
                ProjectionMode::BlockConstrained(blocks)
            }
        };
        Ok(ScoreParams {
            num_proj: self.num_proj,
            num_trees_per_proj: self.trees_per_proj,
            min_node_size: self.min_node,
            tau: self.tau,
            projection_mode,
            seed,
            ..ScoreParams::default()
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate missing values in a complete CSV under a chosen mechanism
    Ampute {
        #[arg(long, value_enum)]
        mechanism: Mechanism,
        #[arg(long)]
        p_miss: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of MAR candidate patterns (default: half the columns)
        #[arg(long)]
        mar_patterns: Option<usize>,
    },
    /// Fill the missing cells of an incomplete CSV, one output per
    /// completion
    Impute {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_N_IMPUTATIONS)]
        n_imputations: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "in")]
        input: PathBuf,
        /// Completions are written to <prefix>001.csv, <prefix>002.csv, ...
        #[arg(long)]
        out_prefix: String,
        #[arg(long, default_value_t = DEFAULT_K_DONORS)]
        k_donors: usize,
        #[arg(long, default_value_t = DEFAULT_N_CYCLES)]
        n_cycles: usize,
    },
    /// Score completions of an incomplete CSV
    Score {
        #[arg(long = "in")]
        input: PathBuf,
        /// Completion files: a glob with `*` or a filename prefix
        #[arg(long)]
        imputations: String,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        params: ScoreParamArgs,
        /// Attach a jackknife confidence interval
        #[arg(long, overrides_with = "no_ci")]
        ci: bool,
        #[arg(long = "no-ci")]
        no_ci: bool,
        #[arg(long, default_value_t = DEFAULT_B)]
        b_reps: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Label stored in the report
        #[arg(long, default_value = "imputation")]
        method_name: String,
    },
    /// Full validation harness on complete data: ampute, impute with each
    /// method, score with confidence intervals, propriety tests, coverage
    /// and width
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mechanism: Mechanism,
        #[arg(long)]
        p_miss: f64,
        #[arg(long)]
        seed: u64,
        /// Comma-separated subset of mean,sample,regress-mean,donor
        #[arg(long, value_delimiter = ',', default_values_t = vec![
            Method::Mean, Method::Sample, Method::RegressMean, Method::Donor
        ], value_enum)]
        methods: Vec<Method>,
        #[command(flatten)]
        params: ScoreParamArgs,
        #[arg(long, default_value_t = DEFAULT_N_IMPUTATIONS)]
        n_imputations: usize,
        #[arg(long, default_value_t = DEFAULT_B)]
        b_reps: usize,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        coverage_imputations: usize,
        #[arg(long)]
        mar_patterns: Option<usize>,
        /// Output files <prefix>.csv and <prefix>.json
        #[arg(long)]
        out_prefix: String,
    },
    /// Self-contained spiral example: generate, ampute under MCAR and the
    /// spiral rule, impute with every method, and score everything
    SpiralDemo {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        p_miss: f64,
        /// Trees per projection; the demo default trades speed for a more
        /// stable ranking
        #[arg(long, default_value_t = 20)]
        trees_per_proj: usize,
        #[arg(long, default_value_t = DEFAULT_N_IMPUTATIONS)]
        n_imputations: usize,
        #[arg(long, default_value_t = DEFAULT_B)]
        b_reps: usize,
        #[arg(long)]
        json_out: Option<PathBuf>,
        /// Exit nonzero unless the expected ranking holds under both
        /// mechanisms
        #[arg(long)]
        check: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .expect("thread pool configured once at startup");
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Ampute {
            mechanism,
            p_miss,
            seed: seed_value,
            input,
            out,
            mar_patterns,
        } => {
            let complete = util::load_complete(&input)?;
            let masked = match mechanism {
                Mechanism::Mcar => {
                    let outcome = ampute_mcar(&complete, p_miss, seed::derive(seed_value, &[10]))?;
                    if outcome.rows_redrawn > 0 {
                        eprintln!(
                            "note: {} fully-missing row masks redrawn",
                            outcome.rows_redrawn
                        );
                    }
                    outcome.matrix
                }
                Mechanism::Mar => {
                    let k = mar_patterns.unwrap_or_else(|| default_n_patterns(complete.n_cols()));
                    let spec =
                        random_mar_spec(complete.n_cols(), k, p_miss, seed::derive(seed_value, &[11]));
                    ampute_mar(&complete, &spec, seed::derive(seed_value, &[12]))?
                }
                Mechanism::Spiral => {
                    ampute_spiral(&complete, p_miss, seed::derive(seed_value, &[13]))?
                }
            };
            iscore::io::write_csv(&out, &masked)?;
            println!(
                "amputed {} of {} cells -> {}",
                masked.n_missing_cells(),
                masked.n_rows() * masked.n_cols(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Impute {
            method,
            n_imputations,
            seed: seed_value,
            input,
            out_prefix,
            k_donors,
            n_cycles,
        } => {
            let matrix = iscore::io::load_csv(&input, iscore::io::DEFAULT_MISSING_TOKEN)?;
            let set = run_method(method, &matrix, n_imputations, seed_value, k_donors, n_cycles)?;
            for note in set.notes() {
                eprintln!("note: {note}");
            }
            for (j, completion) in set.completions().iter().enumerate() {
                let path = format!("{out_prefix}{:03}.csv", j + 1);
                iscore::io::write_complete_csv(&path, completion)?;
                println!("wrote {path}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Score {
            input,
            imputations,
            seed: seed_value,
            params,
            ci,
            no_ci: _,
            b_reps,
            alpha,
            json_out,
            method_name,
        } => {
            let matrix = iscore::io::load_csv(&input, iscore::io::DEFAULT_MISSING_TOKEN)?;
            let files = util::resolve_imputation_files(&imputations)?;
            let completions = files
                .iter()
                .map(|f| {
                    iscore::io::load_complete_csv_with_schema(
                        f,
                        iscore::io::DEFAULT_MISSING_TOKEN,
                        matrix.column_names(),
                        matrix.columns(),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            let set = ImputationSet::new(&matrix, completions, method_name, seed_value)?;
            let score_params = params.build(seed_value)?;
            let classifier = ForestClassifier::from_params(&score_params);
            let report = if ci {
                dr_iscore_with_ci(&matrix, &set, &score_params, &classifier, b_reps, alpha)?
            } else {
                dr_iscore(&matrix, &set, &score_params, &classifier)?
            };
            let json = util::score_report_json(set.method_name(), &report);
            if let Some(path) = &json_out {
                std::fs::write(path, &json)
                    .map_err(|e| CliError::input(format!("cannot write report: {e}")))?;
            }
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            input,
            mechanism,
            p_miss,
            seed: seed_value,
            methods,
            params,
            n_imputations,
            b_reps,
            alpha,
            coverage_imputations,
            mar_patterns,
            out_prefix,
        } => validate::run(validate::Config {
            input,
            mechanism,
            p_miss,
            seed: seed_value,
            methods,
            params,
            n_imputations,
            b_reps,
            alpha,
            coverage_imputations,
            mar_patterns,
            out_prefix,
        }),
        Command::SpiralDemo {
            seed: seed_value,
            n,
            p_miss,
            trees_per_proj,
            n_imputations,
            b_reps,
            json_out,
            check,
        } => demo::run(demo::Config {
            seed: seed_value,
            n,
            p_miss,
            trees_per_proj,
            n_imputations,
            b_reps,
            json_out,
            check,
        }),
    }
}

/// Run one imputation method with its sub-seed stream.
fn run_method(
    method: Method,
    matrix: &iscore::IncompleteMatrix,
    n: usize,
    seed_value: u64,
    k_donors: usize,
    n_cycles: usize,
) -> Result<ImputationSet, CliError> {
    let set = match method {
        Method::Mean => impute_mean(matrix, n, seed_value)?,
        Method::Sample => impute_sample(matrix, n, seed_value)?,
        Method::RegressMean => impute_regress_mean(matrix, n, seed_value, n_cycles)?,
        Method::Donor => impute_donor(matrix, n, seed_value, k_donors, n_cycles)?,
    };
    Ok(set)
}
