//! Command-line entry points: prep, replay, fit, simulate and compare.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 numerical
//! non-convergence or separation. Every run writes `<out>.manifest.json`.

mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::dataprep::{prepare, replay, write_dataset, CsvSchema, Dataset, PrepConfig, PrepLog};
use crate::estimator::{fit, hensher_diagnostics, render_table, result_to_json, FitOptions, NullModel, SeMethod};
use crate::kernel::{Reduction, RNG_ALGORITHM};
use crate::model::{pack_parameters, ModelSpec, SpecError};
use crate::segment::{compare_segments, gap_report, CompareOptions, PrimarySelection, SegmentError, DEFAULT_ALPHA_T};
use crate::synth::{simulate_dataset, ParamsFile};

pub use manifest::{sha256_hex, InputRecord, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping the worker threads of parallel reductions.
pub const THREADS_ENV: &str = "NESTFIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nestfit", version, about = "Two-level nested logit estimation for crash severity data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NullModelArg {
    Equal,
    Constants,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SeArg {
    Opg,
    Hessian,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrimaryArg {
    First,
    Second,
    Larger,
}

#[derive(Debug, clap::Args)]
pub struct FitArgs {
    /// Null model for the pseudo adjusted R^2.
    #[arg(long, value_enum, default_value = "equal")]
    pub null_model: NullModelArg,
    /// Covariance estimator behind the standard errors.
    #[arg(long, value_enum, default_value = "opg")]
    pub se: SeArg,
    /// Sequential likelihood reductions.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    /// Name of the outcome column in data files.
    #[arg(long, default_value = "chosen")]
    pub chosen_column: String,
}

impl FitArgs {
    fn options(&self) -> FitOptions {
        FitOptions {
            max_iterations: self.max_iterations,
            null_model: match self.null_model {
                NullModelArg::Equal => NullModel::EqualShares,
                NullModelArg::Constants => NullModel::ConstantsOnly,
            },
            se_method: match self.se {
                SeArg::Opg => SeMethod::OuterProduct,
                SeArg::Hessian => SeMethod::NumericHessian,
            },
            reduction: if self.deterministic {
                Reduction::Sequential
            } else {
                Reduction::Parallel
            },
            ..FitOptions::default()
        }
    }

    fn describe(&self) -> serde_json::Value {
        json!({
            "null_model": format!("{:?}", self.null_model),
            "se": format!("{:?}", self.se),
            "deterministic": self.deterministic,
            "max_iterations": self.max_iterations,
            "chosen_column": self.chosen_column,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scale, expand and screen a raw file; writes the prepared file and `<out>.prep.log`.
    Prep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        prep_config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-apply a prep-log to the raw file it came from.
    Replay {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        prep_log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model; writes `<out>_result.json` and `<out>_table.txt`.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Draw covariates and choices from a model and parameter file.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "chosen")]
        chosen_column: String,
        /// Accepted for symmetry; simulation is always reproducible from the seed.
        #[arg(long)]
        deterministic: bool,
    },
    /// Fit two segments and write the coefficient-ratio report.
    Compare {
        #[arg(long)]
        model: PathBuf,
        /// Two data files: first and second segment.
        #[arg(long, num_args = 2, required = true)]
        data: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA_T)]
        alpha_t: f64,
        #[arg(long, value_enum, default_value = "larger")]
        primary: PrimaryArg,
        #[command(flatten)]
        fit: FitArgs,
    },
}

/// Error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<crate::dataprep::PrepError> for CliError {
    fn from(e: crate::dataprep::PrepError) -> Self {
        CliError::input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str, manifest: &mut RunManifest) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    manifest.add_output(path);
    Ok(())
}

fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn schema_for(spec: &ModelSpec, chosen_column: &str) -> CsvSchema {
    CsvSchema {
        chosen_column: chosen_column.to_string(),
        alternatives: spec.tree.alternative_ids().iter().map(|s| s.to_string()).collect(),
    }
}

fn load_spec(path: &Path) -> Result<ModelSpec, CliError> {
    Ok(ModelSpec::load(path)?.validated()?)
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    execute(cli.command)
}

fn execute(command: Command) -> i32 {
    let (name, out, inputs, options, deterministic) = match &command {
        Command::Prep { data, prep_config, out } => (
            "prep",
            out.clone(),
            vec![data.clone(), prep_config.clone()],
            json!({}),
            true,
        ),
        Command::Replay { data, prep_log, out } => (
            "replay",
            out.clone(),
            vec![data.clone(), prep_log.clone()],
            json!({}),
            true,
        ),
        Command::Fit { data, model, out, fit } => (
            "fit",
            out.clone(),
            vec![data.clone(), model.clone()],
            fit.describe(),
            fit.deterministic,
        ),
        Command::Simulate {
            model,
            params,
            n,
            seed,
            out,
            chosen_column,
            deterministic,
        } => (
            "simulate",
            out.clone(),
            vec![model.clone(), params.clone()],
            json!({"n": n, "seed": seed, "chosen_column": chosen_column}),
            *deterministic,
        ),
        Command::Compare {
            model,
            data,
            out,
            alpha_t,
            primary,
            fit,
        } => {
            let mut inputs = vec![model.clone()];
            inputs.extend(data.iter().cloned());
            (
                "compare",
                out.clone(),
                inputs,
                json!({"alpha_t": alpha_t, "primary": format!("{primary:?}"), "fit": fit.describe()}),
                fit.deterministic,
            )
        }
    };
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    let mut manifest = RunManifest::new(name, &input_refs, &options, deterministic);
    let outcome = match command {
        Command::Prep { data, prep_config, out } => cmd_prep(&data, &prep_config, &out, &mut manifest),
        Command::Replay { data, prep_log, out } => cmd_replay(&data, &prep_log, &out, &mut manifest),
        Command::Fit { data, model, out, fit } => cmd_fit(&data, &model, &fit, &out, &mut manifest),
        Command::Simulate {
            model,
            params,
            n,
            seed,
            out,
            chosen_column,
            ..
        } => cmd_simulate(&model, &params, n, seed, &chosen_column, &out, &mut manifest),
        Command::Compare {
            model,
            data,
            out,
            alpha_t,
            primary,
            fit,
        } => cmd_compare(&model, &data[0], &data[1], alpha_t, primary, &fit, &out, &mut manifest),
    };
    let (code, message) = match outcome {
        Ok(None) => (EXIT_OK, None),
        Ok(Some(note)) => {
            eprintln!("nestfit {name}: {note}");
            (EXIT_NUMERIC, Some(note))
        }
        Err(e) => {
            eprintln!("nestfit {name}: {}", e.message);
            (e.code, Some(e.message))
        }
    };
    let manifest_path = suffixed(&out, ".manifest.json");
    if let Err(e) = manifest.write(&manifest_path, code, message) {
        eprintln!("nestfit {name}: cannot write manifest {}: {e}", manifest_path.display());
    }
    code
}

/// `Ok(Some(msg))` signals a numerical failure with outputs written.
type Outcome = Result<Option<String>, CliError>;

fn cmd_prep(data: &Path, config: &Path, out: &Path, manifest: &mut RunManifest) -> Outcome {
    let config = PrepConfig::from_json(&read(config)?)?;
    let raw = read(data)?;
    let (prepared, _) = prepare(&raw, &config)?;
    for w in prepared.warnings() {
        eprintln!("warning: {w}");
    }
    write(out, &write_dataset(&prepared), manifest)?;
    write(&suffixed(out, ".prep.log"), &prepared.provenance.to_text(), manifest)?;
    Ok(None)
}

fn cmd_replay(data: &Path, log: &Path, out: &Path, manifest: &mut RunManifest) -> Outcome {
    let log = PrepLog::from_text(&read(log)?)?;
    let prepared = replay(&read(data)?, &log)?;
    write(out, &write_dataset(&prepared), manifest)?;
    Ok(None)
}

fn cmd_fit(data: &Path, model: &Path, args: &FitArgs, out: &Path, manifest: &mut RunManifest) -> Outcome {
    let spec = load_spec(model)?;
    let dataset = Dataset::load(data, &schema_for(&spec, &args.chosen_column))?;
    let result = fit(&spec, &dataset, &args.options()).map_err(|e| CliError::input(e.to_string()))?;
    write(&suffixed(out, "_result.json"), &result_to_json(&result), manifest)?;
    let table = render_table(&result, &spec) + "\n" + &hensher_diagnostics(&result, &spec).to_text();
    write(&suffixed(out, "_table.txt"), &table, manifest)?;
    if result.converged {
        return Ok(None);
    }
    let mut notes: Vec<String> = result
        .separation
        .iter()
        .map(|s| format!("separation: {} at {} ({})", s.parameter, s.magnitude, s.reason))
        .collect();
    notes.extend(result.warnings.iter().cloned());
    if notes.is_empty() {
        notes.push(format!("not converged; gradient max-norm {}", result.gradient_max_norm));
    }
    Ok(Some(notes.join("; ")))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    model: &Path,
    params: &Path,
    n: usize,
    seed: u64,
    chosen_column: &str,
    out: &Path,
    manifest: &mut RunManifest,
) -> Outcome {
    manifest.seed = Some(seed);
    manifest.rng = Some(format!("{RNG_ALGORITHM}; covariates on stream 1, choices on stream 0"));
    let spec = load_spec(model)?;
    let file: ParamsFile =
        serde_json::from_str(&read(params)?).map_err(|e| CliError::input(format!("{}: {e}", params.display())))?;
    let values = pack_parameters(&spec, &file.parameters)?;
    let dataset = simulate_dataset(&spec, &values, &file.covariates, n, seed)
        .map_err(|e| CliError::input(e.to_string()))?
        .with_chosen_column(chosen_column);
    write(out, &write_dataset(&dataset), manifest)?;
    Ok(None)
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    model: &Path,
    data_a: &Path,
    data_b: &Path,
    alpha_t: f64,
    primary: PrimaryArg,
    args: &FitArgs,
    out: &Path,
    manifest: &mut RunManifest,
) -> Outcome {
    let spec = load_spec(model)?;
    let schema = schema_for(&spec, &args.chosen_column);
    let a = Dataset::load(data_a, &schema)?;
    let b = Dataset::load(data_b, &schema)?;
    let label = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let (mut la, lb) = (label(data_a), label(data_b));
    if la == lb {
        la.push_str("_1");
    }
    let options = CompareOptions {
        fit: args.options(),
        alpha_t,
        primary: match primary {
            PrimaryArg::First => PrimarySelection::First,
            PrimaryArg::Second => PrimarySelection::Second,
            PrimaryArg::Larger => PrimarySelection::Larger,
        },
        labels: (la, lb),
    };
    let comparison = compare_segments(&spec, &a, &b, &options).map_err(|e| match e {
        SegmentError::Fit { .. } | SegmentError::Schema(_) | SegmentError::Empty(_) => CliError::input(e.to_string()),
        SegmentError::EmptyRestriction { .. } => CliError {
            code: EXIT_NUMERIC,
            message: e.to_string(),
        },
    })?;
    let files = gap_report(&comparison, out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    for f in [&files.dominant_primary, &files.dominant_secondary, &files.report] {
        manifest.add_output(f);
    }
    let json_path = suffixed(out, "_comparison.json");
    let text = serde_json::to_string_pretty(&comparison).expect("comparison serialization cannot fail") + "\n";
    write(&json_path, &text, manifest)?;
    if comparison.both_converged() {
        Ok(None)
    } else {
        Ok(Some(format!(
            "segment fits did not both converge ({}: {}, {}: {})",
            comparison.primary_label,
            comparison.primary_result.converged,
            comparison.secondary_label,
            comparison.secondary_result.converged
        )))
    }
}
