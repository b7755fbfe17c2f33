//! `mcpa`: evaluate the MCPA power model, map single instances and run
//! Monte Carlo sweeps.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 domain or invalid input,
//! 3 infeasible instance, 4 resource limit, 5 configuration error.

mod config;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcpa_core::simulation::format_g6;
use mcpa_core::{
    dynamic_map, exhaustive_search, run_experiment, static_mapping, total_input_power, Error, MappingInstance,
    MidpointRule, PowerModelParams, SolverOptions, Variant,
};

use config::{ConfigError, ParamOverrides, RunConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_DOMAIN: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_RESOURCE: u8 = 4;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(name = "mcpa", version, about = "Carrier to multi-carrier PA mapping tools")]
struct Cli {
    /// Named parameter preset (exp1, exp2, exp3).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// RNG seed: the solver seed for `solve`, the experiment seed for `sweep`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo slots per cell (overrides the config file).
    #[arg(long, global = true)]
    slots: Option<usize>,
    /// Output CSV path for `sweep` (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the input power at one output power, with derivatives in the Doherty region.
    Eval {
        /// Output power in watts.
        #[arg(long, allow_negative_numbers = true)]
        pout: f64,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Map one instance record and print the assignment and its total input power.
    Solve {
        /// Instance record, e.g. "n_pa=2 k=2 powers=20,0,20,0".
        record: String,
        #[arg(long, value_enum, default_value_t = Algo::Dynamic)]
        algo: Algo,
        /// Run the exhaustive search without symmetry pruning.
        #[arg(long)]
        no_prune: bool,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Run the experiment described by a config file and write CSV.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Static,
    Dynamic,
    Exhaustive,
}

/// Explicit model constants; each overrides the preset value.
#[derive(Args)]
struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    #[arg(long)]
    p_th: Option<f64>,
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long)]
    p_sta: Option<f64>,
    #[arg(long)]
    p_slp: Option<f64>,
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Args)]
struct SolverArgs {
    /// Relative Frank-Wolfe gap tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Number of relaxed-solver starting points.
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    midpoint: Option<MidpointRule>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Config { path: String, source: ConfigError },
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e {
                Error::Domain { .. }
                | Error::InvalidParams(_)
                | Error::InvalidInstance(_)
                | Error::DimensionMismatch { .. }
                | Error::Degenerate(_) => EXIT_DOMAIN,
                Error::InfeasibleMapping(_) | Error::PaOverload { .. } | Error::NoFeasibleMapping(_) => EXIT_INFEASIBLE,
                Error::ResourceLimit { .. } => EXIT_RESOURCE,
                Error::Config(_) => EXIT_CONFIG,
            },
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Usage(_) | CliError::Io { .. } => EXIT_USAGE,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcpa: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Eval { pout, model } => eval(&cli, *pout, model),
        Command::Solve {
            record,
            algo,
            no_prune,
            model,
            solver,
        } => solve(&cli, record, *algo, *no_prune, model, solver),
        Command::Sweep { config, solver } => sweep(&cli, config, solver),
    }
}

fn model_params(preset: Option<&str>, model: &ModelArgs) -> Result<PowerModelParams, CliError> {
    let overrides = ParamOverrides {
        alpha: model.alpha,
        beta: model.beta,
        gamma: model.gamma,
        p_th: model.p_th,
        p_max: model.p_max,
        p_sta: model.p_sta,
        p_slp: model.p_slp,
        variant: model.variant,
    };
    let explicit = [overrides.alpha, overrides.beta, overrides.gamma, overrides.p_th, overrides.p_max]
        .iter()
        .chain([overrides.p_sta, overrides.p_slp].iter())
        .all(Option::is_some);
    // Without a preset or a full explicit set, fall back to exp1.
    let preset = preset.or((!explicit).then_some("exp1"));
    if let Some(name) = preset {
        if PowerModelParams::preset(name).is_none() {
            return Err(CliError::Usage(format!("unknown preset `{name}`")));
        }
    }
    overrides
        .resolve(preset)
        .map_err(|e| CliError::Core(Error::InvalidParams(e.to_string())))
}

fn eval(cli: &Cli, pout: f64, model: &ModelArgs) -> Result<(), CliError> {
    let params = model_params(cli.preset.as_deref(), model)?;
    let p_in = params.input_power(pout)?;
    let mut out = io::stdout().lock();
    let mut line = format!("p_out={} p_in={}", format_g6(pout), format_g6(p_in));
    if params.variant == Variant::Doherty && pout > params.p_th && pout < params.p_max {
        let d1 = params.d_input_power(pout)?;
        let d2 = params.d2_input_power(pout)?;
        line.push_str(&format!(" d1={} d2={}", format_g6(d1), format_g6(d2)));
    }
    writeln!(out, "{line}").map_err(stdout_error)
}

fn solver_options(base: SolverOptions, args: &SolverArgs) -> SolverOptions {
    SolverOptions {
        tol: args.tol.unwrap_or(base.tol),
        max_iters: args.max_iters.unwrap_or(base.max_iters),
        restarts: args.restarts.unwrap_or(base.restarts),
        seed: base.seed,
        midpoint: args.midpoint.unwrap_or(base.midpoint),
    }
}

fn solve(
    cli: &Cli,
    record: &str,
    algo: Algo,
    no_prune: bool,
    model: &ModelArgs,
    solver: &SolverArgs,
) -> Result<(), CliError> {
    let params = model_params(cli.preset.as_deref(), model)?;
    let mut options = solver_options(SolverOptions::default(), solver);
    options.seed = cli.seed.unwrap_or(options.seed);
    let instance: MappingInstance = record.parse()?;

    let (mapping, cost) = match algo {
        Algo::Static => {
            let mapping = static_mapping(&instance);
            let cost = total_input_power(&instance, &mapping, &params)?;
            (mapping, cost)
        }
        Algo::Dynamic => {
            let mapping = dynamic_map(&instance, &params, &options)?;
            let cost = total_input_power(&instance, &mapping, &params)?;
            (mapping, cost)
        }
        Algo::Exhaustive => {
            let result = exhaustive_search(&instance, &params, !no_prune)?;
            (result.best_mapping, result.best_cost)
        }
    };
    let assignment = mapping.assignment().expect("solvers return one PA per carrier");
    let assignment: Vec<String> = assignment.iter().map(|pa| (pa + 1).to_string()).collect();
    let mut out = io::stdout().lock();
    writeln!(out, "assignment={} total_w={}", assignment.join(","), format_g6(cost)).map_err(stdout_error)
}

fn sweep(cli: &Cli, path: &PathBuf, solver: &SolverArgs) -> Result<(), CliError> {
    let config_error = |source| CliError::Config {
        path: path.display().to_string(),
        source,
    };
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        context: path.display().to_string(),
        source,
    })?;
    let mut run_config: RunConfig = text.parse().map_err(config_error)?;
    if let Some(preset) = &cli.preset {
        run_config.preset = Some(preset.clone());
    }
    run_config.seed = cli.seed.unwrap_or(run_config.seed);
    run_config.slots = cli.slots.unwrap_or(run_config.slots);
    if let Some(out) = &cli.out {
        run_config.out = Some(out.clone());
    }
    run_config.tol = solver.tol.unwrap_or(run_config.tol);
    run_config.max_iters = solver.max_iters.unwrap_or(run_config.max_iters);
    run_config.restarts = solver.restarts.unwrap_or(run_config.restarts);
    run_config.midpoint = solver.midpoint.unwrap_or(run_config.midpoint);
    let experiment = run_config.to_experiment().map_err(config_error)?;

    eprintln!(
        "mcpa: {} with {} slots x {} cells, seed {}",
        experiment.name,
        experiment.slots,
        experiment.p_grid.len() * experiment.profiles.len() * experiment.algorithms.len(),
        experiment.seed
    );
    let metrics = run_experiment(&experiment)?;
    match &run_config.out {
        Some(out) => {
            let io_error = |source| CliError::Io {
                context: out.display().to_string(),
                source,
            };
            let mut file = io::BufWriter::new(fs::File::create(out).map_err(io_error)?);
            metrics.write_csv(&mut file).map_err(io_error)?;
            file.flush().map_err(io_error)?;
            eprintln!("mcpa: wrote {} rows to {}", metrics.cells.len(), out.display());
        }
        None => metrics.write_csv(io::stdout().lock()).map_err(stdout_error)?,
    }
    Ok(())
}

fn stdout_error(source: io::Error) -> CliError {
    CliError::Io {
        context: "stdout".into(),
        source,
    }
}
