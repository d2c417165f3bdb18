//! The `feeder-dnr` command line.
//!
//! Exit codes: 0 ok, 1 an infeasible period (or no solution within the
//! limits), 2 a verification failure, 3 an input, output or internal error.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use feeder_mip::{export_mps, BnbOptions};
use rayon::prelude::*;

use crate::encode::{assemble_dnr, write_audit_csv, DnrOptions};
use crate::error::PipelineError;
use crate::extract::SolutionFile;
use crate::feeder::{DerSpec, Feeder};
use crate::oracle::{grid_search_dnr, GridSpec};
use crate::pipeline::{settings_failures, solve_period, write_artifacts, PeriodOutcome, RunInfo, RunReport, SolveConfig};
use crate::profiles::{build_scenarios, Period, Profiles, Sampling};
use crate::sim::{evaluate_period, evaluate_scenarios, SimOptions};
use crate::synth::{day_periods, eight_bus, synthetic_37_day, synthetic_day, DayOptions, Synth37Options, Q_RATIO};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "feeder-dnr", version, about = "Feeder reconfiguration with regulator taps and watt-var curves")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic feeder and day, or the constraint audit of a model.
    Build(BuildArgs),
    /// Solve periods and write the report and artifacts.
    Solve(SolveArgs),
    /// Simulate a solution over every minute of a period.
    Simulate(SimulateArgs),
    /// Check a solution file against the feeder and, with profiles, the simulator.
    Verify(VerifyArgs),
    /// Brute-force topology, tap and curve grid search for small feeders.
    Oracle(OracleArgs),
    /// Write the model of one period in MPS format.
    ExportMps(ModelArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SyntheticKind {
    /// 37-bus feeder with five DERs and a synthetic day.
    Ieee37,
    /// 8-bus fixture with two DERs.
    EightBus,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Write a synthetic feeder (`feeder.json`) and day (`profiles.csv`).
    #[arg(long, value_enum)]
    pub synthetic: Option<SyntheticKind>,
    /// Seed of the synthetic day.
    #[arg(long, default_value_t = 7)]
    pub day_seed: u64,
    /// Without `--synthetic`: assemble a period of this feeder and write
    /// `audit.csv`.
    #[arg(long, requires_all = ["profiles", "period"], conflicts_with = "synthetic")]
    pub feeder: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub period: Option<Period>,
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    #[arg(long, default_value_t = 15)]
    pub tangents: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub feeder: PathBuf,
    #[arg(long)]
    pub profiles: PathBuf,
    /// One period such as `480-720`.
    #[arg(long)]
    pub period: Period,
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    #[arg(long, default_value_t = 15)]
    pub tangents: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file.
    #[arg(long = "model-out", default_value = "model.mps")]
    pub model_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub feeder: PathBuf,
    #[arg(long)]
    pub profiles: PathBuf,
    /// Comma-separated periods in minutes, e.g. `0-480,480-720`. Defaults to
    /// the five periods of the synthetic day.
    #[arg(long)]
    pub periods: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub samples: usize,
    #[arg(long, default_value_t = 15)]
    pub tangents: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Seconds per period.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub mip_gap: f64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Write one MPS file per period and stop.
    #[arg(long)]
    pub mps_only: bool,
    /// Solve periods concurrently.
    #[arg(long)]
    pub parallel_periods: bool,
    /// Skip the full-minute evaluation.
    #[arg(long)]
    pub no_minutes: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub feeder: PathBuf,
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    /// Defaults to the period recorded in the solution file.
    #[arg(long)]
    pub period: Option<Period>,
    /// Per-minute metrics CSV.
    #[arg(long, default_value = "metrics.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub feeder: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    /// Also simulate the sampled instances and audit voltage limits.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// The next three default to what the solution file records.
    #[arg(long)]
    pub period: Option<Period>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub feeder: PathBuf,
    #[arg(long)]
    pub profiles: PathBuf,
    #[arg(long)]
    pub period: Period,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 9)]
    pub beta_steps: usize,
    #[arg(long, default_value_t = 9)]
    pub gamma_steps: usize,
    /// Hold every remote regulator at this tap instead of searching all 33.
    #[arg(long, allow_hyphen_values = true)]
    pub fixed_tap: Option<i32>,
    #[arg(long, default_value = "oracle.csv")]
    pub out: PathBuf,
}

/// Everything `solve` needs, resolved from the flags.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub feeder: PathBuf,
    pub profiles: PathBuf,
    pub periods: Vec<Period>,
    pub solve: SolveConfig,
    pub out: PathBuf,
    pub parallel_periods: bool,
}

impl RunConfig {
    pub fn from_args(args: &SolveArgs) -> Result<Self, PipelineError> {
        if args.samples == 0 {
            return Err(PipelineError::Other("--samples must be at least 1".into()));
        }
        let periods = match &args.periods {
            Some(text) => Period::parse_list(text)?,
            None => day_periods(),
        };
        let bnb = BnbOptions {
            mip_gap: args.mip_gap,
            time_limit: args.time_limit.map(Duration::from_secs_f64),
            ..BnbOptions::default()
        };
        let solve = SolveConfig {
            samples: args.samples,
            seed: args.seed,
            dnr: DnrOptions {
                tangents: args.tangents,
                ..DnrOptions::default()
            },
            bnb,
            evaluate_minutes: !args.no_minutes,
            ..SolveConfig::default()
        };
        Ok(RunConfig {
            feeder: args.feeder.clone(),
            profiles: args.profiles.clone(),
            periods,
            solve,
            out: args.out.clone(),
            parallel_periods: args.parallel_periods,
        })
    }

    fn info(&self) -> RunInfo {
        RunInfo {
            feeder: self.feeder.display().to_string(),
            profiles: self.profiles.display().to_string(),
            samples: self.solve.samples,
            tangents: self.solve.dnr.tangents,
            seed: self.solve.seed,
            mip_gap: self.solve.bnb.mip_gap,
            time_limit_seconds: self.solve.bnb.time_limit.map(|d| d.as_secs_f64()),
        }
    }
}

fn load(feeder: &Path, profiles: &Path) -> Result<(Feeder, Profiles), PipelineError> {
    let feeder = Feeder::from_path(feeder)?;
    let profiles = Profiles::from_path(profiles)?;
    profiles.validate_against(&feeder)?;
    Ok((feeder, profiles))
}

/// Solves every period of `config` and writes the artifacts into its output
/// directory. Per-period infeasibility is part of the outcome.
pub fn cmd_solve(config: &RunConfig) -> Result<(RunReport, Vec<PeriodOutcome>), PipelineError> {
    let (feeder, profiles) = load(&config.feeder, &config.profiles)?;
    let solve = |&period: &Period| solve_period(&feeder, &profiles, period, &config.solve);
    let outcomes: Vec<PeriodOutcome> = if config.parallel_periods {
        config.periods.par_iter().map(solve).collect::<Result<_, _>>()?
    } else {
        config.periods.iter().map(solve).collect::<Result<_, _>>()?
    };
    let report = write_artifacts(&config.out, &feeder, config.info(), &outcomes)?;
    Ok((report, outcomes))
}

/// Writes one MPS file per period of `config` into its output directory.
pub fn cmd_mps_only(config: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let (feeder, profiles) = load(&config.feeder, &config.profiles)?;
    std::fs::create_dir_all(&config.out)?;
    let mut written = Vec::new();
    for &period in &config.periods {
        let s = &config.solve;
        let scenarios = build_scenarios(&profiles, period, s.samples, s.seed, s.sampling)?;
        let dnr = assemble_dnr(&feeder, &scenarios, &s.dnr)?;
        let path = config.out.join(format!("model-{}-{}.mps", period.start, period.end));
        std::fs::write(&path, export_mps(&dnr.model, &format!("DNR_{}_{}", period.start, period.end)))?;
        written.push(path);
    }
    Ok(written)
}

/// Outcome of `verify`: one line per failed check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub failures: Vec<String>,
    /// Simulated loss on the sampled instances, when profiles were given.
    pub simulated_loss: Option<f64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Structural checks of a solution file, plus a simulated limit audit on the
/// sampled instances when profiles are supplied.
pub fn cmd_verify(
    feeder: &Feeder,
    solution: &SolutionFile,
    profiles: Option<(&Profiles, Period, usize, u64)>,
) -> Result<VerifyReport, PipelineError> {
    let mut report = VerifyReport {
        failures: settings_failures(feeder, &solution.omega1),
        simulated_loss: None,
    };
    let Some((profiles, period, samples, seed)) = profiles else {
        return Ok(report);
    };
    if !report.passed() {
        return Ok(report);
    }
    let scenarios = build_scenarios(profiles, period, samples, seed, Sampling::Random)?;
    match evaluate_scenarios(feeder, &solution.omega1, &scenarios, &SimOptions::default()) {
        Ok((metrics, _)) => {
            if metrics.violation_count > 0 {
                report.failures.push(format!(
                    "{} voltage limit violations on {} of {} sampled instances, worst {:.3e} pu",
                    metrics.violation_count, metrics.violating_instances, metrics.instances, metrics.max_violation
                ));
            }
            report.simulated_loss = Some(metrics.total_loss);
        }
        Err(e) => report.failures.push(format!("simulation failed: {e}")),
    }
    Ok(report)
}

fn read_solution(path: &Path) -> Result<SolutionFile, PipelineError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn build(args: &BuildArgs) -> Result<i32, PipelineError> {
    std::fs::create_dir_all(&args.out)?;
    let day = DayOptions {
        seed: args.day_seed,
        ..DayOptions::default()
    };
    match (args.synthetic, &args.feeder) {
        (Some(kind), _) => {
            let (feeder, profiles) = match kind {
                SyntheticKind::Ieee37 => synthetic_37_day(&Synth37Options::default(), &day)?,
                SyntheticKind::EightBus => {
                    let mut feeder = eight_bus()?;
                    let (profiles, rating) = synthetic_day(&feeder, &day);
                    for bus in &mut feeder.buses {
                        if let Some(der) = &mut bus.der {
                            *der = DerSpec {
                                p_max: rating,
                                q_max: Q_RATIO * rating,
                            };
                        }
                    }
                    (feeder, profiles)
                }
            };
            std::fs::write(args.out.join("feeder.json"), feeder.to_json())?;
            profiles.to_path(args.out.join("profiles.csv"))?;
            println!("wrote {} buses, {} edges to {}", feeder.buses.len(), feeder.edges.len(), args.out.display());
        }
        (None, Some(feeder_path)) => {
            let (Some(profiles_path), Some(period)) = (&args.profiles, args.period) else {
                return Err(PipelineError::Other("an audit needs --profiles and --period".into()));
            };
            let (feeder, profiles) = load(feeder_path, profiles_path)?;
            let scenarios = build_scenarios(&profiles, period, args.samples, args.seed, Sampling::Random)?;
            let dnr = assemble_dnr(&feeder, &scenarios, &DnrOptions { tangents: args.tangents, ..DnrOptions::default() })?;
            let path = args.out.join("audit.csv");
            write_audit_csv(&dnr.model, std::fs::File::create(&path)?).map_err(|e| PipelineError::Other(e.to_string()))?;
            println!(
                "{} variables, {} rows; audit written to {}",
                dnr.model.num_vars(),
                dnr.model.num_constraints(),
                path.display()
            );
        }
        (None, None) => return Err(PipelineError::Other("build needs --synthetic or a model to audit".into())),
    }
    Ok(EXIT_OK)
}

fn solve(args: &SolveArgs) -> Result<i32, PipelineError> {
    let config = RunConfig::from_args(args)?;
    if args.mps_only {
        for path in cmd_mps_only(&config)? {
            println!("wrote {}", path.display());
        }
        return Ok(EXIT_OK);
    }
    let (feeder, _) = load(&config.feeder, &config.profiles)?;
    let (report, outcomes) = cmd_solve(&config)?;
    let mut code = EXIT_OK;
    for (p, o) in report.periods.iter().zip(&outcomes) {
        let objective = p.objective.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        println!(
            "{}: {} objective {objective} nodes {} wall {:.1}s",
            p.period,
            p.status,
            p.nodes,
            o.wall.as_secs_f64()
        );
        if o.omega1.is_none() {
            code = code.max(EXIT_INFEASIBLE);
        }
        for f in o.failures(&feeder) {
            println!("  FAIL {f}");
            code = EXIT_VERIFY;
        }
    }
    println!("report written to {}", config.out.join("report.toml").display());
    Ok(code)
}

fn simulate(args: &SimulateArgs) -> Result<i32, PipelineError> {
    let (feeder, profiles) = load(&args.feeder, &args.profiles)?;
    let solution = read_solution(&args.solution)?;
    let period = args
        .period
        .or(solution.period)
        .ok_or_else(|| PipelineError::Other("no period given and none recorded in the solution".into()))?;
    let eval = evaluate_period(&feeder, &solution.omega1, &profiles, period, &SimOptions::default())?;
    let mut w = csv::Writer::from_path(&args.out).map_err(|e| PipelineError::Other(e.to_string()))?;
    let csv_err = |e: csv::Error| PipelineError::Other(e.to_string());
    w.write_record(["timestamp", "loss", "min_v", "max_v", "violations"]).map_err(csv_err)?;
    for m in &eval.minutes {
        w.write_record([
            m.timestamp.to_string(),
            format!("{:.12e}", m.metrics.loss),
            format!("{:.9}", m.metrics.min_v),
            format!("{:.9}", m.metrics.max_v),
            m.metrics.violations.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let m = &eval.metrics;
    println!(
        "{period}: {} minutes, mean loss {:.6}, v in [{:.4}, {:.4}], {} violating minutes",
        m.instances,
        m.mean_loss(),
        m.min_v,
        m.max_v,
        m.violating_instances
    );
    Ok(if m.violating_instances > 0 { EXIT_VERIFY } else { EXIT_OK })
}

fn verify(args: &VerifyArgs) -> Result<i32, PipelineError> {
    let feeder = Feeder::from_path(&args.feeder)?;
    let solution = match read_solution(&args.solution) {
        Ok(s) => s,
        Err(PipelineError::Json(e)) => {
            println!("FAIL solution file does not parse: {e}");
            return Ok(EXIT_VERIFY);
        }
        Err(e) => return Err(e),
    };
    let profiles = args.profiles.as_deref().map(Profiles::from_path).transpose()?;
    let sim = match &profiles {
        Some(p) => {
            let period = args
                .period
                .or(solution.period)
                .ok_or_else(|| PipelineError::Other("no period given and none recorded in the solution".into()))?;
            let samples = args.samples.or(solution.samples).unwrap_or(2);
            Some((p, period, samples, args.seed.or(solution.seed).unwrap_or(1)))
        }
        None => None,
    };
    let report = cmd_verify(&feeder, &solution, sim)?;
    for f in &report.failures {
        println!("FAIL {f}");
    }
    if let (Some(loss), Some(obj)) = (report.simulated_loss, solution.objective) {
        println!("simulated loss {loss:.9}, recorded objective {obj:.9}, difference {:.3e}", loss - obj);
    }
    if report.passed() {
        println!("ok");
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_VERIFY)
    }
}

fn oracle(args: &OracleArgs) -> Result<i32, PipelineError> {
    let (feeder, profiles) = load(&args.feeder, &args.profiles)?;
    let scenarios = build_scenarios(&profiles, args.period, args.samples, args.seed, Sampling::Random)?;
    let spec = GridSpec {
        beta_steps: args.beta_steps,
        gamma_steps: args.gamma_steps,
        fixed_tap: args.fixed_tap,
    };
    let result = match grid_search_dnr(&feeder, &scenarios, spec) {
        Err(crate::error::OracleError::NoFeasible) => {
            println!("no configuration on the grid is feasible");
            return Ok(EXIT_INFEASIBLE);
        }
        r => r?,
    };
    result
        .write_csv(std::fs::File::create(&args.out)?)
        .map_err(|e| PipelineError::Other(e.to_string()))?;
    println!(
        "best objective {:.9} over {} configurations, grid slack {:.3e}; closed switches {:?}, taps {:?}",
        result.objective,
        result.configurations,
        result.resolution_slack,
        result.omega1.closed_switches(),
        result.omega1.taps
    );
    Ok(EXIT_OK)
}

fn export(args: &ModelArgs) -> Result<i32, PipelineError> {
    let (feeder, profiles) = load(&args.feeder, &args.profiles)?;
    let scenarios = build_scenarios(&profiles, args.period, args.samples, args.seed, Sampling::Random)?;
    let dnr = assemble_dnr(&feeder, &scenarios, &DnrOptions { tangents: args.tangents, ..DnrOptions::default() })?;
    let name = format!("DNR_{}_{}", args.period.start, args.period.end);
    std::fs::write(&args.model_out, export_mps(&dnr.model, &name))?;
    println!("wrote {}", args.model_out.display());
    Ok(EXIT_OK)
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Build(a) => build(a),
        Command::Solve(a) => solve(a),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
        Command::ExportMps(a) => export(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_IO
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_IO
            } else {
                EXIT_OK
            }
        }
    }
}

