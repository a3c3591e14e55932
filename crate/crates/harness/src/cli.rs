//! The `eve` command line: `solve`, `eval`, `compare` and `env`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use eve_core::eve::{run_ppi_observed, EveConfig, PpiEvent};
use eve_core::spectral::{entropy, stationary_distribution, DEFAULT_MAX_ITER, DEFAULT_TOL};
use eve_core::{build_gridworld, index_of_primitivity, sa_operator, GridSpec, Policy, TabularMDP};

use crate::config::{load_experiment, load_grid, parse_beta_schedule, GridSpecFile, Method};
use crate::output::{
    atomic_write, distribution_json, load_policy, results_csv, to_json_pretty, trace_csv,
    PolicyFile,
};
use crate::run::{initial_potential, run_method, RunOutput};
use crate::summary::{curves, summarize, Summary, CROSSING_FRACTION, SETTLING_BAND};
use crate::{svg, HarnessError};

#[derive(Debug, Parser)]
#[command(
    name = "eve",
    version,
    about = "Maximum-entropy policies via eigenvector fixed points"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run posterior policy iteration on one environment.
    Solve(SolveArgs),
    /// Entropy of the stationary distribution of a given policy.
    Eval(EvalArgs),
    /// Run every method and seed of an experiment file.
    Compare(CompareArgs),
    /// Write the CliffWorld preset or validate a grid spec.
    Env(EnvArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    env: PathBuf,
    /// `B`, `const:B` or `linear:B0:B1`.
    #[arg(long, default_value = "1")]
    beta: String,
    #[arg(long = "inner-iters", default_value_t = EveConfig::default().inner_iters)]
    inner_iters: usize,
    #[arg(long = "ppi-iters", default_value_t = EveConfig::default().ppi_iters)]
    ppi_iters: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = EveConfig::default().fixed_point_tol)]
    tol: f64,
    #[arg(long = "ppi-tol", allow_hyphen_values = true, default_value_t = EveConfig::default().ppi_tol)]
    ppi_tol: f64,
    /// Perturbs the starting potential. Without it the start is all ones.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "log-space")]
    log_space: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    /// Where to write the stationary distribution. Defaults to
    /// `stationary_distribution.json` beside the policy.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Do not print per-method results.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct EnvArgs {
    #[arg(long, value_parser = ["cliffworld"], requires = "out", required_unless_present = "validate", conflicts_with = "validate")]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    validate: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Env(a) => env(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn grid_mdp(path: &Path) -> Result<(GridSpec, TabularMDP), HarnessError> {
    let spec = load_grid(path)?;
    let mdp = build_gridworld(&spec)?;
    Ok((spec, mdp))
}

fn solve(a: SolveArgs) -> Result<i32, HarnessError> {
    let (_, mdp) = grid_mdp(&a.env)?;
    let cfg = EveConfig {
        beta_schedule: parse_beta_schedule(&a.beta)?,
        inner_iters: a.inner_iters,
        ppi_iters: a.ppi_iters,
        fixed_point_tol: a.tol,
        ppi_tol: a.ppi_tol,
        use_log_space: a.log_space,
    };
    cfg.validate().map_err(flag_error)?;
    let prior = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let u0 = a.seed.map(|s| initial_potential(mdp.n_pairs(), s));
    let mut records = Vec::new();
    let result = run_ppi_observed(&mdp, &prior, &cfg, u0, |e| {
        if let PpiEvent::Iteration(r) = e {
            records.push(r.clone());
        }
    });
    atomic_write(&a.out.join("trace.csv"), trace_csv(&records).as_bytes())?;
    let out = result?;
    atomic_write(
        &a.out.join("policy.json"),
        to_json_pretty(&PolicyFile::from_policy(&out.policy)).as_bytes(),
    )?;
    atomic_write(
        &a.out.join("distribution.json"),
        distribution_json(mdp.n_states(), mdp.n_actions(), out.distribution.probs()).as_bytes(),
    )?;
    if let Some(last) = records.last() {
        println!("entropy_nats {:.16e}", last.entropy_stationary);
        println!("iterations {}", last.cumulative_steps);
    }
    if out.converged {
        println!("converged");
        Ok(0)
    } else {
        eprintln!("did not converge within {} outer iterations", cfg.ppi_iters);
        Ok(2)
    }
}

/// Reports configuration errors under the flag that set the field.
fn flag_error(e: eve_core::Error) -> HarnessError {
    match e {
        eve_core::Error::BetaBelowOne(_) => HarnessError::config("--beta", e.to_string()),
        eve_core::Error::InvalidConfig { field, reason } => {
            let flag = match field {
                "beta_schedule" => "--beta",
                "inner_iters" => "--inner-iters",
                "ppi_iters" => "--ppi-iters",
                "fixed_point_tol" => "--tol",
                "ppi_tol" => "--ppi-tol",
                other => other,
            };
            HarnessError::config(flag, reason)
        }
        other => other.into(),
    }
}

fn eval(a: EvalArgs) -> Result<i32, HarnessError> {
    let (_, mdp) = grid_mdp(&a.env)?;
    let policy = load_policy(&a.policy, &mdp)?;
    let chain = mdp.state_chain(&policy)?;
    if let Err(e) = index_of_primitivity(&chain) {
        eprintln!("error: state chain under this policy is not primitive: {e}");
        return Ok(2);
    }
    let op = sa_operator(&mdp, &policy)?;
    let d = stationary_distribution(&op, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    println!("entropy_nats {:.16e}", entropy(&d));
    let out = a.out.unwrap_or_else(|| {
        a.policy
            .parent()
            .unwrap_or(Path::new("."))
            .join("stationary_distribution.json")
    });
    atomic_write(
        &out,
        distribution_json(mdp.n_states(), mdp.n_actions(), d.probs()).as_bytes(),
    )?;
    Ok(0)
}

/// Runs all jobs on up to `workers` threads, returning outputs in job order.
fn run_all(mdp: &TabularMDP, jobs: &[(String, Method, u64)], workers: usize) -> Vec<RunOutput> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<RunOutput>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((label, method, seed)) = jobs.get(k) else {
                    break;
                };
                let out = run_method(mdp, label, method, *seed);
                slots
                    .lock()
                    .expect("no worker panics while holding the lock")[k] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|o| o.expect("every job ran"))
        .collect()
}

fn compare(a: CompareArgs) -> Result<i32, HarnessError> {
    let cfg = load_experiment(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    let spec = cfg.grid(&base)?;
    let mdp = build_gridworld(&spec)?;
    let out_dir = a.out.unwrap_or_else(|| base.join(&cfg.output_dir));

    let labels: Vec<String> = cfg.methods.iter().map(|m| m.label()).collect();
    let mut jobs = Vec::new();
    for m in &cfg.methods {
        let method = m.resolve()?;
        for &seed in &cfg.seeds {
            jobs.push((m.label(), method.clone(), seed));
        }
    }
    let workers = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let runs = run_all(&mdp, &jobs, workers);

    let rows: Vec<_> = runs.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    atomic_write(&out_dir.join("results.csv"), results_csv(&rows).as_bytes())?;

    let max_entropy = ((mdp.n_pairs()) as f64).ln();
    let cs = curves(&runs, &labels);
    let figure = svg::render(
        &cs,
        "Entropy vs iterations",
        Some((max_entropy, "ln(|S||A|)")),
    );
    atomic_write(&out_dir.join("figure.svg"), figure.as_bytes())?;

    let summary = Summary {
        n_states: mdp.n_states(),
        n_actions: mdp.n_actions(),
        max_entropy,
        seeds: cfg.seeds.clone(),
        settling_band: SETTLING_BAND,
        crossing_fraction: CROSSING_FRACTION,
        methods: summarize(&cs),
    };
    atomic_write(
        &out_dir.join("summary.json"),
        to_json_pretty(&summary).as_bytes(),
    )?;

    for m in summary.methods.iter().filter(|_| !a.quiet) {
        match m.final_mean_entropy {
            Some(h) => println!(
                "{:<28} final {:.10} +- {:.2e}  runs {}/{}",
                m.method,
                h,
                m.final_sd_entropy.unwrap_or(0.0),
                m.completed_runs,
                cfg.seeds.len()
            ),
            None => println!("{:<28} no completed runs", m.method),
        }
        for f in &m.failures {
            eprintln!("{}: {f}", m.method);
        }
    }
    Ok(if runs.iter().any(RunOutput::completed) {
        0
    } else {
        2
    })
}

fn env(a: EnvArgs) -> Result<i32, HarnessError> {
    if a.preset.is_some() {
        let out = a.out.expect("clap enforces --out with --preset");
        let file = GridSpecFile::from_spec(&GridSpec::cliffworld());
        atomic_write(&out, to_json_pretty(&file).as_bytes())?;
        return Ok(0);
    }
    let path = a.validate.expect("clap enforces one of the group");
    let (_, mdp) = grid_mdp(&path)?;
    let prior = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let op = sa_operator(&mdp, &prior)?;
    let m = index_of_primitivity(op.matrix()).map_err(|e| {
        HarnessError::config(
            "env",
            format!("not primitive under the uniform policy: {e}"),
        )
    })?;
    println!("states {}", mdp.n_states());
    println!("actions {}", mdp.n_actions());
    println!("primitivity_index {m}");
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn help_exits_zero_and_bad_flags_exit_one() {
        assert_eq!(run(["eve", "--help"]), 0);
        assert_eq!(run(["eve", "solve", "--bogus"]), 1);
        assert_eq!(run(["eve", "env"]), 1);
        assert_eq!(run(["eve", "env", "--out", "x.json"]), 1);
        assert_eq!(run(["eve", "env", "--preset", "cliffworld"]), 1);
    }
}
