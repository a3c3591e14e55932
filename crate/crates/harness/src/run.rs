//! Seeded runs of every method, flattened into per-update result rows.

use eve_core::baselines::{
    maxent_mixture_observed, reward_mixing_loop_observed, Evaluation, SweepEvent,
};
use eve_core::eve::{run_ppi_observed, PotentialVector, PpiEvent, PpiOutcome};
use eve_core::spectral::{entropy, stationary_distribution, DEFAULT_MAX_ITER, DEFAULT_TOL};
use eve_core::{sa_operator, Policy, TabularMDP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Method;

/// One synchronous value or potential update.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub seed: u64,
    /// Cumulative synchronous updates, 1-based.
    pub iteration: usize,
    pub entropy_nats: f64,
    pub residual: f64,
    pub lambda: Option<f64>,
    pub theta_star: Option<f64>,
}

/// Everything a single (method, seed) run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub method: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    /// Set when the run stopped early with an error.
    pub error: Option<String>,
    /// Full outcome for EVE runs.
    pub ppi: Option<PpiOutcome>,
}

impl RunOutput {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

const NOISE: std::ops::RangeInclusive<f64> = 0.5..=2.0;

/// All-ones potential scaled entrywise by `U[0.5, 2]` noise.
pub fn initial_potential(n: usize, seed: u64) -> PotentialVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PotentialVector::new((0..n).map(|_| rng.random_range(NOISE)).collect())
        .expect("noise is positive")
}

/// Baseline warm start `Q₀ = ln U[0.5, 2]`.
pub fn initial_q(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(NOISE).ln()).collect()
}

/// Entropy of the stationary distribution of `policy`.
pub fn policy_entropy(mdp: &TabularMDP, policy: &Policy) -> eve_core::Result<f64> {
    let op = sa_operator(mdp, policy)?;
    Ok(entropy(&stationary_distribution(
        &op,
        DEFAULT_TOL,
        DEFAULT_MAX_ITER,
    )?))
}

/// Runs one method with one seed.
pub fn run_method(mdp: &TabularMDP, label: &str, method: &Method, seed: u64) -> RunOutput {
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut failure: Option<String> = None;
    let row = |iteration, entropy_nats, residual| ResultRow {
        method: label.to_string(),
        seed,
        iteration,
        entropy_nats,
        residual,
        lambda: None,
        theta_star: None,
    };
    let uniform = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let mut ppi = None;

    let result = match method {
        Method::Eve(cfg) => {
            let u0 = initial_potential(mdp.n_pairs(), seed);
            run_ppi_observed(mdp, &uniform, cfg, Some(u0), |event| match event {
                PpiEvent::Step {
                    step,
                    residual,
                    potential,
                    prior,
                    ..
                } => {
                    if failure.is_some() {
                        return;
                    }
                    let h = eve_core::eve::extract_policy(potential, prior)
                        .and_then(|p| policy_entropy(mdp, &p));
                    match h {
                        Ok(h) => rows.push(row(step, h, residual)),
                        Err(e) => failure = Some(e.to_string()),
                    }
                }
                PpiEvent::Iteration(rec) => {
                    if let Some(last) = rows.last_mut() {
                        last.lambda = Some(rec.lambda);
                        last.theta_star = Some(rec.theta_star);
                    }
                }
            })
            .map(|out| ppi = Some(out))
        }
        Method::SoftQ(cfg) => {
            let q0 = initial_q(mdp.n_pairs(), seed);
            reward_mixing_loop_observed(mdp, &uniform, cfg, Some(q0), |e| {
                observe_sweep(mdp, e, &mut rows, &mut failure, &row)
            })
            .map(|_| ())
        }
        Method::MaxEnt(cfg) => {
            let q0 = initial_q(mdp.n_pairs(), seed);
            maxent_mixture_observed(mdp, cfg, Some(q0), |e| {
                observe_sweep(mdp, e, &mut rows, &mut failure, &row)
            })
            .map(|_| ())
        }
    };
    let error = match (result, failure) {
        (Err(e), _) => Some(e.to_string()),
        (Ok(()), Some(f)) => Some(f),
        (Ok(()), None) => None,
    };
    RunOutput {
        method: label.to_string(),
        seed,
        rows,
        error,
        ppi,
    }
}

fn observe_sweep(
    mdp: &TabularMDP,
    e: SweepEvent<'_>,
    rows: &mut Vec<ResultRow>,
    failure: &mut Option<String>,
    row: &dyn Fn(usize, f64, f64) -> ResultRow,
) {
    if failure.is_some() {
        return;
    }
    let h = match e.evaluation {
        Evaluation::Policy(p) => policy_entropy(mdp, p),
        Evaluation::Mixture(d) => Ok(entropy(d)),
    };
    match h {
        Ok(h) => rows.push(row(e.step, h, e.residual)),
        Err(err) => *failure = Some(err.to_string()),
    }
}
