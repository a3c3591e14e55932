//! Comparison methods: soft Q-iteration on log-visitation rewards with reward
//! mixing, and a Frank–Wolfe mixture of near-greedy policies.
//!
//! All visitation distributions are exact stationary distributions from
//! [`stationary_distribution`], so no sampling is involved.

use alloc::vec;
use alloc::vec::Vec;

use crate::eve::BetaSchedule;
use crate::mdp::{sa_operator, Policy, TabularMDP};
use crate::num::{abs, exp, ln, log_sum_exp, norm_inf, span};
use crate::spectral::{
    entropy_of, stationary_distribution, Distribution, RewardVector, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::{Error, Result};

/// Lower clamp applied to visitation probabilities before taking logs.
pub const VISITATION_FLOOR: f64 = 1e-12;

/// Smallest probability a Boltzmann policy assigns to an action in the prior's support.
pub const POLICY_FLOOR: f64 = 1e-300;

/// `r = −ln max(d, VISITATION_FLOOR)`.
pub fn visitation_reward(d: &Distribution) -> RewardVector {
    RewardVector::new(
        d.probs()
            .iter()
            .map(|&p| -ln(p.max(VISITATION_FLOOR)))
            .collect(),
    )
    .expect("floored logs are finite")
}

/// Soft state value `β⁻¹ ln Σ_a π₀(a|s) e^{βQ(s,a)}`.
pub fn soft_value(q: &[f64], pi0: &Policy, beta: f64, s: usize) -> f64 {
    let na = pi0.n_actions();
    let row = pi0.row(s);
    log_sum_exp(
        (0..na)
            .filter(|&a| row[a] > 0.0)
            .map(|a| ln(row[a]) + beta * q[s * na + a]),
    ) / beta
}

fn soft_values(q: &[f64], pi0: &Policy, beta: f64) -> Vec<f64> {
    (0..pi0.n_states())
        .map(|s| soft_value(q, pi0, beta, s))
        .collect()
}

/// `π(a|s) ∝ π₀(a|s) e^{βQ(s,a)}`; entries in the prior's support never drop
/// below [`POLICY_FLOOR`].
pub fn boltzmann_policy(q: &[f64], pi0: &Policy, beta: f64) -> Result<Policy> {
    let na = pi0.n_actions();
    if q.len() != pi0.as_slice().len() {
        return Err(Error::DimensionMismatch {
            what: "q vs policy",
            expected: pi0.as_slice().len(),
            found: q.len(),
        });
    }
    let mut w = vec![0.0; q.len()];
    for s in 0..pi0.n_states() {
        let row = pi0.row(s);
        let top = (0..na)
            .filter(|&a| row[a] > 0.0)
            .map(|a| beta * q[s * na + a])
            .fold(f64::NEG_INFINITY, f64::max);
        for a in 0..na {
            if row[a] > 0.0 {
                w[s * na + a] = (row[a] * exp(beta * q[s * na + a] - top)).max(POLICY_FLOOR);
            }
        }
    }
    Policy::from_weights(pi0.n_states(), na, w)
}

fn check_inputs(
    mdp: &TabularMDP,
    pi0: &Policy,
    r: &RewardVector,
    q: &[f64],
    beta: f64,
) -> Result<()> {
    let n = mdp.n_pairs();
    if pi0.n_states() != mdp.n_states() || pi0.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch {
            what: "policy vs MDP",
            expected: n,
            found: pi0.as_slice().len(),
        });
    }
    if r.len() != n {
        return Err(Error::DimensionMismatch {
            what: "reward vs MDP",
            expected: n,
            found: r.len(),
        });
    }
    if q.len() != n {
        return Err(Error::DimensionMismatch {
            what: "q vs MDP",
            expected: n,
            found: q.len(),
        });
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::config(
            "beta",
            "inverse temperature must be positive",
        ));
    }
    Ok(())
}

/// Result of [`soft_q_discounted`].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftQSolution {
    pub q: Vec<f64>,
    pub policy: Policy,
    /// `‖Q_k − Q_{k−1}‖∞` of the last sweep.
    pub residual: f64,
}

/// Result of [`soft_q_differential`].
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialSolution {
    pub q: Vec<f64>,
    /// Reward-rate estimate.
    pub rho: f64,
    pub policy: Policy,
    /// Span of `Q_k − Q_{k−1}` for the last sweep.
    pub span_residual: f64,
}

#[allow(clippy::too_many_arguments)]
fn discounted_sweeps<F: FnMut(usize, f64, &[f64])>(
    mdp: &TabularMDP,
    pi0: &Policy,
    r: &RewardVector,
    gamma: f64,
    beta: f64,
    steps: usize,
    mut q: Vec<f64>,
    mut on_sweep: F,
) -> (Vec<f64>, f64) {
    let na = mdp.n_actions();
    let mut residual = 0.0;
    for k in 1..=steps {
        let v = soft_values(&q, pi0, beta);
        let next: Vec<f64> = (0..q.len())
            .map(|j| r.values()[j] + gamma * v[mdp.next(j / na, j % na)])
            .collect();
        residual = next
            .iter()
            .zip(&q)
            .fold(0.0, |m: f64, (a, b)| m.max(abs(a - b)));
        q = next;
        on_sweep(k, residual, &q);
    }
    (q, residual)
}

/// `steps` synchronous backups `Q ← r + γ·V(s')` with the KL-regularized soft value.
#[allow(clippy::too_many_arguments)]
pub fn soft_q_discounted(
    mdp: &TabularMDP,
    pi0: &Policy,
    r: &RewardVector,
    gamma: f64,
    beta: f64,
    steps: usize,
    q_init: &[f64],
) -> Result<SoftQSolution> {
    check_inputs(mdp, pi0, r, q_init, beta)?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::config("gamma", "must lie in [0, 1)"));
    }
    let (q, residual) = discounted_sweeps(
        mdp,
        pi0,
        r,
        gamma,
        beta,
        steps,
        q_init.to_vec(),
        |_, _, _| {},
    );
    let policy = boltzmann_policy(&q, pi0, beta)?;
    Ok(SoftQSolution {
        q,
        policy,
        residual,
    })
}

fn differential_sweeps<F: FnMut(usize, f64, &[f64])>(
    mdp: &TabularMDP,
    pi0: &Policy,
    r: &RewardVector,
    beta: f64,
    steps: usize,
    mut q: Vec<f64>,
    mut on_sweep: F,
) -> (Vec<f64>, f64, f64) {
    let na = mdp.n_actions();
    let mut rho = 0.0;
    let mut residual = f64::INFINITY;
    for k in 1..=steps {
        let v = soft_values(&q, pi0, beta);
        let backup: Vec<f64> = (0..q.len())
            .map(|j| r.values()[j] + v[mdp.next(j / na, j % na)])
            .collect();
        // Relative value iteration anchored at flat index 0.
        rho = backup[0];
        let next: Vec<f64> = backup.iter().map(|b| b - rho).collect();
        let diff: Vec<f64> = next.iter().zip(&q).map(|(a, b)| a - b).collect();
        residual = span(&diff);
        q = next;
        on_sweep(k, residual, &q);
    }
    (q, rho, residual)
}

/// `steps` relative-value backups `Q ← r − ρ + V(s')`, with `ρ` the backup at
/// flat index 0 so that `Q(0) = 0` after every sweep.
pub fn soft_q_differential(
    mdp: &TabularMDP,
    pi0: &Policy,
    r: &RewardVector,
    beta: f64,
    steps: usize,
    q_init: &[f64],
) -> Result<DifferentialSolution> {
    check_inputs(mdp, pi0, r, q_init, beta)?;
    if steps == 0 {
        return Err(Error::config("steps", "must be positive"));
    }
    let (q, rho, span_residual) =
        differential_sweeps(mdp, pi0, r, beta, steps, q_init.to_vec(), |_, _, _| {});
    let policy = boltzmann_policy(&q, pi0, beta)?;
    Ok(DifferentialSolution {
        q,
        rho,
        policy,
        span_residual,
    })
}

/// Discounted or average-reward soft Q-iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SoftQMode {
    Discounted { gamma: f64 },
    Differential,
}

/// Settings for [`reward_mixing_loop`].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftQConfig {
    pub mode: SoftQMode,
    pub beta_schedule: BetaSchedule,
    /// Soft-Q sweeps between reward updates.
    pub inner_steps: usize,
    /// Reward mixing rate `η`.
    pub mix_rate: f64,
    pub outer_iters: usize,
}

impl SoftQConfig {
    /// Discounted defaults: `η = 0.1`, 50 sweeps, `β` from 1 to 10 over 60 outer iterations.
    pub fn discounted(gamma: f64) -> Self {
        SoftQConfig {
            mode: SoftQMode::Discounted { gamma },
            beta_schedule: BetaSchedule::Linear {
                start: 1.0,
                end: 10.0,
            },
            inner_steps: 50,
            mix_rate: 0.1,
            outer_iters: 60,
        }
    }

    /// Average-reward defaults: as [`SoftQConfig::discounted`] but `η = 0.05`.
    pub fn differential() -> Self {
        SoftQConfig {
            mode: SoftQMode::Differential,
            mix_rate: 0.05,
            ..SoftQConfig::discounted(0.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SoftQMode::Discounted { gamma } = self.mode {
            if !(0.0..1.0).contains(&gamma) {
                return Err(Error::config("gamma", "must lie in [0, 1)"));
            }
        }
        if !(self.mix_rate > 0.0 && self.mix_rate <= 1.0) {
            return Err(Error::config("mix_rate", "must lie in (0, 1]"));
        }
        if self.inner_steps == 0 {
            return Err(Error::config("inner_steps", "must be positive"));
        }
        if self.outer_iters == 0 {
            return Err(Error::config("outer_iters", "must be positive"));
        }
        let check = |b: f64| b > 0.0 && b.is_finite();
        let ok = match self.beta_schedule {
            BetaSchedule::Constant(b) => check(b),
            BetaSchedule::Linear { start, end } => check(start) && check(end),
        };
        if !ok {
            return Err(Error::config(
                "beta_schedule",
                "beta must be positive and finite",
            ));
        }
        Ok(())
    }
}

/// What the current iterate of a baseline represents.
#[derive(Debug)]
pub enum Evaluation<'a> {
    /// A single policy; its stationary distribution is the visitation.
    Policy(&'a Policy),
    /// The visitation of a policy mixture, already computed.
    Mixture(&'a Distribution),
}

/// One synchronous value update of a baseline.
#[derive(Debug)]
pub struct SweepEvent<'a> {
    /// Outer iteration, 1-based.
    pub outer: usize,
    /// Cumulative sweeps, 1-based.
    pub step: usize,
    pub beta: f64,
    pub residual: f64,
    pub evaluation: Evaluation<'a>,
}

/// One outer iteration of a baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub outer: usize,
    pub beta: f64,
    /// Entropy of the visitation after this iteration.
    pub entropy: f64,
    /// Residual of the last inner sweep.
    pub residual: f64,
    /// Reward-rate estimate (average-reward planners only).
    pub rho: Option<f64>,
    /// Frank–Wolfe step size (mixture only).
    pub step_size: Option<f64>,
    pub cumulative_steps: usize,
}

/// Final state of [`reward_mixing_loop`].
#[derive(Debug, Clone, PartialEq)]
pub struct MixingOutcome {
    pub policy: Policy,
    pub q: Vec<f64>,
    pub distribution: Distribution,
    pub trace: Vec<OuterRecord>,
}

fn policy_distribution(mdp: &TabularMDP, policy: &Policy) -> Result<Distribution> {
    stationary_distribution(&sa_operator(mdp, policy)?, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Reward-mixing soft Q-iteration from `Q = 0`.
pub fn reward_mixing_loop(
    mdp: &TabularMDP,
    pi0: &Policy,
    cfg: &SoftQConfig,
) -> Result<MixingOutcome> {
    reward_mixing_loop_observed(mdp, pi0, cfg, None, |_| {})
}

/// Reward-mixing soft Q-iteration.
///
/// Each outer iteration computes the visitation `d` of the current policy, mixes
/// `r ← (1−η)r + η(−ln d)`, runs `inner_steps` backups warm-started from the previous
/// `Q`, and replaces the policy with the Boltzmann policy of `Q` relative to `pi0`.
pub fn reward_mixing_loop_observed<F: FnMut(SweepEvent<'_>)>(
    mdp: &TabularMDP,
    pi0: &Policy,
    cfg: &SoftQConfig,
    q_init: Option<Vec<f64>>,
    mut observer: F,
) -> Result<MixingOutcome> {
    cfg.validate()?;
    let n = mdp.n_pairs();
    let mut q = q_init.unwrap_or_else(|| vec![0.0; n]);
    check_inputs(mdp, pi0, &RewardVector::zeros(n), &q, 1.0)?;

    let mut policy = pi0.clone();
    let mut d = policy_distribution(mdp, &policy)?;
    let mut reward: Option<Vec<f64>> = None;
    let mut trace = Vec::with_capacity(cfg.outer_iters);
    let mut steps = 0;

    for outer in 1..=cfg.outer_iters {
        let beta = cfg.beta_schedule.at(outer, cfg.outer_iters);
        let fresh = visitation_reward(&d);
        let mixed = match reward {
            None => fresh.values().to_vec(),
            Some(prev) => prev
                .iter()
                .zip(fresh.values())
                .map(|(p, f)| (1.0 - cfg.mix_rate) * p + cfg.mix_rate * f)
                .collect(),
        };
        let r = RewardVector::new(mixed.clone())?;
        reward = Some(mixed);

        let mut failure = None;
        let on_sweep = |k: usize, residual: f64, q: &[f64]| {
            if failure.is_some() {
                return;
            }
            match boltzmann_policy(q, pi0, beta) {
                Ok(p) => observer(SweepEvent {
                    outer,
                    step: steps + k,
                    beta,
                    residual,
                    evaluation: Evaluation::Policy(&p),
                }),
                Err(e) => failure = Some(e),
            }
        };
        let (next_q, residual, rho) = match cfg.mode {
            SoftQMode::Discounted { gamma } => {
                let (q, res) =
                    discounted_sweeps(mdp, pi0, &r, gamma, beta, cfg.inner_steps, q, on_sweep);
                (q, res, None)
            }
            SoftQMode::Differential => {
                let (q, rho, res) =
                    differential_sweeps(mdp, pi0, &r, beta, cfg.inner_steps, q, on_sweep);
                (q, res, Some(rho))
            }
        };
        if let Some(e) = failure {
            return Err(e);
        }
        q = next_q;
        steps += cfg.inner_steps;
        policy = boltzmann_policy(&q, pi0, beta)?;
        d = policy_distribution(mdp, &policy)?;
        trace.push(OuterRecord {
            outer,
            beta,
            entropy: entropy_of(d.probs()),
            residual,
            rho,
            step_size: None,
            cumulative_steps: steps,
        });
    }
    Ok(MixingOutcome {
        policy,
        q,
        distribution: d,
        trace,
    })
}

/// Convex combination of policies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePolicy {
    components: Vec<(Policy, f64)>,
}

impl MixturePolicy {
    /// Validates that the weights lie on the simplex (within 1e-12).
    pub fn new(components: Vec<(Policy, f64)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::config("components", "mixture is empty"));
        }
        if components.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::config("components", "weights must be nonnegative"));
        }
        let total: f64 = components.iter().map(|(_, w)| w).sum();
        if abs(total - 1.0) > 1e-12 {
            return Err(Error::config("components", "weights must sum to 1"));
        }
        Ok(MixturePolicy { components })
    }

    pub fn components(&self) -> &[(Policy, f64)] {
        &self.components
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|(_, w)| *w).collect()
    }

    /// `Σ wᵢ d_{πᵢ}`.
    pub fn distribution(&self, mdp: &TabularMDP) -> Result<Distribution> {
        let mut acc = vec![0.0; mdp.n_pairs()];
        for (p, w) in &self.components {
            let d = policy_distribution(mdp, p)?;
            for (a, x) in acc.iter_mut().zip(d.probs()) {
                *a += w * x;
            }
        }
        Distribution::from_weights(acc)
    }
}

/// Frank–Wolfe step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Exact line search on the mixture entropy.
    #[default]
    LineSearch,
    /// `α_k = 2/(k+1)` for outer iteration `k ≥ 1`.
    Harmonic,
}

/// Settings for [`maxent_mixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntConfig {
    pub outer_iters: usize,
    /// Planner inverse temperature.
    pub beta: f64,
    /// Differential soft-Q sweeps per planning call.
    pub inner_steps: usize,
    pub step_rule: StepRule,
}

impl Default for MaxEntConfig {
    fn default() -> Self {
        MaxEntConfig {
            outer_iters: 60,
            beta: 64.0,
            inner_steps: 50,
            step_rule: StepRule::LineSearch,
        }
    }
}

impl MaxEntConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::config("outer_iters", "must be positive"));
        }
        if self.inner_steps == 0 {
            return Err(Error::config("inner_steps", "must be positive"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::config("beta", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Final state of [`maxent_mixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaxEntOutcome {
    pub mixture: MixturePolicy,
    pub distribution: Distribution,
    pub trace: Vec<OuterRecord>,
}

/// Maximizes `H((1−α)a + αb)` over `α ∈ [0, 1]`; the objective is concave in `α`.
fn line_search(a: &[f64], b: &[f64]) -> f64 {
    let slope = |alpha: f64| -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let m = ((1.0 - alpha) * x + alpha * y).max(VISITATION_FLOOR);
                -(y - x) * (1.0 + ln(m))
            })
            .sum()
    };
    if slope(0.0) <= 0.0 {
        return 0.0;
    }
    if slope(1.0) >= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// MaxEnt from the uniform policy with `Q = 0`.
pub fn maxent_mixture(mdp: &TabularMDP, cfg: &MaxEntConfig) -> Result<MaxEntOutcome> {
    maxent_mixture_observed(mdp, cfg, None, |_| {})
}

/// Frank–Wolfe on `H(d)` over mixtures.
///
/// Starts from the uniform policy. Each outer iteration plans against
/// `r = −(1 + ln d_mix)` with high-`β` differential soft-Q (warm-started), then mixes
/// the planner's visitation into `d_mix` with the configured step size.
pub fn maxent_mixture_observed<F: FnMut(SweepEvent<'_>)>(
    mdp: &TabularMDP,
    cfg: &MaxEntConfig,
    q_init: Option<Vec<f64>>,
    mut observer: F,
) -> Result<MaxEntOutcome> {
    cfg.validate()?;
    let n = mdp.n_pairs();
    let uniform = Policy::uniform(mdp.n_states(), mdp.n_actions());
    let mut q = q_init.unwrap_or_else(|| vec![0.0; n]);
    check_inputs(mdp, &uniform, &RewardVector::zeros(n), &q, cfg.beta)?;

    let mut d_mix = policy_distribution(mdp, &uniform)?;
    let mut components = vec![(uniform.clone(), 1.0)];
    let mut trace = Vec::with_capacity(cfg.outer_iters);
    let mut steps = 0;

    for outer in 1..=cfg.outer_iters {
        let r = RewardVector::new(
            d_mix
                .probs()
                .iter()
                .map(|&p| -(1.0 + ln(p.max(VISITATION_FLOOR))))
                .collect(),
        )?;
        let current = &d_mix;
        let (next_q, rho, residual) = differential_sweeps(
            mdp,
            &uniform,
            &r,
            cfg.beta,
            cfg.inner_steps,
            q,
            |k, res, _| {
                observer(SweepEvent {
                    outer,
                    step: steps + k,
                    beta: cfg.beta,
                    residual: res,
                    evaluation: Evaluation::Mixture(current),
                })
            },
        );
        q = next_q;
        steps += cfg.inner_steps;
        let greedy = boltzmann_policy(&q, &uniform, cfg.beta)?;
        let d_new = policy_distribution(mdp, &greedy)?;
        let alpha = match cfg.step_rule {
            StepRule::LineSearch => line_search(d_mix.probs(), d_new.probs()),
            StepRule::Harmonic => 2.0 / (outer as f64 + 1.0),
        };
        let mixed: Vec<f64> = d_mix
            .probs()
            .iter()
            .zip(d_new.probs())
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        d_mix = Distribution::from_weights(mixed)?;
        for (_, w) in components.iter_mut() {
            *w *= 1.0 - alpha;
        }
        components.push((greedy, alpha));
        trace.push(OuterRecord {
            outer,
            beta: cfg.beta,
            entropy: entropy_of(d_mix.probs()),
            residual,
            rho: Some(rho),
            step_size: Some(alpha),
            cumulative_steps: steps,
        });
    }
    let total: f64 = components.iter().map(|(_, w)| w).sum();
    for (_, w) in components.iter_mut() {
        *w /= total;
    }
    Ok(MaxEntOutcome {
        mixture: MixturePolicy::new(components)?,
        distribution: d_mix,
        trace,
    })
}

/// `‖x − y‖∞`, exposed for contraction checks on soft-Q iterates.
pub fn sup_distance(x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    norm_inf(&d)
}
