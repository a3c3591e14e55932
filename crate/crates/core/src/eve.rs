//! The EVE fixed-point iteration and posterior policy iteration.
//!
//! For a column-stochastic chain `P` and inverse temperature `β ≥ 1` the operator is
//!
//! ```text
//! w   = uᵀP
//! 𝒯(u)_j = ( w_j^{1/β} / Σ_i P_ji · u_i^{-1/β} · w_i^{(1-β)/β} )^{β/(1+β)}
//! ```
//!
//! Its projective fixed point is the left Perron vector of the tilted matrix built
//! from the self-consistent reward `r = −ln(u∘v)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::mdp::{sa_operator, Policy, SAOperator, TabularMDP};
use crate::num::{abs, exp, ln, log_sum_exp, powf, rescale_sum};
use crate::spectral::{
    entropy_of, hilbert_metric_unchecked, stationary_distribution, tilted_operator, Distribution,
    RewardVector, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::{graph, Error, Matrix, Result};

/// Largest relative spread of `(uᵀP̃)_j / u_j` accepted as an eigenvector.
pub const RATIO_SPREAD_LIMIT: f64 = 1e-4;

/// Strictly positive potential `u(s,a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialVector(Vec<f64>);

impl PotentialVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_positive("potential", &values)?;
        Ok(PotentialVector(values))
    }

    /// The all-ones vector.
    pub fn ones(n: usize) -> Self {
        PotentialVector(vec![1.0; n])
    }

    /// `u = exp(β q)`.
    pub fn from_log(q: &[f64], beta: f64) -> Result<Self> {
        PotentialVector::new(q.iter().map(|&x| exp(beta * x)).collect())
    }

    /// `q = β⁻¹ ln u`.
    pub fn to_log(&self, beta: f64) -> Vec<f64> {
        self.0.iter().map(|&x| ln(x) / beta).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Rescales to `Σ u = len`.
    fn normalize(&mut self) {
        let n = self.0.len() as f64;
        rescale_sum(&mut self.0, n);
    }
}

fn check_positive(what: &'static str, x: &[f64]) -> Result<()> {
    match x
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
    {
        Some((index, &value)) => Err(Error::NonPositive { what, index, value }),
        None => Ok(()),
    }
}

/// Inverse temperature as a function of the outer iteration `t ∈ [1, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    Constant(f64),
    /// Linear interpolation from `start` at `t = 1` to `end` at `t = T`.
    Linear {
        start: f64,
        end: f64,
    },
}

impl BetaSchedule {
    pub fn at(&self, t: usize, total: usize) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Linear { start, end } => {
                if total <= 1 {
                    start
                } else {
                    let frac = (t.max(1) - 1) as f64 / (total - 1) as f64;
                    start + (end - start) * frac.min(1.0)
                }
            }
        }
    }

    fn min_value(&self) -> f64 {
        match *self {
            BetaSchedule::Constant(b) => b,
            BetaSchedule::Linear { start, end } => start.min(end),
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            BetaSchedule::Constant(b) => b.is_finite(),
            BetaSchedule::Linear { start, end } => start.is_finite() && end.is_finite(),
        }
    }
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Constant(1.0)
    }
}

/// Settings for [`run_ppi`].
#[derive(Debug, Clone, PartialEq)]
pub struct EveConfig {
    pub beta_schedule: BetaSchedule,
    /// Maximum inner `𝒯` applications per outer iteration (`N`).
    pub inner_iters: usize,
    /// Maximum outer iterations (`T`).
    pub ppi_iters: usize,
    /// Inner stopping threshold on `d_H(𝒯u, u)`.
    pub fixed_point_tol: f64,
    /// Outer stopping threshold on `d_H` between consecutive inner fixed points.
    pub ppi_tol: f64,
    /// Iterate `ln u` instead of `u`.
    pub use_log_space: bool,
}

impl Default for EveConfig {
    fn default() -> Self {
        EveConfig {
            beta_schedule: BetaSchedule::default(),
            inner_iters: 200,
            ppi_iters: 50,
            fixed_point_tol: 1e-10,
            ppi_tol: 1e-9,
            use_log_space: false,
        }
    }
}

impl EveConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.beta_schedule.is_finite() {
            return Err(Error::config("beta_schedule", "beta must be finite"));
        }
        let lo = self.beta_schedule.min_value();
        if !(lo >= 1.0) {
            return Err(Error::BetaBelowOne(lo));
        }
        if self.inner_iters == 0 {
            return Err(Error::config("inner_iters", "must be positive"));
        }
        if self.ppi_iters == 0 {
            return Err(Error::config("ppi_iters", "must be positive"));
        }
        if !(self.fixed_point_tol > 0.0) || !self.fixed_point_tol.is_finite() {
            return Err(Error::config(
                "fixed_point_tol",
                "must be positive and finite",
            ));
        }
        if !(self.ppi_tol >= 0.0) || !self.ppi_tol.is_finite() {
            return Err(Error::config("ppi_tol", "must be nonnegative and finite"));
        }
        Ok(())
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !beta.is_finite() || !(beta >= 1.0) {
        return Err(Error::BetaBelowOne(beta));
    }
    Ok(())
}

/// Unnormalized `𝒯(u)` for any nonnegative square matrix `m` (e.g. an m-step chain).
pub fn apply_operator(m: &Matrix, u: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !m.is_square() || m.rows() != u.len() {
        return Err(Error::DimensionMismatch {
            what: "operator vs potential",
            expected: m.rows(),
            found: u.len(),
        });
    }
    let w = m.tmul_vec(u);
    check_positive("uᵀP", &w)?;
    let inv = 1.0 / beta;
    let x: Vec<f64> = u
        .iter()
        .zip(&w)
        .map(|(&ui, &wi)| powf(ui, -inv) * powf(wi, (1.0 - beta) * inv))
        .collect();
    let denom = m.mul_vec(&x);
    check_positive("operator denominator", &denom)?;
    let outer = beta / (1.0 + beta);
    let out: Vec<f64> = w
        .iter()
        .zip(&denom)
        .map(|(&wj, &dj)| powf(powf(wj, inv) / dj, outer))
        .collect();
    check_positive("operator image", &out)?;
    Ok(out)
}

/// One EVE update followed by renormalization to `Σ u = |S||A|`.
pub fn eve_step(u: &PotentialVector, op: &SAOperator, beta: f64) -> Result<PotentialVector> {
    check_beta(beta)?;
    let mut next = PotentialVector(apply_operator(op.matrix(), u.values(), beta)?);
    next.normalize();
    Ok(next)
}

/// Log-domain support of a chain: nonzero entries per column and per row.
struct LogSupport {
    /// `cols[j]` lists `(k, ln P_kj)`.
    cols: Vec<Vec<(usize, f64)>>,
    /// `rows[j]` lists `(i, ln P_ji)`.
    rows: Vec<Vec<(usize, f64)>>,
}

impl LogSupport {
    fn new(m: &Matrix) -> Self {
        let n = m.rows();
        let mut cols = vec![Vec::new(); n];
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if v > 0.0 {
                    cols[j].push((i, ln(v)));
                    rows[i].push((j, ln(v)));
                }
            }
        }
        LogSupport { cols, rows }
    }

    /// `ln 𝒯(u)` from `ln u`, shifted so that `Σ exp = n`.
    fn step(&self, lu: &[f64], beta: f64) -> Result<Vec<f64>> {
        let n = lu.len();
        let lw: Vec<f64> = self
            .cols
            .iter()
            .map(|c| log_sum_exp(c.iter().map(|&(k, lp)| lp + lu[k])))
            .collect();
        let inv = 1.0 / beta;
        let lx: Vec<f64> = lu
            .iter()
            .zip(&lw)
            .map(|(&l, &w)| -inv * l + (1.0 - beta) * inv * w)
            .collect();
        let outer = beta / (1.0 + beta);
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            let ld = log_sum_exp(self.rows[j].iter().map(|&(i, lp)| lp + lx[i]));
            let v = outer * (inv * lw[j] - ld);
            if !v.is_finite() {
                return Err(Error::NonPositive {
                    what: "log-space operator image",
                    index: j,
                    value: exp(v),
                });
            }
            out.push(v);
        }
        let shift = log_sum_exp(out.iter().copied()) - ln(n as f64);
        for v in out.iter_mut() {
            *v -= shift;
        }
        Ok(out)
    }
}

/// Log-space update at `β = 1`:
/// `q'_j = ½ ln Σ_k P_kj e^{q_k} − ½ ln Σ_i P_ji e^{−q_i}`, shifted so `Σ e^{q'} = n`.
pub fn q_step(q: &[f64], op: &SAOperator) -> Result<Vec<f64>> {
    if q.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            what: "q vs operator",
            expected: op.dim(),
            found: q.len(),
        });
    }
    if let Some((index, &value)) = q.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonPositive {
            what: "q (finite entries)",
            index,
            value,
        });
    }
    LogSupport::new(op.matrix()).step(q, 1.0)
}

/// Per-solve diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveDiagnostics {
    /// `d_H(𝒯u_k, u_k)` for every update performed.
    pub residuals: Vec<f64>,
    /// Successive residual ratios `r_k / r_{k−1}`.
    pub contraction_ratios: Vec<f64>,
    pub converged: bool,
}

impl SolveDiagnostics {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Geometric mean of the last `k` contraction ratios with positive residuals.
    pub fn tail_ratio(&self, k: usize) -> Option<f64> {
        let r: Vec<f64> = self
            .residuals
            .iter()
            .copied()
            .filter(|&x| x > 0.0)
            .collect();
        if r.len() < 2 {
            return None;
        }
        let k = k.min(r.len() - 1).max(1);
        let last = r[r.len() - 1];
        let first = r[r.len() - 1 - k];
        Some(exp(ln(last / first) / k as f64))
    }
}

fn iterate<F: FnMut(usize, f64, &PotentialVector)>(
    op: &SAOperator,
    u0: PotentialVector,
    beta: f64,
    tol: f64,
    max_iter: usize,
    log_space: bool,
    mut on_step: F,
) -> Result<(PotentialVector, SolveDiagnostics)> {
    let mut diag = SolveDiagnostics::default();
    let push = |diag: &mut SolveDiagnostics, r: f64| {
        if let Some(&prev) = diag.residuals.last() {
            if prev > 0.0 {
                diag.contraction_ratios.push(r / prev);
            }
        }
        diag.residuals.push(r);
    };
    if log_space {
        let support = LogSupport::new(op.matrix());
        let mut lu: Vec<f64> = u0.values().iter().map(|&x| ln(x)).collect();
        for k in 1..=max_iter {
            let next = support.step(&lu, beta)?;
            let r = next
                .iter()
                .zip(&lu)
                .map(|(a, b)| a - b)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                    (lo.min(d), hi.max(d))
                });
            let r = r.1 - r.0;
            push(&mut diag, r);
            lu = next;
            let u = PotentialVector::new(lu.iter().map(|&x| exp(x)).collect())?;
            on_step(k, r, &u);
            if r <= tol {
                diag.converged = true;
                return Ok((u, diag));
            }
        }
        Ok((
            PotentialVector::new(lu.iter().map(|&x| exp(x)).collect())?,
            diag,
        ))
    } else {
        let mut u = u0;
        u.normalize();
        for k in 1..=max_iter {
            let next = eve_step(&u, op, beta)?;
            let r = hilbert_metric_unchecked(next.values(), u.values());
            push(&mut diag, r);
            u = next;
            on_step(k, r, &u);
            if r <= tol {
                diag.converged = true;
                return Ok((u, diag));
            }
        }
        Ok((u, diag))
    }
}

/// Iterates `𝒯` from the all-ones vector until `d_H(𝒯u, u) ≤ tol`.
pub fn solve_fixed_point(
    op: &SAOperator,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(PotentialVector, SolveDiagnostics)> {
    solve_fixed_point_from(
        op,
        PotentialVector::ones(op.dim()),
        beta,
        tol,
        max_iter,
        false,
    )
}

/// [`solve_fixed_point`] from a given start, optionally in log space.
pub fn solve_fixed_point_from(
    op: &SAOperator,
    u0: PotentialVector,
    beta: f64,
    tol: f64,
    max_iter: usize,
    log_space: bool,
) -> Result<(PotentialVector, SolveDiagnostics)> {
    check_beta(beta)?;
    if u0.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            what: "initial potential",
            expected: op.dim(),
            found: u0.len(),
        });
    }
    let (u, diag) = iterate(op, u0, beta, tol, max_iter, log_space, |_, _, _| {})?;
    if !diag.converged {
        return Err(Error::NotConverged {
            what: "solve_fixed_point",
            iterations: diag.iterations(),
            residual: diag.final_residual(),
        });
    }
    Ok((u, diag))
}

/// `v_j ∝ ((uᵀP)_j / u_j^{β+1})^{1/β}`, scaled so that `Σ u∘v = 1`.
pub fn recover_right_eigenvector(
    u: &PotentialVector,
    op: &SAOperator,
    beta: f64,
) -> Result<Vec<f64>> {
    if u.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            what: "potential vs operator",
            expected: op.dim(),
            found: u.len(),
        });
    }
    let w = op.matrix().tmul_vec(u.values());
    let inv = 1.0 / beta;
    let mut v: Vec<f64> = w
        .iter()
        .zip(u.values())
        .map(|(&wj, &uj)| powf(wj / powf(uj, beta + 1.0), inv))
        .collect();
    check_positive("right eigenvector", &v)?;
    let uv: f64 = v.iter().zip(u.values()).map(|(a, b)| a * b).sum();
    for x in v.iter_mut() {
        *x /= uv;
    }
    Ok(v)
}

/// `u∘v` renormalized to unit mass.
pub fn uv_product(u: &PotentialVector, v: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = u.values().iter().zip(v).map(|(a, b)| a * b).collect();
    rescale_sum(&mut d, 1.0);
    d
}

/// Self-consistent reward `r = −ln(u∘v)`.
pub fn reward_from_uv(u: &PotentialVector, v: &[f64]) -> Result<RewardVector> {
    let d = uv_product(u, v);
    check_positive("u∘v", &d)?;
    RewardVector::new(d.iter().map(|&x| -ln(x)).collect())
}

/// Dominant eigenvalue and optimal rate recovered from a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaTheta {
    /// Mean of `(uᵀP̃)_j / u_j`.
    pub lambda: f64,
    /// `ln λ / β`.
    pub theta_star: f64,
    /// `(max − min) / λ` over the left ratios and the right ratios `(P̃v)_j / v_j`.
    pub ratio_spread: f64,
}

fn lambda_ratios(
    u: &PotentialVector,
    v: &[f64],
    op: &SAOperator,
    beta: f64,
) -> Result<LambdaTheta> {
    let r = reward_from_uv(u, v)?;
    let tilted = tilted_operator(op, &r, beta)?;
    let ut = tilted.matrix().tmul_vec(u.values());
    let ratios: Vec<f64> = ut.iter().zip(u.values()).map(|(a, b)| a / b).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    // With v recovered from u the left ratios are constant by construction, so the
    // spread also covers the right ratios (P̃v)_j / v_j.
    let tv = tilted.matrix().mul_vec(v);
    let right = tv.iter().zip(v).map(|(a, b)| a / b);
    let (lo, hi) = ratios
        .iter()
        .copied()
        .chain(right)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        });
    Ok(LambdaTheta {
        lambda: mean,
        theta_star: ln(mean) / beta,
        ratio_spread: (hi - lo) / mean,
    })
}

/// `λ` as the ratio `(uᵀP̃)_j / u_j` for the tilted matrix built from `r = −ln(u∘v)`,
/// and `θ* = ln λ / β`. Fails when the left and right ratios are not one constant to
/// [`RATIO_SPREAD_LIMIT`].
pub fn extract_lambda_theta(
    u: &PotentialVector,
    v: &[f64],
    op: &SAOperator,
    beta: f64,
) -> Result<LambdaTheta> {
    let lt = lambda_ratios(u, v, op, beta)?;
    if !(lt.ratio_spread <= RATIO_SPREAD_LIMIT) {
        return Err(Error::RatioSpread {
            spread: lt.ratio_spread,
            limit: RATIO_SPREAD_LIMIT,
        });
    }
    Ok(lt)
}

/// `π*(a|s) ∝ π₀(a|s)·u(s,a)`.
pub fn extract_policy(u: &PotentialVector, pi0: &Policy) -> Result<Policy> {
    if u.len() != pi0.as_slice().len() {
        return Err(Error::DimensionMismatch {
            what: "potential vs policy",
            expected: pi0.as_slice().len(),
            found: u.len(),
        });
    }
    let w: Vec<f64> = pi0
        .as_slice()
        .iter()
        .zip(u.values())
        .map(|(p, x)| p * x)
        .collect();
    Policy::from_weights(pi0.n_states(), pi0.n_actions(), w)
}

/// Diagnostics for one completed outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PpiRecord {
    /// Outer iteration, 1-based.
    pub t: usize,
    pub beta: f64,
    pub lambda: f64,
    pub theta_star: f64,
    pub ratio_spread: f64,
    /// `H(u∘v)`.
    pub entropy_uv: f64,
    /// Entropy of the stationary distribution of the extracted policy.
    pub entropy_stationary: f64,
    /// `E_d[−ln(u∘v)]` under that stationary distribution.
    pub entropy_rate: f64,
    /// Last inner residual `d_H(𝒯u, u)`.
    pub residual: f64,
    pub inner_iters: usize,
    pub inner_converged: bool,
    /// Inner updates performed so far, across all outer iterations.
    pub cumulative_steps: usize,
    /// `‖u∘v − d‖₁`.
    pub uv_l1_gap: f64,
    /// `d_H` between this fixed point and the previous one (or the start).
    pub fixed_point_shift: f64,
}

/// All outer-iteration records of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub records: Vec<PpiRecord>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&PpiRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Final state of [`run_ppi`].
#[derive(Debug, Clone, PartialEq)]
pub struct PpiOutcome {
    pub policy: Policy,
    pub potential: PotentialVector,
    pub right: Vec<f64>,
    /// Stationary distribution of `policy`.
    pub distribution: Distribution,
    pub trace: RunTrace,
    /// True when consecutive fixed points agreed within `ppi_tol`.
    pub converged: bool,
}

/// Progress notification from [`run_ppi_observed`].
#[derive(Debug)]
pub enum PpiEvent<'a> {
    /// One inner update.
    Step {
        t: usize,
        /// Cumulative inner updates, 1-based.
        step: usize,
        residual: f64,
        potential: &'a PotentialVector,
        /// Prior in force during this outer iteration.
        prior: &'a Policy,
    },
    /// An outer iteration completed.
    Iteration(&'a PpiRecord),
}

/// Posterior policy iteration from the all-ones potential.
pub fn run_ppi(mdp: &TabularMDP, pi0: &Policy, cfg: &EveConfig) -> Result<PpiOutcome> {
    run_ppi_observed(mdp, pi0, cfg, None, |_| {})
}

/// Posterior policy iteration with an optional starting potential and a progress callback.
///
/// Each outer iteration warm-starts the inner solve from the previous fixed point,
/// extracts `π*`, and replaces the prior with it.
pub fn run_ppi_observed<F: FnMut(PpiEvent<'_>)>(
    mdp: &TabularMDP,
    pi0: &Policy,
    cfg: &EveConfig,
    u0: Option<PotentialVector>,
    mut observer: F,
) -> Result<PpiOutcome> {
    cfg.validate()?;
    let mut op = sa_operator(mdp, pi0)?;
    if graph::matrix_period(op.matrix()).is_none() {
        return Err(Error::Reducible);
    }
    let mut u = match u0 {
        Some(u) if u.len() != op.dim() => {
            return Err(Error::DimensionMismatch {
                what: "initial potential",
                expected: op.dim(),
                found: u.len(),
            })
        }
        Some(u) => u,
        None => PotentialVector::ones(op.dim()),
    };
    u.normalize();

    let mut trace = RunTrace::default();
    let mut steps = 0usize;
    let mut converged = false;
    let mut last = None;
    let wrap = |t: usize| {
        move |e: Error| Error::Ppi {
            iteration: t,
            source: alloc::boxed::Box::new(e),
        }
    };

    for t in 1..=cfg.ppi_iters {
        let beta = cfg.beta_schedule.at(t, cfg.ppi_iters);
        let prev = u.clone();
        let prior = op.prior().clone();
        let (next, diag) = iterate(
            &op,
            u,
            beta,
            cfg.fixed_point_tol,
            cfg.inner_iters,
            cfg.use_log_space,
            |k, residual, potential| {
                observer(PpiEvent::Step {
                    t,
                    step: steps + k,
                    residual,
                    potential,
                    prior: &prior,
                })
            },
        )
        .map_err(wrap(t))?;
        u = next;
        steps += diag.iterations();

        let v = recover_right_eigenvector(&u, &op, beta).map_err(wrap(t))?;
        let lt = lambda_ratios(&u, &v, &op, beta).map_err(wrap(t))?;
        let uv = uv_product(&u, &v);
        let policy = extract_policy(&u, &prior).map_err(wrap(t))?;
        let chain = sa_operator(mdp, &policy).map_err(wrap(t))?;
        let d = stationary_distribution(&chain, DEFAULT_TOL, DEFAULT_MAX_ITER).map_err(wrap(t))?;
        let entropy_rate: f64 = d.probs().iter().zip(&uv).map(|(p, q)| -p * ln(*q)).sum();
        let uv_l1_gap: f64 = d.probs().iter().zip(&uv).map(|(p, q)| abs(p - q)).sum();
        let shift = hilbert_metric_unchecked(u.values(), prev.values());

        let record = PpiRecord {
            t,
            beta,
            lambda: lt.lambda,
            theta_star: lt.theta_star,
            ratio_spread: lt.ratio_spread,
            entropy_uv: entropy_of(&uv),
            entropy_stationary: entropy_of(d.probs()),
            entropy_rate,
            residual: diag.final_residual(),
            inner_iters: diag.iterations(),
            inner_converged: diag.converged,
            cumulative_steps: steps,
            uv_l1_gap,
            fixed_point_shift: shift,
        };
        observer(PpiEvent::Iteration(&record));
        trace.records.push(record);
        last = Some((policy.clone(), v, d));
        op = chain;
        if diag.converged && shift <= cfg.ppi_tol {
            converged = true;
            break;
        }
    }

    let (policy, right, distribution) = last.expect("ppi_iters is positive");
    Ok(PpiOutcome {
        policy,
        potential: u,
        right,
        distribution,
        trace,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_gridworld, GridSpec};
    use crate::num::span;
    use core::f64::consts::LN_2;

    fn single() -> SAOperator {
        let mdp = TabularMDP::new(1, 1, vec![0], 0).unwrap();
        sa_operator(&mdp, &Policy::uniform(1, 1)).unwrap()
    }

    fn two_cycle() -> (TabularMDP, SAOperator) {
        let mdp = TabularMDP::cycle(2);
        let op = sa_operator(&mdp, &Policy::uniform(2, 1)).unwrap();
        (mdp, op)
    }

    #[test]
    fn scalar_chain_is_a_fixed_point() {
        let op = single();
        for c in [0.3, 1.0, 7.0] {
            let t = apply_operator(op.matrix(), &[c], 1.0).unwrap();
            assert!((t[0] - c).abs() < 1e-14 * c);
            let stepped = eve_step(&PotentialVector::new(vec![c]).unwrap(), &op, 1.0).unwrap();
            assert_eq!(stepped.values(), &[1.0]);
        }
    }

    #[test]
    fn two_cycle_swaps_entries() {
        let (_, op) = two_cycle();
        let t = apply_operator(op.matrix(), &[2.0, 5.0], 1.0).unwrap();
        assert!((t[0] - 5.0).abs() < 1e-14 && (t[1] - 2.0).abs() < 1e-14);
        let (u, diag) = solve_fixed_point(&op, 1.0, 1e-12, 10).unwrap();
        assert_eq!(u.values(), &[1.0, 1.0]);
        assert_eq!(diag.iterations(), 1);
        assert_eq!(diag.final_residual(), 0.0);
    }

    #[test]
    fn q_step_matches_multiplicative_step() {
        let (_, op) = two_cycle();
        let q = q_step(&[0.4, -1.3], &op).unwrap();
        let diff = [q[0] - (-1.3), q[1] - 0.4];
        assert!(span(&diff) < 1e-14);

        let mdp = build_gridworld(&GridSpec::open(2, 2, crate::GridCell::new(0, 0))).unwrap();
        let pi0 =
            Policy::from_weights(4, 4, (0..16).map(|i| 1.0 + (i % 5) as f64).collect()).unwrap();
        let op = sa_operator(&mdp, &pi0).unwrap();
        let u: Vec<f64> = (0..16).map(|i| 0.5 + (i * 7 % 11) as f64 / 5.0).collect();
        let lq: Vec<f64> = u.iter().map(|x| x.ln()).collect();
        let q = q_step(&lq, &op).unwrap();
        let t = apply_operator(op.matrix(), &u, 1.0).unwrap();
        let diff: Vec<f64> = q.iter().zip(&t).map(|(a, b)| a - b.ln()).collect();
        assert!(span(&diff) < 1e-12);
    }

    #[test]
    fn right_vector_small_cases() {
        let op = single();
        let u = PotentialVector::new(vec![4.0]).unwrap();
        let v = recover_right_eigenvector(&u, &op, 1.0).unwrap();
        assert!((v[0] - 0.25).abs() < 1e-15);

        let (_, op) = two_cycle();
        let u = PotentialVector::ones(2);
        let v = recover_right_eigenvector(&u, &op, 1.0).unwrap();
        assert_eq!(uv_product(&u, &v), vec![0.5, 0.5]);
        let r = reward_from_uv(&u, &v).unwrap();
        assert!(r.values().iter().all(|&x| (x - LN_2).abs() < 1e-15));
        let lt = extract_lambda_theta(&u, &v, &op, 1.0).unwrap();
        assert!((lt.lambda - 2.0).abs() < 1e-14);
        assert!((lt.theta_star - LN_2).abs() < 1e-14);
    }

    #[test]
    fn lambda_spread_is_checked() {
        let mdp = build_gridworld(&GridSpec::open(2, 1, crate::GridCell::new(0, 0))).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(2, 4)).unwrap();
        let u = PotentialVector::new((1..=8).map(|i| i as f64).collect()).unwrap();
        let v = recover_right_eigenvector(&u, &op, 1.0).unwrap();
        assert!(matches!(
            extract_lambda_theta(&u, &v, &op, 1.0),
            Err(Error::RatioSpread { .. })
        ));
    }

    #[test]
    fn policy_extraction() {
        let pi0 = Policy::from_weights(2, 3, vec![1.0, 2.0, 0.0, 3.0, 1.0, 1.0]).unwrap();
        let same = extract_policy(&PotentialVector::new(vec![2.5; 6]).unwrap(), &pi0).unwrap();
        for (a, b) in same.as_slice().iter().zip(pi0.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        let u = PotentialVector::new(vec![1.0, 3.0, 9.0, 0.5, 2.0, 4.0]).unwrap();
        let pi = extract_policy(&u, &pi0).unwrap();
        assert!(crate::support_equal(&pi, &pi0));
    }

    #[test]
    fn beta_validation() {
        let op = single();
        assert_eq!(
            solve_fixed_point(&op, 0.5, 1e-10, 10).unwrap_err(),
            Error::BetaBelowOne(0.5)
        );
        let cfg = EveConfig {
            beta_schedule: BetaSchedule::Linear {
                start: 0.9,
                end: 10.0,
            },
            ..EveConfig::default()
        };
        assert_eq!(cfg.validate(), Err(Error::BetaBelowOne(0.9)));
        let cfg = EveConfig {
            inner_iters: 0,
            ..EveConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(Error::InvalidConfig {
                field: "inner_iters",
                ..
            })
        ));
    }

    #[test]
    fn linear_schedule_endpoints() {
        let s = BetaSchedule::Linear {
            start: 1.0,
            end: 10.0,
        };
        assert_eq!(s.at(1, 10), 1.0);
        assert_eq!(s.at(10, 10), 10.0);
        assert_eq!(s.at(4, 10), 4.0);
        assert_eq!(s.at(1, 1), 1.0);
    }

    #[test]
    fn ppi_trivial_cases() {
        let (mdp, _) = two_cycle();
        let out = run_ppi(&mdp, &Policy::uniform(2, 1), &EveConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.trace.len(), 1);
        assert!((out.trace.records[0].entropy_stationary - LN_2).abs() < 1e-14);

        let mdp = TabularMDP::new(3, 1, vec![1, 2, 0], 0).unwrap();
        let out = run_ppi(&mdp, &Policy::uniform(3, 1), &EveConfig::default()).unwrap();
        assert!(out
            .trace
            .records
            .iter()
            .all(|r| (r.entropy_stationary - 3f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn ppi_rejects_reducible_prior() {
        let mdp = TabularMDP::new(2, 1, vec![1, 1], 0).unwrap();
        assert_eq!(
            run_ppi(&mdp, &Policy::uniform(2, 1), &EveConfig::default()).unwrap_err(),
            Error::Reducible
        );
    }

    #[test]
    fn log_space_solve_agrees() {
        let mdp = build_gridworld(&GridSpec::open(3, 2, crate::GridCell::new(0, 0))).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(6, 4)).unwrap();
        let (a, _) = solve_fixed_point(&op, 2.0, 1e-12, 10_000).unwrap();
        let (b, _) =
            solve_fixed_point_from(&op, PotentialVector::ones(24), 2.0, 1e-12, 10_000, true)
                .unwrap();
        assert!(hilbert_metric_unchecked(a.values(), b.values()) < 1e-10);
    }

    #[test]
    fn cliffworld_ppi_converges() {
        let mdp = build_gridworld(&GridSpec::cliffworld()).unwrap();
        let pi0 = Policy::uniform(mdp.n_states(), 4);
        let out = run_ppi(&mdp, &pi0, &EveConfig::default()).unwrap();
        let recs = &out.trace.records;
        assert!(out.converged);
        assert!(recs.last().unwrap().entropy_stationary > 4.29);
        assert!(recs.last().unwrap().uv_l1_gap < 1e-6);
        for w in recs.windows(2) {
            assert!(w[1].entropy_rate >= w[0].entropy_rate - 1e-9);
        }
        assert!(crate::support_equal(&out.policy, &pi0));
    }
}
