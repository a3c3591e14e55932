//! Tilted operators, Perron eigenpairs, stationary distributions, entropy and the
//! Hilbert projective metric.

use alloc::vec;
use alloc::vec::Vec;

use crate::graph;
use crate::mdp::SAOperator;
use crate::num::{abs, exp, ln, norm_inf, tanh, xlogx};
use crate::{Error, Matrix, Result};

/// Default residual tolerance for the spectral solvers.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration cap for the spectral solvers.
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Tolerance on the total mass of a [`Distribution`].
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-12;

/// Per-pair reward `r(s,a)` in nats per step.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector(Vec<f64>);

impl RewardVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonPositive {
                what: "reward (finite entries)",
                index: i,
                value: v,
            });
        }
        Ok(RewardVector(values))
    }

    pub fn zeros(n: usize) -> Self {
        RewardVector(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        RewardVector(vec![c; n])
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
}

/// Probability distribution over state-action pairs (flat index `s·|A| + a`).
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Validates nonnegativity and unit mass within [`DISTRIBUTION_SUM_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if let Some((i, &v)) = probs
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::NonPositive {
                what: "distribution (nonnegative entries)",
                index: i,
                value: v,
            });
        }
        let total: f64 = probs.iter().sum();
        if abs(total - 1.0) > DISTRIBUTION_SUM_TOL {
            return Err(Error::config("distribution", "entries do not sum to 1"));
        }
        Ok(Distribution(probs))
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(mut w: Vec<f64>) -> Result<Self> {
        let total: f64 = w.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::config(
                "distribution",
                "weights have no positive finite mass",
            ));
        }
        for x in w.iter_mut() {
            *x /= total;
        }
        Distribution::new(w)
    }

    pub fn uniform(n: usize) -> Self {
        Distribution(vec![1.0 / n as f64; n])
    }

    pub fn probs(&self) -> &[f64] {
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
}

/// Dominant eigenvalue with its left and right Perron vectors.
///
/// Scales are pinned by `Σ u = n` and `Σ u∘v = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl EigenPair {
    /// Rescales `left` to sum to its length and `right` so that `Σ left∘right = 1`.
    pub fn normalize(&mut self) {
        let n = self.left.len() as f64;
        let su: f64 = self.left.iter().sum();
        for x in self.left.iter_mut() {
            *x *= n / su;
        }
        let uv: f64 = self.left.iter().zip(&self.right).map(|(a, b)| a * b).sum();
        for x in self.right.iter_mut() {
            *x /= uv;
        }
    }

    /// `u∘v`, the Hadamard product of the two eigenvectors.
    pub fn product(&self) -> Vec<f64> {
        self.left
            .iter()
            .zip(&self.right)
            .map(|(a, b)| a * b)
            .collect()
    }
}

/// `P̃[(s',a'),(s,a)] = p(s'|s,a)·π₀(a'|s')·exp(β r(s,a))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedOperator {
    matrix: Matrix,
    beta: f64,
}

impl TiltedOperator {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dominant_eigenpair(&self, tol: f64, max_iter: usize) -> Result<EigenPair> {
        dominant_eigenpair(&self.matrix, tol, max_iter)
    }
}

/// Scales column `(s,a)` of the chain by `exp(β r(s,a))`.
pub fn tilted_operator(
    op: &SAOperator,
    reward: &RewardVector,
    beta: f64,
) -> Result<TiltedOperator> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::config(
            "beta",
            "inverse temperature must be positive",
        ));
    }
    if reward.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            what: "reward vs operator",
            expected: op.dim(),
            found: reward.len(),
        });
    }
    let scale: Vec<f64> = reward.values().iter().map(|&r| exp(beta * r)).collect();
    let mut matrix = op.matrix().clone();
    matrix.scale_columns(&scale);
    Ok(TiltedOperator { matrix, beta })
}

/// Dominant eigenpair of an irreducible nonnegative matrix by simultaneous power
/// iteration on `M` and `Mᵀ`, renormalizing every step.
///
/// Stops once `‖Mv − λv‖∞ ≤ tol·‖v‖∞` and `‖uᵀM − λuᵀ‖∞ ≤ tol·‖u‖∞`. Periodic
/// supports are handled by iterating on `M + cI`, which has the same eigenvectors.
pub fn dominant_eigenpair(m: &Matrix, tol: f64, max_iter: usize) -> Result<EigenPair> {
    if !m.is_square() || m.rows() == 0 {
        return Err(Error::DimensionMismatch {
            what: "dominant_eigenpair (square matrix)",
            expected: m.rows(),
            found: m.cols(),
        });
    }
    if !m.is_nonnegative() {
        return Err(Error::config(
            "matrix",
            "entries must be nonnegative and finite",
        ));
    }
    let period = graph::matrix_period(m).ok_or(Error::Reducible)?;
    let n = m.rows();
    let mut a = m.clone();
    let shift = if period > 1 {
        let sums = m.column_sums();
        let lo = sums.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().copied().fold(0.0, f64::max);
        0.5 * (lo + hi)
    } else {
        0.0
    };
    for i in 0..n {
        a[(i, i)] += shift;
    }

    let mut v = vec![1.0 / n as f64; n];
    let mut u = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let av = a.mul_vec(&v);
        let ua = a.tmul_vec(&u);
        // v and u sum to one, so these are the Collatz-Wielandt averages.
        let lam_v: f64 = av.iter().sum();
        let lam_u: f64 = ua.iter().sum();
        let res_v = av
            .iter()
            .zip(&v)
            .fold(0.0, |r: f64, (x, y)| r.max(abs(x - lam_v * y)))
            / norm_inf(&v);
        let res_u = ua
            .iter()
            .zip(&u)
            .fold(0.0, |r: f64, (x, y)| r.max(abs(x - lam_u * y)))
            / norm_inf(&u);
        residual = res_v.max(res_u);
        if residual <= tol * lam_v.max(f64::MIN_POSITIVE) || residual <= tol {
            let mut pair = EigenPair {
                eigenvalue: lam_v - shift,
                left: u,
                right: v,
            };
            pair.normalize();
            return Ok(pair);
        }
        v = av.into_iter().map(|x| x / lam_v).collect();
        u = ua.into_iter().map(|x| x / lam_u).collect();
    }
    Err(Error::NotConverged {
        what: "dominant_eigenpair",
        iterations: max_iter,
        residual,
    })
}

/// Stationary distribution of an irreducible row-stochastic matrix by the
/// Grassmann–Taksar–Heyman state reduction (subtraction-free).
fn gth_stationary(t: &Matrix) -> Option<Vec<f64>> {
    let n = t.rows();
    let mut a = t.clone();
    for k in (1..n).rev() {
        let s: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(s > 0.0) {
            return None;
        }
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                a[(i, j)] += aik * a[(k, j)];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
    }
    let total: f64 = pi.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    Some(pi.into_iter().map(|x| x / total).collect())
}

/// Fixed point `d = P d`, `Σ d = 1` of the state-action chain.
///
/// The state marginal is solved exactly on the `|S| × |S|` state chain and lifted
/// by `d(s,a) = μ(s)·π₀(a|s)`; the result is then checked against the full
/// operator and, if needed, polished by power iteration on the lazy chain
/// `(P + I)/2`. Periodic chains are fine; reducible state chains are rejected.
pub fn stationary_distribution(op: &SAOperator, tol: f64, max_iter: usize) -> Result<Distribution> {
    let mdp = op.mdp();
    let prior = op.prior();
    let chain = mdp.state_chain(prior)?;
    if !graph::is_strongly_connected(&graph::support_graph(&chain)) {
        return Err(Error::Reducible);
    }
    let mu = gth_stationary(&chain).ok_or(Error::Reducible)?;
    let na = mdp.n_actions();
    let mut d: Vec<f64> = (0..op.dim())
        .map(|j| mu[j / na] * prior.as_slice()[j])
        .collect();

    let residual = |d: &[f64]| {
        let pd = op.matrix().mul_vec(d);
        pd.iter()
            .zip(d)
            .fold(0.0, |r: f64, (x, y)| r.max(abs(x - y)))
    };
    let mut res = residual(&d);
    let mut iterations = 0;
    while res > tol {
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                what: "stationary_distribution",
                iterations,
                residual: res,
            });
        }
        let pd = op.matrix().mul_vec(&d);
        for (x, y) in d.iter_mut().zip(pd) {
            *x = 0.5 * (*x + y);
        }
        crate::num::rescale_sum(&mut d, 1.0);
        res = residual(&d);
        iterations += 1;
    }
    Distribution::new(d)
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy(d: &Distribution) -> f64 {
    entropy_of(d.probs())
}

/// Entropy of a raw probability slice.
pub fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
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

/// Hilbert projective metric `ln max(x/y) − ln min(x/y)`.
pub fn hilbert_metric(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "hilbert_metric",
            expected: x.len(),
            found: y.len(),
        });
    }
    check_positive("hilbert_metric x", x)?;
    check_positive("hilbert_metric y", y)?;
    Ok(hilbert_metric_unchecked(x, y))
}

/// [`hilbert_metric`] without the positivity checks; for hot loops over vectors
/// already known to be positive.
pub fn hilbert_metric_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .zip(y)
        .map(|(a, b)| ln(a / b))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        });
    if x.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Projective diameter `Δ(M)`: the largest Hilbert distance between two columns.
pub fn projective_diameter(m: &Matrix) -> Result<f64> {
    if let Some(k) = m.as_slice().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InfiniteDiameter {
            row: k / m.cols(),
            col: k % m.cols(),
        });
    }
    let cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| m.column(j)).collect();
    let mut diameter: f64 = 0.0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            diameter = diameter.max(hilbert_metric_unchecked(&cols[i], &cols[j]));
        }
    }
    Ok(diameter)
}

/// Birkhoff contraction coefficient `tanh(Δ(M)/4)`.
pub fn birkhoff_coefficient(m: &Matrix) -> Result<f64> {
    projective_diameter(m).map(|d| tanh(d / 4.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{build_gridworld, sa_operator, GridCell, GridSpec, Policy, TabularMDP};
    use core::f64::consts::LN_2;

    #[test]
    fn tilted_with_zero_reward_is_the_chain() {
        let mdp = build_gridworld(&GridSpec::open(2, 1, GridCell::new(0, 0))).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(2, 4)).unwrap();
        let t = tilted_operator(&op, &RewardVector::zeros(8), 3.0).unwrap();
        assert_eq!(t.matrix(), op.matrix());
        assert!(tilted_operator(&op, &RewardVector::zeros(8), 0.0).is_err());
        assert!(tilted_operator(&op, &RewardVector::zeros(3), 1.0).is_err());
    }

    #[test]
    fn tilted_single_entry() {
        let mdp = TabularMDP::new(1, 1, vec![0], 0).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(1, 1)).unwrap();
        let t = tilted_operator(&op, &RewardVector::constant(1, -1.0), 1.0).unwrap();
        assert!((t.matrix()[(0, 0)] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_cycle_tilted_eigenvalue_is_two() {
        let mdp = TabularMDP::cycle(2);
        let op = sa_operator(&mdp, &Policy::uniform(2, 1)).unwrap();
        let t = tilted_operator(&op, &RewardVector::constant(2, LN_2), 1.0).unwrap();
        assert!((t.matrix()[(0, 1)] - 2.0).abs() < 1e-14);
        assert!((t.matrix()[(1, 0)] - 2.0).abs() < 1e-14);
        let pair = t.dominant_eigenpair(1e-13, 1000).unwrap();
        assert!((pair.eigenvalue - 2.0).abs() < 1e-12);
        assert!(pair.product().iter().all(|&x| (x - 0.5).abs() < 1e-12));
    }

    #[test]
    fn scalar_eigenpair() {
        let pair = dominant_eigenpair(&Matrix::from_rows(&[&[3.5]]), 1e-14, 10).unwrap();
        assert_eq!(pair.eigenvalue, 3.5);
        assert!((pair.left[0] * pair.right[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stochastic_chain_has_unit_eigenvalue() {
        let spec = GridSpec::cliffworld();
        let mdp = build_gridworld(&spec).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(mdp.n_states(), 4)).unwrap();
        let pair = dominant_eigenpair(op.matrix(), 1e-13, 100_000).unwrap();
        assert!((pair.eigenvalue - 1.0).abs() < 1e-10);
        // Under the column convention the right vector is stationary and the left is flat.
        let d = stationary_distribution(&op, 1e-13, 1000).unwrap();
        let vsum: f64 = pair.right.iter().sum();
        for (x, y) in pair.right.iter().zip(d.probs()) {
            assert!((x / vsum - y).abs() < 1e-9);
        }
        let u0 = pair.left[0];
        assert!(pair.left.iter().all(|&x| (x / u0 - 1.0).abs() < 1e-9));
    }

    #[test]
    fn reducible_matrix_is_rejected() {
        let m = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert_eq!(dominant_eigenpair(&m, 1e-12, 100), Err(Error::Reducible));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let spec = GridSpec::cliffworld();
        let mdp = build_gridworld(&spec).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(mdp.n_states(), 4)).unwrap();
        assert!(matches!(
            dominant_eigenpair(op.matrix(), 1e-15, 3),
            Err(Error::NotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn stationary_small_cases() {
        let one = TabularMDP::new(1, 1, vec![0], 0).unwrap();
        let op = sa_operator(&one, &Policy::uniform(1, 1)).unwrap();
        assert_eq!(
            stationary_distribution(&op, 1e-14, 10).unwrap().probs(),
            &[1.0]
        );

        let cyc = TabularMDP::cycle(2);
        let op = sa_operator(&cyc, &Policy::uniform(2, 1)).unwrap();
        let d = stationary_distribution(&op, 1e-14, 10).unwrap();
        assert!(d.probs().iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn stationary_rejects_reducible_state_chain() {
        let mdp = TabularMDP::new(2, 1, vec![1, 1], 0).unwrap();
        let op = sa_operator(&mdp, &Policy::uniform(2, 1)).unwrap();
        assert_eq!(
            stationary_distribution(&op, 1e-12, 10),
            Err(Error::Reducible)
        );
    }

    #[test]
    fn entropy_closed_forms() {
        assert_eq!(
            entropy(&Distribution::new(vec![0.0, 1.0, 0.0]).unwrap()),
            0.0
        );
        for k in [1usize, 2, 7] {
            assert!((entropy(&Distribution::uniform(k)) - (k as f64).ln()).abs() < 1e-14);
        }
        let d = Distribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        assert!((entropy(&d) - 1.5 * LN_2).abs() < 1e-15);
        assert!((entropy(&d) - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn hilbert_metric_examples() {
        let x = [0.3, 1.7, 2.0];
        assert_eq!(hilbert_metric(&x, &x).unwrap(), 0.0);
        let cx: Vec<f64> = x.iter().map(|v| 4.2 * v).collect();
        assert!(hilbert_metric(&cx, &x).unwrap().abs() < 1e-15);
        let d = hilbert_metric(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert!((d - 4.0f64.ln()).abs() < 1e-15);
        assert!(hilbert_metric(&[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(hilbert_metric(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn diameter_examples() {
        let rank_one = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]]);
        assert!(projective_diameter(&rank_one).unwrap().abs() < 1e-15);
        assert!(birkhoff_coefficient(&rank_one).unwrap().abs() < 1e-15);
        let with_zero = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(
            projective_diameter(&with_zero),
            Err(Error::InfiniteDiameter { row: 0, col: 1 })
        );
    }
}
