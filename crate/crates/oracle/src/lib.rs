//! Ground-truth solvers used to check `eve-core`.
//!
//! Nothing here calls the core's spectral or EVE code. Inputs and outputs reuse the
//! core's plain data types only.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

use eve_core::{Distribution, EigenPair, Matrix, Policy, TabularMDP};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("matrix is not square ({rows}×{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is too large for the dense oracle (dimension {0})")]
    TooLarge(usize),
    #[error("matrix is imprimitive")]
    Imprimitive,
    #[error("chain is not strongly connected")]
    Reducible,
    #[error("dense solve failed: {0}")]
    Numerical(&'static str),
    #[error("{what} did not converge (violation {violation:e})")]
    NotConverged { what: &'static str, violation: f64 },
    #[error(transparent)]
    Core(#[from] eve_core::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Largest dimension accepted by [`dense_dominant_eigs`].
pub const MAX_DENSE_DIM: usize = 4096;

fn to_dense(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Primitivity by repeated boolean squaring: `M` is primitive iff `M^{2^k}` is
/// all-positive for `2^k ≥ (n−1)² + 1`.
pub fn is_primitive(m: &Matrix) -> bool {
    let n = m.rows();
    if n == 0 || !m.is_square() {
        return false;
    }
    let mut b: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] > 0.0).collect())
        .collect();
    let bound = (n - 1) * (n - 1) + 1;
    let mut power = 1usize;
    loop {
        if b.iter().all(|r| r.iter().all(|&x| x)) {
            return true;
        }
        if power >= bound {
            return false;
        }
        let mut sq = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if b[i][k] {
                    for j in 0..n {
                        sq[i][j] |= b[k][j];
                    }
                }
            }
        }
        b = sq;
        power *= 2;
    }
}

fn null_vector(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(OracleError::Numerical("svd"))?;
    let (k, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) },
            );
    let mut x: DVector<f64> = v_t.row(k).transpose();
    if x.sum() < 0.0 {
        x = -x;
    }
    Ok(x)
}

/// Perron eigenpair by full dense eigendecomposition.
///
/// `λ` is the eigenvalue of largest modulus; `u` and `v` span the null spaces of
/// `Mᵀ − λI` and `M − λI` (smallest singular vectors). Normalized to `Σu = n`,
/// `Σ u∘v = 1`.
pub fn dense_dominant_eigs(m: &Matrix) -> Result<EigenPair> {
    if !m.is_square() {
        return Err(OracleError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    if n > MAX_DENSE_DIM {
        return Err(OracleError::TooLarge(n));
    }
    if !m.is_nonnegative() || !is_primitive(m) {
        return Err(OracleError::Imprimitive);
    }
    let a = to_dense(m);
    let eigs = a.complex_eigenvalues();
    let lambda = eigs
        .iter()
        .fold((0.0f64, 0.0f64), |(best, re), z| {
            let r = z.norm();
            if r > best {
                (r, z.re)
            } else {
                (best, re)
            }
        })
        .1;
    let shifted = &a - DMatrix::identity(n, n) * lambda;
    let v = null_vector(&shifted)?;
    let u = null_vector(&shifted.transpose())?;
    let mut pair = EigenPair {
        eigenvalue: lambda,
        left: u.iter().copied().collect(),
        right: v.iter().copied().collect(),
    };
    pair.normalize();
    Ok(pair)
}

/// Relative residuals `(‖uᵀM − λuᵀ‖∞/‖u‖∞, ‖Mv − λv‖∞/‖v‖∞)`.
pub fn eigen_residuals(m: &Matrix, pair: &EigenPair) -> (f64, f64) {
    let res = |x: &[f64], y: &[f64]| {
        let top = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - pair.eigenvalue * b).abs())
            .fold(0.0, f64::max);
        top / y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    };
    (
        res(&m.tmul_vec(&pair.left), &pair.left),
        res(&m.mul_vec(&pair.right), &pair.right),
    )
}

/// Stationary vector of a column-stochastic matrix by a dense linear solve of
/// `(I − P)d = 0`, `Σd = 1`.
pub fn dense_stationary(p: &Matrix) -> Result<Vec<f64>> {
    if !p.is_square() {
        return Err(OracleError::NotSquare {
            rows: p.rows(),
            cols: p.cols(),
        });
    }
    let n = p.rows();
    let mut a = DMatrix::identity(n, n) - to_dense(p);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let d = a.lu().solve(&b).ok_or(OracleError::Reducible)?;
    Ok(d.iter().copied().collect())
}

/// Stationary vector of a column-stochastic matrix by power iteration on the lazy
/// chain `(P + I)/2`, stopping once successive iterates differ by at most `tol` in L1.
pub fn power_stationary(p: &Matrix, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = p.rows();
    let mut d = vec![1.0 / n as f64; n];
    let mut diff = f64::INFINITY;
    for _ in 0..max_iter {
        let pd = p.mul_vec(&d);
        let next: Vec<f64> = d.iter().zip(&pd).map(|(a, b)| 0.5 * (a + b)).collect();
        let s: f64 = next.iter().sum();
        let next: Vec<f64> = next.iter().map(|x| x / s).collect();
        diff = next.iter().zip(&d).map(|(a, b)| (a - b).abs()).sum();
        d = next;
        if diff <= tol {
            return Ok(d);
        }
    }
    Err(OracleError::NotConverged {
        what: "power_stationary",
        violation: diff,
    })
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

fn strongly_connected(mdp: &TabularMDP) -> bool {
    let n = mdp.n_states();
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            fwd[s].push(mdp.next(s, a));
            rev[mdp.next(s, a)].push(s);
        }
    }
    let reach = |adj: &Vec<Vec<usize>>| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for &t in &adj[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    n > 0 && reach(&fwd) && reach(&rev)
}

/// Entropy-maximizing point of the occupancy polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySolution {
    pub d_star: Distribution,
    pub entropy_star: f64,
    /// Largest `|out(s) − in(s)|` of `d_star`.
    pub constraint_violation: f64,
    /// Dual bound `ln Z(ν) ≥ H*` after each sweep; nonincreasing.
    pub dual_bounds: Vec<f64>,
}

impl OccupancySolution {
    /// `π(a|s) = d(s,a) / Σ_a d(s,a)`.
    pub fn policy(&self, n_states: usize, n_actions: usize) -> Result<Policy> {
        Ok(Policy::from_weights(
            n_states,
            n_actions,
            self.d_star.probs().to_vec(),
        )?)
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Maximizes `H(d)` subject to flow balance and `Σd = 1` through the dual.
///
/// The optimum has the Gibbs form `d(s,a) ∝ exp(ν_s − ν_{s'})`; the dual objective
/// `ln Z(ν) = ln Σ exp(ν_s − ν_{s'})` is minimized by exact coordinate steps
/// `ν_s = ½ ln(I_s / O_s)` (inflow and outflow weights, self-loops excluded). Every
/// step lowers `ln Z`, which bounds the entropy of any feasible `d` from above.
pub fn max_entropy_occupancy(mdp: &TabularMDP, tol: f64) -> Result<OccupancySolution> {
    if !strongly_connected(mdp) {
        return Err(OracleError::Reducible);
    }
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    let mut nu = vec![0.0f64; ns];
    let log_z =
        |nu: &[f64]| log_sum_exp((0..ns * na).map(|j| nu[j / na] - nu[mdp.next(j / na, j % na)]));
    let occupancy = |nu: &[f64]| {
        let lz = log_z(nu);
        (0..ns * na)
            .map(|j| (nu[j / na] - nu[mdp.next(j / na, j % na)] - lz).exp())
            .collect::<Vec<f64>>()
    };
    let violation = |d: &[f64]| {
        let mut bal = vec![0.0; ns];
        for (j, &x) in d.iter().enumerate() {
            bal[j / na] += x;
            bal[mdp.next(j / na, j % na)] -= x;
        }
        bal.iter().fold(0.0f64, |m, b| m.max(b.abs()))
    };

    let mut bounds = vec![log_z(&nu)];
    let max_sweeps = 1_000_000;
    for _ in 0..max_sweeps {
        for s in 0..ns {
            let mut out = Vec::new();
            let mut inn = Vec::new();
            for sp in 0..ns {
                for a in 0..na {
                    let t = mdp.next(sp, a);
                    if sp == s && t != s {
                        out.push(-nu[t]);
                    } else if t == s && sp != s {
                        inn.push(nu[sp]);
                    }
                }
            }
            if out.is_empty() || inn.is_empty() {
                continue;
            }
            nu[s] = 0.5 * (log_sum_exp(inn.into_iter()) - log_sum_exp(out.into_iter()));
        }
        let mean = nu.iter().sum::<f64>() / ns as f64;
        nu.iter_mut().for_each(|x| *x -= mean);
        let lz = log_z(&nu);
        let gain = bounds.last().unwrap() - lz;
        bounds.push(lz);
        let d = occupancy(&nu);
        let v = violation(&d);
        if v < tol && gain < tol {
            let entropy_star = entropy(&d);
            return Ok(OccupancySolution {
                d_star: Distribution::from_weights(d)?,
                entropy_star,
                constraint_violation: v,
                dual_bounds: bounds,
            });
        }
    }
    Err(OracleError::NotConverged {
        what: "max_entropy_occupancy",
        violation: violation(&occupancy(&nu)),
    })
}

/// Stationary state-action distribution of `policy` via a dense solve on the state chain.
pub fn policy_distribution(mdp: &TabularMDP, policy: &Policy) -> Result<Vec<f64>> {
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    // Column-stochastic state chain T[s', s] = Σ_a π(a|s)[next(s,a) = s'].
    let mut t = Matrix::zeros(ns, ns);
    for s in 0..ns {
        for a in 0..na {
            t[(mdp.next(s, a), s)] += policy.prob(s, a);
        }
    }
    let mu = dense_stationary(&t)?;
    if mu.iter().any(|&x| !(x > -1e-12)) {
        return Err(OracleError::Reducible);
    }
    Ok((0..ns * na)
        .map(|j| mu[j / na].max(0.0) * policy.prob(j / na, j % na))
        .collect())
}

/// Best entropy found by [`policy_grid_search`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub entropy: f64,
    /// `π(a₀|s)` for every state (1 when the state has a single action).
    pub first_action_probs: Vec<f64>,
}

/// Exhaustive search over stochastic policies of an MDP with at most two actions,
/// parameterized by `p_s = π(a₀|s)`.
///
/// The full grid at step 0.05 is scanned, then three refinements (0.01, 0.002, 0.001)
/// each scan the box of ±1 step of the previous resolution around the best point. Grid points whose chain has no unique stationary distribution are skipped.
pub fn policy_grid_search(mdp: &TabularMDP) -> Result<GridSearchResult> {
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    if na > 2 {
        return Err(OracleError::Numerical(
            "grid search supports at most two actions",
        ));
    }
    let eval = |p: &[f64]| -> Option<f64> {
        let probs: Vec<f64> = (0..ns)
            .flat_map(|s| {
                if na == 1 {
                    vec![1.0]
                } else {
                    vec![p[s], 1.0 - p[s]]
                }
            })
            .collect();
        let policy = Policy::new(ns, na, probs).ok()?;
        let d = policy_distribution(mdp, &policy).ok()?;
        let h = entropy(&d);
        h.is_finite().then_some(h)
    };
    let free = if na == 2 { ns } else { 0 };
    let mut best_p = vec![1.0; ns];
    let mut best_h = f64::NEG_INFINITY;
    let scan = |centers: &[f64], step: f64, half: i64, best_p: &mut Vec<f64>, best_h: &mut f64| {
        let width = (2 * half + 1) as usize;
        let total = width.pow(free as u32);
        let mut p = centers.to_vec();
        for idx in 0..total {
            let mut k = idx;
            let mut ok = true;
            for s in 0..free {
                let off = (k % width) as i64 - half;
                k /= width;
                let x = ((centers[s] / step).round() as i64 + off) as f64 * step;
                if !(-1e-12..=1.0 + 1e-12).contains(&x) {
                    ok = false;
                    break;
                }
                p[s] = x.clamp(0.0, 1.0);
            }
            if !ok {
                continue;
            }
            if let Some(h) = eval(&p) {
                if h > *best_h {
                    *best_h = h;
                    *best_p = p.clone();
                }
            }
        }
    };
    scan(&vec![0.5; ns], 0.05, 10, &mut best_p, &mut best_h);
    for (prev, step) in [(0.05f64, 0.01), (0.01, 0.002), (0.002, 0.001)] {
        let centers = best_p.clone();
        let half = (prev / step).round() as i64;
        scan(&centers, step, half, &mut best_p, &mut best_h);
    }
    if !best_h.is_finite() {
        return Err(OracleError::Reducible);
    }
    Ok(GridSearchResult {
        entropy: best_h,
        first_action_probs: best_p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn dense_eigs_small_cases() {
        assert_eq!(
            dense_dominant_eigs(&Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])),
            Err(OracleError::Imprimitive)
        );
        let p = dense_dominant_eigs(&Matrix::from_rows(&[&[2.0]])).unwrap();
        assert!((p.eigenvalue - 2.0).abs() < 1e-15);
        let m = Matrix::from_rows(&[
            &[0.3, 1.2, 0.5, 0.9, 0.1],
            &[0.7, 0.2, 0.8, 0.4, 1.1],
            &[1.5, 0.6, 0.1, 0.3, 0.2],
            &[0.2, 0.9, 1.3, 0.6, 0.8],
            &[0.4, 0.1, 0.7, 1.0, 0.5],
        ]);
        let p = dense_dominant_eigs(&m).unwrap();
        let (ru, rv) = eigen_residuals(&m, &p);
        assert!(ru <= 1e-12 && rv <= 1e-12, "{ru} {rv}");
        assert!(p.left.iter().chain(&p.right).all(|&x| x > 0.0));
    }

    #[test]
    fn primitivity_examples() {
        assert!(is_primitive(&Matrix::from_rows(&[
            &[1.0, 1.0],
            &[1.0, 0.0]
        ])));
        assert!(!is_primitive(&Matrix::from_rows(&[
            &[0.0, 1.0],
            &[1.0, 0.0]
        ])));
        assert!(!is_primitive(&Matrix::from_rows(&[
            &[1.0, 1.0],
            &[0.0, 1.0]
        ])));
    }

    #[test]
    fn occupancy_trivial_cases() {
        let one = TabularMDP::new(1, 3, vec![0, 0, 0], 0).unwrap();
        let sol = max_entropy_occupancy(&one, 1e-12).unwrap();
        assert!((sol.entropy_star - 3f64.ln()).abs() < 1e-12);

        let cyc = TabularMDP::cycle(2);
        let sol = max_entropy_occupancy(&cyc, 1e-12).unwrap();
        assert!((sol.entropy_star - LN_2).abs() < 1e-12);
        assert!(sol.d_star.probs().iter().all(|&x| (x - 0.5).abs() < 1e-12));
    }

    #[test]
    fn dual_bounds_are_monotone() {
        let mdp = TabularMDP::new(3, 2, vec![0, 1, 2, 0, 1, 1], 0).unwrap();
        let sol = max_entropy_occupancy(&mdp, 1e-12).unwrap();
        for w in sol.dual_bounds.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(*sol.dual_bounds.last().unwrap() >= sol.entropy_star - 1e-10);
        assert!(sol.constraint_violation < 1e-12);
        let pi = sol.policy(3, 2).unwrap();
        let d = policy_distribution(&mdp, &pi).unwrap();
        for (a, b) in d.iter().zip(sol.d_star.probs()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn reducible_mdp_is_rejected() {
        let mdp = TabularMDP::new(2, 1, vec![1, 1], 0).unwrap();
        assert_eq!(
            max_entropy_occupancy(&mdp, 1e-10),
            Err(OracleError::Reducible)
        );
    }

    #[test]
    fn dense_and_power_stationary_agree() {
        let p = Matrix::from_rows(&[&[0.5, 0.2, 0.0], &[0.5, 0.3, 1.0], &[0.0, 0.5, 0.0]]);
        let a = dense_stationary(&p).unwrap();
        let b = power_stationary(&p, 1e-15, 100_000).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_search_matches_occupancy_on_small_mdp() {
        let mdp = TabularMDP::new(2, 2, vec![0, 1, 0, 1], 0).unwrap();
        let g = policy_grid_search(&mdp).unwrap();
        let o = max_entropy_occupancy(&mdp, 1e-12).unwrap();
        assert!((g.entropy - o.entropy_star).abs() < 1e-3);
        assert!(g.entropy <= o.entropy_star + 1e-10);
    }
}
