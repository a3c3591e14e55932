//! Deterministic tabular MDPs, policies and the induced state-action chain.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::graph;
use crate::num::abs;
use crate::{Error, Matrix, Result};

/// Tolerance on policy row sums.
pub const POLICY_ROW_TOL: f64 = 1e-12;

/// Zero-based grid coordinate, `x` to the right and `y` upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridCell {
    pub x: usize,
    pub y: usize,
}

impl GridCell {
    pub const fn new(x: usize, y: usize) -> Self {
        GridCell { x, y }
    }
}

/// The four cardinal moves, in action-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    /// Target cell, or `None` when the move leaves the grid.
    fn apply(self, c: GridCell, width: usize, height: usize) -> Option<GridCell> {
        let (x, y) = (c.x, c.y);
        let (nx, ny) = match self {
            Action::Up => (x, y.checked_add(1)?),
            Action::Down => (x, y.checked_sub(1)?),
            Action::Left => (x.checked_sub(1)?, y),
            Action::Right => (x.checked_add(1)?, y),
        };
        (nx < width && ny < height).then_some(GridCell::new(nx, ny))
    }
}

/// How cliff cells enter the state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CliffMode {
    /// Cliff cells are not states: stepping onto one lands on the start cell.
    #[default]
    Remap,
    /// Cliff cells are states of their own, and every action taken there returns to start.
    ResetState,
}

/// Layout of a grid world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub start: GridCell,
    pub cliff_cells: BTreeSet<GridCell>,
    pub wall_cells: BTreeSet<GridCell>,
    pub cliff_mode: CliffMode,
}

impl GridSpec {
    /// Grid with no cliffs or walls.
    pub fn open(width: usize, height: usize, start: GridCell) -> Self {
        GridSpec {
            width,
            height,
            start,
            cliff_cells: BTreeSet::new(),
            wall_cells: BTreeSet::new(),
            cliff_mode: CliffMode::Remap,
        }
    }

    /// Default CliffWorld: 6 × 4, start at the bottom-left corner, the rest of the
    /// bottom row is cliff.
    pub fn cliffworld() -> Self {
        let mut spec = GridSpec::open(6, 4, GridCell::new(0, 0));
        spec.cliff_cells = (1..6).map(|x| GridCell::new(x, 0)).collect();
        spec
    }

    fn in_bounds(&self, c: GridCell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Checks the structural invariants (bounds, disjointness, start placement).
    /// Connectivity is checked by [`build_gridworld`].
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidGrid(format!(
                "width and height must be positive, got {} x {}",
                self.width, self.height
            )));
        }
        if !self.in_bounds(self.start) {
            return Err(Error::InvalidGrid(format!(
                "start {:?} is outside the grid",
                self.start
            )));
        }
        if self.cliff_cells.contains(&self.start) {
            return Err(Error::InvalidGrid("start lies inside the cliff".into()));
        }
        if self.wall_cells.contains(&self.start) {
            return Err(Error::InvalidGrid("start lies inside a wall".into()));
        }
        for c in self.cliff_cells.iter().chain(&self.wall_cells) {
            if !self.in_bounds(*c) {
                return Err(Error::InvalidGrid(format!(
                    "cell {c:?} is outside the grid"
                )));
            }
        }
        if let Some(c) = self.cliff_cells.intersection(&self.wall_cells).next() {
            return Err(Error::InvalidGrid(format!(
                "cell {c:?} is both cliff and wall"
            )));
        }
        Ok(())
    }

    /// Cells that are states, in state-index order (bottom row first, left to right).
    pub fn state_cells(&self) -> Vec<GridCell> {
        let mut cells = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = GridCell::new(x, y);
                if self.wall_cells.contains(&c) {
                    continue;
                }
                if self.cliff_mode == CliffMode::Remap && self.cliff_cells.contains(&c) {
                    continue;
                }
                cells.push(c);
            }
        }
        cells
    }
}

/// Deterministic MDP: `next_state[s * n_actions + a]` is the unique successor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularMDP {
    n_states: usize,
    n_actions: usize,
    next_state: Vec<usize>,
    initial_state: usize,
}

impl TabularMDP {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        next_state: Vec<usize>,
        initial_state: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config(
                "n_states/n_actions",
                "state and action counts must be positive",
            ));
        }
        if next_state.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "transition table",
                expected: n_states * n_actions,
                found: next_state.len(),
            });
        }
        if let Some(&bad) = next_state.iter().find(|&&s| s >= n_states) {
            return Err(Error::config(
                "next_state",
                format!("successor {bad} out of range 0..{n_states}"),
            ));
        }
        if initial_state >= n_states {
            return Err(Error::config(
                "initial_state",
                format!("{initial_state} out of range 0..{n_states}"),
            ));
        }
        Ok(TabularMDP {
            n_states,
            n_actions,
            next_state,
            initial_state,
        })
    }

    /// Single-action deterministic cycle `0 → 1 → … → n-1 → 0`.
    pub fn cycle(n: usize) -> Self {
        Self::new(n, 1, (0..n).map(|s| (s + 1) % n).collect(), 0).expect("valid cycle")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `|S|·|A|`.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    #[inline]
    pub fn next(&self, s: usize, a: usize) -> usize {
        self.next_state[s * self.n_actions + a]
    }

    /// Successor table indexed by flat pair index.
    pub fn next_states(&self) -> &[usize] {
        &self.next_state
    }

    /// Flat index `s·|A| + a`.
    #[inline]
    pub fn flat(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Adjacency lists of the state graph (one edge per action).
    pub fn state_graph(&self) -> Vec<Vec<usize>> {
        (0..self.n_states)
            .map(|s| (0..self.n_actions).map(|a| self.next(s, a)).collect())
            .collect()
    }

    /// Row-stochastic state chain `T[s][s'] = Σ_a π(a|s) [next(s,a) = s']`.
    pub fn state_chain(&self, policy: &Policy) -> Result<Matrix> {
        policy.check_shape(self)?;
        let mut t = Matrix::zeros(self.n_states, self.n_states);
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                t[(s, self.next(s, a))] += policy.prob(s, a);
            }
        }
        Ok(t)
    }
}

/// Builds the grid-world MDP. Off-grid and wall moves stay put.
///
/// Rejects layouts whose state graph is not strongly connected.
pub fn build_gridworld(spec: &GridSpec) -> Result<TabularMDP> {
    spec.validate()?;
    let cells = spec.state_cells();
    let index_of = |c: GridCell| cells.binary_search_by(|p| (p.y, p.x).cmp(&(c.y, c.x))).ok();
    let start = index_of(spec.start).expect("start is a state");
    let n_actions = Action::ALL.len();
    let mut next = Vec::with_capacity(cells.len() * n_actions);
    for &c in &cells {
        let in_cliff = spec.cliff_cells.contains(&c);
        for action in Action::ALL {
            let target = if in_cliff {
                // only reachable in ResetState mode
                start
            } else {
                match action.apply(c, spec.width, spec.height) {
                    None => index_of(c).expect("current cell is a state"),
                    Some(t) if spec.wall_cells.contains(&t) => {
                        index_of(c).expect("current cell is a state")
                    }
                    Some(t) if spec.cliff_cells.contains(&t) => match spec.cliff_mode {
                        CliffMode::Remap => start,
                        CliffMode::ResetState => index_of(t).expect("cliff cell is a state"),
                    },
                    Some(t) => index_of(t).expect("open cell is a state"),
                }
            };
            next.push(target);
        }
    }
    let mdp = TabularMDP::new(cells.len(), n_actions, next, start)?;
    if !graph::is_strongly_connected(&mdp.state_graph()) {
        return Err(Error::InvalidGrid(
            "open region is not strongly connected under the four moves".into(),
        ));
    }
    Ok(mdp)
}

/// Stochastic policy `π(a|s)` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Validates nonnegativity and row sums (within [`POLICY_ROW_TOL`]).
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "policy",
                expected: n_states * n_actions,
                found: probs.len(),
            });
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidPolicy {
                    state: s,
                    reason: "negative or non-finite probability",
                });
            }
            if abs(row.iter().sum::<f64>() - 1.0) > POLICY_ROW_TOL {
                return Err(Error::InvalidPolicy {
                    state: s,
                    reason: "row does not sum to 1",
                });
            }
        }
        Ok(Policy {
            n_states,
            n_actions,
            probs,
        })
    }

    /// Normalizes each row of nonnegative weights into a policy.
    pub fn from_weights(n_states: usize, n_actions: usize, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch {
                what: "policy weights",
                expected: n_states * n_actions,
                found: weights.len(),
            });
        }
        for (s, row) in weights.chunks_mut(n_actions).enumerate() {
            let total: f64 = row.iter().sum();
            if !(total > 0.0) || !total.is_finite() {
                return Err(Error::InvalidPolicy {
                    state: s,
                    reason: "weights have no positive finite mass",
                });
            }
            for w in row.iter_mut() {
                *w /= total;
            }
        }
        Policy::new(n_states, n_actions, weights)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Policy {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidPolicy {
                    state: s,
                    reason: "action index out of range",
                });
            }
            probs[s * n_actions + a] = 1.0;
        }
        Policy::new(actions.len(), n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Row-major probabilities, indexed by flat pair index.
    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    pub(crate) fn check_shape(&self, mdp: &TabularMDP) -> Result<()> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(Error::DimensionMismatch {
                what: "policy vs MDP",
                expected: mdp.n_pairs(),
                found: self.n_states * self.n_actions,
            });
        }
        Ok(())
    }
}

/// True iff both policies have the same shape and the same zero pattern.
pub fn support_equal(pi_a: &Policy, pi_b: &Policy) -> bool {
    pi_a.n_states == pi_b.n_states
        && pi_a.n_actions == pi_b.n_actions
        && pi_a
            .probs
            .iter()
            .zip(&pi_b.probs)
            .all(|(&p, &q)| (p > 0.0) == (q > 0.0))
}

/// Joint state-action chain `P[(s',a'), (s,a)] = p(s'|s,a)·π₀(a'|s')`.
///
/// Columns are sources and rows destinations, so the matrix is column-stochastic
/// and left eigenvectors satisfy `uᵀP = λuᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SAOperator {
    matrix: Matrix,
    mdp: TabularMDP,
    prior: Policy,
}

impl SAOperator {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn mdp(&self) -> &TabularMDP {
        &self.mdp
    }

    /// The policy `π₀` the chain was built from.
    pub fn prior(&self) -> &Policy {
        &self.prior
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Flat index of `(s, a)`.
    pub fn index(&self, s: usize, a: usize) -> usize {
        self.mdp.flat(s, a)
    }

    /// Inverse of [`SAOperator::index`].
    pub fn pair(&self, flat: usize) -> (usize, usize) {
        (flat / self.mdp.n_actions(), flat % self.mdp.n_actions())
    }
}

/// Builds the state-action chain of `mdp` under `pi0`.
pub fn sa_operator(mdp: &TabularMDP, pi0: &Policy) -> Result<SAOperator> {
    pi0.check_shape(mdp)?;
    let n = mdp.n_pairs();
    let na = mdp.n_actions();
    let mut m = Matrix::zeros(n, n);
    for s in 0..mdp.n_states() {
        for a in 0..na {
            let src = mdp.flat(s, a);
            let sp = mdp.next(s, a);
            for ap in 0..na {
                m[(mdp.flat(sp, ap), src)] = pi0.prob(sp, ap);
            }
        }
    }
    Ok(SAOperator {
        matrix: m,
        mdp: mdp.clone(),
        prior: pi0.clone(),
    })
}

/// Bit-row representation of a boolean square matrix.
struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    fn from_support(m: &Matrix) -> Self {
        let n = m.rows();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * words];
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != 0.0 {
                    bits[i * words + j / 64] |= 1 << (j % 64);
                }
            }
        }
        BitMatrix { n, words, bits }
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    /// Boolean product `self · other`.
    fn mul(&self, other: &BitMatrix) -> BitMatrix {
        let mut bits = vec![0u64; self.n * self.words];
        for i in 0..self.n {
            let dst = i * self.words;
            for l in 0..self.n {
                if self.bits[i * self.words + l / 64] >> (l % 64) & 1 == 1 {
                    for (w, &b) in other.row(l).iter().enumerate() {
                        bits[dst + w] |= b;
                    }
                }
            }
        }
        BitMatrix {
            n: self.n,
            words: self.words,
            bits,
        }
    }

    fn is_full(&self) -> bool {
        let tail = self.n % 64;
        (0..self.n).all(|i| {
            self.row(i).iter().enumerate().all(|(w, &b)| {
                let mask = if w + 1 == self.words && tail != 0 {
                    (1u64 << tail) - 1
                } else {
                    u64::MAX
                };
                b & mask == mask
            })
        })
    }
}

/// Smallest `m` with `Mᵐ > 0` entrywise.
///
/// Fails with [`Error::Imprimitive`] when the support is reducible (`period: 0`) or
/// periodic; either way the Wielandt bound `(n−1)² + 1` could never be met.
pub fn index_of_primitivity(m: &Matrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            what: "index_of_primitivity (square matrix)",
            expected: m.rows(),
            found: m.cols(),
        });
    }
    if !m.is_nonnegative() {
        return Err(Error::NonPositive {
            what: "primitivity input (nonnegative matrix)",
            index: m.as_slice().iter().position(|&v| !(v >= 0.0)).unwrap_or(0),
            value: m
                .as_slice()
                .iter()
                .copied()
                .find(|&v| !(v >= 0.0))
                .unwrap_or(f64::NAN),
        });
    }
    match graph::matrix_period(m) {
        None => return Err(Error::Imprimitive { period: 0 }),
        Some(p) if p > 1 => return Err(Error::Imprimitive { period: p }),
        Some(_) => {}
    }
    let n = m.rows();
    let bound = (n - 1) * (n - 1) + 1;
    let base = BitMatrix::from_support(m);
    let mut power = BitMatrix::from_support(m);
    for k in 1..=bound {
        if power.is_full() {
            return Ok(k);
        }
        power = power.mul(&base);
    }
    Err(Error::Imprimitive { period: 1 })
}
