//! Strong connectivity and period of the directed graph behind a nonnegative matrix.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::Matrix;

/// Adjacency lists of the support graph: an edge `i → j` whenever `m[(i, j)] != 0`.
///
/// Orientation is irrelevant for connectivity and period, both of which are
/// invariant under reversing every edge.
pub fn support_graph(m: &Matrix) -> Vec<Vec<usize>> {
    (0..m.rows())
        .map(|i| {
            m.row(i)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    level[start] = Some(0);
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap_or(0);
        for &v in &adj[u] {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn reverse(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut rev = vec![Vec::new(); adj.len()];
    for (u, succ) in adj.iter().enumerate() {
        for &v in succ {
            rev[v].push(u);
        }
    }
    rev
}

/// True when every node reaches every other node. The empty graph is not connected.
pub fn is_strongly_connected(adj: &[Vec<usize>]) -> bool {
    if adj.is_empty() {
        return false;
    }
    bfs_levels(adj, 0).iter().all(Option::is_some)
        && bfs_levels(&reverse(adj), 0).iter().all(Option::is_some)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of a strongly connected graph, or `None` if it is not strongly connected.
pub fn period(adj: &[Vec<usize>]) -> Option<usize> {
    if !is_strongly_connected(adj) {
        return None;
    }
    let level = bfs_levels(adj, 0);
    let mut g = 0;
    for (u, succ) in adj.iter().enumerate() {
        let lu = level[u]?;
        for &v in succ {
            let lv = level[v]?;
            g = gcd(g, (lu + 1).abs_diff(lv));
        }
    }
    Some(g)
}

/// Period of the support graph of `m` (1 means primitive), `None` if reducible.
pub fn matrix_period(m: &Matrix) -> Option<usize> {
    period(&support_graph(m))
}
