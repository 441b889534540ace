//! Adjacency utilities. `adj[[from, to]]` marks the edge `from -> to`.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Edges `k -> j` with `w[[k, j]] > tau`; cycles are broken by repeatedly
/// deleting the lightest edge of a detected cycle.
pub fn threshold_graph(w: &Array2<f64>, tau: f64) -> Array2<bool> {
    let mut adj = w.mapv(|v| v > tau);
    for i in 0..adj.nrows().min(adj.ncols()) {
        adj[[i, i]] = false;
    }
    while let Some(cycle) = find_cycle(&adj) {
        let (from, to) = cycle
            .iter()
            .copied()
            .min_by(|a, b| w[[a.0, a.1]].total_cmp(&w[[b.0, b.1]]))
            .expect("cycles have edges");
        adj[[from, to]] = false;
    }
    adj
}

/// Returns the edges of one directed cycle, if any.
pub fn find_cycle(adj: &Array2<bool>) -> Option<Vec<(usize, usize)>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let d = adj.nrows();
    let mut mark = vec![Mark::New; d];
    let mut parent = vec![usize::MAX; d];
    for root in 0..d {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative DFS: (node, next child to try)
        let mut stack = vec![(root, 0usize)];
        mark[root] = Mark::Open;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < d {
                let child = *next;
                *next += 1;
                if !adj[[node, child]] {
                    continue;
                }
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Open;
                        parent[child] = node;
                        stack.push((child, 0));
                    }
                    Mark::Open => {
                        let mut edges = vec![(node, child)];
                        let mut cur = node;
                        while cur != child {
                            let p = parent[cur];
                            edges.push((p, cur));
                            cur = p;
                        }
                        edges.reverse();
                        return Some(edges);
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

/// Kahn topological order, or `None` when the graph has a cycle.
pub fn topological_order(adj: &Array2<bool>) -> Option<Vec<usize>> {
    let d = adj.nrows();
    let mut indegree: Vec<usize> = (0..d).map(|j| (0..d).filter(|&k| adj[[k, j]]).count()).collect();
    let mut ready: Vec<usize> = (0..d).rev().filter(|&j| indegree[j] == 0).collect();
    let mut order = Vec::with_capacity(d);
    while let Some(node) = ready.pop() {
        order.push(node);
        for child in (0..d).rev() {
            if adj[[node, child]] {
                indegree[child] -= 1;
                if indegree[child] == 0 {
                    ready.push(child);
                }
            }
        }
    }
    (order.len() == d).then_some(order)
}

/// For each node, the sorted set of nodes with a directed path into it.
pub fn ancestor_sets(adj: &Array2<bool>) -> Result<Vec<Vec<usize>>> {
    let d = adj.nrows();
    if adj.ncols() != d {
        return Err(Error::contract("adjacency must be square"));
    }
    if find_cycle(adj).is_some() {
        return Err(Error::contract("ancestor sets of a cyclic graph"));
    }
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let mut seen = vec![false; d];
        let mut stack = vec![j];
        while let Some(node) = stack.pop() {
            for k in 0..d {
                if adj[[k, node]] && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        out.push((0..d).filter(|&k| seen[k]).collect());
    }
    Ok(out)
}
