//! Brute-force transportation oracle.
//!
//! Enumerates every vertex of the transportation polytope: each basic
//! feasible solution corresponds to a spanning tree of `m + n - 1` cells in
//! the bipartite row/column graph, whose flows are forced by peeling leaves.
//! The optimum of a linear objective is attained at a vertex, so the minimum
//! over feasible trees is the exact transport cost. Exponential; only meant
//! for a handful of words per side.

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn brute_force_transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(k);
    combinations(&cells, k, 0, &mut chosen, &mut |subset| {
        if let Some(flows) = tree_flows(subset, supply, demand) {
            let total: f64 = subset
                .iter()
                .zip(&flows)
                .map(|(&(i, j), f)| f * cost[i][j])
                .sum();
            best = best.min(total);
        }
    });
    best
}

fn combinations<F: FnMut(&[(usize, usize)])>(
    items: &[(usize, usize)],
    k: usize,
    start: usize,
    chosen: &mut Vec<(usize, usize)>,
    visit: &mut F,
) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    for idx in start..items.len() {
        if items.len() - idx < k - chosen.len() {
            break;
        }
        chosen.push(items[idx]);
        combinations(items, k, idx + 1, chosen, visit);
        chosen.pop();
    }
}

/// Flows on a spanning tree, or `None` if the cells contain a cycle or the
/// forced flows go negative.
fn tree_flows(cells: &[(usize, usize)], supply: &[f64], demand: &[f64]) -> Option<Vec<f64>> {
    let m = supply.len();
    let nodes = m + demand.len();
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(i, j) in cells {
        let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
        if a == b {
            return None;
        }
        parent[a] = b;
    }

    let mut remaining: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut flows = vec![f64::NAN; cells.len()];
    let mut alive = vec![true; cells.len()];
    for _ in 0..cells.len() {
        let mut degree = vec![0usize; nodes];
        for (e, &(i, j)) in cells.iter().enumerate() {
            if alive[e] {
                degree[i] += 1;
                degree[m + j] += 1;
            }
        }
        let (e, leaf) = cells
            .iter()
            .enumerate()
            .filter(|(e, _)| alive[*e])
            .find_map(|(e, &(i, j))| {
                if degree[i] == 1 {
                    Some((e, i))
                } else if degree[m + j] == 1 {
                    Some((e, m + j))
                } else {
                    None
                }
            })?;
        let (i, j) = cells[e];
        let other = if leaf == i { m + j } else { i };
        let f = remaining[leaf];
        flows[e] = f;
        remaining[leaf] = 0.0;
        remaining[other] -= f;
        alive[e] = false;
    }
    if flows.iter().any(|&f| f < -1e-12) {
        return None;
    }
    Some(flows)
}

#[cfg(test)]
mod tests {
    #[allow(unused_imports)]
    use super::*;

    #[test]
    fn oracle_known_values() {
        let c = vec![vec![1.0, 2.0]];
        assert!((brute_force_transport(&[1.0], &[0.5, 0.5], &c) - 1.5).abs() < 1e-12);
        let c = vec![vec![10.0, 1.0], vec![1.0, 10.0]];
        assert!((brute_force_transport(&[0.5, 0.5], &[0.5, 0.5], &c) - 1.0).abs() < 1e-12);
    }
}
