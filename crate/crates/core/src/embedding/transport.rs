//! Exact solver for the balanced transportation problem.
//!
//! Transportation simplex on a spanning-tree basis: a northwest-corner start
//! gives `m + n - 1` basic cells (degenerate zeros included), dual potentials
//! are propagated along the tree, and the most negative reduced cost enters.
//! After a bounded number of pivots the entering/leaving choice falls back to
//! Bland's rule so degenerate cycling cannot stall the solver.

use serde::{Deserialize, Serialize};

use super::store::euclidean;
use super::{EmbeddingError, EmbeddingStore, NBowDoc};

/// Largest document, in distinct words, accepted by [`solve_transport`].
pub const MAX_DOC_WORDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `matrix[i][j]` is the mass moved from source word `i` to target word `j`.
    pub matrix: Vec<Vec<f64>>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let n = self.matrix.first().map_or(0, Vec::len);
        (0..n).map(|j| self.matrix.iter().map(|row| row[j]).sum()).collect()
    }
}

/// Optimal plan moving the mass of `a` onto `b` under euclidean ground cost.
pub fn solve_transport(
    a: &NBowDoc,
    b: &NBowDoc,
    store: &EmbeddingStore,
) -> Result<TransportPlan, EmbeddingError> {
    let cost = cost_matrix(a, b, store)?;
    Ok(solve_balanced(a.weights(), b.weights(), &cost))
}

pub(crate) fn lookup<'s>(
    doc: &NBowDoc,
    store: &'s EmbeddingStore,
) -> Result<Vec<&'s [f64]>, EmbeddingError> {
    if doc.len() > MAX_DOC_WORDS {
        return Err(EmbeddingError::SizeExceeded { words: doc.len(), limit: MAX_DOC_WORDS });
    }
    doc.words()
        .iter()
        .map(|w| store.get(w).ok_or_else(|| EmbeddingError::OutOfVocabulary(w.clone())))
        .collect()
}

pub(crate) fn cost_matrix(
    a: &NBowDoc,
    b: &NBowDoc,
    store: &EmbeddingStore,
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    let xs = lookup(a, store)?;
    let ys = lookup(b, store)?;
    Ok(xs
        .iter()
        .map(|x| ys.iter().map(|y| euclidean(x, y)).collect())
        .collect())
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    row: usize,
    col: usize,
    flow: f64,
}

/// Solves `min Σ T_ij c_ij` s.t. row sums = `supply`, column sums = `demand`,
/// `T >= 0`. Both marginals must carry the same total mass.
pub fn solve_balanced(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> TransportPlan {
    let m = supply.len();
    let n = demand.len();
    assert!(m > 0 && n > 0, "empty marginal");
    assert_eq!(cost.len(), m);

    let mut basis = northwest_corner(supply, demand);
    let scale = cost
        .iter()
        .flatten()
        .fold(0.0_f64, |acc, c| acc.max(c.abs()))
        .max(1.0);
    let eps = 1e-12 * scale;
    let bland_after = 20 * (m + n) * (m + n);
    let hard_limit = bland_after + 200 * (m * n + 1) * (m + n);

    for iteration in 0.. {
        let use_bland = iteration >= bland_after;
        assert!(iteration < hard_limit, "transport simplex failed to converge");

        let (u, v) = potentials(&basis, cost, m, n);
        let mut is_basic = vec![false; m * n];
        for c in &basis {
            is_basic[c.row * n + c.col] = true;
        }

        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for (i, row) in cost.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if is_basic[i * n + j] {
                    continue;
                }
                let reduced = c - u[i] - v[j];
                if reduced < -eps {
                    match entering {
                        Some((_, _, best)) if best <= reduced => {}
                        _ => entering = Some((i, j, reduced)),
                    }
                    if use_bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            break;
        };

        // Tree path from column `ej` back to row `ei`; cells alternate -, +, -, ...
        let path = tree_path(&basis, m, n, ei, ej);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &cell_idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                let cell = basis[cell_idx];
                let better = cell.flow < theta
                    || (cell.flow == theta
                        && use_bland
                        && (cell.row, cell.col) < (basis[leaving].row, basis[leaving].col));
                if better {
                    theta = cell.flow;
                    leaving = cell_idx;
                }
            }
        }
        for (k, &cell_idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[cell_idx].flow -= theta;
            } else {
                basis[cell_idx].flow += theta;
            }
        }
        basis[leaving] = Cell { row: ei, col: ej, flow: theta };
    }

    let mut matrix = vec![vec![0.0; n]; m];
    let mut total = 0.0;
    for c in &basis {
        let flow = c.flow.max(0.0);
        matrix[c.row][c.col] = flow;
        total += flow * cost[c.row][c.col];
    }
    TransportPlan { matrix, cost: total.max(0.0) }
}

fn northwest_corner(supply: &[f64], demand: &[f64]) -> Vec<Cell> {
    let (m, n) = (supply.len(), demand.len());
    let mut rs = supply.to_vec();
    let mut rd = demand.to_vec();
    let mut cells = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        if i == m - 1 && j == n - 1 {
            // Last cell absorbs any rounding residue of either marginal.
            cells.push(Cell { row: i, col: j, flow: rs[i].max(rd[j]).max(0.0) });
            break;
        }
        let flow = rs[i].min(rd[j]).max(0.0);
        cells.push(Cell { row: i, col: j, flow });
        rs[i] -= flow;
        rd[j] -= flow;
        let advance_row = j == n - 1 || (i < m - 1 && rs[i] <= rd[j]);
        if advance_row {
            // Leftover supply on a finished row is rounding noise; carry it down.
            if i + 1 < m {
                rs[i + 1] += rs[i].max(0.0);
            }
            i += 1;
        } else {
            if j + 1 < n {
                rd[j + 1] += rd[j].max(0.0);
            }
            j += 1;
        }
    }
    cells
}

fn potentials(basis: &[Cell], cost: &[Vec<f64>], m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let adjacency = adjacency(basis, m, n);
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut stack = vec![0usize];
    let mut seen = vec![false; m + n];
    seen[0] = true;
    while let Some(node) = stack.pop() {
        for &cell_idx in &adjacency[node] {
            let c = basis[cell_idx];
            let other = if node < m { m + c.col } else { c.row };
            if seen[other] {
                continue;
            }
            seen[other] = true;
            if node < m {
                v[c.col] = cost[c.row][c.col] - u[c.row];
            } else {
                u[c.row] = cost[c.row][c.col] - v[c.col];
            }
            stack.push(other);
        }
    }
    (u, v)
}

fn adjacency(basis: &[Cell], m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut adjacency = vec![Vec::new(); m + n];
    for (idx, c) in basis.iter().enumerate() {
        adjacency[c.row].push(idx);
        adjacency[m + c.col].push(idx);
    }
    adjacency
}

/// Basis cells on the tree path from column node `col` to row node `row`,
/// ordered starting at the column end.
fn tree_path(basis: &[Cell], m: usize, n: usize, row: usize, col: usize) -> Vec<usize> {
    let adjacency = adjacency(basis, m, n);
    let start = m + col;
    let mut via: Vec<Option<usize>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == row {
            break;
        }
        for &cell_idx in &adjacency[node] {
            let c = basis[cell_idx];
            let other = if node < m { m + c.col } else { c.row };
            if !seen[other] {
                seen[other] = true;
                via[other] = Some(cell_idx);
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = row;
    while node != start {
        let cell_idx = via[node].expect("basis is a spanning tree");
        path.push(cell_idx);
        let c = basis[cell_idx];
        node = if node < m { m + c.col } else { c.row };
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> EmbeddingStore {
        EmbeddingStore::from_vectors(
            2,
            [
                ("w1", vec![0.0, 0.0]),
                ("w2", vec![3.0, 4.0]),
                ("p", vec![0.0, 0.0]),
                ("q", vec![1.0, 0.0]),
                ("r", vec![0.0, 2.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identical_docs_cost_zero() {
        let doc = NBowDoc::from_counts([("w1", 1.0), ("w2", 3.0)]).unwrap();
        let plan = solve_transport(&doc, &doc, &store()).unwrap();
        assert!(plan.cost.abs() < 1e-12);
    }

    #[test]
    fn single_mass_is_euclidean_distance() {
        let a = NBowDoc::from_words(&["w1"]).unwrap();
        let b = NBowDoc::from_words(&["w2"]).unwrap();
        let plan = solve_transport(&a, &b, &store()).unwrap();
        assert!((plan.cost - 5.0).abs() < 1e-12);
    }

    #[test]
    fn column_constraints_force_split() {
        let a = NBowDoc::from_words(&["p"]).unwrap();
        let b = NBowDoc::from_words(&["q", "r"]).unwrap();
        let plan = solve_transport(&a, &b, &store()).unwrap();
        assert!((plan.cost - 1.5).abs() < 1e-12);
        assert!((plan.matrix[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn northwest_start_is_improved() {
        // NW corner ships along the expensive diagonal; optimum is the anti-diagonal.
        let cost = vec![vec![10.0, 1.0], vec![1.0, 10.0]];
        let plan = solve_balanced(&[0.5, 0.5], &[0.5, 0.5], &cost);
        assert!((plan.cost - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_marginals() {
        let cost = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 5.0, 1.0],
            vec![3.0, 2.0, 6.0],
        ];
        let w = [1.0 / 3.0; 3];
        let plan = solve_balanced(&w, &w, &cost);
        // Assignment optimum: (0,1)+(1,2)+(2,0) = 1+1+3 = 5, scaled by 1/3.
        assert!((plan.cost - 5.0 / 3.0).abs() < 1e-12);
        for s in plan.row_sums().into_iter().chain(plan.col_sums()) {
            assert!((s - 1.0 / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn size_limit() {
        let words: Vec<String> = (0..65).map(|i| format!("w{i}")).collect();
        let store = EmbeddingStore::from_vectors(1, words.iter().map(|w| (w.as_str(), vec![1.0]))).unwrap();
        let big = NBowDoc::from_words(&words).unwrap();
        let small = NBowDoc::from_words(&["w0"]).unwrap();
        assert!(matches!(
            solve_transport(&big, &small, &store),
            Err(EmbeddingError::SizeExceeded { words: 65, .. })
        ));
    }
}
