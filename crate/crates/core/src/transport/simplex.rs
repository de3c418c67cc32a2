//! Transportation simplex on a spanning-tree basis.
//!
//! The basis always holds exactly `m + k - 1` cells forming a spanning tree
//! of the bipartite row/column graph; degenerate basic cells simply carry
//! zero flow. Pricing is Dantzig (most negative reduced cost) and switches to
//! Bland's smallest-index rule after a run of degenerate pivots, which rules
//! out cycling.

use nalgebra::DMatrix;

/// Consecutive degenerate pivots tolerated before Bland's rule takes over.
const DEGENERATE_STREAK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    IterationLimit,
}

pub(crate) struct SimplexOutcome {
    pub flows: DMatrix<f64>,
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
    pub iterations: usize,
    pub status: SimplexStatus,
}

struct Basis {
    m: usize,
    k: usize,
    cells: Vec<(usize, usize)>,
    flows: DMatrix<f64>,
    basic: DMatrix<bool>,
}

struct Tree {
    parent: Vec<usize>,
    depth: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

const NONE: usize = usize::MAX;

impl Basis {
    /// North-west corner start. When a row and a column are exhausted at the
    /// same time only the row index advances, so the next cell enters the
    /// basis with zero flow and the tree stays spanning.
    fn north_west(supply: &[f64], demand: &[f64]) -> Basis {
        let (m, k) = (supply.len(), demand.len());
        let mut flows = DMatrix::zeros(m, k);
        let mut basic = DMatrix::from_element(m, k, false);
        let mut cells = Vec::with_capacity(m + k - 1);
        let mut rs = supply.to_vec();
        let mut cs = demand.to_vec();
        let (mut i, mut j) = (0, 0);
        loop {
            let f = rs[i].min(cs[j]).max(0.0);
            flows[(i, j)] = f;
            basic[(i, j)] = true;
            cells.push((i, j));
            rs[i] -= f;
            cs[j] -= f;
            if i == m - 1 && j == k - 1 {
                break;
            }
            if j == k - 1 || (i < m - 1 && rs[i] <= cs[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Basis {
            m,
            k,
            cells,
            flows,
            basic,
        }
    }

    fn tree(&self, cost: &DMatrix<f64>) -> Tree {
        let nodes = self.m + self.k;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
        for &(i, j) in &self.cells {
            adj[i].push(self.m + j);
            adj[self.m + j].push(i);
        }
        let mut parent = vec![NONE; nodes];
        let mut depth = vec![0; nodes];
        let mut u = vec![0.0; self.m];
        let mut v = vec![0.0; self.k];
        let mut seen = vec![false; nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &next in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                parent[next] = node;
                depth[next] = depth[node] + 1;
                if node < self.m {
                    let j = next - self.m;
                    v[j] = cost[(node, j)] - u[node];
                } else {
                    let j = node - self.m;
                    u[next] = cost[(next, j)] - v[j];
                }
                stack.push(next);
            }
        }
        Tree { parent, depth, u, v }
    }

    fn cell_of_edge(&self, a: usize, b: usize) -> (usize, usize) {
        if a < self.m {
            (a, b - self.m)
        } else {
            (b, a - self.m)
        }
    }

    /// Cells of the tree path from column node `j` to row node `i`, in order.
    fn path(&self, tree: &Tree, i: usize, j: usize) -> Vec<(usize, usize)> {
        let mut a = self.m + j;
        let mut b = i;
        let mut from_col = Vec::new();
        let mut from_row = Vec::new();
        while tree.depth[a] > tree.depth[b] {
            from_col.push(self.cell_of_edge(a, tree.parent[a]));
            a = tree.parent[a];
        }
        while tree.depth[b] > tree.depth[a] {
            from_row.push(self.cell_of_edge(b, tree.parent[b]));
            b = tree.parent[b];
        }
        while a != b {
            from_col.push(self.cell_of_edge(a, tree.parent[a]));
            a = tree.parent[a];
            from_row.push(self.cell_of_edge(b, tree.parent[b]));
            b = tree.parent[b];
        }
        from_row.reverse();
        from_col.extend(from_row);
        from_col
    }
}

pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &DMatrix<f64>, max_iterations: usize) -> SimplexOutcome {
    let (m, k) = (supply.len(), demand.len());
    let mut basis = Basis::north_west(supply, demand);
    let scale = cost.iter().fold(1.0f64, |acc, c| acc.max(c.abs()));
    let price_tol = 1e-13 * scale;
    let mut iterations = 0;
    let mut degenerate_run = 0;

    loop {
        let tree = basis.tree(cost);
        if iterations >= max_iterations {
            return finish(basis, tree, iterations, SimplexStatus::IterationLimit);
        }
        let bland = degenerate_run >= DEGENERATE_STREAK;
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..m {
            for j in 0..k {
                if basis.basic[(i, j)] {
                    continue;
                }
                let r = cost[(i, j)] - tree.u[i] - tree.v[j];
                if r >= -price_tol {
                    continue;
                }
                if bland {
                    entering = Some((i, j, r));
                    break 'scan;
                }
                if entering.is_none_or(|(_, _, best)| r < best) {
                    entering = Some((i, j, r));
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            return finish(basis, tree, iterations, SimplexStatus::Optimal);
        };

        // Cycle: entering cell gains theta, path cells alternate -, +, -, ...
        let path = basis.path(&tree, ei, ej);
        let mut theta = f64::INFINITY;
        let mut leaving = (usize::MAX, usize::MAX);
        for &(i, j) in path.iter().step_by(2) {
            let f = basis.flows[(i, j)];
            let idx = i * k + j;
            if f < theta || (f == theta && idx < leaving.0 * k + leaving.1) {
                theta = f;
                leaving = (i, j);
            }
        }
        let theta = theta.max(0.0);
        for (pos, &(i, j)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flows[(i, j)] = (basis.flows[(i, j)] - theta).max(0.0);
            } else {
                basis.flows[(i, j)] += theta;
            }
        }
        basis.flows[leaving] = 0.0;
        basis.flows[(ei, ej)] = theta;
        basis.basic[leaving] = false;
        basis.basic[(ei, ej)] = true;
        let slot = basis
            .cells
            .iter()
            .position(|&c| c == leaving)
            .expect("leaving cell is basic");
        basis.cells[slot] = (ei, ej);

        degenerate_run = if theta <= 1e-15 { degenerate_run + 1 } else { 0 };
        iterations += 1;
    }
}

fn finish(basis: Basis, tree: Tree, iterations: usize, status: SimplexStatus) -> SimplexOutcome {
    SimplexOutcome {
        flows: basis.flows,
        row_potential: tree.u,
        col_potential: tree.v,
        iterations,
        status,
    }
}
