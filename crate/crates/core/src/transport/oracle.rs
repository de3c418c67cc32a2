//! Exhaustive reference for small rational instances.
//!
//! Both measures are expanded into `D` unit atoms of mass `1/D`. An
//! assignment of expanded source atoms to expanded target atoms is determined,
//! up to relabelling the copies of one point, by the integer matrix counting
//! how many copies of `x_i` go to `y_j`. The search therefore enumerates every
//! nonnegative integer matrix with the prescribed row and column counts,
//! which covers every permutation of the expansion exactly once per class.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::norms::NormSpec;
use crate::transport::cost_matrix;

pub const MAX_DENOMINATOR: u64 = 120;
pub const MAX_ATOMS: usize = 8;
const NODE_BUDGET: u64 = 50_000_000;

/// Smallest common denominator `D <= 120` such that every weight of both
/// measures lies within `1e-12` of a multiple of `1/D`.
pub fn common_denominator(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Option<(u64, Vec<u64>, Vec<u64>)> {
    'outer: for d in 1..=MAX_DENOMINATOR {
        let df = d as f64;
        let mut counts = [Vec::new(), Vec::new()];
        for (slot, m) in [mu, nu].into_iter().enumerate() {
            for w in m.weights() {
                let n = (w * df).round();
                if n < 1.0 || (w - n / df).abs() > 1e-12 {
                    continue 'outer;
                }
                counts[slot].push(n as u64);
            }
            if counts[slot].iter().sum::<u64>() != d {
                continue 'outer;
            }
        }
        let [a, b] = counts;
        return Some((d, a, b));
    }
    None
}

/// `W_p` by exhaustive search; independent of the simplex solver.
pub fn brute_force_oracle(mu: &DiscreteMeasure, nu: &DiscreteMeasure, spec: &NormSpec, p: f64) -> Result<f64> {
    if mu.len() > MAX_ATOMS || nu.len() > MAX_ATOMS {
        return Err(Error::OracleUnavailable(format!(
            "oracle handles at most {MAX_ATOMS} atoms per side"
        )));
    }
    let Some((d, rows, cols)) = common_denominator(mu, nu) else {
        return Err(Error::OracleUnavailable(format!(
            "weights are not fractions with denominator <= {MAX_DENOMINATOR}"
        )));
    };
    let cost = cost_matrix(mu, nu, spec, p)?;
    let mut search = Search {
        cost: &cost,
        m: rows.len(),
        k: cols.len(),
        rows,
        cols,
        best: f64::INFINITY,
        nodes: 0,
    };
    search.cell(0, 0, 0.0)?;
    Ok((search.best / d as f64).powf(1.0 / p))
}

struct Search<'a> {
    cost: &'a DMatrix<f64>,
    m: usize,
    k: usize,
    rows: Vec<u64>,
    cols: Vec<u64>,
    best: f64,
    nodes: u64,
}

impl Search<'_> {
    fn cell(&mut self, i: usize, j: usize, acc: f64) -> Result<()> {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET {
            return Err(Error::OracleUnavailable("enumeration budget exceeded".into()));
        }
        if i == self.m {
            if acc < self.best {
                self.best = acc;
            }
            return Ok(());
        }
        if acc >= self.best {
            return Ok(());
        }
        let (ni, nj) = if j + 1 == self.k { (i + 1, 0) } else { (i, j + 1) };
        let cap = self.rows[i].min(self.cols[j]);
        // The last column takes what is left of the row, the last row what is
        // left of the column.
        let choices: Vec<u64> = if j + 1 == self.k {
            if self.rows[i] > self.cols[j] {
                return Ok(());
            }
            vec![self.rows[i]]
        } else if i + 1 == self.m {
            if self.cols[j] > self.rows[i] {
                return Ok(());
            }
            vec![self.cols[j]]
        } else {
            (0..=cap).collect()
        };
        for n in choices {
            self.rows[i] -= n;
            self.cols[j] -= n;
            let res = self.cell(ni, nj, acc + n as f64 * self.cost[(i, j)]);
            self.rows[i] += n;
            self.cols[j] += n;
            res?;
        }
        Ok(())
    }
}
