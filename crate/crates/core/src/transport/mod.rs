//! Exact discrete `p`-Wasserstein distances.
//!
//! [`solve`] runs a transportation simplex on the cost matrix
//! `N(x_i - y_j)^p` and certifies the returned vertex with its dual
//! potentials. [`brute_force_oracle`] is an independent exhaustive reference
//! for small rational instances.

mod oracle;
mod simplex;

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{check_dim, domain, Error, Result};
use crate::io::format_f64;
use crate::measures::{dirac, DiscreteMeasure};
use crate::norms::{NormSpec, Vector};

pub use oracle::{brute_force_oracle, common_denominator};
pub use simplex::SimplexStatus;

/// Marginal tolerance of a valid plan.
pub const PLAN_TOL: f64 = 1e-10;
/// Reduced costs above this (negative) bound certify optimality.
pub const REDUCED_COST_TOL: f64 = 1e-9;
/// Largest accepted `m * k`.
pub const MAX_CELLS: usize = 1_000_000;

/// A coupling of two discrete measures; rows follow the source atoms.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub source: DiscreteMeasure,
    pub target: DiscreteMeasure,
    pub mass: DMatrix<f64>,
}

impl TransportPlan {
    /// The independent coupling `mu x nu`.
    pub fn product(source: &DiscreteMeasure, target: &DiscreteMeasure) -> Self {
        let a = Vector::from_vec(source.weights());
        let b = Vector::from_vec(target.weights());
        TransportPlan {
            source: source.clone(),
            target: target.clone(),
            mass: &a * b.transpose(),
        }
    }

    /// Pairs `(x_i, y_j)` carrying more than `tol` mass.
    pub fn support_pairs(&self, tol: f64) -> Vec<(Vector, Vector)> {
        let mut out = Vec::new();
        for (i, a) in self.source.atoms().iter().enumerate() {
            for (j, b) in self.target.atoms().iter().enumerate() {
                if self.mass[(i, j)] > tol {
                    out.push((a.point.clone(), b.point.clone()));
                }
            }
        }
        out
    }

    /// `sum_ij pi_ij c_ij` for a matching cost matrix.
    pub fn total_cost(&self, cost: &DMatrix<f64>) -> f64 {
        self.mass.component_mul(cost).sum()
    }

    /// CSV with header `i,j,mass,cost`, one row per cell with positive mass.
    pub fn to_csv(&self, cost: &DMatrix<f64>) -> String {
        let mut out = String::from("i,j,mass,cost\n");
        for i in 0..self.mass.nrows() {
            for j in 0..self.mass.ncols() {
                let m = self.mass[(i, j)];
                if m > 0.0 {
                    let _ = writeln!(out, "{i},{j},{},{}", format_f64(m), format_f64(cost[(i, j)]));
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverStats {
    pub iterations: usize,
    pub status: SimplexStatus,
    /// Most negative reduced cost of the final basis (zero or positive when optimal).
    pub min_reduced_cost: f64,
    /// Whether feasibility and complementary slackness were both verified.
    pub certified: bool,
}

#[derive(Clone, Debug)]
pub struct OtResult {
    pub distance: f64,
    pub cost_p: f64,
    pub plan: TransportPlan,
    pub stats: SolverStats,
}

/// Entry `(i, j)` is `N(x_i - y_j)^p`.
pub fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, spec: &NormSpec, p: f64) -> Result<DMatrix<f64>> {
    check_dim(mu.dim(), nu.dim())?;
    check_exponent(p)?;
    spec.validate()?;
    let mut c = DMatrix::zeros(mu.len(), nu.len());
    for (i, a) in mu.atoms().iter().enumerate() {
        for (j, b) in nu.atoms().iter().enumerate() {
            c[(i, j)] = spec.eval_pow(&(&a.point - &b.point), p)?;
        }
    }
    Ok(c)
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return domain(format!("Wasserstein exponent must be a finite real >= 1, got {p}"));
    }
    Ok(())
}

/// Optimal coupling and `W_p(mu, nu)`.
pub fn solve(mu: &DiscreteMeasure, nu: &DiscreteMeasure, spec: &NormSpec, p: f64) -> Result<OtResult> {
    let cost = cost_matrix(mu, nu, spec, p)?;
    let (m, k) = (mu.len(), nu.len());
    if m * k > MAX_CELLS {
        return Err(Error::Input(format!("{m} x {k} cost matrix exceeds {MAX_CELLS} cells")));
    }
    let supply = mu.weights();
    let demand = nu.weights();
    let gap = supply.iter().sum::<f64>() - demand.iter().sum::<f64>();
    if gap.abs() > PLAN_TOL {
        return Err(Error::Input(format!("total masses differ by {gap}")));
    }
    let max_iterations = 10_000 + 50 * (m + k) * (m + k);
    let out = simplex::solve(&supply, &demand, &cost, max_iterations);

    let mut min_reduced = f64::INFINITY;
    for i in 0..m {
        for j in 0..k {
            min_reduced = min_reduced.min(cost[(i, j)] - out.row_potential[i] - out.col_potential[j]);
        }
    }
    let plan = TransportPlan {
        source: mu.clone(),
        target: nu.clone(),
        mass: out.flows,
    };
    let feasible = check_plan(&plan).valid;
    let cost_p = plan.total_cost(&cost).max(0.0);
    Ok(OtResult {
        distance: cost_p.powf(1.0 / p),
        cost_p,
        stats: SolverStats {
            iterations: out.iterations,
            status: out.status,
            min_reduced_cost: min_reduced,
            certified: feasible && out.status == SimplexStatus::Optimal && min_reduced >= -REDUCED_COST_TOL,
        },
        plan,
    })
}

/// Shorthand for `solve(..).distance`.
pub fn distance(mu: &DiscreteMeasure, nu: &DiscreteMeasure, spec: &NormSpec, p: f64) -> Result<f64> {
    Ok(solve(mu, nu, spec, p)?.distance)
}

/// `W_p(mu, delta_x)`; the coupling is unique so no LP is needed.
pub fn distance_to_dirac(mu: &DiscreteMeasure, x: &Vector, spec: &NormSpec, p: f64) -> Result<f64> {
    Ok(solve(mu, &dirac(x.clone()), spec, p)?.distance)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanCheck {
    pub valid: bool,
    pub max_row_error: f64,
    pub max_col_error: f64,
    pub min_entry: f64,
}

/// Marginal and sign check at [`PLAN_TOL`]; entries down to `-1e-15` count as zero.
pub fn check_plan(plan: &TransportPlan) -> PlanCheck {
    let a = plan.source.weights();
    let b = plan.target.weights();
    let shape_ok = plan.mass.nrows() == a.len() && plan.mass.ncols() == b.len();
    if !shape_ok {
        return PlanCheck {
            valid: false,
            max_row_error: f64::INFINITY,
            max_col_error: f64::INFINITY,
            min_entry: f64::NAN,
        };
    }
    let max_row_error = (0..a.len())
        .map(|i| (plan.mass.row(i).sum() - a[i]).abs())
        .fold(0.0, f64::max);
    let max_col_error = (0..b.len())
        .map(|j| (plan.mass.column(j).sum() - b[j]).abs())
        .fold(0.0, f64::max);
    let min_entry = plan.mass.min();
    PlanCheck {
        valid: max_row_error <= PLAN_TOL && max_col_error <= PLAN_TOL && min_entry >= -1e-15,
        max_row_error,
        max_col_error,
        min_entry,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    pub monotone: bool,
    /// Indices into the pair list, in cycle order, of the worst violation.
    pub violating_cycle: Option<Vec<usize>>,
    /// Smallest `sum c(x_i, y_{i+1}) - sum c(x_i, y_i)` found.
    pub worst_slack: f64,
}

/// Exhaustive c-cyclical monotonicity test over all cycles of length
/// `2..=max_cycle` (at most 6) for the cost `N(x - y)^p`.
pub fn cyclical_monotonicity_check(
    pairs: &[(Vector, Vector)],
    spec: &NormSpec,
    p: f64,
    max_cycle: usize,
) -> Result<MonotonicityReport> {
    if max_cycle > 6 {
        return domain("cycle length is limited to 6");
    }
    check_exponent(p)?;
    let n = pairs.len();
    let mut c = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            c[(a, b)] = spec.eval_pow(&(&pairs[a].0 - &pairs[b].1), p)?;
        }
    }
    let mut scan = CycleScan {
        c: &c,
        max_len: max_cycle.min(n),
        path: Vec::new(),
        used: vec![false; n],
        worst: (0.0, None),
    };
    for start in 0..n {
        scan.path.push(start);
        scan.used[start] = true;
        scan.extend(start, 0.0);
        scan.used[start] = false;
        scan.path.pop();
    }
    let (worst_slack, cycle) = scan.worst;
    let monotone = worst_slack >= -1e-10;
    Ok(MonotonicityReport {
        monotone,
        violating_cycle: if monotone { None } else { cycle },
        worst_slack,
    })
}

struct CycleScan<'a> {
    c: &'a DMatrix<f64>,
    max_len: usize,
    path: Vec<usize>,
    used: Vec<bool>,
    worst: (f64, Option<Vec<usize>>),
}

impl CycleScan<'_> {
    /// `acc` holds `sum (c(x_a, y_next) - c(x_a, y_a))` over the open path.
    fn extend(&mut self, start: usize, acc: f64) {
        let last = *self.path.last().expect("path is never empty");
        if self.path.len() >= 2 {
            let slack = acc + self.c[(last, start)] - self.c[(last, last)];
            if slack < self.worst.0 {
                self.worst = (slack, Some(self.path.clone()));
            }
        }
        if self.path.len() == self.max_len {
            return;
        }
        // Only indices above the start, so each cycle is visited from its minimum.
        for next in start + 1..self.used.len() {
            if self.used[next] {
                continue;
            }
            let step = self.c[(last, next)] - self.c[(last, last)];
            self.used[next] = true;
            self.path.push(next);
            self.extend(start, acc + step);
            self.path.pop();
            self.used[next] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Atom;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn cost_matrix_examples() {
        let c = cost_matrix(
            &dirac(v(&[0.0, 0.0])),
            &dirac(v(&[1.0, 0.0])),
            &NormSpec::Euclidean,
            2.0,
        )
        .unwrap();
        assert_eq!(c, DMatrix::from_element(1, 1, 1.0));

        let q = 3.0;
        let mu0 = DiscreteMeasure::uniform(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
        let c = cost_matrix(&mu0, &dirac(v(&[0.0, 1.0])), &NormSpec::lq(q).unwrap(), 2.0).unwrap();
        for i in 0..2 {
            assert!((c[(i, 0)] - 2f64.powf(2.0 / q)).abs() < 1e-14);
        }

        let c = cost_matrix(&mu0, &mu0, &NormSpec::L1, 1.5).unwrap();
        assert_eq!(c[(0, 0)], 0.0);
        assert_eq!(c[(1, 1)], 0.0);
        assert!(cost_matrix(&mu0, &dirac(v(&[0.0])), &NormSpec::L1, 1.0).is_err());
    }

    #[test]
    fn solve_examples() {
        let x = v(&[0.3, -1.0]);
        let y = v(&[2.0, 0.5]);
        let l3 = NormSpec::lq(3.0).unwrap();
        let r = solve(&dirac(x.clone()), &dirac(y.clone()), &l3, 2.0).unwrap();
        assert!((r.distance - l3.dist(&x, &y).unwrap()).abs() < 1e-14);

        let mu = DiscreteMeasure::uniform(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
        let r = solve(&mu, &dirac(v(&[0.0, 1.0])), &NormSpec::L1, 1.0).unwrap();
        assert!((r.distance - 1.5).abs() < 1e-14);
        assert!(r.stats.certified);

        let mu1 = DiscreteMeasure::new(
            2,
            vec![
                Atom::new(v(&[-1.0, 0.0]), 2.0 / 3.0),
                Atom::new(v(&[2.0, 0.0]), 1.0 / 3.0),
            ],
        )
        .unwrap();
        let r = solve(&mu1, &dirac(v(&[1.0, 1.0])), &l3, 2.0).unwrap();
        let closed = (2.0 * 9f64.powf(2.0 / 3.0) + 2f64.powf(2.0 / 3.0)) / 3.0;
        assert!((r.cost_p - closed).abs() < 1e-12);
        assert!((r.cost_p - 3.41363).abs() < 1e-5);
        assert!((r.distance - r.cost_p.sqrt()).abs() < 1e-12 * r.distance);
    }

    #[test]
    fn rejects_bad_exponent() {
        let d = dirac(v(&[0.0]));
        assert!(solve(&d, &d, &NormSpec::Euclidean, 0.5).is_err());
        assert!(solve(&d, &d, &NormSpec::Euclidean, f64::INFINITY).is_err());
    }

    #[test]
    fn plan_checks() {
        let mu = DiscreteMeasure::uniform(vec![v(&[0.0]), v(&[1.0]), v(&[3.0])]).unwrap();
        let nu = DiscreteMeasure::new(1, vec![Atom::new(v(&[0.5]), 0.25), Atom::new(v(&[2.0]), 0.75)]).unwrap();
        let product = TransportPlan::product(&mu, &nu);
        assert!(check_plan(&product).valid);
        let mut bad = product.clone();
        bad.mass[(1, 0)] += 1e-3;
        assert!(!check_plan(&bad).valid);
        let r = solve(&mu, &nu, &NormSpec::Euclidean, 2.0).unwrap();
        assert!(check_plan(&r.plan).valid);
    }

    #[test]
    fn plan_csv_rows() {
        let mu = DiscreteMeasure::uniform(vec![v(&[0.0]), v(&[1.0])]).unwrap();
        let nu = dirac(v(&[2.0]));
        let r = solve(&mu, &nu, &NormSpec::Euclidean, 1.0).unwrap();
        let csv = r
            .plan
            .to_csv(&cost_matrix(&mu, &nu, &NormSpec::Euclidean, 1.0).unwrap());
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "i,j,mass,cost");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0,0,0.5,2");
        assert_eq!(lines[2], "1,0,0.5,1");
    }

    #[test]
    fn monotonicity_examples() {
        let swap = vec![(v(&[0.0, 0.0]), v(&[1.0, 0.0])), (v(&[1.0, 0.0]), v(&[0.0, 0.0]))];
        let r = cyclical_monotonicity_check(&swap, &NormSpec::Euclidean, 2.0, 4).unwrap();
        assert!(!r.monotone);
        assert!((r.worst_slack + 2.0).abs() < 1e-14);
        assert_eq!(r.violating_cycle, Some(vec![0, 1]));

        let single = vec![(v(&[0.0]), v(&[5.0]))];
        assert!(
            cyclical_monotonicity_check(&single, &NormSpec::Euclidean, 2.0, 4)
                .unwrap()
                .monotone
        );
        assert!(cyclical_monotonicity_check(&single, &NormSpec::Euclidean, 2.0, 7).is_err());
    }

    #[test]
    fn three_cycle_violation_is_found() {
        // Each x_i is sent one step "backwards"; rotating forward is cheaper.
        let pts = [v(&[0.0]), v(&[10.0]), v(&[20.0])];
        let pairs = vec![
            (pts[0].clone(), pts[2].clone()),
            (pts[1].clone(), pts[0].clone()),
            (pts[2].clone(), pts[1].clone()),
        ];
        let r = cyclical_monotonicity_check(&pairs, &NormSpec::Euclidean, 1.0, 3).unwrap();
        assert!(!r.monotone);
    }
}
