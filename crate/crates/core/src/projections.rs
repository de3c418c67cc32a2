//! Nearest-point projections onto affine subspaces under a strictly convex
//! norm, kernel sets `P_L^{-1}(0)`, fingerprints and the perturbation
//! construction used against non-trivial isometries.

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{check_dim, domain, Error, Result};
use crate::measures::{Atom, DiscreteMeasure};
use crate::norms::{norm_grad, norm_hessian, sphere_sample, Matrix, NormSpec, Vector};
use crate::transport;

/// Threshold used by [`kernel_membership`], relative to `1 + |x|`.
pub const KERNEL_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 200;
const PROBE_DIRECTIONS: usize = 15;
const PROBE_RADII: [f64; 2] = [0.5, 2.0];
const PROBE_SEED: u64 = 0x5eed;
const CANDIDATE_SAMPLES: usize = 64;

/// `base + span(directions)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSubspace {
    base: Vector,
    directions: Vec<Vector>,
    full: bool,
}

impl AffineSubspace {
    /// Proper subspace: directions must be independent and fewer than `dim`.
    pub fn new(base: Vector, directions: Vec<Vector>) -> Result<Self> {
        Self::build(base, directions, false)
    }

    /// Like [`AffineSubspace::new`] but allows `rank == dim`.
    pub fn new_full(base: Vector, directions: Vec<Vector>) -> Result<Self> {
        Self::build(base, directions, true)
    }

    /// Linear subspace through the origin.
    pub fn linear(dim: usize, directions: Vec<Vector>) -> Result<Self> {
        Self::new(Vector::zeros(dim), directions)
    }

    /// Axis `span{e_i}` in `R^dim`.
    pub fn axis(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return domain(format!("axis {i} out of range for dimension {dim}"));
        }
        let mut e = Vector::zeros(dim);
        e[i] = 1.0;
        Self::linear(dim, vec![e])
    }

    fn build(base: Vector, directions: Vec<Vector>, full: bool) -> Result<Self> {
        let n = base.len();
        if n == 0 {
            return domain("ambient dimension must be at least 1");
        }
        if base.iter().any(|v| !v.is_finite()) {
            return domain("subspace base has non-finite coordinates");
        }
        for d in &directions {
            check_dim(n, d.len())?;
            if d.iter().any(|v| !v.is_finite()) {
                return domain("direction has non-finite coordinates");
            }
        }
        let r = directions.len();
        if r > n || (r == n && !full) {
            return domain(format!("rank {r} subspace is not proper in dimension {n}"));
        }
        if r > 0 {
            let mut m = Matrix::zeros(n, r);
            for (j, d) in directions.iter().enumerate() {
                let len = d.norm();
                if len == 0.0 {
                    return domain("zero direction vector");
                }
                m.set_column(j, &(d / len));
            }
            let smallest = m.svd(false, false).singular_values.min();
            if smallest <= 1e-10 {
                return domain(format!(
                    "directions are linearly dependent (smallest singular value {smallest:e})"
                ));
            }
        }
        Ok(Self { base, directions, full })
    }

    pub fn base(&self) -> &Vector {
        &self.base
    }

    pub fn directions(&self) -> &[Vector] {
        &self.directions
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn rank(&self) -> usize {
        self.directions.len()
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Columns are the direction vectors.
    pub fn basis(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim(), self.rank());
        for (j, d) in self.directions.iter().enumerate() {
            m.set_column(j, d);
        }
        m
    }

    /// `base + sum t_i b_i`.
    pub fn point(&self, t: &Vector) -> Vector {
        &self.base + self.basis() * t
    }

    /// Euclidean nearest point, used for membership tests only.
    pub fn orthogonal_projection(&self, x: &Vector) -> Vector {
        if self.rank() == 0 {
            return self.base.clone();
        }
        let b = self.basis();
        let t = least_squares(&b, &(x - &self.base));
        self.point(&t)
    }

    /// Euclidean distance from `x` to the subspace.
    pub fn distance(&self, x: &Vector) -> f64 {
        (x - self.orthogonal_projection(x)).norm()
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        self.distance(x) <= tol
    }

    pub fn passes_through_origin(&self) -> bool {
        self.distance(&Vector::zeros(self.dim())) <= 1e-12 * (1.0 + self.base.norm())
    }

    /// Same directions, shifted base.
    pub fn translated(&self, v: &Vector) -> Self {
        Self {
            base: &self.base + v,
            directions: self.directions.clone(),
            full: self.full,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let base = value
            .get("base")
            .ok_or_else(|| Error::Parse("subspace needs a \"base\" field".into()))
            .and_then(parse_vector)?;
        let directions = match value.get("directions") {
            None => Vec::new(),
            Some(Value::Array(items)) => items.iter().map(parse_vector).collect::<Result<_>>()?,
            Some(_) => return Err(Error::Parse("\"directions\" must be an array".into())),
        };
        let full = value.get("full").and_then(Value::as_bool).unwrap_or(false);
        Self::build(base, directions, full)
    }

    pub fn to_json(&self) -> Value {
        let dirs: Vec<Vec<f64>> = self.directions.iter().map(|d| d.iter().copied().collect()).collect();
        let mut out = json!({
            "base": self.base.iter().copied().collect::<Vec<f64>>(),
            "directions": dirs,
        });
        if self.full {
            out["full"] = Value::Bool(true);
        }
        out
    }
}

pub(crate) fn parse_vector(value: &Value) -> Result<Vector> {
    let items = value
        .as_array()
        .ok_or_else(|| Error::Parse("expected an array of numbers".into()))?;
    let coords = items
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::Parse(format!("not a number: {v}"))))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Vector::from_vec(coords))
}

fn least_squares(b: &Matrix, rhs: &Vector) -> Vector {
    let svd = b.clone().svd(true, true);
    svd.solve(rhs, 1e-14).expect("both factors were requested")
}

fn check_projection_spec(spec: &NormSpec, p: f64) -> Result<()> {
    spec.validate()?;
    if !spec.strictly_convex() {
        return domain(format!(
            "projection under {} is set-valued; a strictly convex norm is required",
            spec.name()
        ));
    }
    if !(p.is_finite() && p >= 1.0) {
        return domain(format!("exponent p must be a finite real >= 1, got {p}"));
    }
    Ok(())
}

/// The unique nearest point of `sub` to `x` under `spec`.
pub fn project_point(x: &Vector, sub: &AffineSubspace, spec: &NormSpec, p: f64) -> Result<Vector> {
    check_projection_spec(spec, p)?;
    check_dim(sub.dim(), x.len())?;
    if sub.rank() == 0 {
        return Ok(sub.base.clone());
    }
    if sub.rank() == sub.dim() {
        return Ok(x.clone());
    }
    let b = sub.basis();
    let rel = x - &sub.base;
    let t0 = least_squares(&b, &rel);
    let problem = Problem {
        spec,
        e: p.max(2.0),
        b: &b,
        rel: &rel,
        scale: 1.0 + x.norm(),
    };
    let t = match problem.newton(t0.clone()) {
        Ok(t) => t,
        Err(NewtonFailure::NoHessian(t)) | Err(NewtonFailure::Stalled(t)) => problem.golden(t)?,
        Err(NewtonFailure::Hard(e)) => return Err(e),
    };
    Ok(sub.point(&t))
}

struct Problem<'a> {
    spec: &'a NormSpec,
    e: f64,
    b: &'a Matrix,
    rel: &'a Vector,
    scale: f64,
}

enum NewtonFailure {
    NoHessian(Vector),
    Stalled(Vector),
    Hard(Error),
}

impl From<Error> for NewtonFailure {
    fn from(e: Error) -> Self {
        NewtonFailure::Hard(e)
    }
}

impl Problem<'_> {
    fn residual(&self, t: &Vector) -> Vector {
        self.rel - self.b * t
    }

    fn phi(&self, t: &Vector) -> Result<f64> {
        self.spec.eval_pow(&self.residual(t), self.e)
    }

    fn gradient(&self, t: &Vector) -> Result<Vector> {
        Ok(-(self.b.transpose() * norm_grad(self.spec, self.e, &self.residual(t))?))
    }

    fn newton(&self, mut t: Vector) -> std::result::Result<Vector, NewtonFailure> {
        let r = t.len();
        for _ in 0..MAX_NEWTON {
            let y = self.residual(&t);
            if self.spec.eval(&y)? == 0.0 {
                return Ok(t);
            }
            let g = self.gradient(&t)?;
            let gnorm = g.norm();
            let hess = match norm_hessian(self.spec, self.e, &y) {
                Ok(h) if h.iter().all(|v| v.is_finite()) => self.b.transpose() * h * self.b,
                _ => return Err(NewtonFailure::NoHessian(t)),
            };
            let mut d = regularized_solve(&hess, &(-&g));
            if g.dot(&d) >= 0.0 {
                d = -&g;
            }
            let f0 = self.phi(&t)?;
            let slope = g.dot(&d);
            let mut alpha = 1.0;
            let mut accepted = None;
            // Below rounding level phi cannot resolve descent; the gradient still can.
            let resolvable = -slope > 1e-14 * f0.abs().max(f64::MIN_POSITIVE);
            for _ in 0..if resolvable { 60 } else { 0 } {
                let cand = &t + &d * alpha;
                if self.phi(&cand)? <= f0 + 1e-4 * alpha * slope {
                    accepted = Some(cand);
                    break;
                }
                alpha *= 0.5;
            }
            let next = match accepted {
                Some(c) => c,
                None => {
                    let cand = &t + &d;
                    let flat = (self.phi(&cand)? - f0).abs() <= 1e-14 * f0.abs().max(f64::MIN_POSITIVE);
                    if flat && self.gradient(&cand)?.norm() < gnorm {
                        cand
                    } else if gnorm <= 1e-11 * self.scale {
                        return Ok(t);
                    } else {
                        return Err(NewtonFailure::Stalled(t));
                    }
                }
            };
            let step = (&next - &t).norm();
            t = next;
            let g_new = self.gradient(&t)?.norm();
            if g_new <= 1e-11 * self.scale && step <= 1e-12 * self.scale {
                return Ok(t);
            }
            debug_assert_eq!(t.len(), r);
        }
        if self.gradient(&t)?.norm() <= 1e-11 * self.scale {
            Ok(t)
        } else {
            Err(NewtonFailure::Stalled(t))
        }
    }

    /// Cyclic golden-section line searches on the coefficients.
    fn golden(&self, mut t: Vector) -> Result<Vector> {
        let f = |t: &Vector| self.spec.eval(&self.residual(t));
        let mut best = f(&t)?;
        for _ in 0..500 {
            let mut moved = 0.0f64;
            for i in 0..t.len() {
                let line = |s: f64| {
                    let mut c = t.clone();
                    c[i] += s;
                    f(&c)
                };
                let s = golden_line(line, 1e-3 * (1.0 + self.residual(&t).norm()))?;
                t[i] += s;
                moved = moved.max(s.abs());
            }
            let now = f(&t)?;
            // Function values stop resolving well before the moves vanish.
            if moved <= 1e-13 * (1.0 + t.norm()) || now >= best {
                return Ok(t);
            }
            best = now;
        }
        Err(Error::NoConvergence("coordinate line searches did not settle".into()))
    }
}

fn regularized_solve(h: &Matrix, rhs: &Vector) -> Vector {
    let r = h.nrows();
    let diag_scale = 1.0 + (0..r).map(|i| h[(i, i)].abs()).fold(0.0, f64::max);
    let mut lambda = 0.0;
    for _ in 0..25 {
        let reg = h + Matrix::identity(r, r) * lambda;
        if let Some(chol) = reg.cholesky() {
            let d = chol.solve(rhs);
            if d.iter().all(|v| v.is_finite()) {
                return d;
            }
        }
        lambda = if lambda == 0.0 {
            1e-12 * diag_scale
        } else {
            lambda * 10.0
        };
    }
    rhs.clone()
}

/// Minimizer of a convex function of one variable near 0.
fn golden_line<F>(f: F, initial: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let f0 = f(0.0)?;
    let mut step = initial.max(1e-12);
    // Bracket [lo, hi] around the minimum.
    let (mut lo, mut hi);
    if f(step)? < f0 {
        lo = 0.0;
        hi = step;
        while f(hi)? <= f(hi - step)? {
            lo = hi - step;
            step *= 2.0;
            hi += step;
            if !hi.is_finite() {
                return Err(Error::NoConvergence("unbounded line search".into()));
            }
        }
    } else if f(-step)? < f0 {
        hi = 0.0;
        lo = -step;
        while f(lo)? <= f(lo + step)? {
            hi = lo + step;
            step *= 2.0;
            lo -= step;
            if !lo.is_finite() {
                return Err(Error::NoConvergence("unbounded line search".into()));
            }
        }
    } else {
        lo = -step;
        hi = step;
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b)?;
        }
    }
    let mid = 0.5 * (lo + hi);
    Ok(if f(mid)? <= f0 { mid } else { 0.0 })
}

/// Push-forward of `mu` under [`project_point`]. The coupling `(x, P(x))`
/// is checked against the transport solver, which must report the same
/// distance within `1e-8`.
pub fn project_measure(mu: &DiscreteMeasure, sub: &AffineSubspace, spec: &NormSpec, p: f64) -> Result<DiscreteMeasure> {
    check_dim(sub.dim(), mu.dim())?;
    let mut images = Vec::with_capacity(mu.len());
    let mut cost = 0.0;
    for a in mu.atoms() {
        let px = project_point(&a.point, sub, spec, p)?;
        cost += a.weight * spec.eval_pow(&(&a.point - &px), p)?;
        images.push((px, a.weight));
    }
    let projected = DiscreteMeasure::from_weighted_points(mu.dim(), images)?;
    let expected = cost.powf(1.0 / p);
    let solved = transport::distance(mu, &projected, spec, p)?;
    if (solved - expected).abs() > 1e-8 * (1.0 + expected) {
        return Err(Error::NoConvergence(format!(
            "projected coupling costs {expected} but the solver finds {solved}"
        )));
    }
    Ok(projected)
}

/// Whether `x` projects onto the origin of the linear subspace `sub`.
pub fn kernel_membership(x: &Vector, sub: &AffineSubspace, spec: &NormSpec, p: f64) -> Result<bool> {
    if !sub.passes_through_origin() {
        return domain("kernel sets are defined for subspaces through the origin");
    }
    let px = project_point(x, sub, spec, p)?;
    Ok(px.norm() <= KERNEL_TOL * (1.0 + x.norm()))
}

/// Greedy search for a large linear subspace inside `P_L^{-1}(0)`.
///
/// Heuristic: a candidate direction is accepted when a 30-point probe grid
/// of the enlarged span passes [`kernel_membership`]. Candidates are the
/// seeds, then points `y - P_L(y)` for sampled `y`, which always lie in the
/// kernel set.
pub fn max_subspace_in_kernel(
    sub: &AffineSubspace,
    spec: &NormSpec,
    p: f64,
    seeds: &[Vector],
) -> Result<AffineSubspace> {
    if seeds.is_empty() {
        return domain("at least one seed is required");
    }
    let n = sub.dim();
    let max_rank = n - sub.rank();
    let mut kernel_seeds = Vec::new();
    for s in seeds {
        check_dim(n, s.len())?;
        if s.norm() > 1e-12 && kernel_membership(s, sub, spec, p)? {
            kernel_seeds.push(s.clone());
        }
    }
    let Some(first) = kernel_seeds.first() else {
        return domain("no seed lies in the kernel set");
    };
    let mut current = vec![first / first.norm()];
    let mut candidates: Vec<Vector> = kernel_seeds[1..].to_vec();
    for y in sphere_sample(n, CANDIDATE_SAMPLES, PROBE_SEED)? {
        candidates.push(&y - project_point(&y, sub, spec, p)?);
    }
    for y in candidates {
        if current.len() >= max_rank {
            break;
        }
        let residual = orthogonal_residual(&current, &y);
        if residual.norm() <= 1e-8 * (1.0 + y.norm()) {
            continue;
        }
        let mut trial = current.clone();
        trial.push(&residual / residual.norm());
        if probe_span(&trial, sub, spec, p)? {
            current = trial;
        }
    }
    AffineSubspace::linear(n, current)
}

/// `y` minus its Euclidean projection onto the span of orthonormal `basis`.
fn orthogonal_residual(basis: &[Vector], y: &Vector) -> Vector {
    let mut r = y.clone();
    for _ in 0..2 {
        for q in basis {
            r -= q * q.dot(&r);
        }
    }
    r
}

fn probe_span(orthonormal: &[Vector], sub: &AffineSubspace, spec: &NormSpec, p: f64) -> Result<bool> {
    let k = orthonormal.len();
    for c in sphere_sample(k, PROBE_DIRECTIONS, PROBE_SEED ^ k as u64)? {
        let dir = orthonormal
            .iter()
            .zip(c.iter())
            .fold(Vector::zeros(sub.dim()), |acc, (q, w)| acc + q * *w);
        for r in PROBE_RADII {
            if !kernel_membership(&(&dir * r), sub, spec, p)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The pair `(P_{L#} xi, P_{H#} xi)`.
#[derive(Clone, Debug)]
pub struct Fingerprint {
    pub proj_l: DiscreteMeasure,
    pub proj_h: DiscreteMeasure,
}

impl Fingerprint {
    pub fn approx_eq(&self, other: &Fingerprint, tol: f64) -> bool {
        self.proj_l.approx_eq(&other.proj_l, tol) && self.proj_h.approx_eq(&other.proj_h, tol)
    }
}

pub fn fingerprint(
    mu: &DiscreteMeasure,
    l: &AffineSubspace,
    h: &AffineSubspace,
    spec: &NormSpec,
    p: f64,
) -> Result<Fingerprint> {
    let proj_l = project_measure(mu, l, spec, p)?;
    let proj_h = project_measure(mu, h, spec, p)?;
    for (m, s) in [(&proj_l, l), (&proj_h, h)] {
        if m.points().any(|x| !s.contains(x, 1e-9 * (1.0 + x.norm()))) {
            return Err(Error::NoConvergence("projected atom left its subspace".into()));
        }
    }
    Ok(Fingerprint { proj_l, proj_h })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyCheck {
    pub member: bool,
    pub reason: String,
}

/// Membership in the family of measures with pairwise distinct weights and
/// pairwise distinct projections onto both `L` and `H`.
pub fn family_f_check(
    mu: &DiscreteMeasure,
    l: &AffineSubspace,
    h: &AffineSubspace,
    spec: &NormSpec,
    p: f64,
) -> Result<FamilyCheck> {
    const GAP: f64 = 1e-9;
    let atoms = mu.atoms();
    let pl = atoms
        .iter()
        .map(|a| project_point(&a.point, l, spec, p))
        .collect::<Result<Vec<_>>>()?;
    let ph = atoms
        .iter()
        .map(|a| project_point(&a.point, h, spec, p))
        .collect::<Result<Vec<_>>>()?;
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            let fail = |reason: String| Ok(FamilyCheck { member: false, reason });
            if (atoms[i].weight - atoms[j].weight).abs() <= GAP {
                return fail(format!("atoms {i} and {j} carry equal weight"));
            }
            if (&pl[i] - &pl[j]).norm() <= GAP {
                return fail(format!("atoms {i} and {j} share their projection onto L"));
            }
            if (&ph[i] - &ph[j]).norm() <= GAP {
                return fail(format!("atoms {i} and {j} share their projection onto H"));
            }
        }
    }
    Ok(FamilyCheck {
        member: true,
        reason: "weights and both projections pairwise distinct".into(),
    })
}

/// Output of [`perturbation_triple`].
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub mu_prime: DiscreteMeasure,
    /// `sum b_{k,k'} delta_{x_{k,k'}}`.
    pub nu: DiscreteMeasure,
    pub nu1_prime: DiscreteMeasure,
    pub nu2_prime: DiscreteMeasure,
    /// `grid[k][k']` lies on `x_k + H` and projects onto `P_H(x_{k'})`.
    pub grid: Vec<Vec<Vector>>,
    pub x0: Vector,
    pub a0: f64,
    /// Smallest distance between two grid points.
    pub h: f64,
}

impl Perturbation {
    /// The common value `a0^{1/p} h0` of the three distances.
    pub fn expected_distance(&self, h0: f64, p: f64) -> f64 {
        self.a0.powf(1.0 / p) * h0
    }
}

/// Builds `mu'` (mass `a0` moved from `x_{k0}` to a nearby `x0`) and the two
/// analogous perturbations `nu1'`, `nu2'` of `nu = sum b_{k,k'} delta_{x_{k,k'}}`.
///
/// `x0` moves away from `H` along `x_{k0} - P_H(x_{k0})`, which keeps its
/// projection onto `H`. Requires `b` to have both marginals equal to the
/// weights of `mu`, and `L`, `H` to be complementary in the sense that
/// moving along `H` leaves `P_L` unchanged; that is checked on the grid.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_triple(
    mu: &DiscreteMeasure,
    l: &AffineSubspace,
    h: &AffineSubspace,
    spec: &NormSpec,
    p: f64,
    h0: f64,
    indices: (usize, usize, usize),
    b: &DMatrix<f64>,
) -> Result<Perturbation> {
    let fam = family_f_check(mu, l, h, spec, p)?;
    if !fam.member {
        return domain(format!("measure is outside the family: {}", fam.reason));
    }
    let m = mu.len();
    let (k0, k1, k2) = indices;
    if k0 >= m || k1 >= m || k2 >= m || k1 == k2 {
        return domain("indices must lie below the atom count with k1 != k2");
    }
    if b.nrows() != m || b.ncols() != m {
        return domain(format!("weight table must be {m} x {m}"));
    }
    let a = mu.weights();
    for (k, ak) in a.iter().enumerate() {
        if (b.row(k).sum() - ak).abs() > 1e-9 || (b.column(k).sum() - ak).abs() > 1e-9 {
            return domain("weight table marginals must both equal the weights of mu");
        }
    }
    if b.iter().any(|v| *v < 0.0) {
        return domain("weight table has negative entries");
    }
    if b[(k0, k1)] <= 0.0 || b[(k0, k2)] <= 0.0 {
        return domain("b[k0][k1] and b[k0][k2] must be positive");
    }

    let xs: Vec<Vector> = mu.points().cloned().collect();
    let pl = xs
        .iter()
        .map(|x| project_point(x, l, spec, p))
        .collect::<Result<Vec<_>>>()?;
    let ph = xs
        .iter()
        .map(|x| project_point(x, h, spec, p))
        .collect::<Result<Vec<_>>>()?;
    let mut grid = vec![Vec::with_capacity(m); m];
    for k in 0..m {
        for kp in 0..m {
            let g = &xs[k] + &ph[kp] - &ph[k];
            let tol = 1e-8 * (1.0 + g.norm());
            if (project_point(&g, l, spec, p)? - &pl[k]).norm() > tol
                || (project_point(&g, h, spec, p)? - &ph[kp]).norm() > tol
            {
                return domain("H is not complementary to L: grid point projections disagree");
            }
            grid[k].push(g);
        }
    }
    let mut hmin = f64::INFINITY;
    let flat: Vec<&Vector> = grid.iter().flatten().collect();
    for i in 0..flat.len() {
        for j in i + 1..flat.len() {
            hmin = hmin.min(spec.dist(flat[i], flat[j])?);
        }
    }
    if !(h0 > 0.0 && h0 < hmin / 2.0) {
        return domain(format!("h0 must lie in (0, {}), got {h0}", hmin / 2.0));
    }
    let normal = &xs[k0] - &ph[k0];
    let len = spec.eval(&normal)?;
    if len <= 1e-12 * (1.0 + xs[k0].norm()) {
        return domain("x_k0 lies in H; the displacement direction is undefined");
    }
    let x0 = &xs[k0] + &normal * (h0 / len);
    let ph_x0 = project_point(&x0, h, spec, p)?;
    let x0_row: Vec<Vector> = (0..m).map(|kp| &x0 + &ph[kp] - &ph_x0).collect();
    let a0 = 0.5 * b[(k0, k1)].min(b[(k0, k2)]);

    let mut mu_prime = vec![(x0.clone(), a0)];
    for k in 0..m {
        let w = if k == k0 { a[k] - a0 } else { a[k] };
        mu_prime.push((xs[k].clone(), w));
    }
    let nu_atoms = |shift: Option<usize>| {
        let mut out = Vec::new();
        for k in 0..m {
            for kp in 0..m {
                let mut w = b[(k, kp)];
                if Some(kp) == shift && k == k0 {
                    w -= a0;
                    out.push((x0_row[kp].clone(), a0));
                }
                if w > 0.0 {
                    out.push((grid[k][kp].clone(), w));
                }
            }
        }
        out
    };
    let dim = mu.dim();
    Ok(Perturbation {
        mu_prime: measure(dim, mu_prime)?,
        nu: measure(dim, nu_atoms(None))?,
        nu1_prime: measure(dim, nu_atoms(Some(k1)))?,
        nu2_prime: measure(dim, nu_atoms(Some(k2)))?,
        grid,
        x0,
        a0,
        h: hmin,
    })
}

fn measure(dim: usize, pts: Vec<(Vector, f64)>) -> Result<DiscreteMeasure> {
    let pts: Vec<(Vector, f64)> = pts.into_iter().filter(|(_, w)| *w > 0.0).collect();
    let total: f64 = pts.iter().map(|(_, w)| w).sum();
    // Absorb the rounding left by the subtractions above.
    let atoms = pts.into_iter().map(|(x, w)| Atom::new(x, w / total)).collect();
    DiscreteMeasure::new(dim, atoms)
}

/// `(1 - eps) diag(a) + eps a a^T`: a table with both marginals `a` and
/// every entry positive.
pub fn mixed_weight_table(a: &[f64], eps: f64) -> DMatrix<f64> {
    let v = Vector::from_row_slice(a);
    DMatrix::from_diagonal(&v) * (1.0 - eps) + &v * v.transpose() * eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::dirac;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn diag_line() -> AffineSubspace {
        AffineSubspace::linear(3, vec![v(&[1.0, 1.0, 1.0])]).unwrap()
    }

    #[test]
    fn subspace_validation() {
        assert!(AffineSubspace::linear(2, vec![v(&[1.0, 0.0]), v(&[2.0, 0.0])]).is_err());
        assert!(AffineSubspace::linear(2, vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).is_err());
        assert!(AffineSubspace::new_full(v(&[0.0, 0.0]), vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).is_ok());
        let s = AffineSubspace::from_json(r#"{"base": [0,0,0], "directions": [[1,1,1]]}"#).unwrap();
        assert_eq!(s, diag_line());
        assert_eq!(AffineSubspace::from_json_value(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn euclidean_projection() {
        let s = 0.5f64.sqrt();
        let sub = AffineSubspace::linear(2, vec![v(&[s, s])]).unwrap();
        let px = project_point(&v(&[1.0, 0.0]), &sub, &NormSpec::Euclidean, 2.0).unwrap();
        assert!((px - v(&[0.5, 0.5])).norm() < 1e-12);
    }

    #[test]
    fn l4_example_points() {
        let l4 = NormSpec::lq(4.0).unwrap();
        let px = project_point(&v(&[1.0, -1.0, 0.0]), &diag_line(), &l4, 2.0).unwrap();
        assert!(px.norm() < 1e-10);
        let px = project_point(&v(&[1.0, -2.0, 1.0]), &diag_line(), &l4, 2.0).unwrap();
        assert!(px.norm() > 1e-2);
    }

    #[test]
    fn rejects_set_valued_norms() {
        let r = project_point(
            &v(&[1.0, 0.0]),
            &AffineSubspace::axis(2, 1).unwrap(),
            &NormSpec::Linf,
            2.0,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn measure_projection_examples() {
        let xaxis = AffineSubspace::axis(2, 0).unwrap();
        let mu = DiscreteMeasure::uniform(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let proj = project_measure(&mu, &xaxis, &NormSpec::Euclidean, 2.0).unwrap();
        let want = DiscreteMeasure::uniform(vec![v(&[1.0, 0.0]), v(&[0.0, 0.0])]).unwrap();
        assert!(proj.approx_eq(&want, 1e-12));

        let on = DiscreteMeasure::uniform(vec![v(&[1.0, 0.0]), v(&[-3.0, 0.0])]).unwrap();
        let l3 = NormSpec::lq(3.0).unwrap();
        assert!(project_measure(&on, &xaxis, &l3, 1.5).unwrap().approx_eq(&on, 1e-12));
    }

    #[test]
    fn kernel_examples() {
        let l4 = NormSpec::lq(4.0).unwrap();
        assert!(kernel_membership(&v(&[0.0, -1.0, 1.0]), &diag_line(), &l4, 2.0).unwrap());
        assert!(kernel_membership(&v(&[0.0, 0.0, 0.0]), &diag_line(), &l4, 2.0).unwrap());
        assert!(!kernel_membership(&v(&[1.0, 1.0, 1.0]), &diag_line(), &l4, 2.0).unwrap());
    }

    #[test]
    fn max_subspace_examples() {
        let l4 = NormSpec::lq(4.0).unwrap();
        let s = max_subspace_in_kernel(&diag_line(), &l4, 2.0, &[v(&[1.0, -1.0, 0.0])]).unwrap();
        assert_eq!(s.rank(), 1);

        let s = max_subspace_in_kernel(
            &AffineSubspace::axis(2, 0).unwrap(),
            &NormSpec::Euclidean,
            2.0,
            &[v(&[0.0, 1.0])],
        )
        .unwrap();
        assert_eq!(s.rank(), 1);
        assert!(s.contains(&v(&[0.0, 5.0]), 1e-12));

        let l3 = NormSpec::lq(3.0).unwrap();
        let s = max_subspace_in_kernel(&AffineSubspace::axis(3, 0).unwrap(), &l3, 2.0, &[v(&[0.0, 1.0, 0.0])]).unwrap();
        assert_eq!(s.rank(), 2);
        assert!(s.contains(&v(&[0.0, 0.3, -2.0]), 1e-9));

        let r = max_subspace_in_kernel(&diag_line(), &l4, 2.0, &[v(&[1.0, 1.0, 1.0])]);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn family_examples() {
        let xaxis = AffineSubspace::axis(2, 0).unwrap();
        let yaxis = AffineSubspace::axis(2, 1).unwrap();
        let e = NormSpec::Euclidean;
        let half = DiscreteMeasure::uniform(vec![v(&[0.0, 0.0]), v(&[1.0, 1.0])]).unwrap();
        assert!(!family_f_check(&half, &xaxis, &yaxis, &e, 2.0).unwrap().member);
        let mu = DiscreteMeasure::new(2, vec![Atom::new(v(&[0.0, 0.0]), 0.3), Atom::new(v(&[1.0, 1.0]), 0.7)]).unwrap();
        assert!(family_f_check(&mu, &xaxis, &yaxis, &e, 2.0).unwrap().member);
        assert!(
            family_f_check(&dirac(v(&[2.0, 1.0])), &xaxis, &yaxis, &e, 2.0)
                .unwrap()
                .member
        );
    }

    #[test]
    fn fingerprint_of_dirac() {
        let xaxis = AffineSubspace::axis(2, 0).unwrap();
        let yaxis = AffineSubspace::axis(2, 1).unwrap();
        let f = fingerprint(&dirac(v(&[2.0, -1.0])), &xaxis, &yaxis, &NormSpec::Euclidean, 2.0).unwrap();
        assert!(f.proj_l.approx_eq(&dirac(v(&[2.0, 0.0])), 1e-12));
        assert!(f.proj_h.approx_eq(&dirac(v(&[0.0, -1.0])), 1e-12));
    }

    #[test]
    fn perturbation_distances() {
        let l3 = NormSpec::lq(3.0).unwrap();
        let xaxis = AffineSubspace::axis(2, 0).unwrap();
        let yaxis = AffineSubspace::axis(2, 1).unwrap();
        let mu = DiscreteMeasure::new(
            2,
            vec![
                Atom::new(v(&[1.0, 2.0]), 0.2),
                Atom::new(v(&[3.0, -1.0]), 0.3),
                Atom::new(v(&[-2.0, 0.5]), 0.5),
            ],
        )
        .unwrap();
        let b = mixed_weight_table(&mu.weights(), 0.4);
        let h0 = 0.1;
        for p in [1.5, 3.0] {
            let t = perturbation_triple(&mu, &xaxis, &yaxis, &l3, p, h0, (0, 1, 2), &b).unwrap();
            let want = t.expected_distance(h0, p);
            let d = transport::distance(&mu, &t.mu_prime, &l3, p).unwrap();
            assert!((d - want).abs() < 1e-8, "{d} vs {want}");
            for nu_p in [&t.nu1_prime, &t.nu2_prime] {
                let d = transport::distance(&t.nu, nu_p, &l3, p).unwrap();
                assert!((d - want).abs() < 1e-8, "{d} vs {want}");
            }
            let f = fingerprint(&t.mu_prime, &xaxis, &yaxis, &l3, p).unwrap();
            assert!(f.approx_eq(&fingerprint(&t.nu1_prime, &xaxis, &yaxis, &l3, p).unwrap(), 1e-9));
            assert!(f.approx_eq(&fingerprint(&t.nu2_prime, &xaxis, &yaxis, &l3, p).unwrap(), 1e-9));
            assert!(!t.nu1_prime.approx_eq(&t.nu2_prime, 1e-9));
        }
    }

    #[test]
    fn golden_fallback_matches_newton() {
        // lq with q < 2 has no Hessian where a coordinate vanishes.
        let l15 = NormSpec::lq(1.5).unwrap();
        let sub = AffineSubspace::linear(2, vec![v(&[1.0, 2.0])]).unwrap();
        let x = v(&[0.0, 1.0]);
        let px = project_point(&x, &sub, &l15, 2.0).unwrap();
        let f = |s: f64| l15.eval(&(&x - v(&[1.0, 2.0]) * s)).unwrap();
        let t = px[0];
        assert!(f(t) <= f(t + 1e-6) && f(t) <= f(t - 1e-6));
    }
}
