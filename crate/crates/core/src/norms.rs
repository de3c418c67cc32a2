//! Norms on R^n with the derivatives of `x -> N(x)^p`.
//!
//! The built-in families are the Euclidean norm, the l_q norms for `q > 1`,
//! the maximum norm and the l_1 norm. A [`CustomNorm`] can plug in any other
//! norm; missing derivatives fall back to central finite differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// A point of R^n.
pub type Vector = DVector<f64>;

/// Dense symmetric matrix returned by Hessian evaluations.
pub type Matrix = DMatrix<f64>;

pub type ValueFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type HessianFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

/// A user supplied norm. Derivatives are those of `N` itself, not of `N^p`.
#[derive(Clone)]
pub struct CustomNorm {
    pub value: Option<ValueFn>,
    pub gradient: Option<GradientFn>,
    pub hessian: Option<HessianFn>,
    pub strictly_convex: bool,
    pub smoothness_order: u8,
}

impl CustomNorm {
    pub fn new(value: ValueFn, strictly_convex: bool, smoothness_order: u8) -> Self {
        Self {
            value: Some(value),
            gradient: None,
            hessian: None,
            strictly_convex,
            smoothness_order,
        }
    }

    pub fn with_gradient(mut self, gradient: GradientFn) -> Self {
        self.gradient = Some(gradient);
        self
    }

    pub fn with_hessian(mut self, hessian: HessianFn) -> Self {
        self.hessian = Some(hessian);
        self
    }
}

impl fmt::Debug for CustomNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomNorm")
            .field("value", &self.value.is_some())
            .field("gradient", &self.gradient.is_some())
            .field("hessian", &self.hessian.is_some())
            .field("strictly_convex", &self.strictly_convex)
            .field("smoothness_order", &self.smoothness_order)
            .finish()
    }
}

/// Pluggable norm specification.
#[derive(Clone, Debug)]
pub enum NormSpec {
    Euclidean,
    Lq { q: f64 },
    Linf,
    L1,
    Custom(CustomNorm),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum NormJson {
    Euclidean,
    Lq { q: f64 },
    Linf,
    L1,
}

impl NormSpec {
    /// The l_q norm; `q` must be a finite real strictly greater than one.
    pub fn lq(q: f64) -> Result<Self> {
        if !(q.is_finite() && q > 1.0) {
            return Err(Error::Config(format!("l_q norm needs finite q > 1, got {q}")));
        }
        Ok(NormSpec::Lq { q })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: NormJson = serde_json::from_str(text).map_err(|e| Error::Parse(format!("norm: {e}")))?;
        Self::from_json_repr(parsed)
    }

    pub fn from_json_value(value: &serde_json::Value) -> Result<Self> {
        let parsed: NormJson = serde_json::from_value(value.clone()).map_err(|e| Error::Parse(format!("norm: {e}")))?;
        Self::from_json_repr(parsed)
    }

    fn from_json_repr(parsed: NormJson) -> Result<Self> {
        match parsed {
            NormJson::Euclidean => Ok(NormSpec::Euclidean),
            NormJson::Lq { q } => NormSpec::lq(q),
            NormJson::Linf => Ok(NormSpec::Linf),
            NormJson::L1 => Ok(NormSpec::L1),
        }
    }

    /// JSON description; custom norms have none.
    pub fn to_json(&self) -> Option<serde_json::Value> {
        let repr = match self {
            NormSpec::Euclidean => NormJson::Euclidean,
            NormSpec::Lq { q } => NormJson::Lq { q: *q },
            NormSpec::Linf => NormJson::Linf,
            NormSpec::L1 => NormJson::L1,
            NormSpec::Custom(_) => return None,
        };
        serde_json::to_value(repr).ok()
    }

    pub fn name(&self) -> String {
        match self {
            NormSpec::Euclidean => "euclidean".into(),
            NormSpec::Lq { q } => format!("l{q}"),
            NormSpec::Linf => "linf".into(),
            NormSpec::L1 => "l1".into(),
            NormSpec::Custom(_) => "custom".into(),
        }
    }

    pub fn strictly_convex(&self) -> bool {
        match self {
            NormSpec::Euclidean | NormSpec::Lq { .. } => true,
            NormSpec::Linf | NormSpec::L1 => false,
            NormSpec::Custom(c) => c.strictly_convex,
        }
    }

    pub fn smoothness_order(&self) -> u8 {
        match self {
            NormSpec::Euclidean => 2,
            NormSpec::Lq { q } if *q >= 2.0 => 2,
            NormSpec::Lq { .. } => 1,
            NormSpec::Linf | NormSpec::L1 => 0,
            NormSpec::Custom(c) => c.smoothness_order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NormSpec::Lq { q } if !(q.is_finite() && *q > 1.0) => {
                Err(Error::Config(format!("l_q norm needs finite q > 1, got {q}")))
            }
            NormSpec::Custom(c) if c.value.is_none() => Err(Error::Config("custom norm has no value function".into())),
            _ => Ok(()),
        }
    }

    /// `N(x)`.
    pub fn eval(&self, x: &Vector) -> Result<f64> {
        match self {
            NormSpec::Euclidean => Ok(x.norm()),
            NormSpec::Lq { q } => Ok(lq_value(*q, x)),
            NormSpec::Linf => Ok(x.amax()),
            NormSpec::L1 => Ok(x.iter().map(|v| v.abs()).sum()),
            NormSpec::Custom(c) => match &c.value {
                Some(f) => Ok(f(x)),
                None => Err(Error::Config("custom norm has no value function".into())),
            },
        }
    }

    /// `N(x)^p`.
    pub fn eval_pow(&self, x: &Vector, p: f64) -> Result<f64> {
        Ok(self.eval(x)?.powf(p))
    }

    /// `N(x - y)`.
    pub fn dist(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.eval(&(x - y))
    }
}

fn lq_value(q: f64, x: &Vector) -> f64 {
    let m = x.amax();
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| (v.abs() / m).powf(q)).sum();
    m * s.powf(1.0 / q)
}

/// `N(x)`; exact formula per family.
pub fn norm_eval(spec: &NormSpec, x: &Vector) -> Result<f64> {
    spec.eval(x)
}

/// Gradient of `x -> N(x)^p`.
pub fn norm_grad(spec: &NormSpec, p: f64, x: &Vector) -> Result<Vector> {
    if p.is_nan() || p < 1.0 {
        return domain(format!("exponent p must be >= 1, got {p}"));
    }
    spec.validate()?;
    let n = spec.eval(x)?;
    if n == 0.0 {
        if p < 2.0 {
            return domain("gradient of N^p at the origin is undefined for p < 2");
        }
        return Ok(Vector::zeros(x.len()));
    }
    let unit_grad = match spec {
        NormSpec::Euclidean => x / n,
        NormSpec::Lq { q } => lq_unit_gradient(*q, x, n),
        NormSpec::L1 => {
            if x.iter().any(|v| *v == 0.0) {
                return domain("l1 norm is not differentiable where a coordinate vanishes");
            }
            x.map(f64::signum)
        }
        NormSpec::Linf => {
            let k = linf_argmax(x)?;
            let mut g = Vector::zeros(x.len());
            g[k] = x[k].signum();
            g
        }
        NormSpec::Custom(c) => match &c.gradient {
            Some(g) => g(x),
            None => return central_gradient(|y| spec.eval_pow(y, p), x),
        },
    };
    Ok(unit_grad * (p * n.powf(p - 1.0)))
}

/// Hessian of `x -> N(x)^p` at `x != 0`.
pub fn norm_hessian(spec: &NormSpec, p: f64, x: &Vector) -> Result<Matrix> {
    if p.is_nan() || p < 1.0 {
        return domain(format!("exponent p must be >= 1, got {p}"));
    }
    spec.validate()?;
    let dim = x.len();
    let n = spec.eval(x)?;
    if n == 0.0 {
        return domain("Hessian of N^p is not evaluated at the origin");
    }
    let scale = p * n.powf(p - 2.0);
    match spec {
        NormSpec::Euclidean => {
            let u = x / n;
            let mut h = Matrix::identity(dim, dim);
            h += &u * u.transpose() * (p - 2.0);
            Ok(h * scale)
        }
        NormSpec::Lq { q } => {
            let q = *q;
            let g = lq_unit_gradient(q, x, n);
            let mut diag = Vector::zeros(dim);
            for i in 0..dim {
                let r = x[i].abs() / n;
                diag[i] = if r == 0.0 {
                    if q > 2.0 {
                        0.0
                    } else if q == 2.0 {
                        1.0
                    } else {
                        return domain("l_q Hessian with q < 2 is singular on coordinate hyperplanes");
                    }
                } else {
                    r.powf(q - 2.0)
                };
            }
            let ggt = &g * g.transpose();
            let h = &ggt * (p - 1.0) + (Matrix::from_diagonal(&diag) - ggt) * (q - 1.0);
            Ok(h * scale)
        }
        NormSpec::L1 => {
            if x.iter().any(|v| *v == 0.0) {
                return domain("l1 norm is not differentiable where a coordinate vanishes");
            }
            let s = x.map(f64::signum);
            Ok(&s * s.transpose() * (scale * (p - 1.0)))
        }
        NormSpec::Linf => {
            let k = linf_argmax(x)?;
            let mut h = Matrix::zeros(dim, dim);
            h[(k, k)] = scale * (p - 1.0);
            Ok(h)
        }
        NormSpec::Custom(c) => match (&c.hessian, &c.gradient) {
            (Some(hess), grad) => {
                let g = match grad {
                    Some(g) => g(x),
                    None => central_gradient(|y| spec.eval(y), x)?,
                };
                let outer = &g * g.transpose() * (p * (p - 1.0) * n.powf(p - 2.0));
                Ok(outer + hess(x) * (p * n.powf(p - 1.0)))
            }
            (None, _) => {
                let h = central_jacobian(|y| norm_grad(spec, p, y), x)?;
                Ok((&h + h.transpose()) * 0.5)
            }
        },
    }
}

/// Gradient of `N` itself for the l_q family, computed through `|x_i| / N`.
fn lq_unit_gradient(q: f64, x: &Vector, n: f64) -> Vector {
    x.map(|v| {
        let r = v.abs() / n;
        v.signum() * r.powf(q - 1.0)
    })
}

fn linf_argmax(x: &Vector) -> Result<usize> {
    let m = x.amax();
    let hits: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() == m).collect();
    if hits.len() != 1 {
        return domain("max norm is not differentiable where the maximum is attained twice");
    }
    Ok(hits[0])
}

/// Step used by every finite-difference fallback.
pub fn fd_step(x: &Vector) -> f64 {
    1e-5 * x.norm().max(1.0)
}

fn central_gradient<F>(f: F, x: &Vector) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<f64>,
{
    let h = fd_step(x);
    let mut g = Vector::zeros(x.len());
    let mut y = x.clone();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let fp = f(&y)?;
        y[i] = x[i] - h;
        let fm = f(&y)?;
        y[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

fn central_jacobian<F>(f: F, x: &Vector) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let h = fd_step(x);
    let n = x.len();
    let mut jac = Matrix::zeros(n, n);
    let mut y = x.clone();
    for j in 0..n {
        y[j] = x[j] + h;
        let gp = f(&y)?;
        y[j] = x[j] - h;
        let gm = f(&y)?;
        y[j] = x[j];
        jac.set_column(j, &((gp - gm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Seeded, Euclidean-normalized quasi-uniform directions on the unit sphere.
pub fn sphere_sample(dim: usize, count: usize, seed: u64) -> Result<Vec<Vector>> {
    if dim == 0 || count == 0 {
        return domain("sphere_sample needs dim >= 1 and count >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = Vector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let len = v.norm();
        if len > 1e-8 {
            out.push(v / len);
        }
    }
    Ok(out)
}

/// Like [`sphere_sample`], but each vector rescaled to `N(v) = 1`.
pub fn sphere_sample_normed(spec: &NormSpec, dim: usize, count: usize, seed: u64) -> Result<Vec<Vector>> {
    sphere_sample(dim, count, seed)?
        .into_iter()
        .map(|v| {
            let n = spec.eval(&v)?;
            Ok(v / n)
        })
        .collect()
}

/// Smallest midpoint gap `(N(x)+N(y))/2 - N((x+y)/2)` over sampled
/// non-parallel pairs of unit vectors. Positive for strictly convex norms;
/// diagnostic only, the declared flag is authoritative.
pub fn midpoint_convexity_gap(spec: &NormSpec, dim: usize, pairs: usize, seed: u64) -> Result<f64> {
    let xs = sphere_sample_normed(spec, dim, 2 * pairs, seed)?;
    let mut worst = f64::INFINITY;
    for pair in xs.chunks(2) {
        let (x, y) = (&pair[0], &pair[1]);
        let cos = x.dot(y) / (x.norm() * y.norm());
        if cos.abs() > 1.0 - 1e-9 {
            continue;
        }
        let mid = (x + y) * 0.5;
        let gap = 0.5 * (spec.eval(x)? + spec.eval(y)?) - spec.eval(&mid)?;
        worst = worst.min(gap);
    }
    Ok(worst)
}
