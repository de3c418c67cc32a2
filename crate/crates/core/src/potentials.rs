//! Potential functions `x -> d_{W_p}^p(mu, delta_x)`, second-difference atom
//! recovery, and the Hessian pairing `v2^T Hess(N^p)(x) v1` with its kernel.

use crate::error::{check_dim, domain, Result};
use crate::measures::{DiscreteMeasure, MERGE_TOL};
use crate::norms::{norm_hessian, sphere_sample, sphere_sample_normed, NormSpec, Vector};
use crate::projections::AffineSubspace;

/// `sum_i w_i N(x - x_i)^p`.
pub fn potential_eval(mu: &DiscreteMeasure, spec: &NormSpec, p: f64, x: &Vector) -> Result<f64> {
    check_dim(mu.dim(), x.len())?;
    let mut total = 0.0;
    for a in mu.atoms() {
        total += a.weight * spec.eval_pow(&(x - &a.point), p)?;
    }
    Ok(total)
}

/// `(N^p(x+h) - 2 N^p(x) + N^p(x-h)) / (2 N^p(h))`.
pub fn second_diff_g(spec: &NormSpec, p: f64, x: &Vector, h: &Vector) -> Result<f64> {
    check_dim(x.len(), h.len())?;
    let nh = spec.eval_pow(h, p)?;
    if nh == 0.0 {
        return domain("second difference needs h != 0");
    }
    let num = spec.eval_pow(&(x + h), p)? - 2.0 * spec.eval_pow(x, p)? + spec.eval_pow(&(x - h), p)?;
    Ok(num / (2.0 * nh))
}

/// Second difference of the potential of `mu`, atom by atom.
pub fn measure_second_diff(mu: &DiscreteMeasure, spec: &NormSpec, p: f64, x: &Vector, h: &Vector) -> Result<f64> {
    check_dim(mu.dim(), x.len())?;
    let mut total = 0.0;
    for a in mu.atoms() {
        total += a.weight * second_diff_g(spec, p, &(x - &a.point), h)?;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomEstimate {
    pub location: Vector,
    pub estimate: f64,
    /// `(|h_k|, G_k)` with `|h_k| = h0 * shrink^k`.
    pub h_sequence: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Width of the window the last three iterates must fit in.
pub const ATOM_WINDOW: f64 = 5e-4;

/// Estimates `mu({x})` as the limit `h -> 0` of the measure-level second
/// difference, valid for `1 <= p < 2`.
#[allow(clippy::too_many_arguments)]
pub fn atom_estimate(
    mu: &DiscreteMeasure,
    spec: &NormSpec,
    p: f64,
    x: &Vector,
    direction: &Vector,
    h0: f64,
    shrink: f64,
    steps: usize,
) -> Result<AtomEstimate> {
    if !(1.0..2.0).contains(&p) {
        return domain(format!("atom recovery needs 1 <= p < 2, got {p}"));
    }
    if steps < 4 {
        return domain("atom recovery needs at least 4 steps");
    }
    if !(shrink > 0.0 && shrink < 1.0) {
        return domain(format!("shrink factor must lie in (0, 1), got {shrink}"));
    }
    if !(h0 > 0.0 && h0.is_finite()) {
        return domain(format!("initial step must be positive, got {h0}"));
    }
    check_dim(mu.dim(), direction.len())?;
    if (direction.norm() - 1.0).abs() > 1e-12 {
        return domain("direction must be a unit vector");
    }
    let mut h_sequence = Vec::with_capacity(steps);
    let mut h = h0;
    for _ in 0..steps {
        let g = measure_second_diff(mu, spec, p, x, &(direction * h))?;
        h_sequence.push((h, g));
        h *= shrink;
    }
    let tail: Vec<f64> = h_sequence[steps - 3..].iter().map(|(_, g)| *g).collect();
    let spread =
        tail.iter().copied().fold(f64::NEG_INFINITY, f64::max) - tail.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AtomEstimate {
        location: x.clone(),
        estimate: tail[2].clamp(0.0, 1.0),
        h_sequence,
        converged: spread <= ATOM_WINDOW,
    })
}

/// The bilinear form `x -> v2^T Hess(N^p)(x) v1`.
#[derive(Clone, Debug)]
pub struct HessianPairing {
    pub v1: Vector,
    pub v2: Vector,
    pub spec: NormSpec,
    pub p: f64,
}

impl HessianPairing {
    /// Both directions are normalized.
    pub fn new(v1: Vector, v2: Vector, spec: NormSpec, p: f64) -> Result<Self> {
        check_dim(v1.len(), v2.len())?;
        if v1.norm() == 0.0 || v2.norm() == 0.0 {
            return domain("pairing directions must be nonzero");
        }
        if !(p >= 2.0 && p.is_finite()) {
            return domain(format!("Hessian pairing needs p >= 2, got {p}"));
        }
        spec.validate()?;
        if spec.smoothness_order() < 2 {
            return domain(format!("{} is not twice differentiable", spec.name()));
        }
        let v1 = &v1 / v1.norm();
        let v2 = &v2 / v2.norm();
        Ok(Self { v1, v2, spec, p })
    }

    pub fn dim(&self) -> usize {
        self.v1.len()
    }
}

/// `T(x) = v2^T Hess(N^p)(x) v1`, with `T(0) = 0` when `p > 2`.
pub fn pairing_t(pairing: &HessianPairing, x: &Vector) -> Result<f64> {
    check_dim(pairing.dim(), x.len())?;
    if x.iter().all(|v| *v == 0.0) {
        if pairing.p > 2.0 {
            return Ok(0.0);
        }
        return domain("the pairing is undefined at the origin for p = 2");
    }
    let h = norm_hessian(&pairing.spec, pairing.p, x)?;
    Ok(pairing.v2.dot(&(h * &pairing.v1)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegratedT {
    pub value: f64,
    /// Index of the atom at `x` left out of the sum (only for `p = 2`).
    pub excluded_atom: Option<usize>,
}

/// `sum_i w_i T(x - x_i)`; for `p = 2` an atom sitting at `x` is skipped.
pub fn integrated_t(mu: &DiscreteMeasure, pairing: &HessianPairing, x: &Vector) -> Result<IntegratedT> {
    check_dim(mu.dim(), x.len())?;
    let mut value = 0.0;
    let mut excluded_atom = None;
    for (i, a) in mu.atoms().iter().enumerate() {
        let rel = x - &a.point;
        if pairing.p == 2.0 && rel.norm() < MERGE_TOL {
            excluded_atom = Some(i);
            continue;
        }
        value += a.weight * pairing_t(pairing, &rel)?;
    }
    Ok(IntegratedT { value, excluded_atom })
}

/// Thresholds of [`direction_search_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchThresholds {
    /// The sampled minimum must be at most this.
    pub min_tol: f64,
    /// The sampled maximum must be at least this.
    pub max_tol: f64,
    /// No sampled value may fall below `-neg_tol`.
    pub neg_tol: f64,
}

impl Default for SearchThresholds {
    fn default() -> Self {
        Self {
            min_tol: 1e-8,
            max_tol: 1e-4,
            neg_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionPair {
    pub v1: Vector,
    pub v2: Vector,
    pub min_value: f64,
    pub max_value: f64,
    /// Point of `S_N` where the minimum was attained.
    pub argmin: Vector,
    pub nonconstant: bool,
}

/// [`direction_search_with`] under default thresholds.
pub fn direction_search(spec: &NormSpec, p: f64, dim: usize, grid: usize, seed: u64) -> Result<Option<DirectionPair>> {
    direction_search_with(spec, p, dim, grid, seed, SearchThresholds::default())
}

/// Looks for unit `(v1, v2)` whose pairing is non-negative on the unit
/// sphere of `spec`, vanishes somewhere and is not identically zero.
///
/// Each candidate `v1` (coordinate axes first, then seeded sphere samples)
/// is first tried with `v2 = v1`. Otherwise `v2` runs along half circles
/// from `-v1` through a complement direction to `v1`, and the largest zero
/// of `t -> min_x gamma(t)^T Hess(x) v1` is located by scan and bisection.
pub fn direction_search_with(
    spec: &NormSpec,
    p: f64,
    dim: usize,
    grid: usize,
    seed: u64,
    thresholds: SearchThresholds,
) -> Result<Option<DirectionPair>> {
    if grid < 16 {
        return domain("direction search needs grid >= 16");
    }
    if dim < 2 {
        return domain("direction search needs dim >= 2");
    }
    let mut samples = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = Vector::zeros(dim);
            e[i] = s;
            samples.push(&e / spec.eval(&e)?);
        }
    }
    samples.extend(sphere_sample_normed(spec, dim, grid * grid, seed)?);
    let scanner = Scanner { spec, dim, samples };

    let mut v1s: Vec<Vector> = (0..dim)
        .map(|i| {
            let mut e = Vector::zeros(dim);
            e[i] = 1.0;
            e
        })
        .collect();
    v1s.extend(sphere_sample(dim, grid, seed.wrapping_add(1))?);

    for v1 in &v1s {
        let pairing = HessianPairing::new(v1.clone(), v1.clone(), spec.clone(), p)?;
        if let Some(found) = scanner.accept(&pairing, thresholds)? {
            return Ok(Some(found));
        }
        for w in complement_basis(v1) {
            let curve = |t: f64| {
                let g = v1 * (2.0 * t - 1.0) + &w * (1.0 - (2.0 * t - 1.0).abs());
                &g / g.norm()
            };
            let g_of = |t: f64| -> Result<f64> {
                let pr = HessianPairing::new(v1.clone(), curve(t), spec.clone(), p)?;
                Ok(scanner.stats(&pr)?.min)
            };
            // Largest grid node with g <= 0, followed by a node with g > 0.
            let ts: Vec<f64> = (0..=grid).map(|k| k as f64 / grid as f64).collect();
            let gs = ts.iter().map(|t| g_of(*t)).collect::<Result<Vec<f64>>>()?;
            let Some(k) = (0..grid).rev().find(|&k| gs[k] <= 0.0 && gs[k + 1] > 0.0) else {
                continue;
            };
            let (mut lo, mut hi) = (ts[k], ts[k + 1]);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g_of(mid)? <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // `hi` keeps the sampled minimum on the non-negative side.
            for t in [hi, lo] {
                let pr = HessianPairing::new(v1.clone(), curve(t), spec.clone(), p)?;
                if let Some(found) = scanner.accept(&pr, thresholds)? {
                    return Ok(Some(found));
                }
            }
        }
    }
    Ok(None)
}

fn complement_basis(v1: &Vector) -> Vec<Vector> {
    let n = v1.len();
    let u = v1 / v1.norm();
    let mut basis: Vec<Vector> = Vec::new();
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        let mut r = &e - &u * u.dot(&e);
        for b in &basis {
            r -= b * b.dot(&r);
        }
        if r.norm() > 1e-8 {
            basis.push(&r / r.norm());
        }
        if basis.len() == n - 1 {
            break;
        }
    }
    basis
}

struct Scanner<'a> {
    spec: &'a NormSpec,
    dim: usize,
    samples: Vec<Vector>,
}

struct Stats {
    min: f64,
    max: f64,
    argmin: Vector,
}

impl Scanner<'_> {
    fn stats(&self, pairing: &HessianPairing) -> Result<Stats> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut argmin = self.samples[0].clone();
        for x in &self.samples {
            let t = pairing_t(pairing, x)?;
            if t < min {
                min = t;
                argmin = x.clone();
            }
            max = max.max(t);
        }
        let (argmin, min) = self.refine(pairing, argmin, min)?;
        Ok(Stats { min, max, argmin })
    }

    /// Pattern search on the unit sphere of the norm.
    fn refine(&self, pairing: &HessianPairing, mut x: Vector, mut fx: f64) -> Result<(Vector, f64)> {
        let mut step = 0.05;
        while step > 1e-10 {
            let mut improved = false;
            for i in 0..self.dim {
                for s in [step, -step] {
                    let mut y = x.clone();
                    y[i] += s;
                    let n = self.spec.eval(&y)?;
                    if n == 0.0 {
                        continue;
                    }
                    let y = y / n;
                    let fy = pairing_t(pairing, &y)?;
                    if fy < fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        Ok((x, fx))
    }

    fn accept(&self, pairing: &HessianPairing, th: SearchThresholds) -> Result<Option<DirectionPair>> {
        let s = self.stats(pairing)?;
        if s.min <= th.min_tol && s.max >= th.max_tol && s.min >= -th.neg_tol {
            return Ok(Some(DirectionPair {
                v1: pairing.v1.clone(),
                v2: pairing.v2.clone(),
                min_value: s.min,
                max_value: s.max,
                argmin: s.argmin,
                nonconstant: s.max - s.min >= th.max_tol,
            }));
        }
        Ok(None)
    }
}

/// Every atom lies on `sub` (within `1e-9`) and the integrated pairing
/// vanishes (within `1e-8`) at each atom.
pub fn support_in_translate_check(
    mu: &DiscreteMeasure,
    pairing: &HessianPairing,
    sub: &AffineSubspace,
) -> Result<bool> {
    check_dim(mu.dim(), sub.dim())?;
    for a in mu.atoms() {
        if !sub.contains(&a.point, 1e-9) {
            return Ok(false);
        }
    }
    for a in mu.atoms() {
        if integrated_t(mu, pairing, &a.point)?.value.abs() > 1e-8 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{dirac, Atom};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn e(dim: usize, i: usize) -> Vector {
        let mut x = Vector::zeros(dim);
        x[i] = 1.0;
        x
    }

    #[test]
    fn potential_examples() {
        let l3 = NormSpec::lq(3.0).unwrap();
        let x = v(&[0.4, -1.3]);
        let val = potential_eval(&dirac(v(&[0.0, 0.0])), &l3, 1.5, &x).unwrap();
        assert!((val - l3.eval(&x).unwrap().powf(1.5)).abs() < 1e-14);

        for q in [3.0, 4.0, 2.5] {
            let mu0 = DiscreteMeasure::uniform(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])]).unwrap();
            let val = potential_eval(&mu0, &NormSpec::lq(q).unwrap(), 2.0, &e(2, 1)).unwrap();
            assert!((val - 2f64.powf(2.0 / q)).abs() < 1e-14);
        }
    }

    #[test]
    fn second_difference_examples() {
        let l3 = NormSpec::lq(3.0).unwrap();
        let h = v(&[0.2, -0.7]);
        assert!((second_diff_g(&l3, 1.5, &v(&[0.0, 0.0]), &h).unwrap() - 1.0).abs() < 1e-14);
        let x = v(&[1.1, 0.3]);
        let g1 = second_diff_g(&l3, 1.5, &x, &h).unwrap();
        let g2 = second_diff_g(&l3, 1.5, &(&x * 3.7), &(&h * 3.7)).unwrap();
        assert!((g1 - g2).abs() < 1e-10);
        // Second difference of |.|^2 is 2|h|^2, so G = 1 everywhere.
        let g = second_diff_g(&NormSpec::Euclidean, 2.0, &x, &h).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        assert!(second_diff_g(&l3, 1.5, &x, &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn atom_estimates() {
        let l3 = NormSpec::lq(3.0).unwrap();
        let mu = DiscreteMeasure::new(2, vec![Atom::new(v(&[0.0, 0.0]), 0.3), Atom::new(v(&[1.0, 1.0]), 0.7)]).unwrap();
        let dir = v(&[0.6, 0.8]);
        let at = |x: Vector| atom_estimate(&mu, &l3, 1.5, &x, &dir, 0.25, 0.5, 20).unwrap();
        let a = at(v(&[0.0, 0.0]));
        assert!(a.converged);
        assert!((a.estimate - 0.3).abs() < 1e-3);
        let m = at(v(&[0.5, 0.5]));
        assert!(m.converged);
        assert!(m.estimate.abs() < 1e-3);
        assert!(m.h_sequence.windows(2).all(|w| w[1].0 < w[0].0));

        let d = atom_estimate(&dirac(v(&[2.0, 1.0])), &l3, 1.5, &v(&[2.0, 1.0]), &dir, 0.25, 0.5, 20).unwrap();
        assert!((d.estimate - 1.0).abs() < 1e-6);
        assert!(atom_estimate(&mu, &l3, 2.0, &v(&[0.0, 0.0]), &dir, 0.25, 0.5, 20).is_err());
    }

    #[test]
    fn pairing_examples() {
        let l4 = NormSpec::lq(4.0).unwrap();
        let pr = HessianPairing::new(e(2, 0), e(2, 0), l4.clone(), 2.0).unwrap();
        assert!((pairing_t(&pr, &e(2, 0)).unwrap() - 2.0).abs() < 1e-12);
        assert!(pairing_t(&pr, &e(2, 1)).unwrap().abs() < 1e-14);
        assert!(pairing_t(&pr, &v(&[0.0, 0.0])).is_err());

        let eu = HessianPairing::new(v(&[1.0, 1.0]), v(&[1.0, -1.0]), NormSpec::Euclidean, 2.0).unwrap();
        for x in sphere_sample(2, 20, 3).unwrap() {
            assert!(pairing_t(&eu, &(x * 2.5)).unwrap().abs() < 1e-14);
        }
        let p3 = HessianPairing::new(e(2, 0), e(2, 0), l4, 3.0).unwrap();
        assert_eq!(pairing_t(&p3, &v(&[0.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn integrated_examples() {
        let l4 = NormSpec::lq(4.0).unwrap();
        let pr = HessianPairing::new(e(2, 1), e(2, 1), l4, 2.0).unwrap();
        let on_l = DiscreteMeasure::new(
            2,
            vec![Atom::new(v(&[-1.0, 0.0]), 0.25), Atom::new(v(&[2.0, 0.0]), 0.75)],
        )
        .unwrap();
        let r = integrated_t(&on_l, &pr, &v(&[0.5, 0.0])).unwrap();
        assert!(r.value.abs() < 1e-14);
        assert_eq!(r.excluded_atom, None);
        let r = integrated_t(&on_l, &pr, &v(&[-1.0, 0.0])).unwrap();
        assert_eq!(r.excluded_atom, Some(0));
        assert!(r.value.abs() < 1e-14);

        let off = DiscreteMeasure::new(
            2,
            vec![Atom::new(v(&[-1.0, 0.0]), 0.25), Atom::new(v(&[2.0, 1.0]), 0.75)],
        )
        .unwrap();
        assert!(integrated_t(&off, &pr, &v(&[0.5, 0.0])).unwrap().value > 0.0);

        let y = v(&[0.3, 0.2]);
        let x = v(&[1.0, -1.0]);
        let single = integrated_t(&dirac(y.clone()), &pr, &x).unwrap().value;
        assert!((single - pairing_t(&pr, &(&x - &y)).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn search_lq4_finds_coordinate_pair() {
        let l4 = NormSpec::lq(4.0).unwrap();
        let found = direction_search(&l4, 2.0, 3, 16, 0).unwrap().expect("pair expected");
        let axis = (0..3).find(|&i| found.v1[i].abs() > 1.0 - 1e-9).expect("coordinate v1");
        assert!(found.v2[axis].abs() > 1.0 - 1e-9);
        assert!(found.min_value.abs() <= 1e-8);
        assert!(found.nonconstant);
    }

    #[test]
    fn search_euclidean() {
        assert!(direction_search(&NormSpec::Euclidean, 2.0, 2, 16, 0).unwrap().is_none());
        let found = direction_search(&NormSpec::Euclidean, 4.0, 2, 16, 0)
            .unwrap()
            .expect("p = 4 has a kernel");
        // min over the circle of 4cos(a) + 8(x.v1)(x.v2) vanishes at a = 60 degrees.
        let cos = found.v1.dot(&found.v2);
        assert!((cos - 0.5).abs() < 1e-6, "cos = {cos}");
        assert!(found.min_value >= -1e-8 && found.min_value <= 1e-8);
    }

    #[test]
    fn support_checks() {
        let l4 = NormSpec::lq(4.0).unwrap();
        let pr = HessianPairing::new(e(2, 0), e(2, 0), l4, 2.0).unwrap();
        let plane = AffineSubspace::new(v(&[0.7, 0.0]), vec![e(2, 1)]).unwrap();
        let on = DiscreteMeasure::uniform(vec![v(&[0.7, -1.0]), v(&[0.7, 2.0]), v(&[0.7, 0.1])]).unwrap();
        assert!(support_in_translate_check(&on, &pr, &plane).unwrap());
        let off = DiscreteMeasure::uniform(vec![v(&[0.7, -1.0]), v(&[1.0, 2.0])]).unwrap();
        assert!(!support_in_translate_check(&off, &pr, &plane).unwrap());
        let pt = AffineSubspace::new(v(&[1.0, 1.0]), vec![]).unwrap();
        assert!(support_in_translate_check(&dirac(v(&[1.0, 1.0])), &pr, &pt).unwrap());
    }
}
