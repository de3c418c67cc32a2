//! Finitely supported probability measures and the maps acting on them.

use crate::error::{check_dim, domain, Error, Result};
use crate::norms::Vector;

/// Images closer than this (Euclidean) are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;
/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;
/// Position and weight tolerance of [`DiscreteMeasure::approx_eq`].
pub const EQ_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Vector,
    pub weight: f64,
}

impl Atom {
    pub fn new(point: Vector, weight: f64) -> Self {
        Self { point, weight }
    }
}

/// A probability measure with finitely many atoms. Atom order carries no meaning.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    /// Validates positivity, unit mass, finiteness and distinctness of the atoms.
    pub fn new(dim: usize, atoms: Vec<Atom>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("measure dimension must be at least 1".into()));
        }
        if atoms.is_empty() {
            return Err(Error::Input("measure needs at least one atom".into()));
        }
        let mut total = 0.0;
        for a in &atoms {
            check_dim(dim, a.point.len())?;
            if a.point.iter().any(|c| !c.is_finite()) {
                return Err(Error::Input("atom coordinates must be finite".into()));
            }
            if !(a.weight.is_finite() && a.weight > 0.0) {
                return Err(Error::Input(format!("atom weight must be positive, got {}", a.weight)));
            }
            total += a.weight;
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Input(format!("weights sum to {total}, not 1")));
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if (&atoms[i].point - &atoms[j].point).norm() < MERGE_TOL {
                    return Err(Error::Input(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { dim, atoms })
    }

    /// Builds a measure from possibly repeated points, summing weights of
    /// points closer than [`MERGE_TOL`].
    pub fn from_weighted_points(dim: usize, points: Vec<(Vector, f64)>) -> Result<Self> {
        let atoms = merge_atoms(points.into_iter().map(|(p, w)| Atom::new(p, w)), MERGE_TOL);
        Self::new(dim, atoms)
    }

    /// Equal weights on the given (distinct) points.
    pub fn uniform(points: Vec<Vector>) -> Result<Self> {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        let w = 1.0 / points.len() as f64;
        Self::new(dim, points.into_iter().map(|p| Atom::new(p, w)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Vector> {
        self.atoms.iter().map(|a| &a.point)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn is_dirac(&self) -> bool {
        self.atoms.len() == 1
    }

    /// Index of the atom at `x` (within [`MERGE_TOL`]), if any.
    pub fn atom_index(&self, x: &Vector) -> Option<usize> {
        self.atoms.iter().position(|a| (&a.point - x).norm() < MERGE_TOL)
    }

    /// Mass of the closed Euclidean ball of radius `tol` around `x`.
    pub fn mass_near(&self, x: &Vector, tol: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (&a.point - x).norm() <= tol)
            .map(|a| a.weight)
            .sum()
    }

    /// Copy whose atoms closer than `tol` are merged.
    pub fn merged(&self, tol: f64) -> DiscreteMeasure {
        DiscreteMeasure {
            dim: self.dim,
            atoms: merge_atoms(self.atoms.iter().cloned(), tol),
        }
    }

    /// Measure equality up to atom order: after merging atoms closer than
    /// `tol`, every atom must be matched by one of the other measure with
    /// position and weight both within `tol`.
    pub fn approx_eq(&self, other: &DiscreteMeasure, tol: f64) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let a = self.merged(tol);
        let b = other.merged(tol);
        if a.len() != b.len() {
            return false;
        }
        let mut used = vec![false; b.len()];
        for atom in &a.atoms {
            let best = b
                .atoms
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, other)| (j, (&other.point - &atom.point).norm(), other.weight))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match best {
                Some((j, d, w)) if d <= tol && (w - atom.weight).abs() <= tol => used[j] = true,
                _ => return false,
            }
        }
        true
    }
}

fn merge_atoms(atoms: impl Iterator<Item = Atom>, tol: f64) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::new();
    for a in atoms {
        match out.iter_mut().find(|o| (&o.point - &a.point).norm() < tol) {
            Some(o) => o.weight += a.weight,
            None => out.push(a),
        }
    }
    out
}

/// `delta_x`.
pub fn dirac(point: Vector) -> DiscreteMeasure {
    let dim = point.len();
    DiscreteMeasure {
        dim,
        atoms: vec![Atom::new(point, 1.0)],
    }
}

/// Push-forward under a point map; colliding images are merged.
pub fn pushforward<F>(mu: &DiscreteMeasure, map: F) -> Result<DiscreteMeasure>
where
    F: Fn(&Vector) -> Vector,
{
    let images: Vec<(Vector, f64)> = mu.atoms.iter().map(|a| (map(&a.point), a.weight)).collect();
    let dim = images[0].0.len();
    DiscreteMeasure::from_weighted_points(dim, images)
}

/// Fallible variant of [`pushforward`].
pub fn try_pushforward<F>(mu: &DiscreteMeasure, map: F) -> Result<DiscreteMeasure>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let mut images = Vec::with_capacity(mu.len());
    for a in &mu.atoms {
        images.push((map(&a.point)?, a.weight));
    }
    let dim = images[0].0.len();
    DiscreteMeasure::from_weighted_points(dim, images)
}

/// Each atom `y` moves to `center + factor * (y - center)`.
pub fn dilate(mu: &DiscreteMeasure, center: &Vector, factor: f64) -> Result<DiscreteMeasure> {
    check_dim(mu.dim, center.len())?;
    pushforward(mu, |y| center + (y - center) * factor)
}

pub fn barycenter(mu: &DiscreteMeasure) -> Vector {
    mu.atoms
        .iter()
        .fold(Vector::zeros(mu.dim), |acc, a| acc + &a.point * a.weight)
}

/// Parameters `(x, sigma, p)` of a two-point measure on the line
/// `origin + R * axis`: weight `e^{-p}/(e^{-p}+e^p)` at `x - sigma e^p` and
/// `e^p/(e^{-p}+e^p)` at `x + sigma e^{-p}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPointParams {
    pub axis: Vector,
    pub origin: Vector,
    pub x: f64,
    pub sigma: f64,
    pub p_param: f64,
}

impl TwoPointParams {
    pub fn new(axis: Vector, origin: Vector, x: f64, sigma: f64, p_param: f64) -> Self {
        Self {
            axis,
            origin,
            x,
            sigma,
            p_param,
        }
    }

    /// Reads `(x, sigma, p)` back from a two-atom measure on the line.
    pub fn recover(mu: &DiscreteMeasure, origin: &Vector, axis: &Vector) -> Result<Self> {
        check_dim(mu.dim(), origin.len())?;
        check_dim(mu.dim(), axis.len())?;
        if mu.len() != 2 {
            return domain(format!("two-point family needs two atoms, got {}", mu.len()));
        }
        let mut coords = Vec::with_capacity(2);
        for a in mu.atoms() {
            let rel = &a.point - origin;
            let s = rel.dot(axis);
            if (&rel - axis * s).norm() > 1e-9 {
                return domain("atom lies off the supporting line");
            }
            coords.push((s, a.weight));
        }
        coords.sort_by(|a, b| a.0.total_cmp(&b.0));
        let [(s_lo, w_lo), (s_hi, w_hi)] = [coords[0], coords[1]];
        let p_param = 0.5 * (w_hi / w_lo).ln();
        let x = w_lo * s_lo + w_hi * s_hi;
        let sigma = (s_hi - s_lo) / (p_param.exp() + (-p_param).exp());
        if (x - sigma * p_param.exp() - s_lo).abs() > 1e-9 || (x + sigma * (-p_param).exp() - s_hi).abs() > 1e-9 {
            return domain("atoms inconsistent with the two-point parametrization");
        }
        Ok(Self::new(axis.clone(), origin.clone(), x, sigma, p_param))
    }
}

/// Realizes the two-point family member described by `params`.
pub fn kloeckner_two_point(params: &TwoPointParams) -> Result<DiscreteMeasure> {
    if !(params.sigma > 0.0 && params.sigma.is_finite()) {
        return domain(format!("sigma must be positive, got {}", params.sigma));
    }
    check_dim(params.axis.len(), params.origin.len())?;
    if (params.axis.norm() - 1.0).abs() > 1e-9 {
        return domain("axis must be a unit vector");
    }
    let p = params.p_param;
    // Logistic form of e^{-p}/(e^{-p}+e^p) avoids overflow for large |p|.
    let w_lo = 1.0 / (1.0 + (2.0 * p).exp());
    let w_hi = 1.0 / (1.0 + (-2.0 * p).exp());
    let s_lo = params.x - params.sigma * p.exp();
    let s_hi = params.x + params.sigma * (-p).exp();
    let lo = &params.origin + &params.axis * s_lo;
    let hi = &params.origin + &params.axis * s_hi;
    DiscreteMeasure::new(params.axis.len(), vec![Atom::new(lo, w_lo), Atom::new(hi, w_hi)])
}

/// Moves `mass` from atom `from_atom` onto a new atom at `to_point`.
pub fn shift_weight(mu: &DiscreteMeasure, from_atom: usize, to_point: &Vector, mass: f64) -> Result<DiscreteMeasure> {
    check_dim(mu.dim, to_point.len())?;
    let Some(src) = mu.atoms.get(from_atom) else {
        return domain(format!("atom index {from_atom} out of range"));
    };
    if !(mass > 0.0 && mass < src.weight) {
        return domain(format!(
            "shifted mass {mass} must lie strictly between 0 and {}",
            src.weight
        ));
    }
    if mu.atom_index(to_point).is_some() {
        return domain("target point is already an atom");
    }
    let mut atoms = mu.atoms.clone();
    atoms[from_atom].weight -= mass;
    atoms.push(Atom::new(to_point.clone(), mass));
    Ok(DiscreteMeasure { dim: mu.dim, atoms })
}
