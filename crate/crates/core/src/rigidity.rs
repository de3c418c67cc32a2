//! Alignment of triples, the Dirac characterization, candidate maps on
//! Wasserstein space and certificates that a candidate is not an isometry.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use serde_json::{json, Value};

use crate::error::{check_dim, domain, Result};
use crate::measures::{dilate, dirac, kloeckner_two_point, pushforward, DiscreteMeasure, TwoPointParams, EQ_TOL};
use crate::norms::{NormSpec, Vector};
use crate::projections::{project_measure, AffineSubspace};
use crate::transport;

/// Default tolerance for [`alignment_check`].
pub const ALIGN_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentReport {
    pub d_mu_nu: f64,
    pub d_nu_eta: f64,
    pub d_mu_eta: f64,
    /// `d_mu_nu + d_nu_eta - d_mu_eta`, non-negative up to rounding.
    pub defect: f64,
    pub aligned: bool,
}

/// Whether `d(mu,nu) + d(nu,eta) = d(mu,eta)` within `tol`.
pub fn alignment_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    eta: &DiscreteMeasure,
    spec: &NormSpec,
    p: f64,
    tol: f64,
) -> Result<AlignmentReport> {
    if mu.approx_eq(nu, EQ_TOL) || nu.approx_eq(eta, EQ_TOL) || mu.approx_eq(eta, EQ_TOL) {
        return domain("an aligned triple needs three distinct measures");
    }
    let d_mu_nu = transport::distance(mu, nu, spec, p)?;
    let d_nu_eta = transport::distance(nu, eta, spec, p)?;
    let d_mu_eta = transport::distance(mu, eta, spec, p)?;
    let defect = d_mu_nu + d_nu_eta - d_mu_eta;
    Ok(AlignmentReport {
        d_mu_nu,
        d_nu_eta,
        d_mu_eta,
        defect,
        aligned: defect.abs() <= tol,
    })
}

/// `(D_x)_# nu` with `D_x(y) = x + 2 (y - x)`, which makes
/// `(delta_x, nu, eta)` aligned.
pub fn dirac_align_construct(x: &Vector, nu: &DiscreteMeasure, spec: &NormSpec, p: f64) -> Result<DiscreteMeasure> {
    check_dim(nu.dim(), x.len())?;
    let dx = dirac(x.clone());
    if nu.approx_eq(&dx, EQ_TOL) {
        return domain("nu coincides with delta_x");
    }
    let eta = dilate(nu, x, 2.0)?;
    let report = alignment_check(&dx, nu, &eta, spec, p, ALIGN_TOL * (1.0 + report_scale(nu, x)))?;
    if !report.aligned {
        return domain(format!("dilated triple has defect {}", report.defect));
    }
    Ok(eta)
}

fn report_scale(nu: &DiscreteMeasure, x: &Vector) -> f64 {
    nu.points().map(|y| (y - x).norm()).fold(0.0, f64::max)
}

/// `N(x-y) + N(y-z) = N(x-z)`, which for strictly convex norms means `y`
/// lies on the segment `[x, z]`.
pub fn segment_test(x: &Vector, y: &Vector, z: &Vector, spec: &NormSpec) -> Result<bool> {
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), z.len())?;
    if !spec.strictly_convex() {
        return domain(format!(
            "segment characterization needs a strictly convex norm, not {}",
            spec.name()
        ));
    }
    let xz = spec.dist(x, z)?;
    let gap = spec.dist(x, y)? + spec.dist(y, z)? - xz;
    Ok(gap.abs() <= 1e-10 * (1.0 + xz))
}

pub type PointMap = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Maps on measures that are tested for the isometry property.
#[derive(Clone)]
pub enum IsometryCandidate {
    /// `f_#` for a point map `f`.
    Pushforward { name: String, map: PointMap },
    /// Shifts the parameter `p` of the two-point family on the line
    /// `origin + R axis` by `t`; Dirac masses are fixed.
    PhiT { t: f64, origin: Vector, axis: Vector },
    /// Flips the sign of the two-point parameter `p`; Dirac masses are fixed.
    PhiStar { origin: Vector, axis: Vector },
    /// Rotation by `angle` about the barycenter, in the plane.
    Rotation { angle: f64 },
}

impl fmt::Debug for IsometryCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

impl IsometryCandidate {
    pub fn pushforward(name: impl Into<String>, map: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self::Pushforward {
            name: name.into(),
            map: Arc::new(map),
        }
    }

    pub fn translation(v: Vector) -> Self {
        let name = format!("translation{:?}", v.iter().collect::<Vec<_>>());
        Self::pushforward(name, move |x| x + &v)
    }

    /// `PhiT` on the first coordinate axis of `R^dim`.
    pub fn phi_t(t: f64, dim: usize) -> Self {
        let (origin, axis) = first_axis(dim);
        Self::PhiT { t, origin, axis }
    }

    /// `PhiStar` on the first coordinate axis of `R^dim`.
    pub fn phi_star(dim: usize) -> Self {
        let (origin, axis) = first_axis(dim);
        Self::PhiStar { origin, axis }
    }

    pub fn rotation(angle: f64) -> Self {
        Self::Rotation { angle }
    }

    pub fn describe(&self) -> Value {
        let vec = |v: &Vector| v.iter().copied().collect::<Vec<f64>>();
        match self {
            Self::Pushforward { name, .. } => json!({"kind": "pushforward", "map": name}),
            Self::PhiT { t, origin, axis } => {
                json!({"kind": "phi_t", "t": t, "origin": vec(origin), "axis": vec(axis)})
            }
            Self::PhiStar { origin, axis } => {
                json!({"kind": "phi_star", "origin": vec(origin), "axis": vec(axis)})
            }
            Self::Rotation { angle } => json!({"kind": "rotation", "angle": angle}),
        }
    }
}

fn first_axis(dim: usize) -> (Vector, Vector) {
    let mut axis = Vector::zeros(dim);
    if dim > 0 {
        axis[0] = 1.0;
    }
    (Vector::zeros(dim), axis)
}

/// Image of `mu` under the candidate.
pub fn apply_candidate(cand: &IsometryCandidate, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    match cand {
        IsometryCandidate::Pushforward { map, .. } => {
            let image = pushforward(mu, |x| map(x))?;
            check_dim(mu.dim(), image.dim())?;
            Ok(image)
        }
        IsometryCandidate::PhiT { t, origin, axis } => reparametrize(mu, origin, axis, |p| p + t),
        IsometryCandidate::PhiStar { origin, axis } => reparametrize(mu, origin, axis, |p| -p),
        IsometryCandidate::Rotation { angle } => {
            if mu.dim() != 2 {
                return domain("rotation candidates act on measures in the plane");
            }
            let (s, c) = angle.sin_cos();
            let r = Matrix2::new(c, -s, s, c);
            let b = crate::measures::barycenter(mu);
            pushforward(mu, |x| {
                let rel = nalgebra::Vector2::new(x[0] - b[0], x[1] - b[1]);
                let out = r * rel;
                Vector::from_row_slice(&[out[0] + b[0], out[1] + b[1]])
            })
        }
    }
}

fn reparametrize<F>(mu: &DiscreteMeasure, origin: &Vector, axis: &Vector, f: F) -> Result<DiscreteMeasure>
where
    F: Fn(f64) -> f64,
{
    check_dim(mu.dim(), axis.len())?;
    if mu.is_dirac() {
        return Ok(mu.clone());
    }
    let params = TwoPointParams::recover(mu, origin, axis)
        .map_err(|e| crate::Error::Domain(format!("measure is outside the two-point family: {e}")))?;
    let mapped = TwoPointParams {
        p_param: f(params.p_param),
        ..params
    };
    kloeckner_two_point(&mapped)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub probe: usize,
    /// `d(Phi mu, Phi nu)`.
    pub lhs: f64,
    /// `d(mu, nu)`.
    pub rhs: f64,
    pub violation: f64,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub candidate: IsometryCandidate,
    pub preserved: bool,
    pub max_violation: f64,
    pub witness: Option<Witness>,
    pub probes: usize,
}

impl Certificate {
    /// `{candidate, probe, lhs, rhs, violation}` for the worst probe.
    pub fn to_json(&self) -> Value {
        let w = self.witness.as_ref();
        json!({
            "candidate": self.candidate.describe(),
            "probe": w.map(|w| w.probe),
            "lhs": w.map(|w| w.lhs),
            "rhs": w.map(|w| w.rhs),
            "violation": self.max_violation,
            "preserved": self.preserved,
            "probes_checked": self.probes,
            "scope": "finite probe set",
        })
    }
}

/// Largest `|d(Phi mu, Phi nu) - d(mu, nu)|` over the probe pairs.
pub fn isometry_certificate(
    cand: &IsometryCandidate,
    probes: &[(DiscreteMeasure, DiscreteMeasure)],
    spec: &NormSpec,
    p: f64,
    tol: f64,
) -> Result<Certificate> {
    let mut witness: Option<Witness> = None;
    for (i, (mu, nu)) in probes.iter().enumerate() {
        let rhs = transport::distance(mu, nu, spec, p)?;
        let lhs = transport::distance(&apply_candidate(cand, mu)?, &apply_candidate(cand, nu)?, spec, p)?;
        let violation = (lhs - rhs).abs();
        if witness.as_ref().is_none_or(|w| violation > w.violation) {
            witness = Some(Witness {
                probe: i,
                lhs,
                rhs,
                violation,
            });
        }
    }
    let max_violation = witness.as_ref().map_or(0.0, |w| w.violation);
    Ok(Certificate {
        candidate: cand.clone(),
        preserved: max_violation <= tol,
        max_violation,
        witness,
        probes: probes.len(),
    })
}

/// `(A^{2/q} + A^{-2/q})/2 - ((A + 1/A)/2)^{2/q}`.
pub fn convexity_gap(q: f64, a: f64) -> Result<f64> {
    if !(q > 0.0 && q.is_finite()) {
        return domain(format!("q must be positive, got {q}"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return domain(format!("A must be positive, got {a}"));
    }
    let e = 2.0 / q;
    Ok(0.5 * (a.powf(e) + a.powf(-e)) - (0.5 * (a + 1.0 / a)).powf(e))
}

/// Whether the candidate commutes with projection onto `sub`.
pub fn commutation_check(
    cand: &IsometryCandidate,
    mu: &DiscreteMeasure,
    sub: &AffineSubspace,
    spec: &NormSpec,
    p: f64,
) -> Result<bool> {
    let left = project_measure(&apply_candidate(cand, mu)?, sub, spec, p)?;
    let right = apply_candidate(cand, &project_measure(mu, sub, spec, p)?)?;
    Ok(left.approx_eq(&right, EQ_TOL))
}
