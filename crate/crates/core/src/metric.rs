//! 2-D Finsler structures on a single planar chart: norm evaluation, the
//! fundamental tensor (half-Hessian of F^2 in the fiber variable) and
//! geodesic spray coefficients.
//!
//! Supported kinds: Euclidean, Riemannian with a caller-supplied tensor
//! field, Zermelo navigation under a constant wind (a Randers metric, the
//! stock non-reversible example), the flat torus, and the reversal wrapper
//! `F_rev(v) = F(-v)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{golden_min, Point2, SymMat2, Vec2};

/// A tangent vector with its base point.
#[derive(Debug, Clone, Copy)]
pub struct Tangent2 {
    pub base: Point2,
    pub v: Vec2,
}

impl Tangent2 {
    pub fn new(base: Point2, v: Vec2) -> Self {
        Tangent2 { base, v }
    }
}

/// Fundamental tensor evaluated at a fixed flagpole (x, y), y != 0.
#[derive(Debug, Clone, Copy)]
pub struct FundamentalTensor {
    pub g: SymMat2,
}

impl FundamentalTensor {
    pub fn inner(&self, u: Vec2, v: Vec2) -> f64 {
        self.g.inner(u, v)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.g.eigenvalues().0
    }
}

type TensorField = Arc<dyn Fn(Point2) -> SymMat2 + Send + Sync>;

/// A Finsler structure on the chart.
#[derive(Clone)]
pub enum MetricField {
    Euclidean,
    /// Riemannian metric given by a positive-definite tensor field a_ij(x).
    Riemannian(TensorField),
    /// Zermelo navigation with constant wind W, |W| < 1. Unit-time motion
    /// x' = u + W with |u| = 1; the induced norm solves |v/F - W| = 1.
    RandersZermelo { wind: Vec2 },
    /// Euclidean metric on R^2 / (Lx Z x Ly Z).
    FlatTorus { lx: f64, ly: f64 },
    Reversed(Box<MetricField>),
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl MetricField {
    /// Constructor that enforces the strong-convexity bound |W| < 1.
    pub fn randers_zermelo(wind: Vec2) -> Result<MetricField> {
        if !wind.is_finite() {
            return Err(Error::InvalidInput("non-finite wind".into()));
        }
        if wind.norm() >= 1.0 {
            return Err(Error::InvalidMetric(format!(
                "wind speed {} >= 1 destroys strong convexity",
                wind.norm()
            )));
        }
        Ok(MetricField::RandersZermelo { wind })
    }

    pub fn flat_torus(lx: f64, ly: f64) -> Result<MetricField> {
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidInput("torus periods must be positive".into()));
        }
        Ok(MetricField::FlatTorus { lx, ly })
    }

    pub fn riemannian(field: impl Fn(Point2) -> SymMat2 + Send + Sync + 'static) -> MetricField {
        MetricField::Riemannian(Arc::new(field))
    }

    /// Short stable identifier used to label geodesic segments and outputs.
    pub fn id(&self) -> String {
        match self {
            MetricField::Euclidean => "euclidean".into(),
            MetricField::Riemannian(_) => "riemannian".into(),
            MetricField::RandersZermelo { wind } => {
                format!("randers_zermelo[{:.6},{:.6}]", wind.x, wind.y)
            }
            MetricField::FlatTorus { lx, ly } => format!("flat_torus[{lx},{ly}]"),
            MetricField::Reversed(inner) => format!("reversed({})", inner.id()),
        }
    }

    /// True when the norm does not depend on the base point, so geodesics
    /// are chart-straight lines and d(p,q) = F(q - p).
    pub fn is_locally_minkowski(&self) -> bool {
        match self {
            MetricField::Euclidean | MetricField::RandersZermelo { .. } | MetricField::FlatTorus { .. } => true,
            MetricField::Riemannian(_) => false,
            MetricField::Reversed(inner) => inner.is_locally_minkowski(),
        }
    }

    pub fn is_torus(&self) -> bool {
        match self {
            MetricField::FlatTorus { .. } => true,
            MetricField::Reversed(inner) => inner.is_torus(),
            _ => false,
        }
    }

    pub fn torus_periods(&self) -> Option<(f64, f64)> {
        match self {
            MetricField::FlatTorus { lx, ly } => Some((*lx, *ly)),
            MetricField::Reversed(inner) => inner.torus_periods(),
            _ => None,
        }
    }

    /// An exact point-to-point distance formula exists for this kind.
    pub fn analytic_distance_available(&self) -> bool {
        self.is_locally_minkowski()
    }

    /// Infallible norm. F(x, 0) = 0 by the homogeneity extension.
    pub fn norm(&self, at: Point2, v: Vec2) -> f64 {
        match self {
            MetricField::Euclidean | MetricField::FlatTorus { .. } => v.norm(),
            MetricField::Riemannian(a) => {
                let g = a(at);
                g.inner(v, v).max(0.0).sqrt()
            }
            MetricField::RandersZermelo { wind } => {
                if v.x == 0.0 && v.y == 0.0 {
                    return 0.0;
                }
                let lambda = 1.0 - wind.norm2();
                let s = v.dot(*wind);
                ((s * s + lambda * v.norm2()).sqrt() - s) / lambda
            }
            MetricField::Reversed(inner) => inner.norm(at, v.neg()),
        }
    }

    /// Checked norm evaluation.
    pub fn eval_norm(&self, t: Tangent2) -> Result<f64> {
        if !t.base.is_finite() || !t.v.is_finite() {
            return Err(Error::InvalidInput("non-finite tangent".into()));
        }
        Ok(self.norm(t.base, t.v))
    }

    /// Fundamental tensor g_ij(x, y) at a flagpole y != 0.
    pub fn fundamental_tensor(&self, t: Tangent2) -> Result<FundamentalTensor> {
        if t.v.x == 0.0 && t.v.y == 0.0 {
            return Err(Error::DomainError(
                "fundamental tensor is undefined at the zero section".into(),
            ));
        }
        if !t.base.is_finite() || !t.v.is_finite() {
            return Err(Error::InvalidInput("non-finite tangent".into()));
        }
        Ok(FundamentalTensor { g: self.tensor(t.base, t.v) })
    }

    /// Infallible tensor evaluation; callers guarantee v != 0.
    pub fn tensor(&self, at: Point2, v: Vec2) -> SymMat2 {
        match self {
            MetricField::Euclidean | MetricField::FlatTorus { .. } => SymMat2::identity(),
            MetricField::Riemannian(a) => a(at),
            MetricField::RandersZermelo { wind } => randers_tensor(*wind, v),
            MetricField::Reversed(inner) => inner.tensor(at, v.neg()),
        }
    }

    /// Inner product g_w(u, v) at flagpole w.
    pub fn g_inner(&self, at: Point2, flag: Vec2, u: Vec2, v: Vec2) -> f64 {
        self.tensor(at, flag).inner(u, v)
    }

    /// Second-derivative term of the geodesic ODE in chart coordinates:
    /// geodesics satisfy x'' = spray_acceleration(x, x').
    pub fn spray_acceleration(&self, t: Tangent2) -> Result<Vec2> {
        if t.v.x == 0.0 && t.v.y == 0.0 {
            return Err(Error::DomainError("spray is undefined at the zero section".into()));
        }
        Ok(self.spray(t.base, t.v))
    }

    pub(crate) fn spray(&self, at: Point2, v: Vec2) -> Vec2 {
        match self {
            // Position-independent norms have straight-line geodesics.
            MetricField::Euclidean
            | MetricField::FlatTorus { .. }
            | MetricField::RandersZermelo { .. } => Vec2::zero(),
            MetricField::Riemannian(a) => riemannian_acceleration(a, at, v),
            MetricField::Reversed(inner) => inner.spray(at, v.neg()),
        }
    }

    /// The reversed structure F_rev(v) = F(-v). An involution.
    pub fn reverse(&self) -> MetricField {
        match self {
            MetricField::Euclidean => MetricField::Euclidean,
            MetricField::FlatTorus { lx, ly } => MetricField::FlatTorus { lx: *lx, ly: *ly },
            MetricField::RandersZermelo { wind } => MetricField::RandersZermelo { wind: wind.neg() },
            MetricField::Reversed(inner) => (**inner).clone(),
            other => MetricField::Reversed(Box::new(other.clone())),
        }
    }

    /// Rescale v so that F(at, v) = 1.
    pub fn unit_vector(&self, at: Point2, v: Vec2) -> Result<Vec2> {
        let n = self.norm(at, v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero/non-finite vector".into()));
        }
        Ok(v.scale(1.0 / n))
    }

    /// Dual norm of a covector: F*(w) = max { w(v) : F(v) = 1 }, together
    /// with the maximizing F-unit direction (the Legendre transform /
    /// Finslerian gradient direction when w = df).
    pub fn dual_norm(&self, at: Point2, w: Vec2) -> (f64, Vec2) {
        if w.x == 0.0 && w.y == 0.0 {
            return (0.0, Vec2::new(1.0, 0.0));
        }
        let value = |theta: f64| {
            let u = Vec2::from_angle(theta);
            let f = self.norm(at, u);
            w.dot(u) / f
        };
        // Coarse scan then golden refinement; the dual objective has a
        // single maximum over directions for strongly convex norms.
        let mut best_theta = 0.0;
        let mut best = f64::NEG_INFINITY;
        let n = 128;
        for k in 0..n {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
            let val = value(theta);
            if val > best {
                best = val;
                best_theta = theta;
            }
        }
        let span = 2.0 * std::f64::consts::PI / (n as f64);
        let (theta, negval) =
            golden_min(best_theta - span, best_theta + span, 60, |t| -value(t));
        let dir = Vec2::from_angle(theta);
        let unit = dir.scale(1.0 / self.norm(at, dir));
        (-negval, unit)
    }

    /// Axiom check by sampling: 1-positive homogeneity and positive
    /// definiteness of the fundamental tensor.
    pub fn validate(&self, sample_count: usize, seed: u64) -> Result<ValidationReport> {
        if sample_count < 1 {
            return Err(Error::Precondition("sample_count must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut max_residual: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        for _ in 0..sample_count {
            let p = Point2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let ang = rng.gen_range(0.0..std::f64::consts::TAU);
            let mag = rng.gen_range(0.1..4.0);
            let v = Vec2::from_angle(ang).scale(mag);
            let lambda: f64 = rng.gen_range(0.05..20.0);
            let f = self.norm(p, v);
            let fl = self.norm(p, v.scale(lambda));
            if f > 0.0 {
                max_residual = max_residual.max((fl - lambda * f).abs() / (lambda * f));
            }
            min_eig = min_eig.min(self.tensor(p, v).eigenvalues().0);
        }
        Ok(ValidationReport {
            samples: sample_count,
            max_homogeneity_residual: max_residual,
            min_tensor_eigenvalue: min_eig,
            pass: max_residual < 1e-9 && min_eig > 0.0,
        })
    }
}

/// Fundamental tensor of the constant-wind Zermelo metric, computed from
/// its Randers form F = alpha + beta with
///   a_ij = (lambda I + W W^T) / lambda^2,  b = -W / lambda,
/// via g = dF (x) dF + F Hess(alpha).
fn randers_tensor(wind: Vec2, v: Vec2) -> SymMat2 {
    let lambda = 1.0 - wind.norm2();
    let a = SymMat2::new(
        (lambda + wind.x * wind.x) / (lambda * lambda),
        (wind.x * wind.y) / (lambda * lambda),
        (lambda + wind.y * wind.y) / (lambda * lambda),
    );
    let av = a.apply(v);
    let alpha = a.inner(v, v).sqrt();
    let b = wind.scale(-1.0 / lambda);
    let f = alpha + b.dot(v);
    let l = av.scale(1.0 / alpha).add(b);
    let fa = f / alpha;
    let proj = 1.0 / (alpha * alpha);
    SymMat2::new(
        fa * (a.a11 - av.x * av.x * proj) + l.x * l.x,
        fa * (a.a12 - av.x * av.y * proj) + l.x * l.y,
        fa * (a.a22 - av.y * av.y * proj) + l.y * l.y,
    )
}

/// Geodesic acceleration -Gamma^i_jk v^j v^k for a Riemannian tensor field,
/// with Christoffel symbols from central differences of the callback.
fn riemannian_acceleration(a: &TensorField, at: Point2, v: Vec2) -> Vec2 {
    let h = 1e-5;
    let diff = |dx: f64, dy: f64| {
        let plus = a(Point2::new(at.x + dx * h, at.y + dy * h));
        let minus = a(Point2::new(at.x - dx * h, at.y - dy * h));
        SymMat2::new(
            (plus.a11 - minus.a11) / (2.0 * h),
            (plus.a12 - minus.a12) / (2.0 * h),
            (plus.a22 - minus.a22) / (2.0 * h),
        )
    };
    // d[k] = dA/dx_k
    let d = [diff(1.0, 0.0), diff(0.0, 1.0)];
    let entry = |m: &SymMat2, i: usize, j: usize| match (i, j) {
        (0, 0) => m.a11,
        (1, 1) => m.a22,
        _ => m.a12,
    };
    let ainv = a(at).inverse();
    let vv = [v.x, v.y];
    let mut acc = [0.0_f64; 2];
    for i in 0..2 {
        let mut s = 0.0;
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    // Gamma_{l,jk} of the first kind
                    let gamma = 0.5
                        * (entry(&d[j], l, k) + entry(&d[k], l, j) - entry(&d[l], j, k));
                    s += entry(&ainv, i, l) * gamma * vv[j] * vv[k];
                }
            }
        }
        acc[i] = -s;
    }
    Vec2::new(acc[0], acc[1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub max_homogeneity_residual: f64,
    pub min_tensor_eigenvalue: f64,
    pub pass: bool,
}

/// Serializable description of a metric; the Riemannian kind carries a
/// closure and is deliberately not representable.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Euclidean,
    RandersZermelo { wind: [f64; 2] },
    FlatTorus { periods: [f64; 2] },
    Reversed { inner: Box<MetricSpec> },
}

impl MetricSpec {
    pub fn build(&self) -> Result<MetricField> {
        match self {
            MetricSpec::Euclidean => Ok(MetricField::Euclidean),
            MetricSpec::RandersZermelo { wind } => {
                MetricField::randers_zermelo(Vec2::new(wind[0], wind[1]))
            }
            MetricSpec::FlatTorus { periods } => MetricField::flat_torus(periods[0], periods[1]),
            MetricSpec::Reversed { inner } => Ok(inner.build()?.reverse()),
        }
    }

    pub fn of(m: &MetricField) -> Result<MetricSpec> {
        match m {
            MetricField::Euclidean => Ok(MetricSpec::Euclidean),
            MetricField::RandersZermelo { wind } => {
                Ok(MetricSpec::RandersZermelo { wind: [wind.x, wind.y] })
            }
            MetricField::FlatTorus { lx, ly } => Ok(MetricSpec::FlatTorus { periods: [*lx, *ly] }),
            MetricField::Reversed(inner) => Ok(MetricSpec::Reversed {
                inner: Box::new(MetricSpec::of(inner)?),
            }),
            MetricField::Riemannian(_) => Err(Error::Serialization(
                "riemannian tensor callbacks are not serializable".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o() -> Point2 {
        Point2::new(0.0, 0.0)
    }

    /// Independent oracle: solve |v/F - W| = 1 for F by bisection.
    fn zermelo_norm_oracle(wind: Vec2, v: Vec2) -> f64 {
        let residual = |f: f64| (v.scale(1.0 / f).sub(wind)).norm() - 1.0;
        let (mut lo, mut hi) = (1e-9, 1e9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn euclidean_norm_is_pythagorean() {
        let m = MetricField::Euclidean;
        assert_eq!(m.norm(o(), Vec2::new(3.0, 4.0)), 5.0);
    }

    #[test]
    fn zermelo_norm_with_and_against_the_wind() {
        let m = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let f_with = m.norm(o(), Vec2::new(1.0, 0.0));
        let f_against = m.norm(o(), Vec2::new(-1.0, 0.0));
        assert!((f_with - 2.0 / 3.0).abs() < 1e-12, "downwind {f_with}");
        assert!((f_against - 2.0).abs() < 1e-12, "upwind {f_against}");
        // quadratic oracle on oblique directions
        for ang in [0.3, 1.2, 2.0, 4.4] {
            let v = Vec2::from_angle(ang).scale(1.7);
            let got = m.norm(o(), v);
            let want = zermelo_norm_oracle(Vec2::new(0.5, 0.0), v);
            assert!((got - want).abs() < 1e-7, "angle {ang}: {got} vs {want}");
        }
    }

    #[test]
    fn homogeneity_on_samples() {
        let m = MetricField::randers_zermelo(Vec2::new(0.3, -0.4)).unwrap();
        let v = Vec2::new(0.2, 1.4);
        let f = m.norm(o(), v);
        let f2 = m.norm(o(), v.scale(2.0));
        assert!((f2 - 2.0 * f).abs() <= 1e-12 * 2.0 * f);
    }

    #[test]
    fn riemannian_tensor_is_direction_independent() {
        let m = MetricField::riemannian(|_| SymMat2::diag(1.0, 4.0));
        let g1 = m.tensor(o(), Vec2::new(1.0, 0.0));
        let g2 = m.tensor(o(), Vec2::new(0.0, 1.0));
        assert!(g1.max_abs_diff(&g2) <= 1e-12);
        assert_eq!(g1.a11, 1.0);
        assert_eq!(g1.a22, 4.0);
    }

    /// Central-difference Hessian of F^2/2 as the tensor oracle.
    fn fd_tensor(m: &MetricField, p: Point2, v: Vec2) -> SymMat2 {
        let h = 1e-4;
        let f2 = |w: Vec2| {
            let f = m.norm(p, w);
            0.5 * f * f
        };
        let e = [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let mut out = [0.0_f64; 3];
        let idx = [(0, 0), (0, 1), (1, 1)];
        for (slot, (i, j)) in idx.iter().enumerate() {
            let hij = if i == j {
                (f2(v.add(e[*i].scale(h))) - 2.0 * f2(v) + f2(v.sub(e[*i].scale(h)))) / (h * h)
            } else {
                (f2(v.add(e[0].scale(h)).add(e[1].scale(h)))
                    - f2(v.add(e[0].scale(h)).sub(e[1].scale(h)))
                    - f2(v.sub(e[0].scale(h)).add(e[1].scale(h)))
                    + f2(v.sub(e[0].scale(h)).sub(e[1].scale(h))))
                    / (4.0 * h * h)
            };
            out[slot] = hij;
        }
        SymMat2::new(out[0], out[1], out[2])
    }

    #[test]
    fn randers_tensor_matches_finite_differences() {
        let m = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        for v in [Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.3), Vec2::new(-0.7, 0.2)] {
            let g = m.tensor(o(), v);
            let g_fd = fd_tensor(&m, o(), v);
            assert!(g.max_abs_diff(&g_fd) < 1e-5, "{:?} vs {:?}", g, g_fd);
            assert!(g.eigenvalues().0 > 0.0);
        }
    }

    #[test]
    fn reversal_swaps_wind() {
        let m = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let r = m.reverse();
        assert!((r.norm(o(), Vec2::new(1.0, 0.0)) - 2.0).abs() < 1e-12);
        // involution
        let rr = r.reverse();
        for ang in [0.0, 0.9, 2.5, 5.1] {
            let v = Vec2::from_angle(ang);
            assert!((rr.norm(o(), v) - m.norm(o(), v)).abs() < 1e-15);
        }
    }

    #[test]
    fn reversed_riemannian_roundtrip_norm() {
        let m = MetricField::riemannian(|p: Point2| SymMat2::diag(1.0 + 0.1 * p.x * p.x, 2.0));
        let r = m.reverse();
        let p = Point2::new(0.7, -0.3);
        let v = Vec2::new(0.4, 1.1);
        assert!((r.norm(p, v) - m.norm(p, v.neg())).abs() < 1e-15);
    }

    #[test]
    fn wind_speed_must_stay_subunit() {
        assert!(MetricField::randers_zermelo(Vec2::new(1.01, 0.0)).is_err());
        assert!(MetricField::randers_zermelo(Vec2::new(0.99, 0.0)).is_ok());
    }

    #[test]
    fn validation_passes_for_builtin_kinds() {
        for m in [
            MetricField::Euclidean,
            MetricField::randers_zermelo(Vec2::new(0.99, 0.0)).unwrap(),
            MetricField::flat_torus(1.0, 1.0).unwrap(),
        ] {
            let report = m.validate(100, 7).unwrap();
            assert!(report.pass, "{}: {:?}", m.id(), report);
        }
    }

    #[test]
    fn tensor_rejects_zero_section() {
        let m = MetricField::Euclidean;
        assert!(m.fundamental_tensor(Tangent2::new(o(), Vec2::zero())).is_err());
        // but the norm extends to zero by homogeneity
        assert_eq!(m.norm(o(), Vec2::zero()), 0.0);
    }

    #[test]
    fn dual_norm_of_unit_flag_covector_is_one() {
        let m = MetricField::randers_zermelo(Vec2::new(0.4, 0.2)).unwrap();
        let w = m.unit_vector(o(), Vec2::new(0.3, 1.0)).unwrap();
        let g = m.tensor(o(), w);
        let cov = g.apply(w); // g_w(w, .)
        let (dual, dir) = m.dual_norm(o(), cov);
        assert!((dual - 1.0).abs() < 1e-6, "dual {dual}");
        assert!(dir.sub(w).norm() < 1e-4);
    }

    #[test]
    fn metric_spec_roundtrip() {
        let m = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let spec = MetricSpec::of(&m).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("randers_zermelo"));
        let back: MetricSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}
