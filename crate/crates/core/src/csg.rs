//! Closed subsets of the chart as CSG trees of disks, half-planes and
//! points, with membership tests and *exact* point-to-set distances under
//! locally Minkowski metrics.
//!
//! Exactness rests on a boundary-candidate argument: for a region bounded
//! by circular arcs and lines, the nearest point to an exterior query is
//! either an unconstrained projection onto one primitive boundary or a
//! corner where two primitive boundaries cross. We enumerate projections
//! and (precomputed) member corners and take the minimum. Non-Minkowski
//! metrics fall back to grid marching in the field layer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{golden_min, Point2, Vec2};
use crate::metric::MetricField;

/// Closed-set CSG tree. `Complement` is interpreted as the closed
/// complement (removal of the open primitive), so differences of closed
/// sets stay closed.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ClosedSet {
    Disk { center: Point2, r: f64 },
    /// { x : <normal, x> <= offset }
    HalfPlane { normal: Vec2, offset: f64 },
    Point(Point2),
    Union(Vec<ClosedSet>),
    Intersection(Vec<ClosedSet>),
    Complement(Box<ClosedSet>),
    Difference(Box<ClosedSet>, Box<ClosedSet>),
}

impl ClosedSet {
    pub fn disk(cx: f64, cy: f64, r: f64) -> ClosedSet {
        ClosedSet::Disk { center: Point2::new(cx, cy), r }
    }

    pub fn point(x: f64, y: f64) -> ClosedSet {
        ClosedSet::Point(Point2::new(x, y))
    }

    pub fn union(parts: Vec<ClosedSet>) -> ClosedSet {
        ClosedSet::Union(parts)
    }

    pub fn difference(a: ClosedSet, b: ClosedSet) -> ClosedSet {
        ClosedSet::Difference(Box::new(a), Box::new(b))
    }

    /// Membership with a boundary slack: `tol > 0` fattens the set,
    /// `tol < 0` shrinks it. Complements flip the slack so that removed
    /// regions are open and the remainder keeps its boundary.
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        match self {
            ClosedSet::Disk { center, r } => center.chart_dist(p) <= r + tol,
            ClosedSet::HalfPlane { normal, offset } => {
                normal.dot(Vec2::new(p.x, p.y)) <= offset + tol
            }
            ClosedSet::Point(q) => q.chart_dist(p) <= tol.max(0.0) + 1e-12,
            ClosedSet::Union(parts) => parts.iter().any(|s| s.contains(p, tol)),
            ClosedSet::Intersection(parts) => parts.iter().all(|s| s.contains(p, tol)),
            ClosedSet::Complement(inner) => !inner.contains(p, -tol),
            ClosedSet::Difference(a, b) => a.contains(p, tol) && !b.contains(p, -tol),
        }
    }

    /// True if some point of the set lies inside the window. Probes both a
    /// coarse grid (for area) and structural witness points (for lower-
    /// dimensional primitives like points and arcs).
    pub fn nonempty_on_grid(&self, window: &crate::geom::Window, n: usize) -> bool {
        let mut witnesses = Vec::new();
        self.collect_witnesses(&mut witnesses);
        if witnesses
            .iter()
            .any(|p| window.contains(*p) && self.contains(*p, 1e-9))
        {
            return true;
        }
        for j in 0..n {
            for i in 0..n {
                let p = Point2::new(
                    window.x0 + window.width() * (i as f64 + 0.5) / n as f64,
                    window.y0 + window.height() * (j as f64 + 0.5) / n as f64,
                );
                if self.contains(p, 1e-9) {
                    return true;
                }
            }
        }
        false
    }

    fn collect_witnesses(&self, out: &mut Vec<Point2>) {
        match self {
            ClosedSet::Disk { center, r } => {
                out.push(*center);
                for k in 0..8 {
                    let u = Vec2::from_angle(std::f64::consts::TAU * k as f64 / 8.0);
                    out.push(center.offset(u.scale(*r)));
                }
            }
            ClosedSet::HalfPlane { normal, offset } => {
                let n = normal.normalized();
                let foot = Point2::new(n.x * offset / normal.norm(), n.y * offset / normal.norm());
                out.push(foot);
                let t = n.perp();
                for s in [-2.0, -0.5, 0.5, 2.0] {
                    out.push(foot.offset(t.scale(s)));
                }
            }
            ClosedSet::Point(p) => out.push(*p),
            ClosedSet::Union(parts) | ClosedSet::Intersection(parts) => {
                for s in parts {
                    s.collect_witnesses(out);
                }
            }
            ClosedSet::Complement(inner) => inner.collect_witnesses(out),
            ClosedSet::Difference(a, b) => {
                a.collect_witnesses(out);
                b.collect_witnesses(out);
            }
        }
    }

    fn collect_boundaries(&self, out: &mut Vec<Boundary>) {
        match self {
            ClosedSet::Disk { center, r } => out.push(Boundary::Circle { center: *center, r: *r }),
            ClosedSet::HalfPlane { normal, offset } => {
                out.push(Boundary::Line { normal: normal.normalized(), offset: offset / normal.norm() })
            }
            ClosedSet::Point(p) => out.push(Boundary::Pt(*p)),
            ClosedSet::Union(parts) | ClosedSet::Intersection(parts) => {
                for s in parts {
                    s.collect_boundaries(out);
                }
            }
            ClosedSet::Complement(inner) => inner.collect_boundaries(out),
            ClosedSet::Difference(a, b) => {
                a.collect_boundaries(out);
                b.collect_boundaries(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Boundary {
    Circle { center: Point2, r: f64 },
    Line { normal: Vec2, offset: f64 },
    Pt(Point2),
}

/// Precomputed geometry for exact distance queries against one set.
#[derive(Debug, Clone)]
pub struct SetGeometry {
    pub set: ClosedSet,
    boundaries: Vec<Boundary>,
    /// Pairwise boundary intersections that belong to the (closed) set.
    corners: Vec<Point2>,
}

const MEMBER_TOL: f64 = 1e-9;

impl SetGeometry {
    pub fn new(set: ClosedSet) -> SetGeometry {
        let mut boundaries = Vec::new();
        set.collect_boundaries(&mut boundaries);
        let mut corners = Vec::new();
        for i in 0..boundaries.len() {
            for j in (i + 1)..boundaries.len() {
                for p in intersect(&boundaries[i], &boundaries[j]) {
                    if set.contains(p, MEMBER_TOL) {
                        corners.push(p);
                    }
                }
            }
        }
        SetGeometry { set, boundaries, corners }
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.set.contains(p, tol)
    }

    /// d(N, x) = inf_{p in N} d(p, x) for a locally Minkowski metric
    /// (d(p, x) = F(x - p)). Returns None for unsupported metric kinds.
    pub fn dist_from(&self, m: &MetricField, x: Point2) -> Option<f64> {
        match m {
            MetricField::FlatTorus { lx, ly } => {
                // the set lives on the torus; minimize over translates of x
                let mut best = f64::INFINITY;
                for i in -2..=2 {
                    for j in -2..=2 {
                        let xx = Point2::new(x.x + i as f64 * lx, x.y + j as f64 * ly);
                        best = best.min(self.dist_from_planar(&MetricField::Euclidean, xx));
                    }
                }
                Some(best)
            }
            _ if m.is_locally_minkowski() => Some(self.dist_from_planar(m, x)),
            _ => None,
        }
    }

    /// d(x, N) = inf_{p in N} d(x, p): reverse the norm and reuse.
    pub fn dist_to(&self, m: &MetricField, x: Point2) -> Option<f64> {
        self.dist_from(&m.reverse(), x)
    }

    fn dist_from_planar(&self, m: &MetricField, x: Point2) -> f64 {
        if self.set.contains(x, 0.0) {
            return 0.0;
        }
        let cost = |p: Point2| m.norm(p, p.to(x));
        let mut best = f64::INFINITY;
        for b in &self.boundaries {
            match b {
                Boundary::Pt(p) => {
                    if self.set.contains(*p, MEMBER_TOL) {
                        best = best.min(cost(*p));
                    }
                }
                Boundary::Circle { center, r } => {
                    for p in circle_min_candidates(m, *center, *r, x) {
                        if self.set.contains(p, MEMBER_TOL) {
                            best = best.min(cost(p));
                        }
                    }
                }
                Boundary::Line { normal, offset } => {
                    for p in line_min_candidates(m, *normal, *offset, x) {
                        if self.set.contains(p, MEMBER_TOL) {
                            best = best.min(cost(p));
                        }
                    }
                }
            }
        }
        for c in &self.corners {
            best = best.min(cost(*c));
        }
        best
    }
}

/// Minimizers of F(x - p) over p on a circle. Euclidean norms have the
/// radial projection in closed form; general Minkowski norms get a coarse
/// angular scan with golden refinement of each basin.
fn circle_min_candidates(m: &MetricField, center: Point2, r: f64, x: Point2) -> Vec<Point2> {
    let euclid = matches!(m, MetricField::Euclidean | MetricField::FlatTorus { .. });
    if euclid {
        let d = center.to(x);
        if d.norm() < 1e-300 {
            return vec![Point2::new(center.x + r, center.y)];
        }
        return vec![center.offset(d.normalized().scale(r))];
    }
    let value = |theta: f64| {
        let p = center.offset(Vec2::from_angle(theta).scale(r));
        m.norm(p, p.to(x))
    };
    let n = 48;
    let vals: Vec<f64> = (0..n)
        .map(|k| value(std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    let mut out = Vec::new();
    for k in 0..n {
        let prev = vals[(k + n - 1) % n];
        let next = vals[(k + 1) % n];
        if vals[k] <= prev && vals[k] <= next {
            let t0 = std::f64::consts::TAU * (k as f64 - 1.0) / n as f64;
            let t1 = std::f64::consts::TAU * (k as f64 + 1.0) / n as f64;
            let (theta, _) = golden_min(t0, t1, 60, value);
            out.push(center.offset(Vec2::from_angle(theta).scale(r)));
        }
    }
    out
}

/// Minimizers of F(x - p) over p on the line <n, p> = c.
fn line_min_candidates(m: &MetricField, normal: Vec2, offset: f64, x: Point2) -> Vec<Point2> {
    let n = normal.normalized();
    let foot = Point2::new(
        x.x - (n.dot(Vec2::new(x.x, x.y)) - offset) * n.x,
        x.y - (n.dot(Vec2::new(x.x, x.y)) - offset) * n.y,
    );
    let euclid = matches!(m, MetricField::Euclidean | MetricField::FlatTorus { .. });
    if euclid {
        return vec![foot];
    }
    let tangent = n.perp();
    let span = 4.0 * (x.chart_dist(foot) + 1.0);
    let value = |t: f64| {
        let p = foot.offset(tangent.scale(t));
        m.norm(p, p.to(x))
    };
    let (t, _) = golden_min(-span, span, 80, value);
    vec![foot.offset(tangent.scale(t))]
}

fn intersect(a: &Boundary, b: &Boundary) -> Vec<Point2> {
    match (a, b) {
        (Boundary::Circle { center: c1, r: r1 }, Boundary::Circle { center: c2, r: r2 }) => {
            circle_circle(*c1, *r1, *c2, *r2)
        }
        (Boundary::Circle { center, r }, Boundary::Line { normal, offset })
        | (Boundary::Line { normal, offset }, Boundary::Circle { center, r }) => {
            circle_line(*center, *r, *normal, *offset)
        }
        (Boundary::Line { normal: n1, offset: o1 }, Boundary::Line { normal: n2, offset: o2 }) => {
            line_line(*n1, *o1, *n2, *o2)
        }
        _ => vec![],
    }
}

fn circle_circle(c1: Point2, r1: f64, c2: Point2, r2: f64) -> Vec<Point2> {
    let d = c1.to(c2);
    let dist = d.norm();
    if dist < 1e-14 || dist > r1 + r2 || dist < (r1 - r2).abs() {
        return vec![];
    }
    let a = (r1 * r1 - r2 * r2 + dist * dist) / (2.0 * dist);
    let h2 = r1 * r1 - a * a;
    if h2 < 0.0 {
        return vec![];
    }
    let h = h2.sqrt();
    let mid = c1.offset(d.normalized().scale(a));
    let perp = d.normalized().perp();
    vec![mid.offset(perp.scale(h)), mid.offset(perp.scale(-h))]
}

fn circle_line(c: Point2, r: f64, normal: Vec2, offset: f64) -> Vec<Point2> {
    let n = normal.normalized();
    let dist = n.dot(Vec2::new(c.x, c.y)) - offset;
    if dist.abs() > r {
        return vec![];
    }
    let foot = Point2::new(c.x - dist * n.x, c.y - dist * n.y);
    let h = (r * r - dist * dist).max(0.0).sqrt();
    let t = n.perp();
    vec![foot.offset(t.scale(h)), foot.offset(t.scale(-h))]
}

fn line_line(n1: Vec2, o1: f64, n2: Vec2, o2: f64) -> Vec<Point2> {
    let det = n1.x * n2.y - n1.y * n2.x;
    if det.abs() < 1e-14 {
        return vec![];
    }
    vec![Point2::new((o1 * n2.y - o2 * n1.y) / det, (n1.x * o2 - n2.x * o1) / det)]
}

/// Helper for scenario builders: validate a nonempty set.
pub fn require_nonempty(set: &ClosedSet, window: &crate::geom::Window) -> Result<()> {
    if set.nonempty_on_grid(window, 64) {
        Ok(())
    } else {
        Err(Error::InvalidInput("set is empty within the window".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Window;

    #[test]
    fn unit_disk_distance() {
        let g = SetGeometry::new(ClosedSet::disk(0.0, 0.0, 1.0));
        let m = MetricField::Euclidean;
        assert_eq!(g.dist_from(&m, Point2::new(2.0, 0.0)).unwrap(), 1.0);
        assert_eq!(g.dist_from(&m, Point2::new(0.3, 0.2)).unwrap(), 0.0);
    }

    #[test]
    fn two_point_set_distance() {
        let set = ClosedSet::union(vec![ClosedSet::point(-1.0, 0.0), ClosedSet::point(1.0, 0.0)]);
        let g = SetGeometry::new(set);
        let m = MetricField::Euclidean;
        let d = g.dist_from(&m, Point2::new(0.0, 1.0)).unwrap();
        assert!((d - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn randers_point_set_asymmetry() {
        let m = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let g = SetGeometry::new(ClosedSet::point(0.0, 0.0));
        // from the set: d(o, x); to the set: d(x, o)
        let from = g.dist_from(&m, Point2::new(1.0, 0.0)).unwrap();
        let to = g.dist_to(&m, Point2::new(1.0, 0.0)).unwrap();
        assert!((from - 2.0 / 3.0).abs() < 1e-12);
        assert!((to - 2.0).abs() < 1e-12);
    }

    #[test]
    fn disk_minus_disk_corner_governs() {
        // unit disk with a bite removed around (1, 0): queries beyond the
        // bite see the rim corners
        let bite = ClosedSet::disk(1.0, 0.0, 0.5);
        let set = ClosedSet::difference(ClosedSet::disk(0.0, 0.0, 1.0), bite.clone());
        let g = SetGeometry::new(set.clone());
        let m = MetricField::Euclidean;
        // the radial foot (1,0) is removed; nearest surviving points are the
        // circle-circle corners
        let corners = circle_circle(Point2::new(0.0, 0.0), 1.0, Point2::new(1.0, 0.0), 0.5);
        assert_eq!(corners.len(), 2);
        let q = Point2::new(2.0, 0.0);
        let want = corners.iter().map(|c| c.chart_dist(q)).fold(f64::INFINITY, f64::min);
        let got = g.dist_from(&m, q).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!(got > 1.0);
        // membership: the bite is open, its boundary arc inside the disk stays
        assert!(set.contains(Point2::new(0.5, 0.0), 1e-12));
        assert!(!set.contains(Point2::new(0.9, 0.0), 0.0));
    }

    #[test]
    fn torus_point_set() {
        let m = MetricField::flat_torus(1.0, 1.0).unwrap();
        let g = SetGeometry::new(ClosedSet::point(0.0, 0.0));
        let d = g.dist_from(&m, Point2::new(0.75, 0.0)).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn halfplane_distance() {
        // { x <= 0 }
        let set = ClosedSet::HalfPlane { normal: Vec2::new(1.0, 0.0), offset: 0.0 };
        let g = SetGeometry::new(set);
        let m = MetricField::Euclidean;
        assert!((g.dist_from(&m, Point2::new(3.0, 5.0)).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(g.dist_from(&m, Point2::new(-0.1, 2.0)).unwrap(), 0.0);
    }

    #[test]
    fn nonempty_probe() {
        let w = Window::square(4.0);
        assert!(require_nonempty(&ClosedSet::disk(0.0, 0.0, 1.0), &w).is_ok());
        let far = ClosedSet::disk(100.0, 0.0, 1.0);
        assert!(require_nonempty(&far, &w).is_err());
    }
}
