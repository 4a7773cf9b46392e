//! Clarke generalized differentials of almost distance fields, critical
//! points and values, and level-set extraction.
//!
//! At a point p the generalized differential is the convex hull of the
//! covectors g_w(w, .) over the F-unit velocities w of f-geodesics through
//! p; the direction fan supplies those velocities. A point is critical when
//! the zero covector lies in (or within tolerance of) the hull. Critical
//! values are covered by intervals to produce a measure upper bound whose
//! decay under cover refinement is the observable content of the Sard-type
//! statement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgeod::DirectionFan;
use crate::field::ScalarField;
use crate::geom::{Point2, Vec2, Window};
use crate::march::Grid;
use crate::metric::MetricField;
use crate::singular::{extract_singular_locus, SingularGraph};

/// Default hull tolerance for criticality, in dual-norm units.
pub const CRITICAL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Covector2 {
    pub base: Point2,
    pub components: Vec2,
}

impl Covector2 {
    pub fn apply(&self, v: Vec2) -> f64 {
        self.components.dot(v)
    }
}

/// Covector g_w(w, .) of an F-unit velocity w at p.
pub fn flag_covector(m: &MetricField, p: Point2, w: Vec2) -> Covector2 {
    let g = m.tensor(p, w);
    Covector2 { base: p, components: g.apply(w) }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClarkeDifferential {
    pub base: Point2,
    pub generators: Vec<Covector2>,
    /// convex hull of the generator components, counterclockwise; may be a
    /// single point or a segment
    pub hull: Vec<Vec2>,
}

impl ClarkeDifferential {
    /// Distance from the zero covector to the hull (0 when inside).
    pub fn distance_to_zero(&self) -> f64 {
        dist_point_to_hull(Vec2::zero(), &self.hull)
    }
}

/// Build the generalized differential from a direction fan: every incoming
/// and outgoing f-geodesic contributes its velocity covector. Wide fan arcs
/// are sampled along their angular extent so the hull sees the whole arc.
pub fn generalized_differential(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    fan: &DirectionFan,
) -> Result<ClarkeDifferential> {
    let _ = f;
    if fan.incoming.is_empty() && fan.outgoing.is_empty() {
        return Err(Error::DomainError(
            "empty direction fan: almost-distance property violated at this point".into(),
        ));
    }
    let mut dirs: Vec<Vec2> = Vec::new();
    for cluster in fan.incoming.iter().chain(fan.outgoing.iter()) {
        dirs.push(cluster.dir);
        let extent = cluster.angular_extent();
        if extent > 0.02 {
            let steps = ((extent / 0.02).ceil() as usize).min(64);
            for k in 0..=steps {
                let th = cluster.arc_lo + extent * k as f64 / steps as f64;
                if let Ok(u) = m.unit_vector(p, Vec2::from_angle(th)) {
                    dirs.push(u);
                }
            }
        }
    }
    // dedup by angle
    let mut kept: Vec<Vec2> = Vec::new();
    for d in dirs {
        if kept.iter().all(|k| crate::geom::angle_between(*k, d) > 1e-4) {
            kept.push(d);
        }
    }
    let generators: Vec<Covector2> = kept.iter().map(|w| flag_covector(m, p, *w)).collect();
    let hull = convex_hull(generators.iter().map(|g| g.components).collect());
    Ok(ClarkeDifferential { base: p, generators, hull })
}

/// True when the zero covector lies within `tol` of the hull.
pub fn is_critical(cd: &ClarkeDifferential, tol: f64) -> bool {
    cd.distance_to_zero() <= tol
}

/// Andrew monotone chain; returns CCW hull vertices (0, 1 or 2 points pass
/// through unchanged).
pub fn convex_hull(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-15 && (a.y - b.y).abs() < 1e-15);
    let n = pts.len();
    if n <= 2 {
        return pts;
    }
    let cross = |o: Vec2, a: Vec2, b: Vec2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut lower: Vec<Vec2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn dist_point_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b.sub(a);
    let t = if ab.norm2() > 0.0 { p.sub(a).dot(ab) / ab.norm2() } else { 0.0 };
    let t = t.clamp(0.0, 1.0);
    p.sub(a.add(ab.scale(t))).norm()
}

/// Distance from a point to a convex polygon (0 inside).
pub fn dist_point_to_hull(p: Vec2, hull: &[Vec2]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => p.sub(hull[0]).norm(),
        2 => dist_point_to_segment(p, hull[0], hull[1]),
        _ => {
            let mut inside = true;
            let mut best = f64::INFINITY;
            for k in 0..hull.len() {
                let a = hull[k];
                let b = hull[(k + 1) % hull.len()];
                let cr = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
                if cr < 0.0 {
                    inside = false;
                }
                best = best.min(dist_point_to_segment(p, a, b));
            }
            if inside {
                0.0
            } else {
                best
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalValueEstimate {
    pub critical_points: Vec<Point2>,
    pub critical_values: Vec<f64>,
    pub cover_width: f64,
    /// total length of the union of cover intervals at `cover_width`
    pub measure_upper_bound: f64,
    /// (width, bound) pairs along the refinement schedule width, width/2, width/4
    pub refinement: Vec<(f64, f64)>,
    pub locus_nodes: usize,
}

/// Union length of intervals of the given width centered at the values.
pub fn cover_length(values: &[f64], width: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut vs = values.to_vec();
    vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    let mut lo = vs[0] - 0.5 * width;
    let mut hi = vs[0] + 0.5 * width;
    for &v in &vs[1..] {
        let (a, b) = (v - 0.5 * width, v + 0.5 * width);
        if a > hi {
            total += hi - lo;
            lo = a;
            hi = b;
        } else {
            hi = hi.max(b);
        }
    }
    total + (hi - lo)
}

/// Estimate the measure of the critical-value set: extract the singular
/// locus, confirm critical points (0 in the Clarke hull) at locus vertices
/// and along-edge extrema of f, and cover their values with intervals.
pub fn estimate_critical_values(
    f: &ScalarField,
    m: &MetricField,
    window: Window,
    grid_n: usize,
    delta_cover: f64,
) -> Result<CriticalValueEstimate> {
    if grid_n < 16 {
        return Err(Error::Precondition("grid_n must be >= 16".into()));
    }
    if !(delta_cover > 0.0) {
        return Err(Error::Precondition("delta_cover must be positive".into()));
    }
    let delta = crate::fgeod::default_probe_len(&window);
    let graph = extract_singular_locus(f, m, window, grid_n, delta, 360)?;
    let crits = critical_points_on_graph(f, m, &graph, delta)?;
    let values: Vec<f64> = crits.iter().map(|p| f.eval(*p)).collect();
    let bound = cover_length(&values, delta_cover);
    let refinement = vec![
        (delta_cover, bound),
        (delta_cover / 2.0, cover_length(&values, delta_cover / 2.0)),
        (delta_cover / 4.0, cover_length(&values, delta_cover / 4.0)),
    ];
    Ok(CriticalValueEstimate {
        critical_points: crits,
        critical_values: values,
        cover_width: delta_cover,
        measure_upper_bound: bound,
        refinement,
        locus_nodes: graph.node_count(),
    })
}

/// Critical points of f restricted to an extracted locus graph: interior
/// extrema of f along edges and graph vertices, each refined onto the
/// exact critical point and confirmed via its Clarke hull.
///
/// Refinement is two-stage: first transversally onto the crease (upper
/// loci are transversal ridges of f, lower loci valleys), then along the
/// local tangent to the extremum of f restricted to the locus. Vertices
/// additionally try plain 2-D extremum polish, which captures corner
/// maxima/minima like cut-locus junctions.
pub fn critical_points_on_graph(
    f: &ScalarField,
    m: &MetricField,
    graph: &SingularGraph,
    delta: f64,
) -> Result<Vec<Point2>> {
    let span = 3.0 * graph.grid_spacing;
    let line_extremum = |p: Point2, dir: Vec2, maximum: bool| -> Point2 {
        let (s, _) = crate::geom::golden_min(-span, span, 48, |s| {
            let v = f.eval(p.offset(dir.scale(s)));
            if maximum {
                -v
            } else {
                v
            }
        });
        p.offset(dir.scale(s))
    };
    let polish_2d = |mut p: Point2, maximum: bool| -> Point2 {
        for _ in 0..3 {
            p = line_extremum(p, Vec2::new(1.0, 0.0), maximum);
            p = line_extremum(p, Vec2::new(0.0, 1.0), maximum);
        }
        p
    };

    let mut candidates: Vec<Point2> = Vec::new();
    for &v in &graph.vertices {
        let p = graph.nodes[v].pos;
        candidates.push(p);
        candidates.push(polish_2d(p, true));
        candidates.push(polish_2d(p, false));
    }
    for e in &graph.edges {
        if e.chain.len() < 5 {
            continue;
        }
        let transversal_max = e.label == crate::singular::SingularLabel::UpperSingular;
        // smoothed field values along the chain
        let vals: Vec<f64> = e.chain.iter().map(|&i| graph.nodes[i].value).collect();
        let smooth: Vec<f64> = (0..vals.len())
            .map(|k| {
                let lo = k.saturating_sub(2);
                let hi = (k + 2).min(vals.len() - 1);
                vals[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        for k in 1..smooth.len() - 1 {
            // plateau-tolerant local extrema: symmetric chains produce
            // exactly flat pairs at the bottom of a valley
            let le = smooth[k] <= smooth[k - 1] && smooth[k] <= smooth[k + 1];
            let ge = smooth[k] >= smooth[k - 1] && smooth[k] >= smooth[k + 1];
            let strict_min =
                le && (smooth[k] < smooth[k - 1] || smooth[k] < smooth[k + 1]);
            let strict_max =
                ge && (smooth[k] > smooth[k - 1] || smooth[k] > smooth[k + 1]);
            if strict_min || strict_max {
                let mut p = graph.nodes[e.chain[k]].pos;
                let a = graph.nodes[e.chain[k - 1]].pos;
                let b = graph.nodes[e.chain[k + 1]].pos;
                let tangent = a.to(b).normalized();
                let normal = tangent.perp();
                let maximum = strict_max;
                // end on the transversal polish: the hull test needs the
                // candidate on the crease to machine precision, while the
                // along-locus position only enters through the value
                for _ in 0..2 {
                    p = line_extremum(p, tangent, maximum);
                    p = line_extremum(p, normal, transversal_max);
                }
                candidates.push(p);
            }
        }
    }
    let mut out: Vec<Point2> = Vec::new();
    for p in candidates {
        let fan = crate::fgeod::direction_fan(f, m, p, delta, 360);
        if fan.incoming.is_empty() && fan.outgoing.is_empty() {
            continue;
        }
        let cd = generalized_differential(f, m, p, &fan)?;
        if is_critical(&cd, CRITICAL_TOL) {
            // dedup by proximity
            if out.iter().all(|q| q.chart_dist(p) > 2.0 * graph.grid_spacing) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelComponent {
    pub polyline: Vec<Point2>,
    pub closed: bool,
    pub regular: bool,
    pub simple: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelSet {
    pub value: f64,
    pub components: Vec<LevelComponent>,
}

/// Marching-squares contour of f at level t. Components are flagged regular
/// when no supplied critical point lies within two grid cells of them.
pub fn extract_level_set(
    f: &ScalarField,
    window: Window,
    grid_n: usize,
    t: f64,
    critical_points: &[Point2],
) -> Result<LevelSet> {
    if grid_n < 8 {
        return Err(Error::Precondition("grid_n must be >= 8".into()));
    }
    if !(t > f.inf_est && t < f.sup_est) {
        return Err(Error::Precondition(format!(
            "level {t} outside the estimated range [{}, {}]",
            f.inf_est, f.sup_est
        )));
    }
    let grid = Grid::from_fn(window, grid_n, grid_n, |p| f.eval(p));
    let h = grid.spacing();

    // segments between interpolated points on cell edges, keyed by edge ids
    #[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
    struct EdgeKey {
        i: usize,
        j: usize,
        horizontal: bool,
    }
    let interp = |a: Point2, va: f64, b: Point2, vb: f64| -> Point2 {
        let w = if (vb - va).abs() > 1e-300 { (t - va) / (vb - va) } else { 0.5 };
        let w = w.clamp(0.0, 1.0);
        Point2::new(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y))
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    let mut points: std::collections::HashMap<EdgeKey, Point2> = Default::default();
    for j in 0..grid_n - 1 {
        for i in 0..grid_n - 1 {
            let p00 = grid.point(i, j);
            let p10 = grid.point(i + 1, j);
            let p11 = grid.point(i + 1, j + 1);
            let p01 = grid.point(i, j + 1);
            let v00 = grid.get(i, j) - t;
            let v10 = grid.get(i + 1, j) - t;
            let v11 = grid.get(i + 1, j + 1) - t;
            let v01 = grid.get(i, j + 1) - t;
            let mut case = 0u8;
            if v00 >= 0.0 {
                case |= 1;
            }
            if v10 >= 0.0 {
                case |= 2;
            }
            if v11 >= 0.0 {
                case |= 4;
            }
            if v01 >= 0.0 {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }
            let bottom = EdgeKey { i, j, horizontal: true };
            let top = EdgeKey { i, j: j + 1, horizontal: true };
            let left = EdgeKey { i, j, horizontal: false };
            let right = EdgeKey { i: i + 1, j, horizontal: false };
            let mut put = |k: EdgeKey, p: Point2| {
                points.entry(k).or_insert(p);
            };
            let pb = interp(p00, v00 + t, p10, v10 + t);
            let pt = interp(p01, v01 + t, p11, v11 + t);
            let pl = interp(p00, v00 + t, p01, v01 + t);
            let pr = interp(p10, v10 + t, p11, v11 + t);
            let mut link = |a: EdgeKey, pa: Point2, b: EdgeKey, pb: Point2| {
                put(a, pa);
                put(b, pb);
                segments.push((a, b));
            };
            match case {
                1 | 14 => link(bottom, pb, left, pl),
                2 | 13 => link(bottom, pb, right, pr),
                3 | 12 => link(left, pl, right, pr),
                4 | 11 => link(top, pt, right, pr),
                6 | 9 => link(bottom, pb, top, pt),
                7 | 8 => link(top, pt, left, pl),
                5 | 10 => {
                    // saddle: resolve by the cell-center sample
                    let center = f.eval(Point2::new(
                        0.5 * (p00.x + p11.x),
                        0.5 * (p00.y + p11.y),
                    )) - t;
                    let pos_center = center >= 0.0;
                    if (case == 5) == pos_center {
                        link(bottom, pb, right, pr);
                        link(top, pt, left, pl);
                    } else {
                        link(bottom, pb, left, pl);
                        link(top, pt, right, pr);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // chain assembly: each edge key touches at most two segments on a
    // simple contour
    use std::collections::HashMap;
    let mut adj: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (si, (a, b)) in segments.iter().enumerate() {
        adj.entry(*a).or_default().push(si);
        adj.entry(*b).or_default().push(si);
    }
    let mut simple_ok: HashMap<EdgeKey, bool> = HashMap::new();
    for (k, v) in &adj {
        simple_ok.insert(*k, v.len() <= 2);
    }
    let mut seg_used = vec![false; segments.len()];
    let mut components: Vec<LevelComponent> = Vec::new();
    for start in 0..segments.len() {
        if seg_used[start] {
            continue;
        }
        // walk both ways from this segment
        let mut chain: Vec<EdgeKey> = vec![segments[start].0, segments[start].1];
        seg_used[start] = true;
        let mut simple = true;
        // extend forward
        loop {
            let tail = *chain.last().unwrap();
            if !simple_ok[&tail] {
                simple = false;
            }
            let next = adj[&tail].iter().copied().find(|&s| !seg_used[s]);
            match next {
                None => break,
                Some(s) => {
                    seg_used[s] = true;
                    let (a, b) = segments[s];
                    chain.push(if a == tail { b } else { a });
                }
            }
        }
        // extend backward
        loop {
            let head = chain[0];
            if !simple_ok[&head] {
                simple = false;
            }
            let next = adj[&head].iter().copied().find(|&s| !seg_used[s]);
            match next {
                None => break,
                Some(s) => {
                    seg_used[s] = true;
                    let (a, b) = segments[s];
                    chain.insert(0, if a == head { b } else { a });
                }
            }
        }
        let closed = chain.len() > 2 && chain.first() == chain.last();
        let polyline: Vec<Point2> = chain.iter().map(|k| points[k]).collect();
        // Regularity: a component is suspect when a critical point at this
        // level sits nearby. Contours at a critical value are quadratically
        // flat at the pinch, so the closest resolved approach scales like
        // sqrt(h); the pinch radius accounts for that.
        let pinch_radius = 2.0 * h + (8.0 * h).sqrt();
        let regular = critical_points.iter().all(|c| {
            (f.eval(*c) - t).abs() > 2.0 * h
                || polyline.iter().all(|p| c.chart_dist(*p) > pinch_radius)
        });
        components.push(LevelComponent { polyline, closed, regular, simple });
    }
    Ok(LevelSet { value: t, components })
}

/// Chain rule along a curve inside the singular locus: at a parameter where
/// both the curve and f o c are differentiable, (f o c)'(t0) equals
/// omega_p(gamma)(c'(t0)) for every f-geodesic gamma through p = c(t0).
/// Returns the worst mismatch over the fan.
pub fn chain_rule_check(
    f: &ScalarField,
    m: &MetricField,
    curve: &[Point2],
    t0_index: usize,
) -> Result<f64> {
    if curve.len() < 3 || t0_index == 0 || t0_index + 1 >= curve.len() {
        return Err(Error::Precondition("need an interior polyline parameter".into()));
    }
    let prev = curve[t0_index - 1];
    let p = curve[t0_index];
    let next = curve[t0_index + 1];
    // arclength-normalized tangent and derivative by central differences
    let ds = prev.chart_dist(p) + p.chart_dist(next);
    if !(ds > 0.0) {
        return Err(Error::Precondition("degenerate polyline step".into()));
    }
    let tangent = prev.to(next).scale(1.0 / ds);
    let dfdt = (f.eval(next) - f.eval(prev)) / ds;
    let fan = crate::fgeod::direction_fan(
        f,
        m,
        p,
        crate::fgeod::default_probe_len(f.window()),
        crate::fgeod::DEFAULT_ANGULAR_RES,
    );
    if fan.incoming.is_empty() && fan.outgoing.is_empty() {
        return Err(Error::DomainError("empty fan on the curve".into()));
    }
    let mut worst: f64 = 0.0;
    for cluster in fan.incoming.iter().chain(fan.outgoing.iter()) {
        let om = flag_covector(m, p, cluster.dir);
        worst = worst.max((dfdt - om.apply(tangent)).abs());
    }
    Ok(worst)
}

/// Criticality restricted to extracted singular edges: per-edge critical
/// value covers (the 1-D Sard surrogate along locus curves).
pub fn per_edge_cover(
    f: &ScalarField,
    m: &MetricField,
    graph: &SingularGraph,
    delta: f64,
    delta_cover: f64,
) -> Result<Vec<(usize, f64)>> {
    let crits = critical_points_on_graph(f, m, graph, delta)?;
    let mut out = Vec::new();
    for (ei, e) in graph.edges.iter().enumerate() {
        let vals: Vec<f64> = crits
            .iter()
            .filter(|c| {
                e.polyline
                    .iter()
                    .any(|p| p.chart_dist(**c) <= 2.0 * graph.grid_spacing)
            })
            .map(|c| f.eval(*c))
            .collect();
        out.push((ei, cover_length(&vals, delta_cover)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::ClosedSet;
    use crate::fgeod::direction_fan;
    use crate::field::dist_from_set;

    fn two_point() -> (ScalarField, MetricField, Window) {
        let m = MetricField::Euclidean;
        let w = Window::square(4.0);
        let set = ClosedSet::union(vec![ClosedSet::point(-1.0, 0.0), ClosedSet::point(1.0, 0.0)]);
        (dist_from_set(&m, set, w).unwrap(), m, w)
    }

    #[test]
    fn hull_of_two_point_generators() {
        let (f, m, _) = two_point();
        // at (0,1): incoming from both points, directions (1,1)/sqrt2 and (-1,1)/sqrt2
        let p = Point2::new(0.0, 1.0);
        let fan = direction_fan(&f, &m, p, 0.1, 720);
        let cd = generalized_differential(&f, &m, p, &fan).unwrap();
        assert!(cd.generators.len() >= 2);
        let d = cd.distance_to_zero();
        let want = 1.0 / 2.0_f64.sqrt();
        assert!((d - want).abs() < 1e-3, "distance {d} vs {want}");
        assert!(!is_critical(&cd, CRITICAL_TOL));

        // at the midpoint the generators are antipodal: critical
        let p0 = Point2::new(0.0, 0.0);
        let fan = direction_fan(&f, &m, p0, 0.1, 720);
        let cd = generalized_differential(&f, &m, p0, &fan).unwrap();
        assert!(is_critical(&cd, CRITICAL_TOL), "dist {}", cd.distance_to_zero());
    }

    #[test]
    fn differentiable_point_hull_matches_fd() {
        let m = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let w = Window::square(4.0);
        let f = dist_from_set(&m, ClosedSet::point(0.0, 0.0), w).unwrap();
        let p = Point2::new(1.1, 0.7);
        let fan = direction_fan(&f, &m, p, 0.08, 720);
        let cd = generalized_differential(&f, &m, p, &fan).unwrap();
        assert_eq!(cd.hull.len(), 1, "singleton fan gives a point hull");
        let fd = f.differential(p, None);
        assert!(
            cd.hull[0].sub(fd).norm() < 1e-3,
            "{:?} vs fd {:?}",
            cd.hull[0],
            fd
        );
        // generator covectors have unit dual norm
        let (dual, _) = m.dual_norm(p, cd.generators[0].components);
        assert!((dual - 1.0).abs() < 1e-6);
    }

    #[test]
    fn is_critical_synthetic_cases() {
        let base = Point2::new(0.0, 0.0);
        let mk = |pts: Vec<Vec2>| ClarkeDifferential {
            base,
            generators: pts.iter().map(|c| Covector2 { base, components: *c }).collect(),
            hull: convex_hull(pts.clone()),
        };
        // singleton unit covector
        let cd = mk(vec![Vec2::new(1.0, 0.0)]);
        assert!(!is_critical(&cd, CRITICAL_TOL));
        // antipodal pair
        let cd = mk(vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)]);
        assert!(is_critical(&cd, CRITICAL_TOL));
        // 90 degrees apart: misses zero by sqrt(2)/2
        let cd = mk(vec![Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        let d = cd.distance_to_zero();
        assert!((d - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(!is_critical(&cd, CRITICAL_TOL));
        // monotonicity in the tolerance
        assert!(!is_critical(&cd, 1e-4));
    }

    #[test]
    fn two_point_sard_estimate() {
        let (f, m, w) = two_point();
        let est = estimate_critical_values(&f, &m, w, 128, 1e-2).unwrap();
        // the bisector saddle at value 1 plus the two site minima at value 0
        assert!(
            est.critical_values.iter().any(|v| (v - 1.0).abs() < 0.02),
            "saddle missing: {:?}",
            est.critical_values
        );
        for v in &est.critical_values {
            assert!(
                v.abs() < 0.02 || (v - 1.0).abs() < 0.02,
                "spurious critical value {v}: {:?}",
                est.critical_values
            );
        }
        // distinct values {0, 1}: the union cover is at most two intervals
        assert!(est.measure_upper_bound <= 2.0 * 1e-2 + 1e-9);
        // refinement trend is nonincreasing
        assert!(est.refinement[1].1 <= est.refinement[0].1 + 1e-9);
        assert!(est.refinement[2].1 <= est.refinement[1].1 + 1e-9);
    }

    #[test]
    fn euclid_do_estimate_away_from_origin_is_zero() {
        let m = MetricField::Euclidean;
        let w = Window::new(0.5, 4.5, 0.5, 4.5); // excludes the origin
        let f = dist_from_set(&m, ClosedSet::point(0.0, 0.0), Window::square(6.0)).unwrap();
        let est = estimate_critical_values(&f, &m, w, 96, 1e-2).unwrap();
        assert_eq!(est.critical_points.len(), 0);
        assert_eq!(est.measure_upper_bound, 0.0);
    }

    #[test]
    fn level_sets_of_two_point_field() {
        let (f, _, w) = two_point();
        let crit = vec![Point2::new(0.0, 0.0)];
        let ls = extract_level_set(&f, w, 256, 0.5, &crit).unwrap();
        assert_eq!(ls.components.len(), 2, "two circles at t = 0.5");
        for c in &ls.components {
            assert!(c.regular && c.simple && c.closed);
        }
        let ls = extract_level_set(&f, w, 256, 1.5, &crit).unwrap();
        assert_eq!(ls.components.len(), 1, "one merged contour at t = 1.5");
        assert!(ls.components[0].regular);
        // the critical level: the figure-eight component through the pinch
        // is flagged non-regular
        let ls = extract_level_set(&f, w, 256, 1.0, &crit).unwrap();
        assert!(!ls.components.is_empty());
        let near: Vec<&LevelComponent> = ls
            .components
            .iter()
            .filter(|c| c.polyline.iter().any(|p| p.chart_dist(Point2::new(0.0, 0.0)) < 0.5))
            .collect();
        assert!(!near.is_empty());
        for c in near {
            assert!(!c.regular);
        }
    }

    #[test]
    fn chain_rule_on_bisector() {
        let (f, m, _) = two_point();
        // vertical bisector sampled as a polyline
        let curve: Vec<Point2> = (0..61).map(|k| Point2::new(0.0, -1.5 + 0.05 * k as f64)).collect();
        // generic parameter: s = 1.0 -> index 50
        let res = chain_rule_check(&f, &m, &curve, 50).unwrap();
        assert!(res < 1e-3, "residual {res}");
        // critical parameter s = 0 -> index 30: both sides vanish
        let res0 = chain_rule_check(&f, &m, &curve, 30).unwrap();
        assert!(res0 < 1e-3, "residual {res0}");
        let p = curve[30];
        let fan = direction_fan(&f, &m, p, 0.1, 720);
        for cl in fan.incoming.iter() {
            let om = flag_covector(&m, p, cl.dir);
            assert!(om.apply(Vec2::new(0.0, 1.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn cover_length_merges_overlaps() {
        assert_eq!(cover_length(&[], 0.1), 0.0);
        assert!((cover_length(&[1.0], 0.1) - 0.1).abs() < 1e-15);
        assert!((cover_length(&[1.0, 1.02], 0.1) - 0.12).abs() < 1e-12);
        assert!((cover_length(&[1.0, 5.0], 0.1) - 0.2).abs() < 1e-15);
    }
}
