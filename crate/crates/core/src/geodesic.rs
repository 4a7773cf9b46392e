//! Geodesic integration (the exponential map), point-to-point distance with
//! minimizer enumeration, and the endpoint first-variation form.
//!
//! Distances dispatch on the metric kind: locally Minkowski structures have
//! the closed form d(p, q) = F(q - p) (lattice-minimized on the torus);
//! Riemannian tensor fields fall back to multi-start shooting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{angle_between, Point2, Vec2, Window};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplePoint {
    pub t: f64,
    pub pos: Point2,
    pub vel: Vec2,
}

/// A unit-speed geodesic with its sampled trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicSegment {
    pub metric_id: String,
    pub start: Point2,
    pub start_dir: Vec2,
    pub t0: f64,
    pub t1: f64,
    pub samples: Vec<SamplePoint>,
    /// Set when integration stopped at the computational window edge.
    pub truncated: bool,
}

impl GeodesicSegment {
    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }

    pub fn end_point(&self) -> Point2 {
        self.samples.last().expect("nonempty samples").pos
    }

    pub fn end_velocity(&self) -> Vec2 {
        self.samples.last().expect("nonempty samples").vel
    }

    pub fn start_point(&self) -> Point2 {
        self.samples.first().expect("nonempty samples").pos
    }

    /// Linear interpolation between stored samples.
    pub fn at(&self, t: f64) -> SamplePoint {
        let t = t.clamp(self.t0, self.t1);
        let idx = self
            .samples
            .binary_search_by(|s| s.t.partial_cmp(&t).unwrap())
            .unwrap_or_else(|i| i);
        if idx == 0 {
            return self.samples[0];
        }
        if idx >= self.samples.len() {
            return *self.samples.last().unwrap();
        }
        let a = &self.samples[idx - 1];
        let b = &self.samples[idx];
        let w = if b.t > a.t { (t - a.t) / (b.t - a.t) } else { 0.0 };
        SamplePoint {
            t,
            pos: Point2::new(a.pos.x + w * (b.pos.x - a.pos.x), a.pos.y + w * (b.pos.y - a.pos.y)),
            vel: a.vel.add(b.vel.sub(a.vel).scale(w)),
        }
    }

    /// Translate the parameter interval by dt (geodesics are preserved by
    /// parameter shifts).
    pub fn shift_parameter(&mut self, dt: f64) {
        self.t0 += dt;
        self.t1 += dt;
        for s in &mut self.samples {
            s.t += dt;
        }
    }

    /// Reverse orientation; the result is a geodesic of the reversed metric.
    pub fn reversed(&self) -> GeodesicSegment {
        let (t0, t1) = (self.t0, self.t1);
        let mut samples: Vec<SamplePoint> = self
            .samples
            .iter()
            .rev()
            .map(|s| SamplePoint { t: t0 + (t1 - s.t), pos: s.pos, vel: s.vel.neg() })
            .collect();
        if samples.is_empty() {
            samples.push(SamplePoint { t: t0, pos: self.start, vel: self.start_dir.neg() });
        }
        GeodesicSegment {
            metric_id: format!("reversed({})", self.metric_id),
            start: samples[0].pos,
            start_dir: samples[0].vel,
            t0,
            t1,
            samples,
            truncated: self.truncated,
        }
    }

    /// Max deviation of F(gamma, gamma') from 1 over the samples.
    pub fn unit_speed_residual(&self, m: &MetricField) -> f64 {
        self.samples
            .iter()
            .map(|s| (m.norm(s.pos, s.vel) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrate the geodesic ODE x'' = spray(x, x') by classical RK4 from an
/// F-unit initial direction; the parameter is arclength.
pub fn integrate_geodesic(
    m: &MetricField,
    start: Point2,
    dir: Vec2,
    length: f64,
    step: f64,
    window: Option<&Window>,
) -> Result<GeodesicSegment> {
    if !(length > 0.0) || !(step > 0.0) {
        return Err(Error::InvalidInput("length and step must be positive".into()));
    }
    if !start.is_finite() || !dir.is_finite() {
        return Err(Error::InvalidInput("non-finite initial data".into()));
    }
    let f0 = m.norm(start, dir);
    if (f0 - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "initial direction is not F-unit (F = {f0})"
        )));
    }

    let n_steps = (length / step).ceil().max(1.0) as usize;
    let h = length / n_steps as f64;
    let mut pos = start;
    let mut vel = dir;
    let mut samples = Vec::with_capacity(n_steps + 1);
    samples.push(SamplePoint { t: 0.0, pos, vel });
    let mut truncated = false;
    let accel = |p: Point2, v: Vec2| m.spray(p, v);

    for k in 0..n_steps {
        let (k1p, k1v) = (vel, accel(pos, vel));
        let p2 = pos.offset(k1p.scale(h * 0.5));
        let v2 = vel.add(k1v.scale(h * 0.5));
        let (k2p, k2v) = (v2, accel(p2, v2));
        let p3 = pos.offset(k2p.scale(h * 0.5));
        let v3 = vel.add(k2v.scale(h * 0.5));
        let (k3p, k3v) = (v3, accel(p3, v3));
        let p4 = pos.offset(k3p.scale(h));
        let v4 = vel.add(k3v.scale(h));
        let (k4p, k4v) = (v4, accel(p4, v4));
        pos = pos.offset(
            k1p.add(k2p.scale(2.0)).add(k3p.scale(2.0)).add(k4p).scale(h / 6.0),
        );
        vel = vel.add(k1v.add(k2v.scale(2.0)).add(k3v.scale(2.0)).add(k4v).scale(h / 6.0));
        let t = (k + 1) as f64 * h;
        samples.push(SamplePoint { t, pos, vel });
        if let Some(w) = window {
            if !m.is_torus() && !w.contains(pos) {
                truncated = true;
                break;
            }
        }
    }

    let t1 = samples.last().unwrap().t;
    Ok(GeodesicSegment {
        metric_id: m.id(),
        start,
        start_dir: dir,
        t0: 0.0,
        t1,
        samples,
        truncated,
    })
}

/// A variation field along a geodesic, one vector per sample.
#[derive(Debug, Clone)]
pub struct VariationProbe {
    pub base: GeodesicSegment,
    pub field: Vec<Vec2>,
}

impl VariationProbe {
    pub fn new(base: GeodesicSegment, field: Vec<Vec2>) -> Result<Self> {
        if field.len() != base.samples.len() {
            return Err(Error::InvalidInput(
                "variation field length must match sample count".into(),
            ));
        }
        Ok(VariationProbe { base, field })
    }
}

/// Endpoint form of the first variation of arclength along a geodesic base:
/// g at the far end minus g at the near end, each paired with the variation
/// vector there.
pub fn first_variation(m: &MetricField, probe: &VariationProbe) -> f64 {
    let a = probe.base.samples.first().unwrap();
    let b = probe.base.samples.last().unwrap();
    let ua = probe.field.first().unwrap();
    let ub = probe.field.last().unwrap();
    m.g_inner(b.pos, b.vel, b.vel, *ub) - m.g_inner(a.pos, a.vel, a.vel, *ua)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    Analytic,
    Shooting,
    GridMarching,
}

#[derive(Debug, Clone)]
pub struct DistanceResult {
    pub value: f64,
    pub minimizers: Vec<GeodesicSegment>,
    pub method: DistanceMethod,
    /// Set when the solver did not certify optimality; `value` is then an
    /// upper bound and `lower_bound` the certified floor.
    pub approximation: bool,
    pub lower_bound: f64,
}

#[derive(Debug, Clone)]
pub struct DistanceOpts {
    pub step: f64,
    pub shooting_starts: usize,
    pub newton_iters: usize,
    pub shooting_tol: f64,
    pub angle_tol: f64,
    pub length_tol: f64,
    /// Samples recorded per returned minimizer.
    pub segment_samples: usize,
}

impl Default for DistanceOpts {
    fn default() -> Self {
        DistanceOpts {
            step: 1e-3,
            shooting_starts: 64,
            newton_iters: 40,
            shooting_tol: 1e-7,
            angle_tol: 1e-2,
            length_tol: 1e-5,
            segment_samples: 32,
        }
    }
}

/// Straight chart segment from p toward q' of F-length L, sampled n times.
fn straight_segment(m: &MetricField, p: Point2, qq: Point2, n: usize) -> GeodesicSegment {
    let v = p.to(qq);
    let f = m.norm(p, v);
    let dir = v.scale(1.0 / f);
    let n = n.max(2);
    let samples = (0..n)
        .map(|k| {
            let t = f * (k as f64) / ((n - 1) as f64);
            SamplePoint { t, pos: p.offset(dir.scale(t)), vel: dir }
        })
        .collect();
    GeodesicSegment {
        metric_id: m.id(),
        start: p,
        start_dir: dir,
        t0: 0.0,
        t1: f,
        samples,
        truncated: false,
    }
}

/// Finslerian distance d(p, q) = inf over curves from p to q, with all
/// minimizers found by the active method. Asymmetric in general.
pub fn distance(m: &MetricField, p: Point2, q: Point2, opts: &DistanceOpts) -> Result<DistanceResult> {
    if !p.is_finite() || !q.is_finite() {
        return Err(Error::InvalidInput("non-finite endpoints".into()));
    }
    if p == q {
        return Ok(DistanceResult {
            value: 0.0,
            minimizers: vec![],
            method: DistanceMethod::Analytic,
            approximation: false,
            lower_bound: 0.0,
        });
    }
    match m {
        MetricField::Reversed(inner) => {
            let mut r = distance(inner, q, p, opts)?;
            r.minimizers = r.minimizers.iter().map(|s| s.reversed()).collect();
            for s in &mut r.minimizers {
                s.metric_id = m.id();
            }
            Ok(r)
        }
        MetricField::FlatTorus { lx, ly } => {
            let mut best = f64::INFINITY;
            let mut reps: Vec<Point2> = Vec::new();
            let range_x = ((p.to(q).norm() / lx).ceil() as i64) + 2;
            let range_y = ((p.to(q).norm() / ly).ceil() as i64) + 2;
            let range_x = range_x.max(3);
            let range_y = range_y.max(3);
            for i in -range_x..=range_x {
                for j in -range_y..=range_y {
                    let qq = Point2::new(q.x + i as f64 * lx, q.y + j as f64 * ly);
                    let d = p.to(qq).norm();
                    if d < best - opts.length_tol {
                        best = d;
                        reps.retain(|r| p.to(*r).norm() <= best + opts.length_tol);
                    }
                    if d <= best + opts.length_tol {
                        reps.push(qq);
                    }
                }
            }
            let minimizers = dedup_by_direction(
                reps.iter().map(|qq| straight_segment(m, p, *qq, opts.segment_samples)).collect(),
                opts.angle_tol,
            );
            Ok(DistanceResult {
                value: best,
                minimizers,
                method: DistanceMethod::Analytic,
                approximation: false,
                lower_bound: best,
            })
        }
        _ if m.is_locally_minkowski() => {
            let v = p.to(q);
            let value = m.norm(p, v);
            let minimizers = vec![straight_segment(m, p, q, opts.segment_samples)];
            Ok(DistanceResult {
                value,
                minimizers,
                method: DistanceMethod::Analytic,
                approximation: false,
                lower_bound: value,
            })
        }
        _ => shooting_distance(m, p, q, opts),
    }
}

fn dedup_by_direction(mut segs: Vec<GeodesicSegment>, angle_tol: f64) -> Vec<GeodesicSegment> {
    let mut out: Vec<GeodesicSegment> = Vec::new();
    segs.sort_by(|a, b| a.length().partial_cmp(&b.length()).unwrap());
    for s in segs {
        if out.iter().all(|o| angle_between(o.start_dir, s.start_dir) > angle_tol) {
            out.push(s);
        }
    }
    out
}

/// Multi-start shooting with damped Newton refinement on the endpoint map
/// (theta, L) -> exp_p(L theta).
fn shooting_distance(m: &MetricField, p: Point2, q: Point2, opts: &DistanceOpts) -> Result<DistanceResult> {
    let chart = p.to(q).norm();
    let shoot = |theta: f64, len: f64| -> Result<Point2> {
        let dir = m.unit_vector(p, Vec2::from_angle(theta))?;
        let seg = integrate_geodesic(m, p, dir, len.max(1e-9), opts.step.min(len / 8.0).max(1e-6), None)?;
        Ok(seg.end_point())
    };
    let mut solutions: Vec<(f64, f64)> = Vec::new(); // (theta, length)
    let mut best_miss: Option<(f64, f64, f64)> = None; // (residual, theta, length)

    for k in 0..opts.shooting_starts {
        let theta0 = std::f64::consts::TAU * (k as f64) / (opts.shooting_starts as f64);
        // scale the initial length guess by the norm factor along the start direction
        let dir0 = Vec2::from_angle(theta0);
        let scale = m.norm(p, dir0);
        let mut theta = theta0;
        let mut len = (chart * scale).max(1e-6);
        let mut converged = false;
        for _ in 0..opts.newton_iters {
            let end = shoot(theta, len)?;
            let res = end.to(q);
            let rn = res.norm();
            if rn < opts.shooting_tol {
                converged = true;
                break;
            }
            // finite-difference Jacobian
            let ht = 1e-6;
            let hl = 1e-6;
            let et = shoot(theta + ht, len)?;
            let el = shoot(theta, len + hl)?;
            let j11 = (et.x - end.x) / ht;
            let j21 = (et.y - end.y) / ht;
            let j12 = (el.x - end.x) / hl;
            let j22 = (el.y - end.y) / hl;
            let det = j11 * j22 - j12 * j21;
            if det.abs() < 1e-14 {
                break;
            }
            let dx = res.x;
            let dy = res.y;
            let dtheta = (dx * j22 - dy * j12) / det;
            let dlen = (dy * j11 - dx * j21) / det;
            // damped update
            let mut lam = 1.0;
            let mut improved = false;
            for _ in 0..8 {
                let nt = theta + lam * dtheta;
                let nl = len + lam * dlen;
                if nl > 0.0 {
                    let ne = shoot(nt, nl)?;
                    if ne.to(q).norm() < rn {
                        theta = nt;
                        len = nl;
                        improved = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let end = shoot(theta, len)?;
        let rn = end.to(q).norm();
        if converged || rn < opts.shooting_tol {
            solutions.push((theta, len));
        } else if best_miss.map_or(true, |(r, _, _)| rn < r) {
            best_miss = Some((rn, theta, len));
        }
    }

    // certified floor from the chart-comparability constant of the norm
    let c_min = {
        let mut c: f64 = f64::INFINITY;
        for pt in [p, q, Point2::new(0.5 * (p.x + q.x), 0.5 * (p.y + q.y))] {
            for k in 0..32 {
                let u = Vec2::from_angle(std::f64::consts::TAU * k as f64 / 32.0);
                c = c.min(m.norm(pt, u));
            }
        }
        c
    };
    let lower = c_min * chart;

    if solutions.is_empty() {
        let (rn, theta, len) = best_miss.ok_or_else(|| {
            Error::NumericFailure("shooting produced no candidates".into())
        })?;
        // upper bound: best path plus a worst-case patch to the target
        let c_max = (0..32)
            .map(|k| m.norm(q, Vec2::from_angle(std::f64::consts::TAU * k as f64 / 32.0)))
            .fold(0.0, f64::max);
        let dir = m.unit_vector(p, Vec2::from_angle(theta))?;
        let seg = integrate_geodesic(m, p, dir, len, opts.step, None)?;
        return Ok(DistanceResult {
            value: len + c_max * rn,
            minimizers: vec![seg],
            method: DistanceMethod::Shooting,
            approximation: true,
            lower_bound: lower.min(len + c_max * rn),
        });
    }

    let min_len = solutions.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let mut minimizers = Vec::new();
    for (theta, len) in &solutions {
        if *len <= min_len + opts.length_tol {
            let dir = m.unit_vector(p, Vec2::from_angle(*theta))?;
            minimizers.push(integrate_geodesic(m, p, dir, *len, opts.step, None)?);
        }
    }
    let minimizers = dedup_by_direction(minimizers, opts.angle_tol);
    Ok(DistanceResult {
        value: min_len,
        minimizers,
        method: DistanceMethod::Shooting,
        approximation: false,
        lower_bound: lower.min(min_len),
    })
}

/// All minimizing segments from p to q, deduplicated by initial direction.
pub fn minimal_segments(
    m: &MetricField,
    p: Point2,
    q: Point2,
    angle_tol: f64,
    length_tol: f64,
) -> Result<Vec<GeodesicSegment>> {
    if p == q {
        return Err(Error::Precondition("minimal_segments requires p != q".into()));
    }
    let opts = DistanceOpts { angle_tol, length_tol, ..DistanceOpts::default() };
    let r = distance(m, p, q, &opts)?;
    if r.minimizers.is_empty() {
        return Err(Error::NumericFailure("distance solver returned no minimizers".into()));
    }
    Ok(r.minimizers)
}

/// Convenience wrapper: the distance value only.
pub fn dist(m: &MetricField, p: Point2, q: Point2) -> f64 {
    distance(m, p, q, &DistanceOpts::default()).map(|r| r.value).unwrap_or(f64::NAN)
}

/// Deterministic sample of points inside a window.
pub fn sample_points(window: &Window, n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point2::new(rng.gen_range(window.x0..window.x1), rng.gen_range(window.y0..window.y1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_exponential_is_straight() {
        let m = MetricField::Euclidean;
        let seg = integrate_geodesic(
            &m,
            Point2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            5.0,
            1e-2,
            None,
        )
        .unwrap();
        let end = seg.end_point();
        assert!((end.x - 5.0).abs() < 1e-12 && end.y.abs() < 1e-12);
        assert!(seg.unit_speed_residual(&m) < 1e-10);
    }

    #[test]
    fn torus_segment_wraps_in_field_not_in_chart() {
        let m = MetricField::flat_torus(1.0, 1.0).unwrap();
        let seg = integrate_geodesic(
            &m,
            Point2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            0.75,
            1e-2,
            None,
        )
        .unwrap();
        let end = seg.end_point();
        assert!(((end.x.rem_euclid(1.0)) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn zermelo_unit_dir_travel_time() {
        // constant-wind travel: |q - p - T W| = T, downwind T = 2/3 to reach (1, 0)
        let m = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let dir = m.unit_vector(Point2::new(0.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        let seg =
            integrate_geodesic(&m, Point2::new(0.0, 0.0), dir, 2.0 / 3.0, 1e-3, None).unwrap();
        let end = seg.end_point();
        assert!(end.to(Point2::new(1.0, 0.0)).norm() < 1e-6, "end {end:?}");
    }

    #[test]
    fn distances_euclid_torus_randers() {
        let e = MetricField::Euclidean;
        assert!((dist(&e, Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)) - 5.0).abs() < 1e-12);

        let t = MetricField::flat_torus(1.0, 1.0).unwrap();
        assert!((dist(&t, Point2::new(0.0, 0.0), Point2::new(0.75, 0.0)) - 0.25).abs() < 1e-12);

        let r = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let a = dist(&r, Point2::new(0.0, 0.0), Point2::new(1.0, 0.0));
        let b = dist(&r, Point2::new(1.0, 0.0), Point2::new(0.0, 0.0));
        assert!((a - 2.0 / 3.0).abs() < 1e-12, "downwind {a}");
        assert!((b - 2.0).abs() < 1e-12, "upwind {b}");
    }

    #[test]
    fn reversed_distance_swaps_arguments() {
        let r = MetricField::randers_zermelo(Vec2::new(0.5, 0.0)).unwrap();
        let rr = r.reverse();
        let p = Point2::new(0.0, 0.0);
        let q = Point2::new(1.0, 0.0);
        assert!((dist(&rr, p, q) - dist(&r, q, p)).abs() < 1e-12);
        // reversed minimizer runs from p to q
        let res = distance(&rr, p, q, &DistanceOpts::default()).unwrap();
        let seg = &res.minimizers[0];
        assert!(seg.start_point().to(p).norm() < 1e-9);
        assert!(seg.end_point().to(q).norm() < 1e-9);
    }

    #[test]
    fn torus_minimizer_multiplicity() {
        let t = MetricField::flat_torus(1.0, 1.0).unwrap();
        let p = Point2::new(0.0, 0.0);
        let two = minimal_segments(&t, p, Point2::new(0.5, 0.0), 1e-2, 1e-5).unwrap();
        assert_eq!(two.len(), 2, "expected +-x minimizers");
        let four = minimal_segments(&t, p, Point2::new(0.5, 0.5), 1e-2, 1e-5).unwrap();
        assert_eq!(four.len(), 4, "expected 4 diagonal minimizers");
        let one = minimal_segments(&t, p, Point2::new(0.2, 0.1), 1e-2, 1e-5).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn triangle_inequality_under_asymmetry() {
        let r = MetricField::randers_zermelo(Vec2::new(0.5, 0.2)).unwrap();
        let t = MetricField::flat_torus(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let pts: Vec<Point2> = (0..3)
                .map(|_| Point2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            for m in [&r, &t] {
                let dpq = dist(m, pts[0], pts[1]);
                let dpr = dist(m, pts[0], pts[2]);
                let drq = dist(m, pts[2], pts[1]);
                assert!(dpq <= dpr + drq + 1e-6, "triangle violated for {}", m.id());
            }
        }
    }

    #[test]
    fn first_variation_endpoint_form() {
        let m = MetricField::Euclidean;
        let seg = integrate_geodesic(
            &m,
            Point2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            2.0,
            1e-2,
            None,
        )
        .unwrap();
        let n = seg.samples.len();
        // U == 0
        let probe = VariationProbe::new(seg.clone(), vec![Vec2::zero(); n]).unwrap();
        assert_eq!(first_variation(&m, &probe), 0.0);
        // orthogonal end variation
        let mut field = vec![Vec2::zero(); n];
        field[n - 1] = Vec2::new(0.0, 1.0);
        let probe = VariationProbe::new(seg.clone(), field).unwrap();
        assert!(first_variation(&m, &probe).abs() < 1e-12);
        // end variation along the velocity: rate 1, matching the
        // finite-difference derivative of the extended family's length
        let mut field = vec![Vec2::zero(); n];
        field[n - 1] = seg.end_velocity();
        let probe = VariationProbe::new(seg.clone(), field).unwrap();
        let fv = first_variation(&m, &probe);
        let du = 1e-6;
        let base_len = seg.end_point().to(seg.start_point()).norm();
        let moved = seg.end_point().offset(seg.end_velocity().scale(du));
        let fd = (moved.to(seg.start_point()).norm() - base_len) / du;
        assert!((fv - 1.0).abs() < 1e-12);
        assert!((fv - fd).abs() < 1e-5);
    }

    #[test]
    fn shooting_matches_constant_riemannian_closed_form() {
        // diag(1, 4) constant tensor: d(p,q) = sqrt(dx^2 + 4 dy^2)
        let m = MetricField::riemannian(|_| crate::geom::SymMat2::diag(1.0, 4.0));
        let p = Point2::new(0.0, 0.0);
        let q = Point2::new(1.0, 0.5);
        let r = distance(&m, p, q, &DistanceOpts { step: 1e-2, ..Default::default() }).unwrap();
        let want = (1.0_f64 + 4.0 * 0.25).sqrt();
        assert_eq!(r.method, DistanceMethod::Shooting);
        assert!(!r.approximation);
        assert!((r.value - want).abs() < 1e-5, "{} vs {want}", r.value);
        assert!(r.lower_bound <= r.value + 1e-12);
    }

    #[test]
    fn exponential_distance_consistency() {
        let m = MetricField::randers_zermelo(Vec2::new(0.3, 0.1)).unwrap();
        let p = Point2::new(0.2, -0.4);
        let dir = m.unit_vector(p, Vec2::from_angle(0.77)).unwrap();
        let seg = integrate_geodesic(&m, p, dir, 1.3, 1e-3, None).unwrap();
        let d = dist(&m, p, seg.end_point());
        assert!((d - 1.3).abs() < 1e-9, "d = {d}");
    }
}
