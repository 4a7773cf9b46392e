//! f-geodesics: unit-speed geodesics along which a 1-Lipschitz field grows
//! at exactly unit rate. This module certifies candidate segments, scans
//! direction fans of certified probes through a point, traces maximal
//! extensions by following the field gradient law, and verifies the
//! sublevel-segment characterization.
//!
//! A certificate's residual is the spread of f(gamma(t)) - t over the
//! samples, so it bounds |f(gamma(t)) - f(gamma(s)) - (t - s)| over all
//! sample pairs. Certified segments are minimal: length equals the metric
//! distance of the endpoints, which is cross-checked when the metric has an
//! analytic distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geodesic::{dist, integrate_geodesic, GeodesicSegment, SamplePoint};
use crate::geom::{golden_min, Point2, Vec2, Window};
use crate::march::sweep_distance_from;
use crate::metric::MetricField;

pub const DEFAULT_ANGULAR_RES: usize = 720;

/// Default probe length: 1% of the window diagonal.
pub fn default_probe_len(window: &Window) -> f64 {
    0.01 * window.diagonal()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FGeodesicCertificate {
    pub segment: GeodesicSegment,
    pub field_name: String,
    /// spread of f(gamma(t)) - t over samples
    pub residual: f64,
    pub tol: f64,
    pub certified: bool,
    pub canonical: bool,
    /// |length - d(start, end)| when an analytic distance is available
    pub minimality_gap: Option<f64>,
}

/// Residual of the f-geodesic identity over a segment's samples.
pub fn f_residual(f: &ScalarField, seg: &GeodesicSegment) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in &seg.samples {
        let v = f.eval(s.pos) - s.t;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    hi - lo
}

/// Certify a unit-speed segment as an f-geodesic. `tol` defaults to the
/// field's accuracy class at the segment length.
pub fn certify_f_geodesic(
    f: &ScalarField,
    seg: &GeodesicSegment,
    tol: Option<f64>,
) -> FGeodesicCertificate {
    let tol = tol.unwrap_or_else(|| f.accuracy.residual_tol(seg.length()));
    let residual = f_residual(f, seg);
    let certified = residual <= tol;
    let minimality_gap = if f.metric().analytic_distance_available() {
        let d = dist(f.metric(), seg.start_point(), seg.end_point());
        Some((seg.length() - d).abs())
    } else {
        None
    };
    let canonical = seg
        .samples
        .first()
        .map(|s| (f.eval(s.pos) - s.t).abs() <= tol)
        .unwrap_or(false);
    FGeodesicCertificate {
        segment: seg.clone(),
        field_name: f.name.clone(),
        residual,
        tol,
        certified,
        canonical,
        minimality_gap,
    }
}

/// Shift the parameter so that f(gamma(t)) = t. Idempotent.
pub fn canonical_reparametrize(f: &ScalarField, cert: &FGeodesicCertificate) -> Result<FGeodesicCertificate> {
    if !cert.certified {
        return Err(Error::Precondition("cannot canonicalize an uncertified segment".into()));
    }
    let mut seg = cert.segment.clone();
    let start = seg.samples.first().unwrap();
    let shift = f.eval(start.pos) - start.t;
    seg.shift_parameter(shift);
    let mut out = certify_f_geodesic(f, &seg, Some(cert.tol));
    out.canonical = true;
    Ok(out)
}

/// One certified direction cluster of the fan. Directions are F-unit chart
/// velocities in the sense of travel (incoming clusters store the arrival
/// velocity at the point).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirCluster {
    pub dir: Vec2,
    pub residual: f64,
    pub angle: f64,
    pub arc_lo: f64,
    pub arc_hi: f64,
    pub members: usize,
}

impl DirCluster {
    pub fn angular_extent(&self) -> f64 {
        self.arc_hi - self.arc_lo
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionFan {
    pub point: Point2,
    pub incoming: Vec<DirCluster>,
    pub outgoing: Vec<DirCluster>,
    pub delta_in: f64,
    pub delta_out: f64,
    pub range_inf_pinched: bool,
    pub range_sup_pinched: bool,
    pub window_limited: bool,
}

impl DirectionFan {
    pub fn multiplicity(&self) -> (usize, usize) {
        (self.incoming.len(), self.outgoing.len())
    }

    /// Incoming clusters, treating a range-pinched side whose usable probe
    /// fell below `scale_floor` as vacuous at that scale.
    pub fn in_count_at_scale(&self, scale_floor: f64) -> usize {
        if self.range_inf_pinched && self.delta_in < scale_floor {
            0
        } else {
            self.incoming.len()
        }
    }

    pub fn out_count_at_scale(&self, scale_floor: f64) -> usize {
        if self.range_sup_pinched && self.delta_out < scale_floor {
            0
        } else {
            self.outgoing.len()
        }
    }

    /// Incoming count treating wide arcs (continuum fans) as multiplicity 2.
    pub fn effective_in_count(&self, angular_res: usize) -> usize {
        let spacing = std::f64::consts::TAU / angular_res as f64;
        self.incoming
            .iter()
            .map(|c| if c.angular_extent() > 2.0 * spacing { 2 } else { 1 })
            .sum()
    }
}

/// Residual of an outgoing probe of length delta in the chart direction
/// theta (departure velocity angle), using `steps` integration samples.
fn outgoing_residual(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    theta: f64,
    delta: f64,
    steps: usize,
) -> f64 {
    let dir = match m.unit_vector(p, Vec2::from_angle(theta)) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    match integrate_geodesic(m, p, dir, delta, delta / steps as f64, None) {
        Ok(seg) => f_residual(f, &seg),
        Err(_) => f64::INFINITY,
    }
}

/// Residual of an incoming probe arriving at p with travel velocity angle
/// theta: integrate the reversed metric from p along the opposite direction
/// and read the residual with the sign of the parameter flipped.
fn incoming_residual(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    theta: f64,
    delta: f64,
    steps: usize,
) -> f64 {
    let rev = m.reverse();
    let dir = match rev.unit_vector(p, Vec2::from_angle(theta + std::f64::consts::PI)) {
        Ok(d) => d,
        Err(_) => return f64::INFINITY,
    };
    match integrate_geodesic(&rev, p, dir, delta, delta / steps as f64, None) {
        Ok(seg) => {
            // sigma(s) = gamma(-s): along sigma the field must fall at unit rate
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in &seg.samples {
                let v = f.eval(s.pos) + s.t;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        }
        Err(_) => f64::INFINITY,
    }
}

/// Build the incoming probe as a forward-parametrized segment ending at p.
pub fn incoming_probe_segment(
    m: &MetricField,
    p: Point2,
    arrival_theta: f64,
    delta: f64,
    steps: usize,
) -> Result<GeodesicSegment> {
    let rev = m.reverse();
    let dir = rev.unit_vector(p, Vec2::from_angle(arrival_theta + std::f64::consts::PI))?;
    let seg = integrate_geodesic(&rev, p, dir, delta, delta / steps as f64, None)?;
    let mut fwd = seg.reversed();
    fwd.metric_id = m.id();
    // parametrize so the arrival at p is t = 0
    fwd.shift_parameter(-fwd.t1);
    Ok(fwd)
}

fn scan_side(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    delta: f64,
    angular_res: usize,
    incoming: bool,
) -> Vec<DirCluster> {
    let tol = f.accuracy.residual_tol(delta);
    let spacing = std::f64::consts::TAU / angular_res as f64;
    let prefilter = (4.0 * tol).max(delta * spacing * spacing);
    let residual_at = |theta: f64, steps: usize| {
        if incoming {
            incoming_residual(f, m, p, theta, delta, steps)
        } else {
            outgoing_residual(f, m, p, theta, delta, steps)
        }
    };

    let coarse: Vec<f64> = (0..angular_res)
        .map(|k| residual_at(spacing * k as f64, 8))
        .collect();

    // certified angles, found either directly or by golden refinement of
    // coarse local minima that pass the prefilter
    let mut certified: Vec<(f64, f64)> = Vec::new(); // (angle in [0, tau), residual)
    for k in 0..angular_res {
        let r = coarse[k];
        if !r.is_finite() {
            continue;
        }
        let theta = spacing * k as f64;
        if r <= tol {
            certified.push((theta, r));
            continue;
        }
        let prev = coarse[(k + angular_res - 1) % angular_res];
        let next = coarse[(k + 1) % angular_res];
        if r <= prefilter && r <= prev && r <= next {
            let (th, rr) = golden_min(theta - spacing, theta + spacing, 48, |t| residual_at(t, 16));
            let rr_fine = residual_at(th, 24).min(rr);
            if rr_fine <= tol {
                certified.push((th.rem_euclid(std::f64::consts::TAU), rr_fine));
            }
        }
    }
    if certified.is_empty() {
        return vec![];
    }

    // cluster consecutive certified angles (gap <= 2 spacings), circularly
    certified.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let gap_limit = 2.0 * spacing + 1e-12;
    let mut groups: Vec<Vec<(f64, f64)>> = vec![vec![certified[0]]];
    for &c in &certified[1..] {
        let last = groups.last().unwrap().last().unwrap().0;
        if c.0 - last <= gap_limit {
            groups.last_mut().unwrap().push(c);
        } else {
            groups.push(vec![c]);
        }
    }
    // wrap-around merge
    if groups.len() > 1 {
        let first_angle = groups.first().unwrap().first().unwrap().0;
        let last_angle = groups.last().unwrap().last().unwrap().0;
        if first_angle + std::f64::consts::TAU - last_angle <= gap_limit {
            let mut tail = groups.pop().unwrap();
            for e in &mut tail {
                e.0 -= std::f64::consts::TAU;
            }
            tail.extend(groups.remove(0));
            groups.insert(0, tail);
        }
    }

    groups
        .into_iter()
        .map(|g| {
            let (mut angle, mut residual) =
                g.iter().cloned().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
            let arc_lo = g.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
            let arc_hi = g.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
            // polish the representative so its direction is residual-optimal
            // rather than snapped to the coarse angular lattice; keep the
            // coarse angle unless the refinement clearly wins
            let (th, rr) = golden_min(angle - spacing, angle + spacing, 48, |t| {
                residual_at(t, 16)
            });
            if rr < 0.25 * residual {
                angle = th;
                residual = rr;
            }
            let chart = Vec2::from_angle(angle);
            let dir = m.unit_vector(p, chart).expect("nonzero direction");
            DirCluster { dir, residual, angle, arc_lo, arc_hi, members: g.len() }
        })
        .collect()
}

/// Scan certified f-geodesic stubs through p in both senses. Probe lengths
/// are clipped against the field's range estimates (an incoming stub of
/// length d needs f(p) - d >= inf f) and the window margin.
pub fn direction_fan(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    delta: f64,
    angular_res: usize,
) -> DirectionFan {
    let margin = if m.is_torus() { f64::INFINITY } else { f.window().margin(p).max(0.0) };
    let window_limited = margin < delta;
    let cap = margin.max(0.0);
    let fp = f.eval(p);
    let head_in = fp - f.inf_est;
    let head_out = f.sup_est - fp;
    let floor = 1e-9 * f.window().diagonal();

    let delta_in = delta.min(0.9 * head_in).min(cap);
    let delta_out = delta.min(0.9 * head_out).min(cap);
    let range_inf_pinched = 0.9 * head_in < delta;
    let range_sup_pinched = 0.9 * head_out < delta;

    let incoming = if delta_in > floor {
        scan_side(f, m, p, delta_in, angular_res, true)
    } else {
        vec![]
    };
    let outgoing = if delta_out > floor {
        scan_side(f, m, p, delta_out, angular_res, false)
    } else {
        vec![]
    };
    DirectionFan {
        point: p,
        incoming,
        outgoing,
        delta_in: delta_in.max(0.0),
        delta_out: delta_out.max(0.0),
        range_inf_pinched,
        range_sup_pinched,
        window_limited,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    LowerSingular,
    UpperSingular,
    WindowExit,
    RangeInf,
    RangeSup,
    LengthBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSense {
    Forward,
    Backward,
}

#[derive(Debug, Clone)]
pub struct TraceResult {
    pub certificate: FGeodesicCertificate,
    pub end: Point2,
    pub reason: EndReason,
}

/// Follow the f-geodesic through p in the given sense, starting along an
/// explicit direction (the travel velocity at p). The trace integrates the
/// geodesic ODE, monitors the running residual, and bisects the final step
/// back to the last certified parameter when the identity breaks.
pub fn trace_from_dir(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    travel_dir: Vec2,
    sense: TraceSense,
    step: f64,
    max_len: f64,
) -> Result<TraceResult> {
    if !(step > 0.0 && max_len > 0.0) {
        return Err(Error::InvalidInput("step and max_len must be positive".into()));
    }
    let backward = sense == TraceSense::Backward;
    let (metric, dir0) = if backward {
        (m.reverse(), travel_dir.neg())
    } else {
        (m.clone(), travel_dir)
    };
    let dir0 = metric.unit_vector(p, dir0)?;
    let window = *f.window();
    let fp = f.eval(p);
    let floor = 1e-12 * window.diagonal().max(1.0);
    let range_tol = f.accuracy.value_tol(&window).max(1e-7) + 10.0 * floor;

    // integrate in sigma-parametrization (always forward in the working
    // metric); the field identity along sigma is f(sigma(s)) = fp -+ s
    let sign = if backward { -1.0 } else { 1.0 };
    let mut pos = p;
    let mut vel = dir0;
    let mut s = 0.0_f64;
    let mut lo = 0.0_f64; // spread of f(sigma(s)) - fp - sign*s
    let mut hi = 0.0_f64;
    let mut samples: Vec<SamplePoint> = vec![SamplePoint { t: 0.0, pos, vel }];
    let mut reason = EndReason::LengthBudget;

    let rk4 = |pos: Point2, vel: Vec2, h: f64| -> (Point2, Vec2) {
        let accel = |pp: Point2, vv: Vec2| metric.spray(pp, vv);
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
        (
            pos.offset(k1p.add(k2p.scale(2.0)).add(k3p.scale(2.0)).add(k4p).scale(h / 6.0)),
            vel.add(k1v.add(k2v.scale(2.0)).add(k3v.scale(2.0)).add(k4v).scale(h / 6.0)),
        )
    };

    'outer: while s < max_len {
        // range budget in the travel direction; range estimates for
        // unbounded fields are window-scan artifacts, so a range stop at
        // the window edge is reported as a window exit
        let fcur = f.eval(pos);
        let budget = if backward { fcur - f.inf_est } else { f.sup_est - fcur };
        let range_stop = |pos: Point2| {
            if !metric.is_torus() && window.margin(pos) < (2.0 * step).max(1e-3 * window.diagonal()) {
                EndReason::WindowExit
            } else if backward {
                EndReason::RangeInf
            } else {
                EndReason::RangeSup
            }
        };
        if budget <= range_tol {
            reason = range_stop(pos);
            break;
        }
        let h = step.min(max_len - s).min(budget);
        if h <= floor {
            reason = range_stop(pos);
            break;
        }
        // window exit check on the tentative step
        let (tp, tv) = rk4(pos, vel, h);
        if !metric.is_torus() && !window.contains(tp) {
            reason = EndReason::WindowExit;
            break;
        }
        // residual monitoring with bisection on failure; along the working
        // parametrization the identity is f(sigma(s)) = fp + sign * s
        let tol = f.accuracy.residual_tol(s + h);
        let val = f.eval(tp) - fp - sign * (s + h);
        let spread = val.max(hi).max(0.0) - val.min(lo).min(0.0);
        if spread > tol {
            // shrink the step toward the break point
            let mut hh = h;
            for _ in 0..48 {
                hh *= 0.5;
                if hh <= floor {
                    break;
                }
                let (bp, _) = rk4(pos, vel, hh);
                let bval = f.eval(bp) - fp - sign * (s + hh);
                let bspread = bval.max(hi).max(0.0) - bval.min(lo).min(0.0);
                if bspread <= f.accuracy.residual_tol(s + hh) {
                    let (np, nv) = rk4(pos, vel, hh);
                    pos = np;
                    vel = nv;
                    s += hh;
                    samples.push(SamplePoint { t: s, pos, vel });
                    break;
                }
            }
            reason = if backward { EndReason::LowerSingular } else { EndReason::UpperSingular };
            break 'outer;
        }
        pos = tp;
        vel = tv;
        s += h;
        lo = lo.min(val);
        hi = hi.max(val);
        samples.push(SamplePoint { t: s, pos, vel });
    }

    // assemble the forward-parametrized certificate
    let seg = GeodesicSegment {
        metric_id: m.id(),
        start: samples[0].pos,
        start_dir: samples[0].vel,
        t0: 0.0,
        t1: s,
        samples,
        truncated: reason == EndReason::WindowExit,
    };
    let seg = if backward {
        let mut r = seg.reversed();
        r.metric_id = m.id();
        r
    } else {
        seg
    };
    let mut cert = certify_f_geodesic(f, &seg, None);
    // canonical parameter: anchor at the field value of the start
    let start_val = f.eval(cert.segment.start_point());
    let shift = start_val - cert.segment.t0;
    cert.segment.shift_parameter(shift);
    cert.canonical = true;
    Ok(TraceResult { certificate: cert, end: pos, reason })
}

/// Trace through a differentiability point: the fan must show exactly one
/// direction on the requested side.
pub fn trace_f_geodesic(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    sense: TraceSense,
    step: f64,
    max_len: f64,
) -> Result<TraceResult> {
    let fan = direction_fan(f, m, p, default_probe_len(f.window()), DEFAULT_ANGULAR_RES);
    let side = match sense {
        TraceSense::Forward => &fan.outgoing,
        TraceSense::Backward => &fan.incoming,
    };
    if side.len() != 1 {
        return Err(Error::NotDifferentiable(format!(
            "fan has {} direction clusters on the traced side",
            side.len()
        )));
    }
    trace_from_dir(f, m, p, side[0].dir, sense, step, max_len)
}

#[derive(Debug, Clone)]
pub struct MaximalFGeodesic {
    pub certificate: FGeodesicCertificate,
    pub backward_end: Point2,
    pub backward_reason: EndReason,
    pub forward_end: Point2,
    pub forward_reason: EndReason,
    /// max chart-velocity jump at the two concatenation junctions
    pub junction_jump: f64,
}

/// Extend a certified segment maximally in both senses. Interior extension
/// is unique and smooth, so the trace just continues the integration from
/// each endpoint; junction velocity jumps are recorded and must stay tiny.
pub fn maximal_extension(
    f: &ScalarField,
    m: &MetricField,
    cert: &FGeodesicCertificate,
) -> Result<MaximalFGeodesic> {
    if !cert.certified {
        return Err(Error::Precondition("extension needs a certified segment".into()));
    }
    let cert = canonical_reparametrize(f, cert)?;
    let seg = &cert.segment;
    let max_len = 4.0 * f.window().diagonal();
    let step = seg.length().max(1e-3) / 64.0;

    let fwd = trace_from_dir(f, m, seg.end_point(), seg.end_velocity(), TraceSense::Forward, step, max_len)?;
    let bwd = trace_from_dir(f, m, seg.start_point(), seg.start_dir, TraceSense::Backward, step, max_len)?;

    let mut jump: f64 = 0.0;
    let bseg = &bwd.certificate.segment;
    if bseg.samples.len() > 1 {
        jump = jump.max(bseg.end_velocity().sub(seg.start_dir).norm());
    }
    let fseg = &fwd.certificate.segment;
    if fseg.samples.len() > 1 {
        jump = jump.max(fseg.start_dir.sub(seg.end_velocity()).norm());
    }

    // concatenate: backward part, core, forward part on the canonical scale
    let mut samples: Vec<SamplePoint> = Vec::new();
    let core_t0 = seg.t0;
    let core_t1 = seg.t1;
    let blen = bseg.length();
    for s in &bseg.samples {
        samples.push(SamplePoint { t: core_t0 - blen + (s.t - bseg.t0), pos: s.pos, vel: s.vel });
    }
    for s in &seg.samples {
        if samples.last().map_or(true, |l| s.t > l.t + 1e-12) {
            samples.push(*s);
        }
    }
    let flen = fseg.length();
    for s in &fseg.samples {
        let t = core_t1 + (s.t - fseg.t0);
        if samples.last().map_or(true, |l| t > l.t + 1e-12) {
            samples.push(SamplePoint { t, pos: s.pos, vel: s.vel });
        }
    }
    let total = GeodesicSegment {
        metric_id: m.id(),
        start: samples[0].pos,
        start_dir: samples[0].vel,
        t0: core_t0 - blen,
        t1: core_t1 + flen,
        samples,
        truncated: fwd.reason == EndReason::WindowExit || bwd.reason == EndReason::WindowExit,
    };
    let mut whole = certify_f_geodesic(f, &total, None);
    whole.canonical = true;
    Ok(MaximalFGeodesic {
        certificate: whole,
        backward_end: bwd.end,
        backward_reason: bwd.reason,
        forward_end: fwd.end,
        forward_reason: fwd.reason,
        junction_jump: jump,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterizationReport {
    /// max over sampled parameters of |d(M_a, gamma(t)) - (t - a1)|
    pub m_segment_max_dev: f64,
    pub m_segment_tol: f64,
    pub crossing_success: usize,
    pub crossing_total: usize,
    pub pass: bool,
}

/// Verify the sublevel-segment characterization of a canonical f-geodesic
/// with start value a1: (i) the sublevel set M = f^{-1}(-inf, a1] realizes
/// d(M, gamma(t)) = t - a1 along the segment (checked against a marched
/// oracle); (ii) points near the far end admit incoming f-geodesics that
/// cross into M.
pub fn check_segment_characterization(
    f: &ScalarField,
    m: &MetricField,
    cert: &FGeodesicCertificate,
    a1: f64,
    grid_n: usize,
) -> Result<CharacterizationReport> {
    if !cert.certified || !cert.canonical {
        return Err(Error::Precondition("need a certified canonical segment".into()));
    }
    let seg = &cert.segment;
    if (seg.t0 - a1).abs() > cert.tol + 1e-9 {
        return Err(Error::Precondition("a1 must be the canonical start value".into()));
    }

    // local marching window around the segment
    let a = seg.start_point();
    let b = seg.end_point();
    let cx = 0.5 * (a.x + b.x);
    let cy = 0.5 * (a.y + b.y);
    let half = 0.75 * a.chart_dist(b).max(0.2) + 0.2 * f.window().diagonal() * 0.05;
    let local = Window::new(cx - half, cx + half, cy - half, cy + half);
    let seed_tol = f.accuracy.value_tol(f.window());
    let grid = sweep_distance_from(m, local, grid_n, grid_n, |p| f.eval(p) <= a1 + seed_tol);
    let h = grid.spacing();

    let mut max_dev: f64 = 0.0;
    let n_probe = 9;
    for k in 1..=n_probe {
        let t = seg.t0 + seg.length() * k as f64 / n_probe as f64;
        let s = seg.at(t);
        if !local.contains(s.pos) {
            continue;
        }
        let d = grid.sample(s.pos);
        max_dev = max_dev.max((d - (t - a1)).abs());
    }
    let tol = 2.0 * h + seed_tol;

    // crossing f-geodesics near the far end
    let delta1 = 0.2 * seg.length();
    let mut success = 0;
    let total = 5;
    for k in 0..total {
        let t = seg.t1 - delta1 * (k as f64 + 0.5) / total as f64;
        let s = seg.at(t);
        let fan = direction_fan(f, m, s.pos, default_probe_len(f.window()).min(0.5 * seg.length()), DEFAULT_ANGULAR_RES);
        let mut ok = false;
        for cluster in &fan.incoming {
            let need = (f.eval(s.pos) - a1) + 0.1 * seg.length();
            if let Ok(tr) = trace_from_dir(f, m, s.pos, cluster.dir, TraceSense::Backward, seg.length() / 64.0, need)
            {
                let end_val = f.eval(tr.end);
                if end_val <= a1 + f.accuracy.value_tol(f.window()).max(1e-6) + cert.tol {
                    ok = true;
                    break;
                }
            }
        }
        if ok {
            success += 1;
        }
    }

    Ok(CharacterizationReport {
        m_segment_max_dev: max_dev,
        m_segment_tol: tol,
        crossing_success: success,
        crossing_total: total,
        pass: max_dev <= tol && success == total,
    })
}
