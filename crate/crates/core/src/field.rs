//! 1-Lipschitz scalar fields over a computational window: distance from and
//! to closed sets, Busemann functions, horofunctions, sphere-limit fields,
//! and the max/min/shift/glue combinators.
//!
//! Every field carries the metric it is Lipschitz against, range estimates,
//! and an accuracy class that fixes the certification tolerance used by the
//! f-geodesic layer:
//! - `Exact` evaluators (closed forms, candidate-exact set distances);
//! - `ScheduleLimited` limits realized at a finite schedule (Busemann-type
//!   approximants, sphere limits), with the drift scale recorded;
//! - `GridLimited` fields interpolated from a marched grid.
//!
//! Construction is the build phase; the returned field is frozen and
//! read-only, safe for concurrent evaluation.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::csg::{require_nonempty, ClosedSet, SetGeometry};
use crate::error::{Error, Result};
use crate::geodesic::dist;
use crate::geom::{Point2, Vec2, Window};
use crate::march::{sweep_distance_from, sweep_distance_to, Grid};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyClass {
    Exact,
    /// Finite-schedule surrogate of a limit; `drift` bounds the gradient
    /// error of the surrogate, so residuals grow like drift * length.
    ScheduleLimited { drift: f64 },
    /// Bilinear interpolation of a marched grid with spacing h.
    GridLimited { h: f64 },
}

impl AccuracyClass {
    /// Certification tolerance for an f-geodesic residual over a segment of
    /// the given length.
    pub fn residual_tol(&self, len: f64) -> f64 {
        match self {
            AccuracyClass::Exact => 1e-9 + 1e-6 * len,
            AccuracyClass::ScheduleLimited { drift } => 1e-9 + (1e-6 + drift) * len,
            AccuracyClass::GridLimited { h } => 2.0 * h + 1e-6 * len,
        }
    }

    /// Tolerance for pointwise field-value comparisons.
    pub fn value_tol(&self, window: &Window) -> f64 {
        match self {
            AccuracyClass::Exact => 1e-9,
            AccuracyClass::ScheduleLimited { drift } => drift * window.diagonal(),
            AccuracyClass::GridLimited { h } => 2.0 * h,
        }
    }
}

#[derive(Clone)]
enum Evaluator {
    SetDistance {
        geom: Arc<SetGeometry>,
        /// +1 for dist-from (f = d_N), -1 for the 1-Lipschitz -d^N.
        sign: f64,
        reversed: bool,
        grid: Option<Arc<Grid>>,
    },
    /// f(x) = <cov, x - origin>; the analytic Busemann/horofunction limit
    /// on locally Minkowski structures.
    Linear { origin: Point2, cov: Vec2 },
    /// max over the tail entries of (level - d(x, set)); exact set distances.
    SetLimit { entries: Arc<Vec<(f64, SetGeometry)>>, tail: usize },
    /// max over the tail of (t - d(x, S_p(t))) with F-sphere distances.
    SphereLimit { basepoint: Point2, levels: Arc<Vec<f64>>, tail: usize },
    /// Horofunction surrogate: max over tail n of d(x1, xn) - d(x, xn).
    SequenceLimit { first: Point2, points: Arc<Vec<Point2>>, tail: usize },
    Max(Box<ScalarField>, Box<ScalarField>),
    Min(Box<ScalarField>, Box<ScalarField>),
    Shifted(Box<ScalarField>, f64),
    /// upper where <p, normal> >= 0, lower elsewhere; pieces agree on the line.
    Glued { normal: Vec2, upper: Box<ScalarField>, lower: Box<ScalarField> },
    Grid(Arc<Grid>),
    Custom(Arc<dyn Fn(Point2) -> f64 + Send + Sync>),
}

/// An evaluable 1-Lipschitz function with a declared window and range
/// estimates. Frozen after construction.
#[derive(Clone)]
pub struct ScalarField {
    pub name: String,
    metric: MetricField,
    window: Window,
    pub inf_est: f64,
    pub sup_est: f64,
    pub accuracy: AccuracyClass,
    pub schedule_report: Option<ScheduleReport>,
    eval: Evaluator,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ScalarField({}, range ~ [{:.4}, {:.4}], {:?})",
            self.name, self.inf_est, self.sup_est, self.accuracy
        )
    }
}

/// Convergence bookkeeping for schedule-based constructors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleReport {
    pub entries: Vec<f64>,
    /// max |last - previous| over the probe grid
    pub cauchy_gap: f64,
    pub monotone_ok: bool,
}

impl ScalarField {
    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn eval(&self, p: Point2) -> f64 {
        match &self.eval {
            Evaluator::SetDistance { geom, sign, reversed, grid } => {
                if let Some(g) = grid {
                    return sign * g.sample(p);
                }
                let m = if *reversed { self.metric.reverse() } else { self.metric.clone() };
                let d = geom.dist_from(&m, p).expect("set distance supported");
                sign * d
            }
            Evaluator::Linear { origin, cov } => cov.dot(origin.to(p)),
            Evaluator::SetLimit { entries, tail } => {
                let start = entries.len().saturating_sub(*tail);
                entries[start..]
                    .iter()
                    .map(|(level, geom)| {
                        level - geom.dist_from(&self.metric, p).expect("supported")
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Evaluator::SphereLimit { basepoint, levels, tail } => {
                let start = levels.len().saturating_sub(*tail);
                levels[start..]
                    .iter()
                    .map(|t| t - sphere_distance(&self.metric, *basepoint, *t, p))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Evaluator::SequenceLimit { first, points, tail } => {
                let start = points.len().saturating_sub(*tail);
                points[start..]
                    .iter()
                    .map(|xn| dist(&self.metric, *first, *xn) - dist(&self.metric, p, *xn))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
            Evaluator::Max(a, b) => a.eval(p).max(b.eval(p)),
            Evaluator::Min(a, b) => a.eval(p).min(b.eval(p)),
            Evaluator::Shifted(f, c) => f.eval(p) + c,
            Evaluator::Glued { normal, upper, lower } => {
                if normal.dot(Vec2::new(p.x, p.y)) >= 0.0 {
                    upper.eval(p)
                } else {
                    lower.eval(p)
                }
            }
            Evaluator::Grid(g) => g.sample(p),
            Evaluator::Custom(f) => f(p),
        }
    }

    /// Chart differential by central differences; h defaults to
    /// 1e-5 * window diagonal.
    pub fn differential(&self, p: Point2, h: Option<f64>) -> Vec2 {
        let h = h.unwrap_or(1e-5 * self.window.diagonal());
        Vec2::new(
            (self.eval(Point2::new(p.x + h, p.y)) - self.eval(Point2::new(p.x - h, p.y))) / (2.0 * h),
            (self.eval(Point2::new(p.x, p.y + h)) - self.eval(Point2::new(p.x, p.y - h))) / (2.0 * h),
        )
    }

    /// One-sided derivative mismatch along both axes; large values signal a
    /// kink (non-differentiable point).
    pub fn kink_indicator(&self, p: Point2, h: f64) -> f64 {
        let f0 = self.eval(p);
        let mut worst: f64 = 0.0;
        for dir in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
            let fw = self.eval(p.offset(dir.scale(h)));
            let bw = self.eval(p.offset(dir.scale(-h)));
            worst = worst.max((((fw - f0) / h) - ((f0 - bw) / h)).abs());
        }
        worst
    }

    /// Escape hatch for tests and scenario-internal constructions.
    pub fn from_fn(
        name: &str,
        metric: MetricField,
        window: Window,
        accuracy: AccuracyClass,
        f: impl Fn(Point2) -> f64 + Send + Sync + 'static,
    ) -> ScalarField {
        let mut field = ScalarField {
            name: name.to_string(),
            metric,
            window,
            inf_est: 0.0,
            sup_est: 0.0,
            accuracy,
            schedule_report: None,
            eval: Evaluator::Custom(Arc::new(f)),
        };
        let (lo, hi) = field.scan_range(64);
        field.inf_est = lo;
        field.sup_est = hi;
        field
    }

    /// Range estimate: coarse grid scan followed by a local polish of both
    /// extrema. Interior cone minima (distance-type fields) would otherwise
    /// be overestimated by the scan spacing, which corrupts the range-pinch
    /// logic of the fan probes.
    fn scan_range(&self, n: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut arg_lo = self.window.center();
        let mut arg_hi = self.window.center();
        for j in 0..n {
            for i in 0..n {
                let p = Point2::new(
                    self.window.x0 + self.window.width() * i as f64 / (n - 1) as f64,
                    self.window.y0 + self.window.height() * j as f64 / (n - 1) as f64,
                );
                let v = self.eval(p);
                if v < lo {
                    lo = v;
                    arg_lo = p;
                }
                if v > hi {
                    hi = v;
                    arg_hi = p;
                }
            }
        }
        let span = self.window.diagonal() / (n - 1) as f64;
        let polish = |start: Point2, maximize: bool| -> f64 {
            let mut p = start;
            for _ in 0..3 {
                for dir in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
                    let (s, _) = crate::geom::golden_min(-span, span, 48, |s| {
                        let q = self.window.clamp(p.offset(dir.scale(s)));
                        let v = self.eval(q);
                        if maximize {
                            -v
                        } else {
                            v
                        }
                    });
                    p = self.window.clamp(p.offset(dir.scale(s)));
                }
            }
            self.eval(p)
        };
        (lo.min(polish(arg_lo, false)), hi.max(polish(arg_hi, true)))
    }
}

/// F-sphere distance d(x, S_p(t)) = min over the sphere of d(x, q).
/// Euclidean spheres have the closed form |t - |x - p||; general Minkowski
/// spheres are minimized over the angular parameter.
fn sphere_distance(m: &MetricField, p: Point2, t: f64, x: Point2) -> f64 {
    match m {
        MetricField::Euclidean => (t - p.chart_dist(x)).abs(),
        _ if m.is_locally_minkowski() && !m.is_torus() => {
            let value = |theta: f64| {
                let u = Vec2::from_angle(theta);
                let q = p.offset(u.scale(t / m.norm(p, u)));
                m.norm(x, x.to(q))
            };
            let n = 64;
            let mut best = f64::INFINITY;
            let mut best_k = 0;
            for k in 0..n {
                let v = value(std::f64::consts::TAU * k as f64 / n as f64);
                if v < best {
                    best = v;
                    best_k = k;
                }
            }
            let t0 = std::f64::consts::TAU * (best_k as f64 - 1.0) / n as f64;
            let t1 = std::f64::consts::TAU * (best_k as f64 + 1.0) / n as f64;
            let (_, v) = crate::geom::golden_min(t0, t1, 48, value);
            v.min(best)
        }
        _ => f64::NAN,
    }
}

/// Distance from a closed set: f(x) = inf_{p in N} d(p, x); zero exactly
/// on N. Exact under locally Minkowski metrics, marched otherwise.
pub fn dist_from_set(m: &MetricField, set: ClosedSet, window: Window) -> Result<ScalarField> {
    build_set_distance(m, set, window, 1.0, false, 512)
}

/// The 1-Lipschitz companion of the distance *to* a set:
/// f(x) = -inf_{p in N} d(x, p), nonpositive, zero exactly on N.
pub fn neg_dist_to_set(m: &MetricField, set: ClosedSet, window: Window) -> Result<ScalarField> {
    build_set_distance(m, set, window, -1.0, true, 512)
}

pub fn dist_from_set_gridded(
    m: &MetricField,
    set: ClosedSet,
    window: Window,
    grid_n: usize,
) -> Result<ScalarField> {
    build_set_distance(m, set, window, 1.0, false, grid_n)
}

fn build_set_distance(
    m: &MetricField,
    set: ClosedSet,
    window: Window,
    sign: f64,
    reversed: bool,
    grid_n: usize,
) -> Result<ScalarField> {
    require_nonempty(&set, &window)?;
    let geom = Arc::new(SetGeometry::new(set));
    let test_metric = if reversed { m.reverse() } else { m.clone() };
    let supported = geom.dist_from(&test_metric, window.center()).is_some();
    let (eval, accuracy) = if supported {
        (
            Evaluator::SetDistance { geom: geom.clone(), sign, reversed, grid: None },
            AccuracyClass::Exact,
        )
    } else {
        let g = if reversed {
            sweep_distance_to(m, window, grid_n, grid_n, |p| geom.contains(p, 0.0))
        } else {
            sweep_distance_from(m, window, grid_n, grid_n, |p| geom.contains(p, 0.0))
        };
        let h = g.spacing();
        (
            Evaluator::SetDistance { geom: geom.clone(), sign, reversed, grid: Some(Arc::new(g)) },
            AccuracyClass::GridLimited { h },
        )
    };
    let name = if sign > 0.0 { "dist_from_set" } else { "neg_dist_to_set" };
    let mut field = ScalarField {
        name: name.into(),
        metric: m.clone(),
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy,
        schedule_report: None,
        eval,
    };
    let (lo, hi) = field.scan_range(64);
    // the set meets the window, so the true extremum on the N side is exact
    if sign > 0.0 {
        field.inf_est = 0.0;
        field.sup_est = hi;
    } else {
        field.inf_est = lo;
        field.sup_est = 0.0;
    }
    Ok(field)
}

/// Busemann function of the ray from `origin` with chart direction `dir`:
/// the limit of t - d(x, gamma(t)). On locally Minkowski structures the
/// limit is the covector g_v(v, .) applied to x - origin; the schedule is
/// still run to certify approximant monotonicity and record the Cauchy gap.
pub fn busemann(
    m: &MetricField,
    origin: Point2,
    dir: Vec2,
    schedule: &[f64],
    window: Window,
) -> Result<ScalarField> {
    if m.is_torus() {
        return Err(Error::InvalidInput("no rays on a compact torus".into()));
    }
    if !m.analytic_distance_available() {
        return Err(Error::InvalidInput(
            "busemann construction needs an analytic distance for far evaluations".into(),
        ));
    }
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("schedule must be strictly increasing".into()));
    }
    let v = m.unit_vector(origin, dir)?;
    let probe: Vec<Point2> = probe_grid(&window, 10);
    let approximant = |t: f64, x: Point2| {
        let gamma_t = origin.offset(v.scale(t));
        t - dist(m, x, gamma_t)
    };
    let mut monotone_ok = true;
    for w in schedule.windows(2) {
        for &x in &probe {
            if approximant(w[1], x) < approximant(w[0], x) - 1e-8 {
                monotone_ok = false;
            }
        }
    }
    if !monotone_ok {
        return Err(Error::NumericFailure(
            "busemann approximants are not monotone; distance solver is suspect".into(),
        ));
    }
    let last = schedule[schedule.len() - 1];
    let prev = schedule[schedule.len() - 2];
    let gap = probe
        .iter()
        .map(|&x| (approximant(last, x) - approximant(prev, x)).abs())
        .fold(0.0, f64::max);
    let cov = m.tensor(origin, v).apply(v);
    let mut field = ScalarField {
        name: "busemann".into(),
        metric: m.clone(),
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy: AccuracyClass::Exact,
        schedule_report: Some(ScheduleReport {
            entries: schedule.to_vec(),
            cauchy_gap: gap,
            monotone_ok,
        }),
        eval: Evaluator::Linear { origin, cov },
    };
    let (lo, hi) = field.scan_range(32);
    field.inf_est = lo;
    field.sup_est = hi;
    Ok(field)
}

/// Geometric default schedule 2^0 .. 2^k.
pub fn geometric_schedule(k: u32) -> Vec<f64> {
    (0..=k).map(|i| (1u64 << i) as f64).collect()
}

/// Horofunction from a divergent sequence: limsup_n [d(x1, xn) - d(x, xn)],
/// realized as the max over the final quarter of the generated points.
pub fn horofunction(
    m: &MetricField,
    generator: impl Fn(usize) -> Point2,
    n_max: usize,
    window: Window,
) -> Result<ScalarField> {
    if m.is_torus() {
        return Err(Error::InvalidInput("no divergent sequences on a compact torus".into()));
    }
    if n_max < 4 {
        return Err(Error::InvalidInput("n_max must be at least 4".into()));
    }
    // Geometric subsample of the index range keeps far tail entries cheap.
    // Consecutive pairs are kept at each level so that generators with
    // period-2 structure (alternating directions) still show both tails.
    let mut indices: Vec<usize> = Vec::new();
    let mut k = 1usize;
    while k < n_max {
        indices.push(k);
        if k + 1 < n_max {
            indices.push(k + 1);
        }
        k = (k * 2).max(k + 1);
    }
    indices.push(n_max);
    let points: Vec<Point2> = indices.iter().map(|&i| generator(i)).collect();
    let first = generator(1);
    // divergence probe
    let d_last = dist(m, first, points[points.len() - 1]);
    let d_mid = dist(m, first, points[points.len() / 2]);
    if !(d_last.is_finite() && d_last > 2.0 * d_mid.min(d_last / 2.0) && d_last > window.diagonal())
    {
        return Err(Error::InvalidInput("sequence does not diverge within the horizon".into()));
    }
    let tail = (points.len() / 4).max(2);
    let drift = 2.0 * window.diagonal() / d_last;
    let mut field = ScalarField {
        name: "horofunction".into(),
        metric: m.clone(),
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy: AccuracyClass::ScheduleLimited { drift },
        schedule_report: None,
        eval: Evaluator::SequenceLimit { first, points: Arc::new(points), tail },
    };
    let (lo, hi) = field.scan_range(32);
    field.inf_est = lo;
    field.sup_est = hi;
    Ok(field)
}

/// Sphere-limit field: limsup_t { t - d(x, S_p(t)) } over the given levels
/// (max over the final quarter).
pub fn wu_eta(m: &MetricField, basepoint: Point2, levels: &[f64], window: Window) -> Result<ScalarField> {
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("levels must be strictly increasing".into()));
    }
    if !m.is_locally_minkowski() || m.is_torus() {
        return Err(Error::NumericFailure(
            "sphere sampling needs an analytic metric sphere".into(),
        ));
    }
    let tail = (levels.len() / 4).max(1);
    let t_last = levels[levels.len() - 1];
    let drift = 2.0 * window.diagonal() / t_last;
    let mut field = ScalarField {
        name: "wu_eta".into(),
        metric: m.clone(),
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy: AccuracyClass::ScheduleLimited { drift },
        schedule_report: None,
        eval: Evaluator::SphereLimit { basepoint, levels: Arc::new(levels.to_vec()), tail },
    };
    let (lo, hi) = field.scan_range(32);
    field.inf_est = lo;
    field.sup_est = hi;
    Ok(field)
}

/// Set-limit field: max over the tail of (level_k - d(x, C_k)) for a family
/// of closed sets with exact distances. This is the sphere-limit construction
/// generalized to arbitrary level sets.
pub fn set_limit_field(
    m: &MetricField,
    name: &str,
    entries: Vec<(f64, ClosedSet)>,
    window: Window,
) -> Result<ScalarField> {
    if entries.len() < 2 {
        return Err(Error::InvalidInput("need at least two schedule entries".into()));
    }
    let built: Vec<(f64, SetGeometry)> =
        entries.into_iter().map(|(l, s)| (l, SetGeometry::new(s))).collect();
    if built.iter().any(|(_, g)| g.dist_from(m, window.center()).is_none()) {
        return Err(Error::InvalidInput("set distances unsupported for this metric".into()));
    }
    let tail = (built.len() / 4).max(1);
    let level_last = built.last().unwrap().0;
    let drift = 2.0 * window.diagonal() / level_last;
    let mut field = ScalarField {
        name: name.into(),
        metric: m.clone(),
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy: AccuracyClass::ScheduleLimited { drift },
        schedule_report: None,
        eval: Evaluator::SetLimit { entries: Arc::new(built), tail },
    };
    let (lo, hi) = field.scan_range(48);
    field.inf_est = lo;
    field.sup_est = hi;
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Max,
    Min,
}

/// Pointwise max/min; 1-Lipschitz functions are closed under both.
pub fn combine(op: CombineOp, f1: ScalarField, f2: ScalarField) -> Result<ScalarField> {
    if f1.metric.id() != f2.metric.id() {
        return Err(Error::InvalidInput("combine requires matching metrics".into()));
    }
    if f1.window != f2.window {
        return Err(Error::InvalidInput("combine requires matching windows".into()));
    }
    let accuracy = worse_accuracy(f1.accuracy, f2.accuracy);
    let name = match op {
        CombineOp::Max => format!("max({},{})", f1.name, f2.name),
        CombineOp::Min => format!("min({},{})", f1.name, f2.name),
    };
    let metric = f1.metric.clone();
    let window = f1.window;
    let eval = match op {
        CombineOp::Max => Evaluator::Max(Box::new(f1), Box::new(f2)),
        CombineOp::Min => Evaluator::Min(Box::new(f1), Box::new(f2)),
    };
    let mut field = ScalarField {
        name,
        metric,
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy,
        schedule_report: None,
        eval,
    };
    let (lo, hi) = field.scan_range(48);
    field.inf_est = lo;
    field.sup_est = hi;
    Ok(field)
}

pub fn shifted(f: ScalarField, c: f64) -> ScalarField {
    let mut out = ScalarField {
        name: format!("{}+{}", f.name, c),
        metric: f.metric.clone(),
        window: f.window,
        inf_est: f.inf_est + c,
        sup_est: f.sup_est + c,
        accuracy: f.accuracy,
        schedule_report: None,
        eval: Evaluator::Shifted(Box::new(f), c),
    };
    out.name = out.name.replace("+-", "-");
    out
}

/// Glue two fields along the line { <p, normal> = 0 } through the origin.
/// The pieces must agree on the interface; agreement is checked on samples.
pub fn glued_halfplanes(normal: Vec2, upper: ScalarField, lower: ScalarField) -> Result<ScalarField> {
    if upper.metric.id() != lower.metric.id() || upper.window != lower.window {
        return Err(Error::InvalidInput("glue requires matching metric and window".into()));
    }
    let window = upper.window;
    let tangent = normal.normalized().perp();
    let tol = upper.accuracy.value_tol(&window).max(lower.accuracy.value_tol(&window)) + 1e-7;
    let span = window.diagonal();
    for k in 0..64 {
        let t = -span + 2.0 * span * k as f64 / 63.0;
        let p = Point2::new(tangent.x * t, tangent.y * t);
        if !window.contains(p) {
            continue;
        }
        let (a, b) = (upper.eval(p), lower.eval(p));
        if (a - b).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "glued pieces disagree at ({:.3},{:.3}): {a} vs {b}",
                p.x, p.y
            )));
        }
    }
    let accuracy = worse_accuracy(upper.accuracy, lower.accuracy);
    let name = format!("glue({},{})", upper.name, lower.name);
    let metric = upper.metric.clone();
    let mut field = ScalarField {
        name,
        metric,
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy,
        schedule_report: None,
        eval: Evaluator::Glued { normal: normal.normalized(), upper: Box::new(upper), lower: Box::new(lower) },
    };
    let (lo, hi) = field.scan_range(48);
    field.inf_est = lo;
    field.sup_est = hi;
    Ok(field)
}

/// Wrap a marched grid as a field.
pub fn grid_field(name: &str, m: &MetricField, grid: Grid) -> ScalarField {
    let h = grid.spacing();
    let window = grid.window;
    let mut field = ScalarField {
        name: name.into(),
        metric: m.clone(),
        window,
        inf_est: 0.0,
        sup_est: 0.0,
        accuracy: AccuracyClass::GridLimited { h },
        schedule_report: None,
        eval: Evaluator::Grid(Arc::new(grid)),
    };
    let (lo, hi) = field.scan_range(64);
    field.inf_est = lo;
    field.sup_est = hi;
    field
}

fn worse_accuracy(a: AccuracyClass, b: AccuracyClass) -> AccuracyClass {
    let rank = |x: &AccuracyClass| match x {
        AccuracyClass::Exact => 0,
        AccuracyClass::ScheduleLimited { .. } => 1,
        AccuracyClass::GridLimited { .. } => 2,
    };
    let (ra, rb) = (rank(&a), rank(&b));
    if ra == rb {
        // same class: keep the looser bound
        match (a, b) {
            (AccuracyClass::ScheduleLimited { drift: da }, AccuracyClass::ScheduleLimited { drift: db }) => {
                AccuracyClass::ScheduleLimited { drift: da.max(db) }
            }
            (AccuracyClass::GridLimited { h: ha }, AccuracyClass::GridLimited { h: hb }) => {
                AccuracyClass::GridLimited { h: ha.max(hb) }
            }
            (x, _) => x,
        }
    } else if ra > rb {
        a
    } else {
        b
    }
}

fn probe_grid(window: &Window, n: usize) -> Vec<Point2> {
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            out.push(Point2::new(
                window.x0 + window.width() * i as f64 / (n - 1) as f64,
                window.y0 + window.height() * j as f64 / (n - 1) as f64,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub max_violation: f64,
    pub worst_pair: (Point2, Point2),
    pub gradient_norm_max: f64,
    pub pairs_tested: usize,
    pub gradient_samples_kept: usize,
    pub pass: bool,
}

/// Sampled check of the Lipschitz characterization: f(y) - f(x) <= d(x, y)
/// on random pairs, and F(grad f) <= 1 at differentiable samples (gradient
/// raised through the dual norm). Kinked samples, detected by one-sided
/// derivative mismatch, are excluded from the gradient statistic.
pub fn check_lipschitz(
    f: &ScalarField,
    pair_samples: usize,
    grad_samples: usize,
    seed: u64,
) -> Result<LipschitzReport> {
    if pair_samples < 1 || grad_samples < 1 {
        return Err(Error::Precondition("sample counts must be >= 1".into()));
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w = f.window();
    let m = f.metric().clone();
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst = (w.center(), w.center());
    for _ in 0..pair_samples {
        let x = Point2::new(rng.gen_range(w.x0..w.x1), rng.gen_range(w.y0..w.y1));
        let y = Point2::new(rng.gen_range(w.x0..w.x1), rng.gen_range(w.y0..w.y1));
        let v = f.eval(y) - f.eval(x) - dist(&m, x, y);
        if v > max_violation {
            max_violation = v;
            worst = (x, y);
        }
    }

    let h = 1e-5 * w.diagonal();
    let kink_threshold = match f.accuracy {
        AccuracyClass::Exact => 1e-3,
        AccuracyClass::ScheduleLimited { drift } => 1e-3 + drift * 10.0,
        AccuracyClass::GridLimited { h: gh } => 4.0 * gh / h,
    };
    let mut grad_max: f64 = 0.0;
    let mut kept = 0;
    for _ in 0..grad_samples {
        let margin = 4.0 * h;
        let p = Point2::new(
            rng.gen_range(w.x0 + margin..w.x1 - margin),
            rng.gen_range(w.y0 + margin..w.y1 - margin),
        );
        if f.kink_indicator(p, h) > kink_threshold {
            continue;
        }
        let df = f.differential(p, Some(h));
        let (dual, _) = m.dual_norm(p, df);
        grad_max = grad_max.max(dual);
        kept += 1;
    }
    Ok(LipschitzReport {
        max_violation,
        worst_pair: worst,
        gradient_norm_max: grad_max,
        pairs_tested: pair_samples,
        gradient_samples_kept: kept,
        pass: max_violation <= 1e-6 && grad_max <= 1.0 + 1e-3,
    })
}
