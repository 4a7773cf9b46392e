//! Shipped test geometries with exact oracle data: the plane constructions
//! built from a unit disk with a convergent chain of circular bites, the
//! dual sphere-limit field, their glued combination and its rotated sector
//! variants, plus the standard flat-torus / two-point / constant-wind
//! scenarios used throughout the test suites.
//!
//! Every oracle entry carries a provenance tag; `derived` entries name the
//! independent procedure that produced them.

use serde::{Deserialize, Serialize};

use crate::csg::ClosedSet;
use crate::error::{Error, Result};
use crate::field::{
    busemann, combine, dist_from_set, geometric_schedule, glued_halfplanes, set_limit_field,
    shifted, AccuracyClass, CombineOp, ScalarField,
};
use crate::fgeod::certify_f_geodesic;
use crate::geodesic::integrate_geodesic;
use crate::geom::{Point2, Vec2, Window};
use crate::metric::MetricField;
use crate::singular::{classify_point, SingularLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleTag {
    Paper,
    Trivial,
    Derived(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleData {
    /// points with their expected singular classification
    pub singular_points: Vec<(Point2, SingularLabel, OracleTag)>,
    pub regular_points: Vec<(Point2, OracleTag)>,
    /// rays { origin + r e(theta) : r in [r0, r1] } expected to certify
    pub ray_fgeodesics: Vec<(Point2, f64, f64, f64, OracleTag)>,
    pub critical_values: Vec<(f64, OracleTag)>,
    /// (level, expected regular component count)
    pub level_counts: Vec<(f64, usize, OracleTag)>,
    /// (probe point, expected value, tolerance)
    pub probe_values: Vec<(Point2, f64, f64, OracleTag)>,
    /// torus cut cross lines (x = cx, y = cy), when applicable
    pub cut_cross: Option<(f64, f64)>,
}

impl OracleData {
    fn empty() -> Self {
        OracleData {
            singular_points: vec![],
            regular_points: vec![],
            ray_fgeodesics: vec![],
            critical_values: vec![],
            level_counts: vec![],
            probe_values: vec![],
            cut_cross: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub grid_n: usize,
    pub delta: f64,
    pub angular_res: usize,
    pub extraction_angular_res: usize,
    pub trunc_k: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub metric: MetricField,
    pub field: ScalarField,
    pub window: Window,
    pub oracle: OracleData,
    pub config: ScenarioConfig,
}

fn default_config(window: &Window) -> ScenarioConfig {
    ScenarioConfig {
        grid_n: 256,
        delta: crate::fgeod::default_probe_len(window),
        angular_res: 720,
        extraction_angular_res: 360,
        trunc_k: 8,
        seed: 7,
    }
}

/// Geometric angle rule theta_i = first * ratio^(i-1); strictly decreasing
/// to zero with theta_1 < pi.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThetaRule {
    pub first: f64,
    pub ratio: f64,
}

impl Default for ThetaRule {
    fn default() -> Self {
        ThetaRule { first: std::f64::consts::FRAC_PI_2, ratio: 0.5 }
    }
}

impl ThetaRule {
    pub fn theta(&self, i: usize) -> f64 {
        self.first * self.ratio.powi(i as i32 - 1)
    }

    pub fn omega(&self, i: usize) -> f64 {
        0.5 * (self.theta(i) + self.theta(i + 1))
    }

    fn validate(&self) -> Result<()> {
        if !(self.first > 0.0 && self.first < std::f64::consts::PI) {
            return Err(Error::Precondition("theta_1 must lie in (0, pi)".into()));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Precondition("theta rule must decrease strictly to 0".into()));
        }
        Ok(())
    }
}

/// Disk-chain data for the bitten-disk construction, possibly rotated and
/// mirrored (angles mapped theta -> rot + sign * theta).
pub struct DiskChain {
    pub centers: Vec<Point2>,
    pub radii: Vec<f64>,
    pub rule: ThetaRule,
    pub rot: f64,
    pub sign: f64,
}

pub fn disk_chain(rule: &ThetaRule, k: usize, rot: f64, mirror: bool) -> DiskChain {
    let sign = if mirror { -1.0 } else { 1.0 };
    let mut centers = Vec::with_capacity(k);
    let mut radii = Vec::with_capacity(k);
    for i in 1..=k {
        let omega = rot + sign * rule.omega(i);
        let center = Point2::new(2.0 * omega.cos(), 2.0 * omega.sin());
        let rim = rot + sign * rule.theta(i);
        let rim_pt = Point2::new(rim.cos(), rim.sin());
        centers.push(center);
        radii.push(center.chart_dist(rim_pt));
    }
    DiskChain { centers, radii, rule: *rule, rot, sign }
}

/// The closed set: unit disk minus the open bite disks.
pub fn bitten_disk_set(chain: &DiskChain) -> ClosedSet {
    let bites: Vec<ClosedSet> = chain
        .centers
        .iter()
        .zip(&chain.radii)
        .map(|(c, r)| ClosedSet::Disk { center: *c, r: *r })
        .collect();
    ClosedSet::difference(ClosedSet::disk(0.0, 0.0, 1.0), ClosedSet::Union(bites))
}

/// Complement-of-disks level sets for the sphere-limit field: at level n
/// the excluded region is the open ball of radius n at the origin together
/// with the chain disks through the rim points at radius n.
pub fn eta_level_set(rule: &ThetaRule, k: usize, rot: f64, n: f64) -> ClosedSet {
    let mut disks = vec![ClosedSet::disk(0.0, 0.0, n)];
    for i in 1..=k {
        let omega = rot - rule.omega(i);
        let u = Point2::new(2.0 * omega.cos(), 2.0 * omega.sin());
        let q_ang = rot - rule.theta(i);
        let q = Point2::new(n * q_ang.cos(), n * q_ang.sin());
        disks.push(ClosedSet::Disk { center: u, r: u.chart_dist(q) });
    }
    ClosedSet::Complement(Box::new(ClosedSet::Union(disks)))
}

// The finite-schedule drift scales like diam^2 / level_last; 2^22 keeps the
// certification tolerance below the smallest cavity deficits resolved at
// truncation 8 while staying far from f64 cancellation at the corners.
pub const ETA_LEVELS_EXP: (u32, u32) = (4, 22);

fn eta_levels() -> Vec<f64> {
    (ETA_LEVELS_EXP.0..=ETA_LEVELS_EXP.1).map(|e| (1u64 << e) as f64).collect()
}

fn build_eta_field(
    m: &MetricField,
    rule: &ThetaRule,
    k: usize,
    rot: f64,
    window: Window,
) -> Result<ScalarField> {
    let entries: Vec<(f64, ClosedSet)> =
        eta_levels().into_iter().map(|n| (n, eta_level_set(rule, k, rot, n))).collect();
    set_limit_field(m, "eta", entries, window)
}

/// Independent oracle for the sphere-limit field (test support): the limit
/// value is the larger of (a) the support of p over the closed set of
/// admissible rim directions and (b) the cavity cone terms
/// 2 cos(Delta_i / 2) + |p - u_i| for p inside the i-th cavity cone.
pub fn eta_oracle(rule: &ThetaRule, k: usize, rot: f64, p: Point2) -> f64 {
    let pv = Vec2::new(p.x, p.y);
    let r = pv.norm();
    if r == 0.0 {
        return 0.0;
    }
    // (a) support over admissible directions: radial if admissible, else
    // the better of the two flanking rim directions
    let rel = (pv.angle() - rot).rem_euclid(std::f64::consts::TAU);
    // bad sectors sit at angles (-theta_i, -theta_{i+1}) relative to rot
    let neg = rel - std::f64::consts::TAU; // in [-tau, 0)
    let mut support = r;
    for i in 1..=k {
        let (lo, hi) = (-rule.theta(i), -rule.theta(i + 1));
        if neg > lo && neg < hi {
            let s1 = pv.dot(Vec2::from_angle(rot + lo));
            let s2 = pv.dot(Vec2::from_angle(rot + hi));
            support = s1.max(s2);
            break;
        }
    }
    // (b) cavity cone terms
    let mut best = support;
    for i in 1..=k {
        let omega = rot - rule.omega(i);
        let u = Point2::new(2.0 * omega.cos(), 2.0 * omega.sin());
        let d = u.to(p);
        if d.norm() == 0.0 {
            continue;
        }
        let half = 0.5 * (rule.theta(i) - rule.theta(i + 1));
        if crate::geom::angle_between(d, Vec2::from_angle(omega)) <= half {
            best = best.max(2.0 * half.cos() + d.norm());
        }
    }
    best
}

fn euclid() -> MetricField {
    MetricField::Euclidean
}

pub fn build_euclidean_do() -> Result<Scenario> {
    let window = Window::square(4.0);
    let m = euclid();
    let field = dist_from_set(&m, ClosedSet::point(0.0, 0.0), window)?;
    let mut oracle = OracleData::empty();
    oracle
        .singular_points
        .push((Point2::new(0.0, 0.0), SingularLabel::LowerSingular, OracleTag::Paper));
    oracle.regular_points.push((Point2::new(1.3, 0.8), OracleTag::Trivial));
    oracle.probe_values.push((Point2::new(3.0, 0.0), 3.0, 1e-9, OracleTag::Trivial));
    // the minimum is the only critical point in the window
    oracle.critical_values.push((0.0, OracleTag::Trivial));
    oracle.ray_fgeodesics.push((
        Point2::new(0.0, 0.0),
        0.7,
        0.2,
        3.5,
        OracleTag::Trivial,
    ));
    let config = default_config(&window);
    Ok(Scenario { name: "euclidean_dO".into(), metric: m, field, window, oracle, config })
}

pub fn build_two_point() -> Result<Scenario> {
    let window = Window::square(4.0);
    let m = euclid();
    let set = ClosedSet::union(vec![ClosedSet::point(-1.0, 0.0), ClosedSet::point(1.0, 0.0)]);
    let field = dist_from_set(&m, set, window)?;
    let mut oracle = OracleData::empty();
    let bis = OracleTag::Derived("perpendicular bisector of the two sites".into());
    for y in [0.5, 1.0, 2.0] {
        oracle
            .singular_points
            .push((Point2::new(0.0, y), SingularLabel::UpperSingular, bis.clone()));
    }
    oracle
        .singular_points
        .push((Point2::new(1.0, 0.0), SingularLabel::LowerSingular, OracleTag::Trivial));
    oracle.regular_points.push((Point2::new(1.5, 1.0), OracleTag::Trivial));
    oracle.probe_values.push((
        Point2::new(0.0, 1.0),
        2.0_f64.sqrt(),
        1e-9,
        OracleTag::Trivial,
    ));
    oracle.critical_values.push((
        1.0,
        OracleTag::Derived("half-distance of the sites at the bisector midpoint".into()),
    ));
    oracle.level_counts.push((0.5, 2, OracleTag::Derived("two disjoint circles".into())));
    oracle.level_counts.push((1.5, 1, OracleTag::Derived("merged peanut contour".into())));
    let config = default_config(&window);
    Ok(Scenario { name: "two_point_dN".into(), metric: m, field, window, oracle, config })
}

pub fn build_disk_plus_one() -> Result<Scenario> {
    let window = Window::square(4.0);
    let m = euclid();
    let field = shifted(dist_from_set(&m, ClosedSet::disk(0.0, 0.0, 1.0), window)?, 1.0);
    let mut oracle = OracleData::empty();
    oracle.probe_values.push((Point2::new(2.0, 0.0), 2.0, 1e-9, OracleTag::Trivial));
    oracle.probe_values.push((Point2::new(0.0, 0.0), 1.0, 1e-9, OracleTag::Trivial));
    let config = default_config(&window);
    Ok(Scenario { name: "disk_plus_one".into(), metric: m, field, window, oracle, config })
}

pub fn build_busemann() -> Result<Scenario> {
    let window = Window::square(6.0);
    let m = euclid();
    let field = busemann(&m, Point2::new(0.0, 0.0), Vec2::new(1.0, 0.0), &geometric_schedule(10), window)?;
    let mut oracle = OracleData::empty();
    oracle.regular_points.push((Point2::new(0.0, 2.0), OracleTag::Trivial));
    oracle.regular_points.push((Point2::new(-3.0, -1.0), OracleTag::Trivial));
    for p in [Point2::new(2.0, 3.0), Point2::new(-4.0, 1.0)] {
        oracle.probe_values.push((p, p.x, 1e-6, OracleTag::Trivial));
    }
    let config = default_config(&window);
    Ok(Scenario { name: "busemann".into(), metric: m, field, window, oracle, config })
}

pub fn build_flat_torus(p: Point2) -> Result<Scenario> {
    let m = MetricField::flat_torus(1.0, 1.0)?;
    let window = Window::new(0.0, 1.0, 0.0, 1.0);
    let field = dist_from_set(&m, ClosedSet::Point(p), window)?;
    let lattice = OracleTag::Derived("bisectors of lattice translates".into());
    let cx = (p.x + 0.5).rem_euclid(1.0);
    let cy = (p.y + 0.5).rem_euclid(1.0);
    let mut oracle = OracleData::empty();
    oracle.cut_cross = Some((cx, cy));
    oracle.singular_points.push((
        Point2::new(cx, (p.y + 0.2).rem_euclid(1.0)),
        SingularLabel::UpperSingular,
        lattice.clone(),
    ));
    oracle
        .singular_points
        .push((Point2::new(cx, cy), SingularLabel::UpperSingular, lattice.clone()));
    oracle.singular_points.push((p, SingularLabel::LowerSingular, OracleTag::Paper));
    oracle.regular_points.push((
        Point2::new((p.x + 0.2).rem_euclid(1.0), (p.y + 0.1).rem_euclid(1.0)),
        OracleTag::Trivial,
    ));
    oracle.probe_values.push((
        Point2::new((p.x + 0.5).rem_euclid(1.0), (p.y + 0.5).rem_euclid(1.0)),
        0.5 * 2.0_f64.sqrt(),
        1e-9,
        lattice.clone(),
    ));
    oracle.critical_values.push((0.0, OracleTag::Trivial));
    oracle.critical_values.push((0.5, lattice.clone()));
    oracle.critical_values.push((0.5 * 2.0_f64.sqrt(), lattice));
    let config = default_config(&window);
    Ok(Scenario { name: "flat_torus".into(), metric: m, field, window, oracle, config })
}

pub fn build_randers_wind(wind: Vec2) -> Result<Scenario> {
    let m = MetricField::randers_zermelo(wind)?;
    let window = Window::square(4.0);
    let field = dist_from_set(&m, ClosedSet::point(0.0, 0.0), window)?;
    let quad = OracleTag::Derived("navigation quadratic |q - p - T W| = T".into());
    let mut oracle = OracleData::empty();
    oracle
        .singular_points
        .push((Point2::new(0.0, 0.0), SingularLabel::LowerSingular, OracleTag::Trivial));
    oracle.regular_points.push((Point2::new(1.0, 1.0), OracleTag::Trivial));
    if wind == Vec2::new(0.5, 0.0) {
        oracle.probe_values.push((Point2::new(1.0, 0.0), 2.0 / 3.0, 1e-9, quad.clone()));
        oracle.probe_values.push((Point2::new(-1.0, 0.0), 2.0, 1e-9, quad));
    }
    oracle.critical_values.push((0.0, OracleTag::Trivial));
    let config = default_config(&window);
    Ok(Scenario { name: "randers_wind".into(), metric: m, field, window, oracle, config })
}

/// The bitten-disk distance field: the unit disk loses a chain of open
/// disks whose centers accumulate at (2, 0); radial rays off the bitten
/// sector are maximal f-geodesics and each bite center is upper singular.
pub fn build_section7_dn(k: usize, rule: ThetaRule) -> Result<Scenario> {
    rule.validate()?;
    if k < 2 {
        return Err(Error::Precondition("need at least two bites".into()));
    }
    let window = Window::square(6.0);
    let m = euclid();
    let chain = disk_chain(&rule, k, 0.0, false);
    let set = bitten_disk_set(&chain);
    let field = dist_from_set(&m, set, window)?;
    let mut oracle = OracleData::empty();
    for (i, c) in chain.centers.iter().enumerate().take(6) {
        let _ = i;
        oracle.singular_points.push((*c, SingularLabel::UpperSingular, OracleTag::Paper));
    }
    oracle.regular_points.push((Point2::new(2.0, 0.0), OracleTag::Paper));
    for t in [1.5, 3.0, 5.0] {
        for sgn in [1.0, -1.0] {
            oracle.probe_values.push((
                Point2::new(sgn * t, 0.0),
                t - 1.0,
                1e-9,
                OracleTag::Paper,
            ));
        }
    }
    // rays off the bitten sector and the shared rim angles
    for theta in [std::f64::consts::PI, 4.0, rule.theta(2)] {
        oracle.ray_fgeodesics.push((Point2::new(0.0, 0.0), theta, 1.0, 5.5, OracleTag::Paper));
    }
    let mut config = default_config(&window);
    config.trunc_k = k;
    Ok(Scenario { name: "section7_dN".into(), metric: m, field, window, oracle, config })
}

/// The sphere-limit field built from complements of growing disk unions;
/// its lower singular locus contains the segments from the origin to the
/// mirrored cavity centers, accumulating at (2, 0).
pub fn build_section7_eta(k: usize, rule: ThetaRule) -> Result<Scenario> {
    rule.validate()?;
    if k < 3 {
        return Err(Error::Precondition("need at least three cavity levels".into()));
    }
    let window = Window::square(6.0);
    let m = euclid();
    let field = build_eta_field(&m, &rule, k, 0.0, window)?;
    let mut oracle = OracleData::empty();
    for i in 1..=3 {
        let omega = -rule.omega(i);
        let u = Point2::new(2.0 * omega.cos(), 2.0 * omega.sin());
        oracle.singular_points.push((u, SingularLabel::LowerSingular, OracleTag::Paper));
        // midpoint of the segment from the origin
        oracle.singular_points.push((
            Point2::new(0.5 * u.x, 0.5 * u.y),
            SingularLabel::LowerSingular,
            OracleTag::Paper,
        ));
    }
    for x in [-3.0, -1.0, 0.5, 2.0, 4.0] {
        oracle.probe_values.push((
            Point2::new(x, 0.0),
            x.abs(),
            1e-6,
            OracleTag::Paper,
        ));
    }
    oracle.regular_points.push((Point2::new(0.0, 3.0), OracleTag::Trivial));
    let mut config = default_config(&window);
    config.trunc_k = k;
    Ok(Scenario { name: "section7_eta".into(), metric: m, field, window, oracle, config })
}

fn const_field(m: &MetricField, window: Window, c: f64) -> ScalarField {
    ScalarField::from_fn("const", m.clone(), window, AccuracyClass::Exact, move |_| c)
}

/// Glue of the shifted bitten-disk distance (upper half-plane) with the
/// clamped sphere-limit field (lower half-plane); the pieces agree on the
/// axis and (2, 0) lies in the closure of both singular strata while being
/// regular itself.
pub fn build_section7_combined(k: usize) -> Result<Scenario> {
    let rule = ThetaRule::default();
    build_combined_rotated(k, rule, 0.0, "section7_combined")
}

fn build_combined_rotated(k: usize, rule: ThetaRule, rot: f64, name: &str) -> Result<Scenario> {
    rule.validate()?;
    if k < 2 {
        return Err(Error::Precondition("need at least two bites".into()));
    }
    let window = Window::square(6.0);
    let m = euclid();
    let chain = disk_chain(&rule, k, rot, false);
    let dn = dist_from_set(&m, bitten_disk_set(&chain), window)?;
    let upper = shifted(dn, 1.0);
    let eta = build_eta_field(&m, &rule, k, rot, window)?;
    let lower = combine(CombineOp::Max, eta, const_field(&m, window, 1.0))?;
    let normal = Vec2::from_angle(rot + std::f64::consts::FRAC_PI_2);
    let field = glued_halfplanes(normal, upper, lower)?;

    let acc = Point2::new(2.0 * rot.cos(), 2.0 * rot.sin());
    let mut oracle = OracleData::empty();
    oracle.regular_points.push((acc, OracleTag::Paper));
    // Upper-singular bite centers and lower-singular cavity segments near
    // the accumulation point. Structures are only resolvable while the
    // cavity deficit (Delta_i / 2)^2 clears the certification tolerance;
    // the bound below evaluates to i <= 6 for the default angle rule.
    let resolvable = (1..=k)
        .take_while(|&i| {
            let d = rule.theta(i) - rule.theta(i + 1);
            0.25 * d * d >= 1.5e-4
        })
        .count();
    for i in 1..=k.min(6).min(resolvable.max(1)) {
        let omega = rot + rule.omega(i);
        oracle.singular_points.push((
            Point2::new(2.0 * omega.cos(), 2.0 * omega.sin()),
            SingularLabel::UpperSingular,
            OracleTag::Paper,
        ));
        let omega_l = rot - rule.omega(i);
        oracle.singular_points.push((
            Point2::new(1.9 * omega_l.cos(), 1.9 * omega_l.sin()),
            SingularLabel::LowerSingular,
            OracleTag::Paper,
        ));
    }
    if rot == 0.0 {
        oracle.probe_values.push((Point2::new(3.0, 0.0), 3.0, 1e-6, OracleTag::Paper));
        oracle.probe_values.push((
            Point2::new(0.0, -5.0),
            5.0,
            1e-6,
            OracleTag::Derived("sphere-limit grid oracle along the admissible ray".into()),
        ));
    }
    let mut config = default_config(&window);
    config.trunc_k = k;
    Ok(Scenario { name: name.into(), metric: m, field, window, oracle, config })
}

/// Sector variant: the combined construction rescaled into the angular
/// sector (a, b) and rotated to its bisector, so the accumulation point
/// moves to 2 e((a+b)/2) while all rays off (a, b) stay f-geodesics.
pub fn build_fab(a: f64, b: f64) -> Result<Scenario> {
    if !(0.0 < a && a < b && b < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Precondition("need 0 < a < b < pi/2".into()));
    }
    let s = 0.5 * (b - a);
    let omega = 0.5 * (a + b);
    let rule = ThetaRule { first: 0.5 * s, ratio: 0.5 };
    let mut sc = build_combined_rotated(8, rule, omega, "fab")?;
    // rays off the sector
    for theta in [0.0, std::f64::consts::PI, omega + std::f64::consts::PI] {
        sc.oracle
            .ray_fgeodesics
            .push((Point2::new(0.0, 0.0), theta, 1.0, 5.5, OracleTag::Paper));
    }
    Ok(sc)
}

pub fn list() -> Vec<&'static str> {
    vec![
        "euclidean_dO",
        "two_point_dN",
        "disk_plus_one",
        "busemann",
        "flat_torus",
        "randers_wind",
        "section7_dN",
        "section7_eta",
        "section7_combined",
        "fab",
    ]
}

pub fn by_name(name: &str) -> Result<Scenario> {
    match name.to_ascii_lowercase().as_str() {
        "euclidean_do" => build_euclidean_do(),
        "two_point_dn" => build_two_point(),
        "disk_plus_one" => build_disk_plus_one(),
        "busemann" => build_busemann(),
        "flat_torus" => build_flat_torus(Point2::new(0.25, 0.25)),
        "randers_wind" => build_randers_wind(Vec2::new(0.5, 0.0)),
        "section7_dn" => build_section7_dn(8, ThetaRule::default()),
        "section7_eta" => build_section7_eta(8, ThetaRule::default()),
        "section7_combined" => build_section7_combined(8),
        "fab" => build_fab(0.3, 0.9),
        other => Err(Error::InvalidInput(format!("unknown scenario '{other}'"))),
    }
}

/// Serializable scenario description for `--scenario-file`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub builtin: String,
    #[serde(default)]
    pub trunc_k: Option<usize>,
    #[serde(default)]
    pub theta_first: Option<f64>,
    #[serde(default)]
    pub theta_ratio: Option<f64>,
    #[serde(default)]
    pub wind: Option<[f64; 2]>,
    #[serde(default)]
    pub basepoint: Option<[f64; 2]>,
    #[serde(default)]
    pub ab: Option<[f64; 2]>,
    #[serde(default)]
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<Scenario> {
        let rule = ThetaRule {
            first: self.theta_first.unwrap_or(std::f64::consts::FRAC_PI_2),
            ratio: self.theta_ratio.unwrap_or(0.5),
        };
        let k = self.trunc_k.unwrap_or(8);
        let mut sc = match self.builtin.to_ascii_lowercase().as_str() {
            "section7_dn" => build_section7_dn(k, rule)?,
            "section7_eta" => build_section7_eta(k, rule)?,
            "section7_combined" => build_section7_combined(k)?,
            "flat_torus" => {
                let p = self.basepoint.unwrap_or([0.25, 0.25]);
                build_flat_torus(Point2::new(p[0], p[1]))?
            }
            "randers_wind" => {
                let w = self.wind.unwrap_or([0.5, 0.0]);
                build_randers_wind(Vec2::new(w[0], w[1]))?
            }
            "fab" => {
                let ab = self.ab.unwrap_or([0.3, 0.9]);
                build_fab(ab[0], ab[1])?
            }
            other => by_name(other)?,
        };
        if let Some(g) = self.grid_n {
            sc.config.grid_n = g;
        }
        if let Some(s) = self.seed {
            sc.config.seed = s;
        }
        Ok(sc)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Scenario-level verification: metric axioms, the Lipschitz
/// characterization, oracle probe values, oracle classifications and ray
/// certificates. Heavier locus/tree checks live in the CLI verify command
/// and the acceptance suite.
pub fn verify_scenario(sc: &Scenario) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut push = |name: &str, pass: bool, detail: String| {
        out.push(CheckResult { name: name.into(), pass, detail });
    };

    match sc.metric.validate(200, sc.config.seed) {
        Ok(rep) => push(
            "metric_axioms",
            rep.pass,
            format!(
                "homogeneity {:.2e}, min eigenvalue {:.3e}",
                rep.max_homogeneity_residual, rep.min_tensor_eigenvalue
            ),
        ),
        Err(e) => push("metric_axioms", false, e.to_string()),
    }

    match crate::field::check_lipschitz(&sc.field, 400, 300, sc.config.seed) {
        Ok(rep) => push(
            "lipschitz",
            rep.pass,
            format!(
                "violation {:.2e}, grad max {:.6}",
                rep.max_violation, rep.gradient_norm_max
            ),
        ),
        Err(e) => push("lipschitz", false, e.to_string()),
    }

    let mut probe_ok = true;
    let mut worst = 0.0_f64;
    for (p, want, tol, _) in &sc.oracle.probe_values {
        let got = sc.field.eval(*p);
        let err = (got - want).abs();
        worst = worst.max(err);
        if err > *tol {
            probe_ok = false;
        }
    }
    push(
        "oracle_probes",
        probe_ok,
        format!("{} probes, worst {:.2e}", sc.oracle.probe_values.len(), worst),
    );

    let mut class_ok = true;
    let mut detail = String::new();
    for (p, want, _) in &sc.oracle.singular_points {
        let got = classify_point(&sc.field, &sc.metric, *p, sc.config.delta, sc.config.angular_res);
        if got.label != *want {
            class_ok = false;
            detail.push_str(&format!("({:.3},{:.3}): {:?} != {:?}; ", p.x, p.y, got.label, want));
        }
    }
    for (p, _) in &sc.oracle.regular_points {
        let got = classify_point(&sc.field, &sc.metric, *p, sc.config.delta, sc.config.angular_res);
        if got.label != SingularLabel::Regular {
            class_ok = false;
            detail.push_str(&format!("({:.3},{:.3}): {:?} != regular; ", p.x, p.y, got.label));
        }
    }
    push(
        "oracle_classifications",
        class_ok,
        if detail.is_empty() {
            format!(
                "{} singular + {} regular points",
                sc.oracle.singular_points.len(),
                sc.oracle.regular_points.len()
            )
        } else {
            detail
        },
    );

    let mut rays_ok = true;
    let mut ray_detail = String::new();
    for (origin, theta, r0, r1, _) in &sc.oracle.ray_fgeodesics {
        match certify_ray(sc, *origin, *theta, *r0, *r1) {
            Ok(cert) if cert.certified => {}
            Ok(cert) => {
                rays_ok = false;
                ray_detail.push_str(&format!(
                    "theta={theta:.4}: residual {:.2e} > {:.2e}; ",
                    cert.residual, cert.tol
                ));
            }
            Err(e) => {
                rays_ok = false;
                ray_detail.push_str(&format!("theta={theta:.4}: {e}; "));
            }
        }
    }
    push(
        "oracle_rays",
        rays_ok,
        if ray_detail.is_empty() {
            format!("{} rays certified", sc.oracle.ray_fgeodesics.len())
        } else {
            ray_detail
        },
    );
    out
}

/// Certify the radial ray segment { origin + r e(theta) : r in [r0, r1] }.
pub fn certify_ray(
    sc: &Scenario,
    origin: Point2,
    theta: f64,
    r0: f64,
    r1: f64,
) -> Result<crate::fgeod::FGeodesicCertificate> {
    let dir0 = Vec2::from_angle(theta);
    let start = origin.offset(dir0.scale(r0));
    let end = origin.offset(dir0.scale(r1));
    let v = start.to(end);
    let len = sc.metric.norm(start, v);
    let dir = sc.metric.unit_vector(start, v)?;
    let seg = integrate_geodesic(&sc.metric, start, dir, len, len / 64.0, None)?;
    Ok(certify_f_geodesic(&sc.field, &seg, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_rule_defaults() {
        let r = ThetaRule::default();
        assert!((r.theta(1) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((r.theta(2) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(r.omega(1) > r.omega(2));
    }

    #[test]
    fn bite_chain_geometry() {
        // both rim points lie on each bite circle, and the rim survives:
        // (1, 0) is never swallowed
        let rule = ThetaRule::default();
        let chain = disk_chain(&rule, 8, 0.0, false);
        for i in 0..8 {
            let c = chain.centers[i];
            let r = chain.radii[i];
            let t1 = rule.theta(i + 1);
            let t2 = rule.theta(i + 2);
            let a = Point2::new(t1.cos(), t1.sin());
            let b = Point2::new(t2.cos(), t2.sin());
            assert!((c.chart_dist(a) - r).abs() < 1e-12);
            assert!((c.chart_dist(b) - r).abs() < 1e-12);
            assert!(c.chart_dist(Point2::new(1.0, 0.0)) > r + 1e-9, "rim point swallowed by bite {i}");
        }
    }

    #[test]
    fn section7_dn_axis_values() {
        let sc = build_section7_dn(8, ThetaRule::default()).unwrap();
        for t in [1.5_f64, 3.0, 5.0] {
            for sgn in [1.0, -1.0] {
                let v = sc.field.eval(Point2::new(sgn * t, 0.0));
                assert!((v - (t - 1.0)).abs() < 1e-12, "d({},0) = {v}", sgn * t);
            }
        }
        // inside the remnant the field vanishes
        assert_eq!(sc.field.eval(Point2::new(0.0, -0.5)), 0.0);
    }

    #[test]
    fn section7_dn_bite_centers_upper() {
        let sc = build_section7_dn(8, ThetaRule::default()).unwrap();
        let chain = disk_chain(&ThetaRule::default(), 8, 0.0, false);
        for i in 0..3 {
            let c = classify_point(&sc.field, &sc.metric, chain.centers[i], sc.config.delta, 720);
            assert_eq!(c.label, SingularLabel::UpperSingular, "bite {i}: {:?}", c.label);
            assert_eq!(c.multiplicity.1, 0);
        }
        let reg = classify_point(&sc.field, &sc.metric, Point2::new(2.0, 0.0), sc.config.delta, 720);
        assert_eq!(reg.label, SingularLabel::Regular);
    }

    #[test]
    fn eta_field_matches_support_oracle() {
        let rule = ThetaRule::default();
        let sc = build_section7_eta(8, rule).unwrap();
        let tol = sc.field.accuracy.value_tol(&sc.window) + 1e-6;
        let mut worst: f64 = 0.0;
        for p in [
            Point2::new(3.0, 0.0),
            Point2::new(-2.0, 1.0),
            Point2::new(0.5, -0.4),
            Point2::new(1.9, -0.2),
            Point2::new(2.0, -0.14),
            Point2::new(0.0, 4.0),
            Point2::new(-1.0, -3.0),
        ] {
            let got = sc.field.eval(p);
            let want = eta_oracle(&rule, 8, 0.0, p);
            worst = worst.max((got - want).abs());
            assert!((got - want).abs() <= tol, "({}, {}): {got} vs {want}", p.x, p.y);
        }
        assert!(worst > 0.0, "suspiciously exact: evaluator and oracle share a path?");
    }

    #[test]
    fn eta_axis_identity_is_exact() {
        let sc = build_section7_eta(8, ThetaRule::default()).unwrap();
        for x in [-4.0, -1.5, 0.0, 0.7, 2.0, 3.3] {
            let v = sc.field.eval(Point2::new(x, 0.0));
            assert!((v - x.abs()).abs() < 1e-9, "eta({x},0) = {v}");
        }
    }

    #[test]
    fn eta_lower_segment_classification() {
        let sc = build_section7_eta(8, ThetaRule::default()).unwrap();
        let rule = ThetaRule::default();
        let omega = -rule.omega(1);
        let u1 = Point2::new(2.0 * omega.cos(), 2.0 * omega.sin());
        let c = classify_point(&sc.field, &sc.metric, u1, sc.config.delta, 720);
        assert_eq!(c.label, SingularLabel::LowerSingular, "{:?}", c);
        let mid = Point2::new(0.5 * u1.x, 0.5 * u1.y);
        let c = classify_point(&sc.field, &sc.metric, mid, sc.config.delta, 720);
        assert_eq!(c.label, SingularLabel::LowerSingular, "{:?}", c);
        assert!(c.multiplicity.1 >= 2, "two outgoing rays expected: {:?}", c.multiplicity);
    }

    #[test]
    fn combined_glue_and_values() {
        let sc = build_section7_combined(8).unwrap();
        assert!((sc.field.eval(Point2::new(3.0, 0.0)) - 3.0).abs() < 1e-9);
        assert!((sc.field.eval(Point2::new(0.0, -5.0)) - 5.0).abs() < 1e-6);
        assert!((sc.field.inf_est - 1.0).abs() < 1e-6, "inf {}", sc.field.inf_est);
        // glue agreement on the axis
        for x in [-2.0, 0.3, 1.4, 4.0] {
            let above = sc.field.eval(Point2::new(x, 1e-9));
            let below = sc.field.eval(Point2::new(x, -1e-9));
            assert!((above - below).abs() < 1e-6, "glue mismatch at x={x}");
        }
    }

    #[test]
    fn combined_accumulation_point_is_regular() {
        let sc = build_section7_combined(8).unwrap();
        let c = classify_point(&sc.field, &sc.metric, Point2::new(2.0, 0.0), sc.config.delta, 720);
        assert_eq!(c.label, SingularLabel::Regular, "{:?}", c.multiplicity);
    }

    #[test]
    fn fab_constructs_and_certifies_rays() {
        let sc = build_fab(0.3, 0.9).unwrap();
        for (origin, theta, r0, r1, _) in &sc.oracle.ray_fgeodesics {
            let cert = certify_ray(&sc, *origin, *theta, *r0, *r1).unwrap();
            assert!(cert.certified, "theta {theta}: residual {:.3e}", cert.residual);
        }
        let omega = 0.6_f64;
        let acc = Point2::new(2.0 * omega.cos(), 2.0 * omega.sin());
        let c = classify_point(&sc.field, &sc.metric, acc, 0.05, 720);
        assert_eq!(c.label, SingularLabel::Regular, "{:?}", c);
    }

    #[test]
    fn registry_and_spec_roundtrip() {
        for name in list() {
            let sc = by_name(name).unwrap();
            assert_eq!(sc.name, name);
        }
        assert!(by_name("nosuch").is_err());
        let spec: ScenarioSpec =
            serde_json::from_str(r#"{"builtin": "section7_dN", "trunc_k": 4}"#).unwrap();
        let sc = spec.build().unwrap();
        assert_eq!(sc.config.trunc_k, 4);
    }

    #[test]
    fn scenario_verify_smoke() {
        for name in ["euclidean_dO", "two_point_dN", "randers_wind"] {
            let sc = by_name(name).unwrap();
            let checks = verify_scenario(&sc);
            for c in &checks {
                assert!(c.pass, "{name}/{}: {}", c.name, c.detail);
            }
        }
    }
}
