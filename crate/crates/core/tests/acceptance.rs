//! Acceptance suite: every criterion below prints one PASS/FAIL line and
//! asserts its stated tolerance. Criteria are numbered C1..C12; run with
//! `cargo test -p singloc-core --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use singloc_core::clarke;
use singloc_core::csg::ClosedSet;
use singloc_core::fgeod::{self, TraceSense};
use singloc_core::field::{check_lipschitz, dist_from_set, neg_dist_to_set};
use singloc_core::geodesic::dist;
use singloc_core::geom::{Point2, Vec2, Window};
use singloc_core::metric::MetricField;
use singloc_core::scenario::{self, ThetaRule};
use singloc_core::singular::{self, SingularLabel};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!("ACCEPT {criterion}: {} :: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{criterion} failed: {detail}");
}

/// C1: at singleton-fan points the analytic covector g_w(w, .) of the fan
/// direction matches the central-difference differential within 1e-3,
/// across the Euclidean point-distance, Busemann and constant-wind fields.
#[test]
fn c1_gradient_law() {
    for name in ["euclidean_dO", "busemann", "randers_wind"] {
        let sc = scenario::by_name(name).unwrap();
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let w = sc.window;
        let mut tested = 0;
        let mut worst: f64 = 0.0;
        while tested < 1000 {
            let p = Point2::new(
                rng.gen_range(w.x0 + 0.3..w.x1 - 0.3),
                rng.gen_range(w.y0 + 0.3..w.y1 - 0.3),
            );
            if p.chart_dist(Point2::new(0.0, 0.0)) < 0.3 {
                continue;
            }
            let fan = fgeod::direction_fan(&sc.field, &sc.metric, p, sc.config.delta, 360);
            if fan.incoming.len() > 1 || fan.outgoing.len() > 1 {
                continue;
            }
            let Some(cluster) = fan.outgoing.first().or_else(|| fan.incoming.first()) else {
                continue;
            };
            let cov = sc.metric.tensor(p, cluster.dir).apply(cluster.dir);
            let fd = sc.field.differential(p, None);
            let err = (cov.x - fd.x).abs().max((cov.y - fd.y).abs());
            worst = worst.max(err);
            tested += 1;
        }
        let secs = t0.elapsed().as_secs_f64();
        report(
            "C1-gradient-law",
            worst <= 1e-3 && secs < 60.0,
            &format!("{name}: 1000 points, worst componentwise gap {worst:.2e}, {secs:.1} s"),
        );
    }
}

/// C2: one-sided difference quotients along a transversal disagree by more
/// than 0.1 at multiplicity >= 2 points (torus cut cross, two-point
/// bisector): non-differentiability is detectable.
#[test]
fn c2_nondifferentiability() {
    let torus = scenario::by_name("flat_torus").unwrap();
    let twop = scenario::by_name("two_point_dN").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-5;
    let mut min_jump = f64::INFINITY;
    for _ in 0..50 {
        // torus cross point (vertical arm), transversal +x
        let y: f64 = rng.gen_range(0.05..0.45);
        let p = Point2::new(0.75, 0.25 + y);
        let f = &torus.field;
        let right = (f.eval(Point2::new(p.x + h, p.y)) - f.eval(p)) / h;
        let left = (f.eval(p) - f.eval(Point2::new(p.x - h, p.y))) / h;
        min_jump = min_jump.min((right - left).abs());
    }
    for _ in 0..50 {
        let y: f64 = rng.gen_range(0.2..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let p = Point2::new(0.0, y);
        let f = &twop.field;
        let right = (f.eval(Point2::new(p.x + h, p.y)) - f.eval(p)) / h;
        let left = (f.eval(p) - f.eval(Point2::new(p.x - h, p.y))) / h;
        min_jump = min_jump.min((right - left).abs());
    }
    report(
        "C2-nondifferentiability",
        min_jump > 0.1,
        &format!("100 cut points, smallest one-sided quotient jump {min_jump:.3}"),
    );
}

/// C3: flat-torus cut locus at grid 512 within Hausdorff 2/512 of the
/// exact cross; local-tree verification on 50 balls of radius 0.2.
#[test]
fn c3_torus_cut_locus() {
    let sc = scenario::by_name("flat_torus").unwrap();
    let t0 = Instant::now();
    let graph = singular::extract_singular_locus(
        &sc.field,
        &sc.metric,
        sc.window,
        512,
        sc.config.delta,
        360,
    )
    .unwrap();
    let h = graph.grid_spacing;
    let (cx, cy) = sc.oracle.cut_cross.unwrap();
    let upper = graph.nodes_with_label(SingularLabel::UpperSingular);
    assert!(!upper.is_empty());
    // one-sided: every extracted upper node lies on the cross
    let to_cross = upper
        .iter()
        .map(|p| {
            let dx = (p.x - cx).abs().min(1.0 - (p.x - cx).abs());
            let dy = (p.y - cy).abs().min(1.0 - (p.y - cy).abs());
            dx.min(dy)
        })
        .fold(0.0, f64::max);
    // one-sided: the cross is covered
    let mut coverage: f64 = 0.0;
    for k in 0..1000 {
        let t = k as f64 / 999.0;
        for probe in [Point2::new(cx, t), Point2::new(t, cy)] {
            let nearest = upper
                .iter()
                .map(|p| dist(&sc.metric, *p, probe))
                .fold(f64::INFINITY, f64::min);
            coverage = coverage.max(nearest);
        }
    }
    let hausdorff = to_cross.max(coverage);
    let upper_graph = graph.filter(|l| l == SingularLabel::UpperSingular);
    let tree = singular::verify_local_tree(&upper_graph, &sc.metric, 0.2, 50, 7).unwrap();
    let secs = t0.elapsed().as_secs_f64();
    report(
        "C3-torus-cut-locus",
        hausdorff <= 2.0 / 512.0 && tree.pass && secs < 120.0,
        &format!(
            "hausdorff {hausdorff:.5} (tol {:.5}), tree balls {} cycles {} failures {}, {secs:.1} s",
            2.0 / 512.0,
            tree.balls_tested,
            tree.cycles_found,
            tree.connectivity_failures
        ),
    );
}

/// C4: bitten-disk scenario at truncation 8: bite centers 1..6 classify
/// upper-singular and localize in the extracted locus within 2 spacings;
/// the axis values match |t| - 1; (2, 0) is regular and its maximal
/// f-geodesic is the ray { (t, 0) : t >= 1 }.
#[test]
fn c4_bitten_disk() {
    let sc = scenario::by_name("section7_dN").unwrap();
    let rule = ThetaRule::default();
    let chain = scenario::disk_chain(&rule, 8, 0.0, false);

    // classification of the bite centers
    for i in 0..6 {
        let c = singular::classify_point(
            &sc.field,
            &sc.metric,
            chain.centers[i],
            sc.config.delta,
            720,
        );
        assert_eq!(
            c.label,
            SingularLabel::UpperSingular,
            "bite {i} misclassified: {:?}",
            c.label
        );
    }

    // localization in the extracted locus at grid 512
    let graph = singular::extract_singular_locus(
        &sc.field,
        &sc.metric,
        sc.window,
        512,
        sc.config.delta,
        360,
    )
    .unwrap();
    let h = graph.grid_spacing;
    let upper = graph.nodes_with_label(SingularLabel::UpperSingular);
    let mut worst_loc: f64 = 0.0;
    for c in chain.centers.iter().take(6) {
        let nearest = upper
            .iter()
            .map(|p| p.chart_dist(*c))
            .fold(f64::INFINITY, f64::min);
        worst_loc = worst_loc.max(nearest);
    }

    // axis formula
    let mut worst_axis: f64 = 0.0;
    for t in [1.5_f64, 3.0, 5.0] {
        for sgn in [1.0, -1.0] {
            let v = sc.field.eval(Point2::new(sgn * t, 0.0));
            worst_axis = worst_axis.max((v - (t - 1.0)).abs());
        }
    }

    // (2, 0) regular with the maximal f-geodesic along the positive axis
    let cls = singular::classify_point(&sc.field, &sc.metric, Point2::new(2.0, 0.0), sc.config.delta, 720);
    let seg = singloc_core::geodesic::integrate_geodesic(
        &sc.metric,
        Point2::new(2.0, 0.0),
        Vec2::new(1.0, 0.0),
        0.1,
        0.01,
        None,
    )
    .unwrap();
    let cert = fgeod::certify_f_geodesic(&sc.field, &seg, None);
    let ext = fgeod::maximal_extension(&sc.field, &sc.metric, &cert).unwrap();
    let max_off_axis = ext
        .certificate
        .segment
        .samples
        .iter()
        .map(|s| s.pos.y.abs())
        .fold(0.0, f64::max);
    let back_ok = ext.backward_end.chart_dist(Point2::new(1.0, 0.0)) <= 2.0 * h;
    let fwd_ok = ext.forward_end.x > 5.9;

    report(
        "C4-bitten-disk",
        worst_loc <= 2.0 * h && worst_axis <= 2.0 * h && cls.label == SingularLabel::Regular
            && max_off_axis <= 2.0 * h
            && back_ok
            && fwd_ok,
        &format!(
            "bite localization {worst_loc:.4} (tol {:.4}), axis gap {worst_axis:.2e}, (2,0) {:?}, trace off-axis {max_off_axis:.2e}, ends ({:.3},{:.3})/({:.3},{:.3})",
            2.0 * h,
            cls.label,
            ext.backward_end.x,
            ext.backward_end.y,
            ext.forward_end.x,
            ext.forward_end.y
        ),
    );
}

/// C5: the glued field at truncation 8 shows both singular strata within
/// ambient distance 0.2 of (2, 0), while (2, 0) itself is regular.
#[test]
fn c5_combined_closure() {
    let sc = scenario::by_name("section7_combined").unwrap();
    let rule = ThetaRule::default();
    let acc = Point2::new(2.0, 0.0);

    let mut upper_near = Vec::new();
    let mut lower_near = Vec::new();
    for i in 5..=6 {
        let omega_u = rule.omega(i);
        let p_u = Point2::new(2.0 * omega_u.cos(), 2.0 * omega_u.sin());
        let c = singular::classify_point(&sc.field, &sc.metric, p_u, sc.config.delta, 720);
        if c.label == SingularLabel::UpperSingular && p_u.chart_dist(acc) <= 0.2 {
            upper_near.push(p_u);
        }
        let omega_l = -rule.omega(i);
        let p_l = Point2::new(1.9 * omega_l.cos(), 1.9 * omega_l.sin());
        let c = singular::classify_point(&sc.field, &sc.metric, p_l, sc.config.delta, 720);
        if c.label == SingularLabel::LowerSingular && p_l.chart_dist(acc) <= 0.2 {
            lower_near.push(p_l);
        }
    }
    let cls = singular::classify_point(&sc.field, &sc.metric, acc, sc.config.delta, 720);
    report(
        "C5-closure-accumulation",
        !upper_near.is_empty() && !lower_near.is_empty() && cls.label == SingularLabel::Regular,
        &format!(
            "{} upper and {} lower samples within 0.2 of (2,0); (2,0) is {:?}",
            upper_near.len(),
            lower_near.len(),
            cls.label
        ),
    );
}

/// C6: critical-value cover bounds: two-point <= 2 delta for delta in
/// {1e-2, 1e-3, 1e-4}; flat torus <= 3 delta; the point-distance field on a
/// window away from the source has bound exactly 0.
#[test]
fn c6_sard_surrogate() {
    let twop = scenario::by_name("two_point_dN").unwrap();
    let t0 = Instant::now();
    for delta_cover in [1e-2, 1e-3, 1e-4] {
        let est = clarke::estimate_critical_values(
            &twop.field,
            &twop.metric,
            twop.window,
            256,
            delta_cover,
        )
        .unwrap();
        assert!(
            est.measure_upper_bound <= 2.0 * delta_cover + 1e-9,
            "two-point bound {} at width {delta_cover}",
            est.measure_upper_bound
        );
    }
    let t_two = t0.elapsed().as_secs_f64();

    let torus = scenario::by_name("flat_torus").unwrap();
    let t1 = Instant::now();
    let est = clarke::estimate_critical_values(&torus.field, &torus.metric, torus.window, 256, 1e-2)
        .unwrap();
    let torus_ok = est.measure_upper_bound <= 3.0 * 1e-2 + 1e-9;
    let t_torus = t1.elapsed().as_secs_f64();

    let eu = scenario::by_name("euclidean_dO").unwrap();
    let t2 = Instant::now();
    let off_window = Window::new(0.5, 3.5, 0.5, 3.5);
    let est0 =
        clarke::estimate_critical_values(&eu.field, &eu.metric, off_window, 192, 1e-2).unwrap();
    let t_eu = t2.elapsed().as_secs_f64();

    report(
        "C6-sard-bounds",
        torus_ok && est0.measure_upper_bound == 0.0 && t_two < 60.0 && t_torus < 60.0 && t_eu < 60.0,
        &format!(
            "two-point ok ({t_two:.1} s); torus bound {:.4} <= 0.03 ({t_torus:.1} s); away-from-source bound {} ({t_eu:.1} s)",
            est.measure_upper_bound, est0.measure_upper_bound
        ),
    );
}

/// C7: two-point level sets: exactly 2 regular simple components at
/// t = 0.5, exactly 1 at t = 1.5, pairwise disjoint by a grid cell; the
/// critical level t = 1 is flagged non-regular.
#[test]
fn c7_level_sets() {
    let sc = scenario::by_name("two_point_dN").unwrap();
    let crit = vec![Point2::new(0.0, 0.0)];
    let grid_n = 256;
    let h = sc.window.width() / (grid_n - 1) as f64;

    let ls05 = clarke::extract_level_set(&sc.field, sc.window, grid_n, 0.5, &crit).unwrap();
    let reg05: Vec<_> = ls05.components.iter().filter(|c| c.regular).collect();
    let two_ok = reg05.len() == 2 && reg05.iter().all(|c| c.simple);
    // pairwise separation of regular components
    let mut min_sep = f64::INFINITY;
    for i in 0..reg05.len() {
        for j in (i + 1)..reg05.len() {
            for a in &reg05[i].polyline {
                for b in &reg05[j].polyline {
                    min_sep = min_sep.min(a.chart_dist(*b));
                }
            }
        }
    }

    let ls15 = clarke::extract_level_set(&sc.field, sc.window, grid_n, 1.5, &crit).unwrap();
    let reg15: Vec<_> = ls15.components.iter().filter(|c| c.regular).collect();
    let one_ok = reg15.len() == 1 && reg15[0].simple;

    let ls1 = clarke::extract_level_set(&sc.field, sc.window, grid_n, 1.0, &crit).unwrap();
    let flagged = ls1.components.iter().any(|c| !c.regular);

    report(
        "C7-level-sets",
        two_ok && one_ok && min_sep >= h && flagged,
        &format!(
            "t=0.5: {} regular (sep {min_sep:.3}), t=1.5: {}, critical level flagged: {flagged}",
            reg05.len(),
            reg15.len()
        ),
    );
}

/// C8: local cut-locus equivalence at 10 upper-singular points (flat torus
/// and bitten disk) and dually at 10 lower-singular points of the
/// sphere-limit field using the reversed metric.
#[test]
fn c8_local_equivalence() {
    let torus = scenario::by_name("flat_torus").unwrap();
    let dn = scenario::by_name("section7_dN").unwrap();
    let eta = scenario::by_name("section7_eta").unwrap();
    let rule = ThetaRule::default();

    let mut upper_pass = 0;
    let mut upper_total = 0;
    let torus_points = [
        Point2::new(0.75, 0.45),
        Point2::new(0.75, 0.55),
        Point2::new(0.45, 0.75),
        Point2::new(0.55, 0.75),
        Point2::new(0.75, 0.35),
    ];
    for p in torus_points {
        upper_total += 1;
        let rep =
            singular::check_local_cutlocus_equivalence(&torus.field, &torus.metric, p, 0.2, 97, true)
                .unwrap();
        if rep.applicable && rep.pass {
            upper_pass += 1;
        } else {
            println!("  torus equivalence at ({},{}) -> {:?}", p.x, p.y, rep);
        }
    }
    let chain = scenario::disk_chain(&rule, 8, 0.0, false);
    let dn_points = [
        chain.centers[0],
        chain.centers[1],
        Point2::new(2.5 * rule.omega(1).cos(), 2.5 * rule.omega(1).sin()),
        Point2::new(3.0 * rule.omega(2).cos(), 3.0 * rule.omega(2).sin()),
        Point2::new(2.8 * rule.omega(3).cos(), 2.8 * rule.omega(3).sin()),
    ];
    for p in dn_points {
        upper_total += 1;
        let rep =
            singular::check_local_cutlocus_equivalence(&dn.field, &dn.metric, p, 0.25, 97, true)
                .unwrap();
        if rep.applicable && rep.pass {
            upper_pass += 1;
        } else {
            println!("  bitten-disk equivalence at ({},{}) -> {:?}", p.x, p.y, rep);
        }
    }

    let mut lower_pass = 0;
    let mut lower_total = 0;
    for i in 1..=3 {
        let omega = -rule.omega(i);
        let u = Point2::new(2.0 * omega.cos(), 2.0 * omega.sin());
        for t in [0.6, 0.8, 1.0_f64].iter().take(if i == 1 { 4 } else { 3 }) {
            let p = Point2::new(t * u.x, t * u.y);
            lower_total += 1;
            let rep = singular::check_local_cutlocus_equivalence(
                &eta.field,
                &eta.metric,
                p,
                0.3,
                97,
                false,
            )
            .unwrap();
            if rep.applicable && rep.pass {
                lower_pass += 1;
            } else {
                println!("  sphere-limit equivalence at ({:.3},{:.3}) -> {:?}", p.x, p.y, rep);
            }
            if lower_total == 10 {
                break;
            }
        }
    }
    // top up to exactly 10 lower checks with one more segment point
    while lower_total < 10 {
        let omega = -rule.omega(1);
        let t = 0.45 + 0.1 * lower_total as f64;
        let p = Point2::new(2.0 * t * omega.cos(), 2.0 * t * omega.sin());
        lower_total += 1;
        let rep =
            singular::check_local_cutlocus_equivalence(&eta.field, &eta.metric, p, 0.3, 97, false)
                .unwrap();
        if rep.applicable && rep.pass {
            lower_pass += 1;
        }
    }

    report(
        "C8-local-equivalence",
        upper_pass == upper_total && lower_pass == lower_total,
        &format!("upper {upper_pass}/{upper_total}, lower (reversed) {lower_pass}/{lower_total}"),
    );
}

/// C9: every shipped field passes the Lipschitz characterization with
/// violation <= 1e-6 and Finslerian gradient norm <= 1 + 1e-3.
#[test]
fn c9_lipschitz_gate() {
    let mut detail = String::new();
    let mut ok = true;
    for name in scenario::list() {
        let sc = scenario::by_name(name).unwrap();
        let rep = check_lipschitz(&sc.field, 400, 300, 7).unwrap();
        let pass = rep.max_violation <= 1e-6 && rep.gradient_norm_max <= 1.0 + 1e-3;
        ok &= pass;
        detail.push_str(&format!(
            "{name}: v={:.1e} g={:.4}; ",
            rep.max_violation.max(0.0),
            rep.gradient_norm_max
        ));
    }
    report("C9-lipschitz", ok, &detail);
}

/// C10: the constant-wind scenario reproduces the asymmetric pair
/// d(o,(1,0)) = 2/3 and d((1,0),o) = 2, and the signed set-distance fields
/// differ accordingly.
#[test]
fn c10_asymmetry() {
    let sc = scenario::by_name("randers_wind").unwrap();
    let o = Point2::new(0.0, 0.0);
    let q = Point2::new(1.0, 0.0);
    let d1 = dist(&sc.metric, o, q);
    let d2 = dist(&sc.metric, q, o);
    let from = dist_from_set(&sc.metric, ClosedSet::point(0.0, 0.0), sc.window).unwrap();
    let to = neg_dist_to_set(&sc.metric, ClosedSet::point(0.0, 0.0), sc.window).unwrap();
    let ok = (d1 - 2.0 / 3.0).abs() <= 1e-6
        && (d2 - 2.0).abs() <= 1e-6
        && (from.eval(q) - 2.0 / 3.0).abs() <= 1e-6
        && (to.eval(q) + 2.0).abs() <= 1e-6;
    report(
        "C10-asymmetry",
        ok,
        &format!(
            "d(o,q) = {d1:.9}, d(q,o) = {d2:.9}, dist-from {:.9}, neg-dist-to {:.9}",
            from.eval(q),
            to.eval(q)
        ),
    );
}

/// C11: first-variation limit inequalities hold (margin >= -1e-3, quotient
/// gap <= 1e-2) for 20 sampled approach sequences on the flat torus, the
/// Busemann field and the bitten disk.
#[test]
fn c11_limit_inequalities() {
    for name in ["flat_torus", "busemann", "section7_dN"] {
        let sc = scenario::by_name(name).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1111);
        let mut done = 0;
        let mut attempts = 0;
        let mut worst_margin = f64::INFINITY;
        let mut worst_gap: f64 = 0.0;
        while done < 20 && attempts < 200 {
            attempts += 1;
            let w = sc.window;
            let p = Point2::new(
                rng.gen_range(w.x0 + 0.25 * w.width()..w.x1 - 0.25 * w.width()),
                rng.gen_range(w.y0 + 0.25 * w.height()..w.y1 - 0.25 * w.height()),
            );
            if sc.field.eval(p) < sc.field.inf_est + 0.3 {
                continue;
            }
            let dir = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
            let emanating = rng.gen_bool(0.5);
            let base = 0.04 * sc.window.diagonal().min(4.0);
            let scales = [base, base / 2.0, base / 4.0, base / 10.0];
            let Ok(seq) =
                singular::build_limit_sequence(&sc.field, &sc.metric, p, dir, &scales, emanating)
            else {
                continue;
            };
            let Ok(rep) = singular::check_limit_inequalities(&sc.field, &sc.metric, p, &seq, emanating)
            else {
                continue;
            };
            worst_margin = worst_margin.min(rep.margin);
            worst_gap = worst_gap.max(rep.quotient_gap);
            assert!(rep.pass, "{name} at ({:.3},{:.3}): {rep:?}", p.x, p.y);
            done += 1;
        }
        report(
            "C11-limit-inequalities",
            done == 20,
            &format!("{name}: 20 sequences, worst margin {worst_margin:.2e}, worst quotient gap {worst_gap:.2e}"),
        );
    }
}

/// C12: distance reconstruction f = d_N + c passes exactly for the shifted
/// disk distance and within grid tolerance for the glued field restricted
/// to the upper half-plane; the Busemann field reports not-applicable.
#[test]
fn c12_reconstruction() {
    let disk = scenario::by_name("disk_plus_one").unwrap();
    let rep1 = singular::check_dist_reconstruction(&disk.field, &disk.metric, 1.0, disk.window, 192)
        .unwrap();

    let comb = scenario::by_name("section7_combined").unwrap();
    let upper_half = Window::new(-6.0, 6.0, 0.0, 6.0);
    let rep2 =
        singular::check_dist_reconstruction(&comb.field, &comb.metric, 1.0, upper_half, 192)
            .unwrap();

    let bus = scenario::by_name("busemann").unwrap();
    let rep3 = singular::check_dist_reconstruction(&bus.field, &bus.metric, 0.0, bus.window, 97)
        .unwrap();

    report(
        "C12-reconstruction",
        rep1.applicable && rep1.pass && rep2.applicable && rep2.pass && !rep3.applicable,
        &format!(
            "disk: dev {:.2e} (tol {:.2e}); glued upper half: dev {:.2e} (tol {:.2e}); busemann not-applicable: {}",
            rep1.max_deviation, rep1.tol, rep2.max_deviation, rep2.tol, !rep3.applicable
        ),
    );
}
