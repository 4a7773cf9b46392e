//! The singular locus of an almost distance field: point classification
//! into upper/lower singular strata, grid extraction of the locus as a
//! graph, the intrinsic metric along it, local-tree verification, and the
//! local equivalences with cut loci of sublevel / superlevel sets.
//!
//! Extraction runs in two stages. A cheap kink detector marks grid edges
//! where the field gradient turns abruptly or one-sided derivatives
//! disagree; the direction-fan classifier then arbitrates every marked
//! cell, so detector false alarms (curvature halos around sources) are
//! discarded as regular. Only fan-confirmed cells enter the graph.

use std::collections::BinaryHeap;

use rand::{seq::SliceRandom, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgeod::{
    direction_fan, f_residual, incoming_probe_segment, DirectionFan, FGeodesicCertificate,
};
use crate::field::ScalarField;
use crate::geodesic::{dist, integrate_geodesic};
use crate::geom::{angle_between, Point2, Vec2, Window};
use crate::march::{sweep_distance_from, sweep_distance_to, Grid};
use crate::metric::MetricField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularLabel {
    Regular,
    UpperSingular,
    LowerSingular,
    RangeBoundary,
    Undetermined,
}

#[derive(Debug, Clone)]
pub struct PointClass {
    pub label: SingularLabel,
    pub fan: DirectionFan,
    /// (incoming, outgoing) certified cluster counts
    pub multiplicity: (usize, usize),
}

/// Classify a point by its certified direction fan. `scale_floor` is the
/// probe length below which a range-pinched side counts as vacuous; point
/// queries use 0 (exact semantics), grid extraction passes ~2 spacings.
pub fn classify_point_at_scale(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    delta: f64,
    angular_res: usize,
    scale_floor: f64,
) -> PointClass {
    let fan = direction_fan(f, m, p, delta, angular_res);
    let in_n = fan.in_count_at_scale(scale_floor);
    let out_n = fan.out_count_at_scale(scale_floor);
    let spacing = std::f64::consts::TAU / angular_res as f64;
    let deff = fan.delta_in.max(fan.delta_out).max(1e-12);
    let align_tol =
        2.0 * spacing + 4.0 * (f.accuracy.residual_tol(deff) / deff).sqrt() + 1e-3;

    let label = if in_n == 0 && out_n == 0 {
        if fan.range_inf_pinched || fan.range_sup_pinched {
            SingularLabel::RangeBoundary
        } else {
            SingularLabel::Undetermined
        }
    } else if out_n == 0 {
        SingularLabel::UpperSingular
    } else if in_n == 0 {
        SingularLabel::LowerSingular
    } else if in_n == 1
        && out_n == 1
        && angle_between(fan.incoming[0].dir, fan.outgoing[0].dir) <= align_tol
    {
        SingularLabel::Regular
    } else {
        SingularLabel::Undetermined
    };
    PointClass { label, multiplicity: (fan.incoming.len(), fan.outgoing.len()), fan }
}

pub fn classify_point(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    delta: f64,
    angular_res: usize,
) -> PointClass {
    classify_point_at_scale(f, m, p, delta, angular_res, 0.0)
}

/// A kink-marked grid vertex with its detection strength.
#[derive(Debug, Clone, Copy)]
pub struct KinkMark {
    pub point: Point2,
    pub grid_index: (usize, usize),
    pub strength: f64,
}

/// Kink detector over a vertex grid of field values: a vertex is marked
/// when the one-sided slopes of its two adjacent grid intervals disagree
/// (a second-difference test) along either axis. Runs of consecutive marks
/// along the tested axis are thinned to their strongest member, which keeps
/// the marks one cell wide; 8-neighbor adjacency of the surviving vertices
/// then reflects the locus topology at cell scale.
fn detect_kinks(vals: &Grid, mismatch_tol: f64) -> Vec<KinkMark> {
    let (nx, ny) = (vals.nx, vals.ny);
    let hx = vals.dx();
    let hy = vals.dy();
    let sx = |i: usize, j: usize| (vals.get(i + 1, j) - vals.get(i, j)) / hx;
    let sy = |i: usize, j: usize| (vals.get(i, j + 1) - vals.get(i, j)) / hy;
    // strengths per direction
    let mut str_x = vec![0.0_f64; nx * ny];
    let mut str_y = vec![0.0_f64; nx * ny];
    for j in 0..ny {
        for i in 1..nx - 1 {
            str_x[j * nx + i] = (sx(i, j) - sx(i - 1, j)).abs();
        }
    }
    for j in 1..ny - 1 {
        for i in 0..nx {
            str_y[j * nx + i] = (sy(i, j) - sy(i, j - 1)).abs();
        }
    }
    // directional non-maximum suppression over short runs
    let mut keep = vec![false; nx * ny];
    for j in 0..ny {
        let mut i = 1;
        while i < nx - 1 {
            if str_x[j * nx + i] > mismatch_tol {
                let start = i;
                while i < nx - 1 && str_x[j * nx + i] > mismatch_tol {
                    i += 1;
                }
                // keep the strongest of a short run; long runs keep all
                // (a genuine dense feature, not interval splitting)
                if i - start <= 3 {
                    let best = (start..i)
                        .max_by(|&a, &b| {
                            str_x[j * nx + a].partial_cmp(&str_x[j * nx + b]).unwrap()
                        })
                        .unwrap();
                    keep[j * nx + best] = true;
                } else {
                    for k in start..i {
                        keep[j * nx + k] = true;
                    }
                }
            } else {
                i += 1;
            }
        }
    }
    for i in 0..nx {
        let mut j = 1;
        while j < ny - 1 {
            if str_y[j * nx + i] > mismatch_tol {
                let start = j;
                while j < ny - 1 && str_y[j * nx + i] > mismatch_tol {
                    j += 1;
                }
                if j - start <= 3 {
                    let best = (start..j)
                        .max_by(|&a, &b| {
                            str_y[a * nx + i].partial_cmp(&str_y[b * nx + i]).unwrap()
                        })
                        .unwrap();
                    keep[best * nx + i] = true;
                } else {
                    for k in start..j {
                        keep[k * nx + i] = true;
                    }
                }
            } else {
                j += 1;
            }
        }
    }
    // sub-cell refinement: intersect the clean one-sided linear pieces
    // flanking the crease; a mark half a cell off a shallow kink would
    // otherwise classify as regular (its probes never reach the crease)
    let refined_x = |i: usize, j: usize| -> Option<f64> {
        if i < 2 || i + 2 >= nx {
            return None;
        }
        let a = sx(i - 2, j);
        let b = sx(i + 1, j);
        if (a - b).abs() < 1e-12 {
            return None;
        }
        let xl = vals.point(i - 1, j).x;
        let xr = vals.point(i + 1, j).x;
        let vl = vals.get(i - 1, j);
        let vr = vals.get(i + 1, j);
        let x = (vr - vl + a * xl - b * xr) / (a - b);
        Some(x.clamp(xl, xr))
    };
    let refined_y = |i: usize, j: usize| -> Option<f64> {
        if j < 2 || j + 2 >= ny {
            return None;
        }
        let a = sy(i, j - 2);
        let b = sy(i, j + 1);
        if (a - b).abs() < 1e-12 {
            return None;
        }
        let yl = vals.point(i, j - 1).y;
        let yr = vals.point(i, j + 1).y;
        let vl = vals.get(i, j - 1);
        let vr = vals.get(i, j + 1);
        let y = (vr - vl + a * yl - b * yr) / (a - b);
        Some(y.clamp(yl, yr))
    };

    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if keep[j * nx + i] {
                let mut p = vals.point(i, j);
                if str_x[j * nx + i] > mismatch_tol {
                    if let Some(x) = refined_x(i, j) {
                        p.x = x;
                    }
                }
                if str_y[j * nx + i] > mismatch_tol {
                    if let Some(y) = refined_y(i, j) {
                        p.y = y;
                    }
                }
                out.push(KinkMark {
                    point: p,
                    grid_index: (i, j),
                    strength: str_x[j * nx + i].max(str_y[j * nx + i]),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphNode {
    pub pos: Point2,
    pub label: SingularLabel,
    pub multiplicity: (usize, usize),
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphEdge {
    /// indices into `vertices`
    pub va: usize,
    pub vb: usize,
    /// node indices forming the chain, endpoints included
    pub chain: Vec<usize>,
    pub polyline: Vec<Point2>,
    pub length_fwd: f64,
    pub length_bwd: f64,
    pub label: SingularLabel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SingularGraph {
    pub window: Window,
    pub grid_spacing: f64,
    pub nodes: Vec<GraphNode>,
    /// undirected adjacency between nodes
    pub adjacency: Vec<Vec<usize>>,
    /// node indices that act as graph vertices (degree != 2, or loop splits)
    pub vertices: Vec<usize>,
    pub edges: Vec<GraphEdge>,
    /// connected component id per node
    pub component: Vec<usize>,
    pub undetermined_fraction: f64,
}

impl SingularGraph {
    pub fn nodes_with_label(&self, label: SingularLabel) -> Vec<Point2> {
        self.nodes
            .iter()
            .filter(|n| n.label == label)
            .map(|n| n.pos)
            .collect()
    }

    /// Restrict to nodes whose label passes the filter; adjacency and
    /// components are rebuilt, chains re-collapsed.
    pub fn filter(&self, keep: impl Fn(SingularLabel) -> bool) -> SingularGraph {
        let mut keep_idx = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if keep(n.label) {
                keep_idx[i] = nodes.len();
                nodes.push(n.clone());
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, nb) in self.adjacency.iter().enumerate() {
            if keep_idx[i] == usize::MAX {
                continue;
            }
            for &j in nb {
                if keep_idx[j] != usize::MAX {
                    adjacency[keep_idx[i]].push(keep_idx[j]);
                }
            }
        }
        finish_graph(self.window, self.grid_spacing, nodes, adjacency, self.undetermined_fraction)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn nearest_node(&self, p: Point2) -> Option<usize> {
        (0..self.nodes.len()).min_by(|&a, &b| {
            self.nodes[a]
                .pos
                .chart_dist(p)
                .partial_cmp(&self.nodes[b].pos.chart_dist(p))
                .unwrap()
        })
    }
}

/// Extract the singular locus of `f` on a grid over the window.
pub fn extract_singular_locus(
    f: &ScalarField,
    m: &MetricField,
    window: Window,
    grid_n: usize,
    delta: f64,
    angular_res: usize,
) -> Result<SingularGraph> {
    if grid_n < 16 {
        return Err(Error::Precondition("grid_n must be >= 16".into()));
    }
    let vals = Grid::from_fn(window, grid_n, grid_n, |p| f.eval(p));
    let h = vals.spacing();
    let mut marks = detect_kinks(&vals, 0.15);
    // the outermost ring cannot be classified (probes have no room); the
    // torus has no boundary, its seam cells stay
    if !m.is_torus() {
        marks.retain(|k| window.margin(k.point) >= 1.5 * h);
    }

    // fan-classify every mark; regular and range-boundary marks are
    // detector false alarms (curvature halos) and are dropped
    let scale_floor = 2.0 * h;
    let mut nodes: Vec<GraphNode> = Vec::new();
    let mut undetermined = 0usize;
    let mut grid_slot: std::collections::HashMap<(usize, usize), usize> = Default::default();
    for mark in marks {
        let pc = classify_point_at_scale(f, m, mark.point, delta, angular_res, scale_floor);
        match pc.label {
            SingularLabel::Regular => continue,
            SingularLabel::RangeBoundary => continue,
            SingularLabel::Undetermined => {
                undetermined += 1;
                continue;
            }
            _ => {}
        }
        grid_slot.insert(mark.grid_index, nodes.len());
        nodes.push(GraphNode {
            pos: mark.point,
            label: pc.label,
            multiplicity: pc.multiplicity,
            value: f.eval(mark.point),
        });
    }
    let classified_total = nodes.len() + undetermined;
    let undetermined_fraction = if classified_total == 0 {
        0.0
    } else {
        undetermined as f64 / classified_total as f64
    };

    // 8-neighbor adjacency between surviving marks
    let mut adjacency = vec![Vec::new(); nodes.len()];
    for ((i, j), &slot) in &grid_slot {
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let ni = *i as i64 + di;
                let nj = *j as i64 + dj;
                if ni < 0 || nj < 0 {
                    continue;
                }
                if let Some(&other) = grid_slot.get(&(ni as usize, nj as usize)) {
                    adjacency[slot].push(other);
                }
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
        nb.dedup();
    }

    // On the torus the square is a cut-open fundamental domain: fuse node
    // pairs that are metrically close but far in the chart (seam images),
    // so loci crossing the seam stay connected.
    if m.is_torus() {
        let n = nodes.len();
        let mut repr: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for j in (i + 1)..n {
                let chart = nodes[i].pos.chart_dist(nodes[j].pos);
                if chart > 0.25 * window.diagonal()
                    && dist(m, nodes[i].pos, nodes[j].pos) <= 0.75 * h
                {
                    // union by smaller representative
                    let (mut a, mut b) = (i, j);
                    while repr[a] != a {
                        a = repr[a];
                    }
                    while repr[b] != b {
                        b = repr[b];
                    }
                    if a != b {
                        repr[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let root = |repr: &Vec<usize>, mut x: usize| {
            while repr[x] != x {
                x = repr[x];
            }
            x
        };
        let mut slot = vec![usize::MAX; n];
        let mut fused_nodes: Vec<GraphNode> = Vec::new();
        for i in 0..n {
            if root(&repr, i) == i {
                slot[i] = fused_nodes.len();
                fused_nodes.push(nodes[i].clone());
            }
        }
        let mut fused_adj: Vec<Vec<usize>> = vec![Vec::new(); fused_nodes.len()];
        for i in 0..n {
            let si = slot[root(&repr, i)];
            for &j in &adjacency[i] {
                let sj = slot[root(&repr, j)];
                if si != sj {
                    fused_adj[si].push(sj);
                }
            }
        }
        for nb in &mut fused_adj {
            nb.sort_unstable();
            nb.dedup();
        }
        return Ok(finish_graph(window, h, fused_nodes, fused_adj, undetermined_fraction));
    }
    Ok(finish_graph(window, h, nodes, adjacency, undetermined_fraction))
}

fn majority_label(labels: impl Iterator<Item = SingularLabel>) -> SingularLabel {
    let mut counts = [0usize; 5];
    for l in labels {
        let k = match l {
            SingularLabel::Regular => 0,
            SingularLabel::UpperSingular => 1,
            SingularLabel::LowerSingular => 2,
            SingularLabel::RangeBoundary => 3,
            SingularLabel::Undetermined => 4,
        };
        counts[k] += 1;
    }
    let best = (0..5).max_by_key(|&k| counts[k]).unwrap();
    [
        SingularLabel::Regular,
        SingularLabel::UpperSingular,
        SingularLabel::LowerSingular,
        SingularLabel::RangeBoundary,
        SingularLabel::Undetermined,
    ][best]
}

/// Components, chain collapse and edge assembly from nodes + adjacency.
fn finish_graph(
    window: Window,
    h: f64,
    nodes: Vec<GraphNode>,
    adjacency: Vec<Vec<usize>>,
    undetermined_fraction: f64,
) -> SingularGraph {
    let n = nodes.len();
    // components
    let mut component = vec![usize::MAX; n];
    let mut cid = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = cid;
        while let Some(u) = stack.pop() {
            for &v in &adjacency[u] {
                if component[v] == usize::MAX {
                    component[v] = cid;
                    stack.push(v);
                }
            }
        }
        cid += 1;
    }

    // vertices: degree != 2 nodes; loop components get split vertices
    let mut is_vertex: Vec<bool> = (0..n).map(|i| adjacency[i].len() != 2).collect();
    // ensure each all-degree-2 component (a loop) has two split vertices
    for comp in 0..cid {
        let members: Vec<usize> = (0..n).filter(|&i| component[i] == comp).collect();
        if members.is_empty() || members.iter().any(|&i| is_vertex[i]) {
            continue;
        }
        let anchor = members[0];
        is_vertex[anchor] = true;
        // farthest member along the loop by chart distance as the second split
        if let Some(&far) = members
            .iter()
            .max_by(|&&a, &&b| {
                nodes[a]
                    .pos
                    .chart_dist(nodes[anchor].pos)
                    .partial_cmp(&nodes[b].pos.chart_dist(nodes[anchor].pos))
                    .unwrap()
            })
        {
            if far != anchor {
                is_vertex[far] = true;
            }
        }
    }

    let vertices: Vec<usize> = (0..n).filter(|&i| is_vertex[i]).collect();
    let vslot = {
        let mut m = vec![usize::MAX; n];
        for (k, &i) in vertices.iter().enumerate() {
            m[i] = k;
        }
        m
    };

    // walk chains between vertices
    let mut edges: Vec<GraphEdge> = Vec::new();
    let mut visited_arc: std::collections::HashSet<(usize, usize)> = Default::default();
    for &v in &vertices {
        for &nb in &adjacency[v] {
            if visited_arc.contains(&(v, nb)) {
                continue;
            }
            let mut chain = vec![v];
            let mut prev = v;
            let mut cur = nb;
            loop {
                chain.push(cur);
                if is_vertex[cur] {
                    break;
                }
                let next = adjacency[cur]
                    .iter()
                    .copied()
                    .find(|&x| x != prev)
                    .unwrap_or(prev);
                prev = cur;
                cur = next;
                if chain.len() > n + 2 {
                    break;
                }
            }
            // mark both directions of the walked arc as visited
            visited_arc.insert((v, nb));
            if chain.len() >= 2 {
                let last = chain[chain.len() - 1];
                let before_last = chain[chain.len() - 2];
                visited_arc.insert((last, before_last));
            }
            let polyline: Vec<Point2> = chain.iter().map(|&i| nodes[i].pos).collect();
            let label = majority_label(chain.iter().map(|&i| nodes[i].label));
            edges.push(GraphEdge {
                va: vslot[v],
                vb: vslot[chain[chain.len() - 1]],
                chain,
                polyline,
                length_fwd: 0.0,
                length_bwd: 0.0,
                label,
            });
        }
    }
    SingularGraph {
        window,
        grid_spacing: h,
        nodes,
        adjacency,
        vertices,
        edges,
        component,
        undetermined_fraction,
    }
}

/// Fill edge lengths using the metric (quasi-)length of the polylines.
pub fn measure_edges(g: &mut SingularGraph, m: &MetricField) {
    for e in &mut g.edges {
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for w in e.polyline.windows(2) {
            fwd += dist(m, w[0], w[1]);
            bwd += dist(m, w[1], w[0]);
        }
        e.length_fwd = fwd;
        e.length_bwd = bwd;
    }
}

/// Shortest rectifiable-path length within the graph between the nodes
/// nearest to q1 and q2; infinity across components. Directed (the metric
/// may be asymmetric).
pub fn intrinsic_distance(g: &SingularGraph, m: &MetricField, q1: Point2, q2: Point2) -> f64 {
    let (Some(a), Some(b)) = (g.nearest_node(q1), g.nearest_node(q2)) else {
        return f64::INFINITY;
    };
    if g.component[a] != g.component[b] {
        return f64::INFINITY;
    }
    // Dijkstra over nodes with directed step costs
    let n = g.nodes.len();
    let mut dist_to = vec![f64::INFINITY; n];
    dist_to[a] = 0.0;
    let mut heap: BinaryHeap<(ordered::Rev, usize)> = BinaryHeap::new();
    heap.push((ordered::Rev(0.0), a));
    while let Some((ordered::Rev(d), u)) = heap.pop() {
        if d > dist_to[u] {
            continue;
        }
        if u == b {
            return d;
        }
        for &v in &g.adjacency[u] {
            let step = dist(m, g.nodes[u].pos, g.nodes[v].pos);
            let nd = d + step;
            if nd < dist_to[v] {
                dist_to[v] = nd;
                heap.push((ordered::Rev(nd), v));
            }
        }
    }
    dist_to[b]
}

mod ordered {
    /// min-heap adapter for f64 keys
    #[derive(PartialEq)]
    pub struct Rev(pub f64);
    impl Eq for Rev {}
    impl PartialOrd for Rev {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Rev {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            other.0.partial_cmp(&self.0).unwrap_or(std::cmp::Ordering::Equal)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeReport {
    pub balls_tested: usize,
    pub cycles_found: usize,
    pub connectivity_failures: usize,
    pub max_distortion: f64,
    pub pass: bool,
}

/// Verify the local-tree property on sampled metric balls: the induced
/// subgraph in each ball must be a forest (after dropping sub-resolution
/// parallel edges), and ambient-close node pairs of one global component
/// must connect within the ball. The recorded distortion is the worst
/// intrinsic-to-ambient ratio on small scales; it is reported, not gated.
pub fn verify_local_tree(
    g: &SingularGraph,
    m: &MetricField,
    ball_radius: f64,
    ball_samples: usize,
    seed: u64,
) -> Result<TreeReport> {
    if ball_radius <= 4.0 * g.grid_spacing {
        return Err(Error::Precondition("ball radius must exceed 4 grid spacings".into()));
    }
    let n = g.nodes.len();
    if n == 0 {
        return Ok(TreeReport {
            balls_tested: 0,
            cycles_found: 0,
            connectivity_failures: 0,
            max_distortion: 1.0,
            pass: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<usize> = (0..n).collect();
    centers.shuffle(&mut rng);
    centers.truncate(ball_samples);

    let mut cycles = 0usize;
    let mut failures = 0usize;
    let mut distortion: f64 = 1.0;
    let noise_len = 4.0 * g.grid_spacing;

    for &c in &centers {
        let cp = g.nodes[c].pos;
        let inside: Vec<usize> = (0..n)
            .filter(|&i| dist(m, cp, g.nodes[i].pos).min(dist(m, g.nodes[i].pos, cp)) <= ball_radius)
            .collect();
        if inside.len() < 2 {
            continue;
        }
        let slot = {
            let mut s = vec![usize::MAX; n];
            for (k, &i) in inside.iter().enumerate() {
                s[i] = k;
            }
            s
        };
        // induced edges; drop duplicates
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &i in &inside {
            for &j in &g.adjacency[i] {
                if j > i && slot[j] != usize::MAX {
                    edges.push((slot[i], slot[j]));
                }
            }
        }
        // local components via union-find, counting independent cycles but
        // forgiving sub-resolution double links
        let mut parent: Vec<usize> = (0..inside.len()).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while parent[r] != r {
                r = parent[r];
            }
            let mut c = x;
            while parent[c] != r {
                let nxt = parent[c];
                parent[c] = r;
                c = nxt;
            }
            r
        }
        for &(a, b) in &edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                let len = g.nodes[inside[a]].pos.chart_dist(g.nodes[inside[b]].pos);
                if len > noise_len {
                    cycles += 1;
                }
            } else {
                parent[ra] = rb;
            }
        }
        // Connectivity: ambient-close pairs of the same global component
        // must join inside the ball. Only core pairs (well inside the
        // ball) are tested: a pair at the ball boundary may connect
        // through nodes just outside, which is not a tree violation.
        let core: Vec<usize> = inside
            .iter()
            .copied()
            .filter(|&i| {
                dist(m, cp, g.nodes[i].pos).min(dist(m, g.nodes[i].pos, cp)) <= 0.5 * ball_radius
            })
            .collect();
        for (ka, &ia) in core.iter().enumerate() {
            for &ib in core.iter().skip(ka + 1) {
                let d_amb = dist(m, g.nodes[ia].pos, g.nodes[ib].pos);
                if d_amb > 0.25 * ball_radius || g.component[ia] != g.component[ib] {
                    continue;
                }
                let (ra, rb) = (find(&mut parent, slot[ia]), find(&mut parent, slot[ib]));
                if ra != rb {
                    failures += 1;
                } else if d_amb > 2.0 * g.grid_spacing {
                    let di = intrinsic_distance(g, m, g.nodes[ia].pos, g.nodes[ib].pos);
                    if di.is_finite() && d_amb > 0.0 {
                        distortion = distortion.max(di / d_amb);
                    }
                }
            }
        }
    }
    Ok(TreeReport {
        balls_tested: centers.len(),
        cycles_found: cycles,
        connectivity_failures: failures,
        max_distortion: distortion,
        pass: cycles == 0 && failures == 0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub applicable: bool,
    pub hausdorff_gap: f64,
    pub tol: f64,
    pub marched_cells: usize,
    pub field_cells: usize,
    pub pass: bool,
}

/// Local coincidence of the singular locus with the cut locus of a
/// sublevel set (upper case) or the reverse cut locus of a superlevel set
/// (lower case): around an upper-singular p, kinks of the marched distance
/// field d(M_a0, .) with a0 = f(p) - delta_p/2 must match the f-side
/// singular cells within the ball of radius delta_p / 4.
pub fn check_local_cutlocus_equivalence(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    delta_p: f64,
    grid_n: usize,
    upper: bool,
) -> Result<EquivalenceReport> {
    let pc = classify_point(f, m, p, delta_p.min(0.1 * f.window().diagonal()), 720);
    let expected = if upper { SingularLabel::UpperSingular } else { SingularLabel::LowerSingular };
    if pc.label != expected {
        return Ok(EquivalenceReport {
            applicable: false,
            hausdorff_gap: 0.0,
            tol: 0.0,
            marched_cells: 0,
            field_cells: 0,
            pass: true,
        });
    }
    let fp = f.eval(p);
    let half = 1.5 * delta_p;
    let local = Window::new(p.x - half, p.x + half, p.y - half, p.y + half);
    let seed_tol = f.accuracy.value_tol(f.window());

    let marched = if upper {
        let a0 = fp - 0.5 * delta_p;
        sweep_distance_from(m, local, grid_n, grid_n, |q| f.eval(q) <= a0 + seed_tol)
    } else {
        let b0 = fp + 0.5 * delta_p;
        sweep_distance_to(m, local, grid_n, grid_n, |q| f.eval(q) >= b0 - seed_tol)
    };
    let h = marched.spacing();
    let ball = 0.25 * delta_p;

    // kinks of the marched field inside the comparison ball
    let marched_marks: Vec<Point2> = detect_kinks(&marched, 0.15)
        .into_iter()
        .map(|k| k.point)
        .filter(|q| q.chart_dist(p) <= ball && local.margin(*q) > 2.0 * h)
        // kinks on the seed boundary are creases of the seed set, not cut points
        .filter(|q| marched.sample(*q) > 2.0 * h)
        .collect();

    // f-side singular cells inside the ball, fan-confirmed
    let fvals = Grid::from_fn(local, grid_n, grid_n, |q| f.eval(q));
    let scale_floor = 2.0 * h;
    let field_marks: Vec<Point2> = detect_kinks(&fvals, 0.15)
        .into_iter()
        .map(|k| k.point)
        .filter(|q| q.chart_dist(p) <= ball)
        .filter(|q| {
            let c = classify_point_at_scale(f, m, *q, delta_p * 0.5, 360, scale_floor);
            c.label == expected
        })
        .collect();

    let gap = hausdorff(&marched_marks, &field_marks);
    let tol = 2.0 * h;
    Ok(EquivalenceReport {
        applicable: true,
        hausdorff_gap: gap,
        tol,
        marched_cells: marched_marks.len(),
        field_cells: field_marks.len(),
        pass: gap <= tol && !field_marks.is_empty() && !marched_marks.is_empty(),
    })
}

/// Symmetric Hausdorff distance between finite point sets (chart metric).
pub fn hausdorff(a: &[Point2], b: &[Point2]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one_sided = |x: &[Point2], y: &[Point2]| {
        x.iter()
            .map(|p| y.iter().map(|q| p.chart_dist(*q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub applicable: bool,
    pub c_est: f64,
    pub max_deviation: f64,
    pub tol: f64,
    pub lower_cells: usize,
    pub pass: bool,
}

/// Check f = d_N + c against a marched oracle, where N = f^{-1}(c) must
/// contain the detected lower locus. Fields without a detected lower locus
/// report not-applicable.
pub fn check_dist_reconstruction(
    f: &ScalarField,
    m: &MetricField,
    c_est: f64,
    window: Window,
    grid_n: usize,
) -> Result<ReconstructionReport> {
    let vals = Grid::from_fn(window, grid_n, grid_n, |p| f.eval(p));
    let h = vals.spacing();
    let scale_floor = 2.0 * h;
    let mut lower_cells = 0usize;
    let mut off_level = 0usize;
    for mark in detect_kinks(&vals, 0.15) {
        let pc = classify_point_at_scale(f, m, mark.point, 8.0 * h, 360, scale_floor);
        if pc.label == SingularLabel::LowerSingular {
            lower_cells += 1;
            if (f.eval(mark.point) - c_est).abs() > 2.0 * h {
                off_level += 1;
            }
        }
    }
    if lower_cells == 0 || off_level > 0 {
        return Ok(ReconstructionReport {
            applicable: false,
            c_est,
            max_deviation: f64::NAN,
            tol: 2.0 * h,
            lower_cells,
            pass: false,
        });
    }
    let seed_tol = f.accuracy.value_tol(&window).max(0.25 * h);
    let marched = sweep_distance_from(m, window, grid_n, grid_n, |p| f.eval(p) <= c_est + seed_tol);
    let mut max_dev: f64 = 0.0;
    for j in 0..grid_n {
        for i in 0..grid_n {
            let p = marched.point(i, j);
            let d = marched.get(i, j);
            if d.is_finite() {
                max_dev = max_dev.max((f.eval(p) - (d + c_est)).abs());
            }
        }
    }
    let tol = 2.0 * h + seed_tol;
    Ok(ReconstructionReport {
        applicable: true,
        c_est,
        max_deviation: max_dev,
        tol,
        lower_cells,
        pass: max_dev <= tol,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitInequalityReport {
    /// worst inequality margin over fan directions (>= 0 up to tolerance)
    pub margin: f64,
    /// |difference quotient - g_w(w, v)| for the limit direction
    pub quotient_gap: f64,
    pub emanating: bool,
    pub pass: bool,
}

/// First-variation limit inequalities for a sequence of f-geodesics
/// whose base points approach p. For emanating sequences the limit pairing
/// g_w(w, v) dominates g over every outgoing f-geodesic at p; for ending
/// sequences it is dominated by every incoming one. The difference quotient
/// of f along the approach must converge to the same pairing.
pub fn check_limit_inequalities(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    sequence: &[FGeodesicCertificate],
    emanating: bool,
) -> Result<LimitInequalityReport> {
    if sequence.len() < 2 {
        return Err(Error::Precondition("need at least two sequence elements".into()));
    }
    let base_of = |c: &FGeodesicCertificate| {
        if emanating {
            (c.segment.start_point(), c.segment.start_dir)
        } else {
            (c.segment.end_point(), c.segment.end_velocity())
        }
    };
    let last = &sequence[sequence.len() - 1];
    let (q, w_last) = base_of(last);
    let dq = dist(m, p, q);
    if !(dq > 0.0) {
        return Err(Error::Precondition("sequence base point coincides with p".into()));
    }
    // Richardson extrapolation of the limit direction: probe directions
    // converge linearly in the approach scale, so extrapolating the angle
    // from the last two elements removes the leading error.
    let (q_prev, w_prev) = base_of(&sequence[sequence.len() - 2]);
    let s_last = dist(m, p, q);
    let s_prev = dist(m, p, q_prev);
    let w_inf = if s_prev > s_last && angle_between(w_last, w_prev) < 0.1 {
        let th_last = w_last.angle();
        let mut th_prev = w_prev.angle();
        // unwrap across the branch cut
        if th_prev - th_last > std::f64::consts::PI {
            th_prev -= std::f64::consts::TAU;
        } else if th_last - th_prev > std::f64::consts::PI {
            th_prev += std::f64::consts::TAU;
        }
        let th = th_last + (th_last - th_prev) * s_last / (s_prev - s_last);
        m.unit_vector(p, Vec2::from_angle(th)).unwrap_or(w_last)
    } else {
        w_last
    };
    // v^f: F-unit direction at p of the minimal geodesic toward q
    let reps = crate::geodesic::minimal_segments(m, p, q, 1e-2, 1e-5)?;
    let v_f = reps[0].start_dir;

    let g_w = m.g_inner(p, w_inf, w_inf, v_f);
    let fan = direction_fan(
        f,
        m,
        p,
        crate::fgeod::default_probe_len(f.window()),
        crate::fgeod::DEFAULT_ANGULAR_RES,
    );
    let side = if emanating { &fan.outgoing } else { &fan.incoming };
    if side.is_empty() {
        return Err(Error::Precondition(
            "no f-geodesics through p on the required side".into(),
        ));
    }
    let mut margin = f64::INFINITY;
    for cluster in side {
        let g_gamma = m.g_inner(p, cluster.dir, cluster.dir, v_f);
        let this = if emanating { g_w - g_gamma } else { g_gamma - g_w };
        margin = margin.min(this);
    }
    let quotient = (f.eval(q) - f.eval(p)) / dq;
    let quotient_gap = (quotient - g_w).abs();
    Ok(LimitInequalityReport {
        margin,
        quotient_gap,
        emanating,
        pass: margin >= -1e-3 && quotient_gap <= 1e-2,
    })
}

/// Build a sequence of certified f-geodesic probes at points approaching p
/// along the chart direction `approach`, for limit-inequality checks. Each
/// probe is the best fan direction at q_i on the requested side, kept
/// angle-coherent along the sequence.
pub fn build_limit_sequence(
    f: &ScalarField,
    m: &MetricField,
    p: Point2,
    approach: Vec2,
    scales: &[f64],
    emanating: bool,
) -> Result<Vec<FGeodesicCertificate>> {
    let mut out = Vec::new();
    let mut prev_dir: Option<Vec2> = None;
    for &s in scales {
        let q = p.offset(approach.normalized().scale(s));
        let fan = direction_fan(f, m, q, crate::fgeod::default_probe_len(f.window()), 720);
        let side = if emanating { &fan.outgoing } else { &fan.incoming };
        if side.is_empty() {
            continue;
        }
        let pick = match prev_dir {
            None => &side[0],
            Some(pd) => side
                .iter()
                .min_by(|a, b| {
                    angle_between(a.dir, pd)
                        .partial_cmp(&angle_between(b.dir, pd))
                        .unwrap()
                })
                .unwrap(),
        };
        prev_dir = Some(pick.dir);
        let delta = fan.delta_out.max(fan.delta_in);
        let seg = if emanating {
            integrate_geodesic(m, q, pick.dir, delta.max(1e-6), delta.max(1e-6) / 16.0, None)?
        } else {
            incoming_probe_segment(m, q, pick.dir.angle(), delta.max(1e-6), 16)?
        };
        let residual = f_residual(f, &seg);
        let tol = f.accuracy.residual_tol(seg.length());
        out.push(FGeodesicCertificate {
            segment: seg,
            field_name: f.name.clone(),
            residual,
            tol,
            certified: residual <= tol,
            canonical: false,
            minimality_gap: None,
        });
    }
    if out.len() < 2 {
        return Err(Error::NumericFailure("could not certify an approach sequence".into()));
    }
    Ok(out)
}
