//! Vertex-centered scalar grids and a Finsler fast-sweeping eikonal solver.
//!
//! The sweeper computes first-order distance fields from a seed region,
//! updating each node through the eight surrounding triangles with a
//! semi-Lagrangian rule
//!     u(x) = min_s (1-s) u(a) + s u(b) + F(x, x - y(s)),
//! which handles asymmetric norms directly. Grid-derived quantities carry
//! a tolerance of two grid spacings everywhere downstream.

use serde::{Deserialize, Serialize};

use crate::geom::{golden_min, Point2, Vec2, Window};
use crate::metric::MetricField;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(window: Window, nx: usize, ny: usize, fill: f64) -> Self {
        assert!(nx >= 2 && ny >= 2);
        Grid { window, nx, ny, data: vec![fill; nx * ny] }
    }

    pub fn from_fn(window: Window, nx: usize, ny: usize, f: impl Fn(Point2) -> f64) -> Self {
        let mut g = Grid::new(window, nx, ny, 0.0);
        for j in 0..ny {
            for i in 0..nx {
                let p = g.point(i, j);
                g.data[j * nx + i] = f(p);
            }
        }
        g
    }

    pub fn dx(&self) -> f64 {
        self.window.width() / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.window.height() / (self.ny - 1) as f64
    }

    /// The larger grid spacing; "2 * grid-spacing" tolerances use this.
    pub fn spacing(&self) -> f64 {
        self.dx().max(self.dy())
    }

    pub fn point(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.window.x0 + i as f64 * self.dx(),
            self.window.y0 + j as f64 * self.dy(),
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nx + i] = v;
    }

    /// Bilinear interpolation with clamping to the window.
    pub fn sample(&self, p: Point2) -> f64 {
        let fx = ((p.x - self.window.x0) / self.dx()).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p.y - self.window.y0) / self.dy()).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v00 = self.get(i, j);
        let v10 = self.get(i + 1, j);
        let v01 = self.get(i, j + 1);
        let v11 = self.get(i + 1, j + 1);
        v00 * (1.0 - tx) * (1.0 - ty) + v10 * tx * (1.0 - ty) + v01 * (1.0 - tx) * ty + v11 * tx * ty
    }

    /// Central-difference chart gradient.
    pub fn gradient(&self, p: Point2) -> Vec2 {
        let hx = self.dx();
        let hy = self.dy();
        let gx = (self.sample(Point2::new(p.x + hx, p.y)) - self.sample(Point2::new(p.x - hx, p.y)))
            / (2.0 * hx);
        let gy = (self.sample(Point2::new(p.x, p.y + hy)) - self.sample(Point2::new(p.x, p.y - hy)))
            / (2.0 * hy);
        Vec2::new(gx, gy)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().cloned().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Exact 1-D minimization of (1-s) ua + s ub + |d - s e| over s in [0,1]
/// for the Euclidean leg cost.
fn euclid_triangle_update(ua: f64, ub: f64, d: Vec2, e: Vec2) -> f64 {
    let du = ub - ua;
    let a = e.norm2();
    let b = d.dot(e);
    let phi = |s: f64| (1.0 - s) * ua + s * ub + d.sub(e.scale(s)).norm();
    let mut best = phi(0.0).min(phi(1.0));
    // interior stationary point: (b - s a)^2 = du^2 (|d|^2 - 2 s b + s^2 a)
    let qa = a * (a - du * du);
    let qb = -2.0 * b * (a - du * du);
    let qc = b * b - du * du * d.norm2();
    if qa.abs() > 1e-300 {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for s in [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)] {
                if s > 0.0 && s < 1.0 {
                    best = best.min(phi(s));
                }
            }
        }
    }
    best
}

/// Distance field from a seed region, swept to convergence.
///
/// `seed` marks grid nodes inside the source set (u = 0 there); every other
/// node receives the first-arrival cost under the metric's norm.
pub fn sweep_distance_from(
    m: &MetricField,
    window: Window,
    nx: usize,
    ny: usize,
    seed: impl Fn(Point2) -> bool,
) -> Grid {
    let mut g = Grid::new(window, nx, ny, f64::INFINITY);
    let mut frozen = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if seed(g.point(i, j)) {
                g.set(i, j, 0.0);
                frozen[j * nx + i] = true;
            }
        }
    }

    let euclid_cost = matches!(m, MetricField::Euclidean | MetricField::FlatTorus { .. });
    // 8-neighborhood in angular order; consecutive pairs form the triangles
    let ring: [(i64, i64); 8] =
        [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

    let orderings: [(bool, bool); 4] = [(false, false), (true, false), (false, true), (true, true)];
    let max_rounds = 40;
    for _round in 0..max_rounds {
        let mut max_change: f64 = 0.0;
        for (rev_i, rev_j) in orderings {
            for jj in 0..ny {
                let j = if rev_j { ny - 1 - jj } else { jj };
                for ii in 0..nx {
                    let i = if rev_i { nx - 1 - ii } else { ii };
                    if frozen[j * nx + i] {
                        continue;
                    }
                    let x = g.point(i, j);
                    let mut best = g.get(i, j);
                    for k in 0..8 {
                        let (ai, aj) = ring[k];
                        let (bi, bj) = ring[(k + 1) % 8];
                        let pa = (i as i64 + ai, j as i64 + aj);
                        let pb = (i as i64 + bi, j as i64 + bj);
                        let inside = |(ci, cj): (i64, i64)| {
                            ci >= 0 && cj >= 0 && (ci as usize) < nx && (cj as usize) < ny
                        };
                        if !inside(pa) || !inside(pb) {
                            continue;
                        }
                        let ua = g.get(pa.0 as usize, pa.1 as usize);
                        let ub = g.get(pb.0 as usize, pb.1 as usize);
                        if !ua.is_finite() && !ub.is_finite() {
                            continue;
                        }
                        let a = g.point(pa.0 as usize, pa.1 as usize);
                        let b = g.point(pb.0 as usize, pb.1 as usize);
                        let cand = if !ua.is_finite() {
                            ub + m.norm(x, b.to(x))
                        } else if !ub.is_finite() {
                            ua + m.norm(x, a.to(x))
                        } else if euclid_cost {
                            euclid_triangle_update(ua, ub, a.to(x), a.to(b))
                        } else {
                            let phi = |s: f64| {
                                let y = Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
                                (1.0 - s) * ua + s * ub + m.norm(x, y.to(x))
                            };
                            let (_, v) = golden_min(0.0, 1.0, 24, phi);
                            v.min(phi(0.0)).min(phi(1.0))
                        };
                        if cand < best {
                            best = cand;
                        }
                    }
                    let old = g.get(i, j);
                    if best < old {
                        max_change =
                            max_change.max(if old.is_finite() { old - best } else { f64::INFINITY });
                        g.set(i, j, best);
                    }
                }
            }
        }
        if max_change < 1e-12 * window.diagonal() {
            break;
        }
    }
    g
}

/// Distance field *to* a seed region: sweep with the reversed metric.
pub fn sweep_distance_to(
    m: &MetricField,
    window: Window,
    nx: usize,
    ny: usize,
    seed: impl Fn(Point2) -> bool,
) -> Grid {
    sweep_distance_from(&m.reverse(), window, nx, ny, seed)
}
