//! Plane primitives shared by every module: points, vectors, symmetric
//! 2x2 forms and rectangular windows.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn to(self, other: Point2) -> Vec2 {
        Vec2::new(other.x - self.x, other.y - self.y)
    }

    pub fn offset(self, v: Vec2) -> Point2 {
        Point2::new(self.x + v.x, self.y + v.y)
    }

    /// Euclidean chart distance. Metric distances live in `geodesic`.
    pub fn chart_dist(self, other: Point2) -> f64 {
        self.to(other).norm()
    }
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2 { x: 0.0, y: 0.0 }
    }

    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm2(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    pub fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }

    /// Euclidean unit vector; zero input is returned unchanged.
    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        if n == 0.0 {
            self
        } else {
            self.scale(1.0 / n)
        }
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

/// Smallest absolute angle between two directions, in [0, pi].
pub fn angle_between(a: Vec2, b: Vec2) -> f64 {
    let d = a.normalized().dot(b.normalized()).clamp(-1.0, 1.0);
    d.acos()
}

/// Symmetric 2x2 bilinear form; the fundamental tensor is stored this way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        SymMat2 { a11, a12, a22 }
    }

    pub fn identity() -> Self {
        SymMat2::new(1.0, 0.0, 1.0)
    }

    pub fn diag(a: f64, b: f64) -> Self {
        SymMat2::new(a, 0.0, b)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a12 * v.x + self.a22 * v.y)
    }

    pub fn inner(&self, u: Vec2, v: Vec2) -> f64 {
        u.dot(self.apply(v))
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Closed-form eigenvalues, ascending.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let tr = self.a11 + self.a22;
        let disc = ((self.a11 - self.a22) * 0.5).hypot(self.a12);
        (tr * 0.5 - disc, tr * 0.5 + disc)
    }

    pub fn inverse(&self) -> SymMat2 {
        let d = self.det();
        SymMat2::new(self.a22 / d, -self.a12 / d, self.a11 / d)
    }

    pub fn max_abs_diff(&self, other: &SymMat2) -> f64 {
        (self.a11 - other.a11)
            .abs()
            .max((self.a12 - other.a12).abs())
            .max((self.a22 - other.a22).abs())
    }
}

/// Axis-aligned computational window. Every scenario declares one; quantities
/// are only reported for trajectories that stay inside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        assert!(x0 < x1 && y0 < y1, "degenerate window");
        Window { x0, x1, y0, y1 }
    }

    pub fn square(half: f64) -> Self {
        Window::new(-half, half, -half, half)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    /// Distance from p to the window boundary (positive inside).
    pub fn margin(&self, p: Point2) -> f64 {
        (p.x - self.x0)
            .min(self.x1 - p.x)
            .min(p.y - self.y0)
            .min(self.y1 - p.y)
    }

    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }

    pub fn expand(&self, pad: f64) -> Window {
        Window::new(self.x0 - pad, self.x1 + pad, self.y0 - pad, self.y1 + pad)
    }
}

/// Golden-section minimization of a 1-D function on [a, b].
/// The objective must be unimodal on the bracket for an exact answer;
/// on merely continuous input it still returns a local minimum.
pub fn golden_min(mut a: f64, mut b: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diag() {
        let m = SymMat2::diag(1.0, 4.0);
        let (lo, hi) = m.eigenvalues();
        assert!((lo - 1.0).abs() < 1e-14);
        assert!((hi - 4.0).abs() < 1e-14);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let (x, _) = golden_min(-1.0, 2.0, 80, |t| (t - 0.7) * (t - 0.7));
        assert!((x - 0.7).abs() < 1e-9);
    }

    #[test]
    fn window_margin() {
        let w = Window::square(2.0);
        assert!((w.margin(Point2::new(1.0, 0.0)) - 1.0).abs() < 1e-14);
        assert!(w.contains(Point2::new(2.0, -2.0)));
    }
}
