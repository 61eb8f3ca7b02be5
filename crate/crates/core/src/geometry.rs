//! Planar geometry shared by the planners: points, annuli and a refined
//! polar grid search used for every constrained waypoint placement.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Horizontal position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn from_polar(center: Point2, radius: f64, angle: f64) -> Self {
        Point2::new(center.x + radius * angle.cos(), center.y + radius * angle.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Polar angle of `self` seen from `center`, in radians.
    pub fn angle_from(self, center: Point2) -> f64 {
        (self.y - center.y).atan2(self.x - center.x)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        self + (other - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Closed annulus `inner <= |p - center| <= outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: Point2,
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn new(center: Point2, inner: f64, outer: f64) -> Self {
        Annulus { center, inner, outer }
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let d = p.dist(self.center);
        d >= self.inner - tol && d <= self.outer + tol
    }

    /// Point on the ray from the center through `p` clamped radially into the annulus.
    pub fn clamp_radially(&self, p: Point2) -> Point2 {
        let d = p.dist(self.center);
        let angle = if d > 0.0 { p.angle_from(self.center) } else { 0.0 };
        Point2::from_polar(self.center, d.clamp(self.inner, self.outer), angle)
    }
}

/// Detour added to the straight segment `a -> b` by passing through `q`.
pub fn detour(a: Point2, q: Point2, b: Point2) -> f64 {
    a.dist(q) + q.dist(b) - a.dist(b)
}

/// Closest point to `p` on segment `a -> b`.
pub fn closest_on_segment(p: Point2, a: Point2, b: Point2) -> Point2 {
    let ab = b - a;
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return a;
    }
    let t = (((p - a).x * ab.x + (p - a).y * ab.y) / len2).clamp(0.0, 1.0);
    a + ab * t
}

/// Points where the circle `|q - c| = r` meets segment `a -> b`.
pub fn circle_segment_intersections(c: Point2, r: f64, a: Point2, b: Point2) -> Vec<Point2> {
    let d = b - a;
    let f = a - c;
    let qa = d.x * d.x + d.y * d.y;
    if qa == 0.0 {
        return Vec::new();
    }
    let qb = 2.0 * (f.x * d.x + f.y * d.y);
    let qc = f.x * f.x + f.y * f.y - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    [(-qb - s) / (2.0 * qa), (-qb + s) / (2.0 * qa)]
        .into_iter()
        .filter(|t| (0.0..=1.0).contains(t))
        .map(|t| a + d * t)
        .collect()
}

/// Intersection points of two circles.
pub fn circle_circle_intersections(c0: Point2, r0: f64, c1: Point2, r1: f64) -> Vec<Point2> {
    let d = c0.dist(c1);
    if d == 0.0 || d > r0 + r1 || d < (r0 - r1).abs() {
        return Vec::new();
    }
    let a = (r0 * r0 - r1 * r1 + d * d) / (2.0 * d);
    let h = (r0 * r0 - a * a).max(0.0).sqrt();
    let u = (c1 - c0) * (1.0 / d);
    let mid = c0 + u * a;
    let perp = Point2::new(-u.y, u.x);
    vec![mid + perp * h, mid - perp * h]
}

/// Smallest distance between two points moving linearly and synchronously
/// from `a0`/`b0` to `a1`/`b1`.
pub fn min_separation(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> f64 {
    closest_on_segment(Point2::ORIGIN, a0 - b0, a1 - b1).norm()
}

/// Nearest point to `p` inside every disk `(center, radius)`, if the
/// intersection is nonempty. Exact for up to two disks.
pub fn project_into_disks(p: Point2, disks: &[(Point2, f64)]) -> Option<Point2> {
    let inside = |q: Point2| disks.iter().all(|&(c, r)| q.dist(c) <= r * (1.0 + 1e-12) + 1e-9);
    if inside(p) {
        return Some(p);
    }
    let mut candidates = Vec::new();
    for &(c, r) in disks {
        let d = p.dist(c);
        candidates.push(if d > 0.0 { c + (p - c) * (r / d) } else { c });
    }
    for (i, &(c0, r0)) in disks.iter().enumerate() {
        for &(c1, r1) in &disks[i + 1..] {
            candidates.extend(circle_circle_intersections(c0, r0, c1, r1));
        }
    }
    candidates
        .into_iter()
        .filter(|&q| inside(q))
        .min_by(|a, b| a.dist(p).total_cmp(&b.dist(p)))
}

/// Angular and radial resolution of the polar search grid.
#[derive(Debug, Clone, Copy)]
pub struct PolarGrid {
    pub angle_steps: usize,
    pub radius_steps: usize,
    pub refine_rounds: usize,
}

impl Default for PolarGrid {
    fn default() -> Self {
        PolarGrid {
            angle_steps: 360,
            radius_steps: 200,
            refine_rounds: 5,
        }
    }
}

/// Minimizes `cost` over the feasible part of the annulus `[r_min, r_max]`
/// around `center`.
///
/// The coarse polar grid is followed by local refinement around the best cell.
/// `extra` candidates (boundary intersections, analytic guesses) are scored
/// alongside the grid and win when they are feasible and cheaper.
pub fn polar_search<F, C>(
    center: Point2,
    r_min: f64,
    r_max: f64,
    grid: PolarGrid,
    extra: &[Point2],
    feasible: F,
    cost: C,
) -> Option<(Point2, f64)>
where
    F: Fn(Point2) -> bool,
    C: Fn(Point2) -> f64,
{
    if !(r_max >= r_min) || r_max < 0.0 {
        return None;
    }
    let r_min = r_min.max(0.0);
    let d_theta = std::f64::consts::TAU / grid.angle_steps as f64;
    let d_r = if grid.radius_steps == 0 {
        0.0
    } else {
        (r_max - r_min) / grid.radius_steps as f64
    };

    let mut best: Option<(f64, f64, Point2, f64)> = None; // (angle, radius, point, cost)
    let consider = |angle: f64, radius: f64, best: &mut Option<(f64, f64, Point2, f64)>| {
        let p = Point2::from_polar(center, radius, angle);
        if !feasible(p) {
            return;
        }
        let c = cost(p);
        if best.as_ref().map_or(true, |b| c < b.3) {
            *best = Some((angle, radius, p, c));
        }
    };

    for i in 0..grid.angle_steps {
        let angle = i as f64 * d_theta;
        for j in 0..=grid.radius_steps {
            consider(angle, r_min + j as f64 * d_r, &mut best);
        }
    }

    for &p in extra {
        if !p.is_finite() || !feasible(p) {
            continue;
        }
        let c = cost(p);
        if best.as_ref().map_or(true, |b| c < b.3) {
            let radius = p.dist(center);
            best = Some((p.angle_from(center), radius, p, c));
        }
    }

    let (mut span_t, mut span_r) = (d_theta, d_r.max(1e-9));
    for _ in 0..grid.refine_rounds {
        let Some((a0, r0, _, _)) = best else { break };
        const SUB: i32 = 10;
        for i in -SUB..=SUB {
            let angle = a0 + span_t * i as f64 / SUB as f64;
            for j in -SUB..=SUB {
                let radius = (r0 + span_r * j as f64 / SUB as f64).clamp(r_min, r_max);
                consider(angle, radius, &mut best);
            }
        }
        span_t /= 5.0;
        span_r /= 5.0;
    }

    best.map(|(_, _, p, c)| (p, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separation_of_crossing_paths() {
        let d = min_separation(
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(10.0, 1.0),
            Point2::new(0.0, 1.0),
        );
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_into_lens() {
        let disks = [(Point2::new(0.0, 0.0), 5.0), (Point2::new(8.0, 0.0), 5.0)];
        let q = project_into_disks(Point2::new(4.0, 10.0), &disks).unwrap();
        assert!((q - Point2::new(4.0, 3.0)).norm() < 1e-9);
        assert_eq!(project_into_disks(Point2::new(4.0, 0.0), &disks), Some(Point2::new(4.0, 0.0)));
        let apart = [(Point2::new(0.0, 0.0), 1.0), (Point2::new(5.0, 0.0), 1.0)];
        assert!(project_into_disks(Point2::ORIGIN, &apart).is_none());
    }

    #[test]
    fn detour_zero_on_segment() {
        let a = Point2::new(0.0, 0.0);
        let b = Point2::new(10.0, 0.0);
        assert!(detour(a, Point2::new(3.0, 0.0), b).abs() < 1e-12);
        assert!(detour(a, Point2::new(3.0, 4.0), b) > 0.0);
    }

    #[test]
    fn circle_segment_hits() {
        let hits = circle_segment_intersections(
            Point2::ORIGIN,
            5.0,
            Point2::new(-10.0, 3.0),
            Point2::new(10.0, 3.0),
        );
        assert_eq!(hits.len(), 2);
        for h in hits {
            assert!((h.norm() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_circle_hits() {
        let pts = circle_circle_intersections(Point2::ORIGIN, 5.0, Point2::new(8.0, 0.0), 5.0);
        assert_eq!(pts.len(), 2);
        for p in pts {
            assert!((p.x - 4.0).abs() < 1e-12);
            assert!((p.y.abs() - 3.0).abs() < 1e-12);
        }
        assert!(circle_circle_intersections(Point2::ORIGIN, 1.0, Point2::new(8.0, 0.0), 1.0).is_empty());
    }

    #[test]
    fn polar_search_finds_nearest_point_of_disk() {
        let target = Point2::new(10.0, 0.0);
        let (p, c) = polar_search(
            Point2::ORIGIN,
            0.0,
            3.0,
            PolarGrid::default(),
            &[],
            |_| true,
            |q| q.dist(target),
        )
        .unwrap();
        assert!((c - 7.0).abs() < 1e-6, "{c}");
        assert!((p.x - 3.0).abs() < 1e-4);
    }

    #[test]
    fn polar_search_empty_set() {
        let r = polar_search(Point2::ORIGIN, 5.0, 3.0, PolarGrid::default(), &[], |_| true, |q| q.x);
        assert!(r.is_none());
        let r = polar_search(Point2::ORIGIN, 1.0, 3.0, PolarGrid::default(), &[], |_| false, |q| q.x);
        assert!(r.is_none());
    }
}
