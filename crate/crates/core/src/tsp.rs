//! Closed tours over small point sets: nearest-neighbour construction from
//! many starts, each polished by 2-opt and Or-opt until no improving move is
//! left.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point2;

/// Above this size only a seeded sample of start cities is tried.
const MAX_STARTS: usize = 64;
const IMPROVEMENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub order: Vec<usize>,
    pub length_m: f64,
}

impl Tour {
    /// Position of point `idx` in the visiting order.
    pub fn position_of(&self, idx: usize) -> Option<usize> {
        self.order.iter().position(|&i| i == idx)
    }
}

/// Closed-loop length of visiting `points` in `order`, including the return edge.
pub fn tour_length(points: &[Point2], order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    order
        .iter()
        .zip(order.iter().cycle().skip(1))
        .map(|(&a, &b)| points[a].dist(points[b]))
        .sum()
}

/// Forward distance along a closed polyline from vertex `from` to vertex `to`.
pub fn cyclic_path_distance(path: &[Point2], from: usize, to: usize) -> f64 {
    let n = path.len();
    if n == 0 || from == to {
        return 0.0;
    }
    let mut d = 0.0;
    let mut i = from;
    while i != to {
        let j = (i + 1) % n;
        d += path[i].dist(path[j]);
        i = j;
    }
    d
}

/// Distance travelled along `tour` from point `from_idx` forward to point `to_idx`.
pub fn path_distance_between(points: &[Point2], tour: &Tour, from_idx: usize, to_idx: usize) -> Option<f64> {
    let a = tour.position_of(from_idx)?;
    let b = tour.position_of(to_idx)?;
    let path: Vec<Point2> = tour.order.iter().map(|&i| points[i]).collect();
    Some(cyclic_path_distance(&path, a, b))
}

fn nearest_neighbour(points: &[Point2], start: usize) -> Vec<usize> {
    let n = points.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, &p) in points.iter().enumerate() {
            if !visited[j] {
                let d = points[cur].dist(p);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
        }
        visited[best] = true;
        order.push(best);
        cur = best;
    }
    order
}

/// Reverses tour segments while doing so shortens the tour.
fn two_opt(points: &[Point2], order: &mut [usize]) -> bool {
    let n = order.len();
    let mut any = false;
    if n < 4 {
        return false;
    }
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n - 1 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b) = (points[order[i]], points[order[i + 1]]);
                let (c, d) = (points[order[j]], points[order[(j + 1) % n]]);
                let delta = a.dist(c) + b.dist(d) - a.dist(b) - c.dist(d);
                if delta < -IMPROVEMENT_EPS {
                    order[i + 1..=j].reverse();
                    improved = true;
                    any = true;
                }
            }
        }
    }
    any
}

/// Moves runs of 1..=3 consecutive cities to a cheaper slot, possibly reversed.
fn or_opt(points: &[Point2], order: &mut Vec<usize>) -> bool {
    let n = order.len();
    if n < 5 {
        return false;
    }
    let d = |a: usize, b: usize| points[a].dist(points[b]);
    for seg in 1..=3usize.min(n - 3) {
        for start in 0..n {
            let prev = order[(start + n - 1) % n];
            let first = order[start];
            let last = order[(start + seg - 1) % n];
            let next = order[(start + seg) % n];
            let removal_gain = d(prev, first) + d(last, next) - d(prev, next);
            // Candidate edges (u, v) outside the run.
            for k in 0..n - seg - 1 {
                let u = order[(start + seg + k) % n];
                let v = order[(start + seg + k + 1) % n];
                let forward = d(u, first) + d(last, v) - d(u, v);
                let backward = d(u, last) + d(first, v) - d(u, v);
                let (cost, reversed) = if backward < forward {
                    (backward, true)
                } else {
                    (forward, false)
                };
                if cost < removal_gain - IMPROVEMENT_EPS {
                    let mut run: Vec<usize> = (0..seg).map(|t| order[(start + t) % n]).collect();
                    if reversed {
                        run.reverse();
                    }
                    let rest: Vec<usize> = (0..n - seg).map(|t| order[(start + seg + t) % n]).collect();
                    let mut out = Vec::with_capacity(n);
                    for (t, &city) in rest.iter().enumerate() {
                        out.push(city);
                        if t == k {
                            out.extend_from_slice(&run);
                        }
                    }
                    *order = out;
                    return true;
                }
            }
        }
    }
    false
}

fn polish(points: &[Point2], order: &mut Vec<usize>) {
    loop {
        two_opt(points, order);
        if !or_opt(points, order) {
            break;
        }
    }
}

/// Rotates the tour so it starts at its smallest index; keeps output stable.
fn canonical(mut order: Vec<usize>) -> Vec<usize> {
    if let Some(pos) = order.iter().enumerate().min_by_key(|(_, &v)| v).map(|(i, _)| i) {
        order.rotate_left(pos);
    }
    order
}

pub fn solve_tsp(points: &[Point2], seed: u64) -> Tour {
    let n = points.len();
    if n <= 3 {
        let order: Vec<usize> = (0..n).collect();
        let length_m = tour_length(points, &order);
        return Tour { order, length_m };
    }
    let starts: Vec<usize> = if n <= MAX_STARTS {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = sample(&mut rng, n, MAX_STARTS).into_vec();
        s.sort_unstable();
        s
    };

    let mut best: Option<Tour> = None;
    for start in starts {
        let mut order = nearest_neighbour(points, start);
        polish(points, &mut order);
        let length_m = tour_length(points, &order);
        if best.as_ref().map_or(true, |b| length_m < b.length_m - IMPROVEMENT_EPS) {
            best = Some(Tour {
                order: canonical(order),
                length_m,
            });
        }
    }
    best.expect("at least one start")
}

/// Best nearest-neighbour tour without local search; reference for tests.
pub fn nearest_neighbour_tour(points: &[Point2]) -> Tour {
    (0..points.len().max(1))
        .filter(|&s| s < points.len())
        .map(|s| {
            let order = nearest_neighbour(points, s);
            let length_m = tour_length(points, &order);
            Tour { order, length_m }
        })
        .min_by(|a, b| a.length_m.total_cmp(&b.length_m))
        .unwrap_or(Tour {
            order: Vec::new(),
            length_m: 0.0,
        })
}
