//! Point-matching trajectory planning (PMTP).
//!
//! The slowest ring (largest tour time plus hovers) is the anchor. Its tour
//! becomes the global step sequence. Neighbouring rings are then fitted one at
//! a time, moving outward from the anchor in both directions: CPs that can be
//! collected while the reference ring hovers at one of its steps share that
//! step, the rest get a new step with the reference UAV parked at a
//! cheapest-detour waypoint, and the remaining steps are filled with escort
//! waypoints that keep the relay chain intact.

use serde::{Deserialize, Serialize};

use crate::channel::CoverageRadii;
use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::geometry::{
    circle_segment_intersections, closest_on_segment, detour, min_separation, polar_search,
    project_into_disks, Annulus, Point2, PolarGrid,
};
use crate::mission::{ring_tours, ring_tsp_times, Duty, MissionPlan};
use crate::model::Scenario;
use crate::partition::Topology;

/// Clearance added to the safety distance when placing waypoints.
const SEPARATION_MARGIN_M: f64 = 1e-3;
/// Closed-form P3 candidates within this relative detour of the grid optimum agree.
const P3_AGREEMENT: f64 = 0.01;
const LEN_EPS: f64 = 1e-9;

/// `result[i]` lists the indices of `cps_inner` within `r_u2u` of `cps_outer[i]`.
pub fn connectable_sets(cps_outer: &[Point2], cps_inner: &[Point2], r_u2u: f64) -> Vec<Vec<usize>> {
    cps_outer
        .iter()
        .map(|p| {
            cps_inner
                .iter()
                .enumerate()
                .filter(|(_, q)| p.dist(**q) <= r_u2u)
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// `(outer CP, inner CP)` pairs collected in the same step.
    pub pairs: Vec<(usize, usize)>,
    /// Outer CPs that need a generated waypoint for the inner UAV.
    pub unmatched_outer: Vec<usize>,
    /// Inner CPs that need an escort waypoint for the outer UAV.
    pub unmatched_inner: Vec<usize>,
}

/// Forward path lengths along a closed polyline.
struct CyclicPath {
    cum: Vec<f64>,
    total: f64,
}

impl CyclicPath {
    fn new(points: &[Point2]) -> Self {
        let n = points.len();
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            cum.push(acc);
            acc += points[i].dist(points[(i + 1) % n]);
        }
        CyclicPath { cum, total: acc }
    }

    /// Distance from slot `a` forward to slot `b`; a full loop when `a == b`.
    fn forward(&self, a: usize, b: usize) -> f64 {
        if b > a {
            self.cum[b] - self.cum[a]
        } else {
            self.total - self.cum[a] + self.cum[b]
        }
    }
}

/// Greedy monotone matching of `outer` items (in visiting order) to slots,
/// scanning slots forward from `start`. Consecutive matches must satisfy
/// `‖outer_i − outer_j‖ ≤ slot path distance`, including the closing pair.
fn greedy_match(
    outer: &[Point2],
    n_slots: usize,
    start: usize,
    eligible: &dyn Fn(usize, usize) -> bool,
    path: &CyclicPath,
) -> Vec<Option<usize>> {
    let mut out = vec![None; outer.len()];
    let mut cursor = 0;
    let mut last: Option<(usize, usize)> = None;
    for (i, &p) in outer.iter().enumerate() {
        for off in cursor..n_slots {
            let s = (start + off) % n_slots;
            if !eligible(i, s) {
                continue;
            }
            if let Some((li, ls)) = last {
                if outer[li].dist(p) > path.forward(ls, s) + LEN_EPS {
                    continue;
                }
            }
            out[i] = Some(s);
            last = Some((i, s));
            cursor = off + 1;
            break;
        }
    }
    loop {
        let matched: Vec<(usize, usize)> = out
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (i, s)))
            .collect();
        if matched.len() < 2 {
            break;
        }
        let (fi, fs) = matched[0];
        let (li, ls) = *matched.last().unwrap();
        if outer[li].dist(outer[fi]) <= path.forward(ls, fs) + LEN_EPS {
            break;
        }
        out[li] = None;
    }
    out
}

/// Pairs outer-ring CPs with inner-ring CPs along both tours.
///
/// The outer tour is walked in order with a forward-only cursor on the inner
/// tour. An outer CP takes the first candidate at or after the cursor that is
/// connectable, hovers at least as long, and keeps the distance between
/// consecutive matched outer CPs within the inner tour distance between their
/// partners.
pub fn match_pairs(
    outer_tour: &[usize],
    inner_tour: &[usize],
    cps: &[Point2],
    hover_s: &[f64],
    r_u2u: f64,
) -> Matching {
    let outer: Vec<Point2> = outer_tour.iter().map(|&k| cps[k]).collect();
    let inner: Vec<Point2> = inner_tour.iter().map(|&k| cps[k]).collect();
    let connectable = connectable_sets(&outer, &inner, r_u2u);
    let eligible = |i: usize, j: usize| {
        connectable[i].contains(&j) && hover_s[outer_tour[i]] <= hover_s[inner_tour[j]]
    };
    let path = CyclicPath::new(&inner);
    let assign = if inner.is_empty() {
        vec![None; outer.len()]
    } else {
        greedy_match(&outer, inner.len(), 0, &eligible, &path)
    };
    let mut m = Matching::default();
    let mut used = vec![false; inner_tour.len()];
    for (i, a) in assign.into_iter().enumerate() {
        match a {
            Some(j) => {
                used[j] = true;
                m.pairs.push((outer_tour[i], inner_tour[j]));
            }
            None => m.unmatched_outer.push(outer_tour[i]),
        }
    }
    m.unmatched_inner = inner_tour
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(&k, _)| k)
        .collect();
    m
}

/// Result of the new-waypoint problem for one unmatched outer CP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P3Waypoint {
    pub point: Point2,
    /// Index of the edge the waypoint is inserted into.
    pub edge: usize,
    pub detour_m: f64,
    /// Detour of the closed form built from the raw edge endpoints, if feasible.
    pub literal_detour_m: Option<f64>,
    /// Detour of the closed form built from endpoints relative to the CP, if feasible.
    pub centred_detour_m: Option<f64>,
}

impl P3Waypoint {
    pub fn literal_agrees(&self) -> bool {
        agrees(self.literal_detour_m, self.detour_m)
    }

    pub fn centred_agrees(&self) -> bool {
        agrees(self.centred_detour_m, self.detour_m)
    }
}

fn agrees(closed: Option<f64>, grid: f64) -> bool {
    closed.is_some_and(|c| c <= grid + P3_AGREEMENT * grid.max(1.0))
}

/// Consecutive point pairs of a closed tour.
pub fn closed_edges(points: &[Point2]) -> Vec<(Point2, Point2)> {
    let n = points.len();
    (0..n).map(|i| (points[i], points[(i + 1) % n])).collect()
}

fn in_band(q: Point2, center: Point2, r_min: f64, r_max: f64) -> bool {
    let d = q.dist(center);
    d >= r_min - 1e-9 && d <= r_max * (1.0 + 1e-12) + 1e-9
}

fn closed_form_point(p_k: Point2, dir: Point2, r_u2u: f64) -> Option<Point2> {
    let n = dir.norm();
    (n > 0.0).then(|| p_k + dir * (r_u2u / n))
}

/// Cheapest waypoint `q` for the inner UAV so that the outer UAV can collect at
/// `p_k`: `d_safe ≤ ‖q − p_k‖ ≤ r_u2u`, `q` inside `ring`, and the detour
/// `q` adds to one of `edges` minimal.
pub fn p3_waypoint(
    p_k: Point2,
    edges: &[(Point2, Point2)],
    r_u2u: f64,
    d_safe: f64,
    ring: &Annulus,
) -> Result<P3Waypoint> {
    p3_search(p_k, edges, r_u2u, d_safe, ring, PolarGrid::default())
}

fn p3_search(
    p_k: Point2,
    edges: &[(Point2, Point2)],
    r_u2u: f64,
    d_safe: f64,
    ring: &Annulus,
    grid: PolarGrid,
) -> Result<P3Waypoint> {
    if edges.is_empty() {
        return Err(Error::InvalidArgument("no edges to insert into".into()));
    }
    let feasible = |q: Point2| ring.contains(q, 1e-9) && in_band(q, p_k, d_safe, r_u2u);
    let best_edge = |q: Point2| {
        edges
            .iter()
            .enumerate()
            .map(|(l, &(a, b))| (l, detour(a, q, b)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
    };

    let mut extra = Vec::new();
    for &(a, b) in edges {
        extra.extend(circle_segment_intersections(p_k, r_u2u, a, b));
        extra.extend(circle_segment_intersections(p_k, d_safe, a, b));
        extra.push(closest_on_segment(p_k, a, b));
        for r in [ring.inner, ring.outer] {
            if r > 0.0 {
                extra.extend(circle_segment_intersections(ring.center, r, a, b));
            }
        }
    }
    let (point, detour_m) = polar_search(p_k, d_safe, r_u2u, grid, &extra, feasible, |q| best_edge(q).1)
        .ok_or_else(|| {
            Error::InfeasibleWaypoint(format!(
                "no point within [{d_safe:.1}, {r_u2u:.1}] m of ({:.1}, {:.1}) lies in the ring",
                p_k.x, p_k.y
            ))
        })?;
    let edge = best_edge(point).0;
    let (a, b) = edges[edge];
    let score = |q: Option<Point2>| q.filter(|&q| feasible(q)).map(|q| detour(a, q, b));
    let literal_detour_m = score(closed_form_point(p_k, a + b, r_u2u));
    let centred_detour_m = score(closed_form_point(p_k, a + b - p_k * 2.0, r_u2u));
    let wp = P3Waypoint {
        point,
        edge,
        detour_m,
        literal_detour_m,
        centred_detour_m,
    };
    if !wp.literal_agrees() && !wp.centred_agrees() {
        log::debug!(
            "closed-form waypoints disagree with the grid optimum ({detour_m:.2} m): literal {:?}, centred {:?}",
            literal_detour_m,
            centred_detour_m
        );
    }
    Ok(wp)
}

/// Constraints on an escort waypoint for the outer UAV while the inner UAV
/// hovers at `anchor`.
#[derive(Debug, Clone, Copy)]
pub struct EscortQuery {
    pub anchor: Point2,
    /// Outer UAV's previous and next fixed waypoints.
    pub prev_wp: Point2,
    pub next_wp: Point2,
    /// Largest allowed distance from `prev_wp` and to `next_wp`.
    pub prev_bound: f64,
    pub next_bound: f64,
    pub r_u2u: f64,
    pub d_safe: f64,
    pub ring: Annulus,
    /// Extra disk the waypoint must lie in, e.g. the BS link of UAV 1.
    pub uplink: Option<(Point2, f64)>,
}

impl EscortQuery {
    pub fn admits(&self, q: Point2) -> bool {
        in_band(q, self.anchor, self.d_safe, self.r_u2u)
            && self.ring.contains(q, 1e-9)
            && q.dist(self.prev_wp) <= self.prev_bound + 1e-9
            && q.dist(self.next_wp) <= self.next_bound + 1e-9
            && self.uplink.map_or(true, |(c, r)| q.dist(c) <= r)
    }
}

/// Escort waypoint with the smallest detour between the outer UAV's
/// neighbouring waypoints.
pub fn escort_waypoint(query: &EscortQuery) -> Result<Point2> {
    escort_search(query, PolarGrid::default(), &|_| true)
}

fn escort_search(query: &EscortQuery, grid: PolarGrid, extra_ok: &dyn Fn(Point2) -> bool) -> Result<Point2> {
    let q = *query;
    let mut extra = vec![closest_on_segment(q.anchor, q.prev_wp, q.next_wp)];
    extra.extend(circle_segment_intersections(q.anchor, q.r_u2u, q.prev_wp, q.next_wp));
    extra.extend(project_into_disks(
        q.prev_wp,
        &[(q.anchor, q.r_u2u), (q.next_wp, q.next_bound)],
    ));
    polar_search(
        q.anchor,
        q.d_safe,
        q.r_u2u,
        grid,
        &extra,
        |p| q.admits(p) && extra_ok(p),
        |p| detour(q.prev_wp, p, q.next_wp),
    )
    .map(|(p, _)| p)
    .ok_or_else(|| {
        Error::InfeasibleWaypoint(format!(
            "no escort point near ({:.1}, {:.1}) meets the link and pacing bounds",
            q.anchor.x, q.anchor.y
        ))
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    /// Zero-based index of the anchor (slowest) ring.
    pub anchor_ring: usize,
    /// Rings in the order they were fitted after the anchor.
    pub ring_order: Vec<usize>,
    pub matched_pairs: usize,
    pub inserted_waypoints: usize,
    /// Unmatched CPs collected at an existing step of the reference UAV.
    pub joined_steps: usize,
    pub interpolated_escorts: usize,
    pub searched_escorts: usize,
    pub relaxed_escorts: usize,
    pub p3_literal_agreements: usize,
    pub p3_centred_agreements: usize,
}

impl PlanStats {
    pub fn ring_passes(&self) -> usize {
        self.ring_order.len()
    }
}

#[derive(Debug, Clone)]
struct Step {
    pos: Vec<Option<Point2>>,
    duty: Vec<Duty>,
    hover: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Place {
    /// An existing step.
    Step(usize),
    /// A new step right after the given one.
    After(usize),
}

struct Insertion {
    after: usize,
    point: Point2,
    cp: usize,
}

struct Builder<'a> {
    m: usize,
    bs: Point2,
    radii: &'a CoverageRadii,
    d_safe: f64,
    v_max: f64,
    cps: Vec<Point2>,
    hover: Vec<f64>,
    annuli: Vec<Annulus>,
    grid: PolarGrid,
    steps: Vec<Step>,
    placed: Vec<bool>,
    stats: PlanStats,
}

impl<'a> Builder<'a> {
    fn n(&self) -> usize {
        self.steps.len()
    }

    fn pos(&self, ring: usize, s: usize) -> Point2 {
        self.steps[s].pos[ring].expect("ring positioned")
    }

    fn ring_path(&self, ring: usize) -> Vec<Point2> {
        (0..self.n()).map(|s| self.pos(ring, s)).collect()
    }

    /// Disks a waypoint of `ring` must lie in given its neighbour `peer`.
    fn link_disks(&self, ring: usize, peer: Point2) -> Vec<(Point2, f64)> {
        let mut d = vec![(peer, self.radii.r_u2u_m)];
        if ring == 0 {
            d.push((self.bs, self.radii.r_u2b_m));
        }
        d
    }

    /// Keeps `cand` for `ring` at step `s` clear of every other placed UAV, at
    /// the waypoint and along the legs to the given neighbouring waypoints.
    fn clear_of_others(&self, ring: usize, s: usize, cand: Point2, prev: Option<Point2>, next: Option<Point2>) -> bool {
        let n = self.n();
        let sp = (s + n - 1) % n;
        let sn = (s + 1) % n;
        let min = self.d_safe + SEPARATION_MARGIN_M;
        for o in 0..self.m {
            if o == ring {
                continue;
            }
            let Some(here) = self.steps[s].pos[o] else { continue };
            if cand.dist(here) < min {
                return false;
            }
            if let (Some(p), Some(op)) = (prev, self.steps[sp].pos[o]) {
                if min_separation(p, cand, op, here) < min {
                    return false;
                }
            }
            if let (Some(nx), Some(on)) = (next, self.steps[sn].pos[o]) {
                if min_separation(cand, nx, here, on) < min {
                    return false;
                }
            }
        }
        true
    }

    /// Nearest admissible point to `target` when the preferred placements fail.
    fn relaxed_point(
        &self,
        ring: usize,
        s: usize,
        peer: Point2,
        target: Point2,
        prev: Option<Point2>,
        next: Option<Point2>,
    ) -> Result<Point2> {
        let disks = self.link_disks(ring, peer);
        let within = |q: Point2| disks.iter().all(|&(c, r)| q.dist(c) <= r * (1.0 - 1e-12));
        let extra: Vec<Point2> = project_into_disks(target, &disks).into_iter().collect();
        polar_search(
            peer,
            self.d_safe + SEPARATION_MARGIN_M,
            self.radii.r_u2u_m * (1.0 - 1e-12),
            self.grid,
            &extra,
            |q| within(q) && self.clear_of_others(ring, s, q, prev, next),
            |q| q.dist(target),
        )
        .map(|(q, _)| q)
        .ok_or_else(|| {
            Error::InfeasibleWaypoint(format!("UAV {} has no admissible position at step {s}", ring + 1))
        })
    }

    /// Largest leg among placed UAVs into each step, meters.
    fn step_legs(&self) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|s| {
                let sp = (s + n - 1) % n;
                (0..self.m)
                    .filter(|&o| self.placed[o])
                    .map(|o| self.pos(o, sp).dist(self.pos(o, s)))
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    fn fit_ring(&mut self, ring: usize, reference: usize, ring_cps: &[usize], tour: &[usize]) -> Result<()> {
        if ring_cps.is_empty() {
            return self.place_relay(ring, reference);
        }
        let ids: Vec<usize> = tour.iter().map(|&t| ring_cps[t]).collect();
        let slots = self.ring_path(reference);
        let choice = self.assign_steps(ring, reference, &ids, &slots)?;

        let mut joined = Vec::new();
        let mut insertions = Vec::new();
        for (cp, place) in choice {
            match place {
                Place::Step(s) => {
                    if self.hover[cp] <= self.steps[s].hover {
                        self.stats.matched_pairs += 1;
                    } else {
                        self.stats.joined_steps += 1;
                    }
                    joined.push((cp, s));
                }
                Place::After(s) => {
                    let edge = [(slots[s], slots[(s + 1) % slots.len()])];
                    let wp = p3_search(
                        self.cps[cp],
                        &edge,
                        self.radii.r_u2u_m * (1.0 - 1e-12),
                        self.d_safe + SEPARATION_MARGIN_M,
                        &self.annuli[reference],
                        self.grid,
                    )?;
                    if wp.literal_agrees() {
                        self.stats.p3_literal_agreements += 1;
                    }
                    if wp.centred_agrees() {
                        self.stats.p3_centred_agreements += 1;
                    }
                    self.stats.inserted_waypoints += 1;
                    insertions.push(Insertion {
                        after: s,
                        point: wp.point,
                        cp,
                    });
                }
            }
        }
        let duty_steps = self.apply_insertions(ring, reference, insertions, &joined)?;
        self.fill_escorts(ring, reference, &duty_steps)
    }

    /// Assigns every CP of `ring`, in tour order, to a step of the reference
    /// UAV or to a new step inserted after one, monotonically around the
    /// cycle. Minimizes the added hover, the insertion detours and the time
    /// the ring UAV would need beyond the current step flights to move
    /// between consecutive CPs.
    fn assign_steps(
        &self,
        ring: usize,
        reference: usize,
        ids: &[usize],
        slots: &[Point2],
    ) -> Result<Vec<(usize, Place)>> {
        let n = slots.len();
        let k = ids.len();
        let v = self.v_max;
        let legs = self.step_legs();
        // Arrival time budget (as distance) at each step, counted from step 0.
        let mut at = vec![0.0; n + 1];
        for s in 1..=n {
            at[s] = at[s - 1] + legs[s % n];
        }
        let cycle = at[n];
        let coarse = PolarGrid {
            angle_steps: 90,
            radius_steps: 40,
            refine_rounds: 3,
        };

        // Position 2s is step s, 2s + 1 a new step after s.
        let np = 2 * n;
        let mut cost = vec![vec![f64::INFINITY; np]; k];
        let mut clock = vec![vec![0.0; np]; k];
        for (i, &cp) in ids.iter().enumerate() {
            let p = self.cps[cp];
            for s in 0..n {
                let d = p.dist(slots[s]);
                clock[i][2 * s] = at[s];
                if d <= self.radii.r_u2u_m
                    && d >= self.d_safe + SEPARATION_MARGIN_M
                    && self.clear_of_others(ring, s, p, None, None)
                {
                    cost[i][2 * s] = (self.hover[cp] - self.steps[s].hover).max(0.0);
                }
                let (a, b) = (slots[s], slots[(s + 1) % n]);
                if let Ok(wp) = p3_search(
                    p,
                    &[(a, b)],
                    self.radii.r_u2u_m * (1.0 - 1e-12),
                    self.d_safe + SEPARATION_MARGIN_M,
                    &self.annuli[reference],
                    coarse,
                ) {
                    let span = a.dist(wp.point) + wp.point.dist(b);
                    let frac = if span > LEN_EPS { a.dist(wp.point) / span } else { 0.5 };
                    cost[i][2 * s + 1] = self.hover[cp] + wp.detour_m / v;
                    clock[i][2 * s + 1] = at[s] + frac * legs[(s + 1) % n];
                }
            }
        }
        if cost.iter().any(|row| row.iter().all(|c| c.is_infinite())) {
            return Err(Error::InfeasibleWaypoint(format!(
                "a CP of UAV {} cannot be served next to UAV {}",
                ring + 1,
                reference + 1
            )));
        }

        // Time the ring UAV falls behind flying straight between two CPs.
        let lag = |i: usize, j: usize, budget: f64| {
            ((self.cps[ids[i]].dist(self.cps[ids[j]]) - budget.max(0.0)).max(0.0)) / v
        };

        let mut best: Option<(f64, Vec<(usize, Place)>)> = None;
        for reversed in [false, true] {
            let order: Vec<usize> = (0..k).map(|i| if reversed { (k - i) % k } else { i }).collect();
            for p0 in 0..np {
                let c0 = cost[order[0]][p0];
                if c0.is_infinite() {
                    continue;
                }
                // Relative position r maps to absolute (p0 + r) % np; relative
                // clocks are unwrapped from the clock at p0.
                let rel_clock = |i: usize, r: usize| {
                    let abs = (p0 + r) % np;
                    let c = clock[i][abs] - clock[order[0]][p0];
                    if abs < p0 || (abs == p0 && r > 0) { c + cycle } else { c }
                };
                let mut dp = vec![vec![f64::INFINITY; np]; k];
                let mut from = vec![vec![usize::MAX; np]; k];
                dp[0][0] = c0;
                for step in 1..k {
                    let (i_prev, i) = (order[step - 1], order[step]);
                    for r in 0..np {
                        let c = cost[i][(p0 + r) % np];
                        if c.is_infinite() {
                            continue;
                        }
                        let t = rel_clock(i, r);
                        for rp in 0..=r {
                            // Several new steps may share one gap; steps are single-use.
                            if rp == r && (p0 + r) % 2 == 0 {
                                continue;
                            }
                            let prev = dp[step - 1][rp];
                            if prev.is_infinite() {
                                continue;
                            }
                            let total = prev + c + lag(i_prev, i, t - rel_clock(i_prev, rp));
                            if total < dp[step][r] {
                                dp[step][r] = total;
                                from[step][r] = rp;
                            }
                        }
                    }
                }
                for r in 0..np {
                    let base = dp[k - 1][r];
                    if base.is_infinite() {
                        continue;
                    }
                    let closing = if k > 1 {
                        lag(order[k - 1], order[0], cycle - rel_clock(order[k - 1], r))
                    } else {
                        0.0
                    };
                    let total = base + closing;
                    if best.as_ref().map_or(true, |b| total < b.0 - 1e-9) {
                        let mut rs = vec![0; k];
                        rs[k - 1] = r;
                        for step in (1..k).rev() {
                            rs[step - 1] = from[step][rs[step]];
                        }
                        let places = (0..k)
                            .map(|step| {
                                let abs = (p0 + rs[step]) % np;
                                let place = if abs % 2 == 0 { Place::Step(abs / 2) } else { Place::After(abs / 2) };
                                (ids[order[step]], place)
                            })
                            .collect();
                        best = Some((total, places));
                    }
                }
            }
        }
        best.map(|b| b.1).ok_or_else(|| {
            Error::InfeasibleWaypoint(format!(
                "no step assignment serves every CP of UAV {} next to UAV {}",
                ring + 1,
                reference + 1
            ))
        })
    }

    /// Inserts the new steps and returns the steps at which `ring` collects.
    fn apply_insertions(
        &mut self,
        ring: usize,
        reference: usize,
        insertions: Vec<Insertion>,
        joined: &[(usize, usize)],
    ) -> Result<Vec<usize>> {
        let n = self.n();
        let mut by_step: Vec<Vec<Insertion>> = (0..n).map(|_| Vec::new()).collect();
        for ins in insertions {
            by_step[ins.after].push(ins);
        }
        let old = std::mem::take(&mut self.steps);
        let mut new_index = vec![0; n];
        let mut inserted: Vec<(usize, usize, f64)> = Vec::new(); // (new step, old step before, fraction)
        for (s, step) in old.iter().enumerate() {
            new_index[s] = self.steps.len();
            self.steps.push(step.clone());
            let next = &old[(s + 1) % n];
            let a = step.pos[reference].unwrap();
            let b = next.pos[reference].unwrap();
            let mut chain = vec![a];
            chain.extend(by_step[s].iter().map(|i| i.point));
            chain.push(b);
            let total: f64 = chain.windows(2).map(|w| w[0].dist(w[1])).sum();
            let mut acc = 0.0;
            for (j, ins) in by_step[s].iter().enumerate() {
                acc += chain[j].dist(chain[j + 1]);
                let frac = if total > LEN_EPS {
                    acc / total
                } else {
                    (j + 1) as f64 / (by_step[s].len() + 1) as f64
                };
                let mut pos = vec![None; self.m];
                let mut duty = vec![Duty::Escort; self.m];
                pos[reference] = Some(ins.point);
                pos[ring] = Some(self.cps[ins.cp]);
                duty[ring] = Duty::Collect(ins.cp);
                inserted.push((self.steps.len(), s, frac));
                self.steps.push(Step {
                    pos,
                    duty,
                    hover: self.hover[ins.cp],
                });
            }
        }

        // Other placed rings follow their own legs, chained outward from the
        // reference UAV.
        let mut others: Vec<usize> = (0..self.m)
            .filter(|&o| self.placed[o] && o != reference)
            .collect();
        others.sort_by_key(|&o| o.abs_diff(reference));
        let total = self.n();
        for &(s, before, frac) in &inserted {
            let after = (before + 1) % n;
            for &o in &others {
                let a = old[before].pos[o].unwrap();
                let b = old[after].pos[o].unwrap();
                let target = a.lerp(b, frac);
                let peer_ring = if o < reference { o + 1 } else { o - 1 };
                let peer = self.steps[s].pos[peer_ring].unwrap();
                let prev = self.steps[(s + total - 1) % total].pos[o];
                let disks = self.link_disks(o, peer);
                let q = match project_into_disks(target, &disks) {
                    Some(q)
                        if q.dist(peer) >= self.d_safe + SEPARATION_MARGIN_M
                            && self.clear_of_others(o, s, q, prev, None) =>
                    {
                        q
                    }
                    _ => {
                        self.stats.relaxed_escorts += 1;
                        self.relaxed_point(o, s, peer, target, prev, None)?
                    }
                };
                self.steps[s].pos[o] = Some(q);
            }
        }

        let mut duty_steps = Vec::new();
        for &(cp, slot) in joined {
            let s = new_index[slot];
            self.steps[s].pos[ring] = Some(self.cps[cp]);
            self.steps[s].duty[ring] = Duty::Collect(cp);
            self.steps[s].hover = self.steps[s].hover.max(self.hover[cp]);
            duty_steps.push(s);
        }
        duty_steps.extend(inserted.iter().map(|x| x.0));
        duty_steps.sort_unstable();
        Ok(duty_steps)
    }

    /// Escort waypoints for `ring` between its collection steps.
    fn fill_escorts(&mut self, ring: usize, reference: usize, fixed: &[usize]) -> Result<()> {
        let n = self.n();
        let ref_path = self.ring_path(reference);
        let path = CyclicPath::new(&ref_path);
        for (w, &f1) in fixed.iter().enumerate() {
            let f2 = fixed[(w + 1) % fixed.len()];
            let target_end = self.pos(ring, f2);
            let mut s = (f1 + 1) % n;
            while s != f2 {
                let sp = (s + n - 1) % n;
                let prev = self.pos(ring, sp);
                let remaining = path.forward(sp, f2);
                let leg = ref_path[sp].dist(ref_path[s]);
                let t = if remaining > LEN_EPS { (leg / remaining).min(1.0) } else { 1.0 };
                let cand = prev.lerp(target_end, t);
                let anchor = ref_path[s];
                let next_fixed = ((s + 1) % n == f2).then_some(target_end);
                let ok = |q: Point2| {
                    let d = q.dist(anchor);
                    d <= self.radii.r_u2u_m * (1.0 - 1e-12)
                        && d >= self.d_safe + SEPARATION_MARGIN_M
                        && (ring != 0 || q.dist(self.bs) <= self.radii.r_u2b_m * (1.0 - 1e-12))
                        && self.clear_of_others(ring, s, q, Some(prev), next_fixed)
                };
                let q = if ok(cand) {
                    self.stats.interpolated_escorts += 1;
                    cand
                } else {
                    let query = EscortQuery {
                        anchor,
                        prev_wp: prev,
                        next_wp: target_end,
                        prev_bound: leg,
                        next_bound: path.forward(s, f2),
                        r_u2u: self.radii.r_u2u_m * (1.0 - 1e-12),
                        d_safe: self.d_safe + SEPARATION_MARGIN_M,
                        ring: self.annuli[ring],
                        uplink: (ring == 0).then_some((self.bs, self.radii.r_u2b_m * (1.0 - 1e-12))),
                    };
                    match escort_search(&query, self.grid, &|q| {
                        self.clear_of_others(ring, s, q, Some(prev), next_fixed)
                    }) {
                        Ok(q) => {
                            self.stats.searched_escorts += 1;
                            q
                        }
                        Err(_) => {
                            self.stats.relaxed_escorts += 1;
                            self.relaxed_point(ring, s, anchor, cand, Some(prev), next_fixed)?
                        }
                    }
                };
                self.steps[s].pos[ring] = Some(q);
                s = (s + 1) % n;
            }
        }
        self.placed[ring] = true;
        Ok(())
    }

    /// A ring without CPs only relays: it sits on the ray from the BS towards
    /// the reference UAV at its ring's mid radius, pulled in to keep the links.
    fn place_relay(&mut self, ring: usize, reference: usize) -> Result<()> {
        let n = self.n();
        let a = self.annuli[ring];
        let mid = 0.5 * (a.inner + a.outer);
        for s in 0..n {
            let peer = self.pos(reference, s);
            let dir = peer - self.bs;
            let target = if dir.norm() > 0.0 {
                self.bs + dir * (mid / dir.norm())
            } else {
                self.bs + Point2::new(mid, 0.0)
            };
            let prev = (s > 0).then(|| self.pos(ring, s - 1));
            let disks = self.link_disks(ring, peer);
            let q = match project_into_disks(target, &disks) {
                Some(q)
                    if q.dist(peer) >= self.d_safe + SEPARATION_MARGIN_M
                        && self.clear_of_others(ring, s, q, prev, None) =>
                {
                    q
                }
                _ => {
                    self.stats.relaxed_escorts += 1;
                    self.relaxed_point(ring, s, peer, target, prev, None)?
                }
            };
            self.steps[s].pos[ring] = Some(q);
        }
        self.placed[ring] = true;
        Ok(())
    }
}

/// Plans all UAV trajectories with point matching.
pub fn plan(
    scenario: &Scenario,
    cluster_set: &ClusterSet,
    topology: &Topology,
    radii: &CoverageRadii,
) -> Result<MissionPlan> {
    plan_with_stats(scenario, cluster_set, topology, radii).map(|(p, _)| p)
}

pub fn plan_with_stats(
    scenario: &Scenario,
    cluster_set: &ClusterSet,
    topology: &Topology,
    radii: &CoverageRadii,
) -> Result<(MissionPlan, PlanStats)> {
    let m = topology.m_uavs;
    if topology.association.len() != cluster_set.k() {
        return Err(Error::InvalidArgument("topology and clusters disagree on the CP count".into()));
    }
    let tours = ring_tours(cluster_set, topology);
    let times = ring_tsp_times(cluster_set, topology, scenario.v_max_mps);
    let anchor = times
        .iter()
        .enumerate()
        .fold(0, |best, (i, &t)| if t > times[best] { i } else { best });

    let hover = cluster_set.hover_times();
    let (anchor_ids, anchor_tour) = &tours[anchor];
    let steps: Vec<Step> = anchor_tour
        .order
        .iter()
        .map(|&t| {
            let k = anchor_ids[t];
            let mut pos = vec![None; m];
            let mut duty = vec![Duty::Escort; m];
            pos[anchor] = Some(cluster_set.clusters[k].cp);
            duty[anchor] = Duty::Collect(k);
            Step {
                pos,
                duty,
                hover: hover[k],
            }
        })
        .collect();

    let mut placed = vec![false; m];
    placed[anchor] = true;
    let mut b = Builder {
        m,
        bs: topology.bs,
        radii,
        d_safe: scenario.d_safe_m,
        v_max: scenario.v_max_mps,
        cps: cluster_set.cp_positions(),
        hover,
        annuli: (0..m).map(|r| topology.ring_annulus(r)).collect(),
        grid: PolarGrid::default(),
        steps,
        placed,
        stats: PlanStats {
            anchor_ring: anchor,
            ..PlanStats::default()
        },
    };

    let (mut lo, mut hi) = (anchor, anchor);
    while lo > 0 || hi + 1 < m {
        if lo > 0 {
            let (ids, tour) = &tours[lo - 1];
            b.fit_ring(lo - 1, lo, ids, &tour.order)?;
            b.stats.ring_order.push(lo - 1);
            lo -= 1;
        }
        if hi + 1 < m {
            let (ids, tour) = &tours[hi + 1];
            b.fit_ring(hi + 1, hi, ids, &tour.order)?;
            b.stats.ring_order.push(hi + 1);
            hi += 1;
        }
    }

    let mut waypoints = Vec::with_capacity(b.n());
    let mut duties = Vec::with_capacity(b.n());
    for step in &b.steps {
        waypoints.push(step.pos.iter().map(|p| p.expect("every ring placed")).collect());
        duties.push(step.duty.clone());
    }
    let plan = MissionPlan::assemble(waypoints, duties, &b.hover, scenario.v_max_mps)?;
    log::debug!("PMTP: {:?}", b.stats);
    Ok((plan, b.stats))
}
