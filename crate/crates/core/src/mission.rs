//! Discretized mission plans, their validation against the continuous-time
//! mission constraints, timing and the TSP lower bound.
//!
//! A plan is a cyclic list of steps. Every UAV holds one waypoint per step;
//! between steps all UAVs fly straight lines and arrive together, so the step
//! flight time is set by the UAV with the longest leg. The flight into step 0
//! is the return leg from the last step, which closes every trajectory.

use serde::{Deserialize, Serialize};

use crate::channel::CoverageRadii;
use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::model::Scenario;
use crate::partition::Topology;
use crate::tsp::{self, Tour};

/// Slack on link-range comparisons, meters.
pub const LINK_TOL_M: f64 = 1e-6;
/// A collecting UAV must sit this close to its CP, meters.
pub const AT_CP_TOL_M: f64 = 1e-6;
pub const COLLISION_SAMPLES: usize = 100;
const SPEED_REL_TOL: f64 = 1e-9;
const TIME_TOL_S: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Duty {
    Collect(usize),
    Escort,
}

impl Duty {
    pub fn cp(self) -> Option<usize> {
        match self {
            Duty::Collect(k) => Some(k),
            Duty::Escort => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionStep {
    pub waypoints: Vec<Point2>,
    pub duties: Vec<Duty>,
    /// Hover duration shared by every UAV at this step.
    pub hover_s: f64,
    /// Synchronized flight time from the previous step into this one.
    pub flight_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    pub uav_count: usize,
    pub steps: Vec<MissionStep>,
}

impl MissionPlan {
    /// Builds a plan from per-step waypoints and duties. Step hovers are the
    /// largest requirement among the CPs collected concurrently; flight times
    /// follow from the bottleneck leg at `v_max`.
    pub fn assemble(
        waypoints: Vec<Vec<Point2>>,
        duties: Vec<Vec<Duty>>,
        hover_requirements: &[f64],
        v_max: f64,
    ) -> Result<Self> {
        if waypoints.len() != duties.len() {
            return Err(Error::InvalidArgument("waypoint and duty step counts differ".into()));
        }
        let uav_count = waypoints.first().map_or(0, Vec::len);
        if uav_count == 0 {
            return Err(Error::InvalidArgument("plan has no steps or no UAVs".into()));
        }
        let mut steps = Vec::with_capacity(waypoints.len());
        for (w, d) in waypoints.into_iter().zip(duties) {
            if w.len() != uav_count || d.len() != uav_count {
                return Err(Error::InvalidArgument("ragged plan step".into()));
            }
            let mut hover_s: f64 = 0.0;
            for duty in &d {
                if let Duty::Collect(k) = *duty {
                    let h = *hover_requirements.get(k).ok_or_else(|| {
                        Error::InvalidArgument(format!("unknown collection point {k}"))
                    })?;
                    hover_s = hover_s.max(h);
                }
            }
            steps.push(MissionStep {
                waypoints: w,
                duties: d,
                hover_s,
                flight_s: 0.0,
            });
        }
        let mut plan = MissionPlan { uav_count, steps };
        plan.retime(v_max);
        Ok(plan)
    }

    /// Recomputes every step's synchronized flight time.
    pub fn retime(&mut self, v_max: f64) {
        let n = self.steps.len();
        for i in 0..n {
            let prev = (i + n - 1) % n;
            let leg = max_leg(&self.steps[prev].waypoints, &self.steps[i].waypoints);
            self.steps[i].flight_s = leg / v_max;
        }
    }

    /// Waypoint sequence of one UAV.
    pub fn trajectory(&self, uav: usize) -> Vec<Point2> {
        self.steps.iter().map(|s| s.waypoints[uav]).collect()
    }

    pub fn flight_distance(&self, uav: usize) -> f64 {
        let t = self.trajectory(uav);
        closed_length(&t)
    }
}

fn closed_length(path: &[Point2]) -> f64 {
    let n = path.len();
    (0..n).map(|i| path[i].dist(path[(i + 1) % n])).sum()
}

fn max_leg(from: &[Point2], to: &[Point2]) -> f64 {
    from.iter().zip(to).map(|(a, b)| a.dist(*b)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub completion_s: f64,
    pub flight_s: f64,
    pub hover_s: f64,
}

/// Completion time with the bottleneck UAV flying at `v_max` on every leg.
pub fn completion_time(plan: &MissionPlan, v_max: f64) -> Timing {
    let n = plan.steps.len();
    let mut flight_s = 0.0;
    let mut hover_s = 0.0;
    for i in 0..n {
        let prev = &plan.steps[(i + n - 1) % n];
        flight_s += max_leg(&prev.waypoints, &plan.steps[i].waypoints) / v_max;
        hover_s += plan.steps[i].hover_s;
    }
    Timing {
        completion_s: flight_s + hover_s,
        flight_s,
        hover_s,
    }
}

/// Two UAVs flying straight, synchronized legs stay within `limit` of each
/// other for the whole leg when both endpoint separations are within it.
pub fn segment_connectivity_ok(
    start_i: Point2,
    end_i: Point2,
    start_j: Point2,
    end_j: Point2,
    limit: f64,
) -> bool {
    start_i.dist(start_j).max(end_i.dist(end_j)) <= limit
}

/// CP indices of each ring paired with the ring's tour over them.
pub fn ring_tours(cluster_set: &ClusterSet, topology: &Topology) -> Vec<(Vec<usize>, Tour)> {
    topology
        .cps_by_uav()
        .into_iter()
        .map(|ids| {
            let pts: Vec<Point2> = ids.iter().map(|&k| cluster_set.clusters[k].cp).collect();
            let tour = tsp::solve_tsp(&pts, 0);
            (ids, tour)
        })
        .collect()
}

/// Unconstrained completion time of each UAV: its ring tour plus its hovers.
pub fn ring_tsp_times(cluster_set: &ClusterSet, topology: &Topology, v_max: f64) -> Vec<f64> {
    ring_tours(cluster_set, topology)
        .iter()
        .map(|(ids, tour)| {
            tour.length_m / v_max + ids.iter().map(|&k| cluster_set.clusters[k].min_hover_s).sum::<f64>()
        })
        .collect()
}

/// Lower bound on the completion time: the slowest UAV on its own tour with
/// no connectivity coupling.
pub fn lower_bound(cluster_set: &ClusterSet, topology: &Topology, v_max: f64) -> f64 {
    ring_tsp_times(cluster_set, topology, v_max)
        .into_iter()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from_failures(name: &str, failures: Vec<String>) -> Check {
        const SHOWN: usize = 5;
        let detail = if failures.is_empty() {
            "ok".to_string()
        } else {
            let mut d = failures.iter().take(SHOWN).cloned().collect::<Vec<_>>().join("; ");
            if failures.len() > SHOWN {
                d.push_str(&format!("; ... {} more", failures.len() - SHOWN));
            }
            d
        };
        Check {
            name: name.to_string(),
            passed: failures.is_empty(),
            detail,
        }
    }
}

/// Checks a plan against the mission constraints. Shape problems are errors;
/// constraint violations are reported in the returned check list.
pub fn validate(
    plan: &MissionPlan,
    scenario: &Scenario,
    topology: &Topology,
    radii: &CoverageRadii,
    cluster_set: &ClusterSet,
) -> Result<Vec<Check>> {
    let m = plan.uav_count;
    if m != topology.m_uavs {
        return Err(Error::InvalidArgument(format!(
            "plan has {m} UAVs, topology has {}",
            topology.m_uavs
        )));
    }
    if plan.steps.is_empty() {
        return Err(Error::InvalidArgument("plan has no steps".into()));
    }
    for (i, s) in plan.steps.iter().enumerate() {
        if s.waypoints.len() != m || s.duties.len() != m {
            return Err(Error::InvalidArgument(format!("step {i} does not hold {m} UAVs")));
        }
    }
    let n = plan.steps.len();
    let bs = scenario.bs_position;
    let v_max = scenario.v_max_mps;
    let link = |uav: usize| if uav == 0 { radii.r_u2b_m } else { radii.r_u2u_m };

    // Chain BS - u1 - ... - uM at every waypoint and along every leg.
    let mut conn = Vec::new();
    for (i, s) in plan.steps.iter().enumerate() {
        let prev = &plan.steps[(i + n - 1) % n];
        for u in 0..m {
            let (anchor_now, anchor_before) = if u == 0 {
                (bs, bs)
            } else {
                (s.waypoints[u - 1], prev.waypoints[u - 1])
            };
            let d = s.waypoints[u].dist(anchor_now);
            if d > link(u) + LINK_TOL_M {
                let peer = if u == 0 { "BS".to_string() } else { format!("UAV {u}") };
                conn.push(format!(
                    "step {i}: UAV {} is {d:.1} m from {peer} (limit {:.1} m)",
                    u + 1,
                    link(u)
                ));
            }
            if !segment_connectivity_ok(
                prev.waypoints[u],
                s.waypoints[u],
                anchor_before,
                anchor_now,
                link(u) + LINK_TOL_M,
            ) {
                conn.push(format!("leg into step {i}: UAV {} loses its uplink", u + 1));
            }
        }
    }

    // Pairwise separation at waypoints and along sampled legs.
    let mut coll = Vec::new();
    let d_safe = scenario.d_safe_m - LINK_TOL_M;
    for (i, s) in plan.steps.iter().enumerate() {
        let prev = &plan.steps[(i + n - 1) % n];
        for t_idx in 1..=COLLISION_SAMPLES + 1 {
            let t = t_idx as f64 / (COLLISION_SAMPLES + 1) as f64;
            let pos: Vec<Point2> = (0..m)
                .map(|u| prev.waypoints[u].lerp(s.waypoints[u], t))
                .collect();
            'pairs: for a in 0..m {
                for b in a + 1..m {
                    let d = pos[a].dist(pos[b]);
                    if d < d_safe {
                        coll.push(format!(
                            "leg into step {i} at t = {t:.3}: UAVs {} and {} are {d:.2} m apart",
                            a + 1,
                            b + 1
                        ));
                        break 'pairs;
                    }
                }
            }
        }
    }

    // Speed limit under the stored synchronized flight times.
    let mut speed = Vec::new();
    for (i, s) in plan.steps.iter().enumerate() {
        let prev = &plan.steps[(i + n - 1) % n];
        for u in 0..m {
            let d = prev.waypoints[u].dist(s.waypoints[u]);
            if d > v_max * s.flight_s * (1.0 + SPEED_REL_TOL) + 1e-9 {
                speed.push(format!(
                    "step {i}: UAV {} needs {:.3} m/s",
                    u + 1,
                    if s.flight_s > 0.0 { d / s.flight_s } else { f64::INFINITY }
                ));
            }
        }
    }

    // Every CP collected exactly once, by a UAV hovering over it.
    let k = cluster_set.k();
    let mut seen = vec![0usize; k];
    let mut cov = Vec::new();
    for (i, s) in plan.steps.iter().enumerate() {
        for (u, d) in s.duties.iter().enumerate() {
            if let Duty::Collect(cp) = *d {
                if cp >= k {
                    cov.push(format!("step {i}: unknown CP {cp}"));
                    continue;
                }
                seen[cp] += 1;
                let off = s.waypoints[u].dist(cluster_set.clusters[cp].cp);
                if off > AT_CP_TOL_M {
                    cov.push(format!("step {i}: UAV {} collects CP {cp} from {off:.3} m away", u + 1));
                }
            }
        }
    }
    for (cp, &count) in seen.iter().enumerate() {
        match count {
            0 => cov.push(format!("CP {cp} is never collected")),
            1 => {}
            c => cov.push(format!("CP {cp} is collected {c} times")),
        }
    }

    // Each step collects something and hovers long enough for all of it.
    let mut hover = Vec::new();
    for (i, s) in plan.steps.iter().enumerate() {
        let mut need: Option<f64> = None;
        for d in &s.duties {
            if let Some(cp) = d.cp().filter(|&cp| cp < k) {
                let h = cluster_set.clusters[cp].min_hover_s;
                need = Some(need.map_or(h, |n: f64| n.max(h)));
            }
        }
        match need {
            None => hover.push(format!("step {i} has no collection duty")),
            Some(h) if s.hover_s + TIME_TOL_S < h => {
                hover.push(format!("step {i}: hovers {:.3} s, needs {h:.3} s", s.hover_s))
            }
            _ => {}
        }
    }

    // The leg into step 0 is the flight home.
    let mut closed = Vec::new();
    let home_leg = max_leg(&plan.steps[n - 1].waypoints, &plan.steps[0].waypoints);
    if home_leg > v_max * plan.steps[0].flight_s * (1.0 + SPEED_REL_TOL) + 1e-9 {
        closed.push(format!(
            "return leg of {home_leg:.1} m is not covered by {:.3} s of flight",
            plan.steps[0].flight_s
        ));
    }

    Ok(vec![
        Check::from_failures("connectivity", conn),
        Check::from_failures("collision", coll),
        Check::from_failures("speed", speed),
        Check::from_failures("coverage", cov),
        Check::from_failures("hover-sufficiency", hover),
        Check::from_failures("return-to-start", closed),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub completion_s: f64,
    pub flight_s: f64,
    pub hover_s: f64,
    pub lower_bound_s: f64,
    /// Relative excess of the completion time over the lower bound.
    pub gap: f64,
    /// Set when the plan beats the lower bound, which the bound should rule out.
    pub below_lower_bound: bool,
    pub checks: Vec<Check>,
}

impl EvalReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub fn evaluate(
    plan: &MissionPlan,
    scenario: &Scenario,
    topology: &Topology,
    radii: &CoverageRadii,
    cluster_set: &ClusterSet,
) -> Result<EvalReport> {
    let checks = validate(plan, scenario, topology, radii, cluster_set)?;
    let timing = completion_time(plan, scenario.v_max_mps);
    let lower_bound_s = lower_bound(cluster_set, topology, scenario.v_max_mps);
    let below = timing.completion_s < lower_bound_s - 1e-6;
    if below {
        log::warn!(
            "completion {:.3} s is below the lower bound {:.3} s",
            timing.completion_s,
            lower_bound_s
        );
    }
    Ok(EvalReport {
        completion_s: timing.completion_s,
        flight_s: timing.flight_s,
        hover_s: timing.hover_s,
        lower_bound_s,
        gap: if lower_bound_s > 0.0 {
            timing.completion_s / lower_bound_s - 1.0
        } else {
            0.0
        },
        below_lower_bound: below,
        checks,
    })
}

/// One row of the plan export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub step: usize,
    pub uav: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub duty: String,
    pub hover_s: f64,
    pub flight_s: f64,
}

pub fn plan_rows(plan: &MissionPlan) -> Vec<PlanRow> {
    plan.steps
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.waypoints.iter().zip(&s.duties).enumerate().map(move |(u, (p, d))| PlanRow {
                step: i,
                uav: u + 1,
                x_m: p.x,
                y_m: p.y,
                duty: match d {
                    Duty::Collect(k) => format!("collect:{k}"),
                    Duty::Escort => "escort".to_string(),
                },
                hover_s: s.hover_s,
                flight_s: s.flight_s,
            })
        })
        .collect()
}
