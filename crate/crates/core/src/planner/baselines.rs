//! Reference planners without cross-ring pairing.
//!
//! TTP sends the outermost UAV around every CP while the others hold evenly
//! spaced relay positions on the line back to the BS. CSTP sweeps the CPs by
//! angle around the BS; the ring owning each CP collects it while the other
//! UAVs wait on the same ray.

use crate::channel::CoverageRadii;
use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mission::{Duty, MissionPlan};
use crate::model::Scenario;
use crate::partition::Topology;
use crate::tsp;

fn check_shape(cluster_set: &ClusterSet, topology: &Topology) -> Result<()> {
    if topology.m_uavs == 0 {
        return Err(Error::InvalidArgument("topology has no UAVs".into()));
    }
    if topology.association.len() != cluster_set.k() || cluster_set.k() == 0 {
        return Err(Error::InvalidArgument("topology and clusters disagree on the CP count".into()));
    }
    Ok(())
}

pub fn plan_ttp(
    scenario: &Scenario,
    cluster_set: &ClusterSet,
    topology: &Topology,
    radii: &CoverageRadii,
) -> Result<MissionPlan> {
    check_shape(cluster_set, topology)?;
    let m = topology.m_uavs;
    let bs = topology.bs;
    let cps = cluster_set.cp_positions();
    let tour = tsp::solve_tsp(&cps, 0);

    let mut waypoints = Vec::with_capacity(cps.len());
    let mut duties = Vec::with_capacity(cps.len());
    for &k in &tour.order {
        let c = cps[k];
        let hop = c.dist(bs) / m as f64;
        let limit = if m == 1 { radii.r_u2b_m } else { radii.r_u2b_m.min(radii.r_u2u_m) };
        if hop > limit {
            return Err(Error::Infeasible(format!(
                "relay hop of {hop:.1} m towards CP {k} exceeds the {limit:.1} m link range"
            )));
        }
        waypoints.push((1..=m).map(|i| bs.lerp(c, i as f64 / m as f64)).collect());
        let mut d = vec![Duty::Escort; m];
        d[m - 1] = Duty::Collect(k);
        duties.push(d);
    }
    MissionPlan::assemble(waypoints, duties, &cluster_set.hover_times(), scenario.v_max_mps)
}

/// Radii of all UAVs on one ray when UAV `owner` sits at `r_owner`.
fn ray_radii(topology: &Topology, radii: &CoverageRadii, d_safe: f64, owner: usize, r_owner: f64) -> Result<Vec<f64>> {
    let m = topology.m_uavs;
    let mid: Vec<f64> = topology
        .rings
        .iter()
        .map(|r| 0.5 * (r.inner_radius_m + r.outer_radius_m))
        .collect();
    let reach = radii.r_u2u_m * (1.0 - 1e-12);
    let mut r = mid.clone();
    r[owner] = r_owner;
    for i in owner + 1..m {
        r[i] = mid[i].min(r[i - 1] + reach).max(r[i - 1] + d_safe);
    }
    for i in (0..owner).rev() {
        let mut v = mid[i].max(r[i + 1] - reach).min(r[i + 1] - d_safe);
        if i == 0 {
            v = v.min(radii.r_u2b_m);
        }
        r[i] = v;
    }
    let ok = r[0] >= 0.0
        && r[0] <= radii.r_u2b_m
        && r.windows(2)
            .all(|w| w[1] - w[0] <= radii.r_u2u_m && w[1] - w[0] >= d_safe - 1e-9);
    if ok {
        Ok(r)
    } else {
        Err(Error::Infeasible(format!(
            "cannot line up the relays on the ray to a CP {r_owner:.1} m from the BS"
        )))
    }
}

pub fn plan_cstp(
    scenario: &Scenario,
    cluster_set: &ClusterSet,
    topology: &Topology,
    radii: &CoverageRadii,
) -> Result<MissionPlan> {
    check_shape(cluster_set, topology)?;
    let m = topology.m_uavs;
    let bs = topology.bs;
    let cps = cluster_set.cp_positions();
    let mut order: Vec<usize> = (0..cps.len()).collect();
    order.sort_by(|&a, &b| {
        cps[a]
            .angle_from(bs)
            .total_cmp(&cps[b].angle_from(bs))
            .then(cps[a].dist(bs).total_cmp(&cps[b].dist(bs)))
            .then(a.cmp(&b))
    });

    let mut waypoints = Vec::with_capacity(cps.len());
    let mut duties = Vec::with_capacity(cps.len());
    for &k in &order {
        let c = cps[k];
        let owner = topology.association[k];
        let r_c = c.dist(bs);
        let angle = if r_c > 0.0 { c.angle_from(bs) } else { 0.0 };
        let rs = ray_radii(topology, radii, scenario.d_safe_m, owner, r_c)?;
        let wp: Vec<Point2> = rs
            .iter()
            .enumerate()
            .map(|(i, &r)| if i == owner { c } else { Point2::from_polar(bs, r, angle) })
            .collect();
        let mut d = vec![Duty::Escort; m];
        d[owner] = Duty::Collect(k);
        waypoints.push(wp);
        duties.push(d);
    }
    MissionPlan::assemble(waypoints, duties, &cluster_set.hover_times(), scenario.v_max_mps)
}
