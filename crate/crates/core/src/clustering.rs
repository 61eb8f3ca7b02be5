//! Adaptive capacity- and radius-constrained sensor clustering.
//!
//! Starting from `K = ceil(N / N_th)`, k-means++ is rerun with one more
//! cluster until no member is farther than the ground coverage radius from
//! its centroid and no cluster exceeds the per-UAV capacity. The centroids
//! become the collection points (CPs).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{self, CoverageRadii};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::model::Scenario;

const MAX_LLOYD_ITERATIONS: usize = 300;
const CONVERGENCE_M: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sensor ids, as stored in the scenario.
    pub members: Vec<usize>,
    pub cp: Point2,
    pub min_hover_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
}

impl ClusterSet {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn cp_positions(&self) -> Vec<Point2> {
        self.clusters.iter().map(|c| c.cp).collect()
    }

    pub fn hover_times(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.min_hover_s).collect()
    }

    /// `(sensor_id, cluster_id)` pairs sorted by sensor id.
    pub fn assignment_rows(&self) -> Vec<(usize, usize)> {
        let mut rows: Vec<_> = self
            .clusters
            .iter()
            .enumerate()
            .flat_map(|(k, c)| c.members.iter().map(move |&s| (s, k)))
            .collect();
        rows.sort_unstable();
        rows
    }
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Point2>,
    pub iterations: usize,
    /// Sum of squared member-to-centroid distances after every Lloyd update.
    pub distortion: Vec<f64>,
}

fn dist2(a: Point2, b: Point2) -> f64 {
    let d = a - b;
    d.x * d.x + d.y * d.y
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(p: Point2, centroids: &[Point2]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn seed_plus_plus(points: &[Point2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[pick];
        centroids.push(c);
        for (i, &p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, c));
        }
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations in the plane.
pub fn kmeans_cluster(points: &[Point2], k: usize, seed: u64) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={}",
            points.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let mut assignments = vec![0; points.len()];
    let mut distortion = Vec::new();
    let mut iterations = 0;

    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        for (a, &p) in assignments.iter_mut().zip(points) {
            *a = nearest(p, &centroids);
        }

        let mut sums = vec![Point2::ORIGIN; k];
        let mut counts = vec![0usize; k];
        for (&a, &p) in assignments.iter().zip(points) {
            sums[a] = sums[a] + p;
            counts[a] += 1;
        }
        let mut moved: f64 = 0.0;
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = sums[c] * (1.0 / counts[c] as f64);
            }
        }
        // Empty clusters take the point farthest from its own centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&i, &j| {
                    dist2(points[i], next[assignments[i]])
                        .total_cmp(&dist2(points[j], next[assignments[j]]))
                        .then(j.cmp(&i))
                });
            if let Some(i) = far {
                counts[assignments[i]] -= 1;
                assignments[i] = c;
                counts[c] = 1;
                next[c] = points[i];
            }
        }
        for c in 0..k {
            moved = moved.max(next[c].dist(centroids[c]));
        }
        centroids = next;
        distortion.push(
            assignments
                .iter()
                .zip(points)
                .map(|(&a, &p)| dist2(p, centroids[a]))
                .sum(),
        );
        if moved < CONVERGENCE_M {
            break;
        }
    }

    // Centroids are the member means of the final assignment.
    let mut sums = vec![Point2::ORIGIN; k];
    let mut counts = vec![0usize; k];
    for (&a, &p) in assignments.iter().zip(points) {
        sums[a] = sums[a] + p;
        counts[a] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            centroids[c] = sums[c] * (1.0 / counts[c] as f64);
        }
    }

    Ok(KMeans {
        assignments,
        centroids,
        iterations,
        distortion,
    })
}

/// Seed of the k-means run with `k` clusters for a scenario seed.
pub fn retry_seed(scenario_seed: u64, k: usize) -> u64 {
    scenario_seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the adaptive clustering loop and returns the final clustering together
/// with every K that was tried.
pub fn cluster_sensors_traced(
    scenario: &Scenario,
    radii: &CoverageRadii,
) -> Result<(ClusterSet, Vec<usize>)> {
    if !(radii.r_g2u_m > 0.0) {
        return Err(Error::InvalidArgument("r_g2u must be positive".into()));
    }
    let points = scenario.sensor_positions();
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument("scenario has no sensors".into()));
    }
    let mut k = n.div_ceil(scenario.n_th);
    let mut tried = Vec::new();
    loop {
        if k > n {
            return Err(Error::Infeasible(format!(
                "no feasible clustering with up to {n} clusters"
            )));
        }
        tried.push(k);
        let run = kmeans_cluster(&points, k, retry_seed(scenario.rng_seed, k))?;
        let mut sizes = vec![0usize; k];
        let mut d_max: f64 = 0.0;
        for (&a, &p) in run.assignments.iter().zip(&points) {
            sizes[a] += 1;
            d_max = d_max.max(p.dist(run.centroids[a]));
        }
        let n_max = sizes.iter().copied().max().unwrap_or(0);
        if d_max > radii.r_g2u_m || n_max > scenario.n_th || sizes.contains(&0) {
            log::debug!("K = {k}: d_max = {d_max:.1} m, n_max = {n_max}; retrying");
            k += 1;
            continue;
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &a) in run.assignments.iter().enumerate() {
            members[a].push(i);
        }
        let clusters = members
            .into_iter()
            .zip(run.centroids)
            .map(|(idx, cp)| {
                let nodes: Vec<_> = idx.iter().map(|&i| scenario.sensors[i]).collect();
                let min_hover_s = channel::min_hover_time(&nodes, cp, &scenario.params)?;
                Ok(Cluster {
                    members: nodes.iter().map(|s| s.id).collect(),
                    cp,
                    min_hover_s,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        return Ok((ClusterSet { clusters }, tried));
    }
}

pub fn cluster_sensors(scenario: &Scenario, radii: &CoverageRadii) -> Result<ClusterSet> {
    cluster_sensors_traced(scenario, radii).map(|(set, _)| set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_scenario, ChannelParams};

    #[test]
    fn k_equal_to_points_gives_zero_distortion() {
        let pts: Vec<_> = (0..7).map(|i| Point2::new(i as f64 * 13.0, (i * i) as f64)).collect();
        let km = kmeans_cluster(&pts, 7, 3).unwrap();
        assert!(km.distortion.last().unwrap().abs() < 1e-12);
        let mut used = km.assignments.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), 7);
    }

    #[test]
    fn separated_blobs() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, 0.0),
            Point2::new(1000.0, 1000.0),
            Point2::new(1000.0, 1002.0),
        ];
        for seed in 0..20 {
            let km = kmeans_cluster(&pts, 2, seed).unwrap();
            let mut c = km.centroids.clone();
            c.sort_by(|a, b| a.x.total_cmp(&b.x));
            assert_eq!(c[0], Point2::new(1.0, 0.0));
            assert_eq!(c[1], Point2::new(1000.0, 1001.0));
        }
    }

    #[test]
    fn too_many_clusters() {
        let pts = vec![Point2::ORIGIN; 3];
        assert!(matches!(kmeans_cluster(&pts, 4, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn distortion_never_increases() {
        let s = generate_scenario(3000.0, 3000.0, 400, 1e6, ChannelParams::default(), 5).unwrap();
        for k in [3, 8, 20] {
            let km = kmeans_cluster(&s.sensor_positions(), k, 11).unwrap();
            for w in km.distortion.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn three_close_sensors_form_one_cluster() {
        let mut s = generate_scenario(1000.0, 1000.0, 3, 1e7, ChannelParams::default(), 0).unwrap();
        s.sensors[0].position = Point2::new(100.0, 100.0);
        s.sensors[1].position = Point2::new(400.0, 100.0);
        s.sensors[2].position = Point2::new(100.0, 400.0);
        let radii = crate::channel::coverage_radii(&s.params, s.bs_height_m).unwrap();
        let set = cluster_sensors(&s, &radii).unwrap();
        assert_eq!(set.k(), 1);
        assert!(set.clusters[0].cp.dist(Point2::new(200.0, 200.0)) < 1e-9);
    }

    #[test]
    fn retry_loop_is_non_decreasing_and_deterministic() {
        let s = generate_scenario(8000.0, 8000.0, 1000, 1e7, ChannelParams::default(), 1).unwrap();
        let radii = crate::channel::coverage_radii(&s.params, s.bs_height_m).unwrap();
        let (a, tried) = cluster_sensors_traced(&s, &radii).unwrap();
        assert_eq!(tried[0], 17);
        assert!(tried.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(*tried.last().unwrap(), a.k());
        let b = cluster_sensors(&s, &radii).unwrap();
        assert_eq!(a, b);
    }
}
