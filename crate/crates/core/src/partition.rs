//! Ring-shaped division of the mission region around the base station.
//!
//! Ring 1 is the disk of radius `r_U2B`; every further ring is an annulus of
//! width `r_U2U`. UAV `m` serves the CPs of ring `m`, so a chain of one UAV
//! per ring can always reach the BS.

use serde::{Deserialize, Serialize};

use crate::channel::CoverageRadii;
use crate::error::{Error, Result};
use crate::geometry::{Annulus, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub m_uavs: usize,
    pub bs: Point2,
    pub rings: Vec<Ring>,
    /// Zero-based UAV (ring) index of every CP.
    pub association: Vec<usize>,
}

impl Topology {
    pub fn ring_annulus(&self, uav: usize) -> Annulus {
        let r = self.rings[uav];
        Annulus::new(self.bs, r.inner_radius_m, r.outer_radius_m)
    }

    /// CP indices served by each UAV.
    pub fn cps_by_uav(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.m_uavs];
        for (k, &m) in self.association.iter().enumerate() {
            out[m].push(k);
        }
        out
    }

    /// One-hot association matrix `a[m][k]`.
    pub fn association_matrix(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.association.len()]; self.m_uavs];
        for (k, &m) in self.association.iter().enumerate() {
            a[m][k] = 1;
        }
        a
    }
}

/// Minimum number of UAVs whose rings cover every CP.
pub fn required_uav_count(cps: &[Point2], bs: Point2, radii: &CoverageRadii) -> Result<usize> {
    let far = cps
        .iter()
        .map(|p| p.dist(bs))
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
        .ok_or_else(|| Error::InvalidArgument("no collection points".into()))?;
    let extra = ((far - radii.r_u2b_m) / radii.r_u2u_m).ceil();
    Ok(if extra <= 0.0 { 1 } else { extra as usize + 1 })
}

pub fn rings(m_uavs: usize, radii: &CoverageRadii) -> Vec<Ring> {
    (0..m_uavs)
        .map(|m| {
            if m == 0 {
                Ring {
                    inner_radius_m: 0.0,
                    outer_radius_m: radii.r_u2b_m,
                }
            } else {
                Ring {
                    inner_radius_m: radii.r_u2b_m + (m - 1) as f64 * radii.r_u2u_m,
                    outer_radius_m: radii.r_u2b_m + m as f64 * radii.r_u2u_m,
                }
            }
        })
        .collect()
}

/// Zero-based ring index of a point at distance `d` from the BS. Points on a
/// ring edge belong to the inner ring.
pub fn ring_index(d: f64, radii: &CoverageRadii) -> usize {
    if d <= radii.r_u2b_m {
        0
    } else {
        ((d - radii.r_u2b_m) / radii.r_u2u_m).ceil() as usize
    }
}

pub fn associate(cps: &[Point2], bs: Point2, rings: &[Ring], radii: &CoverageRadii) -> Result<Vec<usize>> {
    let outer = rings.last().map_or(0.0, |r| r.outer_radius_m);
    cps.iter()
        .enumerate()
        .map(|(k, p)| {
            let d = p.dist(bs);
            let m = ring_index(d, radii);
            if m >= rings.len() {
                Err(Error::InfeasibleTopology {
                    cp: k,
                    distance: d,
                    outer,
                })
            } else {
                Ok(m)
            }
        })
        .collect()
}

pub fn build_topology(cps: &[Point2], bs: Point2, radii: &CoverageRadii) -> Result<Topology> {
    let m_uavs = required_uav_count(cps, bs, radii)?;
    let rings = rings(m_uavs, radii);
    let association = associate(cps, bs, &rings, radii)?;
    Ok(Topology {
        m_uavs,
        bs,
        rings,
        association,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radii() -> CoverageRadii {
        CoverageRadii {
            r_g2u_m: 1447.86,
            r_u2u_m: 3991.57,
            r_u2b_m: 4057.32,
        }
    }

    #[test]
    fn single_ring_when_all_within_u2b() {
        let cps = [Point2::new(100.0, 0.0), Point2::new(0.0, 4000.0)];
        assert_eq!(required_uav_count(&cps, Point2::ORIGIN, &radii()).unwrap(), 1);
    }

    #[test]
    fn half_ring_width_needs_two() {
        let r = radii();
        let cps = [Point2::new(r.r_u2b_m + 0.5 * r.r_u2u_m, 0.0)];
        assert_eq!(required_uav_count(&cps, Point2::ORIGIN, &r).unwrap(), 2);
    }

    #[test]
    fn reference_geometry_needs_three() {
        let r = radii();
        for far in [10_000.0, 10_500.0, 11_000.0] {
            let cps = [Point2::new(far / 2f64.sqrt(), far / 2f64.sqrt())];
            assert_eq!(required_uav_count(&cps, Point2::ORIGIN, &r).unwrap(), 3);
        }
    }

    #[test]
    fn association_tie_goes_inward() {
        let r = radii();
        let rings = rings(3, &r);
        let cps = [
            Point2::new(r.r_u2b_m / 2.0, 0.0),
            Point2::new(r.r_u2b_m, 0.0),
            Point2::new(0.0, r.r_u2b_m + 1.0),
            Point2::new(0.0, r.r_u2b_m + r.r_u2u_m + 1.0),
        ];
        let a = associate(&cps, Point2::ORIGIN, &rings, &r).unwrap();
        assert_eq!(a, vec![0, 0, 1, 2]);
    }

    #[test]
    fn beyond_outer_ring_is_rejected() {
        let r = radii();
        let rings = rings(1, &r);
        let cps = [Point2::new(r.r_u2b_m + 1.0, 0.0)];
        assert!(matches!(
            associate(&cps, Point2::ORIGIN, &rings, &r),
            Err(Error::InfeasibleTopology { cp: 0, .. })
        ));
    }

    #[test]
    fn rings_tile_without_gaps() {
        let r = radii();
        let rs = rings(4, &r);
        assert_eq!(rs[0].inner_radius_m, 0.0);
        for w in rs.windows(2) {
            assert_eq!(w[0].outer_radius_m, w[1].inner_radius_m);
        }
        for ring in &rs[1..] {
            assert!((ring.outer_radius_m - ring.inner_radius_m - r.r_u2u_m).abs() < 1e-9);
        }
    }

    #[test]
    fn association_is_one_hot() {
        let r = radii();
        let cps: Vec<_> = (0..50)
            .map(|i| Point2::new(i as f64 * 170.0, (50 - i) as f64 * 150.0))
            .collect();
        let topo = build_topology(&cps, Point2::ORIGIN, &r).unwrap();
        let a = topo.association_matrix();
        for k in 0..cps.len() {
            assert_eq!((0..topo.m_uavs).map(|m| a[m][k] as usize).sum::<usize>(), 1);
            let m = topo.association[k];
            assert!(topo.ring_annulus(m).contains(cps[k], 1e-9));
        }
    }
}
