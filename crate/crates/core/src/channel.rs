//! Radio propagation: probabilistic LoS air-to-ground links, the pure LoS
//! UAV-UAV link, coverage radii, FDMA bandwidth shares and hover times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::model::{ChannelParams, SensorNode};

/// Relative tolerance of the coverage-radius bisection.
pub const RADIUS_REL_TOL: f64 = 1e-9;
const BISECTION_MAX_ITER: usize = 200;
/// Slack granted when testing a member against the G2U threshold, so that a
/// sensor sitting exactly on the inverted radius still counts as covered.
const COVERAGE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageRadii {
    pub r_g2u_m: f64,
    pub r_u2u_m: f64,
    pub r_u2b_m: f64,
}

/// Probability of a line-of-sight link at horizontal distance `r` and
/// relative height `height`.
pub fn los_probability(r: f64, height: f64, params: &ChannelParams) -> f64 {
    let elevation_deg = if r == 0.0 {
        90.0
    } else {
        (height / r).atan().to_degrees()
    };
    1.0 / (1.0 + params.a * (-params.b * (elevation_deg - params.a)).exp())
}

/// Expected linear power gain of a ground-to-air link at horizontal range `r`.
pub fn expected_gain(r: f64, height: f64, params: &ChannelParams) -> f64 {
    let p_los = los_probability(r, height, params);
    let d2 = height * height + r * r;
    (p_los + (1.0 - p_los) * params.kappa) * params.beta0 * d2.powf(-params.alpha / 2.0)
}

/// Expected path gain between a sensor and a UAV at the mission altitude.
pub fn expected_path_loss_g2u(r: f64, params: &ChannelParams) -> f64 {
    expected_gain(r, params.uav_height_m, params)
}

pub fn snr_g2u(r: f64, params: &ChannelParams) -> f64 {
    params.p_sensor_w * expected_path_loss_g2u(r, params) / params.noise_w
}

pub fn snr_u2u(d: f64, params: &ChannelParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "UAV-UAV distance must be positive, got {d}"
        )));
    }
    Ok(params.p_uav_w * params.beta0 / (params.noise_w * d * d))
}

/// UAV-to-BS SNR: the probabilistic LoS model with the height difference
/// between the UAV and the BS antenna, driven by the UAV transmit power.
pub fn snr_u2b(r: f64, params: &ChannelParams, bs_height_m: f64) -> f64 {
    params.p_uav_w * expected_gain(r, params.uav_height_m - bs_height_m, params) / params.noise_w
}

/// Largest `r` with `snr(r) >= threshold` for a strictly decreasing `snr`.
fn invert_decreasing(snr: impl Fn(f64) -> f64, threshold: f64, what: &str) -> Result<f64> {
    if !(snr(0.0) > threshold) {
        return Err(Error::Infeasible(format!(
            "{what} threshold is not attainable even at zero range"
        )));
    }
    let mut hi = 1.0;
    while snr(hi) >= threshold {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Infeasible(format!("{what} coverage radius is unbounded")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if snr(mid) >= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= RADIUS_REL_TOL * lo.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(lo)
}

pub fn coverage_radii(params: &ChannelParams, bs_height_m: f64) -> Result<CoverageRadii> {
    let r_u2u_m =
        (params.p_uav_w * params.beta0 / (params.noise_w * params.snr_th_u2u.linear())).sqrt();
    if !(r_u2u_m > 0.0 && r_u2u_m.is_finite()) {
        return Err(Error::Infeasible("UAV-UAV coverage radius is not positive".into()));
    }
    let r_g2u_m = invert_decreasing(|r| snr_g2u(r, params), params.snr_th_g2u.linear(), "SN-UAV")?;
    let r_u2b_m = invert_decreasing(
        |r| snr_u2b(r, params, bs_height_m),
        params.snr_th_u2b.linear(),
        "UAV-BS",
    )?;
    Ok(CoverageRadii {
        r_g2u_m,
        r_u2u_m,
        r_u2b_m,
    })
}

/// Spectral efficiency `log2(1 + snr)` of each member, checking coverage.
fn member_efficiencies(members: &[SensorNode], cp: Point2, params: &ChannelParams) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::InvalidArgument("cluster has no members".into()));
    }
    let threshold = params.snr_th_g2u.linear() * (1.0 - COVERAGE_SLACK);
    members
        .iter()
        .map(|s| {
            let r = s.position.dist(cp);
            let snr = snr_g2u(r, params);
            if snr < threshold {
                return Err(Error::CoverageViolation {
                    sensor: s.id,
                    distance: r,
                });
            }
            Ok((1.0 + snr).log2())
        })
        .collect()
}

/// Per-member upload time when a member owns the whole bandwidth.
fn full_band_times(members: &[SensorNode], cp: Point2, params: &ChannelParams) -> Result<Vec<f64>> {
    let eff = member_efficiencies(members, cp, params)?;
    Ok(members
        .iter()
        .zip(eff)
        .map(|(s, e)| s.data_bits / (params.bandwidth_hz * e))
        .collect())
}

/// Bandwidth shares under which every member finishes its upload at the
/// same instant.
pub fn optimal_bandwidth_shares(
    members: &[SensorNode],
    cp: Point2,
    params: &ChannelParams,
) -> Result<Vec<f64>> {
    let rho = full_band_times(members, cp, params)?;
    let total: f64 = rho.iter().sum();
    Ok(rho.into_iter().map(|r| r / total).collect())
}

/// Minimum hover time at `cp` to drain all members (the equal-finish optimum).
pub fn min_hover_time(members: &[SensorNode], cp: Point2, params: &ChannelParams) -> Result<f64> {
    Ok(full_band_times(members, cp, params)?.into_iter().sum())
}

/// Time needed to drain all members under an arbitrary share vector.
pub fn hover_time_with_shares(
    members: &[SensorNode],
    cp: Point2,
    params: &ChannelParams,
    shares: &[f64],
) -> Result<f64> {
    if shares.len() != members.len() {
        return Err(Error::InvalidArgument(format!(
            "{} shares for {} members",
            shares.len(),
            members.len()
        )));
    }
    let rho = full_band_times(members, cp, params)?;
    Ok(rho
        .iter()
        .zip(shares)
        .map(|(r, &a)| if a > 0.0 { r / a } else { f64::INFINITY })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ChannelParams {
        ChannelParams::default()
    }

    fn sensor(id: usize, x: f64, y: f64, bits: f64) -> SensorNode {
        SensorNode {
            id,
            position: Point2::new(x, y),
            data_bits: bits,
        }
    }

    #[test]
    fn los_overhead_asymptote() {
        assert!((los_probability(0.0, 100.0, &params()) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn los_at_ten_degrees() {
        // 40-digit evaluation of the LoS curve at r = 567.1 m, H = 100 m.
        let p = los_probability(567.1, 100.0, &params());
        assert!((p - 0.649_459_482_948_020_1).abs() < 1e-12, "{p}");
    }

    #[test]
    fn los_monotone_in_range() {
        let p = params();
        let mut prev = los_probability(0.0, 100.0, &p);
        for i in 1..500 {
            let cur = los_probability(i as f64 * 20.0, 100.0, &p);
            assert!(cur < prev);
            assert!(cur > 0.0 && cur < 1.0);
            prev = cur;
        }
    }

    #[test]
    fn path_loss_overhead() {
        let g = expected_path_loss_g2u(0.0, &params());
        assert!((g - 1.42e-8).abs() < 1e-20, "{g}");
    }

    #[test]
    fn path_loss_kappa_one_is_free_space() {
        let mut p = params();
        p.kappa = 1.0;
        for r in [0.0, 10.0, 500.0, 3000.0] {
            let d2: f64 = 100.0 * 100.0 + r * r;
            assert_eq!(expected_path_loss_g2u(r, &p), p.beta0 * d2.powf(-1.0));
        }
    }

    #[test]
    fn snr_g2u_overhead_value() {
        let snr = snr_g2u(0.0, &params());
        assert!((snr - 7.1e4).abs() / 7.1e4 < 1e-12, "{snr}");
        assert!((10.0 * snr.log10() - 48.51).abs() < 0.01);
    }

    #[test]
    fn snr_u2u_inversion_identity() {
        let p = params();
        let th = p.snr_th_u2u.linear();
        let d = (p.p_uav_w * p.beta0 / (p.noise_w * th)).sqrt();
        assert!((snr_u2u(d, &p).unwrap() - th).abs() / th < 1e-12);
        assert!(snr_u2u(0.0, &p).is_err());
    }

    #[test]
    fn reference_radii() {
        let p = params();
        let r = coverage_radii(&p, 20.0).unwrap();
        // Closed form for U2U; 40-digit bisection oracle for the other two.
        assert!((r.r_u2u_m - 3991.573_881_451_761).abs() < 1e-6, "{}", r.r_u2u_m);
        assert!((r.r_g2u_m - 1447.860_707_288_939).abs() / 1447.86 < 1e-8, "{}", r.r_g2u_m);
        assert!((r.r_u2b_m - 4057.323_628_847_918).abs() / 4057.32 < 1e-8, "{}", r.r_u2b_m);
        let at = snr_g2u(r.r_g2u_m, &p);
        assert!((at - 100.0).abs() / 100.0 < 1e-6);
        let at = snr_u2b(r.r_u2b_m, &p, 20.0);
        assert!((at - p.snr_th_u2b.linear()).abs() / p.snr_th_u2b.linear() < 1e-6);
    }

    #[test]
    fn unattainable_threshold() {
        let mut p = params();
        p.snr_th_g2u = crate::model::SnrThreshold::from_db(60.0);
        assert!(matches!(coverage_radii(&p, 20.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn singleton_share() {
        let m = [sensor(0, 10.0, 0.0, 1e7)];
        assert_eq!(optimal_bandwidth_shares(&m, Point2::ORIGIN, &params()).unwrap(), vec![1.0]);
    }

    #[test]
    fn symmetric_pair_shares() {
        let m = [sensor(0, 300.0, 0.0, 1e7), sensor(1, -300.0, 0.0, 1e7)];
        let s = optimal_bandwidth_shares(&m, Point2::ORIGIN, &params()).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15 && (s[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn share_beyond_coverage_is_rejected() {
        let m = [sensor(7, 5000.0, 0.0, 1e7)];
        match optimal_bandwidth_shares(&m, Point2::ORIGIN, &params()) {
            Err(Error::CoverageViolation { sensor, .. }) => assert_eq!(sensor, 7),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_sensor_hover_time() {
        let m = [sensor(0, 0.0, 0.0, 1e7)];
        let t = min_hover_time(&m, Point2::ORIGIN, &params()).unwrap();
        // 1e7 / (2e6 log2(1 + 7.1e4)), 40-digit evaluation.
        assert!((t - 0.310_259_312_602_714).abs() < 1e-12, "{t}");
    }

    #[test]
    fn hover_is_sum_of_singletons() {
        let p = params();
        let cp = Point2::new(50.0, 50.0);
        let m = [
            sensor(0, 0.0, 0.0, 1e7),
            sensor(1, 400.0, 20.0, 2e7),
            sensor(2, -100.0, 900.0, 5e6),
        ];
        let total = min_hover_time(&m, cp, &p).unwrap();
        let parts: f64 = m
            .iter()
            .map(|s| min_hover_time(std::slice::from_ref(s), cp, &p).unwrap())
            .sum();
        assert!((total - parts).abs() < 1e-12);
        let rev: Vec<_> = m.iter().rev().copied().collect();
        assert!((min_hover_time(&rev, cp, &p).unwrap() - total).abs() < 1e-12);
    }
}
