//! Problem instance types, random scenario generation and the JSON instance
//! format.
//!
//! All quantities are SI (meters, watts, hertz, bits). SNR thresholds are
//! written to files in dB and converted to linear once, when a
//! [`SnrThreshold`] is built.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// An SNR threshold. The dB value is authoritative; the linear value is
/// derived from it once at construction so instance files round-trip exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct SnrThreshold {
    db: f64,
    linear: f64,
}

impl SnrThreshold {
    pub fn from_db(db: f64) -> Self {
        SnrThreshold {
            db,
            linear: 10f64.powf(db / 10.0),
        }
    }

    pub fn db(self) -> f64 {
        self.db
    }

    pub fn linear(self) -> f64 {
        self.linear
    }
}

impl From<f64> for SnrThreshold {
    fn from(db: f64) -> Self {
        SnrThreshold::from_db(db)
    }
}

impl From<SnrThreshold> for f64 {
    fn from(t: SnrThreshold) -> f64 {
        t.db
    }
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Propagation and radio parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Environment constant `a` of the LoS probability curve.
    pub a: f64,
    /// Environment constant `b` of the LoS probability curve.
    pub b: f64,
    /// Extra NLoS attenuation factor, strictly between 0 and 1.
    pub kappa: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Linear channel power gain at the 1 m reference distance.
    pub beta0: f64,
    pub uav_height_m: f64,
    pub bandwidth_hz: f64,
    pub p_sensor_w: f64,
    pub p_uav_w: f64,
    pub noise_w: f64,
    #[serde(rename = "snr_th_g2u_db")]
    pub snr_th_g2u: SnrThreshold,
    #[serde(rename = "snr_th_u2u_db")]
    pub snr_th_u2u: SnrThreshold,
    #[serde(rename = "snr_th_u2b_db")]
    pub snr_th_u2b: SnrThreshold,
}

/// Free-space gain at 1 m for a 2 GHz carrier (about -38.5 dB).
pub const DEFAULT_BETA0: f64 = 1.42e-4;

impl Default for ChannelParams {
    /// Suburban parameter set used for the reference experiments.
    fn default() -> Self {
        ChannelParams {
            a: 4.88,
            b: 0.43,
            kappa: 0.2,
            alpha: 2.0,
            beta0: DEFAULT_BETA0,
            uav_height_m: 100.0,
            bandwidth_hz: 2e6,
            p_sensor_w: 0.05,
            p_uav_w: 0.1,
            noise_w: dbm_to_watts(-110.0),
            snr_th_g2u: SnrThreshold::from_db(20.0),
            snr_th_u2u: SnrThreshold::from_db(19.5),
            snr_th_u2b: SnrThreshold::from_db(13.0),
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("beta0", self.beta0),
            ("noise_w", self.noise_w),
            ("uav_height_m", self.uav_height_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("p_sensor_w", self.p_sensor_w),
            ("p_uav_w", self.p_uav_w),
            ("alpha", self.alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Validation(format!(
                "kappa must lie in (0, 1), got {}",
                self.kappa
            )));
        }
        for (name, t) in [
            ("snr_th_g2u_db", self.snr_th_g2u),
            ("snr_th_u2u_db", self.snr_th_u2u),
            ("snr_th_u2b_db", self.snr_th_u2b),
        ] {
            if !(t.db() > 0.0 && t.db().is_finite()) {
                return Err(Error::Validation(format!(
                    "{name} must be a positive dB value, got {}",
                    t.db()
                )));
            }
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::Validation("LoS parameters a, b must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorNode {
    pub id: usize,
    #[serde(rename = "position_m")]
    pub position: Point2,
    pub data_bits: f64,
}

/// An immutable problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub region_width_m: f64,
    pub region_height_m: f64,
    #[serde(rename = "bs_position_m")]
    pub bs_position: Point2,
    pub bs_height_m: f64,
    /// Maximum number of sensors one cluster may hold.
    pub n_th: usize,
    pub v_max_mps: f64,
    pub d_safe_m: f64,
    pub rng_seed: u64,
    pub params: ChannelParams,
    pub sensors: Vec<SensorNode>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.region_width_m > 0.0 && self.region_height_m > 0.0) {
            return Err(Error::Validation("region dimensions must be positive".into()));
        }
        if !(self.v_max_mps > 0.0) {
            return Err(Error::Validation("v_max_mps must be positive".into()));
        }
        if !(self.d_safe_m >= 0.0) {
            return Err(Error::Validation("d_safe_m must be non-negative".into()));
        }
        if self.n_th == 0 {
            return Err(Error::Validation("n_th must be at least 1".into()));
        }
        if !(self.bs_height_m >= 0.0 && self.bs_height_m < self.params.uav_height_m) {
            return Err(Error::Validation(
                "bs_height_m must be non-negative and below the UAV altitude".into(),
            ));
        }
        self.params.validate()?;
        if self.sensors.is_empty() {
            return Err(Error::Validation("scenario has no sensors".into()));
        }
        let mut ids = HashSet::with_capacity(self.sensors.len());
        for s in &self.sensors {
            let p = s.position;
            if !(p.x >= 0.0 && p.x <= self.region_width_m && p.y >= 0.0 && p.y <= self.region_height_m)
            {
                return Err(Error::Validation(format!(
                    "sensor {} at ({}, {}) lies outside the {} x {} m region",
                    s.id, p.x, p.y, self.region_width_m, self.region_height_m
                )));
            }
            if !(s.data_bits > 0.0 && s.data_bits.is_finite()) {
                return Err(Error::Validation(format!(
                    "sensor {} has non-positive data_bits",
                    s.id
                )));
            }
            if !ids.insert(s.id) {
                return Err(Error::Validation(format!("duplicate sensor id {}", s.id)));
            }
        }
        Ok(())
    }

    pub fn sensor_positions(&self) -> Vec<Point2> {
        self.sensors.iter().map(|s| s.position).collect()
    }
}

/// Everything needed to draw a random scenario. Defaults reproduce the
/// reference 8 km x 8 km, 1000-sensor setting.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub n_sensors: usize,
    pub data_bits: f64,
    pub params: ChannelParams,
    pub bs_height_m: f64,
    pub n_th: usize,
    pub v_max_mps: f64,
    pub d_safe_m: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            width_m: 8000.0,
            height_m: 8000.0,
            n_sensors: 1000,
            data_bits: 1e7,
            params: ChannelParams::default(),
            bs_height_m: 20.0,
            n_th: 60,
            v_max_mps: 30.0,
            d_safe_m: 30.0,
        }
    }
}

impl ScenarioConfig {
    /// Draws sensors i.i.d. uniformly over the region; the base station sits
    /// at the lower-left corner.
    pub fn generate(&self, seed: u64) -> Result<Scenario> {
        if !(self.width_m > 0.0 && self.height_m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "region must have positive size, got {} x {}",
                self.width_m, self.height_m
            )));
        }
        if self.n_sensors == 0 {
            return Err(Error::InvalidArgument("n_sensors must be at least 1".into()));
        }
        if !(self.data_bits > 0.0) {
            return Err(Error::InvalidArgument("data_bits must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sensors = (0..self.n_sensors)
            .map(|id| SensorNode {
                id,
                position: Point2::new(
                    rng.gen_range(0.0..=self.width_m),
                    rng.gen_range(0.0..=self.height_m),
                ),
                data_bits: self.data_bits,
            })
            .collect();
        let scenario = Scenario {
            region_width_m: self.width_m,
            region_height_m: self.height_m,
            bs_position: Point2::ORIGIN,
            bs_height_m: self.bs_height_m,
            n_th: self.n_th,
            v_max_mps: self.v_max_mps,
            d_safe_m: self.d_safe_m,
            rng_seed: seed,
            params: self.params,
            sensors,
        };
        scenario.validate().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(scenario)
    }
}

/// Applies a partial JSON object of channel parameters on top of `base`.
/// Keys use the instance-file names (thresholds in dB); unknown keys are
/// rejected.
pub fn apply_param_overrides(base: &ChannelParams, text: &str, origin: &str) -> Result<ChannelParams> {
    let parse_err = |source| Error::Parse {
        path: origin.to_string(),
        source,
    };
    let overrides: serde_json::Map<String, serde_json::Value> = serde_json::from_str(text).map_err(parse_err)?;
    let mut merged = serde_json::to_value(base).expect("parameters serialize");
    let fields = merged.as_object_mut().expect("parameters are an object");
    for (k, v) in overrides {
        fields.insert(k, v);
    }
    let params: ChannelParams = serde_json::from_value(merged).map_err(parse_err)?;
    params.validate()?;
    Ok(params)
}

/// Random scenario with the default mission constants (N_th = 60,
/// V_max = 30 m/s, D_s = 30 m, BS height 20 m).
pub fn generate_scenario(
    width_m: f64,
    height_m: f64,
    n_sensors: usize,
    data_bits: f64,
    params: ChannelParams,
    seed: u64,
) -> Result<Scenario> {
    ScenarioConfig {
        width_m,
        height_m,
        n_sensors,
        data_bits,
        params,
        ..ScenarioConfig::default()
    }
    .generate(seed)
}

pub fn scenario_to_json(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serializes")
}

pub fn scenario_from_json(text: &str, origin: &str) -> Result<Scenario> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|source| Error::Parse {
        path: origin.to_string(),
        source,
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, scenario_to_json(scenario))?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    scenario_from_json(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_merge_and_reject_unknown_keys() {
        let base = ChannelParams::default();
        let p = apply_param_overrides(&base, r#"{"beta0": 2e-4, "snr_th_g2u_db": 17}"#, "cfg").unwrap();
        assert_eq!(p.beta0, 2e-4);
        assert_eq!(p.snr_th_g2u.db(), 17.0);
        assert_eq!(p.alpha, base.alpha);
        assert!(apply_param_overrides(&base, r#"{"beta_zero": 1}"#, "cfg").is_err());
        assert!(apply_param_overrides(&base, r#"{"kappa": 1.5}"#, "cfg").is_err());
    }

    #[test]
    fn reference_scale_generation() {
        let s = generate_scenario(8000.0, 8000.0, 1000, 1e7, ChannelParams::default(), 1).unwrap();
        assert_eq!(s.sensors.len(), 1000);
        assert!(s.sensors.iter().all(|n| n.data_bits == 1e7));
        assert_eq!(s.bs_position, Point2::ORIGIN);
        s.validate().unwrap();
    }

    #[test]
    fn single_sensor_instance() {
        let s = generate_scenario(100.0, 100.0, 1, 1.0, ChannelParams::default(), 0).unwrap();
        assert_eq!(s.sensors.len(), 1);
        let p = s.sensors[0].position;
        assert!((0.0..=100.0).contains(&p.x) && (0.0..=100.0).contains(&p.y));
    }

    #[test]
    fn same_seed_same_layout() {
        let a = generate_scenario(500.0, 700.0, 50, 1e6, ChannelParams::default(), 42).unwrap();
        let b = generate_scenario(500.0, 700.0, 50, 1e6, ChannelParams::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(500.0, 700.0, 50, 1e6, ChannelParams::default(), 43).unwrap();
        assert_ne!(a.sensors, c.sensors);
    }

    #[test]
    fn generation_rejects_bad_arguments() {
        let p = ChannelParams::default();
        assert!(matches!(
            generate_scenario(0.0, 10.0, 5, 1.0, p, 0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_scenario(10.0, 10.0, 0, 1.0, p, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn noise_is_minus_110_dbm() {
        assert!((ChannelParams::default().noise_w - 1e-14).abs() < 1e-26);
    }

    #[test]
    fn thresholds_are_linear_internally() {
        let p = ChannelParams::default();
        assert!((p.snr_th_g2u.linear() - 100.0).abs() < 1e-12);
        assert!((p.snr_th_u2u.linear() - 89.125_093_813_374_55).abs() < 1e-9);
    }

    #[test]
    fn round_trip_is_exact() {
        let s = generate_scenario(8000.0, 8000.0, 1000, 1e7, ChannelParams::default(), 9).unwrap();
        let back = scenario_from_json(&scenario_to_json(&s), "mem").unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_sensor_outside_region() {
        let mut s = generate_scenario(100.0, 100.0, 3, 1.0, ChannelParams::default(), 0).unwrap();
        s.sensors[1].position = Point2::new(150.0, 10.0);
        let err = scenario_from_json(&scenario_to_json(&s), "mem").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let s = generate_scenario(100.0, 100.0, 3, 1.0, ChannelParams::default(), 0).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&scenario_to_json(&s)).unwrap();
        v["params"].as_object_mut().unwrap().remove("beta0");
        let err = scenario_from_json(&v.to_string(), "mem").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("beta0"), "{err}");
    }
}
