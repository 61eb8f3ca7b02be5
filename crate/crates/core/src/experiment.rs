//! End-to-end pipeline (radii, clustering, rings, planning, evaluation) and
//! parameter sweeps over random scenarios.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{self, CoverageRadii};
use crate::clustering::{self, ClusterSet};
use crate::error::{Error, Result};
use crate::mission::{self, EvalReport, MissionPlan};
use crate::model::{Scenario, ScenarioConfig, SnrThreshold};
use crate::partition::{self, Topology};
use crate::planner::Algorithm;

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "UAVCOLLECT_WORKERS";

/// A scenario with everything the planners need.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub radii: CoverageRadii,
    pub clusters: ClusterSet,
    pub topology: Topology,
}

pub fn prepare(scenario: Scenario) -> Result<Prepared> {
    scenario.validate()?;
    let radii = channel::coverage_radii(&scenario.params, scenario.bs_height_m)?;
    let clusters = clustering::cluster_sensors(&scenario, &radii)?;
    let topology = partition::build_topology(&clusters.cp_positions(), scenario.bs_position, &radii)?;
    Ok(Prepared {
        scenario,
        radii,
        clusters,
        topology,
    })
}

impl Prepared {
    pub fn plan(&self, algo: Algorithm) -> Result<MissionPlan> {
        algo.plan(&self.scenario, &self.clusters, &self.topology, &self.radii)
    }

    pub fn evaluate(&self, plan: &MissionPlan) -> Result<EvalReport> {
        mission::evaluate(plan, &self.scenario, &self.topology, &self.radii, &self.clusters)
    }

    pub fn run(&self, algo: Algorithm) -> Result<(MissionPlan, EvalReport)> {
        let plan = self.plan(algo)?;
        let report = self.evaluate(&plan)?;
        Ok((plan, report))
    }

    pub fn lower_bound(&self) -> f64 {
        mission::lower_bound(&self.clusters, &self.topology, self.scenario.v_max_mps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    Sensors,
    SnrG2uDb,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Sensors => "sensors",
            SweepAxis::SnrG2uDb => "snr-g2u-db",
        }
    }

    /// Scenario configuration with this axis set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Sensors => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidArgument(format!("sensor count {value} is not a positive integer")));
                }
                cfg.n_sensors = value as usize;
            }
            SweepAxis::SnrG2uDb => cfg.params.snr_th_g2u = SnrThreshold::from_db(value),
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensors" => Ok(SweepAxis::Sensors),
            "snr-g2u-db" => Ok(SweepAxis::SnrG2uDb),
            _ => Err(Error::InvalidArgument(format!(
                "unknown sweep axis '{s}' (expected sensors or snr-g2u-db)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub seed: u64,
    pub algo: Algorithm,
    pub completion_s: f64,
    pub lower_bound_s: f64,
    pub flight_s: f64,
    pub hover_s: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: ScenarioConfig,
    pub algorithms: Vec<Algorithm>,
}

/// Worker count from the environment, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn run_cell(spec: &SweepSpec, value: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let cfg = spec.axis.apply(&spec.base, value)?;
    let prepared = prepare(cfg.generate(seed)?)?;
    spec.algorithms
        .iter()
        .map(|&algo| {
            let (_, report) = prepared.run(algo)?;
            if !report.all_passed() {
                let failed: Vec<_> = report.failed_checks().iter().map(|c| c.name.clone()).collect();
                return Err(Error::Validation(format!(
                    "{algo} plan for {}={value}, seed {seed} fails: {}",
                    spec.axis,
                    failed.join(", ")
                )));
            }
            Ok(SweepRow {
                axis_value: value,
                seed,
                algo,
                completion_s: report.completion_s,
                lower_bound_s: report.lower_bound_s,
                flight_s: report.flight_s,
                hover_s: report.hover_s,
            })
        })
        .collect()
}

/// Runs every (value, seed) cell and returns rows ordered by value, seed and
/// algorithm regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() || spec.seeds.is_empty() || spec.algorithms.is_empty() {
        return Err(Error::InvalidArgument("sweep needs values, seeds and algorithms".into()));
    }
    let cells: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Vec<SweepRow>>> =
        pool.install(|| cells.par_iter().map(|&(v, s)| run_cell(spec, v, s)).collect());
    let mut rows = Vec::with_capacity(cells.len() * spec.algorithms.len());
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Mean completion time per (axis value, algorithm), in value order.
pub fn mean_completion(rows: &[SweepRow], algo: Algorithm) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.algo == algo) {
        match out.iter_mut().find(|e| e.0 == r.axis_value) {
            Some(e) => {
                e.1 += r.completion_s;
                e.2 += 1;
            }
            None => out.push((r.axis_value, r.completion_s, 1)),
        }
    }
    out.into_iter().map(|(v, s, n)| (v, s / n as f64)).collect()
}
