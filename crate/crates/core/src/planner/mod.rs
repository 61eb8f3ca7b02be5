//! Trajectory planners producing comparable [`MissionPlan`]s.

pub mod baselines;
pub mod pmtp;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::CoverageRadii;
use crate::clustering::ClusterSet;
use crate::error::{Error, Result};
use crate::mission::MissionPlan;
use crate::model::Scenario;
use crate::partition::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Point matching across rings.
    Pmtp,
    /// Single collector with relays on the line to the BS.
    Ttp,
    /// Angular sweep, one ring UAV collecting at a time.
    Cstp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Pmtp, Algorithm::Ttp, Algorithm::Cstp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pmtp => "pmtp",
            Algorithm::Ttp => "ttp",
            Algorithm::Cstp => "cstp",
        }
    }

    pub fn plan(
        self,
        scenario: &Scenario,
        cluster_set: &ClusterSet,
        topology: &Topology,
        radii: &CoverageRadii,
    ) -> Result<MissionPlan> {
        match self {
            Algorithm::Pmtp => pmtp::plan(scenario, cluster_set, topology, radii),
            Algorithm::Ttp => baselines::plan_ttp(scenario, cluster_set, topology, radii),
            Algorithm::Cstp => baselines::plan_cstp(scenario, cluster_set, topology, radii),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown algorithm '{s}' (expected pmtp, ttp or cstp)"))
            })
    }
}
