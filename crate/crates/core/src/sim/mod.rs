//! Euler–Maruyama simulation, first-hit ensembles and the order process.

mod em;
mod ensemble;
mod order;
mod rng;
mod timechange;

pub use em::{default_dt, em_step, stability_dt, ValleySet};
pub use ensemble::{run_transition_ensemble, EnsembleStats, FirstHit};
pub use order::{empirical_generator, order_process, GeneratorEstimate, Holding, Region, TransitionLog, Visit};
pub use rng::{derive_seed, stream};
pub use timechange::TimeChange;

use crate::error::{Error, Result};
use crate::landscape::LandscapeGraph;

#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// The first deepest minimum of the given well.
    Valley(usize),
    Point(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub eps: f64,
    pub dt: f64,
    pub max_natural_time: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub start: Start,
}

impl SimConfig {
    /// Validates the configuration and returns warnings (dt above the stability bound).
    pub fn validate(&self, graph: &LandscapeGraph) -> Result<Vec<String>> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain("dt must be positive".into()));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Domain("eps must be non-negative".into()));
        }
        if self.n_trajectories == 0 {
            return Err(Error::Domain("at least one trajectory is required".into()));
        }
        let bound = stability_dt(graph);
        let mut warnings = Vec::new();
        if self.dt > bound {
            warnings.push(format!("dt = {} exceeds the stability bound {bound:.3e}", self.dt));
        }
        Ok(warnings)
    }

    pub(crate) fn start_point(&self, graph: &LandscapeGraph) -> Result<Vec<f64>> {
        match &self.start {
            Start::Point(x) => Ok(x.clone()),
            Start::Valley(i) => {
                let well = graph
                    .wells
                    .get(*i)
                    .ok_or_else(|| Error::Domain(format!("no well with index {i}")))?;
                Ok(graph.critical_points[well.deepest[0]].location.as_slice().to_vec())
            }
        }
    }
}
