use rayon::prelude::*;

use super::em::{Stepper, ValleySet};
use super::rng::stream;
use super::SimConfig;
use crate::error::{Error, Result};
use crate::field::FieldEval;
use crate::landscape::LandscapeGraph;

#[derive(Debug, Clone, PartialEq)]
pub struct FirstHit {
    pub trajectory: u64,
    pub from: usize,
    /// None when censored at max_natural_time or aborted.
    pub to: Option<usize>,
    pub tau_natural: f64,
    pub tau_rescaled: f64,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub from: usize,
    pub n: usize,
    pub completed: usize,
    pub aborted: usize,
    pub censored_fraction: f64,
    /// Sample mean of τ/θ_ε over completed trajectories.
    pub mean_rescaled: f64,
    pub std_rescaled: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// ν_i / ω_i.
    pub predicted: f64,
    pub ratio: f64,
    pub unreliable: bool,
    pub low_power: bool,
}

const Z95: f64 = 1.959963984540054;

/// First entry into V_⋆ ∖ V_i from the start point, one record per trajectory.
pub fn run_transition_ensemble(
    field: &FieldEval,
    graph: &LandscapeGraph,
    cfg: &SimConfig,
) -> Result<(Vec<FirstHit>, EnsembleStats)> {
    cfg.validate(graph)?;
    let start = cfg.start_point(graph)?;
    let valleys = ValleySet::new(graph);
    let from = valleys
        .locate(&start)
        .ok_or_else(|| Error::Domain("start point is not inside a valley".into()))?;
    let theta = graph.theta(cfg.eps);
    let max_steps = (cfg.max_natural_time / cfg.dt).ceil() as u64;
    let targets: Vec<bool> = (0..graph.wells.len())
        .map(|w| w != from && graph.s_star.contains(&w))
        .collect();

    let hits: Vec<FirstHit> = (0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|traj| {
            let mut rng = stream(cfg.seed, traj);
            let mut stepper = Stepper::new(field, cfg.eps, cfg.dt);
            let mut x = start.clone();
            let mut n = 0u64;
            let mut to = None;
            let mut aborted = None;
            while n < max_steps {
                if !stepper.step(&mut x, &mut rng) {
                    aborted = Some(format!("non-finite state at step {}; dt = {} is too large", n + 1, cfg.dt));
                    break;
                }
                n += 1;
                if let Some(w) = valleys.locate(&x) {
                    if targets[w] {
                        to = Some(w);
                        break;
                    }
                }
            }
            let tau = n as f64 * cfg.dt;
            FirstHit {
                trajectory: traj,
                from,
                to,
                tau_natural: tau,
                tau_rescaled: tau / theta,
                aborted,
            }
        })
        .collect();

    let done: Vec<f64> = hits.iter().filter(|h| h.to.is_some()).map(|h| h.tau_rescaled).collect();
    let n = hits.len();
    let completed = done.len();
    let mean = if completed > 0 { done.iter().sum::<f64>() / completed as f64 } else { f64::NAN };
    let std = if completed > 1 {
        (done.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (completed - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    let half = Z95 * std / (completed as f64).sqrt();
    let predicted = graph.wells[from].nu / graph.omega_i(from);
    let censored_fraction = (n - completed) as f64 / n as f64;
    let stats = EnsembleStats {
        from,
        n,
        completed,
        aborted: hits.iter().filter(|h| h.aborted.is_some()).count(),
        censored_fraction,
        mean_rescaled: mean,
        std_rescaled: std,
        ci_low: mean - half,
        ci_high: mean + half,
        predicted,
        ratio: mean / predicted,
        unreliable: censored_fraction > 0.2,
        low_power: completed < 30,
    };
    Ok((hits, stats))
}
