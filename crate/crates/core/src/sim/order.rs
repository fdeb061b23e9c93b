use nalgebra::DMatrix;
use rayon::prelude::*;

use super::em::{Stepper, ValleySet};
use super::rng::stream;
use super::SimConfig;
use crate::error::{Error, Result};
use crate::field::FieldEval;
use crate::landscape::LandscapeGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Valley(usize),
    Delta,
}

/// A stay in one region, natural time. Returns to the same valley through Δ are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub region: Region,
    pub entry: f64,
    pub exit: f64,
}

/// One holding of the order process; `duration` is in θ_ε units of trace time.
#[derive(Debug, Clone, PartialEq)]
pub struct Holding {
    pub state: usize,
    pub duration: f64,
    /// The last holding is cut by the horizon.
    pub censored: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionLog {
    pub trajectory: u64,
    pub visits: Vec<Visit>,
    /// Natural time between successive arrivals in a new valley of V_⋆.
    pub first_hits: Vec<f64>,
    pub path: Vec<Holding>,
    /// T_ε(horizon), rescaled.
    pub trace_time: f64,
    /// Rescaled time spent in Δ.
    pub delta_time: f64,
    /// Rescaled horizon actually simulated.
    pub horizon: f64,
    /// Rescaled [start, end) runs inside a single valley, when requested.
    pub occupancy: Option<Vec<(f64, f64, usize)>>,
    pub aborted: Option<String>,
}

impl TransitionLog {
    /// State of the order process at trace time t (rescaled); None past T_ε(horizon).
    pub fn state_at(&self, t: f64) -> Option<usize> {
        let mut cum = 0.0;
        for h in &self.path {
            cum += h.duration;
            if t < cum {
                return Some(h.state);
            }
        }
        None
    }
}

/// Simulates the sped-up process up to `horizon` (θ_ε units) and records the order process.
pub fn order_process(
    field: &FieldEval,
    graph: &LandscapeGraph,
    cfg: &SimConfig,
    horizon: f64,
    record_occupancy: bool,
) -> Result<Vec<TransitionLog>> {
    cfg.validate(graph)?;
    let start = cfg.start_point(graph)?;
    let valleys = ValleySet::new(graph);
    let in_star: Vec<bool> = (0..graph.wells.len()).map(|w| graph.s_star.contains(&w)).collect();
    let locate = |x: &[f64]| valleys.locate(x).filter(|&w| in_star[w]);
    let first = locate(&start).ok_or_else(|| Error::Domain("order process must start inside V_star".into()))?;
    let theta = graph.theta(cfg.eps);
    let steps = (horizon * theta / cfg.dt).ceil() as u64;
    let dt = cfg.dt;
    let scale = dt / theta;

    Ok((0..cfg.n_trajectories as u64)
        .into_par_iter()
        .map(|traj| {
            let mut rng = stream(cfg.seed, traj);
            let mut stepper = Stepper::new(field, cfg.eps, dt);
            let mut x = start.clone();
            let mut current = first;
            let mut hold_steps = 0u64;
            let mut trace_steps = 0u64;
            let mut delta_steps = 0u64;
            let mut path = Vec::new();
            let mut visits = Vec::new();
            let mut first_hits = Vec::new();
            let mut last_arrival = 0u64;
            let mut visit_entry = 0u64;
            let mut visit_exit = 0u64;
            let mut occupancy = record_occupancy.then(Vec::new);
            let mut run: Option<(u64, usize)> = None;
            let mut aborted = None;
            let mut n = 0u64;
            while n < steps {
                match locate(&x) {
                    Some(w) => {
                        if w != current {
                            path.push(Holding {
                                state: current,
                                duration: hold_steps as f64 * scale,
                                censored: false,
                            });
                            visits.push(Visit {
                                region: Region::Valley(current),
                                entry: visit_entry as f64 * dt,
                                exit: visit_exit as f64 * dt,
                            });
                            if n > visit_exit {
                                visits.push(Visit {
                                    region: Region::Delta,
                                    entry: visit_exit as f64 * dt,
                                    exit: n as f64 * dt,
                                });
                            }
                            first_hits.push((n - last_arrival) as f64 * dt);
                            last_arrival = n;
                            visit_entry = n;
                            hold_steps = 0;
                            current = w;
                        }
                        hold_steps += 1;
                        trace_steps += 1;
                        visit_exit = n + 1;
                        if let Some(occ) = occupancy.as_mut() {
                            match run {
                                Some((_, rw)) if rw == w => {}
                                Some((s, rw)) => {
                                    occ.push((s as f64 * scale, n as f64 * scale, rw));
                                    run = Some((n, w));
                                }
                                None => run = Some((n, w)),
                            }
                        }
                    }
                    None => {
                        delta_steps += 1;
                        if let (Some(occ), Some((s, rw))) = (occupancy.as_mut(), run.take()) {
                            occ.push((s as f64 * scale, n as f64 * scale, rw));
                        }
                    }
                }
                if !stepper.step(&mut x, &mut rng) {
                    aborted = Some(format!("non-finite state at step {}; dt = {dt} is too large", n + 1));
                    n += 1;
                    break;
                }
                n += 1;
            }
            if let (Some(occ), Some((s, rw))) = (occupancy.as_mut(), run) {
                occ.push((s as f64 * scale, n as f64 * scale, rw));
            }
            path.push(Holding {
                state: current,
                duration: hold_steps as f64 * scale,
                censored: true,
            });
            visits.push(Visit {
                region: Region::Valley(current),
                entry: visit_entry as f64 * dt,
                exit: visit_exit as f64 * dt,
            });
            if n > visit_exit {
                visits.push(Visit {
                    region: Region::Delta,
                    entry: visit_exit as f64 * dt,
                    exit: n as f64 * dt,
                });
            }
            TransitionLog {
                trajectory: traj,
                visits,
                first_hits,
                path,
                trace_time: trace_steps as f64 * scale,
                delta_time: delta_steps as f64 * scale,
                horizon: n as f64 * scale,
                occupancy,
                aborted,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorEstimate {
    /// Deepest-well indices labelling rows and columns.
    pub states: Vec<usize>,
    pub jumps: DMatrix<f64>,
    /// Total rescaled holding time per state, censored holdings included.
    pub holding_time: Vec<f64>,
    /// r̂(i,j) = jumps(i,j) / holding_time(i).
    pub rates: DMatrix<f64>,
    /// Half-width of a 95% Poisson interval for each rate.
    pub rate_ci: DMatrix<f64>,
    /// Coefficient of variation of completed holding times per state.
    pub holding_cv: Vec<f64>,
    /// Fraction of rescaled time spent in Δ.
    pub delta_fraction: f64,
    /// States with fewer than 50 recorded jumps.
    pub low_count: Vec<usize>,
}

pub fn empirical_generator(logs: &[TransitionLog], states: &[usize]) -> GeneratorEstimate {
    let k = states.len();
    let pos = |s: usize| states.iter().position(|&q| q == s).expect("state in S_star");
    let mut jumps = DMatrix::<f64>::zeros(k, k);
    let mut holding = vec![0.0; k];
    let mut complete: Vec<Vec<f64>> = vec![Vec::new(); k];
    let (mut delta, mut total) = (0.0, 0.0);
    for log in logs {
        delta += log.delta_time;
        total += log.horizon;
        for (a, h) in log.path.iter().enumerate() {
            let i = pos(h.state);
            holding[i] += h.duration;
            if let Some(next) = log.path.get(a + 1) {
                jumps[(i, pos(next.state))] += 1.0;
                complete[i].push(h.duration);
            }
        }
    }
    let rates = DMatrix::from_fn(k, k, |i, j| if holding[i] > 0.0 { jumps[(i, j)] / holding[i] } else { 0.0 });
    let rate_ci = DMatrix::from_fn(k, k, |i, j| {
        if holding[i] > 0.0 {
            1.959963984540054 * jumps[(i, j)].sqrt() / holding[i]
        } else {
            f64::INFINITY
        }
    });
    let holding_cv = complete
        .iter()
        .map(|v| {
            if v.len() < 2 {
                return f64::NAN;
            }
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            var.sqrt() / m
        })
        .collect();
    let low_count = (0..k).filter(|&i| jumps.row(i).sum() < 50.0).map(|i| states[i]).collect();
    GeneratorEstimate {
        states: states.to_vec(),
        jumps,
        holding_time: holding,
        rates,
        rate_ci,
        holding_cv,
        delta_fraction: if total > 0.0 { delta / total } else { f64::NAN },
        low_count,
    }
}
