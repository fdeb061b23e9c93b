use metastable::chain::FiniteChain;
use metastable::landscape::LandscapeGraph;
use metastable::sim::{
    default_dt, derive_seed, empirical_generator, order_process, run_transition_ensemble, SimConfig, Start,
};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::analyze::Model;
use crate::failure::CliResult;
use crate::output::{csv_artifact, eps_dir, jf, jmat, json_artifact, num, Artifact};

pub struct SimParams {
    pub eps: Vec<f64>,
    pub traj: usize,
    pub seed: u64,
    pub horizon: f64,
    pub dt: Option<f64>,
    pub max_steps: u64,
}

/// Limiting-chain rates β_{ij}/ν_i on the deepest wells of a component graph.
fn predicted_rates(sub: &LandscapeGraph) -> CliResult<DMatrix<f64>> {
    let x = FiniteChain::auxiliary(sub.omega.clone())?;
    let beta = x.beta_matrix(&sub.s_star)?;
    let nu: Vec<f64> = sub.s_star.iter().map(|&i| sub.wells[i].nu).collect();
    Ok(FiniteChain::limiting(&beta, &nu)?.rates())
}

fn map_matrix(m: &DMatrix<f64>, f: impl Fn(f64, usize, usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| f(m[(i, j)], i, j))
}

pub fn run(model: &Model, p: &SimParams) -> CliResult<(Vec<Artifact>, Vec<String>)> {
    let graph = &model.graph;
    let dt = p.dt.unwrap_or_else(|| default_dt(graph));
    let comps: Vec<Vec<usize>> = graph
        .components()
        .into_iter()
        .filter(|c| graph.restrict(c).s_star.len() >= 2)
        .collect();
    let mut notices = Vec::new();
    if comps.is_empty() {
        notices.push("no component has two deepest wells; simulation skipped".to_string());
        return Ok((Vec::new(), notices));
    }
    let mut artifacts = Vec::new();
    for &eps in &p.eps {
        let mut transitions = Vec::new();
        let mut orderpath = Vec::new();
        let mut comp_json = Vec::new();
        let mut warnings = Vec::new();
        let mut offset = 0u64;
        for (ci, comp) in comps.iter().enumerate() {
            let sub = graph.restrict(comp);
            let theta = sub.theta(eps);
            let predicted_means: Vec<f64> = sub.s_star.iter().map(|&i| sub.wells[i].nu / sub.omega_i(i)).collect();
            let worst = predicted_means.iter().copied().fold(0.0, f64::max);
            let budget = p.max_steps as f64 * dt;
            if worst * theta > budget || p.horizon * theta > budget {
                warnings.push(format!(
                    "component {ci}: predicted transition time {:.3e} or horizon {:.3e} exceeds the step budget {:.3e}; skipped",
                    worst * theta,
                    p.horizon * theta,
                    budget
                ));
                comp_json.push(json!({"wells": comp, "skipped": true, "s_star": sub.s_star.iter().map(|&i| comp[i]).collect::<Vec<_>>(), "log_theta": jf((sub.level - sub.h_min) / eps)}));
                continue;
            }
            let mut ensembles = Vec::new();
            for &start in &sub.s_star {
                let cfg = SimConfig {
                    eps,
                    dt,
                    max_natural_time: (20.0 * worst * theta).min(budget),
                    n_trajectories: p.traj,
                    seed: derive_seed(p.seed, comp[start] as u64),
                    start: Start::Valley(start),
                };
                warnings.extend(cfg.validate(&sub)?);
                let (hits, stats) = run_transition_ensemble(&model.field, &sub, &cfg)?;
                for h in &hits {
                    let status = if h.aborted.is_some() {
                        "aborted"
                    } else if h.to.is_some() {
                        "completed"
                    } else {
                        "censored"
                    };
                    transitions.push(vec![
                        (offset + h.trajectory).to_string(),
                        comp[h.from].to_string(),
                        h.to.map(|t| comp[t].to_string()).unwrap_or_default(),
                        num(h.tau_natural),
                        num(h.tau_rescaled),
                        status.to_string(),
                    ]);
                }
                offset += hits.len() as u64;
                ensembles.push(json!({
                    "from": comp[stats.from],
                    "n": stats.n,
                    "completed": stats.completed,
                    "aborted": stats.aborted,
                    "censored_fraction": jf(stats.censored_fraction),
                    "mean_rescaled": jf(stats.mean_rescaled),
                    "std_rescaled": jf(stats.std_rescaled),
                    "ci95": [jf(stats.ci_low), jf(stats.ci_high)],
                    "predicted": jf(stats.predicted),
                    "ratio": jf(stats.ratio),
                    "unreliable": stats.unreliable,
                    "low_power": stats.low_power,
                    "seed": cfg.seed,
                }));
            }

            let cfg = SimConfig {
                eps,
                dt,
                max_natural_time: p.horizon * theta,
                n_trajectories: p.traj,
                seed: derive_seed(p.seed, (1u64 << 32) | ci as u64),
                start: Start::Valley(sub.s_star[0]),
            };
            let logs = order_process(&model.field, &sub, &cfg, p.horizon, false)?;
            for log in &logs {
                if let Some(msg) = &log.aborted {
                    warnings.push(format!("order-process trajectory {}: {msg}", log.trajectory));
                }
                for h in &log.path {
                    orderpath.push(vec![
                        (offset + log.trajectory).to_string(),
                        comp[h.state].to_string(),
                        num(h.duration),
                        h.censored.to_string(),
                    ]);
                }
            }
            offset += logs.len() as u64;
            let est = empirical_generator(&logs, &sub.s_star);
            let predicted = predicted_rates(&sub)?;
            let longest_hold = predicted.row_iter().map(|r| 1.0 / r.sum()).fold(0.0, f64::max);
            if p.horizon < 5.0 * longest_hold {
                warnings.push(format!(
                    "component {ci}: horizon {} is under 5 predicted mean holding times ({longest_hold:.3}); holding_cv is biased low by censoring",
                    p.horizon
                ));
            }
            let ratio = map_matrix(&est.rates, |r, i, j| if i == j { f64::NAN } else { r / predicted[(i, j)] });
            let holding_mean: Vec<Value> = sub
                .s_star
                .iter()
                .map(|&s| {
                    let v: Vec<f64> = logs
                        .iter()
                        .flat_map(|l| l.path.iter().filter(|h| h.state == s && !h.censored).map(|h| h.duration))
                        .collect();
                    jf(v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            let global_star: Vec<usize> = sub.s_star.iter().map(|&i| comp[i]).collect();
            comp_json.push(json!({
                "wells": comp,
                "skipped": false,
                "s_star": global_star,
                "theta": jf(theta),
                "log_theta": jf((sub.level - sub.h_min) / eps),
                "first_hit": ensembles,
                "order_process": {
                    "seed": cfg.seed,
                    "horizon": jf(p.horizon),
                    "jumps": jmat(&est.jumps),
                    "holding_time": est.holding_time.iter().map(|&v| jf(v)).collect::<Vec<_>>(),
                    "holding_mean": holding_mean,
                    "holding_cv": est.holding_cv.iter().map(|&v| jf(v)).collect::<Vec<_>>(),
                    "rates": jmat(&est.rates),
                    "rate_ci95_halfwidth": jmat(&est.rate_ci),
                    "predicted_rates": jmat(&predicted),
                    "rate_ratio": jmat(&ratio),
                    "delta_fraction": jf(est.delta_fraction),
                    "low_count_states": est.low_count.iter().map(|&s| comp[s]).collect::<Vec<_>>(),
                },
            }));
        }
        warnings.sort();
        warnings.dedup();
        let dir = eps_dir(eps);
        artifacts.push(csv_artifact(
            format!("{dir}/transitions.csv"),
            &["trajectory", "from_valley", "to_valley", "tau_natural", "tau_rescaled", "status"],
            &transitions,
        )?);
        artifacts.push(csv_artifact(
            format!("{dir}/orderpath.csv"),
            &["trajectory", "state", "holding_rescaled", "censored"],
            &orderpath,
        )?);
        artifacts.push(json_artifact(
            format!("{dir}/summary.json"),
            json!({
                "eps": jf(eps),
                "dt": jf(dt),
                "n_trajectories": p.traj,
                "seed": p.seed,
                "components": comp_json,
                "warnings": warnings,
            }),
        ));
    }
    Ok((artifacts, notices))
}
