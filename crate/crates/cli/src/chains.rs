use metastable::chain::{limiting_dirichlet_form, FiniteChain};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::failure::{CliResult, Failure};
use crate::output::{jdvec, jf, jmat, json_artifact, sha256_hex, Artifact};

fn stale(msg: impl Into<String>) -> Failure {
    Failure::Artifact(msg.into())
}

fn as_usizes(v: &Value, what: &str) -> CliResult<Vec<usize>> {
    v.as_array()
        .ok_or_else(|| stale(format!("landscape.json: {what} is not an array")))?
        .iter()
        .map(|x| x.as_u64().map(|n| n as usize).ok_or_else(|| stale(format!("landscape.json: bad entry in {what}"))))
        .collect()
}

fn as_matrix(v: &Value) -> CliResult<DMatrix<f64>> {
    let rows = v.as_array().ok_or_else(|| stale("landscape.json: omega is not a matrix"))?;
    let k = rows.len();
    let mut m = DMatrix::zeros(k, k);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_array().filter(|r| r.len() == k).ok_or_else(|| stale("landscape.json: omega is not square"))?;
        for (j, x) in r.iter().enumerate() {
            m[(i, j)] = x.as_f64().ok_or_else(|| stale("landscape.json: non-numeric omega entry"))?;
        }
    }
    Ok(m)
}

/// Chain analysis of one connected component with at least two deepest wells.
fn component_json(omega: &DMatrix<f64>, nu: &[f64], wells: &[usize], s_star_global: &[usize]) -> CliResult<Value> {
    let sub = DMatrix::from_fn(wells.len(), wells.len(), |a, b| omega[(wells[a], wells[b])]);
    let x = FiniteChain::auxiliary(sub)?;
    let local = |g: usize| wells.iter().position(|&w| w == g).expect("deepest well in component");
    let s_star: Vec<usize> = s_star_global.iter().map(|&g| local(g)).collect();
    let nu_s: Vec<f64> = s_star_global.iter().map(|&g| nu[g]).collect();
    let nu_star: f64 = nu_s.iter().sum();

    let mut capacities = Vec::new();
    for &i in &s_star {
        let rest: Vec<usize> = s_star.iter().copied().filter(|&q| q != i).collect();
        capacities.push(json!({
            "a": [wells[i]],
            "b": rest.iter().map(|&q| wells[q]).collect::<Vec<_>>(),
            "value": jf(x.capacity(&[i], &rest)?),
        }));
    }
    let beta = x.beta_matrix(&s_star)?;
    let y = FiniteChain::limiting(&beta, &nu_s)?;
    let oracle = x.trace_oracle(&s_star)?;
    let oracle_residual = (&beta.values - &oracle).amax();

    let m = x.measure();
    let k = x.len();
    let mut balance: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            balance = balance.max((m[i] * x.rate(i, j) - m[j] * x.rate(j, i)).abs());
        }
    }

    let n = s_star.len();
    let mut identity: f64 = 0.0;
    let mut second: f64 = 0.0;
    for a in 0..n {
        let ua: Vec<f64> = (0..n).map(|q| if q == a { 1.0 } else { 0.0 }).collect();
        let ext_a = x.harmonic_extension(&s_star, &ua)?.values;
        for b in 0..n {
            let ub: Vec<f64> = (0..n).map(|q| if q == b { 1.0 } else { 0.0 }).collect();
            let ext_b = x.harmonic_extension(&s_star, &ub)?.values;
            let lhs = x.dirichlet_form(&ext_a, &ext_b);
            let rhs = nu_star * limiting_dirichlet_form(&y, &DVector::from_vec(ua.clone()), &DVector::from_vec(ub.clone()));
            identity = identity.max((lhs - rhs).abs());
            let mut other = DVector::from_fn(k, |i, _| 0.25 + 0.5 * (i as f64).sin());
            for (q, &s) in s_star.iter().enumerate() {
                other[s] = ub[q];
            }
            second = second.max((x.dirichlet_form(&ext_a, &other) - lhs).abs());
        }
    }

    Ok(json!({
        "wells": wells,
        "s_star": s_star_global,
        "omega": jmat(x.weights()),
        "m": jdvec(m),
        "rates_x": jmat(&x.rates()),
        "capacities": capacities,
        "beta": jmat(&beta.values),
        "nu": nu_s.iter().map(|&v| jf(v)).collect::<Vec<_>>(),
        "nu_star": jf(nu_star),
        "rates_y": jmat(&y.rates()),
        "trace_oracle": jmat(&oracle),
        "residuals": {
            "beta_vs_trace_oracle": jf(oracle_residual),
            "detailed_balance": jf(balance),
            "harmonic_extension_identity": jf(identity),
            "extension_independence": jf(second),
        },
    }))
}

pub fn artifact(landscape_bytes: &[u8]) -> CliResult<Artifact> {
    let land: Value = serde_json::from_slice(landscape_bytes).map_err(|e| stale(format!("landscape.json is not valid JSON: {e}")))?;
    let omega = as_matrix(&land["omega"])?;
    let nu: Vec<f64> = land["wells"]
        .as_array()
        .ok_or_else(|| stale("landscape.json: wells missing"))?
        .iter()
        .map(|w| w["nu"].as_f64().ok_or_else(|| stale("landscape.json: well without nu")))
        .collect::<CliResult<_>>()?;
    let comps = land["components"].as_array().ok_or_else(|| stale("landscape.json: components missing"))?;
    let mut out = Vec::new();
    let mut notices = Vec::new();
    for c in comps {
        let wells = as_usizes(&c["wells"], "components.wells")?;
        let s_star = as_usizes(&c["s_star"], "components.s_star")?;
        if s_star.len() < 2 {
            notices.push(format!("component {wells:?} has one deepest well: the Markov chain description is trivial"));
            continue;
        }
        out.push(component_json(&omega, &nu, &wells, &s_star)?);
    }
    if out.is_empty() {
        return Err(Failure::Model(
            "no component has two or more deepest wells (|S_star| < 2): the Markov chain description is trivial".into(),
        ));
    }
    Ok(json_artifact(
        "chains.json",
        json!({
            "landscape_sha256": sha256_hex(landscape_bytes),
            "components": out,
            "notices": notices,
        }),
    ))
}
