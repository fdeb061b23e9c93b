mod analyze;
mod args;
mod chains;
mod failure;
mod output;
mod simulate;
mod verify;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Map, Value};

use crate::analyze::Model;
use crate::args::{Cli, Command, Flags};
use crate::failure::{CliResult, Failure};
use crate::output::{jf, json_bytes, sha256_hex, write_all, Artifact};

struct Timer {
    stages: Vec<(String, f64)>,
    last: Instant,
}

impl Timer {
    fn new() -> Self {
        Self {
            stages: Vec::new(),
            last: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.stages.push((stage.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }
}

fn read_json_map(path: &Path) -> Map<String, Value> {
    fs::read(path)
        .ok()
        .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
        .and_then(|v| v.as_object().cloned())
        .unwrap_or_default()
}

fn resolved_eps(flags: &Flags, model: &Model) -> CliResult<Vec<f64>> {
    let eps = flags.eps.clone().unwrap_or_else(|| model.spec.epsilons.clone());
    if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Failure::Other(anyhow::anyhow!("--eps values must be positive")));
    }
    Ok(eps)
}

fn parameters(flags: &Flags, model: &Model, eps: &[f64]) -> Value {
    json!({
        "eps": eps.iter().map(|&e| jf(e)).collect::<Vec<_>>(),
        "level_H": jf(model.spec.level_h),
        "traj": flags.traj,
        "seed": flags.seed.unwrap_or(model.spec.seed),
        "horizon": jf(flags.horizon),
        "J": jf(flags.j),
        "quadrature": flags.quadrature,
        "dt": flags.dt.map_or(Value::Null, jf),
        "max_steps": flags.max_steps,
    })
}

/// Writes the artifacts, then merges this run into manifest.json and timings.json.
fn finish(
    out: &Path,
    command: &str,
    spec: Value,
    params: Value,
    artifacts: Vec<Artifact>,
    mut timer: Timer,
) -> CliResult<()> {
    timer.lap("write");
    let files: Map<String, Value> = artifacts
        .iter()
        .map(|a| (a.name.clone(), Value::String(sha256_hex(&a.bytes))))
        .collect();
    let mut manifest = read_json_map(&out.join("manifest.json"));
    let spec_sha = spec["spec_sha256"].clone();
    let mut runs = manifest.get("runs").and_then(|r| r.as_object().cloned()).unwrap_or_default();
    runs.retain(|_, r| spec_sha.is_null() || r["spec"]["spec_sha256"].is_null() || r["spec"]["spec_sha256"] == spec_sha);
    runs.insert(
        command.to_string(),
        json!({
            "spec": spec,
            "parameters": params,
            "output_directory": out.display().to_string(),
            "files": files,
            "nondeterministic": ["timings.json"],
        }),
    );
    manifest.insert("tool".into(), json!("metastable"));
    manifest.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    manifest.insert("runs".into(), Value::Object(runs));

    let mut timings = read_json_map(&out.join("timings.json"));
    timings.insert(
        command.to_string(),
        Value::Object(timer.stages.iter().map(|(k, v)| (k.clone(), jf(*v))).collect()),
    );

    let mut all = artifacts;
    all.push(Artifact {
        name: "manifest.json".into(),
        bytes: json_bytes(Value::Object(manifest)),
    });
    all.push(Artifact {
        name: "timings.json".into(),
        bytes: json_bytes(Value::Object(timings)),
    });
    write_all(out, &all)?;
    Ok(())
}

fn spec_info(flags: &Flags, model: &Model) -> Value {
    json!({"path": flags.spec.display().to_string(), "spec_sha256": model.spec_sha})
}

fn read_artifact(out: &Path, name: &str) -> CliResult<Vec<u8>> {
    fs::read(out.join(name)).map_err(|e| {
        Failure::Artifact(format!(
            "{} is missing or unreadable ({e}); run the earlier stages first",
            out.join(name).display()
        ))
    })
}

fn sim_params(flags: &Flags, model: &Model, eps: Vec<f64>) -> CliResult<simulate::SimParams> {
    if flags.traj == 0 {
        return Err(Failure::Other(anyhow::anyhow!("--traj must be at least 1")));
    }
    if !(flags.horizon > 0.0 && flags.horizon.is_finite()) {
        return Err(Failure::Other(anyhow::anyhow!("--horizon must be positive")));
    }
    Ok(simulate::SimParams {
        eps,
        traj: flags.traj,
        seed: flags.seed.unwrap_or(model.spec.seed),
        horizon: flags.horizon,
        dt: flags.dt,
        max_steps: flags.max_steps,
    })
}

fn verify_params(flags: &Flags, eps: Vec<f64>) -> CliResult<verify::VerifyParams> {
    if !(flags.j > 0.0 && flags.j.is_finite()) {
        return Err(Failure::Other(anyhow::anyhow!("--J must be positive")));
    }
    Ok(verify::VerifyParams {
        eps,
        j: flags.j,
        quadrature: flags.quadrature,
    })
}

fn note(msgs: &[String]) {
    for m in msgs {
        eprintln!("notice: {m}");
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut timer = Timer::new();
    match cli.command {
        Command::Analyze(flags) => {
            let model = analyze::build(&flags.spec)?;
            let eps = resolved_eps(&flags, &model)?;
            note(&model.graph.notices);
            timer.lap("analyze");
            let art = analyze::artifact(&model, &eps);
            let params = parameters(&flags, &model, &eps);
            finish(&flags.out, "analyze", spec_info(&flags, &model), params, vec![art], timer)
        }
        Command::Chains(cf) => {
            let land = read_artifact(&cf.out, "landscape.json")?;
            let art = chains::artifact(&land)?;
            timer.lap("chains");
            let spec_sha = serde_json::from_slice::<Value>(&land).ok().map_or(Value::Null, |v| v["spec_sha256"].clone());
            finish(&cf.out, "chains", json!({"spec_sha256": spec_sha}), json!({}), vec![art], timer)
        }
        Command::Simulate(flags) => {
            let model = analyze::build(&flags.spec)?;
            let eps = resolved_eps(&flags, &model)?;
            let land = read_artifact(&flags.out, "landscape.json")?;
            let land_v: Value = serde_json::from_slice(&land)
                .map_err(|e| Failure::Artifact(format!("landscape.json is not valid JSON: {e}")))?;
            if land_v["spec_sha256"] != json!(model.spec_sha) {
                return Err(Failure::Artifact("landscape.json was produced from a different spec; rerun analyze".into()));
            }
            let ch = read_artifact(&flags.out, "chains.json")?;
            let ch_v: Value = serde_json::from_slice(&ch)
                .map_err(|e| Failure::Artifact(format!("chains.json is not valid JSON: {e}")))?;
            if ch_v["landscape_sha256"] != json!(sha256_hex(&land)) {
                return Err(Failure::Artifact("chains.json does not match landscape.json; rerun chains".into()));
            }
            timer.lap("load");
            let p = sim_params(&flags, &model, eps.clone())?;
            let (arts, notices) = simulate::run(&model, &p)?;
            note(&notices);
            timer.lap("simulate");
            let params = parameters(&flags, &model, &eps);
            finish(&flags.out, "simulate", spec_info(&flags, &model), params, arts, timer)
        }
        Command::Verify(flags) => {
            let model = analyze::build(&flags.spec)?;
            let eps = resolved_eps(&flags, &model)?;
            timer.lap("analyze");
            let (arts, failed) = verify::run(&model, &verify_params(&flags, eps.clone())?)?;
            timer.lap("verify");
            let params = parameters(&flags, &model, &eps);
            finish(&flags.out, "verify", spec_info(&flags, &model), params, arts, timer)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Verify(failed))
            }
        }
        Command::All(flags) => {
            let model = analyze::build(&flags.spec)?;
            let eps = resolved_eps(&flags, &model)?;
            note(&model.graph.notices);
            let sp = sim_params(&flags, &model, eps.clone())?;
            let vp = verify_params(&flags, eps.clone())?;
            let land = analyze::artifact(&model, &eps);
            timer.lap("analyze");
            let mut arts = Vec::new();
            match chains::artifact(&land.bytes) {
                Ok(a) => {
                    arts.push(a);
                    timer.lap("chains");
                    let (sim, notices) = simulate::run(&model, &sp)?;
                    note(&notices);
                    arts.extend(sim);
                    timer.lap("simulate");
                }
                Err(Failure::Model(msg)) => note(&[format!("{msg}; chains and simulate skipped")]),
                Err(e) => return Err(e),
            }
            arts.insert(0, land);
            let (ver, failed) = verify::run(&model, &vp)?;
            arts.extend(ver);
            timer.lap("verify");
            let params = parameters(&flags, &model, &eps);
            finish(&flags.out, "all", spec_info(&flags, &model), params, arts, timer)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Verify(failed))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
