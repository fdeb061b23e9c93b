use std::fs;
use std::path::Path;

use metastable::field::growth_warnings;
use metastable::landscape::{self, CriticalPoint, LandscapeGraph};
use metastable::{FieldEval, PotentialSpec};
use serde_json::{json, Value};

use crate::failure::{CliResult, Failure};
use crate::output::{jdvec, jf, jmat, json_artifact, jvec, sha256_hex, Artifact};

pub struct Model {
    pub spec: PotentialSpec,
    pub spec_sha: String,
    pub field: FieldEval,
    pub graph: LandscapeGraph,
}

pub fn load_spec(path: &Path) -> CliResult<(PotentialSpec, String)> {
    let bytes = fs::read(path).map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Parse(format!("{} is not valid UTF-8", path.display())))?;
    let spec = PotentialSpec::parse(&text)?;
    Ok((spec, sha256_hex(&bytes)))
}

pub fn build(path: &Path) -> CliResult<Model> {
    let (spec, spec_sha) = load_spec(path)?;
    let field = FieldEval::new(&spec);
    let graph = landscape::analyze(&spec, &field)?;
    Ok(Model {
        spec,
        spec_sha,
        field,
        graph,
    })
}

fn point_json(index: usize, cp: &CriticalPoint) -> Value {
    let saddle = cp.saddle.as_ref().map_or(Value::Null, |s| {
        json!({
            "lambda1": jf(s.lambda1),
            "lambdas": jvec(&s.lambdas),
            "e1": jdvec(&s.e1()),
            "mu": jf(s.mu),
            "mu_adjoint": jf(s.mu_adjoint),
            "v": jdvec(&s.v),
            "v_dot_e1": jf(s.v_dot_e1()),
        })
    });
    json!({
        "index": index,
        "location": jdvec(&cp.location),
        "value": jf(cp.value),
        "gradient_norm": jf(cp.gradient_norm),
        "eigenvalues": jvec(&cp.eigenvalues),
        "kind": cp.kind.as_str(),
        "saddle": saddle,
    })
}

fn theta_json(graph: &LandscapeGraph, eps: &[f64]) -> Value {
    Value::Array(
        eps.iter()
            .map(|&e| {
                json!({
                    "eps": jf(e),
                    "log_theta": jf((graph.level - graph.h_min) / e),
                    "theta": jf(graph.theta(e)),
                })
            })
            .collect(),
    )
}

pub fn landscape_json(m: &Model, eps: &[f64]) -> Value {
    let g = &m.graph;
    let wells: Vec<Value> = g
        .wells
        .iter()
        .enumerate()
        .map(|(i, w)| {
            json!({
                "index": i,
                "minima": w.minima,
                "deepest": w.deepest,
                "minima_locations": w.minima.iter().map(|&k| jdvec(&g.critical_points[k].location)).collect::<Vec<_>>(),
                "h": jf(w.h),
                "nu": jf(w.nu),
                "omega_i": jf(g.omega_i(i)),
            })
        })
        .collect();
    let gates: Vec<Value> = g
        .gates
        .iter()
        .map(|gate| {
            let s = gate.point.saddle.as_ref().expect("gate saddles are classified");
            json!({
                "wells": [gate.wells.0, gate.wells.1],
                "saddle": gate.saddle,
                "location": jdvec(&gate.point.location),
                "value": jf(gate.point.value),
                "lambda1": jf(s.lambda1),
                "lambdas": jvec(&s.lambdas),
                "e1": jdvec(&s.e1()),
                "mu": jf(s.mu),
                "v": jdvec(&s.v),
                "omega": jf(gate.omega),
            })
        })
        .collect();
    let components: Vec<Value> = g
        .components()
        .iter()
        .map(|c| {
            let sub = g.restrict(c);
            json!({
                "wells": c,
                "s_star": sub.s_star.iter().map(|&k| c[k]).collect::<Vec<_>>(),
                "h_min": jf(sub.h_min),
                "nu_star": jf(sub.nu_star),
            })
        })
        .collect();
    json!({
        "spec_sha256": m.spec_sha,
        "dimension": m.spec.dimension,
        "level_H": jf(g.level),
        "r0": jf(g.r0),
        "critical_points": g.critical_points.iter().enumerate().map(|(i, cp)| point_json(i, cp)).collect::<Vec<_>>(),
        "wells": wells,
        "gates": gates,
        "internal_saddles": g.internal_saddles,
        "omega": jmat(&g.omega),
        "h_min": jf(g.h_min),
        "s_star": g.s_star,
        "nu_star": jf(g.nu_star),
        "theta": theta_json(g, eps),
        "components": components,
        "notices": g.notices,
        "growth": {
            "corner_warnings": growth_warnings(&m.field, &m.spec.lower, &m.spec.upper),
            "gradient_laplacian_condition": "assumed",
        },
    })
}

pub fn artifact(m: &Model, eps: &[f64]) -> Artifact {
    json_artifact("landscape.json", landscape_json(m, eps))
}
