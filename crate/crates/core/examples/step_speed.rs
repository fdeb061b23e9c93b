use std::time::Instant;

use metastable::landscape::analyze;
use metastable::sim::{run_transition_ensemble, SimConfig, Start};
use metastable::{FieldEval, PotentialSpec};

fn main() {
    let spec = PotentialSpec::parse(include_str!("../../../fixtures/double_well.toml")).unwrap();
    let field = FieldEval::new(&spec);
    let graph = analyze(&spec, &field).unwrap();
    let cfg = SimConfig {
        eps: 0.15,
        dt: 1e-3,
        max_natural_time: 1e9,
        n_trajectories: 50,
        seed: 7,
        start: Start::Valley(0),
    };
    let t = Instant::now();
    let (hits, stats) = run_transition_ensemble(&field, &graph, &cfg).unwrap();
    let steps: f64 = hits.iter().map(|h| h.tau_natural / cfg.dt).sum();
    let secs = t.elapsed().as_secs_f64();
    println!("{stats:?}");
    println!("{:.1} ns/step over {steps:.3e} steps", secs * 1e9 / steps);
}
