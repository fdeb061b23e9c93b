use metastable::landscape::{analyze, LandscapeGraph};
use metastable::sim::{
    default_dt, em_step, order_process, run_transition_ensemble, stability_dt, SimConfig, Start, TimeChange,
};
use metastable::{Field, FieldEval, PotentialSpec};

const DOUBLE_WELL: &str = include_str!("../../../fixtures/double_well.toml");
const DOUBLE_WELL_C1: &str = include_str!("../../../fixtures/double_well_c1.toml");

fn setup(text: &str) -> (FieldEval, LandscapeGraph) {
    let spec = PotentialSpec::parse(text).unwrap();
    let field = FieldEval::new(&spec);
    let graph = analyze(&spec, &field).unwrap();
    (field, graph)
}

fn config(eps: f64, n: usize, seed: u64) -> SimConfig {
    SimConfig {
        eps,
        dt: 1e-3,
        max_natural_time: 200.0,
        n_trajectories: n,
        seed,
        start: Start::Valley(0),
    }
}

#[test]
fn zero_noise_at_minimum_is_fixed() {
    let (field, _) = setup(DOUBLE_WELL_C1);
    for m in [[1.0, 0.0], [-1.0, 0.0]] {
        assert_eq!(em_step(&field, &m, 0.0, 1e-3, &[0.3, -1.2]).unwrap(), m.to_vec());
    }
}

#[test]
fn reversible_step_matches_formula() {
    let (field, _) = setup(DOUBLE_WELL);
    let (x, y) = (0.3, -0.4);
    let (eps, dt): (f64, f64) = (0.1, 1e-3);
    let noise = [0.7, -0.2];
    let s = (2.0 * eps * dt).sqrt();
    let expect = [
        x - (4.0 * x * x * x - 4.0 * x) * dt + s * noise[0],
        y - 2.0 * y * dt + s * noise[1],
    ];
    let got = em_step(&field, &[x, y], eps, dt, &noise).unwrap();
    assert!((got[0] - expect[0]).abs() < 1e-15 && (got[1] - expect[1]).abs() < 1e-15);
}

#[test]
fn drift_flow_decreases_energy() {
    let (field, _) = setup(DOUBLE_WELL_C1);
    let mut x = vec![0.5, 0.5];
    let mut u = field.potential(&x);
    let first = em_step(&field, &x, 0.0, 1e-3, &[0.0, 0.0]).unwrap();
    assert!(field.potential(&first) < u);
    for _ in 0..100_000 {
        if field.gradient(&x).norm() < 1e-6 {
            break;
        }
        x = em_step(&field, &x, 0.0, 1e-3, &[0.0, 0.0]).unwrap();
        let next = field.potential(&x);
        assert!(next < u);
        u = next;
    }
    assert!(field.gradient(&x).norm() < 1e-6);
}

#[test]
fn step_size_bounds() {
    let (_, graph) = setup(DOUBLE_WELL);
    assert!((stability_dt(&graph) - 0.025).abs() < 1e-12);
    assert_eq!(default_dt(&graph), 1e-3);
    let mut cfg = config(0.1, 1, 1);
    cfg.dt = 0.05;
    assert_eq!(cfg.validate(&graph).unwrap().len(), 1);
    cfg.dt = 0.0;
    assert!(cfg.validate(&graph).is_err());
}

#[test]
fn oversized_step_aborts() {
    let (field, graph) = setup(DOUBLE_WELL);
    let mut cfg = config(0.1, 2, 1);
    cfg.dt = 5.0;
    let (hits, stats) = run_transition_ensemble(&field, &graph, &cfg).unwrap();
    assert!(hits.iter().all(|h| h.aborted.is_some() && h.to.is_none()));
    assert_eq!(stats.aborted, 2);
}

#[test]
fn ensembles_are_deterministic_across_thread_counts() {
    let (field, graph) = setup(DOUBLE_WELL_C1);
    let cfg = config(0.3, 12, 99);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| run_transition_ensemble(&field, &graph, &cfg).unwrap());
    let b = wide.install(|| run_transition_ensemble(&field, &graph, &cfg).unwrap());
    assert_eq!(a.0, b.0);
    let la = serial.install(|| order_process(&field, &graph, &cfg, 2.0, true).unwrap());
    let lb = wide.install(|| order_process(&field, &graph, &cfg, 2.0, true).unwrap());
    assert_eq!(la, lb);
    let other = run_transition_ensemble(&field, &graph, &config(0.3, 12, 100)).unwrap();
    assert_ne!(a.0, other.0);
}

#[test]
fn ensemble_reaches_other_valley() {
    let (field, graph) = setup(DOUBLE_WELL);
    let (hits, stats) = run_transition_ensemble(&field, &graph, &config(0.3, 20, 5)).unwrap();
    assert_eq!(stats.completed, 20);
    assert!(stats.low_power && !stats.unreliable);
    let theta = graph.theta(0.3);
    for h in &hits {
        assert_eq!(h.to, Some(1 - h.from));
        assert!((h.tau_rescaled - h.tau_natural / theta).abs() < 1e-12 * h.tau_rescaled);
    }
}

#[test]
fn quiet_trajectory_keeps_its_state() {
    let (field, graph) = setup(DOUBLE_WELL);
    let eps = 0.01;
    let horizon = 50.0 / graph.theta(eps);
    let logs = order_process(&field, &graph, &config(eps, 3, 2), horizon, false).unwrap();
    for log in logs {
        assert_eq!(log.path.len(), 1);
        assert_eq!(log.path[0].state, 0);
        assert_eq!(log.path[0].duration, log.horizon);
        assert_eq!(log.delta_time, 0.0);
        assert!((log.horizon - horizon).abs() < 1e-3 * horizon);
    }
}

#[test]
fn time_change_is_consistent() {
    let (field, graph) = setup(DOUBLE_WELL_C1);
    let logs = order_process(&field, &graph, &config(0.25, 8, 3), 5.0, true).unwrap();
    for log in &logs {
        let total: f64 = log.path.iter().map(|h| h.duration).sum();
        assert!((total - log.trace_time).abs() < 1e-9 * log.horizon);
        assert!(log.trace_time <= log.horizon);
        assert!((log.trace_time + log.delta_time - log.horizon).abs() < 1e-9 * log.horizon);
        assert!(log.path.iter().all(|h| h.duration > 0.0));
        assert!(log.path.windows(2).all(|w| w[0].state != w[1].state));
        for v in log.visits.windows(2) {
            assert!(v[0].entry < v[0].exit && v[0].exit <= v[1].entry);
        }

        let occ = log.occupancy.as_ref().unwrap();
        let tc = TimeChange::new(occ.iter().map(|&(a, b, _)| (a, b)).collect());
        assert!((tc.total() - log.trace_time).abs() < 1e-9 * log.horizon);
        for k in 0..200 {
            let t = log.horizon * k as f64 / 200.0;
            assert!(tc.inverse(tc.occupation(t)) >= t - 1e-12);
            let s = log.trace_time * (k as f64 + 0.5) / 200.0;
            let natural = tc.inverse(s);
            let run = occ.iter().find(|r| r.0 <= natural && natural < r.1).unwrap();
            assert_eq!(log.state_at(s), Some(run.2), "trace time {s}");
        }
        assert_eq!(log.state_at(log.trace_time + 1e-9), None);
    }
}

#[test]
fn symmetric_wells_share_occupation() {
    let (field, graph) = setup(DOUBLE_WELL);
    let logs = order_process(&field, &graph, &config(0.3, 40, 11), 20.0, false).unwrap();
    let fractions: Vec<f64> = logs
        .iter()
        .map(|log| {
            let first: f64 = log.path.iter().filter(|h| h.state == 0).map(|h| h.duration).sum();
            first / log.trace_time
        })
        .collect();
    let n = fractions.len() as f64;
    let mean = fractions.iter().sum::<f64>() / n;
    let sd = (fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * sd / n.sqrt(), "{mean} ± {sd}");
}
