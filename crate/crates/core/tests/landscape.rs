use std::f64::consts::PI;

use metastable::landscape::{
    analyze, build_landscape, ek_constant, find_critical_points, DescentField, DescentOptions, Kind,
    Tolerances,
};
use metastable::{FieldEval, PotentialSpec};

const DOUBLE_WELL: &str = include_str!("../../../fixtures/double_well.toml");
const TRIPLE_WELL: &str = include_str!("../../../fixtures/triple_well.toml");

fn double_well(c: f64) -> PotentialSpec {
    let text = DOUBLE_WELL.replace(
        "kind = \"zero\"",
        "kind = \"skew_poly\"\nJ = [[[0.0, 1.0], [-1.0, 0.0]]]",
    );
    PotentialSpec::parse(&text).unwrap().with_skew_scale(c)
}

#[test]
fn double_well_critical_points() {
    for c in [0.0, 1.0, 2.0] {
        let spec = double_well(c);
        let field = FieldEval::new(&spec);
        let pts = find_critical_points(&field, &spec.lower, &spec.upper, 9, &Tolerances::default()).unwrap();
        assert_eq!(pts.len(), 3);
        let expect = [(-1.0, Kind::Minimum), (0.0, Kind::Index1Saddle), (1.0, Kind::Minimum)];
        for (p, (x, kind)) in pts.iter().zip(expect) {
            assert!((p.location[0] - x).abs() < 1e-8 && p.location[1].abs() < 1e-8);
            assert_eq!(p.kind, kind);
        }
        assert!((pts[0].eigenvalues[0] - 2.0).abs() < 1e-10 && (pts[0].eigenvalues[1] - 8.0).abs() < 1e-10);
        assert!((pts[1].eigenvalues[0] + 4.0).abs() < 1e-10 && (pts[1].eigenvalues[1] - 2.0).abs() < 1e-10);
        let s = pts[1].saddle.as_ref().unwrap();
        let mu = 1.0 + (9.0 + 8.0 * c * c).sqrt();
        assert!((s.mu - mu).abs() < 1e-10, "c={c}: {}", s.mu);
        assert!((ek_constant(&pts[1]).unwrap() - mu / (2.0 * PI * 8f64.sqrt())).abs() < 1e-10);
    }
}

#[test]
fn reversible_saddle_has_v_equal_e1() {
    let spec = double_well(0.0);
    let graph = analyze(&spec, &FieldEval::new(&spec)).unwrap();
    let s = graph.gates[0].point.saddle.as_ref().unwrap();
    assert!((s.mu - s.lambda1).abs() < 1e-10);
    assert!((&s.v - s.e1()).amax() < 1e-10);
    assert!((graph.gates[0].omega - 1.0 / (PI * 2f64.sqrt())).abs() < 1e-10);
}

#[test]
fn skew_sign_leaves_omega_unchanged() {
    let plus = double_well(1.0);
    let minus = double_well(-1.0);
    let a = analyze(&plus, &FieldEval::new(&plus)).unwrap();
    let b = analyze(&minus, &FieldEval::new(&minus)).unwrap();
    assert!((a.gates[0].omega - b.gates[0].omega).abs() < 1e-12);
}

#[test]
fn double_well_graph() {
    let spec = double_well(1.0);
    let graph = analyze(&spec, &FieldEval::new(&spec)).unwrap();
    assert_eq!(graph.wells.len(), 2);
    assert_eq!(graph.gates.len(), 1);
    assert_eq!(graph.s_star, vec![0, 1]);
    for w in &graph.wells {
        assert_eq!(w.h, 0.0);
        assert!((w.nu - 0.25).abs() < 1e-12);
    }
    assert_eq!(graph.omega[(0, 1)], graph.omega[(1, 0)]);
    assert_eq!(graph.omega[(0, 1)], graph.gates[0].omega);
    let gate = &graph.gates[0];
    let s = gate.point.saddle.as_ref().unwrap();
    assert_eq!(gate.wells, (0, 1));
    assert!(s.e1()[0] < 0.0, "e1 must point toward the well at x = -1");
    assert!(s.v_dot_e1() > 0.0);
    assert!((graph.theta(0.1) - 10f64.exp()).abs() < 1e-6);
}

#[test]
fn below_saddle_level_disconnects() {
    let mut spec = double_well(0.0);
    spec.level_h = 0.5;
    let graph = analyze(&spec, &FieldEval::new(&spec)).unwrap();
    assert_eq!(graph.wells.len(), 2);
    assert!(graph.gates.is_empty());
    assert_eq!(graph.components().len(), 2);
    assert!(graph.notices.iter().any(|n| n.contains("disconnected")));
}

#[test]
fn quadratic_bowl() {
    let text = DOUBLE_WELL.replace(
        "terms = [\n  { coeff = 1.0, powers = [4, 0] },\n  { coeff = -2.0, powers = [2, 0] },\n  { coeff = 1.0, powers = [0, 0] },\n  { coeff = 1.0, powers = [0, 2] },\n]",
        "terms = [{ coeff = 1.0, powers = [2, 0] }, { coeff = 1.0, powers = [0, 2] }]",
    );
    let spec = PotentialSpec::parse(&text).unwrap();
    let pts = find_critical_points(&FieldEval::new(&spec), &spec.lower, &spec.upper, 5, &Tolerances::default()).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].kind, Kind::Minimum);
    assert!(pts[0].location.amax() < 1e-12);
    assert_eq!(pts[0].eigenvalues, vec![2.0, 2.0]);
}

#[test]
fn triple_well_structure() {
    let spec = PotentialSpec::parse(TRIPLE_WELL).unwrap();
    let graph = analyze(&spec, &FieldEval::new(&spec)).unwrap();
    let minima = graph.critical_points.iter().filter(|p| p.kind == Kind::Minimum).count();
    let saddles = graph.critical_points.iter().filter(|p| p.kind == Kind::Index1Saddle).count();
    assert_eq!((minima, saddles), (3, 2));
    assert_eq!(graph.wells.len(), 3);
    assert_eq!(graph.gates.len(), 2);
    assert_eq!(graph.omega[(0, 2)], 0.0);
    assert!(graph.omega[(0, 1)] > 0.0 && graph.omega[(1, 2)] > 0.0);
    assert_eq!(graph.s_star, vec![0, 2]);
    assert!((graph.h_min + 16.0).abs() < 1e-10);
}

#[test]
fn descent_field_does_not_change_gates() {
    for text in [TRIPLE_WELL.to_string(), double_well(2.0).to_toml().unwrap()] {
        let spec = PotentialSpec::parse(&text).unwrap();
        let field = FieldEval::new(&spec);
        let tol = Tolerances::default();
        let pts = find_critical_points(&field, &spec.lower, &spec.upper, 9, &tol).unwrap();
        let grad = build_landscape(&field, pts.clone(), spec.level_h, spec.r0, &DescentOptions::default(), &tol).unwrap();
        let full_opts = DescentOptions {
            field: DescentField::FullDrift,
            ..DescentOptions::default()
        };
        let full = build_landscape(&field, pts, spec.level_h, spec.r0, &full_opts, &tol).unwrap();
        let labels = |g: &metastable::landscape::LandscapeGraph| -> Vec<_> {
            g.gates.iter().map(|x| (x.wells, x.saddle)).collect()
        };
        assert_eq!(labels(&grad), labels(&full));
        assert_eq!(grad.wells, full.wells);
    }
}

#[test]
fn similarity_of_both_spectra_at_every_saddle() {
    let spec = PotentialSpec::parse(TRIPLE_WELL).unwrap();
    let graph = analyze(&spec, &FieldEval::new(&spec)).unwrap();
    for gate in &graph.gates {
        let s = gate.point.saddle.as_ref().unwrap();
        assert!((s.mu - s.mu_adjoint).abs() < 1e-10);
    }
}

#[test]
fn laplace_ratios_at_small_eps() {
    use metastable::landscape::laplace_check;
    use metastable::quadrature::AdaptiveOptions;
    let spec = double_well(1.0);
    let field = FieldEval::new(&spec);
    let graph = analyze(&spec, &field).unwrap();
    let r = laplace_check(&field, &graph, &spec.lower, &spec.upper, 0.02, &AdaptiveOptions::default()).unwrap();
    assert!((0.95..=1.05).contains(&r.z_ratio), "{r:?}");
    assert!((r.valley_mass[0] - r.valley_mass[1]).abs() < 1e-8);
    assert!(r.valley_ratios.iter().all(|v| (0.9..=1.1).contains(v)));
    assert!(r.delta_mass < 0.05 && r.delta_mass >= 0.0);
    assert!(r.boundary_weight < 1e-80);
}

#[test]
fn quadrature_failure_reports_trace() {
    use metastable::quadrature::{adaptive_integrate, AdaptiveOptions};
    let opts = AdaptiveOptions {
        max_nodes: 2_000,
        ..AdaptiveOptions::default()
    };
    let err = adaptive_integrate(&[-1.0, -1.0], &[1.0, 1.0], &opts, |x| if x[0] > 0.123 { 1.0 } else { 0.0 }).unwrap_err();
    assert!(matches!(err, metastable::Error::Numeric(_)));
}
