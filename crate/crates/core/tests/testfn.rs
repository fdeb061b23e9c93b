use std::f64::consts::PI;

use metastable::landscape::{analyze, saddle_spectrum, LandscapeGraph};
use metastable::testfn::{
    boundary_check, box_clears_valleys, continuity_check, residual_quadrature, skew_identity,
    skew_identity_check, spectrum_match, ConstantProfile, QFunction, QRegion, SaddleBox,
};
use metastable::{Field, FieldEval, PotentialSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DOUBLE_WELL_C1: &str = include_str!("../../../fixtures/double_well_c1.toml");
const TRIPLE_WELL: &str = include_str!("../../../fixtures/triple_well.toml");

fn setup(text: &str, c: f64) -> (PotentialSpec, FieldEval, LandscapeGraph) {
    let spec = PotentialSpec::parse(text).unwrap().with_skew_scale(c);
    let field = FieldEval::new(&spec);
    let graph = analyze(&spec, &field).unwrap();
    (spec, field, graph)
}

/// ∫ exp(−f(t)/ε) dt on [a,b] by composite Simpson.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// ∫_{[-2,2]²} exp(−U/ε) for the separable double well.
fn double_well_z(eps: f64) -> f64 {
    let zx = simpson(-2.0, 2.0, 200_000, |x| (-(x * x - 1.0).powi(2) / eps).exp());
    let zy = simpson(-2.0, 2.0, 200_000, |y| (-y * y / eps).exp());
    zx * zy
}

#[test]
fn boundary_values_are_exact() {
    let (_, _, graph) = setup(DOUBLE_WELL_C1, 1.0);
    for eps in [0.1, 0.05, 0.025] {
        let bx = SaddleBox::new(&graph.gates[0].point, eps, 4.0, graph.level).unwrap();
        let report = boundary_check(&bx, &bx, 500).unwrap();
        assert_eq!(report.samples, 1000);
        assert!(report.pass, "{report:?}");
        let control = boundary_check(&bx, &ConstantProfile(0.5), 500).unwrap();
        assert!(!control.pass);
        assert!(continuity_check(&bx, 1000) < 1e-10);
    }
}

#[test]
fn p_stays_in_unit_interval() {
    let (_, _, graph) = setup(DOUBLE_WELL_C1, 2.0);
    let bx = SaddleBox::new(&graph.gates[0].point, 0.05, 4.0, graph.level).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..5000 {
        let z: Vec<f64> = (0..2)
            .map(|k| {
                let w = if k == 0 { bx.outer } else { bx.half_widths[k] };
                rng.random_range(-w..=w)
            })
            .collect();
        let p = bx.p_local(&z).unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
    assert!((bx.p_eval(bx.sigma.as_slice()).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn fixture_gates_satisfy_skew_identity() {
    for (text, c) in [(DOUBLE_WELL_C1, 0.0), (DOUBLE_WELL_C1, 1.0), (DOUBLE_WELL_C1, 2.0), (TRIPLE_WELL, 1.0)] {
        let (_, _, graph) = setup(text, c);
        for gate in &graph.gates {
            let r = skew_identity_check(&gate.point).unwrap();
            assert!(r.identity_residual < 1e-10 && r.skew_residual < 1e-10, "{r:?}");
            assert!(spectrum_match(&gate.point.hessian, &gate.point.jacobian) < 1e-10);
            assert!(gate.point.saddle.as_ref().unwrap().v_dot_e1() > 1e-8);
        }
    }
}

/// Symmetric index-1 ℍ with 𝕃 = ℍ⁻¹S for a random skew S, so ℍ𝕃 is skew.
fn synthetic_pair(rng: &mut ChaCha8Rng, d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let diag = DVector::from_fn(d, |k, _| {
        let m = rng.random_range(0.5..3.0);
        if k == 0 {
            -m
        } else {
            m
        }
    });
    let h = &q * DMatrix::from_diagonal(&diag) * q.transpose();
    let h = (&h + h.transpose()) * 0.5;
    let b = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let s = &b - b.transpose();
    let l = h.clone().try_inverse().unwrap() * s;
    (h, l)
}

#[test]
fn synthetic_pairs_satisfy_skew_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let (h, l) = synthetic_pair(&mut rng, 4);
        let r = skew_identity(&h, &l).unwrap();
        assert!(r.identity_residual < 1e-10 && r.skew_residual < 1e-10, "{r:?}");
        assert!(spectrum_match(&h, &l) < 1e-10);
        assert!(saddle_spectrum(&h, &l).unwrap().mu > 0.0);
    }
}

#[test]
fn singular_hessian_is_rejected() {
    let h = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]);
    let l = DMatrix::zeros(2, 2);
    assert!(skew_identity(&h, &l).is_err());
}

#[test]
fn q_function_plateaus_and_blend() {
    let (spec, field, graph) = setup(DOUBLE_WELL_C1, 1.0);
    let q = QFunction::new(&field, &graph, 0.05, 4.0).unwrap();
    let (i, j) = graph.gates[0].wells;
    let mut g = vec![0.0; 2];
    g[i] = 1.0;
    let center = q.eval(&g, &[0.0, 0.0]).unwrap();
    assert!((center.value - 0.5).abs() < 1e-15);
    assert_eq!(center.region, QRegion::Gate(0));
    for w in [i, j] {
        let m = graph.critical_points[graph.wells[w].deepest[0]].location.clone();
        let v = q.eval(&g, &[m[0] + 0.05, m[1] - 0.05]).unwrap();
        assert_eq!(v.value, g[w]);
        assert_eq!(v.region, QRegion::Plateau(w));
    }
    let g = [-0.7, 0.3];
    let c = [0.4, 0.4];
    let mut sup: f64 = 0.0;
    for x in metastable::field::halton_points(&spec.lower, &spec.upper, 600) {
        let v = q.eval(&g, &x).unwrap();
        assert!(v.value.abs() <= 0.7 + 1e-15);
        sup = sup.max(v.value.abs());
        assert_eq!(q.eval(&c, &x).unwrap().value, 0.4);
    }
    assert_eq!(sup, 0.7);
}

#[test]
fn q_function_rejects_overlapping_boxes() {
    let (_, field, graph) = setup(DOUBLE_WELL_C1, 1.0);
    let mut doubled = graph.clone();
    let mut twin = doubled.gates[0].clone();
    twin.point.location[1] += 0.01;
    doubled.gates.push(twin);
    assert!(QFunction::new(&field, &doubled, 0.05, 4.0).is_err());
}

/// Midpoint rule in global coordinates with the core formula for p.
fn residual_oracle(field: &FieldEval, bx: &SaddleBox, level: f64, z: f64, n: usize) -> f64 {
    let r = bx.half_widths.iter().map(|a| a * a).sum::<f64>().sqrt();
    let (lo, hi) = (bx.sigma.map(|s| s - r), bx.sigma.map(|s| s + r));
    let hx = (hi[0] - lo[0]) / n as f64;
    let hy = (hi[1] - lo[1]) / n as f64;
    let c = (bx.mu / bx.eps).sqrt();
    let eps = bx.eps;
    let mut acc = 0.0;
    for a in 0..n {
        for b in 0..n {
            let x = [lo[0] + (a as f64 + 0.5) * hx, lo[1] + (b as f64 + 0.5) * hy];
            let loc = bx.local(&x);
            if loc.iter().zip(&bx.half_widths).any(|(t, w)| t.abs() > *w) {
                continue;
            }
            let u = field.potential(&x);
            if u >= bx.k_level {
                continue;
            }
            let s = (DVector::from_column_slice(&x) - &bx.sigma).dot(&bx.v);
            let t = s * c;
            let phi = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
            let p = 0.5 * libm::erfc(-t / 2f64.sqrt());
            let grad = &bx.v * (phi * c);
            let lap = -t * phi * c * c * bx.v.norm_squared();
            let gu = field.gradient(&x);
            let l = field.ell(&x);
            let lstar = eps * lap - gu.dot(&grad) + l.dot(&grad) + p * field.ell_divergence(&x) - p * gu.dot(&l) / eps;
            acc += lstar.abs() * (-(u - level) / eps).exp();
        }
    }
    acc * hx * hy / z
}

#[test]
fn residual_decreases_and_matches_oracle() {
    let (_, field, graph) = setup(DOUBLE_WELL_C1, 1.0);
    let mut last = f64::INFINITY;
    for eps in [0.1, 0.05, 0.025] {
        let z = double_well_z(eps);
        let bx = SaddleBox::new(&graph.gates[0].point, eps, 2.0, graph.level).unwrap();
        assert!(box_clears_valleys(&bx, &[vec![-1.0, 0.0], vec![1.0, 0.0]], graph.r0) || eps == 0.1);
        let r = residual_quadrature(&field, &bx, &bx, graph.level, z, 16, 10).unwrap();
        assert!(r.agreement < 0.01, "{r:?}");
        let oracle = residual_oracle(&field, &bx, graph.level, z, 1200);
        assert!((r.residual - oracle).abs() < 0.01 * oracle, "eps {eps}: {} vs {oracle}", r.residual);
        assert!(r.residual < last, "eps {eps}: {} !< {last}", r.residual);
        last = r.residual;
    }
}
