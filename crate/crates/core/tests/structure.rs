use metastable::field::{check_structure, derivative_selfcheck, growth_warnings, halton_points};
use metastable::{Field, FieldEval, PotentialSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DOUBLE_WELL: &str = include_str!("../../../fixtures/double_well.toml");
const DOUBLE_WELL_C1: &str = include_str!("../../../fixtures/double_well_c1.toml");
const TRIPLE_WELL: &str = include_str!("../../../fixtures/triple_well.toml");

fn random_points(spec: &PotentialSpec, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            spec.lower
                .iter()
                .zip(&spec.upper)
                .map(|(a, b)| rng.random_range(*a..*b))
                .collect()
        })
        .collect()
}

struct Shifted<'a>(&'a FieldEval);

impl Field for Shifted<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn potential(&self, x: &[f64]) -> f64 {
        self.0.potential(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.0.gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.0.hessian(x)
    }
    fn ell(&self, x: &[f64]) -> DVector<f64> {
        let mut l = self.0.ell(x);
        l[0] += 1.0;
        l
    }
    fn ell_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        self.0.ell_jacobian(x)
    }
}

#[test]
fn double_well_ell_matches_hand_expansion() {
    let spec = PotentialSpec::parse(DOUBLE_WELL_C1).unwrap();
    let field = FieldEval::new(&spec);
    for x in random_points(&spec, 200, 3) {
        let l = field.ell(&x);
        let (a, b) = (x[0], x[1]);
        assert!((l[0] - 2.0 * b).abs() < 1e-12);
        assert!((l[1] - (-4.0 * a.powi(3) + 4.0 * a)).abs() < 1e-12);
    }
}

#[test]
fn skew_fixtures_are_orthogonal_and_divergence_free() {
    for text in [DOUBLE_WELL_C1, TRIPLE_WELL] {
        let spec = PotentialSpec::parse(text).unwrap();
        let field = FieldEval::new(&spec);
        let report = check_structure(&field, &random_points(&spec, 10_000, 5), 1e-10);
        assert!(report.pass, "{report:?}");
        let halton = check_structure(&field, &halton_points(&spec.lower, &spec.upper, 1000), 1e-10);
        assert!(halton.pass, "{halton:?}");
    }
}

#[test]
fn zero_field_is_exactly_zero() {
    let spec = PotentialSpec::parse(DOUBLE_WELL).unwrap();
    let field = FieldEval::new(&spec);
    let report = check_structure(&field, &random_points(&spec, 500, 1), 0.0);
    assert_eq!(report.max_orthogonality, 0.0);
    assert_eq!(report.max_divergence, 0.0);
}

#[test]
fn corrupted_ell_fails_orthogonality() {
    let spec = PotentialSpec::parse(DOUBLE_WELL_C1).unwrap();
    let field = FieldEval::new(&spec);
    let report = check_structure(&Shifted(&field), &[vec![0.3, -0.7]], 1e-10);
    assert!(!report.pass);
    let dx = 4.0 * 0.3f64.powi(3) - 4.0 * 0.3;
    assert!((report.max_orthogonality - dx.abs()).abs() < 1e-12);
}

#[test]
fn finite_differences_agree() {
    for text in [DOUBLE_WELL, DOUBLE_WELL_C1, TRIPLE_WELL] {
        let spec = PotentialSpec::parse(text).unwrap().with_skew_scale(2.0);
        let field = FieldEval::new(&spec);
        let mut pts = random_points(&spec, 50, 9);
        pts.push(vec![0.3, -0.7]);
        pts.push(vec![1.0, 0.0]);
        for x in pts {
            let r = derivative_selfcheck(&field, &x, None);
            assert!(r.max_error() < 1e-6, "{x:?}: {r:?}");
        }
    }
}

#[test]
fn gradient_vanishes_at_minimum() {
    let spec = PotentialSpec::parse(DOUBLE_WELL).unwrap();
    let field = FieldEval::new(&spec);
    assert_eq!(field.gradient(&[1.0, 0.0]).amax(), 0.0);
    let r = derivative_selfcheck(&field, &[1.0, 0.0], Some(1e-5));
    assert!(r.gradient_error < 1e-9);
}

#[test]
fn quadratic_hessian_is_exact() {
    let text = "dimension = 2\nlevel_H = 1.0\nepsilons = [0.1]\nr0 = 0.1\nseed = 1\n\
        [potential]\nterms = [{ coeff = 1.5, powers = [2, 0] }, { coeff = -0.5, powers = [1, 1] }, { coeff = 2.0, powers = [0, 2] }]\n\
        [ell]\nkind = \"zero\"\n[domain]\nlower = [-1.0, -1.0]\nupper = [1.0, 1.0]\n";
    let spec = PotentialSpec::parse(text).unwrap();
    let field = FieldEval::new(&spec);
    let r = derivative_selfcheck(&field, &[0.4, -0.2], None);
    assert!(r.hessian_error < 1e-10, "{r:?}");
    assert!(growth_warnings(&field, &spec.lower, &spec.upper).is_empty());
}

#[test]
fn decreasing_corner_is_warned() {
    let text = "dimension = 1\nlevel_H = 1.0\nepsilons = [0.1]\nr0 = 0.1\nseed = 1\n\
        [potential]\nterms = [{ coeff = 1.0, powers = [2] }, { coeff = -1.0, powers = [3] }]\n\
        [ell]\nkind = \"zero\"\n[domain]\nlower = [-2.0]\nupper = [2.0]\n";
    let spec = PotentialSpec::parse(text).unwrap();
    let field = FieldEval::new(&spec);
    assert_eq!(growth_warnings(&field, &spec.lower, &spec.upper).len(), 1);
}

#[test]
fn hessian_is_symmetric() {
    let spec = PotentialSpec::parse(TRIPLE_WELL).unwrap();
    let field = FieldEval::new(&spec);
    for x in random_points(&spec, 100, 4) {
        let h = field.hessian(&x);
        assert_eq!(h, h.transpose());
    }
}
