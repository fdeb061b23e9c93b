//! Evaluation of U, ∇U, ∇²U, ℓ = J(U)∇U and Dℓ, plus structural self-checks.

use nalgebra::{DMatrix, DVector};

use crate::poly::{Polynomial, PowerTable};
use crate::spec::{EllKind, PotentialSpec};

/// Read-only access to the potential and the non-reversible field.
pub trait Field: Sync {
    fn dim(&self) -> usize;
    fn potential(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
    fn ell(&self, x: &[f64]) -> DVector<f64>;
    fn ell_jacobian(&self, x: &[f64]) -> DMatrix<f64>;

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        self.gradient(x) + self.ell(x)
    }

    fn ell_divergence(&self, x: &[f64]) -> f64 {
        self.ell_jacobian(x).trace()
    }
}

#[derive(Debug, Clone)]
pub struct FieldEval {
    dim: usize,
    u: Polynomial,
    grad: Vec<Polynomial>,
    /// Upper triangle of the Hessian, row-major.
    hess: Vec<Polynomial>,
    /// J_k flattened row-major.
    skew: Vec<Vec<f64>>,
    max_power: u32,
}

/// Scratch buffers for allocation-free drift evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    table: PowerTable,
    grad: Vec<f64>,
    tmp: Vec<f64>,
}

impl FieldEval {
    pub fn new(spec: &PotentialSpec) -> Self {
        let skew = match spec.ell_kind {
            EllKind::Zero => Vec::new(),
            EllKind::SkewPoly => spec
                .skew
                .iter()
                .map(|m| m.iter().flatten().copied().collect())
                .collect(),
        };
        Self::from_parts(Polynomial::new(spec.dimension, &spec.terms), skew)
    }

    /// `skew` holds each J_k flattened row-major.
    pub fn from_parts(u: Polynomial, skew: Vec<Vec<f64>>) -> Self {
        let dim = u.dim();
        let grad: Vec<Polynomial> = (0..dim).map(|i| u.derivative(i)).collect();
        let mut hess = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                hess.push(grad[i].derivative(j));
            }
        }
        let max_power = u.max_power();
        Self {
            dim,
            u,
            grad,
            hess,
            skew,
            max_power,
        }
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.u
    }

    pub fn has_ell(&self) -> bool {
        self.skew.iter().any(|m| m.iter().any(|&v| v != 0.0))
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            table: PowerTable::new(self.dim, self.max_power),
            grad: vec![0.0; self.dim],
            tmp: vec![0.0; self.dim],
        }
    }

    /// Writes ∇U(x) + ℓ(x) into `out` without allocating.
    pub fn drift_into(&self, x: &[f64], ws: &mut Workspace, out: &mut [f64]) {
        ws.table.fill(x);
        for (g, p) in ws.grad.iter_mut().zip(&self.grad) {
            *g = p.eval_with(&ws.table);
        }
        out.copy_from_slice(&ws.grad);
        if self.skew.is_empty() {
            return;
        }
        let a = self.u.eval_with(&ws.table);
        let d = self.dim;
        ws.tmp.iter_mut().for_each(|v| *v = 0.0);
        for jk in self.skew.iter().rev() {
            for i in 0..d {
                let row = &jk[i * d..(i + 1) * d];
                let mut s = 0.0;
                for j in 0..d {
                    s += row[j] * ws.grad[j];
                }
                ws.tmp[i] = ws.tmp[i] * a + s;
            }
        }
        for i in 0..d {
            out[i] += ws.tmp[i];
        }
    }

    fn skew_at(&self, a: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.dim;
        let mut j = DMatrix::zeros(d, d);
        let mut jp = DMatrix::zeros(d, d);
        for jk in self.skew.iter().rev() {
            jp = jp * a + &j;
            j = j * a + DMatrix::from_row_slice(d, d, jk);
        }
        (j, jp)
    }

    /// J(a) and J'(a) for the polynomial skew map.
    pub fn skew_map(&self, a: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        self.skew_at(a)
    }
}

impl Field for FieldEval {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, x: &[f64]) -> f64 {
        self.u.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut table = PowerTable::new(self.dim, self.max_power);
        table.fill(x);
        DVector::from_iterator(self.dim, self.grad.iter().map(|p| p.eval_with(&table)))
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut table = PowerTable::new(self.dim, self.max_power);
        table.fill(x);
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        let mut idx = 0;
        for i in 0..d {
            for j in i..d {
                let v = self.hess[idx].eval_with(&table);
                h[(i, j)] = v;
                h[(j, i)] = v;
                idx += 1;
            }
        }
        h
    }

    fn ell(&self, x: &[f64]) -> DVector<f64> {
        if self.skew.is_empty() {
            return DVector::zeros(self.dim);
        }
        let (j, _) = self.skew_at(self.potential(x));
        j * self.gradient(x)
    }

    fn ell_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        if self.skew.is_empty() {
            return DMatrix::zeros(self.dim, self.dim);
        }
        let (j, jp) = self.skew_at(self.potential(x));
        let g = self.gradient(x);
        j * self.hessian(x) + jp * &g * g.transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub samples: usize,
    pub max_orthogonality: f64,
    pub max_divergence: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Max |∇U·ℓ| and |∇·ℓ| over the sample points.
pub fn check_structure(field: &dyn Field, points: &[Vec<f64>], tol: f64) -> StructureReport {
    let mut orth: f64 = 0.0;
    let mut div: f64 = 0.0;
    for x in points {
        orth = orth.max(field.gradient(x).dot(&field.ell(x)).abs());
        div = div.max(field.ell_divergence(x).abs());
    }
    StructureReport {
        samples: points.len(),
        max_orthogonality: orth,
        max_divergence: div,
        tol,
        pass: orth <= tol && div <= tol,
    }
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / f64::from(base);
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// First `n` Halton points (index ≥ 1) mapped into the box.
pub fn halton_points(lower: &[f64], upper: &[f64], n: usize) -> Vec<Vec<f64>> {
    assert!(lower.len() <= PRIMES.len(), "Halton sequence limited to 16 dimensions");
    (1..=n as u64)
        .map(|i| {
            lower
                .iter()
                .zip(upper)
                .zip(PRIMES)
                .map(|((&lo, &hi), p)| lo + (hi - lo) * radical_inverse(i, p))
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeReport {
    pub h: f64,
    pub gradient_error: f64,
    pub hessian_error: f64,
    pub jacobian_error: f64,
}

impl DerivativeReport {
    pub fn max_error(&self) -> f64 {
        self.gradient_error.max(self.hessian_error).max(self.jacobian_error)
    }
}

fn scaled_error(fd: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    (fd - exact).amax() / exact.amax().max(1.0)
}

/// Central differences: U → ∇U, ∇U → ∇²U, ℓ → Dℓ. `h` defaults to 1e−5·(1+|x|).
pub fn derivative_selfcheck(field: &dyn Field, x: &[f64], h: Option<f64>) -> DerivativeReport {
    let d = field.dim();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = h.unwrap_or(1e-5 * (1.0 + norm));
    let mut fd_grad = DMatrix::zeros(d, 1);
    let mut fd_hess = DMatrix::zeros(d, d);
    let mut fd_jac = DMatrix::zeros(d, d);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for k in 0..d {
        xp[k] = x[k] + h;
        xm[k] = x[k] - h;
        fd_grad[(k, 0)] = (field.potential(&xp) - field.potential(&xm)) / (2.0 * h);
        let dg = (field.gradient(&xp) - field.gradient(&xm)) / (2.0 * h);
        let dl = (field.ell(&xp) - field.ell(&xm)) / (2.0 * h);
        fd_hess.set_column(k, &dg);
        fd_jac.set_column(k, &dl);
        xp[k] = x[k];
        xm[k] = x[k];
    }
    let g = field.gradient(x);
    DerivativeReport {
        h,
        gradient_error: scaled_error(&fd_grad, &DMatrix::from_column_slice(d, 1, g.as_slice())),
        hessian_error: scaled_error(&fd_hess, &field.hessian(x)),
        jacobian_error: scaled_error(&fd_jac, &field.ell_jacobian(x)),
    }
}

/// Warns when U decreases along the ray from the box center to a corner.
pub fn growth_warnings(field: &dyn Field, lower: &[f64], upper: &[f64]) -> Vec<String> {
    let d = lower.len();
    let center: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut out = Vec::new();
    for mask in 0..(1usize << d) {
        let corner: Vec<f64> = (0..d)
            .map(|k| if mask >> k & 1 == 1 { upper[k] } else { lower[k] })
            .collect();
        let at = |t: f64| -> Vec<f64> {
            center
                .iter()
                .zip(&corner)
                .map(|(c, q)| c + t * (q - c))
                .collect()
        };
        let inner = field.potential(&at(0.75));
        let outer = field.potential(&corner);
        if outer < inner {
            out.push(format!(
                "U decreases toward corner {corner:?} ({inner:.6e} -> {outer:.6e})"
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    fn m(coeff: f64, powers: &[u32]) -> Monomial {
        Monomial {
            coeff,
            powers: powers.to_vec(),
        }
    }

    fn double_well(c: f64) -> FieldEval {
        let u = Polynomial::new(
            2,
            &[m(1.0, &[4, 0]), m(-2.0, &[2, 0]), m(1.0, &[0, 0]), m(1.0, &[0, 2])],
        );
        FieldEval::from_parts(u, vec![vec![0.0, c, -c, 0.0]])
    }

    #[test]
    fn ell_matches_hand_expansion() {
        let f = double_well(1.0);
        for x in [[0.3, -0.7], [1.2, 0.4], [-0.5, 1.5]] {
            let l = f.ell(&x);
            assert!((l[0] - 2.0 * x[1]).abs() < 1e-14);
            assert!((l[1] - (-4.0 * x[0].powi(3) + 4.0 * x[0])).abs() < 1e-14);
        }
    }

    #[test]
    fn drift_into_matches_allocating_path() {
        let u = Polynomial::new(
            2,
            &[m(1.0, &[4, 0]), m(-2.0, &[2, 0]), m(0.5, &[1, 1]), m(1.0, &[0, 2])],
        );
        let f = FieldEval::from_parts(
            u,
            vec![vec![0.0, 0.7, -0.7, 0.0], vec![0.0, -0.3, 0.3, 0.0]],
        );
        let mut ws = f.workspace();
        let mut out = [0.0; 2];
        let x = [0.4, -1.1];
        f.drift_into(&x, &mut ws, &mut out);
        let d = f.drift(&x);
        assert!((out[0] - d[0]).abs() < 1e-14 && (out[1] - d[1]).abs() < 1e-14);
    }

    #[test]
    fn jacobian_uses_chain_rule_for_nonconstant_skew() {
        let u = Polynomial::new(2, &[m(1.0, &[2, 0]), m(3.0, &[0, 2]), m(1.0, &[1, 1])]);
        let f = FieldEval::from_parts(u, vec![vec![0.0, 1.0, -1.0, 0.0], vec![0.0, 2.0, -2.0, 0.0]]);
        let rep = derivative_selfcheck(&f, &[0.3, -0.7], None);
        assert!(rep.max_error() < 1e-6, "{rep:?}");
    }

    #[test]
    fn zero_field_structure_exact() {
        let f = double_well(0.0);
        let pts = halton_points(&[-2.0, -2.0], &[2.0, 2.0], 500);
        let rep = check_structure(&f, &pts, 1e-12);
        assert_eq!(rep.max_orthogonality, 0.0);
        assert_eq!(rep.max_divergence, 0.0);
    }

    #[test]
    fn halton_points_stay_in_box() {
        let pts = halton_points(&[-1.0, 2.0], &[1.0, 3.0], 100);
        assert!(pts.iter().all(|p| (-1.0..1.0).contains(&p[0]) && (2.0..3.0).contains(&p[1])));
    }

    #[test]
    fn growth_warning_for_inverted_bowl() {
        let u = Polynomial::new(2, &[m(-1.0, &[2, 0]), m(1.0, &[0, 2])]);
        let f = FieldEval::from_parts(u, Vec::new());
        assert_eq!(growth_warnings(&f, &[-1.0, -1.0], &[1.0, 1.0]).len(), 0);
        let u = Polynomial::new(2, &[m(-1.0, &[2, 0]), m(-1.0, &[0, 2])]);
        let f = FieldEval::from_parts(u, Vec::new());
        assert_eq!(growth_warnings(&f, &[-1.0, -1.0], &[1.0, 1.0]).len(), 4);
    }
}
