//! Sparse multivariate polynomials with exact formal derivatives.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

/// Cached powers x_k^p for p up to a fixed degree.
#[derive(Debug, Clone)]
pub struct PowerTable {
    stride: usize,
    values: Vec<f64>,
}

impl PowerTable {
    pub fn new(dim: usize, max_power: u32) -> Self {
        let stride = max_power as usize + 1;
        Self {
            stride,
            values: vec![1.0; dim * stride],
        }
    }

    pub fn fill(&mut self, x: &[f64]) {
        for (k, &xk) in x.iter().enumerate() {
            let row = &mut self.values[k * self.stride..(k + 1) * self.stride];
            row[0] = 1.0;
            for p in 1..self.stride {
                row[p] = row[p - 1] * xk;
            }
        }
    }

    #[inline]
    fn get(&self, axis: usize, power: u32) -> f64 {
        self.values[axis * self.stride + power as usize]
    }
}

impl Polynomial {
    /// Builds a polynomial, merging repeated exponent vectors in order of first appearance.
    pub fn new(dim: usize, terms: &[Monomial]) -> Self {
        let mut merged: Vec<Monomial> = Vec::with_capacity(terms.len());
        for t in terms {
            debug_assert_eq!(t.powers.len(), dim);
            match merged.iter_mut().find(|m| m.powers == t.powers) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t.clone()),
            }
        }
        merged.retain(|m| m.coeff != 0.0);
        Self { dim, terms: merged }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn max_power(&self) -> u32 {
        self.terms
            .iter()
            .flat_map(|t| t.powers.iter().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.powers.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn derivative(&self, axis: usize) -> Polynomial {
        let terms: Vec<Monomial> = self
            .terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut powers = t.powers.clone();
                powers[axis] -= 1;
                Monomial {
                    coeff: t.coeff * f64::from(t.powers[axis]),
                    powers,
                }
            })
            .collect();
        Polynomial::new(self.dim, &terms)
    }

    #[inline]
    pub fn eval_with(&self, table: &PowerTable) -> f64 {
        let mut acc = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for (k, &p) in t.powers.iter().enumerate() {
                if p > 0 {
                    v *= table.get(k, p);
                }
            }
            acc += v;
        }
        acc
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut table = PowerTable::new(self.dim, self.max_power());
        table.fill(x);
        self.eval_with(&table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(coeff: f64, powers: &[u32]) -> Monomial {
        Monomial {
            coeff,
            powers: powers.to_vec(),
        }
    }

    #[test]
    fn double_well_values_and_derivatives() {
        let u = Polynomial::new(
            2,
            &[m(1.0, &[4, 0]), m(-2.0, &[2, 0]), m(1.0, &[0, 0]), m(1.0, &[0, 2])],
        );
        let x = [0.3, -0.7];
        let expect = (0.09f64 - 1.0).powi(2) + 0.49;
        assert!((u.eval(&x) - expect).abs() < 1e-15);
        let ux = u.derivative(0);
        assert!((ux.eval(&x) - (4.0 * 0.027 - 4.0 * 0.3)).abs() < 1e-15);
        let uyy = u.derivative(1).derivative(1);
        assert_eq!(uyy.terms(), &[m(2.0, &[0, 0])]);
    }

    #[test]
    fn repeated_terms_merge() {
        let p = Polynomial::new(1, &[m(1.0, &[2]), m(2.0, &[2]), m(-3.0, &[2])]);
        assert!(p.terms().is_empty());
        assert_eq!(p.eval(&[5.0]), 0.0);
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let p = Polynomial::new(2, &[m(7.0, &[0, 0])]);
        assert!(p.derivative(0).terms().is_empty());
        assert_eq!(p.total_degree(), 0);
    }
}
