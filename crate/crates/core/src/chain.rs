//! Reversible finite-state chains: Dirichlet forms, capacities, β-coefficients and trace rates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain {
    weights: DMatrix<f64>,
    measure: DVector<f64>,
}

/// Solution of a Dirichlet problem; `isolated` states touch neither boundary set and are set to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub values: DVector<f64>,
    pub isolated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaMatrix {
    /// Indices of S_⋆ in the parent chain, ascending.
    pub states: Vec<usize>,
    pub values: DMatrix<f64>,
}

impl FiniteChain {
    pub fn new(weights: DMatrix<f64>, measure: DVector<f64>) -> Result<Self> {
        let k = weights.nrows();
        if weights.ncols() != k || measure.len() != k {
            return Err(Error::Model("weight matrix and measure sizes disagree".into()));
        }
        for i in 0..k {
            if weights[(i, i)] != 0.0 {
                return Err(Error::Model(format!("weight ({i},{i}) is not zero")));
            }
            for j in 0..k {
                let w = weights[(i, j)];
                if !(w >= 0.0 && w.is_finite()) || w != weights[(j, i)] {
                    return Err(Error::Model(format!(
                        "weights must be symmetric, finite and non-negative at ({i},{j})"
                    )));
                }
            }
            if !(measure[i] > 0.0) {
                return Err(Error::Model(format!("holding measure of state {i} is not positive")));
            }
        }
        Ok(Self { weights, measure })
    }

    /// The chain x: m(i) = ω_i / Σ_j ω_j and rates ω_{ij}/m(i).
    pub fn auxiliary(omega: DMatrix<f64>) -> Result<Self> {
        let rows: Vec<f64> = omega.row_iter().map(|r| r.sum()).collect();
        if let Some(i) = rows.iter().position(|&w| w == 0.0) {
            return Err(Error::Model(format!(
                "state {i} has no gate (omega_i = 0); the H-sublevel set is disconnected, analyze each component separately"
            )));
        }
        let total: f64 = rows.iter().sum();
        let measure = DVector::from_iterator(rows.len(), rows.iter().map(|w| w / total));
        Self::new(omega, measure)
    }

    /// The chain y: measure ν on S_⋆ and rates β_{ij}/ν_i.
    pub fn limiting(beta: &BetaMatrix, nu: &[f64]) -> Result<Self> {
        if nu.len() != beta.states.len() {
            return Err(Error::Model("nu and beta sizes disagree".into()));
        }
        Self::new(beta.values.clone(), DVector::from_column_slice(nu))
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn measure(&self) -> &DVector<f64> {
        &self.measure
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)] / self.measure[i]
    }

    pub fn rates(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.len(), |i, j| self.rate(i, j))
    }

    /// (Lg)(i) = Σ_j r(i,j)(g_j − g_i).
    pub fn generator_apply(&self, g: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.len(), |i, _| {
            (0..self.len()).map(|j| self.rate(i, j) * (g[j] - g[i])).sum()
        })
    }

    /// ½ Σ_{i,j} w_{ij} (f_i − f_j)(g_i − g_j).
    pub fn dirichlet_form(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let k = self.len();
        let mut acc = 0.0;
        for i in 0..k {
            for j in 0..k {
                acc += self.weights[(i, j)] * (f[i] - f[j]) * (g[i] - g[j]);
            }
        }
        0.5 * acc
    }

    /// Σ_i measure(i) f_i (−Lg)(i).
    pub fn generator_form(&self, f: &DVector<f64>, g: &DVector<f64>) -> f64 {
        let lg = self.generator_apply(g);
        (0..self.len()).map(|i| -self.measure[i] * f[i] * lg[i]).sum()
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let k = self.len();
        let mut label = vec![usize::MAX; k];
        let mut out = Vec::new();
        for s in 0..k {
            if label[s] != usize::MAX {
                continue;
            }
            let mut comp = vec![s];
            label[s] = out.len();
            let mut head = 0;
            while head < comp.len() {
                let i = comp[head];
                head += 1;
                for j in 0..k {
                    if self.weights[(i, j)] > 0.0 && label[j] == usize::MAX {
                        label[j] = out.len();
                        comp.push(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Solves L h = 0 off `boundary` with h = `values` on `boundary`.
    fn dirichlet_solve(&self, boundary: &[usize], values: &[f64]) -> Result<Harmonic> {
        let k = self.len();
        let mut fixed = vec![None; k];
        for (&s, &v) in boundary.iter().zip(values) {
            fixed[s] = Some(v);
        }
        let mut reach = vec![false; k];
        let mut stack: Vec<usize> = boundary.to_vec();
        for &s in boundary {
            reach[s] = true;
        }
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if self.weights[(i, j)] > 0.0 && !reach[j] {
                    reach[j] = true;
                    if fixed[j].is_none() {
                        stack.push(j);
                    }
                }
            }
        }
        let interior: Vec<usize> = (0..k).filter(|&i| fixed[i].is_none() && reach[i]).collect();
        let isolated: Vec<usize> = (0..k).filter(|&i| fixed[i].is_none() && !reach[i]).collect();
        let mut h = DVector::from_fn(k, |i, _| fixed[i].unwrap_or(0.0));
        if !interior.is_empty() {
            let n = interior.len();
            let mut a = DMatrix::zeros(n, n);
            let mut rhs = DVector::zeros(n);
            for (r, &i) in interior.iter().enumerate() {
                for j in 0..k {
                    let w = self.weights[(i, j)];
                    if w == 0.0 {
                        continue;
                    }
                    a[(r, r)] += w;
                    match fixed[j] {
                        Some(v) => rhs[r] += w * v,
                        None => {
                            if let Some(c) = interior.iter().position(|&q| q == j) {
                                a[(r, c)] -= w;
                            }
                        }
                    }
                }
            }
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Numeric("singular Dirichlet system".into()))?;
            for (r, &i) in interior.iter().enumerate() {
                h[i] = sol[r];
            }
        }
        Ok(Harmonic {
            values: h,
            isolated,
        })
    }

    fn check_sets(&self, a: &[usize], b: &[usize]) -> Result<()> {
        if let Some(&s) = a.iter().chain(b).find(|&&s| s >= self.len()) {
            return Err(Error::Domain(format!("state {s} out of range")));
        }
        if a.iter().any(|s| b.contains(s)) {
            return Err(Error::Domain("sets A and B must be disjoint".into()));
        }
        Ok(())
    }

    pub fn equilibrium_potential(&self, a: &[usize], b: &[usize]) -> Result<Harmonic> {
        self.check_sets(a, b)?;
        if a.is_empty() || b.is_empty() {
            return Err(Error::Domain("equilibrium potential needs nonempty A and B".into()));
        }
        let boundary: Vec<usize> = a.iter().chain(b).copied().collect();
        let values: Vec<f64> = a.iter().map(|_| 1.0).chain(b.iter().map(|_| 0.0)).collect();
        self.dirichlet_solve(&boundary, &values)
    }

    /// cap(A,B) = D(h_{A,B}, h_{A,B}); cap(A,∅) = cap(∅,B) = 0.
    pub fn capacity(&self, a: &[usize], b: &[usize]) -> Result<f64> {
        self.check_sets(a, b)?;
        if a.is_empty() || b.is_empty() {
            return Ok(0.0);
        }
        let h = self.equilibrium_potential(a, b)?;
        Ok(self.dirichlet_form(&h.values, &h.values))
    }

    pub fn harmonic_extension(&self, set: &[usize], u: &[f64]) -> Result<Harmonic> {
        if set.is_empty() || set.len() != u.len() {
            return Err(Error::Domain("harmonic extension needs values on a nonempty set".into()));
        }
        self.check_sets(set, &[])?;
        self.dirichlet_solve(set, u)
    }

    pub fn beta_matrix(&self, s_star: &[usize]) -> Result<BetaMatrix> {
        if s_star.len() < 2 {
            return Err(Error::Domain("beta needs at least two deepest wells".into()));
        }
        let mut states = s_star.to_vec();
        states.sort_unstable();
        let without = |drop: &[usize]| -> Vec<usize> {
            states.iter().copied().filter(|s| !drop.contains(s)).collect()
        };
        let single: Vec<f64> = states
            .iter()
            .map(|&i| self.capacity(&[i], &without(&[i])))
            .collect::<Result<_>>()?;
        let n = states.len();
        let mut values = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in (a + 1)..n {
                let (i, j) = (states[a], states[b]);
                let pair = self.capacity(&[i, j], &without(&[i, j]))?;
                let mut beta = 0.5 * (single[a] + single[b] - pair);
                let scale = single[a] + single[b] + pair;
                if beta < 0.0 && beta > -1e-12 * scale {
                    beta = 0.0;
                }
                if beta < 0.0 {
                    return Err(Error::Numeric(format!("negative beta {beta:e} for states ({i},{j})")));
                }
                values[(a, b)] = beta;
                values[(b, a)] = beta;
            }
        }
        Ok(BetaMatrix { states, values })
    }

    /// m(i)·r^tr(i,j) on S_⋆ from hitting probabilities of the embedded jump chain.
    pub fn trace_oracle(&self, s_star: &[usize]) -> Result<DMatrix<f64>> {
        let mut states = s_star.to_vec();
        states.sort_unstable();
        let k = self.len();
        let shallow: Vec<usize> = (0..k).filter(|i| !states.contains(i)).collect();
        let out_rate: Vec<f64> = (0..k).map(|i| (0..k).map(|j| self.rate(i, j)).sum()).collect();
        let jump = |i: usize, j: usize| self.rate(i, j) / out_rate[i];
        let n = shallow.len();
        let hit = if n == 0 {
            DMatrix::zeros(0, states.len())
        } else {
            let a = DMatrix::from_fn(n, n, |r, c| {
                let delta = if r == c { 1.0 } else { 0.0 };
                delta - jump(shallow[r], shallow[c])
            });
            let rhs = DMatrix::from_fn(n, states.len(), |r, c| jump(shallow[r], states[c]));
            a.lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Numeric("singular hitting-probability system".into()))?
        };
        let m = states.len();
        Ok(DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                return 0.0;
            }
            let (i, j) = (states[a], states[b]);
            let via: f64 = shallow
                .iter()
                .enumerate()
                .map(|(r, &q)| self.rate(i, q) * hit[(r, b)])
                .sum();
            self.measure[i] * (self.rate(i, j) + via)
        }))
    }
}

/// D_y(u,v) normalised by ν_⋆, the total holding measure of y.
pub fn limiting_dirichlet_form(y: &FiniteChain, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    y.generator_form(u, v) / y.measure().sum()
}
