//! Newton search for critical points and their spectral classification.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub newton_tol: f64,
    pub dedup_tol: f64,
    pub morse_tol: f64,
    pub level_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            dedup_tol: 1e-6,
            morse_tol: 1e-8,
            level_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Minimum,
    Index1Saddle,
    Other,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Minimum => "minimum",
            Kind::Index1Saddle => "index1_saddle",
            Kind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSpectrum {
    /// −(smallest Hessian eigenvalue).
    pub lambda1: f64,
    /// λ₂..λ_d, ascending.
    pub lambdas: Vec<f64>,
    /// Columns e₁..e_d.
    pub basis: DMatrix<f64>,
    /// −μ is the unique negative eigenvalue of ℍ+𝕃.
    pub mu: f64,
    /// The same eigenvalue computed from ℍ−𝕃ᵀ.
    pub mu_adjoint: f64,
    /// Unit null vector of ℍ−𝕃ᵀ+μI with v·e₁ > 0.
    pub v: DVector<f64>,
}

impl SaddleSpectrum {
    pub fn e1(&self) -> DVector<f64> {
        self.basis.column(0).into_owned()
    }

    pub fn v_dot_e1(&self) -> f64 {
        self.v.dot(&self.basis.column(0))
    }

    /// Reverses e₁ and v together.
    pub fn flip(&mut self) {
        self.basis.column_mut(0).neg_mut();
        self.v.neg_mut();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub hessian: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub kind: Kind,
    pub saddle: Option<SaddleSpectrum>,
}

impl CriticalPoint {
    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < 0.0).count()
    }

    pub fn hessian_det(&self) -> f64 {
        self.eigenvalues.iter().product()
    }
}

/// Ascending eigen-decomposition with each eigenvector's largest entry made positive.
pub fn sorted_symmetric_eigen(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(h.nrows(), h.nrows());
    for (c, &i) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        let lead = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if lead < 0.0 {
            col.neg_mut();
        }
        vecs.set_column(c, &col);
    }
    (values, vecs)
}

/// The unique eigenvalue of `m` with negative real part; it must be real.
fn unique_negative_eigenvalue(m: &DMatrix<f64>, label: &str) -> Result<f64> {
    let eig = m.complex_eigenvalues();
    let scale = m.amax().max(1.0);
    let negative: Vec<_> = eig.iter().filter(|z| z.re < 0.0).collect();
    if negative.len() != 1 {
        return Err(Error::Model(format!(
            "{label} has {} eigenvalues with negative real part, expected exactly one",
            negative.len()
        )));
    }
    let z = negative[0];
    if z.im.abs() > 1e-10 * scale {
        return Err(Error::Model(format!(
            "negative eigenvalue of {label} is complex ({} + {}i)",
            z.re, z.im
        )));
    }
    Ok(z.re)
}

/// λ's, e-basis, μ and v from the Hessian and the ℓ-Jacobian at an index-1 saddle.
pub fn saddle_spectrum(h: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<SaddleSpectrum> {
    let d = h.nrows();
    let (vals, basis) = sorted_symmetric_eigen(h);
    if vals.iter().filter(|&&v| v < 0.0).count() != 1 {
        return Err(Error::Model("Hessian is not of index one".into()));
    }
    let mu = -unique_negative_eigenvalue(&(h + l), "H+L")?;
    let adjoint = h - l.transpose();
    let mu_adjoint = -unique_negative_eigenvalue(&adjoint, "H-L^T")?;
    if (mu - mu_adjoint).abs() > 1e-8 * mu.abs().max(1.0) {
        return Err(Error::Model(format!(
            "H+L and H-L^T disagree on the negative eigenvalue ({mu} vs {mu_adjoint})"
        )));
    }
    let shifted = &adjoint + DMatrix::identity(d, d) * mu;
    let svd = shifted.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not return right singular vectors".into()))?;
    let mut v: DVector<f64> = v_t.row(d - 1).transpose().into_owned();
    v /= v.norm();
    let dot = v.dot(&basis.column(0));
    if dot.abs() <= 1e-8 {
        return Err(Error::Model(format!("v is orthogonal to e1 (v.e1 = {dot:e})")));
    }
    if dot < 0.0 {
        v.neg_mut();
    }
    Ok(SaddleSpectrum {
        lambda1: -vals[0],
        lambdas: vals[1..].to_vec(),
        basis,
        mu,
        mu_adjoint,
        v,
    })
}

/// Classifies a converged point; a Hessian eigenvalue inside (−morse_tol, morse_tol) is a model error.
pub fn classify(field: &dyn Field, x: &DVector<f64>, tol: &Tolerances) -> Result<CriticalPoint> {
    let xs = x.as_slice();
    let hessian = field.hessian(xs);
    let (eigenvalues, _) = sorted_symmetric_eigen(&hessian);
    if let Some(l) = eigenvalues.iter().find(|l| l.abs() < tol.morse_tol) {
        return Err(Error::Model(format!(
            "degenerate critical point at {:?}: Hessian eigenvalue {l:e} violates the Morse condition",
            xs
        )));
    }
    let jacobian = field.ell_jacobian(xs);
    let neg = eigenvalues.iter().filter(|&&l| l < 0.0).count();
    let kind = match neg {
        0 => Kind::Minimum,
        1 => Kind::Index1Saddle,
        _ => Kind::Other,
    };
    let saddle = match kind {
        Kind::Index1Saddle => Some(saddle_spectrum(&hessian, &jacobian).map_err(|e| match e {
            Error::Model(m) => Error::Model(format!("saddle at {xs:?}: {m}")),
            other => other,
        })?),
        _ => None,
    };
    Ok(CriticalPoint {
        location: x.clone(),
        value: field.potential(xs),
        gradient_norm: field.gradient(xs).norm(),
        hessian,
        jacobian,
        eigenvalues,
        kind,
        saddle,
    })
}

/// ω^σ = μ / (2π √(−det ℍ)).
pub fn ek_constant(cp: &CriticalPoint) -> Result<f64> {
    let det = cp.hessian_det();
    match (&cp.saddle, det < 0.0) {
        (Some(s), true) => Ok(s.mu / (2.0 * std::f64::consts::PI * (-det).sqrt())),
        _ => Err(Error::Model(format!(
            "Eyring-Kramers constant needs an index-1 saddle (det H = {det:e})"
        ))),
    }
}

fn newton(field: &dyn Field, seed: Vec<f64>, lo: &[f64], hi: &[f64], tol: f64) -> Option<DVector<f64>> {
    let mut x = DVector::from_vec(seed);
    for _ in 0..100 {
        let g = field.gradient(x.as_slice());
        if g.norm() < tol {
            return Some(x);
        }
        let step = field.hessian(x.as_slice()).lu().solve(&g)?;
        x -= step;
        let inside = x
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(v, (a, b))| v.is_finite() && *v >= *a && *v <= *b);
        if !inside {
            return None;
        }
    }
    None
}

/// Newton from a seeds_per_axis^d grid over the box, deduplicated and sorted by location.
pub fn find_critical_points(
    field: &dyn Field,
    lower: &[f64],
    upper: &[f64],
    seeds_per_axis: usize,
    tol: &Tolerances,
) -> Result<Vec<CriticalPoint>> {
    if seeds_per_axis < 2 {
        return Err(Error::Domain("seeds_per_axis must be at least 2".into()));
    }
    let d = lower.len();
    let span: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| b - a).collect();
    let lo: Vec<f64> = lower.iter().zip(&span).map(|(a, s)| a - s).collect();
    let hi: Vec<f64> = upper.iter().zip(&span).map(|(b, s)| b + s).collect();
    let n = seeds_per_axis.pow(d as u32);
    let converged: Vec<Option<DVector<f64>>> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let mut t = idx;
            let seed = (0..d)
                .map(|k| {
                    let i = t % seeds_per_axis;
                    t /= seeds_per_axis;
                    lower[k] + span[k] * i as f64 / (seeds_per_axis - 1) as f64
                })
                .collect();
            newton(field, seed, &lo, &hi, tol.newton_tol)
        })
        .collect();
    let mut found: Vec<DVector<f64>> = Vec::new();
    for x in converged.into_iter().flatten() {
        let inside = x
            .iter()
            .zip(lower.iter().zip(upper))
            .all(|(v, (a, b))| *v >= *a && *v <= *b);
        if inside && found.iter().all(|y| (y - &x).norm() >= tol.dedup_tol) {
            found.push(x);
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    found.iter().map(|x| classify(field, x, tol)).collect()
}
