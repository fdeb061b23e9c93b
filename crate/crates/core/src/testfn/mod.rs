//! Saddle boxes, the committor-like profile p_ε^σ and the global test function Q_ε^g.

mod checks;
mod global;

pub use checks::{
    box_clears_valleys, boundary_check, continuity_check, residual_quadrature, skew_identity, skew_identity_check,
    spectrum_match, BoundaryReport, ResidualReport, SkewIdentity,
};
pub use global::{QFunction, QRegion, QValue};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::landscape::CriticalPoint;

pub const DEFAULT_J: f64 = 4.0;

/// Region of the enlarged box Ĉ_ε in e-basis coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxRegion {
    Core,
    /// Slab a₁ < z₁ ≤ a₁ + η on the e₁ side.
    PlusExtension,
    /// Slab −a₁ − η ≤ z₁ < −a₁.
    MinusExtension,
    Outside,
}

/// Profile on a saddle box, in e-basis coordinates.
pub trait Profile: Sync {
    fn value(&self, z: &[f64]) -> Result<f64>;
    /// Value, gradient and Laplacian, one-sided on the extension slabs.
    fn derivatives(&self, z: &[f64]) -> Result<(f64, Vec<f64>, f64)>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleBox {
    pub sigma: DVector<f64>,
    /// Columns e₁..e_d.
    pub basis: DMatrix<f64>,
    /// λ₁, λ₂, … (all positive).
    pub lambdas: Vec<f64>,
    pub mu: f64,
    pub v: DVector<f64>,
    /// v·e_k.
    pub w: Vec<f64>,
    pub eps: f64,
    pub delta: f64,
    pub eta: f64,
    pub j_mult: f64,
    /// Jδ/√λ₁ along e₁ and 2Jδ/√λ_k along e_k.
    pub half_widths: Vec<f64>,
    /// a₁ + η.
    pub outer: f64,
    /// H + J²δ².
    pub k_level: f64,
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl SaddleBox {
    /// `cp` must be an oriented index-1 saddle; 0 < ε < 1.
    pub fn new(cp: &CriticalPoint, eps: f64, j_mult: f64, level: f64) -> Result<Self> {
        let s = cp
            .saddle
            .as_ref()
            .ok_or_else(|| Error::Model("saddle box needs an index-1 saddle".into()))?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("saddle box needs 0 < eps < 1, got {eps}")));
        }
        if !(j_mult > 0.0 && j_mult.is_finite()) {
            return Err(Error::Domain("J must be positive".into()));
        }
        let delta = (eps * (1.0 / eps).ln()).sqrt();
        let eta = eps * eps;
        let mut lambdas = vec![s.lambda1];
        lambdas.extend(&s.lambdas);
        let half_widths: Vec<f64> = lambdas
            .iter()
            .enumerate()
            .map(|(k, l)| if k == 0 { 1.0 } else { 2.0 } * j_mult * delta / l.sqrt())
            .collect();
        let w = (0..lambdas.len()).map(|k| s.v.dot(&s.basis.column(k))).collect();
        Ok(Self {
            sigma: cp.location.clone(),
            basis: s.basis.clone(),
            lambdas,
            mu: s.mu,
            v: s.v.clone(),
            w,
            eps,
            delta,
            eta,
            j_mult,
            outer: half_widths[0] + eta,
            half_widths,
            k_level: level + j_mult * j_mult * delta * delta,
        })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn local(&self, x: &[f64]) -> Vec<f64> {
        let dx = DVector::from_column_slice(x) - &self.sigma;
        (self.basis.transpose() * dx).as_slice().to_vec()
    }

    pub fn global(&self, z: &[f64]) -> Vec<f64> {
        (&self.sigma + &self.basis * DVector::from_column_slice(z)).as_slice().to_vec()
    }

    pub fn region(&self, z: &[f64]) -> BoxRegion {
        if (1..z.len()).any(|k| z[k].abs() > self.half_widths[k]) {
            return BoxRegion::Outside;
        }
        let a = self.half_widths[0];
        match z[0] {
            t if t.abs() <= a => BoxRegion::Core,
            t if t > a && t <= self.outer => BoxRegion::PlusExtension,
            t if t < -a && t >= -self.outer => BoxRegion::MinusExtension,
            _ => BoxRegion::Outside,
        }
    }

    /// Normalizer √(2πε/μ).
    pub fn normalizer(&self) -> f64 {
        (2.0 * std::f64::consts::PI * self.eps / self.mu).sqrt()
    }

    fn slope(&self) -> f64 {
        (self.mu / self.eps).sqrt()
    }

    /// t = ((x−σ)·v)·√(μ/ε) with z₁ replaced by `z1`.
    fn t_at(&self, z: &[f64], z1: f64) -> f64 {
        let s: f64 = z1 * self.w[0] + (1..z.len()).map(|k| z[k] * self.w[k]).sum::<f64>();
        s * self.slope()
    }

    /// Gaussian profile Φ(((x−σ)·v)√(μ/ε)).
    pub fn p_core(&self, z: &[f64]) -> f64 {
        std_normal_cdf(self.t_at(z, z[0]))
    }

    /// Blend toward 1 on the e₁ side.
    pub fn p_plus(&self, z: &[f64]) -> f64 {
        let bar = std_normal_cdf(self.t_at(z, self.half_widths[0]));
        1.0 + (z[0] - self.outer) / self.eta * (1.0 - bar)
    }

    /// Blend toward 0 on the −e₁ side.
    pub fn p_minus(&self, z: &[f64]) -> f64 {
        let bar = std_normal_cdf(self.t_at(z, -self.half_widths[0]));
        (z[0] + self.outer) / self.eta * bar
    }

    pub fn p_local(&self, z: &[f64]) -> Result<f64> {
        match self.region(z) {
            BoxRegion::Core => Ok(self.p_core(z)),
            BoxRegion::PlusExtension => Ok(self.p_plus(z)),
            BoxRegion::MinusExtension => Ok(self.p_minus(z)),
            BoxRegion::Outside => Err(Error::Domain(format!("point {z:?} (e-basis) is outside the enlarged box"))),
        }
    }

    pub fn p_eval(&self, x: &[f64]) -> Result<f64> {
        self.p_local(&self.local(x))
    }
}

impl Profile for SaddleBox {
    fn value(&self, z: &[f64]) -> Result<f64> {
        self.p_local(z)
    }

    fn derivatives(&self, z: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        let d = z.len();
        let c = self.slope();
        let region = self.region(z);
        let a = self.half_widths[0];
        let (z1, scale) = match region {
            BoxRegion::Core => (z[0], 1.0),
            BoxRegion::PlusExtension => (a, -(z[0] - self.outer) / self.eta),
            BoxRegion::MinusExtension => (-a, (z[0] + self.outer) / self.eta),
            BoxRegion::Outside => {
                return Err(Error::Domain(format!("point {z:?} (e-basis) is outside the enlarged box")))
            }
        };
        let t = self.t_at(z, z1);
        let phi = std_normal_pdf(t);
        let mut grad: Vec<f64> = (0..d).map(|k| scale * phi * c * self.w[k]).collect();
        let first = if region == BoxRegion::Core { 0 } else { 1 };
        let lap: f64 = (first..d).map(|k| scale * (-t * phi) * c * c * self.w[k] * self.w[k]).sum();
        let value = match region {
            BoxRegion::Core => std_normal_cdf(t),
            BoxRegion::PlusExtension => {
                grad[0] = (1.0 - std_normal_cdf(t)) / self.eta;
                self.p_plus(z)
            }
            _ => {
                grad[0] = std_normal_cdf(t) / self.eta;
                self.p_minus(z)
            }
        };
        Ok((value, grad, lap))
    }
}

/// Constant profile, a negative control for the boundary checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantProfile(pub f64);

impl Profile for ConstantProfile {
    fn value(&self, _z: &[f64]) -> Result<f64> {
        Ok(self.0)
    }

    fn derivatives(&self, z: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
        Ok((self.0, vec![0.0; z.len()], 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn reversible_box(eps: f64) -> SaddleBox {
        let h = DMatrix::from_row_slice(2, 2, &[-4.0, 0.0, 0.0, 2.0]);
        let l = DMatrix::zeros(2, 2);
        let s = crate::landscape::saddle_spectrum(&h, &l).unwrap();
        let cp = CriticalPoint {
            location: DVector::zeros(2),
            value: 1.0,
            gradient_norm: 0.0,
            hessian: h,
            jacobian: l,
            eigenvalues: vec![-4.0, 2.0],
            kind: crate::landscape::Kind::Index1Saddle,
            saddle: Some(s),
        };
        SaddleBox::new(&cp, eps, 2.0, 1.0).unwrap()
    }

    #[test]
    fn center_is_one_half() {
        let b = reversible_box(0.05);
        assert_eq!(b.p_local(&[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn reversible_profile_along_e1() {
        let b = reversible_box(0.05);
        for s in [-0.2, -0.05, 0.01, 0.1] {
            let expect = std_normal_cdf(s * (4.0f64 / 0.05).sqrt());
            assert!((b.p_local(&[s, 0.3]).unwrap() - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn faces_are_exact() {
        let b = reversible_box(0.05);
        for y in [-0.5, 0.0, 0.2] {
            assert_eq!(b.p_local(&[b.outer, y]).unwrap(), 1.0);
            assert_eq!(b.p_local(&[-b.outer, y]).unwrap(), 0.0);
        }
        assert!(b.p_local(&[b.outer * 1.01, 0.0]).is_err());
    }

    #[test]
    fn one_sided_derivatives_match_differences() {
        let b = reversible_box(0.1);
        let a = b.half_widths[0];
        for z in [[0.05, 0.1], [a + 0.3 * b.eta, -0.2], [-a - 0.6 * b.eta, 0.4]] {
            let (_, grad, lap) = b.derivatives(&z).unwrap();
            let h = 1e-6 * b.eta;
            for k in 0..2 {
                let mut zp = z;
                let mut zm = z;
                zp[k] += h;
                zm[k] -= h;
                let fd = (b.p_local(&zp).unwrap() - b.p_local(&zm).unwrap()) / (2.0 * h);
                assert!((fd - grad[k]).abs() < 1e-5 * grad[k].abs().max(1.0), "{z:?} axis {k}");
            }
            let h = 1e-4;
            let mut fd_lap = 0.0;
            for k in 1..2 {
                let mut zp = z;
                let mut zm = z;
                zp[k] += h;
                zm[k] -= h;
                fd_lap += (b.p_local(&zp).unwrap() - 2.0 * b.p_local(&z).unwrap() + b.p_local(&zm).unwrap()) / (h * h);
            }
            if b.region(&z) != BoxRegion::Core {
                assert!((fd_lap - lap).abs() < 1e-4 * lap.abs().max(1.0), "{z:?}: {fd_lap} vs {lap}");
            }
        }
    }
}
