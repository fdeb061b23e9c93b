use nalgebra::{DMatrix, DVector};

use super::{Profile, SaddleBox};
use crate::error::{Error, Result};
use crate::field::{halton_points, Field};
use crate::landscape::{saddle_spectrum, CriticalPoint};
use crate::quadrature::{tensor_integrate, Rule};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub samples: usize,
    /// max |p − 1| on the outer e₁ face.
    pub plus_error: f64,
    /// max |p| on the outer −e₁ face.
    pub minus_error: f64,
    pub pass: bool,
}

fn face_points(bx: &SaddleBox, n: usize) -> Vec<Vec<f64>> {
    let d = bx.dim();
    if d == 1 {
        return vec![Vec::new(); n];
    }
    let lo: Vec<f64> = bx.half_widths[1..].iter().map(|a| -a).collect();
    let hi: Vec<f64> = bx.half_widths[1..].to_vec();
    halton_points(&lo, &hi, n)
}

/// p on the outer faces z₁ = ±(a₁ + η), `n` Halton points per face.
pub fn boundary_check(bx: &SaddleBox, profile: &dyn Profile, n: usize) -> Result<BoundaryReport> {
    let mut plus: f64 = 0.0;
    let mut minus: f64 = 0.0;
    for rest in face_points(bx, n) {
        let mut z = vec![bx.outer];
        z.extend(&rest);
        plus = plus.max((profile.value(&z)? - 1.0).abs());
        z[0] = -bx.outer;
        minus = minus.max(profile.value(&z)?.abs());
    }
    Ok(BoundaryReport {
        samples: 2 * n,
        plus_error: plus,
        minus_error: minus,
        pass: plus == 0.0 && minus == 0.0,
    })
}

/// Largest jump between the core formula and the slab formulas on z₁ = ±a₁.
pub fn continuity_check(bx: &SaddleBox, n: usize) -> f64 {
    let a = bx.half_widths[0];
    face_points(bx, n)
        .into_iter()
        .map(|rest| {
            let mut z = vec![a];
            z.extend(&rest);
            let plus = (bx.p_core(&z) - bx.p_plus(&z)).abs();
            z[0] = -a;
            let minus = (bx.p_core(&z) - bx.p_minus(&z)).abs();
            plus.max(minus)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewIdentity {
    /// |(v + 𝕃ℍ⁻¹v)·e₁ − (μ/λ₁)(v·e₁)|.
    pub identity_residual: f64,
    /// max |ℍ𝕃 + (ℍ𝕃)ᵀ|.
    pub skew_residual: f64,
}

/// Identity check on a raw (ℍ, 𝕃) pair.
pub fn skew_identity(h: &DMatrix<f64>, l: &DMatrix<f64>) -> Result<SkewIdentity> {
    let s = saddle_spectrum(h, l)?;
    let hinv_v = h
        .clone()
        .lu()
        .solve(&s.v)
        .ok_or_else(|| Error::Model("singular Hessian in the skew identity".into()))?;
    let e1 = s.e1();
    let lhs = (&s.v + l * hinv_v).dot(&e1);
    let rhs = s.mu / s.lambda1 * s.v.dot(&e1);
    let hl = h * l;
    Ok(SkewIdentity {
        identity_residual: (lhs - rhs).abs(),
        skew_residual: (&hl + hl.transpose()).amax(),
    })
}

pub fn skew_identity_check(cp: &CriticalPoint) -> Result<SkewIdentity> {
    skew_identity(&cp.hessian, &cp.jacobian)
}

/// Max distance between the sorted spectra of ℍ+𝕃 and ℍ−𝕃ᵀ.
pub fn spectrum_match(h: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    let sorted = |m: DMatrix<f64>| {
        let mut e: Vec<_> = m.complex_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        e
    };
    let a = sorted(h + l);
    let b = sorted(h - l.transpose());
    a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub eps: f64,
    /// θ_ε ∫_{B_ε} |𝓛*p| dμ_ε at the finer level.
    pub residual: f64,
    pub coarse: f64,
    pub panels: (usize, usize),
    pub agreement: f64,
    /// θ_ε ε ∫ |∇p|² dμ_ε over the two extension slabs, reported only.
    pub extension_energy: f64,
}

fn adjoint_applied(field: &dyn Field, bx: &SaddleBox, profile: &dyn Profile, x: &[f64], z: &[f64]) -> Result<f64> {
    let (p, gz, lap) = profile.derivatives(z)?;
    let grad = &bx.basis * DVector::from_column_slice(&gz);
    let g = field.gradient(x);
    let l = field.ell(x);
    let eps = bx.eps;
    Ok(eps * lap - g.dot(&grad) + l.dot(&grad) + p * field.ell_divergence(x) - p * g.dot(&l) / eps)
}

/// Normalized residual θ_ε ∫_{B_ε} |𝓛*_ε p| dμ_ε, with B_ε = C_ε ∩ {U < H + J²δ²}.
///
/// `z_shifted` is ∫ exp(−(U − h)/ε) over the whole domain, so that
/// θ_ε e^{−U/ε}/Z_ε = exp(−(U − H)/ε)/z_shifted.
pub fn residual_quadrature(
    field: &dyn Field,
    bx: &SaddleBox,
    profile: &dyn Profile,
    level: f64,
    z_shifted: f64,
    panels: usize,
    order: usize,
) -> Result<ResidualReport> {
    let rule = Rule::gauss_legendre(order);
    let lower: Vec<f64> = bx.half_widths.iter().map(|a| -a).collect();
    let upper = bx.half_widths.clone();
    let eps = bx.eps;
    let integrate = |n: usize| -> Result<f64> {
        let failure = std::sync::Mutex::new(None);
        let v = tensor_integrate(&lower, &upper, n, &rule, |z| {
            let x = bx.global(z);
            let u = field.potential(&x);
            if u >= bx.k_level {
                return 0.0;
            }
            match adjoint_applied(field, bx, profile, &x, z) {
                Ok(r) => r.abs() * (-(u - level) / eps).exp(),
                Err(e) => {
                    *failure.lock().expect("residual lock") = Some(e);
                    0.0
                }
            }
        });
        match failure.into_inner().expect("residual lock") {
            Some(e) => Err(e),
            None => Ok(v / z_shifted),
        }
    };
    let coarse = integrate(panels)?;
    let fine = integrate(2 * panels)?;

    let mut energy = 0.0;
    for sign in [1.0, -1.0] {
        let mut lo = lower.clone();
        let mut hi = upper.clone();
        let a = bx.half_widths[0];
        if sign > 0.0 {
            lo[0] = a;
            hi[0] = bx.outer;
        } else {
            lo[0] = -bx.outer;
            hi[0] = -a;
        }
        energy += tensor_integrate(&lo, &hi, panels, &rule, |z| {
            let mut zc = z.to_vec();
            zc[0] = zc[0].clamp(-bx.outer, bx.outer);
            let x = bx.global(&zc);
            let u = field.potential(&x);
            match profile.derivatives(&zc) {
                Ok((_, g, _)) => eps * g.iter().map(|v| v * v).sum::<f64>() * (-(u - level) / eps).exp(),
                Err(_) => 0.0,
            }
        });
    }
    Ok(ResidualReport {
        eps,
        residual: fine,
        coarse,
        panels: (panels, 2 * panels),
        agreement: (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE),
        extension_energy: energy / z_shifted,
    })
}

/// True when the enlarged box stays clear of every valley ball.
pub fn box_clears_valleys(bx: &SaddleBox, centers: &[Vec<f64>], r0: f64) -> bool {
    centers.iter().all(|c| {
        let z = bx.local(c);
        let dist2: f64 = z
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let w = if k == 0 { bx.outer } else { bx.half_widths[k] };
                (t.abs() - w).max(0.0).powi(2)
            })
            .sum();
        dist2.sqrt() > r0
    })
}
