use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::{Field, FieldEval, Workspace};
use crate::landscape::LandscapeGraph;

/// One Euler–Maruyama step: x − (∇U + ℓ)(x)·dt + √(2ε·dt)·noise.
pub fn em_step(field: &FieldEval, x: &[f64], eps: f64, dt: f64, noise: &[f64]) -> Result<Vec<f64>> {
    let mut ws = field.workspace();
    let mut drift = vec![0.0; x.len()];
    field.drift_into(x, &mut ws, &mut drift);
    let scale = (2.0 * eps * dt).sqrt();
    let out: Vec<f64> = (0..x.len())
        .map(|k| x[k] - drift[k] * dt + scale * noise[k])
        .collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Numeric(format!("non-finite state after step from {x:?}; dt = {dt} is too large")))
    }
}

/// 0.2 / λ_max over all critical points.
pub fn stability_dt(graph: &LandscapeGraph) -> f64 {
    0.2 / max_curvature(graph)
}

/// min(1e−3, 0.1 / λ_max).
pub fn default_dt(graph: &LandscapeGraph) -> f64 {
    (0.1 / max_curvature(graph)).min(1e-3)
}

fn max_curvature(graph: &LandscapeGraph) -> f64 {
    graph
        .critical_points
        .iter()
        .flat_map(|p| p.eigenvalues.iter().map(|l| l.abs()))
        .fold(f64::MIN_POSITIVE, f64::max)
}

pub(crate) struct Stepper<'a> {
    field: &'a FieldEval,
    ws: Workspace,
    drift: Vec<f64>,
    dt: f64,
    scale: f64,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(field: &'a FieldEval, eps: f64, dt: f64) -> Self {
        Self {
            field,
            ws: field.workspace(),
            drift: vec![0.0; field.dim()],
            dt,
            scale: (2.0 * eps * dt).sqrt(),
        }
    }

    /// Advances `x` in place; false if the new state is not finite.
    #[inline]
    pub(crate) fn step<R: Rng>(&mut self, x: &mut [f64], rng: &mut R) -> bool {
        self.field.drift_into(x, &mut self.ws, &mut self.drift);
        let mut ok = true;
        for (xk, dk) in x.iter_mut().zip(&self.drift) {
            let z: f64 = rng.sample(StandardNormal);
            *xk += -dk * self.dt + self.scale * z;
            ok &= xk.is_finite();
        }
        ok
    }
}

/// Point-in-ball membership for the valleys of every well.
#[derive(Debug, Clone)]
pub struct ValleySet {
    centers: Vec<Vec<f64>>,
    wells: Vec<usize>,
    r0_sq: f64,
}

impl ValleySet {
    pub fn new(graph: &LandscapeGraph) -> Self {
        let valleys = graph.valleys();
        Self {
            centers: valleys.iter().map(|v| v.center.clone()).collect(),
            wells: valleys.iter().map(|v| v.well).collect(),
            r0_sq: graph.r0 * graph.r0,
        }
    }

    /// Well whose closed r0-ball contains `x`.
    #[inline]
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        for (c, &w) in self.centers.iter().zip(&self.wells) {
            let mut d2 = 0.0;
            for (a, b) in c.iter().zip(x) {
                d2 += (a - b) * (a - b);
            }
            if d2 <= self.r0_sq {
                return Some(w);
            }
        }
        None
    }
}
