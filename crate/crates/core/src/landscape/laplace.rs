//! Quadrature check of the Laplace asymptotics of Z_ε and μ_ε(V_i).

use std::f64::consts::PI;

use super::graph::LandscapeGraph;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::quadrature::{adaptive_integrate, ball_integrate, AdaptiveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceReport {
    pub eps: f64,
    /// ∫ exp(−(U − h)/ε) over the domain box.
    pub z_shifted: f64,
    /// Z_ε / [(2πε)^{d/2} e^{−h/ε} ν_⋆].
    pub z_ratio: f64,
    /// μ_ε(V_i) for every well.
    pub valley_mass: Vec<f64>,
    /// μ_ε(V_i) / (ν_i/ν_⋆) for i ∈ S_⋆, in S_⋆ order.
    pub valley_ratios: Vec<f64>,
    /// μ_ε(Δ) = 1 − μ_ε(V_⋆).
    pub delta_mass: f64,
    /// Largest Gibbs weight exp(−(U − h)/ε) found on the box boundary.
    pub boundary_weight: f64,
    pub z_trace: Vec<(usize, f64)>,
}

fn boundary_weight(field: &dyn Field, lower: &[f64], upper: &[f64], h: f64, eps: f64) -> f64 {
    let d = lower.len();
    let n: usize = 41;
    let mut worst: f64 = 0.0;
    for face in 0..d {
        for side in [lower[face], upper[face]] {
            let others = d - 1;
            for idx in 0..n.pow(others as u32) {
                let mut t = idx;
                let x: Vec<f64> = (0..d)
                    .map(|k| {
                        if k == face {
                            side
                        } else {
                            let i = t % n;
                            t /= n;
                            lower[k] + (upper[k] - lower[k]) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect();
                worst = worst.max((-(field.potential(&x) - h) / eps).exp());
            }
        }
    }
    worst
}

pub fn laplace_check(
    field: &dyn Field,
    graph: &LandscapeGraph,
    lower: &[f64],
    upper: &[f64],
    eps: f64,
    opts: &AdaptiveOptions,
) -> Result<LaplaceReport> {
    let d = lower.len();
    if d > 3 {
        return Err(Error::Domain(format!("Laplace quadrature supports d <= 3, got {d}")));
    }
    let h = graph.h_min;
    let weight = |x: &[f64]| (-(field.potential(x) - h) / eps).exp();
    let z = adaptive_integrate(lower, upper, opts, weight)?;
    let valley_mass = graph
        .wells
        .iter()
        .map(|w| {
            w.deepest
                .iter()
                .map(|&i| {
                    let c = graph.critical_points[i].location.as_slice();
                    ball_integrate(c, graph.r0, opts, weight).map(|r| r.value / z.value)
                })
                .sum::<Result<f64>>()
        })
        .collect::<Result<Vec<f64>>>()?;
    let valley_ratios = graph
        .s_star
        .iter()
        .map(|&i| valley_mass[i] / (graph.wells[i].nu / graph.nu_star))
        .collect();
    let delta_mass = 1.0 - graph.s_star.iter().map(|&i| valley_mass[i]).sum::<f64>();
    Ok(LaplaceReport {
        eps,
        z_shifted: z.value,
        z_ratio: z.value / ((2.0 * PI * eps).powf(d as f64 / 2.0) * graph.nu_star),
        valley_mass,
        valley_ratios,
        delta_mass,
        boundary_weight: boundary_weight(field, lower, upper, h, eps),
        z_trace: z.trace,
    })
}
