//! Composite Gauss–Legendre tensor quadrature with deterministic tile summation.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn gauss_legendre(order: usize) -> Self {
        let n = NonZeroUsize::new(order.max(2)).expect("order is positive");
        let gl = GaussLegendre::new(n);
        let mut pairs: Vec<(f64, f64)> = gl.nodes().copied().zip(gl.weights().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Integrates `f` over the box with `panels` subintervals per axis.
pub fn tensor_integrate<F>(lower: &[f64], upper: &[f64], panels: usize, rule: &Rule, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = lower.len();
    let width: Vec<f64> = lower
        .iter()
        .zip(upper)
        .map(|(a, b)| (b - a) / panels as f64)
        .collect();
    let tiles = panels.pow(d as u32);
    let q = rule.order();
    let per_tile = q.pow(d as u32);
    let sums: Vec<f64> = (0..tiles)
        .into_par_iter()
        .map(|tile| {
            let mut origin = vec![0.0; d];
            let mut t = tile;
            for k in 0..d {
                origin[k] = lower[k] + width[k] * (t % panels) as f64;
                t /= panels;
            }
            let mut x = vec![0.0; d];
            let mut acc = 0.0;
            for node in 0..per_tile {
                let mut n = node;
                let mut w = 1.0;
                for k in 0..d {
                    let i = n % q;
                    n /= q;
                    x[k] = origin[k] + 0.5 * width[k] * (rule.nodes[i] + 1.0);
                    w *= 0.5 * width[k] * rule.weights[i];
                }
                acc += w * f(&x);
            }
            acc
        })
        .collect();
    pairwise_sum(&sums)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub order: usize,
    pub start_panels: usize,
    pub rel_tol: f64,
    pub max_nodes: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            order: 10,
            start_panels: 8,
            rel_tol: 1e-8,
            max_nodes: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// (panels per axis, value) for every level evaluated.
    pub trace: Vec<(usize, f64)>,
}

/// Doubles the panel count until successive levels agree to `rel_tol`.
pub fn adaptive_integrate<F>(
    lower: &[f64],
    upper: &[f64],
    opts: &AdaptiveOptions,
    f: F,
) -> Result<Integral>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let rule = Rule::gauss_legendre(opts.order);
    let d = lower.len() as u32;
    let nodes = |p: usize| (p * opts.order).saturating_pow(d);
    let mut panels = opts.start_panels.max(1);
    let mut trace = vec![(panels, tensor_integrate(lower, upper, panels, &rule, &f))];
    loop {
        let next = panels * 2;
        if nodes(next) > opts.max_nodes {
            return Err(Error::Numeric(format!(
                "quadrature did not reach relative tolerance {:e}; refinement trace {:?}",
                opts.rel_tol, trace
            )));
        }
        let value = tensor_integrate(lower, upper, next, &rule, &f);
        let prev = trace.last().map(|t| t.1).unwrap_or(0.0);
        trace.push((next, value));
        panels = next;
        if (value - prev).abs() <= opts.rel_tol * value.abs() {
            return Ok(Integral { value, trace });
        }
    }
}

/// Integral of `f` over the closed ball, in polar or spherical coordinates for d = 2, 3.
pub fn ball_integrate<F>(center: &[f64], radius: f64, opts: &AdaptiveOptions, f: F) -> Result<Integral>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    match center.len() {
        1 => adaptive_integrate(&[center[0] - radius], &[center[0] + radius], opts, f),
        2 => adaptive_integrate(&[0.0, 0.0], &[radius, 2.0 * PI], opts, |p| {
            let (r, phi) = (p[0], p[1]);
            r * f(&[center[0] + r * phi.cos(), center[1] + r * phi.sin()])
        }),
        3 => adaptive_integrate(&[0.0, 0.0, 0.0], &[radius, PI, 2.0 * PI], opts, |p| {
            let (r, th, phi) = (p[0], p[1], p[2]);
            let s = th.sin();
            r * r * s
                * f(&[
                    center[0] + r * s * phi.cos(),
                    center[1] + r * s * phi.sin(),
                    center[2] + r * th.cos(),
                ])
        }),
        d => Err(Error::Domain(format!("ball quadrature supports d <= 3, got {d}"))),
    }
}
