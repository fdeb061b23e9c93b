//! Wells, gates and Eyring–Kramers constants at a cut level H.

use nalgebra::{DMatrix, DVector};

use super::critical::{ek_constant, CriticalPoint, Kind, Tolerances};
use crate::error::{Error, Result};
use crate::field::Field;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentField {
    Gradient,
    FullDrift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub field: DescentField,
    pub offset: f64,
    pub max_steps: usize,
    pub step_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            field: DescentField::Gradient,
            offset: 1e-3,
            max_steps: 200_000,
            step_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Well {
    /// Indices into `LandscapeGraph::critical_points`.
    pub minima: Vec<usize>,
    /// Members attaining h_i; their r0-balls form the valley.
    pub deepest: Vec<usize>,
    pub h: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    /// i < j; e₁ points toward well i.
    pub wells: (usize, usize),
    pub saddle: usize,
    pub point: CriticalPoint,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Valley {
    pub well: usize,
    pub center: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGraph {
    pub level: f64,
    pub r0: f64,
    pub critical_points: Vec<CriticalPoint>,
    pub wells: Vec<Well>,
    pub gates: Vec<Gate>,
    /// Level-H saddles whose two descents reach the same well.
    pub internal_saddles: Vec<usize>,
    pub omega: DMatrix<f64>,
    pub h_min: f64,
    pub s_star: Vec<usize>,
    pub nu_star: f64,
    pub notices: Vec<String>,
}

fn rk4(field: &dyn Field, kind: DescentField, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let f = |y: &DVector<f64>| -> DVector<f64> {
        match kind {
            DescentField::Gradient => -field.gradient(y.as_slice()),
            DescentField::FullDrift => -field.drift(y.as_slice()),
        }
    };
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (0.5 * h)));
    let k3 = f(&(x + &k2 * (0.5 * h)));
    let k4 = f(&(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Adaptive RK4 (step doubling) until the path enters a dedup_tol ball around one of `minima`.
pub fn descend(
    field: &dyn Field,
    start: DVector<f64>,
    minima: &[DVector<f64>],
    opts: &DescentOptions,
    tol: &Tolerances,
) -> Result<usize> {
    let mut x = start;
    let mut h = 1e-2;
    for _ in 0..opts.max_steps {
        if let Some(i) = minima.iter().position(|m| (m - &x).norm() < tol.dedup_tol) {
            return Ok(i);
        }
        let full = rk4(field, opts.field, &x, h);
        let half = rk4(field, opts.field, &rk4(field, opts.field, &x, 0.5 * h), 0.5 * h);
        let err = (&full - &half).amax();
        if !err.is_finite() {
            if h <= 1e-8 {
                return Err(Error::Model("descent produced a non-finite state".into()));
            }
            h = (0.1 * h).max(1e-8);
            continue;
        }
        if err <= opts.step_tol {
            x = half;
            if field.gradient(x.as_slice()).norm() < tol.newton_tol {
                return Err(Error::Model(format!(
                    "descent stalled at {:?}, a critical point that is not a listed minimum",
                    x.as_slice()
                )));
            }
        }
        let factor = if err == 0.0 { 2.0 } else { 0.9 * (opts.step_tol / err).powf(0.2) };
        h = (h * factor.clamp(0.2, 2.0)).clamp(1e-8, 1.0);
    }
    Err(Error::Model(format!(
        "descent did not reach a minimum within {} steps",
        opts.max_steps
    )))
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let n = parent[c];
        parent[c] = r;
        c = n;
    }
    r
}

fn descend_both(
    field: &dyn Field,
    cp: &CriticalPoint,
    minima: &[DVector<f64>],
    opts: &DescentOptions,
    tol: &Tolerances,
) -> Result<(usize, usize)> {
    let e1 = cp.saddle.as_ref().map(|s| s.e1()).expect("index-1 saddle");
    let plus = descend(field, &cp.location + &e1 * opts.offset, minima, opts, tol)?;
    let minus = descend(field, &cp.location - &e1 * opts.offset, minima, opts, tol)?;
    Ok((plus, minus))
}

/// Wells of {U < H}, gates at level H and the derived constants.
pub fn build_landscape(
    field: &dyn Field,
    points: Vec<CriticalPoint>,
    level: f64,
    r0: f64,
    opts: &DescentOptions,
    tol: &Tolerances,
) -> Result<LandscapeGraph> {
    let mut notices = Vec::new();
    let min_idx: Vec<usize> = (0..points.len()).filter(|&i| points[i].kind == Kind::Minimum).collect();
    let minima: Vec<DVector<f64>> = min_idx.iter().map(|&i| points[i].location.clone()).collect();
    let below: Vec<bool> = min_idx.iter().map(|&i| points[i].value < level - tol.level_tol).collect();
    if !below.iter().any(|&b| b) {
        return Err(Error::Model(format!("no minimum lies below level H = {level}")));
    }
    for (k, &i) in min_idx.iter().enumerate() {
        if !below[k] && points[i].value < level + tol.level_tol {
            notices.push(format!("minimum {i} sits at level H and is not assigned to a well"));
        }
    }

    let mut parent: Vec<usize> = (0..min_idx.len()).collect();
    let mut level_saddles = Vec::new();
    for (i, cp) in points.iter().enumerate() {
        let at_level = (cp.value - level).abs() <= tol.level_tol;
        match cp.kind {
            Kind::Index1Saddle if at_level => level_saddles.push(i),
            Kind::Index1Saddle if cp.value < level => {
                let (a, b) = descend_both(field, cp, &minima, opts, tol)?;
                if below[a] && below[b] {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra] = rb;
                }
            }
            Kind::Other if at_level && cp.negative_count() < cp.eigenvalues.len() => {
                return Err(Error::Model(format!(
                    "critical point {i} at level H has Morse index {}, gates must be index one",
                    cp.negative_count()
                )));
            }
            _ => {}
        }
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of_group: Vec<usize> = Vec::new();
    for k in 0..min_idx.len() {
        if !below[k] {
            continue;
        }
        let r = find(&mut parent, k);
        match root_of_group.iter().position(|&q| q == r) {
            Some(g) => groups[g].push(k),
            None => {
                root_of_group.push(r);
                groups.push(vec![k]);
            }
        }
    }
    let mut well_of_min = vec![usize::MAX; min_idx.len()];
    for (w, g) in groups.iter().enumerate() {
        for &k in g {
            well_of_min[k] = w;
        }
    }

    let wells: Vec<Well> = groups
        .iter()
        .map(|g| {
            let members: Vec<usize> = g.iter().map(|&k| min_idx[k]).collect();
            let h = members.iter().map(|&i| points[i].value).fold(f64::INFINITY, f64::min);
            let deepest: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&i| points[i].value <= h + tol.level_tol)
                .collect();
            let nu = deepest.iter().map(|&i| points[i].hessian_det().powf(-0.5)).sum();
            Well {
                minima: members,
                deepest,
                h,
                nu,
            }
        })
        .collect();

    let k = wells.len();
    let mut gates = Vec::new();
    let mut internal = Vec::new();
    let mut omega = DMatrix::zeros(k, k);
    for &s in &level_saddles {
        let (a, b) = descend_both(field, &points[s], &minima, opts, tol)?;
        let (wa, wb) = (well_of_min[a], well_of_min[b]);
        if wa == usize::MAX || wb == usize::MAX {
            notices.push(format!("saddle {s} at level H descends to a minimum outside every well"));
            continue;
        }
        if wa == wb {
            notices.push(format!("saddle {s} at level H connects well {wa} to itself and is excluded"));
            internal.push(s);
            continue;
        }
        let mut point = points[s].clone();
        if wa > wb {
            point.saddle.as_mut().expect("index-1 saddle").flip();
        }
        let w = ek_constant(&point)?;
        let (i, j) = (wa.min(wb), wa.max(wb));
        omega[(i, j)] += w;
        omega[(j, i)] += w;
        gates.push(Gate {
            wells: (i, j),
            saddle: s,
            point,
            omega: w,
        });
    }

    let mut graph = LandscapeGraph {
        level,
        r0,
        critical_points: points,
        wells,
        gates,
        internal_saddles: internal,
        omega,
        h_min: 0.0,
        s_star: Vec::new(),
        nu_star: 0.0,
        notices,
    };
    graph.refresh_deepest(tol);
    if graph.gates.is_empty() && graph.wells.len() > 1 {
        graph
            .notices
            .push("no gate saddles at level H: the H-sublevel set is disconnected".into());
    } else if graph.components().len() > 1 {
        graph.notices.push(format!(
            "the H-sublevel closure has {} connected components, analyze each separately",
            graph.components().len()
        ));
    }
    if graph.s_star.len() == 1 {
        graph
            .notices
            .push("only one deepest well: the Markov chain description is trivial".into());
    }
    let valley_notes = graph.valley_notices(field);
    graph.notices.extend(valley_notes);
    Ok(graph)
}

impl LandscapeGraph {
    fn refresh_deepest(&mut self, tol: &Tolerances) {
        self.h_min = self.wells.iter().map(|w| w.h).fold(f64::INFINITY, f64::min);
        self.s_star = (0..self.wells.len())
            .filter(|&i| self.wells[i].h <= self.h_min + tol.level_tol)
            .collect();
        self.nu_star = self.s_star.iter().map(|&i| self.wells[i].nu).sum();
    }

    pub fn omega_i(&self, i: usize) -> f64 {
        self.omega.row(i).sum()
    }

    /// θ_ε = exp((H − h)/ε).
    pub fn theta(&self, eps: f64) -> f64 {
        ((self.level - self.h_min) / eps).exp()
    }

    pub fn valleys(&self) -> Vec<Valley> {
        self.wells
            .iter()
            .enumerate()
            .flat_map(|(w, well)| {
                well.deepest.iter().map(move |&i| Valley {
                    well: w,
                    center: self.critical_points[i].location.as_slice().to_vec(),
                })
            })
            .collect()
    }

    /// Connected components of the well graph under ω > 0.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let k = self.wells.len();
        let mut seen = vec![false; k];
        let mut out = Vec::new();
        for s in 0..k {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut head = 0;
            while head < comp.len() {
                let i = comp[head];
                head += 1;
                for j in 0..k {
                    if self.omega[(i, j)] > 0.0 && !seen[j] {
                        seen[j] = true;
                        comp.push(j);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Sub-landscape on a set of wells, renumbered in the given order.
    pub fn restrict(&self, wells: &[usize]) -> LandscapeGraph {
        let index = |w: usize| wells.iter().position(|&q| q == w);
        let gates = self
            .gates
            .iter()
            .filter_map(|g| {
                let (i, j) = (index(g.wells.0)?, index(g.wells.1)?);
                let mut gate = g.clone();
                if i > j {
                    gate.point.saddle.as_mut().expect("index-1 saddle").flip();
                }
                gate.wells = (i.min(j), i.max(j));
                Some(gate)
            })
            .collect();
        let mut graph = LandscapeGraph {
            level: self.level,
            r0: self.r0,
            critical_points: self.critical_points.clone(),
            wells: wells.iter().map(|&w| self.wells[w].clone()).collect(),
            gates,
            internal_saddles: self.internal_saddles.clone(),
            omega: DMatrix::from_fn(wells.len(), wells.len(), |a, b| self.omega[(wells[a], wells[b])]),
            h_min: 0.0,
            s_star: Vec::new(),
            nu_star: 0.0,
            notices: Vec::new(),
        };
        graph.refresh_deepest(&Tolerances::default());
        graph
    }

    fn valley_notices(&self, field: &dyn Field) -> Vec<String> {
        let mut out = Vec::new();
        let d = field.dim();
        let mut dirs: Vec<DVector<f64>> = Vec::new();
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let v = DVector::from_fn(d, |_, _| {
                let t = c % 3;
                c /= 3;
                t as f64 - 1.0
            });
            if v.norm() > 0.0 {
                dirs.push(v.normalize());
            }
        }
        for valley in self.valleys() {
            let m = DVector::from_column_slice(&valley.center);
            for (i, cp) in self.critical_points.iter().enumerate() {
                let dist = (&cp.location - &m).norm();
                if dist > 0.0 && dist < 2.0 * self.r0 {
                    out.push(format!(
                        "critical point {i} lies within 2 r0 of the valley center {:?}",
                        valley.center
                    ));
                }
            }
            let leaves = dirs
                .iter()
                .any(|u| field.potential((&m + u * (2.0 * self.r0)).as_slice()) >= self.level);
            if leaves {
                out.push(format!(
                    "the 2 r0 ball around {:?} reaches level H; r0 may be too large",
                    valley.center
                ));
            }
        }
        out
    }
}
