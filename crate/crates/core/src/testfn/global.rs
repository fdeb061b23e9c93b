use nalgebra::DVector;

use super::{BoxRegion, SaddleBox};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::landscape::{descend, DescentOptions, Kind, LandscapeGraph, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QRegion {
    /// Inside the enlarged box of gate k.
    Gate(usize),
    /// Plateau of a well, found by gradient descent.
    Plateau(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QValue {
    pub value: f64,
    pub region: QRegion,
    /// x lies outside K_ε = {U < H + J²δ²}; the value is the clamped continuation.
    pub outside_k: bool,
}

/// Global test function Q_ε^g built from every gate box.
pub struct QFunction<'a> {
    field: &'a dyn Field,
    boxes: Vec<SaddleBox>,
    wells: Vec<(usize, usize)>,
    minima: Vec<DVector<f64>>,
    minimum_well: Vec<Option<usize>>,
    k_level: f64,
}

impl<'a> QFunction<'a> {
    /// Boxes of distinct gates must be disjoint (circumsphere test).
    pub fn new(field: &'a dyn Field, graph: &LandscapeGraph, eps: f64, j_mult: f64) -> Result<Self> {
        let boxes = graph
            .gates
            .iter()
            .map(|g| SaddleBox::new(&g.point, eps, j_mult, graph.level))
            .collect::<Result<Vec<_>>>()?;
        let radius = |b: &SaddleBox| {
            let mut w = b.half_widths.clone();
            w[0] = b.outer;
            w.iter().map(|a| a * a).sum::<f64>().sqrt()
        };
        for a in 0..boxes.len() {
            for b in a + 1..boxes.len() {
                let gap = (&boxes[a].sigma - &boxes[b].sigma).norm();
                if gap <= radius(&boxes[a]) + radius(&boxes[b]) {
                    return Err(Error::Model(format!(
                        "saddle boxes of gates {a} and {b} may overlap at eps = {eps}, J = {j_mult}"
                    )));
                }
            }
        }
        let mut minima = Vec::new();
        let mut minimum_well = Vec::new();
        for (idx, cp) in graph.critical_points.iter().enumerate() {
            if cp.kind == Kind::Minimum {
                minima.push(cp.location.clone());
                minimum_well.push(graph.wells.iter().position(|w| w.minima.contains(&idx)));
            }
        }
        let k_level = graph.level + j_mult * j_mult * eps * (1.0 / eps).ln();
        Ok(Self {
            field,
            wells: graph.gates.iter().map(|g| g.wells).collect(),
            boxes,
            minima,
            minimum_well,
            k_level,
        })
    }

    pub fn boxes(&self) -> &[SaddleBox] {
        &self.boxes
    }

    pub fn eval(&self, g: &[f64], x: &[f64]) -> Result<QValue> {
        let outside_k = self.field.potential(x) >= self.k_level;
        let mut hit = None;
        for (k, b) in self.boxes.iter().enumerate() {
            let z = b.local(x);
            if b.region(&z) != BoxRegion::Outside {
                if hit.is_some() {
                    return Err(Error::Model(format!("point {x:?} lies in two saddle boxes")));
                }
                hit = Some((k, b.p_local(&z)?));
            }
        }
        if let Some((k, p)) = hit {
            let (i, j) = self.wells[k];
            return Ok(QValue {
                value: g[j] + (g[i] - g[j]) * p,
                region: QRegion::Gate(k),
                outside_k,
            });
        }
        let m = descend(
            self.field,
            DVector::from_column_slice(x),
            &self.minima,
            &DescentOptions::default(),
            &Tolerances::default(),
        )?;
        let well = self.minimum_well[m]
            .ok_or_else(|| Error::Model(format!("point {x:?} descends to a minimum above the cut level")))?;
        Ok(QValue {
            value: g[well],
            region: QRegion::Plateau(well),
            outside_k,
        })
    }
}
