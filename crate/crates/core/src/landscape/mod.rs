//! Critical points, the well/gate graph at level H, and continuum constants.

mod critical;
mod graph;
mod laplace;

pub use critical::{
    classify, ek_constant, find_critical_points, saddle_spectrum, sorted_symmetric_eigen, CriticalPoint,
    Kind, SaddleSpectrum, Tolerances,
};
pub use graph::{build_landscape, descend, DescentField, DescentOptions, Gate, LandscapeGraph, Valley, Well};
pub use laplace::{laplace_check, LaplaceReport};

use crate::error::Result;
use crate::field::FieldEval;
use crate::spec::PotentialSpec;

/// Critical-point search and graph construction with default tolerances.
pub fn analyze(spec: &PotentialSpec, field: &FieldEval) -> Result<LandscapeGraph> {
    let tol = Tolerances::default();
    let points = find_critical_points(field, &spec.lower, &spec.upper, spec.seeds_per_axis, &tol)?;
    build_landscape(field, points, spec.level_h, spec.r0, &DescentOptions::default(), &tol)
}
