use metastable::chain::{limiting_dirichlet_form, FiniteChain};
use metastable::field::{check_structure, derivative_selfcheck, halton_points};
use metastable::landscape::{laplace_check, Kind};
use metastable::quadrature::AdaptiveOptions;
use metastable::spec::EllKind;
use metastable::testfn::{
    boundary_check, box_clears_valleys, continuity_check, residual_quadrature, skew_identity_check,
    spectrum_match, ConstantProfile, QFunction, SaddleBox,
};
use nalgebra::DVector;
use serde_json::{json, Value};

use crate::analyze::Model;
use crate::failure::CliResult;
use crate::output::{jf, json_artifact, Artifact};

pub const STRUCTURE_SAMPLES: usize = 10_000;
pub const STRUCTURE_TOL: f64 = 1e-10;
pub const DERIVATIVE_TOL: f64 = 1e-6;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const CONTINUITY_TOL: f64 = 1e-10;
pub const BOUNDARY_SAMPLES: usize = 500;
pub const RESIDUAL_AGREEMENT: f64 = 0.01;
const RESIDUAL_PANELS: usize = 16;
const RESIDUAL_ORDER: usize = 10;
const Q_PROBES: usize = 400;

pub struct VerifyParams {
    pub eps: Vec<f64>,
    pub j: f64,
    pub quadrature: bool,
}

#[derive(Default)]
struct Checks {
    items: Vec<Value>,
    failed: Vec<String>,
}

impl Checks {
    fn push(&mut self, name: impl Into<String>, status: &str, value: Value, tol: Value, detail: impl Into<String>) {
        let name = name.into();
        if status == "FAIL" {
            self.failed.push(name.clone());
        }
        self.items.push(json!({
            "name": name,
            "status": status,
            "value": value,
            "tol": tol,
            "detail": detail.into(),
        }));
    }

    fn bound(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        let status = if value <= tol { "PASS" } else { "FAIL" };
        self.push(name, status, jf(value), jf(tol), "");
    }

    fn flag(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.push(name, if ok { "PASS" } else { "FAIL" }, Value::Null, Value::Null, detail);
    }

    fn skip(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.push(name, "SKIP", Value::Null, Value::Null, detail);
    }

    fn info(&mut self, name: impl Into<String>, value: Value, detail: impl Into<String>) {
        self.push(name, "INFO", value, Value::Null, detail);
    }
}

fn model_checks(m: &Model, c: &mut Checks) -> CliResult<()> {
    let spec = &m.spec;
    let d = spec.dimension;
    if d <= 16 {
        let pts = halton_points(&spec.lower, &spec.upper, STRUCTURE_SAMPLES);
        let s = check_structure(&m.field, &pts, STRUCTURE_TOL);
        c.bound("structure.orthogonality", s.max_orthogonality, STRUCTURE_TOL);
        c.bound("structure.divergence", s.max_divergence, STRUCTURE_TOL);
        let mut probes = halton_points(&spec.lower, &spec.upper, 50);
        probes.extend(m.graph.critical_points.iter().map(|p| p.location.as_slice().to_vec()));
        let worst = probes
            .iter()
            .map(|x| derivative_selfcheck(&m.field, x, None).max_error())
            .fold(0.0, f64::max);
        c.bound("derivatives.finite_difference", worst, DERIVATIVE_TOL);
    } else {
        c.skip("structure", format!("low-discrepancy sampling supports d <= 16, got {d}"));
    }
    c.info(
        "growth.gradient_laplacian_condition",
        Value::Null,
        "|grad U| - 2 lap U -> infinity is assumed for polynomial U, not proven",
    );
    Ok(())
}

fn landscape_checks(m: &Model, c: &mut Checks) -> CliResult<Vec<Value>> {
    let g = &m.graph;
    for (i, cp) in g.critical_points.iter().enumerate() {
        let Some(s) = cp.saddle.as_ref() else { continue };
        c.bound(format!("saddle[{i}].mu_similarity"), (s.mu - s.mu_adjoint).abs(), IDENTITY_TOL);
        c.bound(format!("saddle[{i}].spectrum_match"), spectrum_match(&cp.hessian, &cp.jacobian), IDENTITY_TOL);
        c.flag(format!("saddle[{i}].v_dot_e1_positive"), s.v_dot_e1() > 1e-8, format!("v.e1 = {}", s.v_dot_e1()));
        if m.spec.ell_kind == EllKind::Zero {
            c.bound(format!("saddle[{i}].reversible_mu"), (s.mu - s.lambda1).abs(), IDENTITY_TOL);
            c.bound(format!("saddle[{i}].reversible_v"), (&s.v - s.e1()).amax(), IDENTITY_TOL);
        }
    }
    let k = g.wells.len();
    let symmetric = (0..k).all(|i| g.omega[(i, i)] == 0.0 && (0..k).all(|j| g.omega[(i, j)] == g.omega[(j, i)]));
    c.flag("landscape.omega_symmetric", symmetric, "");
    let mut gates = Vec::new();
    for (n, gate) in g.gates.iter().enumerate() {
        let r = skew_identity_check(&gate.point)?;
        c.bound(format!("gate[{n}].skew_identity"), r.identity_residual, IDENTITY_TOL);
        c.bound(format!("gate[{n}].hl_skew"), r.skew_residual, IDENTITY_TOL);
        c.flag(
            format!("gate[{n}].level"),
            (gate.point.value - g.level).abs() <= 1e-8 && gate.point.kind == Kind::Index1Saddle,
            "",
        );
        gates.push(json!({
            "wells": [gate.wells.0, gate.wells.1],
            "saddle": gate.saddle,
            "identity_residual": jf(r.identity_residual),
            "hl_skew_residual": jf(r.skew_residual),
            "spectrum_match": jf(spectrum_match(&gate.point.hessian, &gate.point.jacobian)),
        }));
    }
    Ok(gates)
}

fn chain_checks(m: &Model, c: &mut Checks) -> CliResult<()> {
    let g = &m.graph;
    let mut any = false;
    for comp in g.components() {
        let sub = g.restrict(&comp);
        if sub.s_star.len() < 2 {
            continue;
        }
        any = true;
        let x = FiniteChain::auxiliary(sub.omega.clone())?;
        let beta = x.beta_matrix(&sub.s_star)?;
        let oracle = x.trace_oracle(&sub.s_star)?;
        let tag = format!("{comp:?}");
        c.bound(format!("chain{tag}.beta_vs_trace_oracle"), (&beta.values - &oracle).amax(), IDENTITY_TOL);
        c.flag(format!("chain{tag}.beta_symmetric"), beta.values == beta.values.transpose(), "");
        let nu: Vec<f64> = sub.s_star.iter().map(|&i| sub.wells[i].nu).collect();
        let y = FiniteChain::limiting(&beta, &nu)?;
        let n = sub.s_star.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                let u: Vec<f64> = (0..n).map(|q| if q == a { 1.0 } else { -0.5 }).collect();
                let v: Vec<f64> = (0..n).map(|q| if q == b { 1.0 } else { 0.25 * q as f64 }).collect();
                let ut = x.harmonic_extension(&sub.s_star, &u)?.values;
                let vt = x.harmonic_extension(&sub.s_star, &v)?.values;
                let rhs = sub.nu_star * limiting_dirichlet_form(&y, &DVector::from_vec(u), &DVector::from_vec(v));
                worst = worst.max((x.dirichlet_form(&ut, &vt) - rhs).abs());
            }
        }
        c.bound(format!("chain{tag}.harmonic_extension_identity"), worst, IDENTITY_TOL);
    }
    if !any {
        c.skip("chain", "no component has two deepest wells: the Markov chain description is trivial");
    }
    Ok(())
}

fn valley_centers(m: &Model) -> Vec<Vec<f64>> {
    m.graph.valleys().into_iter().map(|v| v.center).collect()
}

fn testfn_checks(m: &Model, p: &VerifyParams, c: &mut Checks) -> CliResult<Vec<Value>> {
    let g = &m.graph;
    let centers = valley_centers(m);
    let mut per_eps = Vec::new();
    for &eps in &p.eps {
        if !(eps > 0.0 && eps < 1.0) {
            c.skip(format!("testfn[eps={eps}]"), "saddle boxes need 0 < eps < 1");
            continue;
        }
        let mut boxes = Vec::new();
        for (n, gate) in g.gates.iter().enumerate() {
            let bx = SaddleBox::new(&gate.point, eps, p.j, g.level)?;
            let b = boundary_check(&bx, &bx, BOUNDARY_SAMPLES)?;
            c.flag(
                format!("testfn[eps={eps}].gate[{n}].boundary_exact"),
                b.pass,
                format!("{} samples, max |p-1| = {:e}, max |p| = {:e}", b.samples, b.plus_error, b.minus_error),
            );
            let control = boundary_check(&bx, &ConstantProfile(0.5), BOUNDARY_SAMPLES)?;
            c.flag(
                format!("testfn[eps={eps}].gate[{n}].boundary_negative_control"),
                !control.pass,
                "a constant profile must fail the boundary check",
            );
            let jump = continuity_check(&bx, BOUNDARY_SAMPLES);
            c.bound(format!("testfn[eps={eps}].gate[{n}].continuity"), jump, CONTINUITY_TOL);
            let centre = bx.p_eval(bx.sigma.as_slice())?;
            c.bound(format!("testfn[eps={eps}].gate[{n}].center_half"), (centre - 0.5).abs(), 1e-15);
            let clear = box_clears_valleys(&bx, &centers, g.r0);
            boxes.push(json!({
                "gate": n,
                "delta": jf(bx.delta),
                "eta": jf(bx.eta),
                "half_widths": bx.half_widths.iter().map(|&v| jf(v)).collect::<Vec<_>>(),
                "k_level": jf(bx.k_level),
                "boundary": {"samples": b.samples, "plus_error": jf(b.plus_error), "minus_error": jf(b.minus_error), "pass": b.pass},
                "negative_control_pass": control.pass,
                "continuity_jump": jf(jump),
                "clears_valleys": clear,
            }));
        }
        let q_detail = q_checks(m, eps, p.j, &centers, c)?;
        per_eps.push(json!({"eps": jf(eps), "boxes": boxes, "q": q_detail}));
    }
    Ok(per_eps)
}

fn q_checks(m: &Model, eps: f64, j: f64, centers: &[Vec<f64>], c: &mut Checks) -> CliResult<Value> {
    let g = &m.graph;
    let name = format!("testfn[eps={eps}].q");
    if g.gates.is_empty() {
        c.skip(&name, "no gates");
        return Ok(Value::Null);
    }
    let q = match QFunction::new(&m.field, g, eps, j) {
        Ok(q) => q,
        Err(e) => {
            c.skip(&name, e.to_string());
            return Ok(Value::Null);
        }
    };
    if !q.boxes().iter().all(|b| box_clears_valleys(b, centers, g.r0)) {
        c.skip(&name, "a saddle box reaches a valley ball; increase 1/eps or lower J");
        return Ok(Value::Null);
    }
    let k = g.wells.len();
    let gvec: Vec<f64> = (0..k).map(|i| if i == 0 { 1.0 } else { -(i as f64) / k as f64 }).collect();
    let gmax = gvec.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut plateau_ok = true;
    for v in g.valleys() {
        let val = q.eval(&gvec, &v.center)?;
        plateau_ok &= val.value == gvec[v.well];
    }
    c.flag(format!("{name}.plateau"), plateau_ok, "Q equals g(i) at every valley center");
    let mut sup: f64 = 0.0;
    let mut constant_ok = true;
    let mut outside = 0usize;
    for x in halton_points(&m.spec.lower, &m.spec.upper, Q_PROBES) {
        let v = q.eval(&gvec, &x)?;
        sup = sup.max(v.value.abs());
        outside += usize::from(v.outside_k);
        constant_ok &= q.eval(&vec![0.3; k], &x)?.value == 0.3;
    }
    for b in q.boxes() {
        sup = sup.max(q.eval(&gvec, b.sigma.as_slice())?.value.abs());
    }
    c.bound(format!("{name}.sup_norm_bound"), (sup - gmax).max(0.0), 1e-15);
    c.flag(format!("{name}.constant"), constant_ok, "constant g gives constant Q");
    Ok(json!({"g": gvec, "sup": jf(sup), "g_max": jf(gmax), "probes": Q_PROBES, "outside_k": outside}))
}

fn quadrature_checks(m: &Model, p: &VerifyParams, c: &mut Checks) -> CliResult<(Vec<Value>, Vec<Value>)> {
    let d = m.spec.dimension;
    let g = &m.graph;
    if d > 3 {
        c.skip("quadrature", format!("quadrature checks need d <= 3, got d = {d}"));
        return Ok((Vec::new(), Vec::new()));
    }
    let opts = AdaptiveOptions::default();
    let mut ladder = p.eps.clone();
    ladder.sort_by(|a, b| b.total_cmp(a));
    ladder.dedup();
    let mut laplace = Vec::new();
    let mut z = Vec::new();
    for &eps in &ladder {
        match laplace_check(&m.field, g, &m.spec.lower, &m.spec.upper, eps, &opts) {
            Ok(r) => {
                c.info(format!("laplace[eps={eps}].z_ratio"), jf(r.z_ratio), "expected to approach 1 as eps -> 0");
                laplace.push(json!({
                    "eps": jf(eps),
                    "z_ratio": jf(r.z_ratio),
                    "valley_mass": r.valley_mass.iter().map(|&v| jf(v)).collect::<Vec<_>>(),
                    "valley_ratios": r.valley_ratios.iter().map(|&v| jf(v)).collect::<Vec<_>>(),
                    "delta_mass": jf(r.delta_mass),
                    "boundary_weight": jf(r.boundary_weight),
                }));
                z.push(Some(r.z_shifted));
            }
            Err(e) => {
                c.push(format!("laplace[eps={eps}]"), "FAIL", Value::Null, Value::Null, e.to_string());
                z.push(None);
            }
        }
    }
    if d != 2 {
        c.skip("residual", format!("the residual quadrature runs in d = 2 only, got d = {d}"));
        return Ok((laplace, Vec::new()));
    }
    let centers = valley_centers(m);
    let mut tables = Vec::new();
    for (n, gate) in g.gates.iter().enumerate() {
        let mut rows = Vec::new();
        let mut valid_values = Vec::new();
        for (&eps, zs) in ladder.iter().zip(&z) {
            let Some(zs) = zs else { continue };
            if !(eps > 0.0 && eps < 1.0) {
                continue;
            }
            let bx = SaddleBox::new(&gate.point, eps, p.j, g.level)?;
            let disjoint = QFunction::new(&m.field, g, eps, p.j).is_ok();
            let valid = disjoint && box_clears_valleys(&bx, &centers, g.r0);
            let r = residual_quadrature(&m.field, &bx, &bx, g.level, *zs, RESIDUAL_PANELS, RESIDUAL_ORDER)?;
            if valid {
                c.bound(format!("residual[gate={n},eps={eps}].mesh_agreement"), r.agreement, RESIDUAL_AGREEMENT);
                valid_values.push((eps, r.residual));
            }
            rows.push(json!({
                "eps": jf(eps),
                "residual": jf(r.residual),
                "coarse": jf(r.coarse),
                "panels": [r.panels.0, r.panels.1],
                "agreement": jf(r.agreement),
                "extension_energy": jf(r.extension_energy),
                "valid_geometry": valid,
            }));
        }
        let name = format!("residual[gate={n}].decreasing");
        if valid_values.len() < 2 {
            c.skip(name, "fewer than two eps values with a valid box geometry");
        } else {
            let ok = valid_values.windows(2).all(|w| w[1].1 < w[0].1);
            c.flag(name, ok, format!("{valid_values:?}"));
        }
        tables.push(json!({"gate": n, "J": jf(p.j), "rows": rows}));
    }
    Ok((laplace, tables))
}

pub fn run(m: &Model, p: &VerifyParams) -> CliResult<(Vec<Artifact>, Vec<String>)> {
    let mut c = Checks::default();
    model_checks(m, &mut c)?;
    let gates = landscape_checks(m, &mut c)?;
    chain_checks(m, &mut c)?;
    let boxes = testfn_checks(m, p, &mut c)?;
    let (laplace, residual) = if p.quadrature {
        quadrature_checks(m, p, &mut c)?
    } else {
        c.skip("quadrature", "enable with --quadrature");
        (Vec::new(), Vec::new())
    };
    let report = json!({
        "spec_sha256": m.spec_sha,
        "J": jf(p.j),
        "eps": p.eps.iter().map(|&e| jf(e)).collect::<Vec<_>>(),
        "gates": gates,
        "boxes": boxes,
        "laplace": laplace,
        "residual": residual,
    });
    let verify = json!({
        "spec_sha256": m.spec_sha,
        "checks": c.items,
        "failed": c.failed,
        "pass": c.failed.is_empty(),
    });
    Ok((
        vec![json_artifact("testfn_report.json", report), json_artifact("verify.json", verify)],
        c.failed,
    ))
}
