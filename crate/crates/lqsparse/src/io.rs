//! Deterministic serialization: CSV tables (17 significant digits),
//! Table-style human rendering (4 decimals), legacy ASCII VTK dumps, and
//! run manifests. No timestamps or machine state: identical inputs produce
//! byte-identical files.

use std::path::Path;

use crate::eoc::{EocTable, LadderConfig};
use crate::error::Result;
use crate::fem::{P0Field, P1Field};
use crate::func::{FuncSpec, Region};
use crate::interp::InterpStudyResult;
use crate::mesh::TriMesh;
use crate::ocp::{InnerMethod, ProblemSpec, SolveOptions, SolveReport};

/// 17 significant digits, locale-independent.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// CSV schema: q, level, n, h, error_l2, eoc, outer_iters, kkt_residual,
/// support_fraction. Missing cells stay empty.
pub fn eoc_table_csv(table: &EocTable) -> String {
    let mut out = String::from("q,level,n,h,error_l2,eoc,outer_iters,kkt_residual,support_fraction\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt17(r.q),
            r.level,
            r.n,
            fmt17(r.h),
            opt17(r.error_l2),
            opt17(r.eoc),
            r.outer_iters.map(|v| v.to_string()).unwrap_or_default(),
            opt17(r.kkt_residual),
            opt17(r.support_fraction),
        ));
    }
    out
}

/// Four-decimal rendering for human diffing, one block per q.
pub fn eoc_table_human(table: &EocTable) -> String {
    let mut out = String::new();
    let mut qs: Vec<f64> = Vec::new();
    for r in &table.rows {
        if !qs.contains(&r.q) {
            qs.push(r.q);
        }
    }
    for q in qs {
        out.push_str(&format!("q = {q}\n"));
        out.push_str("level        n          h      error        EOC\n");
        for r in table.rows_for_q(q) {
            let err = r.error_l2.map(|e| format!("{e:.4}")).unwrap_or_else(|| "-".into());
            let eoc = r.eoc.map(|e| format!("{e:.1}")).unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:5} {:8} {:10.4} {:>10} {:>10}\n",
                r.level, r.n, r.h, err, eoc
            ));
        }
        out.push('\n');
    }
    out
}

/// Per-element solve report: element id, barycenter, control, DC fields and
/// multipliers.
pub fn report_csv(mesh: &TriMesh, report: &SolveReport) -> String {
    let mut out = String::from("element,bary_x,bary_y,u,w,zeta,lambda_a,lambda_b\n");
    for t in 0..mesh.n_triangles() {
        let [bx, by] = mesh.barycenter(t);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            t,
            fmt17(bx),
            fmt17(by),
            fmt17(report.u.values()[t]),
            fmt17(report.w.values()[t]),
            fmt17(report.zeta.values()[t]),
            fmt17(report.lambda_a.values()[t]),
            fmt17(report.lambda_b.values()[t]),
        ));
    }
    out
}

/// CSV of an interpolation study: level, h, error_L1, error_L2,
/// fitted_exponent (the requested norm's exponent, repeated per row).
pub fn interp_study_csv(result: &InterpStudyResult) -> String {
    let mut out = String::from("level,h,error_l1,error_l2,fitted_exponent\n");
    for (level, ((h, e1), e2)) in result.h.iter().zip(&result.err_l1).zip(&result.err_l2).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            level,
            fmt17(*h),
            fmt17(*e1),
            fmt17(*e2),
            fmt17(result.fitted_exponent),
        ));
    }
    out
}

pub fn func_spec_manifest(f: &FuncSpec) -> String {
    match f {
        FuncSpec::Zero => "\"zero\"".into(),
        FuncSpec::Constant(c) => format!("{{ preset = \"constant\", value = {} }}", fmt17(*c)),
        FuncSpec::SineProduct { amp } => format!("{{ preset = \"sine-product\", amp = {} }}", fmt17(*amp)),
        FuncSpec::Gaussian { amp, decay, cx, cy } => format!(
            "{{ preset = \"custom-gaussian\", amp = {}, decay = {}, cx = {}, cy = {} }}",
            fmt17(*amp),
            fmt17(*decay),
            fmt17(*cx),
            fmt17(*cy)
        ),
        FuncSpec::Indicator(Region::Disk { cx, cy, r }) => format!(
            "{{ preset = \"disk\", cx = {}, cy = {}, r = {} }}",
            fmt17(*cx),
            fmt17(*cy),
            fmt17(*r)
        ),
        FuncSpec::Indicator(Region::HalfPlaneX { c }) => {
            format!("{{ preset = \"half-plane-x\", c = {} }}", fmt17(*c))
        }
        FuncSpec::Custom(_) => "\"custom\"".into(),
    }
}

pub fn problem_manifest(spec: &ProblemSpec) -> String {
    let p = spec.params;
    format!(
        "[problem]\nalpha = {}\nbeta = {}\nq = {}\ngamma = {}\nu_a = {}\nu_b = {}\ny_d = {}\nf = {}\n",
        fmt17(p.alpha),
        fmt17(p.beta),
        fmt17(p.q),
        fmt17(p.gamma),
        fmt17(p.u_a),
        fmt17(p.u_b),
        func_spec_manifest(&spec.y_d),
        func_spec_manifest(&spec.f),
    )
}

pub fn options_manifest(opts: &SolveOptions) -> String {
    let method = match opts.inner_method {
        InnerMethod::SemiSmoothNewton => "semi-smooth-newton",
        InnerMethod::Picard => "picard",
    };
    format!(
        "[solver]\ntol_outer = {}\ntol_inner = {}\nmax_outer = {}\nmax_inner = {}\ndamping = {}\ninner_method = \"{}\"\n",
        fmt17(opts.tol_outer),
        fmt17(opts.tol_inner),
        opts.max_outer,
        opts.max_inner,
        fmt17(opts.damping),
        method,
    )
}

/// Manifest echoing everything a ladder run depends on.
pub fn ladder_manifest(cfg: &LadderConfig) -> String {
    let mut out = String::new();
    out.push_str("[ladder]\n");
    out.push_str(&format!("base_n = {}\n", cfg.base_n));
    out.push_str(&format!("levels = {}\n", cfg.levels));
    out.push_str(&format!("ref_extra = {}\n", cfg.ref_extra));
    out.push_str(&format!("jobs = {}\n", cfg.jobs));
    let qs: Vec<String> = cfg.q_values.iter().map(|q| fmt17(*q)).collect();
    out.push_str(&format!("q_values = [{}]\n\n", qs.join(", ")));
    out.push_str(&problem_manifest(&cfg.problem));
    out.push('\n');
    out.push_str(&options_manifest(&cfg.options));
    out
}

/// Legacy ASCII VTK unstructured grid with optional point and cell data.
pub fn vtk_string(
    mesh: &TriMesh,
    point_fields: &[(&str, &P1Field)],
    cell_fields: &[(&str, &P0Field)],
) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("lqsparse field dump\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {} double\n", mesh.n_vertices()));
    for &[x, y] in mesh.vertices() {
        out.push_str(&format!("{} {} 0\n", fmt17(x), fmt17(y)));
    }
    let nt = mesh.n_triangles();
    out.push_str(&format!("CELLS {} {}\n", nt, 4 * nt));
    for tri in mesh.triangles() {
        out.push_str(&format!("3 {} {} {}\n", tri[0], tri[1], tri[2]));
    }
    out.push_str(&format!("CELL_TYPES {nt}\n"));
    for _ in 0..nt {
        out.push_str("5\n");
    }
    if !point_fields.is_empty() {
        out.push_str(&format!("POINT_DATA {}\n", mesh.n_vertices()));
        for (name, field) in point_fields {
            out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
            for &v in field.values() {
                out.push_str(&fmt17(v));
                out.push('\n');
            }
        }
    }
    if !cell_fields.is_empty() {
        out.push_str(&format!("CELL_DATA {nt}\n"));
        for (name, field) in cell_fields {
            out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
            for &v in field.values() {
                out.push_str(&fmt17(v));
                out.push('\n');
            }
        }
    }
    out
}

pub fn write_vtk(
    path: &Path,
    mesh: &TriMesh,
    point_fields: &[(&str, &P1Field)],
    cell_fields: &[(&str, &P0Field)],
) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, point_fields, cell_fields))?;
    Ok(())
}
