//! Quasi-interpolants onto P0 and P1 and their measured interpolation rates.
//!
//! `project_p0` is the elementwise-mean operator (orthogonal to constants per
//! element, L1-contractive, box-preserving). `weighted_quasi_interp_p1` is
//! the patch-weighted variant with hat-function weights,
//! `pi_i(u) = integral_{omega_i} u phi_i / integral_{omega_i} phi_i`.

use crate::error::{Error, Result};
use crate::fem::{P0Field, P1Field};
use crate::func::FuncSpec;
use crate::mesh::TriMesh;
use crate::quad::{indicator_weighted_integral, integrate, integrate_func_weighted, DEGREE4};

/// `integral_T u` with the strategy picked by the kind of `u`
/// (degree-4 rule for smooth inputs, adaptive subdivision for indicators).
fn element_integral(mesh: &TriMesh, t: usize, u: &FuncSpec) -> f64 {
    let coords = mesh.tri_coords(t);
    integrate_func_weighted(&coords, mesh.area(t), DEGREE4, u, &|_, _| 1.0)
}

/// Elementwise-mean projection `u_T = (1/|T|) integral_T u`.
pub fn project_p0(mesh: &TriMesh, u: &FuncSpec) -> P0Field {
    let values = (0..mesh.n_triangles())
        .map(|t| element_integral(mesh, t, u) / mesh.area(t))
        .collect();
    P0Field::from_values(mesh, values)
}

/// Patch-weighted quasi-interpolant onto P1 ansatz functions.
pub fn weighted_quasi_interp_p1(mesh: &TriMesh, u: &FuncSpec) -> P1Field {
    let mut num = vec![0.0; mesh.n_vertices()];
    let mut den = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let coords = mesh.tri_coords(t);
        let area = mesh.area(t);
        for (li, &v) in tri.iter().enumerate() {
            // hat weight of local vertex li expressed in coordinates
            let g = hat_weight(&coords, li);
            num[v] += integrate_func_weighted(&coords, area, DEGREE4, u, &g);
            den[v] += area / 3.0;
        }
    }
    let values = num.iter().zip(&den).map(|(n, d)| n / d).collect();
    P1Field::from_values(mesh, values)
}

/// The hat function of local vertex `li` as a closure of position.
fn hat_weight(coords: &[[f64; 2]; 3], li: usize) -> impl Fn(f64, f64) -> f64 + '_ {
    move |x, y| {
        // barycentric coordinate of (x, y) w.r.t. local vertex li
        let [a, b, c] = *coords;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((b[0] - x) * (c[1] - y) - (c[0] - x) * (b[1] - y)) / det;
        let l2 = ((c[0] - x) * (a[1] - y) - (a[0] - x) * (c[1] - y)) / det;
        match li {
            0 => l1,
            1 => l2,
            _ => 1.0 - l1 - l2,
        }
    }
}

/// Per-element defect `integral_T (u - Pi_h u)`, computed along the same
/// integration path that defines the projection; must vanish to rounding.
pub fn orthogonality_residual(mesh: &TriMesh, u: &FuncSpec) -> Vec<f64> {
    let p = project_p0(mesh, u);
    (0..mesh.n_triangles())
        .map(|t| element_integral(mesh, t, u) - mesh.area(t) * p.values()[t])
        .collect()
}

/// Which error norm a study reports as its headline fitted exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyNorm {
    L1,
    L2,
}

/// Per-level interpolation errors and fitted convergence exponents.
#[derive(Clone, Debug)]
pub struct InterpStudyResult {
    pub h: Vec<f64>,
    pub err_l1: Vec<f64>,
    pub err_l2: Vec<f64>,
    pub exp_l1: f64,
    pub exp_l2: f64,
    /// Exponent for the requested norm (what the CSV reports).
    pub fitted_exponent: f64,
    pub norm: StudyNorm,
}

/// Measures `||u - Pi_h u||` across a mesh ladder and fits
/// `log(error) ~ p log(h)` by least squares.
pub fn interp_error_study(meshes: &[TriMesh], u: &FuncSpec, norm: StudyNorm) -> Result<InterpStudyResult> {
    if meshes.len() < 3 {
        return Err(Error::TooFewLevels { min: 3, got: meshes.len() });
    }
    let mut h = Vec::new();
    let mut err_l1 = Vec::new();
    let mut err_l2 = Vec::new();
    for mesh in meshes {
        let p = project_p0(mesh, u);
        let (mut e1, mut e2) = (0.0, 0.0);
        for t in 0..mesh.n_triangles() {
            let area = mesh.area(t);
            let c = p.values()[t];
            match u.indicator_region() {
                Some(region) => {
                    // Exact via the inside area: on the inside part the
                    // defect is 1-c, outside it is c.
                    let coords = mesh.tri_coords(t);
                    let a_in = indicator_weighted_integral(region, &coords, &|_, _| 1.0);
                    let a_out = (area - a_in).max(0.0);
                    e1 += a_in * (1.0 - c).abs() + a_out * c.abs();
                    e2 += a_in * (1.0 - c) * (1.0 - c) + a_out * c * c;
                }
                None => {
                    let coords = mesh.tri_coords(t);
                    e1 += integrate(&coords, area, DEGREE4, |x, y| (u.eval(x, y) - c).abs());
                    e2 += integrate(&coords, area, DEGREE4, |x, y| {
                        let d = u.eval(x, y) - c;
                        d * d
                    });
                }
            }
        }
        h.push(mesh.mesh_size());
        err_l1.push(e1);
        err_l2.push(e2.sqrt());
    }
    let exp_l1 = fit_exponent(&h, &err_l1);
    let exp_l2 = fit_exponent(&h, &err_l2);
    let fitted_exponent = match norm {
        StudyNorm::L1 => exp_l1,
        StudyNorm::L2 => exp_l2,
    };
    Ok(InterpStudyResult { h, err_l1, err_l2, exp_l1, exp_l2, fitted_exponent, norm })
}

/// Least-squares slope of log(err) against log(h).
pub fn fit_exponent(h: &[f64], err: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = h
        .iter()
        .zip(err)
        .filter(|&(&h, &e)| h > 0.0 && e > 0.0)
        .map(|(&h, &e)| (h.ln(), e.ln()))
        .collect();
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return f64::NAN;
    }
    let sx: f64 = pairs.iter().map(|p| p.0).sum();
    let sy: f64 = pairs.iter().map(|p| p.1).sum();
    let sxx: f64 = pairs.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}
