//! Shared oracles for the integration and acceptance suites. Each test
//! binary uses its own subset of these helpers.
#![allow(dead_code)]

use lqsparse::quad::{integrate, DEGREE4};
use lqsparse::{P1Field, TriMesh};

/// `||y_h - y||_{L2}` against an analytic function, degree-4 quadrature.
pub fn l2_error_vs_exact(y: &P1Field, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let mesh = y.mesh();
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let coords = mesh.tri_coords(t);
        let tri = mesh.triangles()[t];
        acc += integrate(&coords, mesh.area(t), DEGREE4, |x, yy| {
            let l = barycentric(&coords, x, yy);
            let vh = l[0] * y.values()[tri[0]] + l[1] * y.values()[tri[1]] + l[2] * y.values()[tri[2]];
            let d = vh - exact(x, yy);
            d * d
        });
    }
    acc.sqrt()
}

/// H1-seminorm error against an analytic gradient.
pub fn h1_error_vs_exact(y: &P1Field, grad_exact: impl Fn(f64, f64) -> [f64; 2]) -> f64 {
    let mesh = y.mesh();
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geo = mesh.geometry(t);
        let tri = mesh.triangles()[t];
        let gx: f64 = (0..3).map(|i| y.values()[tri[i]] * geo.grads[i][0]).sum();
        let gy: f64 = (0..3).map(|i| y.values()[tri[i]] * geo.grads[i][1]).sum();
        let coords = mesh.tri_coords(t);
        acc += integrate(&coords, geo.area, DEGREE4, |x, yy| {
            let g = grad_exact(x, yy);
            (gx - g[0]).powi(2) + (gy - g[1]).powi(2)
        });
    }
    acc.sqrt()
}

fn barycentric(coords: &[[f64; 2]; 3], x: f64, y: f64) -> [f64; 3] {
    let [a, b, c] = *coords;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((b[0] - x) * (c[1] - y) - (c[0] - x) * (b[1] - y)) / det;
    let l2 = ((c[0] - x) * (a[1] - y) - (a[0] - x) * (c[1] - y)) / det;
    [l1, l2, 1.0 - l1 - l2]
}

/// Value at (1/2, 1/2) of the solution of `-Delta psi = 1` on the unit
/// square with zero boundary values, by the double sine series.
pub fn torsion_center_value() -> f64 {
    let pi = std::f64::consts::PI;
    let mut acc = 0.0;
    for m in (1..400).step_by(2) {
        for n in (1..400).step_by(2) {
            let (mf, nf) = (m as f64, n as f64);
            let sign = if ((m - 1) / 2 + (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign / (mf * nf * (mf * mf + nf * nf));
        }
    }
    16.0 / pi.powi(4) * acc
}

/// Mesh ladder by repeated refinement.
pub fn ladder(base: usize, levels: usize) -> Vec<TriMesh> {
    let mut v = vec![TriMesh::uniform_square(base).unwrap()];
    for _ in 1..levels {
        v.push(v.last().unwrap().refine_uniform());
    }
    v
}
