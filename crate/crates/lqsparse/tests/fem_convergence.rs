//! Discretization-quality checks of the state/adjoint solvers:
//! manufactured-solution rates, a Fourier-series oracle for the adjoint,
//! and mesh-independent stability of the discrete solution operator.

mod common;

use std::f64::consts::PI;

use common::{h1_error_vs_exact, l2_error_vs_exact, ladder, torsion_center_value};
use lqsparse::fem::{solve_adjoint, solve_state, EllipticCoeffs, StateSolver};
use lqsparse::func::FuncSpec;
use lqsparse::interp::fit_exponent;
use lqsparse::{P0Field, P1Field};

#[test]
fn manufactured_solution_second_order_l2() {
    // -Delta y = 2 pi^2 sin(pi x) sin(pi y), exact y = sin(pi x) sin(pi y).
    let meshes = ladder(8, 3);
    let f = FuncSpec::SineProduct { amp: 2.0 * PI * PI };
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for mesh in &meshes {
        let y = solve_state(mesh, &EllipticCoeffs::laplace(), &P0Field::zeros(mesh), &f).unwrap();
        hs.push(mesh.mesh_size());
        errs.push(l2_error_vs_exact(&y, |x, yy| (PI * x).sin() * (PI * yy).sin()));
    }
    let rate = fit_exponent(&hs, &errs);
    assert!((rate - 2.0).abs() <= 0.15, "L2 rate {rate}, errors {errs:?}");
}

#[test]
fn manufactured_solution_first_order_h1() {
    let meshes = ladder(8, 3);
    let f = FuncSpec::SineProduct { amp: 2.0 * PI * PI };
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for mesh in &meshes {
        let y = solve_state(mesh, &EllipticCoeffs::laplace(), &P0Field::zeros(mesh), &f).unwrap();
        hs.push(mesh.mesh_size());
        errs.push(h1_error_vs_exact(&y, |x, yy| {
            [
                PI * (PI * x).cos() * (PI * yy).sin(),
                PI * (PI * x).sin() * (PI * yy).cos(),
            ]
        }));
    }
    let rate = fit_exponent(&hs, &errs);
    assert!((rate - 1.0).abs() <= 0.15, "H1 rate {rate}, errors {errs:?}");
}

#[test]
fn adjoint_center_value_fourier_oracle() {
    // y = 0, y_d = 1: the adjoint solves a(phi, v) = -(1, v), so phi is the
    // negative torsion function; its center value tends to -0.07367...
    let oracle = -torsion_center_value();
    assert!((oracle + 0.07367).abs() <= 5e-6, "oracle {oracle}");
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let mesh = lqsparse::TriMesh::uniform_square(n).unwrap();
        let phi = solve_adjoint(
            &mesh,
            &EllipticCoeffs::laplace(),
            &P1Field::zeros(&mesh),
            &FuncSpec::Constant(1.0),
        )
        .unwrap();
        let center = mesh
            .vertices()
            .iter()
            .position(|&[x, y]| (x - 0.5).abs() < 1e-12 && (y - 0.5).abs() < 1e-12)
            .unwrap();
        errs.push((phi.at_vertex(center) - oracle).abs());
    }
    assert!(errs[2] < errs[0], "no convergence toward the Fourier value: {errs:?}");
    assert!(errs[2] <= 5e-5, "center-value error at n=64: {:e}", errs[2]);
}

#[test]
fn h1_stability_ratio_is_mesh_independent() {
    // ||y_h||_{H1} <= c ||u + f||_{L2} with c independent of the level.
    let meshes = ladder(8, 4);
    let mut ratios = Vec::new();
    for mesh in &meshes {
        let u = P0Field::from_fn_barycenter(mesh, |x, y| (3.0 * x - y).cos());
        let solver = StateSolver::new(mesh, &EllipticCoeffs::laplace()).unwrap();
        let y = solver.solve_state(&u, &FuncSpec::Zero).unwrap();
        let h1 = (y.h1_seminorm().powi(2) + y.l2_norm().powi(2)).sqrt();
        ratios.push(h1 / u.l2_norm());
    }
    let first = ratios[0];
    for r in &ratios {
        assert!(*r <= 1.05 * first, "stability ratio grew: {ratios:?}");
    }
}

#[test]
fn variable_coefficients_still_converge() {
    // Anisotropic smooth coefficients + reaction term: the manufactured
    // solution keeps second-order L2 accuracy.
    use lqsparse::fem::{MatrixCoeff, ScalarCoeff};
    use std::sync::Arc;
    let coeffs = EllipticCoeffs {
        a: MatrixCoeff::Fn(Arc::new(|x: f64, y: f64| {
            [[1.0 + 0.5 * x, 0.1 * x * y], [0.1 * x * y, 1.0 + 0.5 * y]]
        })),
        c0: ScalarCoeff::Constant(1.0),
    };
    // exact u = sin(pi x) sin(pi y); build f by applying the operator
    // symbolically: f = -div(a grad u) + c0 u.
    let exact = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let f = FuncSpec::custom(move |x, y| {
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        let ux = PI * cx * sy;
        let uy = PI * sx * cy;
        let uxx = -PI * PI * sx * sy;
        let uyy = -PI * PI * sx * sy;
        let uxy = PI * PI * cx * cy;
        // a11 = 1 + x/2, a12 = a21 = xy/10, a22 = 1 + y/2
        let dx_a11ux = 0.5 * ux + (1.0 + 0.5 * x) * uxx;
        let dx_a12uy = 0.1 * y * uy + 0.1 * x * y * uxy;
        let dy_a21ux = 0.1 * x * ux + 0.1 * x * y * uxy;
        let dy_a22uy = 0.5 * uy + (1.0 + 0.5 * y) * uyy;
        -(dx_a11ux + dx_a12uy + dy_a21ux + dy_a22uy) + sx * sy
    });
    let meshes = ladder(8, 3);
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for mesh in &meshes {
        let y = solve_state(mesh, &coeffs, &P0Field::zeros(mesh), &f).unwrap();
        hs.push(mesh.mesh_size());
        errs.push(l2_error_vs_exact(&y, exact));
    }
    let rate = fit_exponent(&hs, &errs);
    assert!((rate - 2.0).abs() <= 0.25, "L2 rate {rate}, errors {errs:?}");
}
