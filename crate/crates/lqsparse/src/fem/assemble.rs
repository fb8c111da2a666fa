//! Assembly of the elliptic bilinear form
//! `a(y, v) = integral a_ij dy/dx_j dv/dx_i + c0 y v`
//! over the P1 space with homogeneous Dirichlet elimination, plus the
//! discrete state and adjoint solution operators.
//!
//! Entries are exact closed forms for constant coefficients; variable
//! coefficients and data functions are sampled with the 3-point
//! edge-midpoint rule (exact through degree 2).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::field::{P0Field, P1Field};
use crate::fem::sparse::SparseSpd;
use crate::func::FuncSpec;
use crate::mesh::TriMesh;
use crate::quad::{bary_to_xy, EDGE_MIDPOINT};

/// Matrix coefficient `a_ij(x)`; must be symmetric and uniformly elliptic.
#[derive(Clone)]
pub enum MatrixCoeff {
    Identity,
    Constant([[f64; 2]; 2]),
    Fn(Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>),
}

/// Scalar reaction coefficient `c0(x) >= 0`.
#[derive(Clone)]
pub enum ScalarCoeff {
    Zero,
    Constant(f64),
    Fn(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

/// Coefficients of the elliptic operator.
#[derive(Clone)]
pub struct EllipticCoeffs {
    pub a: MatrixCoeff,
    pub c0: ScalarCoeff,
}

impl EllipticCoeffs {
    /// The negative Laplacian.
    pub fn laplace() -> EllipticCoeffs {
        EllipticCoeffs { a: MatrixCoeff::Identity, c0: ScalarCoeff::Zero }
    }
}

impl Default for EllipticCoeffs {
    fn default() -> Self {
        EllipticCoeffs::laplace()
    }
}

impl std::fmt::Debug for EllipticCoeffs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = match &self.a {
            MatrixCoeff::Identity => "Identity".to_string(),
            MatrixCoeff::Constant(m) => format!("Constant({m:?})"),
            MatrixCoeff::Fn(_) => "Fn(..)".to_string(),
        };
        let c0 = match &self.c0 {
            ScalarCoeff::Zero => "Zero".to_string(),
            ScalarCoeff::Constant(c) => format!("Constant({c})"),
            ScalarCoeff::Fn(_) => "Fn(..)".to_string(),
        };
        write!(f, "EllipticCoeffs {{ a: {a}, c0: {c0} }}")
    }
}

fn check_elliptic(m: [[f64; 2]; 2], x: f64, y: f64) -> Result<()> {
    let tr = m[0][0] + m[1][1];
    let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[1][0]).max(0.0).sqrt();
    let eigmin = 0.5 * (tr - disc);
    if eigmin > 0.0 {
        Ok(())
    } else {
        Err(Error::NonElliptic { x, y, eigmin })
    }
}

fn matvec2(m: [[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Local 3x3 stiffness + reaction matrix of one triangle.
fn local_matrix(mesh: &TriMesh, t: usize, coeffs: &EllipticCoeffs) -> Result<[[f64; 3]; 3]> {
    let geo = mesh.geometry(t);
    let coords = mesh.tri_coords(t);
    let g = geo.grads;
    let area = geo.area;
    let mut k = [[0.0; 3]; 3];

    match &coeffs.a {
        MatrixCoeff::Identity => {
            for i in 0..3 {
                for j in 0..3 {
                    k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
        MatrixCoeff::Constant(m) => {
            let [bx, by] = mesh.barycenter(t);
            check_elliptic(*m, bx, by)?;
            for i in 0..3 {
                let ag = matvec2(*m, g[i]);
                for j in 0..3 {
                    k[j][i] = area * (ag[0] * g[j][0] + ag[1] * g[j][1]);
                }
            }
        }
        MatrixCoeff::Fn(f) => {
            for &(l, w) in EDGE_MIDPOINT.points {
                let [x, y] = bary_to_xy(&coords, l);
                let m = f(x, y);
                check_elliptic(m, x, y)?;
                for i in 0..3 {
                    let ag = matvec2(m, g[i]);
                    for j in 0..3 {
                        k[j][i] += w * area * (ag[0] * g[j][0] + ag[1] * g[j][1]);
                    }
                }
            }
        }
    }

    match &coeffs.c0 {
        ScalarCoeff::Zero => {}
        ScalarCoeff::Constant(c) => {
            if *c < 0.0 {
                let [bx, by] = mesh.barycenter(t);
                return Err(Error::InvalidParameter(format!(
                    "c0 = {c} is negative at ({bx}, {by})"
                )));
            }
            for i in 0..3 {
                for j in 0..3 {
                    k[i][j] += c * area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
            }
        }
        ScalarCoeff::Fn(f) => {
            for &(l, w) in EDGE_MIDPOINT.points {
                let [x, y] = bary_to_xy(&coords, l);
                let c = f(x, y);
                if c < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "c0 = {c} is negative at ({x}, {y})"
                    )));
                }
                for i in 0..3 {
                    for j in 0..3 {
                        k[i][j] += w * area * c * l[i] * l[j];
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Interior-DOF numbering of a mesh.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// interior index per vertex, or usize::MAX for Dirichlet vertices.
    interior_of: Vec<usize>,
    /// vertex per interior index.
    vertex_of: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &TriMesh) -> DofMap {
        let mut interior_of = vec![usize::MAX; mesh.n_vertices()];
        let mut vertex_of = Vec::new();
        for v in 0..mesh.n_vertices() {
            if !mesh.is_boundary(v) {
                interior_of[v] = vertex_of.len();
                vertex_of.push(v);
            }
        }
        DofMap { interior_of, vertex_of }
    }

    pub fn n_dofs(&self) -> usize {
        self.vertex_of.len()
    }

    pub fn interior_index(&self, v: usize) -> Option<usize> {
        let i = self.interior_of[v];
        (i != usize::MAX).then_some(i)
    }

    pub fn vertex(&self, dof: usize) -> usize {
        self.vertex_of[dof]
    }
}

/// Stiffness matrix over interior vertex basis functions,
/// `A[i][j] = a(phi_j, phi_i)`.
pub fn assemble_stiffness(mesh: &TriMesh, coeffs: &EllipticCoeffs) -> Result<SparseSpd> {
    let dofs = DofMap::new(mesh);
    assemble_interior(mesh, coeffs, &dofs)
}

fn assemble_interior(mesh: &TriMesh, coeffs: &EllipticCoeffs, dofs: &DofMap) -> Result<SparseSpd> {
    let n = dofs.n_dofs();
    let nt = mesh.n_triangles();

    // Pass 1: slot counts (duplicates included).
    let mut counts = vec![0usize; n];
    for t in 0..nt {
        let tri = mesh.triangles()[t];
        for &vi in &tri {
            if let Some(i) = dofs.interior_index(vi) {
                for &vj in &tri {
                    if dofs.interior_index(vj).is_some() {
                        counts[i] += 1;
                    }
                }
            }
        }
    }
    let mut slot_ptr = vec![0usize; n + 1];
    for i in 0..n {
        slot_ptr[i + 1] = slot_ptr[i] + counts[i];
    }
    let total = slot_ptr[n];
    let mut cols_tmp = vec![0u32; total];
    let mut vals_tmp = vec![0.0f64; total];
    let mut cursor = slot_ptr.clone();

    // Pass 2: element loop.
    for t in 0..nt {
        let k = local_matrix(mesh, t, coeffs)?;
        let tri = mesh.triangles()[t];
        for (li, &vi) in tri.iter().enumerate() {
            if let Some(i) = dofs.interior_index(vi) {
                for (lj, &vj) in tri.iter().enumerate() {
                    if let Some(j) = dofs.interior_index(vj) {
                        let c = cursor[i];
                        cols_tmp[c] = j as u32;
                        vals_tmp[c] = k[li][lj];
                        cursor[i] += 1;
                    }
                }
            }
        }
    }

    // Pass 3: per-row sort + merge duplicates.
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut buf: Vec<(u32, f64)> = Vec::with_capacity(32);
    row_ptr.push(0usize);
    for i in 0..n {
        buf.clear();
        for s in slot_ptr[i]..slot_ptr[i + 1] {
            buf.push((cols_tmp[s], vals_tmp[s]));
        }
        buf.sort_by_key(|&(c, _)| c);
        let mut iter = buf.iter();
        if let Some(&(c0, v0)) = iter.next() {
            let mut cur_c = c0;
            let mut cur_v = v0;
            for &(c, v) in iter {
                if c == cur_c {
                    cur_v += v;
                } else {
                    cols.push(cur_c);
                    vals.push(cur_v);
                    cur_c = c;
                    cur_v = v;
                }
            }
            cols.push(cur_c);
            vals.push(cur_v);
        }
        row_ptr.push(cols.len());
    }
    Ok(SparseSpd::from_parts(n, row_ptr, cols, vals))
}

/// Bilinear form over all vertices, no Dirichlet elimination. Diagnostic and
/// test use (the result is only positive semi-definite for pure diffusion).
pub fn assemble_full_bilinear(mesh: &TriMesh, coeffs: &EllipticCoeffs) -> Result<SparseSpd> {
    let nv = mesh.n_vertices();
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nv];
    for t in 0..mesh.n_triangles() {
        let k = local_matrix(mesh, t, coeffs)?;
        let tri = mesh.triangles()[t];
        for (li, &vi) in tri.iter().enumerate() {
            for (lj, &vj) in tri.iter().enumerate() {
                rows[vi].push((vj as u32, k[li][lj]));
            }
        }
    }
    let mut merged = Vec::with_capacity(nv);
    for mut row in rows {
        row.sort_by_key(|&(c, _)| c);
        let mut out: Vec<(u32, f64)> = Vec::with_capacity(row.len());
        for (c, v) in row {
            match out.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => out.push((c, v)),
            }
        }
        merged.push(out);
    }
    Ok(SparseSpd::from_rows(merged))
}

/// Interior load vector of a P0 control: `b[i] = sum_T u_T |T| / 3` over
/// triangles incident to vertex i.
pub fn assemble_p0_load(mesh: &TriMesh, u: &P0Field) -> Result<Vec<f64>> {
    if !mesh.same_mesh(u.mesh()) {
        return Err(Error::MeshMismatch("assemble_p0_load".into()));
    }
    let dofs = DofMap::new(mesh);
    Ok(p0_load_with(mesh, &dofs, u))
}

fn p0_load_with(mesh: &TriMesh, dofs: &DofMap, u: &P0Field) -> Vec<f64> {
    let mut b = vec![0.0; dofs.n_dofs()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let w = u.values()[t] * mesh.area(t) / 3.0;
        for &v in tri {
            if let Some(i) = dofs.interior_index(v) {
                b[i] += w;
            }
        }
    }
    b
}

fn func_load_with(mesh: &TriMesh, dofs: &DofMap, f: &FuncSpec) -> Vec<f64> {
    let mut b = vec![0.0; dofs.n_dofs()];
    if f.is_zero() {
        return b;
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let coords = mesh.tri_coords(t);
        let area = mesh.area(t);
        // Edge-midpoint rule: integral_T f phi_i.
        let mut local = [0.0; 3];
        for &(l, w) in EDGE_MIDPOINT.points {
            let [x, y] = bary_to_xy(&coords, l);
            let fv = f.eval(x, y);
            for i in 0..3 {
                local[i] += w * area * fv * l[i];
            }
        }
        for (li, &v) in tri.iter().enumerate() {
            if let Some(i) = dofs.interior_index(v) {
                b[i] += local[li];
            }
        }
    }
    b
}

/// Reusable discrete operator for one mesh + coefficient pair: assembled
/// once, then shared by every state and adjoint solve (the coefficient
/// matrix is symmetric, so the adjoint operator is the same matrix).
///
/// Systems above [`MG_MIN_DOFS`] interior unknowns on meshes with a
/// refinement lineage are solved by geometric V-cycles; everything else by
/// Jacobi-preconditioned CG.
pub struct StateSolver {
    mesh: TriMesh,
    dofs: DofMap,
    matrix: SparseSpd,
    mg: Option<crate::fem::multigrid::MgHierarchy>,
    /// Relative residual tolerance of the linear solves.
    pub tol: f64,
}

/// Below this many interior DOFs the CG path is fast enough.
const MG_MIN_DOFS: usize = 60_000;

impl StateSolver {
    pub fn new(mesh: &TriMesh, coeffs: &EllipticCoeffs) -> Result<StateSolver> {
        let dofs = DofMap::new(mesh);
        let matrix = assemble_interior(mesh, coeffs, &dofs)?;
        let mg = if dofs.n_dofs() >= MG_MIN_DOFS {
            crate::fem::multigrid::MgHierarchy::build(mesh, &dofs, &matrix, &mut |m, d| {
                assemble_interior(m, coeffs, d)
            })?
        } else {
            None
        };
        Ok(StateSolver {
            mesh: mesh.clone(),
            dofs,
            matrix,
            mg,
            tol: 1e-12,
        })
    }

    /// True when solves go through the geometric V-cycle path.
    pub fn uses_multigrid(&self) -> bool {
        self.mg.is_some()
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    pub fn matrix(&self) -> &SparseSpd {
        &self.matrix
    }

    pub fn p0_load(&self, u: &P0Field) -> Vec<f64> {
        p0_load_with(&self.mesh, &self.dofs, u)
    }

    pub fn func_load(&self, f: &FuncSpec) -> Vec<f64> {
        func_load_with(&self.mesh, &self.dofs, f)
    }

    /// `(M y)_i = integral y phi_i` over interior i, exact for P1 y.
    pub fn mass_apply(&self, y: &P1Field) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs.n_dofs()];
        let yv = y.values();
        for (t, &[a, b, c]) in self.mesh.triangles().iter().enumerate() {
            let area = self.mesh.area(t);
            let (ya, yb, yc) = (yv[a], yv[b], yv[c]);
            let contrib = |yi: f64| area / 12.0 * (2.0 * yi + (ya + yb + yc) - yi);
            for (&v, yi) in [a, b, c].iter().zip([ya, yb, yc]) {
                if let Some(i) = self.dofs.interior_index(v) {
                    out[i] += contrib(yi);
                }
            }
        }
        out
    }

    /// Solve the reduced system for an interior load, optionally warm-started
    /// from a previous solution. Returns the P1 field (zero on the boundary)
    /// and the interior coefficients for future warm starts.
    pub fn solve_load(&self, load: &[f64], warm: Option<&[f64]>) -> Result<(P1Field, Vec<f64>)> {
        let out = match &self.mg {
            Some(mg) => mg.solve(&self.matrix, load, warm, self.tol)?,
            None => self
                .matrix
                .solve_pcg(load, warm, self.tol, self.matrix.default_cap())?,
        };
        let mut field = P1Field::zeros(&self.mesh);
        for (dof, &v) in out.x.iter().enumerate() {
            field.values_mut()[self.dofs.vertex(dof)] = v;
        }
        Ok((field, out.x))
    }

    /// Discrete state `y_h` with `a(y_h, v) = (u + f, v)`.
    pub fn solve_state(&self, u: &P0Field, f: &FuncSpec) -> Result<P1Field> {
        let mut load = self.p0_load(u);
        let fl = self.func_load(f);
        for (l, fl) in load.iter_mut().zip(fl) {
            *l += fl;
        }
        Ok(self.solve_load(&load, None)?.0)
    }

    /// Discrete adjoint `phi_h` with `a(phi_h, v) = (y - y_d, v)`.
    pub fn solve_adjoint(&self, y: &P1Field, yd: &FuncSpec) -> Result<P1Field> {
        let mut rhs = self.mass_apply(y);
        let ydl = self.func_load(yd);
        for (r, d) in rhs.iter_mut().zip(ydl) {
            *r -= d;
        }
        Ok(self.solve_load(&rhs, None)?.0)
    }
}

/// One-shot state solve `a(y_h, v) = (u + f, v)` with Dirichlet elimination.
pub fn solve_state(mesh: &TriMesh, coeffs: &EllipticCoeffs, u: &P0Field, f: &FuncSpec) -> Result<P1Field> {
    if !mesh.same_mesh(u.mesh()) {
        return Err(Error::MeshMismatch("solve_state".into()));
    }
    StateSolver::new(mesh, coeffs)?.solve_state(u, f)
}

/// One-shot adjoint solve `a(phi_h, v) = (y - y_d, v)`.
pub fn solve_adjoint(mesh: &TriMesh, coeffs: &EllipticCoeffs, y: &P1Field, yd: &FuncSpec) -> Result<P1Field> {
    if !mesh.same_mesh(y.mesh()) {
        return Err(Error::MeshMismatch("solve_adjoint".into()));
    }
    StateSolver::new(mesh, coeffs)?.solve_adjoint(y, yd)
}

/// `integral (y - y_d)^2` by the edge-midpoint rule (exact for the P1 part).
pub fn tracking_term_sq(y: &P1Field, yd: &FuncSpec) -> f64 {
    let mesh = y.mesh();
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let coords = mesh.tri_coords(t);
        let area = mesh.area(t);
        for &(l, w) in EDGE_MIDPOINT.points {
            let [x, yy] = bary_to_xy(&coords, l);
            let d = y.eval_bary(t, l) - yd.eval(x, yy);
            acc += w * area * d * d;
        }
    }
    acc
}
