//! Continuous piecewise-linear and piecewise-constant fields, with exact
//! Gram-matrix L2 pairings for the P1xP1, P0xP0 and P1xP0 combinations.

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Continuous piecewise-linear scalar field: one coefficient per vertex.
#[derive(Clone, Debug)]
pub struct P1Field {
    mesh: TriMesh,
    values: Vec<f64>,
}

/// Piecewise-constant scalar field: one value per triangle.
#[derive(Clone, Debug)]
pub struct P0Field {
    mesh: TriMesh,
    values: Vec<f64>,
}

impl P1Field {
    pub fn zeros(mesh: &TriMesh) -> P1Field {
        P1Field {
            mesh: mesh.clone(),
            values: vec![0.0; mesh.n_vertices()],
        }
    }

    pub fn from_values(mesh: &TriMesh, values: Vec<f64>) -> P1Field {
        assert_eq!(values.len(), mesh.n_vertices());
        P1Field { mesh: mesh.clone(), values }
    }

    /// Vertex interpolation of a function.
    pub fn from_fn(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> P1Field {
        let values = mesh.vertices().iter().map(|&[x, y]| f(x, y)).collect();
        P1Field { mesh: mesh.clone(), values }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at a vertex.
    pub fn at_vertex(&self, v: usize) -> f64 {
        self.values[v]
    }

    /// Evaluate at a point of triangle `t` given barycentric coordinates.
    pub fn eval_bary(&self, t: usize, l: [f64; 3]) -> f64 {
        let [a, b, c] = self.mesh.triangles()[t];
        l[0] * self.values[a] + l[1] * self.values[b] + l[2] * self.values[c]
    }

    /// Pointwise evaluation via mesh point location (clamped to the domain).
    pub fn eval_at(&self, x: f64, y: f64) -> f64 {
        let t = self.mesh.locate(x, y).unwrap_or(0);
        let coords = self.mesh.tri_coords(t);
        let [a, b, c] = coords;
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((b[0] - x) * (c[1] - y) - (c[0] - x) * (b[1] - y)) / det;
        let l2 = ((c[0] - x) * (a[1] - y) - (a[0] - x) * (c[1] - y)) / det;
        self.eval_bary(t, [l1, l2, 1.0 - l1 - l2])
    }

    pub fn l2_norm(&self) -> f64 {
        l2_inner_p1(self, self).expect("same mesh").sqrt()
    }

    /// H1 seminorm: the gradient is constant per element.
    pub fn h1_seminorm(&self) -> f64 {
        let tris = self.mesh.triangles();
        let mut acc = 0.0;
        for t in 0..tris.len() {
            let geo = self.mesh.geometry(t);
            let [a, b, c] = tris[t];
            let gx = self.values[a] * geo.grads[0][0]
                + self.values[b] * geo.grads[1][0]
                + self.values[c] * geo.grads[2][0];
            let gy = self.values[a] * geo.grads[0][1]
                + self.values[b] * geo.grads[1][1]
                + self.values[c] * geo.grads[2][1];
            acc += geo.area * (gx * gx + gy * gy);
        }
        acc.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl P0Field {
    pub fn zeros(mesh: &TriMesh) -> P0Field {
        P0Field {
            mesh: mesh.clone(),
            values: vec![0.0; mesh.n_triangles()],
        }
    }

    pub fn constant(mesh: &TriMesh, c: f64) -> P0Field {
        P0Field {
            mesh: mesh.clone(),
            values: vec![c; mesh.n_triangles()],
        }
    }

    pub fn from_values(mesh: &TriMesh, values: Vec<f64>) -> P0Field {
        assert_eq!(values.len(), mesh.n_triangles());
        P0Field { mesh: mesh.clone(), values }
    }

    /// Barycenter sampling of a function (not the element mean).
    pub fn from_fn_barycenter(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> P0Field {
        let values = (0..mesh.n_triangles())
            .map(|t| {
                let [x, y] = mesh.barycenter(t);
                f(x, y)
            })
            .collect();
        P0Field { mesh: mesh.clone(), values }
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn l2_norm(&self) -> f64 {
        l2_inner_p0(self, self).expect("same mesh").sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        let m = &self.mesh;
        (0..m.n_triangles()).map(|t| m.area(t) * self.values[t].abs()).sum()
    }

    /// Elementwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> P0Field {
        P0Field {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn check_same(a: &TriMesh, b: &TriMesh, what: &str) -> Result<()> {
    if a.same_mesh(b) {
        Ok(())
    } else {
        Err(Error::MeshMismatch(format!(
            "{what}: fields live on meshes {} and {}",
            a.id(),
            b.id()
        )))
    }
}

/// Per-element mean of a P1 field: `(1/|T|) integral_T y`, i.e. the
/// arithmetic mean of the three vertex values.
pub fn element_average(y: &P1Field) -> P0Field {
    let mesh = y.mesh().clone();
    let values = mesh
        .triangles()
        .iter()
        .map(|&[a, b, c]| (y.values[a] + y.values[b] + y.values[c]) / 3.0)
        .collect();
    P0Field { mesh, values }
}

/// Exact `(p, q)_{L2}` for two P1 fields on the same mesh.
pub fn l2_inner_p1(p: &P1Field, q: &P1Field) -> Result<f64> {
    check_same(p.mesh(), q.mesh(), "l2_inner_p1")?;
    let mesh = p.mesh();
    let mut acc = 0.0;
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        let (p1, p2, p3) = (p.values[a], p.values[b], p.values[c]);
        let (q1, q2, q3) = (q.values[a], q.values[b], q.values[c]);
        let sum_pq = p1 * q1 + p2 * q2 + p3 * q3;
        let cross = (p1 + p2 + p3) * (q1 + q2 + q3) - sum_pq;
        acc += mesh.area(t) / 12.0 * (2.0 * sum_pq + cross);
    }
    Ok(acc)
}

/// Exact `(u, v)_{L2}` for two P0 fields on the same mesh.
pub fn l2_inner_p0(u: &P0Field, v: &P0Field) -> Result<f64> {
    check_same(u.mesh(), v.mesh(), "l2_inner_p0")?;
    let mesh = u.mesh();
    Ok((0..mesh.n_triangles())
        .map(|t| mesh.area(t) * u.values[t] * v.values[t])
        .sum())
}

/// Exact `(p, u)_{L2}` for a P1 and a P0 field on the same mesh.
pub fn l2_inner_p1_p0(p: &P1Field, u: &P0Field) -> Result<f64> {
    check_same(p.mesh(), u.mesh(), "l2_inner_p1_p0")?;
    let mesh = p.mesh();
    let mut acc = 0.0;
    for (t, &[a, b, c]) in mesh.triangles().iter().enumerate() {
        acc += mesh.area(t) / 3.0 * (p.values[a] + p.values[b] + p.values[c]) * u.values[t];
    }
    Ok(acc)
}
