//! Uniform conforming triangulations of axis-aligned rectangles.
//!
//! Meshes are built by splitting every cell of a structured grid along the
//! same diagonal (two right triangles per cell) and refined by edge-midpoint
//! quadrisection, so the mesh size halves exactly per level and all elements
//! stay congruent. A mesh keeps a handle to its parent, which gives every
//! refined mesh a full refinement lineage for inter-level error evaluation.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug)]
struct MeshData {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    /// Refinement generation, 0 for a freshly built mesh.
    level: usize,
    /// Bounding rectangle [x0, x1, y0, y1].
    bounds: [f64; 4],
    /// parent_of[t] = index of the parent triangle one level up.
    parent_of: Vec<usize>,
    /// For refined meshes: the two endpoint vertices of each appended edge
    /// midpoint, indexed from the first new vertex.
    midpoint_parents: Vec<[usize; 2]>,
    /// Vertex count of the parent mesh (0 for built meshes).
    parent_vertices: usize,
    parent: Option<TriMesh>,
    id: u64,
}

/// Immutable 2D conforming triangulation with boundary tags and lineage.
///
/// Cloning is cheap (shared storage) and the mesh is safe to read from many
/// threads at once.
#[derive(Clone, Debug)]
pub struct TriMesh {
    data: Arc<MeshData>,
}

impl TriMesh {
    /// Uniform criss-cross mesh of the unit square with `n` cells per side:
    /// `(n+1)^2` vertices and `2 n^2` right triangles, mesh size `sqrt(2)/n`.
    pub fn uniform_square(n: usize) -> Result<TriMesh> {
        TriMesh::uniform_rect(n, n, 1.0, 1.0)
    }

    /// Uniform criss-cross mesh of the rectangle `(0, width) x (0, height)`.
    ///
    /// Vertices are ordered lexicographically by (y, x); every cell is split
    /// along the same diagonal and both triangles are oriented CCW.
    pub fn uniform_rect(nx: usize, ny: usize, width: f64, height: f64) -> Result<TriMesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter(
                "mesh resolution must be at least 1 cell per side".into(),
            ));
        }
        if !(width > 0.0) || !(height > 0.0) {
            return Err(Error::InvalidParameter(
                "mesh rectangle must have positive extent".into(),
            ));
        }

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx { width } else { i as f64 * width / nx as f64 };
                let y = if j == ny { height } else { j as f64 * height / ny as f64 };
                vertices.push([x, y]);
            }
        }

        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let v00 = vid(i, j);
                let v10 = vid(i + 1, j);
                let v01 = vid(i, j + 1);
                let v11 = vid(i + 1, j + 1);
                // Consistent "\" diagonal from v00 to v11, both children CCW.
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }

        let boundary = (0..=ny)
            .flat_map(|j| (0..=nx).map(move |i| i == 0 || i == nx || j == 0 || j == ny))
            .collect();

        let mesh = TriMesh {
            data: Arc::new(MeshData {
                vertices,
                triangles,
                boundary,
                level: 0,
                bounds: [0.0, width, 0.0, height],
                parent_of: Vec::new(),
                midpoint_parents: Vec::new(),
                parent_vertices: 0,
                parent: None,
                id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            }),
        };
        debug_assert!(mesh.triangles().iter().all(|&t| mesh.signed_area(t) > 0.0));
        Ok(mesh)
    }

    /// Splits every triangle into 4 congruent children via edge midpoints.
    /// The mesh size halves exactly; children of triangle `t` are
    /// `4t .. 4t+4` and the parent map is retained.
    pub fn refine_uniform(&self) -> TriMesh {
        let d = &self.data;
        let mut vertices = d.vertices.clone();
        let mut midpoint_parents: Vec<[usize; 2]> = Vec::new();
        let mut midpoint = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let pa = vertices[a];
                let pb = vertices[b];
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                midpoint_parents.push([key.0, key.1]);
                vertices.len() - 1
            })
        };

        let mut triangles = Vec::with_capacity(4 * d.triangles.len());
        let mut parent_of = Vec::with_capacity(4 * d.triangles.len());
        for (t, &[a, b, c]) in d.triangles.iter().enumerate() {
            let mab = mid(a, b, &mut vertices);
            let mbc = mid(b, c, &mut vertices);
            let mca = mid(c, a, &mut vertices);
            triangles.push([a, mab, mca]);
            triangles.push([mab, b, mbc]);
            triangles.push([mca, mbc, c]);
            triangles.push([mab, mbc, mca]);
            parent_of.extend_from_slice(&[t, t, t, t]);
        }

        let [x0, x1, y0, y1] = d.bounds;
        let tol = 10.0 * f64::EPSILON * (x1 - x0).max(y1 - y0).max(1.0);
        let boundary = vertices
            .iter()
            .map(|&[x, y]| {
                (x - x0).abs() <= tol || (x1 - x).abs() <= tol || (y - y0).abs() <= tol || (y1 - y).abs() <= tol
            })
            .collect();

        TriMesh {
            data: Arc::new(MeshData {
                vertices,
                triangles,
                boundary,
                level: d.level + 1,
                bounds: d.bounds,
                parent_of,
                midpoint_parents,
                parent_vertices: d.vertices.len(),
                parent: Some(self.clone()),
                id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            }),
        }
    }

    /// Maximum element diameter `h = max_T diam(T)`.
    pub fn mesh_size(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| self.diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn n_vertices(&self) -> usize {
        self.data.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.data.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.data.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.data.triangles
    }

    /// Dirichlet marker per vertex.
    pub fn is_boundary(&self, v: usize) -> bool {
        self.data.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.data.boundary
    }

    pub fn level(&self) -> usize {
        self.data.level
    }

    pub fn id(&self) -> u64 {
        self.data.id
    }

    pub fn parent(&self) -> Option<&TriMesh> {
        self.data.parent.as_ref()
    }

    /// Parent triangle index one level up (refined meshes only).
    pub fn parent_of(&self, t: usize) -> Option<usize> {
        self.data.parent_of.get(t).copied()
    }

    /// For a refined mesh: the two parent-mesh endpoints of vertex `v` when
    /// it is an appended edge midpoint, `None` for inherited vertices.
    pub fn midpoint_parents(&self, v: usize) -> Option<[usize; 2]> {
        if self.data.parent.is_some() && v >= self.data.parent_vertices {
            self.data.midpoint_parents.get(v - self.data.parent_vertices).copied()
        } else {
            None
        }
    }

    /// Vertex count of the parent mesh (refined meshes only).
    pub fn parent_vertex_count(&self) -> Option<usize> {
        self.data.parent.as_ref().map(|_| self.data.parent_vertices)
    }

    pub fn same_mesh(&self, other: &TriMesh) -> bool {
        self.data.id == other.data.id
    }

    /// Rectangle `[x0, x1, y0, y1]` the mesh covers.
    pub fn bounds(&self) -> [f64; 4] {
        self.data.bounds
    }

    pub fn domain_area(&self) -> f64 {
        let [x0, x1, y0, y1] = self.data.bounds;
        (x1 - x0) * (y1 - y0)
    }

    pub fn tri_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.data.triangles[t];
        [
            self.data.vertices[a],
            self.data.vertices[b],
            self.data.vertices[c],
        ]
    }

    fn signed_area(&self, [a, b, c]: [usize; 3]) -> f64 {
        let pa = self.data.vertices[a];
        let pb = self.data.vertices[b];
        let pc = self.data.vertices[c];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(self.data.triangles[t])
    }

    /// Longest edge of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [pa, pb, pc] = self.tri_coords(t);
        edge_len(pa, pb).max(edge_len(pb, pc)).max(edge_len(pc, pa))
    }

    /// Diameter of the inscribed circle, `4 |T| / perimeter`.
    pub fn incircle_diameter(&self, t: usize) -> f64 {
        let [pa, pb, pc] = self.tri_coords(t);
        let per = edge_len(pa, pb) + edge_len(pb, pc) + edge_len(pc, pa);
        4.0 * self.area(t) / per
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [pa, pb, pc] = self.tri_coords(t);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    /// Area and constant hat-function gradients of triangle `t`.
    pub fn geometry(&self, t: usize) -> TriGeometry {
        let [pa, pb, pc] = self.tri_coords(t);
        let area = self.area(t);
        let s = 1.0 / (2.0 * area);
        TriGeometry {
            area,
            grads: [
                [s * (pb[1] - pc[1]), s * (pc[0] - pb[0])],
                [s * (pc[1] - pa[1]), s * (pa[0] - pc[0])],
                [s * (pa[1] - pb[1]), s * (pb[0] - pa[0])],
            ],
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Index of a triangle containing the point, or None outside the domain.
    /// Located on the root grid, then walked down the refinement lineage
    /// through the geometric children.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let [x0, x1, y0, y1] = self.data.bounds;
        let tol = 1e-12 * (x1 - x0).max(y1 - y0);
        if x < x0 - tol || x > x1 + tol || y < y0 - tol || y > y1 + tol {
            return None;
        }
        // walk to the root
        let mut lineage = vec![self.clone()];
        while let Some(p) = lineage.last().unwrap().parent().cloned() {
            lineage.push(p);
        }
        let root = lineage.last().unwrap();
        // root is a built uniform grid: vertices lexicographic by (y, x)
        let verts_per_row = {
            // nx+1 = count of vertices with the smallest y
            let y_first = root.data.vertices[0][1];
            root.data
                .vertices
                .iter()
                .take_while(|v| (v[1] - y_first).abs() <= tol)
                .count()
        };
        let nx = verts_per_row - 1;
        let ny = root.n_vertices() / verts_per_row - 1;
        let fx = ((x - x0) / (x1 - x0) * nx as f64).floor().clamp(0.0, (nx - 1) as f64);
        let fy = ((y - y0) / (y1 - y0) * ny as f64).floor().clamp(0.0, (ny - 1) as f64);
        let (ci, cj) = (fx as usize, fy as usize);
        // cell-local coordinates pick the triangle across the "\" diagonal
        let lx = (x - x0) / (x1 - x0) * nx as f64 - ci as f64;
        let ly = (y - y0) / (y1 - y0) * ny as f64 - cj as f64;
        let mut t = 2 * (cj * nx + ci) + usize::from(ly > lx);
        // descend the lineage through containing children
        for mesh in lineage.iter().rev().skip(1) {
            let mut found = 4 * t;
            for child in 4 * t..4 * t + 4 {
                if mesh.contains_point(child, x, y, tol) {
                    found = child;
                    break;
                }
            }
            t = found;
        }
        Some(t)
    }

    fn contains_point(&self, t: usize, x: f64, y: f64, tol: f64) -> bool {
        let [a, b, c] = self.tri_coords(t);
        let sign = |p: [f64; 2], q: [f64; 2]| (q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]);
        sign(a, b) >= -tol && sign(b, c) >= -tol && sign(c, a) >= -tol
    }
}

/// Per-element geometry used by assembly and quadrature.
pub struct TriGeometry {
    pub area: f64,
    /// Gradient of the hat function of each local vertex (constant on T).
    pub grads: [[f64; 2]; 3],
}

fn edge_len(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}
