//! Geometric multigrid on the refinement lineage.
//!
//! Meshes produced by `refine_uniform` carry their parents, so the P1 spaces
//! are nested and the prolongation is trivial: inherited vertices copy their
//! coarse value, edge midpoints average their two endpoints. Each coarse
//! level's operator is re-assembled on its own mesh; V(2,2) cycles with
//! damped Jacobi smoothing iterate the finest system to the same
//! relative-residual contract as the CG path. Engaged only when the fine
//! system is large enough that Jacobi-PCG iteration counts hurt.

use crate::error::{Error, Result};
use crate::fem::assemble::DofMap;
use crate::fem::sparse::{CgOutcome, SparseSpd};
use crate::mesh::TriMesh;

/// Interior-DOF prolongation from one coarse level to the next finer one.
struct ProlongMap {
    /// Per fine DOF: up to two (coarse DOF, weight) pairs; u32::MAX = unused.
    entries: Vec<[(u32, f64); 2]>,
    n_coarse: usize,
}

impl ProlongMap {
    fn build(fine_mesh: &TriMesh, fine_dofs: &DofMap, coarse_dofs: &DofMap) -> ProlongMap {
        let none = (u32::MAX, 0.0);
        let mut entries = vec![[none; 2]; fine_dofs.n_dofs()];
        for fd in 0..fine_dofs.n_dofs() {
            let v = fine_dofs.vertex(fd);
            match fine_mesh.midpoint_parents(v) {
                None => {
                    // inherited vertex: same index on the parent mesh
                    if let Some(cd) = coarse_dofs.interior_index(v) {
                        entries[fd][0] = (cd as u32, 1.0);
                    }
                }
                Some([a, b]) => {
                    if let Some(cd) = coarse_dofs.interior_index(a) {
                        entries[fd][0] = (cd as u32, 0.5);
                    }
                    if let Some(cd) = coarse_dofs.interior_index(b) {
                        entries[fd][1] = (cd as u32, 0.5);
                    }
                }
            }
        }
        ProlongMap { entries, n_coarse: coarse_dofs.n_dofs() }
    }

    fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        for (fd, pair) in self.entries.iter().enumerate() {
            let mut acc = 0.0;
            for &(c, w) in pair {
                if c != u32::MAX {
                    acc += w * coarse[c as usize];
                }
            }
            fine[fd] += acc;
        }
    }

    fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        let mut coarse = vec![0.0; self.n_coarse];
        for (fd, pair) in self.entries.iter().enumerate() {
            for &(c, w) in pair {
                if c != u32::MAX {
                    coarse[c as usize] += w * fine[fd];
                }
            }
        }
        coarse
    }
}

struct MgLevel {
    matrix: SparseSpd,
    inv_diag: Vec<f64>,
    /// Prolongation from the next coarser level; None at the coarsest.
    prolong: Option<ProlongMap>,
}

/// Coarse part of the V-cycle hierarchy (the fine operator stays with the
/// caller), coarsest level first.
pub struct MgHierarchy {
    coarse: Vec<MgLevel>,
    /// From the finest coarse level up to the caller's fine space.
    fine_prolong: ProlongMap,
    fine_inv_diag: Vec<f64>,
}

const SMOOTH_SWEEPS: usize = 2;
const JACOBI_DAMPING: f64 = 0.8;
/// Don't coarsen below this many interior DOFs.
const MIN_COARSE_DOFS: usize = 50;
const MAX_CYCLES: usize = 200;

impl MgHierarchy {
    /// Walks the parent chain and assembles one operator per coarse level.
    /// Returns None when the mesh has no usable lineage.
    pub fn build(
        mesh: &TriMesh,
        fine_dofs: &DofMap,
        fine_matrix: &SparseSpd,
        assemble: &mut dyn FnMut(&TriMesh, &DofMap) -> Result<SparseSpd>,
    ) -> Result<Option<MgHierarchy>> {
        // chain[j] is the mesh j+1 refinement steps coarser than `mesh`.
        let mut chain: Vec<(TriMesh, DofMap)> = Vec::new();
        let mut cur = mesh.clone();
        while let Some(parent) = cur.parent().cloned() {
            let dofs = DofMap::new(&parent);
            if dofs.n_dofs() < MIN_COARSE_DOFS {
                break;
            }
            chain.push((parent.clone(), dofs));
            cur = parent;
        }
        if chain.is_empty() {
            return Ok(None);
        }

        let k = chain.len();
        let mut coarse: Vec<MgLevel> = Vec::with_capacity(k);
        for (coarse_mesh, coarse_dofs) in chain.iter().rev() {
            let matrix = assemble(coarse_mesh, coarse_dofs)?;
            let inv_diag = matrix.diag().iter().map(|&d| 1.0 / d).collect();
            coarse.push(MgLevel { matrix, inv_diag, prolong: None });
        }
        // coarse[i] corresponds to chain[k-1-i]; its prolongation comes from
        // coarse[i-1] = chain[k-i].
        for i in 1..k {
            let (fine_mesh, fine_dofs_i) = &chain[k - 1 - i];
            let (_, coarse_dofs_i) = &chain[k - i];
            coarse[i].prolong = Some(ProlongMap::build(fine_mesh, fine_dofs_i, coarse_dofs_i));
        }
        let fine_prolong = ProlongMap::build(mesh, fine_dofs, &chain[0].1);
        let fine_inv_diag = fine_matrix.diag().iter().map(|&d| 1.0 / d).collect();
        Ok(Some(MgHierarchy { coarse, fine_prolong, fine_inv_diag }))
    }

    pub fn n_levels(&self) -> usize {
        self.coarse.len() + 1
    }

    fn smooth(matrix: &SparseSpd, inv_diag: &[f64], b: &[f64], x: &mut [f64], work: &mut [f64]) {
        for _ in 0..SMOOTH_SWEEPS {
            matrix.matvec(x, work);
            for i in 0..x.len() {
                x[i] += JACOBI_DAMPING * inv_diag[i] * (b[i] - work[i]);
            }
        }
    }

    fn vcycle_coarse(&self, li: usize, b: &[f64]) -> Result<Vec<f64>> {
        let level = &self.coarse[li];
        let n = level.matrix.n();
        if li == 0 {
            let out = level.matrix.solve_pcg(b, None, 1e-13, 4 * n + 100)?;
            return Ok(out.x);
        }
        let mut x = vec![0.0; n];
        let mut work = vec![0.0; n];
        Self::smooth(&level.matrix, &level.inv_diag, b, &mut x, &mut work);
        level.matrix.matvec(&x, &mut work);
        let residual: Vec<f64> = b.iter().zip(&work).map(|(bi, wi)| bi - wi).collect();
        let prolong = level.prolong.as_ref().expect("non-coarsest level has a prolongation");
        let coarse_b = prolong.restrict(&residual);
        let coarse_e = self.vcycle_coarse(li - 1, &coarse_b)?;
        prolong.prolong_add(&coarse_e, &mut x);
        Self::smooth(&level.matrix, &level.inv_diag, b, &mut x, &mut work);
        Ok(x)
    }

    fn vcycle_fine(&self, a: &SparseSpd, b: &[f64]) -> Result<Vec<f64>> {
        let n = a.n();
        let mut x = vec![0.0; n];
        let mut work = vec![0.0; n];
        Self::smooth(a, &self.fine_inv_diag, b, &mut x, &mut work);
        a.matvec(&x, &mut work);
        let residual: Vec<f64> = b.iter().zip(&work).map(|(bi, wi)| bi - wi).collect();
        let coarse_b = self.fine_prolong.restrict(&residual);
        let coarse_e = self.vcycle_coarse(self.coarse.len() - 1, &coarse_b)?;
        self.fine_prolong.prolong_add(&coarse_e, &mut x);
        Self::smooth(a, &self.fine_inv_diag, b, &mut x, &mut work);
        Ok(x)
    }

    /// Iterates V-cycles to `||Ax - b|| <= tol ||b||` with the same
    /// attainability-floor acceptance as the CG path.
    pub fn solve(&self, a: &SparseSpd, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<CgOutcome> {
        let n = a.n();
        let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_b == 0.0 {
            return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
        }
        let mut x = match x0 {
            Some(x0) => x0.to_vec(),
            None => vec![0.0; n],
        };
        let mut r = vec![0.0; n];
        a.matvec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let mut r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut best_norm = r_norm;
        let mut best_x = x.clone();
        let mut since_improvement = 0usize;
        let floor = 1e-6 * norm_b;

        for cycle in 0..MAX_CYCLES {
            if r_norm <= tol * norm_b {
                return Ok(CgOutcome { x, iterations: cycle, relative_residual: r_norm / norm_b });
            }
            if since_improvement >= 6 && best_norm <= floor {
                return Ok(CgOutcome {
                    x: best_x,
                    iterations: cycle,
                    relative_residual: best_norm / norm_b,
                });
            }
            let e = self.vcycle_fine(a, &r)?;
            for i in 0..n {
                x[i] += e[i];
            }
            a.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r_norm < 0.9 * best_norm {
                best_norm = r_norm;
                best_x.copy_from_slice(&x);
                since_improvement = 0;
            } else {
                if r_norm < best_norm {
                    best_norm = r_norm;
                    best_x.copy_from_slice(&x);
                }
                since_improvement += 1;
            }
        }
        if best_norm <= tol * norm_b || best_norm <= floor {
            return Ok(CgOutcome {
                x: best_x,
                iterations: MAX_CYCLES,
                relative_residual: best_norm / norm_b,
            });
        }
        Err(Error::LinearSolveDiverged { residual: best_norm / norm_b, iterations: MAX_CYCLES })
    }
}
