//! Refinement-ladder studies of the control error against a fine reference.
//!
//! Each ladder level halves the mesh size; the reference solution is the
//! same deterministic solver run a fixed number of extra refinements below
//! the finest level. Controls are piecewise constant, so coarse fields
//! prolong exactly onto descendant meshes and inter-level L2 errors carry
//! no interpolation pollution. The experimental order of convergence of two
//! consecutive levels is `[log e1 - log e2] / [log h1 - log h2]`.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::P0Field;
use crate::mesh::TriMesh;
use crate::ocp::{self, ProblemSpec, SolveOptions, SolveReport};

/// Experimental order of convergence between consecutive levels.
/// `None` when a value is missing or nonpositive (reported as an empty cell).
pub fn eoc(e1: f64, e2: f64, h1: f64, h2: f64) -> Option<f64> {
    if e1 > 0.0 && e2 > 0.0 && h1 > 0.0 && h2 > 0.0 && h1 != h2 {
        Some((e1.ln() - e2.ln()) / (h1.ln() - h2.ln()))
    } else {
        None
    }
}

/// Prolongs a P0 field onto a refinement descendant of its mesh
/// (constant on children).
pub fn transfer_p0(coarse: &P0Field, fine_mesh: &TriMesh) -> Result<P0Field> {
    let coarse_mesh = coarse.mesh();
    let mut values = vec![0.0; fine_mesh.n_triangles()];
    for t in 0..fine_mesh.n_triangles() {
        let mut idx = t;
        let mut m = fine_mesh.clone();
        while !m.same_mesh(coarse_mesh) {
            idx = m.parent_of(idx).ok_or(Error::NotSameLineage)?;
            m = m.parent().ok_or(Error::NotSameLineage)?.clone();
        }
        values[t] = coarse.values()[idx];
    }
    Ok(P0Field::from_values(fine_mesh, values))
}

/// `||u_coarse - u_fine||_{L2}` computed exactly on the fine mesh.
pub fn cross_level_l2_error(coarse: &P0Field, fine: &P0Field) -> Result<f64> {
    let prolonged = transfer_p0(coarse, fine.mesh())?;
    Ok(ocp::l2_dist(&prolonged, fine))
}

/// Ladder study configuration.
#[derive(Clone, Debug)]
pub struct LadderConfig {
    pub base_n: usize,
    /// Number of ladder levels (>= 3).
    pub levels: usize,
    /// Extra refinements of the finest level for the reference solve (>= 1).
    pub ref_extra: usize,
    pub problem: ProblemSpec,
    pub options: SolveOptions,
    /// Values of q to sweep; each runs its own ladder.
    pub q_values: Vec<f64>,
    /// Worker count for concurrent (q, level) solves.
    pub jobs: usize,
    /// When set, the table, per-level reports, plot data and the run
    /// manifest are persisted here.
    pub output_dir: Option<PathBuf>,
}

impl LadderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 3 {
            return Err(Error::TooFewLevels { min: 3, got: self.levels });
        }
        if self.ref_extra < 1 {
            return Err(Error::InvalidParameter("ref_extra must be >= 1".into()));
        }
        if self.base_n == 0 {
            return Err(Error::InvalidParameter("base_n must be >= 1".into()));
        }
        if self.q_values.is_empty() {
            return Err(Error::InvalidParameter("q sweep must not be empty".into()));
        }
        Ok(())
    }

    /// Default exponent sweep of the study harness.
    pub fn default_q_sweep() -> Vec<f64> {
        vec![0.5, 0.41, 0.38, 0.31]
    }
}

/// One row of the study table.
#[derive(Clone, Debug)]
pub struct EocRow {
    pub q: f64,
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub error_l2: Option<f64>,
    pub eoc: Option<f64>,
    pub outer_iters: Option<usize>,
    pub kkt_residual: Option<f64>,
    pub support_fraction: Option<f64>,
}

/// Per-refinement-level errors and pairwise EOC values, grouped by q.
#[derive(Clone, Debug, Default)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
}

impl EocTable {
    pub fn rows_for_q(&self, q: f64) -> Vec<&EocRow> {
        self.rows.iter().filter(|r| r.q == q).collect()
    }

    /// Mean EOC over the last `k` level pairs of one q, when all defined.
    pub fn mean_eoc_last(&self, q: f64, k: usize) -> Option<f64> {
        let rows = self.rows_for_q(q);
        let cells: Vec<f64> = rows.iter().filter_map(|r| r.eoc).collect();
        if cells.len() < k {
            return None;
        }
        Some(cells[cells.len() - k..].iter().sum::<f64>() / k as f64)
    }

    pub fn errors_strictly_decreasing(&self, q: f64) -> bool {
        let errs: Vec<f64> = self.rows_for_q(q).iter().filter_map(|r| r.error_l2).collect();
        errs.len() >= 2 && errs.windows(2).all(|w| w[1] < w[0])
    }
}

/// Runs the full (q, level) sweep: solves every level and the per-q
/// reference with identical options and zero initial control, fills the
/// table, and persists reports and the run manifest when an output
/// directory is configured. A failed level marks its row and the sweep
/// continues.
pub fn run_ladder(cfg: &LadderConfig) -> Result<EocTable> {
    cfg.validate()?;
    cfg.problem.validate()?;
    cfg.options.validate()?;

    // Shared mesh chain: levels 0..L-1, then ref_extra more for the reference.
    let mut meshes = vec![TriMesh::uniform_square(cfg.base_n)?];
    for _ in 1..(cfg.levels + cfg.ref_extra) {
        meshes.push(meshes.last().unwrap().refine_uniform());
    }
    let ref_idx = cfg.levels - 1 + cfg.ref_extra;

    // Task list: per q, all ladder levels plus the reference level.
    let mut tasks: Vec<(usize, usize)> = Vec::new();
    for qi in 0..cfg.q_values.len() {
        for level in 0..cfg.levels {
            tasks.push((qi, level));
        }
        tasks.push((qi, ref_idx));
    }

    let solve_one = |&(qi, level): &(usize, usize)| -> (usize, usize, Result<SolveReport>) {
        let mut problem = cfg.problem.clone();
        problem.params.q = cfg.q_values[qi];
        let mut options = cfg.options.clone();
        options.initial_control = None; // ladder always starts from zero
        let report = ocp::solve(&problem, &meshes[level], &options);
        (qi, level, report)
    };

    let results: Vec<(usize, usize, Result<SolveReport>)> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(solve_one).collect())
    } else {
        tasks.iter().map(solve_one).collect()
    };

    // Deterministic merge by (q, level).
    let mut table = EocTable::default();
    let get = |qi: usize, level: usize| -> Option<&SolveReport> {
        results
            .iter()
            .find(|(a, b, _)| *a == qi && *b == level)
            .and_then(|(_, _, r)| r.as_ref().ok())
    };

    for (qi, &q) in cfg.q_values.iter().enumerate() {
        let reference = get(qi, ref_idx);
        let mut prev: Option<(f64, f64)> = None; // (h, error)
        for level in 0..cfg.levels {
            let mesh = &meshes[level];
            let h = mesh.mesh_size();
            let mut row = EocRow {
                q,
                level,
                n: cfg.base_n << level,
                h,
                error_l2: None,
                eoc: None,
                outer_iters: None,
                kkt_residual: None,
                support_fraction: None,
            };
            if let Some(report) = get(qi, level) {
                row.outer_iters = Some(report.outer_iterations);
                row.kkt_residual = Some(report.kkt_residual);
                let mut problem = cfg.problem.clone();
                problem.params.q = q;
                let diag = ocp::structure_diagnostics(report, &problem.params);
                row.support_fraction = Some(diag.support_fraction);
                if let Some(reference) = reference {
                    if let Ok(err) = cross_level_l2_error(&report.u, &reference.u) {
                        row.error_l2 = Some(err);
                        if let Some((h_prev, e_prev)) = prev {
                            row.eoc = eoc(e_prev, err, h_prev, h);
                        }
                        prev = Some((h, err));
                    }
                }
            } else {
                prev = None;
            }
            table.rows.push(row);
        }
    }

    if cfg.output_dir.is_some() {
        persist(cfg, &meshes, ref_idx, &results, &table)?;
    }
    Ok(table)
}

fn persist(
    cfg: &LadderConfig,
    meshes: &[TriMesh],
    ref_idx: usize,
    results: &[(usize, usize, Result<SolveReport>)],
    table: &EocTable,
) -> Result<()> {
    let dir = cfg.output_dir.as_ref().unwrap();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("ladder_manifest.toml"), crate::io::ladder_manifest(cfg))?;
    std::fs::write(dir.join("eoc_table.csv"), crate::io::eoc_table_csv(table))?;
    std::fs::write(dir.join("eoc_table.txt"), crate::io::eoc_table_human(table))?;
    for (qi, level, result) in results {
        if let Ok(report) = result {
            let q = cfg.q_values[*qi];
            let tag = if *level == ref_idx {
                format!("q{q}_reference")
            } else {
                format!("q{q}_level{level}")
            };
            std::fs::write(
                dir.join(format!("report_{tag}.csv")),
                crate::io::report_csv(&meshes[*level], report),
            )?;
        }
    }
    // Plot-ready data per q: -log h vs -log error.
    for &q in &cfg.q_values {
        let mut out = String::from("# -log(h)  -log(error_l2)\n");
        for row in table.rows_for_q(q) {
            if let Some(e) = row.error_l2 {
                if e > 0.0 {
                    out.push_str(&format!("{:.12} {:.12}\n", -row.h.ln(), -e.ln()));
                }
            }
        }
        std::fs::write(dir.join(format!("plot_q{q}.dat")), out)?;
    }
    Ok(())
}
