//! Solver for the discrete regularized sparse control problem.
//!
//! The cost splits into convex and concave parts; the outer loop freezes the
//! concave part's derivative `w = j(u)` elementwise and solves the resulting
//! convex L^1-sparse control problem (the auxiliary problem whose optimality
//! system the nonconvex problem shares). The inner solve is a semi-smooth
//! Newton iteration on the per-element projected soft-threshold equation:
//! active sets are re-identified each step and one linearized state+adjoint
//! pair is solved per step, with a damped fallback on stagnation.
//!
//! After each inner solve a jump-correction pass re-minimizes the scalar
//! objective per element at the current adjoint, so converged controls
//! satisfy the pointwise thresholding characterization: zero or past the
//! jump threshold (or clamped at a box bound).

use crate::error::{Error, Result};
use crate::fem::{element_average, EllipticCoeffs, P0Field, P1Field, StateSolver};
use crate::func::FuncSpec;
use crate::mesh::TriMesh;
use crate::scalar::{self, j_func, penalty_density, scalar_dc_argmin, soft_threshold, RegParams};

/// All model data of one problem instance.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub params: RegParams,
    pub y_d: FuncSpec,
    pub f: FuncSpec,
    pub coeffs: EllipticCoeffs,
}

impl ProblemSpec {
    /// The shipped example: -Laplace, y_d = 10 exp(-5 (x^2+y^2)), f = 0,
    /// alpha = 0.24, beta = 2e-4, q = 0.5, gamma = 16000, box [-0.8, 0.55].
    pub fn example_problem() -> ProblemSpec {
        ProblemSpec {
            params: RegParams::example_problem(),
            y_d: FuncSpec::example_target(),
            f: FuncSpec::Zero,
            coeffs: EllipticCoeffs::laplace(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()
    }
}

/// Inner solver selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMethod {
    /// Active-set steps at full length, damped only on stagnation.
    SemiSmoothNewton,
    /// Fixed-point iteration at the configured damping.
    Picard,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// L2 control-step tolerance of the outer loop.
    pub tol_outer: f64,
    /// Inner fixed-point residual tolerance (L2 over elements).
    pub tol_inner: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Step length in (0, 1]; the semi-smooth path starts at 1 regardless
    /// and uses this only as the Picard step.
    pub damping: f64,
    pub inner_method: InnerMethod,
    pub initial_control: Option<P0Field>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_outer: 1e-9,
            tol_inner: 1e-10,
            max_outer: 200,
            max_inner: 50,
            damping: 1.0,
            inner_method: InnerMethod::SemiSmoothNewton,
            initial_control: None,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_outer > 0.0 && self.tol_inner > 0.0) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "damping must be in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Converged fields, history and structural counters of one solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub u: P0Field,
    pub y: P1Field,
    pub phi: P1Field,
    pub w: P0Field,
    pub zeta: P0Field,
    pub lambda_a: P0Field,
    pub lambda_b: P0Field,
    pub cost_history: Vec<f64>,
    pub outer_iterations: usize,
    pub total_inner_iterations: usize,
    pub kkt_residual: f64,
    pub support_element_count: usize,
}

/// Discrete cost
/// `J(u) = 1/2 ||y(u) - y_d||^2 + alpha/2 ||u||^2 + beta sum_T |T| h^q(u_T)`,
/// with the tracking term by degree-2 quadrature and the penalty exact.
pub fn eval_cost(spec: &ProblemSpec, mesh: &TriMesh, u: &P0Field) -> Result<f64> {
    spec.validate()?;
    let mut ctx = SolveCtx::new(spec, mesh)?;
    let y = ctx.state(u)?;
    Ok(ctx.cost_given_state(u, &y))
}

/// Statistics of one inner solve.
#[derive(Clone, Debug, Default)]
pub struct InnerStats {
    pub iterations: usize,
    pub final_residual: f64,
    /// Active-set changes seen across the iteration.
    pub set_changes: usize,
}

/// Solves the auxiliary convex L^1 problem for a fixed linearization g_hat:
/// minimize `1/2||S u + y_f - y_d||^2 + alpha/2||u||^2 - beta (g_hat, u)
/// + beta delta_gamma ||u||_L1` over the box.
pub fn inner_solve_l1(
    spec: &ProblemSpec,
    mesh: &TriMesh,
    g_hat: &P0Field,
    u_start: &P0Field,
    opts: &SolveOptions,
) -> Result<P0Field> {
    spec.validate()?;
    opts.validate()?;
    let mut ctx = SolveCtx::new(spec, mesh)?;
    let (u, _, _, _) = ctx.inner_l1(g_hat, u_start, opts)?;
    Ok(u)
}

/// Outer DC loop: `w^k = j(u^k)` elementwise, then the convex inner solve,
/// then the per-element jump correction; stops when the control step, the
/// correction pass and the KKT residual have all settled.
pub fn solve(spec: &ProblemSpec, mesh: &TriMesh, opts: &SolveOptions) -> Result<SolveReport> {
    spec.validate()?;
    opts.validate()?;
    let p = spec.params;
    let mut ctx = SolveCtx::new(spec, mesh)?;

    let mut u = match &opts.initial_control {
        Some(u0) => {
            if !u0.mesh().same_mesh(mesh) {
                return Err(Error::MeshMismatch("initial control lives on another mesh".into()));
            }
            u0.map(|v| v.clamp(p.u_a, p.u_b))
        }
        None => P0Field::zeros(mesh),
    };

    let slack = 10.0 * opts.tol_inner;
    let mut y = ctx.state(&u)?;
    let mut cost = ctx.cost_given_state(&u, &y);
    let mut cost_history = vec![cost];
    let mut total_inner = 0;
    let mut outer = 0;
    let mut last_step = f64::INFINITY;

    // psi-improvements below this are not worth a correction flip.
    let flip_tol = 1e-13 * (1.0 + cost.abs());

    while outer < opts.max_outer {
        outer += 1;
        let w = u.map(|t| j_func(t, &p));
        let (u_inner, stats, y_inner, phibar) = ctx.inner_l1(&w, &u, opts)?;
        total_inner += stats.iterations;

        // Jump correction: per-element global minimization of the scalar
        // objective at the current adjoint averages.
        let mut u_new = u_inner.clone();
        let mut flips = 0usize;
        for t in 0..mesh.n_triangles() {
            let cand = scalar_dc_argmin(phibar.values()[t], &p);
            if cand != u_new.values()[t] {
                let old = scalar::scalar_objective(u_new.values()[t], phibar.values()[t], &p);
                let new = scalar::scalar_objective(cand, phibar.values()[t], &p);
                if new < old - flip_tol {
                    u_new.values_mut()[t] = cand;
                    flips += 1;
                }
            }
        }

        let step = l2_dist(&u, &u_new);
        last_step = step;
        let (mut y_new, mut cost_new) = if flips == 0 {
            let c = ctx.cost_given_state(&u_new, &y_inner);
            (y_inner, c)
        } else {
            let y = ctx.state(&u_new)?;
            let c = ctx.cost_given_state(&u_new, &y);
            (y, c)
        };

        // Nonmonotone guard: halve the step up to 6 times if the cost rose
        // beyond slack, keeping the best candidate seen.
        if cost_new > cost + slack {
            let full = u_new.clone();
            let mut best = (cost_new, u_new, y_new);
            let mut theta = 1.0;
            for _ in 0..6 {
                theta *= 0.5;
                let damped = blend(&u, &full, theta);
                let yd = ctx.state(&damped)?;
                let cd = ctx.cost_given_state(&damped, &yd);
                if cd < best.0 {
                    best = (cd, damped, yd);
                }
                if best.0 <= cost + slack {
                    break;
                }
            }
            cost_new = best.0;
            u_new = best.1;
            y_new = best.2;
        }

        u = u_new;
        y = y_new;
        cost = cost_new;
        cost_history.push(cost);

        if step <= opts.tol_outer && flips == 0 {
            let report = ctx.build_report(&u, &y, cost_history.clone(), outer, total_inner)?;
            if report.kkt_residual <= 10.0 * opts.tol_inner {
                return Ok(report);
            }
        }
    }

    let report = ctx.build_report(&u, &y, cost_history, outer, total_inner)?;
    Err(Error::OuterNoConvergence {
        step: last_step,
        kkt: report.kkt_residual,
        report: Box::new(report),
    })
}

/// L2 norm of the KKT defect of a report: stationarity
/// `phibar + alpha u + beta (delta zeta - w) + lambda_b - lambda_a`
/// plus the complementarity defects.
pub fn kkt_residual(spec: &ProblemSpec, mesh: &TriMesh, report: &SolveReport) -> f64 {
    let p = spec.params;
    let bd = p.beta * p.delta_gamma();
    let phibar = element_average(&report.phi);
    let mut stat_sq = 0.0;
    let mut compl = 0.0;
    for t in 0..mesh.n_triangles() {
        let area = mesh.area(t);
        let u = report.u.values()[t];
        let d = phibar.values()[t] + p.alpha * u + bd * report.zeta.values()[t]
            - p.beta * report.w.values()[t]
            + report.lambda_b.values()[t]
            - report.lambda_a.values()[t];
        stat_sq += area * d * d;
        compl += area
            * ((report.lambda_a.values()[t] * (u - p.u_a)).abs()
                + (report.lambda_b.values()[t] * (p.u_b - u)).abs());
    }
    stat_sq.sqrt() + compl
}

/// Structural counters of a converged control.
#[derive(Clone, Debug)]
pub struct StructureDiagnostics {
    /// Area fraction of the support {u != 0}.
    pub support_fraction: f64,
    pub min_nonzero_abs_u: Option<f64>,
    /// Elements with 0 < |u_T| below the jump threshold that are not at a
    /// box bound. Must be zero.
    pub band_violation_count: usize,
    /// min |u_T| / (s* + (1-q)/gamma) over free support elements.
    pub jump_margin: Option<f64>,
    /// Margins of the two-sided bound
    /// s*(1+1/(1-q)) + (1-q)/gamma <= |u| + (beta q/alpha)(|u|+(q-1)/gamma)^{q-1}
    ///                             <= ||phi||_inf / alpha
    /// over free support elements (minimum observed slack of each side).
    pub lowup_lower_margin: Option<f64>,
    pub lowup_upper_margin: Option<f64>,
}

pub fn structure_diagnostics(report: &SolveReport, p: &RegParams) -> StructureDiagnostics {
    let mesh = report.u.mesh();
    let thresh = p.jump_threshold();
    let tol = 1e-12 * (1.0 + p.u_b.max(-p.u_a));
    let phi_inf = report.phi.max_abs();
    let lower = p.alpha * p.s_star() * (1.0 + 1.0 / (1.0 - p.q)) / p.alpha + (1.0 - p.q) / p.gamma;

    let mut support_area = 0.0;
    let mut min_nonzero: Option<f64> = None;
    let mut violations = 0;
    let mut jump_margin: Option<f64> = None;
    let mut low_margin: Option<f64> = None;
    let mut up_margin: Option<f64> = None;

    for t in 0..mesh.n_triangles() {
        let u = report.u.values()[t];
        if u == 0.0 {
            continue;
        }
        support_area += mesh.area(t);
        let a = u.abs();
        min_nonzero = Some(min_nonzero.map_or(a, |m: f64| m.min(a)));
        let at_bound = (u - p.u_a).abs() <= tol || (p.u_b - u).abs() <= tol;
        if at_bound {
            continue;
        }
        if a < thresh - tol {
            violations += 1;
        }
        let margin = a / thresh;
        jump_margin = Some(jump_margin.map_or(margin, |m: f64| m.min(margin)));
        let middle = a + p.beta * p.q / p.alpha * (a + (p.q - 1.0) / p.gamma).powf(p.q - 1.0);
        let lo = middle - lower;
        let hi = phi_inf / p.alpha - middle;
        low_margin = Some(low_margin.map_or(lo, |m: f64| m.min(lo)));
        up_margin = Some(up_margin.map_or(hi, |m: f64| m.min(hi)));
    }

    StructureDiagnostics {
        support_fraction: support_area / mesh.domain_area(),
        min_nonzero_abs_u: min_nonzero,
        band_violation_count: violations,
        jump_margin,
        lowup_lower_margin: low_margin,
        lowup_upper_margin: up_margin,
    }
}

/// Blend `a + theta (b - a)` elementwise.
fn blend(a: &P0Field, b: &P0Field, theta: f64) -> P0Field {
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x + theta * (y - x))
        .collect();
    P0Field::from_values(a.mesh(), values)
}

/// `||a - b||_{L2}` for P0 fields on the same mesh.
pub fn l2_dist(a: &P0Field, b: &P0Field) -> f64 {
    let mesh = a.mesh();
    (0..mesh.n_triangles())
        .map(|t| {
            let d = a.values()[t] - b.values()[t];
            mesh.area(t) * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Shared solver state: assembled operator, fixed data loads, warm starts.
struct SolveCtx<'a> {
    spec: &'a ProblemSpec,
    mesh: &'a TriMesh,
    solver: StateSolver,
    f_load: Vec<f64>,
    yd_load: Vec<f64>,
    warm_y: Option<Vec<f64>>,
    warm_phi: Option<Vec<f64>>,
}

impl<'a> SolveCtx<'a> {
    fn new(spec: &'a ProblemSpec, mesh: &'a TriMesh) -> Result<SolveCtx<'a>> {
        let solver = StateSolver::new(mesh, &spec.coeffs)?;
        let f_load = solver.func_load(&spec.f);
        let yd_load = solver.func_load(&spec.y_d);
        Ok(SolveCtx { spec, mesh, solver, f_load, yd_load, warm_y: None, warm_phi: None })
    }

    fn state(&mut self, u: &P0Field) -> Result<P1Field> {
        let mut load = self.solver.p0_load(u);
        for (l, f) in load.iter_mut().zip(&self.f_load) {
            *l += f;
        }
        let (field, coeffs) = self.solver.solve_load(&load, self.warm_y.as_deref())?;
        self.warm_y = Some(coeffs);
        Ok(field)
    }

    fn adjoint(&mut self, y: &P1Field) -> Result<P1Field> {
        let mut rhs = self.solver.mass_apply(y);
        for (r, d) in rhs.iter_mut().zip(&self.yd_load) {
            *r -= d;
        }
        let (field, coeffs) = self.solver.solve_load(&rhs, self.warm_phi.as_deref())?;
        self.warm_phi = Some(coeffs);
        Ok(field)
    }

    fn cost_given_state(&self, u: &P0Field, y: &P1Field) -> f64 {
        let p = self.spec.params;
        let tracking = crate::fem::assemble::tracking_term_sq(y, &self.spec.y_d);
        let mut tik = 0.0;
        let mut pen = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let area = self.mesh.area(t);
            let ut = u.values()[t];
            tik += area * ut * ut;
            pen += area * penalty_density(ut, &p);
        }
        0.5 * tracking + 0.5 * p.alpha * tik + p.beta * pen
    }

    /// One inner convex solve; returns the control, stats, and the state and
    /// adjoint averages consistent with it.
    fn inner_l1(
        &mut self,
        g_hat: &P0Field,
        u_start: &P0Field,
        opts: &SolveOptions,
    ) -> Result<(P0Field, InnerStats, P1Field, P0Field)> {
        let p = self.spec.params;
        let delta = p.delta_gamma();
        let bd = p.beta * delta;
        let tol_g = delta * (1.0 + 1e-9);
        if g_hat.values().iter().any(|&g| g.abs() > tol_g) {
            return Err(Error::InvalidParameter(
                "inner linearization g_hat exceeds the delta_gamma bound".into(),
            ));
        }

        let nt = self.mesh.n_triangles();
        let mut u = u_start.map(|v| v.clamp(p.u_a, p.u_b));
        let mut y = self.state(&u)?;
        let mut phibar = element_average(&self.adjoint(&y)?);

        let target = |g: f64, pb: f64| soft_threshold(p.beta * g - pb, bd) / p.alpha;
        let residual = |u: &P0Field, phibar: &P0Field| -> f64 {
            (0..nt)
                .map(|t| {
                    let d = u.values()[t]
                        - target(g_hat.values()[t], phibar.values()[t]).clamp(p.u_a, p.u_b);
                    self.mesh.area(t) * d * d
                })
                .sum::<f64>()
                .sqrt()
        };
        let classify = |g: f64, pb: f64| -> u8 {
            let z = p.beta * g - pb;
            if z.abs() <= bd {
                0 // dead zone
            } else if z > 0.0 {
                let v = (z - bd) / p.alpha;
                if v >= p.u_b {
                    3
                } else {
                    1
                }
            } else {
                let v = (z + bd) / p.alpha;
                if v <= p.u_a {
                    2
                } else {
                    1
                }
            }
        };

        let mut sets: Vec<u8> = (0..nt)
            .map(|t| classify(g_hat.values()[t], phibar.values()[t]))
            .collect();
        let mut res = residual(&u, &phibar);
        let mut trace = vec![res];
        let mut stats = InnerStats::default();
        let mut theta = match opts.inner_method {
            InnerMethod::SemiSmoothNewton => 1.0,
            InnerMethod::Picard => opts.damping,
        };
        let mut best = res;
        let mut stall = 0usize;

        while res > opts.tol_inner {
            if stats.iterations >= opts.max_inner {
                return Err(Error::InnerNoConvergence { last: res, trace });
            }
            for t in 0..nt {
                let tgt = target(g_hat.values()[t], phibar.values()[t]).clamp(p.u_a, p.u_b);
                let v = u.values()[t] + theta * (tgt - u.values()[t]);
                u.values_mut()[t] = v;
            }
            y = self.state(&u)?;
            phibar = element_average(&self.adjoint(&y)?);
            for t in 0..nt {
                let s = classify(g_hat.values()[t], phibar.values()[t]);
                if s != sets[t] {
                    stats.set_changes += 1;
                    sets[t] = s;
                }
            }
            res = residual(&u, &phibar);
            trace.push(res);
            stats.iterations += 1;
            if res <= 0.9 * best {
                best = res;
                stall = 0;
            } else {
                stall += 1;
            }
            // Damped fall back when the full steps stagnate.
            if stall >= 3 && opts.inner_method == InnerMethod::SemiSmoothNewton {
                theta = (0.5 * theta).max(1.0 / 64.0);
                stall = 0;
            }
        }
        stats.final_residual = res;
        Ok((u, stats, y, phibar))
    }

    fn build_report(
        &mut self,
        u: &P0Field,
        y: &P1Field,
        cost_history: Vec<f64>,
        outer: usize,
        total_inner: usize,
    ) -> Result<SolveReport> {
        let p = self.spec.params;
        let bd = p.beta * p.delta_gamma();
        let phi = self.adjoint(y)?;
        let phibar = element_average(&phi);
        let w = u.map(|t| j_func(t, &p));

        let nt = self.mesh.n_triangles();
        let mut zeta = P0Field::zeros(self.mesh);
        let mut lambda_a = P0Field::zeros(self.mesh);
        let mut lambda_b = P0Field::zeros(self.mesh);
        let mut support = 0usize;
        for t in 0..nt {
            let ut = u.values()[t];
            let z = if ut > 0.0 {
                1.0
            } else if ut < 0.0 {
                -1.0
            } else if bd > 0.0 {
                ((p.beta * w.values()[t] - phibar.values()[t]) / bd).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            zeta.values_mut()[t] = z;
            let defect = phibar.values()[t] + p.alpha * ut + bd * z - p.beta * w.values()[t];
            if ut == p.u_a {
                lambda_a.values_mut()[t] = defect.max(0.0);
            } else if ut == p.u_b {
                lambda_b.values_mut()[t] = (-defect).max(0.0);
            }
            if ut != 0.0 {
                support += 1;
            }
        }

        let mut report = SolveReport {
            u: u.clone(),
            y: y.clone(),
            phi,
            w,
            zeta,
            lambda_a,
            lambda_b,
            cost_history,
            outer_iterations: outer,
            total_inner_iterations: total_inner,
            kkt_residual: 0.0,
            support_element_count: support,
        };
        report.kkt_residual = kkt_residual(self.spec, self.mesh, &report);
        Ok(report)
    }
}

/// Fixed-point gap `max_T |u_T - scalar_dc_argmin(phibar_T)|` of a report.
pub fn fixed_point_gap(report: &SolveReport, p: &RegParams) -> f64 {
    let phibar = element_average(&report.phi);
    report
        .u
        .values()
        .iter()
        .zip(phibar.values())
        .map(|(&u, &pb)| (u - scalar_dc_argmin(pb, p)).abs())
        .fold(0.0, f64::max)
}
