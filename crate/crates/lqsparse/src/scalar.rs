//! Pointwise mathematics of the regularized L^q penalty.
//!
//! The penalty integrand is `h_{q,gamma}(t)^q` where `h_{q,gamma}` smooths
//! `|t|` on `[-1/gamma, 1/gamma]`. Inside that zone the integrand equals
//! `delta_gamma * |t|` with `delta_gamma = q^q gamma^{1-q}`, which is what
//! makes the convex/concave splitting work: the concave correction has the
//! bounded, Lipschitz derivative `j(t)`, and one-dimensional minimizers jump
//! past `s* + (1-q)/gamma` with `s* = (beta/alpha q(1-q))^{1/(2-q)}`.
//!
//! Everything here is total on finite reals; NaN inputs are rejected at this
//! module boundary.

use crate::error::{Error, Result};

/// Regularizer and box parameters of the control problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegParams {
    /// Exponent of the quasinorm penalty, in (0, 1).
    pub q: f64,
    /// Smoothing parameter, >= 1 (the smoothing zone is [-1/gamma, 1/gamma]).
    pub gamma: f64,
    /// Tikhonov weight, > 0.
    pub alpha: f64,
    /// Sparsity weight, >= 0.
    pub beta: f64,
    /// Box bounds with u_a < 0 < u_b.
    pub u_a: f64,
    pub u_b: f64,
}

impl RegParams {
    /// Parameters of the shipped example problem.
    pub fn example_problem() -> RegParams {
        RegParams {
            q: 0.5,
            gamma: 16000.0,
            alpha: 0.24,
            beta: 2e-4,
            u_a: -0.8,
            u_b: 0.55,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q must satisfy 0 < q < 1, got {}", self.q));
        }
        if !(self.gamma >= 1.0) {
            return bad(format!("gamma must be >= 1, got {}", self.gamma));
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.beta >= 0.0) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.u_a < 0.0 && 0.0 < self.u_b) {
            return bad(format!(
                "box bounds must satisfy u_a < 0 < u_b, got [{}, {}]",
                self.u_a, self.u_b
            ));
        }
        for (name, v) in [
            ("q", self.q),
            ("gamma", self.gamma),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("u_a", self.u_a),
            ("u_b", self.u_b),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        Ok(())
    }

    /// `delta_gamma = q^q gamma^{1-q}`, the slope of the convex L1 surrogate.
    pub fn delta_gamma(&self) -> f64 {
        self.q.powf(self.q) * self.gamma.powf(1.0 - self.q)
    }

    /// Lipschitz constant of `j`: `2 gamma delta_gamma / q`.
    pub fn lipschitz_j(&self) -> f64 {
        2.0 * self.gamma * self.delta_gamma() / self.q
    }

    /// Minimal jump scale `s* = (beta/alpha q(1-q))^{1/(2-q)}`.
    pub fn s_star(&self) -> f64 {
        (self.beta / self.alpha * self.q * (1.0 - self.q)).powf(1.0 / (2.0 - self.q))
    }

    /// Nonzero controls exceed `s* + (1-q)/gamma` (up to box clamping).
    pub fn jump_threshold(&self) -> f64 {
        self.s_star() + (1.0 - self.q) / self.gamma
    }

    /// Minimum of `eta(s) = alpha s + beta q (s + (q-1)/gamma)^{q-1}` on the
    /// upper branch: `alpha s* (1 + 1/(1-q)) + alpha (1-q)/gamma`.
    pub fn eta_min(&self) -> f64 {
        self.alpha * self.s_star() * (1.0 + 1.0 / (1.0 - self.q))
            + self.alpha * (1.0 - self.q) / self.gamma
    }
}

fn reject_nan(what: &str, v: f64) {
    assert!(!v.is_nan(), "{what} must not be NaN");
}

/// Huber-type smoothing of the absolute value:
/// `q gamma^{(1-q)/q} |t|^{1/q}` on `[-1/gamma, 1/gamma]`, else
/// `|t| - (1-q)/gamma`. Continuous at the seam (both branches give `q/gamma`).
pub fn huber(t: f64, p: &RegParams) -> f64 {
    reject_nan("huber input", t);
    let a = t.abs();
    if a <= 1.0 / p.gamma {
        p.q * p.gamma.powf((1.0 - p.q) / p.q) * a.powf(1.0 / p.q)
    } else {
        a - (1.0 - p.q) / p.gamma
    }
}

/// Penalty integrand `h_{q,gamma}(t)^q`. On the smoothing zone this equals
/// `delta_gamma |t|` exactly, which is used directly to avoid the
/// under/overflow of composing the powers.
pub fn penalty_density(t: f64, p: &RegParams) -> f64 {
    reject_nan("penalty_density input", t);
    let a = t.abs();
    if a <= 1.0 / p.gamma {
        p.delta_gamma() * a
    } else {
        (a - (1.0 - p.q) / p.gamma).powf(p.q)
    }
}

/// Derivative of the concave correction: 0 on the smoothing zone, else
/// `[delta_gamma - q (|t| + (q-1)/gamma)^{q-1}] sign(t)`.
pub fn j_func(t: f64, p: &RegParams) -> f64 {
    reject_nan("j_func input", t);
    let a = t.abs();
    if a <= 1.0 / p.gamma {
        0.0
    } else {
        (p.delta_gamma() - p.q * (a + (p.q - 1.0) / p.gamma).powf(p.q - 1.0)) * t.signum()
    }
}

/// Proximal map of `tau |.|`: dead zone `[-tau, tau]`, shrink by tau outside.
pub fn soft_threshold(y: f64, tau: f64) -> f64 {
    reject_nan("soft_threshold input", y);
    assert!(tau >= 0.0, "soft_threshold needs tau >= 0");
    if y.abs() <= tau {
        0.0
    } else {
        y - tau * y.signum()
    }
}

/// `eta(u) = alpha u + beta q (u + (q-1)/gamma)^{q-1}` on the upper branch.
fn eta(u: f64, p: &RegParams) -> f64 {
    let bq = p.beta * p.q;
    let power = if bq == 0.0 {
        0.0
    } else {
        bq * (u + (p.q - 1.0) / p.gamma).powf(p.q - 1.0)
    };
    p.alpha * u + power
}

fn eta_prime(u: f64, p: &RegParams) -> f64 {
    let c = p.beta * p.q * (1.0 - p.q);
    let power = if c == 0.0 {
        0.0
    } else {
        c * (u + (p.q - 1.0) / p.gamma).powf(p.q - 2.0)
    };
    p.alpha + power
}

/// Root of the critical-point equation
/// `alpha u + beta q (u + (q-1)/gamma)^{q-1} = -phi_val`
/// on the branch `u > s* + (1-q)/gamma`, where the left side is strictly
/// increasing. Returns `None` when `-phi_val` does not exceed the branch
/// minimum (no admissible root). The negative branch follows by oddness:
/// `-critical_root(-phi_val, p)`.
pub fn critical_root(phi_val: f64, p: &RegParams) -> Option<f64> {
    reject_nan("critical_root input", phi_val);
    let target = -phi_val;
    if !(target > p.eta_min()) {
        return None;
    }
    let mut lo = p.jump_threshold();
    let mut hi = (10.0f64).max(2.0 * (phi_val.abs() + 1.0) / p.alpha);
    // eta(lo) = eta_min < target and eta(hi) >= alpha*hi >= 2(|phi|+1) > target.
    let tol = 1e-12 * p.alpha.max(1.0);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = eta(x, p) - target;
        if r.abs() <= tol {
            return Some(x);
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton step, safeguarded by the bracket.
        let step = x - r / eta_prime(x, p);
        x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
    }
    Some(x)
}

/// Scalar DC objective `psi(u) = phi_val u + alpha/2 u^2 + beta h^q(u)`.
pub fn scalar_objective(u: f64, phi_val: f64, p: &RegParams) -> f64 {
    phi_val * u + 0.5 * p.alpha * u * u + p.beta * penalty_density(u, p)
}

/// Global minimizer of `psi` over the box `[u_a, u_b]` by direct comparison
/// over the finite candidate set: 0, the box bounds, the clamped critical
/// roots of both branches, and the stationary points of the smoothing-zone
/// branch (soft-threshold points clamped into the zone). Ties resolve toward
/// 0, then toward smaller |u|.
pub fn scalar_dc_argmin(phi_val: f64, p: &RegParams) -> f64 {
    reject_nan("scalar_dc_argmin input", phi_val);
    let bd = p.beta * p.delta_gamma();
    let zone = 1.0 / p.gamma;

    let mut candidates: Vec<f64> = vec![p.u_a, p.u_b];
    if let Some(r) = critical_root(phi_val, p) {
        candidates.push(r.clamp(p.u_a, p.u_b));
    }
    if let Some(r) = critical_root(-phi_val, p) {
        candidates.push((-r).clamp(p.u_a, p.u_b));
    }
    // Stationary points of psi inside the smoothing zone, where the penalty
    // is exactly beta*delta_gamma*|u|.
    if -phi_val > bd {
        candidates.push(((-phi_val - bd) / p.alpha).clamp(0.0, zone.min(p.u_b)));
    }
    if phi_val > bd {
        candidates.push(((-phi_val + bd) / p.alpha).clamp((-zone).max(p.u_a), 0.0));
    }

    // Zero first so it wins ties; then smaller |u| first.
    candidates.sort_by(|a, b| (a.abs(), *a).partial_cmp(&(b.abs(), *b)).unwrap());
    let mut best = 0.0f64.clamp(p.u_a, p.u_b);
    let mut best_val = scalar_objective(best, phi_val, p);
    for &c in &candidates {
        let v = scalar_objective(c, phi_val, p);
        if v < best_val {
            best = c;
            best_val = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> RegParams {
        RegParams::example_problem()
    }

    #[test]
    fn validation_catches_bad_ranges() {
        let mut p = example();
        p.q = 1.5;
        assert!(p.validate().is_err());
        let mut p = example();
        p.u_a = 0.1;
        assert!(p.validate().is_err());
        let mut p = example();
        p.alpha = 0.0;
        assert!(p.validate().is_err());
        assert!(example().validate().is_ok());
    }

    #[test]
    fn delta_gamma_reference_value() {
        // q = 0.5, gamma = 16000: delta = sqrt(0.5 * 16000) = sqrt(8000).
        let d = example().delta_gamma();
        assert!((d - 8000f64.sqrt()).abs() <= 1e-10, "{d}");
    }

    #[test]
    fn huber_at_zero_and_seam() {
        let p = example();
        assert_eq!(huber(0.0, &p), 0.0);
        // Both branch formulas at t = 1/gamma in f64.
        let t = 1.0 / p.gamma;
        let inner = p.q * p.gamma.powf((1.0 - p.q) / p.q) * t.powf(1.0 / p.q);
        let outer = t - (1.0 - p.q) / p.gamma;
        assert!((inner - outer).abs() <= 1e-18);
        assert!((huber(t, &p) - 3.125e-5).abs() <= 1e-18);
    }

    #[test]
    fn huber_at_one_reference_value() {
        let p = example();
        // 1 - 0.5/16000
        assert!((huber(1.0, &p) - 0.99996875).abs() <= 1e-15);
    }

    #[test]
    fn penalty_density_examples() {
        let p = example();
        assert_eq!(penalty_density(0.0, &p), 0.0);
        let expect = 0.99996875f64.sqrt();
        assert!((penalty_density(1.0, &p) - expect).abs() <= 1e-16);
        assert!((expect - 0.9999843).abs() <= 1e-6);
        // Monotone nondecreasing in |t| on a sampled grid.
        let mut last = 0.0;
        for k in 0..=10_000 {
            let t = k as f64 * 2e-4;
            let v = penalty_density(t, &p);
            assert!(v + 1e-15 >= last, "not monotone at t = {t}");
            last = v;
        }
    }

    #[test]
    fn penalty_density_approaches_quasinorm_for_large_gamma() {
        // pointwise h^q -> |t|^q as gamma grows, fixed t != 0.
        for t in [0.3f64, 1.7, -0.9] {
            let mut prev_err = f64::INFINITY;
            for gamma in [1e2, 1e4, 1e6] {
                let p = RegParams { gamma, ..example() };
                let err = (penalty_density(t, &p) - t.abs().powf(p.q)).abs();
                assert!(err < prev_err || err < 1e-12);
                prev_err = err;
            }
            assert!(prev_err <= 1e-6, "{prev_err}");
        }
    }

    #[test]
    fn j_at_zero_and_reference_value() {
        let p = example();
        assert_eq!(j_func(0.0, &p), 0.0);
        // Formula evaluation at t = 0.5: delta - 0.5 (0.5 - 0.5/16000)^{-1/2}.
        let expect = 8000f64.sqrt() - 0.5 * (0.5f64 - 0.5 / 16000.0).powf(-0.5);
        assert!((j_func(0.5, &p) - expect).abs() <= 1e-12);
        assert!((expect - 88.7356).abs() <= 1e-4, "{expect}");
    }

    #[test]
    fn j_is_odd_bounded_and_lipschitz() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = example();
        let d = p.delta_gamma();
        let lip = p.lipschitz_j();
        for _ in 0..10_000 {
            let t: f64 = rng.random_range(-2.0..2.0);
            let s: f64 = rng.random_range(-2.0..2.0);
            assert_eq!(j_func(-t, &p), -j_func(t, &p));
            assert!(j_func(t, &p).abs() <= d * (1.0 + 1e-14));
            assert!((j_func(t, &p) - j_func(s, &p)).abs() <= lip * (t - s).abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn soft_threshold_basics() {
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(2.0, 1.0), 1.0);
        assert_eq!(soft_threshold(-2.0, 1.0), -1.0);
    }

    #[test]
    fn soft_threshold_matches_prox_grid_search() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1_000 {
            let y: f64 = rng.random_range(-3.0..3.0);
            let tau: f64 = rng.random_range(0.0..2.0);
            let got = soft_threshold(y, tau);
            // Two-stage grid search of argmin 1/2 (y-u)^2 + tau |u|,
            // final step 1e-6.
            let obj = |u: f64| 0.5 * (y - u) * (y - u) + tau * u.abs();
            let mut lo = -4.0f64;
            let mut hi = 4.0;
            for step in [1e-3, 1e-6] {
                let n = ((hi - lo) / step).ceil() as usize;
                let mut best = lo;
                let mut best_v = obj(lo);
                for k in 0..=n {
                    let u = lo + k as f64 * step;
                    let v = obj(u);
                    if v < best_v {
                        best_v = v;
                        best = u;
                    }
                }
                lo = best - 2.0 * step;
                hi = best + 2.0 * step;
            }
            let oracle = 0.5 * (lo + hi);
            assert!((got - oracle).abs() <= 2e-6, "y={y} tau={tau}: {got} vs {oracle}");
        }
    }

    /// Plain bisection oracle for the critical-point equation.
    fn bisect_root(phi_val: f64, p: &RegParams) -> f64 {
        let target = -phi_val;
        let mut lo = p.jump_threshold();
        let mut hi = 1000.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if eta(mid, p) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn critical_root_none_at_zero_phi() {
        // eta is strictly positive on the branch.
        assert_eq!(critical_root(0.0, &example()), None);
    }

    #[test]
    fn critical_root_matches_bisection_oracle() {
        let p = example();
        let r = critical_root(-0.5, &p).unwrap();
        let oracle = bisect_root(-0.5, &p);
        assert!((r - oracle).abs() <= 1e-9, "{r} vs {oracle}");
        assert!((r - 2.0830).abs() <= 2e-4, "{r}");
        assert!(r > p.jump_threshold());
        // The threshold itself is near the quoted 0.0035444.
        assert!((p.jump_threshold() - 0.0035444).abs() <= 2e-5, "{}", p.jump_threshold());
    }

    #[test]
    fn critical_root_residual_is_small() {
        let p = example();
        for phi in [-0.03, -0.1, -0.5, -2.0] {
            let r = critical_root(phi, &p).unwrap();
            assert!((eta(r, &p) + phi).abs() <= image_tol(&p));
        }
        fn image_tol(p: &RegParams) -> f64 {
            1e-12 * p.alpha.max(1.0) * 1.001
        }
    }

    /// Grid-search oracle for the scalar DC problem, step-refined to `fine`.
    fn grid_argmin(phi_val: f64, p: &RegParams, fine: f64) -> f64 {
        let obj = |u: f64| scalar_objective(u, phi_val, p);
        let mut lo = p.u_a;
        let mut hi = p.u_b;
        let mut step = (hi - lo) / 40_000.0;
        loop {
            let n = ((hi - lo) / step).ceil() as usize;
            let mut best = lo;
            let mut best_v = obj(lo);
            for k in 0..=n {
                let u = (lo + k as f64 * step).min(hi);
                let v = obj(u);
                if v < best_v {
                    best_v = v;
                    best = u;
                }
            }
            if step <= fine {
                return best;
            }
            lo = (best - 2.0 * step).max(p.u_a);
            hi = (best + 2.0 * step).min(p.u_b);
            step = (step / 100.0).max(fine);
        }
    }

    #[test]
    fn argmin_zero_phi_is_zero() {
        assert_eq!(scalar_dc_argmin(0.0, &example()), 0.0);
    }

    #[test]
    fn argmin_example_problem_clamps_to_upper_bound() {
        let p = example();
        let u = scalar_dc_argmin(-0.5, &p);
        assert_eq!(u, 0.55);
        // psi(0.55) is about -0.2385, strictly below psi(0) = 0.
        let v = scalar_objective(0.55, -0.5, &p);
        assert!((v + 0.2385).abs() <= 5e-4, "{v}");
        let oracle = grid_argmin(-0.5, &p, 1e-5);
        assert!((u - oracle).abs() <= 1e-4);
    }

    #[test]
    fn argmin_matches_grid_oracle_random_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        for i in 0..300 {
            let p = RegParams {
                q: rng.random_range(0.15..0.85),
                gamma: 10f64.powf(rng.random_range(2.0..5.0)),
                alpha: 10f64.powf(rng.random_range(-1.5..0.5)),
                beta: 10f64.powf(rng.random_range(-5.0..-1.5)),
                u_a: -rng.random_range(0.2..1.5),
                u_b: rng.random_range(0.2..1.5),
            };
            let phi: f64 = rng.random_range(-1.0..1.0);
            let got = scalar_dc_argmin(phi, &p);
            let oracle = grid_argmin(phi, &p, 1e-6);
            let dv = scalar_objective(got, phi, &p) - scalar_objective(oracle, phi, &p);
            // Either the minimizers agree or the objective gap is at grid
            // resolution (symmetric near-ties).
            assert!(
                (got - oracle).abs() <= 1e-4 || dv <= 1e-12,
                "draw {i}: {got} vs {oracle} (dv = {dv:.3e}, p = {p:?}, phi = {phi})"
            );
        }
    }

    #[test]
    fn argmin_is_odd_under_box_mirror() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2_000 {
            let p = RegParams {
                u_a: -rng.random_range(0.2..1.2),
                u_b: rng.random_range(0.2..1.2),
                ..example()
            };
            let mirrored = RegParams { u_a: -p.u_b, u_b: -p.u_a, ..p };
            let phi: f64 = rng.random_range(-1.0..1.0);
            let u = scalar_dc_argmin(phi, &p);
            let v = scalar_dc_argmin(-phi, &mirrored);
            assert!((u + v).abs() <= 1e-10, "phi={phi}: {u} vs {v}");
        }
    }

    #[test]
    fn nonzero_argmin_respects_jump_bound_example_params() {
        // Dense sweep of phi across all regimes: every nonzero minimizer is
        // at a box bound or beyond the jump threshold.
        let p = example();
        let thresh = p.jump_threshold();
        for k in 0..40_000 {
            let phi = -2.0 + 4.0 * k as f64 / 40_000.0;
            let u = scalar_dc_argmin(phi, &p);
            if u != 0.0 {
                let at_bound = u == p.u_a || u == p.u_b;
                assert!(
                    at_bound || u.abs() >= thresh - 1e-12,
                    "phi = {phi}: u = {u} inside the forbidden band"
                );
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn huber_is_even_and_nonnegative(t in -10.0f64..10.0) {
                let p = example();
                prop_assert!(huber(t, &p) >= 0.0);
                prop_assert_eq!(huber(t, &p), huber(-t, &p));
            }

            #[test]
            fn j_is_odd(t in -5.0f64..5.0) {
                let p = example();
                prop_assert_eq!(j_func(-t, &p), -j_func(t, &p));
            }

            #[test]
            fn j_is_bounded_by_delta(t in -100.0f64..100.0) {
                let p = example();
                prop_assert!(j_func(t, &p).abs() <= p.delta_gamma() * (1.0 + 1e-14));
            }
        }
    }
}
