//! Scalar-layer property suite behind `lqsparse selftest`: bounds and
//! Lipschitz continuity of the concave correction, proximal identity of the
//! soft threshold, oddness, and agreement of the scalar minimizer with a
//! brute-force grid search. Deterministic seeds; prints one line per check.

use lqsparse::scalar::{
    critical_root, huber, j_func, penalty_density, scalar_dc_argmin, scalar_objective,
    soft_threshold, RegParams,
};

struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self, lo: f64, hi: f64) -> f64 {
        // 64-bit LCG (Knuth constants); plenty for property sampling.
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let unit = (self.0 >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * unit
    }
}

pub fn run() -> Result<(), String> {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures.push(name.to_string());
        }
    };

    let p = RegParams::example_problem();
    let mut rng = Lcg(0x5eed);

    // h_{q,gamma}: even, continuous at the seam, monotone density
    let seam = {
        let t = 1.0 / p.gamma;
        let inner = p.q * p.gamma.powf((1.0 - p.q) / p.q) * t.powf(1.0 / p.q);
        (inner - (t - (1.0 - p.q) / p.gamma)).abs() <= 1e-15
    };
    check("huber branches agree at t = 1/gamma", seam);
    let even = (0..5_000).all(|_| {
        let t = rng.next_f64(-2.0, 2.0);
        huber(t, &p) == huber(-t, &p) && penalty_density(t, &p) >= 0.0
    });
    check("huber is even with nonnegative density", even);

    // j: zero in the smoothing zone, odd, bounded, Lipschitz
    let delta = p.delta_gamma();
    let lip = p.lipschitz_j();
    let mut ok_bound = true;
    let mut ok_lip = true;
    let mut ok_odd = true;
    for _ in 0..100_000 {
        let t1 = rng.next_f64(-2.0, 2.0);
        let t2 = rng.next_f64(-2.0, 2.0);
        let (j1, j2) = (j_func(t1, &p), j_func(t2, &p));
        ok_bound &= j1.abs() <= delta;
        ok_lip &= (j1 - j2).abs() <= lip * (t1 - t2).abs();
        ok_odd &= j_func(-t1, &p) == -j1;
    }
    check("|j| <= delta_gamma over 1e5 samples", ok_bound);
    check("j is Lipschitz with constant 2 gamma delta / q", ok_lip);
    check("j is odd", ok_odd);

    // soft threshold as the prox of tau|.|
    let mut ok_prox = true;
    for _ in 0..2_000 {
        let y = rng.next_f64(-3.0, 3.0);
        let tau = rng.next_f64(0.0, 2.0);
        let u = soft_threshold(y, tau);
        // subgradient optimality of 1/2 (y-u)^2 + tau |u|
        let g = u - y;
        ok_prox &= if u == 0.0 { g.abs() <= tau + 1e-12 } else { (g + tau * u.signum()).abs() <= 1e-12 };
    }
    check("soft_threshold satisfies the prox optimality condition", ok_prox);

    // critical roots land on the strictly increasing branch
    let mut ok_root = true;
    for _ in 0..2_000 {
        let phi = rng.next_f64(-2.0, 0.0);
        if let Some(r) = critical_root(phi, &p) {
            ok_root &= r > p.jump_threshold();
        }
    }
    check("critical roots exceed the jump threshold", ok_root);
    check("no root exists at phi = 0", critical_root(0.0, &p).is_none());

    // scalar minimizer vs grid search
    let mut ok_argmin = true;
    for _ in 0..200 {
        let draw = RegParams {
            q: rng.next_f64(0.25, 0.75),
            gamma: 10f64.powf(rng.next_f64(3.0, 4.5)),
            alpha: 10f64.powf(rng.next_f64(-1.0, 0.0)),
            beta: 10f64.powf(rng.next_f64(-4.5, -2.5)),
            u_a: -rng.next_f64(0.3, 1.0),
            u_b: rng.next_f64(0.3, 1.0),
        };
        let phi = rng.next_f64(-1.0, 1.0);
        let got = scalar_dc_argmin(phi, &draw);
        let mut best = draw.u_a;
        let mut best_v = scalar_objective(draw.u_a, phi, &draw);
        let steps = 200_000;
        for k in 1..=steps {
            let u = draw.u_a + (draw.u_b - draw.u_a) * k as f64 / steps as f64;
            let v = scalar_objective(u, phi, &draw);
            if v < best_v {
                best_v = v;
                best = u;
            }
        }
        let dv = scalar_objective(got, phi, &draw) - best_v;
        ok_argmin &= (got - best).abs() <= 1e-4 || dv <= 1e-11;
    }
    check("scalar_dc_argmin matches grid search on 200 draws", ok_argmin);

    if failures.is_empty() {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(format!("selftest failures: {}", failures.join(", ")))
    }
}
