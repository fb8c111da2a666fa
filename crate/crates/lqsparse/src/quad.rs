//! Quadrature on triangles.
//!
//! Two fixed rules cover the solver: the 3-point edge-midpoint rule (exact
//! through degree 2, used for all data terms in assembly) and a 6-point
//! degree-4 rule for interpolation studies. Indicator integrands bypass
//! point rules entirely: straddling elements are subdivided adaptively with
//! exact accounting of fully inside/outside children.

use crate::func::{FuncSpec, Region};

/// Quadrature points in barycentric coordinates with weights summing to 1.
#[derive(Clone, Copy, Debug)]
pub struct QuadRule {
    pub points: &'static [([f64; 3], f64)],
}

/// Edge-midpoint rule, exact for polynomials of degree 2.
pub const EDGE_MIDPOINT: QuadRule = QuadRule {
    points: &[
        ([0.5, 0.5, 0.0], 1.0 / 3.0),
        ([0.0, 0.5, 0.5], 1.0 / 3.0),
        ([0.5, 0.0, 0.5], 1.0 / 3.0),
    ],
};

// 6-point rule exact through degree 4 (Strang-Fix).
const D4_A1: f64 = 0.816_847_572_980_459;
const D4_B1: f64 = 0.091_576_213_509_771;
const D4_W1: f64 = 0.109_951_743_655_322;
const D4_A2: f64 = 0.108_103_018_168_070;
const D4_B2: f64 = 0.445_948_490_915_965;
const D4_W2: f64 = 0.223_381_589_678_011;

pub const DEGREE4: QuadRule = QuadRule {
    points: &[
        ([D4_A1, D4_B1, D4_B1], D4_W1),
        ([D4_B1, D4_A1, D4_B1], D4_W1),
        ([D4_B1, D4_B1, D4_A1], D4_W1),
        ([D4_A2, D4_B2, D4_B2], D4_W2),
        ([D4_B2, D4_A2, D4_B2], D4_W2),
        ([D4_B2, D4_B2, D4_A2], D4_W2),
    ],
};

/// Depth of the adaptive subdivision used for indicator integrands.
const INDICATOR_DEPTH: usize = 4;

pub fn bary_to_xy(coords: &[[f64; 2]; 3], l: [f64; 3]) -> [f64; 2] {
    [
        l[0] * coords[0][0] + l[1] * coords[1][0] + l[2] * coords[2][0],
        l[0] * coords[0][1] + l[1] * coords[1][1] + l[2] * coords[2][1],
    ]
}

/// `integral_T g` by the given rule; `area` is the triangle area.
pub fn integrate(coords: &[[f64; 2]; 3], area: f64, rule: QuadRule, g: impl Fn(f64, f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for &(l, w) in rule.points {
        let [x, y] = bary_to_xy(coords, l);
        acc += w * g(x, y);
    }
    area * acc
}

fn tri_area(c: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1])).abs()
}

/// Whole-triangle classification against a region, conservative on overlap.
enum Overlap {
    Inside,
    Outside,
    Partial,
}

fn classify(region: Region, c: &[[f64; 2]; 3]) -> Overlap {
    match region {
        Region::Disk { cx, cy, r } => {
            let inside = c.iter().filter(|p| region.contains(p[0], p[1])).count();
            if inside == 3 {
                // The disk is convex, so all vertices inside means the
                // triangle is contained.
                Overlap::Inside
            } else if inside == 0 {
                if dist_point_tri([cx, cy], c) >= r {
                    Overlap::Outside
                } else {
                    Overlap::Partial
                }
            } else {
                Overlap::Partial
            }
        }
        Region::HalfPlaneX { c: xc } => {
            let inside = c.iter().filter(|p| p[0] < xc).count();
            if inside == 3 {
                Overlap::Inside
            } else if inside == 0 {
                Overlap::Outside
            } else {
                Overlap::Partial
            }
        }
    }
}

fn dist_point_tri(p: [f64; 2], c: &[[f64; 2]; 3]) -> f64 {
    // Inside test by signed areas (orientation-independent).
    let sign = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let d0 = sign(c[0], c[1]);
    let d1 = sign(c[1], c[2]);
    let d2 = sign(c[2], c[0]);
    let has_neg = d0 < 0.0 || d1 < 0.0 || d2 < 0.0;
    let has_pos = d0 > 0.0 || d1 > 0.0 || d2 > 0.0;
    if !(has_neg && has_pos) {
        return 0.0;
    }
    let seg = |a: [f64; 2], b: [f64; 2]| {
        let ab = [b[0] - a[0], b[1] - a[1]];
        let ap = [p[0] - a[0], p[1] - a[1]];
        let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
        let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
    };
    seg(c[0], c[1]).min(seg(c[1], c[2])).min(seg(c[2], c[0]))
}

/// `integral_T chi_region * weight` by adaptive subdivision.
///
/// Children fully inside contribute their exact weighted integral (the
/// edge-midpoint rule, exact for the linear weights used here); fully
/// outside contribute zero; straddling children recurse, falling back to the
/// degree-4 rule at the bottom level.
pub fn indicator_weighted_integral(
    region: Region,
    coords: &[[f64; 2]; 3],
    weight: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    fn go(region: Region, c: &[[f64; 2]; 3], weight: &dyn Fn(f64, f64) -> f64, depth: usize) -> f64 {
        let area = tri_area(c);
        match classify(region, c) {
            Overlap::Inside => integrate(c, area, EDGE_MIDPOINT, weight),
            Overlap::Outside => 0.0,
            Overlap::Partial => {
                if depth == 0 {
                    return integrate(c, area, DEGREE4, |x, y| {
                        if region.contains(x, y) {
                            weight(x, y)
                        } else {
                            0.0
                        }
                    });
                }
                let m01 = [(c[0][0] + c[1][0]) / 2.0, (c[0][1] + c[1][1]) / 2.0];
                let m12 = [(c[1][0] + c[2][0]) / 2.0, (c[1][1] + c[2][1]) / 2.0];
                let m20 = [(c[2][0] + c[0][0]) / 2.0, (c[2][1] + c[0][1]) / 2.0];
                go(region, &[c[0], m01, m20], weight, depth - 1)
                    + go(region, &[m01, c[1], m12], weight, depth - 1)
                    + go(region, &[m20, m12, c[2]], weight, depth - 1)
                    + go(region, &[m01, m12, m20], weight, depth - 1)
            }
        }
    }
    go(region, coords, weight, INDICATOR_DEPTH)
}

/// `integral_T f * weight`, choosing the strategy by the kind of `f`.
pub fn integrate_func_weighted(
    coords: &[[f64; 2]; 3],
    area: f64,
    rule: QuadRule,
    f: &FuncSpec,
    weight: &dyn Fn(f64, f64) -> f64,
) -> f64 {
    match f.indicator_region() {
        Some(region) => indicator_weighted_integral(region, coords, weight),
        None => integrate(coords, area, rule, |x, y| f.eval(x, y) * weight(x, y)),
    }
}
