//! Quadrature on the reference triangle (barycentric points, weights summing
//! to one) and Gauss-Legendre rules on the unit interval.

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    /// Sum to one; multiply by `|K|` at the use site.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Degree used by every assembly routine.
pub const ASSEMBLY_DEGREE: usize = 8;
/// Degree used for error norms.
pub const VERIFICATION_DEGREE: usize = 10;

enum Orbit {
    Centroid(f64),
    /// `(a, a, 1 - 2a)` and permutations.
    Twofold(f64, f64),
    /// `(a, b, 1 - a - b)` and all six permutations.
    General(f64, f64, f64),
}

fn expand(orbits: &[Orbit], degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for o in orbits {
        match *o {
            Orbit::Centroid(w) => {
                points.push([1.0 / 3.0; 3]);
                weights.push(w);
            }
            Orbit::Twofold(a, w) => {
                let c = 1.0 - 2.0 * a;
                for p in [[a, a, c], [a, c, a], [c, a, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
            Orbit::General(a, b, w) => {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    points.push(p);
                    weights.push(w);
                }
            }
        }
    }
    QuadratureRule { points, weights, degree }
}

/// Symmetric triangle rule with positive weights exact for polynomials up to
/// `degree` (1 to 10). Requests are rounded up to the next tabulated rule.
pub fn triangle_rule(degree: usize) -> Result<QuadratureRule> {
    use Orbit::*;
    let rule = match degree {
        1 => expand(&[Centroid(1.0)], 1),
        2 => expand(&[Twofold(1.0 / 6.0, 1.0 / 3.0)], 2),
        3 | 4 => expand(
            &[
                Twofold(0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_7),
                Twofold(0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
            ],
            4,
        ),
        5 => expand(
            &[
                Centroid(0.225),
                Twofold(0.470_142_064_105_115_089_77, 0.132_394_152_788_506_180_74),
                Twofold(0.101_286_507_323_456_338_8, 0.125_939_180_544_827_152_6),
            ],
            5,
        ),
        6 => expand(
            &[
                Twofold(0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03),
                Twofold(0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_921),
                General(0.053_145_049_844_816_947_353, 0.310_352_451_033_784_405_42, 0.082_851_075_618_373_575_194),
            ],
            6,
        ),
        7 | 8 => expand(
            &[
                Centroid(0.144_315_607_677_787_168_25),
                Twofold(0.459_292_588_292_723_156_03, 0.095_091_634_267_284_624_794),
                Twofold(0.170_569_307_751_760_206_62, 0.103_217_370_534_718_250_28),
                Twofold(0.050_547_228_317_030_975_458, 0.032_458_497_623_198_080_311),
                General(0.008_394_777_409_957_605_337_2, 0.263_112_829_634_638_113_42, 0.027_230_314_174_434_994_265),
            ],
            8,
        ),
        9 | 10 => symmetrized_collapsed(6, 10),
        _ => return invalid(format!("unsupported quadrature degree {degree} (supported: 1..=10)")),
    };
    Ok(rule)
}

/// Collapsed Gauss-Legendre product rule averaged over the six vertex
/// permutations. `n` points per direction are exact to degree `2n - 2`.
fn symmetrized_collapsed(n: usize, degree: usize) -> QuadratureRule {
    let (x, w) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(6 * n * n);
    let mut weights = Vec::with_capacity(6 * n * n);
    for i in 0..n {
        for j in 0..n {
            let u = x[i];
            let v = x[j];
            // (u, v) in the unit square -> (l1, l2) = (u, v (1 - u)), jacobian (1 - u)
            let l1 = u;
            let l2 = v * (1.0 - u);
            let l0 = 1.0 - l1 - l2;
            let wt = 2.0 * w[i] * w[j] * (1.0 - u) / 6.0;
            for p in [[l0, l1, l2], [l0, l2, l1], [l1, l0, l2], [l1, l2, l0], [l2, l0, l1], [l2, l1, l0]] {
                points.push(p);
                weights.push(wt);
            }
        }
    }
    QuadratureRule { points, weights, degree }
}

/// Gauss-Legendre nodes and weights on `[0, 1]` (weights sum to one).
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
