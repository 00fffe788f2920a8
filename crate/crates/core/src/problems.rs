//! Exact solutions of the benchmark problems.

use std::f64::consts::PI;

use crate::mesh::{Point, Rect};

/// Exact velocity, pressure and forcing of an incompressible flow.
pub trait ExactSolution: Sync {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2];

    /// `grad[a][b] = d u_a / d x_b`.
    fn velocity_gradient(&self, t: f64, x: Point) -> [[f64; 2]; 2];

    /// Zero-mean exact pressure, if known.
    fn pressure(&self, t: f64, x: Point) -> Option<f64>;

    fn forcing(&self, t: f64, x: Point) -> [f64; 2];

    /// False when `pressure` is not a zero-mean reference and must not be
    /// used for error norms.
    fn pressure_is_reference(&self) -> bool {
        true
    }

    /// True when the forcing does not depend on time.
    fn steady_forcing(&self) -> bool {
        false
    }

    fn nu(&self) -> f64;

    fn domain(&self) -> Rect;
}

/// `u = min(t, 1) grad chi`, `chi = x^3 y - y^3 x` on the unit square, with
/// forcing `f = amplitude * grad chi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialFlow {
    pub nu: f64,
    pub forcing_amplitude: f64,
}

impl PotentialFlow {
    pub fn chi(x: Point) -> f64 {
        x[0].powi(3) * x[1] - x[1].powi(3) * x[0]
    }

    pub fn grad_chi(x: Point) -> [f64; 2] {
        let (a, b) = (x[0], x[1]);
        [3.0 * a * a * b - b.powi(3), a.powi(3) - 3.0 * a * b * b]
    }

    fn ramp(t: f64) -> (f64, f64) {
        if t < 1.0 {
            (t, 1.0)
        } else {
            (1.0, 0.0)
        }
    }
}

impl ExactSolution for PotentialFlow {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2] {
        let s = Self::ramp(t).0;
        let g = Self::grad_chi(x);
        [s * g[0], s * g[1]]
    }

    fn velocity_gradient(&self, t: f64, x: Point) -> [[f64; 2]; 2] {
        let s = Self::ramp(t).0;
        let (a, b) = (x[0], x[1]);
        let h = [[6.0 * a * b, 3.0 * a * a - 3.0 * b * b], [3.0 * a * a - 3.0 * b * b, -6.0 * a * b]];
        h.map(|r| r.map(|v| s * v))
    }

    fn pressure(&self, t: f64, x: Point) -> Option<f64> {
        // |grad chi|^2 = r^6, whose mean over the unit square is 24/35
        let (s, ds) = Self::ramp(t);
        let r2 = x[0] * x[0] + x[1] * x[1];
        Some((self.forcing_amplitude - ds) * Self::chi(x) - 0.5 * s * s * (r2.powi(3) - 24.0 / 35.0))
    }

    fn forcing(&self, _t: f64, x: Point) -> [f64; 2] {
        let g = Self::grad_chi(x);
        [self.forcing_amplitude * g[0], self.forcing_amplitude * g[1]]
    }

    fn steady_forcing(&self) -> bool {
        true
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn domain(&self) -> Rect {
        Rect::unit()
    }
}

/// The Gresho standing vortex on `(-0.5, 0.5)^2`, inviscid and unforced.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Gresho;

impl Gresho {
    /// Pressure constant of the annulus (see `pressure`).
    pub fn beta() -> f64 {
        -12.5 * 0.4f64.powi(2) + 20.0 * 0.4f64.powi(2) - 4.0 * 0.4f64.ln()
    }

    pub fn gamma() -> f64 {
        Self::beta() - 20.0 * 0.2 + 4.0 * 0.2f64.ln()
    }

    /// Azimuthal speed at radius `r`.
    pub fn speed(r: f64) -> f64 {
        if r <= 0.2 {
            5.0 * r
        } else if r <= 0.4 {
            2.0 - 5.0 * r
        } else {
            0.0
        }
    }

    /// Closed-form kinetic energy `2 pi / 75`.
    pub fn exact_energy() -> f64 {
        2.0 * PI / 75.0
    }

    /// Closed-form angular momentum `int u_1 y - u_2 x = -7 pi / 375`.
    pub fn exact_angular_momentum() -> f64 {
        -7.0 * PI / 375.0
    }
}

impl ExactSolution for Gresho {
    fn velocity(&self, _t: f64, x: Point) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let s = Self::speed(r) / r;
        [-s * x[1], s * x[0]]
    }

    fn velocity_gradient(&self, _t: f64, x: Point) -> [[f64; 2]; 2] {
        // u = g(r) (-y, x) with g = speed / r
        let r = x[0].hypot(x[1]);
        let (g, dg) = if r <= 0.2 {
            (5.0, 0.0)
        } else if r <= 0.4 {
            (2.0 / r - 5.0, -2.0 / (r * r))
        } else {
            (0.0, 0.0)
        };
        if r == 0.0 {
            return [[0.0, -g], [g, 0.0]];
        }
        let (rx, ry) = (x[0] / r, x[1] / r);
        [[-x[1] * dg * rx, -g - x[1] * dg * ry], [g + x[0] * dg * rx, x[0] * dg * ry]]
    }

    /// The annulus constant `beta` leaves a jump at `r = 0.4`, so this
    /// pressure is not used for error norms.
    fn pressure(&self, _t: f64, x: Point) -> Option<f64> {
        let r = x[0].hypot(x[1]);
        Some(if r <= 0.2 {
            12.5 * r * r + Self::gamma()
        } else if r <= 0.4 {
            12.5 * r * r - 20.0 * r + 4.0 * r.ln() + Self::beta()
        } else {
            0.0
        })
    }

    fn forcing(&self, _t: f64, _x: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn pressure_is_reference(&self) -> bool {
        false
    }

    fn steady_forcing(&self) -> bool {
        true
    }

    fn nu(&self) -> f64 {
        0.0
    }

    fn domain(&self) -> Rect {
        Rect::centered_unit()
    }
}

/// `u = u0(x) exp(-8 pi^2 nu t)` with `u0 = (sin 2 pi x sin 2 pi y, cos 2 pi x cos 2 pi y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeVortex {
    pub nu: f64,
}

impl LatticeVortex {
    fn decay(&self, t: f64) -> f64 {
        (-8.0 * PI * PI * self.nu * t).exp()
    }
}

impl ExactSolution for LatticeVortex {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2] {
        let e = self.decay(t);
        let (a, b) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        [e * a.sin() * b.sin(), e * a.cos() * b.cos()]
    }

    fn velocity_gradient(&self, t: f64, x: Point) -> [[f64; 2]; 2] {
        let e = 2.0 * PI * self.decay(t);
        let (a, b) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
        [[e * a.cos() * b.sin(), e * a.sin() * b.cos()], [-e * a.sin() * b.cos(), -e * a.cos() * b.sin()]]
    }

    fn pressure(&self, t: f64, x: Point) -> Option<f64> {
        let e = self.decay(t);
        Some(0.25 * e * e * ((4.0 * PI * x[0]).cos() - (4.0 * PI * x[1]).cos()))
    }

    fn forcing(&self, _t: f64, _x: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn steady_forcing(&self) -> bool {
        true
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn domain(&self) -> Rect {
        Rect::unit()
    }
}

/// Manufactured flow `u = cos(t) curl psi`, `psi = x^2 (1-x)^2 y^2 (1-y)^2`,
/// `p = sin(t) cos(pi x) cos(pi y)` on the unit square, with matching forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub nu: f64,
}

fn bump(s: f64) -> [f64; 4] {
    // s^2 (1 - s)^2 and its first three derivatives
    [
        s * s * (1.0 - s) * (1.0 - s),
        2.0 * s - 6.0 * s * s + 4.0 * s.powi(3),
        2.0 - 12.0 * s + 12.0 * s * s,
        -12.0 + 24.0 * s,
    ]
}

impl Manufactured {
    /// `curl psi = (psi_y, -psi_x)`.
    pub fn curl_psi(x: Point) -> [f64; 2] {
        let (bx, by) = (bump(x[0]), bump(x[1]));
        [bx[0] * by[1], -bx[1] * by[0]]
    }

    pub fn curl_psi_gradient(x: Point) -> [[f64; 2]; 2] {
        let (bx, by) = (bump(x[0]), bump(x[1]));
        [[bx[1] * by[1], bx[0] * by[2]], [-bx[2] * by[0], -bx[1] * by[1]]]
    }

    fn curl_psi_laplacian(x: Point) -> [f64; 2] {
        let (bx, by) = (bump(x[0]), bump(x[1]));
        [bx[2] * by[1] + bx[0] * by[3], -(bx[3] * by[0] + bx[1] * by[2])]
    }
}

impl ExactSolution for Manufactured {
    fn velocity(&self, t: f64, x: Point) -> [f64; 2] {
        Self::curl_psi(x).map(|v| t.cos() * v)
    }

    fn velocity_gradient(&self, t: f64, x: Point) -> [[f64; 2]; 2] {
        Self::curl_psi_gradient(x).map(|r| r.map(|v| t.cos() * v))
    }

    fn pressure(&self, t: f64, x: Point) -> Option<f64> {
        Some(t.sin() * (PI * x[0]).cos() * (PI * x[1]).cos())
    }

    fn forcing(&self, t: f64, x: Point) -> [f64; 2] {
        let c = t.cos();
        let u = Self::curl_psi(x);
        let g = Self::curl_psi_gradient(x);
        let lap = Self::curl_psi_laplacian(x);
        let gp = [
            -PI * t.sin() * (PI * x[0]).sin() * (PI * x[1]).cos(),
            -PI * t.sin() * (PI * x[0]).cos() * (PI * x[1]).sin(),
        ];
        let mut f = [0.0; 2];
        for a in 0..2 {
            let conv = c * c * (u[0] * g[a][0] + u[1] * g[a][1]);
            f[a] = -t.sin() * u[a] - self.nu * c * lap[a] + conv + gp[a];
        }
        f
    }

    fn nu(&self) -> f64 {
        self.nu
    }

    fn domain(&self) -> Rect {
        Rect::unit()
    }
}
