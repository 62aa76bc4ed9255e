//! Upper half-plane geometry: points, determinant-one Möbius maps and the
//! elliptic rotations every group in this crate is built from.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{MaassError, Result};

/// Entrywise tolerance for "is ±identity" tests.
pub const IDENTITY_TOL: f64 = 1e-10;

/// A point `x + iy` with `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperHalfPoint {
    x: f64,
    y: f64,
}

impl UpperHalfPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if y > 0.0 && x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(MaassError::InvalidPoint(y))
        }
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    /// Representative modulo `z -> z + 1` with `x` in `[-1/2, 1/2)`, and the
    /// integer shift that produced it.
    pub fn reduce_mod_one(&self) -> (Self, i64) {
        let k = (self.x + 0.5).floor();
        (
            Self {
                x: self.x - k,
                y: self.y,
            },
            -(k as i64),
        )
    }

    /// Mirror image `-x + iy`.
    pub fn mirror(&self) -> Self {
        Self {
            x: -self.x,
            y: self.y,
        }
    }
}

/// A real 2×2 matrix of determinant one, up to sign.
///
/// Entries are kept in canonical form: the first entry of `(a, c)` that is
/// not negligibly small is positive. Equality is still best tested with
/// [`Moebius::approx_eq`], which accepts either sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl Moebius {
    pub const IDENTITY: Moebius = Moebius {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    /// Builds the map from raw entries, dividing by `sqrt(ad - bc)`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(MaassError::Domain(format!(
                "matrix [[{a}, {b}], [{c}, {d}]] has determinant {det}, not positive"
            )));
        }
        Ok(Self::normalized(a, b, c, d))
    }

    fn normalized(a: f64, b: f64, c: f64, d: f64) -> Self {
        let s = (a * d - b * c).sqrt();
        let (a, b, c, d) = (a / s, b / s, c / s, d / s);
        let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
        let eps = 1e-13 * scale;
        let flip = if a.abs() > eps { a < 0.0 } else { c < 0.0 };
        if flip {
            Self {
                a: -a,
                b: -b,
                c: -c,
                d: -d,
            }
        } else {
            Self { a, b, c, d }
        }
    }

    /// The translation `z -> z + t`.
    pub fn translation(t: f64) -> Self {
        Self {
            a: 1.0,
            b: t,
            c: 0.0,
            d: 1.0,
        }
    }

    /// `T = [[1, 1], [0, 1]]`.
    pub fn t() -> Self {
        Self::translation(1.0)
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// `(az + b) / (cz + d)`.
    pub fn apply(&self, z: UpperHalfPoint) -> UpperHalfPoint {
        let w = self.apply_complex(z.to_complex());
        // A determinant-one real map sends y > 0 to y / |cz + d|^2 > 0; clamp
        // only guards against underflow for astronomically large |cz + d|.
        UpperHalfPoint {
            x: w.re,
            y: w.im.max(f64::MIN_POSITIVE),
        }
    }

    pub fn apply_complex(&self, z: Complex64) -> Complex64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    /// Height of the image of `z`, computed without forming the full quotient.
    pub fn image_height(&self, z: UpperHalfPoint) -> f64 {
        let re = self.c * z.x + self.d;
        let im = self.c * z.y;
        z.y / (re * re + im * im)
    }

    /// Matrix product `self · other`, i.e. apply `other` first.
    pub fn compose(&self, other: &Moebius) -> Moebius {
        let a = self.a * other.a + self.b * other.c;
        let b = self.a * other.b + self.b * other.d;
        let c = self.c * other.a + self.d * other.c;
        let d = self.c * other.b + self.d * other.d;
        Self::normalized(a, b, c, d)
    }

    pub fn inverse(&self) -> Moebius {
        Self::normalized(self.d, -self.b, -self.c, self.a)
    }

    pub fn pow(&self, k: u32) -> Moebius {
        (0..k).fold(Moebius::IDENTITY, |acc, _| acc.compose(self))
    }

    /// Largest entrywise distance to `±I`.
    pub fn distance_to_identity(&self) -> f64 {
        self.distance_to(&Moebius::IDENTITY)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.distance_to_identity() <= tol
    }

    /// Entrywise distance between the two maps, minimized over the sign.
    pub fn distance_to(&self, other: &Moebius) -> f64 {
        let p = self.entries();
        let q = other.entries();
        let plus = p.iter().zip(q.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let minus = p.iter().zip(q.iter()).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        plus.min(minus)
    }

    pub fn approx_eq(&self, other: &Moebius, tol: f64) -> bool {
        self.distance_to(other) <= tol
    }

    /// Center and radius of the isometric circle `|cz + d| = 1`, if `c != 0`.
    ///
    /// Products of many matrices carry rounding noise in `c`; anything below
    /// `1e-9` of the largest entry is taken to be an exact zero.
    pub fn isometric_circle(&self) -> Option<(f64, f64)> {
        let scale = self.a.abs().max(self.b.abs()).max(self.d.abs()).max(1.0);
        if self.c.abs() < 1e-9 * scale {
            None
        } else {
            Some((-self.d / self.c, 1.0 / self.c.abs()))
        }
    }

    /// Fixed point in the upper half-plane of an elliptic map (`|tr| < 2`).
    pub fn elliptic_fixed_point(&self) -> Result<UpperHalfPoint> {
        let tr = self.trace();
        if tr.abs() >= 2.0 || self.c.abs() < 1e-300 {
            return Err(MaassError::Domain(format!(
                "map with trace {tr} is not elliptic"
            )));
        }
        let disc = (4.0 - tr * tr).sqrt();
        let x = (self.a - self.d) / (2.0 * self.c);
        let y = disc / (2.0 * self.c.abs());
        UpperHalfPoint::new(x, y)
    }
}

impl fmt::Display for Moebius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{:.12}, {:.12}], [{:.12}, {:.12}]]",
            self.a, self.b, self.c, self.d
        )
    }
}

/// Rotation by `2π/k` about `x + iy`.
///
/// The raw matrix `((cy - sx, s(x² + y²)), (-s, cy + sx))` with
/// `c = cos(π/k)`, `s = sin(π/k)` has determinant `y²`; the result is
/// divided by `y`.
pub fn rotation_generator(k: u32, x: f64, y: f64) -> Result<Moebius> {
    if k < 2 {
        return Err(MaassError::Domain(format!("rotation order {k} < 2")));
    }
    if !(y > 0.0) || !y.is_finite() || !x.is_finite() {
        return Err(MaassError::Domain(format!(
            "rotation center {x} + {y}i is not in the upper half-plane"
        )));
    }
    let (s, c) = (PI / k as f64).sin_cos();
    Moebius::new(
        (c * y - s * x) / y,
        s * (x * x + y * y) / y,
        -s / y,
        (c * y + s * x) / y,
    )
}
