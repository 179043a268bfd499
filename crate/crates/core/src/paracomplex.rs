//! Paracomplex scalars `x + eps*y` with `eps^2 = +1`, and the idempotent
//! splitting of vectors and sampled curves into their `E+`/`E-` components.
//!
//! Values are stored in the `(x, y)` basis; the idempotent basis
//! `e+ = (1+eps)/2`, `e- = (1-eps)/2` is reached through [`split`]/[`join`],
//! which diagonalize the multiplication: `split(a*b).plus` is the product of
//! the plus components, coordinate by coordinate.

use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParacomplexError {
    #[error("split vector halves have lengths {plus} and {minus}")]
    LengthMismatch { plus: usize, minus: usize },
}

pub type Result<T> = std::result::Result<T, ParacomplexError>;

/// A paracomplex number `x + eps*y` where `eps^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParacomplexNumber {
    x: f64,
    y: f64,
}

impl ParacomplexNumber {
    pub const ZERO: Self = ParacomplexNumber { x: 0.0, y: 0.0 };
    pub const ONE: Self = ParacomplexNumber { x: 1.0, y: 0.0 };
    /// The paracomplex unit `eps`.
    pub const EPSILON: Self = ParacomplexNumber { x: 0.0, y: 1.0 };
    /// Idempotent `e+ = (1 + eps)/2`.
    pub const E_PLUS: Self = ParacomplexNumber { x: 0.5, y: 0.5 };
    /// Idempotent `e- = (1 - eps)/2`.
    pub const E_MINUS: Self = ParacomplexNumber { x: 0.5, y: -0.5 };

    pub fn new(x: f64, y: f64) -> Self {
        ParacomplexNumber { x, y }
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    pub fn conj(self) -> Self {
        ParacomplexNumber { x: self.x, y: -self.y }
    }

    /// The (indefinite) norm `z * conj(z) = x^2 - y^2`; negative inside the
    /// light cone `|y| > |x|`.
    pub fn norm(self) -> f64 {
        self.x * self.x - self.y * self.y
    }

    pub fn scale(self, c: f64) -> Self {
        ParacomplexNumber { x: c * self.x, y: c * self.y }
    }
}

impl Add for ParacomplexNumber {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        ParacomplexNumber { x: self.x + rhs.x, y: self.y + rhs.y }
    }
}

impl Sub for ParacomplexNumber {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        ParacomplexNumber { x: self.x - rhs.x, y: self.y - rhs.y }
    }
}

impl Neg for ParacomplexNumber {
    type Output = Self;
    fn neg(self) -> Self {
        ParacomplexNumber { x: -self.x, y: -self.y }
    }
}

impl Mul for ParacomplexNumber {
    type Output = Self;
    /// `(x1 + eps y1)(x2 + eps y2) = (x1 x2 + y1 y2) + eps (x1 y2 + x2 y1)`.
    fn mul(self, rhs: Self) -> Self {
        ParacomplexNumber {
            x: self.x * rhs.x + self.y * rhs.y,
            y: self.x * rhs.y + rhs.x * self.y,
        }
    }
}

/// Free-function form of the paracomplex product.
pub fn pc_mul(a: ParacomplexNumber, b: ParacomplexNumber) -> ParacomplexNumber {
    a * b
}

/// Free-function form of the paracomplex norm `x^2 - y^2`.
pub fn pc_norm(z: ParacomplexNumber) -> f64 {
    z.norm()
}

/// A paracomplex vector written in the idempotent basis: per-coordinate
/// components along `e+` and `e-`. The two halves always have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector {
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl SplitVector {
    pub fn new(plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(ParacomplexError::LengthMismatch {
                plus: plus.len(),
                minus: minus.len(),
            });
        }
        Ok(SplitVector { plus, minus })
    }

    pub fn plus(&self) -> &[f64] {
        &self.plus
    }

    pub fn minus(&self) -> &[f64] {
        &self.minus
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }
}

/// Scalar idempotent expansion `z = (x+y) e+ + (x-y) e-`.
pub fn split_scalar(z: ParacomplexNumber) -> (f64, f64) {
    (z.x + z.y, z.x - z.y)
}

/// Inverse of [`split_scalar`].
pub fn join_scalar(plus: f64, minus: f64) -> ParacomplexNumber {
    ParacomplexNumber::new((plus + minus) / 2.0, (plus - minus) / 2.0)
}

/// Coordinatewise idempotent expansion of a paracomplex vector.
pub fn split(v: &[ParacomplexNumber]) -> SplitVector {
    let plus = v.iter().map(|z| z.x + z.y).collect();
    let minus = v.iter().map(|z| z.x - z.y).collect();
    SplitVector { plus, minus }
}

/// Reassembles a paracomplex vector from its idempotent components.
pub fn join(sv: &SplitVector) -> Vec<ParacomplexNumber> {
    sv.plus
        .iter()
        .zip(&sv.minus)
        .map(|(&p, &m)| join_scalar(p, m))
        .collect()
}

/// `E+` projection of a sampled paracomplex curve: for each sample (a
/// paracomplex vector) the plus half of its splitting.
pub fn project_plus(curve: &[Vec<ParacomplexNumber>]) -> Vec<Vec<f64>> {
    curve.iter().map(|sample| split(sample).plus).collect()
}
