//! Finite-dimensional representation of the Hilbert space.
//!
//! Elements are coefficient vectors under one of two inner products:
//! `GridL2` holds samples of a function on a uniform grid of [0,1] and uses
//! composite trapezoid weights, so inner products approximate the L²[0,1]
//! pairing at O(N⁻²); `Abstract` is plain Euclidean ℝ^d.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default grid resolution for `GridL2` elements.
pub const DEFAULT_N_GRID: usize = 1025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Representation {
    /// Samples on the uniform grid of [0,1], trapezoid-weighted inner product.
    GridL2,
    /// Euclidean coordinates.
    Abstract,
}

/// An element of the Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceElement {
    coeffs: Vec<f64>,
    repr: Representation,
}

/// Closed-form functions on [0,1] used to build grid elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FunctionExpr {
    /// c·sin(x)
    Sin { c: f64 },
    /// c·cos(x)
    Cos { c: f64 },
    /// Σ coeffs[k]·x^k
    Poly { coeffs: Vec<f64> },
    /// the constant c
    Const { c: f64 },
}

impl FunctionExpr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FunctionExpr::Sin { c } => c * x.sin(),
            FunctionExpr::Cos { c } => c * x.cos(),
            FunctionExpr::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            FunctionExpr::Const { c } => *c,
        }
    }
}

impl SpaceElement {
    pub fn new(coeffs: Vec<f64>, repr: Representation) -> Self {
        assert!(coeffs.len() >= 1, "space element must have at least one coefficient");
        SpaceElement { coeffs, repr }
    }

    /// Zero element of the given dimension.
    pub fn zero(dim: usize, repr: Representation) -> Self {
        SpaceElement::new(vec![0.0; dim], repr)
    }

    /// A one-dimensional Euclidean element (scalar oracle scenarios).
    pub fn scalar(v: f64) -> Self {
        SpaceElement::new(vec![v], Representation::Abstract)
    }

    /// Grid samples of a closed-form function on [0,1].
    pub fn from_function(expr: &FunctionExpr, n_grid: usize) -> Self {
        assert!(n_grid >= 2, "grid must have at least 2 points");
        let h = 1.0 / (n_grid - 1) as f64;
        let coeffs = (0..n_grid).map(|i| expr.eval(i as f64 * h)).collect();
        SpaceElement::new(coeffs, Representation::GridL2)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    fn check_compatible(&self, other: &SpaceElement) -> Result<()> {
        if self.repr != other.repr {
            return Err(Error::RepresentationMismatch);
        }
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coeffs.len(),
                got: other.coeffs.len(),
            });
        }
        Ok(())
    }

    /// Inner product. GridL2 uses composite trapezoid weights on [0,1].
    pub fn inner(&self, other: &SpaceElement) -> Result<f64> {
        self.check_compatible(other)?;
        let n = self.coeffs.len();
        match self.repr {
            Representation::Abstract => {
                Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
            }
            Representation::GridL2 => {
                let h = 1.0 / (n - 1) as f64;
                let mut acc = 0.5 * (self.coeffs[0] * other.coeffs[0]
                    + self.coeffs[n - 1] * other.coeffs[n - 1]);
                for i in 1..n - 1 {
                    acc += self.coeffs[i] * other.coeffs[i];
                }
                Ok(acc * h)
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("element is compatible with itself").sqrt()
    }

    pub fn scale(&self, c: f64) -> SpaceElement {
        SpaceElement::new(self.coeffs.iter().map(|v| c * v).collect(), self.repr)
    }

    pub fn add(&self, other: &SpaceElement) -> Result<SpaceElement> {
        self.check_compatible(other)?;
        Ok(SpaceElement::new(
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
            self.repr,
        ))
    }

    pub fn sub(&self, other: &SpaceElement) -> Result<SpaceElement> {
        self.check_compatible(other)?;
        Ok(SpaceElement::new(
            self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
            self.repr,
        ))
    }

    /// self += c·other, in place.
    pub fn axpy(&mut self, c: f64, other: &SpaceElement) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.coeffs {
            *v *= c;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&v| v == 0.0)
    }
}
