//! Realizations of the strongly continuous semigroup T(t).
//!
//! Three model kinds are supported: `Scalar(a)` with T(t) = e^{at}·I,
//! `Diagonal(λ)` acting as e^{λ_k t} on coordinate k, and `Matrix(A)` with
//! T(t) = exp(tA) computed by scaling-and-squaring. Every model carries a
//! growth pair (M, a) with ‖T(t)‖ ≤ M e^{at}; for the Matrix kind the pair is
//! user-supplied and validated numerically on a probe grid at construction.

use crate::error::{Error, Result};
use crate::space::{Representation, SpaceElement};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub enum SemigroupKind {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Matrix(DMatrix<f64>),
}

#[derive(Debug, Clone)]
pub struct SemigroupModel {
    kind: SemigroupKind,
    m: f64,
    a: f64,
}

impl SemigroupModel {
    /// T(t) = e^{at}·I with growth pair (1, a).
    pub fn scalar(a: f64) -> Self {
        SemigroupModel { kind: SemigroupKind::Scalar(a), m: 1.0, a }
    }

    /// T(t) = diag(e^{λ_k t}) with growth pair (1, max λ_k).
    pub fn diagonal(lambdas: Vec<f64>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidParameter("diagonal semigroup needs at least one eigenvalue".into()));
        }
        let a = lambdas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(SemigroupModel { kind: SemigroupKind::Diagonal(lambdas), m: 1.0, a })
    }

    /// T(t) = exp(tA). The caller supplies a candidate growth pair (M, a),
    /// which is validated on basis vectors over t ∈ {0, 0.1, …, 2}.
    pub fn matrix(a_mat: DMatrix<f64>, m: f64, a: f64) -> Result<Self> {
        if !a_mat.is_square() {
            return Err(Error::InvalidParameter("generator matrix must be square".into()));
        }
        if m < 1.0 {
            return Err(Error::InvalidParameter(format!("growth constant M must be ≥ 1, got {m}")));
        }
        let model = SemigroupModel { kind: SemigroupKind::Matrix(a_mat), m, a };
        model.validate_growth()?;
        Ok(model)
    }

    fn validate_growth(&self) -> Result<()> {
        let n = self.dim_constraint().unwrap_or(1);
        for k in 0..=20 {
            let t = 0.1 * k as f64;
            for i in 0..n {
                let mut e = SpaceElement::zero(n, Representation::Abstract);
                e.coeffs_mut()[i] = 1.0;
                let y = self.apply(t, &e)?;
                let allowed = self.m * (self.a * t).exp();
                if y.norm() > allowed * (1.0 + 1e-9) {
                    return Err(Error::GrowthBoundViolation {
                        m: self.m,
                        a: self.a,
                        t,
                        observed: y.norm(),
                        allowed,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &SemigroupKind {
        &self.kind
    }

    /// The dimension the model acts on, if constrained (Scalar acts on any).
    pub fn dim_constraint(&self) -> Option<usize> {
        match &self.kind {
            SemigroupKind::Scalar(_) => None,
            SemigroupKind::Diagonal(l) => Some(l.len()),
            SemigroupKind::Matrix(m) => Some(m.nrows()),
        }
    }

    /// Growth pair (M, a) with ‖T(t)‖ ≤ M e^{at}.
    pub fn growth_bound(&self) -> (f64, f64) {
        (self.m, self.a)
    }

    fn check_dims(&self, x: &SpaceElement) -> Result<()> {
        if let Some(d) = self.dim_constraint() {
            if x.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
            }
        }
        Ok(())
    }

    /// T(t)x.
    pub fn apply(&self, t: f64, x: &SpaceElement) -> Result<SpaceElement> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.check_dims(x)?;
        match &self.kind {
            SemigroupKind::Scalar(a) => Ok(x.scale((a * t).exp())),
            SemigroupKind::Diagonal(lambdas) => {
                let coeffs = x
                    .coeffs()
                    .iter()
                    .zip(lambdas)
                    .map(|(v, l)| v * (l * t).exp())
                    .collect();
                Ok(SpaceElement::new(coeffs, x.representation()))
            }
            SemigroupKind::Matrix(a_mat) => {
                let e = (a_mat.clone() * t).exp();
                let v = DVector::from_column_slice(x.coeffs());
                let y = e * v;
                Ok(SpaceElement::new(y.as_slice().to_vec(), x.representation()))
            }
        }
    }

    /// T*(t)g, the adjoint with respect to the element's inner product.
    ///
    /// Scalar and Diagonal kinds are self-adjoint. For the Matrix kind on a
    /// GridL2 element the transpose is conjugated by the trapezoid weights so
    /// that ⟨T(t)x, g⟩ = ⟨x, T*(t)g⟩ holds in the weighted product.
    pub fn apply_adjoint(&self, t: f64, g: &SpaceElement) -> Result<SpaceElement> {
        if t < 0.0 {
            return Err(Error::NegativeTime(t));
        }
        self.check_dims(g)?;
        match &self.kind {
            SemigroupKind::Scalar(_) | SemigroupKind::Diagonal(_) => self.apply(t, g),
            SemigroupKind::Matrix(a_mat) => {
                let e = (a_mat.transpose() * t).exp();
                match g.representation() {
                    Representation::Abstract => {
                        let v = DVector::from_column_slice(g.coeffs());
                        let y = e * v;
                        Ok(SpaceElement::new(y.as_slice().to_vec(), g.representation()))
                    }
                    Representation::GridL2 => {
                        // W⁻¹ exp(tAᵀ) W with W the trapezoid weight diagonal
                        // (the common factor h cancels).
                        let n = g.dim();
                        let mut w = DVector::from_element(n, 1.0);
                        w[0] = 0.5;
                        w[n - 1] = 0.5;
                        let v = DVector::from_iterator(n, g.coeffs().iter().zip(w.iter()).map(|(c, wi)| c * wi));
                        let mut y = e * v;
                        for i in 0..n {
                            y[i] /= w[i];
                        }
                        Ok(SpaceElement::new(y.as_slice().to_vec(), g.representation()))
                    }
                }
            }
        }
    }
}
