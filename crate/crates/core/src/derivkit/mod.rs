//! Exact high-order partial derivatives of chart-local scalar fields.
//!
//! The workhorse is [`Jet`], a truncated multivariate Taylor expansion that
//! propagates through arithmetic and the elementary functions, so every
//! derivative comes out exact to floating round-off. [`partial_fd`] provides
//! an independent finite-difference estimate used to cross-check jets
//! throughout the test suites.

mod fd;
mod jet;

pub use fd::{partial_fd, StepPolicy};
pub use jet::{Jet, JetSpace};

use crate::error::{Error, Result};

/// Maximum total derivative order supported by [`taylor_jet`].
pub const MAX_JET_ORDER: usize = 5;

/// Arithmetic shared by plain numbers and jets, so scalar fields can be
/// written once and evaluated either for values or for derivatives.
///
/// The partial operations return a domain error instead of silently producing
/// NaN: division by zero, even roots and logarithms of non-positive values,
/// and non-integer powers of non-positive bases are all rejected.
pub trait Scalar:
    Clone
    + Sized
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Neg<Output = Self>
{
    /// A constant in the same algebra as `self`.
    fn lift(&self, v: f64) -> Self;
    /// Point value (the order-zero part).
    fn value(&self) -> f64;
    fn div(self, rhs: Self) -> Result<Self>;
    fn sqrt(self) -> Result<Self>;
    fn exp(self) -> Self;
    fn ln(self) -> Result<Self>;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powi(self, k: i32) -> Result<Self>;
    fn powf(self, e: f64) -> Result<Self>;
    fn scale(self, c: f64) -> Self;
}

impl Scalar for f64 {
    fn lift(&self, v: f64) -> f64 {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn div(self, rhs: f64) -> Result<f64> {
        if rhs == 0.0 || !rhs.is_finite() {
            return Err(Error::Domain(format!("division by {rhs}")));
        }
        Ok(self / rhs)
    }

    fn sqrt(self) -> Result<f64> {
        if self < 0.0 {
            return Err(Error::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(self))
    }

    fn exp(self) -> f64 {
        f64::exp(self)
    }

    fn ln(self) -> Result<f64> {
        if self <= 0.0 {
            return Err(Error::Domain(format!("ln of non-positive value {self}")));
        }
        Ok(f64::ln(self))
    }

    fn sin(self) -> f64 {
        f64::sin(self)
    }

    fn cos(self) -> f64 {
        f64::cos(self)
    }

    fn powi(self, k: i32) -> Result<f64> {
        if self == 0.0 && k < 0 {
            return Err(Error::Domain("zero raised to a negative power".into()));
        }
        Ok(f64::powi(self, k))
    }

    fn powf(self, e: f64) -> Result<f64> {
        if self < 0.0 || (self == 0.0 && e < 0.0) {
            return Err(Error::Domain(format!("powf base {self} with exponent {e}")));
        }
        Ok(f64::powf(self, e))
    }

    fn scale(self, c: f64) -> f64 {
        self * c
    }
}

impl Scalar for Jet {
    fn lift(&self, v: f64) -> Jet {
        Jet::constant(self.space(), v)
    }

    fn value(&self) -> f64 {
        Jet::value(self)
    }

    fn div(self, rhs: Jet) -> Result<Jet> {
        Jet::div(&self, &rhs)
    }

    fn sqrt(self) -> Result<Jet> {
        Jet::sqrt(&self)
    }

    fn exp(self) -> Jet {
        Jet::exp(&self)
    }

    fn ln(self) -> Result<Jet> {
        Jet::ln(&self)
    }

    fn sin(self) -> Jet {
        Jet::sin(&self)
    }

    fn cos(self) -> Jet {
        Jet::cos(&self)
    }

    fn powi(self, k: i32) -> Result<Jet> {
        Jet::powi(&self, k)
    }

    fn powf(self, e: f64) -> Result<Jet> {
        Jet::powf(&self, e)
    }

    fn scale(self, c: f64) -> Jet {
        Jet::scale(&self, c)
    }
}

/// All partial derivatives of `f` at `p` up to total order `order`, computed
/// by evaluating `f` on coordinate jets.
pub fn taylor_jet<F>(f: F, p: &[f64], order: usize) -> Result<Jet>
where
    F: FnOnce(&[Jet]) -> Result<Jet>,
{
    if order > MAX_JET_ORDER {
        return Err(Error::Invalid(format!(
            "jet order {order} exceeds supported maximum {MAX_JET_ORDER}"
        )));
    }
    if p.is_empty() {
        return Err(Error::Invalid("taylor_jet needs at least one variable".into()));
    }
    let space = JetSpace::get(p.len(), order);
    let vars: Vec<Jet> = (0..p.len()).map(|v| Jet::variable(&space, v, p[v])).collect();
    f(&vars)
}
