//! Nonlinearity exponents and the scalar constants derived from `(m, n)`.
//!
//! Two different constants share the Greek letter lambda in the literature on
//! this equation: the Barenblatt decay exponent `n / (n(m-1) + 2)` and the
//! smoothing exponent `n(m-1) + 2`. They are kept as separately named fields
//! and nothing in this crate refers to a bare "lambda".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Critical exponent `m_c = (n - 2)_+ / n`.
pub fn critical_exponent(n: usize) -> f64 {
    n.saturating_sub(2) as f64 / n as f64
}

/// A validated nonlinearity power `m > m_c` in dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponent {
    m: f64,
    n: usize,
}

impl Exponent {
    pub fn new(m: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(n));
        }
        let critical = critical_exponent(n);
        if !m.is_finite() || m <= critical {
            return Err(Error::SubcriticalExponent { m, n, critical });
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn critical(&self) -> f64 {
        critical_exponent(self.n)
    }

    /// Same dimension, different power.
    pub fn with_m(&self, m: f64) -> Result<Self> {
        Self::new(m, self.n)
    }

    pub fn constants(&self) -> DerivedConstants {
        derive_constants(self)
    }
}

/// Shorthand for [`Exponent::new`].
pub fn make_exponent(m: f64, n: usize) -> Result<Exponent> {
    Exponent::new(m, n)
}

/// Constants that depend only on the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub m_c: f64,
    /// `n / (n(m-1) + 2)`: decay rate of the Barenblatt maximum.
    pub barenblatt_lambda: f64,
    /// `lambda (1-m) / (2 m n)`, defined only for fast diffusion.
    pub barenblatt_k: Option<f64>,
    /// `n(m-1) + 2`: exponent of the L1-Linf smoothing effect and local bounds.
    pub smoothing_lambda: f64,
    /// `1 + 1/n + 1/(mn)`, from the parabolic Sobolev inequality.
    pub kappa_sobolev: f64,
    /// `1 + 1/m + 1/(mn)`, from the Dirichlet stability statement.
    pub kappa_stability: f64,
    pub m_sharp: f64,
    pub m_flat: f64,
}

impl DerivedConstants {
    /// The smaller of the two kappa variants; convergence exponents `s` are
    /// checked against `2 * kappa_min`.
    pub fn kappa_min(&self) -> f64 {
        self.kappa_sobolev.min(self.kappa_stability)
    }
}

pub fn derive_constants(e: &Exponent) -> DerivedConstants {
    let m = e.m;
    let n = e.n as f64;
    let smoothing_lambda = n * (m - 1.0) + 2.0;
    let barenblatt_lambda = n / smoothing_lambda;
    let barenblatt_k = (m < 1.0).then(|| barenblatt_lambda * (1.0 - m) / (2.0 * m * n));
    DerivedConstants {
        m_c: critical_exponent(e.n),
        barenblatt_lambda,
        barenblatt_k,
        smoothing_lambda,
        kappa_sobolev: 1.0 + 1.0 / n + 1.0 / (m * n),
        kappa_stability: 1.0 + 1.0 / m + 1.0 / (m * n),
        m_sharp: m.max(1.0),
        m_flat: m.min(1.0),
    }
}
