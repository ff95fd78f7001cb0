//! Multivariate normal laws with structured covariances.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::designs::GramFactor;
use crate::error::{Error, Result};
use crate::rng::fill_standard_normal;

#[derive(Debug, Clone)]
pub enum Covariance {
    /// `s · I`.
    ScalarIdentity(f64),
    /// `s · (ΦᵀΦ)⁻¹`.
    ScaledGramInverse { scale: f64, gram: Arc<GramFactor> },
    /// `diag(v)`.
    Diagonal(DVector<f64>),
    /// Dense covariance with its lower Cholesky factor.
    Full { cov: DMatrix<f64>, chol: DMatrix<f64> },
}

impl Covariance {
    pub fn full(cov: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Input("covariance is not positive definite".into()))?
            .l();
        Ok(Covariance::Full { cov, chol })
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Covariance::ScalarIdentity(_) => None,
            Covariance::ScaledGramInverse { gram, .. } => Some(gram.dim()),
            Covariance::Diagonal(v) => Some(v.len()),
            Covariance::Full { cov, .. } => Some(cov.nrows()),
        }
    }

    /// Multiplies the covariance by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Covariance::ScalarIdentity(s) => Covariance::ScalarIdentity(s * factor),
            Covariance::ScaledGramInverse { scale, gram } => Covariance::ScaledGramInverse {
                scale: scale * factor,
                gram: gram.clone(),
            },
            Covariance::Diagonal(v) => Covariance::Diagonal(v * factor),
            Covariance::Full { cov, chol } => Covariance::Full {
                cov: cov * factor,
                chol: chol * factor.sqrt(),
            },
        }
    }
}

/// `N(mean, cov)` on `ℝ^m`.
#[derive(Debug, Clone)]
pub struct GaussianDist {
    mean: DVector<f64>,
    cov: Covariance,
}

impl GaussianDist {
    pub fn new(mean: DVector<f64>, cov: Covariance) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidDimension("Gaussian needs dimension >= 1".into()));
        }
        if let Some(d) = cov.dim() {
            if d != mean.len() {
                return Err(Error::InvalidDimension(format!(
                    "mean has length {}, covariance has dimension {d}",
                    mean.len()
                )));
            }
        }
        let positive = match &cov {
            Covariance::ScalarIdentity(s) => *s > 0.0 && s.is_finite(),
            Covariance::ScaledGramInverse { scale, .. } => *scale > 0.0 && scale.is_finite(),
            Covariance::Diagonal(v) => v.iter().all(|x| *x > 0.0 && x.is_finite()),
            Covariance::Full { .. } => true,
        };
        if !positive {
            return Err(Error::Input("covariance must be positive definite".into()));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("mean has non-finite entries".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Covariance {
        &self.cov
    }

    /// Dense covariance matrix.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        match &self.cov {
            Covariance::ScalarIdentity(s) => DMatrix::identity(m, m) * *s,
            Covariance::ScaledGramInverse { scale, gram } => gram.inverse() * *scale,
            Covariance::Diagonal(v) => DMatrix::from_diagonal(v),
            Covariance::Full { cov, .. } => cov.clone(),
        }
    }

    /// `ln det Σ`.
    pub fn log_det(&self) -> f64 {
        let m = self.dim() as f64;
        match &self.cov {
            Covariance::ScalarIdentity(s) => m * s.ln(),
            Covariance::ScaledGramInverse { scale, gram } => m * scale.ln() - gram.log_det(),
            Covariance::Diagonal(v) => v.iter().map(|x| x.ln()).sum(),
            Covariance::Full { chol, .. } => 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>(),
        }
    }

    /// `A⁻¹ v` for a square root `Σ = A Aᵀ`; maps the law to a standard normal
    /// when applied to `x − mean`.
    pub fn whiten_centered(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.cov {
            Covariance::ScalarIdentity(s) => v / s.sqrt(),
            Covariance::ScaledGramInverse { scale, gram } => gram.mul_lt(v) / scale.sqrt(),
            Covariance::Diagonal(d) => v.component_div(&d.map(f64::sqrt)),
            Covariance::Full { chol, .. } => chol.solve_lower_triangular(v).expect("positive diagonal"),
        }
    }

    /// `A⁻¹ (x − mean)`.
    pub fn whiten(&self, x: &DVector<f64>) -> DVector<f64> {
        self.whiten_centered(&(x - &self.mean))
    }

    /// `mean + A z`, inverse of [`whiten`](Self::whiten).
    pub fn unwhiten(&self, z: &DVector<f64>) -> DVector<f64> {
        let v = match &self.cov {
            Covariance::ScalarIdentity(s) => z * s.sqrt(),
            Covariance::ScaledGramInverse { scale, gram } => gram.solve_lt(z) * scale.sqrt(),
            Covariance::Diagonal(d) => z.component_mul(&d.map(f64::sqrt)),
            Covariance::Full { chol, .. } => chol * z,
        };
        &self.mean + v
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let mut z = DVector::zeros(self.dim());
        fill_standard_normal(rng, z.as_mut_slice());
        self.unwhiten(&z)
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let z = self.whiten(x);
        -0.5 * (z.norm_squared() + self.dim() as f64 * (2.0 * PI).ln() + self.log_det())
    }

    /// `bᵀ Σ b`.
    pub fn quad_form(&self, b: &DVector<f64>) -> f64 {
        match &self.cov {
            Covariance::ScalarIdentity(s) => s * b.norm_squared(),
            Covariance::ScaledGramInverse { scale, gram } => scale * gram.inverse_quad_form(b),
            Covariance::Diagonal(d) => b.iter().zip(d.iter()).map(|(x, v)| x * x * v).sum(),
            Covariance::Full { chol, .. } => chol.tr_mul(b).norm_squared(),
        }
    }

    /// Per-coordinate variances.
    pub fn marginal_variances(&self) -> DVector<f64> {
        match &self.cov {
            Covariance::ScalarIdentity(s) => DVector::from_element(self.dim(), *s),
            Covariance::Diagonal(d) => d.clone(),
            _ => self.covariance_matrix().diagonal(),
        }
    }
}
