//! Ground-truth regression functions and their approximation bias.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::designs::{fourier_basis, DesignFamily, DesignMatrix};
use crate::error::{Error, Result};

/// Fraction of the ellipsoid bound used when scaling generated coefficients.
pub const INTERIOR_FRACTION: f64 = 0.9;

/// Default coefficient prefix length for a sieve of dimension `k`.
pub fn default_prefix_len(k: usize) -> usize {
    (4 * k).max(256)
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecayRule {
    /// `θ_j ∝ j^{-exponent}`, rescaled into the ellipsoid interior.
    PowerDecay { exponent: f64 },
    /// Coefficients used as given.
    Explicit(Vec<f64>),
}

/// Ellipsoid weight `a_j` (1-based `j`).
pub fn ellipsoid_weight(j: usize, alpha: f64) -> f64 {
    if j.is_multiple_of(2) {
        (j as f64).powf(alpha)
    } else {
        ((j - 1) as f64).powf(alpha)
    }
}

/// Fourier coefficients of a periodic Sobolev function.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevTruth {
    pub alpha: f64,
    pub radius: f64,
    pub coeffs: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SobolevTruth {
    /// `Σ a_j² θ_j²` over the stored prefix.
    pub fn ellipsoid_sum(&self) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.weights)
            .map(|(t, a)| a * a * t * t)
            .sum()
    }

    /// `L² / π^{2α}`.
    pub fn ellipsoid_bound(&self) -> f64 {
        self.radius * self.radius / PI.powf(2.0 * self.alpha)
    }

    /// `∫ f² = Σ θ_j²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|t| t * t).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, t)| if *t == 0.0 { 0.0 } else { t * fourier_basis(i + 1, x) })
            .sum()
    }
}

pub fn make_sobolev_truth(alpha: f64, radius: f64, rule: &DecayRule, prefix_len: usize) -> Result<SobolevTruth> {
    if !(alpha > 0.0) || !(radius > 0.0) {
        return Err(Error::Input(format!("need alpha > 0 and L > 0, got alpha = {alpha}, L = {radius}")));
    }
    if prefix_len == 0 {
        return Err(Error::InvalidDimension("truth prefix length must be at least 1".into()));
    }
    let weights: Vec<f64> = (1..=prefix_len).map(|j| ellipsoid_weight(j, alpha)).collect();
    let bound = radius * radius / PI.powf(2.0 * alpha);
    let coeffs = match rule {
        DecayRule::PowerDecay { exponent } => {
            let p = *exponent;
            // a_j² θ_j² ~ j^{2α - 2p} is summable only when p > α + 1/2
            if !(p > alpha + 0.5) {
                return Err(Error::Membership(format!(
                    "power decay j^-{p} leaves the ellipsoid for alpha = {alpha} (needs exponent > {})",
                    alpha + 0.5
                )));
            }
            let raw: Vec<f64> = (1..=prefix_len).map(|j| (j as f64).powf(-p)).collect();
            let sum: f64 = raw.iter().zip(&weights).map(|(t, a)| a * a * t * t).sum();
            if sum == 0.0 {
                raw
            } else {
                let scale = (INTERIOR_FRACTION * bound / sum).sqrt();
                raw.into_iter().map(|t| t * scale).collect()
            }
        }
        DecayRule::Explicit(values) => {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input("explicit coefficients must be finite".into()));
            }
            let mut c = values.clone();
            c.resize(prefix_len.max(values.len()), 0.0);
            c
        }
    };
    let weights: Vec<f64> = (1..=coeffs.len()).map(|j| ellipsoid_weight(j, alpha)).collect();
    let truth = SobolevTruth {
        alpha,
        radius,
        coeffs,
        weights,
    };
    let sum = truth.ellipsoid_sum();
    if sum > bound * (1.0 + 1e-12) {
        return Err(Error::Membership(format!("ellipsoid sum {sum} exceeds bound {bound}")));
    }
    Ok(truth)
}

/// Closed-form Hölder test functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HolderKind {
    /// `x ↦ |x − 1/2|^α`, for `0 < α ≤ 1`.
    AbsPower,
    /// `x ↦ sin(2πx)`, smooth of every order.
    Sine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderTruth {
    pub alpha: f64,
    pub kind: HolderKind,
    pub seminorm_bound: f64,
}

impl HolderTruth {
    pub fn new(kind: HolderKind, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Input(format!("need alpha > 0, got {alpha}")));
        }
        let seminorm_bound = match kind {
            HolderKind::AbsPower => {
                if alpha > 1.0 {
                    return Err(Error::Unsupported("abs-power truth is only catalogued for alpha <= 1".into()));
                }
                1.0
            }
            HolderKind::Sine => {
                // |f^(m)(x) − f^(m)(y)| ≤ (2π)^m min(2, 2π|x − y|) ≤ 2^{1−β} (2π)^{m+β} |x − y|^β
                let beta = alpha - alpha.ceil() + 1.0;
                2f64.powf(1.0 - beta) * (2.0 * PI).powf(alpha)
            }
        };
        Ok(Self {
            alpha,
            kind,
            seminorm_bound,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.kind {
            HolderKind::AbsPower => (x - 0.5).abs().powf(self.alpha),
            HolderKind::Sine => (2.0 * PI * x).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Sobolev(SobolevTruth),
    Holder(HolderTruth),
}

impl Truth {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Truth::Sobolev(t) => t.eval(x),
            Truth::Holder(t) => t.eval(x),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Truth::Sobolev(t) => t.alpha,
            Truth::Holder(t) => t.alpha,
        }
    }
}

/// Mean vector `F_0` seen through `design`: the coefficient prefix for the
/// sequence model, point evaluations `f(x_i)` otherwise.
pub fn render_truth_vector(truth: &Truth, design: &DesignMatrix) -> Result<DVector<f64>> {
    let n = design.n();
    let k = design.k();
    match (design.family(), truth) {
        (DesignFamily::Identity, Truth::Sobolev(t)) => {
            if t.coeffs.len() < k {
                return Err(Error::Truncation {
                    have: t.coeffs.len(),
                    need: k,
                });
            }
            Ok(DVector::from_fn(n, |i, _| t.coeffs.get(i).copied().unwrap_or(0.0)))
        }
        (DesignFamily::Identity, Truth::Holder(_)) => Err(Error::Unsupported(
            "function-valued truths need a design with points".into(),
        )),
        (_, truth) => {
            if let Truth::Sobolev(t) = truth {
                if t.coeffs.len() < k {
                    return Err(Error::Truncation {
                        have: t.coeffs.len(),
                        need: k,
                    });
                }
            }
            let points = design
                .points()
                .ok_or_else(|| Error::Unsupported("design has no evaluation points".into()))?;
            Ok(DVector::from_iterator(n, points.iter().map(|&x| truth.eval(x))))
        }
    }
}

/// `‖F_0 − Σ_Φ F_0‖`.
pub fn projection_bias(f0: &DVector<f64>, design: &DesignMatrix) -> f64 {
    (f0 - design.apply_projection(f0)).norm()
}

/// `|(1/n) Σ f(i/n) g(i/n) − ∫ f g|` for Fourier-synthesized truths.
pub fn riemann_bias(f: &Truth, g: &Truth, n: usize) -> Result<f64> {
    let (Truth::Sobolev(a), Truth::Sobolev(b)) = (f, g) else {
        return Err(Error::Unsupported("closed-form integral needs two Fourier-synthesized truths".into()));
    };
    if n == 0 {
        return Err(Error::InvalidDimension("n must be positive".into()));
    }
    let exact: f64 = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum();
    let riemann = riemann_sum(n, |x| a.eval(x) * b.eval(x));
    Ok((riemann - exact).abs())
}

/// `(1/n) Σ_{i=1}^{n} h(i/n)`.
pub fn riemann_sum(n: usize, h: impl Fn(f64) -> f64) -> f64 {
    (1..=n).map(|i| h(i as f64 / n as f64)).sum::<f64>() / n as f64
}
