//! Priors and posteriors: conjugate Gaussian, coordinate-wise Gaussian and
//! importance-sampled smooth priors, plus condition diagnostics.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::designs::{project, DesignMatrix};
use crate::distances::{tv_from_weighted_log_ratios, TvResult, DEFAULT_BOOTSTRAP};
use crate::error::{Error, Result};
use crate::gaussian::{Covariance, GaussianDist};
use crate::rng::{fill_standard_normal, purpose, stream};
use crate::special::ln_gamma;

/// Evaluable prior densities on `θ ∈ ℝ^k`.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothDensity {
    /// `N(0, scale² I)`.
    GaussianIso { scale: f64 },
    /// `N(0, diag(variances))`.
    GaussianDiag { variances: DVector<f64> },
    /// Uniform on `[−half_width, half_width]^k`.
    UniformBox { half_width: f64 },
    /// Independent scaled Student-t coordinates.
    ProductStudentT { df: f64, scale: f64 },
    /// `w ≡ 1`.
    Flat,
}

impl SmoothDensity {
    pub fn name(&self) -> &'static str {
        match self {
            SmoothDensity::GaussianIso { .. } => "gaussian-iso",
            SmoothDensity::GaussianDiag { .. } => "gaussian-diag",
            SmoothDensity::UniformBox { .. } => "uniform-box",
            SmoothDensity::ProductStudentT { .. } => "product-student-t",
            SmoothDensity::Flat => "flat",
        }
    }

    pub fn log_density(&self, theta: &DVector<f64>) -> f64 {
        let k = theta.len() as f64;
        match self {
            SmoothDensity::GaussianIso { scale } => {
                -0.5 * theta.norm_squared() / (scale * scale) - k * (scale.ln() + 0.5 * (2.0 * PI).ln())
            }
            SmoothDensity::GaussianDiag { variances } => theta
                .iter()
                .zip(variances.iter())
                .map(|(t, v)| -0.5 * t * t / v - 0.5 * (2.0 * PI * v).ln())
                .sum(),
            SmoothDensity::UniformBox { half_width } => {
                if theta.iter().all(|t| t.abs() <= *half_width) {
                    -k * (2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SmoothDensity::ProductStudentT { df, scale } => {
                let c = ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln() - scale.ln();
                theta
                    .iter()
                    .map(|t| c - 0.5 * (df + 1.0) * (1.0 + (t / scale).powi(2) / df).ln())
                    .sum()
            }
            SmoothDensity::Flat => 0.0,
        }
    }

    fn validate(&self, k: usize) -> Result<()> {
        let ok = match self {
            SmoothDensity::GaussianIso { scale } => *scale > 0.0,
            SmoothDensity::GaussianDiag { variances } => variances.len() == k && variances.iter().all(|v| *v > 0.0),
            SmoothDensity::UniformBox { half_width } => *half_width > 0.0,
            SmoothDensity::ProductStudentT { df, scale } => *df > 0.0 && *scale > 0.0,
            SmoothDensity::Flat => true,
        };
        if !ok || !self.log_density(&DVector::zeros(k)).is_finite() {
            return Err(Error::Input(format!("invalid {} prior parameters for k = {k}", self.name())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    /// `N(0, τ² Σ_Φ)` on `F`, i.e. `N(0, τ² (ΦᵀΦ)⁻¹)` on `θ`.
    IsotropicGaussian { tau: f64 },
    /// Independent `θ_j ~ N(0, v_j)`.
    CoordinateGaussian { variances: DVector<f64> },
    Smooth(SmoothDensity),
}

impl PriorSpec {
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            PriorSpec::IsotropicGaussian { tau } => {
                if !(*tau > 0.0) || !tau.is_finite() {
                    return Err(Error::Input(format!("tau must be positive, got {tau}")));
                }
            }
            PriorSpec::CoordinateGaussian { variances } => {
                if variances.len() != k {
                    return Err(Error::InvalidDimension(format!("{} prior variances for k = {k}", variances.len())));
                }
                if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return Err(Error::Input("prior variances must be positive".into()));
                }
            }
            PriorSpec::Smooth(d) => d.validate(k)?,
        }
        Ok(())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Input(format!("noise level must be positive, got {sigma}")));
    }
    Ok(())
}

/// Shrinkage factor `τ² / (σ² + τ²)`.
pub fn shrinkage(tau: f64, sigma: f64) -> f64 {
    1.0 / (1.0 + (sigma / tau).powi(2))
}

/// `N(c θ_Y, c σ² (ΦᵀΦ)⁻¹)` with `c = τ²/(σ² + τ²)`.
pub fn conjugate_posterior(design: &DesignMatrix, tau: f64, sigma: f64, y: &DVector<f64>) -> Result<GaussianDist> {
    check_sigma(sigma)?;
    PriorSpec::IsotropicGaussian { tau }.validate(design.k())?;
    let theta_y = project(design, y)?.theta_hat;
    conjugate_posterior_from_mle(design, tau, sigma, &theta_y)
}

pub fn conjugate_posterior_from_mle(design: &DesignMatrix, tau: f64, sigma: f64, theta_y: &DVector<f64>) -> Result<GaussianDist> {
    let c = shrinkage(tau, sigma);
    GaussianDist::new(
        theta_y * c,
        Covariance::ScaledGramInverse {
            scale: c * sigma * sigma,
            gram: design.gram_factor().clone(),
        },
    )
}

/// `N(θ_Y, σ² (ΦᵀΦ)⁻¹)`, the flat-prior posterior and the limiting law.
pub fn flat_posterior(design: &DesignMatrix, sigma: f64, theta_y: &DVector<f64>) -> Result<GaussianDist> {
    check_sigma(sigma)?;
    GaussianDist::new(
        theta_y.clone(),
        Covariance::ScaledGramInverse {
            scale: sigma * sigma,
            gram: design.gram_factor().clone(),
        },
    )
}

/// Independent `N(v_j/(s_j² + v_j) · x_j, s_j² v_j/(s_j² + v_j))` with noise
/// variances `s_j² = sigma_n²`.
pub fn coordinate_posterior(variances: &DVector<f64>, sigma_n: f64, theta_y: &DVector<f64>) -> Result<GaussianDist> {
    let noise = DVector::from_element(theta_y.len(), sigma_n * sigma_n);
    coordinate_posterior_with_noise(variances, &noise, theta_y)
}

fn coordinate_posterior_with_noise(variances: &DVector<f64>, noise: &DVector<f64>, theta_y: &DVector<f64>) -> Result<GaussianDist> {
    if variances.len() != theta_y.len() {
        return Err(Error::InvalidDimension(format!("{} variances for {} coordinates", variances.len(), theta_y.len())));
    }
    PriorSpec::CoordinateGaussian {
        variances: variances.clone(),
    }
    .validate(theta_y.len())?;
    let mut mean = DVector::zeros(theta_y.len());
    let mut var = DVector::zeros(theta_y.len());
    for j in 0..theta_y.len() {
        let (v, s2) = (variances[j], noise[j]);
        let shrink = if v.is_infinite() { 1.0 } else { v / (s2 + v) };
        mean[j] = shrink * theta_y[j];
        var[j] = s2 * shrink;
    }
    GaussianDist::new(mean, Covariance::Diagonal(var))
}

/// Coordinate posterior for a design with diagonal Gram matrix, where the
/// noise variance of `θ_Y,j` is `σ² / (ΦᵀΦ)_jj`.
pub fn coordinate_posterior_for_design(design: &DesignMatrix, variances: &DVector<f64>, sigma: f64, y: &DVector<f64>) -> Result<GaussianDist> {
    check_sigma(sigma)?;
    if !design.gram_factor().is_diagonal() {
        return Err(Error::Unsupported("coordinate posterior needs a diagonal Gram matrix".into()));
    }
    let theta_y = project(design, y)?.theta_hat;
    let noise = design.gram().diagonal().map(|g| sigma * sigma / g);
    coordinate_posterior_with_noise(variances, &noise, &theta_y)
}

/// Importance sample of a posterior with proposal `N(θ_Y, σ²(ΦᵀΦ)⁻¹)`.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub draws: Vec<DVector<f64>>,
    /// Log weights normalized so that `Σ exp = 1`.
    pub log_weights: Vec<f64>,
    pub proposal: GaussianDist,
    pub ess: f64,
    /// Effective sample size below 1% of the draws.
    pub degenerate: bool,
}

impl PosteriorSample {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Weighted mean of the draws.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.proposal.dim());
        for (x, w) in self.draws.iter().zip(self.weights()) {
            m += x * w;
        }
        m
    }
}

/// Normalizes log weights; returns them with the Kish effective sample size.
pub fn normalize_log_weights(raw: &[f64]) -> (Vec<f64>, f64) {
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return (vec![f64::NEG_INFINITY; raw.len()], 0.0);
    }
    let sum: f64 = raw.iter().map(|l| (l - max).exp()).sum();
    let log_norm = max + sum.ln();
    let logs: Vec<f64> = raw.iter().map(|l| l - log_norm).collect();
    let sq: f64 = logs.iter().map(|l| (2.0 * l).exp()).sum();
    (logs, 1.0 / sq)
}

/// Posterior under a smooth prior `w`. Draws come from the flat-prior
/// posterior and carry weights `∝ w(θ)`, since the likelihood ratio to the
/// proposal is constant in `θ`.
pub fn smooth_posterior_sample(
    design: &DesignMatrix,
    prior: &SmoothDensity,
    sigma: f64,
    y: &DVector<f64>,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorSample> {
    check_sigma(sigma)?;
    prior.validate(design.k())?;
    if n_draws == 0 {
        return Err(Error::Input("need at least one draw".into()));
    }
    let theta_y = project(design, y)?.theta_hat;
    let proposal = flat_posterior(design, sigma, &theta_y)?;
    let mut rng = stream(seed, &[purpose::POSTERIOR]);
    let mut z = DVector::zeros(design.k());
    let draws: Vec<DVector<f64>> = (0..n_draws)
        .map(|_| {
            fill_standard_normal(&mut rng, z.as_mut_slice());
            proposal.unwhiten(&z)
        })
        .collect();
    let raw: Vec<f64> = draws.iter().map(|t| prior.log_density(t)).collect();
    let (log_weights, ess) = normalize_log_weights(&raw);
    Ok(PosteriorSample {
        degenerate: ess < 0.01 * n_draws as f64,
        draws,
        log_weights,
        proposal,
        ess,
    })
}

/// `‖posterior − target‖_TV` estimated as `E_q[(t/q − p/q)_+]` over the
/// proposal draws, with a bootstrap standard error.
pub fn posterior_tv_to_target(sample: &PosteriorSample, target: &GaussianDist, seed: u64) -> TvResult {
    let log_t: Vec<f64> = sample
        .draws
        .iter()
        .map(|x| target.log_density(x) - sample.proposal.log_density(x))
        .collect();
    let mut r = tv_from_weighted_log_ratios(&log_t, &sample.log_weights, true, DEFAULT_BOOTSTRAP, seed);
    r.unreliable |= sample.degenerate;
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// Largest absolute difference across all posterior parameters or weights.
    pub max_difference: f64,
}

impl InvarianceReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_difference <= tol
    }
}

/// Compares the posteriors given `y` and `y + a` for `a ⟂ span(Φ)`.
pub fn check_translation_invariance(
    design: &DesignMatrix,
    prior: &PriorSpec,
    sigma: f64,
    y: &DVector<f64>,
    a: &DVector<f64>,
) -> Result<InvarianceReport> {
    if a.len() != design.n() {
        return Err(Error::InvalidDimension(format!("translation has length {}, design has n = {}", a.len(), design.n())));
    }
    let phi_norm = design.columns().norm();
    let leak = design.apply_transpose(a).norm();
    if leak > 1e-8 * a.norm() * phi_norm {
        return Err(Error::Precondition(format!("translation is not orthogonal to the span (‖Φᵀa‖ = {leak:e})")));
    }
    let y2 = y + a;
    let diff = |u: &DVector<f64>, v: &DVector<f64>| (u - v).amax();
    let max_difference = match prior {
        PriorSpec::IsotropicGaussian { tau } => {
            let p = conjugate_posterior(design, *tau, sigma, y)?;
            let q = conjugate_posterior(design, *tau, sigma, &y2)?;
            let scale_gap = match (p.cov(), q.cov()) {
                (Covariance::ScaledGramInverse { scale: s1, .. }, Covariance::ScaledGramInverse { scale: s2, .. }) => (s1 - s2).abs(),
                _ => f64::INFINITY,
            };
            diff(p.mean(), q.mean()).max(scale_gap)
        }
        PriorSpec::CoordinateGaussian { variances } => {
            let p = coordinate_posterior_for_design(design, variances, sigma, y)?;
            let q = coordinate_posterior_for_design(design, variances, sigma, &y2)?;
            diff(p.mean(), q.mean()).max(diff(&p.marginal_variances(), &q.marginal_variances()))
        }
        PriorSpec::Smooth(density) => {
            const DRAWS: usize = 256;
            let p = smooth_posterior_sample(design, density, sigma, y, DRAWS, 0)?;
            let q = smooth_posterior_sample(design, density, sigma, &y2, DRAWS, 0)?;
            let w = p
                .log_weights
                .iter()
                .zip(&q.log_weights)
                .map(|(a, b)| if a == b { 0.0 } else { (a.exp() - b.exp()).abs() })
                .fold(0.0, f64::max);
            let d = p.draws.iter().zip(&q.draws).map(|(a, b)| diff(a, b)).fold(0.0, f64::max);
            w.max(d)
        }
    };
    Ok(InvarianceReport { max_difference })
}

/// Finite-n ratios behind the Gaussian-prior conditions; each should be small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianConditionReport {
    /// `σ / τ`.
    pub noise_to_prior: f64,
    /// `‖F_0‖ σ / τ²`.
    pub signal: f64,
    /// `k σ⁴ / τ⁴`.
    pub dimension: f64,
}

pub fn check_theorem1_conditions(sigma: f64, tau: f64, f0_norm: f64, k: usize) -> GaussianConditionReport {
    let r = sigma / tau;
    GaussianConditionReport {
        noise_to_prior: r,
        signal: f0_norm * sigma / (tau * tau),
        dimension: k as f64 * r.powi(4),
    }
}

/// Diagnostics for the smooth-prior conditions on the ellipsoid
/// `(θ − θ_0)ᵀ ΦᵀΦ (θ − θ_0) ≤ σ² M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothConditionReport {
    /// `max − min` of `ln w` over the probes (including `θ_0`).
    pub log_ratio_spread: f64,
    /// `max |ln w(θ_0 + h) − ln w(θ_0)|` over the probes.
    pub max_abs_log_ratio: f64,
    /// `false` when `ln w` is not finite somewhere on the probes.
    pub finite: bool,
    /// `k ln k / M`.
    pub dimension_ratio: f64,
    /// `max(0, ln(√det(ΦᵀΦ) / (σ^k w(θ_0)))) / M`.
    pub determinant_ratio: f64,
}

/// Probes the prior on `n_probe` points drawn uniformly from the ellipsoid.
pub fn check_theorem2_conditions(
    design: &DesignMatrix,
    prior: &SmoothDensity,
    theta0: &DVector<f64>,
    sigma: f64,
    m_n: f64,
    n_probe: usize,
    seed: u64,
) -> Result<SmoothConditionReport> {
    check_sigma(sigma)?;
    let k = design.k();
    if theta0.len() != k {
        return Err(Error::InvalidDimension(format!("theta0 has length {}, k = {k}", theta0.len())));
    }
    if !(m_n > 0.0) {
        return Err(Error::Input(format!("M must be positive, got {m_n}")));
    }
    let base = prior.log_density(theta0);
    let mut rng = stream(seed, &[purpose::PROBE]);
    let radius = sigma * m_n.sqrt();
    let (mut lo, mut hi) = (base, base);
    let mut max_abs = 0.0f64;
    let mut finite = base.is_finite();
    let mut z = DVector::zeros(k);
    for _ in 0..n_probe {
        fill_standard_normal(&mut rng, z.as_mut_slice());
        let r: f64 = rand::Rng::random::<f64>(&mut rng).powf(1.0 / k as f64);
        let u = &z * (r / z.norm());
        let h = design.gram_factor().solve_lt(&u) * radius;
        let l = prior.log_density(&(theta0 + h));
        if !l.is_finite() {
            finite = false;
            continue;
        }
        lo = lo.min(l);
        hi = hi.max(l);
        max_abs = max_abs.max((l - base).abs());
    }
    let kf = k as f64;
    let det_term = 0.5 * design.gram_factor().log_det() - kf * sigma.ln() - base;
    Ok(SmoothConditionReport {
        log_ratio_spread: if finite { hi - lo } else { f64::INFINITY },
        max_abs_log_ratio: if finite { max_abs } else { f64::INFINITY },
        finite,
        dimension_ratio: if k > 1 { kf * kf.ln() / m_n } else { 0.0 },
        determinant_ratio: det_term.max(0.0) / m_n,
    })
}

/// `sup (‖h‖² + 2‖h‖‖θ_0‖) / (2 s²)` over the ellipsoid, bounding
/// `|ln w(θ_0 + h) − ln w(θ_0)|` for the `N(0, s² I)` prior.
pub fn gaussian_prior_log_ratio_bound(design: &DesignMatrix, theta0: &DVector<f64>, sigma: f64, m_n: f64, scale: f64) -> f64 {
    let lambda_min = design.gram_factor().eigenvalues()[0];
    let h = sigma * m_n.sqrt() / lambda_min.sqrt();
    (h * h + 2.0 * h * theta0.norm()) / (2.0 * scale * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{build_bspline_design, build_fourier_design, build_identity_design, uniform_points, DesignMatrix};
    use crate::distances::tv_between_gaussians;
    use crate::rng::standard_normal;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    /// Posterior mean and variance of a scalar θ by trapezoid integration of
    /// prior × likelihood for `y = x θ + ε`.
    fn grid_bayes_1d(x: &[f64], y: &[f64], prior_var: f64, sigma: f64) -> (f64, f64) {
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let centre = xy / xx;
        let width = 12.0 * sigma / xx.sqrt();
        let m = 200_001;
        let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for i in 0..m {
            let t = centre - width + 2.0 * width * i as f64 / (m - 1) as f64;
            let ll: f64 = -x.iter().zip(y).map(|(a, b)| (b - a * t).powi(2)).sum::<f64>() / (2.0 * sigma * sigma);
            let lp = -t * t / (2.0 * prior_var);
            let w = if i == 0 || i == m - 1 { 0.5 } else { 1.0 } * (ll + lp).exp();
            z += w;
            s1 += w * t;
            s2 += w * t * t;
        }
        let mean = s1 / z;
        (mean, s2 / z - mean * mean)
    }

    #[test]
    fn flat_limit_and_equal_scales() {
        let d = build_identity_design(4, 3).unwrap();
        let y = DVector::from_vec(vec![0.5, -1.0, 2.0, 3.0]);
        let p = conjugate_posterior(&d, 1e12, 0.7, &y).unwrap();
        assert!((p.mean() - DVector::from_vec(vec![0.5, -1.0, 2.0])).amax() < 1e-10);
        assert!((p.covariance_matrix() - DMatrix::<f64>::identity(3, 3) * 0.49).amax() < 1e-10);

        let p = conjugate_posterior(&d, 0.7, 0.7, &y).unwrap();
        assert!((p.mean() - DVector::from_vec(vec![0.25, -0.5, 1.0])).amax() < 1e-15);
        assert!((p.covariance_matrix() - DMatrix::<f64>::identity(3, 3) * (0.49 / 2.0)).amax() < 1e-15);
    }

    #[test]
    fn conjugate_matches_grid_bayes_scalar() {
        // k = 1, n = 3, σ = 1, τ = 2; the prior N(0, τ² (ΦᵀΦ)⁻¹) has variance τ²/‖x‖²
        let x = [1.0, 0.0, 0.0];
        let y = [0.8, -0.3, 1.1];
        let d = DesignMatrix::from_matrix(DMatrix::from_column_slice(3, 1, &x), None).unwrap();
        let post = conjugate_posterior(&d, 2.0, 1.0, &DVector::from_row_slice(&y)).unwrap();
        let (m, v) = grid_bayes_1d(&x, &y, 4.0, 1.0);
        assert_abs_diff_eq!(post.mean()[0], m, epsilon = 1e-6);
        assert!((post.covariance_matrix()[(0, 0)] / v - 1.0).abs() < 1e-6);
    }

    #[test]
    fn coordinate_examples() {
        let n: f64 = 100.0;
        let alpha = 1.0f64;
        let v = DVector::from_element(1, 4f64.powf(alpha) / n);
        let p = coordinate_posterior(&v, (1.0 / n).sqrt(), &DVector::from_element(1, 1.0)).unwrap();
        assert_abs_diff_eq!(p.mean()[0], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(p.marginal_variances()[0], 0.8 / n, epsilon = 1e-15);

        let big = DVector::from_element(1, 1e300);
        let p = coordinate_posterior(&big, 0.5, &DVector::from_element(1, 3.0)).unwrap();
        assert_abs_diff_eq!(p.mean()[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.marginal_variances()[0], 0.25, epsilon = 1e-12);

        let eq = DVector::from_element(1, 0.25);
        let p = coordinate_posterior(&eq, 0.5, &DVector::from_element(1, 3.0)).unwrap();
        assert_abs_diff_eq!(p.mean()[0], 1.5);
        assert_abs_diff_eq!(p.marginal_variances()[0], 0.125);

        let spline = build_bspline_design(&uniform_points(30), 5, 3).unwrap();
        let r = coordinate_posterior_for_design(&spline, &DVector::from_element(5, 1.0), 1.0, &DVector::zeros(30));
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn coordinate_posterior_on_fourier_design_uses_gram_diagonal() {
        let n = 33;
        let d = build_fourier_design(n, 5).unwrap();
        let v = DVector::from_element(5, 1e-3);
        let y = DVector::from_fn(n, |i, _| (i as f64).sin());
        let p = coordinate_posterior_for_design(&d, &v, 1.0, &y).unwrap();
        let theta_y = project(&d, &y).unwrap().theta_hat;
        let s2 = 1.0 / n as f64;
        assert_abs_diff_eq!(p.mean()[2], 1e-3 / (s2 + 1e-3) * theta_y[2], epsilon = 1e-12);
    }

    #[test]
    fn smooth_gaussian_prior_reproduces_conjugate_mean() {
        let d = build_identity_design(5, 3).unwrap();
        let sigma = 0.5;
        let tau = 0.6;
        let y = DVector::from_vec(vec![0.4, -0.2, 0.7, 9.0, 9.0]);
        let exact = conjugate_posterior(&d, tau, sigma, &y).unwrap();
        let prior = SmoothDensity::GaussianIso { scale: tau };
        for seed in 0..5 {
            let s = smooth_posterior_sample(&d, &prior, sigma, &y, 40_000, seed).unwrap();
            let m = s.mean();
            // self-normalized IS standard error from the delta method
            for j in 0..3 {
                let w = s.weights();
                let var: f64 = s.draws.iter().zip(&w).map(|(x, wi)| wi * wi * (x[j] - m[j]).powi(2)).sum();
                assert!((m[j] - exact.mean()[j]).abs() < 3.5 * var.sqrt(), "seed {seed} coord {j}");
            }
        }
    }

    #[test]
    fn flat_and_box_priors_keep_the_proposal() {
        let d = build_identity_design(4, 2).unwrap();
        let y = DVector::from_vec(vec![0.3, -0.9, 0.0, 0.0]);
        let s = smooth_posterior_sample(&d, &SmoothDensity::Flat, 0.2, &y, 500, 1).unwrap();
        let w0 = s.log_weights[0];
        assert!(s.log_weights.iter().all(|l| (l - w0).abs() < 1e-12));
        assert_abs_diff_eq!(s.ess, 500.0, epsilon = 1e-8);
        let tv = posterior_tv_to_target(&s, &s.proposal, 3);
        assert!(tv.value <= 3.0 * tv.se.unwrap() + 1e-12);

        // box [−10, 10]²: leaving it needs a 45σ excursion, so the weights stay equal
        let b = smooth_posterior_sample(&d, &SmoothDensity::UniformBox { half_width: 10.0 }, 0.2, &y, 2000, 1).unwrap();
        assert!(b.log_weights.iter().all(|l| (l - b.log_weights[0]).abs() < 1e-12));
        let mass_outside = crate::special::noncentral_chi2_sf((10.0f64 - 0.9).powi(2) / 0.04, 1.0, 0.0);
        assert!(mass_outside < 1e-300 || mass_outside < 1e-12);
    }

    #[test]
    fn importance_tv_matches_exact_gaussian_pair() {
        let d = build_identity_design(2, 2).unwrap();
        let sigma = 1.0;
        let y = DVector::from_vec(vec![0.7, -0.4]);
        let s = smooth_posterior_sample(&d, &SmoothDensity::GaussianIso { scale: sigma }, sigma, &y, 40_000, 2).unwrap();
        let target = flat_posterior(&d, sigma, &project(&d, &y).unwrap().theta_hat).unwrap();
        let est = posterior_tv_to_target(&s, &target, 5);
        let exact = tv_between_gaussians(&conjugate_posterior(&d, sigma, sigma, &y).unwrap(), &target, 0, 0)
            .unwrap()
            .estimate
            .value;
        assert!((est.value - exact).abs() < 3.0 * est.se.unwrap(), "{} vs {exact}", est.value);
    }

    #[test]
    fn importance_tv_exceeds_single_coordinate_bound_for_split_prior() {
        let n: f64 = 400.0;
        let k = 6;
        let sigma = n.powf(-0.5);
        let d = build_identity_design(k, k).unwrap();
        let mut v = vec![1.0 / k as f64; k];
        for vj in v.iter_mut().skip(k / 2) {
            *vj = 4.0 / n;
        }
        let y = DVector::from_vec(vec![0.3, 0.1, -0.05, 0.02, 0.01, -0.03]);
        let prior = SmoothDensity::GaussianDiag {
            variances: DVector::from_vec(v),
        };
        let s = smooth_posterior_sample(&d, &prior, sigma, &y, 40_000, 4).unwrap();
        let target = flat_posterior(&d, sigma, &y).unwrap();
        let est = posterior_tv_to_target(&s, &target, 6);
        // one coordinate with shrinkage 4/5 already sits this far from its target
        let single = crate::distances::tv_gaussian_shift_scale(1, 0.2 * y[5].abs() / sigma, 0.8).unwrap().value;
        assert!(est.value + 3.0 * est.se.unwrap() >= single);
    }

    #[test]
    fn translation_invariance_examples() {
        let d = build_identity_design(6, 3).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let prior = PriorSpec::IsotropicGaussian { tau: 1.0 };
        let zero = DVector::zeros(6);
        assert_eq!(check_translation_invariance(&d, &prior, 0.3, &y, &zero).unwrap().max_difference, 0.0);
        let a = DVector::from_vec(vec![0.0, 0.0, 0.0, 7.0, -1.0, 2.0]);
        assert_eq!(check_translation_invariance(&d, &prior, 0.3, &y, &a).unwrap().max_difference, 0.0);

        let f = build_fourier_design(5, 3).unwrap();
        let mut rng = stream(1, &[0]);
        let r = DVector::from_fn(5, |_, _| standard_normal(&mut rng));
        let a = &r - f.apply_projection(&r);
        let y = DVector::from_fn(5, |_, _| standard_normal(&mut rng));
        for prior in [
            PriorSpec::IsotropicGaussian { tau: 0.4 },
            PriorSpec::CoordinateGaussian {
                variances: DVector::from_vec(vec![1.0, 0.5, 0.1]),
            },
            PriorSpec::Smooth(SmoothDensity::ProductStudentT { df: 3.0, scale: 1.0 }),
        ] {
            assert!(check_translation_invariance(&f, &prior, 0.8, &y, &a).unwrap().holds(1e-10));
        }
        let bad = f.columns().column(0).into_owned();
        assert!(matches!(
            check_translation_invariance(&f, &PriorSpec::IsotropicGaussian { tau: 1.0 }, 1.0, &y, &bad),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn gaussian_condition_examples() {
        let n = 256.0f64;
        let r = check_theorem1_conditions(n.powf(-0.5), n.powf(-0.125), 1.0, 16);
        assert_abs_diff_eq!(r.dimension, 0.00390625, epsilon = 1e-15);
        assert_eq!(check_theorem1_conditions(0.3, 0.3, 1.0, 4).noise_to_prior, 1.0);
        assert_eq!(check_theorem1_conditions(0.3, 0.5, 0.0, 4).signal, 0.0);
    }

    #[test]
    fn smooth_condition_examples() {
        let d = build_bspline_design(&uniform_points(200), 8, 4).unwrap();
        let theta0 = DVector::from_fn(8, |i, _| 0.1 * i as f64);
        let flat = check_theorem2_conditions(&d, &SmoothDensity::Flat, &theta0, 0.1, 50.0, 512, 1).unwrap();
        assert_eq!(flat.log_ratio_spread, 0.0);

        let k = 8.0f64;
        let m = k * (200f64.ln()).powi(2);
        let sigma = 0.2;
        let g = SmoothDensity::GaussianIso { scale: 1.0 };
        let r = check_theorem2_conditions(&d, &g, &theta0, sigma, m, 4096, 2).unwrap();
        let bound = gaussian_prior_log_ratio_bound(&d, &theta0, sigma, m, 1.0);
        assert!(r.max_abs_log_ratio <= bound);
        assert!(r.log_ratio_spread <= 2.0 * bound);

        let r = check_theorem2_conditions(&d, &g, &theta0, sigma, k, 16, 2).unwrap();
        assert_abs_diff_eq!(r.dimension_ratio, k.ln(), epsilon = 1e-12);
        assert!(r.dimension_ratio >= 1.0);

        let boxed = SmoothDensity::UniformBox { half_width: 0.75 };
        let r = check_theorem2_conditions(&d, &boxed, &theta0, 1.0, 100.0, 256, 3).unwrap();
        assert!(!r.finite);
    }

    fn random_instance(seed: u64) -> (DesignMatrix, DVector<f64>, DVector<f64>, f64, f64) {
        let mut rng = stream(seed, &[42]);
        let n = 3 + (seed % 3) as usize;
        let k = 1 + (seed % 2) as usize;
        let cols = DMatrix::from_fn(n, k, |_, _| standard_normal(&mut rng));
        let d = DesignMatrix::from_matrix(cols, None).unwrap();
        let y = DVector::from_fn(n, |_, _| standard_normal(&mut rng));
        let r = DVector::from_fn(n, |_, _| standard_normal(&mut rng));
        let a = &r - d.apply_projection(&r);
        let sigma = 0.5 + rand::Rng::random::<f64>(&mut rng);
        let tau = 0.5 + 2.0 * rand::Rng::random::<f64>(&mut rng);
        (d, y, a, sigma, tau)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn shrinkage_of_the_mean(seed in 0u64..10_000) {
            let (d, y, _, sigma, tau) = random_instance(seed);
            let p = conjugate_posterior(&d, tau, sigma, &y).unwrap();
            let theta_y = project(&d, &y).unwrap().theta_hat;
            prop_assert!(p.mean().norm() <= theta_y.norm() * tau * tau / (sigma * sigma + tau * tau) + 1e-12);
        }

        #[test]
        fn invariance_under_orthogonal_translation(seed in 0u64..10_000) {
            let (d, y, a, sigma, tau) = random_instance(seed);
            let rep = check_translation_invariance(&d, &PriorSpec::IsotropicGaussian { tau }, sigma, &y, &a).unwrap();
            prop_assert!(rep.holds(1e-10));
        }
    }
}
