//! Linear and quadratic functionals of the mean vector, their delta-method
//! quantities, standardized posterior pushforwards and credible intervals.

use nalgebra::{DMatrix, DVector};

use crate::bayes::PosteriorSample;
use crate::designs::DesignMatrix;
use crate::error::{Error, Result};
use crate::gaussian::{Covariance, GaussianDist};
use crate::rng::{fill_standard_normal, purpose, stream};
use crate::univariate::{Dist1d, WeightedSample};

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalKind {
    /// `G(F) = A F` for a `p × n` matrix `A`.
    Linear(DMatrix<f64>),
    /// `G(F) = ‖F‖² / n`.
    QuadraticNorm,
    /// `G(θ) = θᵀθ` on the coefficient vector.
    ThetaQuadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
}

impl FunctionalSpec {
    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidDimension("linear functional matrix is empty".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("linear functional has non-finite entries".into()));
        }
        Ok(Self {
            kind: FunctionalKind::Linear(matrix),
        })
    }

    pub fn quadratic_norm() -> Self {
        Self {
            kind: FunctionalKind::QuadraticNorm,
        }
    }

    pub fn theta_quadratic() -> Self {
        Self {
            kind: FunctionalKind::ThetaQuadratic,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FunctionalKind::Linear(_) => "linear",
            FunctionalKind::QuadraticNorm => "quadratic-norm",
            FunctionalKind::ThetaQuadratic => "theta-quadratic",
        }
    }

    /// Output dimension `p`.
    pub fn p(&self) -> usize {
        match &self.kind {
            FunctionalKind::Linear(a) => a.nrows(),
            _ => 1,
        }
    }

    fn check_design(&self, design: &DesignMatrix) -> Result<()> {
        if let FunctionalKind::Linear(a) = &self.kind {
            if a.ncols() != design.n() {
                return Err(Error::InvalidDimension(format!(
                    "functional acts on length {}, design has n = {}",
                    a.ncols(),
                    design.n()
                )));
            }
        }
        Ok(())
    }

    /// `G` at the mean vector `Φθ`.
    pub fn value_at_theta(&self, design: &DesignMatrix, theta: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            FunctionalKind::Linear(a) => a * design.apply(theta),
            FunctionalKind::QuadraticNorm => {
                DVector::from_element(1, design.gram_factor().quad_form(theta) / design.n() as f64)
            }
            FunctionalKind::ThetaQuadratic => DVector::from_element(1, theta.norm_squared()),
        }
    }

    /// `G` at a mean vector `F`; the coefficient form reads `θ` off the
    /// projection of `F`.
    pub fn value_at_mean(&self, design: &DesignMatrix, f: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            FunctionalKind::Linear(a) => a * f,
            FunctionalKind::QuadraticNorm => DVector::from_element(1, f.norm_squared() / f.len() as f64),
            FunctionalKind::ThetaQuadratic => DVector::from_element(1, design.coefficients(f).norm_squared()),
        }
    }
}

/// `F ↦ (g(i/n)/n)_{i ≤ n} · F`, the Riemann-sum version of `∫ f g`.
pub fn riemann_linear_functional(g: impl Fn(f64) -> f64, n: usize) -> Result<FunctionalSpec> {
    if n == 0 {
        return Err(Error::InvalidDimension("n must be positive".into()));
    }
    let nf = n as f64;
    FunctionalSpec::linear(DMatrix::from_fn(1, n, |_, i| g((i + 1) as f64 / nf) / nf))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMethodQuantities {
    /// `Γ = σ² Ġ Σ_Φ Ġᵀ`.
    pub gamma: DMatrix<f64>,
    /// Second-derivative bound `B(a)`.
    pub b_bound: f64,
    /// Radius `a` at which `b_bound` was evaluated.
    pub radius: f64,
    /// `Ġ` at the expansion point: `p × n`, or `1 × k` for the coefficient form.
    pub jacobian: DMatrix<f64>,
}

fn check_in_span(design: &DesignMatrix, f: &DVector<f64>) -> Result<()> {
    let residual = (f - design.apply_projection(f)).norm();
    if residual > 1e-8 * f.norm().max(1.0) {
        return Err(Error::OffSpan { residual });
    }
    Ok(())
}

/// Jacobian, `Γ` and `B(a)` at `expansion_point ∈ span(Φ)`.
pub fn delta_quantities(
    spec: &FunctionalSpec,
    design: &DesignMatrix,
    sigma: f64,
    expansion_point: &DVector<f64>,
    radius_a: f64,
) -> Result<DeltaMethodQuantities> {
    spec.check_design(design)?;
    if expansion_point.len() != design.n() {
        return Err(Error::InvalidDimension(format!(
            "expansion point has length {}, n = {}",
            expansion_point.len(),
            design.n()
        )));
    }
    if !(radius_a > 0.0) {
        return Err(Error::Input(format!("radius must be positive, got {radius_a}")));
    }
    check_in_span(design, expansion_point)?;
    let n = design.n() as f64;
    let s2 = sigma * sigma;
    let gram = design.gram_factor();
    // σ² J Σ_Φ Jᵀ for an n-space Jacobian, via (L⁻¹ Φᵀ Jᵀ)ᵀ (L⁻¹ Φᵀ Jᵀ)
    let gamma_n_space = |jac: &DMatrix<f64>| {
        let mut w = DMatrix::zeros(design.k(), jac.nrows());
        for r in 0..jac.nrows() {
            let row = jac.row(r).transpose();
            w.set_column(r, &gram.solve_l(&design.apply_transpose(&row)));
        }
        w.tr_mul(&w) * s2
    };
    Ok(match &spec.kind {
        FunctionalKind::Linear(a) => DeltaMethodQuantities {
            gamma: gamma_n_space(a),
            b_bound: 0.0,
            radius: radius_a,
            jacobian: a.clone(),
        },
        FunctionalKind::QuadraticNorm => {
            let jac = DMatrix::from_row_slice(1, expansion_point.len(), expansion_point.as_slice()) * (2.0 / n);
            DeltaMethodQuantities {
                gamma: gamma_n_space(&jac),
                b_bound: 2.0 * s2 * radius_a / n,
                radius: radius_a,
                jacobian: jac,
            }
        }
        FunctionalKind::ThetaQuadratic => {
            let theta = design.coefficients(expansion_point);
            let jac = DMatrix::from_row_slice(1, theta.len(), theta.as_slice()) * 2.0;
            let g = s2 * gram.inverse_quad_form(&(&theta * 2.0));
            // sup ‖h_θ‖² over ‖Φ h_θ‖² ≤ σ² a is σ² a / λ_min(ΦᵀΦ)
            let lambda_min = match gram.scalar() {
                Some(s) => s,
                None => gram.eigenvalues()[0],
            };
            DeltaMethodQuantities {
                gamma: DMatrix::from_element(1, 1, g),
                b_bound: 2.0 * s2 * radius_a / lambda_min,
                radius: radius_a,
                jacobian: jac,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalConditionReport {
    pub min_eigenvalue: f64,
    pub nonsingular: bool,
    /// `B(M)² ‖Γ⁻¹‖`.
    pub b_ratio: f64,
    /// `k / M`.
    pub dimension_ratio: f64,
}

/// Finite-n diagnostics for the nonlinear-functional conditions. `B` is
/// linear in its radius for every supported kind, so `dq` may be computed
/// at any radius.
pub fn check_theorem3_conditions(dq: &DeltaMethodQuantities, k: usize, m_n: f64) -> FunctionalConditionReport {
    let eig = dq.gamma.clone().symmetric_eigen().eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let nonsingular = min > 1e-12 * max.max(f64::MIN_POSITIVE) && min > 0.0;
    let b = dq.b_bound * m_n / dq.radius;
    let b_ratio = if nonsingular {
        b * b / min
    } else if b == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    FunctionalConditionReport {
        min_eigenvalue: min,
        nonsingular,
        b_ratio,
        dimension_ratio: k as f64 / m_n,
    }
}

/// Centre and scale of `bᵀ(G(F) − G(Y_Φ)) / √(bᵀΓb)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub center: f64,
    pub scale: f64,
}

impl Standardization {
    pub fn identity() -> Self {
        Self { center: 0.0, scale: 1.0 }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.center) / self.scale
    }

    pub fn invert(&self, z: f64) -> f64 {
        self.center + self.scale * z
    }
}

/// Centres at `bᵀG(Φθ_Y)` and scales by `√(bᵀΓb)` with `Γ` evaluated at
/// `Φ · gamma_theta`: the projected truth, or `θ_Y` for the plug-in version.
pub fn standardization(
    spec: &FunctionalSpec,
    design: &DesignMatrix,
    sigma: f64,
    theta_y: &DVector<f64>,
    gamma_theta: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<Standardization> {
    if b.len() != spec.p() {
        return Err(Error::InvalidDimension(format!("b has length {}, p = {}", b.len(), spec.p())));
    }
    let center = b.dot(&spec.value_at_theta(design, theta_y));
    let dq = delta_quantities(spec, design, sigma, &design.apply(gamma_theta), 1.0)?;
    let var = (b.transpose() * &dq.gamma * b)[(0, 0)];
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::DegenerateScale(format!("bᵀΓb = {var:e}")));
    }
    Ok(Standardization {
        center,
        scale: var.sqrt(),
    })
}

/// Posterior on `θ` to push through a functional.
#[derive(Debug, Clone, Copy)]
pub enum PosteriorRef<'a> {
    Gaussian(&'a GaussianDist),
    Sample(&'a PosteriorSample),
    PointMass(&'a DVector<f64>),
}

/// Draws used when a Gaussian pushforward has no closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushforwardDraws {
    pub n_draws: usize,
    pub seed: u64,
}

impl Default for PushforwardDraws {
    fn default() -> Self {
        Self { n_draws: 20_000, seed: 0 }
    }
}

/// Covariance of `θ` as `s · I`, when it is isotropic.
fn isotropic_theta_scale(cov: &Covariance) -> Option<f64> {
    match cov {
        Covariance::ScalarIdentity(s) => Some(*s),
        Covariance::ScaledGramInverse { scale, gram } => gram.scalar().map(|g| scale / g),
        Covariance::Diagonal(v) => {
            let v0 = v[0];
            v.iter().all(|x| (x - v0).abs() <= 1e-14 * v0).then_some(v0)
        }
        Covariance::Full { .. } => None,
    }
}

/// Law of `(bᵀG(Φθ) − center)/scale` under the posterior on `θ`.
///
/// Exact for linear functionals of Gaussians, and a scaled noncentral χ² for
/// the quadratic kinds when the relevant covariance is isotropic; weighted
/// draws otherwise.
pub fn functional_posterior_1d(
    spec: &FunctionalSpec,
    posterior: PosteriorRef<'_>,
    design: &DesignMatrix,
    b: &DVector<f64>,
    standard: Standardization,
    draws: PushforwardDraws,
) -> Result<Dist1d> {
    spec.check_design(design)?;
    if b.len() != spec.p() {
        return Err(Error::InvalidDimension(format!("b has length {}, p = {}", b.len(), spec.p())));
    }
    if !(standard.scale > 0.0) || !standard.scale.is_finite() {
        return Err(Error::DegenerateScale(format!("standardizing scale is {}", standard.scale)));
    }
    let scalar = |theta: &DVector<f64>| b.dot(&spec.value_at_theta(design, theta));
    let raw = match posterior {
        PosteriorRef::PointMass(theta) => Dist1d::PointMass(scalar(theta)),
        PosteriorRef::Sample(s) => {
            let values: Vec<f64> = s.draws.iter().map(scalar).collect();
            Dist1d::Weighted(WeightedSample::new(&values, &s.weights())?)
        }
        PosteriorRef::Gaussian(g) => match gaussian_closed_form(spec, g, design, b) {
            Some(d) => d,
            None => {
                let mut rng = stream(draws.seed, &[purpose::FUNCTIONAL]);
                let mut z = DVector::zeros(g.dim());
                let values: Vec<f64> = (0..draws.n_draws.max(1))
                    .map(|_| {
                        fill_standard_normal(&mut rng, z.as_mut_slice());
                        scalar(&g.unwhiten(&z))
                    })
                    .collect();
                Dist1d::Weighted(WeightedSample::unweighted(&values)?)
            }
        },
    };
    raw.standardize(standard.center, standard.scale)
}

fn gaussian_closed_form(spec: &FunctionalSpec, g: &GaussianDist, design: &DesignMatrix, b: &DVector<f64>) -> Option<Dist1d> {
    let k = g.dim() as f64;
    match &spec.kind {
        FunctionalKind::Linear(a) => {
            let w = design.apply_transpose(&(a.transpose() * b));
            Some(Dist1d::Gaussian {
                mean: w.dot(g.mean()),
                sd: g.quad_form(&w).sqrt(),
            })
        }
        FunctionalKind::QuadraticNorm => {
            // ‖Φθ‖² = ‖Lᵀθ‖², and Lᵀθ has covariance s·I when Σ = s (ΦᵀΦ)⁻¹
            let gram = design.gram_factor();
            let s = match g.cov() {
                Covariance::ScaledGramInverse { scale, gram: pg } if pg.gram() == gram.gram() => *scale,
                cov => gram.scalar().and_then(|c| isotropic_theta_scale(cov).map(|v| v * c))?,
            };
            let m = gram.mul_lt(g.mean());
            let factor = b[0] * s / design.n() as f64;
            (factor > 0.0).then(|| Dist1d::ScaledNoncentralChi2 {
                df: k,
                nc: m.norm_squared() / s,
                scale: factor,
                shift: 0.0,
            })
        }
        FunctionalKind::ThetaQuadratic => {
            let s = isotropic_theta_scale(g.cov())?;
            let factor = b[0] * s;
            (factor > 0.0).then(|| Dist1d::ScaledNoncentralChi2 {
                df: k,
                nc: g.mean().norm_squared() / s,
                scale: factor,
                shift: 0.0,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    /// Fewer than ten effective draws fall in either tail.
    pub wide_warning: bool,
}

impl CredibleInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Equal-tailed interval of posterior mass `level`.
pub fn credible_interval(dist: &Dist1d, level: f64) -> Result<CredibleInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("level must lie in (0, 1), got {level}")));
    }
    let tail = 0.5 * (1.0 - level);
    let wide_warning = dist.effective_draws().is_some_and(|ess| ess * tail < 10.0);
    Ok(CredibleInterval {
        lo: dist.quantile(tail),
        hi: dist.quantile(1.0 - tail),
        wide_warning,
    })
}

/// The two pieces of `|G F_Φ − F(f)| ≤ |G F_0 − F(f)| + ‖Gᵀ‖ ‖F_Φ − F_0‖`
/// for a `1 × n` linear functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBiasSplit {
    pub total: f64,
    pub discretization: f64,
    pub projection: f64,
}

impl LinearBiasSplit {
    pub fn holds(&self) -> bool {
        self.total <= (self.discretization + self.projection) * (1.0 + 1e-12) + 1e-15
    }
}

pub fn linear_bias_split(spec: &FunctionalSpec, design: &DesignMatrix, f0: &DVector<f64>, target: f64) -> Result<LinearBiasSplit> {
    let FunctionalKind::Linear(a) = &spec.kind else {
        return Err(Error::Unsupported("bias split applies to linear functionals".into()));
    };
    if a.nrows() != 1 {
        return Err(Error::InvalidDimension("bias split needs a scalar functional".into()));
    }
    spec.check_design(design)?;
    let f_phi = design.apply_projection(f0);
    Ok(LinearBiasSplit {
        total: ((a * &f_phi)[0] - target).abs(),
        discretization: ((a * f0)[0] - target).abs(),
        projection: a.row(0).norm() * (&f_phi - f0).norm(),
    })
}
