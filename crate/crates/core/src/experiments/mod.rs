//! Monte Carlo experiments: simulated data, per-replicate posteriors and
//! the distances, contraction masses and functional summaries recorded for
//! each `(n, replicate)`.
//!
//! Every replicate draws from streams keyed by its own seed, so the rows do
//! not depend on the number of worker threads.

pub mod config;
pub mod results;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bayes::{
    check_theorem1_conditions, check_theorem2_conditions, conjugate_posterior_from_mle, coordinate_posterior_for_design,
    flat_posterior, posterior_tv_to_target, smooth_posterior_sample, PosteriorSample, PriorSpec, SmoothConditionReport,
};
use crate::designs::{build_bspline_design, build_fourier_design, build_identity_design, fourier_basis, project, uniform_points, DesignMatrix};
use crate::distances::{interval_sup_distance, tv_between_gaussians, tv_monte_carlo};
use crate::error::{Error, Result};
use crate::functionals::{
    check_theorem3_conditions, credible_interval, delta_quantities, functional_posterior_1d, linear_bias_split,
    riemann_linear_functional, standardization, FunctionalConditionReport, FunctionalSpec, PosteriorRef, PushforwardDraws,
};
use crate::gaussian::{Covariance, GaussianDist};
use crate::rng::{fill_standard_normal, purpose, replicate_seed, stream};
use crate::special::{integrate, noncentral_chi2_sf};
use crate::truths::{
    default_prefix_len, make_sobolev_truth, projection_bias, render_truth_vector, DecayRule, HolderKind, HolderTruth, Truth,
};
use crate::univariate::Dist1d;

pub use config::{
    ExperimentConfig, ExperimentKind, FunctionalKindConfig, GammaAt, HolderShape, KRule, Model, PriorConfig, TruthConfig,
};
pub use results::{read_results, summarize, write_results, ExperimentResult, ResultRow, SummaryRow};

/// `Y = F_0 + σ ε` with `ε` standard normal from the data stream of `seed`.
pub fn generate_data(f0: &DVector<f64>, sigma: f64, seed: u64) -> Result<DVector<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Input(format!("noise level must be positive, got {sigma}")));
    }
    let mut rng = stream(seed, &[purpose::DATA]);
    let mut z = DVector::zeros(f0.len());
    fill_standard_normal(&mut rng, z.as_mut_slice());
    Ok(f0 + z * sigma)
}

/// The configured truth, built once for the whole grid.
pub fn build_truth(config: &ExperimentConfig) -> Result<Truth> {
    match &config.truth {
        TruthConfig::Sobolev {
            alpha,
            radius,
            decay,
            coefficients,
            prefix,
        } => {
            let k_max = (0..config.n_grid.len()).map(|i| config.k_for(i)).collect::<Result<Vec<_>>>()?;
            let mut len = default_prefix_len(k_max.into_iter().max().unwrap_or(1));
            if config.model == Model::GaussianSequence {
                len = len.max(*config.n_grid.last().unwrap_or(&0));
            }
            let rule = match (decay, coefficients) {
                (Some(p), _) => DecayRule::PowerDecay { exponent: *p },
                (None, Some(c)) => DecayRule::Explicit(c.clone()),
                (None, None) => return Err(Error::Config("sobolev truth needs 'decay' or 'coefficients'".into())),
            };
            Ok(Truth::Sobolev(make_sobolev_truth(*alpha, *radius, &rule, prefix.unwrap_or(len))?))
        }
        TruthConfig::Holder { alpha, shape } => {
            let kind = match shape {
                HolderShape::AbsPower => HolderKind::AbsPower,
                HolderShape::Sine => HolderKind::Sine,
            };
            Ok(Truth::Holder(HolderTruth::new(kind, *alpha)?))
        }
    }
}

pub fn build_design(config: &ExperimentConfig, n: usize, k: usize) -> Result<DesignMatrix> {
    match config.model {
        Model::GaussianSequence => build_identity_design(n, k),
        Model::FourierRegression => build_fourier_design(n, k),
        Model::SplineRegression => build_bspline_design(&uniform_points(n), k, config.spline_order),
    }
}

/// `∫_0^1 h`, split at the midpoint where the catalogued truths may kink.
fn integral01(h: impl Fn(f64) -> f64) -> f64 {
    integrate(&h, 0.0, 0.5, 1e-13) + integrate(&h, 0.5, 1.0, 1e-13)
}

fn l2_norm_sq(truth: &Truth) -> f64 {
    match truth {
        Truth::Sobolev(t) => t.l2_norm_sq(),
        Truth::Holder(_) => integral01(|x| truth.eval(x).powi(2)),
    }
}

/// Finite-n ratios describing how far the prior is from the regime where the
/// posterior is close to its Gaussian limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConditions {
    /// `σ/τ` for Gaussian priors, `max |Δ ln w|` on the ellipsoid for smooth ones.
    pub prior: f64,
    /// `‖F_0‖σ/τ²`, or the determinant ratio for smooth priors.
    pub signal: f64,
    /// `kσ⁴/τ⁴`, or `k ln k / M` for smooth priors.
    pub dimension: f64,
}

/// A configured functional resolved at one sample size.
#[derive(Debug, Clone)]
pub struct FunctionalContext {
    pub spec: FunctionalSpec,
    pub b: DVector<f64>,
    pub level: f64,
    pub gamma_at: GammaAt,
    /// `bᵀ` applied to the functional of the true regression function.
    pub true_value: f64,
    /// `bᵀG(F_Φ)`.
    pub projected_value: f64,
    pub report: FunctionalConditionReport,
    /// The linear bias split holds, or the functional is not linear.
    pub bias_split_holds: bool,
}

/// Everything shared by the replicates at one grid point.
#[derive(Debug, Clone)]
pub struct GridContext {
    pub index: usize,
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    pub design: DesignMatrix,
    pub f0: DVector<f64>,
    pub f_phi: DVector<f64>,
    pub theta_phi: DVector<f64>,
    /// `None` for the flat prior.
    pub prior: Option<PriorSpec>,
    pub m_n: f64,
    pub conditions: PriorConditions,
    pub smooth_report: Option<SmoothConditionReport>,
    pub functional: Option<FunctionalContext>,
}

fn true_functional_value(config: &ExperimentConfig, truth: &Truth, spec: &FunctionalSpec, design: &DesignMatrix, f0: &DVector<f64>) -> Result<f64> {
    let fc = config.functional.as_ref().expect("functional configured");
    Ok(match (config.model, fc.kind) {
        (Model::GaussianSequence, FunctionalKindConfig::ThetaQuadratic) => l2_norm_sq(truth),
        (Model::GaussianSequence, _) => spec.value_at_mean(design, f0)[0],
        (_, FunctionalKindConfig::LinearRiemann) => {
            let config::WeightFunction::Fourier(j) = fc.weight()?;
            match truth {
                Truth::Sobolev(t) => t.coeffs.get(j - 1).copied().unwrap_or(0.0),
                Truth::Holder(_) => integral01(|x| truth.eval(x) * fourier_basis(j, x)),
            }
        }
        (_, FunctionalKindConfig::QuadraticNorm | FunctionalKindConfig::ThetaQuadratic) => l2_norm_sq(truth),
    })
}

impl GridContext {
    pub fn new(config: &ExperimentConfig, truth: &Truth, index: usize) -> Result<Self> {
        let n = config.n_grid[index];
        let k = config.k_for(index)?;
        let sigma = config.sigma_rule().sigma(n);
        let design = build_design(config, n, k)?;
        let f0 = render_truth_vector(truth, &design)?;
        let f_phi = design.apply_projection(&f0);
        let theta_phi = design.coefficients(&f0);
        let prior = match &config.prior {
            PriorConfig::IsotropicGaussian { tau } => Some(PriorSpec::IsotropicGaussian { tau: tau.value(n) }),
            PriorConfig::CoordinateGaussian { variances } => Some(PriorSpec::CoordinateGaussian {
                variances: DVector::from_vec(variances.variances(n, k)),
            }),
            PriorConfig::Smooth { density } => Some(PriorSpec::Smooth(density.density())),
            PriorConfig::Flat => None,
        };
        if let Some(p) = &prior {
            p.validate(k)?;
        }
        let m_n = config.conditions.m_n(n, k);
        let mut smooth_report = None;
        let conditions = match &prior {
            Some(PriorSpec::IsotropicGaussian { tau }) => gaussian_conditions(sigma, *tau, f0.norm(), k),
            Some(PriorSpec::CoordinateGaussian { variances }) => {
                gaussian_conditions(sigma, variances.min().sqrt(), f0.norm(), k)
            }
            Some(PriorSpec::Smooth(density)) => {
                let probe_seed = replicate_seed(config.seed, index, usize::MAX);
                let r = check_theorem2_conditions(&design, density, &theta_phi, sigma, m_n, config.conditions.probes, probe_seed)?;
                let c = PriorConditions {
                    prior: r.max_abs_log_ratio,
                    signal: r.determinant_ratio,
                    dimension: r.dimension_ratio,
                };
                smooth_report = Some(r);
                c
            }
            None => PriorConditions {
                prior: 0.0,
                signal: 0.0,
                dimension: 0.0,
            },
        };
        let functional = match &config.functional {
            Some(fc) if config.experiment == ExperimentKind::Functional => {
                let spec = match fc.kind {
                    FunctionalKindConfig::LinearRiemann => {
                        let config::WeightFunction::Fourier(j) = fc.weight()?;
                        riemann_linear_functional(|x| fourier_basis(j, x), n)?
                    }
                    FunctionalKindConfig::QuadraticNorm => FunctionalSpec::quadratic_norm(),
                    FunctionalKindConfig::ThetaQuadratic => FunctionalSpec::theta_quadratic(),
                };
                let b = DVector::from_vec(fc.b.clone().unwrap_or_else(|| vec![1.0]));
                let true_value = b[0] * true_functional_value(config, truth, &spec, &design, &f0)?;
                let projected_value = b.dot(&spec.value_at_theta(&design, &theta_phi));
                let dq = delta_quantities(&spec, &design, sigma, &f_phi, 1.0)?;
                let report = check_theorem3_conditions(&dq, k, m_n);
                let bias_split_holds = match fc.kind {
                    FunctionalKindConfig::LinearRiemann => linear_bias_split(&spec, &design, &f0, true_value / b[0])?.holds(),
                    _ => true,
                };
                Some(FunctionalContext {
                    spec,
                    b,
                    level: fc.level,
                    gamma_at: fc.gamma,
                    true_value,
                    projected_value,
                    report,
                    bias_split_holds,
                })
            }
            _ => None,
        };
        Ok(Self {
            index,
            n,
            k,
            sigma,
            design,
            f0,
            f_phi,
            theta_phi,
            prior,
            m_n,
            conditions,
            smooth_report,
            functional,
        })
    }

    fn row(&self, experiment: ExperimentKind, replicate: usize, seed: u64, n_lambdas: usize) -> ResultRow {
        let mut row = ResultRow::new(experiment.name(), self.n, self.k, replicate, seed, self.sigma, n_lambdas);
        row.cond_prior = self.conditions.prior;
        row.cond_signal = self.conditions.signal;
        row.cond_dimension = self.conditions.dimension;
        row
    }

    fn posterior(&self, y: &DVector<f64>, theta_y: &DVector<f64>, seed: u64, draws: usize) -> Result<Posterior> {
        Ok(match &self.prior {
            Some(PriorSpec::IsotropicGaussian { tau }) => {
                Posterior::Gaussian(conjugate_posterior_from_mle(&self.design, *tau, self.sigma, theta_y)?)
            }
            Some(PriorSpec::CoordinateGaussian { variances }) => {
                Posterior::Gaussian(coordinate_posterior_for_design(&self.design, variances, self.sigma, y)?)
            }
            Some(PriorSpec::Smooth(density)) => {
                Posterior::Sample(smooth_posterior_sample(&self.design, density, self.sigma, y, draws, seed)?)
            }
            None => Posterior::Gaussian(flat_posterior(&self.design, self.sigma, theta_y)?),
        })
    }

    /// `N(θ_Y, σ²(ΦᵀΦ)⁻¹)`, stored as a diagonal when the coordinate prior
    /// makes the posterior diagonal too.
    fn target(&self, theta_y: &DVector<f64>) -> Result<GaussianDist> {
        if matches!(self.prior, Some(PriorSpec::CoordinateGaussian { .. })) {
            let s2 = self.sigma * self.sigma;
            let var = self.design.gram().diagonal().map(|g| s2 / g);
            return GaussianDist::new(theta_y.clone(), Covariance::Diagonal(var));
        }
        flat_posterior(&self.design, self.sigma, theta_y)
    }
}

fn gaussian_conditions(sigma: f64, tau: f64, f0_norm: f64, k: usize) -> PriorConditions {
    let r = check_theorem1_conditions(sigma, tau, f0_norm, k);
    PriorConditions {
        prior: r.noise_to_prior,
        signal: r.signal,
        dimension: r.dimension,
    }
}

enum Posterior {
    Gaussian(GaussianDist),
    Sample(PosteriorSample),
}

impl Posterior {
    fn as_ref(&self) -> PosteriorRef<'_> {
        match self {
            Posterior::Gaussian(g) => PosteriorRef::Gaussian(g),
            Posterior::Sample(s) => PosteriorRef::Sample(s),
        }
    }
}

fn add_flag(row: &mut ResultRow, flag: &str) {
    if !row.flag.is_empty() {
        row.flag.push(';');
    }
    row.flag.push_str(flag);
}

fn nan_or(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

/// Data, projection and posterior of one replicate.
struct Replicate {
    seed: u64,
    theta_y: DVector<f64>,
    posterior: Posterior,
}

fn replicate(ctx: &GridContext, config: &ExperimentConfig, rep: usize) -> Result<Replicate> {
    let seed = replicate_seed(config.seed, ctx.index, rep);
    let y = generate_data(&ctx.f0, ctx.sigma, seed)?;
    let theta_y = project(&ctx.design, &y)?.theta_hat;
    let posterior = ctx.posterior(&y, &theta_y, seed, config.mc_draws)?;
    Ok(Replicate {
        seed,
        theta_y,
        posterior,
    })
}

fn bvm_row(ctx: &GridContext, config: &ExperimentConfig, rep: usize) -> Result<ResultRow> {
    let r = replicate(ctx, config, rep)?;
    let mut row = ctx.row(ExperimentKind::Bvm, rep, r.seed, 0);
    let target = ctx.target(&r.theta_y)?;
    match &r.posterior {
        Posterior::Gaussian(p) => {
            let g = tv_between_gaussians(p, &target, config.mc_draws, r.seed)?;
            row.tv = g.estimate.value;
            row.tv_se = nan_or(g.estimate.se);
            row.tv_method = g.estimate.method.tag().to_string();
            row.tv_lower = nan_or(g.lower);
            row.tv_upper = nan_or(g.upper);
            if g.estimate.se.is_none() && config.mc_draws > 0 {
                let mc = tv_monte_carlo(
                    |x| p.log_density(x),
                    |x| target.log_density(x),
                    |rng| target.sample(rng),
                    config.mc_draws,
                    r.seed,
                    false,
                );
                row.tv_mc = mc.value;
                row.tv_mc_se = nan_or(mc.se);
            }
        }
        Posterior::Sample(s) => {
            let t = posterior_tv_to_target(s, &target, r.seed);
            row.tv = t.value;
            row.tv_se = nan_or(t.se);
            row.tv_method = t.method.tag().to_string();
            row.ess = s.ess;
            if t.unreliable {
                add_flag(&mut row, "degenerate-weights");
            }
        }
    }
    Ok(row)
}

/// `s` when the covariance is `s·I`.
fn isotropic_scale(cov: &Covariance) -> Option<f64> {
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

fn contraction_row(ctx: &GridContext, config: &ExperimentConfig, rep: usize) -> Result<ResultRow> {
    let r = replicate(ctx, config, rep)?;
    let lambdas = &config.contraction.lambdas;
    let mut row = ctx.row(ExperimentKind::Contraction, rep, r.seed, lambdas.len());
    let rate = config.contraction.rate.rate(ctx.n, ctx.k);
    let radii: Vec<f64> = lambdas.iter().map(|l| l * rate).collect();
    match &r.posterior {
        Posterior::Gaussian(p) => match isotropic_scale(p.cov()) {
            Some(s) => {
                let nc = (p.mean() - &ctx.theta_phi).norm_squared() / s;
                for (o, radius) in row.outside.iter_mut().zip(&radii) {
                    *o = noncentral_chi2_sf(radius * radius / s, ctx.k as f64, nc);
                }
                row.tv_method = "noncentral-chi2".into();
            }
            None => {
                let draws = config.mc_draws.max(1);
                let mut rng = stream(r.seed, &[purpose::POSTERIOR]);
                let mut z = DVector::zeros(ctx.k);
                let mut counts = vec![0usize; radii.len()];
                for _ in 0..draws {
                    fill_standard_normal(&mut rng, z.as_mut_slice());
                    let d = (p.unwhiten(&z) - &ctx.theta_phi).norm();
                    for (c, radius) in counts.iter_mut().zip(&radii) {
                        *c += usize::from(d > *radius);
                    }
                }
                for (o, c) in row.outside.iter_mut().zip(counts) {
                    *o = c as f64 / draws as f64;
                }
                row.tv_method = "draw-count".into();
            }
        },
        Posterior::Sample(s) => {
            for (o, radius) in row.outside.iter_mut().zip(&radii) {
                *o = s
                    .draws
                    .iter()
                    .zip(&s.log_weights)
                    .filter(|(x, _)| (*x - &ctx.theta_phi).norm() > *radius)
                    .map(|(_, l)| l.exp())
                    .sum();
            }
            row.ess = s.ess;
            row.tv_method = "weighted-draw-count".into();
            if s.degenerate {
                add_flag(&mut row, "degenerate-weights");
            }
        }
    }
    Ok(row)
}

fn functional_row(ctx: &GridContext, config: &ExperimentConfig, rep: usize) -> Result<ResultRow> {
    let fc = ctx.functional.as_ref().ok_or_else(|| Error::Config("functional experiment needs a [functional] section".into()))?;
    let r = replicate(ctx, config, rep)?;
    let mut row = ctx.row(ExperimentKind::Functional, rep, r.seed, 0);
    row.cond_signal = fc.report.b_ratio;
    row.cond_dimension = fc.report.dimension_ratio;
    if !fc.bias_split_holds {
        add_flag(&mut row, "bias-split-violated");
    }
    let gamma_theta = match fc.gamma_at {
        GammaAt::Truth => &ctx.theta_phi,
        GammaAt::PlugIn => &r.theta_y,
    };
    let standard = match standardization(&fc.spec, &ctx.design, ctx.sigma, &r.theta_y, gamma_theta, &fc.b) {
        Ok(s) => s,
        Err(Error::DegenerateScale(_)) => {
            add_flag(&mut row, "degenerate-scale");
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    let draws = PushforwardDraws {
        n_draws: config.mc_draws.max(1),
        seed: r.seed,
    };
    let dist = functional_posterior_1d(&fc.spec, r.posterior.as_ref(), &ctx.design, &fc.b, standard, draws)?;
    row.interval_sup = interval_sup_distance(&dist, &Dist1d::standard_normal());
    row.freq_stat = (standard.center - fc.projected_value) / standard.scale;
    row.bias_term = (fc.projected_value - fc.true_value) / standard.scale;
    let ci = credible_interval(&dist, fc.level)?;
    row.coverage = if ci.contains(standard.apply(fc.true_value)) { 1.0 } else { 0.0 };
    if ci.wide_warning {
        add_flag(&mut row, "wide-interval");
    }
    if let Posterior::Sample(s) = &r.posterior {
        row.ess = s.ess;
        if s.degenerate {
            add_flag(&mut row, "degenerate-weights");
        }
    }
    Ok(row)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Input(format!("cannot start worker pool: {e}")))
}

fn run_rows(
    config: &ExperimentConfig,
    jobs: usize,
    lambdas: Vec<f64>,
    row_fn: impl Fn(&GridContext, &ExperimentConfig, usize) -> Result<ResultRow> + Sync,
) -> Result<ExperimentResult> {
    config.validate()?;
    let truth = build_truth(config)?;
    let pool = thread_pool(jobs)?;
    pool.install(|| {
        let mut rows = Vec::with_capacity(config.n_grid.len() * config.replicates);
        for index in 0..config.n_grid.len() {
            let ctx = GridContext::new(config, &truth, index)?;
            let batch = (0..config.replicates)
                .into_par_iter()
                .map(|rep| row_fn(&ctx, config, rep))
                .collect::<Result<Vec<_>>>()?;
            rows.extend(batch);
        }
        Ok(ExperimentResult { lambdas, rows })
    })
}

/// TV between each replicate's posterior and `N(θ_Y, σ²(ΦᵀΦ)⁻¹)`.
/// `jobs = 0` uses every available core.
pub fn run_bvm_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    run_rows(config, jobs, Vec::new(), bvm_row)
}

/// Posterior mass outside `λ · rate(n, k)` around the projected truth's
/// coefficients, for each configured `λ`.
pub fn run_contraction_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    run_rows(config, jobs, config.contraction.lambdas.clone(), contraction_row)
}

/// Standardized functional posteriors, frequentist statistics, bias terms
/// and credible-interval coverage.
pub fn run_functional_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    run_rows(config, jobs, Vec::new(), functional_row)
}

pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResult> {
    match config.experiment {
        ExperimentKind::Bvm => run_bvm_experiment(config, jobs),
        ExperimentKind::Contraction => run_contraction_experiment(config, jobs),
        ExperimentKind::Functional => run_functional_experiment(config, jobs),
    }
}

/// Condition ratios at one grid point.
#[derive(Debug, Clone)]
pub struct ConditionRow {
    pub n: usize,
    pub k: usize,
    pub sigma: f64,
    pub m_n: f64,
    pub prior: PriorConditions,
    /// `‖F_0 − F_Φ‖ / σ`.
    pub bias_to_noise: f64,
    pub smooth: Option<SmoothConditionReport>,
    pub functional: Option<FunctionalConditionReport>,
}

/// Condition diagnostics over the grid without simulating any data.
pub fn check_conditions(config: &ExperimentConfig) -> Result<Vec<ConditionRow>> {
    config.validate()?;
    let truth = build_truth(config)?;
    (0..config.n_grid.len())
        .map(|index| {
            let ctx = GridContext::new(config, &truth, index)?;
            Ok(ConditionRow {
                n: ctx.n,
                k: ctx.k,
                sigma: ctx.sigma,
                m_n: ctx.m_n,
                prior: ctx.conditions,
                bias_to_noise: projection_bias(&ctx.f0, &ctx.design) / ctx.sigma,
                smooth: ctx.smooth_report.clone(),
                functional: ctx.functional.as_ref().map(|f| f.report),
            })
        })
        .collect()
}
