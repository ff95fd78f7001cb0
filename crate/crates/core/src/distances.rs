//! Total-variation distances between Gaussian laws, truncation and tail
//! bounds, and the sup-over-intervals distance on the line.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gaussian::{Covariance, GaussianDist};
use crate::rng::{purpose, stream};
use crate::special::{chi2_cdf, chi2_sf, integrate, noncentral_chi2_cdf, noncentral_chi2_sf, normal_cdf, normal_pdf};
use crate::univariate::Dist1d;

/// Bootstrap resamples behind Monte Carlo standard errors.
pub const DEFAULT_BOOTSTRAP: usize = 200;

/// Grid size per distribution in [`interval_sup_distance`].
pub const INTERVAL_GRID: usize = 512;

/// Relative distance from 1 below which a variance ratio counts as 1.
const UNIT_RATIO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvMethod {
    ExactShift,
    ExactScale,
    ExactShiftScale,
    Truncation,
    MonteCarlo,
}

impl TvMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            TvMethod::ExactShift => "exact-shift",
            TvMethod::ExactScale => "exact-scale",
            TvMethod::ExactShiftScale => "exact-shift-scale",
            TvMethod::Truncation => "truncation",
            TvMethod::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvResult {
    pub value: f64,
    pub method: TvMethod,
    /// Bootstrap standard error, Monte Carlo only.
    pub se: Option<f64>,
    /// Closed-form upper bound accompanying the exact value, when one applies.
    pub bound: Option<f64>,
    /// Effective sample size of the weights, Monte Carlo only.
    pub ess: Option<f64>,
    /// Set when the weights are too degenerate to trust the estimate.
    pub unreliable: bool,
}

impl TvResult {
    fn exact(value: f64, method: TvMethod, bound: Option<f64>) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            method,
            se: None,
            bound,
            ess: None,
            unreliable: false,
        }
    }
}

/// `‖N(0, I) − N(z, I)‖_TV = P(|U| ≤ ‖z‖/2)`, with the bound `‖z‖/√(2π)`.
pub fn tv_gaussian_shift(z: &[f64]) -> TvResult {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    tv_gaussian_shift_norm(norm)
}

pub fn tv_gaussian_shift_norm(norm: f64) -> TvResult {
    let h = 0.5 * norm;
    // P(|U| ≤ h) = 1 − 2Φ(−h), accurate for small h
    let value = 1.0 - 2.0 * normal_cdf(-h);
    TvResult::exact(value, TvMethod::ExactShift, Some(norm / (2.0 * PI).sqrt()))
}

fn check_ratio(c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Input(format!("variance ratio must be positive and finite, got {c}")));
    }
    Ok(())
}

/// `‖N(0, c I_k) − N(0, I_k)‖_TV`.
pub fn tv_gaussian_scale(k: usize, c: f64) -> Result<TvResult> {
    check_ratio(c)?;
    if k == 0 {
        return Err(Error::InvalidDimension("dimension must be at least 1".into()));
    }
    if c == 1.0 {
        return Ok(TvResult::exact(0.0, TvMethod::ExactScale, None));
    }
    let c = if c > 1.0 { 1.0 / c } else { c };
    let kf = k as f64;
    // densities cross on the sphere ‖x‖² = t
    let t = kf * c * (1.0 / c).ln() / (1.0 - c);
    let value = chi2_cdf(t / c, kf) - chi2_cdf(t, kf);
    Ok(TvResult::exact(value, TvMethod::ExactScale, None))
}

/// `‖N(a, c I_k) − N(0, I_k)‖_TV` with `‖a‖ = delta`.
///
/// For `c < 1` the set where the first density dominates is the ball
/// `‖x − a/(1−c)‖² < R²`, so both masses are noncentral chi-square CDFs.
pub fn tv_gaussian_shift_scale(k: usize, delta: f64, c: f64) -> Result<TvResult> {
    check_ratio(c)?;
    if k == 0 {
        return Err(Error::InvalidDimension("dimension must be at least 1".into()));
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::Input(format!("shift norm must be finite and nonnegative, got {delta}")));
    }
    if (1.0 - c).abs() < UNIT_RATIO_TOL {
        let mut r = tv_gaussian_shift_norm(delta);
        r.method = TvMethod::ExactShiftScale;
        return Ok(r);
    }
    if delta == 0.0 {
        let mut r = tv_gaussian_scale(k, c)?;
        r.method = TvMethod::ExactShiftScale;
        return Ok(r);
    }
    let (delta, c) = if c > 1.0 { (delta / c.sqrt(), 1.0 / c) } else { (delta, c) };
    let nc_q = (delta / (1.0 - c)).powi(2);
    let value = if nc_q <= LARGE_NONCENTRALITY {
        shift_scale_by_mixture(k, delta, c)
    } else {
        shift_scale_by_quadrature(k, delta, c)
    };
    Ok(TvResult::exact(value, TvMethod::ExactShiftScale, None))
}

/// Difference of the two noncentral χ² masses of the ball where the first
/// density dominates.
fn shift_scale_by_mixture(k: usize, delta: f64, c: f64) -> f64 {
    let kf = k as f64;
    let d2 = delta * delta;
    let one_minus = 1.0 - c;
    let nc_q = d2 / (one_minus * one_minus);
    let r2 = (c * kf * (1.0 / c).ln() - d2) / one_minus + nc_q;
    noncentral_chi2_cdf(r2 / c, kf, nc_q * c) - noncentral_chi2_cdf(r2, kf, nc_q)
}

/// Above this noncentrality the ball probabilities are integrated along the
/// shift direction instead of summed as Poisson mixtures.
const LARGE_NONCENTRALITY: f64 = 100.0;

/// Ball masses written as one-dimensional integrals over the coordinate `u`
/// along the shift. The orthogonal part is a central χ²_{k−1}, and the
/// admissible squared radius at `u` is
/// `g(u) = (c k ln(1/c) − δ² + 2uδ)/(1 − c) − u²`.
fn shift_scale_by_quadrature(k: usize, delta: f64, c: f64) -> f64 {
    let one_minus = 1.0 - c;
    let a = c * k as f64 * (-(c.ln())) - delta * delta;
    let g = |u: f64| (a + 2.0 * u * delta) / one_minus - u * u;
    // roots of g: u± = m ± R with m = δ/(1−c); the smaller one via the root product
    let m = delta / one_minus;
    let r = (m * m + a / one_minus).sqrt();
    let upper = m + r;
    let lower = -(a / one_minus) / upper;
    let sc = c.sqrt();
    if k == 1 {
        let q = normal_cdf(upper) - normal_cdf(lower);
        let p = normal_cdf((upper - delta) / sc) - normal_cdf((lower - delta) / sc);
        return p - q;
    }
    let kf = (k - 1) as f64;
    const SPAN: f64 = 12.0;
    let q = integrate_smoothed(|u| normal_pdf(u) * chi2_cdf(g(u).max(0.0), kf), lower.max(-SPAN), upper.min(SPAN));
    let p = integrate_smoothed(
        |v| normal_pdf(v) * chi2_cdf((g(delta + sc * v) / c).max(0.0), kf),
        ((lower - delta) / sc).max(-SPAN),
        ((upper - delta) / sc).min(SPAN),
    );
    p - q
}

/// `∫_a^b f` after the substitution `u = a + (b − a)(1 − cos θ)/2`, which
/// removes square-root behaviour at the endpoints.
fn integrate_smoothed(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    integrate(|t| f(a + half * (1.0 - t.cos())) * half * t.sin(), 0.0, PI, 1e-15)
}

/// Mass outside the ellipsoid of squared whitened radius `m` for a Gaussian
/// whose whitened centre sits at squared distance `noncentrality` from the
/// ellipsoid centre. Carries the Gaussian-truncation bound when it applies.
pub fn tv_truncation(k: usize, m: f64, noncentrality: f64) -> Result<TvResult> {
    if !(m > 0.0) {
        return Err(Error::Input(format!("truncation radius must be positive, got {m}")));
    }
    if !(noncentrality >= 0.0) {
        return Err(Error::Input(format!("noncentrality must be nonnegative, got {noncentrality}")));
    }
    let value = if m.is_infinite() {
        0.0
    } else {
        noncentral_chi2_sf(m, k as f64, noncentrality)
    };
    let bound = if noncentrality == 0.0 { truncation_bound(k, m) } else { None };
    Ok(TvResult::exact(value, TvMethod::Truncation, bound))
}

/// `2 exp(−(√M − 2√k)²/8)`, valid when `M ≥ 4k`.
pub fn truncation_bound(k: usize, m: f64) -> Option<f64> {
    let kf = k as f64;
    if m >= 4.0 * kf {
        let gap = m.sqrt() - 2.0 * kf.sqrt();
        Some(2.0 * (-gap * gap / 8.0).exp())
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    pub exact: f64,
    pub bound: f64,
}

impl TailCheck {
    pub fn holds(&self) -> bool {
        self.exact <= self.bound * (1.0 + 1e-12)
    }
}

/// Exact `P(√U > √k + √(2x))` for `U ~ χ²_k`, against `e^{−x}`.
pub fn cirelson_tail(k: usize, x: f64) -> Result<TailCheck> {
    if !(x >= 0.0) {
        return Err(Error::Input(format!("x must be nonnegative, got {x}")));
    }
    let kf = k as f64;
    let r = kf.sqrt() + (2.0 * x).sqrt();
    Ok(TailCheck {
        exact: chi2_sf(r * r, kf),
        bound: (-x).exp(),
    })
}

/// `sup_I |P(I) − Q(I)|` over intervals, as `sup D − inf D` for
/// `D = F_P − F_Q` (including `D(±∞) = 0`), clamped to `[0, 1]`.
pub fn interval_sup_distance(p: &Dist1d, q: &Dist1d) -> f64 {
    let mut grid = p.grid(INTERVAL_GRID);
    grid.extend(q.grid(INTERVAL_GRID));
    grid.retain(|x| x.is_finite());
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let d_right = |x: f64| p.cdf(x) - q.cdf(x);
    let d_left = |x: f64| p.cdf_left(x) - q.cdf_left(x);
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    let (mut arg_hi, mut arg_lo) = (None, None);
    for (i, &x) in grid.iter().enumerate() {
        for v in [d_right(x), d_left(x)] {
            if v > hi {
                hi = v;
                arg_hi = Some(i);
            }
            if v < lo {
                lo = v;
                arg_lo = Some(i);
            }
        }
    }
    if p.is_continuous() && q.is_continuous() {
        if let Some(i) = arg_hi {
            hi = hi.max(refine(&grid, i, d_right));
        }
        if let Some(i) = arg_lo {
            lo = lo.min(-refine(&grid, i, |x| -d_right(x)));
        }
    }
    (hi - lo).clamp(0.0, 1.0)
}

/// Golden-section maximization of `f` between the grid neighbours of `i`.
fn refine(grid: &[f64], i: usize, f: impl Fn(f64) -> f64) -> f64 {
    let a0 = grid[i.saturating_sub(1)];
    let b0 = grid[(i + 1).min(grid.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (a0, b0);
    let mut best = f(grid[i]);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        let (f1, f2) = (f(x1), f(x2));
        best = best.max(f1).max(f2);
        if f1 < f2 {
            a = x1;
        } else {
            b = x2;
        }
        if b - a <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
    }
    best
}

/// Self-normalized or plain importance estimate of `E_Q[(1 − p/q)_+]` from
/// per-draw log ratios `ln p − ln q`. The standard error is bootstrapped
/// for self-normalized estimates and analytic otherwise.
pub fn tv_from_log_ratios(log_ratios: &[f64], self_normalize: bool, bootstrap: usize, seed: u64) -> TvResult {
    let zeros = vec![0.0; log_ratios.len()];
    tv_from_weighted_log_ratios(&zeros, log_ratios, self_normalize, bootstrap, seed)
}

/// Estimate of `‖P − T‖_TV = E_Q[(t/q − p/q)_+]` from draws of `Q`, given
/// `ln(t/q)` and `ln(p/q)` per draw.
pub fn tv_from_weighted_log_ratios(
    log_target: &[f64],
    log_weights: &[f64],
    self_normalize: bool,
    bootstrap: usize,
    seed: u64,
) -> TvResult {
    let n = log_weights.len();
    assert_eq!(n, log_target.len());
    let shift = if self_normalize {
        log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    };
    let w: Vec<f64> = log_weights
        .iter()
        .map(|l| if shift.is_finite() { (l - shift).exp() } else { 0.0 })
        .collect();
    let t: Vec<f64> = log_target.iter().map(|l| l.exp()).collect();
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|x| x * x).sum();
    let ess = if sum_w2 > 0.0 { sum_w * sum_w / sum_w2 } else { 0.0 };
    let unreliable = n == 0 || !(sum_w > 0.0) || ess < 0.01 * n as f64;

    let estimate = |idx: &mut dyn Iterator<Item = usize>| -> f64 {
        let ids: Vec<usize> = idx.collect();
        let norm = if self_normalize {
            let s: f64 = ids.iter().map(|&i| w[i]).sum();
            if s > 0.0 {
                s / ids.len() as f64
            } else {
                return f64::NAN;
            }
        } else {
            1.0
        };
        ids.iter().map(|&i| (t[i] - w[i] / norm).max(0.0)).sum::<f64>() / ids.len() as f64
    };
    let value = if n == 0 { f64::NAN } else { estimate(&mut (0..n)) };

    let se = if n > 1 && !self_normalize {
        // plain estimate: a mean of iid terms
        let terms: Vec<f64> = (0..n).map(|i| (t[i] - w[i]).max(0.0)).collect();
        let m = terms.iter().sum::<f64>() / n as f64;
        let var = terms.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        Some((var / n as f64).sqrt())
    } else if n > 1 && bootstrap > 1 {
        let mut rng = stream(seed, &[purpose::BOOTSTRAP]);
        let reps: Vec<f64> = (0..bootstrap)
            .map(|_| estimate(&mut (0..n).map(|_| rng.random_range(0..n))))
            .filter(|v| v.is_finite())
            .collect();
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        let var = reps.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (reps.len() as f64 - 1.0);
        Some(var.sqrt())
    } else {
        None
    };
    TvResult {
        value: if value.is_finite() { value.clamp(0.0, 1.0) } else { value },
        method: TvMethod::MonteCarlo,
        se,
        bound: None,
        ess: Some(ess),
        unreliable,
    }
}

/// Monte Carlo `‖P − Q‖_TV` from `n_draws` draws of `Q`.
///
/// With `self_normalize`, `log_p` may omit its normalizing constant.
pub fn tv_monte_carlo(
    log_p: impl Fn(&DVector<f64>) -> f64,
    log_q: impl Fn(&DVector<f64>) -> f64,
    mut sampler_q: impl FnMut(&mut ChaCha8Rng) -> DVector<f64>,
    n_draws: usize,
    seed: u64,
    self_normalize: bool,
) -> TvResult {
    let mut rng = stream(seed, &[purpose::TV]);
    let ratios: Vec<f64> = (0..n_draws)
        .map(|_| {
            let x = sampler_q(&mut rng);
            log_p(&x) - log_q(&x)
        })
        .collect();
    tv_from_log_ratios(&ratios, self_normalize, DEFAULT_BOOTSTRAP, seed)
}

/// TV between two Gaussians with exact values or bounds where the covariance
/// structure allows and a Monte Carlo estimate otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTv {
    pub estimate: TvResult,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// `Some(c)` when `Σ_p = c Σ_q`.
fn proportional(p: &Covariance, q: &Covariance, dim: usize) -> Option<f64> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    match (p, q) {
        (Covariance::ScalarIdentity(a), Covariance::ScalarIdentity(b)) => Some(a / b),
        (Covariance::ScaledGramInverse { scale: a, gram: ga }, Covariance::ScaledGramInverse { scale: b, gram: gb }) => {
            if std::sync::Arc::ptr_eq(ga, gb) || ga.gram() == gb.gram() {
                Some(a / b)
            } else {
                None
            }
        }
        _ => {
            let (vp, vq) = (diagonal_of(p, dim)?, diagonal_of(q, dim)?);
            let c = vp[0] / vq[0];
            vp.iter().zip(vq.iter()).all(|(x, y)| close(x / y, c)).then_some(c)
        }
    }
}

fn diagonal_of(c: &Covariance, dim: usize) -> Option<DVector<f64>> {
    match c {
        Covariance::ScalarIdentity(s) => Some(DVector::from_element(dim, *s)),
        Covariance::Diagonal(v) => Some(v.clone()),
        _ => None,
    }
}

/// Exact per-block TVs for a diagonal pair: coordinates sharing a variance
/// ratio form a block with an exact shift-scale TV. The largest block TV is a
/// lower bound and the capped sum an upper bound for the full TV.
pub fn diagonal_block_bounds(shift: &DVector<f64>, ratios: &DVector<f64>) -> Result<(f64, f64)> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (mu, c) in shift.iter().zip(ratios.iter()) {
        match blocks
            .iter_mut()
            .find(|(bc, _, _)| (bc - c).abs() <= 1e-12 * bc.abs().max(c.abs()))
        {
            Some(b) => {
                b.1 += mu * mu;
                b.2 += 1;
            }
            None => blocks.push((*c, mu * mu, 1)),
        }
    }
    let mut lower = 0.0f64;
    let mut sum = 0.0;
    for (c, d2, size) in blocks {
        let tv = tv_gaussian_shift_scale(size, d2.sqrt(), c)?.value;
        lower = lower.max(tv);
        sum += tv;
    }
    Ok((lower, sum.min(1.0)))
}

/// `‖P − Q‖_TV` for Gaussians `p`, `q` of equal dimension.
///
/// Proportional covariances give an exact value. Diagonal pairs get exact
/// block bounds plus a Monte Carlo estimate. Anything else is estimated by
/// Monte Carlo with draws from `q`.
pub fn tv_between_gaussians(p: &GaussianDist, q: &GaussianDist, n_draws: usize, seed: u64) -> Result<GaussianTv> {
    if p.dim() != q.dim() {
        return Err(Error::InvalidDimension(format!("dimensions {} and {} differ", p.dim(), q.dim())));
    }
    let k = p.dim();
    if let Some(c) = proportional(p.cov(), q.cov(), k) {
        let delta = q.whiten(p.mean()).norm();
        let r = tv_gaussian_shift_scale(k, delta, c)?;
        return Ok(GaussianTv {
            lower: Some(r.value),
            upper: Some(r.value),
            estimate: r,
        });
    }
    if let (Some(vp), Some(vq)) = (diagonal_of(p.cov(), k), diagonal_of(q.cov(), k)) {
        let sd_q = vq.map(f64::sqrt);
        let mu = (p.mean() - q.mean()).component_div(&sd_q);
        let c = vp.component_div(&vq);
        let (lower, upper) = diagonal_block_bounds(&mu, &c)?;
        let estimate = tv_whitened_diagonal_mc(&mu, &c, n_draws, seed);
        return Ok(GaussianTv {
            estimate,
            lower: Some(lower),
            upper: Some(upper),
        });
    }
    let estimate = tv_monte_carlo(|x| p.log_density(x), |x| q.log_density(x), |rng| q.sample(rng), n_draws, seed, false);
    Ok(GaussianTv {
        estimate,
        lower: None,
        upper: None,
    })
}

/// Monte Carlo TV between `N(μ, diag(c))` and `N(0, I)` with draws from the latter.
pub fn tv_whitened_diagonal_mc(mu: &DVector<f64>, c: &DVector<f64>, n_draws: usize, seed: u64) -> TvResult {
    let k = mu.len();
    let half_log_det: f64 = 0.5 * c.iter().map(|v| v.ln()).sum::<f64>();
    let mut rng = stream(seed, &[purpose::TV]);
    let mut z = vec![0.0; k];
    let ratios: Vec<f64> = (0..n_draws)
        .map(|_| {
            crate::rng::fill_standard_normal(&mut rng, &mut z);
            let mut acc = -half_log_det;
            for j in 0..k {
                let r = z[j] - mu[j];
                acc += 0.5 * (z[j] * z[j] - r * r / c[j]);
            }
            acc
        })
        .collect();
    tv_from_log_ratios(&ratios, false, DEFAULT_BOOTSTRAP, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{build_bspline_design, uniform_points};
    use crate::rng::standard_normal;
    use crate::univariate::WeightedSample;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    /// TV between two univariate normals from the crossing points of their densities.
    fn tv_1d(m1: f64, s1: f64, m2: f64, s2: f64) -> f64 {
        let cdf = |x: f64, m: f64, s: f64| normal_cdf((x - m) / s);
        // ln p1 − ln p2 = A x² + B x + C
        let a = 0.5 / (s2 * s2) - 0.5 / (s1 * s1);
        let b = m1 / (s1 * s1) - m2 / (s2 * s2);
        let c = m2 * m2 / (2.0 * s2 * s2) - m1 * m1 / (2.0 * s1 * s1) + (s2 / s1).ln();
        let mass1 = |lo: f64, hi: f64| cdf(hi, m1, s1) - cdf(lo, m1, s1);
        let mass2 = |lo: f64, hi: f64| cdf(hi, m2, s2) - cdf(lo, m2, s2);
        if a.abs() < 1e-15 {
            if b.abs() < 1e-300 {
                return 0.0;
            }
            let x0 = -c / b;
            return if b > 0.0 {
                mass1(x0, f64::INFINITY) - mass2(x0, f64::INFINITY)
            } else {
                mass1(f64::NEG_INFINITY, x0) - mass2(f64::NEG_INFINITY, x0)
            };
        }
        let disc = b * b - 4.0 * a * c;
        if disc <= 0.0 {
            return 0.0;
        }
        let r1 = (-b - disc.sqrt()) / (2.0 * a);
        let r2 = (-b + disc.sqrt()) / (2.0 * a);
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        if a < 0.0 {
            // p1 dominates between the roots
            mass1(lo, hi) - mass2(lo, hi)
        } else {
            mass2(lo, hi) - mass1(lo, hi)
        }
    }

    #[test]
    fn shift_examples() {
        assert_eq!(tv_gaussian_shift(&[0.0, 0.0]).value, 0.0);
        let r = tv_gaussian_shift(&[2.0_f64.sqrt(), 2.0_f64.sqrt()]);
        assert_abs_diff_eq!(r.value, 0.682_689_492_137_085_9, epsilon = 1e-12);
        assert_abs_diff_eq!(r.bound.unwrap(), 2.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(tv_gaussian_shift(&[1.0]).value, tv_1d(0.0, 1.0, 1.0, 1.0), epsilon = 1e-14);
    }

    #[test]
    fn scale_examples() {
        assert_eq!(tv_gaussian_scale(5, 1.0).unwrap().value, 0.0);
        for &c in &[0.25, 0.5, 0.9, 2.0] {
            assert_abs_diff_eq!(tv_gaussian_scale(1, c).unwrap().value, tv_1d(0.0, c.sqrt(), 0.0, 1.0), epsilon = 1e-13);
        }
        assert_abs_diff_eq!(
            tv_gaussian_scale(7, 0.3).unwrap().value,
            tv_gaussian_scale(7, 1.0 / 0.3).unwrap().value,
            epsilon = 1e-15
        );
        assert!(tv_gaussian_scale(3, 0.0).is_err());
        assert!(tv_gaussian_scale(3, -1.0).is_err());
    }

    #[test]
    fn scale_trend_along_prior_family() {
        // c = τ²/(σ² + τ²) with τ/σ = n^{1/8}
        let vals: Vec<f64> = [64.0f64, 256.0, 1024.0]
            .iter()
            .map(|n| {
                let r2 = n.powf(0.25);
                tv_gaussian_scale(16, r2 / (1.0 + r2)).unwrap().value
            })
            .collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
    }

    #[test]
    fn scale_matches_monte_carlo_oracle() {
        let (k, c) = (1usize, 0.25);
        let exact = tv_gaussian_scale(k, c).unwrap().value;
        let mut rng = stream(7, &[99]);
        let m = 1_000_000;
        // draws from N(0, 1); TV = E[(1 − p/q)_+] with p = N(0, c)
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..m {
            let x = standard_normal(&mut rng);
            let lr = -0.5 * x * x / c - 0.5 * c.ln() + 0.5 * x * x;
            let v = (1.0 - lr.exp()).max(0.0);
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / m as f64;
        let se = ((acc2 / m as f64 - mean * mean) / m as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    }

    #[test]
    fn shift_scale_matches_one_dimensional_crossing_oracle() {
        for &(d, c) in &[(0.5, 0.3), (2.0, 0.8), (1.0, 1.7), (3.0, 0.05), (0.01, 0.99), (1.0, 1.0 + 1e-6)] {
            let r = tv_gaussian_shift_scale(1, d, c).unwrap();
            assert_abs_diff_eq!(r.value, tv_1d(d, c.sqrt(), 0.0, 1.0), epsilon = 1e-11);
        }
    }

    #[test]
    fn shift_scale_reduces_to_components() {
        assert_abs_diff_eq!(
            tv_gaussian_shift_scale(4, 0.0, 0.6).unwrap().value,
            tv_gaussian_scale(4, 0.6).unwrap().value,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            tv_gaussian_shift_scale(4, 1.3, 1.0).unwrap().value,
            tv_gaussian_shift_norm(1.3).value,
            epsilon = 1e-15
        );
        // continuity across the unit-ratio switch
        let near = tv_gaussian_shift_scale(6, 1.3, 1.0 - 1e-7).unwrap().value;
        assert_abs_diff_eq!(near, tv_gaussian_shift_norm(1.3).value, epsilon = 1e-6);
    }

    #[test]
    fn quadrature_route_matches_mixture_route() {
        for &k in &[1usize, 2, 5, 16] {
            for &(d, c) in &[(0.3, 0.5), (1.5, 0.9), (0.8, 0.97), (2.0, 0.6)] {
                let mix = shift_scale_by_mixture(k, d, c);
                let quad = shift_scale_by_quadrature(k, d, c);
                assert_abs_diff_eq!(mix, quad, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn shift_scale_matches_monte_carlo_in_higher_dimension() {
        let k = 6;
        let mu = DVector::from_vec(vec![0.4, -0.3, 0.2, 0.0, 0.5, 0.1]);
        let c = 0.7;
        let exact = tv_gaussian_shift_scale(k, mu.norm(), c).unwrap().value;
        let est = tv_whitened_diagonal_mc(&mu, &DVector::from_element(k, c), 200_000, 3);
        assert!((est.value - exact).abs() < 3.0 * est.se.unwrap(), "{} vs {exact}", est.value);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(tv_truncation(4, f64::INFINITY, 0.0).unwrap().value, 0.0);
        let r = tv_truncation(4, 16.0, 0.0).unwrap();
        // 1 − F_4(16) = 9 e^{−8}
        assert_abs_diff_eq!(r.value, 9.0 * (-8.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(r.value, 0.003019, epsilon = 1e-6);
        let r = tv_truncation(4, 64.0, 0.0).unwrap();
        assert_abs_diff_eq!(r.bound.unwrap(), 2.0 * (-2.0f64).exp(), epsilon = 1e-15);
        assert!(r.value <= r.bound.unwrap());
        assert!(tv_truncation(4, 10.0, 0.0).unwrap().bound.is_none());
    }

    #[test]
    fn cirelson_examples() {
        let t = cirelson_tail(5, 0.0).unwrap();
        assert_abs_diff_eq!(t.exact, chi2_sf(5.0, 5.0), epsilon = 1e-15);
        assert!(t.holds());
        let t = cirelson_tail(10, 3.0).unwrap();
        assert_abs_diff_eq!(t.bound, 0.049_787_068_367_863_944, epsilon = 1e-15);
        let r = (10f64.sqrt() + 6f64.sqrt()).powi(2);
        assert_abs_diff_eq!(t.exact, chi2_sf(r, 10.0), epsilon = 1e-15);
        assert!(t.holds());
        let t = cirelson_tail(1, 8.0).unwrap();
        // one degree of freedom: P(|U| > 1 + 4) = 2Φ(−5)
        assert_abs_diff_eq!(t.exact, 2.0 * normal_cdf(-5.0), epsilon = 1e-18);
        assert!(t.holds());
    }

    #[test]
    fn interval_sup_examples() {
        let n01 = Dist1d::standard_normal();
        assert!(interval_sup_distance(&n01, &n01) < 1e-15);
        for &mu in &[0.1, 1.0, 2.5] {
            let q = Dist1d::Gaussian { mean: mu, sd: 1.0 };
            let exact = 2.0 * normal_cdf(mu / 2.0) - 1.0;
            assert_abs_diff_eq!(interval_sup_distance(&n01, &q), exact, epsilon = 1e-12);
            assert_abs_diff_eq!(interval_sup_distance(&n01, &q), tv_gaussian_shift(&[mu]).value, epsilon = 1e-12);
        }
        // a point mass against a continuous law sits at distance 1
        assert_abs_diff_eq!(interval_sup_distance(&Dist1d::PointMass(0.3), &n01), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn interval_sup_of_sample_is_kolmogorov_like() {
        let mut rng = stream(5, &[1]);
        let draws: Vec<f64> = (0..20_000).map(|_| standard_normal(&mut rng)).collect();
        let s = Dist1d::Weighted(WeightedSample::unweighted(&draws).unwrap());
        let d = interval_sup_distance(&s, &Dist1d::standard_normal());
        // at most twice the Kolmogorov distance, which is O(n^{-1/2})
        assert!(d < 0.03, "{d}");
        assert!(d > 0.0);
    }

    #[test]
    fn monte_carlo_examples() {
        let g0 = GaussianDist::new(DVector::zeros(1), Covariance::ScalarIdentity(1.0)).unwrap();
        let g1 = GaussianDist::new(DVector::from_element(1, 1.0), Covariance::ScalarIdentity(1.0)).unwrap();
        let same = tv_monte_carlo(|x| g0.log_density(x), |x| g0.log_density(x), |r| g0.sample(r), 5000, 1, false);
        assert_eq!(same.value, 0.0);
        let est = tv_monte_carlo(|x| g1.log_density(x), |x| g0.log_density(x), |r| g0.sample(r), 100_000, 2, false);
        let exact = 2.0 * normal_cdf(0.5) - 1.0;
        assert_abs_diff_eq!(exact, 0.3829, epsilon = 1e-4);
        assert!((est.value - exact).abs() < 3.0 * est.se.unwrap());

        let k = 8;
        let a = GaussianDist::new(DVector::zeros(k), Covariance::ScalarIdentity(0.5)).unwrap();
        let b = GaussianDist::new(DVector::zeros(k), Covariance::ScalarIdentity(1.0)).unwrap();
        let est = tv_monte_carlo(|x| a.log_density(x), |x| b.log_density(x), |r| b.sample(r), 100_000, 3, false);
        let exact = tv_gaussian_scale(k, 0.5).unwrap().value;
        assert!((est.value - exact).abs() < 3.0 * est.se.unwrap(), "{} vs {exact}", est.value);
    }

    #[test]
    fn self_normalization_ignores_constants() {
        let g0 = GaussianDist::new(DVector::zeros(2), Covariance::ScalarIdentity(1.0)).unwrap();
        let g1 = GaussianDist::new(DVector::from_vec(vec![0.5, 0.0]), Covariance::ScalarIdentity(1.0)).unwrap();
        let plain = tv_monte_carlo(|x| g1.log_density(x), |x| g0.log_density(x), |r| g0.sample(r), 50_000, 4, false);
        let shifted = tv_monte_carlo(|x| g1.log_density(x) + 17.0, |x| g0.log_density(x), |r| g0.sample(r), 50_000, 4, true);
        assert!((plain.value - shifted.value).abs() < 3.0 * plain.se.unwrap());
    }

    #[test]
    fn gram_inverse_pair_is_exact_and_satisfies_triangle_decomposition() {
        let d = build_bspline_design(&uniform_points(80), 6, 3).unwrap();
        let mut rng = stream(9, &[0]);
        for _ in 0..50 {
            let theta_y = DVector::from_fn(6, |_, _| 0.3 * standard_normal(&mut rng));
            let sigma2 = 0.2;
            let c = 0.3 + 0.65 * rand::Rng::random::<f64>(&mut rng);
            let target = GaussianDist::new(
                theta_y.clone(),
                Covariance::ScaledGramInverse {
                    scale: sigma2,
                    gram: d.gram_factor().clone(),
                },
            )
            .unwrap();
            let post = GaussianDist::new(
                &theta_y * c,
                Covariance::ScaledGramInverse {
                    scale: c * sigma2,
                    gram: d.gram_factor().clone(),
                },
            )
            .unwrap();
            let tv = tv_between_gaussians(&post, &target, 0, 0).unwrap().estimate;
            assert_eq!(tv.method, TvMethod::ExactShiftScale);
            let scale = tv_gaussian_scale(6, c).unwrap().value;
            let shift_vec = target.whiten(&(&theta_y * c));
            let shift = tv_gaussian_shift_norm(shift_vec.norm()).value;
            assert!(tv.value <= scale + shift + 1e-12);
            // the exact value agrees with Monte Carlo ground truth
            let mc = tv_monte_carlo(|x| post.log_density(x), |x| target.log_density(x), |r| target.sample(r), 4000, 1, false);
            assert!((mc.value - tv.value).abs() < 4.0 * mc.se.unwrap() + 1e-3);
        }
    }

    #[test]
    fn diagonal_pair_bounds_bracket_estimate() {
        let mu = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.1, 0.2, -0.1]);
        let c = DVector::from_vec(vec![0.99, 0.99, 0.99, 0.8, 0.8, 0.8]);
        let p = GaussianDist::new(mu.clone(), Covariance::Diagonal(c.clone())).unwrap();
        let q = GaussianDist::new(DVector::zeros(6), Covariance::ScalarIdentity(1.0)).unwrap();
        let r = tv_between_gaussians(&p, &q, 100_000, 8).unwrap();
        let (lo, hi) = (r.lower.unwrap(), r.upper.unwrap());
        let se = r.estimate.se.unwrap();
        assert!(lo <= r.estimate.value + 3.0 * se && r.estimate.value <= hi + 3.0 * se);
        let block = tv_gaussian_shift_scale(3, (0.01f64 + 0.04 + 0.01).sqrt(), 0.8).unwrap().value;
        assert_abs_diff_eq!(lo, block.max(tv_gaussian_shift_scale(3, (0.01f64 + 0.04 + 0.09).sqrt(), 0.99).unwrap().value));
    }

    #[test]
    fn full_covariance_routes_to_monte_carlo() {
        let cov = DMatrix::from_vec(2, 2, vec![1.0, 0.5, 0.5, 1.0]);
        let p = GaussianDist::new(DVector::zeros(2), Covariance::full(cov).unwrap()).unwrap();
        let q = GaussianDist::new(DVector::zeros(2), Covariance::ScalarIdentity(1.0)).unwrap();
        let r = tv_between_gaussians(&p, &q, 2000, 1).unwrap();
        assert_eq!(r.estimate.method, TvMethod::MonteCarlo);
    }

    proptest! {
        #[test]
        fn shift_respects_bound_and_rotation(z in proptest::collection::vec(-3.0f64..3.0, 1..12), angle in 0.0f64..6.3) {
            let r = tv_gaussian_shift(&z);
            prop_assert!(r.value <= r.bound.unwrap() + 1e-12);
            if z.len() >= 2 {
                let mut w = z.clone();
                let (a, b) = (z[0], z[1]);
                w[0] = angle.cos() * a - angle.sin() * b;
                w[1] = angle.sin() * a + angle.cos() * b;
                prop_assert!((tv_gaussian_shift(&w).value - r.value).abs() < 1e-12);
            }
        }

        #[test]
        fn exact_methods_are_symmetric(k in 1usize..20, d in 0.0f64..3.0, c in 0.05f64..0.95) {
            // ‖N(a, cI) − N(0, I)‖ = ‖N(0, I) − N(a, cI)‖ = ‖N(−a/√c, I/c) − N(0, I)‖
            let ab = tv_gaussian_shift_scale(k, d, c).unwrap().value;
            let ba = tv_gaussian_shift_scale(k, d / c.sqrt(), 1.0 / c).unwrap().value;
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn shift_scale_is_at_least_scale(k in 1usize..20, d in 0.0f64..3.0, c in 0.05f64..0.95) {
            // the shifted pair is farther apart than the centred pair
            let with = tv_gaussian_shift_scale(k, d, c).unwrap().value;
            let without = tv_gaussian_scale(k, c).unwrap().value;
            prop_assert!(with >= without - 1e-12);
        }

        #[test]
        fn truncation_bound_never_violated(k in 1usize..30, ratio in 4.0f64..40.0) {
            let m = ratio * k as f64;
            let r = tv_truncation(k, m, 0.0).unwrap();
            prop_assert!(r.value <= r.bound.unwrap());
        }
    }
}
