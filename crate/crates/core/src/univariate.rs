//! One-dimensional distribution handles: CDFs, quantiles and affine maps.

use crate::error::{Error, Result};
use crate::special::{noncentral_chi2_cdf, normal_cdf, normal_quantile, normal_sf};

/// Discrete law on finitely many points with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    points: Vec<f64>,
    cum: Vec<f64>,
    ess: f64,
}

impl WeightedSample {
    pub fn new(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("weighted sample is empty".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::InvalidDimension(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Input("sample values must be finite and weights nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Input("sample weights sum to zero".into()));
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let mut points = Vec::with_capacity(values.len());
        let mut cum = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        let mut sq = 0.0;
        for &i in &order {
            let w = weights[i] / total;
            acc += w;
            sq += w * w;
            points.push(values[i]);
            cum.push(acc);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Ok(Self {
            points,
            cum,
            ess: 1.0 / sq,
        })
    }

    pub fn unweighted(values: &[f64]) -> Result<Self> {
        Self::new(values, &vec![1.0; values.len()])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sorted support points.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Kish effective sample size `(Σw)² / Σw²`.
    pub fn ess(&self) -> f64 {
        self.ess
    }

    fn weight(&self, i: usize) -> f64 {
        if i == 0 {
            self.cum[0]
        } else {
            self.cum[i] - self.cum[i - 1]
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|&p| p <= x);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    pub fn cdf_left(&self, x: f64) -> f64 {
        let idx = self.points.partition_point(|&p| p < x);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let idx = self.cum.partition_point(|&c| c < p - 1e-15);
        self.points[idx.min(self.points.len() - 1)]
    }

    pub fn mean(&self) -> f64 {
        (0..self.len()).map(|i| self.weight(i) * self.points[i]).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (0..self.len()).map(|i| self.weight(i) * (self.points[i] - m).powi(2)).sum()
    }

    fn affine(&self, loc: f64, scale: f64) -> Self {
        Self {
            points: self.points.iter().map(|x| (x - loc) / scale).collect(),
            cum: self.cum.clone(),
            ess: self.ess,
        }
    }
}

/// A law on ℝ.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist1d {
    Gaussian { mean: f64, sd: f64 },
    /// `shift + scale · χ²_df(nc)` with `scale > 0`.
    ScaledNoncentralChi2 { df: f64, nc: f64, scale: f64, shift: f64 },
    Weighted(WeightedSample),
    PointMass(f64),
}

impl Dist1d {
    pub fn standard_normal() -> Self {
        Dist1d::Gaussian { mean: 0.0, sd: 1.0 }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Dist1d::Gaussian { .. } | Dist1d::ScaledNoncentralChi2 { .. })
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Dist1d::Gaussian { mean, sd } => normal_cdf((x - mean) / sd),
            Dist1d::ScaledNoncentralChi2 { df, nc, scale, shift } => {
                let u = (x - shift) / scale;
                if u <= 0.0 {
                    0.0
                } else {
                    noncentral_chi2_cdf(u, *df, *nc)
                }
            }
            Dist1d::Weighted(s) => s.cdf(x),
            Dist1d::PointMass(p) => {
                if x >= *p {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Dist1d::Weighted(s) => s.cdf_left(x),
            Dist1d::PointMass(p) => {
                if x > *p {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.cdf(x),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Dist1d::Gaussian { mean, .. } => *mean,
            Dist1d::ScaledNoncentralChi2 { df, nc, scale, shift } => shift + scale * (df + nc),
            Dist1d::Weighted(s) => s.mean(),
            Dist1d::PointMass(p) => *p,
        }
    }

    pub fn sd(&self) -> f64 {
        match self {
            Dist1d::Gaussian { sd, .. } => *sd,
            Dist1d::ScaledNoncentralChi2 { df, nc, scale, .. } => scale * (2.0 * (df + 2.0 * nc)).sqrt(),
            Dist1d::Weighted(s) => s.variance().sqrt(),
            Dist1d::PointMass(_) => 0.0,
        }
    }

    /// Smallest `x` with `P(X ≤ x) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            Dist1d::Gaussian { mean, sd } => mean + sd * normal_quantile(p),
            Dist1d::Weighted(s) => s.quantile(p),
            Dist1d::PointMass(x) => *x,
            Dist1d::ScaledNoncentralChi2 { shift, .. } => {
                if p <= 0.0 {
                    return *shift;
                }
                if p >= 1.0 {
                    return f64::INFINITY;
                }
                let (m, s) = (self.mean(), self.sd());
                let mut lo = *shift;
                let mut hi = m + 10.0 * s;
                while self.cdf(hi) < p {
                    hi += 10.0 * s;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-14 * hi.abs().max(1e-300) {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Law of `(X − loc) / scale`.
    pub fn standardize(&self, loc: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::DegenerateScale(format!("standardizing scale must be positive, got {scale}")));
        }
        Ok(match self {
            Dist1d::Gaussian { mean, sd } => Dist1d::Gaussian {
                mean: (mean - loc) / scale,
                sd: sd / scale,
            },
            Dist1d::ScaledNoncentralChi2 { df, nc, scale: a, shift } => Dist1d::ScaledNoncentralChi2 {
                df: *df,
                nc: *nc,
                scale: a / scale,
                shift: (shift - loc) / scale,
            },
            Dist1d::Weighted(s) => Dist1d::Weighted(s.affine(loc, scale)),
            Dist1d::PointMass(p) => Dist1d::PointMass((p - loc) / scale),
        })
    }

    /// Effective number of draws behind a sample-based handle.
    pub fn effective_draws(&self) -> Option<f64> {
        match self {
            Dist1d::Weighted(s) => Some(s.ess()),
            _ => None,
        }
    }

    /// Points where `D = F_P − F_Q` is worth evaluating.
    pub(crate) fn grid(&self, size: usize) -> Vec<f64> {
        match self {
            Dist1d::Gaussian { mean, sd } => (0..size)
                .map(|i| mean + sd * normal_quantile((i as f64 + 0.5) / size as f64))
                .collect(),
            Dist1d::ScaledNoncentralChi2 { shift, .. } => {
                let (m, s) = (self.mean(), self.sd());
                let lo = (m - 10.0 * s).max(*shift);
                let hi = m + 10.0 * s;
                (0..size)
                    .map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64)
                    .collect()
            }
            Dist1d::Weighted(s) => s.points().to_vec(),
            Dist1d::PointMass(p) => vec![*p],
        }
    }

    /// Upper tail `P(X > x)`, accurate deep in the tail for Gaussians.
    pub fn sf(&self, x: f64) -> f64 {
        match self {
            Dist1d::Gaussian { mean, sd } => normal_sf((x - mean) / sd),
            _ => 1.0 - self.cdf(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn weighted_cdf_and_quantile() {
        let s = WeightedSample::new(&[3.0, 1.0, 2.0], &[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.points(), &[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(s.cdf(1.0), 0.5);
        assert_abs_diff_eq!(s.cdf_left(1.0), 0.0);
        assert_abs_diff_eq!(s.cdf(2.5), 0.75);
        assert_eq!(s.quantile(0.5), 1.0);
        assert_eq!(s.quantile(0.51), 2.0);
        assert_eq!(s.quantile(1.0), 3.0);
        assert_abs_diff_eq!(s.mean(), (3.0 + 2.0 + 2.0) / 4.0);
        assert_abs_diff_eq!(s.ess(), 16.0 / 6.0, epsilon = 1e-12);
        assert!(WeightedSample::new(&[], &[]).is_err());
        assert!(WeightedSample::new(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn chi2_handle_moments_and_quantile() {
        let d = Dist1d::ScaledNoncentralChi2 {
            df: 4.0,
            nc: 3.0,
            scale: 2.0,
            shift: -1.0,
        };
        assert_abs_diff_eq!(d.mean(), -1.0 + 2.0 * 7.0);
        for &p in &[0.01, 0.3, 0.5, 0.9, 0.999] {
            let q = d.quantile(p);
            assert_abs_diff_eq!(d.cdf(q), p, epsilon = 1e-10);
        }
        assert_eq!(d.cdf(-1.0), 0.0);
    }

    #[test]
    fn standardize_rejects_zero_scale() {
        assert!(matches!(
            Dist1d::standard_normal().standardize(0.0, 0.0),
            Err(Error::DegenerateScale(_))
        ));
    }

    proptest! {
        #[test]
        fn standardize_transforms_cdf(loc in -5.0f64..5.0, scale in 0.1f64..10.0, x in -4.0f64..4.0, which in 0u8..3) {
            let d = match which {
                0 => Dist1d::Gaussian { mean: 1.0, sd: 2.0 },
                1 => Dist1d::ScaledNoncentralChi2 { df: 3.0, nc: 2.0, scale: 0.5, shift: -2.0 },
                _ => Dist1d::Weighted(WeightedSample::new(&[-1.0, 0.0, 0.5, 3.0], &[0.1, 0.2, 0.3, 0.4]).unwrap()),
            };
            let s = d.standardize(loc, scale).unwrap();
            prop_assert!((s.cdf(x) - d.cdf(loc + scale * x)).abs() < 1e-12);
        }
    }
}
