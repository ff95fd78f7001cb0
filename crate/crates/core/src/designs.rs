//! Regressor families, Gram factorizations and least-squares projection.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Minimum Cholesky pivot, relative to the largest Gram diagonal entry.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignFamily {
    Identity,
    Fourier,
    BSpline { order: usize },
    Custom,
}

impl DesignFamily {
    pub fn name(&self) -> &'static str {
        match self {
            DesignFamily::Identity => "identity",
            DesignFamily::Fourier => "fourier",
            DesignFamily::BSpline { .. } => "bspline",
            DesignFamily::Custom => "custom",
        }
    }
}

/// Gram matrix `ΦᵀΦ` together with its lower Cholesky factor `L` (`ΦᵀΦ = L Lᵀ`).
#[derive(Debug, Clone)]
pub struct GramFactor {
    gram: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
    scalar: Option<f64>,
}

impl GramFactor {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let k = gram.nrows();
        if k == 0 || gram.ncols() != k {
            return Err(Error::InvalidDimension(format!(
                "Gram matrix must be square and nonempty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        let max_diag = gram.diagonal().iter().cloned().fold(0.0f64, f64::max);
        let threshold = PIVOT_TOLERANCE * max_diag;
        let chol = match Cholesky::new(gram.clone()) {
            Some(c) => c.l(),
            None => {
                return Err(Error::RankDeficient {
                    column: first_small_pivot(&gram, threshold),
                    empty_span: None,
                })
            }
        };
        for i in 0..k {
            let pivot = chol[(i, i)] * chol[(i, i)];
            if !(pivot > threshold) {
                return Err(Error::RankDeficient {
                    column: i,
                    empty_span: None,
                });
            }
        }
        let log_det = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let scalar = scalar_multiple_of_identity(&gram);
        Ok(Self {
            gram,
            chol,
            log_det,
            scalar,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Lower Cholesky factor `L` with `ΦᵀΦ = L Lᵀ`.
    pub fn cholesky_l(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `ln det(ΦᵀΦ)`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `Some(s)` when the Gram matrix equals `s·I` to 1e-9 relative accuracy.
    pub fn scalar(&self) -> Option<f64> {
        self.scalar
    }

    pub fn is_diagonal(&self) -> bool {
        let k = self.dim();
        let scale = self.gram.diagonal().amax();
        (0..k).all(|i| (0..k).all(|j| i == j || self.gram[(i, j)].abs() <= 1e-9 * scale))
    }

    /// `(ΦᵀΦ)⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let z = self.solve_l(v);
        self.solve_lt(&z)
    }

    /// `L⁻¹ v`.
    pub fn solve_l(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `L⁻ᵀ v`; maps standard normal vectors to `N(0, (ΦᵀΦ)⁻¹)`.
    pub fn solve_lt(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol
            .tr_solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `Lᵀ v`; whitens `N(·, (ΦᵀΦ)⁻¹)` vectors.
    pub fn mul_lt(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.tr_mul(v)
    }

    /// `vᵀ (ΦᵀΦ) v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        self.mul_lt(v).norm_squared()
    }

    /// `vᵀ (ΦᵀΦ)⁻¹ v`.
    pub fn inverse_quad_form(&self, v: &DVector<f64>) -> f64 {
        self.solve_l(v).norm_squared()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let k = self.dim();
        let mut inv = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut e = DVector::zeros(k);
            e[j] = 1.0;
            inv.set_column(j, &self.solve(&e));
        }
        inv
    }

    /// Eigenvalues of the Gram matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.gram.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

fn first_small_pivot(gram: &DMatrix<f64>, threshold: f64) -> usize {
    // unpivoted LDLᵀ to locate the first column that is (numerically) in the span of its predecessors
    let k = gram.nrows();
    let mut l = DMatrix::<f64>::zeros(k, k);
    let mut d = vec![0.0; k];
    for j in 0..k {
        let mut dj = gram[(j, j)];
        for m in 0..j {
            dj -= l[(j, m)] * l[(j, m)] * d[m];
        }
        if !(dj > threshold) {
            return j;
        }
        d[j] = dj;
        l[(j, j)] = 1.0;
        for i in j + 1..k {
            let mut v = gram[(i, j)];
            for m in 0..j {
                v -= l[(i, m)] * l[(j, m)] * d[m];
            }
            l[(i, j)] = v / dj;
        }
    }
    k.saturating_sub(1)
}

fn scalar_multiple_of_identity(g: &DMatrix<f64>) -> Option<f64> {
    let k = g.nrows();
    let s = g[(0, 0)];
    if s <= 0.0 {
        return None;
    }
    let tol = 1e-9 * s;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { s } else { 0.0 };
            if (g[(i, j)] - target).abs() > tol {
                return None;
            }
        }
    }
    Some(s)
}

/// An `n × k` regressor matrix of full column rank.
///
/// Immutable after construction; the Gram factor is shared behind an `Arc`
/// so posteriors can refer to it without copying.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    family: DesignFamily,
    columns: DMatrix<f64>,
    points: Option<Vec<f64>>,
    gram: Arc<GramFactor>,
}

impl DesignMatrix {
    /// Wraps an arbitrary full-rank matrix (family `custom`).
    pub fn from_matrix(columns: DMatrix<f64>, points: Option<Vec<f64>>) -> Result<Self> {
        Self::assemble(DesignFamily::Custom, columns, points)
    }

    fn assemble(family: DesignFamily, columns: DMatrix<f64>, points: Option<Vec<f64>>) -> Result<Self> {
        let (n, k) = columns.shape();
        if k == 0 || k > n {
            return Err(Error::InvalidDimension(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("design matrix has non-finite entries".into()));
        }
        let gram = columns.tr_mul(&columns);
        let factor = GramFactor::new(gram)?;
        Ok(Self {
            family,
            columns,
            points,
            gram: Arc::new(factor),
        })
    }

    pub fn n(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    pub fn family(&self) -> DesignFamily {
        self.family
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Design points `x_i` for function-valued families.
    pub fn points(&self) -> Option<&[f64]> {
        self.points.as_deref()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        self.gram.gram()
    }

    pub fn gram_factor(&self) -> &Arc<GramFactor> {
        &self.gram
    }

    /// `Φ θ`.
    pub fn apply(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.columns * theta
    }

    /// `Φᵀ v`.
    pub fn apply_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        self.columns.tr_mul(v)
    }

    /// `(ΦᵀΦ)⁻¹ Φᵀ v`, the coefficient vector of the projection of `v`.
    pub fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        self.gram.solve(&self.apply_transpose(v))
    }

    /// `Σ_Φ v = Φ (ΦᵀΦ)⁻¹ Φᵀ v`, applied as two triangular solves.
    pub fn apply_projection(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply(&self.coefficients(v))
    }

    /// Dense `n × n` projection matrix. Only intended for small `n`.
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        let mut whitened = self.columns.clone();
        // Φ L⁻ᵀ has orthonormal columns, so Σ_Φ = (Φ L⁻ᵀ)(Φ L⁻ᵀ)ᵀ
        let l = self.gram.cholesky_l();
        let lt = l.transpose();
        for i in 0..whitened.nrows() {
            let row = self.columns.row(i).transpose();
            let solved = lt
                .tr_solve_upper_triangular(&row)
                .expect("positive diagonal");
            whitened.set_row(i, &solved.transpose());
        }
        &whitened * whitened.transpose()
    }
}

/// First `k` columns of the `n × n` identity (Gaussian sequence model).
pub fn build_identity_design(n: usize, k: usize) -> Result<DesignMatrix> {
    if k == 0 || k > n {
        return Err(Error::InvalidDimension(format!("identity design needs 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let mut columns = DMatrix::zeros(n, k);
    for j in 0..k {
        columns[(j, j)] = 1.0;
    }
    DesignMatrix::assemble(DesignFamily::Identity, columns, None)
}

/// Fourier basis function `φ_j` (1-based `j`) at `x`.
pub fn fourier_basis(j: usize, x: f64) -> f64 {
    assert!(j >= 1, "Fourier basis index is 1-based");
    if j == 1 {
        return 1.0;
    }
    let m = (j / 2) as f64;
    if j.is_multiple_of(2) {
        SQRT_2 * (2.0 * PI * m * x).cos()
    } else {
        SQRT_2 * (2.0 * PI * m * x).sin()
    }
}

/// `φ_j(i/n)` with the angle reduced modulo one period, which keeps the
/// Gram identity accurate for large `n`.
fn fourier_at_grid(j: usize, i: usize, n: usize) -> f64 {
    if j == 1 {
        return 1.0;
    }
    let m = j / 2;
    let r = ((m as u128 * i as u128) % n as u128) as f64;
    let angle = 2.0 * PI * r / n as f64;
    if j.is_multiple_of(2) {
        SQRT_2 * angle.cos()
    } else {
        SQRT_2 * angle.sin()
    }
}

/// Trigonometric regressors at the regular design `x_i = i/n`.
pub fn build_fourier_design(n: usize, k: usize) -> Result<DesignMatrix> {
    if k == 0 {
        return Err(Error::InvalidDimension("Fourier design needs k >= 1".into()));
    }
    if n % 2 == 1 && k > n {
        return Err(Error::Precondition(format!("Fourier design with odd n = {n} needs k <= n, got k = {k}")));
    }
    if n.is_multiple_of(2) && k > n - 1 {
        return Err(Error::Precondition(format!(
            "Fourier design with even n = {n} needs k <= n - 1, got k = {k}"
        )));
    }
    let mut columns = DMatrix::zeros(n, k);
    for j in 1..=k {
        for i in 1..=n {
            columns[(i - 1, j - 1)] = fourier_at_grid(j, i, n);
        }
    }
    let points = (1..=n).map(|i| i as f64 / n as f64).collect();
    DesignMatrix::assemble(DesignFamily::Fourier, columns, Some(points))
}

/// Clamped uniform knot vector for `k` B-splines of order `order` on `[0, 1]`.
pub fn clamped_uniform_knots(k: usize, order: usize) -> Vec<f64> {
    let spans = k + 1 - order;
    let mut knots = Vec::with_capacity(k + order);
    knots.extend(std::iter::repeat_n(0.0, order));
    for j in 1..spans {
        knots.push(j as f64 / spans as f64);
    }
    knots.extend(std::iter::repeat_n(1.0, order));
    knots
}

/// Values of all `k` B-splines of order `order` (degree `order - 1`) at `x`,
/// by the Cox–de Boor triangle over the nonzero functions of the active span.
/// Spans are closed on the left, and `x = 1` belongs to the last span.
pub fn bspline_basis(k: usize, order: usize, x: f64) -> Vec<f64> {
    let knots = clamped_uniform_knots(k, order);
    let spans = k + 1 - order;
    let degree = order - 1;
    let x = x.clamp(0.0, 1.0);
    let cell = ((x * spans as f64).floor() as usize).min(spans - 1);
    let span = cell + degree;

    let mut values = vec![0.0; order];
    let mut left = vec![0.0; order];
    let mut right = vec![0.0; order];
    values[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { values[r] / denom };
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    let mut out = vec![0.0; k];
    for (r, v) in values.into_iter().enumerate() {
        out[span - degree + r] = v;
    }
    out
}

/// B-spline regressors of order `order` on the uniform partition of `(0, 1]`
/// into `k + 1 - order` cells, evaluated at `points`.
pub fn build_bspline_design(points: &[f64], k: usize, order: usize) -> Result<DesignMatrix> {
    if order == 0 || k < order {
        return Err(Error::InvalidDimension(format!("B-spline design needs k >= order >= 1, got k = {k}, order = {order}")));
    }
    if points.len() < k {
        return Err(Error::InvalidDimension(format!("need at least k = {k} design points, got {}", points.len())));
    }
    if points.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
        return Err(Error::Input("design points must lie in [0, 1]".into()));
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Input("design points must be sorted".into()));
    }
    let n = points.len();
    let mut columns = DMatrix::zeros(n, k);
    for (i, &x) in points.iter().enumerate() {
        for (j, v) in bspline_basis(k, order, x).into_iter().enumerate() {
            columns[(i, j)] = v;
        }
    }
    match DesignMatrix::assemble(DesignFamily::BSpline { order }, columns, Some(points.to_vec())) {
        Err(Error::RankDeficient { column, .. }) => Err(Error::RankDeficient {
            column,
            empty_span: first_empty_cell(points, k + 1 - order),
        }),
        other => other,
    }
}

fn first_empty_cell(points: &[f64], cells: usize) -> Option<(f64, f64)> {
    let mut counts = vec![0usize; cells];
    for &x in points {
        // cells are ((j-1)/K, j/K]; x = 0 joins the first
        let c = ((x * cells as f64).ceil() as usize).clamp(1, cells) - 1;
        counts[c] += 1;
    }
    counts
        .iter()
        .position(|&c| c == 0)
        .map(|j| (j as f64 / cells as f64, (j + 1) as f64 / cells as f64))
}

/// Regular design points `i/n`, `i = 1..n`.
pub fn uniform_points(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

#[derive(Debug, Clone)]
pub struct ProjectionOutput {
    pub theta_hat: DVector<f64>,
    pub f_proj: DVector<f64>,
}

/// Least-squares coefficients `θ_Y` and the fitted vector `Φ θ_Y`.
pub fn project(design: &DesignMatrix, y: &DVector<f64>) -> Result<ProjectionOutput> {
    if y.len() != design.n() {
        return Err(Error::InvalidDimension(format!("observation has length {}, design has n = {}", y.len(), design.n())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("observation vector has non-finite entries".into()));
    }
    let theta_hat = design.coefficients(y);
    let f_proj = design.apply(&theta_hat);
    Ok(ProjectionOutput { theta_hat, f_proj })
}

/// Smallest and largest eigenvalues of `(k/n) ΦᵀΦ`.
pub fn design_regularity_ratio(design: &DesignMatrix) -> (f64, f64) {
    let scale = design.k() as f64 / design.n() as f64;
    let ev = design.gram_factor().eigenvalues();
    (scale * ev[0], scale * ev[ev.len() - 1])
}
