//! Compositional transforms, the check loss, and the linear programs for the
//! zero-sum log-contrast quantile model.
//!
//! Variables of every program built here are laid out as
//! `γ = (β⁺, β⁻, u, v)` with `β = β⁺ − β⁻` and `Yc − Zβ = u − v`.
//! The first constraint row carries `Σβ = 0` when the design is zero-sum.
//! Designs with an intercept append a free pair `(c⁺, c⁻)`, so the residual
//! rows read `Zβ + u − v + c⁺ − c⁻ = Yc`. Centering removes the mean of the
//! response, not its τ-quantile, so the pair is on by default.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, solve_lp_costs, LpProblem, LpSolution};

const SIMPLEX_TOL: f64 = 1e-8;

/// Responses paired with covariate rows on the open simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionalDataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl CompositionalDataset {
    /// Wrap already-closed covariates.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        check_positive(&x)?;
        for (i, row) in x.row_iter().enumerate() {
            let sum = row.sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::NotOnSimplex { row: i, sum });
            }
        }
        Ok(Self { x, y })
    }

    /// Close raw positive covariates onto the simplex.
    pub fn from_raw(raw: &DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        Self::new(closure(raw)?, y)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

pub(crate) fn check_positive(x: &DMatrix<f64>) -> Result<()> {
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let v = x[(i, j)];
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::NonPositiveEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    Ok(())
}

/// Divide each row by its sum.
pub fn closure(raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_positive(raw)?;
    let mut out = raw.clone();
    for mut row in out.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    Ok(out)
}

/// How covariates enter the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateTransform {
    /// `log x`, the log-contrast model.
    Log,
    /// Covariates used as given.
    Identity,
}

impl CovariateTransform {
    fn apply(self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            CovariateTransform::Log => {
                check_positive(x)?;
                Ok(x.map(f64::ln))
            }
            CovariateTransform::Identity => Ok(x.clone()),
        }
    }
}

/// Centered design with the offsets needed to predict on new rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LogContrastDesign {
    pub z: DMatrix<f64>,
    pub yc: DVector<f64>,
    pub z_means: DVector<f64>,
    pub y_mean: f64,
    pub transform: CovariateTransform,
    /// Whether fits impose `Σβ = 0`.
    pub zero_sum: bool,
    /// Whether quantile fits estimate a free location term.
    pub intercept: bool,
}

/// Centered log covariates and centered response.
pub fn log_contrast_design(data: &CompositionalDataset) -> LogContrastDesign {
    let z = data.x.map(f64::ln);
    LogContrastDesign::centered(z, data.y.clone(), CovariateTransform::Log, true)
}

impl LogContrastDesign {
    /// Center an already-transformed covariate matrix and response.
    pub fn centered(
        mut z: DMatrix<f64>,
        mut y: DVector<f64>,
        transform: CovariateTransform,
        zero_sum: bool,
    ) -> Self {
        let n = z.nrows().max(1) as f64;
        let z_means = DVector::from_iterator(z.ncols(), z.column_iter().map(|c| c.sum() / n));
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(-z_means[j]);
        }
        let y_mean = y.sum() / n;
        y.add_scalar_mut(-y_mean);
        Self {
            z,
            yc: y,
            z_means,
            y_mean,
            transform,
            zero_sum,
            intercept: true,
        }
    }

    pub fn with_intercept(mut self, intercept: bool) -> Self {
        self.intercept = intercept;
        self
    }

    /// Design on raw covariates without closure or the zero-sum constraint.
    pub fn unconstrained(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows but {} responses",
                x.nrows(),
                y.len()
            )));
        }
        Ok(Self::centered(
            x.clone(),
            y.clone(),
            CovariateTransform::Identity,
            false,
        ))
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn p(&self) -> usize {
        self.z.ncols()
    }

    /// Restrict to `rows` and re-center. Offsets stay in the original
    /// (uncentered) coordinates so `predict` keeps working on raw rows.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let z = self.z.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.yc[i]));
        let mut sub =
            Self::centered(z, y, self.transform, self.zero_sum).with_intercept(self.intercept);
        sub.z_means += &self.z_means;
        sub.y_mean += self.y_mean;
        sub
    }

    /// Transform and center new covariate rows with this design's offsets.
    pub fn contrast_rows(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x_new.ncols() != self.p() {
            return Err(Error::DimensionMismatch(format!(
                "new rows have {} columns, design has {}",
                x_new.ncols(),
                self.p()
            )));
        }
        let mut t = self.transform.apply(x_new)?;
        for (j, mut col) in t.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.z_means[j]);
        }
        Ok(t)
    }
}

/// `ρ_τ(u) = u·(τ − 1{u < 0})`.
pub fn check_loss(u: f64, tau: f64) -> Result<f64> {
    validate_tau(tau)?;
    Ok(rho(u, tau))
}

#[inline]
pub(crate) fn rho(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

pub(crate) fn validate_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::TauOutOfRange(tau))
    }
}

/// Sum of check losses of `residuals`.
pub fn total_check_loss(residuals: &[f64], tau: f64) -> f64 {
    residuals.iter().map(|&r| rho(r, tau)).sum()
}

/// Fitted quantile model on a centered design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFit {
    pub beta: Vec<f64>,
    /// Location term on the centered scale; zero without an intercept.
    pub intercept: f64,
    pub tau: f64,
    /// Check-loss part of the objective.
    pub objective: f64,
    /// `λ Σ w_j |β_j|`, zero when unpenalized.
    pub penalty: f64,
    pub residuals: Vec<f64>,
    pub lambda: f64,
    pub weights: Vec<f64>,
}

impl QuantileFit {
    pub fn total_objective(&self) -> f64 {
        self.objective + self.penalty
    }

    /// Number of coefficients with `|β_j| > zero_tol`.
    pub fn df(&self, zero_tol: f64) -> usize {
        self.beta.iter().filter(|b| b.abs() > zero_tol).count()
    }

    pub fn weighted_l1(&self) -> f64 {
        self.beta
            .iter()
            .zip(&self.weights)
            .map(|(b, w)| w * b.abs())
            .sum()
    }
}

fn lp_skeleton(design: &LogContrastDesign, tau: f64) -> Result<(Vec<f64>, DMatrix<f64>, Vec<f64>)> {
    validate_tau(tau)?;
    let (n, p) = (design.n(), design.p());
    if n == 0 || p == 0 {
        return Err(Error::EmptyDesign);
    }
    if design.yc.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} response entries for {} rows",
            design.yc.len(),
            n
        )));
    }
    let m = 2 * p + 2 * n + if design.intercept { 2 } else { 0 };
    let off = usize::from(design.zero_sum);
    let k = n + off;

    let mut cost = vec![0.0; m];
    cost[2 * p..2 * p + n].fill(tau);
    cost[2 * p + n..2 * p + 2 * n].fill(1.0 - tau);

    let mut a = DMatrix::zeros(k, m);
    if design.zero_sum {
        for j in 0..p {
            a[(0, j)] = 1.0;
            a[(0, p + j)] = -1.0;
        }
    }
    for i in 0..n {
        let r = i + off;
        for j in 0..p {
            let zij = design.z[(i, j)];
            a[(r, j)] = zij;
            a[(r, p + j)] = -zij;
        }
        a[(r, 2 * p + i)] = 1.0;
        a[(r, 2 * p + n + i)] = -1.0;
        if design.intercept {
            a[(r, m - 2)] = 1.0;
            a[(r, m - 1)] = -1.0;
        }
    }

    let mut rhs = vec![0.0; k];
    rhs[off..].copy_from_slice(design.yc.as_slice());
    Ok((cost, a, rhs))
}

/// Linear program for the unpenalized constrained quantile fit.
pub fn build_unpenalized_lp(design: &LogContrastDesign, tau: f64) -> Result<LpProblem> {
    let (cost, a, rhs) = lp_skeleton(design, tau)?;
    Ok(LpProblem::new(cost, a, rhs)?)
}

/// Linear program with the weighted L1 penalty `λ Σ w_j |β_j|`.
pub fn build_penalized_lp(
    design: &LogContrastDesign,
    tau: f64,
    lambda: f64,
    weights: &[f64],
) -> Result<LpProblem> {
    validate_penalty(design, lambda, weights)?;
    let (mut cost, a, rhs) = lp_skeleton(design, tau)?;
    let p = design.p();
    for (j, w) in weights.iter().enumerate() {
        cost[j] = lambda * w;
        cost[p + j] = lambda * w;
    }
    Ok(LpProblem::new(cost, a, rhs)?)
}

fn validate_penalty(design: &LogContrastDesign, lambda: f64, weights: &[f64]) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::NegativeLambda(lambda));
    }
    if weights.len() != design.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} covariates",
            weights.len(),
            design.p()
        )));
    }
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
    {
        return Err(Error::NonPositiveWeight { index, value });
    }
    Ok(())
}

fn min_observations(design: &LogContrastDesign) -> Result<()> {
    if design.n() < 2 {
        return Err(Error::DegenerateDesign(format!(
            "need at least 2 observations, got {}",
            design.n()
        )));
    }
    if design.zero_sum && design.p() < 2 {
        return Err(Error::DegenerateDesign(
            "zero-sum fit needs at least 2 covariates".into(),
        ));
    }
    Ok(())
}

fn finish_fit(
    design: &LogContrastDesign,
    problem: &LpProblem,
    tau: f64,
    lambda: f64,
    weights: Vec<f64>,
) -> Result<QuantileFit> {
    let sol = solve_lp(problem)?;
    fit_from_solution(design, &sol, tau, lambda, weights)
}

fn fit_from_solution(
    design: &LogContrastDesign,
    sol: &LpSolution,
    tau: f64,
    lambda: f64,
    weights: Vec<f64>,
) -> Result<QuantileFit> {
    if !sol.is_optimal() {
        return Err(Error::Solver(sol.status));
    }
    let p = design.p();
    let beta: Vec<f64> = (0..p).map(|j| sol.gamma[j] - sol.gamma[p + j]).collect();
    let m = sol.gamma.len();
    let intercept = if design.intercept {
        sol.gamma[m - 2] - sol.gamma[m - 1]
    } else {
        0.0
    };
    let residuals = design_residuals(design, &beta, intercept);
    let objective = total_check_loss(&residuals, tau);
    let penalty = lambda
        * beta
            .iter()
            .zip(&weights)
            .map(|(b, w)| w * b.abs())
            .sum::<f64>();
    Ok(QuantileFit {
        beta,
        intercept,
        tau,
        objective,
        penalty,
        residuals,
        lambda,
        weights,
    })
}

/// `Yc − Zβ − c`.
pub fn design_residuals(design: &LogContrastDesign, beta: &[f64], intercept: f64) -> Vec<f64> {
    let fitted = &design.z * DVector::from_column_slice(beta);
    design
        .yc
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| y - f - intercept)
        .collect()
}

/// Unpenalized quantile regression under the zero-sum constraint.
pub fn fit_qr(design: &LogContrastDesign, tau: f64) -> Result<QuantileFit> {
    min_observations(design)?;
    let problem = build_unpenalized_lp(design, tau)?;
    finish_fit(design, &problem, tau, 0.0, vec![1.0; design.p()])
}

/// Adaptive-LASSO quantile regression at a fixed penalty level.
pub fn fit_penalized(
    design: &LogContrastDesign,
    tau: f64,
    lambda: f64,
    weights: &[f64],
) -> Result<QuantileFit> {
    min_observations(design)?;
    let problem = build_penalized_lp(design, tau, lambda, weights)?;
    finish_fit(design, &problem, tau, lambda, weights.to_vec())
}

/// [`fit_penalized`] at every λ in `lambdas`. The constraint block is built
/// and phase one is solved once; each λ restarts from the previous optimal
/// basis, so ordering `lambdas` from large to small keeps the restarts short.
pub fn fit_penalized_path(
    design: &LogContrastDesign,
    tau: f64,
    lambdas: &[f64],
    weights: &[f64],
) -> Result<Vec<QuantileFit>> {
    min_observations(design)?;
    for &l in lambdas {
        validate_penalty(design, l, weights)?;
    }
    let problem = build_unpenalized_lp(design, tau)?;
    let p = design.p();
    let costs: Vec<Vec<f64>> = lambdas
        .iter()
        .map(|&l| {
            let mut c = problem.cost.clone();
            for (j, w) in weights.iter().enumerate() {
                c[j] = l * w;
                c[p + j] = l * w;
            }
            c
        })
        .collect();
    solve_lp_costs(&problem, &costs)?
        .iter()
        .zip(lambdas)
        .map(|(sol, &l)| fit_from_solution(design, sol, tau, l, weights.to_vec()))
        .collect()
}

/// Predict responses for new covariate rows: `ŷ = ȳ + c + (t(x) − z̄)·β`.
pub fn predict(
    fit: &QuantileFit,
    design: &LogContrastDesign,
    x_new: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    predict_linear(&fit.beta, fit.intercept, design, x_new)
}

/// [`predict`] for coefficients that did not come from a quantile fit.
pub fn predict_linear(
    beta: &[f64],
    intercept: f64,
    design: &LogContrastDesign,
    x_new: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    if beta.len() != design.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} covariates",
            beta.len(),
            design.p()
        )));
    }
    let contrast = design.contrast_rows(x_new)?;
    let mut y = contrast * DVector::from_column_slice(beta);
    y.add_scalar_mut(design.y_mean + intercept);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_design() -> LogContrastDesign {
        let raw = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 2.0, 3.0, 2.0, 1.0, 4.0, 3.0, 3.0, 1.0, 0.5, 2.5, 2.0, 4.0, 1.0, 1.0, 1.5,
                1.5, 3.0,
            ],
        );
        let y = DVector::from_column_slice(&[0.3, -0.2, 1.1, -0.7, 0.9, 0.1]);
        log_contrast_design(&CompositionalDataset::from_raw(&raw, y).unwrap())
    }

    #[test]
    fn closure_examples() {
        let c = closure(&DMatrix::from_row_slice(1, 2, &[2.0, 2.0])).unwrap();
        assert_eq!(c.as_slice(), &[0.5, 0.5]);
        let c = closure(&DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 7.0])).unwrap();
        for (a, b) in c.iter().zip([0.1, 0.2, 0.7]) {
            assert!((a - b).abs() < 1e-15);
        }
        let c = closure(&DMatrix::from_row_slice(1, 2, &[0.3, 0.7])).unwrap();
        for (a, b) in c.iter().zip([0.3, 0.7]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(
            closure(&DMatrix::from_row_slice(1, 2, &[0.0, 1.0])),
            Err(Error::NonPositiveEntry { row: 0, col: 0, .. })
        ));
    }

    #[test]
    fn dataset_rejects_unclosed_rows() {
        let x = DMatrix::from_row_slice(1, 2, &[0.3, 0.8]);
        assert!(matches!(
            CompositionalDataset::new(x, DVector::from_element(1, 0.0)),
            Err(Error::NotOnSimplex { row: 0, .. })
        ));
    }

    #[test]
    fn design_centering() {
        let e = std::f64::consts::E;
        let s = e + e * e;
        let x = DMatrix::from_row_slice(2, 2, &[e / s, e * e / s, e * e / s, e / s]);
        let d = log_contrast_design(
            &CompositionalDataset::new(x, DVector::from_column_slice(&[1.0, 3.0])).unwrap(),
        );
        for col in d.z.column_iter() {
            assert!(col.sum().abs() < 1e-12);
        }
        assert_eq!(d.y_mean, 2.0);

        let single = log_contrast_design(
            &CompositionalDataset::new(
                DMatrix::from_row_slice(1, 3, &[0.2, 0.3, 0.5]),
                DVector::from_element(1, 4.0),
            )
            .unwrap(),
        );
        assert!(single.z.iter().all(|v| *v == 0.0));
        assert_eq!(single.yc[0], 0.0);
    }

    #[test]
    fn check_loss_examples() {
        assert_eq!(check_loss(0.0, 0.5).unwrap(), 0.0);
        assert!((check_loss(2.0, 0.3).unwrap() - 0.6).abs() < 1e-15);
        assert!((check_loss(-2.0, 0.3).unwrap() - 1.4).abs() < 1e-15);
        assert!(matches!(check_loss(1.0, 1.0), Err(Error::TauOutOfRange(_))));
        assert!(matches!(check_loss(1.0, 0.0), Err(Error::TauOutOfRange(_))));
    }

    #[test]
    fn unpenalized_lp_layout() {
        let x = DMatrix::from_row_slice(2, 2, &[0.25, 0.75, 0.6, 0.4]);
        let d = log_contrast_design(
            &CompositionalDataset::new(x, DVector::from_column_slice(&[1.0, -1.0])).unwrap(),
        );
        let with_c = build_unpenalized_lp(&d, 0.25).unwrap();
        assert_eq!(with_c.a_eq.shape(), (3, 10));
        assert_eq!(&with_c.cost[8..], &[0.0, 0.0]);
        assert_eq!(with_c.a_eq[(0, 8)], 0.0);
        assert_eq!((with_c.a_eq[(1, 8)], with_c.a_eq[(1, 9)]), (1.0, -1.0));

        let d = d.with_intercept(false);
        let lp = build_unpenalized_lp(&d, 0.25).unwrap();
        assert_eq!(lp.a_eq.shape(), (3, 8));
        assert_eq!(lp.b_eq, vec![0.0, d.yc[0], d.yc[1]]);
        assert_eq!(&lp.cost[..4], &[0.0; 4]);
        assert_eq!(&lp.cost[4..6], &[0.25, 0.25]);
        assert_eq!(&lp.cost[6..8], &[0.75, 0.75]);
        assert_eq!(
            lp.a_eq.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0]
        );

        // β = 0 with residual slacks is feasible
        let mut gamma = vec![0.0; 8];
        for i in 0..2 {
            gamma[4 + i] = d.yc[i].max(0.0);
            gamma[6 + i] = (-d.yc[i]).max(0.0);
        }
        assert!(lp.residual_norm(&gamma) < 1e-15);
    }

    #[test]
    fn penalized_lp_costs() {
        let d = toy_design();
        let w = vec![1.0; 3];
        let zero = build_penalized_lp(&d, 0.4, 0.0, &w).unwrap();
        assert_eq!(zero.cost, build_unpenalized_lp(&d, 0.4).unwrap().cost);

        let lp = build_penalized_lp(&d, 0.5, 1.0, &w).unwrap();
        assert_eq!(&lp.cost[..6], &[1.0; 6]);
        assert!(lp.cost[6..18].iter().all(|c| *c == 0.5));
        assert_eq!(&lp.cost[18..], &[0.0, 0.0]);

        let lp = build_penalized_lp(&d, 0.3, 0.7, &[0.2, 3.0, 1.5]).unwrap();
        for j in 0..3 {
            assert_eq!(lp.cost[j], lp.cost[3 + j]);
        }

        assert!(matches!(
            build_penalized_lp(&d, 0.5, -1.0, &w),
            Err(Error::NegativeLambda(_))
        ));
        assert!(matches!(
            build_penalized_lp(&d, 0.5, 1.0, &[1.0, 0.0, 1.0]),
            Err(Error::NonPositiveWeight { index: 1, .. })
        ));
    }

    #[test]
    fn empty_and_degenerate_designs() {
        let d = LogContrastDesign::centered(
            DMatrix::zeros(0, 3),
            DVector::zeros(0),
            CovariateTransform::Log,
            true,
        );
        assert!(matches!(
            build_unpenalized_lp(&d, 0.5),
            Err(Error::EmptyDesign)
        ));
        let one = toy_design().subset(&[0]);
        assert!(matches!(fit_qr(&one, 0.5), Err(Error::DegenerateDesign(_))));
    }

    #[test]
    fn noiseless_fit_interpolates() {
        let d0 = toy_design();
        let beta0 = DVector::from_column_slice(&[0.7, -1.2, 0.5]);
        let mut d = d0.clone();
        d.yc = &d.z * &beta0;
        let fit = fit_qr(&d, 0.5).unwrap();
        assert!(fit.objective.abs() < 1e-10);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-10));
        for (b, t) in fit.beta.iter().zip(beta0.iter()) {
            assert!((b - t).abs() < 1e-9);
        }
    }

    #[test]
    fn median_fit_unchanged_by_duplication() {
        let d = toy_design();
        let fit = fit_qr(&d, 0.5).unwrap();
        let rows: Vec<usize> = (0..d.n()).chain(0..d.n()).collect();
        let doubled = d.subset(&rows);
        let fit2 = fit_qr(&doubled, 0.5).unwrap();
        assert!((fit2.objective - 2.0 * fit.objective).abs() < 1e-9);
    }

    #[test]
    fn huge_penalty_gives_null_model() {
        let d = toy_design();
        let fit = fit_penalized(&d, 0.5, 1e9, &[1.0; 3]).unwrap();
        assert!(fit.beta.iter().all(|b| *b == 0.0));
        assert_eq!(fit.penalty, 0.0);
    }

    #[test]
    fn zero_penalty_matches_unpenalized() {
        let d = toy_design();
        for tau in [0.2, 0.5, 0.8] {
            let a = fit_qr(&d, tau).unwrap();
            let b = fit_penalized(&d, tau, 0.0, &[2.0, 1.0, 0.5]).unwrap();
            assert!((a.objective - b.total_objective()).abs() < 1e-7);
        }
    }

    #[test]
    fn predict_identities() {
        let d = toy_design();
        let fit = fit_qr(&d, 0.5).unwrap();
        let raw = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 2.0, 3.0, 2.0, 1.0, 4.0, 3.0, 3.0, 1.0, 0.5, 2.5, 2.0, 4.0, 1.0, 1.0, 1.5,
                1.5, 3.0,
            ],
        );
        let x = closure(&raw).unwrap();
        let yhat = predict(&fit, &d, &x).unwrap();
        let y = d.yc.add_scalar(d.y_mean);
        for i in 0..6 {
            assert!((yhat[i] - (y[i] - fit.residuals[i])).abs() < 1e-12);
        }

        let zero = predict_linear(&[0.0; 3], 0.0, &d, &x).unwrap();
        assert!(zero.iter().all(|v| *v == d.y_mean));

        let geo = DMatrix::from_row_slice(1, 3, d.z_means.map(f64::exp).as_slice());
        let yg = predict_linear(&fit.beta, 0.0, &d, &geo).unwrap();
        assert!((yg[0] - d.y_mean).abs() < 1e-12);

        assert!(matches!(
            predict(&fit, &d, &DMatrix::from_element(1, 2, 0.5)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            predict(&fit, &d, &DMatrix::from_row_slice(1, 3, &[0.5, 0.5, 0.0])),
            Err(Error::NonPositiveEntry { .. })
        ));
    }

    #[test]
    fn unconstrained_design_drops_sum_row() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 1.0, 3.0, 5.0]);
        let y = DVector::from_column_slice(&[1.0, 0.0, 4.0]);
        let d = LogContrastDesign::unconstrained(&x, &y).unwrap();
        let lp = build_unpenalized_lp(&d, 0.5).unwrap();
        assert_eq!(lp.a_eq.nrows(), 3);
        let fit = fit_qr(&d, 0.5).unwrap();
        assert_eq!(fit.beta.len(), 2);
    }
}
