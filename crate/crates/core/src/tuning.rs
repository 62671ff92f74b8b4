//! Adaptive weights, BIC, and the λ search for adaptive-LASSO quantile fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    design_residuals, fit_penalized, fit_penalized_path, fit_qr, total_check_loss,
    LogContrastDesign, QuantileFit,
};

/// Exponent on the pilot magnitudes in the adaptive weights.
pub const DEFAULT_KAPPA: f64 = 1.0;
/// Pilot magnitudes below this floor are raised to it before inversion.
pub const WEIGHT_FLOOR: f64 = 1e-8;
/// Coefficients with `|β_j|` at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-6;
/// Check-loss sums at or below this make `log(loss)` meaningless.
pub const DEGENERATE_LOSS: f64 = 1e-12;

/// `w_j = 1 / max(|β̃_j|, 1e-8)^κ`.
pub fn adaptive_weights(beta_tilde: &[f64], kappa: f64) -> Vec<f64> {
    beta_tilde
        .iter()
        .map(|b| 1.0 / b.abs().max(WEIGHT_FLOOR).powf(kappa))
        .collect()
}

/// `log(Σ ρ_τ(Yc − Zβ − c)) + df · log(n) / n`, with df counting slopes only.
pub fn bic(design: &LogContrastDesign, tau: f64, fit: &QuantileFit, zero_tol: f64) -> Result<f64> {
    let n = design.n();
    let resid = design_residuals(design, &fit.beta, fit.intercept);
    let loss = total_check_loss(&resid, tau);
    if loss <= DEGENERATE_LOSS {
        return Err(Error::ZeroLossDegenerate);
    }
    let nf = n as f64;
    Ok(loss.ln() + nf.ln() / nf * fit.df(zero_tol) as f64)
}

/// How the λ grid is laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of log-spaced values from `λ_max` down to `λ_max · min_ratio`.
    pub n_lambdas: usize,
    pub min_ratio: f64,
    /// Use these values (sorted descending) instead of a generated grid.
    pub explicit: Option<Vec<f64>>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_lambdas: 50,
            min_ratio: 1e-4,
            explicit: None,
        }
    }
}

impl GridSpec {
    pub fn explicit(mut lambdas: Vec<f64>) -> Self {
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Self {
            explicit: Some(lambdas),
            ..Self::default()
        }
    }

    pub fn with_len(n_lambdas: usize) -> Self {
        Self {
            n_lambdas,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.explicit {
            Some(l) if l.is_empty() => Err(Error::InvalidConfig("empty λ grid".into())),
            Some(l) => match l.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                Some(v) => Err(Error::NegativeLambda(*v)),
                None => Ok(()),
            },
            None if self.n_lambdas == 0 => Err(Error::InvalidConfig("empty λ grid".into())),
            None if !(self.min_ratio > 0.0 && self.min_ratio < 1.0) => Err(Error::InvalidConfig(
                format!("λ ratio {} must lie in (0, 1)", self.min_ratio),
            )),
            None => Ok(()),
        }
    }

    /// Materialize the grid for a design with the given adaptive weights.
    pub fn resolve(
        &self,
        design: &LogContrastDesign,
        tau: f64,
        weights: &[f64],
        zero_tol: f64,
    ) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some(l) = &self.explicit {
            return Ok(l.clone());
        }
        let lambda_max = find_lambda_max(design, tau, weights, zero_tol)?;
        Ok(log_grid(lambda_max, self.min_ratio, self.n_lambdas))
    }
}

/// Descending log-spaced grid from `top` to `top · ratio`.
pub fn log_grid(top: f64, ratio: f64, len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![top];
    }
    let step = ratio.ln() / (len - 1) as f64;
    (0..len).map(|i| top * (step * i as f64).exp()).collect()
}

/// Smallest λ tested by halving/doubling at which the fit has no nonzero
/// coefficients. The search starts from the sup-norm of the weighted
/// check-loss subgradient at `β = 0`.
pub fn find_lambda_max(
    design: &LogContrastDesign,
    tau: f64,
    weights: &[f64],
    zero_tol: f64,
) -> Result<f64> {
    const MAX_STEPS: usize = 64;
    let centre = if design.intercept {
        sample_quantile(design.yc.as_slice(), tau)
    } else {
        0.0
    };
    let mut start = 0.0_f64;
    for (j, col) in design.z.column_iter().enumerate() {
        let g: f64 = col
            .iter()
            .zip(design.yc.iter().map(|y| y - centre))
            .map(|(z, y)| {
                if y > 0.0 {
                    tau * z
                } else if y < 0.0 {
                    (tau - 1.0) * z
                } else {
                    0.0
                }
            })
            .sum();
        start = start.max(g.abs() / weights[j]);
    }
    if !(start > 0.0 && start.is_finite()) {
        start = 1.0;
    }

    let is_null = |lambda: f64| -> Result<bool> {
        Ok(fit_penalized(design, tau, lambda, weights)?.df(zero_tol) == 0)
    };

    let mut lambda = start;
    if is_null(lambda)? {
        for _ in 0..MAX_STEPS {
            let half = lambda / 2.0;
            if !is_null(half)? {
                return Ok(lambda);
            }
            lambda = half;
        }
        Ok(lambda)
    } else {
        for _ in 0..MAX_STEPS {
            lambda *= 2.0;
            if is_null(lambda)? {
                return Ok(lambda);
            }
        }
        Err(Error::DegenerateDesign(
            "no penalty level on the doubling search zeroes every coefficient".into(),
        ))
    }
}

fn sample_quantile(values: &[f64], tau: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((tau * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

/// Fits along a λ grid with their BIC values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningPath {
    pub lambdas: Vec<f64>,
    pub fits: Vec<QuantileFit>,
    pub dfs: Vec<usize>,
    /// `+inf` where the fit had zero loss.
    pub bics: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub selected_index: usize,
}

impl TuningPath {
    pub fn lambda_opt(&self) -> f64 {
        self.lambdas[self.selected_index]
    }

    pub fn selected(&self) -> &QuantileFit {
        &self.fits[self.selected_index]
    }
}

/// Output of the full adaptive-LASSO pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveLassoFit {
    /// Unpenalized fit that supplies the weights.
    pub pilot: QuantileFit,
    pub weights: Vec<f64>,
    pub path: TuningPath,
    /// Fit at the BIC-selected λ.
    pub fit: QuantileFit,
}

/// Pilot fit → weights → fits over the grid → BIC → fit at `λ_opt`.
pub fn fit_adaptive_lasso(
    design: &LogContrastDesign,
    tau: f64,
    grid: &GridSpec,
) -> Result<AdaptiveLassoFit> {
    fit_adaptive_lasso_with(design, tau, grid, DEFAULT_KAPPA, ZERO_TOL)
}

pub fn fit_adaptive_lasso_with(
    design: &LogContrastDesign,
    tau: f64,
    grid: &GridSpec,
    kappa: f64,
    zero_tol: f64,
) -> Result<AdaptiveLassoFit> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "κ = {kappa} must be positive"
        )));
    }
    let pilot = fit_qr(design, tau)?;
    let weights = adaptive_weights(&pilot.beta, kappa);
    let lambdas = grid.resolve(design, tau, &weights, zero_tol)?;
    let path = tune_path(design, tau, &lambdas, &weights, zero_tol)?;
    let fit = path.selected().clone();
    Ok(AdaptiveLassoFit {
        pilot,
        weights,
        path,
        fit,
    })
}

/// Fit every λ in `lambdas` and select the first minimizer of BIC.
pub fn tune_path(
    design: &LogContrastDesign,
    tau: f64,
    lambdas: &[f64],
    weights: &[f64],
    zero_tol: f64,
) -> Result<TuningPath> {
    let fits = fit_penalized_path(design, tau, lambdas, weights)?;
    let dfs: Vec<usize> = fits.iter().map(|f| f.df(zero_tol)).collect();
    let mut bics = Vec::with_capacity(fits.len());
    let mut degenerate = Vec::with_capacity(fits.len());
    for fit in &fits {
        match bic(design, tau, fit, zero_tol) {
            Ok(b) => {
                bics.push(b);
                degenerate.push(false);
            }
            Err(Error::ZeroLossDegenerate) => {
                bics.push(f64::INFINITY);
                degenerate.push(true);
            }
            Err(e) => return Err(e),
        }
    }
    let selected_index = first_argmin(&bics, &degenerate).ok_or(Error::AllLambdasDegenerate)?;
    Ok(TuningPath {
        lambdas: lambdas.to_vec(),
        fits,
        dfs,
        bics,
        degenerate,
        selected_index,
    })
}

fn first_argmin(values: &[f64], skip: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if skip[i] {
            continue;
        }
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_contrast_design, CompositionalDataset};
    use nalgebra::{DMatrix, DVector};

    fn design() -> LogContrastDesign {
        let raw = DMatrix::from_fn(30, 4, |i, j| 1.0 + ((i * 7 + j * 3) % 11) as f64);
        let y = DVector::from_fn(30, |i, _| ((i * 5) % 9) as f64 * 0.3 - 1.0);
        log_contrast_design(&CompositionalDataset::from_raw(&raw, y).unwrap())
    }

    #[test]
    fn weight_examples() {
        let w = adaptive_weights(&[2.0, -0.5, -1.5], 1.0);
        assert_eq!(w[0], 0.5);
        assert_eq!(w[1], 2.0);
        assert!((w[2] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(adaptive_weights(&[0.0], 1.0), vec![1e8]);
        assert!((adaptive_weights(&[0.1], 2.0)[0] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn bic_examples() {
        let mut d = design();
        d.z = DMatrix::zeros(100, 5);
        d.yc = DVector::zeros(100);
        d.yc[0] = 2.0; // loss at τ = 0.5 is 1
        let mut fit = QuantileFit {
            beta: vec![0.0; 5],
            intercept: 0.0,
            tau: 0.5,
            objective: 1.0,
            penalty: 0.0,
            residuals: vec![],
            lambda: 0.0,
            weights: vec![1.0; 5],
        };
        assert_eq!(bic(&d, 0.5, &fit, ZERO_TOL).unwrap(), 0.0);
        fit.beta = vec![1.0; 5];
        let expected = 5.0 * 100f64.ln() / 100.0;
        assert!((bic(&d, 0.5, &fit, ZERO_TOL).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.2303).abs() < 1e-4);

        d.yc[0] = 0.0;
        fit.beta = vec![0.0; 5];
        assert_eq!(bic(&d, 0.5, &fit, ZERO_TOL), Err(Error::ZeroLossDegenerate));
    }

    #[test]
    fn zero_grid_returns_pilot() {
        let d = design();
        let out = fit_adaptive_lasso(&d, 0.5, &GridSpec::explicit(vec![0.0])).unwrap();
        assert_eq!(out.fit.beta, out.pilot.beta);
        assert_eq!(out.path.selected_index, 0);
    }

    #[test]
    fn generated_grid_ends_in_null_model() {
        let d = design();
        let out = fit_adaptive_lasso(&d, 0.5, &GridSpec::with_len(12)).unwrap();
        let path = &out.path;
        assert_eq!(path.lambdas.len(), 12);
        assert_eq!(path.dfs[0], 0);
        assert!(path.dfs[0] <= *path.dfs.last().unwrap());
        assert!(path.lambdas.windows(2).all(|w| w[0] > w[1]));
        let ratio = path.lambdas[11] / path.lambdas[0];
        assert!((ratio - 1e-4).abs() < 1e-12);
        for (i, b) in path.bics.iter().enumerate() {
            assert!(path.bics[path.selected_index] <= *b, "index {i}");
        }
        // the λ one halving below λ_max must leave something nonzero
        let below = fit_penalized(&d, 0.5, path.lambdas[0] / 2.0, &out.weights).unwrap();
        assert!(below.df(ZERO_TOL) > 0);
    }

    #[test]
    fn all_degenerate_is_an_error() {
        let mut d = design();
        let beta = DVector::from_column_slice(&[1.0, -1.0, 0.5, -0.5]);
        d.yc = &d.z * beta;
        let err = fit_adaptive_lasso(&d, 0.5, &GridSpec::explicit(vec![0.0])).unwrap_err();
        assert_eq!(err, Error::AllLambdasDegenerate);
    }

    #[test]
    fn argmin_takes_first_tie() {
        assert_eq!(first_argmin(&[3.0, 1.0, 1.0], &[false; 3]), Some(1));
        assert_eq!(first_argmin(&[0.0, 1.0], &[true, false]), Some(1));
        assert_eq!(first_argmin(&[0.0], &[true]), None);
    }

    #[test]
    fn grid_validation() {
        let d = design();
        let w = vec![1.0; 4];
        assert!(GridSpec::explicit(vec![])
            .resolve(&d, 0.5, &w, ZERO_TOL)
            .is_err());
        assert!(GridSpec::explicit(vec![-1.0])
            .resolve(&d, 0.5, &w, ZERO_TOL)
            .is_err());
        let g = GridSpec {
            min_ratio: 2.0,
            ..GridSpec::default()
        };
        assert!(g.resolve(&d, 0.5, &w, ZERO_TOL).is_err());
    }
}
