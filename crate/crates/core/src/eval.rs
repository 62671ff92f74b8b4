//! Real-data workflow: CSV ingestion, logit response, k-fold tuning, and
//! repeated hold-out NMSE comparison.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    closure, fit_penalized, fit_penalized_path, fit_qr, predict, predict_linear, total_check_loss,
    CovariateTransform, LogContrastDesign, QuantileFit,
};
use crate::sim::{fit_constrained_ls, replicate_rng};
use crate::tuning::{adaptive_weights, GridSpec, DEFAULT_KAPPA, ZERO_TOL};

/// Response column plus named positive covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub response_name: String,
    pub covariate_names: Vec<String>,
    pub covariates: DMatrix<f64>,
    pub response: DVector<f64>,
}

impl Table {
    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    /// Replace the response by `log(y / (100 − y))`.
    pub fn logit_response(mut self) -> Result<Self> {
        for y in self.response.iter_mut() {
            *y = logit_response(*y)?;
        }
        Ok(self)
    }
}

pub fn read_csv(path: impl AsRef<Path>, response: &str) -> Result<Table> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_csv(file, response)
}

/// Comma-separated, header required. Rows are numbered from 1 after the header.
pub fn parse_csv<R: Read>(reader: R, response: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            col: String::new(),
            msg: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let ycol = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::Parse {
            row: 0,
            col: response.to_string(),
            msg: "response column not found in header".into(),
        })?;
    if headers.len() < 2 {
        return Err(Error::Parse {
            row: 0,
            col: String::new(),
            msg: "no covariate columns".into(),
        });
    }
    let covariate_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ycol)
        .map(|(_, h)| h.clone())
        .collect();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            col: String::new(),
            msg: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                col: String::new(),
                msg: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                col: headers[j].clone(),
                msg: format!("'{field}' is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    col: headers[j].clone(),
                    msg: "not finite".into(),
                });
            }
            if j == ycol {
                ys.push(value);
            } else {
                xs.push(value);
            }
        }
    }
    if ys.is_empty() {
        return Err(Error::Parse {
            row: 1,
            col: String::new(),
            msg: "no data rows".into(),
        });
    }
    let p = covariate_names.len();
    Ok(Table {
        response_name: response.to_string(),
        covariate_names,
        covariates: DMatrix::from_row_slice(ys.len(), p, &xs),
        response: DVector::from_vec(ys),
    })
}

/// `log(b / (100 − b))` for a percentage strictly inside (0, 100).
pub fn logit_response(b: f64) -> Result<f64> {
    if b > 0.0 && b < 100.0 {
        Ok((b / (100.0 - b)).ln())
    } else {
        Err(Error::OutOfDomain(b))
    }
}

/// `Σ(y − ŷ)² / Σ(y − ȳ)²`, the mean taken over `y_test`.
pub fn nmse(y_test: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_test.len() != y_pred.len() || y_test.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} test responses, {} predictions",
            y_test.len(),
            y_pred.len()
        )));
    }
    let mean = y_test.iter().sum::<f64>() / y_test.len() as f64;
    let den: f64 = y_test.iter().map(|y| (y - mean).powi(2)).sum();
    if den <= f64::MIN_POSITIVE {
        return Err(Error::ConstantResponse);
    }
    let num: f64 = y_test
        .iter()
        .zip(y_pred)
        .map(|(y, f)| (y - f).powi(2))
        .sum();
    Ok(num / den)
}

/// Random assignment of rows to `k` folds of near-equal size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub assignment: Vec<usize>,
    pub k: usize,
}

impl SplitPlan {
    pub fn kfold<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k < 2 || n < k {
            return Err(Error::FoldTooSmall { n, k });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut assignment = vec![0; n];
        for (pos, &row) in order.iter().enumerate() {
            assignment[row] = pos % k;
        }
        Ok(Self { assignment, k })
    }

    /// `(train, test)` row indices with fold `f` held out.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignment.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Cross-validated λ selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    /// Held-out check loss per λ, averaged over folds.
    pub mean_loss: Vec<f64>,
    pub selected_index: usize,
}

impl CvResult {
    pub fn lambda_opt(&self) -> f64 {
        self.lambdas[self.selected_index]
    }
}

/// Held-out residuals of `beta` fitted on `train` for rows `test` of `design`.
fn held_out_residuals(
    design: &LogContrastDesign,
    train: &LogContrastDesign,
    test: &[usize],
    fit: &QuantileFit,
) -> Vec<f64> {
    test.iter()
        .map(|&i| {
            let mut pred = train.y_mean + fit.intercept;
            for (j, b) in fit.beta.iter().enumerate() {
                pred += (design.z[(i, j)] + design.z_means[j] - train.z_means[j]) * b;
            }
            design.yc[i] + design.y_mean - pred
        })
        .collect()
}

/// k-fold selection of λ for the adaptive-LASSO quantile fit. The grid is
/// resolved on the full design; each fold recomputes its adaptive weights
/// from its own unpenalized fit. Ties go to the larger λ.
pub fn cv_select_lambda<R: Rng + ?Sized>(
    design: &LogContrastDesign,
    tau: f64,
    k: usize,
    grid: &GridSpec,
    rng: &mut R,
) -> Result<CvResult> {
    let plan = SplitPlan::kfold(design.n(), k, rng)?;
    let pilot = fit_qr(design, tau)?;
    let weights = adaptive_weights(&pilot.beta, DEFAULT_KAPPA);
    let lambdas = grid.resolve(design, tau, &weights, ZERO_TOL)?;
    if lambdas.len() == 1 {
        return Ok(CvResult {
            mean_loss: vec![f64::NAN],
            lambdas,
            selected_index: 0,
        });
    }

    let fold_losses = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train_rows, test_rows) = plan.split(f);
            let train = design.subset(&train_rows);
            let w = adaptive_weights(&fit_qr(&train, tau)?.beta, DEFAULT_KAPPA);
            let fits = fit_penalized_path(&train, tau, &lambdas, &w)?;
            Ok(fits
                .iter()
                .map(|fit| {
                    total_check_loss(&held_out_residuals(design, &train, &test_rows, fit), tau)
                })
                .collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean_loss = vec![0.0; lambdas.len()];
    for losses in &fold_losses {
        for (m, l) in mean_loss.iter_mut().zip(losses) {
            *m += l;
        }
    }
    mean_loss.iter_mut().for_each(|m| *m /= k as f64);
    let mut selected_index = 0;
    for (i, m) in mean_loss.iter().enumerate() {
        if *m < mean_loss[selected_index] {
            selected_index = i;
        }
    }
    Ok(CvResult {
        lambdas,
        mean_loss,
        selected_index,
    })
}

/// Covariate treatment for one arm of the comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// Closure, log transform, zero-sum fits.
    Compositional,
    /// Raw covariates, no closure, no zero-sum constraint.
    Original,
}

impl Arm {
    pub fn design(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<LogContrastDesign> {
        match self {
            Arm::Compositional => {
                let z = closure(x)?.map(f64::ln);
                Ok(LogContrastDesign::centered(
                    z,
                    y.clone(),
                    CovariateTransform::Log,
                    true,
                ))
            }
            Arm::Original => LogContrastDesign::unconstrained(x, y),
        }
    }

    fn prepare_test(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Arm::Compositional => closure(x),
            Arm::Original => Ok(x.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationConfig {
    pub tau: f64,
    pub repeats: usize,
    /// Rows are split into this many parts; one part is the test set.
    pub holdout_parts: usize,
    pub cv_folds: usize,
    pub grid: GridSpec,
    pub arms: Vec<Arm>,
    pub seed: u64,
}

impl Default for ApplicationConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            repeats: 100,
            holdout_parts: 10,
            cv_folds: 10,
            grid: GridSpec::default(),
            arms: vec![Arm::Compositional, Arm::Original],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    /// Adaptive-LASSO quantile regression with CV-selected λ.
    pub qr_ala_nmse: Vec<f64>,
    /// Unpenalized least squares (constrained when the arm is zero-sum).
    pub ls_nmse: Vec<f64>,
    pub qr_ala_mean: f64,
    pub ls_mean: f64,
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationSummary {
    pub config: ApplicationConfig,
    pub n: usize,
    pub p: usize,
    pub arms: Vec<ArmSummary>,
}

struct RepeatOutcome {
    qr: f64,
    ls: f64,
    lambda: f64,
}

fn one_repeat(
    table: &Table,
    arm: Arm,
    config: &ApplicationConfig,
    r: usize,
) -> Result<RepeatOutcome> {
    let mut rng = replicate_rng(config.seed, r as u64);
    let plan = SplitPlan::kfold(table.n(), config.holdout_parts, &mut rng)?;
    let (train, test) = plan.split(0);
    let x_train = table.covariates.select_rows(&train);
    let y_train = DVector::from_iterator(train.len(), train.iter().map(|&i| table.response[i]));
    let x_test = arm.prepare_test(&table.covariates.select_rows(&test))?;
    let y_test: Vec<f64> = test.iter().map(|&i| table.response[i]).collect();

    let design = arm.design(&x_train, &y_train)?;
    let pilot = fit_qr(&design, config.tau)?;
    let weights = adaptive_weights(&pilot.beta, DEFAULT_KAPPA);
    let cv = cv_select_lambda(&design, config.tau, config.cv_folds, &config.grid, &mut rng)?;
    let fit = fit_penalized(&design, config.tau, cv.lambda_opt(), &weights)?;
    let qr_pred = predict(&fit, &design, &x_test)?;

    let ls_beta = fit_constrained_ls(&design)?;
    let ls_pred = predict_linear(&ls_beta, 0.0, &design, &x_test)?;

    Ok(RepeatOutcome {
        qr: nmse(&y_test, qr_pred.as_slice())?,
        ls: nmse(&y_test, ls_pred.as_slice())?,
        lambda: cv.lambda_opt(),
    })
}

/// Repeated random hold-out comparison of QR-ALA against least squares.
pub fn run_application(table: &Table, config: &ApplicationConfig) -> Result<ApplicationSummary> {
    crate::model::validate_tau(config.tau)?;
    if config.repeats == 0 {
        return Err(Error::InvalidConfig("repeats must be at least 1".into()));
    }
    if config.arms.is_empty() {
        return Err(Error::InvalidConfig("no arms requested".into()));
    }
    let mut arms = Vec::with_capacity(config.arms.len());
    for &arm in &config.arms {
        let outcomes = (0..config.repeats)
            .into_par_iter()
            .map(|r| one_repeat(table, arm, config, r))
            .collect::<Result<Vec<_>>>()?;
        let reps = outcomes.len() as f64;
        let qr_ala_nmse: Vec<f64> = outcomes.iter().map(|o| o.qr).collect();
        let ls_nmse: Vec<f64> = outcomes.iter().map(|o| o.ls).collect();
        arms.push(ArmSummary {
            arm,
            qr_ala_mean: qr_ala_nmse.iter().sum::<f64>() / reps,
            ls_mean: ls_nmse.iter().sum::<f64>() / reps,
            qr_ala_nmse,
            ls_nmse,
            lambdas: outcomes.iter().map(|o| o.lambda).collect(),
        });
    }
    Ok(ApplicationSummary {
        config: config.clone(),
        n: table.n(),
        p: table.p(),
        arms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logit_examples() {
        assert_eq!(logit_response(50.0).unwrap(), 0.0);
        assert!((logit_response(75.0).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(logit_response(0.0), Err(Error::OutOfDomain(0.0)));
        assert_eq!(logit_response(100.0), Err(Error::OutOfDomain(100.0)));
    }

    #[test]
    fn nmse_examples() {
        assert_eq!(nmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(nmse(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(nmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), 0.5);
        assert_eq!(nmse(&[2.0, 2.0], &[1.0, 2.0]), Err(Error::ConstantResponse));
    }

    #[test]
    fn kfold_partitions_rows() {
        let mut rng = replicate_rng(4, 0);
        let plan = SplitPlan::kfold(23, 10, &mut rng).unwrap();
        let mut seen = [0; 23];
        for f in 0..10 {
            let (train, test) = plan.split(f);
            assert!(!test.is_empty());
            assert_eq!(train.len() + test.len(), 23);
            for i in test {
                seen[i] += 1;
                assert!(!train.contains(&i));
            }
        }
        assert!(seen.iter().all(|c| *c == 1));
        assert_eq!(
            SplitPlan::kfold(5, 10, &mut rng),
            Err(Error::FoldTooSmall { n: 5, k: 10 })
        );
    }

    #[test]
    fn csv_parsing() {
        let text = "y,a,b\n1.5,1,2\n-0.5,3,4\n";
        let t = parse_csv(text.as_bytes(), "y").unwrap();
        assert_eq!(t.covariate_names, vec!["a", "b"]);
        assert_eq!(t.response.as_slice(), &[1.5, -0.5]);
        assert_eq!(t.covariates[(1, 0)], 3.0);

        let bad = "y,a,b\n1.5,1,2\n-0.5,x,4\n";
        match parse_csv(bad.as_bytes(), "y") {
            Err(Error::Parse { row, col, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(col, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_csv(text.as_bytes(), "z"),
            Err(Error::Parse { row: 0, .. })
        ));
    }

    #[test]
    fn single_lambda_grid_is_returned() {
        let raw = DMatrix::from_fn(20, 3, |i, j| 1.0 + ((i * 3 + j * 5) % 7) as f64);
        let y = DVector::from_fn(20, |i, _| (i % 4) as f64);
        let d = Arm::Compositional.design(&raw, &y).unwrap();
        let mut rng = replicate_rng(0, 0);
        let cv = cv_select_lambda(&d, 0.5, 5, &GridSpec::explicit(vec![0.3]), &mut rng).unwrap();
        assert_eq!(cv.lambda_opt(), 0.3);
    }
}
