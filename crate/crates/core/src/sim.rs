//! Monte Carlo studies: logistic-normal covariates, the five error laws,
//! the constrained least-squares baseline, and the replicate harness.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fit_qr, log_contrast_design, CompositionalDataset, LogContrastDesign};
use crate::tuning::{fit_adaptive_lasso, GridSpec, ZERO_TOL};

/// Coefficients of the first Monte Carlo study.
pub const EXAMPLE1_BETA: [f64; 6] = [1.0, -0.8, 0.6, -1.5, -0.5, 1.2];
/// Nonzero prefix of the second study's coefficients; the rest are zero.
pub const EXAMPLE2_BETA_HEAD: [f64; 8] = [1.0, -0.8, 0.6, 0.0, 0.0, -1.5, -0.5, 1.2];

/// Generator for replicate `r` of a run seeded with `seed`. Each replicate
/// owns a ChaCha8 stream, so it can be regenerated in isolation.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Error laws used in the simulation studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ErrorDist {
    Normal,
    StudentT {
        df: f64,
    },
    /// Density `a·sᵃ / x^(a+1)` on `x ≥ s`.
    Pareto {
        shape: f64,
        scale: f64,
    },
    /// Generalized Pareto with shape ξ, location, scale σ.
    Gpd {
        shape: f64,
        location: f64,
        scale: f64,
    },
    /// Generalized extreme value with shape ξ, location μ, scale σ.
    Gev {
        shape: f64,
        location: f64,
        scale: f64,
    },
}

impl ErrorDist {
    pub const T3: ErrorDist = ErrorDist::StudentT { df: 3.0 };
    pub const PARETO: ErrorDist = ErrorDist::Pareto {
        shape: 2.0,
        scale: 1.0,
    };
    pub const GPD: ErrorDist = ErrorDist::Gpd {
        shape: 0.2,
        location: 0.0,
        scale: 1.2,
    };
    pub const GEV: ErrorDist = ErrorDist::Gev {
        shape: 0.2,
        location: 3.0,
        scale: 1.5,
    };

    /// The five laws in table order.
    pub const ALL: [ErrorDist; 5] = [
        ErrorDist::Normal,
        ErrorDist::T3,
        ErrorDist::PARETO,
        ErrorDist::GPD,
        ErrorDist::GEV,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ErrorDist::Normal => "normal",
            ErrorDist::StudentT { .. } => "t3",
            ErrorDist::Pareto { .. } => "pareto",
            ErrorDist::Gpd { .. } => "gpd",
            ErrorDist::Gev { .. } => "gev",
        }
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDist::Normal => rng.sample(StandardNormal),
            ErrorDist::StudentT { df } => StudentT::new(df).expect("df > 0").sample(rng),
            ErrorDist::Pareto { shape, scale } => {
                let u: f64 = rng.sample(Open01);
                scale * u.powf(-1.0 / shape)
            }
            ErrorDist::Gpd {
                shape,
                location,
                scale,
            } => {
                let u: f64 = rng.sample(Open01);
                location + scale * ((1.0 - u).powf(-shape) - 1.0) / shape
            }
            ErrorDist::Gev {
                shape,
                location,
                scale,
            } => {
                let u: f64 = rng.sample(Open01);
                location + scale * ((-u.ln()).powf(-shape) - 1.0) / shape
            }
        }
    }
}

impl Distribution<f64> for ErrorDist {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_one(rng)
    }
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ErrorDist::Normal => write!(f, "N(0,1)"),
            ErrorDist::StudentT { df } => write!(f, "t({df})"),
            ErrorDist::Pareto { shape, scale } => write!(f, "pareto({shape},{scale})"),
            ErrorDist::Gpd {
                shape,
                location,
                scale,
            } => {
                write!(f, "gpd({shape},{location},{scale})")
            }
            ErrorDist::Gev {
                shape,
                location,
                scale,
            } => {
                write!(f, "gev({shape},{location},{scale})")
            }
        }
    }
}

impl FromStr for ErrorDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "n" | "gaussian" => Ok(ErrorDist::Normal),
            "t3" | "t" | "student" => Ok(ErrorDist::T3),
            "pareto" => Ok(ErrorDist::PARETO),
            "gpd" => Ok(ErrorDist::GPD),
            "gev" => Ok(ErrorDist::GEV),
            other => match other.strip_prefix('t').and_then(|d| d.parse::<f64>().ok()) {
                Some(df) if df > 0.0 && df.is_finite() => Ok(ErrorDist::StudentT { df }),
                _ => Err(Error::UnsupportedDistribution(other.to_string())),
            },
        }
    }
}

/// `n` i.i.d. draws.
pub fn gen_errors<R: Rng + ?Sized>(dist: ErrorDist, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| dist.sample_one(rng)).collect()
}

/// Lower Cholesky factor of the AR(1) correlation `ρ^|a−b|`.
pub fn ar1_cholesky(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    let sigma = DMatrix::from_fn(p, p, |a, b| rho.powi(a.abs_diff(b) as i32));
    sigma
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::FactorizationFailure)
}

/// Rows `o ~ N_p(μ, ρ^|a−b|)`, before the softmax.
pub fn gen_log_normal_scores<R: Rng + ?Sized>(
    n: usize,
    mu: &[f64],
    rho: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!("ρ = {rho} outside [0, 1)")));
    }
    let p = mu.len();
    let l = ar1_cholesky(p, rho)?;
    let mut o = DMatrix::zeros(n, p);
    let mut g = DVector::zeros(p);
    for i in 0..n {
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let row = &l * &g;
        for j in 0..p {
            o[(i, j)] = mu[j] + row[j];
        }
    }
    Ok(o)
}

/// Logistic-normal compositions: `x_ij = exp(o_ij) / Σ_k exp(o_ik)`.
pub fn gen_covariates<R: Rng + ?Sized>(
    n: usize,
    mu: &[f64],
    rho: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let mut x = gen_log_normal_scores(n, mu, rho, rng)?;
    for mut row in x.row_iter_mut() {
        let top = row.max();
        row.apply(|v| *v = (*v - top).exp());
        let s = row.sum();
        row /= s;
    }
    Ok(x)
}

/// `Y = (log X)·β + ε`.
pub fn gen_response(x: &DMatrix<f64>, beta: &[f64], errors: &[f64]) -> Result<DVector<f64>> {
    if x.ncols() != beta.len() || x.nrows() != errors.len() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}×{}, β has {} entries, ε has {}",
            x.nrows(),
            x.ncols(),
            beta.len(),
            errors.len()
        )));
    }
    let sum: f64 = beta.iter().sum();
    if sum.abs() > 1e-10 {
        return Err(Error::InvalidConfig(format!(
            "coefficients sum to {sum}, not 0"
        )));
    }
    let b = DVector::from_column_slice(beta);
    let mut y = x.map(f64::ln) * b;
    for (yi, e) in y.iter_mut().zip(errors) {
        *yi += e;
    }
    Ok(y)
}

/// Least squares `min ‖Yc − Zβ‖²`, subject to `Σβ = 0` when the design
/// is zero-sum, via the bordered normal equations.
pub fn fit_constrained_ls(design: &LogContrastDesign) -> Result<Vec<f64>> {
    let p = design.p();
    if p == 0 || design.n() == 0 {
        return Err(Error::EmptyDesign);
    }
    let gram = design.z.transpose() * &design.z;
    let zty = design.z.transpose() * &design.yc;
    let extra = usize::from(design.zero_sum);
    let size = p + extra;

    let solve = |jitter: f64| -> Option<DVector<f64>> {
        let mut kkt = DMatrix::zeros(size, size);
        kkt.view_mut((0, 0), (p, p)).copy_from(&gram);
        for j in 0..p {
            kkt[(j, j)] += jitter;
        }
        let mut rhs = DVector::zeros(size);
        rhs.rows_mut(0, p).copy_from(&zty);
        if design.zero_sum {
            for j in 0..p {
                kkt[(p, j)] = 1.0;
                kkt[(j, p)] = 1.0;
            }
        }
        let lu = kkt.clone().lu();
        if !lu.is_invertible() {
            return None;
        }
        let x = lu.solve(&rhs)?;
        let scale = 1.0 + rhs.amax() + kkt.amax() * x.amax();
        let ok = x.iter().all(|v| v.is_finite()) && (&kkt * &x - &rhs).amax() <= 1e-9 * scale;
        ok.then_some(x)
    };

    let x = match solve(0.0) {
        Some(x) => x,
        None => {
            let jitter = 1e-10 * gram.trace().max(f64::MIN_POSITIVE) / p as f64;
            solve(jitter).ok_or(Error::SingularSystem)?
        }
    };
    let mut beta: Vec<f64> = x.rows(0, p).iter().copied().collect();
    if design.zero_sum {
        // remove rounding drift off the constraint plane
        let drift = beta.iter().sum::<f64>() / p as f64;
        beta.iter_mut().for_each(|b| *b -= drift);
    }
    Ok(beta)
}

/// Everything needed to regenerate a simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub p: usize,
    pub mu: Vec<f64>,
    pub rho: f64,
    pub beta_true: Vec<f64>,
    pub error_dist: ErrorDist,
    pub replicates: usize,
    pub seed: u64,
    pub tau: f64,
    pub grid: GridSpec,
}

fn example_mu(p: usize, leading: usize) -> Vec<f64> {
    (0..p)
        .map(|j| {
            if j < leading {
                (0.5 * p as f64).ln()
            } else {
                0.0
            }
        })
        .collect()
}

impl SimulationConfig {
    /// First study: p = 6, three shifted means, ρ = 0.2.
    pub fn example1(n: usize, error_dist: ErrorDist, replicates: usize, seed: u64) -> Self {
        Self {
            n,
            p: 6,
            mu: example_mu(6, 3),
            rho: 0.2,
            beta_true: EXAMPLE1_BETA.to_vec(),
            error_dist,
            replicates,
            seed,
            tau: 0.5,
            grid: GridSpec::default(),
        }
    }

    /// Second study: sparse β, five shifted means, ρ = 0.2.
    pub fn example2(
        n: usize,
        p: usize,
        error_dist: ErrorDist,
        replicates: usize,
        seed: u64,
    ) -> Self {
        let mut beta_true = vec![0.0; p];
        let head = EXAMPLE2_BETA_HEAD.len().min(p);
        beta_true[..head].copy_from_slice(&EXAMPLE2_BETA_HEAD[..head]);
        Self {
            n,
            p,
            mu: example_mu(p, 5),
            rho: 0.2,
            beta_true,
            error_dist,
            replicates,
            seed,
            tau: 0.5,
            grid: GridSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("n = {} is too small", self.n)));
        }
        if self.mu.len() != self.p || self.beta_true.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "p = {}, μ has {}, β has {}",
                self.p,
                self.mu.len(),
                self.beta_true.len()
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "ρ = {} outside [0, 1)",
                self.rho
            )));
        }
        let s: f64 = self.beta_true.iter().sum();
        if s.abs() > 1e-10 {
            return Err(Error::InvalidConfig(format!(
                "true coefficients sum to {s}"
            )));
        }
        crate::model::validate_tau(self.tau)
    }

    /// Dataset of replicate `r`.
    pub fn replicate(&self, r: usize) -> Result<CompositionalDataset> {
        let mut rng = replicate_rng(self.seed, r as u64);
        let x = gen_covariates(self.n, &self.mu, self.rho, &mut rng)?;
        let eps = gen_errors(self.error_dist, self.n, &mut rng);
        let y = gen_response(&x, &self.beta_true, &eps)?;
        CompositionalDataset::new(x, y)
    }
}

/// Selection tallies; counts for one replicate, averages in a report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionCounts {
    /// True nonzeros estimated nonzero.
    pub tp: f64,
    /// True zeros estimated zero.
    pub tn: f64,
    /// True zeros estimated nonzero.
    pub fp: f64,
    /// True nonzeros estimated zero.
    #[serde(rename = "fn")]
    pub fn_: f64,
}

pub fn count_selection(beta_hat: &[f64], beta_true: &[f64], zero_tol: f64) -> SelectionCounts {
    let mut c = SelectionCounts::default();
    for (b, t) in beta_hat.iter().zip(beta_true) {
        let kept = b.abs() > zero_tol;
        match (*t != 0.0, kept) {
            (true, true) => c.tp += 1.0,
            (true, false) => c.fn_ += 1.0,
            (false, true) => c.fp += 1.0,
            (false, false) => c.tn += 1.0,
        }
    }
    c
}

/// Averaged accuracy (and, for selection runs, support recovery) of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub dist: String,
    pub n: usize,
    pub p: usize,
    pub replicates: usize,
    /// Mean absolute error per coefficient.
    pub b: Vec<f64>,
    /// Mean total absolute error.
    pub l1: f64,
    pub selection: Option<SelectionCounts>,
}

impl MetricsReport {
    /// Average per-replicate estimates against `beta_true`, summing in index order.
    pub fn aggregate(
        method: &str,
        config: &SimulationConfig,
        estimates: &[Vec<f64>],
        with_selection: bool,
    ) -> Self {
        let p = config.p;
        let reps = estimates.len() as f64;
        let mut b = vec![0.0; p];
        let mut sel = SelectionCounts::default();
        for est in estimates {
            for j in 0..p {
                b[j] += (est[j] - config.beta_true[j]).abs();
            }
            if with_selection {
                let c = count_selection(est, &config.beta_true, ZERO_TOL);
                sel.tp += c.tp;
                sel.tn += c.tn;
                sel.fp += c.fp;
                sel.fn_ += c.fn_;
            }
        }
        b.iter_mut().for_each(|v| *v /= reps);
        let l1 = b.iter().sum();
        let selection = with_selection.then(|| SelectionCounts {
            tp: sel.tp / reps,
            tn: sel.tn / reps,
            fp: sel.fp / reps,
            fn_: sel.fn_ / reps,
        });
        Self {
            method: method.to_string(),
            dist: config.error_dist.to_string(),
            n: config.n,
            p,
            replicates: estimates.len(),
            b,
            l1,
            selection,
        }
    }
}

/// Mean regression and quantile regression on the same replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Report {
    pub mr: MetricsReport,
    pub qr: MetricsReport,
}

/// Constrained least squares and unpenalized median regression per replicate.
pub fn run_example1(config: &SimulationConfig) -> Result<Example1Report> {
    config.validate()?;
    let pairs = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let design = log_contrast_design(&config.replicate(r)?);
            let mr = fit_constrained_ls(&design)?;
            let qr = fit_qr(&design, config.tau)?.beta;
            Ok((mr, qr))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mr, qr): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok(Example1Report {
        mr: MetricsReport::aggregate("MR", config, &mr, false),
        qr: MetricsReport::aggregate("QR", config, &qr, false),
    })
}

/// Adaptive-LASSO median regression with BIC tuning per replicate.
pub fn run_example2(config: &SimulationConfig) -> Result<MetricsReport> {
    config.validate()?;
    let estimates = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let design = log_contrast_design(&config.replicate(r)?);
            Ok(fit_adaptive_lasso(&design, config.tau, &config.grid)?
                .fit
                .beta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::aggregate("QR-ALA", config, &estimates, true))
}
