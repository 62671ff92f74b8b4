use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use coqr::eval::{cv_select_lambda, read_csv, run_application, ApplicationConfig, Arm, Table};
use coqr::sim::{
    gen_covariates, gen_errors, gen_response, replicate_rng, run_example1, run_example2, ErrorDist,
    MetricsReport, SimulationConfig,
};
use coqr::tuning::{DEFAULT_KAPPA, ZERO_TOL};
use coqr::{
    adaptive_weights, fit_adaptive_lasso, fit_penalized, fit_qr, log_contrast_design,
    CompositionalDataset, GridSpec, QuantileFit,
};
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::render;
use crate::{CliError, EvalArgs, FitArgs, SimulateArgs, SynthArgs, SynthKind, Tune};

/// Use the given seed, or derive one from the clock and report it.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let s = (nanos as u64) ^ ((nanos >> 64) as u64);
        eprintln!("seed: {s}");
        s
    })
}

fn write_record<T: Serialize>(path: Option<&Path>, record: &T) -> Result<(), CliError> {
    let Some(path) = path else { return Ok(()) };
    let mut text =
        serde_json::to_string_pretty(record).map_err(|e| CliError::Usage(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Core(coqr::Error::Io(format!("{}: {e}", path.display()))))
}

fn load(path: &Path, response: &str, logit: bool) -> Result<Table, CliError> {
    let table = read_csv(path, response)?;
    Ok(if logit {
        table.logit_response()?
    } else {
        table
    })
}

fn grid(n_lambdas: usize) -> GridSpec {
    GridSpec::with_len(n_lambdas)
}

#[derive(Debug, Serialize)]
pub struct FitRecord {
    pub command: &'static str,
    pub version: &'static str,
    pub data: String,
    pub response: String,
    pub covariates: Vec<String>,
    pub n: usize,
    pub p: usize,
    pub tau: f64,
    /// "none", "fixed", "bic" or "cv".
    pub tuning: &'static str,
    pub seed: Option<u64>,
    pub lambda: f64,
    pub beta: Vec<f64>,
    /// Location on the centered scale.
    pub intercept: f64,
    /// Means of the log covariates and of the response.
    pub log_means: Vec<f64>,
    pub response_mean: f64,
    pub weights: Vec<f64>,
    /// Check loss of the fit on the data.
    pub objective: f64,
    pub penalty: f64,
    pub df: usize,
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let table = load(&args.data, &args.response, args.logit)?;
    let design = log_contrast_design(&CompositionalDataset::from_raw(
        &table.covariates,
        table.response.clone(),
    )?);
    let tau = args.tau;

    let mut seed = None;
    let (tuning, fit): (&'static str, QuantileFit) = match (args.lambda, args.tune) {
        (None, None) => ("none", fit_qr(&design, tau)?),
        (Some(l), _) => {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(CliError::Usage(format!("λ must be nonnegative, got {l}")));
            }
            let w = adaptive_weights(&fit_qr(&design, tau)?.beta, DEFAULT_KAPPA);
            ("fixed", fit_penalized(&design, tau, l, &w)?)
        }
        (None, Some(Tune::Bic)) => (
            "bic",
            fit_adaptive_lasso(&design, tau, &grid(args.n_lambdas))?.fit,
        ),
        (None, Some(Tune::Cv)) => {
            let s = resolve_seed(args.seed);
            seed = Some(s);
            let mut rng = replicate_rng(s, 0);
            let cv = cv_select_lambda(&design, tau, args.folds, &grid(args.n_lambdas), &mut rng)?;
            let w = adaptive_weights(&fit_qr(&design, tau)?.beta, DEFAULT_KAPPA);
            ("cv", fit_penalized(&design, tau, cv.lambda_opt(), &w)?)
        }
    };

    let record = FitRecord {
        command: "fit",
        version: env!("CARGO_PKG_VERSION"),
        data: args.data.display().to_string(),
        response: table.response_name.clone(),
        covariates: table.covariate_names.clone(),
        n: design.n(),
        p: design.p(),
        tau,
        tuning,
        seed,
        lambda: fit.lambda,
        df: fit.df(ZERO_TOL),
        beta: fit.beta,
        intercept: fit.intercept,
        log_means: design.z_means.iter().copied().collect(),
        response_mean: design.y_mean,
        weights: fit.weights,
        objective: fit.objective,
        penalty: fit.penalty,
    };
    print!("{}", render::fit_table(&record));
    write_record(args.output.as_deref(), &record)
}

#[derive(Debug, Serialize)]
pub struct SimulationRecord {
    pub command: &'static str,
    pub version: &'static str,
    pub example: u8,
    pub dist: String,
    pub tau: f64,
    pub replicates: usize,
    pub seed: u64,
    pub reports: Vec<MetricsReport>,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let dist: ErrorDist = args.dist.parse()?;
    if args.replicates == 0 {
        return Err(CliError::Usage("--replicates must be at least 1".into()));
    }
    let sizes = match (args.example, args.n.is_empty()) {
        (1, true) => vec![50, 100, 200, 500],
        (_, true) => return Err(CliError::Usage("--n is required for example 2".into())),
        _ => args.n.clone(),
    };
    let seed = resolve_seed(args.seed);
    let mut reports = Vec::new();
    for &n in &sizes {
        if args.example == 1 {
            let mut config = SimulationConfig::example1(n, dist, args.replicates, seed);
            config.tau = args.tau;
            let r = run_example1(&config)?;
            reports.push(r.mr);
            reports.push(r.qr);
        } else {
            let mut config = SimulationConfig::example2(n, args.p, dist, args.replicates, seed);
            config.tau = args.tau;
            reports.push(run_example2(&config)?);
        }
    }
    let record = SimulationRecord {
        command: "simulate",
        version: env!("CARGO_PKG_VERSION"),
        example: args.example,
        dist: dist.to_string(),
        tau: args.tau,
        replicates: args.replicates,
        seed,
        reports,
    };
    let text = if args.example == 1 {
        render::coefficient_table(&record.reports)
    } else {
        render::selection_table(&record.reports)
    };
    print!("{text}");
    write_record(args.output.as_deref(), &record)
}

#[derive(Debug, Serialize)]
pub struct EvalRecord {
    pub command: &'static str,
    pub version: &'static str,
    pub data: String,
    pub summary: coqr::eval::ApplicationSummary,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let table = load(&args.data, &args.response, args.logit)?;
    let arms = match (args.compositional, args.original) {
        (true, false) => vec![Arm::Compositional],
        (false, true) => vec![Arm::Original],
        _ => vec![Arm::Compositional, Arm::Original],
    };
    let config = ApplicationConfig {
        tau: args.tau,
        repeats: args.repeats,
        cv_folds: args.folds,
        grid: grid(args.n_lambdas),
        arms,
        seed: resolve_seed(args.seed),
        ..ApplicationConfig::default()
    };
    let summary = run_application(&table, &config)?;
    print!("{}", render::nmse_table(&summary));
    let record = EvalRecord {
        command: "eval",
        version: env!("CARGO_PKG_VERSION"),
        data: args.data.display().to_string(),
        summary,
    };
    write_record(args.output.as_deref(), &record)
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    if args.p < 8 {
        return Err(CliError::Usage(format!(
            "--p must be at least 8, got {}",
            args.p
        )));
    }
    let dist: ErrorDist = args.dist.parse()?;
    let seed = resolve_seed(args.seed);
    let config = SimulationConfig::example2(args.n, args.p, dist, 1, seed);
    config.validate()?;

    let mut rng = replicate_rng(seed, 0);
    let x = gen_covariates(args.n, &config.mu, config.rho, &mut rng)?;
    let eps = match args.kind {
        SynthKind::Noiseless => vec![0.0; args.n],
        SynthKind::Noisy => gen_errors(dist, args.n, &mut rng),
    };
    let y = gen_response(&x, &config.beta_true, &eps)?;
    // undo the closure with arbitrary row totals
    let totals: Vec<f64> = (0..args.n).map(|_| rng.random_range(50.0..150.0)).collect();
    let raw = DMatrix::from_fn(args.n, args.p, |i, j| x[(i, j)] * totals[i]);

    let mut csv = String::from("y");
    for j in 1..=args.p {
        write!(csv, ",x{j}").unwrap();
    }
    csv.push('\n');
    for i in 0..args.n {
        write!(csv, "{}", y[i]).unwrap();
        for j in 0..args.p {
            write!(csv, ",{}", raw[(i, j)]).unwrap();
        }
        csv.push('\n');
    }
    std::fs::write(&args.output, csv)
        .map_err(|e| CliError::Core(coqr::Error::Io(format!("{}: {e}", args.output.display()))))?;
    println!(
        "wrote {} rows × {} parts to {}",
        args.n,
        args.p,
        args.output.display()
    );
    println!("beta: {:?}", config.beta_true);
    Ok(())
}
