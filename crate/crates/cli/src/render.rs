//! Aligned plain-text tables for stdout.

use std::fmt::Write;

use coqr::eval::ApplicationSummary;
use coqr::sim::MetricsReport;

use crate::commands::FitRecord;

pub fn fit_table(r: &FitRecord) -> String {
    let mut s = String::new();
    let width = r
        .covariates
        .iter()
        .map(String::len)
        .max()
        .unwrap_or(0)
        .max(9);
    writeln!(
        s,
        "{:<width$}  {:>12}  {:>12}",
        "covariate", "beta", "weight"
    )
    .unwrap();
    for ((name, b), w) in r.covariates.iter().zip(&r.beta).zip(&r.weights) {
        writeln!(s, "{name:<width$}  {b:>12.6}  {w:>12.4}").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(
        s,
        "n = {}, p = {}, tau = {}, tuning = {}",
        r.n, r.p, r.tau, r.tuning
    )
    .unwrap();
    writeln!(s, "lambda = {:.6e}, df = {}", r.lambda, r.df).unwrap();
    writeln!(
        s,
        "objective = {:.8}, penalty = {:.8}",
        r.objective, r.penalty
    )
    .unwrap();
    writeln!(s, "sum(beta) = {:.3e}", r.beta.iter().sum::<f64>()).unwrap();
    s
}

/// Per-coefficient mean absolute errors plus L1.
pub fn coefficient_table(reports: &[MetricsReport]) -> String {
    let mut s = String::new();
    let p = reports.first().map_or(0, |r| r.p);
    write!(s, "{:<14} {:>5} {:<7}", "dist", "n", "method").unwrap();
    for j in 1..=p {
        write!(s, " {:>7}", format!("b{j}")).unwrap();
    }
    writeln!(s, " {:>7}", "L1").unwrap();
    for r in reports {
        write!(s, "{:<14} {:>5} {:<7}", r.dist, r.n, r.method).unwrap();
        for b in &r.b {
            write!(s, " {b:>7.3}").unwrap();
        }
        writeln!(s, " {:>7.3}", r.l1).unwrap();
    }
    s
}

pub fn selection_table(reports: &[MetricsReport]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:<14} {:>10} {:<7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "dist", "(n,p)", "method", "L1", "TP", "TN", "FP", "FN"
    )
    .unwrap();
    for r in reports {
        let c = r.selection.unwrap_or_default();
        writeln!(
            s,
            "{:<14} {:>10} {:<7} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            r.dist,
            format!("({},{})", r.n, r.p),
            r.method,
            r.l1,
            c.tp,
            c.tn,
            c.fp,
            c.fn_
        )
        .unwrap();
    }
    s
}

pub fn nmse_table(summary: &ApplicationSummary) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "n = {}, p = {}, tau = {}, repeats = {}, seed = {}",
        summary.n, summary.p, summary.config.tau, summary.config.repeats, summary.config.seed
    )
    .unwrap();
    writeln!(s, "{:<14} {:>10} {:>10}", "arm", "QR-ALA", "LS").unwrap();
    for a in &summary.arms {
        let name = serde_json::to_value(a.arm)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string));
        writeln!(
            s,
            "{:<14} {:>10.4} {:>10.4}",
            name.unwrap_or_default(),
            a.qr_ala_mean,
            a.ls_mean
        )
        .unwrap();
    }
    s
}
