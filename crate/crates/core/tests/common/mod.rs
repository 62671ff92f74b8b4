//! Brute-force references shared by the oracle and acceptance tests. None of
//! this goes through the simplex code.
#![allow(dead_code)]

use coqr::{CompositionalDataset, LogContrastDesign, LpProblem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All `k`-subsets of `0..m` in lexicographic order.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..m {
            cur.push(j);
            go(j + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum cost over every basic feasible solution of a full-row-rank problem.
pub fn vertex_enumeration_min(problem: &LpProblem) -> Option<f64> {
    let (k, m) = problem.a_eq.shape();
    let b = DVector::from_column_slice(&problem.b_eq);
    let mut best: Option<f64> = None;
    for cols in subsets(m, k) {
        let basis = problem.a_eq.select_columns(&cols);
        if basis.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(x) = basis.lu().solve(&b) else {
            continue;
        };
        if x.iter().any(|v| *v < -1e-10) {
            continue;
        }
        let cost: f64 = cols
            .iter()
            .zip(x.iter())
            .map(|(&j, v)| problem.cost[j] * v)
            .sum();
        best = Some(best.map_or(cost, |b: f64| b.min(cost)));
    }
    best
}

/// Random feasible, bounded standard-form problem with `k` rows and `m` columns.
pub fn random_bounded_lp(rng: &mut ChaCha8Rng, k: usize, m: usize) -> LpProblem {
    let a = DMatrix::from_fn(k, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    // feasible point with a few zeros
    let x0 = DVector::from_fn(m, |_, _| {
        if rng.random_bool(0.3) {
            0.0
        } else {
            rng.random_range(0.0..2.0)
        }
    });
    let b = &a * &x0;
    // c = Aᵀy + s with s ≥ 0 keeps the dual feasible, so the LP is bounded
    let y = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let s = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.5));
    let c = a.transpose() * y + s;
    LpProblem::new(c.iter().copied().collect(), a, b.iter().copied().collect()).unwrap()
}

pub fn rho(u: f64, tau: f64) -> f64 {
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

pub fn loss(design: &LogContrastDesign, beta: &[f64], c: f64, tau: f64) -> f64 {
    (0..design.n())
        .map(|i| {
            let fit: f64 = (0..design.p()).map(|j| design.z[(i, j)] * beta[j]).sum();
            rho(design.yc[i] - fit - c, tau)
        })
        .sum()
}

/// Best location for fixed slopes: the loss is piecewise linear in `c` with
/// kinks at the partial residuals, so one of them is optimal.
pub fn best_intercept(design: &LogContrastDesign, beta: &[f64], tau: f64) -> (f64, f64) {
    let partial: Vec<f64> = (0..design.n())
        .map(|i| {
            design.yc[i]
                - (0..design.p())
                    .map(|j| design.z[(i, j)] * beta[j])
                    .sum::<f64>()
        })
        .collect();
    partial
        .iter()
        .map(|&c| (c, partial.iter().map(|r| rho(r - c, tau)).sum::<f64>()))
        .fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

/// Unpenalized zero-sum quantile fit by subset interpolation: an optimal
/// vertex interpolates `p − 1` observations (or `p` with an intercept).
/// Returns `(loss, beta, intercept)`.
pub fn qr_subset_oracle(design: &LogContrastDesign, tau: f64) -> (f64, Vec<f64>, f64) {
    let (n, p) = (design.n(), design.p());
    let free = p - 1 + usize::from(design.intercept);
    let size = p + usize::from(design.intercept);
    let mut best = (f64::INFINITY, vec![0.0; p], 0.0);
    for rows in subsets(n, free) {
        let mut a = DMatrix::zeros(size, size);
        let mut rhs = DVector::zeros(size);
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..p {
                a[(r, j)] = design.z[(i, j)];
            }
            if design.intercept {
                a[(r, p)] = 1.0;
            }
            rhs[r] = design.yc[i];
        }
        for j in 0..p {
            a[(free, j)] = 1.0;
        }
        if a.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(sol) = a.lu().solve(&rhs) else {
            continue;
        };
        let beta: Vec<f64> = sol.rows(0, p).iter().copied().collect();
        let c = if design.intercept { sol[p] } else { 0.0 };
        let l = loss(design, &beta, c, tau);
        if l < best.0 {
            best = (l, beta, c);
        }
    }
    best
}

/// Penalized objective for p = 3 over the free pair `(β₁, β₂)`, minimized by
/// a zooming grid search; `β₃ = −β₁ − β₂`.
pub fn penalized_grid_oracle(design: &LogContrastDesign, tau: f64, lambda: f64, w: &[f64]) -> f64 {
    assert_eq!(design.p(), 3);
    let objective = |b1: f64, b2: f64| -> f64 {
        let beta = [b1, b2, -b1 - b2];
        let l = if design.intercept {
            best_intercept(design, &beta, tau).1
        } else {
            loss(design, &beta, 0.0, tau)
        };
        l + lambda * beta.iter().zip(w).map(|(b, w)| w * b.abs()).sum::<f64>()
    };
    let (mut c1, mut c2, mut half) = (0.0, 0.0, 8.0);
    let mut best = objective(0.0, 0.0);
    let steps = 60;
    for _ in 0..12 {
        let h = 2.0 * half / steps as f64;
        let (mut b1, mut b2) = (c1, c2);
        for a in 0..=steps {
            for b in 0..=steps {
                let x = c1 - half + a as f64 * h;
                let y = c2 - half + b as f64 * h;
                let v = objective(x, y);
                if v < best {
                    best = v;
                    b1 = x;
                    b2 = y;
                }
            }
        }
        c1 = b1;
        c2 = b2;
        half = 3.0 * h;
    }
    best
}

/// Small random compositional design.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> LogContrastDesign {
    let raw = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal).exp());
    let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    coqr::log_contrast_design(&CompositionalDataset::from_raw(&raw, y).unwrap())
}
