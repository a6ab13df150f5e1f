//! L1-penalized logistic regression tuned to an exact number of genes, with
//! the number chosen by inner cross-validation.
//!
//! The penalized fit is a proximal Newton (IRLS outer loop, coordinate
//! descent inner loop) on standardized features with an unpenalized
//! intercept. The penalty is bisected on a log scale until the active set
//! has the requested size.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use libm::{exp, fabs, log, sqrt};
use serde::{Deserialize, Serialize};

use super::{column_moments, require_binary};
use crate::data::make_folds;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeedStream;

const MAX_OUTER: usize = 100;
const MAX_SWEEPS: usize = 500;
const BISECTION_STEPS: usize = 50;
const DIVERGED: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlrModel {
    pub n_features: usize,
    pub selected: Vec<usize>,
    /// Raw-unit coefficients on `selected`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Grid entry chosen by inner CV.
    pub sparsity: usize,
    /// Inner-CV misclassification count per grid entry (`None` = failed).
    pub cv_errors: Vec<Option<usize>>,
}

impl PlrModel {
    pub fn probability(&self, row: &[f64]) -> f64 {
        let eta = self.intercept
            + self
                .selected
                .iter()
                .zip(&self.coefficients)
                .map(|(&j, b)| row[j] * b)
                .sum::<f64>();
        sigmoid(eta)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| f64::from(u8::from(self.probability(x.row(i)) > 0.5)))
            .collect()
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + exp(-eta))
    } else {
        let e = exp(eta);
        e / (1.0 + e)
    }
}

/// Standardized design kept column-major for coordinate descent.
struct Standardized {
    cols: Vec<Vec<f64>>,
    mean: Vec<f64>,
    sd: Vec<f64>,
    n: usize,
}

impl Standardized {
    fn new(x: &Matrix) -> Self {
        let (mean, sd) = column_moments(x);
        let n = x.nrows();
        let cols = (0..x.ncols())
            .map(|j| (0..n).map(|i| (x[(i, j)] - mean[j]) / sd[j]).collect())
            .collect();
        Self { cols, mean, sd, n }
    }

    fn p(&self) -> usize {
        self.cols.len()
    }
}

#[derive(Clone)]
struct Solution {
    b0: f64,
    beta: Vec<f64>,
}

impl Solution {
    fn active(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

fn soft(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Minimizes `-loglik / n + lambda * |beta|_1` starting from `sol`.
fn solve_penalized(d: &Standardized, y: &[f64], lambda: f64, sol: &mut Solution) -> Result<()> {
    let n = d.n;
    let nf = n as f64;
    let mut eta = vec![0.0; n];
    for outer in 0..MAX_OUTER {
        for i in 0..n {
            eta[i] = sol.b0;
        }
        for (j, b) in sol.beta.iter().enumerate() {
            if *b != 0.0 {
                crate::linalg::axpy(*b, &d.cols[j], &mut eta);
            }
        }
        let mut w = vec![0.0; n];
        let mut r = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(eta[i]);
            w[i] = (p * (1.0 - p)).max(1e-5);
            r[i] = (y[i] - p) / w[i];
        }
        let xwx: Vec<f64> = d
            .cols
            .iter()
            .map(|c| c.iter().zip(&w).map(|(z, wi)| wi * z * z).sum::<f64>() / nf)
            .collect();
        let wsum: f64 = w.iter().sum();
        let before = sol.clone();

        let mut full_sweep = true;
        for _sweep in 0..MAX_SWEEPS {
            let mut max_change = 0.0f64;
            let db0 = r.iter().zip(&w).map(|(ri, wi)| ri * wi).sum::<f64>() / wsum;
            if db0 != 0.0 {
                sol.b0 += db0;
                r.iter_mut().for_each(|ri| *ri -= db0);
                max_change = max_change.max(fabs(db0));
            }
            for j in 0..d.p() {
                if !full_sweep && sol.beta[j] == 0.0 {
                    continue;
                }
                let col = &d.cols[j];
                let grad = col
                    .iter()
                    .zip(&w)
                    .zip(&r)
                    .map(|((z, wi), ri)| z * wi * ri)
                    .sum::<f64>()
                    / nf;
                let old = sol.beta[j];
                let new = soft(grad + xwx[j] * old, lambda) / xwx[j];
                if new != old {
                    let delta = new - old;
                    for (ri, z) in r.iter_mut().zip(col) {
                        *ri -= delta * z;
                    }
                    sol.beta[j] = new;
                    max_change = max_change.max(fabs(delta) * sqrt(xwx[j]));
                }
            }
            if max_change < 1e-8 {
                if full_sweep {
                    break;
                }
                full_sweep = true;
            } else {
                full_sweep = false;
            }
        }

        if !sol.b0.is_finite()
            || sol
                .beta
                .iter()
                .any(|b| !b.is_finite() || fabs(*b) > DIVERGED)
        {
            return Err(Error::NoConvergence(format!(
                "penalized logistic diverged at lambda = {lambda:e}"
            )));
        }
        let change = sol
            .beta
            .iter()
            .zip(&before.beta)
            .map(|(a, b)| fabs(a - b))
            .fold(fabs(sol.b0 - before.b0), f64::max);
        if change < 1e-7 && outer > 0 {
            return Ok(());
        }
    }
    Err(Error::NoConvergence(format!(
        "penalized logistic did not converge at lambda = {lambda:e}"
    )))
}

fn lambda_max(d: &Standardized, y: &[f64]) -> f64 {
    let ybar = y.iter().sum::<f64>() / d.n as f64;
    d.cols
        .iter()
        .map(|c| fabs(c.iter().zip(y).map(|(z, yi)| z * (yi - ybar)).sum::<f64>()) / d.n as f64)
        .fold(0.0, f64::max)
}

/// Bisects the penalty until exactly `target` coefficients are nonzero, or
/// returns the nearest count reached (smaller count on ties).
fn fit_at_size(d: &Standardized, y: &[f64], target: usize) -> Result<(Solution, f64)> {
    let ybar = y.iter().sum::<f64>() / d.n as f64;
    let start = Solution {
        b0: log(ybar / (1.0 - ybar)),
        beta: vec![0.0; d.p()],
    };
    let lmax = lambda_max(d, y);
    let (mut lo, mut hi) = (log(lmax * 1e-4), log(lmax));
    let mut best: Option<(usize, usize, Solution, f64)> = None;
    let mut warm = start;
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let lambda = exp(mid);
        let mut sol = warm.clone();
        solve_penalized(d, y, lambda, &mut sol)?;
        let count = sol.active();
        let dist = count.abs_diff(target);
        let better = match &best {
            None => true,
            Some((bd, bc, _, _)) => dist < *bd || (dist == *bd && count < *bc),
        };
        if better {
            best = Some((dist, count, sol.clone(), lambda));
        }
        if count == target {
            break;
        }
        if count > target {
            lo = mid;
        } else {
            hi = mid;
        }
        warm = sol;
    }
    let (_, _, sol, lambda) = best.expect("at least one bisection step");
    Ok((sol, lambda))
}

fn to_model(d: &Standardized, sol: &Solution, lambda: f64, sparsity: usize) -> PlrModel {
    let selected: Vec<usize> = (0..d.p()).filter(|&j| sol.beta[j] != 0.0).collect();
    let coefficients: Vec<f64> = selected.iter().map(|&j| sol.beta[j] / d.sd[j]).collect();
    let intercept = sol.b0
        - selected
            .iter()
            .zip(&coefficients)
            .map(|(&j, b)| b * d.mean[j])
            .sum::<f64>();
    PlrModel {
        n_features: d.p(),
        selected,
        coefficients,
        intercept,
        lambda,
        sparsity,
        cv_errors: Vec::new(),
    }
}

/// L1-logistic fit with the penalty tuned to `size` nonzero coefficients.
pub fn fit_l1_logistic_at_size(x: &Matrix, y: &[f64], size: usize) -> Result<PlrModel> {
    require_binary(y)?;
    if size == 0 || size > x.ncols() {
        return Err(Error::param(format!(
            "target size {size} outside 1..={}",
            x.ncols()
        )));
    }
    let d = Standardized::new(x);
    let (sol, lambda) = fit_at_size(&d, y, size)?;
    Ok(to_model(&d, &sol, lambda, size))
}

pub fn fit_plr_cv(
    x: &Matrix,
    y: &[f64],
    grid: &[usize],
    inner_folds: usize,
    stream: SeedStream,
) -> Result<PlrModel> {
    require_binary(y)?;
    let n = y.len();
    let folds = make_folds(
        n,
        inner_folds,
        Some(y),
        stream.substream("plr_inner_folds", 0),
    )?;
    let mut errors: Vec<Option<usize>> = vec![Some(0); grid.len()];
    for f in 0..inner_folds {
        let train = folds.training(f);
        let test = folds.members(f);
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let xv = x.select_rows(&test);
        let d = Standardized::new(&xt);
        for (g, &s) in grid.iter().enumerate() {
            if errors[g].is_none() {
                continue;
            }
            match fit_at_size(&d, &yt, s) {
                Ok((sol, lambda)) => {
                    let m = to_model(&d, &sol, lambda, s);
                    let wrong = m
                        .predict(&xv)
                        .iter()
                        .zip(&test)
                        .filter(|(p, &i)| **p != y[i])
                        .count();
                    errors[g] = errors[g].map(|e| e + wrong);
                }
                Err(_) => errors[g] = None,
            }
        }
    }
    let winner = grid
        .iter()
        .zip(&errors)
        .filter_map(|(&s, e)| e.map(|e| (e, s)))
        .min()
        .ok_or_else(|| Error::NoConvergence("every sparsity grid point failed".into()))?
        .1;
    let d = Standardized::new(x);
    let (sol, lambda) = fit_at_size(&d, y, winner)?;
    let mut model = to_model(&d, &sol, lambda, winner);
    model.cv_errors = errors;
    Ok(model)
}
