//! Least angle regression, stopped when exactly `l` variables are active.
//!
//! The design is centered (the model carries an intercept) and columns keep
//! their scale. Variables enter in order of maximal absolute correlation
//! with the current residual; simultaneous entries go to the lower column
//! index. After `l` steps the coefficients sit at the knot where the next
//! variable would join, or at the least-squares fit on the active set when
//! no further variable can enter.

use alloc::vec;
use alloc::vec::Vec;
use libm::{fabs, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub intercept: f64,
    /// Full-length coefficient vector (zeros outside the active set).
    pub coefficients: Vec<f64>,
    /// Active variables in entry order.
    pub active: Vec<usize>,
}

impl LassoModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let r = x.row(i);
                self.intercept
                    + self
                        .active
                        .iter()
                        .map(|&j| r[j] * self.coefficients[j])
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn nonzero(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }
}

/// Relative tolerance for treating two absolute correlations as tied.
const TIE_TOL: f64 = 1e-12;

pub fn fit_lasso_l(x: &Matrix, y: &[f64], l: usize) -> Result<LassoModel> {
    let (n, p) = (x.nrows(), x.ncols());
    if l == 0 || l > p || l + 1 > n {
        return Err(Error::param(alloc::format!(
            "lasso_l needs 1 <= l <= min(p, n - 1), got l = {l}, p = {p}, n = {n}"
        )));
    }
    let (xc, xmean) = center_columns(x);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let resid0: Vec<f64> = y.iter().map(|v| v - ybar).collect();

    let mut beta = vec![0.0; p];
    let mut active: Vec<usize> = Vec::with_capacity(l);
    let mut in_active = vec![false; p];
    let mut resid = resid0;
    let max_active = p.min(n - 1);

    let mut corr = xc.t_mul_vec(&resid);
    let c_max = corr.iter().fold(0.0f64, |m, c| m.max(fabs(*c)));
    if c_max <= 1e-14 * (1.0 + sqrt(dot(&resid, &resid))) {
        // Degenerate response: nothing can enter.
        return Ok(LassoModel {
            intercept: ybar,
            coefficients: beta,
            active,
        });
    }
    let first = (0..p)
        .find(|&j| fabs(corr[j]) >= c_max * (1.0 - TIE_TOL))
        .unwrap_or(0);
    active.push(first);
    in_active[first] = true;

    for step in 1..=l {
        let c_big = active.iter().fold(0.0f64, |m, &j| m.max(fabs(corr[j])));
        let signs: Vec<f64> = active
            .iter()
            .map(|&j| if corr[j] >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let k = active.len();

        // Gram of the signed active columns.
        let mut g = Matrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let mut s = 0.0;
                for i in 0..n {
                    let r = xc.row(i);
                    s += r[active[a]] * r[active[b]];
                }
                s *= signs[a] * signs[b];
                g[(a, b)] = s;
                g[(b, a)] = s;
            }
        }
        let chol = Cholesky::new(&g)?;
        let ginv1 = chol.solve(&vec![1.0; k]);
        let denom: f64 = ginv1.iter().sum();
        if !(denom > 0.0) {
            return Err(Error::NoConvergence(
                "lars: non-positive equiangular norm".into(),
            ));
        }
        let a_norm = 1.0 / sqrt(denom);
        let w: Vec<f64> = ginv1.iter().map(|v| v * a_norm).collect();

        // Equiangular direction u = X_A diag(s) w.
        let mut u = vec![0.0; n];
        for i in 0..n {
            let r = xc.row(i);
            u[i] = (0..k).map(|a| r[active[a]] * signs[a] * w[a]).sum();
        }
        let a_vec = xc.t_mul_vec(&u);

        // Step to the next entry knot, or all the way to the least-squares
        // fit on the active set when nothing else can enter.
        let full_step = c_big / a_norm;
        let mut best: Option<(f64, usize)> = None;
        if active.len() < max_active {
            for j in (0..p).filter(|&j| !in_active[j]) {
                let gj = [
                    (c_big - corr[j]) / (a_norm - a_vec[j]),
                    (c_big + corr[j]) / (a_norm + a_vec[j]),
                ]
                .into_iter()
                .filter(|c| *c > 1e-12 * full_step)
                .fold(f64::INFINITY, f64::min);
                if gj > full_step {
                    continue;
                }
                match best {
                    Some((gb, _)) if gj >= gb * (1.0 - TIE_TOL) => {}
                    _ => best = Some((gj, j)),
                }
            }
        }
        let gamma = best.map_or(full_step, |b| b.0);

        for (a, &j) in active.iter().enumerate() {
            beta[j] += gamma * signs[a] * w[a];
        }
        for i in 0..n {
            resid[i] -= gamma * u[i];
        }
        for j in 0..p {
            corr[j] -= gamma * a_vec[j];
        }

        if step == l {
            break;
        }
        match best {
            Some((_, j)) => {
                active.push(j);
                in_active[j] = true;
            }
            None => break,
        }
    }

    let intercept = ybar - dot(&xmean, &beta);
    Ok(LassoModel {
        intercept,
        coefficients: beta,
        active,
    })
}

pub(crate) fn center_columns(x: &Matrix) -> (Matrix, Vec<f64>) {
    let (n, p) = (x.nrows(), x.ncols());
    let mut mean = vec![0.0; p];
    for i in 0..n {
        crate::linalg::axpy(1.0, x.row(i), &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut xc = x.clone();
    for i in 0..n {
        for (v, m) in xc.row_mut(i).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    (xc, mean)
}
