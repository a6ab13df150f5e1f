//! Linear discriminant analysis on the `g` features most correlated with
//! the class label.

use alloc::vec;
use alloc::vec::Vec;
use libm::log;
use serde::{Deserialize, Serialize};

use super::{abs_correlations, column_moments, require_binary, top_indices, LdaOutput};
use crate::error::Result;
use crate::linalg::{dot, symmetric_eigenvalues, Cholesky, Matrix};

/// Pooled covariance condition number above which a ridge is added.
pub const MAX_CONDITION: f64 = 1e10;
/// Ridge size relative to `trace / g`.
pub const RIDGE_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub n_features: usize,
    pub selected: Vec<usize>,
    /// Class means on the selected features, raw units.
    pub mean0: Vec<f64>,
    pub mean1: Vec<f64>,
    /// Discriminant weights and offset in raw units: score = x.w + offset.
    pub weights: Vec<f64>,
    pub offset: f64,
    pub prior_log_odds: f64,
    pub ridge_added: bool,
    pub output: LdaOutput,
}

impl LdaModel {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.selected
            .iter()
            .zip(&self.weights)
            .map(|(&j, w)| row[j] * w)
            .sum::<f64>()
            + self.offset
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let s = self.score(x.row(i));
                match self.output {
                    LdaOutput::Indicator => f64::from(u8::from(s > 0.0)),
                    LdaOutput::Score => s,
                }
            })
            .collect()
    }
}

pub fn fit_lda_top_g(x: &Matrix, y: &[f64], g: usize, output: LdaOutput) -> Result<LdaModel> {
    let (n0, n1) = require_binary(y)?;
    let n = y.len();
    let selected = top_indices(&abs_correlations(x, y), g);
    let xs = x.select_cols(&selected);
    let (mu, sd) = column_moments(&xs);
    let z = Matrix::from_fn(n, g, |i, j| (xs[(i, j)] - mu[j]) / sd[j]);

    let mut m0 = vec![0.0; g];
    let mut m1 = vec![0.0; g];
    for i in 0..n {
        let target = if y[i] == 1.0 { &mut m1 } else { &mut m0 };
        crate::linalg::axpy(1.0, z.row(i), target);
    }
    m0.iter_mut().for_each(|v| *v /= n0 as f64);
    m1.iter_mut().for_each(|v| *v /= n1 as f64);

    let mut cov = Matrix::zeros(g, g);
    for i in 0..n {
        let m = if y[i] == 1.0 { &m1 } else { &m0 };
        let d: Vec<f64> = z.row(i).iter().zip(m).map(|(a, b)| a - b).collect();
        for a in 0..g {
            for b in a..g {
                cov[(a, b)] += d[a] * d[b];
            }
        }
    }
    let dof = (n.saturating_sub(2)).max(1) as f64;
    for a in 0..g {
        for b in a..g {
            cov[(a, b)] /= dof;
            cov[(b, a)] = cov[(a, b)];
        }
    }

    let ev = symmetric_eigenvalues(&cov);
    let (lo, hi) = (ev[0], ev[g - 1]);
    let ridge_added = !(lo > 0.0) || hi / lo > MAX_CONDITION;
    if ridge_added {
        let eps = RIDGE_SCALE * cov.trace().max(f64::MIN_POSITIVE) / g as f64;
        for a in 0..g {
            cov[(a, a)] += eps;
        }
    }
    let diff: Vec<f64> = m1.iter().zip(&m0).map(|(a, b)| a - b).collect();
    let w_std = Cholesky::new(&cov)?.solve(&diff);
    let mid: Vec<f64> = m1.iter().zip(&m0).map(|(a, b)| 0.5 * (a + b)).collect();
    let prior_log_odds = log(n1 as f64 / n0 as f64);
    let offset_std = -dot(&w_std, &mid) + prior_log_odds;

    // Back to raw units: z_j = (x_j - mu_j) / sd_j.
    let weights: Vec<f64> = w_std.iter().zip(&sd).map(|(w, s)| w / s).collect();
    let offset = offset_std - weights.iter().zip(&mu).map(|(w, m)| w * m).sum::<f64>();
    let unstd = |m: &[f64]| -> Vec<f64> {
        m.iter()
            .enumerate()
            .map(|(j, v)| v * sd[j] + mu[j])
            .collect()
    };

    Ok(LdaModel {
        n_features: x.ncols(),
        mean0: unstd(&m0),
        mean1: unstd(&m1),
        selected,
        weights,
        offset,
        prior_log_odds,
        ridge_added,
        output,
    })
}
