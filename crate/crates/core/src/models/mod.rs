//! Internal prediction rules fit inside each pre-validation training split.
//!
//! | kind            | output              | features standardized internally |
//! |-----------------|---------------------|----------------------------------|
//! | `ols`           | continuous          | no (no intercept)                |
//! | `lasso_l`       | continuous          | no (centered, with intercept)    |
//! | `lda_top_g`     | 0/1 (or score)      | yes                              |
//! | `corr_centroid` | 0/1                 | yes                              |
//! | `plr_cv`        | 0/1                 | yes                              |
//!
//! Correlation-based selection uses Pearson correlation on centered
//! columns, so selection and every classifier prediction are unchanged when
//! a constant is added to a feature column.

mod centroid;
mod lars;
mod lda;
mod ols;
mod plr;

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeedStream;

pub use centroid::{fit_corr_centroid, CentroidModel};
pub use lars::{fit_lasso_l, LassoModel};
pub use lda::{fit_lda_top_g, LdaModel};
pub use ols::{fit_ols, OlsModel};
pub(crate) use plr::sigmoid;
pub use plr::{fit_l1_logistic_at_size, fit_plr_cv, PlrModel};

/// Whether LDA pre-validates with the class indicator or the raw
/// discriminant score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdaOutput {
    #[default]
    Indicator,
    Score,
}

/// Which internal rule to fit, with its tuning parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InternalModelSpec {
    Ols,
    LassoL {
        l: usize,
    },
    LdaTopG {
        g: usize,
        #[serde(default)]
        output: LdaOutput,
    },
    CorrCentroid {
        m_genes: usize,
        allowed_misclass: usize,
    },
    PlrCv {
        sparsity_grid: Vec<usize>,
        inner_folds: usize,
    },
}

impl InternalModelSpec {
    pub fn lda(g: usize) -> Self {
        Self::LdaTopG {
            g,
            output: LdaOutput::Indicator,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ols => "ols",
            Self::LassoL { .. } => "lasso_l",
            Self::LdaTopG { .. } => "lda_top_g",
            Self::CorrCentroid { .. } => "corr_centroid",
            Self::PlrCv { .. } => "plr_cv",
        }
    }

    /// Classifiers need a 0/1 outcome with both classes in every training set.
    pub fn is_classifier(&self) -> bool {
        !matches!(self, Self::Ols | Self::LassoL { .. })
    }

    /// Checks parameters against the feature count `p` and training size.
    pub fn validate(&self, p: usize, n_train: usize) -> Result<()> {
        match self {
            Self::Ols => {
                if p >= n_train {
                    return Err(Error::param(format!(
                        "ols needs p < n_train, got p = {p}, n_train = {n_train}"
                    )));
                }
            }
            Self::LassoL { l } => {
                if *l == 0 || *l > p || *l + 1 > n_train {
                    return Err(Error::param(format!(
                        "lasso_l needs 1 <= l <= min(p, n_train - 1), got l = {l}, p = {p}, \
                         n_train = {n_train}"
                    )));
                }
            }
            Self::LdaTopG { g, .. } => {
                if *g == 0 || *g > p {
                    return Err(Error::param(format!(
                        "lda_top_g needs 1 <= g <= p, got g = {g}"
                    )));
                }
            }
            Self::CorrCentroid { m_genes, .. } => {
                if *m_genes < 2 || *m_genes > p {
                    return Err(Error::param(format!(
                        "corr_centroid needs 2 <= m_genes <= p, got {m_genes}"
                    )));
                }
            }
            Self::PlrCv {
                sparsity_grid,
                inner_folds,
            } => {
                if sparsity_grid.is_empty() {
                    return Err(Error::param("plr_cv sparsity grid is empty"));
                }
                if let Some(s) = sparsity_grid.iter().find(|&&s| s == 0 || s > p) {
                    return Err(Error::param(format!(
                        "plr_cv grid entry {s} outside 1..={p}"
                    )));
                }
                if *inner_folds < 2 {
                    return Err(Error::param("plr_cv needs inner_folds >= 2"));
                }
            }
        }
        Ok(())
    }

    /// Fits the rule on `(x, y)`. `stream` feeds any internal randomness
    /// (only `plr_cv` uses it, for inner folds).
    pub fn fit(&self, x: &Matrix, y: &[f64], stream: SeedStream) -> Result<FittedInternalModel> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: y.len(),
                context: "training rows",
            });
        }
        self.validate(x.ncols(), y.len())?;
        Ok(match self {
            Self::Ols => FittedInternalModel::Ols(fit_ols(x, y)?),
            Self::LassoL { l } => FittedInternalModel::Lasso(fit_lasso_l(x, y, *l)?),
            Self::LdaTopG { g, output } => {
                FittedInternalModel::Lda(fit_lda_top_g(x, y, *g, *output)?)
            }
            Self::CorrCentroid {
                m_genes,
                allowed_misclass,
            } => {
                FittedInternalModel::Centroid(fit_corr_centroid(x, y, *m_genes, *allowed_misclass)?)
            }
            Self::PlrCv {
                sparsity_grid,
                inner_folds,
            } => FittedInternalModel::Plr(fit_plr_cv(x, y, sparsity_grid, *inner_folds, stream)?),
        })
    }
}

/// A fitted internal rule. Prediction only reads the stored parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedInternalModel {
    Ols(OlsModel),
    Lasso(LassoModel),
    Lda(LdaModel),
    Centroid(CentroidModel),
    Plr(PlrModel),
}

impl FittedInternalModel {
    pub fn n_features(&self) -> usize {
        match self {
            Self::Ols(m) => m.coefficients.len(),
            Self::Lasso(m) => m.coefficients.len(),
            Self::Lda(m) => m.n_features,
            Self::Centroid(m) => m.n_features,
            Self::Plr(m) => m.n_features,
        }
    }

    /// Indices of features the rule uses.
    pub fn selected(&self) -> Vec<usize> {
        match self {
            Self::Ols(m) => (0..m.coefficients.len()).collect(),
            Self::Lasso(m) => m.active.clone(),
            Self::Lda(m) => m.selected.clone(),
            Self::Centroid(m) => m.selected.clone(),
            Self::Plr(m) => m.selected.clone(),
        }
    }

    /// True when the fit hit a documented fallback (ridge, permissive cutoff).
    pub fn flagged(&self) -> bool {
        match self {
            Self::Lda(m) => m.ridge_added,
            Self::Centroid(m) => m.permissive_cutoff,
            _ => false,
        }
    }

    pub fn predict(&self, x_new: &Matrix) -> Result<Vec<f64>> {
        if x_new.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x_new.ncols(),
                context: "prediction columns",
            });
        }
        Ok(match self {
            Self::Ols(m) => m.predict(x_new),
            Self::Lasso(m) => m.predict(x_new),
            Self::Lda(m) => m.predict(x_new),
            Self::Centroid(m) => m.predict(x_new),
            Self::Plr(m) => m.predict(x_new),
        })
    }
}

/// Column means and standard deviations (divisor n - 1); zero SDs become 1.
pub(crate) fn column_moments(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, p) = (x.nrows(), x.ncols());
    let mut mean = alloc::vec![0.0; p];
    for i in 0..n {
        crate::linalg::axpy(1.0, x.row(i), &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut ss = alloc::vec![0.0; p];
    for i in 0..n {
        for (j, v) in x.row(i).iter().enumerate() {
            let d = v - mean[j];
            ss[j] += d * d;
        }
    }
    let sd = ss
        .into_iter()
        .map(|s| {
            let v = libm::sqrt(s / (n.max(2) - 1) as f64);
            if v > 0.0 {
                v
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

/// Absolute Pearson correlation of every column with `y` (centered sums).
pub fn abs_correlations(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let ybar = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - ybar).collect();
    let syy: f64 = yc.iter().map(|v| v * v).sum();
    let mut mean = alloc::vec![0.0; p];
    for i in 0..n {
        crate::linalg::axpy(1.0, x.row(i), &mut mean);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut sxy = alloc::vec![0.0; p];
    let mut sxx = alloc::vec![0.0; p];
    for i in 0..n {
        let r = x.row(i);
        for j in 0..p {
            let d = r[j] - mean[j];
            sxy[j] += d * yc[i];
            sxx[j] += d * d;
        }
    }
    (0..p)
        .map(|j| {
            if sxx[j] <= 0.0 || syy <= 0.0 {
                0.0
            } else {
                libm::fabs(sxy[j]) / libm::sqrt(sxx[j] * syy)
            }
        })
        .collect()
}

/// Indices of the `g` largest scores, ties broken by lower index.
pub fn top_indices(scores: &[f64], g: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(g);
    idx
}

pub(crate) fn require_binary(y: &[f64]) -> Result<(usize, usize)> {
    let mut c = (0usize, 0usize);
    for &v in y {
        if v == 0.0 {
            c.0 += 1;
        } else if v == 1.0 {
            c.1 += 1;
        } else {
            return Err(Error::data(format!(
                "classifier outcome must be 0/1, got {v}"
            )));
        }
    }
    if c.0 == 0 || c.1 == 0 {
        return Err(Error::data(
            "both classes must be present in the training data",
        ));
    }
    Ok(c)
}
