//! Correlation-to-centroid classifier.
//!
//! Class 0 is the reference ("good") class and class 1 the target class.
//! The rule keeps the `m_genes` features most correlated with the label,
//! forms the class-0 centroid over them, and calls a case class 0 when its
//! correlation with the centroid exceeds a cutoff. The cutoff is the
//! smallest value that leaves at most `allowed_misclass` class-1 training
//! cases above it, i.e. the `(allowed_misclass + 1)`-th largest class-1
//! correlation. Features are standardized with training moments before
//! correlating, which makes the rule invariant to per-feature shifts and
//! scales.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{abs_correlations, column_moments, require_binary, top_indices};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::stats::pearson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    pub n_features: usize,
    pub selected: Vec<usize>,
    /// Class-0 centroid over the selected features, raw units.
    pub centroid: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_sd: Vec<f64>,
    pub cutoff: f64,
    /// Set when `allowed_misclass` covers every class-1 case (cutoff -1).
    pub permissive_cutoff: bool,
}

impl CentroidModel {
    fn standardized(&self, row: &[f64]) -> Vec<f64> {
        self.selected
            .iter()
            .enumerate()
            .map(|(k, &j)| (row[j] - self.feature_mean[k]) / self.feature_sd[k])
            .collect()
    }

    /// Correlation of a case with the centroid.
    pub fn correlation(&self, row: &[f64]) -> f64 {
        let c: Vec<f64> = self
            .centroid
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.feature_mean[k]) / self.feature_sd[k])
            .collect();
        pearson(&self.standardized(row), &c)
    }

    /// 1 for predicted class 1, 0 when the correlation clears the cutoff.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| f64::from(u8::from(self.correlation(x.row(i)) <= self.cutoff)))
            .collect()
    }
}

pub fn fit_corr_centroid(
    x: &Matrix,
    y: &[f64],
    m_genes: usize,
    allowed_misclass: usize,
) -> Result<CentroidModel> {
    let (n0, _) = require_binary(y)?;
    let n = y.len();
    let selected = top_indices(&abs_correlations(x, y), m_genes);
    let xs = x.select_cols(&selected);
    let (feature_mean, feature_sd) = column_moments(&xs);
    let mut centroid = alloc::vec![0.0; m_genes];
    for i in (0..n).filter(|&i| y[i] == 0.0) {
        crate::linalg::axpy(1.0, xs.row(i), &mut centroid);
    }
    centroid.iter_mut().for_each(|v| *v /= n0 as f64);

    let mut model = CentroidModel {
        n_features: x.ncols(),
        selected,
        centroid,
        feature_mean,
        feature_sd,
        cutoff: -1.0,
        permissive_cutoff: false,
    };
    let mut poor: Vec<f64> = (0..n)
        .filter(|&i| y[i] == 1.0)
        .map(|i| model.correlation(x.row(i)))
        .collect();
    poor.sort_by(|a, b| b.total_cmp(a));
    if allowed_misclass >= poor.len() {
        model.permissive_cutoff = true;
    } else {
        model.cutoff = poor[allowed_misclass];
    }
    Ok(model)
}
