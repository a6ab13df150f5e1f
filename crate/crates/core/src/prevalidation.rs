//! The pre-validated predictor: held-out predictions from K-fold refits,
//! the closed-form leave-one-out shortcut for OLS, and CV error rates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{make_folds, Dataset, FoldAssignment, FoldScheme, OutcomeKind};
use crate::error::{Error, Result};
use crate::linalg::{hat_diagonal, Matrix, Qr};
use crate::models::InternalModelSpec;
use crate::rng::SeedStream;

/// Leverages at or above `1 - LEVERAGE_TOL` make the shortcut undefined.
pub const LEVERAGE_TOL: f64 = 1e-12;

/// What one fold's fit selected and whether it hit a fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldFit {
    pub fold: usize,
    pub selected: Vec<usize>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalidatedPredictor {
    pub ytilde: Vec<f64>,
    /// `None` for the re-use method (one fit, predictions on the same rows).
    pub folds: Option<FoldAssignment>,
    pub spec: InternalModelSpec,
    pub fold_fits: Vec<FoldFit>,
}

impl PrevalidatedPredictor {
    pub fn any_flagged(&self) -> bool {
        self.fold_fits.iter().any(|f| f.flagged)
    }
}

/// Runs the K-fold procedure with a given fold assignment.
pub fn prevalidate(
    data: &Dataset,
    spec: &InternalModelSpec,
    folds: &FoldAssignment,
    stream: SeedStream,
) -> Result<PrevalidatedPredictor> {
    if folds.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            actual: folds.n(),
            context: "fold assignment length",
        });
    }
    if spec.is_classifier() {
        data.require_both_classes()?;
    }
    let max_fold = folds.max_size();
    spec.validate(data.p(), data.n() - max_fold)?;

    let mut ytilde = vec![f64::NAN; data.n()];
    let mut fold_fits = Vec::with_capacity(folds.k());
    for f in 0..folds.k() {
        let wrap = |e: Error| Error::Fold {
            fold: f,
            source: alloc::boxed::Box::new(e),
        };
        let train = folds.training(f);
        let test = folds.members(f);
        let xt = data.x().select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| data.y()[i]).collect();
        let model = spec
            .fit(&xt, &yt, stream.substream("fold_fit", f as u64))
            .map_err(wrap)?;
        let pred = model.predict(&data.x().select_rows(&test)).map_err(wrap)?;
        for (&i, v) in test.iter().zip(pred) {
            ytilde[i] = v;
        }
        fold_fits.push(FoldFit {
            fold: f,
            selected: model.selected(),
            flagged: model.flagged(),
        });
    }
    Ok(PrevalidatedPredictor {
        ytilde,
        folds: Some(folds.clone()),
        spec: spec.clone(),
        fold_fits,
    })
}

/// The re-use method: fit on all rows and predict those same rows.
pub fn reuse_predictions(
    data: &Dataset,
    spec: &InternalModelSpec,
    stream: SeedStream,
) -> Result<PrevalidatedPredictor> {
    let model = spec.fit(data.x(), data.y(), stream.substream("fold_fit", 0))?;
    Ok(PrevalidatedPredictor {
        ytilde: model.predict(data.x())?,
        folds: None,
        spec: spec.clone(),
        fold_fits: vec![FoldFit {
            fold: 0,
            selected: model.selected(),
            flagged: model.flagged(),
        }],
    })
}

/// Draws folds for `scheme` (stratified for binary outcomes) and runs the
/// procedure. `FoldScheme::Reuse` skips pre-validation entirely.
pub fn prevalidate_with_scheme(
    data: &Dataset,
    spec: &InternalModelSpec,
    scheme: FoldScheme,
    stream: SeedStream,
) -> Result<PrevalidatedPredictor> {
    let Some(k) = scheme.folds_for(data.n()) else {
        return reuse_predictions(data, spec, stream);
    };
    let folds = draw_folds(data, k, stream)?;
    prevalidate(data, spec, &folds, stream)
}

/// Fold assignment used by [`prevalidate_with_scheme`].
pub fn draw_folds(data: &Dataset, k: usize, stream: SeedStream) -> Result<FoldAssignment> {
    if k == data.n() {
        return Ok(FoldAssignment::leave_one_out(k));
    }
    let labels = (data.outcome() == OutcomeKind::Binary).then(|| data.y());
    make_folds(data.n(), k, labels, stream.substream("folds", 0))
}

/// Closed-form leave-one-out predictor `(I - D)^{-1} (H - D) y` for OLS.
pub fn loo_linear_prevalidate(x: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: y.len(),
            context: "length of y",
        });
    }
    if x.ncols() >= n {
        return Err(Error::param(format!(
            "need p < n, got p = {}, n = {n}",
            x.ncols()
        )));
    }
    let d = hat_diagonal(x)?;
    if let Some(i) = d.iter().position(|&v| v >= 1.0 - LEVERAGE_TOL) {
        return Err(Error::LeverageOne {
            row: i,
            leverage: d[i],
        });
    }
    let beta = Qr::new(x)?.solve(y)?;
    let hy = x.mul_vec(&beta);
    Ok((0..n)
        .map(|i| (hy[i] - d[i] * y[i]) / (1.0 - d[i]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvErrorSummary {
    /// Misclassification rate (binary) or mean squared error (continuous).
    pub mean: f64,
    pub per_rep: Vec<f64>,
}

/// Error of the pre-validated prediction against `y`, averaged over `reps`
/// independent fold draws.
pub fn cv_error(
    data: &Dataset,
    spec: &InternalModelSpec,
    k: usize,
    reps: usize,
    stream: SeedStream,
) -> Result<CvErrorSummary> {
    if reps == 0 {
        return Err(Error::param("reps must be >= 1"));
    }
    let scheme = FoldScheme::from_count(k)?;
    let mut per_rep = Vec::with_capacity(reps);
    for r in 0..reps {
        let pv = prevalidate_with_scheme(data, spec, scheme, stream.substream("cv_rep", r as u64))?;
        let err: f64 = pv
            .ytilde
            .iter()
            .zip(data.y())
            .map(|(p, y)| match data.outcome() {
                OutcomeKind::Binary => f64::from(u8::from(p != y)),
                OutcomeKind::Continuous => (p - y) * (p - y),
            })
            .sum::<f64>()
            / data.n() as f64;
        per_rep.push(err);
    }
    Ok(CvErrorSummary {
        mean: per_rep.iter().sum::<f64>() / reps as f64,
        per_rep,
    })
}
