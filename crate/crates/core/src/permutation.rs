//! Row-permutation test for the pre-validated coefficient.
//!
//! Rows of `X` are permuted while `y` and `Z` stay fixed, the whole
//! pipeline (fold draw, internal fits, external fit) is rerun, and the
//! observed statistic is ranked against the permuted ones. The p-value is
//! the plain fraction `#{permuted >= observed} / B` with no +1 correction.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FoldScheme};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::external::{fit_external, ExternalFit, ExternalKind};
use crate::models::InternalModelSpec;
use crate::prevalidation::{prevalidate, prevalidate_with_scheme, PrevalidatedPredictor};
use crate::rng::{self, SeedStream};

/// Fraction of failed replicates above which a result is marked invalid.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// The coefficient of the pre-validated predictor.
    Coefficient,
    /// Its t statistic (linear) or z-score (logistic).
    TOrZ,
    /// Deviance drop when the pre-validated column is removed.
    Deviance,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 3] = [Self::Coefficient, Self::TOrZ, Self::Deviance];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Coefficient => "coefficient",
            Self::TOrZ => "t_or_z",
            Self::Deviance => "deviance",
        }
    }

    pub fn extract(&self, fit: &ExternalFit) -> f64 {
        match self {
            Self::Coefficient => fit.pv_coefficient(),
            Self::TOrZ => fit.pv_statistic(),
            Self::Deviance => fit.pv_deviance_drop(),
        }
    }
}

/// Everything needed to run the pre-validation pipeline once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub spec: InternalModelSpec,
    pub external: ExternalKind,
    pub folds: FoldScheme,
    pub intercept: bool,
}

impl Pipeline {
    pub fn run(
        &self,
        data: &Dataset,
        stream: SeedStream,
    ) -> Result<(PrevalidatedPredictor, ExternalFit)> {
        let pv = prevalidate_with_scheme(data, &self.spec, self.folds, stream)?;
        let fit = fit_external(
            self.external,
            Some(&pv.ytilde),
            data.z(),
            data.y(),
            self.intercept,
        )?;
        Ok((pv, fit))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub statistic_kind: StatisticKind,
    pub observed: f64,
    /// Statistic for each replicate in index order; `None` marks a failure.
    pub permuted: Vec<Option<f64>>,
    /// `#{permuted >= observed} / #successful`.
    pub p_value: f64,
    pub b: usize,
    pub failed: usize,
    /// More than 5% of replicates failed.
    pub invalid: bool,
    /// Replicates whose external logistic fit hit separation.
    pub separated: usize,
    pub seed: u64,
}

/// Permutation p-value: fraction of usable permuted values `>= observed`.
pub fn permutation_p_value(observed: f64, permuted: &[Option<f64>]) -> f64 {
    let ok: Vec<f64> = permuted.iter().flatten().copied().collect();
    if ok.is_empty() {
        return f64::NAN;
    }
    ok.iter().filter(|&&v| v >= observed).count() as f64 / ok.len() as f64
}

/// Options for [`permutation_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationOptions {
    pub b: usize,
    pub seed: u64,
    /// Draw new folds inside each replicate (default) or reuse the observed ones.
    pub redraw_folds: bool,
}

impl PermutationOptions {
    pub fn new(b: usize, seed: u64) -> Self {
        Self {
            b,
            seed,
            redraw_folds: true,
        }
    }
}

/// Runs the test for every statistic kind from one set of permutations.
pub fn permutation_test_all<E: Executor>(
    data: &Dataset,
    pipeline: &Pipeline,
    opts: PermutationOptions,
    exec: &E,
) -> Result<Vec<PermutationResult>> {
    if opts.b == 0 {
        return Err(Error::param("number of permutations must be >= 1"));
    }
    let root = SeedStream::new(opts.seed);
    let (pv, fit) = pipeline.run(data, root.substream("observed", 0))?;
    let observed_folds = pv.folds;
    let reps: Vec<Option<(ExternalFit, bool)>> = exec.map(opts.b, |b| {
        let s = root.substream("permutation", b as u64);
        let perm = rng::permutation(data.n(), &mut s.substream("rows", 0).rng());
        let permuted = data.with_permuted_x(&perm);
        let pv_stream = s.substream("pipeline", 0);
        let pv = match (&observed_folds, opts.redraw_folds) {
            (Some(f), false) => prevalidate(&permuted, &pipeline.spec, f, pv_stream),
            _ => prevalidate_with_scheme(&permuted, &pipeline.spec, pipeline.folds, pv_stream),
        };
        let fit = pv.and_then(|pv| {
            fit_external(
                pipeline.external,
                Some(&pv.ytilde),
                data.z(),
                data.y(),
                pipeline.intercept,
            )
        });
        fit.ok().map(|f| {
            let sep = f.separated;
            (f, sep)
        })
    });
    let separated = reps.iter().flatten().filter(|(_, s)| *s).count();
    Ok(StatisticKind::ALL
        .iter()
        .map(|&kind| {
            let observed = kind.extract(&fit);
            let permuted: Vec<Option<f64>> = reps
                .iter()
                .map(|r| {
                    r.as_ref()
                        .map(|(f, _)| kind.extract(f))
                        .filter(|v| v.is_finite())
                })
                .collect();
            let failed = permuted.iter().filter(|v| v.is_none()).count();
            PermutationResult {
                statistic_kind: kind,
                observed,
                p_value: permutation_p_value(observed, &permuted),
                b: opts.b,
                failed,
                invalid: failed as f64 > MAX_FAILED_FRACTION * opts.b as f64,
                separated,
                seed: opts.seed,
                permuted,
            }
        })
        .collect())
}

pub fn permutation_test<E: Executor>(
    data: &Dataset,
    pipeline: &Pipeline,
    kind: StatisticKind,
    opts: PermutationOptions,
    exec: &E,
) -> Result<PermutationResult> {
    permutation_test_all(data, pipeline, opts, exec)?
        .into_iter()
        .find(|r| r.statistic_kind == kind)
        .ok_or_else(|| Error::param(format!("unknown statistic {kind:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::OutcomeKind;
    use crate::exec::Sequential;
    use crate::linalg::Matrix;
    use crate::rng::normal_vec;

    fn data(signal: f64, seed: u64) -> Dataset {
        let mut rng = SeedStream::new(seed).rng();
        let x = Matrix::from_row_major(30, 3, normal_vec(90, &mut rng)).unwrap();
        let noise = normal_vec(30, &mut rng);
        let y: Vec<f64> = (0..30).map(|i| signal * x[(i, 0)] + noise[i]).collect();
        let z = Matrix::from_fn(30, 1, |i, _| y[i] + noise[(i + 7) % 30]);
        Dataset::new(y, x, z, OutcomeKind::Continuous).unwrap()
    }

    fn pipeline() -> Pipeline {
        Pipeline {
            spec: InternalModelSpec::Ols,
            external: ExternalKind::Linear,
            folds: FoldScheme::KFold(5),
            intercept: false,
        }
    }

    #[test]
    fn counting_rule() {
        let perm = [Some(0.1), Some(0.5), Some(0.2), None];
        assert_eq!(permutation_p_value(1.0, &perm), 0.0);
        assert_eq!(permutation_p_value(0.2, &perm), 2.0 / 3.0);
        let ties = [Some(0.3); 10];
        assert_eq!(permutation_p_value(0.3, &ties), 1.0);
    }

    #[test]
    fn strong_signal_gives_zero_p() {
        let r = permutation_test(
            &data(3.0, 1),
            &pipeline(),
            StatisticKind::TOrZ,
            PermutationOptions::new(10, 2),
            &Sequential,
        )
        .unwrap();
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.permuted.len(), 10);
        assert!(!r.invalid);
    }

    #[test]
    fn doubling_b_extends_the_same_sequence() {
        let d = data(0.0, 3);
        let a = permutation_test(
            &d,
            &pipeline(),
            StatisticKind::Coefficient,
            PermutationOptions::new(20, 4),
            &Sequential,
        )
        .unwrap();
        let b = permutation_test(
            &d,
            &pipeline(),
            StatisticKind::Coefficient,
            PermutationOptions::new(40, 4),
            &Sequential,
        )
        .unwrap();
        assert_eq!(a.observed, b.observed);
        assert_eq!(a.permuted[..], b.permuted[..20]);
    }

    #[test]
    fn fixed_folds_option_is_reproducible() {
        let d = data(0.5, 5);
        let mut opts = PermutationOptions::new(15, 6);
        opts.redraw_folds = false;
        let a = permutation_test_all(&d, &pipeline(), opts, &Sequential).unwrap();
        let b = permutation_test_all(&d, &pipeline(), opts, &Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }

    #[test]
    fn zero_permutations_rejected() {
        let err = permutation_test_all(
            &data(0.0, 7),
            &pipeline(),
            PermutationOptions::new(0, 1),
            &Sequential,
        );
        assert!(err.unwrap_err().is_validation());
    }
}
