//! The external comparison regression of `y` on the pre-validated
//! predictor and the competing predictors `Z`.
//!
//! Columns are ordered `[ytilde, z_1, .., z_e, intercept]`; the intercept
//! is optional. The pre-validated coefficient is tested one-sided (upper
//! tail), the others two-sided. Deviance drops come from refitting without
//! each column.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use libm::{exp, fabs, log1p, sqrt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::special::{chi2_sf, f_sf, normal_sf, student_t_sf};

/// IRLS iteration cap.
pub const MAX_IRLS_ITER: usize = 100;
/// Largest standardized logistic coefficient before separation is declared.
pub const SEPARATION_THRESHOLD: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalKind {
    Linear,
    Logistic,
}

impl ExternalKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Logistic => "logistic",
        }
    }
}

/// Identity of a design column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Prevalidated,
    External(usize),
    Intercept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalFit {
    pub kind: ExternalKind,
    pub columns: Vec<Column>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// t statistics (linear) or z-scores (logistic).
    pub statistics: Vec<f64>,
    /// Two-sided p-values from the t or normal reference.
    pub p_values: Vec<f64>,
    /// Deviance increase when the column is dropped (RSS increase for linear).
    pub deviance_drops: Vec<f64>,
    pub deviance_p_values: Vec<f64>,
    /// One-sided upper-tail p-value for the pre-validated coefficient.
    pub p_pv_one_sided: Option<f64>,
    /// Residual deviance (RSS for linear).
    pub deviance: f64,
    /// `RSS / (n - #columns)`, linear only.
    pub sigma2: Option<f64>,
    pub df_residual: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Logistic separation; standard errors are then unreliable.
    pub separated: bool,
}

impl ExternalFit {
    pub fn index_of(&self, column: Column) -> Option<usize> {
        self.columns.iter().position(|c| *c == column)
    }

    fn pv(&self, v: &[f64]) -> f64 {
        self.index_of(Column::Prevalidated)
            .map_or(f64::NAN, |i| v[i])
    }

    pub fn pv_coefficient(&self) -> f64 {
        self.pv(&self.coefficients)
    }

    pub fn pv_statistic(&self) -> f64 {
        self.pv(&self.statistics)
    }

    pub fn pv_deviance_drop(&self) -> f64 {
        self.pv(&self.deviance_drops)
    }
}

fn design(
    ytilde: Option<&[f64]>,
    z: &Matrix,
    intercept: bool,
    n: usize,
) -> Result<(Matrix, Vec<Column>)> {
    if z.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: z.nrows(),
            context: "rows of Z",
        });
    }
    let mut cols: Vec<Column> = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    if let Some(t) = ytilde {
        if t.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: t.len(),
                context: "length of ytilde",
            });
        }
        cols.push(Column::Prevalidated);
        data.push(t.to_vec());
    }
    for k in 0..z.ncols() {
        cols.push(Column::External(k));
        data.push(z.column(k));
    }
    if intercept {
        cols.push(Column::Intercept);
        data.push(vec![1.0; n]);
    }
    let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
    Ok((Matrix::from_columns(n, &refs)?, cols))
}

/// Fits the external model; `ytilde = None` omits the pre-validated column.
pub fn fit_external(
    kind: ExternalKind,
    ytilde: Option<&[f64]>,
    z: &Matrix,
    y: &[f64],
    intercept: bool,
) -> Result<ExternalFit> {
    let (w, cols) = design(ytilde, z, intercept, y.len())?;
    fit_design(kind, &w, cols, y)
}

pub fn fit_linear_external(
    ytilde: &[f64],
    z: &Matrix,
    y: &[f64],
    intercept: bool,
) -> Result<ExternalFit> {
    fit_external(ExternalKind::Linear, Some(ytilde), z, y, intercept)
}

pub fn fit_logistic_external(
    ytilde: &[f64],
    z: &Matrix,
    y: &[f64],
    intercept: bool,
) -> Result<ExternalFit> {
    fit_external(ExternalKind::Logistic, Some(ytilde), z, y, intercept)
}

struct CoreFit {
    coefficients: Vec<f64>,
    std_errors: Vec<f64>,
    deviance: f64,
    sigma2: Option<f64>,
    iterations: usize,
    converged: bool,
    separated: bool,
}

fn fit_core(kind: ExternalKind, w: &Matrix, y: &[f64]) -> Result<CoreFit> {
    let (n, c) = (w.nrows(), w.ncols());
    if c > 0 && n <= c {
        return Err(Error::param(format!(
            "external model needs n > #columns, got n = {n}, columns = {c}"
        )));
    }
    match kind {
        ExternalKind::Linear => linear_core(w, y),
        ExternalKind::Logistic => {
            if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::data(format!(
                    "logistic external model needs a 0/1 outcome, row {i} has {}",
                    y[i]
                )));
            }
            logistic_core(w, y)
        }
    }
}

fn linear_core(w: &Matrix, y: &[f64]) -> Result<CoreFit> {
    let (n, c) = (w.nrows(), w.ncols());
    if c == 0 {
        return Ok(CoreFit {
            coefficients: Vec::new(),
            std_errors: Vec::new(),
            deviance: y.iter().map(|v| v * v).sum(),
            sigma2: Some(y.iter().map(|v| v * v).sum::<f64>() / n as f64),
            iterations: 0,
            converged: true,
            separated: false,
        });
    }
    let qr = Qr::new(w)?;
    let beta = qr.solve(y)?;
    let fitted = w.mul_vec(&beta);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let sigma2 = rss / (n - c) as f64;
    let inv = qr.gram_inverse()?;
    let std_errors = (0..c).map(|j| sqrt(sigma2 * inv[(j, j)])).collect();
    Ok(CoreFit {
        coefficients: beta,
        std_errors,
        deviance: rss,
        sigma2: Some(sigma2),
        iterations: 1,
        converged: true,
        separated: false,
    })
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + log1p(exp(-x))
    } else {
        log1p(exp(x))
    }
}

fn logistic_deviance(eta: &[f64], y: &[f64]) -> f64 {
    2.0 * eta
        .iter()
        .zip(y)
        .map(|(e, yi)| {
            if *yi == 1.0 {
                softplus(-e)
            } else {
                softplus(*e)
            }
        })
        .sum::<f64>()
}

fn logistic_core(w: &Matrix, y: &[f64]) -> Result<CoreFit> {
    let (n, c) = (w.nrows(), w.ncols());
    if c == 0 {
        let eta = vec![0.0; n];
        return Ok(CoreFit {
            coefficients: Vec::new(),
            std_errors: Vec::new(),
            deviance: logistic_deviance(&eta, y),
            sigma2: None,
            iterations: 0,
            converged: true,
            separated: false,
        });
    }
    Qr::new(w)?.check_full_rank()?;
    let sd: Vec<f64> = (0..c)
        .map(|j| {
            let col = w.column(j);
            let s = crate::stats::variance(&col);
            // constant columns (the intercept) are left unscaled
            if s > 0.0 {
                sqrt(s)
            } else {
                1.0
            }
        })
        .collect();

    let mut beta = vec![0.0; c];
    let mut eta = vec![0.0; n];
    let mut dev = logistic_deviance(&eta, y);
    let mut converged = false;
    let mut iterations = 0;
    let mut last_qr: Option<Qr> = None;
    while iterations < MAX_IRLS_ITER {
        iterations += 1;
        let mut sw = vec![0.0; n];
        let mut zw = vec![0.0; n];
        for i in 0..n {
            let p = crate::models::sigmoid(eta[i]);
            let v = (p * (1.0 - p)).max(1e-12);
            sw[i] = sqrt(v);
            zw[i] = sw[i] * (eta[i] + (y[i] - p) / v);
        }
        let ww = Matrix::from_fn(n, c, |i, j| sw[i] * w[(i, j)]);
        let qr = Qr::new(&ww)?;
        let target = qr.solve(&zw)?;
        let mut step: Vec<f64> = target.iter().zip(&beta).map(|(t, b)| t - b).collect();
        let mut new_beta;
        let mut new_eta;
        let mut new_dev;
        let mut halvings = 0;
        loop {
            new_beta = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + s)
                .collect::<Vec<_>>();
            new_eta = w.mul_vec(&new_beta);
            new_dev = logistic_deviance(&new_eta, y);
            if new_dev <= dev * (1.0 + 1e-12) + 1e-12 || halvings >= 30 {
                break;
            }
            step.iter_mut().for_each(|s| *s *= 0.5);
            halvings += 1;
        }
        let change = fabs(new_dev - dev) / (fabs(new_dev) + 0.1);
        beta = new_beta;
        eta = new_eta;
        dev = new_dev;
        last_qr = Some(qr);
        if change < 1e-10 {
            converged = true;
            break;
        }
    }

    // Fisher information at the final estimate.
    let mut sw = vec![0.0; n];
    for i in 0..n {
        let p = crate::models::sigmoid(eta[i]);
        sw[i] = sqrt((p * (1.0 - p)).max(1e-300));
    }
    let ww = Matrix::from_fn(n, c, |i, j| sw[i] * w[(i, j)]);
    let inv = match Qr::new(&ww).and_then(|q| q.gram_inverse()) {
        Ok(m) => m,
        Err(_) => last_qr.expect("at least one IRLS step").gram_inverse()?,
    };
    let std_errors: Vec<f64> = (0..c).map(|j| sqrt(inv[(j, j)].max(0.0))).collect();
    let max_std = beta
        .iter()
        .zip(&sd)
        .map(|(b, s)| fabs(b * s))
        .fold(0.0, f64::max);
    let separated = !converged || max_std > SEPARATION_THRESHOLD || !max_std.is_finite();
    Ok(CoreFit {
        coefficients: beta,
        std_errors,
        deviance: dev,
        sigma2: None,
        iterations,
        converged,
        separated,
    })
}

fn fit_design(
    kind: ExternalKind,
    w: &Matrix,
    columns: Vec<Column>,
    y: &[f64],
) -> Result<ExternalFit> {
    let (n, c) = (w.nrows(), w.ncols());
    let core = fit_core(kind, w, y)?;
    let df = n - c;
    let statistics: Vec<f64> = core
        .coefficients
        .iter()
        .zip(&core.std_errors)
        .map(|(b, s)| b / s)
        .collect();
    let sf = |t: f64| match kind {
        ExternalKind::Linear => student_t_sf(t, df as f64),
        ExternalKind::Logistic => normal_sf(t),
    };
    let p_values: Vec<f64> = statistics
        .iter()
        .map(|t| {
            if t.is_nan() {
                f64::NAN
            } else {
                (2.0 * sf(fabs(*t))).min(1.0)
            }
        })
        .collect();

    let mut deviance_drops = Vec::with_capacity(c);
    let mut deviance_p_values = Vec::with_capacity(c);
    for j in 0..c {
        let keep: Vec<usize> = (0..c).filter(|&k| k != j).collect();
        let reduced = fit_core(kind, &w.select_cols(&keep), y)?;
        let drop = (reduced.deviance - core.deviance).max(0.0);
        deviance_drops.push(drop);
        deviance_p_values.push(drop_p_value(kind, drop, core.sigma2, df));
    }
    let p_pv_one_sided = columns
        .iter()
        .position(|c| *c == Column::Prevalidated)
        .map(|i| sf(statistics[i]));
    Ok(ExternalFit {
        kind,
        columns,
        coefficients: core.coefficients,
        std_errors: core.std_errors,
        statistics,
        p_values,
        deviance_drops,
        deviance_p_values,
        p_pv_one_sided,
        deviance: core.deviance,
        sigma2: core.sigma2,
        df_residual: df,
        iterations: core.iterations,
        converged: core.converged,
        separated: core.separated,
    })
}

/// Upper-tail p-value of a deviance drop on one degree of freedom: chi-square
/// for logistic, the exact F(1, df) on `drop / sigma2` for linear.
fn drop_p_value(kind: ExternalKind, drop: f64, sigma2: Option<f64>, df: usize) -> f64 {
    match kind {
        ExternalKind::Logistic => chi2_sf(drop, 1.0),
        ExternalKind::Linear => match sigma2 {
            Some(s) if s > 0.0 && df > 0 => f_sf(drop / s, 1.0, df as f64),
            _ => {
                if drop > 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
        },
    }
}

/// Deviance drop between nested fits differing by exactly one column.
pub fn deviance_drop(full: &ExternalFit, reduced: &ExternalFit) -> Result<(f64, f64)> {
    if full.kind != reduced.kind {
        return Err(Error::param("deviance_drop needs fits of the same kind"));
    }
    let nested = reduced.columns.iter().all(|c| full.columns.contains(c))
        && full.columns.len() == reduced.columns.len() + 1;
    let same = full.columns.len() == reduced.columns.len()
        && full.columns.iter().all(|c| reduced.columns.contains(c));
    if same {
        return Ok((0.0, 1.0));
    }
    if !nested {
        return Err(Error::param(
            "deviance_drop needs the reduced model to drop exactly one column of the full model",
        ));
    }
    let drop = (reduced.deviance - full.deviance).max(0.0);
    Ok((
        drop,
        drop_p_value(full.kind, drop, full.sigma2, full.df_residual),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;
    use crate::rng::{normal_vec, SeedStream};
    use approx::assert_abs_diff_eq;

    fn random(n: usize, e: usize, seed: u64) -> (Vec<f64>, Matrix, Vec<f64>) {
        let mut rng = SeedStream::new(seed).rng();
        let t = normal_vec(n, &mut rng);
        let z = Matrix::from_row_major(n, e, normal_vec(n * e, &mut rng)).unwrap();
        let y = normal_vec(n, &mut rng);
        (t, z, y)
    }

    #[test]
    fn perfect_predictor() {
        let y = vec![1.0, -2.0, 0.5, 3.0];
        let f = fit_linear_external(&y, &Matrix::zeros(4, 0), &y, false).unwrap();
        assert_abs_diff_eq!(f.pv_coefficient(), 1.0, epsilon = 1e-12);
        assert!(f.deviance < 1e-20);
    }

    #[test]
    fn block_inverse_identity() {
        for seed in 0..50 {
            let (t, z, y) = random(30, 3, seed);
            let f = fit_linear_external(&t, &z, &y, false).unwrap();
            // (t't - t'Z(Z'Z)^-1 Z't)^-1 (t'y - t'Z(Z'Z)^-1 Z'y)
            let ztz = Cholesky::new(&z.gram()).unwrap();
            let zt_t = z.t_mul_vec(&t);
            let zt_y = z.t_mul_vec(&y);
            let a = ztz.solve(&zt_t);
            let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            let expected = (dot(&t, &y) - dot(&a, &zt_y)) / (dot(&t, &t) - dot(&a, &zt_t));
            assert_abs_diff_eq!(f.pv_coefficient(), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn sigma2_divisor_and_one_sided_p() {
        let (t, z, y) = random(25, 2, 7);
        let f = fit_linear_external(&t, &z, &y, true).unwrap();
        assert_eq!(f.df_residual, 25 - 4);
        let beta = &f.coefficients;
        let w = Matrix::from_fn(25, 4, |i, j| match j {
            0 => t[i],
            1 | 2 => z[(i, j - 1)],
            _ => 1.0,
        });
        let fit = w.mul_vec(beta);
        let rss: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
        assert_abs_diff_eq!(f.sigma2.unwrap(), rss / 21.0, epsilon = 1e-12);
        let two = f.p_values[0];
        let one = f.p_pv_one_sided.unwrap();
        if f.statistics[0] > 0.0 {
            assert_abs_diff_eq!(one, two / 2.0, epsilon = 1e-14);
        } else {
            assert_abs_diff_eq!(one, 1.0 - two / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn linear_drop_is_t_squared() {
        let (t, z, y) = random(40, 1, 3);
        let f = fit_linear_external(&t, &z, &y, true).unwrap();
        for j in 0..3 {
            let t2 = f.statistics[j] * f.statistics[j];
            assert_abs_diff_eq!(f.deviance_drops[j] / f.sigma2.unwrap(), t2, epsilon = 1e-9);
            assert_abs_diff_eq!(f.deviance_p_values[j], f.p_values[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn degenerate_logistic_design_is_singular() {
        let y = vec![0.0, 1.0, 0.0, 1.0, 1.0];
        let t = vec![2.0; 5];
        let err = fit_logistic_external(&t, &Matrix::zeros(5, 0), &y, true).unwrap_err();
        assert!(matches!(
            err,
            Error::Singular {
                rank_deficiency: 1,
                ..
            }
        ));
    }

    fn binary(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = SeedStream::new(seed).rng();
        let mut y: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        crate::rng::shuffle(&mut y, &mut rng);
        y
    }

    #[test]
    fn logistic_score_equations_hold() {
        for seed in 0..20 {
            let (t, z, _) = random(60, 2, 100 + seed);
            let y = binary(60, seed);
            let f = fit_logistic_external(&t, &z, &y, true).unwrap();
            assert!(f.converged && !f.separated);
            let w = Matrix::from_fn(60, 4, |i, j| match j {
                0 => t[i],
                1 | 2 => z[(i, j - 1)],
                _ => 1.0,
            });
            let eta = w.mul_vec(&f.coefficients);
            let r: Vec<f64> = (0..60)
                .map(|i| y[i] - crate::models::sigmoid(eta[i]))
                .collect();
            for s in w.t_mul_vec(&r) {
                assert!(s.abs() < 1e-8, "{s}");
            }
        }
    }

    #[test]
    fn drop_equals_twice_loglik_gain() {
        let (t, z, _) = random(80, 1, 5);
        let y = binary(80, 5);
        let full = fit_logistic_external(&t, &z, &y, true).unwrap();
        let reduced = fit_external(ExternalKind::Logistic, None, &z, &y, true).unwrap();
        let loglik = |f: &ExternalFit, with_pv: bool| -> f64 {
            (0..80)
                .map(|i| {
                    let mut row = Vec::new();
                    if with_pv {
                        row.push(t[i]);
                    }
                    row.push(z[(i, 0)]);
                    row.push(1.0);
                    let eta: f64 = row.iter().zip(&f.coefficients).map(|(a, b)| a * b).sum();
                    let p = crate::models::sigmoid(eta);
                    if y[i] == 1.0 {
                        libm::log(p)
                    } else {
                        libm::log(1.0 - p)
                    }
                })
                .sum()
        };
        let direct = 2.0 * (loglik(&full, true) - loglik(&reduced, false));
        let (d, p) = deviance_drop(&full, &reduced).unwrap();
        assert_abs_diff_eq!(d, direct, epsilon = 1e-8);
        assert_abs_diff_eq!(d, full.pv_deviance_drop(), epsilon = 1e-8);
        assert_abs_diff_eq!(p, chi2_sf(d, 1.0), epsilon = 1e-15);
        assert_eq!(deviance_drop(&full, &full).unwrap(), (0.0, 1.0));
        assert!(deviance_drop(&reduced, &full).is_err());
    }

    #[test]
    fn separation_is_flagged() {
        let y = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let t = vec![-2.0, -1.5, -1.0, -0.2, 0.3, 1.0, 1.4, 2.2];
        let f = fit_logistic_external(&t, &Matrix::zeros(8, 0), &y, true).unwrap();
        assert!(f.separated);
        assert!(f.pv_coefficient().abs() >= SEPARATION_THRESHOLD);
    }

    #[test]
    fn null_z_scores_are_moderate() {
        let mut small = 0;
        for seed in 0..1000 {
            let (t, z, _) = random(50, 1, 5000 + seed);
            let y = binary(50, seed);
            let f = fit_logistic_external(&t, &z, &y, true).unwrap();
            if f.pv_statistic().abs() < 4.0 {
                small += 1;
            }
        }
        assert!(small >= 990, "{small}");
    }

    #[test]
    fn larger_z_means_larger_drop() {
        let (t, z, _) = random(100, 2, 9);
        let y = binary(100, 9);
        let f = fit_logistic_external(&t, &z, &y, false).unwrap();
        let mut idx: Vec<usize> = (0..3).collect();
        idx.sort_by(|&a, &b| f.statistics[a].abs().total_cmp(&f.statistics[b].abs()));
        for w in idx.windows(2) {
            assert!(f.deviance_drops[w[0]] <= f.deviance_drops[w[1]]);
        }
    }
}
