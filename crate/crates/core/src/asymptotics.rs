//! Limiting null laws of the leave-one-out t statistic and the Monte Carlo
//! checks that compare them with the finite-n pipeline.
//!
//! Without external predictors the t statistic for the pre-validated
//! coefficient tends to `(C - p) / sqrt(C)` with `C ~ chi2_p`. With `e`
//! external predictors `Z_k = y + gamma_k`, `gamma_k ~ N(0, sigma_k^2)`, it
//! tends to
//!
//! ```text
//! [(N'N - p)(1 - c) - N'A w] / (sqrt(N'N) sqrt(1 - c))
//! ```
//!
//! with `N ~ N(0, I_p)`, `A` the `p x e` matrix whose column `k` is
//! `N(0, sigma_k^2 I_p)`, `w = (11' + S)^{-1} 1`, `c = 1'w` and
//! `S = diag(sigma_k^2)`. A two-term variant that does not carry the
//! `(1 - c)` factor on the first term is kept as [`ExternalLawForm::Split`]
//! for comparison; it does not match the simulated pipeline.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use libm::sqrt;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::external::fit_linear_external;
use crate::linalg::{hat_diagonal, Cholesky, Matrix, Qr};
use crate::prevalidation::loo_linear_prevalidate;
use crate::rng::{normal_vec, standard_normal, SeedStream};
use crate::special::chi2_cdf;
use crate::stats::{covariance, mean, variance};

/// Draws per RNG substream in the samplers, so chunks can run in parallel.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    NoExternal,
    WithExternal,
}

/// Which algebraic form of the two-predictor limit to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalLawForm {
    /// Single fraction carrying `(1 - c)` on both terms (default).
    Combined,
    /// `(N'N - p)/sqrt(N'N) - N'A w / sqrt(N'N (1 - c))`.
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawSample {
    pub law: Law,
    pub p: usize,
    pub sigmas: Vec<f64>,
    pub draws: Vec<f64>,
    pub seed: u64,
}

/// `(C - p) / sqrt(C)`.
pub fn null_law_statistic(c: f64, p: usize) -> f64 {
    (c - p as f64) / sqrt(c)
}

/// Exact CDF of `(C - p)/sqrt(C)`, `C ~ chi2_p`.
///
/// The map `C -> (C - p)/sqrt(C)` is increasing, and `(C - p)/sqrt(C) <= x`
/// iff `sqrt(C) <= (x + sqrt(x^2 + 4p)) / 2`.
pub fn null_law_cdf(x: f64, p: usize) -> f64 {
    let r = 0.5 * (x + sqrt(x * x + 4.0 * p as f64));
    chi2_cdf(r * r, p as f64)
}

fn check_draws(p: usize, ndraws: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::param("p must be >= 1"));
    }
    if ndraws == 0 {
        return Err(Error::param("ndraws must be >= 1"));
    }
    Ok(())
}

fn chunked<E: Executor>(
    ndraws: usize,
    exec: &E,
    draw: impl Fn(usize, usize) -> Vec<f64> + Sync + Send,
) -> Vec<f64> {
    let chunks = ndraws.div_ceil(CHUNK);
    exec.map(chunks, |c| {
        let len = CHUNK.min(ndraws - c * CHUNK);
        draw(c, len)
    })
    .into_iter()
    .flatten()
    .collect()
}

fn sum_sq<R: Rng + ?Sized>(p: usize, rng: &mut R) -> f64 {
    (0..p)
        .map(|_| {
            let v = standard_normal(rng);
            v * v
        })
        .sum()
}

pub fn sample_null_law<E: Executor>(
    p: usize,
    ndraws: usize,
    seed: u64,
    exec: &E,
) -> Result<LimitLawSample> {
    check_draws(p, ndraws)?;
    let root = SeedStream::new(seed);
    let draws = chunked(ndraws, exec, |c, len| {
        let mut rng = root.substream("null_law", c as u64).rng();
        (0..len)
            .map(|_| null_law_statistic(sum_sq(p, &mut rng), p))
            .collect()
    });
    Ok(LimitLawSample {
        law: Law::NoExternal,
        p,
        sigmas: Vec::new(),
        draws,
        seed,
    })
}

/// `w = (11' + diag(sigma^2))^{-1} 1` and `c = 1'w`.
pub fn external_law_weights(sigmas: &[f64]) -> Result<(Vec<f64>, f64)> {
    if sigmas.is_empty() {
        return Err(Error::param(
            "the external-predictor limit needs at least one external predictor",
        ));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(Error::param(format!(
            "external noise SDs must be positive, got {s}"
        )));
    }
    let e = sigmas.len();
    let m = Matrix::from_fn(e, e, |i, j| {
        1.0 + if i == j { sigmas[i] * sigmas[i] } else { 0.0 }
    });
    let w = Cholesky::new(&m)?.solve(&vec![1.0; e]);
    let c: f64 = w.iter().sum();
    if !(1.0 - c > 0.0) {
        return Err(Error::param(format!(
            "1 - 1'(11' + S)^-1 1 = {} is not positive",
            1.0 - c
        )));
    }
    Ok((w, c))
}

/// Evaluates the two-predictor limit at `N` (length p) and `A` (p x e).
pub fn external_law_statistic(
    n_vec: &[f64],
    a: &Matrix,
    w: &[f64],
    c: f64,
    form: ExternalLawForm,
) -> f64 {
    let p = n_vec.len() as f64;
    let ntn: f64 = n_vec.iter().map(|v| v * v).sum();
    let nta_w: f64 = (0..a.ncols())
        .map(|k| w[k] * (0..a.nrows()).map(|j| n_vec[j] * a[(j, k)]).sum::<f64>())
        .sum();
    match form {
        ExternalLawForm::Combined => ((ntn - p) * (1.0 - c) - nta_w) / (sqrt(ntn) * sqrt(1.0 - c)),
        ExternalLawForm::Split => (ntn - p) / sqrt(ntn) - nta_w / sqrt(ntn * (1.0 - c)),
    }
}

pub fn sample_external_law<E: Executor>(
    p: usize,
    sigmas: &[f64],
    ndraws: usize,
    seed: u64,
    form: ExternalLawForm,
    exec: &E,
) -> Result<LimitLawSample> {
    check_draws(p, ndraws)?;
    let (w, c) = external_law_weights(sigmas)?;
    let e = sigmas.len();
    let root = SeedStream::new(seed);
    let draws = chunked(ndraws, exec, |ch, len| {
        let mut rng = root.substream("external_law", ch as u64).rng();
        (0..len)
            .map(|_| {
                let n_vec = normal_vec(p, &mut rng);
                let a = Matrix::from_fn(p, e, |_, k| sigmas[k] * standard_normal(&mut rng));
                external_law_statistic(&n_vec, &a, &w, c, form)
            })
            .collect()
    });
    Ok(LimitLawSample {
        law: Law::WithExternal,
        p,
        sigmas: sigmas.to_vec(),
        draws,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalNull {
    pub t: Vec<f64>,
    /// Replicates redrawn after a leverage-one failure.
    pub redraws: usize,
}

/// t statistics of the leave-one-out pipeline under the null.
///
/// Each replicate draws `X`, `y` i.i.d. standard normal and
/// `Z_k = y + sigma_k * gamma`, forms the closed-form leave-one-out
/// predictor and fits the intercept-free external linear model.
pub fn empirical_null_t<E: Executor>(
    n: usize,
    p: usize,
    sigmas: &[f64],
    reps: usize,
    seed: u64,
    exec: &E,
) -> Result<EmpiricalNull> {
    if p == 0 || p >= n {
        return Err(Error::param(format!(
            "need 1 <= p < n, got p = {p}, n = {n}"
        )));
    }
    if n <= sigmas.len() + 1 {
        return Err(Error::param(
            "n must exceed the number of external columns + 1",
        ));
    }
    let root = SeedStream::new(seed);
    let out: Vec<Result<(f64, usize)>> = exec.map(reps, |r| {
        let rep = root.substream("null_t", r as u64);
        let mut redraws = 0;
        loop {
            let mut rng = rep.substream("attempt", redraws as u64).rng();
            let x = Matrix::from_row_major(n, p, normal_vec(n * p, &mut rng))?;
            let y = normal_vec(n, &mut rng);
            let z = Matrix::from_fn(n, sigmas.len(), |i, k| {
                y[i] + sigmas[k] * standard_normal(&mut rng)
            });
            match loo_linear_prevalidate(&x, &y) {
                Ok(t) => {
                    let fit = fit_linear_external(&t, &z, &y, false)?;
                    return Ok((fit.pv_statistic(), redraws));
                }
                Err(Error::LeverageOne { .. }) if redraws < 100 => redraws += 1,
                Err(e) => return Err(e),
            }
        }
    });
    let mut t = Vec::with_capacity(reps);
    let mut redraws = 0;
    for r in out {
        let (v, k) = r?;
        t.push(v);
        redraws += k;
    }
    Ok(EmpiricalNull { t, redraws })
}

/// Two-sample Kolmogorov–Smirnov statistic, exact over the pooled points.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::param("KS distance needs two nonempty samples"));
    }
    let a = crate::stats::sorted(a);
    let b = crate::stats::sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max(libm::fabs(i as f64 / na - j as f64 / nb));
    }
    Ok(d)
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::param("KS distance needs a nonempty sample"));
    }
    let s = crate::stats::sorted(sample);
    let n = s.len() as f64;
    Ok(s.iter().enumerate().fold(0.0f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageSummary {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    /// Mean and variance of `n d_ii` pooled over rows and draws.
    pub mean: f64,
    pub variance: f64,
    pub ks_chi2: f64,
    /// Largest `|mean_i d_ii - p/n|` over draws.
    pub max_trace_error: f64,
}

/// Leverage scaling check: `n d_ii` is approximately `chi2_p`.
pub fn leverage_check<E: Executor>(
    n: usize,
    p: usize,
    reps: usize,
    seed: u64,
    exec: &E,
) -> Result<LeverageSummary> {
    if p == 0 || p >= n || reps == 0 {
        return Err(Error::param(format!(
            "need 1 <= p < n and reps >= 1, got n = {n}, p = {p}"
        )));
    }
    let root = SeedStream::new(seed);
    let per: Vec<Result<Vec<f64>>> = exec.map(reps, |r| {
        let mut rng = root.substream("leverage", r as u64).rng();
        let x = Matrix::from_row_major(n, p, normal_vec(n * p, &mut rng))?;
        hat_diagonal(&x)
    });
    let mut pooled = Vec::with_capacity(n * reps);
    let mut max_trace_error = 0.0f64;
    for d in per {
        let d = d?;
        max_trace_error = max_trace_error.max(libm::fabs(mean(&d) - p as f64 / n as f64));
        pooled.extend(d.iter().map(|v| v * n as f64));
    }
    Ok(LeverageSummary {
        n,
        p,
        reps,
        mean: mean(&pooled),
        variance: variance(&pooled),
        ks_chi2: ks_one_sample(&pooled, |v| chi2_cdf(v, p as f64))?,
        max_trace_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    /// Mean `|ytilde'y - (N'N - y'Dy)|`.
    pub cross_gap: f64,
    /// Mean `|ytilde'ytilde - N'N|`.
    pub square_gap: f64,
    pub ydy_mean: f64,
    pub ydy_variance: f64,
    /// Sample covariance of `(d_11, d_22)` across draws.
    pub cov_d11_d22: f64,
}

/// Numerical check of the leave-one-out decomposition with `N = Q'y`
/// from a thin QR of `X` (same column space as the left singular vectors,
/// so `N'N = y'Hy`).
pub fn decomposition_check<E: Executor>(
    n: usize,
    p: usize,
    reps: usize,
    seed: u64,
    exec: &E,
) -> Result<DecompositionSummary> {
    if p == 0 || p >= n || reps < 2 {
        return Err(Error::param("need 1 <= p < n and reps >= 2"));
    }
    let root = SeedStream::new(seed);
    let per: Vec<Result<[f64; 5]>> = exec.map(reps, |r| {
        let mut rng = root.substream("decomposition", r as u64).rng();
        let x = Matrix::from_row_major(n, p, normal_vec(n * p, &mut rng))?;
        let y = normal_vec(n, &mut rng);
        let q = Qr::new(&x)?.thin_q();
        let nv = q.t_mul_vec(&y);
        let ntn: f64 = nv.iter().map(|v| v * v).sum();
        let d: Vec<f64> = (0..n)
            .map(|i| q.row(i).iter().map(|v| v * v).sum())
            .collect();
        let ydy: f64 = (0..n).map(|i| d[i] * y[i] * y[i]).sum();
        let t = loo_linear_prevalidate(&x, &y)?;
        let ty: f64 = t.iter().zip(&y).map(|(a, b)| a * b).sum();
        let tt: f64 = t.iter().map(|v| v * v).sum();
        Ok([
            libm::fabs(ty - (ntn - ydy)),
            libm::fabs(tt - ntn),
            ydy,
            d[0],
            d[1],
        ])
    });
    let rows: Vec<[f64; 5]> = per.into_iter().collect::<Result<_>>()?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let ydy = col(2);
    Ok(DecompositionSummary {
        n,
        p,
        reps,
        cross_gap: mean(&col(0)),
        square_gap: mean(&col(1)),
        ydy_mean: mean(&ydy),
        ydy_variance: variance(&ydy),
        cov_d11_d22: covariance(&col(3), &col(4)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::special::{chi2_pdf, normal_cdf};
    use approx::assert_abs_diff_eq;

    #[test]
    fn centering_point() {
        assert_eq!(null_law_statistic(5.0, 5), 0.0);
        assert_abs_diff_eq!(null_law_cdf(0.0, 5), chi2_cdf(5.0, 5.0), epsilon = 1e-14);
    }

    /// Simpson's rule for E[g(C)], C ~ chi2_p, on [0, 200].
    fn chi2_expectation(p: usize, g: impl Fn(f64) -> f64) -> f64 {
        let (a, b, m) = (1e-9, 200.0, 200_000);
        let h = (b - a) / m as f64;
        let f = |x: f64| g(x) * chi2_pdf(x, p as f64);
        let mut s = f(a) + f(b);
        for i in 1..m {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn null_law_mean_matches_quadrature() {
        let s = sample_null_law(5, 1_000_000, 1, &Sequential).unwrap();
        let m = mean(&s.draws);
        let se = sqrt(variance(&s.draws) / s.draws.len() as f64);
        let exact = chi2_expectation(5, |c| null_law_statistic(c, 5));
        assert!((m - exact).abs() < 3.0 * se, "{m} vs {exact} (se {se})");
    }

    #[test]
    fn null_law_lower_tail_is_heavier_than_normal() {
        let q = -1.644_853_626_951_472_2;
        assert!(null_law_cdf(q, 5) > normal_cdf(q) + 0.01);
        let s = sample_null_law(5, 200_000, 2, &Sequential).unwrap();
        let frac = s.draws.iter().filter(|&&v| v <= q).count() as f64 / 2e5;
        assert!((frac - null_law_cdf(q, 5)).abs() < 0.003, "{frac}");
    }

    #[test]
    fn scalar_weight() {
        let (w, c) = external_law_weights(&[2.0]).unwrap();
        assert_abs_diff_eq!(c, 1.0 / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[0], 1.0 / 5.0, epsilon = 1e-15);
        assert!(external_law_weights(&[0.0]).is_err());
        assert!(external_law_weights(&[]).is_err());
    }

    #[test]
    fn huge_noise_recovers_null_law() {
        let a = sample_external_law(
            5,
            &[1e3],
            100_000,
            3,
            ExternalLawForm::Combined,
            &Sequential,
        )
        .unwrap();
        let b = sample_null_law(5, 100_000, 4, &Sequential).unwrap();
        assert!(ks_distance(&a.draws, &b.draws).unwrap() < 0.01);
    }

    #[test]
    fn external_law_matches_recoded_formula() {
        // Direct e = 1 expression with scalar c = 1/(1 + s^2).
        let sigma = 1.0;
        let s = sample_external_law(
            5,
            &[sigma],
            100_000,
            5,
            ExternalLawForm::Combined,
            &Sequential,
        )
        .unwrap();
        let mut rng = SeedStream::new(99).rng();
        let c = 1.0 / (1.0 + sigma * sigma);
        let alt: Vec<f64> = (0..100_000)
            .map(|_| {
                let n = normal_vec(5, &mut rng);
                let a = normal_vec(5, &mut rng);
                let nn: f64 = n.iter().map(|v| v * v).sum();
                let na: f64 = n.iter().zip(&a).map(|(u, v)| u * v * sigma).sum();
                ((nn - 5.0) * (1.0 - c) - c * na) / (nn * (1.0 - c)).sqrt()
            })
            .collect();
        let se = |v: &[f64]| sqrt(variance(v) / v.len() as f64);
        assert!((mean(&s.draws) - mean(&alt)).abs() < 3.0 * (se(&s.draws) + se(&alt)));
        let var_se = |v: &[f64]| variance(v) * sqrt(2.0 / v.len() as f64);
        assert!(
            (variance(&s.draws) - variance(&alt)).abs() < 4.0 * (var_se(&s.draws) + var_se(&alt))
        );
    }

    #[test]
    fn ks_examples() {
        assert_eq!(
            ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_eq!(ks_distance(&[1.0, 2.0], &[5.0, 6.0, 7.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-15
        );
        assert!(ks_distance(&[], &[1.0]).is_err());
    }

    #[test]
    fn trace_identity_per_draw() {
        let s = leverage_check(50, 3, 20, 6, &Sequential).unwrap();
        assert!(s.max_trace_error < 1e-13);
        assert_abs_diff_eq!(s.mean, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn decomposition_gaps_shrink() {
        let small = decomposition_check(200, 3, 200, 7, &Sequential).unwrap();
        let large = decomposition_check(800, 3, 200, 8, &Sequential).unwrap();
        assert!(large.cross_gap < small.cross_gap);
        assert!(large.square_gap < small.square_gap);
        assert!(large.ydy_variance < small.ydy_variance);
        // The covariance is about -Var(d_ii)/(n - 1), so it needs small n to resolve.
        let tiny = decomposition_check(10, 3, 5000, 10, &Sequential).unwrap();
        assert!(tiny.cov_d11_d22 < 0.0);
    }

    #[test]
    fn empirical_null_is_reproducible() {
        let a = empirical_null_t(30, 3, &[1.0], 50, 9, &Sequential).unwrap();
        let b = empirical_null_t(30, 3, &[1.0], 50, 9, &Sequential).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.t.len(), 50);
    }
}
