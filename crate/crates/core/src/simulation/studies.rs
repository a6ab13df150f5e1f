use alloc::vec::Vec;
use libm::sqrt;
use serde::{Deserialize, Serialize};

use super::{generate, ScenarioConfig};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::external::fit_external;
use crate::permutation::{permutation_test_all, PermutationOptions, StatisticKind};
use crate::rng::SeedStream;
use crate::stats::{binomial_se, median, quantile};

pub const DEFAULT_ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];

/// Fraction of failed replicates above which a cell is flagged.
const MAX_FAILED: f64 = 0.05;

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() || alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::param(
            "alphas must be a nonempty list of values in [0, 1]",
        ));
    }
    Ok(())
}

/// Rejection rate `#{p <= alpha} / #p` and its binomial SE for each alpha.
fn rates(p: &[f64], alphas: &[f64]) -> (Vec<f64>, Vec<f64>) {
    alphas
        .iter()
        .map(|a| {
            let r = if p.is_empty() {
                f64::NAN
            } else {
                p.iter().filter(|&&v| v <= *a).count() as f64 / p.len() as f64
            };
            (r, binomial_se(r, p.len()))
        })
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIErrorReport {
    pub config: ScenarioConfig,
    pub alphas: Vec<f64>,
    pub rates: Vec<f64>,
    pub ses: Vec<f64>,
    pub reps: usize,
    /// Replicates whose pipeline failed; excluded from the rates.
    pub failed: usize,
    /// Replicates whose external logistic fit hit separation (kept).
    pub separated: usize,
    /// Replicates where an internal fit used a fallback (ridge, permissive cutoff).
    pub internal_fallbacks: usize,
    /// More than 5% of replicates failed.
    pub flagged: bool,
}

struct RepOutcome {
    p: f64,
    separated: bool,
    fallback: bool,
}

fn analytical_reps<E: Executor>(
    config: &ScenarioConfig,
    reps: usize,
    root: SeedStream,
    exec: &E,
) -> Vec<Option<RepOutcome>> {
    let pipeline = config.pipeline();
    exec.map(reps, |r| {
        let s = root.substream("rep", r as u64);
        let data = generate(config, s.substream("data", 0)).ok()?;
        let (pv, fit) = pipeline.run(&data, s.substream("pipeline", 0)).ok()?;
        let p = fit.p_pv_one_sided.filter(|p| p.is_finite())?;
        Some(RepOutcome {
            p,
            separated: fit.separated,
            fallback: pv.any_flagged(),
        })
    })
}

/// Level of the analytical one-sided test for the pre-validated coefficient.
pub fn estimate_type1<E: Executor>(
    config: &ScenarioConfig,
    alphas: &[f64],
    reps: usize,
    seed: u64,
    exec: &E,
) -> Result<TypeIErrorReport> {
    config.validate()?;
    check_alphas(alphas)?;
    if reps == 0 {
        return Err(Error::param("reps must be >= 1"));
    }
    let out = analytical_reps(
        config,
        reps,
        SeedStream::new(seed).substream("type1", 0),
        exec,
    );
    let ok: Vec<&RepOutcome> = out.iter().flatten().collect();
    let p: Vec<f64> = ok.iter().map(|o| o.p).collect();
    let (rates, ses) = rates(&p, alphas);
    let failed = reps - ok.len();
    Ok(TypeIErrorReport {
        config: config.clone(),
        alphas: alphas.to_vec(),
        rates,
        ses,
        reps,
        failed,
        separated: ok.iter().filter(|o| o.separated).count(),
        internal_fallbacks: ok.iter().filter(|o| o.fallback).count(),
        flagged: failed as f64 > MAX_FAILED * reps as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindLevel {
    pub kind: StatisticKind,
    pub rates: Vec<f64>,
    pub ses: Vec<f64>,
    /// `|rate - alpha| <= 2 SE(alpha)`, with SE from the nominal alpha.
    pub within_2se: Vec<bool>,
    pub within_3se: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationLevelReport {
    pub config: ScenarioConfig,
    pub alphas: Vec<f64>,
    pub b: usize,
    pub outer_reps: usize,
    /// Outer replicates that failed or had more than 5% failed permutations.
    pub failed: usize,
    /// Outer replicates whose observed external fit hit separation.
    pub separated: usize,
    pub kinds: Vec<KindLevel>,
    pub flagged: bool,
}

/// Level of the permutation test for all three statistic kinds.
pub fn estimate_permutation_level<E: Executor>(
    config: &ScenarioConfig,
    alphas: &[f64],
    outer_reps: usize,
    b: usize,
    seed: u64,
    exec: &E,
) -> Result<PermutationLevelReport> {
    config.validate()?;
    check_alphas(alphas)?;
    if outer_reps == 0 || b == 0 {
        return Err(Error::param("outer reps and permutations must be >= 1"));
    }
    let pipeline = config.pipeline();
    let root = SeedStream::new(seed).substream("permutation_level", 0);
    let out: Vec<Option<(Vec<f64>, bool)>> = exec.map(outer_reps, |r| {
        let s = root.substream("rep", r as u64);
        let data = generate(config, s.substream("data", 0)).ok()?;
        let opts = PermutationOptions::new(b, s.substream("permutation", 0).as_seed());
        let res = permutation_test_all(&data, &pipeline, opts, &Sequential).ok()?;
        if res.iter().any(|r| r.invalid || !r.p_value.is_finite()) {
            return None;
        }
        let (_, fit) = pipeline
            .run(&data, SeedStream::new(opts.seed).substream("observed", 0))
            .ok()?;
        Some((res.iter().map(|r| r.p_value).collect(), fit.separated))
    });
    let ok: Vec<&(Vec<f64>, bool)> = out.iter().flatten().collect();
    let failed = outer_reps - ok.len();
    let kinds = StatisticKind::ALL
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let p: Vec<f64> = ok.iter().map(|(v, _)| v[k]).collect();
            let (rates, ses) = rates(&p, alphas);
            let band = |m: f64| -> Vec<bool> {
                alphas
                    .iter()
                    .zip(&rates)
                    .map(|(a, r)| libm::fabs(r - a) <= m * binomial_se(*a, p.len()))
                    .collect()
            };
            KindLevel {
                kind,
                within_2se: band(2.0),
                within_3se: band(3.0),
                rates,
                ses,
            }
        })
        .collect();
    Ok(PermutationLevelReport {
        config: config.clone(),
        alphas: alphas.to_vec(),
        b,
        outer_reps,
        failed,
        separated: ok.iter().filter(|(_, s)| *s).count(),
        kinds,
        flagged: failed as f64 > MAX_FAILED * outer_reps as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub null_config: ScenarioConfig,
    pub alt_config: ScenarioConfig,
    pub alphas: Vec<f64>,
    pub statistic: StatisticKind,
    pub reps: usize,
    pub b: usize,
    /// Empirical alpha-quantiles of the analytical p-value under the null.
    pub adjusted_cutoffs: Vec<f64>,
    pub analytical_power_adjusted: Vec<f64>,
    pub analytical_power_nominal: Vec<f64>,
    pub permutation_power: Vec<f64>,
    pub failed_null: usize,
    pub failed_alt: usize,
}

/// Power of the analytical test at bias-adjusted cutoffs and of the
/// permutation test at the nominal level.
///
/// The cutoff for each alpha is the empirical alpha-quantile of the
/// analytical p-value simulated under `null_config`, so the adjusted
/// analytical test has level alpha by construction.
#[allow(clippy::too_many_arguments)]
pub fn estimate_power<E: Executor>(
    null_config: &ScenarioConfig,
    alt_config: &ScenarioConfig,
    alphas: &[f64],
    reps: usize,
    b: usize,
    statistic: StatisticKind,
    seed: u64,
    exec: &E,
) -> Result<PowerReport> {
    null_config.validate()?;
    alt_config.validate()?;
    check_alphas(alphas)?;
    if !null_config.same_design(alt_config) {
        return Err(Error::param(
            "null and alternative configs may differ only in beta, s and mu",
        ));
    }
    if reps == 0 || b == 0 {
        return Err(Error::param("reps and permutations must be >= 1"));
    }
    let root = SeedStream::new(seed).substream("power", 0);
    let null: Vec<f64> = analytical_reps(null_config, reps, root.substream("null", 0), exec)
        .into_iter()
        .flatten()
        .map(|o| o.p)
        .collect();
    if null.is_empty() {
        return Err(Error::NoConvergence("every null replicate failed".into()));
    }
    let cutoffs: Vec<f64> = alphas.iter().map(|a| quantile(&null, *a)).collect();

    let pipeline = alt_config.pipeline();
    let alt_root = root.substream("alt", 0);
    let alt: Vec<Option<(f64, f64)>> = exec.map(reps, |r| {
        let s = alt_root.substream("rep", r as u64);
        let data = generate(alt_config, s.substream("data", 0)).ok()?;
        let opts = PermutationOptions::new(b, s.substream("permutation", 0).as_seed());
        let res = permutation_test_all(&data, &pipeline, opts, &Sequential).ok()?;
        let perm = res.iter().find(|r| r.statistic_kind == statistic)?;
        if perm.invalid {
            return None;
        }
        // The observed fit inside the permutation test is the analytical one.
        let (_, fit) = pipeline
            .run(&data, SeedStream::new(opts.seed).substream("observed", 0))
            .ok()?;
        Some((fit.p_pv_one_sided?, perm.p_value))
    });
    let ok: Vec<(f64, f64)> = alt.iter().flatten().copied().collect();
    let frac = |f: &dyn Fn(&(f64, f64)) -> bool| {
        ok.iter().filter(|v| f(v)).count() as f64 / ok.len().max(1) as f64
    };
    Ok(PowerReport {
        null_config: null_config.clone(),
        alt_config: alt_config.clone(),
        alphas: alphas.to_vec(),
        statistic,
        reps,
        b,
        analytical_power_adjusted: cutoffs.iter().map(|c| frac(&|v| v.0 <= *c)).collect(),
        analytical_power_nominal: alphas.iter().map(|a| frac(&|v| v.0 <= *a)).collect(),
        permutation_power: alphas.iter().map(|a| frac(&|v| v.1 <= *a)).collect(),
        adjusted_cutoffs: cutoffs,
        failed_null: reps - null.len(),
        failed_alt: reps - ok.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub config: ScenarioConfig,
    pub reps: usize,
    pub median_pv: f64,
    pub median_benchmark: f64,
    /// `median_pv - median_benchmark`.
    pub difference: f64,
    /// Approximate Monte Carlo SE of the difference (IQR-based).
    pub se_difference: f64,
    pub failed: usize,
    pub separated_pv: usize,
    pub separated_benchmark: usize,
}

/// Approximate SE of a sample median: `1.2533 * (IQR / 1.349) / sqrt(n)`.
fn median_se(x: &[f64]) -> f64 {
    let iqr = quantile(x, 0.75) - quantile(x, 0.25);
    1.2533 * (iqr / 1.349) / sqrt(x.len() as f64)
}

/// Median of the pre-validated external coefficient against an
/// independent-test-set benchmark.
///
/// The benchmark fits the internal rule on the whole dataset, applies it
/// to a fresh dataset of the same size and fits the external model there.
pub fn coefficient_bias_study<E: Executor>(
    config: &ScenarioConfig,
    reps: usize,
    seed: u64,
    exec: &E,
) -> Result<BiasReport> {
    config.validate()?;
    if reps == 0 {
        return Err(Error::param("reps must be >= 1"));
    }
    let pipeline = config.pipeline();
    let spec = config.internal_spec();
    let root = SeedStream::new(seed).substream("bias", 0);
    let out: Vec<Option<[f64; 4]>> = exec.map(reps, |r| {
        let s = root.substream("rep", r as u64);
        let data = generate(config, s.substream("data", 0)).ok()?;
        let (_, fit) = pipeline.run(&data, s.substream("pipeline", 0)).ok()?;
        let model = spec
            .fit(data.x(), data.y(), s.substream("benchmark_fit", 0))
            .ok()?;
        let test = generate(config, s.substream("test_data", 0)).ok()?;
        let pred = model.predict(test.x()).ok()?;
        let bench = fit_external(
            pipeline.external,
            Some(&pred),
            test.z(),
            test.y(),
            pipeline.intercept,
        )
        .ok()?;
        Some([
            fit.pv_coefficient(),
            bench.pv_coefficient(),
            f64::from(u8::from(fit.separated)),
            f64::from(u8::from(bench.separated)),
        ])
    });
    let ok: Vec<&[f64; 4]> = out.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::NoConvergence("every bias replicate failed".into()));
    }
    let pv: Vec<f64> = ok.iter().map(|v| v[0]).collect();
    let bench: Vec<f64> = ok.iter().map(|v| v[1]).collect();
    let (mp, mb) = (median(&pv), median(&bench));
    Ok(BiasReport {
        config: config.clone(),
        reps,
        median_pv: mp,
        median_benchmark: mb,
        difference: mp - mb,
        se_difference: libm::hypot(median_se(&pv), median_se(&bench)),
        failed: reps - ok.len(),
        separated_pv: ok.iter().filter(|v| v[2] == 1.0).count(),
        separated_benchmark: ok.iter().filter(|v| v[3] == 1.0).count(),
    })
}
