//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test --release --test acceptance` runs everything; extra numeric
//! arguments (`-- 3 7`) select criteria. All thresholds live in
//! `tolerances.rs`. The process fails only when a criterion outside
//! `KNOWN_FAILURES` fails.

mod tolerances;

use std::time::Instant;

use rand::Rng;

use prevalidation::campaign::{Campaign, Study};
use prevalidation::cli::{simulate, SimulateArgs};
use prevalidation::core::asymptotics::{
    empirical_null_t, ks_distance, ks_one_sample, leverage_check, sample_external_law,
    sample_null_law, ExternalLawForm,
};
use prevalidation::core::external::{fit_external, fit_linear_external, Column};
use prevalidation::core::linalg::{dot, Qr};
use prevalidation::core::prevalidation::{loo_linear_prevalidate, prevalidate_with_scheme};
use prevalidation::core::rng::normal_vec;
use prevalidation::core::simulation::{
    coefficient_bias_study, estimate_permutation_level, estimate_power, estimate_type1,
    ScenarioConfig,
};
use prevalidation::core::special::student_t_cdf;
use prevalidation::core::stats::binomial_se;
use prevalidation::core::{
    Dataset, ExternalKind, FoldScheme, InternalModelSpec, Matrix, OutcomeKind, SeedStream,
    StatisticKind,
};
use prevalidation::report::{render, Format};
use prevalidation::Rayon;
use tolerances::*;

const ALPHAS: [f64; 3] = [0.01, 0.05, 0.1];
const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn exec() -> Rayon {
    Rayon::new(0).expect("thread pool")
}

fn random_design(rng: &mut impl Rng, n: usize, p: usize) -> (Matrix, Vec<f64>) {
    let x = Matrix::from_row_major(n, p, normal_vec(n * p, rng)).unwrap();
    let y = normal_vec(n, rng);
    (x, y)
}

/// Leave-one-out refits agree with the closed form.
fn c1() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..IDENTITY_INSTANCES {
        let s = SeedStream::new(SEED).substream("c1", i as u64);
        let mut rng = s.rng();
        let n = rng.random_range(10..=100);
        let p = rng.random_range(1..=n / 2);
        let (x, y) = random_design(&mut rng, n, p);
        let data =
            Dataset::without_external(y.clone(), x.clone(), OutcomeKind::Continuous).unwrap();
        let refit =
            prevalidate_with_scheme(&data, &InternalModelSpec::Ols, FoldScheme::LeaveOneOut, s)
                .unwrap();
        let closed = loo_linear_prevalidate(&x, &y).unwrap();
        for (a, b) in refit.ytilde.iter().zip(&closed) {
            worst = worst.max((a - b).abs());
        }
    }
    outcome(
        worst < EXACT,
        format!("max |refit - closed form| = {worst:.2e} over {IDENTITY_INSTANCES} instances"),
    )
}

/// Residualizes `v` on the columns of `a`.
fn residual(a: &Matrix, v: &[f64]) -> Vec<f64> {
    let qr = Qr::new(a).unwrap();
    let mut r = v.to_vec();
    qr.apply_qt(&mut r);
    r[..a.ncols()].iter_mut().for_each(|x| *x = 0.0);
    qr.apply_q(&mut r);
    r
}

/// The pre-validated coefficient equals the partialled-out ratio.
fn c2() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..IDENTITY_INSTANCES {
        let mut rng = SeedStream::new(SEED).substream("c2", i as u64).rng();
        let n = rng.random_range(10..=100);
        let e = rng.random_range(1..=3);
        let y = normal_vec(n, &mut rng);
        let t: Vec<f64> = y.iter().map(|v| 0.5 * v + rng.random::<f64>()).collect();
        let z = Matrix::from_fn(n, e, |i, _| y[i] + 2.0 * rng.random::<f64>());
        let intercept = i % 2 == 0;
        let fit = fit_linear_external(&t, &z, &y, intercept).unwrap();
        let others = if intercept {
            z.hcat(&Matrix::from_fn(n, 1, |_, _| 1.0)).unwrap()
        } else {
            z
        };
        let (rt, ry) = (residual(&others, &t), residual(&others, &y));
        let closed = dot(&rt, &ry) / dot(&rt, &rt);
        worst = worst.max((fit.pv_coefficient() - closed).abs() / closed.abs().max(1.0));
    }
    outcome(
        worst < EXACT,
        format!("max relative gap = {worst:.2e} over {IDENTITY_INSTANCES} instances"),
    )
}

fn band(target: f64, reps: usize) -> f64 {
    3.0 * binomial_se(target, reps) + TYPE1_SLACK
}

/// Analytical test level in four reference cells.
fn c3() -> Outcome {
    let k = FoldScheme::KFold;
    let cells = [
        (
            "linear_linear n=10 p=5 K=5",
            ScenarioConfig::linear_linear(10, 5, k(5)),
            0.079,
            TYPE1_REPS,
        ),
        (
            "linear_linear n=50 p=5 K=10",
            ScenarioConfig::linear_linear(50, 5, k(10)),
            0.062,
            TYPE1_REPS,
        ),
        (
            "lasso_linear n=10 p=100 l=5 K=5",
            ScenarioConfig::lasso_linear(10, 100, 5, k(5)),
            0.033,
            TYPE1_REPS,
        ),
        (
            "lda_logistic n=40 p=1000 g=10 K=10",
            ScenarioConfig::lda_logistic(40, 1000, 10, k(10)),
            0.106,
            TYPE1_REPS_LDA,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (label, config, target, reps)) in cells.into_iter().enumerate() {
        let r = estimate_type1(&config, &[0.05], reps, SEED + i as u64, &exec()).unwrap();
        let tol = band(target, reps);
        let ok = (r.rates[0] - target).abs() <= tol && !r.flagged;
        pass &= ok;
        parts.push(format!(
            "{label}: {:.4} vs {target} +/- {tol:.4} {}",
            r.rates[0],
            if ok { "ok" } else { "OUT" }
        ));
    }
    outcome(pass, parts.join("; "))
}

/// Empirical t without external predictors follows the first limit, not Student t.
fn c4() -> Outcome {
    let ex = exec();
    let t = empirical_null_t(LIMIT_N, LIMIT_P, &[], LIMIT_REPS, SEED, &ex)
        .unwrap()
        .t;
    let law = sample_null_law(LIMIT_P, LIMIT_DRAWS, SEED + 1, &ex)
        .unwrap()
        .draws;
    let ks = ks_distance(&t, &law).unwrap();
    let df = (LIMIT_N - 1) as f64;
    let ks_t = ks_one_sample(&t, |x| student_t_cdf(x, df)).unwrap();
    outcome(
        ks < KS_NULL_LAW && ks_t > KS_STUDENT_T_MIN,
        format!(
            "KS to limit {ks:.4} (< {KS_NULL_LAW}); KS to t_{df} {ks_t:.4} (> {KS_STUDENT_T_MIN})"
        ),
    )
}

/// One external predictor: empirical t vs the second limit; huge noise recovers the first.
fn c5() -> Outcome {
    let ex = exec();
    let t = empirical_null_t(LIMIT_N, LIMIT_P, &[1.0], LIMIT_REPS, SEED + 2, &ex)
        .unwrap()
        .t;
    let law = sample_external_law(
        LIMIT_P,
        &[1.0],
        LIMIT_DRAWS,
        SEED + 3,
        ExternalLawForm::Combined,
        &ex,
    )
    .unwrap()
    .draws;
    let split = sample_external_law(
        LIMIT_P,
        &[1.0],
        LIMIT_DRAWS,
        SEED + 3,
        ExternalLawForm::Split,
        &ex,
    )
    .unwrap()
    .draws;
    let big = sample_external_law(
        LIMIT_P,
        &[1e3],
        LIMIT_DRAWS,
        SEED + 4,
        ExternalLawForm::Combined,
        &ex,
    )
    .unwrap()
    .draws;
    let law1 = sample_null_law(LIMIT_P, LIMIT_DRAWS, SEED + 5, &ex)
        .unwrap()
        .draws;
    let ks = ks_distance(&t, &law).unwrap();
    let ks_split = ks_distance(&t, &split).unwrap();
    let ks_big = ks_distance(&big, &law1).unwrap();
    outcome(
        ks < KS_EXTERNAL_LAW && ks_big < KS_LARGE_SIGMA,
        format!(
            "KS to limit {ks:.4} (< {KS_EXTERNAL_LAW}); sigma=1e3 vs first limit {ks_big:.4} (< {KS_LARGE_SIGMA}); \
             two-term form for reference {ks_split:.4}"
        ),
    )
}

/// Scaled leverages behave like chi-square and average exactly p/n.
fn c6() -> Outcome {
    let s = leverage_check(LIMIT_N, LIMIT_P, LEVERAGE_DRAWS, SEED + 6, &exec()).unwrap();
    let p = LIMIT_P as f64;
    outcome(
        (s.mean - p).abs() <= LEVERAGE_MEAN && s.ks_chi2 < KS_LEVERAGE && s.max_trace_error < LEVERAGE_TRACE,
        format!(
            "mean {:.4} ({p} +/- {LEVERAGE_MEAN}); KS to chi2 {:.4} (< {KS_LEVERAGE}); trace error {:.1e}",
            s.mean, s.ks_chi2, s.max_trace_error
        ),
    )
}

/// Permutation test holds its level for every statistic in one null config per scenario.
fn c7() -> Outcome {
    let k = FoldScheme::KFold;
    let configs = [
        ScenarioConfig::linear_linear(20, 5, k(5)),
        ScenarioConfig::lasso_linear(10, 100, 5, k(5)),
        ScenarioConfig::lda_logistic(40, 1000, 10, k(10)),
    ];
    // Without a +1 correction the count rule rejects with probability
    // (floor(alpha B) + 1) / (B + 1) under an exact null, above alpha.
    let rule_level: Vec<f64> = ALPHAS
        .iter()
        .map(|a| ((a * PERM_B as f64).floor() + 1.0) / (PERM_B as f64 + 1.0))
        .collect();
    let mut pass = true;
    let mut rule_ok = true;
    let mut parts = Vec::new();
    for (i, config) in configs.iter().enumerate() {
        let r = estimate_permutation_level(
            config,
            &ALPHAS,
            PERM_OUTER,
            PERM_B,
            SEED + 10 + i as u64,
            &exec(),
        )
        .unwrap();
        let ok = r.kinds.iter().all(|k| k.within_3se.iter().all(|&b| b));
        rule_ok &= r.kinds.iter().all(|k| {
            k.rates
                .iter()
                .zip(&rule_level)
                .all(|(rate, l)| (rate - l).abs() <= 3.0 * binomial_se(*l, PERM_OUTER))
        });
        pass &= ok;
        let rates: Vec<String> = r
            .kinds
            .iter()
            .map(|k| {
                let v: Vec<String> = k.rates.iter().map(|x| format!("{x:.3}")).collect();
                format!("{} [{}]", k.kind.name(), v.join(" "))
            })
            .collect();
        parts.push(format!(
            "{} {}{}",
            config.scenario.name(),
            rates.join(" "),
            if ok { "" } else { " OUT" }
        ));
    }
    let levels: Vec<String> = rule_level.iter().map(|l| format!("{l:.4}")).collect();
    parts.push(format!(
        "all within 3 SE of the count rule's exact level [{}]: {}",
        levels.join(" "),
        if rule_ok { "yes" } else { "no" }
    ));
    outcome(pass, parts.join("; "))
}

/// Moderate-signal alternative used for the power comparison (chosen here).
fn power_alternative() -> (ScenarioConfig, ScenarioConfig) {
    let null = ScenarioConfig::linear_linear(20, 5, FoldScheme::KFold(5));
    let mut alt = null.clone();
    alt.beta = vec![0.9];
    (null, alt)
}

/// Permutation power matches analytical power at the bias-adjusted cutoff.
fn c8() -> Outcome {
    let (null, alt) = power_alternative();
    let r = estimate_power(
        &null,
        &alt,
        &[0.05],
        POWER_REPS,
        POWER_B,
        StatisticKind::TOrZ,
        SEED + 20,
        &exec(),
    )
    .unwrap();
    let gap = (r.permutation_power[0] - r.analytical_power_adjusted[0]).abs();
    outcome(
        gap <= POWER_GAP,
        format!(
            "permutation {:.3}, adjusted analytical {:.3} (cutoff {:.4}), nominal analytical {:.3}; gap {gap:.3} (<= {POWER_GAP:.3})",
            r.permutation_power[0], r.analytical_power_adjusted[0], r.adjusted_cutoffs[0], r.analytical_power_nominal[0]
        ),
    )
}

/// Median bias of the pre-validated coefficient against an independent test set.
fn c9() -> Outcome {
    let mut linear = ScenarioConfig::linear_linear(50, 5, FoldScheme::KFold(10));
    linear.beta = vec![1.0, 0.5];
    let lin = coefficient_bias_study(&linear, BIAS_REPS, SEED + 30, &exec()).unwrap();
    let lasso = |k| {
        let mut c = ScenarioConfig::lasso_linear(30, 100, 5, FoldScheme::KFold(k));
        c.s = 5;
        c.beta = vec![1.0; 5];
        coefficient_bias_study(&c, BIAS_REPS, SEED + 31, &exec()).unwrap()
    };
    let (l5, l10) = (lasso(5), lasso(10));
    let ok_lin = lin.difference.abs() <= BIAS_LINEAR;
    let ok_dir = l5.difference <= 0.0 && l10.difference <= 0.0;
    let ok_k =
        l10.difference.abs() <= l5.difference.abs() + 2.0 * l10.se_difference.max(l5.se_difference);
    outcome(
        ok_lin && ok_dir && ok_k,
        format!(
            "linear: {:.4} vs {:.4} (|diff| {:.4} <= {BIAS_LINEAR}); lasso K=5 diff {:.4}, K=10 diff {:.4} (se {:.4})",
            lin.median_pv,
            lin.median_benchmark,
            lin.difference.abs(),
            l5.difference,
            l10.difference,
            l10.se_difference.max(l5.se_difference)
        ),
    )
}

/// A predictor that is not pre-validated gets uniform null p-values.
fn c10() -> Outcome {
    let ex = exec();
    let root = SeedStream::new(SEED).substream("c10", 0);
    let ps: Vec<f64> = prevalidation::core::Executor::map(&ex, EXOGENOUS_REPS, |r| {
        let mut rng = root.substream("rep", r as u64).rng();
        let n = 50;
        let y = normal_vec(n, &mut rng);
        let noise = normal_vec(2 * n, &mut rng);
        // column 0: competitor related to y, column 1: exogenous under the null
        let z = Matrix::from_fn(n, 2, |i, k| {
            if k == 0 {
                y[i] + noise[i]
            } else {
                noise[n + i]
            }
        });
        let fit = fit_external(ExternalKind::Linear, None, &z, &y, true).unwrap();
        fit.p_values[fit.index_of(Column::External(1)).unwrap()]
    });
    let ks = ks_one_sample(&ps, |u| u.clamp(0.0, 1.0)).unwrap();
    outcome(
        ks < KS_EXOGENOUS,
        format!("KS to uniform {ks:.4} (< {KS_EXOGENOUS}) over {EXOGENOUS_REPS} reps"),
    )
}

/// Reports are byte-identical across worker counts.
fn c11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut linear = ScenarioConfig::linear_linear(12, 3, FoldScheme::KFold(4));
    linear.beta = vec![0.2];
    let campaign = |study, reps| Campaign {
        seed: 99,
        reps,
        alphas: ALPHAS.to_vec(),
        study,
        permutations: Some(25),
        cells: vec![
            prevalidation::campaign::Cell {
                config: linear.clone(),
                fold_grid: vec![FoldScheme::KFold(3), FoldScheme::LeaveOneOut],
                reps: None,
            },
            prevalidation::campaign::Cell {
                config: ScenarioConfig::lda_logistic(20, 40, 5, FoldScheme::KFold(5)),
                fold_grid: Vec::new(),
                reps: None,
            },
        ],
    };
    let mut identical = true;
    let mut files = 0;
    for (i, (study, reps)) in [(Study::Type1, 300), (Study::PermutationLevel, 30)]
        .into_iter()
        .enumerate()
    {
        let path = dir.path().join(format!("grid{i}.toml"));
        std::fs::write(&path, toml::to_string(&campaign(study, reps)).unwrap()).unwrap();
        let mut outputs = Vec::new();
        for workers in [1, 2, 4] {
            let args = SimulateArgs {
                grid: path.clone(),
                reps: None,
                permutations: None,
                alpha: None,
                output: prevalidation::cli::OutputArgs {
                    seed: None,
                    workers,
                    out: None,
                    format: Format::Json,
                },
            };
            let (config, report) = simulate(&args).unwrap();
            let rendered: Vec<String> = [Format::Json, Format::Csv, Format::Text]
                .into_iter()
                .flat_map(|f| render(&config, &report, f))
                .map(|r| r.contents)
                .collect();
            outputs.push((config.hash(), rendered));
        }
        files += outputs[0].1.len();
        identical &= outputs.windows(2).all(|w| w[0] == w[1]);
    }
    outcome(
        identical,
        format!("{files} rendered reports compared across 1, 2 and 4 workers"),
    )
}

fn main() {
    let criteria: [(usize, fn() -> Outcome); 11] = [
        (1, c1),
        (2, c2),
        (3, c3),
        (4, c4),
        (5, c5),
        (6, c6),
        (7, c7),
        (8, c8),
        (9, c9),
        (10, c10),
        (11, c11),
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut unexpected = Vec::new();
    for (id, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2}: {status}  {}  [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
