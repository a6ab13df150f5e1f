//! The `pvtool` command line.
//!
//! Exit status: 0 on success, 2 for invalid input or configuration
//! (including unknown flags), 3 for numerical failures, 4 for file-system
//! errors.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use prevalidation_core::asymptotics::{
    empirical_null_t, ks_distance, ks_one_sample, leverage_check, null_law_cdf,
    sample_external_law, sample_null_law, ExternalLawForm,
};
use prevalidation_core::external::fit_external;
use prevalidation_core::models::LdaOutput;
use prevalidation_core::permutation::{permutation_test_all, PermutationOptions, Pipeline};
use prevalidation_core::prevalidation::{cv_error, prevalidate_with_scheme};
use prevalidation_core::simulation::DEFAULT_ALPHAS;
use prevalidation_core::special::student_t_cdf;
use prevalidation_core::stats::variance;
use prevalidation_core::{
    Error, ExternalKind, FoldScheme, InternalModelSpec, OutcomeKind, SeedStream,
};

use crate::campaign::Campaign;
use crate::io::{load_dataset, samples_csv, CsvError, Loaded};
use crate::parallel::Rayon;
use crate::report::{
    config_hash, render, AnalyzeReport, AsymptoticsReport, Bound, Check, CvErrorReport, CvRow,
    Format, PermtestReport, ProvenanceRow, RepeatRow, Report,
};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Seed used when `--seed` is not given; it is still written to every report.
pub const DEFAULT_SEED: u64 = 1;

/// Pass thresholds for `asymptotics`.
pub mod thresholds {
    /// Empirical t vs the no-external limit sampler.
    pub const KS_NULL_LAW: f64 = 0.035;
    /// Empirical t must sit at least this far from the Student t reference.
    pub const KS_T_REFERENCE: f64 = 0.05;
    /// Empirical t with external predictors vs the two-predictor sampler.
    pub const KS_EXTERNAL_LAW: f64 = 0.04;
    /// Two-predictor sampler with a huge noise SD vs the no-external limit sampler.
    pub const KS_LARGE_SIGMA: f64 = 0.01;
    /// Noise SD used for the large-sigma reduction.
    pub const LARGE_SIGMA: f64 = 1e3;
    /// Allowed `|mean(n d_ii) - p|` as a fraction of `p`.
    pub const LEVERAGE_MEAN_REL: f64 = 0.03;
    pub const KS_LEVERAGE: f64 = 0.03;
    /// `mean_i d_ii = p/n` holds up to rounding.
    pub const TRACE: f64 = 1e-12;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_VALIDATION,
            Self::Csv(CsvError::Open { .. }) | Self::Io { .. } => EXIT_IO,
            Self::Csv(_) => EXIT_VALIDATION,
            Self::Core { source, .. } if source.is_validation() => EXIT_VALIDATION,
            Self::Core { .. } => EXIT_NUMERICAL,
        }
    }
}

fn in_module(module: &'static str) -> impl Fn(Error) -> CliError {
    move |source| CliError::Core { module, source }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "pvtool",
    version,
    about = "Pre-validation analysis, permutation tests and simulation campaigns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pre-validate a rule on a CSV dataset and fit the external model.
    Analyze(AnalyzeArgs),
    /// Permutation test for the pre-validated predictor, over repeated fold draws.
    Permtest(PermtestArgs),
    /// Run a simulation campaign described by a TOML grid.
    Simulate(SimulateArgs),
    /// Compare the leave-one-out t statistic with its limiting laws.
    Asymptotics(AsymptoticsArgs),
    /// Cross-validated error rates of one or more rules.
    CvError(CvErrorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExternalArg {
    Linear,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutcomeArg {
    Continuous,
    Binary,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Does not affect results.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Directory for report files; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Outcome type; inferred from `y` when absent.
    #[arg(long, value_enum)]
    pub outcome: Option<OutcomeArg>,
    /// JSON object, a JSON file, or shorthand such as `ols`, `lasso_l:5`, `lda_top_g:10`.
    #[arg(long)]
    pub spec: String,
    /// External model; logistic for 0/1 outcomes, linear otherwise.
    #[arg(long, value_enum)]
    pub external: Option<ExternalArg>,
    /// Fold count: 1 (re-use), K >= 2, or `n`.
    #[arg(long, default_value = "10")]
    pub folds: String,
    #[arg(long, value_enum, default_value_t = OnOff::On)]
    pub intercept: OnOff,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PermtestArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, visible_alias = "B", default_value_t = 1000)]
    pub permutations: usize,
    /// Independent fold draws, each with its own permutation test.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Keep the observed folds inside every permutation instead of redrawing.
    #[arg(long)]
    pub fixed_folds: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML campaign file.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, visible_alias = "B")]
    pub permutations: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AsymptoticsArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    /// External noise SDs for the two-predictor law.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub sigma: Vec<f64>,
    /// Pipeline replicates per empirical sample.
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    /// Draws per limiting-law sample.
    #[arg(long, default_value_t = 100_000)]
    pub draws: usize,
    /// Designs pooled for the leverage check.
    #[arg(long, default_value_t = 200)]
    pub leverage_draws: usize,
    /// Also write every sample as a CSV column (needs --out).
    #[arg(long)]
    pub samples: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CvErrorArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub outcome: Option<OutcomeArg>,
    /// One or more rules (repeat the flag).
    #[arg(long, required = true)]
    pub spec: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub folds: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataRef {
    pub path: String,
    pub sha256: String,
    pub outcome: OutcomeKind,
    pub n: usize,
    pub p: usize,
    pub e: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsParams {
    pub n: usize,
    pub p: usize,
    pub sigmas: Vec<f64>,
    pub reps: usize,
    pub draws: usize,
    pub leverage_draws: usize,
}

/// Fully resolved run settings; this is what reports embed and hash.
///
/// The worker count is deliberately not serialized: it cannot change the
/// results, and leaving it out keeps reports byte-identical across machines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataRef>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub spec: Vec<InternalModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalKind>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub folds: Vec<FoldScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intercept: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub redraw_folds: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alphas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub campaign: Option<Campaign>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<AsymptoticsParams>,
    pub format: Format,
    #[serde(skip)]
    pub workers: usize,
}

impl RunConfig {
    fn new(command: &'static str, seed: u64, output: &OutputArgs) -> Self {
        Self {
            command,
            seed,
            data: None,
            spec: Vec::new(),
            external: None,
            folds: Vec::new(),
            intercept: None,
            permutations: None,
            repeats: None,
            redraw_folds: None,
            alphas: Vec::new(),
            campaign: None,
            asymptotics: None,
            format: output.format,
            workers: output.workers,
        }
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }
}

/// Parses a rule from JSON text, a JSON file, or `name[:arg[:arg]]` shorthand.
pub fn parse_spec(s: &str) -> Result<InternalModelSpec, CliError> {
    let s = s.trim();
    let bad = |msg: String| CliError::Usage(format!("--spec `{s}`: {msg}"));
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| bad(e.to_string()));
    }
    let path = Path::new(s);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        return serde_json::from_str(&text).map_err(|e| bad(e.to_string()));
    }
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<usize, CliError> {
        parts
            .get(i)
            .ok_or_else(|| bad(format!("missing argument {i}")))?
            .parse()
            .map_err(|_| bad(format!("argument {i} is not a non-negative integer")))
    };
    let spec = match (parts[0], parts.len()) {
        ("ols", 1) => InternalModelSpec::Ols,
        ("lasso_l", 2) => InternalModelSpec::LassoL { l: num(1)? },
        ("lda_top_g", 2) => InternalModelSpec::lda(num(1)?),
        ("lda_top_g", 3) => InternalModelSpec::LdaTopG {
            g: num(1)?,
            output: match parts[2] {
                "indicator" => LdaOutput::Indicator,
                "score" => LdaOutput::Score,
                o => return Err(bad(format!("unknown lda output `{o}`"))),
            },
        },
        ("corr_centroid", 3) => InternalModelSpec::CorrCentroid {
            m_genes: num(1)?,
            allowed_misclass: num(2)?,
        },
        ("plr_cv", 3) => InternalModelSpec::PlrCv {
            sparsity_grid: parts[1]
                .split(',')
                .map(|v| v.parse().map_err(|_| bad(format!("bad sparsity `{v}`"))))
                .collect::<Result<_, _>>()?,
            inner_folds: num(2)?,
        },
        _ => return Err(bad("expected JSON, a JSON file, or ols | lasso_l:L | lda_top_g:G[:score] | corr_centroid:M:A | plr_cv:S1,S2,..:K".into())),
    };
    Ok(spec)
}

/// Inverse of the shorthand accepted by [`parse_spec`].
pub fn spec_label(spec: &InternalModelSpec) -> String {
    match spec {
        InternalModelSpec::Ols => "ols".into(),
        InternalModelSpec::LassoL { l } => format!("lasso_l:{l}"),
        InternalModelSpec::LdaTopG {
            g,
            output: LdaOutput::Indicator,
        } => format!("lda_top_g:{g}"),
        InternalModelSpec::LdaTopG {
            g,
            output: LdaOutput::Score,
        } => format!("lda_top_g:{g}:score"),
        InternalModelSpec::CorrCentroid {
            m_genes,
            allowed_misclass,
        } => {
            format!("corr_centroid:{m_genes}:{allowed_misclass}")
        }
        InternalModelSpec::PlrCv {
            sparsity_grid,
            inner_folds,
        } => {
            let grid: Vec<String> = sparsity_grid.iter().map(usize::to_string).collect();
            format!("plr_cv:{}:{inner_folds}", grid.join(","))
        }
    }
}

fn parse_folds(s: &str) -> Result<FoldScheme, CliError> {
    FoldScheme::parse(s).map_err(|e| CliError::Usage(format!("--folds: {e}")))
}

fn check_alphas(alphas: &[f64]) -> Result<(), CliError> {
    match alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        Some(a) => Err(CliError::Usage(format!("--alpha: {a} is not in (0, 1)"))),
        None => Ok(()),
    }
}

fn load(path: &Path, outcome: Option<OutcomeArg>) -> Result<(Loaded, DataRef), CliError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let outcome = outcome.map(|o| match o {
        OutcomeArg::Continuous => OutcomeKind::Continuous,
        OutcomeArg::Binary => OutcomeKind::Binary,
    });
    let loaded = load_dataset(path, outcome)?;
    let d = &loaded.data;
    let r = DataRef {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        outcome: d.outcome(),
        n: d.n(),
        p: d.p(),
        e: d.e(),
    };
    Ok((loaded, r))
}

fn executor(workers: usize) -> Result<Rayon, CliError> {
    Rayon::new(workers).map_err(|e| CliError::Usage(format!("--workers: {e}")))
}

/// Writes the rendered report into `out` (or stdout) and returns the paths.
pub fn emit<R: Report>(
    config: &RunConfig,
    report: &R,
    out: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let files = render(config, report, config.format);
    let Some(dir) = out else {
        for (i, f) in files.iter().enumerate() {
            if i > 0 {
                println!();
            }
            print!("{}", f.contents);
        }
        return Ok(Vec::new());
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let hash = config.hash();
    let mut paths = Vec::new();
    for f in files {
        let path = dir.join(format!(
            "{}-{hash}{}.{}",
            config.command,
            f.suffix,
            config.format.extension()
        ));
        fs::write(&path, f.contents).map_err(io_err(&path))?;
        println!("{}", path.display());
        paths.push(path);
    }
    Ok(paths)
}

struct Resolved {
    loaded: Loaded,
    pipeline: Pipeline,
    config: RunConfig,
}

fn resolve_pipeline(
    command: &'static str,
    args: &PipelineArgs,
    output: &OutputArgs,
) -> Result<Resolved, CliError> {
    let spec = parse_spec(&args.spec)?;
    let folds = parse_folds(&args.folds)?;
    let (loaded, data_ref) = load(&args.data, args.outcome)?;
    let external = match args.external {
        Some(ExternalArg::Linear) => ExternalKind::Linear,
        Some(ExternalArg::Logistic) => ExternalKind::Logistic,
        None if loaded.data.outcome() == OutcomeKind::Binary => ExternalKind::Logistic,
        None => ExternalKind::Linear,
    };
    let pipeline = Pipeline {
        spec: spec.clone(),
        external,
        folds,
        intercept: args.intercept == OnOff::On,
    };
    let mut config = RunConfig::new(command, output.seed.unwrap_or(DEFAULT_SEED), output);
    config.data = Some(data_ref);
    config.spec = vec![spec];
    config.external = Some(external);
    config.folds = vec![folds];
    config.intercept = Some(pipeline.intercept);
    Ok(Resolved {
        loaded,
        pipeline,
        config,
    })
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(RunConfig, AnalyzeReport), CliError> {
    let Resolved {
        loaded,
        pipeline,
        config,
    } = resolve_pipeline("analyze", &args.pipeline, &args.output)?;
    let data = &loaded.data;
    let stream = SeedStream::new(config.seed).substream("analyze", 0);
    let pv = prevalidate_with_scheme(data, &pipeline.spec, pipeline.folds, stream)
        .map_err(in_module("prevalidation"))?;
    let fit = fit_external(
        pipeline.external,
        Some(&pv.ytilde),
        data.z(),
        data.y(),
        pipeline.intercept,
    )
    .map_err(in_module("external model"))?;
    let provenance = pv
        .ytilde
        .iter()
        .enumerate()
        .map(|(i, &v)| ProvenanceRow {
            row: i,
            fold: pv.folds.as_ref().map(|f| f.fold_of()[i]),
            ytilde: v,
        })
        .collect();
    let report = AnalyzeReport {
        n: data.n(),
        p: data.p(),
        z_names: loaded.z_names.clone(),
        spec_name: pipeline.spec.name().to_owned(),
        fit,
        flagged_folds: pv
            .fold_fits
            .iter()
            .filter(|f| f.flagged)
            .map(|f| f.fold)
            .collect(),
        provenance,
    };
    Ok((config, report))
}

pub fn permtest(args: &PermtestArgs) -> Result<(RunConfig, PermtestReport), CliError> {
    let Resolved {
        loaded,
        pipeline,
        mut config,
    } = resolve_pipeline("permtest", &args.pipeline, &args.output)?;
    let alphas = args
        .alpha
        .clone()
        .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    check_alphas(&alphas)?;
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be >= 1".into()));
    }
    config.permutations = Some(args.permutations);
    config.repeats = Some(args.repeats);
    config.redraw_folds = Some(!args.fixed_folds);
    config.alphas = alphas.clone();
    let exec = executor(args.output.workers)?;
    let root = SeedStream::new(config.seed);
    let mut rows = Vec::new();
    for r in 0..args.repeats {
        let seed = root.substream("repeat", r as u64).as_seed();
        let mut opts = PermutationOptions::new(args.permutations, seed);
        opts.redraw_folds = !args.fixed_folds;
        let results = permutation_test_all(&loaded.data, &pipeline, opts, &exec)
            .map_err(in_module("permutation"))?;
        rows.extend(results.into_iter().map(|res| RepeatRow {
            repeat: r,
            seed,
            statistic: res.statistic_kind,
            observed: res.observed,
            p_value: res.p_value,
            failed: res.failed,
            invalid: res.invalid,
            separated: res.separated,
        }));
    }
    Ok((
        config,
        PermtestReport::summarize(args.permutations, &alphas, rows),
    ))
}

pub fn simulate(
    args: &SimulateArgs,
) -> Result<(RunConfig, crate::report::SimulateReport), CliError> {
    let text = fs::read_to_string(&args.grid).map_err(io_err(&args.grid))?;
    let campaign = Campaign::from_toml(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.grid.display())))?
        .with_overrides(
            args.output.seed,
            args.reps,
            args.alpha.clone(),
            args.permutations,
        );
    check_alphas(&campaign.alphas)?;
    let exec = executor(args.output.workers)?;
    let report = campaign.run(&exec).map_err(in_module("simulation"))?;
    let mut config = RunConfig::new("simulate", campaign.seed, &args.output);
    config.campaign = Some(campaign);
    Ok((config, report))
}

pub struct AsymptoticsOutcome {
    pub report: AsymptoticsReport,
    /// Named samples for QQ export.
    pub samples: Vec<(&'static str, Vec<f64>)>,
}

pub fn asymptotics(args: &AsymptoticsArgs) -> Result<(RunConfig, AsymptoticsOutcome), CliError> {
    use thresholds::*;
    let (n, p) = (args.n, args.p);
    let mut config = RunConfig::new(
        "asymptotics",
        args.output.seed.unwrap_or(DEFAULT_SEED),
        &args.output,
    );
    config.asymptotics = Some(AsymptoticsParams {
        n,
        p,
        sigmas: args.sigma.clone(),
        reps: args.reps,
        draws: args.draws,
        leverage_draws: args.leverage_draws,
    });
    let exec = executor(args.output.workers)?;
    let root = SeedStream::new(config.seed);
    let seed = |label: &str| root.substream(label, 0).as_seed();
    let m = in_module("asymptotics");

    let t1 =
        empirical_null_t(n, p, &[], args.reps, seed("empirical_no_external"), &exec).map_err(&m)?;
    let law1 = sample_null_law(p, args.draws, seed("null_law"), &exec).map_err(&m)?;
    let t2 = empirical_null_t(
        n,
        p,
        &args.sigma,
        args.reps,
        seed("empirical_external"),
        &exec,
    )
    .map_err(&m)?;
    let law2 = sample_external_law(
        p,
        &args.sigma,
        args.draws,
        seed("external_law"),
        ExternalLawForm::Combined,
        &exec,
    )
    .map_err(&m)?;
    let split = sample_external_law(
        p,
        &args.sigma,
        args.draws,
        seed("external_law_split"),
        ExternalLawForm::Split,
        &exec,
    )
    .map_err(&m)?;
    let large = sample_external_law(
        p,
        &[LARGE_SIGMA],
        args.draws,
        seed("external_law_large_sigma"),
        ExternalLawForm::Combined,
        &exec,
    )
    .map_err(&m)?;
    let leverage =
        leverage_check(n, p, args.leverage_draws, seed("leverage"), &exec).map_err(&m)?;

    let df = (n - 1) as f64;
    let checks = vec![
        Check::new(
            "ks_empirical_vs_null_law",
            ks_distance(&t1.t, &law1.draws).map_err(&m)?,
            Bound::Below,
            0.0,
            KS_NULL_LAW,
        ),
        Check::new(
            "ks_empirical_vs_student_t",
            ks_one_sample(&t1.t, |x| student_t_cdf(x, df)).map_err(&m)?,
            Bound::Above,
            0.0,
            KS_T_REFERENCE,
        ),
        Check::new(
            "ks_empirical_vs_external_law",
            ks_distance(&t2.t, &law2.draws).map_err(&m)?,
            Bound::Below,
            0.0,
            KS_EXTERNAL_LAW,
        ),
        Check::new(
            "ks_large_sigma_vs_null_law",
            ks_distance(&large.draws, &law1.draws).map_err(&m)?,
            Bound::Below,
            0.0,
            KS_LARGE_SIGMA,
        ),
        Check::new(
            "leverage_mean",
            leverage.mean,
            Bound::Near,
            p as f64,
            LEVERAGE_MEAN_REL * p as f64,
        ),
        Check::new(
            "ks_leverage_vs_chi2",
            leverage.ks_chi2,
            Bound::Below,
            0.0,
            KS_LEVERAGE,
        ),
        Check::new(
            "leverage_trace_error",
            leverage.max_trace_error,
            Bound::Below,
            0.0,
            TRACE,
        ),
    ];
    let info = vec![
        (
            "ks_empirical_vs_null_law_exact_cdf".to_owned(),
            ks_one_sample(&t1.t, |x| null_law_cdf(x, p)).map_err(&m)?,
        ),
        (
            "ks_empirical_vs_external_law_split_form".to_owned(),
            ks_distance(&t2.t, &split.draws).map_err(&m)?,
        ),
        ("leverage_variance".to_owned(), leverage.variance),
        (
            "leverage_one_redraws".to_owned(),
            (t1.redraws + t2.redraws) as f64,
        ),
    ];
    let samples = vec![
        ("empirical_no_external", t1.t),
        ("null_law", law1.draws),
        ("empirical_external", t2.t),
        ("external_law", law2.draws),
    ];
    Ok((
        config,
        AsymptoticsOutcome {
            report: AsymptoticsReport { checks, info },
            samples,
        },
    ))
}

pub fn cv_errors(args: &CvErrorArgs) -> Result<(RunConfig, CvErrorReport), CliError> {
    let specs: Vec<InternalModelSpec> = args
        .spec
        .iter()
        .map(|s| parse_spec(s))
        .collect::<Result<_, _>>()?;
    let folds: Vec<FoldScheme> = args
        .folds
        .iter()
        .map(|s| parse_folds(s))
        .collect::<Result<_, _>>()?;
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be >= 1".into()));
    }
    let (loaded, data_ref) = load(&args.data, args.outcome)?;
    let data = &loaded.data;
    let mut config = RunConfig::new(
        "cv-error",
        args.output.seed.unwrap_or(DEFAULT_SEED),
        &args.output,
    );
    config.data = Some(data_ref);
    config.spec = specs.clone();
    config.folds = folds.clone();
    config.repeats = Some(args.repeats);
    let root = SeedStream::new(config.seed);
    let mut rows = Vec::new();
    for (i, spec) in specs.iter().enumerate() {
        for (j, k) in folds.iter().enumerate() {
            let count = k.folds_for(data.n()).unwrap_or(1);
            let stream = root.substream("cv", i as u64).substream("folds", j as u64);
            let s =
                cv_error(data, spec, count, args.repeats, stream).map_err(in_module("cv-error"))?;
            rows.push(CvRow {
                spec: spec_label(spec),
                folds: k.to_string(),
                repeats: args.repeats,
                mean_error: s.mean,
                sd_error: if s.per_rep.len() > 1 {
                    variance(&s.per_rep).sqrt()
                } else {
                    0.0
                },
            });
        }
    }
    let measure = match data.outcome() {
        OutcomeKind::Binary => "misclassification",
        OutcomeKind::Continuous => "mse",
    };
    Ok((
        config,
        CvErrorReport {
            measure: measure.into(),
            rows,
        },
    ))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Analyze(a) => {
            let (c, r) = analyze(&a)?;
            emit(&c, &r, a.output.out.as_deref())?;
        }
        Command::Permtest(a) => {
            let (c, r) = permtest(&a)?;
            emit(&c, &r, a.output.out.as_deref())?;
        }
        Command::Simulate(a) => {
            let (c, r) = simulate(&a)?;
            emit(&c, &r, a.output.out.as_deref())?;
        }
        Command::Asymptotics(a) => {
            if a.samples && a.output.out.is_none() {
                return Err(CliError::Usage("--samples needs --out".into()));
            }
            let (c, o) = asymptotics(&a)?;
            emit(&c, &o.report, a.output.out.as_deref())?;
            if let (true, Some(dir)) = (a.samples, a.output.out.as_deref()) {
                for (name, values) in &o.samples {
                    let path = dir.join(format!("asymptotics-{}-samples-{name}.csv", c.hash()));
                    fs::write(&path, samples_csv(name, values)).map_err(io_err(&path))?;
                    println!("{}", path.display());
                }
            }
        }
        Command::CvError(a) => {
            let (c, r) = cv_errors(&a)?;
            emit(&c, &r, a.output.out.as_deref())?;
        }
    }
    Ok(())
}

/// Entry point for the binary; returns the process exit status.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("pvtool: {e}");
            e.exit_code()
        }
    }
}
