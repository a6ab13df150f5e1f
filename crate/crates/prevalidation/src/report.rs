//! Report types and their CSV, JSON and text renderings.
//!
//! Every rendering starts with the tool version and the resolved run
//! configuration, so a report is reproducible from its own contents.
//! Floats are written with shortest round-trip formatting in CSV and JSON
//! and with four decimals in text tables.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use prevalidation_core::external::Column;
use prevalidation_core::{ExternalFit, ExternalKind, StatisticKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Text,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Text => "txt",
        }
    }
}

/// First 16 hex digits of the SHA-256 of the config's JSON form.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))[..16].to_owned()
}

/// A rectangular table of preformatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// Left-aligned first column, right-aligned numbers.
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| {
                    if c == 0 {
                        format!("{s:<w$}")
                    } else {
                        format!("{s:>w$}")
                    }
                })
                .collect();
            parts.join("  ").trim_end().to_owned() + "\n"
        };
        let mut out = line(&self.header);
        let rule: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// File-name suffix; the first section of a report uses none.
    pub name: &'static str,
    pub title: String,
    pub table: Table,
    pub notes: Vec<String>,
}

pub trait Report: Serialize {
    fn command(&self) -> &'static str;
    /// `text` selects rounded numbers for human-readable output.
    fn sections(&self, text: bool) -> Vec<Section>;
}

#[derive(Serialize)]
struct Envelope<'a, C, R> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config_hash: String,
    config: &'a C,
    result: &'a R,
}

/// One rendered output file: `suffix` is empty for the main file.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub suffix: String,
    pub contents: String,
}

pub fn render<C: Serialize, R: Report>(config: &C, report: &R, format: Format) -> Vec<Rendered> {
    let hash = config_hash(config);
    let config_json = serde_json::to_string(config).expect("config serializes");
    let preamble = |lead: &str| {
        format!(
            "{lead} pvtool {VERSION} {}\n{lead} config_hash {hash}\n{lead} config {config_json}\n",
            report.command()
        )
    };
    match format {
        Format::Json => {
            let env = Envelope {
                tool: "pvtool",
                version: VERSION,
                command: report.command(),
                config_hash: hash.clone(),
                config,
                result: report,
            };
            vec![Rendered {
                suffix: String::new(),
                contents: serde_json::to_string_pretty(&env).expect("report serializes") + "\n",
            }]
        }
        Format::Csv => report
            .sections(false)
            .into_iter()
            .enumerate()
            .map(|(i, s)| Rendered {
                suffix: if i == 0 {
                    String::new()
                } else {
                    format!("-{}", s.name)
                },
                contents: preamble("#") + &s.table.to_csv(),
            })
            .collect(),
        Format::Text => {
            let mut out = preamble("#");
            for s in report.sections(true) {
                out.push('\n');
                out.push_str(&s.title);
                out.push('\n');
                out.push_str(&s.table.to_text());
                for n in &s.notes {
                    out.push_str(n);
                    out.push('\n');
                }
            }
            vec![Rendered {
                suffix: String::new(),
                contents: out,
            }]
        }
    }
}

fn f4(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        v.to_string()
    }
}

fn full(v: f64) -> String {
    v.to_string()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Cell formatter: full precision for CSV, four decimals for text.
type Fmt = fn(f64) -> String;

fn fmt_for(text: bool) -> Fmt {
    if text {
        f4
    } else {
        full
    }
}

// ----- analyze -----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRow {
    pub row: usize,
    /// Held-out fold, `None` for the re-use method.
    pub fold: Option<usize>,
    pub ytilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub n: usize,
    pub p: usize,
    pub z_names: Vec<String>,
    pub spec_name: String,
    pub fit: ExternalFit,
    /// Folds whose internal fit fell back to a regularized or permissive variant.
    pub flagged_folds: Vec<usize>,
    pub provenance: Vec<ProvenanceRow>,
}

impl AnalyzeReport {
    fn column_name(&self, c: Column) -> (String, &'static str) {
        match c {
            Column::Prevalidated => (format!("prevalidated_{}", self.spec_name), "pre-validated"),
            Column::External(k) => (self.z_names[k].clone(), "external"),
            Column::Intercept => ("intercept".to_owned(), "intercept"),
        }
    }

    /// Predictor rows in the layout: coefficient, SD, statistic, p, deviance drop, p.
    pub fn external_table(&self, text: bool) -> Table {
        let f = fmt_for(text);
        let stat = match self.fit.kind {
            ExternalKind::Linear => "t",
            ExternalKind::Logistic => "z",
        };
        let mut t = Table::new(&[
            "predictor",
            "method",
            "coef",
            "sd",
            stat,
            "p_value",
            "delta_deviance",
            "p_value_deviance",
        ]);
        for (i, &c) in self.fit.columns.iter().enumerate() {
            let (name, method) = self.column_name(c);
            let (drop, pdev) = if c == Column::Intercept {
                (String::new(), String::new())
            } else {
                (
                    f(self.fit.deviance_drops[i]),
                    f(self.fit.deviance_p_values[i]),
                )
            };
            t.push(vec![
                name,
                method.to_owned(),
                f(self.fit.coefficients[i]),
                f(self.fit.std_errors[i]),
                f(self.fit.statistics[i]),
                f(self.fit.p_values[i]),
                drop,
                pdev,
            ]);
        }
        t
    }

    fn provenance_table(&self) -> Table {
        let mut t = Table::new(&["row", "fold", "ytilde"]);
        for r in &self.provenance {
            t.push(vec![r.row.to_string(), opt(r.fold), full(r.ytilde)]);
        }
        t
    }
}

impl Report for AnalyzeReport {
    fn command(&self) -> &'static str {
        "analyze"
    }

    fn sections(&self, text: bool) -> Vec<Section> {
        let mut notes = vec![format!(
            "{} external model, n = {}, p = {}, residual df = {}, deviance = {}",
            self.fit.kind.name(),
            self.n,
            self.p,
            self.fit.df_residual,
            f4(self.fit.deviance)
        )];
        if let Some(p) = self.fit.p_pv_one_sided {
            notes.push(format!(
                "one-sided p-value for the pre-validated predictor: {}",
                f4(p)
            ));
        }
        if self.fit.separated {
            notes.push(
                "warning: logistic separation detected; standard errors are unreliable".to_owned(),
            );
        }
        if !self.flagged_folds.is_empty() {
            notes.push(format!(
                "warning: internal fallback used in folds {:?}",
                self.flagged_folds
            ));
        }
        vec![
            Section {
                name: "external",
                title: "External model".to_owned(),
                table: self.external_table(text),
                notes,
            },
            Section {
                name: "provenance",
                title: "Pre-validated predictor".to_owned(),
                table: self.provenance_table(),
                notes: Vec::new(),
            },
        ]
    }
}

// ----- permtest -----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRow {
    pub repeat: usize,
    pub seed: u64,
    pub statistic: StatisticKind,
    pub observed: f64,
    pub p_value: f64,
    pub failed: usize,
    pub invalid: bool,
    pub separated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub statistic: StatisticKind,
    pub mean_p: f64,
    /// Fraction of valid repeats with `p <= alpha`, per alpha.
    pub frac_at_or_below: Vec<f64>,
    pub valid_repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermtestReport {
    pub permutations: usize,
    pub alphas: Vec<f64>,
    pub summary: Vec<KindSummary>,
    pub repeats: Vec<RepeatRow>,
}

impl PermtestReport {
    pub fn summarize(permutations: usize, alphas: &[f64], repeats: Vec<RepeatRow>) -> Self {
        let summary = StatisticKind::ALL
            .iter()
            .map(|&k| {
                let p: Vec<f64> = repeats
                    .iter()
                    .filter(|r| r.statistic == k && !r.invalid && r.p_value.is_finite())
                    .map(|r| r.p_value)
                    .collect();
                let m = p.len().max(1) as f64;
                KindSummary {
                    statistic: k,
                    mean_p: if p.is_empty() {
                        f64::NAN
                    } else {
                        p.iter().sum::<f64>() / m
                    },
                    frac_at_or_below: alphas
                        .iter()
                        .map(|a| p.iter().filter(|v| **v <= *a).count() as f64 / m)
                        .collect(),
                    valid_repeats: p.len(),
                }
            })
            .collect();
        Self {
            permutations,
            alphas: alphas.to_vec(),
            summary,
            repeats,
        }
    }

    fn summary_table(&self, f: Fmt) -> Table {
        let mut header = vec!["statistic".to_owned(), "mean_p".to_owned()];
        header.extend(self.alphas.iter().map(|a| format!("frac_p_le_{a}")));
        header.push("valid_repeats".to_owned());
        let mut t = Table::new(&header);
        for s in &self.summary {
            let mut row = vec![s.statistic.name().to_owned(), f(s.mean_p)];
            row.extend(s.frac_at_or_below.iter().map(|v| f(*v)));
            row.push(s.valid_repeats.to_string());
            t.push(row);
        }
        t
    }

    fn repeats_table(&self, f: Fmt) -> Table {
        let mut t = Table::new(&[
            "repeat",
            "seed",
            "statistic",
            "observed",
            "p_value",
            "failed",
            "invalid",
            "separated",
        ]);
        for r in &self.repeats {
            t.push(vec![
                r.repeat.to_string(),
                r.seed.to_string(),
                r.statistic.name().to_owned(),
                f(r.observed),
                f(r.p_value),
                r.failed.to_string(),
                r.invalid.to_string(),
                r.separated.to_string(),
            ]);
        }
        t
    }

    fn build(&self, f: Fmt) -> Vec<Section> {
        let notes = vec![format!(
            "{} permutations per repeat; mean p-values across fold draws are descriptive only",
            self.permutations
        )];
        vec![
            Section {
                name: "summary",
                title: "Permutation test summary".to_owned(),
                table: self.summary_table(f),
                notes,
            },
            Section {
                name: "repeats",
                title: "Per-repeat results".to_owned(),
                table: self.repeats_table(f),
                notes: Vec::new(),
            },
        ]
    }
}

impl Report for PermtestReport {
    fn command(&self) -> &'static str {
        "permtest"
    }

    fn sections(&self, text: bool) -> Vec<Section> {
        self.build(fmt_for(text))
    }
}

// ----- simulate -----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub scenario: String,
    pub n: usize,
    pub p: usize,
    pub e: usize,
    pub l: Option<usize>,
    pub g: Option<usize>,
    pub folds: String,
    /// `analytical` or a permutation statistic kind.
    pub test: String,
    pub reps: usize,
    pub failed: usize,
    pub separated: usize,
    pub rates: Vec<f64>,
    pub ses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub alphas: Vec<f64>,
    pub rows: Vec<GridRow>,
}

impl SimulateReport {
    fn table(&self, f: Fmt) -> Table {
        let mut header: Vec<String> = [
            "scenario",
            "n",
            "p",
            "e",
            "l",
            "g",
            "K",
            "test",
            "reps",
            "failed",
            "separated",
        ]
        .map(String::from)
        .to_vec();
        for a in &self.alphas {
            header.push(format!("rate_{a}"));
            header.push(format!("se_{a}"));
        }
        let mut t = Table::new(&header);
        for r in &self.rows {
            let mut row = vec![
                r.scenario.clone(),
                r.n.to_string(),
                r.p.to_string(),
                r.e.to_string(),
                opt(r.l),
                opt(r.g),
                r.folds.clone(),
                r.test.clone(),
                r.reps.to_string(),
                r.failed.to_string(),
                r.separated.to_string(),
            ];
            for (rate, se) in r.rates.iter().zip(&r.ses) {
                row.push(f(*rate));
                row.push(f(*se));
            }
            t.push(row);
        }
        t
    }

    fn build(&self, f: Fmt) -> Vec<Section> {
        vec![Section {
            name: "grid",
            title: "Rejection rates (p <= alpha)".to_owned(),
            table: self.table(f),
            notes: Vec::new(),
        }]
    }
}

impl Report for SimulateReport {
    fn command(&self) -> &'static str {
        "simulate"
    }

    fn sections(&self, text: bool) -> Vec<Section> {
        self.build(fmt_for(text))
    }
}

// ----- asymptotics -----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Below,
    Above,
    /// `|value - target| <= threshold`; target is carried in the check.
    Near,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub target: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(
        name: impl Into<String>,
        value: f64,
        bound: Bound,
        target: f64,
        threshold: f64,
    ) -> Self {
        let pass = match bound {
            Bound::Below => value < threshold,
            Bound::Above => value > threshold,
            Bound::Near => (value - target).abs() <= threshold,
        };
        Self {
            name: name.into(),
            value,
            bound,
            target,
            threshold,
            pass,
        }
    }

    fn criterion(&self) -> String {
        match self.bound {
            Bound::Below => format!("< {}", self.threshold),
            Bound::Above => format!("> {}", self.threshold),
            Bound::Near => format!("{} +/- {}", self.target, self.threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub checks: Vec<Check>,
    /// Informational values that carry no threshold.
    pub info: Vec<(String, f64)>,
}

impl AsymptoticsReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn build(&self, f: Fmt) -> Vec<Section> {
        let mut t = Table::new(&["check", "value", "criterion", "result"]);
        for c in &self.checks {
            t.push(vec![
                c.name.clone(),
                f(c.value),
                c.criterion(),
                if c.pass { "pass" } else { "FAIL" }.to_owned(),
            ]);
        }
        let mut info = Table::new(&["quantity", "value"]);
        for (k, v) in &self.info {
            info.push(vec![k.clone(), f(*v)]);
        }
        vec![
            Section {
                name: "checks",
                title: "Limiting-law checks".to_owned(),
                table: t,
                notes: Vec::new(),
            },
            Section {
                name: "info",
                title: "Additional quantities".to_owned(),
                table: info,
                notes: Vec::new(),
            },
        ]
    }
}

impl Report for AsymptoticsReport {
    fn command(&self) -> &'static str {
        "asymptotics"
    }

    fn sections(&self, text: bool) -> Vec<Section> {
        self.build(fmt_for(text))
    }
}

// ----- cv-error -----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub spec: String,
    pub folds: String,
    pub repeats: usize,
    pub mean_error: f64,
    pub sd_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvErrorReport {
    /// `misclassification` or `mse`.
    pub measure: String,
    pub rows: Vec<CvRow>,
}

impl CvErrorReport {
    fn build(&self, f: Fmt) -> Vec<Section> {
        let mut t = Table::new(&["rule", "K", "repeats", "mean_error", "sd_error"]);
        for r in &self.rows {
            t.push(vec![
                r.spec.clone(),
                r.folds.clone(),
                r.repeats.to_string(),
                f(r.mean_error),
                f(r.sd_error),
            ]);
        }
        vec![Section {
            name: "errors",
            title: format!("Cross-validated {}", self.measure),
            table: t,
            notes: Vec::new(),
        }]
    }
}

impl Report for CvErrorReport {
    fn command(&self) -> &'static str {
        "cv-error"
    }

    fn sections(&self, text: bool) -> Vec<Section> {
        self.build(fmt_for(text))
    }
}
