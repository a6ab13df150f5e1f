//! Scenario generators and the Monte Carlo studies built on them.
//!
//! Three scenario families are supported:
//!
//! * `linear_linear`: `X` i.i.d. N(0, 1), `y ~ N(X beta, sigma_i^2)`,
//!   `Z_k ~ N(y, sigma_k^2)`, OLS inside the folds and a linear external
//!   model.
//! * `lasso_linear`: as above with only the first `s` coefficients
//!   nonzero and a lasso with exactly `l` nonzero coefficients inside the
//!   folds.
//! * `lda_logistic`: two groups of sizes `n1`, `n2`; the second group has
//!   mean `mu` on the first `s` features. LDA on the top `g` features inside
//!   the folds, a logistic external model, and `Z_k` equal to the label
//!   flipped with probability `p_e`.

mod generators;
mod studies;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::data::FoldScheme;
use crate::error::{Error, Result};
use crate::external::ExternalKind;
use crate::models::{InternalModelSpec, LdaOutput};
use crate::permutation::Pipeline;

pub use generators::{gen_lasso_linear, gen_lda_logistic, gen_linear_linear, generate};
pub use studies::{
    coefficient_bias_study, estimate_permutation_level, estimate_power, estimate_type1, BiasReport,
    KindLevel, PermutationLevelReport, PowerReport, TypeIErrorReport, DEFAULT_ALPHAS,
};

/// Label-flip probability used when a configuration does not set one.
pub const DEFAULT_P_E: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LinearLinear,
    LassoLinear,
    LdaLogistic,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearLinear => "linear_linear",
            Self::LassoLinear => "lasso_linear",
            Self::LdaLogistic => "lda_logistic",
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn unit_sigma() -> Vec<f64> {
    vec![1.0]
}

fn default_p_e() -> f64 {
    DEFAULT_P_E
}

fn default_folds() -> FoldScheme {
    FoldScheme::KFold(10)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    #[serde(default = "one_usize")]
    pub e: usize,
    /// Leading regression coefficients, padded with zeros to length `p`.
    #[serde(default)]
    pub beta: Vec<f64>,
    /// Signal count: nonzero coefficients (lasso) or shifted features (LDA).
    #[serde(default)]
    pub s: usize,
    #[serde(default = "one")]
    pub sigma_i: f64,
    /// External noise SDs, one per column or a single shared value.
    #[serde(default = "unit_sigma")]
    pub sigma_e: Vec<f64>,
    /// Feature SD in the LDA scenario.
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub g: Option<usize>,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_p_e")]
    pub p_e: f64,
    #[serde(default = "default_folds")]
    pub folds: FoldScheme,
    /// Size of group 1 (label 0); defaults to `n / 2`.
    #[serde(default)]
    pub n1: Option<usize>,
    /// External intercept; defaults per scenario (see [`Self::external_intercept`]).
    #[serde(default)]
    pub intercept: Option<bool>,
    #[serde(default)]
    pub lda_output: LdaOutput,
}

impl ScenarioConfig {
    fn base(scenario: Scenario, n: usize, p: usize, folds: FoldScheme) -> Self {
        Self {
            scenario,
            n,
            p,
            e: 1,
            beta: Vec::new(),
            s: 0,
            sigma_i: 1.0,
            sigma_e: unit_sigma(),
            sigma: 1.0,
            l: None,
            g: None,
            mu: 0.0,
            p_e: DEFAULT_P_E,
            folds,
            n1: None,
            intercept: None,
            lda_output: LdaOutput::Indicator,
        }
    }

    pub fn linear_linear(n: usize, p: usize, folds: FoldScheme) -> Self {
        Self::base(Scenario::LinearLinear, n, p, folds)
    }

    pub fn lasso_linear(n: usize, p: usize, l: usize, folds: FoldScheme) -> Self {
        Self {
            l: Some(l),
            ..Self::base(Scenario::LassoLinear, n, p, folds)
        }
    }

    pub fn lda_logistic(n: usize, p: usize, g: usize, folds: FoldScheme) -> Self {
        Self {
            g: Some(g),
            ..Self::base(Scenario::LdaLogistic, n, p, folds)
        }
    }

    pub fn with_folds(&self, folds: FoldScheme) -> Self {
        Self {
            folds,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::param(format!("n must be >= 4, got {}", self.n)));
        }
        if self.p == 0 {
            return Err(Error::param("p must be >= 1"));
        }
        if self.s > self.p {
            return Err(Error::param(format!(
                "s = {} exceeds p = {}",
                self.s, self.p
            )));
        }
        if self.beta.len() > self.p {
            return Err(Error::param(format!(
                "beta has {} entries but p = {}",
                self.beta.len(),
                self.p
            )));
        }
        if !(self.sigma_i > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::param("noise SDs must be positive"));
        }
        if self.sigma_e.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::param("external noise SDs must be non-negative"));
        }
        if self.e > 0 && self.sigma_e.len() != 1 && self.sigma_e.len() != self.e {
            return Err(Error::param(format!(
                "sigma_e needs 1 or e = {} entries, got {}",
                self.e,
                self.sigma_e.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.p_e) {
            return Err(Error::param(format!(
                "p_e must lie in [0, 1], got {}",
                self.p_e
            )));
        }
        if let Some(n1) = self.n1 {
            if n1 == 0 || n1 >= self.n {
                return Err(Error::param(format!("n1 must lie in 1..n, got {n1}")));
            }
        }
        if let Some(k) = self.folds.folds_for(self.n) {
            if k > self.n {
                return Err(Error::param(format!(
                    "fold count {k} exceeds n = {}",
                    self.n
                )));
            }
        }
        match self.scenario {
            Scenario::LassoLinear if self.l.is_none() => {
                return Err(Error::param("lasso_linear needs `l`"))
            }
            Scenario::LdaLogistic if self.g.is_none() => {
                return Err(Error::param("lda_logistic needs `g`"))
            }
            _ => {}
        }
        let n_train = match self.folds.folds_for(self.n) {
            Some(k) => self.n - self.n.div_ceil(k),
            None => self.n,
        };
        self.internal_spec().validate(self.p, n_train)
    }

    pub fn internal_spec(&self) -> InternalModelSpec {
        match self.scenario {
            Scenario::LinearLinear => InternalModelSpec::Ols,
            Scenario::LassoLinear => InternalModelSpec::LassoL {
                l: self.l.unwrap_or(1),
            },
            Scenario::LdaLogistic => InternalModelSpec::LdaTopG {
                g: self.g.unwrap_or(1),
                output: self.lda_output,
            },
        }
    }

    pub fn external_kind(&self) -> ExternalKind {
        match self.scenario {
            Scenario::LdaLogistic => ExternalKind::Logistic,
            _ => ExternalKind::Linear,
        }
    }

    /// External intercept: off for `linear_linear` (whose models have
    /// none), on for `lasso_linear` (the lasso fits an intercept) and for
    /// `lda_logistic` (0/1 responses are not centered).
    pub fn external_intercept(&self) -> bool {
        self.intercept
            .unwrap_or(!matches!(self.scenario, Scenario::LinearLinear))
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            spec: self.internal_spec(),
            external: self.external_kind(),
            folds: self.folds,
            intercept: self.external_intercept(),
        }
    }

    /// Full length-`p` coefficient vector.
    pub fn beta_full(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.p];
        let keep = match self.scenario {
            Scenario::LassoLinear => self.s.min(self.beta.len()),
            _ => self.beta.len(),
        };
        b[..keep].copy_from_slice(&self.beta[..keep]);
        b
    }

    pub fn sigma_e_for(&self, k: usize) -> f64 {
        if self.sigma_e.len() == 1 {
            self.sigma_e[0]
        } else {
            self.sigma_e[k]
        }
    }

    /// `(n1, n2)` group sizes for the LDA scenario.
    pub fn group_sizes(&self) -> (usize, usize) {
        let n1 = self.n1.unwrap_or(self.n / 2);
        (n1, self.n - n1)
    }

    /// True when `X` carries no information about `y`.
    pub fn is_null(&self) -> bool {
        match self.scenario {
            Scenario::LinearLinear | Scenario::LassoLinear => {
                self.beta_full().iter().all(|b| *b == 0.0)
            }
            Scenario::LdaLogistic => self.s == 0 || self.mu == 0.0,
        }
    }

    /// True when the two configs differ at most in signal parameters.
    pub fn same_design(&self, other: &Self) -> bool {
        let strip = |c: &Self| Self {
            beta: Vec::new(),
            s: 0,
            mu: 0.0,
            ..c.clone()
        };
        strip(self) == strip(other)
    }
}
