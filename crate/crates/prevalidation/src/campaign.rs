//! Declarative simulation campaigns.
//!
//! A campaign file lists scenario cells and the fold counts to run for each:
//!
//! ```toml
//! seed = 2024
//! reps = 20000
//! alphas = [0.01, 0.05, 0.1]
//! study = "type1"            # or "permutation_level"
//! permutations = 200         # permutation_level only
//!
//! [[cell]]
//! scenario = "linear_linear"
//! n = 50
//! p = 5
//! fold_grid = [2, 5, 10, "n"]
//! ```
//!
//! Cell keys are those of [`ScenarioConfig`]; `fold_grid` replaces its
//! single `folds` entry and `reps` may be overridden per cell. Every cell
//! derives its seed from the campaign seed and its position, and all fold
//! counts of a cell share that seed, so they see the same datasets.

use serde::{Deserialize, Serialize};

use prevalidation_core::simulation::{
    estimate_permutation_level, estimate_type1, ScenarioConfig, DEFAULT_ALPHAS,
};
use prevalidation_core::{Error, Executor, FoldScheme, Result, SeedStream};

use crate::report::{GridRow, SimulateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Analytical one-sided test of the pre-validated coefficient.
    #[default]
    Type1,
    /// Permutation test, all three statistic kinds.
    PermutationLevel,
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(flatten)]
    pub config: ScenarioConfig,
    #[serde(default)]
    pub fold_grid: Vec<FoldScheme>,
    #[serde(default)]
    pub reps: Option<usize>,
}

impl Cell {
    pub fn folds(&self) -> Vec<FoldScheme> {
        if self.fold_grid.is_empty() {
            vec![self.config.folds]
        } else {
            self.fold_grid.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub seed: u64,
    pub reps: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub study: Study,
    #[serde(default)]
    pub permutations: Option<usize>,
    #[serde(rename = "cell")]
    pub cells: Vec<Cell>,
}

impl Campaign {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Applies command-line overrides; a flag replaces per-cell values too.
    pub fn with_overrides(
        mut self,
        seed: Option<u64>,
        reps: Option<usize>,
        alphas: Option<Vec<f64>>,
        b: Option<usize>,
    ) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(r) = reps {
            self.reps = r;
            for c in &mut self.cells {
                c.reps = None;
            }
        }
        if let Some(a) = alphas {
            self.alphas = a;
        }
        if b.is_some() {
            self.permutations = b;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidParameter("campaign has no cells".into()));
        }
        if self.study == Study::PermutationLevel && self.permutations.unwrap_or(0) == 0 {
            return Err(Error::InvalidParameter(
                "permutation_level needs permutations >= 1".into(),
            ));
        }
        for (i, c) in self.cells.iter().enumerate() {
            for k in c.folds() {
                c.config
                    .with_folds(k)
                    .validate()
                    .map_err(|e| Error::InvalidParameter(format!("cell {i}, K = {k}: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn cell_seed(&self, index: usize) -> u64 {
        SeedStream::new(self.seed)
            .substream("cell", index as u64)
            .as_seed()
    }

    pub fn run<E: Executor>(&self, exec: &E) -> Result<SimulateReport> {
        self.validate()?;
        let mut rows = Vec::new();
        for (i, cell) in self.cells.iter().enumerate() {
            let reps = cell.reps.unwrap_or(self.reps);
            let seed = self.cell_seed(i);
            for k in cell.folds() {
                let config = cell.config.with_folds(k);
                let row =
                    |test: String, failed, separated, rates: Vec<f64>, ses: Vec<f64>| GridRow {
                        scenario: config.scenario.name().to_owned(),
                        n: config.n,
                        p: config.p,
                        e: config.e,
                        l: config.l,
                        g: config.g,
                        folds: k.to_string(),
                        test,
                        reps,
                        failed,
                        separated,
                        rates,
                        ses,
                    };
                match self.study {
                    Study::Type1 => {
                        let r = estimate_type1(&config, &self.alphas, reps, seed, exec)?;
                        rows.push(row(
                            "analytical".into(),
                            r.failed,
                            r.separated,
                            r.rates,
                            r.ses,
                        ));
                    }
                    Study::PermutationLevel => {
                        let b = self.permutations.unwrap_or(0);
                        let r =
                            estimate_permutation_level(&config, &self.alphas, reps, b, seed, exec)?;
                        for kl in r.kinds {
                            rows.push(row(
                                kl.kind.name().into(),
                                r.failed,
                                r.separated,
                                kl.rates,
                                kl.ses,
                            ));
                        }
                    }
                }
            }
        }
        Ok(SimulateReport {
            alphas: self.alphas.clone(),
            rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use prevalidation_core::simulation::Scenario;
    use prevalidation_core::Sequential;

    const SMALL: &str = r#"
seed = 7
reps = 40

[[cell]]
scenario = "linear_linear"
n = 20
p = 3
fold_grid = [5, "n"]

[[cell]]
scenario = "lasso_linear"
n = 12
p = 30
l = 3
reps = 10
"#;

    #[test]
    fn parses_and_defaults() {
        let c = Campaign::from_toml(SMALL).unwrap();
        assert_eq!(c.alphas, DEFAULT_ALPHAS);
        assert_eq!(c.study, Study::Type1);
        assert_eq!(c.cells[0].config.scenario, Scenario::LinearLinear);
        assert_eq!(
            c.cells[0].folds(),
            vec![FoldScheme::KFold(5), FoldScheme::LeaveOneOut]
        );
        assert_eq!(c.cells[1].folds(), vec![FoldScheme::KFold(10)]);
        assert_eq!(c.cells[1].reps, Some(10));
    }

    #[test]
    fn flags_win() {
        let c = Campaign::from_toml(SMALL)
            .unwrap()
            .with_overrides(Some(1), Some(5), None, None);
        assert_eq!((c.seed, c.reps, c.cells[1].reps), (1, 5, None));
    }

    #[test]
    fn one_row_per_cell_and_fold_count() {
        let r = Campaign::from_toml(SMALL)
            .unwrap()
            .run(&Sequential)
            .unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.rows[1].folds, "n");
        assert_eq!(r.rows[2].reps, 10);
    }

    #[test]
    fn invalid_cell_is_named() {
        let text = SMALL.replace("l = 3", "l = 50");
        let err = Campaign::from_toml(&text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("cell 1"), "{err}");
    }
}
