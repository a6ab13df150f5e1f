use alloc::vec::Vec;
use rand::Rng;

use super::{Scenario, ScenarioConfig};
use crate::data::{Dataset, OutcomeKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{normal_vec, standard_normal, SeedStream};

fn check(config: &ScenarioConfig, scenario: Scenario) -> Result<()> {
    config.validate()?;
    if config.scenario != scenario {
        return Err(Error::param(alloc::format!(
            "expected a {} config, got {}",
            scenario.name(),
            config.scenario.name()
        )));
    }
    Ok(())
}

fn linear(config: &ScenarioConfig, stream: SeedStream) -> Result<Dataset> {
    let (n, p) = (config.n, config.p);
    let mut rng = stream.rng();
    let x = Matrix::from_row_major(n, p, normal_vec(n * p, &mut rng))?;
    let beta = config.beta_full();
    let mean = x.mul_vec(&beta);
    let y: Vec<f64> = mean
        .iter()
        .map(|m| m + config.sigma_i * standard_normal(&mut rng))
        .collect();
    let z = Matrix::from_fn(n, config.e, |i, k| {
        y[i] + config.sigma_e_for(k) * standard_normal(&mut rng)
    });
    Dataset::new(y, x, z, OutcomeKind::Continuous)
}

/// `X` i.i.d. N(0, 1), `y ~ N(X beta, sigma_i^2)`, `Z_k ~ N(y, sigma_k^2)`.
pub fn gen_linear_linear(config: &ScenarioConfig, stream: SeedStream) -> Result<Dataset> {
    check(config, Scenario::LinearLinear)?;
    linear(config, stream)
}

/// As [`gen_linear_linear`] with only the first `s` coefficients kept.
pub fn gen_lasso_linear(config: &ScenarioConfig, stream: SeedStream) -> Result<Dataset> {
    check(config, Scenario::LassoLinear)?;
    linear(config, stream)
}

/// Two groups; the second has mean `mu` on the first `s` features.
/// External columns are the label flipped independently with probability `p_e`.
pub fn gen_lda_logistic(config: &ScenarioConfig, stream: SeedStream) -> Result<Dataset> {
    check(config, Scenario::LdaLogistic)?;
    let (n, p) = (config.n, config.p);
    let (n1, _) = config.group_sizes();
    let mut rng = stream.rng();
    let y: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i >= n1))).collect();
    let x = Matrix::from_fn(n, p, |i, j| {
        let shift = if y[i] == 1.0 && j < config.s {
            config.mu
        } else {
            0.0
        };
        shift + config.sigma * standard_normal(&mut rng)
    });
    let z = Matrix::from_fn(n, config.e, |i, _| {
        if rng.random::<f64>() < config.p_e {
            1.0 - y[i]
        } else {
            y[i]
        }
    });
    Dataset::new(y, x, z, OutcomeKind::Binary)
}

pub fn generate(config: &ScenarioConfig, stream: SeedStream) -> Result<Dataset> {
    match config.scenario {
        Scenario::LinearLinear => gen_linear_linear(config, stream),
        Scenario::LassoLinear => gen_lasso_linear(config, stream),
        Scenario::LdaLogistic => gen_lda_logistic(config, stream),
    }
}
