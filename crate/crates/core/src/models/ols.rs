use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};

/// Least-squares fit without intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub coefficients: Vec<f64>,
}

impl OlsModel {
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.mul_vec(&self.coefficients)
    }
}

pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<OlsModel> {
    if x.ncols() >= x.nrows() {
        return Err(Error::param(alloc::format!(
            "ols needs p < n, got p = {}, n = {}",
            x.ncols(),
            x.nrows()
        )));
    }
    let coefficients = Qr::new(x)?.solve(y)?;
    Ok(OlsModel { coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Cholesky;
    use crate::rng::{normal_vec, SeedStream};
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn orthonormal_design_gives_xty() {
        let s = 0.5f64.sqrt();
        let x = Matrix::from_rows(&[vec![s, s], vec![s, -s], vec![0.0, 0.0]]).unwrap();
        let y = [1.0, 3.0, -2.0];
        let m = fit_ols(&x, &y).unwrap();
        let xty = x.t_mul_vec(&y);
        for (a, b) in m.coefficients.iter().zip(&xty) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_interpolation() {
        let mut rng = SeedStream::new(1).rng();
        let x = Matrix::from_row_major(20, 4, normal_vec(80, &mut rng)).unwrap();
        let beta = [1.5, -2.0, 0.0, 0.25];
        let y = x.mul_vec(&beta);
        let m = fit_ols(&x, &y).unwrap();
        for (a, b) in m.coefficients.iter().zip(&beta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = SeedStream::new(2).rng();
        let x = Matrix::from_row_major(50, 5, normal_vec(250, &mut rng)).unwrap();
        let y = normal_vec(50, &mut rng);
        let m = fit_ols(&x, &y).unwrap();
        let oracle = Cholesky::new(&x.gram()).unwrap().solve(&x.t_mul_vec(&y));
        for (a, b) in m.coefficients.iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        // predict on training rows reproduces H y
        let fitted = m.predict(&x);
        let q = Qr::new(&x).unwrap().thin_q();
        let hy = q.mul_vec(&q.t_mul_vec(&y));
        for (a, b) in fitted.iter().zip(&hy) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn singular_design_reports_size() {
        let x = Matrix::from_rows(&[
            vec![1.0, 2.0, 1.0],
            vec![2.0, 4.0, 0.0],
            vec![3.0, 6.0, 1.0],
            vec![1.0, 2.0, 5.0],
        ])
        .unwrap();
        match fit_ols(&x, &[1.0, 2.0, 3.0, 4.0]) {
            Err(Error::Singular {
                columns,
                rank_deficiency,
            }) => {
                assert_eq!(columns, 3);
                assert_eq!(rank_deficiency, 1);
            }
            other => panic!("{other:?}"),
        }
    }
}
