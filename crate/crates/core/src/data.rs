//! Dataset representation, validation and fold assignment.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, SeedStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

/// Response `y`, internal features `X` (n x p) and external predictors `Z` (n x e).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    y: Vec<f64>,
    x: Matrix,
    z: Matrix,
    outcome: OutcomeKind,
}

impl Dataset {
    pub fn new(y: Vec<f64>, x: Matrix, z: Matrix, outcome: OutcomeKind) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::data(format!("need at least 2 rows, got {n}")));
        }
        if x.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.nrows(),
                context: "rows of X",
            });
        }
        if z.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: z.nrows(),
                context: "rows of Z",
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("non-finite y at row {i}")));
        }
        for (name, m) in [("x", &x), ("z", &z)] {
            if let Some(k) = m.as_slice().iter().position(|v| !v.is_finite()) {
                let c = m.ncols().max(1);
                return Err(Error::data(format!(
                    "non-finite {name} entry at row {}, column {}",
                    k / c,
                    k % c
                )));
            }
        }
        if outcome == OutcomeKind::Binary {
            if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::data(format!(
                    "binary outcome must be 0/1, row {i} has {}",
                    y[i]
                )));
            }
        }
        Ok(Self { y, x, z, outcome })
    }

    /// Dataset with no external predictors.
    pub fn without_external(y: Vec<f64>, x: Matrix, outcome: OutcomeKind) -> Result<Self> {
        let n = y.len();
        Self::new(y, x, Matrix::zeros(n, 0), outcome)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn e(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn outcome(&self) -> OutcomeKind {
        self.outcome
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.y.iter().filter(|&&v| v == 1.0).count();
        (self.y.len() - ones, ones)
    }

    /// Errors unless both classes are present (classifier internal models).
    pub fn require_both_classes(&self) -> Result<()> {
        if self.outcome != OutcomeKind::Binary {
            return Err(Error::data("classifier requires a binary outcome"));
        }
        let (c0, c1) = self.class_counts();
        if c0 == 0 || c1 == 0 {
            return Err(Error::data(format!(
                "both classes required, got {c0} zeros and {c1} ones"
            )));
        }
        Ok(())
    }

    /// Copy with row `i` of X replaced by row `perm[i]`; y and Z unchanged.
    pub fn with_permuted_x(&self, perm: &[usize]) -> Self {
        Self {
            y: self.y.clone(),
            x: self.x.select_rows(perm),
            z: self.z.clone(),
            outcome: self.outcome,
        }
    }

    /// Copy with all rows reordered by `perm` (y, X and Z together).
    pub fn with_permuted_rows(&self, perm: &[usize]) -> Self {
        Self {
            y: perm.iter().map(|&i| self.y[i]).collect(),
            x: self.x.select_rows(perm),
            z: self.z.select_rows(perm),
            outcome: self.outcome,
        }
    }
}

/// Map from observation to fold index in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    /// Validates an explicit assignment.
    pub fn from_labels(fold_of: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::param(format!("fold count must be >= 2, got {k}")));
        }
        let mut sizes = vec![0usize; k];
        for &f in &fold_of {
            if f >= k {
                return Err(Error::param(format!("fold label {f} outside 0..{k}")));
            }
            sizes[f] += 1;
        }
        if sizes.contains(&0) {
            return Err(Error::param("every fold must be nonempty"));
        }
        Ok(Self { fold_of, k })
    }

    /// Leave-one-out: observation `i` forms fold `i`.
    pub fn leave_one_out(n: usize) -> Self {
        Self {
            fold_of: (0..n).collect(),
            k: n,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn members(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] == fold)
            .collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len())
            .filter(|&i| self.fold_of[i] != fold)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }

    pub fn max_size(&self) -> usize {
        self.sizes().into_iter().max().unwrap_or(0)
    }
}

/// Draws a balanced fold assignment.
///
/// Without labels: uniform shuffle, then contiguous chunks whose sizes differ
/// by at most one. With 0/1 labels: each class is shuffled separately and the
/// concatenation is dealt round-robin, so each fold's class counts are within
/// one of proportional allocation; fold labels are then shuffled so the folds
/// receiving the extra members are random.
pub fn make_folds(
    n: usize,
    k: usize,
    stratify_labels: Option<&[f64]>,
    stream: SeedStream,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::param(format!("fold count must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::param(format!("fold count {k} exceeds n = {n}")));
    }
    let mut rng = stream.rng();
    let mut fold_of = vec![0usize; n];
    match stratify_labels {
        None => {
            let perm = rng::permutation(n, &mut rng);
            let (base, extra) = (n / k, n % k);
            let mut pos = 0;
            for f in 0..k {
                let size = base + usize::from(f < extra);
                for &i in &perm[pos..pos + size] {
                    fold_of[i] = f;
                }
                pos += size;
            }
        }
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: labels.len(),
                    context: "stratification labels",
                });
            }
            let mut zeros: Vec<usize> = (0..n).filter(|&i| labels[i] == 0.0).collect();
            let mut ones: Vec<usize> = (0..n).filter(|&i| labels[i] == 1.0).collect();
            if zeros.len() + ones.len() != n {
                return Err(Error::data("stratification labels must be 0/1"));
            }
            if zeros.len() < 2 || ones.len() < 2 {
                return Err(Error::data(format!(
                    "stratified folds need at least 2 members per class so every training set \
                     keeps both classes (got {} and {})",
                    zeros.len(),
                    ones.len()
                )));
            }
            rng::shuffle(&mut zeros, &mut rng);
            rng::shuffle(&mut ones, &mut rng);
            let relabel = rng::permutation(k, &mut rng);
            for (j, &i) in zeros.iter().chain(ones.iter()).enumerate() {
                fold_of[i] = relabel[j % k];
            }
        }
    }
    Ok(FoldAssignment { fold_of, k })
}

/// How predictions are produced for the external model.
///
/// `Reuse` fits once on all rows and predicts the same rows (no
/// pre-validation, the upwardly biased comparison arm).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FoldScheme {
    Reuse,
    KFold(usize),
    LeaveOneOut,
}

impl FoldScheme {
    /// Parses `1` (reuse), an integer K >= 2, or `n`/`loo`.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "n" | "loo" | "N" => Ok(Self::LeaveOneOut),
            t => match t.parse::<usize>() {
                Ok(k) => Self::from_count(k),
                Err(_) => Err(Error::param(format!("bad fold count `{t}`"))),
            },
        }
    }

    pub fn from_count(k: usize) -> Result<Self> {
        match k {
            0 => Err(Error::param("fold count must be positive")),
            1 => Ok(Self::Reuse),
            k => Ok(Self::KFold(k)),
        }
    }

    /// Concrete fold count for `n` rows, `None` for reuse.
    pub fn folds_for(&self, n: usize) -> Option<usize> {
        match *self {
            Self::Reuse => None,
            Self::KFold(k) => Some(k),
            Self::LeaveOneOut => Some(n),
        }
    }
}

impl fmt::Display for FoldScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Reuse => f.write_str("1"),
            Self::KFold(k) => write!(f, "{k}"),
            Self::LeaveOneOut => f.write_str("n"),
        }
    }
}

impl Serialize for FoldScheme {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match self {
            Self::Reuse => s.serialize_u64(1),
            Self::KFold(k) => s.serialize_u64(*k as u64),
            Self::LeaveOneOut => s.serialize_str("n"),
        }
    }
}

impl<'de> Deserialize<'de> for FoldScheme {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Int(k) => FoldScheme::from_count(k as usize),
            Raw::Str(s) => FoldScheme::parse(&s),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check_balanced(f: &FoldAssignment, n: usize) {
        let sizes = f.sizes();
        assert_eq!(sizes.iter().sum::<usize>(), n);
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(*lo >= 1 && hi - lo <= 1, "{sizes:?}");
    }

    #[test]
    fn ten_into_five() {
        let f = make_folds(10, 5, None, SeedStream::new(3)).unwrap();
        assert_eq!(f.sizes(), vec![2; 5]);
    }

    #[test]
    fn k_equal_n_is_singletons() {
        let f = make_folds(10, 10, None, SeedStream::new(3)).unwrap();
        assert_eq!(f.sizes(), vec![1; 10]);
    }

    #[test]
    fn seven_into_three() {
        let f = make_folds(7, 3, None, SeedStream::new(9)).unwrap();
        let mut s = f.sizes();
        s.sort_unstable();
        assert_eq!(s, vec![2, 2, 3]);
    }

    #[test]
    fn bad_fold_counts() {
        assert!(make_folds(5, 6, None, SeedStream::new(0)).is_err());
        assert!(make_folds(5, 1, None, SeedStream::new(0)).is_err());
        let labels = [0.0, 0.0, 0.0, 0.0, 1.0];
        let err = make_folds(5, 2, Some(&labels), SeedStream::new(0)).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn dataset_validation() {
        let x = Matrix::zeros(3, 2);
        assert!(
            Dataset::without_external(vec![1.0, 2.0], x.clone(), OutcomeKind::Continuous).is_err()
        );
        assert!(Dataset::without_external(
            vec![1.0, f64::NAN, 2.0],
            x.clone(),
            OutcomeKind::Continuous
        )
        .is_err());
        assert!(
            Dataset::without_external(vec![0.0, 2.0, 1.0], x.clone(), OutcomeKind::Binary).is_err()
        );
        let d = Dataset::without_external(vec![0.0, 0.0, 0.0], x, OutcomeKind::Binary).unwrap();
        assert!(d.require_both_classes().is_err());
    }

    #[test]
    fn fold_scheme_parsing() {
        assert_eq!(FoldScheme::parse("1").unwrap(), FoldScheme::Reuse);
        assert_eq!(FoldScheme::parse("10").unwrap(), FoldScheme::KFold(10));
        assert_eq!(FoldScheme::parse("n").unwrap(), FoldScheme::LeaveOneOut);
        assert!(FoldScheme::parse("x").is_err());
        assert_eq!(FoldScheme::LeaveOneOut.folds_for(17), Some(17));
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(n in 2usize..80, kk in 2usize..80, seed in any::<u64>()) {
            let k = kk.min(n);
            let f = make_folds(n, k, None, SeedStream::new(seed)).unwrap();
            check_balanced(&f, n);
            let again = make_folds(n, k, None, SeedStream::new(seed)).unwrap();
            prop_assert_eq!(&f, &again);
            let mut all: Vec<usize> = (0..k).flat_map(|j| f.members(j)).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn stratified_folds_are_proportional(
            labels in proptest::collection::vec(0u8..2, 4..60),
            kk in 2usize..12,
            seed in any::<u64>(),
        ) {
            let y: Vec<f64> = labels.iter().map(|&v| f64::from(v)).collect();
            let ones = labels.iter().filter(|&&v| v == 1).count();
            let n = y.len();
            prop_assume!(ones >= 2 && n - ones >= 2);
            let k = kk.min(n);
            let f = make_folds(n, k, Some(&y), SeedStream::new(seed)).unwrap();
            check_balanced(&f, n);
            for class in [0.0, 1.0] {
                let total = y.iter().filter(|&&v| v == class).count() as f64;
                for j in 0..k {
                    let members = f.members(j);
                    let c = members.iter().filter(|&&i| y[i] == class).count() as f64;
                    let prop = total * members.len() as f64 / n as f64;
                    prop_assert!((c - prop).abs() <= 1.0 + 1e-9);
                }
            }
            for j in 0..k {
                let tr = f.training(j);
                prop_assert!(tr.iter().any(|&i| y[i] == 0.0) && tr.iter().any(|&i| y[i] == 1.0));
            }
        }
    }
}
