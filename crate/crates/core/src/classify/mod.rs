//! Classifiers and the cross-validated evaluation protocol.

mod eval;
mod flda;
mod svm;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Expression;

pub use eval::{
    compare_methods, eigen_sweep, evaluate_aus, evaluate_expressions, shuffle_expressions, AuResult, AuScore,
    ClassifierConfig, EvalConfig, ExpressionResult, MethodComparison, SweepRow, SweepTable,
};
pub use flda::{flda_predict, flda_train, FldaModel};
pub use svm::{
    dual_objective, svm_predict, svm_train, svm_train_binary, BinaryMachine, Kernel, SvmModel, SvmParams,
};

/// One labelled scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub subject: String,
    pub expression: Expression,
    pub intensity: u8,
    /// Active Action Units, ascending.
    pub aus: Vec<u8>,
    pub features: Vec<f64>,
    /// Per-landmark missing-patch flags.
    pub missing: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits samples by subject: each subject's samples land in exactly one
/// test fold. Subjects are sorted, shuffled with `seed` and dealt round-robin.
pub fn identity_disjoint_folds<S: AsRef<str>>(subjects: &[S], folds: usize, seed: u64) -> Result<Vec<Fold>> {
    let mut ids: Vec<&str> = subjects
        .iter()
        .map(AsRef::as_ref)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if folds > ids.len() {
        return Err(Error::Config(format!(
            "{folds} folds requested but only {} subjects",
            ids.len()
        )));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of = |s: &str| ids.iter().position(|&x| x == s).unwrap() % folds;
    let assignment: Vec<usize> = subjects.iter().map(|s| fold_of(s.as_ref())).collect();
    Ok((0..folds)
        .map(|f| {
            let (test, train) = (0..subjects.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}

/// Confusion counts (rows are true classes) and row-normalized percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub percentages: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    pub fn from_predictions(classes: Vec<String>, truth: &[usize], predicted: &[usize]) -> Self {
        let c = classes.len();
        let mut counts = vec![vec![0u64; c]; c];
        for (&t, &p) in truth.iter().zip(predicted) {
            counts[t][p] += 1;
        }
        let percentages = counts.iter().map(|r| row_percent(r)).collect();
        Self {
            classes,
            counts,
            percentages,
        }
    }

    /// Sums counts and averages each row's percentages over the matrices in
    /// which that row has at least one sample.
    pub fn average(parts: &[ConfusionMatrix]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Config("no confusion matrices to average".into()))?;
        let c = first.classes.len();
        let mut counts = vec![vec![0u64; c]; c];
        let mut sums = vec![vec![0.0; c]; c];
        let mut seen = vec![0usize; c];
        for m in parts {
            for r in 0..c {
                for j in 0..c {
                    counts[r][j] += m.counts[r][j];
                }
                if m.counts[r].iter().sum::<u64>() > 0 {
                    seen[r] += 1;
                    for j in 0..c {
                        sums[r][j] += m.percentages[r][j];
                    }
                }
            }
        }
        let percentages = sums
            .into_iter()
            .zip(&seen)
            .map(|(row, &n)| row.into_iter().map(|v| if n > 0 { v / n as f64 } else { 0.0 }).collect())
            .collect();
        Ok(Self {
            classes: first.classes.clone(),
            counts,
            percentages,
        })
    }

    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.counts.iter().flatten().sum();
        let diag: u64 = (0..self.counts.len()).map(|i| self.counts[i][i]).sum();
        if total == 0 {
            0.0
        } else {
            diag as f64 / total as f64
        }
    }
}

fn row_percent(row: &[u64]) -> Vec<f64> {
    let n: u64 = row.iter().sum();
    row.iter()
        .map(|&v| if n == 0 { 0.0 } else { 100.0 * v as f64 / n as f64 })
        .collect()
}
