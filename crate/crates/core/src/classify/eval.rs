//! Identity-disjoint cross-validation for expressions, Action Units and
//! eigenpair-count sweeps. Accuracies are percentages.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flda::{flda_predict, flda_train};
use super::svm::{kernel_matrix, train_ovo, SvmParams};
use super::{identity_disjoint_folds, ConfusionMatrix, Fold};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Standardizer};
use crate::labels::{Expression, ACTION_UNITS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Flda,
    Svm(SvmParams),
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig::Svm(SvmParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub classifier: ClassifierConfig,
    pub folds: usize,
    pub seed: u64,
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        match &self.classifier {
            ClassifierConfig::Svm(p) => p.validate(),
            ClassifierConfig::Flda => Ok(()),
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierConfig::default(),
            folds: 10,
            seed: 0,
        }
    }
}

/// Standardized rows of one fold plus the kernel matrices an SVM needs.
struct FoldData {
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
    kernels: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

impl FoldData {
    fn new(data: &FeatureMatrix, fold: &Fold, classifier: &ClassifierConfig) -> Result<Self> {
        let scaler = Standardizer::fit(fold.train.iter().map(|&i| data.samples[i].features.as_slice()))?;
        let train: Vec<Vec<f64>> = fold.train.iter().map(|&i| scaler.transform(&data.samples[i].features)).collect();
        let test: Vec<Vec<f64>> = fold.test.iter().map(|&i| scaler.transform(&data.samples[i].features)).collect();
        let kernels = match classifier {
            ClassifierConfig::Svm(p) => Some((kernel_matrix(p.kernel, &train, &train), kernel_matrix(p.kernel, &test, &train))),
            ClassifierConfig::Flda => None,
        };
        Ok(Self { train, test, kernels })
    }

    fn fit_predict(&self, labels: &[usize], classifier: &ClassifierConfig) -> Result<Vec<usize>> {
        match classifier {
            ClassifierConfig::Flda => {
                let model = flda_train(&self.train, labels)?;
                Ok(self.test.iter().map(|x| flda_predict(&model, x)).collect())
            }
            ClassifierConfig::Svm(p) => {
                let (gram, cross) = self.kernels.as_ref().expect("kernels are built for SVM folds");
                let ovo = train_ovo(gram, labels, p)?;
                Ok((0..self.test.len()).map(|t| ovo.predict(|i| cross[(t, i)])).collect())
            }
        }
    }
}

fn in_fold<T: Send>(folds: &[Fold], f: impl Fn(&Fold) -> Result<T> + Sync) -> Result<Vec<T>> {
    folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            f(fold).map_err(|e| Error::Fold {
                fold: i,
                source: Box::new(e),
            })
        })
        .collect()
}

fn make_folds(data: &FeatureMatrix, cfg: &EvalConfig) -> Result<Vec<Fold>> {
    let subjects: Vec<&str> = data.samples.iter().map(|s| s.subject.as_str()).collect();
    identity_disjoint_folds(&subjects, cfg.folds, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionResult {
    pub fold_accuracies: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

pub fn evaluate_expressions(data: &FeatureMatrix, cfg: &EvalConfig) -> Result<ExpressionResult> {
    let folds = make_folds(data, cfg)?;
    expressions_on_folds(data, &folds, cfg)
}

fn expressions_on_folds(data: &FeatureMatrix, folds: &[Fold], cfg: &EvalConfig) -> Result<ExpressionResult> {
    let names: Vec<String> = Expression::ALL.iter().map(|e| e.code().to_string()).collect();
    let per_fold = in_fold(folds, |fold| {
        let fd = FoldData::new(data, fold, &cfg.classifier)?;
        let labels: Vec<usize> = fold.train.iter().map(|&i| data.samples[i].expression.index()).collect();
        let truth: Vec<usize> = fold.test.iter().map(|&i| data.samples[i].expression.index()).collect();
        let predicted = fd.fit_predict(&labels, &cfg.classifier)?;
        Ok(ConfusionMatrix::from_predictions(names.clone(), &truth, &predicted))
    })?;
    let fold_accuracies: Vec<f64> = per_fold.iter().map(|m| 100.0 * m.accuracy()).collect();
    let fold_sizes = folds.iter().map(|f| f.test.len()).collect();
    let (mean, std) = mean_std(&fold_accuracies);
    Ok(ExpressionResult {
        fold_accuracies,
        fold_sizes,
        mean_accuracy: mean,
        std_accuracy: std,
        confusion: ConfusionMatrix::average(&per_fold)?,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Copy of `data` with expression labels randomly permuted across samples.
pub fn shuffle_expressions(data: &FeatureMatrix, seed: u64) -> FeatureMatrix {
    let mut labels: Vec<Expression> = data.samples.iter().map(|s| s.expression).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = data.clone();
    for (s, l) in out.samples.iter_mut().zip(labels) {
        s.expression = l;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuScore {
    pub au: u8,
    /// Positive test samples over the evaluated folds.
    pub positives: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Folds whose training split had no positive sample.
    pub skipped_folds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuResult {
    pub scores: Vec<AuScore>,
    /// F1 averaged with weights proportional to each AU's positive count.
    pub weighted_f1: f64,
}

/// Per-fold outcome for one AU: `None` when skipped, else (truth, predicted).
type AuFold = Option<(Vec<bool>, Vec<bool>)>;

pub fn evaluate_aus(data: &FeatureMatrix, cfg: &EvalConfig) -> Result<AuResult> {
    let folds = make_folds(data, cfg)?;
    let per_fold: Vec<Vec<AuFold>> = in_fold(&folds, |fold| {
        let fd = FoldData::new(data, fold, &cfg.classifier)?;
        ACTION_UNITS
            .iter()
            .map(|au| {
                let has = |i: usize| data.samples[i].aus.contains(au);
                let labels: Vec<usize> = fold.train.iter().map(|&i| has(i) as usize).collect();
                let truth: Vec<bool> = fold.test.iter().map(|&i| has(i)).collect();
                let positives = labels.iter().filter(|&&l| l == 1).count();
                if positives == 0 {
                    return Ok(None);
                }
                let predicted = if positives == labels.len() {
                    vec![true; truth.len()]
                } else {
                    fd.fit_predict(&labels, &cfg.classifier)?.into_iter().map(|p| p == 1).collect()
                };
                Ok(Some((truth, predicted)))
            })
            .collect()
    })?;

    let mut scores = Vec::with_capacity(ACTION_UNITS.len());
    for (a, &au) in ACTION_UNITS.iter().enumerate() {
        let (mut tp, mut fp, mut fneg, mut pos) = (0, 0, 0, 0);
        let mut skipped_folds = Vec::new();
        for (f, results) in per_fold.iter().enumerate() {
            match &results[a] {
                None => skipped_folds.push(f),
                Some((truth, pred)) => {
                    for (&t, &p) in truth.iter().zip(pred) {
                        pos += t as usize;
                        tp += (t && p) as usize;
                        fp += (!t && p) as usize;
                        fneg += (t && !p) as usize;
                    }
                }
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = ratio(2 * tp, 2 * tp + fp + fneg);
        scores.push(AuScore {
            au,
            positives: pos,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fneg,
            precision,
            recall,
            f1,
            skipped_folds,
        });
    }
    let total: usize = scores.iter().map(|s| s.positives).sum();
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        scores.iter().map(|s| s.f1 * s.positives as f64).sum::<f64>() / total as f64
    };
    Ok(AuResult { scores, weighted_f1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn columns(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.k).collect()
    }
}

/// Expression accuracy for each eigenpair count, truncating a matrix that
/// was extracted at the largest `k`. All counts share the same folds.
pub fn eigen_sweep(data: &FeatureMatrix, ks: &[usize], cfg: &EvalConfig) -> Result<SweepTable> {
    if ks.is_empty() {
        return Err(Error::Config("empty eigenpair sweep".into()));
    }
    if let Some(&bad) = ks.iter().find(|&&k| k == 0 || k > data.layout.k) {
        return Err(Error::Config(format!(
            "sweep value {bad} outside 1..={} available eigenpairs",
            data.layout.k
        )));
    }
    let folds = make_folds(data, cfg)?;
    let rows = ks
        .iter()
        .map(|&k| {
            let r = expressions_on_folds(&data.truncate_k(k)?, &folds, cfg)?;
            Ok(SweepRow {
                k,
                mean_accuracy: r.mean_accuracy,
                std_accuracy: r.std_accuracy,
                fold_accuracies: r.fold_accuracies,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepTable { rows })
}

/// Paired per-fold comparison of two runs evaluated on the same folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodComparison {
    pub first: String,
    pub second: String,
    pub first_mean: f64,
    pub second_mean: f64,
    /// `first - second` per fold.
    pub differences: Vec<f64>,
    pub mean_difference: f64,
    pub first_not_worse: bool,
}

pub fn compare_methods(
    first: &str,
    a: &ExpressionResult,
    second: &str,
    b: &ExpressionResult,
) -> Result<MethodComparison> {
    if a.fold_sizes != b.fold_sizes {
        return Err(Error::Config("runs were not evaluated on the same folds".into()));
    }
    let differences: Vec<f64> = a.fold_accuracies.iter().zip(&b.fold_accuracies).map(|(x, y)| x - y).collect();
    let (mean_difference, _) = mean_std(&differences);
    Ok(MethodComparison {
        first: first.to_string(),
        second: second.to_string(),
        first_mean: a.mean_accuracy,
        second_mean: b.mean_accuracy,
        differences,
        mean_difference,
        first_not_worse: a.mean_accuracy >= b.mean_accuracy,
    })
}
