//! Multiclass Fisher discriminant with nearest-class-mean decisions.
//!
//! When the feature dimension exceeds the sample count the scatter matrices
//! are formed in an orthonormal basis of the centered training data. The
//! regularized problem `S_b w = mu (S_w + eps I) w` has every nonzero-mu
//! eigenvector inside that span, so the reduction is exact.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FldaModel {
    /// Training mean subtracted before projection.
    pub mean: DVector<f64>,
    /// `d x (C - 1)` discriminant directions.
    pub projection: DMatrix<f64>,
    /// Generalized eigenvalues for the columns of `projection`, descending.
    pub eigenvalues: Vec<f64>,
    /// Class labels seen in training, ascending.
    pub classes: Vec<usize>,
    /// Projected class means, aligned with `classes`.
    pub class_means: Vec<DVector<f64>>,
    pub priors: Vec<f64>,
}

pub fn flda_train(rows: &[Vec<f64>], labels: &[usize]) -> Result<FldaModel> {
    if rows.len() != labels.len() {
        return Err(Error::Config("feature rows and labels differ in length".into()));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Config("FLDA needs at least two classes".into()));
    }
    let counts: Vec<usize> = classes
        .iter()
        .map(|c| labels.iter().filter(|&&l| l == *c).count())
        .collect();
    let n = rows.len();
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Config("feature rows have inconsistent lengths".into()));
    }

    let x = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = DVector::from_iterator(d, x.column_iter().map(|c| c.mean()));
    let mut xc = x;
    for mut r in xc.row_iter_mut() {
        r -= mean.transpose();
    }

    // coordinates of the centered data in an orthonormal basis `q` of its span
    let (q, y) = if d <= n {
        (None, xc)
    } else {
        let gram = &xc * xc.transpose();
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.max();
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 1e-10 * top.max(0.0)).collect();
        if keep.is_empty() {
            return Err(Error::Numerical("training features have no variance".into()));
        }
        let u = eig.eigenvectors.select_columns(&keep);
        let s: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
        let q = xc.transpose() * &u * DMatrix::from_diagonal(&DVector::from_iterator(s.len(), s.iter().map(|v| 1.0 / v)));
        let y = u * DMatrix::from_diagonal(&DVector::from_vec(s));
        (Some(q), y)
    };
    let r = y.ncols();

    let means: Vec<DVector<f64>> = classes
        .iter()
        .zip(&counts)
        .map(|(c, &nc)| {
            let mut m = DVector::zeros(r);
            for (i, _) in labels.iter().enumerate().filter(|(_, &l)| l == *c) {
                m += y.row(i).transpose();
            }
            m / nc as f64
        })
        .collect();
    let mut sw = DMatrix::zeros(r, r);
    for (i, l) in labels.iter().enumerate() {
        let ci = classes.binary_search(l).unwrap();
        let diff = y.row(i).transpose() - &means[ci];
        sw.ger(1.0, &diff, &diff, 1.0);
    }
    let mut sb = DMatrix::zeros(r, r);
    for (m, &nc) in means.iter().zip(&counts) {
        sb.ger(nc as f64, m, m, 1.0);
    }
    if !(sw.trace() > 0.0) {
        return Err(Error::Numerical("no within-class variation to regularize".into()));
    }
    let eps = 1e-3 * sw.trace() / d as f64;
    for i in 0..r {
        sw[(i, i)] += eps;
    }
    let chol = sw
        .cholesky()
        .ok_or_else(|| Error::Numerical("within-class scatter is singular after regularization".into()))?;
    let l = chol.l();
    let linv_sb = l
        .solve_lower_triangular(&sb)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let m = l
        .solve_lower_triangular(&linv_sb.transpose())
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let dims = (classes.len() - 1).min(r);
    order.truncate(dims);
    let v = eig.eigenvectors.select_columns(&order);
    let w = l
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    let projection = match &q {
        Some(q) => q * &w,
        None => w.clone(),
    };
    let class_means = means.iter().map(|m| w.transpose() * m).collect();
    Ok(FldaModel {
        mean,
        projection,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        classes,
        class_means,
        priors: counts.iter().map(|&c| c as f64 / n as f64).collect(),
    })
}

impl FldaModel {
    pub fn transform(&self, x: &[f64]) -> DVector<f64> {
        let centered = DVector::from_column_slice(x) - &self.mean;
        self.projection.tr_mul(&centered)
    }
}

/// Nearest projected class mean; equal distances go to the lower class label.
pub fn flda_predict(model: &FldaModel, x: &[f64]) -> usize {
    let z = model.transform(x);
    let mut best = (f64::INFINITY, model.classes[0]);
    for (m, &c) in model.class_means.iter().zip(&model.classes) {
        let dist = (&z - m).norm_squared();
        if dist < best.0 {
            best = (dist, c);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_clusters_split_along_diagonal() {
        let offsets = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5), (0.0, 0.0)];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in [(0.0, 0.0), (4.0, 4.0)].iter().enumerate() {
            for o in offsets {
                rows.push(vec![centre.0 + o.0, centre.1 + o.1]);
                labels.push(c);
            }
        }
        let m = flda_train(&rows, &labels).unwrap();
        let w = m.projection.column(0).normalize();
        let angle = (w[0] * std::f64::consts::FRAC_1_SQRT_2 + w[1] * std::f64::consts::FRAC_1_SQRT_2)
            .abs()
            .min(1.0)
            .acos();
        assert!(angle < 1e-2, "angle {angle}");
        assert_eq!(flda_predict(&m, &[0.0, 0.0]), 0);
        assert_eq!(flda_predict(&m, &[4.0, 4.0]), 1);
        // exact midpoint ties to the lower class
        assert_eq!(flda_predict(&m, &[2.0, 2.0]), 0);
    }

    #[test]
    fn collinear_means_have_rank_one() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for (a, b) in [(0.3, 0.1), (-0.3, -0.1), (0.1, -0.3), (-0.1, 0.3)] {
                rows.push(vec![c as f64 * 2.0 + a, c as f64 * 1.0 + b]);
                labels.push(c);
            }
        }
        let m = flda_train(&rows, &labels).unwrap();
        assert_eq!(m.eigenvalues.len(), 2);
        assert!(m.eigenvalues[1].abs() < 1e-9 * m.eigenvalues[0]);
    }

    #[test]
    fn singleton_classes() {
        // a lone sample still defines a class mean
        let m = flda_train(&[vec![0.0], vec![1.0], vec![5.0]], &[0, 0, 1]).unwrap();
        assert_eq!(flda_predict(&m, &[4.0]), 1);
        assert_eq!(flda_predict(&m, &[0.4]), 0);
        // but some class must show spread
        assert!(flda_train(&[vec![0.0], vec![1.0]], &[0, 1]).is_err());
        assert!(flda_train(&[vec![0.0], vec![1.0]], &[0, 0]).is_err());
    }
}
