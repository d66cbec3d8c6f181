//! C-SVM trained by sequential minimal optimization on a precomputed kernel.
//!
//! The dual is `min 1/2 a'Qa - e'a` subject to `0 <= a_i <= C` and `y'a = 0`,
//! with `Q_ij = y_i y_j K(x_i, x_j)`. Each step updates the maximal violating
//! pair; the solver stops once the violation drops below `eps`. Multiclass
//! problems are split one-vs-one.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma |a - b|^2)`; a missing gamma means `1 / d`.
    Rbf { gamma: Option<f64> },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Rbf { gamma: None }
    }
}

impl Kernel {
    fn resolve(self, dim: usize) -> Kernel {
        match self {
            Kernel::Rbf { gamma: None } => Kernel::Rbf {
                gamma: Some(1.0 / dim.max(1) as f64),
            },
            k => k,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let g = gamma.unwrap_or(1.0 / a.len().max(1) as f64);
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-g * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            kernel: Kernel::default(),
            c: 1.0,
            eps: 1e-3,
            max_iter: 100_000,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.eps > 0.0) || self.max_iter == 0 {
            return Err(Error::Config(format!(
                "SVM needs C > 0, eps > 0 and a positive iteration cap (got C={}, eps={}, cap={})",
                self.c, self.eps, self.max_iter
            )));
        }
        if let Kernel::Rbf { gamma: Some(g) } = self.kernel {
            if !(g > 0.0) {
                return Err(Error::Config(format!("RBF gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }
}

/// Kernel matrix between two row sets.
pub(crate) fn kernel_matrix(kernel: Kernel, a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    let d = a.first().or(b.first()).map_or(0, Vec::len);
    let ma = DMatrix::from_fn(a.len(), d, |i, j| a[i][j]);
    let mb = DMatrix::from_fn(b.len(), d, |i, j| b[i][j]);
    let dots = &ma * mb.transpose();
    match kernel.resolve(d) {
        Kernel::Linear => dots,
        Kernel::Rbf { gamma } => {
            let g = gamma.unwrap();
            let na: Vec<f64> = a.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
            let nb: Vec<f64> = b.iter().map(|r| r.iter().map(|v| v * v).sum()).collect();
            DMatrix::from_fn(a.len(), b.len(), |i, j| {
                (-g * (na[i] + nb[j] - 2.0 * dots[(i, j)]).max(0.0)).exp()
            })
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub violation: f64,
}

/// Dual objective in maximization form, `sum a - 1/2 a'Qa`.
pub fn dual_objective(alpha: &[f64], y: &[f64], gram: &DMatrix<f64>) -> f64 {
    let n = alpha.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * gram[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// SMO on the sub-problem selected by `idx` (indices into `gram`).
pub(crate) fn solve_dual(gram: &DMatrix<f64>, idx: &[usize], y: &[f64], p: &SvmParams) -> Result<DualSolution> {
    let n = idx.len();
    let c = p.c;
    let q = |i: usize, j: usize| y[i] * y[j] * gram[(idx[i], idx[j])];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut iterations = 0;
    let mut objective: f64 = 0.0;
    let violation = loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let violation = if i == usize::MAX || j == usize::MAX { 0.0 } else { gmax - gmin };
        if violation < p.eps {
            break violation.max(0.0);
        }
        if iterations >= p.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: violation,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj, qij) = (q(i, i), q(j, j), q(i, j));
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }

        if cfg!(debug_assertions) {
            // minimization objective 1/2 a'(G - e); it never increases
            let next: f64 = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
            debug_assert!(
                next <= objective + 1e-9 * (1.0 + objective.abs()),
                "dual objective decreased: {objective} -> {next}"
            );
            log::trace!("smo step {iterations}: objective {next:.6e}, violation {violation:.3e}");
            objective = next;
        }
    };

    let (mut ub, mut lb, mut sum, mut free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(DualSolution {
        alpha,
        rho,
        iterations,
        violation,
    })
}

/// Two-class machine holding its own support vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    pub kernel: Kernel,
    pub c: f64,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub violation: f64,
    /// Dual objective (maximization form) at the solution.
    pub objective: f64,
}

impl BinaryMachine {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, a)| a * self.kernel.eval(s, x))
            .sum::<f64>()
            + self.bias
    }
}

/// Trains on labels `+1` / `-1`.
pub fn svm_train_binary(rows: &[Vec<f64>], y: &[f64], params: &SvmParams) -> Result<BinaryMachine> {
    params.validate()?;
    if rows.len() != y.len() {
        return Err(Error::Config("feature rows and labels differ in length".into()));
    }
    if !y.iter().all(|&v| v == 1.0 || v == -1.0) {
        return Err(Error::Config("binary labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::Config("both labels must be present".into()));
    }
    let kernel = params.kernel.resolve(rows[0].len());
    let gram = kernel_matrix(kernel, rows, rows);
    let idx: Vec<usize> = (0..rows.len()).collect();
    let sol = solve_dual(&gram, &idx, y, params)?;
    let objective = dual_objective(&sol.alpha, y, &gram);
    let (support, coef) = sol
        .alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, &a)| (rows[i].clone(), a * y[i]))
        .unzip();
    Ok(BinaryMachine {
        kernel,
        c: params.c,
        support,
        coef,
        bias: -sol.rho,
        iterations: sol.iterations,
        violation: sol.violation,
        objective,
    })
}

/// One-vs-one machine over shared training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct PairMachine {
    /// Class voted for by a positive decision value.
    pub first: usize,
    pub second: usize,
    /// `(vector index, alpha * y)`.
    pub coef: Vec<(usize, f64)>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Ovo {
    pub classes: Vec<usize>,
    pub machines: Vec<PairMachine>,
}

/// Trains every class pair on a precomputed training kernel matrix.
pub(crate) fn train_ovo(gram: &DMatrix<f64>, labels: &[usize], params: &SvmParams) -> Result<Ovo> {
    params.validate()?;
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Config("SVM needs at least two classes".into()));
    }
    let mut machines = Vec::new();
    for (a_pos, &a) in classes.iter().enumerate() {
        for &b in &classes[a_pos + 1..] {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let sol = solve_dual(gram, &idx, &y, params)?;
            let coef = idx
                .iter()
                .zip(sol.alpha.iter().zip(&y))
                .filter(|(_, (&al, _))| al > 0.0)
                .map(|(&i, (&al, &yy))| (i, al * yy))
                .collect();
            machines.push(PairMachine {
                first: a,
                second: b,
                coef,
                bias: -sol.rho,
            });
        }
    }
    Ok(Ovo { classes, machines })
}

impl Ovo {
    /// Majority vote; ties go to the larger summed decision value, then to
    /// the lower class label. `k(i)` is the kernel against training vector `i`.
    pub fn predict(&self, k: impl Fn(usize) -> f64) -> usize {
        let c = self.classes.len();
        let pos = |label: usize| self.classes.binary_search(&label).unwrap();
        let mut votes = vec![0usize; c];
        let mut score = vec![0.0; c];
        for m in &self.machines {
            let dec: f64 = m.coef.iter().map(|&(i, a)| a * k(i)).sum::<f64>() + m.bias;
            let (f, s) = (pos(m.first), pos(m.second));
            if dec > 0.0 {
                votes[f] += 1;
            } else {
                votes[s] += 1;
            }
            score[f] += dec;
            score[s] -= dec;
        }
        let mut best = 0;
        for i in 1..c {
            if votes[i] > votes[best] || (votes[i] == votes[best] && score[i] > score[best]) {
                best = i;
            }
        }
        self.classes[best]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub params: SvmParams,
    /// Training vectors referenced by at least one machine.
    pub vectors: Vec<Vec<f64>>,
    pub(crate) ovo: Ovo,
}

impl SvmModel {
    pub fn classes(&self) -> &[usize] {
        &self.ovo.classes
    }

    pub fn machine_count(&self) -> usize {
        self.ovo.machines.len()
    }
}

pub fn svm_train(rows: &[Vec<f64>], labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::Config("feature rows and labels differ in length or are empty".into()));
    }
    let kernel = params.kernel.resolve(rows[0].len());
    let gram = kernel_matrix(kernel, rows, rows);
    let mut ovo = train_ovo(&gram, labels, params)?;
    let mut used: Vec<usize> = ovo.machines.iter().flat_map(|m| m.coef.iter().map(|c| c.0)).collect();
    used.sort_unstable();
    used.dedup();
    for m in &mut ovo.machines {
        for c in &mut m.coef {
            c.0 = used.binary_search(&c.0).unwrap();
        }
    }
    Ok(SvmModel {
        kernel,
        params: *params,
        vectors: used.iter().map(|&i| rows[i].clone()).collect(),
        ovo,
    })
}

pub fn svm_predict(model: &SvmModel, x: &[f64]) -> usize {
    let k: Vec<f64> = model.vectors.iter().map(|v| model.kernel.eval(v, x)).collect();
    model.ovo.predict(|i| k[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(c: f64) -> SvmParams {
        SvmParams {
            kernel: Kernel::Linear,
            c,
            ..SvmParams::default()
        }
    }

    #[test]
    fn two_point_hand_solution() {
        let m = svm_train_binary(&[vec![-1.0], vec![1.0]], &[-1.0, 1.0], &linear(1e3)).unwrap();
        let w: f64 = m.support.iter().zip(&m.coef).map(|(s, a)| a * s[0]).sum();
        assert!((w - 1.0).abs() < 1e-3, "w = {w}");
        assert!(m.bias.abs() < 1e-3);
        assert!((m.decision(&[0.7]) - 0.7).abs() < 1e-3);
    }

    #[test]
    fn conflicting_duplicates_sit_at_bound() {
        let rows = vec![vec![1.0, 2.0]; 4];
        let m = svm_train_binary(&rows, &[1.0, -1.0, 1.0, -1.0], &linear(0.5)).unwrap();
        assert_eq!(m.coef.len(), 4);
        assert!(m.coef.iter().all(|a| (a.abs() - 0.5).abs() < 1e-12));
        assert!(m.objective.is_finite());
    }

    #[test]
    fn iteration_cap_reports_violation() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64).cos()]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let p = SvmParams {
            max_iter: 1,
            ..SvmParams::default()
        };
        match svm_train_binary(&rows, &y, &p) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 1);
                assert!(residual > 1e-3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn one_vs_one_votes() {
        let rows: Vec<Vec<f64>> = [[0.0, 0.0], [0.2, 0.1], [5.0, 0.0], [5.1, 0.2], [0.0, 5.0], [0.1, 5.2]]
            .iter()
            .map(|r| r.to_vec())
            .collect();
        let labels = [0, 0, 1, 1, 2, 2];
        let m = svm_train(&rows, &labels, &linear(10.0)).unwrap();
        assert_eq!(m.machine_count(), 3);
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(svm_predict(&m, r), l);
        }
    }

    #[test]
    fn vote_tie_breaks_by_score_then_order() {
        let machine = |first, second, bias| PairMachine {
            first,
            second,
            coef: vec![],
            bias,
        };
        // cyclic votes: 0 beats 1, 1 beats 2, 2 beats 0
        let cyclic = Ovo {
            classes: vec![0, 1, 2],
            machines: vec![machine(0, 1, 1.0), machine(0, 2, -3.0), machine(1, 2, 0.5)],
        };
        // scores: 0 -> 1 - 3 = -2, 1 -> -1 + 0.5 = -0.5, 2 -> 3 - 0.5 = 2.5
        assert_eq!(cyclic.predict(|_| 0.0), 2);
        let flat = Ovo {
            classes: vec![0, 1, 2],
            machines: vec![machine(0, 1, 1.0), machine(0, 2, -1.0), machine(1, 2, 1.0)],
        };
        // every class has one vote and zero summed score
        assert_eq!(flat.predict(|_| 0.0), 0);
    }

    #[test]
    fn rbf_gram_matches_pointwise() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]];
        let k = Kernel::Rbf { gamma: Some(0.3) };
        let g = kernel_matrix(k, &rows, &rows);
        for i in 0..3 {
            for j in 0..3 {
                assert!((g[(i, j)] - k.eval(&rows[i], &rows[j])).abs() < 1e-14);
            }
        }
        assert!(svm_train_binary(&rows, &[1.0, 1.0, 1.0], &SvmParams::default()).is_err());
    }
}
