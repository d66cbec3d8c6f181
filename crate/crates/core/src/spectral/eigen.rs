//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicit QL algorithm with Wilkinson-style shifts.
//!
//! Matrices are stored column-major (`a[j * n + k]` is row `k`, column `j`),
//! which keeps every inner loop contiguous.

use crate::error::{Error, Result};

/// Eigen-decomposition of a dense symmetric matrix.
///
/// `a` is overwritten. On return the eigenvalues are ascending and, when
/// `vectors` is true, `a` holds the matching orthonormal eigenvectors as
/// columns.
pub(crate) fn symmetric_eigen(a: &mut [f64], n: usize, vectors: bool) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(a, n, &mut d, &mut e, vectors);
    let z = if vectors { Some(&mut *a) } else { None };
    tridiagonal_ql(&mut d, &mut e, z, n)?;
    Ok(d)
}

/// Householder reduction of the lower triangle of `v` to tridiagonal form.
/// Diagonal goes to `d`, subdiagonal to `e[1..]`.
fn tridiagonalize(v: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], accumulate: bool) {
    let at = |k: usize, j: usize| j * n + k;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                let col = &v[j * n..j * n + n];
                g = e[j] + col[j] * f;
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                let col = &mut v[j * n..j * n + n];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = col[i - 1];
                col[i] = 0.0;
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for j in 0..n {
            d[j] = v[at(j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                let col = &mut v[j * n..j * n + n];
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the symmetric tridiagonal matrix (`d`, `e[1..]`). When `z`
/// is given, the rotations are accumulated into its columns. Eigenvalues are
/// returned in `d`, sorted ascending (columns of `z` permuted to match).
pub(crate) fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut [f64]>, n: usize) -> Result<()> {
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let budget = 50 * n.max(1);
    let mut iterations = 0usize;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > budget {
                    return Err(Error::NoConvergence {
                        iterations,
                        residual: e[l].abs(),
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        let (left, right) = z.split_at_mut((i + 1) * n);
                        let zi = &mut left[i * n..];
                        let zi1 = &mut right[..n];
                        for k in 0..n {
                            let h = zi1[k];
                            zi1[k] = s * zi[k] + c * h;
                            zi[k] = c * zi[k] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // stable selection sort keeps equal eigenvalues in their original order
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d.copy_within(i..k, i + 1);
            d[i] = p;
            if let Some(z) = z.as_deref_mut() {
                let col: Vec<f64> = z[k * n..k * n + n].to_vec();
                z.copy_within(i * n..k * n, (i + 1) * n);
                z[i * n..i * n + n].copy_from_slice(&col);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m + m.transpose()
    }

    #[test]
    fn matches_nalgebra_eigenvalues() {
        for (n, seed) in [(1, 1), (2, 2), (5, 3), (17, 4), (40, 5)] {
            let a = random_symmetric(n, seed);
            let mut buf = a.as_slice().to_vec();
            let vals = symmetric_eigen(&mut buf, n, true).unwrap();
            let mut reference: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (x, y) in vals.iter().zip(&reference) {
                assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
            }
            let v = DMatrix::from_column_slice(n, n, &buf);
            let resid = &a * &v - &v * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals.clone()));
            assert!(resid.abs().max() < 1e-10);
            let gram = v.transpose() * &v;
            assert!((gram - DMatrix::identity(n, n)).abs().max() < 1e-12);
        }
    }

    #[test]
    fn values_only_agrees_with_full() {
        let a = random_symmetric(30, 9);
        let mut b1 = a.as_slice().to_vec();
        let mut b2 = b1.clone();
        let full = symmetric_eigen(&mut b1, 30, true).unwrap();
        let only = symmetric_eigen(&mut b2, 30, false).unwrap();
        for (x, y) in full.iter().zip(&only) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let mut a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0, -1.0]))
            .as_slice()
            .to_vec();
        let vals = symmetric_eigen(&mut a, 4, true).unwrap();
        assert_eq!(vals, vec![-1.0, -1.0, 2.0, 3.0]);
    }
}
