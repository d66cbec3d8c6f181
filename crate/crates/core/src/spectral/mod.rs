//! Discrete Laplace operators on patch meshes and their spectra.
//!
//! Two operators are provided:
//!
//! * the combinatorial graph Laplacian `L = D - A`, which depends on
//!   connectivity only, so one decomposition serves every patch sharing the
//!   canonical triangulation;
//! * the cotangent Laplace-Beltrami discretization `B^{-1} S`, whose spectrum
//!   is obtained from the similar symmetric matrix `B^{-1/2} S B^{-1/2}`.

mod basis_io;
mod eigen;

use nalgebra::{DMatrix, Point3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::edges_of;
use crate::patch::CanonicalPatch;

pub use basis_io::{config_hash, load_basis, save_basis};

/// Dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator {
    matrix: DMatrix<f64>,
}

impl SymmetricOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Config(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.abs().max();
        let n = matrix.nrows();
        for j in 0..n {
            for i in j + 1..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Numerical(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Half-bandwidth: the largest `|i - j|` with a non-zero entry.
    pub fn bandwidth(&self) -> usize {
        let n = self.dimension();
        let mut b = 0;
        for j in 0..n {
            for i in j + b + 1..n {
                if self.matrix[(i, j)] != 0.0 {
                    b = b.max(i - j);
                }
            }
        }
        b
    }
}

/// Diagonal (lumped) mass matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MassMatrix {
    diagonal: Vec<f64>,
}

impl MassMatrix {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if let Some(i) = diagonal.iter().position(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::Numerical(format!(
                "mass entry {i} is not positive ({})",
                diagonal[i]
            )));
        }
        Ok(Self { diagonal })
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn total(&self) -> f64 {
        self.diagonal.iter().sum()
    }
}

/// Leading eigenpairs of a symmetric operator, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub eigenvalues: Vec<f64>,
    /// `n x k`, column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralBasis {
    pub fn dimension(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Keeps the first `k` eigenpairs.
    pub fn truncate(&self, k: usize) -> SpectralBasis {
        let k = k.min(self.len());
        SpectralBasis {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors.columns(0, k).into_owned(),
        }
    }

    /// `max |A v_i - lambda_i v_i|` over all entries.
    pub fn residual(&self, op: &SymmetricOperator) -> f64 {
        let av = op.matrix() * &self.eigenvectors;
        let mut worst: f64 = 0.0;
        for (i, lambda) in self.eigenvalues.iter().enumerate() {
            let diff = av.column(i) - self.eigenvectors.column(i) * *lambda;
            worst = worst.max(diff.abs().max());
        }
        worst
    }
}

/// Mass lumping scheme for the Laplace-Beltrami operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassScheme {
    /// Voronoi areas, switching to area/2 and area/4 splits on obtuse triangles.
    #[default]
    Mixed,
    /// One third of each incident triangle.
    Barycentric,
}

fn check_faces(faces: &[[usize; 3]], n: usize) -> Result<()> {
    for (f, tri) in faces.iter().enumerate() {
        if tri.iter().any(|&i| i >= n) {
            return Err(Error::Structure(format!("face {f} references a vertex >= {n}")));
        }
    }
    Ok(())
}

/// `L_ii = degree(i)`, `L_ij = -1` on edges.
pub fn graph_laplacian(faces: &[[usize; 3]], n: usize) -> Result<SymmetricOperator> {
    check_faces(faces, n)?;
    graph_laplacian_from_edges(&edges_of(faces), n)
}

/// Graph Laplacian of an arbitrary simple graph. Duplicate edges (in either
/// orientation) count once; self-loops are rejected.
pub fn graph_laplacian_from_edges(edges: &[(usize, usize)], n: usize) -> Result<SymmetricOperator> {
    let mut unique: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::Structure(format!("edge ({a}, {b}) references a vertex >= {n}")));
        }
        if a == b {
            return Err(Error::Structure(format!("self-loop at vertex {a}")));
        }
        unique.push((a.min(b), a.max(b)));
    }
    unique.sort_unstable();
    unique.dedup();
    let mut l = DMatrix::zeros(n, n);
    for (a, b) in unique {
        l[(a, b)] = -1.0;
        l[(b, a)] = -1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    Ok(SymmetricOperator { matrix: l })
}

const MIN_FACE_AREA: f64 = 1e-12;

fn face_geometry(vertices: &[Point3<f64>], faces: &[[usize; 3]]) -> Result<Vec<([f64; 3], f64)>> {
    check_faces(faces, vertices.len())?;
    faces
        .iter()
        .enumerate()
        .map(|(f, tri)| {
            let p = tri.map(|i| vertices[i]);
            let double_area = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
            let area = 0.5 * double_area;
            if !(area >= MIN_FACE_AREA) {
                return Err(Error::DegenerateFace { face: f, area });
            }
            // cot of the angle at corner c = (u . v) / |u x v|
            let mut cots = [0.0; 3];
            for c in 0..3 {
                let u = p[(c + 1) % 3] - p[c];
                let v = p[(c + 2) % 3] - p[c];
                cots[c] = u.dot(&v) / double_area;
            }
            Ok((cots, area))
        })
        .collect()
}

/// Cotangent stiffness matrix with `w_ij = cot(alpha_ij) + cot(beta_ij)`.
///
/// Boundary edges carry the single cotangent of their one opposite angle.
/// Negative weights from obtuse angles are kept.
pub fn cotan_stiffness(vertices: &[Point3<f64>], faces: &[[usize; 3]]) -> Result<SymmetricOperator> {
    let n = vertices.len();
    let geo = face_geometry(vertices, faces)?;
    let mut s = DMatrix::zeros(n, n);
    for (tri, (cots, _)) in faces.iter().zip(&geo) {
        for c in 0..3 {
            let i = tri[(c + 1) % 3];
            let j = tri[(c + 2) % 3];
            let w = cots[c];
            s[(i, j)] -= w;
            s[(j, i)] -= w;
            s[(i, i)] += w;
            s[(j, j)] += w;
        }
    }
    Ok(SymmetricOperator { matrix: s })
}

/// Lumped vertex areas.
pub fn voronoi_mass(vertices: &[Point3<f64>], faces: &[[usize; 3]], scheme: MassScheme) -> Result<MassMatrix> {
    let n = vertices.len();
    let geo = face_geometry(vertices, faces)?;
    let mut b = vec![0.0; n];
    for (tri, (cots, area)) in faces.iter().zip(&geo) {
        match scheme {
            MassScheme::Barycentric => {
                for &v in tri {
                    b[v] += area / 3.0;
                }
            }
            MassScheme::Mixed => {
                // cot < 0 <=> obtuse angle
                if let Some(obtuse) = (0..3).find(|&c| cots[c] < 0.0) {
                    for c in 0..3 {
                        b[tri[c]] += if c == obtuse { area / 2.0 } else { area / 4.0 };
                    }
                } else {
                    for c in 0..3 {
                        let p = vertices[tri[c]];
                        let q = vertices[tri[(c + 1) % 3]];
                        let r = vertices[tri[(c + 2) % 3]];
                        // edge pq is opposite r, edge pr is opposite q
                        b[tri[c]] += ((p - q).norm_squared() * cots[(c + 2) % 3]
                            + (p - r).norm_squared() * cots[(c + 1) % 3])
                            / 8.0;
                    }
                }
            }
        }
    }
    if let Some(i) = b.iter().position(|&x| x <= 0.0) {
        return Err(Error::Structure(format!("vertex {i} is not part of any face")));
    }
    MassMatrix::new(b)
}

/// `O = B^{-1/2} S B^{-1/2}`.
pub fn symmetrize(s: &SymmetricOperator, b: &MassMatrix) -> Result<SymmetricOperator> {
    let n = s.dimension();
    if b.dimension() != n {
        return Err(Error::Config(format!(
            "stiffness is {n}x{n} but mass has {} entries",
            b.dimension()
        )));
    }
    let inv_sqrt: Vec<f64> = b.diagonal().iter().map(|x| 1.0 / x.sqrt()).collect();
    let o = DMatrix::from_fn(n, n, |i, j| s.matrix[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    // keep exact symmetry
    let o = DMatrix::from_fn(n, n, |i, j| if i <= j { o[(i, j)] } else { o[(j, i)] });
    Ok(SymmetricOperator { matrix: o })
}

/// The `k` smallest eigenpairs, ascending.
///
/// Each eigenvector's sign is fixed so that its largest-magnitude entry is
/// positive (first such entry on ties).
pub fn eig_sym(a: &SymmetricOperator, k: usize) -> Result<SpectralBasis> {
    let n = a.dimension();
    if k == 0 || k > n {
        return Err(Error::Config(format!("requested {k} eigenpairs of a {n}x{n} operator")));
    }
    let mut buf = a.matrix.as_slice().to_vec();
    let values = eigen::symmetric_eigen(&mut buf, n, true)?;
    let mut vectors = DMatrix::from_column_slice(n, n, &buf).columns(0, k).into_owned();
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        for i in 1..n {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(SpectralBasis {
        eigenvalues: values[..k].to_vec(),
        eigenvectors: vectors,
    })
}

/// All eigenvalues, ascending.
pub fn eigenvalues_sym(a: &SymmetricOperator) -> Result<Vec<f64>> {
    let n = a.dimension();
    let mut buf = a.matrix.as_slice().to_vec();
    eigen::symmetric_eigen(&mut buf, n, false)
}

pub(crate) fn connected_components(faces: &[[usize; 3]], n: usize) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (a, b) in edges_of(faces) {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Shape-DNA signature: the `k` smallest non-zero Laplace-Beltrami
/// eigenvalues of a patch. One zero mode per connected component is dropped.
pub fn shape_dna(patch: &CanonicalPatch, faces: &[[usize; 3]], k: usize) -> Result<Vec<f64>> {
    shape_dna_with(&patch.vertices, faces, k, MassScheme::Mixed)
}

pub fn shape_dna_with(
    vertices: &[Point3<f64>],
    faces: &[[usize; 3]],
    k: usize,
    scheme: MassScheme,
) -> Result<Vec<f64>> {
    let n = vertices.len();
    let zero_modes = connected_components(faces, n);
    if k == 0 || k + zero_modes > n {
        return Err(Error::Config(format!(
            "cannot take {k} non-zero eigenvalues from a {n}-vertex patch with {zero_modes} zero modes"
        )));
    }
    let s = cotan_stiffness(vertices, faces)?;
    let b = voronoi_mass(vertices, faces, scheme)?;
    let o = symmetrize(&s, &b)?;
    let values = eigenvalues_sym(&o)?;
    Ok(values[zero_modes..zero_modes + k].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_edges(edges: &[(usize, usize)], n: usize) -> SymmetricOperator {
        let mut l = DMatrix::zeros(n, n);
        for &(a, b) in edges {
            l[(a, b)] = -1.0;
            l[(b, a)] = -1.0;
            l[(a, a)] += 1.0;
            l[(b, b)] += 1.0;
        }
        SymmetricOperator::new(l).unwrap()
    }

    #[test]
    fn triangle_laplacian() {
        let l = graph_laplacian(&[[0, 1, 2]], 3).unwrap();
        assert_eq!(
            l.matrix(),
            &DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0])
        );
        let b = eig_sym(&l, 3).unwrap();
        for (x, y) in b.eigenvalues.iter().zip([0.0, 3.0, 3.0]) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn path_and_edge_spectra() {
        let p3 = from_edges(&[(0, 1), (1, 2)], 3);
        assert_eq!(
            p3.matrix(),
            &DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0])
        );
        let b = eig_sym(&p3, 3).unwrap();
        for (x, y) in b.eigenvalues.iter().zip([0.0, 1.0, 3.0]) {
            assert!((x - y).abs() < 1e-9);
        }
        let e = eig_sym(&from_edges(&[(0, 1)], 2), 2).unwrap();
        assert!((e.eigenvalues[0]).abs() < 1e-12 && (e.eigenvalues[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_kernel_vector_and_sign_rule() {
        let c5 = from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)], 5);
        let b = eig_sym(&c5, 5).unwrap();
        let expected = 1.0 / 5f64.sqrt();
        for i in 0..5 {
            assert!((b.eigenvectors[(i, 0)] - expected).abs() < 1e-8);
        }
        for col in b.eigenvectors.column_iter() {
            let (imax, _) = col.iter().enumerate().fold((0, 0.0), |acc, (i, v)| {
                if v.abs() > acc.1 {
                    (i, v.abs())
                } else {
                    acc
                }
            });
            assert!(col[imax] > 0.0);
        }
    }

    #[test]
    fn eig_sym_rejects_bad_k() {
        let l = graph_laplacian(&[[0, 1, 2]], 3).unwrap();
        assert!(eig_sym(&l, 0).is_err());
        assert!(eig_sym(&l, 4).is_err());
    }

    #[test]
    fn cotan_square_diagonal_weight_vanishes() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let s = cotan_stiffness(&v, &[[0, 1, 2], [0, 2, 3]]).unwrap();
        assert!(s.matrix()[(0, 2)].abs() < 1e-15);
        // boundary edge 0-1 sees only the 45 degree angle at vertex 2
        assert!((s.matrix()[(0, 1)] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn cotan_equilateral() {
        let h = 3f64.sqrt() / 2.0;
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.5, h, 0.0)];
        let s = cotan_stiffness(&v, &[[0, 1, 2]]).unwrap();
        let w = 1.0 / 3f64.sqrt();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((s.matrix()[(i, j)] + w).abs() < 1e-12);
        }
        for i in 0..3 {
            assert!(s.matrix().row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_face_is_named() {
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)];
        match cotan_stiffness(&v, &[[0, 1, 2]]) {
            Err(Error::DegenerateFace { face, .. }) => assert_eq!(face, 0),
            other => panic!("{other:?}"),
        }
        assert!(voronoi_mass(&v, &[[0, 1, 2]], MassScheme::Mixed).is_err());
    }

    #[test]
    fn voronoi_equilateral_and_right_triangle() {
        let h = 3f64.sqrt() / 2.0;
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.5, h, 0.0)];
        let b = voronoi_mass(&v, &[[0, 1, 2]], MassScheme::Mixed).unwrap();
        for &x in b.diagonal() {
            assert!((x - 3f64.sqrt() / 12.0).abs() < 1e-15);
        }

        // legs 3 and 4, right angle at vertex 0, area 6
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0), Point3::new(0.0, 4.0, 0.0)];
        let b = voronoi_mass(&v, &[[0, 1, 2]], MassScheme::Mixed).unwrap();
        assert!((b.diagonal()[0] - 3.0).abs() < 1e-12);
        assert!((b.diagonal()[1] - 1.5).abs() < 1e-12);
        assert!((b.diagonal()[2] - 1.5).abs() < 1e-12);

        // obtuse at vertex 2
        let v = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(4.0, 0.0, 0.0), Point3::new(2.0, 0.5, 0.0)];
        let b = voronoi_mass(&v, &[[0, 1, 2]], MassScheme::Mixed).unwrap();
        assert!((b.diagonal()[2] - 0.5).abs() < 1e-12);
        assert!((b.diagonal()[0] - 0.25).abs() < 1e-12);
        let bb = voronoi_mass(&v, &[[0, 1, 2]], MassScheme::Barycentric).unwrap();
        assert!((bb.diagonal()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_examples() {
        let s = SymmetricOperator::new(DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).unwrap();
        let id = MassMatrix::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(symmetrize(&s, &id).unwrap(), s);
        let b = MassMatrix::new(vec![4.0, 1.0]).unwrap();
        let o = symmetrize(&s, &b).unwrap();
        assert_eq!(o.matrix(), &DMatrix::from_row_slice(2, 2, &[0.25, -0.5, -0.5, 1.0]));
        assert!(MassMatrix::new(vec![1.0, 0.0]).is_err());
        assert!(MassMatrix::new(vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn components_count() {
        assert_eq!(connected_components(&[[0, 1, 2]], 3), 1);
        assert_eq!(connected_components(&[[0, 1, 2], [3, 4, 5]], 6), 2);
    }

    #[test]
    fn bandwidth_of_canonical_patch() {
        let cfg = crate::patch::PatchConfig::new(1.0, 2.0, 4, 6).unwrap();
        let faces = crate::patch::canonical_connectivity(&cfg);
        let l = graph_laplacian(&faces, cfg.vertex_count()).unwrap();
        assert_eq!(l.bandwidth(), 7);
    }
}
