use std::collections::BTreeSet;

use glf_core::mesh::{RigidTransform, TriangleMesh};
use nalgebra::{Point3, Vector3};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Point3<f64>> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

/// Random triangle soup; faces use three distinct vertices but need not form a manifold.
fn mesh() -> impl Strategy<Value = TriangleMesh> {
    (3usize..14).prop_flat_map(|n| {
        let face = (0..n, 0..n, 0..n).prop_filter("distinct corners", |(a, b, c)| a != b && b != c && a != c);
        (prop::collection::vec(point(), n), prop::collection::vec(face, 1..20)).prop_map(|(v, f)| {
            let faces = f.into_iter().map(|(a, b, c)| [a, b, c]).collect();
            TriangleMesh::new(v, faces).unwrap()
        })
    })
}

fn transform(scale: impl Strategy<Value = f64>) -> impl Strategy<Value = RigidTransform> {
    (point(), -3.0..3.0f64, point(), scale).prop_filter_map("degenerate axis", |(axis, angle, t, s)| {
        let axis = axis.coords;
        if axis.norm() < 1e-3 {
            return None;
        }
        let r = RigidTransform::from_axis_angle(axis, angle, t.coords).ok()?;
        RigidTransform::new(*r.rotation(), t.coords, s).ok()
    })
}

proptest! {
    #[test]
    fn rigid_motion_preserves_distances(m in mesh(), t in transform(Just(1.0))) {
        let moved = m.apply_transform(&t);
        let (a, b) = (m.vertices(), moved.vertices());
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                prop_assert!(((a[i] - a[j]).norm() - (b[i] - b[j]).norm()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn distance_field_scales_with_transform(m in mesh(), t in transform(0.2..5.0f64), r in point()) {
        let before = m.distance_field(&r);
        let after = m.apply_transform(&t).distance_field(&t.apply_point(&r));
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((t.scale() * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn degree_sum_is_twice_edge_count(m in mesh()) {
        let mut edges = BTreeSet::new();
        for f in m.faces() {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        prop_assert_eq!(m.edges().len(), edges.len());
        prop_assert_eq!(m.vertex_degrees().iter().sum::<usize>(), 2 * edges.len());
    }

    #[test]
    fn translation_then_inverse_is_identity(m in mesh(), t in point()) {
        let back = m
            .apply_transform(&RigidTransform::translation(t.coords))
            .apply_transform(&RigidTransform::translation(-t.coords));
        for (p, q) in m.vertices().iter().zip(back.vertices()) {
            prop_assert!((p - q).norm() <= 1e-12 * (1.0 + p.coords.norm() + t.coords.norm()));
        }
    }
}

#[test]
fn rotation_columns_are_orthonormal() {
    let t = RigidTransform::from_axis_angle(Vector3::new(1.0, 2.0, -0.5), 1.1, Vector3::zeros()).unwrap();
    let r = t.rotation();
    assert!((r.transpose() * r - nalgebra::Matrix3::identity()).abs().max() <= 1e-9);
}
