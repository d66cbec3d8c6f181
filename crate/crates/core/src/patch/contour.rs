//! Iso-distance contours of the Euclidean distance field around a landmark.
//!
//! The contour topology follows marching triangles on the per-vertex distance
//! field (a vertex is inside when `d < lambda`). Each crossing point is placed
//! by intersecting the crossed edge with the sphere of radius `lambda`, so
//! every point lies on the sphere up to rounding.

use std::collections::{HashMap, VecDeque};

use nalgebra::{Point3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

use super::LevelCurve;

/// Distance field of one landmark, restricted to the faces within reach.
pub(crate) struct LocalField<'m> {
    mesh: &'m TriangleMesh,
    apex: Point3<f64>,
    label: String,
    dist: Vec<f64>,
    faces: Vec<usize>,
    adjacency: HashMap<usize, Vec<usize>>,
    seed: Option<usize>,
    normal: Unit<Vector3<f64>>,
}

impl<'m> LocalField<'m> {
    pub(crate) fn new(mesh: &'m TriangleMesh, apex: Point3<f64>, label: &str, reach: f64) -> Result<Self> {
        let extraction = |reason: &str| Error::Extraction {
            landmark: label.to_string(),
            lambda: reach,
            reason: reason.to_string(),
        };
        if mesh.is_empty() || mesh.num_faces() == 0 {
            return Err(extraction("mesh is empty"));
        }
        let dist = mesh.distance_field(&apex);
        let faces: Vec<usize> = mesh
            .faces()
            .iter()
            .enumerate()
            .filter(|(_, tri)| tri.iter().any(|&v| dist[v] < reach))
            .map(|(f, _)| f)
            .collect();
        let mut adjacency: HashMap<usize, Vec<usize>> = HashMap::new();
        for &f in &faces {
            let tri = mesh.faces()[f];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                adjacency.entry(a).or_default().push(b);
                adjacency.entry(b).or_default().push(a);
            }
        }
        let nearest = mesh.nearest_vertex(&apex).expect("mesh is non-empty");
        let seed = adjacency.contains_key(&nearest).then_some(nearest);
        let normal = mesh
            .vertex_normal(nearest)
            .ok_or_else(|| extraction("surface normal at the landmark is undefined"))?;
        Ok(Self {
            mesh,
            apex,
            label: label.to_string(),
            dist,
            faces,
            adjacency,
            seed,
            normal,
        })
    }

    pub(crate) fn normal(&self) -> Unit<Vector3<f64>> {
        self.normal
    }

    fn crossing_point(&self, a: usize, b: usize, lambda: f64) -> Point3<f64> {
        // a inside, b outside
        let pa = self.mesh.vertices()[a];
        let pb = self.mesh.vertices()[b];
        let e = pb - pa;
        let w = pa - self.apex;
        let qa = e.norm_squared();
        let qb = 2.0 * w.dot(&e);
        let qc = w.norm_squared() - lambda * lambda;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        let t = if qb >= 0.0 { qc / q } else { q / qa };
        pa + e * t.clamp(0.0, 1.0)
    }

    /// Vertices of the connected sublevel set `d < lambda` containing the landmark.
    fn sublevel_region(&self, lambda: f64) -> Option<std::collections::HashSet<usize>> {
        let seed = self.seed?;
        if self.dist[seed] >= lambda {
            return None;
        }
        let mut seen = std::collections::HashSet::new();
        let mut queue = VecDeque::from([seed]);
        seen.insert(seed);
        while let Some(v) = queue.pop_front() {
            for &u in self.adjacency.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
                if self.dist[u] < lambda && seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
        Some(seen)
    }

    pub(crate) fn level_curve(&self, lambda: f64) -> Result<LevelCurve> {
        let extraction = |reason: String| Error::Extraction {
            landmark: self.label.clone(),
            lambda,
            reason,
        };
        if !(lambda > 0.0) {
            return Err(extraction("lambda must be positive".into()));
        }

        // node = crossed edge (inside vertex, outside vertex); links join the
        // two crossed edges of each crossed face
        let mut node_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nodes: Vec<(usize, usize)> = Vec::new();
        let mut links: Vec<Vec<usize>> = Vec::new();
        let tris = self.mesh.faces();
        for &f in &self.faces {
            let tri = tris[f];
            let inside = tri.map(|v| self.dist[v] < lambda);
            if inside.iter().all(|&s| s) || inside.iter().all(|&s| !s) {
                continue;
            }
            let mut crossed = [usize::MAX; 2];
            let mut n = 0;
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if inside[k] != inside[(k + 1) % 3] {
                    let key = if inside[k] { (a, b) } else { (b, a) };
                    let id = *node_of.entry(key).or_insert_with(|| {
                        nodes.push(key);
                        links.push(Vec::new());
                        nodes.len() - 1
                    });
                    crossed[n] = id;
                    n += 1;
                }
            }
            debug_assert_eq!(n, 2);
            links[crossed[0]].push(crossed[1]);
            links[crossed[1]].push(crossed[0]);
        }
        if nodes.is_empty() {
            return Err(extraction(
                "iso-level not present (lambda beyond the surface reach or landmark off the mesh)".into(),
            ));
        }

        let region = self.sublevel_region(lambda);
        let mut visited = vec![false; nodes.len()];
        let mut closed: Vec<Vec<usize>> = Vec::new();
        let mut open_touching_region = false;
        for start in 0..nodes.len() {
            if visited[start] {
                continue;
            }
            let comp = collect_component(start, &links, &mut visited);
            let touches = region
                .as_ref()
                .is_none_or(|r| comp.iter().any(|&c| r.contains(&nodes[c].0)));
            let is_loop = comp.iter().all(|&c| links[c].len() == 2);
            if !is_loop {
                open_touching_region |= touches;
                continue;
            }
            if touches {
                closed.push(order_loop(&comp, &links));
            }
        }

        let (u, v) = tangent_frame(&self.normal);
        let mut enclosing: Vec<(Vec<Point3<f64>>, f64)> = Vec::new();
        for ordered in &closed {
            let pts: Vec<Point3<f64>> = dedup_closed(
                ordered
                    .iter()
                    .map(|&c| self.crossing_point(nodes[c].0, nodes[c].1, lambda))
                    .collect(),
            );
            if pts.len() < 3 {
                continue;
            }
            let planar: Vec<(f64, f64)> = pts
                .iter()
                .map(|p| {
                    let d = p - self.apex;
                    (d.dot(&u), d.dot(&v))
                })
                .collect();
            if winding_number(&planar).abs() == 1 {
                enclosing.push((pts, signed_area(&planar)));
            }
        }

        let (mut points, area) = match enclosing.len() {
            0 if open_touching_region => {
                return Err(extraction("iso-contour reaches the mesh boundary (open surface)".into()))
            }
            0 => {
                return Err(Error::Ambiguous {
                    landmark: self.label.clone(),
                    lambda,
                    components: closed.len(),
                })
            }
            1 => enclosing.pop().unwrap(),
            _ => enclosing
                .into_iter()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .unwrap(),
        };
        if area < 0.0 {
            points.reverse();
        }
        Ok(LevelCurve { points, lambda })
    }
}

fn collect_component(start: usize, links: &[Vec<usize>], visited: &mut [bool]) -> Vec<usize> {
    let mut comp = Vec::new();
    let mut stack = vec![start];
    visited[start] = true;
    while let Some(c) = stack.pop() {
        comp.push(c);
        for &d in &links[c] {
            if !visited[d] {
                visited[d] = true;
                stack.push(d);
            }
        }
    }
    comp
}

/// Walks a component whose nodes all have two links.
fn order_loop(comp: &[usize], links: &[Vec<usize>]) -> Vec<usize> {
    let start = *comp.iter().min().unwrap();
    let mut order = Vec::with_capacity(comp.len());
    order.push(start);
    let mut prev = start;
    let mut cur = links[start][0].min(links[start][1]);
    while cur != start && order.len() <= comp.len() {
        order.push(cur);
        let next = if links[cur][0] != prev { links[cur][0] } else { links[cur][1] };
        prev = cur;
        cur = next;
    }
    order
}

fn dedup_closed(mut pts: Vec<Point3<f64>>) -> Vec<Point3<f64>> {
    pts.dedup_by(|a, b| (*a - *b).norm_squared() == 0.0);
    while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm_squared() == 0.0 {
        pts.pop();
    }
    pts
}

pub(crate) fn tangent_frame(n: &Unit<Vector3<f64>>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = (helper - n.as_ref() * n.dot(&helper)).normalize();
    let v = n.cross(&u);
    (u, v)
}

fn winding_number(pts: &[(f64, f64)]) -> i64 {
    let mut total = 0.0;
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        total += (x0 * y1 - y0 * x1).atan2(x0 * x1 + y0 * y1);
    }
    (total / std::f64::consts::TAU).round() as i64
}

fn signed_area(pts: &[(f64, f64)]) -> f64 {
    let mut a = 0.0;
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        a += x0 * y1 - x1 * y0;
    }
    0.5 * a
}
