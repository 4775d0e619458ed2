//! Structured conforming triangulations of the unit square.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::quadrature::edge_quadrature;

/// Side of the unit square a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryMarker {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    /// Triangle on the `-normal` side.
    pub left: usize,
    /// Triangle on the `+normal` side; `None` on the boundary.
    pub right: Option<usize>,
    /// Unit normal pointing from `left` to `right` (outward on the boundary).
    pub normal: [f64; 2],
    pub length: f64,
    pub marker: Option<BoundaryMarker>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Affine map from the reference triangle onto a mesh triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: [f64; 2],
    /// Columns are `p1 - p0` and `p2 - p0`.
    pub jac: [[f64; 2]; 2],
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl AffineMap {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let jac = [
            [p[1][0] - p[0][0], p[2][0] - p[0][0]],
            [p[1][1] - p[0][1], p[2][1] - p[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Self {
            origin: p[0],
            jac,
            inv,
            det,
        }
    }

    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient from a reference gradient: `J^{-T} g`.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// Physical Laplacian from a reference Hessian `(xx, xy, yy)`:
    /// `trace(J^{-T} H J^{-1})`.
    pub fn laplacian(&self, h: [f64; 3]) -> f64 {
        let hm = [[h[0], h[1]], [h[1], h[2]]];
        let mut tr = 0.0;
        for d in 0..2 {
            // column d of J^{-1}
            let c = [self.inv[0][d], self.inv[1][d]];
            tr += c[0] * (hm[0][0] * c[0] + hm[0][1] * c[1])
                + c[1] * (hm[1][0] * c[0] + hm[1][1] * c[1]);
        }
        tr
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    subdivisions: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Local edge `i` of a triangle is opposite its vertex `i`.
    pub triangle_edges: Vec<[usize; 3]>,
    maps: Vec<AffineMap>,
    h: f64,
}

/// Builds the `n x n` cell mesh of `[0,1]^2`, each cell split along the
/// diagonal from `(i/n, j/n)` to `((i+1)/n, (j+1)/n)`.
pub fn build_structured_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("mesh needs at least one subdivision"));
    }
    let nf = n as f64;
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / nf, j as f64 / nf]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let mut edges: Vec<Edge> = Vec::with_capacity(3 * n * n + 2 * n);
    let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
    let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.capacity());
    for (t, tri) in triangles.iter().enumerate() {
        for local in 0..3 {
            let a = tri[(local + 1) % 3];
            let b = tri[(local + 2) % 3];
            let key = (a.min(b), a.max(b));
            let id = match lookup.get(&key) {
                Some(&id) => {
                    edges[id].right = Some(t);
                    id
                }
                None => {
                    let (pa, pb) = (vertices[a], vertices[b]);
                    let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                    let length = dx.hypot(dy);
                    let id = edges.len();
                    edges.push(Edge {
                        vertices: [a, b],
                        left: t,
                        right: None,
                        normal: [dy / length, -dx / length],
                        length,
                        marker: None,
                    });
                    lookup.insert(key, id);
                    id
                }
            };
            triangle_edges[t][local] = id;
        }
    }
    for e in edges.iter_mut().filter(|e| e.right.is_none()) {
        let mid = midpoint(&vertices, e.vertices);
        e.marker = Some(if mid[1] == 0.0 {
            BoundaryMarker::Bottom
        } else if mid[0] == 1.0 {
            BoundaryMarker::Right
        } else if mid[1] == 1.0 {
            BoundaryMarker::Top
        } else {
            BoundaryMarker::Left
        });
    }

    let maps: Vec<AffineMap> = triangles
        .iter()
        .map(|t| AffineMap::new([vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
        .collect();
    let h = triangles
        .iter()
        .map(|t| {
            let mut d: f64 = 0.0;
            for a in 0..3 {
                for b in (a + 1)..3 {
                    let (p, q) = (vertices[t[a]], vertices[t[b]]);
                    d = d.max((p[0] - q[0]).hypot(p[1] - q[1]));
                }
            }
            d
        })
        .fold(0.0, f64::max);

    Ok(Mesh {
        subdivisions: n,
        vertices,
        triangles,
        edges,
        triangle_edges,
        maps,
        h,
    })
}

fn midpoint(vertices: &[[f64; 2]], e: [usize; 2]) -> [f64; 2] {
    let (a, b) = (vertices[e[0]], vertices[e[1]]);
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

impl Mesh {
    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Maximum triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn map(&self, t: usize) -> &AffineMap {
        &self.maps[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.maps[t].area()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let tri = self.triangles[t];
        let mut c = [0.0; 2];
        for &v in &tri {
            c[0] += self.vertices[v][0] / 3.0;
            c[1] += self.vertices[v][1] / 3.0;
        }
        c
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary())
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| !e.is_boundary())
    }

    /// Physical coordinates of the edge point at parameter `s` in `[0, 1]`.
    pub fn edge_point(&self, e: usize, s: f64) -> [f64; 2] {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    /// Triangle containing `x`. Points on shared edges resolve to one of the
    /// incident triangles.
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let tol = 1e-12;
        if !(-tol..=1.0 + tol).contains(&x[0]) || !(-tol..=1.0 + tol).contains(&x[1]) {
            return None;
        }
        let n = self.subdivisions;
        let nf = n as f64;
        let i = ((x[0] * nf).floor() as isize).clamp(0, n as isize - 1) as usize;
        let j = ((x[1] * nf).floor() as isize).clamp(0, n as isize - 1) as usize;
        let fx = x[0] * nf - i as f64;
        let fy = x[1] * nf - j as f64;
        let cell = j * n + i;
        Some(if fx >= fy { 2 * cell } else { 2 * cell + 1 })
    }

    /// Writes the mesh as a legacy ASCII VTK unstructured grid.
    pub fn write_vtk<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "structured triangulation n={}", self.subdivisions)?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{} {} 0", v[0], v[1])?;
        }
        let nt = self.triangles.len();
        writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {nt}")?;
        for _ in 0..nt {
            writeln!(w, "5")?;
        }
        Ok(())
    }
}

/// Flow direction across a boundary edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFlow {
    Inflow,
    Outflow,
    Characteristic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClassification {
    /// `(edge id, label)` for every boundary edge, in edge order.
    pub labels: Vec<(usize, EdgeFlow)>,
    /// Minimum distance between inflow and outflow edges; zero when they touch.
    /// Infinite if either set is empty.
    pub separation: f64,
}

impl BoundaryClassification {
    pub fn measure(&self, mesh: &Mesh, flow: EdgeFlow) -> f64 {
        self.labels
            .iter()
            .filter(|(_, l)| *l == flow)
            .map(|(e, _)| mesh.edges[*e].length)
            .sum()
    }

    pub fn label(&self, edge: usize) -> Option<EdgeFlow> {
        self.labels.iter().find(|(e, _)| *e == edge).map(|(_, l)| *l)
    }
}

/// Labels boundary edges by the sign of the edge flux `int_e beta . n ds`.
///
/// `beta` receives the triangle owning the edge and a physical point, so a
/// broken (per-element) velocity is evaluated from the interior side.
pub fn classify_boundary<F>(mesh: &Mesh, beta: F) -> BoundaryClassification
where
    F: Fn(usize, [f64; 2]) -> [f64; 2],
{
    let rule = edge_quadrature(8).expect("degree 8 edge rule");
    let mut fluxes = Vec::new();
    let mut beta_max: f64 = 0.0;
    for (id, e) in mesh.boundary_edges() {
        let mut flux = 0.0;
        for (p, w) in rule.iter() {
            let x = mesh.edge_point(id, p[0]);
            let b = beta(e.left, x);
            beta_max = beta_max.max(b[0].hypot(b[1]));
            flux += w * e.length * (b[0] * e.normal[0] + b[1] * e.normal[1]);
        }
        fluxes.push((id, flux));
    }
    let labels: Vec<(usize, EdgeFlow)> = fluxes
        .into_iter()
        .map(|(id, flux)| {
            let tol = 1e-12 * mesh.edges[id].length * beta_max;
            let label = if flux < -tol {
                EdgeFlow::Inflow
            } else if flux > tol {
                EdgeFlow::Outflow
            } else {
                EdgeFlow::Characteristic
            };
            (id, label)
        })
        .collect();

    let pick = |flow: EdgeFlow| -> Vec<usize> {
        labels
            .iter()
            .filter(|(_, l)| *l == flow)
            .map(|(e, _)| *e)
            .collect()
    };
    let (inflow, outflow) = (pick(EdgeFlow::Inflow), pick(EdgeFlow::Outflow));
    let mut separation = f64::INFINITY;
    for &a in &inflow {
        for &b in &outflow {
            separation = separation.min(segment_distance(mesh, a, b));
        }
    }
    BoundaryClassification { labels, separation }
}

fn segment_distance(mesh: &Mesh, a: usize, b: usize) -> f64 {
    let (ea, eb) = (&mesh.edges[a], &mesh.edges[b]);
    if ea.vertices.iter().any(|v| eb.vertices.contains(v)) {
        return 0.0;
    }
    let seg = |e: &Edge| (mesh.vertices[e.vertices[0]], mesh.vertices[e.vertices[1]]);
    let (a0, a1) = seg(ea);
    let (b0, b1) = seg(eb);
    // boundary edges never cross, so the minimum is attained at an endpoint
    [
        point_segment(a0, b0, b1),
        point_segment(a1, b0, b1),
        point_segment(b0, a0, a1),
        point_segment(b1, a0, a1),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

fn point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(m: &Mesh) -> (usize, usize) {
        let b = m.boundary_edges().count();
        (b, m.edges.len() - b)
    }

    #[test]
    fn small_meshes() {
        let m = build_structured_mesh(1).unwrap();
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(counts(&m), (4, 1));

        let m = build_structured_mesh(2).unwrap();
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(counts(&m), (8, 8));
        // V - E + F = 9 - 16 + (8 + 1)
        assert_eq!(m.vertices.len() as i64 - m.edges.len() as i64 + 9, 2);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(
            build_structured_mesh(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mesh_size_matches_reported_values() {
        let m = build_structured_mesh(48).unwrap();
        assert!((m.h() - 2f64.sqrt() / 48.0).abs() < 1e-15);
        assert!((m.h() - 0.0295).abs() < 1e-4);
        let m = build_structured_mesh(24).unwrap();
        assert!((m.h() - 0.0589).abs() < 1e-4);
    }

    #[test]
    fn invariants() {
        for n in [1, 2, 3, 7, 16] {
            let m = build_structured_mesh(n).unwrap();
            assert_eq!(m.num_triangles(), 2 * n * n);
            let total: f64 = (0..m.num_triangles()).map(|t| m.area(t)).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!((0..m.num_triangles()).all(|t| m.map(t).det > 0.0));
            let f = m.num_triangles() as i64 + 1;
            assert_eq!(m.vertices.len() as i64 - m.edges.len() as i64 + f, 2);

            let mut incidence = vec![0usize; m.edges.len()];
            for te in &m.triangle_edges {
                for &e in te {
                    incidence[e] += 1;
                }
            }
            for (e, edge) in m.edges.iter().enumerate() {
                assert_eq!(incidence[e], if edge.is_boundary() { 1 } else { 2 });
                assert!((edge.normal[0].hypot(edge.normal[1]) - 1.0).abs() < 1e-15);
                // left centroid on the -n side, right on the +n side
                let mid = midpoint(&m.vertices, edge.vertices);
                let side = |t: usize| {
                    let c = m.centroid(t);
                    (c[0] - mid[0]) * edge.normal[0] + (c[1] - mid[1]) * edge.normal[1]
                };
                assert!(side(edge.left) < 0.0);
                if let Some(r) = edge.right {
                    assert!(side(r) > 0.0);
                }
            }
            let mut closed = [0.0; 2];
            for (_, e) in m.boundary_edges() {
                closed[0] += e.normal[0] * e.length;
                closed[1] += e.normal[1] * e.length;
            }
            assert!(closed[0].abs() < 1e-12 && closed[1].abs() < 1e-12);
        }
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let m = build_structured_mesh(5).unwrap();
        for t in 0..m.num_triangles() {
            assert_eq!(m.locate(m.centroid(t)), Some(t));
        }
        assert_eq!(m.locate([1.5, 0.2]), None);
        assert!(m.locate([1.0, 1.0]).is_some());
    }

    #[test]
    fn affine_map_round_trip() {
        let m = build_structured_mesh(3).unwrap();
        let map = m.map(5);
        let r = [0.2, 0.3];
        let back = map.to_reference(map.to_physical(r));
        assert!((back[0] - r[0]).abs() < 1e-14 && (back[1] - r[1]).abs() < 1e-14);
    }

    fn example1_velocity(x: [f64; 2]) -> [f64; 2] {
        let u = (0.5 - x[0] + (x[1] - 0.5).powi(2)).exp();
        [-u, 2.0 * (x[1] - 0.5) * u]
    }

    #[test]
    fn example1_boundary_labels() {
        let m = build_structured_mesh(8).unwrap();
        let c = classify_boundary(&m, |_, x| example1_velocity(x));
        for (e, label) in &c.labels {
            let expected = match m.edges[*e].marker.unwrap() {
                BoundaryMarker::Right => EdgeFlow::Inflow,
                _ => EdgeFlow::Outflow,
            };
            assert_eq!(*label, expected, "edge {e}");
        }
        assert!((c.measure(&m, EdgeFlow::Inflow) - 1.0).abs() < m.h());
        assert_eq!(c.separation, 0.0);
    }

    #[test]
    fn example4_boundary_labels() {
        let m = build_structured_mesh(8).unwrap();
        let beta = |_: usize, x: [f64; 2]| {
            let ey = x[1].exp();
            [-(x[0] - 0.5).sin() * ey, (x[0] - 0.5).cos() * ey]
        };
        let c = classify_boundary(&m, beta);
        for (e, label) in &c.labels {
            let edge = &m.edges[*e];
            let expected = match edge.marker.unwrap() {
                BoundaryMarker::Top => EdgeFlow::Outflow,
                _ => EdgeFlow::Inflow,
            };
            assert_eq!(*label, expected, "edge {e} {:?}", edge.marker);
        }
    }

    #[test]
    fn zero_velocity_is_characteristic() {
        let m = build_structured_mesh(4).unwrap();
        let c = classify_boundary(&m, |_, _| [0.0, 0.0]);
        assert!(c.labels.iter().all(|(_, l)| *l == EdgeFlow::Characteristic));
        assert!(c.separation.is_infinite());
    }

    #[test]
    fn separated_sets() {
        let m = build_structured_mesh(4).unwrap();
        // inflow on the left, outflow on the right, top/bottom tangential
        let c = classify_boundary(&m, |_, _| [1.0, 0.0]);
        assert!((c.separation - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vtk_export() {
        let m = build_structured_mesh(2).unwrap();
        let mut buf = Vec::new();
        m.write_vtk(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("POINTS 9 double"));
        assert!(s.contains("CELLS 8 32"));
        assert_eq!(s.lines().filter(|l| *l == "5").count(), 8);
    }
}
