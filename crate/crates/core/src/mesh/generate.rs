use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Point, TriangleMesh};
use crate::error::{Error, Result};

pub const MAX_ICOSPHERE_SUBDIVISIONS: u32 = 7;

/// Icosahedron subdivided `subdivisions` times with every vertex projected
/// onto the sphere of the given radius. Has `10 * 4^s + 2` vertices.
pub fn icosphere(subdivisions: u32, radius: f64) -> Result<TriangleMesh> {
    if subdivisions > MAX_ICOSPHERE_SUBDIVISIONS {
        return Err(Error::Config(format!(
            "icosphere subdivisions must be at most {MAX_ICOSPHERE_SUBDIVISIONS}, got {subdivisions}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!(
            "icosphere radius must be positive, got {radius}"
        )));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Point::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3 / 2);
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            *midpoint.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    for v in &mut vertices {
        *v *= radius;
    }
    TriangleMesh::new(vertices, faces, format!("icosphere-{subdivisions}"))
}

/// Torus of revolution around the z axis sampled on an
/// `n_major x n_minor` grid, each grid quad split into two triangles.
pub fn torus(n_major: usize, n_minor: usize, major_radius: f64, minor_radius: f64) -> Result<TriangleMesh> {
    if n_major < 3 || n_minor < 3 {
        return Err(Error::Config(format!(
            "torus grid needs at least 3x3 samples, got {n_major}x{n_minor}"
        )));
    }
    if !(minor_radius > 0.0 && major_radius > minor_radius && major_radius.is_finite()) {
        return Err(Error::Config(format!(
            "torus radii must satisfy 0 < r < R, got R={major_radius}, r={minor_radius}"
        )));
    }
    let mut vertices = Vec::with_capacity(n_major * n_minor);
    for i in 0..n_major {
        let theta = 2.0 * PI * i as f64 / n_major as f64;
        for j in 0..n_minor {
            let phi = 2.0 * PI * j as f64 / n_minor as f64;
            let ring = major_radius + minor_radius * phi.cos();
            vertices.push(Point::new(
                ring * theta.cos(),
                ring * theta.sin(),
                minor_radius * phi.sin(),
            ));
        }
    }
    let idx = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
    let mut faces = Vec::with_capacity(2 * n_major * n_minor);
    for i in 0..n_major {
        for j in 0..n_minor {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces, format!("torus-{n_major}x{n_minor}"))
}

/// Regular tetrahedron centered at the origin with the given edge length.
pub fn regular_tetrahedron(edge: f64) -> Result<TriangleMesh> {
    if !(edge > 0.0 && edge.is_finite()) {
        return Err(Error::Config(format!("tetrahedron edge must be positive, got {edge}")));
    }
    let s = edge / (2.0 * 2f64.sqrt());
    let vertices = vec![
        Point::new(1.0, 1.0, 1.0) * s,
        Point::new(1.0, -1.0, -1.0) * s,
        Point::new(-1.0, 1.0, -1.0) * s,
        Point::new(-1.0, -1.0, 1.0) * s,
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriangleMesh::new(vertices, faces, "tetrahedron")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_counts() {
        let m = icosphere(0, 1.0).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (12, 20));
    }

    #[test]
    fn icosphere_vertex_count_formula() {
        for s in 0..=5u32 {
            let m = icosphere(s, 1.0).unwrap();
            assert_eq!(m.num_vertices(), 10 * 4usize.pow(s) + 2);
            assert_eq!(m.num_faces(), 20 * 4usize.pow(s));
        }
        assert_eq!(icosphere(3, 1.0).unwrap().num_vertices(), 642);
    }

    #[test]
    fn icosphere_vertices_on_sphere() {
        let m = icosphere(2, 2.0).unwrap();
        assert_eq!(m.num_vertices(), 162);
        for v in m.vertices() {
            assert!((v.norm() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn icosphere_faces_point_outward() {
        let m = icosphere(1, 1.0).unwrap();
        for t in m.faces() {
            let [a, b, c] = t.map(|i| m.vertices()[i]);
            let n = (b - a).cross(&(c - a));
            assert!(n.dot(&(a + b + c)) > 0.0);
        }
    }

    #[test]
    fn icosphere_rejects_too_many_subdivisions() {
        assert!(icosphere(8, 1.0).is_err());
    }

    #[test]
    fn minimal_torus() {
        let m = torus(3, 3, 2.0, 0.5).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (9, 18));
    }

    #[test]
    fn torus_grid_topology() {
        let m = torus(16, 8, 2.0, 0.5).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (128, 256));
        // Closed surface: V - E + F = 0 for a torus and E = 3F/2.
        assert_eq!(m.edges().len(), 384);
        assert!(m.validation_report().is_valid());
    }

    #[test]
    fn torus_area_close_to_analytic() {
        let m = torus(16, 8, 2.0, 0.5).unwrap();
        let analytic = 4.0 * PI * PI * 2.0 * 0.5;
        assert!((m.surface_area() - analytic).abs() / analytic < 0.05);
    }

    #[test]
    fn torus_rejects_bad_radii() {
        assert!(torus(8, 8, 1.0, 1.0).is_err());
        assert!(torus(2, 8, 2.0, 0.5).is_err());
    }

    #[test]
    fn tetrahedron_edges() {
        let m = regular_tetrahedron(1.0).unwrap();
        for (a, b) in m.edges() {
            assert!(((m.vertices()[a] - m.vertices()[b]).norm() - 1.0).abs() < 1e-15);
        }
    }
}
