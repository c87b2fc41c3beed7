use nalgebra::{Matrix3, Rotation3, Unit};

use super::{Point, TriangleMesh};
use crate::error::{Error, Result};

/// Barycentric interpolation weights from mesh vertices to a set of points:
/// row `i` holds three `(vertex, weight)` pairs summing to one.
#[derive(Clone, Debug)]
pub struct InterpolationOperator {
    rows: Vec<[(usize, f64); 3]>,
    n_source: usize,
}

impl InterpolationOperator {
    pub fn rows(&self) -> &[[(usize, f64); 3]] {
        &self.rows
    }

    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        assert_eq!(signal.len(), self.n_source, "signal length must match the source mesh");
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(v, w)| w * signal[v]).sum())
            .collect()
    }

    /// Transpose action `Wᵀ g`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_source];
        for (row, &gi) in self.rows.iter().zip(g) {
            for &(v, w) in row {
                out[v] += w * gi;
            }
        }
        out
    }
}

/// Result of locating warp points on the mesh surface.
#[derive(Clone, Debug)]
pub struct Pullback {
    pub operator: InterpolationOperator,
    /// Largest distance from a warp point to its closest surface point.
    pub max_offset: f64,
}

impl Pullback {
    /// Locates every point of `warp` on `mesh` by closest-point projection.
    /// Ties between equidistant faces go to the lowest face index.
    pub fn new(mesh: &TriangleMesh, warp: &[Point], max_distance: f64) -> Result<Self> {
        let faces = mesh.faces();
        let v = mesh.vertices();
        let bounds: Vec<(Point, f64)> = faces
            .iter()
            .map(|t| {
                let c = (v[t[0]] + v[t[1]] + v[t[2]]) / 3.0;
                let r = t.iter().map(|&i| (v[i] - c).norm()).fold(0.0, f64::max);
                (c, r)
            })
            .collect();

        let mut rows = Vec::with_capacity(warp.len());
        let mut offending = Vec::new();
        let mut max_offset = 0.0f64;
        for (i, p) in warp.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut best_row = [(0, 0.0); 3];
            for (f, t) in faces.iter().enumerate() {
                let (c, r) = bounds[f];
                let lower = (p - c).norm() - r;
                if lower > best.sqrt() {
                    continue;
                }
                let (q, bary) = closest_point_on_triangle(p, &v[t[0]], &v[t[1]], &v[t[2]]);
                let d2 = (p - q).norm_squared();
                if d2 < best {
                    best = d2;
                    best_row = [(t[0], bary[0]), (t[1], bary[1]), (t[2], bary[2])];
                }
            }
            let d = best.sqrt();
            max_offset = max_offset.max(d);
            if !(d <= max_distance) {
                offending.push(i);
            }
            rows.push(best_row);
        }
        if !offending.is_empty() {
            return Err(Error::WarpOffSurface {
                count: offending.len(),
                limit: max_distance,
                indices: offending,
            });
        }
        Ok(Self {
            operator: InterpolationOperator {
                rows,
                n_source: mesh.num_vertices(),
            },
            max_offset,
        })
    }
}

/// `V_ζ f`: samples `signal` at each warped vertex location `warp[i]`
/// (the point `ζ⁻¹(x_i)`) by closest-point projection and barycentric
/// interpolation.
pub fn pullback(mesh: &TriangleMesh, signal: &[f64], warp: &[Point], max_distance: f64) -> Result<Vec<f64>> {
    if signal.len() != mesh.num_vertices() {
        return Err(Error::Dimension(format!(
            "signal has {} entries, mesh has {} vertices",
            signal.len(),
            mesh.num_vertices()
        )));
    }
    Ok(Pullback::new(mesh, warp, max_distance)?.operator.apply(signal))
}

/// Rotates each vertex about the z axis by `epsilon * z / |x|` radians
/// (a twist that grows with latitude), keeping it on its sphere of radius
/// `|x|` about the origin.
pub fn latitude_twist(mesh: &TriangleMesh, epsilon: f64) -> Vec<Point> {
    mesh.vertices()
        .iter()
        .map(|x| {
            let r = x.norm();
            let angle = if r > 0.0 { epsilon * x.z / r } else { 0.0 };
            let (s, c) = angle.sin_cos();
            Point::new(c * x.x - s * x.y, s * x.x + c * x.y, x.z)
        })
        .collect()
}

/// Rigid rotation of every vertex by `angle` radians about `axis`.
pub fn rotation_warp(mesh: &TriangleMesh, axis: &Point, angle: f64) -> Vec<Point> {
    let rot: Matrix3<f64> = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner();
    mesh.vertices().iter().map(|x| rot * x).collect()
}

/// Closest point on triangle `abc` to `p` and its barycentric coordinates.
fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> (Point, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let t = d1 / (d1 - d3);
        return (a + ab * t, [1.0 - t, t, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let t = d2 / (d2 - d6);
        return (a + ac * t, [1.0 - t, 0.0, t]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * t, [0.0, 1.0 - t, t]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}
