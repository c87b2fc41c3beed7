use std::collections::{BTreeSet, HashSet};

use nalgebra::Matrix3;

use super::{Point, TriangleMesh};
use crate::error::{Error, Result};

/// A bijection on vertex indices; `mapping[i]` is the image of vertex `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexPermutation {
    mapping: Vec<usize>,
}

impl VertexPermutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &m in &mapping {
            if m >= n || std::mem::replace(&mut seen[m], true) {
                return Err(Error::Dimension(format!("mapping is not a permutation of 0..{n}")));
            }
        }
        Ok(Self { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    /// Exchanges two vertices; generally not an isometry.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        mapping.swap(a, b);
        Self { mapping }
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Self { mapping: inv }
    }

    /// `f ∘ ζ⁻¹`: the value at vertex `i` moves to vertex `mapping[i]`.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; signal.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            out[m] = signal[i];
        }
        out
    }

    /// Positions `ζ⁻¹(x_i)`, the warp under which [`super::pullback`]
    /// reproduces [`Self::apply`].
    pub fn warp_positions(&self, mesh: &TriangleMesh) -> Vec<Point> {
        let v = mesh.vertices();
        self.inverse().mapping.iter().map(|&j| v[j]).collect()
    }

    /// True when the permutation maps edges to edges with unchanged lengths.
    pub fn is_isometry(&self, mesh: &TriangleMesh, tolerance: f64) -> bool {
        if self.mapping.len() != mesh.num_vertices() {
            return false;
        }
        let edges: HashSet<(usize, usize)> = mesh.edges().into_iter().collect();
        let v = mesh.vertices();
        edges.iter().all(|&(a, b)| {
            let (ma, mb) = (self.mapping[a], self.mapping[b]);
            edges.contains(&(ma.min(mb), ma.max(mb)))
                && ((v[a] - v[b]).norm() - (v[ma] - v[mb]).norm()).abs() <= tolerance
        })
    }
}

/// Vertex permutations induced by rotations that carry the vertex set (and
/// the face set) onto itself within `tolerance`. The identity comes first.
///
/// Candidate rotations align an anchor vertex and one of its neighbors with
/// every compatible vertex/neighbor pair; each candidate is then checked on
/// the full point set.
pub fn symmetry_permutations(mesh: &TriangleMesh, tolerance: f64) -> Vec<VertexPermutation> {
    let n = mesh.num_vertices();
    let center = mesh.centroid();
    let pts: Vec<Point> = mesh.vertices().iter().map(|v| v - center).collect();
    let neighbors = mesh.vertex_neighbors();
    let lookup = PointLookup::new(&pts, tolerance);

    let identity = VertexPermutation::identity(n);
    let mut found: BTreeSet<VertexPermutation> = BTreeSet::new();

    let radius = |i: usize| pts[i].norm();
    let anchor = (0..n)
        .max_by(|&a, &b| radius(a).total_cmp(&radius(b)).then(b.cmp(&a)))
        .expect("validated mesh has vertices");
    let partner = neighbors[anchor]
        .iter()
        .copied()
        .max_by(|&a, &b| {
            let sa = pts[anchor].normalize().cross(&pts[a]).norm();
            let sb = pts[anchor].normalize().cross(&pts[b]).norm();
            sa.total_cmp(&sb).then(b.cmp(&a))
        })
        .expect("validated mesh has edges");
    let Some(source) = frame(&pts[anchor], &pts[partner]) else {
        return vec![identity];
    };
    let edge_len = (pts[anchor] - pts[partner]).norm();
    let faces: HashSet<[usize; 3]> = mesh.faces().iter().map(|&t| sorted(t)).collect();

    for a in 0..n {
        if (radius(a) - radius(anchor)).abs() > tolerance {
            continue;
        }
        for &b in &neighbors[a] {
            if (radius(b) - radius(partner)).abs() > tolerance
                || ((pts[a] - pts[b]).norm() - edge_len).abs() > tolerance
            {
                continue;
            }
            let Some(target) = frame(&pts[a], &pts[b]) else {
                continue;
            };
            let rotation = target * source.transpose();
            if let Some(mapping) = match_points(&pts, &rotation, &lookup) {
                let maps_faces = mesh
                    .faces()
                    .iter()
                    .all(|t| faces.contains(&sorted(t.map(|i| mapping[i]))));
                if maps_faces {
                    found.insert(VertexPermutation { mapping });
                }
            }
        }
    }

    found.remove(&identity);
    std::iter::once(identity).chain(found).collect()
}

fn sorted(mut t: [usize; 3]) -> [usize; 3] {
    t.sort_unstable();
    t
}

/// Right-handed orthonormal frame from a direction and a second,
/// non-collinear point. Columns are the frame axes.
fn frame(a: &Point, b: &Point) -> Option<Matrix3<f64>> {
    let e1 = a.try_normalize(1e-12)?;
    let e2 = (b - e1 * e1.dot(b)).try_normalize(1e-9 * b.norm().max(1e-300))?;
    let e3 = e1.cross(&e2);
    Some(Matrix3::from_columns(&[e1, e2, e3]))
}

fn match_points(pts: &[Point], rotation: &Matrix3<f64>, lookup: &PointLookup) -> Option<Vec<usize>> {
    let mut mapping = Vec::with_capacity(pts.len());
    let mut used = vec![false; pts.len()];
    for p in pts {
        let j = lookup.find(&(rotation * p))?;
        if std::mem::replace(&mut used[j], true) {
            return None;
        }
        mapping.push(j);
    }
    Some(mapping)
}

/// Nearest-point queries within a tolerance, via points sorted on x.
struct PointLookup<'a> {
    pts: &'a [Point],
    order: Vec<usize>,
    xs: Vec<f64>,
    tolerance: f64,
}

impl<'a> PointLookup<'a> {
    fn new(pts: &'a [Point], tolerance: f64) -> Self {
        let mut order: Vec<usize> = (0..pts.len()).collect();
        order.sort_by(|&a, &b| pts[a].x.total_cmp(&pts[b].x));
        let xs = order.iter().map(|&i| pts[i].x).collect();
        Self {
            pts,
            order,
            xs,
            tolerance,
        }
    }

    fn find(&self, q: &Point) -> Option<usize> {
        let lo = self.xs.partition_point(|&x| x < q.x - self.tolerance);
        let mut best: Option<(f64, usize)> = None;
        for k in lo..self.xs.len() {
            if self.xs[k] > q.x + self.tolerance {
                break;
            }
            let i = self.order[k];
            let d = (self.pts[i] - q).norm();
            if d <= self.tolerance && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                best = Some((d, i));
            }
        }
        best.map(|(_, i)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, regular_tetrahedron, torus};
    use rand::{Rng, SeedableRng};

    #[test]
    fn permutation_validation() {
        assert!(VertexPermutation::new(vec![1, 0, 2]).is_ok());
        assert!(VertexPermutation::new(vec![1, 1, 2]).is_err());
        assert!(VertexPermutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn apply_then_inverse_is_identity() {
        let p = VertexPermutation::new(vec![2, 0, 3, 1]).unwrap();
        let f = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(p.inverse().apply(&p.apply(&f)), f);
        assert_eq!(p.apply(&f), vec![2.0, 4.0, 1.0, 3.0]);
    }

    #[test]
    fn tetrahedron_has_twelve_rotations() {
        let m = regular_tetrahedron(1.0).unwrap();
        let perms = symmetry_permutations(&m, 1e-9);
        assert_eq!(perms.len(), 12);
        assert!(perms[0].is_identity());
        assert!(perms.iter().all(|p| p.is_isometry(&m, 1e-12)));
    }

    #[test]
    fn icosphere_has_sixty_rotations() {
        for s in 0..=2 {
            let m = icosphere(s, 1.0).unwrap();
            let perms = symmetry_permutations(&m, 1e-9);
            assert_eq!(perms.len(), 60, "subdivision {s}");
            assert!(perms.iter().all(|p| p.is_isometry(&m, 1e-12)));
        }
    }

    #[test]
    fn perturbed_mesh_has_only_identity() {
        let m = icosphere(1, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noisy = m
            .displaced(|_, v| v * (1.0 + 0.02 * rng.random_range(-1.0..1.0)))
            .unwrap();
        let perms = symmetry_permutations(&noisy, 1e-9);
        assert_eq!(perms.len(), 1);
        assert!(perms[0].is_identity());
    }

    #[test]
    fn torus_rotations_about_axis() {
        // The 12x6 grid torus is invariant under 12 rotations about z and 12
        // half-turns about horizontal axes.
        let m = torus(12, 6, 2.0, 0.5).unwrap();
        let perms = symmetry_permutations(&m, 1e-9);
        assert!(perms.len() >= 12, "{}", perms.len());
        assert!(perms.iter().all(|p| p.is_isometry(&m, 1e-12)));
    }

    #[test]
    fn transposition_is_not_isometry() {
        let m = icosphere(2, 1.0).unwrap();
        assert!(!VertexPermutation::transposition(m.num_vertices(), 0, 100).is_isometry(&m, 1e-9));
    }
}
