//! Closed triangle meshes: validation, OFF interchange, synthetic generators,
//! discrete symmetries and signal pullback along warps.

mod generate;
pub mod off;
mod pullback;
mod symmetry;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub use generate::{icosphere, regular_tetrahedron, torus, MAX_ICOSPHERE_SUBDIVISIONS};
pub use pullback::{latitude_twist, pullback, rotation_warp, InterpolationOperator, Pullback};
pub use symmetry::{symmetry_permutations, VertexPermutation};

pub type Point = Vector3<f64>;

/// Faces smaller than this fraction of the mean face area are rejected.
pub const DEGENERATE_AREA_RATIO: f64 = 1e-12;

/// A closed, connected, edge-manifold triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    name: String,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting input that violates any mesh invariant.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>, name: impl Into<String>) -> Result<Self> {
        let report = ValidationReport::check(&vertices, &faces);
        if let Some(failed) = report.first_failure() {
            return Err(Error::InvalidMesh {
                invariant: failed.name,
                detail: failed.detail.clone(),
            });
        }
        Ok(Self {
            vertices,
            faces,
            name: name.into(),
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        triangle_area(&self.vertices, self.faces[f])
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn centroid(&self) -> Point {
        let sum: Point = self.vertices.iter().sum();
        sum / self.vertices.len() as f64
    }

    /// Unique undirected edges `(a, b)` with `a < b`, in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        let total: f64 = edges
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .sum();
        total / edges.len() as f64
    }

    /// Sorted neighbor lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Applies `x -> rotation * x + translation` to every vertex.
    pub fn rigid_transform(&self, rotation: &Matrix3<f64>, translation: &Point) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| rotation * v + translation).collect(),
            faces: self.faces.clone(),
            name: self.name.clone(),
        }
    }

    /// Uniformly rescales about the centroid so the surface area becomes 1.
    pub fn scaled_to_unit_area(&self) -> Self {
        let s = 1.0 / self.surface_area().sqrt();
        let c = self.centroid();
        Self {
            vertices: self.vertices.iter().map(|v| c + (v - c) * s).collect(),
            faces: self.faces.clone(),
            name: self.name.clone(),
        }
    }

    /// Moves each vertex to `displace(index, position)` and revalidates.
    pub fn displaced(&self, mut displace: impl FnMut(usize, &Point) -> Point) -> Result<Self> {
        let vertices = self.vertices.iter().enumerate().map(|(i, v)| displace(i, v)).collect();
        Self::new(vertices, self.faces.clone(), self.name.clone())
    }

    pub fn validation_report(&self) -> ValidationReport {
        ValidationReport::check(&self.vertices, &self.faces)
    }
}

pub(crate) fn triangle_area(vertices: &[Point], t: [usize; 3]) -> f64 {
    let e1 = vertices[t[1]] - vertices[t[0]];
    let e2 = vertices[t[2]] - vertices[t[0]];
    0.5 * e1.cross(&e2).norm()
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Outcome of every mesh invariant, in a fixed order.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub num_vertices: usize,
    pub num_faces: usize,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn check(vertices: &[Point], faces: &[[usize; 3]]) -> Self {
        let n = vertices.len();
        let mut checks = Vec::with_capacity(5);

        let mut detail = String::new();
        let mut passed = !faces.is_empty() && n > 0;
        if !passed {
            detail = "mesh has no vertices or no faces".into();
        }
        checks.push(Check {
            name: "non-empty",
            passed,
            detail: std::mem::take(&mut detail),
        });

        let bad_index = faces
            .iter()
            .enumerate()
            .find(|(_, t)| t.iter().any(|&i| i >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2]);
        passed = bad_index.is_none();
        if let Some((f, t)) = bad_index {
            detail = format!("face {f} = {t:?} has an index out of [0, {n}) or a repeated vertex");
        }
        checks.push(Check {
            name: "face indices",
            passed,
            detail: std::mem::take(&mut detail),
        });
        if !passed {
            // Remaining checks index into `vertices`.
            return Self {
                num_vertices: n,
                num_faces: faces.len(),
                checks,
            };
        }

        let areas: Vec<f64> = faces.iter().map(|&t| triangle_area(vertices, t)).collect();
        let mean = areas.iter().sum::<f64>() / areas.len().max(1) as f64;
        let degenerate: Vec<usize> = areas
            .iter()
            .enumerate()
            .filter(|(_, &a)| !(a > DEGENERATE_AREA_RATIO * mean) || !a.is_finite())
            .map(|(f, _)| f)
            .collect();
        passed = degenerate.is_empty();
        if !passed {
            detail = format!(
                "{} degenerate face(s), first {:?}",
                degenerate.len(),
                &degenerate[..degenerate.len().min(8)]
            );
        }
        checks.push(Check {
            name: "positive face area",
            passed,
            detail: std::mem::take(&mut detail),
        });

        let mut edge_count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in faces {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let boundary: Vec<_> = edge_count.iter().filter(|(_, &c)| c == 1).map(|(e, _)| *e).collect();
        let nonmanifold: Vec<_> = edge_count.iter().filter(|(_, &c)| c > 2).map(|(e, _)| *e).collect();
        passed = boundary.is_empty() && nonmanifold.is_empty();
        if !boundary.is_empty() {
            detail = format!(
                "{} boundary edge(s), first {:?}",
                boundary.len(),
                &boundary[..boundary.len().min(4)]
            );
        } else if !nonmanifold.is_empty() {
            detail = format!(
                "{} non-manifold edge(s) shared by more than 2 faces, first {:?}",
                nonmanifold.len(),
                &nonmanifold[..nonmanifold.len().min(4)]
            );
        }
        checks.push(Check {
            name: "edge-manifold",
            passed,
            detail: std::mem::take(&mut detail),
        });

        let components = count_components(n, faces);
        passed = components == 1;
        if !passed {
            detail = format!("{components} connected components (isolated vertices count as components)");
        }
        checks.push(Check {
            name: "connected",
            passed,
            detail,
        });

        Self {
            num_vertices: n,
            num_faces: faces.len(),
            checks,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vertices {}", self.num_vertices)?;
        writeln!(f, "faces {}", self.num_faces)?;
        for c in &self.checks {
            let status = if c.passed { "ok" } else { "FAIL" };
            if c.detail.is_empty() {
                writeln!(f, "{status} {}", c.name)?;
            } else {
                writeln!(f, "{status} {}: {}", c.name, c.detail)?;
            }
        }
        write!(f, "{}", if self.is_valid() { "valid" } else { "invalid" })
    }
}

fn count_components(n: usize, faces: &[[usize; 3]]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for t in faces {
        for (a, b) in [(t[0], t[1]), (t[1], t[2])] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut roots = HashMap::new();
    for v in 0..n {
        let r = find(&mut parent, v);
        roots.entry(r).or_insert(());
    }
    roots.len()
}
