//! Discrete Laplace-Beltrami operator (cotangent stiffness with lumped mass),
//! its smallest generalized eigenpairs, and Fourier analysis on a mesh.
//!
//! Inner products are mass weighted: `<f, g> = fᵀ M g`, `‖f‖₁ = Σ M_ii |f_i|`
//! and `f̂(k) = φ_kᵀ M f`.

pub mod cache;
mod lanczos;
pub mod sparse;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use sparse::CsrMatrix;

pub use cache::{load_basis, read_basis, save_basis, write_basis};

/// Largest mesh solved with a dense eigendecomposition under
/// [`EigenSolver::Auto`].
pub const DENSE_LIMIT: usize = 4096;
/// Eigenvalues within this fraction of the spectral radius are set to 0.
pub const ZERO_EIGENVALUE_TOLERANCE: f64 = 1e-10;

/// Cotangents above this magnitude are rejected as degenerate angles.
pub const MAX_COTANGENT: f64 = 1e8;

/// Lumped (diagonal) mass matrix: one vertex area per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct MassMatrix {
    diag: Vec<f64>,
}

impl MassMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Dimension("mass matrix is empty".into()));
        }
        if let Some(i) = diag.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::Dimension(format!(
                "mass entry {i} is {} (must be positive and finite)",
                diag[i]
            )));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.diag.iter().sum()
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.diag.iter().zip(f).zip(g).map(|((m, a), b)| m * a * b).sum()
    }
}

/// Sparse symmetric cotangent stiffness matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessMatrix {
    matrix: CsrMatrix,
}

impl StiffnessMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }

    /// Dirichlet energy `xᵀ S x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matrix.quadratic_form(x)
    }
}

/// Off-diagonal `-(cot α + cot β) / 2` for each edge, diagonal the negated
/// row sum.
pub fn cotangent_stiffness(mesh: &TriangleMesh) -> Result<StiffnessMatrix> {
    let v = mesh.vertices();
    let mut triplets = Vec::with_capacity(12 * mesh.num_faces());
    for (f, t) in mesh.faces().iter().enumerate() {
        for corner in 0..3 {
            let k = t[corner];
            let i = t[(corner + 1) % 3];
            let j = t[(corner + 2) % 3];
            let e1 = v[i] - v[k];
            let e2 = v[j] - v[k];
            let cross = e1.cross(&e2).norm();
            let cot = e1.dot(&e2) / cross;
            if !(cot.abs() <= MAX_COTANGENT) {
                return Err(Error::DegenerateAngle { face: f, cot });
            }
            let w = 0.5 * cot;
            triplets.push((i, j, -w));
            triplets.push((j, i, -w));
            triplets.push((i, i, w));
            triplets.push((j, j, w));
        }
    }
    Ok(StiffnessMatrix {
        matrix: CsrMatrix::from_triplets(mesh.num_vertices(), triplets),
    })
}

/// Barycentric lumping: each vertex receives a third of its incident face
/// areas.
pub fn lumped_mass(mesh: &TriangleMesh) -> MassMatrix {
    let mut diag = vec![0.0; mesh.num_vertices()];
    for (f, t) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(f) / 3.0;
        for &i in t {
            diag[i] += a;
        }
    }
    MassMatrix { diag }
}

/// Eigensolver selection for [`eigenbasis_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EigenSolver {
    /// Dense up to [`DENSE_LIMIT`] vertices, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// The `K` smallest generalized eigenpairs `S φ = λ M φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    mass: MassMatrix,
    mesh_name: String,
}

impl SpectralBasis {
    /// Assembles stiffness and mass for `mesh` and solves for `k` pairs.
    pub fn from_mesh(mesh: &TriangleMesh, k: usize) -> Result<Self> {
        let s = cotangent_stiffness(mesh)?;
        let m = lumped_mass(mesh);
        Ok(eigenbasis(&s, &m, k)?.with_mesh_name(mesh.name()))
    }

    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>, mass: MassMatrix, mesh_name: String) -> Self {
        assert_eq!(eigenvectors.ncols(), eigenvalues.len());
        assert_eq!(eigenvectors.nrows(), mass.len());
        Self {
            eigenvalues,
            eigenvectors,
            mass,
            mesh_name,
        }
    }

    pub fn with_mesh_name(mut self, name: impl Into<String>) -> Self {
        self.mesh_name = name.into();
        self
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `n_v × K` matrix whose columns are the eigenvectors.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn mesh_name(&self) -> &str {
        &self.mesh_name
    }

    /// Number of eigenpairs `K`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn num_vertices(&self) -> usize {
        self.mass.len()
    }

    /// The first `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::Dimension(format!(
                "cannot truncate {} eigenpairs to {k}",
                self.len()
            )));
        }
        Ok(Self {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors.columns(0, k).into_owned(),
            mass: self.mass.clone(),
            mesh_name: self.mesh_name.clone(),
        })
    }

    fn check_signal(&self, f: &[f64]) {
        assert_eq!(
            f.len(),
            self.num_vertices(),
            "signal length must equal the vertex count"
        );
    }

    /// `f̂(k) = φ_kᵀ M f`.
    pub fn fourier(&self, f: &[f64]) -> Vec<f64> {
        self.check_signal(f);
        let mf: Vec<f64> = f.iter().zip(&self.mass.diag).map(|(a, m)| a * m).collect();
        self.eigenvectors
            .column_iter()
            .map(|c| c.iter().zip(&mf).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Φ c`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len(), "coefficient count must equal K");
        let mut out = vec![0.0; self.num_vertices()];
        for (col, &c) in self.eigenvectors.column_iter().zip(coeffs) {
            if c != 0.0 {
                for (o, p) in out.iter_mut().zip(col.iter()) {
                    *o += c * p;
                }
            }
        }
        out
    }

    /// `‖P_K f‖² / ‖f‖²`, the share of energy inside the computed band.
    pub fn captured_energy_fraction(&self, f: &[f64]) -> f64 {
        let total = self.mass.inner(f, f);
        if total == 0.0 {
            return 1.0;
        }
        self.fourier(f).iter().map(|c| c * c).sum::<f64>() / total
    }

    /// Per-column residual `‖S φ_k − λ_k M φ_k‖_{M⁻¹}` divided by the larger
    /// of the largest computed eigenvalue and the mean diagonal of
    /// `M^{-1/2} S M^{-1/2}`.
    pub fn residuals(&self, stiffness: &StiffnessMatrix) -> Vec<f64> {
        let n = self.num_vertices();
        let mean_diag = (0..n).map(|i| stiffness.get(i, i) / self.mass.diag[i]).sum::<f64>() / n as f64;
        let scale = self
            .eigenvalues
            .iter()
            .fold(mean_diag, |a, l| a.max(l.abs()))
            .max(f64::MIN_POSITIVE);
        self.eigenvectors
            .column_iter()
            .zip(&self.eigenvalues)
            .map(|(col, &lambda)| {
                let phi: Vec<f64> = col.iter().copied().collect();
                let sphi = stiffness.mul_vec(&phi);
                let r2: f64 = sphi
                    .iter()
                    .zip(&phi)
                    .zip(&self.mass.diag)
                    .map(|((s, p), m)| (s - lambda * m * p).powi(2) / m)
                    .sum();
                r2.sqrt() / scale
            })
            .collect()
    }

    /// Groups consecutive eigenvalues whose relative gap
    /// `(λ_{i+1} − λ_i) / λ_{i+1}` does not exceed `relative_gap`.
    pub fn eigenvalue_clusters(&self, relative_gap: f64) -> Vec<Vec<usize>> {
        eigenvalue_clusters(&self.eigenvalues, relative_gap)
    }
}

pub fn eigenvalue_clusters(eigenvalues: &[f64], relative_gap: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &l) in eigenvalues.iter().enumerate() {
        let joins = i > 0 && {
            let prev = eigenvalues[i - 1];
            let denom = l.abs().max(prev.abs());
            denom > 0.0 && (l - prev) / denom <= relative_gap
        };
        match clusters.last_mut() {
            Some(c) if joins => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    clusters
}

/// The `k` smallest eigenpairs of `S φ = λ M φ` with the default solver.
pub fn eigenbasis(s: &StiffnessMatrix, m: &MassMatrix, k: usize) -> Result<SpectralBasis> {
    eigenbasis_with(s, m, k, EigenSolver::Auto)
}

pub fn eigenbasis_with(s: &StiffnessMatrix, m: &MassMatrix, k: usize, solver: EigenSolver) -> Result<SpectralBasis> {
    let n = s.dim();
    if m.len() != n {
        return Err(Error::Dimension(format!(
            "stiffness is {n}x{n}, mass has {} entries",
            m.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::Dimension(format!("K = {k} must lie in [1, {n}]")));
    }
    let use_dense = match solver {
        EigenSolver::Auto => n <= DENSE_LIMIT,
        EigenSolver::Dense => true,
        EigenSolver::Lanczos => false,
    };
    let (mut values, y) = if use_dense {
        dense_smallest(s, m, k)?
    } else {
        let out = lanczos::smallest_eigenpairs(s.matrix(), m.diag(), k)?;
        (out.values, out.vectors)
    };
    // Eigenvalues below the solver's accuracy floor are the exact null
    // space; wavelets behave like sqrt(λ) there and would amplify the noise.
    let floor = ZERO_EIGENVALUE_TOLERANCE * gershgorin_bound(s, m);
    for v in values.iter_mut().filter(|v| v.abs() <= floor) {
        *v = 0.0;
    }

    let inv_sqrt: Vec<f64> = m.diag().iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut phi = y;
    for mut col in phi.column_iter_mut() {
        for (x, d) in col.iter_mut().zip(&inv_sqrt) {
            *x *= d;
        }
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    let basis = SpectralBasis {
        eigenvalues: values,
        eigenvectors: phi,
        mass: m.clone(),
        mesh_name: String::new(),
    };
    let worst = basis.residuals(s).into_iter().fold(0.0, f64::max);
    if !(worst <= 1e-6) {
        return Err(Error::EigenNotConverged {
            detail: format!("largest relative residual {worst:.3e} exceeds 1e-6"),
        });
    }
    Ok(basis)
}

/// Upper bound on the spectrum of `M^{-1/2} S M^{-1/2}`.
fn gershgorin_bound(s: &StiffnessMatrix, m: &MassMatrix) -> f64 {
    let d = m.diag();
    (0..s.dim())
        .map(|i| {
            s.matrix()
                .row(i)
                .map(|(j, v)| v.abs() / (d[i] * d[j]).sqrt())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn dense_smallest(s: &StiffnessMatrix, m: &MassMatrix, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = s.dim();
    let inv_sqrt: Vec<f64> = m.diag().iter().map(|x| 1.0 / x.sqrt()).collect();
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in s.matrix().row(i) {
            b[(i, j)] = v * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    // Exact symmetry keeps the solver's output independent of roundoff in
    // the triplet sums.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = avg;
            b[(j, i)] = avg;
        }
    }
    let eig = b.symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenNotConverged {
            detail: "dense eigensolver produced non-finite eigenvalues".into(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in order[..k].iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// `∫ f = Σ M_ii f_i`.
pub fn integrate(m: &MassMatrix, f: &[f64]) -> f64 {
    assert_eq!(f.len(), m.len(), "signal length must equal the vertex count");
    m.diag().iter().zip(f).map(|(a, b)| a * b).sum()
}

/// Mass-weighted `L¹` or `L²` norm.
pub fn lp_norm(m: &MassMatrix, f: &[f64], p: u32) -> Result<f64> {
    if f.len() != m.len() {
        return Err(Error::Dimension(format!(
            "signal has {} entries, mass has {}",
            f.len(),
            m.len()
        )));
    }
    match p {
        1 => Ok(m.diag().iter().zip(f).map(|(a, b)| a * b.abs()).sum()),
        2 => Ok(m.inner(f, f).sqrt()),
        _ => Err(Error::Config(format!("unsupported norm order p = {p}; use 1 or 2"))),
    }
}

pub fn l1_norm(m: &MassMatrix, f: &[f64]) -> f64 {
    m.diag().iter().zip(f).map(|(a, b)| a * b.abs()).sum()
}

pub fn l2_norm(m: &MassMatrix, f: &[f64]) -> f64 {
    m.inner(f, f).sqrt()
}

pub fn fourier(basis: &SpectralBasis, f: &[f64]) -> Vec<f64> {
    basis.fourier(f)
}

pub fn synthesize(basis: &SpectralBasis, coeffs: &[f64]) -> Vec<f64> {
    basis.synthesize(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, regular_tetrahedron, torus};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn tetrahedron_stiffness_is_uniform() {
        let m = regular_tetrahedron(1.0).unwrap();
        let s = cotangent_stiffness(&m).unwrap();
        let w = s.get(0, 1);
        for (a, b) in m.edges() {
            assert!((s.get(a, b) - w).abs() < 1e-14);
        }
        // Each edge sees two 60 degree angles.
        assert!((w + 1.0 / 3f64.sqrt()).abs() < 1e-12);
        let mass = lumped_mass(&m);
        for &x in mass.diag() {
            assert!((x - 3f64.sqrt() / 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn null_eigenvalue_is_exactly_zero() {
        for mesh in [icosphere(2, 1.0).unwrap(), torus(16, 8, 2.0, 0.5).unwrap()] {
            let n = mesh.num_vertices();
            for solver in [EigenSolver::Dense, EigenSolver::Lanczos] {
                let b = eigenbasis_with(
                    &cotangent_stiffness(&mesh).unwrap(),
                    &lumped_mass(&mesh),
                    6.min(n),
                    solver,
                )
                .unwrap();
                assert_eq!(b.eigenvalues()[0], 0.0);
                assert!(b.eigenvalues()[1] > 0.0);
            }
        }
    }

    #[test]
    fn rows_sum_to_zero_and_symmetric() {
        for mesh in [icosphere(2, 1.0).unwrap(), torus(16, 8, 2.0, 0.5).unwrap()] {
            let s = cotangent_stiffness(&mesh).unwrap();
            for i in 0..s.dim() {
                let sum: f64 = s.matrix().row(i).map(|(_, v)| v).sum();
                assert!(sum.abs() < 1e-9);
                for (j, v) in s.matrix().row(i) {
                    assert!((v - s.get(j, i)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dirichlet_energy_of_z_on_sphere() {
        let mesh = icosphere(3, 1.0).unwrap();
        let s = cotangent_stiffness(&mesh).unwrap();
        let z: Vec<f64> = mesh.vertices().iter().map(|v| v.z).collect();
        let e = s.quadratic_form(&z);
        assert!((e / (8.0 * PI / 3.0) - 1.0).abs() < 0.03, "energy {e}");
    }

    #[test]
    fn mass_totals() {
        let sphere = lumped_mass(&icosphere(3, 1.0).unwrap());
        assert!((sphere.total() / (4.0 * PI) - 1.0).abs() < 0.01);
        let t = torus(16, 8, 2.0, 0.5).unwrap();
        let mass = lumped_mass(&t);
        assert!((mass.total() / t.surface_area() - 1.0).abs() < 1e-9);
        assert!((mass.total() / (4.0 * PI * PI) - 1.0).abs() < 0.05);
    }

    #[test]
    fn stiffness_is_psd() {
        let mesh = torus(12, 6, 2.0, 0.7).unwrap();
        let s = cotangent_stiffness(&mesh).unwrap();
        for seed in 0..100 {
            let v = random_vec(mesh.num_vertices(), seed);
            let vv: f64 = v.iter().map(|x| x * x).sum();
            assert!(s.quadratic_form(&v) >= -1e-9 * vv);
        }
    }

    #[test]
    fn degenerate_angle_is_reported() {
        let mesh = icosphere(1, 1.0).unwrap();
        let t = mesh.faces()[5];
        let (a, b) = (mesh.vertices()[t[0]], mesh.vertices()[t[1]]);
        // Collapsing a vertex onto the midpoint of its opposite edge flattens
        // the face without triggering the area check on neighboring faces.
        let squashed = mesh.displaced(|i, v| {
            if i == t[2] {
                (a + b) / 2.0 + (v - (a + b) / 2.0) * 1e-10
            } else {
                *v
            }
        });
        match squashed {
            Ok(m) => assert!(matches!(cotangent_stiffness(&m), Err(Error::DegenerateAngle { .. }))),
            Err(e) => assert!(e.to_string().contains("area"), "{e}"),
        }
    }

    #[test]
    fn sphere_spectrum_and_clusters() {
        let mesh = icosphere(3, 1.0).unwrap();
        let basis = SpectralBasis::from_mesh(&mesh, 16).unwrap();
        let l = basis.eigenvalues();
        assert!(l[0].abs() < 1e-9);
        for (k, &lk) in l.iter().enumerate().take(9).skip(1) {
            let exact = if k < 4 { 2.0 } else { 6.0 };
            assert!((lk / exact - 1.0).abs() < 0.02, "λ_{k} = {lk}");
        }
        let sizes: Vec<usize> = basis.eigenvalue_clusters(0.05).iter().map(Vec::len).take(3).collect();
        assert_eq!(sizes, vec![1, 3, 5]);
        let full = SpectralBasis::from_mesh(&mesh, 642).unwrap();
        let sizes: Vec<usize> = full.eigenvalue_clusters(0.05).iter().map(Vec::len).take(4).collect();
        assert_eq!(sizes, vec![1, 3, 5, 7]);
        for (a, b) in l.iter().zip(full.eigenvalues()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn basis_invariants() {
        let mesh = torus(16, 8, 2.0, 0.5).unwrap();
        let s = cotangent_stiffness(&mesh).unwrap();
        let m = lumped_mass(&mesh);
        let basis = eigenbasis(&s, &m, 40).unwrap();
        let phi = basis.eigenvectors();
        let mphi = DMatrix::from_fn(phi.nrows(), phi.ncols(), |i, j| m.diag()[i] * phi[(i, j)]);
        let gram = phi.transpose() * mphi;
        assert!((gram - DMatrix::identity(40, 40)).amax() < 1e-8);
        let c0 = phi.column(0);
        let expected = 1.0 / m.total().sqrt();
        assert!(c0.iter().all(|x| (x / expected - 1.0).abs() < 1e-6));
        assert!(basis.residuals(&s).iter().all(|&r| r < 1e-6));
        for col in phi.column_iter() {
            let max = col
                .iter()
                .copied()
                .fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            assert!(max > 0.0);
        }
    }

    #[test]
    fn fourier_round_trip_and_parseval() {
        let mesh = icosphere(2, 1.0).unwrap();
        let basis = SpectralBasis::from_mesh(&mesh, mesh.num_vertices()).unwrap();
        let f = random_vec(mesh.num_vertices(), 11);
        let fh = basis.fourier(&f);
        let back = basis.synthesize(&fh);
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).abs() < 1e-8);
        }
        let energy: f64 = fh.iter().map(|c| c * c).sum();
        let norm2 = l2_norm(basis.mass(), &f).powi(2);
        assert!((energy - norm2).abs() < 1e-8 * norm2);

        let small = basis.truncated(30).unwrap();
        let partial: f64 = small.fourier(&f).iter().map(|c| c * c).sum();
        assert!(partial <= norm2);
        assert!(small.captured_energy_fraction(&f) < 1.0);

        let mut coeffs = vec![0.0; 30];
        coeffs[3] = 1.0;
        coeffs[5] = 2.0;
        let g = small.synthesize(&coeffs);
        for (k, c) in small.fourier(&g).iter().enumerate() {
            assert!((c - coeffs[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn integration_and_norms() {
        let mesh = icosphere(3, 1.0).unwrap();
        let m = lumped_mass(&mesh);
        let ones = vec![1.0; mesh.num_vertices()];
        assert!((integrate(&m, &ones) / (4.0 * PI) - 1.0).abs() < 0.01);
        let c = vec![-2.5; mesh.num_vertices()];
        assert!((lp_norm(&m, &c, 2).unwrap() - 2.5 * m.total().sqrt()).abs() < 1e-10);
        assert!((lp_norm(&m, &c, 1).unwrap() - 2.5 * m.total()).abs() < 1e-10);
        assert!(lp_norm(&m, &c, 3).is_err());
    }

    #[test]
    fn refinement_reduces_error() {
        let mut prev = f64::INFINITY;
        for s in 2..=4 {
            let basis = SpectralBasis::from_mesh(&icosphere(s, 1.0).unwrap(), 9).unwrap();
            let err = basis.eigenvalues()[1..]
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    let exact = if i < 3 { 2.0 } else { 6.0 };
                    (l - exact).abs() / exact
                })
                .fold(0.0, f64::max);
            assert!(err < prev, "s={s}: {err} vs {prev}");
            prev = err;
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let mesh = icosphere(3, 1.0).unwrap();
        let s = cotangent_stiffness(&mesh).unwrap();
        let m = lumped_mass(&mesh);
        let dense = eigenbasis_with(&s, &m, 30, EigenSolver::Dense).unwrap();
        let iter = eigenbasis_with(&s, &m, 30, EigenSolver::Lanczos).unwrap();
        for (a, b) in dense.eigenvalues().iter().zip(iter.eigenvalues()) {
            assert!((a - b).abs() < 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert!(iter.residuals(&s).iter().all(|&r| r < 1e-6));
    }

    #[test]
    fn rejects_bad_k() {
        let mesh = icosphere(0, 1.0).unwrap();
        assert!(SpectralBasis::from_mesh(&mesh, 0).is_err());
        assert!(SpectralBasis::from_mesh(&mesh, 13).is_err());
        let b = SpectralBasis::from_mesh(&mesh, 1).unwrap();
        assert!(b.eigenvalues()[0].abs() < 1e-9);
    }
}
