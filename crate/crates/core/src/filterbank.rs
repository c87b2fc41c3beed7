//! Spectral low-pass and wavelet filters built from a window `G`, spectral
//! convolution, and the Littlewood-Paley checks that go with them.
//!
//! With `φ̂_J(k) = G(2^J λ_k)` and
//! `ψ̂_j(k) = (G(2^{j−1} λ_k)² − G(2^j λ_k)²)^{1/2}`, the squared responses
//! over `j_min ≤ j ≤ J` telescope to `G(2^{j_min−1} λ_k)²`.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::VertexPermutation;
use crate::spectral::{l2_norm, SpectralBasis};

/// Tolerance for negative telescoping differences before they count as a
/// non-monotone window.
pub const TELESCOPE_TOLERANCE: f64 = 1e-14;

/// The window `G`: non-negative, non-increasing, `G(0) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectralWindow {
    /// `G(λ) = e^{−λ}`, the heat kernel window.
    Exp,
    /// Piecewise-linear interpolation of samples at ascending `lambdas`,
    /// held constant beyond the last sample.
    Table { lambdas: Vec<f64>, values: Vec<f64> },
}

impl Default for SpectralWindow {
    fn default() -> Self {
        Self::Exp
    }
}

impl SpectralWindow {
    pub fn table(lambdas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let w = Self::Table { lambdas, values };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let Self::Table { lambdas, values } = self else {
            return Ok(());
        };
        if lambdas.len() != values.len() || lambdas.is_empty() {
            return Err(Error::InvalidWindow(
                "table needs equally many lambdas and values".into(),
            ));
        }
        if lambdas[0] != 0.0 || values[0] != 1.0 {
            return Err(Error::InvalidWindow("table must start at G(0) = 1".into()));
        }
        if lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidWindow("table lambdas must be strictly ascending".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidWindow("table values must be non-negative".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Table { .. } => "table",
        }
    }

    /// `G(λ)`; `G` lives on `[0, ∞)`, so rounding-level negative
    /// eigenvalues evaluate as `G(0)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        match self {
            Self::Exp => (-lambda.max(0.0)).exp(),
            Self::Table { lambdas, values } => {
                let x = lambda.max(0.0);
                let i = lambdas.partition_point(|&l| l <= x);
                if i >= lambdas.len() {
                    return *values.last().expect("validated table");
                }
                let (l0, l1) = (lambdas[i - 1], lambdas[i]);
                let t = (x - l0) / (l1 - l0);
                values[i - 1] + t * (values[i] - values[i - 1])
            }
        }
    }
}

/// Which difference each wavelet takes; `Reversed` is a deliberate fault
/// used to check that the verification suite notices broken filters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Telescope {
    Standard,
    Reversed,
}

/// Fourier-domain low-pass and wavelet responses for scales
/// `j_min ..= J` against a fixed eigenvalue array.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    window: SpectralWindow,
    j_max: i32,
    j_min: i32,
    eigenvalues: Vec<f64>,
    lowpass: Vec<f64>,
    wavelets: Vec<Vec<f64>>,
    residual: Option<Vec<f64>>,
}

impl FilterBank {
    /// Builds `φ̂_J` and `ψ̂_j` for `j_min ≤ j ≤ J`.
    pub fn build(window: &SpectralWindow, j_max: i32, j_min: i32, eigenvalues: &[f64]) -> Result<Self> {
        Self::build_with(window, j_max, j_min, eigenvalues, Telescope::Standard)
    }

    pub(crate) fn build_with(
        window: &SpectralWindow,
        j_max: i32,
        j_min: i32,
        eigenvalues: &[f64],
        telescope: Telescope,
    ) -> Result<Self> {
        window.validate()?;
        if j_min > j_max {
            return Err(Error::Config(format!("j_min = {j_min} exceeds J = {j_max}")));
        }
        if eigenvalues.is_empty() {
            return Err(Error::Dimension("no eigenvalues to build filters against".into()));
        }
        let g = |scale: i32, lambda: f64| window.eval(2f64.powi(scale) * lambda);
        let lowpass = eigenvalues.iter().map(|&l| g(j_max, l)).collect();
        let mut wavelets = Vec::with_capacity((j_max - j_min + 1) as usize);
        for j in j_min..=j_max {
            let mut row = Vec::with_capacity(eigenvalues.len());
            for (k, &l) in eigenvalues.iter().enumerate() {
                let coarse = g(j, l).powi(2);
                let fine = g(j - 1, l).powi(2);
                let diff = match (window, telescope) {
                    // e^{−2^j λ} − e^{−2^{j+1} λ} without the cancellation of
                    // squaring two nearby numbers.
                    (SpectralWindow::Exp, Telescope::Standard) => {
                        let a = 2f64.powi(j) * l.max(0.0);
                        (-a).exp() * -(-a).exp_m1()
                    }
                    (_, Telescope::Standard) => fine - coarse,
                    (_, Telescope::Reversed) => coarse - fine,
                };
                if diff < -TELESCOPE_TOLERANCE && telescope == Telescope::Standard {
                    return Err(Error::NonMonotoneWindow { k, j, diff });
                }
                row.push(diff.max(0.0).sqrt());
            }
            wavelets.push(row);
        }
        Ok(Self {
            window: window.clone(),
            j_max,
            j_min,
            eigenvalues: eigenvalues.to_vec(),
            lowpass,
            wavelets,
            residual: None,
        })
    }

    /// Appends the high-pass `(1 − G(2^{j_min−1} λ_k)²)^{1/2}` that restores
    /// an exact partition of unity.
    pub fn with_residual_highpass(mut self) -> Self {
        let r = self
            .eigenvalues
            .iter()
            .map(|&l| {
                (1.0 - self.window.eval(2f64.powi(self.j_min - 1) * l).powi(2))
                    .max(0.0)
                    .sqrt()
            })
            .collect();
        self.residual = Some(r);
        self
    }

    pub fn window(&self) -> &SpectralWindow {
        &self.window
    }

    /// The low-pass scale `J`.
    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn scales(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    pub fn num_scales(&self) -> usize {
        self.wavelets.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn wavelet(&self, j: i32) -> Result<&[f64]> {
        if !self.scales().contains(&j) {
            return Err(Error::ScaleOutOfRange {
                scale: j,
                j_min: self.j_min,
                j_max: self.j_max,
            });
        }
        Ok(&self.wavelets[(j - self.j_min) as usize])
    }

    pub fn wavelets(&self) -> impl Iterator<Item = (i32, &[f64])> {
        self.scales().zip(self.wavelets.iter().map(Vec::as_slice))
    }

    pub fn residual_highpass(&self) -> Option<&[f64]> {
        self.residual.as_deref()
    }

    /// `φ̂_J(k)² + Σ_j ψ̂_j(k)²` (plus the residual high-pass when present).
    pub fn littlewood_paley_sum(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let mut s = self.lowpass[k].powi(2);
                for w in &self.wavelets {
                    s += w[k].powi(2);
                }
                if let Some(r) = &self.residual {
                    s += r[k].powi(2);
                }
                s
            })
            .collect()
    }

    /// `G(2^{j_min−1} λ_k)²`, the value the wavelet and low-pass energies
    /// telescope to.
    pub fn littlewood_paley_target(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|&l| match self.window {
                SpectralWindow::Exp => (-(2f64.powi(self.j_min) * l.max(0.0))).exp(),
                _ => self.window.eval(2f64.powi(self.j_min - 1) * l).powi(2),
            })
            .collect()
    }

    /// `1 − G(2^{j_min−1} λ_k)²`: energy lost to the finite scale range.
    pub fn truncation_residual(&self) -> Vec<f64> {
        self.littlewood_paley_target().iter().map(|t| 1.0 - t).collect()
    }

    /// All filters in order: low-pass, wavelets by ascending `j`, then the
    /// residual high-pass if present.
    pub fn all_filters(&self) -> Vec<(String, &[f64])> {
        let mut out = vec![("lowpass".to_string(), self.lowpass.as_slice())];
        for (j, w) in self.wavelets() {
            out.push((format!("psi_{j}"), w));
        }
        if let Some(r) = &self.residual {
            out.push(("residual".to_string(), r.as_slice()));
        }
        out
    }
}

/// CSV with columns `k,lambda,hhat` for one filter.
pub fn filter_csv(eigenvalues: &[f64], hhat: &[f64]) -> String {
    let mut s = String::from("k,lambda,hhat\n");
    for (k, (l, h)) in eigenvalues.iter().zip(hhat).enumerate() {
        writeln!(s, "{k},{l:.17e},{h:.17e}").expect("writing to a String");
    }
    s
}

/// `f ∗ h = Φ (ĥ ⊙ Φᵀ M f)`.
pub fn convolve(basis: &SpectralBasis, hhat: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    if hhat.len() != basis.len() {
        return Err(Error::Dimension(format!(
            "filter has {} coefficients, basis has {}",
            hhat.len(),
            basis.len()
        )));
    }
    if f.len() != basis.num_vertices() {
        return Err(Error::Dimension(format!(
            "signal has {} entries, mesh has {} vertices",
            f.len(),
            basis.num_vertices()
        )));
    }
    let mut coeffs = basis.fourier(f);
    for (c, h) in coeffs.iter_mut().zip(hhat) {
        *c *= h;
    }
    Ok(basis.synthesize(&coeffs))
}

/// `K(x_i, ·) = Σ_k e^{−2^J λ_k} φ_k(x_i) φ_k(·)`, the heat kernel at
/// diffusion time `2^J` centered on vertex `i`.
pub fn heat_kernel_column(basis: &SpectralBasis, j_max: i32, vertex: usize) -> Result<Vec<f64>> {
    if vertex >= basis.num_vertices() {
        return Err(Error::Dimension(format!(
            "vertex {vertex} out of range for {} vertices",
            basis.num_vertices()
        )));
    }
    let t = 2f64.powi(j_max);
    let phi = basis.eigenvectors();
    let coeffs: Vec<f64> = basis
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(k, &l)| (-t * l.max(0.0)).exp() * phi[(vertex, k)])
        .collect();
    Ok(basis.synthesize(&coeffs))
}

/// Largest `‖T_h(f∘ζ⁻¹) − (T_h f)∘ζ⁻¹‖₂ / ‖f‖₂` over `trials` random
/// Gaussian signals.
pub fn equivariance_defect(
    basis: &SpectralBasis,
    hhat: &[f64],
    permutation: &VertexPermutation,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = basis.num_vertices();
    if permutation.len() != n {
        return Err(Error::Dimension(format!(
            "permutation acts on {} vertices, mesh has {n}",
            permutation.len()
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let f: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        worst = worst.max(equivariance_ratio(basis, hhat, permutation, &f)?);
    }
    Ok(worst)
}

/// The defect ratio for one signal.
pub fn equivariance_ratio(
    basis: &SpectralBasis,
    hhat: &[f64],
    permutation: &VertexPermutation,
    f: &[f64],
) -> Result<f64> {
    if permutation.is_identity() {
        return Ok(0.0);
    }
    let a = convolve(basis, hhat, &permutation.apply(f))?;
    let b = permutation.apply(&convolve(basis, hhat, f)?);
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let norm = l2_norm(basis.mass(), f);
    Ok(if norm > 0.0 {
        l2_norm(basis.mass(), &diff) / norm
    } else {
        0.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, symmetry_permutations};
    use crate::spectral::integrate;
    use nalgebra::DMatrix;

    fn sphere_basis(k: usize) -> SpectralBasis {
        SpectralBasis::from_mesh(&icosphere(3, 1.0).unwrap(), k).unwrap()
    }

    fn random_signal(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn window_contracts() {
        assert_eq!(SpectralWindow::Exp.eval(0.0), 1.0);
        let t = SpectralWindow::table(vec![0.0, 1.0, 2.0], vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(t.eval(0.5), 0.75);
        assert_eq!(t.eval(10.0), 0.0);
        assert!(SpectralWindow::table(vec![0.0, 1.0], vec![0.9, 0.5]).is_err());
        assert!(SpectralWindow::table(vec![0.0, 1.0], vec![1.0, -0.5]).is_err());
    }

    #[test]
    fn non_monotone_table_rejected() {
        let t = SpectralWindow::table(vec![0.0, 1.0, 2.0], vec![1.0, 0.2, 0.6]).unwrap();
        let err = FilterBank::build(&t, 0, -2, &[0.0, 0.8, 1.5, 3.0]).unwrap_err();
        assert!(matches!(err, Error::NonMonotoneWindow { .. }), "{err}");
    }

    #[test]
    fn wavelet_value_at_unit_eigenvalue() {
        let fb = FilterBank::build(&SpectralWindow::Exp, 0, -8, &[0.0, 1.0]).unwrap();
        let psi0 = fb.wavelet(0).unwrap()[1];
        assert!((psi0 - ((-1f64).exp() - (-2f64).exp()).sqrt()).abs() < 1e-15);
        assert!((psi0 - 0.48223).abs() < 1e-5);
        for (_, w) in fb.wavelets() {
            assert_eq!(w[0], 0.0);
        }
        assert_eq!(fb.lowpass()[0], 1.0);
        assert!(fb.wavelet(1).is_err());
    }

    #[test]
    fn littlewood_paley_telescopes() {
        let basis = sphere_basis(642);
        for window in [
            SpectralWindow::Exp,
            SpectralWindow::table(vec![0.0, 5.0, 40.0, 400.0], vec![1.0, 0.6, 0.1, 0.0]).unwrap(),
        ] {
            let fb = FilterBank::build(&window, 0, -8, basis.eigenvalues()).unwrap();
            let sum = fb.littlewood_paley_sum();
            for (k, (s, &l)) in sum.iter().zip(basis.eigenvalues()).enumerate() {
                let oracle = window.eval(2f64.powi(-9) * l).powi(2);
                assert!((s - oracle).abs() < 1e-12, "k={k}: {s} vs {oracle}");
            }
            for (_, w) in fb.wavelets() {
                assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
            let full = fb.clone().with_residual_highpass();
            assert!(full.littlewood_paley_sum().iter().all(|s| (s - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn exp_residual_matches_closed_form() {
        let basis = sphere_basis(642);
        let fb = FilterBank::build(&SpectralWindow::Exp, 0, -8, basis.eigenvalues()).unwrap();
        for ((s, r), &l) in fb
            .littlewood_paley_sum()
            .iter()
            .zip(fb.truncation_residual())
            .zip(basis.eigenvalues())
        {
            let oracle = 1.0 - (-(l / 256.0)).exp();
            assert!((1.0 - s - oracle).abs() < 1e-12);
            assert!((r - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn reversed_telescope_breaks_partition() {
        let basis = sphere_basis(64);
        let fb = FilterBank::build_with(&SpectralWindow::Exp, 0, -8, basis.eigenvalues(), Telescope::Reversed).unwrap();
        let worst = fb
            .littlewood_paley_sum()
            .iter()
            .zip(fb.littlewood_paley_target())
            .map(|(s, t)| (s - t).abs())
            .fold(0.0, f64::max);
        assert!(worst > 1e-3);
    }

    #[test]
    fn convolution_against_kernel_form() {
        let basis = sphere_basis(150);
        let fb = FilterBank::build(&SpectralWindow::Exp, -1, -8, basis.eigenvalues()).unwrap();
        let f = random_signal(basis.num_vertices(), 5);
        let fast = convolve(&basis, fb.lowpass(), &f).unwrap();
        // K_h(x, y) = Σ_k ĥ(k) φ_k(x) φ_k(y), integrated against f.
        let phi = basis.eigenvectors();
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(fb.lowpass()));
        let kernel = phi * h * phi.transpose();
        let m = basis.mass().diag();
        for (i, v) in fast.iter().enumerate() {
            let direct: f64 = (0..basis.num_vertices()).map(|j| kernel[(i, j)] * m[j] * f[j]).sum();
            assert!((v - direct).abs() < 1e-8);
        }
    }

    #[test]
    fn convolution_identity_constants_and_linearity() {
        let mesh = icosphere(2, 1.0).unwrap();
        let basis = SpectralBasis::from_mesh(&mesh, mesh.num_vertices()).unwrap();
        let f = random_signal(mesh.num_vertices(), 1);
        let g = random_signal(mesh.num_vertices(), 2);
        let out = convolve(&basis, &vec![1.0; basis.len()], &f).unwrap();
        assert!(out.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-8));

        let fb = FilterBank::build(&SpectralWindow::Exp, 0, -4, basis.eigenvalues()).unwrap();
        let c = vec![3.0; mesh.num_vertices()];
        let killed = convolve(&basis, fb.wavelet(-2).unwrap(), &c).unwrap();
        assert!(killed.iter().all(|x| x.abs() < 1e-10));

        let alpha = -0.7;
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + alpha * b).collect();
        let h = fb.wavelet(-1).unwrap();
        let lhs = convolve(&basis, h, &combo).unwrap();
        let cf = convolve(&basis, h, &f).unwrap();
        let cg = convolve(&basis, h, &g).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs[i] - cf[i] - alpha * cg[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn frame_energy_and_nonexpansive_analysis() {
        let basis = sphere_basis(150);
        let fb = FilterBank::build(&SpectralWindow::Exp, 0, -6, basis.eigenvalues()).unwrap();
        let target = fb.littlewood_paley_target();
        for seed in 0..5 {
            let f = basis.synthesize(&random_signal(basis.len(), seed));
            let g = random_signal(basis.num_vertices(), 100 + seed);
            let fh = basis.fourier(&f);
            let expected: f64 = fh.iter().zip(&target).map(|(c, t)| c * c * t).sum();
            let mut energy = 0.0;
            let mut diff_energy = 0.0;
            let d: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
            for (_, h) in fb.all_filters() {
                energy += l2_norm(basis.mass(), &convolve(&basis, h, &f).unwrap()).powi(2);
                let a = convolve(&basis, h, &f).unwrap();
                let b = convolve(&basis, h, &g).unwrap();
                let dd: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                diff_energy += l2_norm(basis.mass(), &dd).powi(2);
            }
            let norm2 = l2_norm(basis.mass(), &f).powi(2);
            assert!((energy - expected).abs() <= 1e-9 * norm2);
            assert!(diff_energy <= l2_norm(basis.mass(), &d).powi(2) + 1e-9);
        }
    }

    #[test]
    fn heat_kernel_properties() {
        let basis = sphere_basis(150);
        let far = heat_kernel_column(&basis, 30, 7).unwrap();
        let c = basis.eigenvectors()[(7, 0)] / basis.mass().total().sqrt();
        // λ_0 is zero only to rounding, which 2^30 amplifies into the level.
        assert!(far.iter().all(|x| (x / far[0] - 1.0).abs() < 1e-8));
        assert!((far[0] / c - 1.0).abs() < 1e-2);
        for j in [-4, -2, 0] {
            let col = heat_kernel_column(&basis, j, 11).unwrap();
            let total = integrate(basis.mass(), &col);
            let max = col.iter().copied().fold(f64::MIN, f64::max);
            let min = col.iter().copied().fold(f64::MAX, f64::min);
            assert!((total - 1.0).abs() < 1e-6);
            assert!(min >= -1e-3 * max, "J={j}");
        }
        assert!(heat_kernel_column(&basis, 0, 10_000).is_err());
    }

    #[test]
    fn equivariance_under_symmetry_and_swap() {
        let mesh = icosphere(3, 1.0).unwrap();
        let basis = SpectralBasis::from_mesh(&mesh, 150).unwrap();
        let fb = FilterBank::build(&SpectralWindow::Exp, 0, -4, basis.eigenvalues()).unwrap();
        let perms = symmetry_permutations(&mesh, 1e-9);
        assert_eq!(equivariance_defect(&basis, fb.lowpass(), &perms[0], 3, 1).unwrap(), 0.0);
        for p in perms.iter().skip(1).take(5) {
            assert!(equivariance_defect(&basis, fb.lowpass(), p, 3, 1).unwrap() <= 1e-6);
        }
        let swap = VertexPermutation::transposition(mesh.num_vertices(), 0, 300);
        let mut spike = vec![0.0; mesh.num_vertices()];
        spike[0] = 1.0;
        let fine = FilterBank::build(&SpectralWindow::Exp, -3, -4, basis.eigenvalues()).unwrap();
        assert!(equivariance_ratio(&basis, fine.lowpass(), &swap, &spike).unwrap() > 0.01);
    }

    #[test]
    fn csv_dump_has_rows_per_eigenvalue() {
        let fb = FilterBank::build(&SpectralWindow::Exp, 0, -1, &[0.0, 2.0, 6.0]).unwrap();
        let csv = filter_csv(fb.eigenvalues(), fb.lowpass());
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("k,lambda,hhat\n0,"));
        assert_eq!(fb.all_filters().len(), 3);
    }
}
