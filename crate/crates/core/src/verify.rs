//! Self-contained verification suite: each named invariant of the spectral,
//! filter bank and scattering layers is checked on generated fixtures and
//! reported as PASS or FAIL.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filterbank::{convolve, equivariance_defect, equivariance_ratio, FilterBank, SpectralWindow, Telescope};
use crate::mesh::{
    icosphere, regular_tetrahedron, symmetry_permutations, torus, Point, TriangleMesh, VertexPermutation,
};
use crate::scattering::{
    commutator_norm_estimate, scatter_nonwindowed, scatter_windowed, u_energy, LinearMap, ScatteringConfig, WarpFamily,
    WarpOperator,
};
use crate::spectral::{
    cotangent_stiffness, eigenbasis_with, eigenvalue_clusters, lumped_mass, EigenSolver, SpectralBasis,
};

/// Deliberate faults for checking that the suite detects broken code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sabotage {
    /// Reverses the wavelet telescoping difference.
    Telescope,
}

impl std::str::FromStr for Sabotage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "telescope" => Ok(Self::Telescope),
            other => Err(Error::Config(format!(
                "unknown sabotage mode {other:?} (expected telescope)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    pub sabotage: Option<Sabotage>,
    /// Run only these checks (all when empty).
    pub only: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub sabotage: Option<Sabotage>,
    pub results: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn lines(&self) -> Vec<String> {
        self.results
            .iter()
            .map(|r| {
                format!(
                    "{} {:<36} {:>7.2}s  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.seconds,
                    r.detail
                )
            })
            .collect()
    }
}

/// Every check the suite runs, with the property it asserts.
pub const MANIFEST: &[(&str, &str)] = &[
    (
        "spectral.eigen-residual",
        "S φ = λ M φ per column within 1e-6 relative residual",
    ),
    ("spectral.parseval", "Σ f̂(k)² ≤ ‖f‖², equality within 1e-8 at K = n_v"),
    (
        "spectral.refinement-monotonicity",
        "sphere l ≤ 2 eigenvalue error strictly decreases over subdivisions 2..4",
    ),
    (
        "spectral.multiplicity-structure",
        "icosphere(3,1) clusters of sizes 1, 3, 5, 7 at relative gap 0.05",
    ),
    ("spectral.stiffness-psd", "vᵀ S v ≥ −1e-9 vᵀv for 100 random v"),
    (
        "filterbank.littlewood-paley",
        "φ̂_J² + Σ ψ̂_j² = e^{−2^{j_min} λ} within 1e-12 for every k",
    ),
    (
        "filterbank.frame-isometry",
        "‖A_J f‖² + Σ‖Ψ_j f‖² = Σ G(2^{j_min−1}λ_k)² f̂(k)² within 1e-9 relative",
    ),
    (
        "filterbank.analysis-nonexpansive",
        "Σ_h ‖T_h f₁ − T_h f₂‖² ≤ ‖f₁ − f₂‖² + 1e-9",
    ),
    ("filterbank.wavelet-range", "filter responses lie in [0, 1]"),
    (
        "filterbank.convolve-linear",
        "convolve(f + αg) = convolve(f) + α convolve(g) within 1e-10",
    ),
    (
        "filterbank.isometry-equivariance",
        "symmetry defect ≤ 1e-6, vertex swap defect > 0.01",
    ),
    (
        "scattering.nonexpansive",
        "windowed and non-windowed distances ≤ ‖f₁ − f₂‖ + 1e-9",
    ),
    ("scattering.layer-energy", "Σ_{|p| ≤ L} ‖U[p] f‖² ≤ (L + 1)‖f‖² + 1e-9"),
    ("scattering.sbar-l2-bound", "‖S̄^L f‖ ≤ ‖f‖ + 1e-9 (unit area, f ≥ 0)"),
    (
        "scattering.permutation-invariance",
        "|S̄f(p) − S̄(V_ζ f)(p)| ≤ 1e-8 ‖f‖ for exact symmetries",
    ),
    (
        "scattering.zeroth-path",
        "windowed ∅ entry equals low-pass convolution exactly",
    ),
    (
        "scattering.determinism",
        "bit-identical reruns, ≤ 1e-12 across thread counts",
    ),
    (
        "scattering.cross-mesh-invariance",
        "rigidly moved mesh gives S̄ within 1e-8",
    ),
    (
        "scattering.isometry-decay",
        "windowed symmetry distance non-increasing over J = 0..3",
    ),
    (
        "scattering.diffeo-stability",
        "latitude-twist distance ratios in [1.5, 2.5]",
    ),
    (
        "scattering.commutator",
        "symmetry commutator ≤ 1e-6; twist commutator decreases over j = −2..0",
    ),
];

struct Fixtures {
    sphere: TriangleMesh,
    full: SpectralBasis,
    band: SpectralBasis,
    unit: SpectralBasis,
    symmetries: Vec<VertexPermutation>,
    telescope: Telescope,
    seed: u64,
}

impl Fixtures {
    fn new(options: &VerifyOptions) -> Result<Self> {
        let sphere = icosphere(3, 1.0)?;
        let full = SpectralBasis::from_mesh(&sphere, sphere.num_vertices())?;
        let band = full.truncated(150)?;
        let unit_mesh = sphere.scaled_to_unit_area();
        let unit = SpectralBasis::from_mesh(&unit_mesh, unit_mesh.num_vertices())?;
        let symmetries = symmetry_permutations(&sphere, 1e-9)
            .into_iter()
            .filter(|p| !p.is_identity())
            .take(10)
            .collect();
        Ok(Self {
            sphere,
            full,
            band,
            unit,
            symmetries,
            telescope: match options.sabotage {
                Some(Sabotage::Telescope) => Telescope::Reversed,
                None => Telescope::Standard,
            },
            seed: options.seed,
        })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn filterbank(&self, basis: &SpectralBasis, j_max: i32, j_min: i32) -> Result<FilterBank> {
        FilterBank::build_with(&SpectralWindow::Exp, j_max, j_min, basis.eigenvalues(), self.telescope)
    }

    fn config(&self, basis: &SpectralBasis, depth: usize, j_min: i32) -> ScatteringConfig {
        ScatteringConfig {
            j_max: 0,
            depth,
            j_min,
            k: basis.len(),
            ..Default::default()
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let u = Uniform::new(0.0, 1.0).expect("valid range");
    (0..n).map(|_| u.sample(rng)).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn fixed(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

type Outcome = Result<(bool, String)>;

fn eigen_residual(_: &Fixtures) -> Outcome {
    let meshes = [icosphere(3, 1.0)?, torus(16, 8, 2.0, 0.5)?, regular_tetrahedron(1.0)?];
    let mut worst = 0.0f64;
    for m in &meshes {
        let b = SpectralBasis::from_mesh(m, m.num_vertices())?;
        let r = b.residuals(&cotangent_stiffness(m)?);
        worst = worst.max(r.iter().copied().fold(0.0, f64::max));
    }
    Ok((
        worst <= 1e-6,
        format!("max residual {worst:.2e} over sphere, torus, tetrahedron"),
    ))
}

fn parseval(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(1);
    let n = fx.full.num_vertices();
    let (mut full_err, mut band_excess) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..10 {
        let f = gaussian(&mut rng, n);
        let e = fx.full.mass().inner(&f, &f);
        let s: f64 = fx.full.fourier(&f).iter().map(|c| c * c).sum();
        full_err = full_err.max((s - e).abs() / e);
        let t: f64 = fx.band.fourier(&f).iter().map(|c| c * c).sum();
        band_excess = band_excess.max((t - e) / e);
    }
    Ok((
        full_err <= 1e-8 && band_excess <= 1e-12,
        format!("K = n_v relative error {full_err:.2e}; K = 150 excess {band_excess:.2e}"),
    ))
}

fn refinement(_: &Fixtures) -> Outcome {
    let mut errors = Vec::new();
    for s in 2..=4 {
        let m = icosphere(s, 1.0)?;
        let solver = if s == 4 {
            EigenSolver::Lanczos
        } else {
            EigenSolver::Dense
        };
        let b = eigenbasis_with(&cotangent_stiffness(&m)?, &lumped_mass(&m), 9, solver)?;
        let e = b.eigenvalues();
        let l1 = (1..4).map(|k| (e[k] - 2.0).abs() / 2.0).fold(0.0, f64::max);
        let l2 = (4..9).map(|k| (e[k] - 6.0).abs() / 6.0).fold(0.0, f64::max);
        errors.push((l1, l2));
    }
    let ok = errors.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    let text: Vec<String> = errors.iter().map(|(a, b)| format!("({a:.2e}, {b:.2e})")).collect();
    Ok((
        ok,
        format!("(l=1, l=2) relative errors for s = 2, 3, 4: {}", text.join(" ")),
    ))
}

fn multiplicity(fx: &Fixtures) -> Outcome {
    let sizes: Vec<usize> = eigenvalue_clusters(&fx.full.eigenvalues()[..16], 0.05)
        .iter()
        .map(Vec::len)
        .collect();
    Ok((sizes == [1, 3, 5, 7], format!("cluster sizes {sizes:?}")))
}

fn stiffness_psd(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(2);
    let mut worst = f64::INFINITY;
    for m in [fx.sphere.clone(), torus(16, 8, 2.0, 0.5)?] {
        let s = cotangent_stiffness(&m)?;
        for _ in 0..100 {
            let v = gaussian(&mut rng, m.num_vertices());
            let vv: f64 = v.iter().map(|x| x * x).sum();
            worst = worst.min(s.quadratic_form(&v) / vv);
        }
    }
    Ok((worst >= -1e-9, format!("min vᵀSv / vᵀv = {worst:.3e}")))
}

fn littlewood_paley(fx: &Fixtures) -> Outcome {
    let fb = fx.filterbank(&fx.full, 0, -8)?;
    let sum = fb.littlewood_paley_sum();
    let worst = fx
        .full
        .eigenvalues()
        .iter()
        .zip(&sum)
        .map(|(&l, s)| (s - (-(l.max(0.0)) / 256.0).exp()).abs())
        .fold(0.0, f64::max);
    Ok((
        worst <= 1e-12,
        format!("max |LP − e^(−λ/256)| = {worst:.2e} (K = 642, J = 0, j_min = −8)"),
    ))
}

fn analysis_energy(basis: &SpectralBasis, fb: &FilterBank, f: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (_, h) in fb.all_filters() {
        let g = convolve(basis, h, f)?;
        total += basis.mass().inner(&g, &g);
    }
    Ok(total)
}

fn frame_isometry(fx: &Fixtures) -> Outcome {
    let fb = fx.filterbank(&fx.band, 0, -8)?;
    let mut rng = fx.rng(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let c = gaussian(&mut rng, fx.band.len());
        let f = fx.band.synthesize(&c);
        let norm2 = fx.band.mass().inner(&f, &f);
        let target: f64 = fx
            .band
            .eigenvalues()
            .iter()
            .zip(&c)
            .map(|(&l, c)| (-(l.max(0.0)) / 256.0).exp() * c * c)
            .sum();
        worst = worst.max((analysis_energy(&fx.band, &fb, &f)? - target).abs() / norm2);
    }
    Ok((
        worst <= 1e-9,
        format!("max relative defect {worst:.2e} over 50 signals"),
    ))
}

fn analysis_nonexpansive(fx: &Fixtures) -> Outcome {
    let fb = fx.filterbank(&fx.band, 0, -8)?;
    let mut rng = fx.rng(4);
    let n = fx.band.num_vertices();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let d = sub(&gaussian(&mut rng, n), &gaussian(&mut rng, n));
        let lhs = analysis_energy(&fx.band, &fb, &d)?;
        worst = worst.max(lhs - fx.band.mass().inner(&d, &d));
    }
    Ok((worst <= 1e-9, format!("max Σ‖T_h d‖² − ‖d‖² = {worst:.2e}")))
}

fn wavelet_range(fx: &Fixtures) -> Outcome {
    let fb = fx.filterbank(&fx.full, 0, -8)?.with_residual_highpass();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, h) in fb.all_filters() {
        for &v in h {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo >= 0.0 && hi <= 1.0, format!("responses in [{lo:.3e}, {hi:.6}]")))
}

fn convolve_linear(fx: &Fixtures) -> Outcome {
    let fb = fx.filterbank(&fx.band, 0, -4)?;
    let mut rng = fx.rng(5);
    let n = fx.band.num_vertices();
    let mut worst = 0.0f64;
    for (_, h) in fb.all_filters() {
        let (f, g) = (gaussian(&mut rng, n), gaussian(&mut rng, n));
        let a = 0.37;
        let fg: Vec<f64> = f.iter().zip(&g).map(|(x, y)| x + a * y).collect();
        let lhs = convolve(&fx.band, h, &fg)?;
        let cf = convolve(&fx.band, h, &f)?;
        let cg = convolve(&fx.band, h, &g)?;
        for i in 0..n {
            worst = worst.max((lhs[i] - cf[i] - a * cg[i]).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.2e}")))
}

fn equivariance(fx: &Fixtures) -> Outcome {
    let fb = fx.filterbank(&fx.full, 0, -8)?;
    let mut worst = 0.0f64;
    for (i, p) in fx.symmetries.iter().enumerate() {
        worst = worst.max(equivariance_defect(&fx.full, fb.lowpass(), p, 3, fx.seed + i as u64)?);
    }
    let swap = VertexPermutation::transposition(fx.sphere.num_vertices(), 0, 321);
    let v0 = fx.sphere.vertices()[0];
    let bump: Vec<f64> = fx
        .sphere
        .vertices()
        .iter()
        .map(|v| (-(v - v0).norm_squared() / 0.05).exp())
        .collect();
    let fine = fx.filterbank(&fx.full, -3, -8)?;
    let swapped = equivariance_ratio(&fx.full, fine.lowpass(), &swap, &bump)?;
    Ok((
        worst <= 1e-6 && swapped > 0.01,
        format!("symmetry defect {worst:.2e}; swap defect {swapped:.3}"),
    ))
}

fn nonexpansive(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(6);
    let mut worst = f64::NEG_INFINITY;
    for depth in 1..=3 {
        let cfg = fx.config(&fx.band, depth, -4);
        let fb = fx.filterbank(&fx.band, 0, -4)?;
        let cfg_u = fx.config(&fx.unit, depth, -4);
        let fb_u = fx.filterbank(&fx.unit, 0, -4)?;
        let n = fx.band.num_vertices();
        for _ in 0..4 {
            let (f1, f2) = (gaussian(&mut rng, n), gaussian(&mut rng, n));
            let d = fx.band.mass().inner(&sub(&f1, &f2), &sub(&f1, &f2)).sqrt();
            let a = scatter_windowed(&fx.band, &fb, &f1, &cfg)?;
            let b = scatter_windowed(&fx.band, &fb, &f2, &cfg)?;
            worst = worst.max(a.distance(&b, fx.band.mass())? - d);

            let (g1, g2) = (uniform(&mut rng, n), uniform(&mut rng, n));
            let du = fx.unit.mass().inner(&sub(&g1, &g2), &sub(&g1, &g2)).sqrt();
            let a = scatter_nonwindowed(&fx.unit, &fb_u, &g1, &cfg_u)?;
            let b = scatter_nonwindowed(&fx.unit, &fb_u, &g2, &cfg_u)?;
            worst = worst.max(a.distance(&b)? - du);
        }
    }
    Ok((
        worst <= 1e-9,
        format!("max distance − ‖f₁ − f₂‖ = {worst:.3e} (L = 1..3)"),
    ))
}

fn layer_energy(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(7);
    let fb = fx.filterbank(&fx.band, 0, -4)?;
    let mut worst = f64::NEG_INFINITY;
    for depth in 0..=3 {
        let cfg = fx.config(&fx.band, depth, -4);
        for _ in 0..3 {
            let f = gaussian(&mut rng, fx.band.num_vertices());
            let e = u_energy(&fx.band, &fb, &f, &cfg)?;
            worst = worst.max(e - (depth as f64 + 1.0) * fx.band.mass().inner(&f, &f));
        }
    }
    Ok((worst <= 1e-9, format!("max energy − (L+1)‖f‖² = {worst:.3e}")))
}

fn sbar_bound(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(8);
    let fb = fx.filterbank(&fx.unit, 0, -4)?;
    let mut worst = f64::NEG_INFINITY;
    for depth in 0..=3 {
        let cfg = fx.config(&fx.unit, depth, -4);
        for _ in 0..3 {
            let f = uniform(&mut rng, fx.unit.num_vertices());
            let s = scatter_nonwindowed(&fx.unit, &fb, &f, &cfg)?;
            worst = worst.max(s.norm() - fx.unit.mass().inner(&f, &f).sqrt());
        }
    }
    Ok((worst <= 1e-9, format!("max ‖S̄f‖ − ‖f‖ = {worst:.3e}")))
}

fn permutation_invariance(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(9);
    let cfg = fx.config(&fx.full, 2, -4);
    let fb = fx.filterbank(&fx.full, 0, -4)?;
    let mut worst = 0.0f64;
    for p in fx.symmetries.iter().take(3) {
        let f = gaussian(&mut rng, fx.full.num_vertices());
        let norm = fx.full.mass().inner(&f, &f).sqrt();
        let a = scatter_nonwindowed(&fx.full, &fb, &f, &cfg)?;
        let b = scatter_nonwindowed(&fx.full, &fb, &p.apply(&f), &cfg)?;
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max((x - y).abs() / norm);
        }
    }
    Ok((worst <= 1e-8, format!("max |ΔS̄(p)| / ‖f‖ = {worst:.2e}")))
}

fn zeroth_path(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(10);
    let cfg = fx.config(&fx.band, 1, -4);
    let fb = fx.filterbank(&fx.band, 0, -4)?;
    let f = gaussian(&mut rng, fx.band.num_vertices());
    let s = scatter_windowed(&fx.band, &fb, &f, &cfg)?;
    let direct = convolve(&fx.band, fb.lowpass(), &f)?;
    let ok = s.values()[0] == direct;
    Ok((
        ok,
        format!(
            "∅ entry {} low-pass convolution",
            if ok { "equals" } else { "differs from" }
        ),
    ))
}

fn determinism(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(11);
    let cfg = fx.config(&fx.band, 2, -4);
    let fb = fx.filterbank(&fx.band, 0, -4)?;
    let f = gaussian(&mut rng, fx.band.num_vertices());
    let run = |threads: usize| -> Result<_> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| scatter_windowed(&fx.band, &fb, &f, &cfg))
    };
    let a = run(1)?;
    let b = run(1)?;
    let c = run(4)?;
    let bitwise = a.values() == b.values();
    let cross = a
        .values()
        .iter()
        .flatten()
        .zip(c.values().iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok((
        bitwise && cross <= 1e-12,
        format!("reruns bit-identical: {bitwise}; 1 vs 4 threads max difference {cross:.1e}"),
    ))
}

fn cross_mesh(fx: &Fixtures) -> Outcome {
    let rot = crate::datasets::random_rotation(fx.seed);
    let moved = fx.sphere.rigid_transform(&rot, &Point::new(0.3, -1.2, 2.0));
    let other = SpectralBasis::from_mesh(&moved, moved.num_vertices())?;
    let cfg = fx.config(&fx.full, 2, -4);
    let fb = fx.filterbank(&fx.full, 0, -4)?;
    let fb2 = fx.filterbank(&other, 0, -4)?;
    let mut worst = 0.0f64;
    for d in 0..3 {
        let f: Vec<f64> = fx.sphere.vertices().iter().map(|v| v[d]).collect();
        let a = scatter_nonwindowed(&fx.full, &fb, &f, &cfg)?;
        let b = scatter_nonwindowed(&other, &fb2, &f, &cfg)?;
        for (x, y) in a.values().iter().zip(b.values()) {
            worst = worst.max((x - y).abs() / x.abs().max(1.0));
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max relative difference {worst:.2e} over x, y, z"),
    ))
}

fn isometry_decay(fx: &Fixtures) -> Outcome {
    let f: Vec<f64> = fx.sphere.vertices().iter().map(|v| v.z).collect();
    let cfg = fx.config(&fx.full, 2, -4);
    let mut ok = true;
    let mut curves = Vec::new();
    for p in fx.symmetries.iter().take(3) {
        let moved = p.apply(&f);
        let curve = (0..=3)
            .map(|j| {
                let c = cfg.with_j_max(j);
                let fb = fx.filterbank(&fx.full, j, c.j_min)?;
                let a = scatter_windowed(&fx.full, &fb, &f, &c)?;
                let b = scatter_windowed(&fx.full, &fb, &moved, &c)?;
                a.distance(&b, fx.full.mass())
            })
            .collect::<Result<Vec<f64>>>()?;
        ok &= curve.windows(2).all(|w| w[1] <= w[0] + 1e-9);
        curves.push(curve);
    }
    Ok((ok, format!("distances at J = 0..3: {}", sci(&curves[0]))))
}

fn diffeo_stability(fx: &Fixtures) -> Outcome {
    let mut rng = fx.rng(12);
    let coeffs = gaussian(&mut rng, 36);
    let f = fx.band.truncated(36)?.synthesize(&coeffs);
    let cfg = fx.config(&fx.band, 2, -4);
    let fb = fx.filterbank(&fx.band, 0, -4)?;
    let a = scatter_windowed(&fx.band, &fb, &f, &cfg)?;
    let d = [0.01, 0.02, 0.04]
        .iter()
        .map(|&e| {
            let warp = WarpFamily::LatitudeTwist.warp(&fx.sphere, e);
            let op = WarpOperator::new(&fx.sphere, &warp, fx.sphere.mean_edge_length())?;
            let b = scatter_windowed(&fx.band, &fb, &op.apply(&f), &cfg)?;
            a.distance(&b, fx.band.mass())
        })
        .collect::<Result<Vec<f64>>>()?;
    let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.iter().all(|r| (1.5..=2.5).contains(r));
    Ok((ok, format!("distances {}, ratios {}", sci(&d), fixed(&ratios))))
}

fn commutator(fx: &Fixtures) -> Outcome {
    let fb = fx.filterbank(&fx.full, 0, -8)?;
    let sym = commutator_norm_estimate(&fx.full, &fb, -1, &fx.symmetries[0], 1, fx.seed)?;
    let warp = WarpOperator::new(
        &fx.sphere,
        &WarpFamily::LatitudeTwist.warp(&fx.sphere, 0.05),
        fx.sphere.mean_edge_length(),
    )?;
    let est: Vec<f64> = (-2..=0)
        .map(|j| commutator_norm_estimate(&fx.full, &fb, j, &warp, 1, fx.seed))
        .collect::<Result<_>>()?;
    let ok = sym <= 1e-6 && est.windows(2).all(|w| w[1] < w[0]);
    Ok((
        ok,
        format!("symmetry {sym:.2e}; twist ε=0.05 at j = −2, −1, 0: {}", sci(&est)),
    ))
}

type Check = fn(&Fixtures) -> Outcome;

fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("spectral.eigen-residual", eigen_residual),
        ("spectral.parseval", parseval),
        ("spectral.refinement-monotonicity", refinement),
        ("spectral.multiplicity-structure", multiplicity),
        ("spectral.stiffness-psd", stiffness_psd),
        ("filterbank.littlewood-paley", littlewood_paley),
        ("filterbank.frame-isometry", frame_isometry),
        ("filterbank.analysis-nonexpansive", analysis_nonexpansive),
        ("filterbank.wavelet-range", wavelet_range),
        ("filterbank.convolve-linear", convolve_linear),
        ("filterbank.isometry-equivariance", equivariance),
        ("scattering.nonexpansive", nonexpansive),
        ("scattering.layer-energy", layer_energy),
        ("scattering.sbar-l2-bound", sbar_bound),
        ("scattering.permutation-invariance", permutation_invariance),
        ("scattering.zeroth-path", zeroth_path),
        ("scattering.determinism", determinism),
        ("scattering.cross-mesh-invariance", cross_mesh),
        ("scattering.isometry-decay", isometry_decay),
        ("scattering.diffeo-stability", diffeo_stability),
        ("scattering.commutator", commutator),
    ]
}

/// Runs the suite. A check that errors counts as a FAIL with the error as
/// its detail.
pub fn run_verify(options: &VerifyOptions) -> Result<VerifyReport> {
    if let Some(bad) = options.only.iter().find(|n| !MANIFEST.iter().any(|(m, _)| m == n)) {
        return Err(Error::Config(format!("unknown check {bad:?}")));
    }
    let fixtures = Fixtures::new(options)?;
    let results = checks()
        .into_iter()
        .filter(|(name, _)| options.only.is_empty() || options.only.iter().any(|o| o == name))
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check(&fixtures) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Ok(VerifyReport {
        seed: options.seed,
        sabotage: options.sabotage,
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_matches_checks() {
        let names: Vec<&str> = checks().iter().map(|(n, _)| *n).collect();
        let manifest: Vec<&str> = MANIFEST.iter().map(|(n, _)| *n).collect();
        assert_eq!(names, manifest);
    }

    #[test]
    fn sabotage_breaks_littlewood_paley() {
        let only = vec!["filterbank.littlewood-paley".to_string()];
        let good = run_verify(&VerifyOptions {
            only: only.clone(),
            ..Default::default()
        })
        .unwrap();
        assert!(good.all_passed());
        let bad = run_verify(&VerifyOptions {
            sabotage: Some(Sabotage::Telescope),
            only,
            ..Default::default()
        })
        .unwrap();
        assert!(!bad.get("filterbank.littlewood-paley").unwrap().passed);
    }

    #[test]
    fn unknown_check_rejected() {
        let r = run_verify(&VerifyOptions {
            only: vec!["nope".into()],
            ..Default::default()
        });
        assert!(matches!(r, Err(Error::Config(_))));
        assert!("flip".parse::<Sabotage>().is_err());
    }
}
