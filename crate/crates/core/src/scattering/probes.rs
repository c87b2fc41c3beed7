//! Numerical probes of the invariance and stability statements: distance
//! decay under exact symmetries, growth under small warps, and commutator
//! norms between wavelet filters and vertex maps.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use super::{scatter_nonwindowed, scatter_windowed, ScatteringConfig};
use crate::error::{Error, Result};
use crate::filterbank::{convolve, FilterBank};
use crate::mesh::{
    latitude_twist, rotation_warp, InterpolationOperator, Point, Pullback, TriangleMesh, VertexPermutation,
};
use crate::spectral::{l2_norm, MassMatrix, SpectralBasis};

/// A linear map on vertex functions with its adjoint in the mass-weighted
/// inner product.
pub trait LinearMap: Sync {
    fn apply(&self, f: &[f64]) -> Vec<f64>;
    /// `V*` with `<V f, g> = <f, V* g>` for `<f, g> = fᵀ M g`.
    fn adjoint(&self, g: &[f64], mass: &MassMatrix) -> Vec<f64>;
}

impl LinearMap for VertexPermutation {
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        VertexPermutation::apply(self, f)
    }

    fn adjoint(&self, g: &[f64], mass: &MassMatrix) -> Vec<f64> {
        let mg: Vec<f64> = g.iter().zip(mass.diag()).map(|(a, m)| a * m).collect();
        let pt = self.inverse().apply(&mg);
        pt.iter().zip(mass.diag()).map(|(a, m)| a / m).collect()
    }
}

/// `V_ζ` realized by barycentric pullback.
#[derive(Clone, Debug)]
pub struct WarpOperator {
    operator: InterpolationOperator,
}

impl WarpOperator {
    pub fn new(mesh: &TriangleMesh, warp: &[Point], max_distance: f64) -> Result<Self> {
        Ok(Self {
            operator: Pullback::new(mesh, warp, max_distance)?.operator,
        })
    }
}

impl LinearMap for WarpOperator {
    fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.operator.apply(f)
    }

    fn adjoint(&self, g: &[f64], mass: &MassMatrix) -> Vec<f64> {
        let mg: Vec<f64> = g.iter().zip(mass.diag()).map(|(a, m)| a * m).collect();
        let wt = self.operator.apply_transpose(&mg);
        wt.iter().zip(mass.diag()).map(|(a, m)| a / m).collect()
    }
}

/// One-parameter warp families; amplitude 0 is the identity.
#[derive(Clone, Debug, PartialEq)]
pub enum WarpFamily {
    /// Rotation about z by `ε z / |x|`: a near-isometry that is not an
    /// isometry.
    LatitudeTwist,
    /// Rigid rotation by angle `ε` about `axis`.
    Rotation { axis: Point },
}

impl WarpFamily {
    pub fn warp(&self, mesh: &TriangleMesh, epsilon: f64) -> Vec<Point> {
        match self {
            Self::LatitudeTwist => latitude_twist(mesh, epsilon),
            Self::Rotation { axis } => rotation_warp(mesh, axis, epsilon),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Windowed,
    NonWindowed,
}

fn transform_distance(
    basis: &SpectralBasis,
    fb: &FilterBank,
    f: &[f64],
    g: &[f64],
    config: &ScatteringConfig,
    transform: Transform,
) -> Result<f64> {
    match transform {
        Transform::Windowed => {
            let a = scatter_windowed(basis, fb, f, config)?;
            let b = scatter_windowed(basis, fb, g, config)?;
            a.distance(&b, basis.mass())
        }
        Transform::NonWindowed => {
            let a = scatter_nonwindowed(basis, fb, f, config)?;
            let b = scatter_nonwindowed(basis, fb, g, config)?;
            a.distance(&b)
        }
    }
}

/// `‖S_J^L f − S_J^L V_ζ f‖_{2,2}` for each `J` in `js`, with the other
/// settings taken from `config`.
pub fn isometry_invariance_curve(
    basis: &SpectralBasis,
    f: &[f64],
    permutation: &VertexPermutation,
    js: &[i32],
    config: &ScatteringConfig,
) -> Result<Vec<(i32, f64)>> {
    let moved = permutation.apply(f);
    js.iter()
        .map(|&j| {
            let cfg = config.with_j_max(j);
            let fb = cfg.filterbank(basis)?;
            Ok((j, transform_distance(basis, &fb, f, &moved, &cfg, Transform::Windowed)?))
        })
        .collect()
}

/// Scattering distance between `f` and its pullback under each warp of the
/// family. Warp points may lie up to one mean edge length off the surface.
pub fn diffeo_stability_probe(
    basis: &SpectralBasis,
    mesh: &TriangleMesh,
    f: &[f64],
    family: &WarpFamily,
    epsilons: &[f64],
    config: &ScatteringConfig,
    transform: Transform,
) -> Result<Vec<(f64, f64)>> {
    if mesh.num_vertices() != basis.num_vertices() {
        return Err(Error::Dimension("mesh and basis disagree on the vertex count".into()));
    }
    let fb = config.filterbank(basis)?;
    let limit = mesh.mean_edge_length();
    epsilons
        .iter()
        .map(|&eps| {
            if eps == 0.0 {
                return Ok((eps, 0.0));
            }
            let op = WarpOperator::new(mesh, &family.warp(mesh, eps), limit)?;
            let g = op.apply(f);
            Ok((eps, transform_distance(basis, &fb, f, &g, config, transform)?))
        })
        .collect()
}

/// Like [`diffeo_stability_probe`], but evaluates an analytic signal
/// directly at the warp points instead of interpolating vertex values.
/// Free of interpolation error, so it isolates the discretization level.
pub fn transported_signal_probe(
    basis: &SpectralBasis,
    mesh: &TriangleMesh,
    signal: &dyn Fn(&Point) -> f64,
    family: &WarpFamily,
    epsilons: &[f64],
    config: &ScatteringConfig,
    transform: Transform,
) -> Result<Vec<(f64, f64)>> {
    if mesh.num_vertices() != basis.num_vertices() {
        return Err(Error::Dimension("mesh and basis disagree on the vertex count".into()));
    }
    let fb = config.filterbank(basis)?;
    let f: Vec<f64> = mesh.vertices().iter().map(signal).collect();
    epsilons
        .iter()
        .map(|&eps| {
            if eps == 0.0 {
                return Ok((eps, 0.0));
            }
            let g: Vec<f64> = family.warp(mesh, eps).iter().map(signal).collect();
            Ok((eps, transform_distance(basis, &fb, &f, &g, config, transform)?))
        })
        .collect()
}

/// Estimates `‖Ψ_j V − V Ψ_j‖` (operator norm in the mass-weighted `L²`)
/// by power iteration on `C* C` from `probes` seeded random starts, keeping
/// the largest result.
pub fn commutator_norm_estimate(
    basis: &SpectralBasis,
    fb: &FilterBank,
    j: i32,
    map: &dyn LinearMap,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    const MAX_ITERATIONS: usize = 200;
    let psi = fb.wavelet(j)?;
    let mass = basis.mass();
    let n = basis.num_vertices();
    let filt = |x: &[f64]| convolve(basis, psi, x);
    let c = |x: &[f64]| -> Result<Vec<f64>> {
        let a = filt(&map.apply(x))?;
        let b = map.apply(&filt(x)?);
        Ok(a.iter().zip(&b).map(|(p, q)| p - q).collect())
    };
    let c_adj = |y: &[f64]| -> Result<Vec<f64>> {
        let a = map.adjoint(&filt(y)?, mass);
        let b = filt(&map.adjoint(y, mass))?;
        Ok(a.iter().zip(&b).map(|(p, q)| p - q).collect())
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..probes.max(1) {
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nx = l2_norm(mass, &x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut estimate = 0.0;
        for _ in 0..MAX_ITERATIONS {
            let y = c(&x)?;
            let current = l2_norm(mass, &y);
            let z = c_adj(&y)?;
            let nz = l2_norm(mass, &z);
            let converged = (current - estimate).abs() <= 1e-8 * current;
            estimate = current;
            if nz == 0.0 || converged {
                break;
            }
            x = z.into_iter().map(|v| v / nz).collect();
        }
        best = best.max(estimate);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, symmetry_permutations};

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        let mesh = icosphere(2, 1.0).unwrap();
        let mass = crate::spectral::lumped_mass(&mesh);
        let n = mesh.num_vertices();
        let f = random(n, 1);
        let g = random(n, 2);
        let maps: Vec<Box<dyn LinearMap>> = vec![
            Box::new(VertexPermutation::transposition(n, 3, 40)),
            Box::new(WarpOperator::new(&mesh, &latitude_twist(&mesh, 0.1), 0.1).unwrap()),
        ];
        for map in &maps {
            let lhs = mass.inner(&map.apply(&f), &g);
            let rhs = mass.inner(&f, &map.adjoint(&g, &mass));
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn identity_and_zero_amplitude_give_zero() {
        let mesh = icosphere(2, 1.0).unwrap();
        let basis = SpectralBasis::from_mesh(&mesh, 60).unwrap();
        let cfg = ScatteringConfig {
            j_max: 0,
            depth: 1,
            j_min: -3,
            k: 60,
            ..Default::default()
        };
        let f: Vec<f64> = mesh.vertices().iter().map(|v| v.z).collect();
        let id = VertexPermutation::identity(mesh.num_vertices());
        for (_, d) in isometry_invariance_curve(&basis, &f, &id, &[0, 1, 2], &cfg).unwrap() {
            assert!(d <= 1e-10);
        }
        let probe = diffeo_stability_probe(
            &basis,
            &mesh,
            &f,
            &WarpFamily::LatitudeTwist,
            &[0.0],
            &cfg,
            Transform::Windowed,
        )
        .unwrap();
        assert_eq!(probe, vec![(0.0, 0.0)]);
    }

    #[test]
    fn symmetry_commutes_with_wavelets() {
        let mesh = icosphere(2, 1.0).unwrap();
        let basis = SpectralBasis::from_mesh(&mesh, mesh.num_vertices()).unwrap();
        let fb = FilterBank::build(&crate::filterbank::SpectralWindow::Exp, 0, -2, basis.eigenvalues()).unwrap();
        let perm = &symmetry_permutations(&mesh, 1e-9)[7];
        assert!(commutator_norm_estimate(&basis, &fb, -1, perm, 2, 3).unwrap() <= 1e-6);
        let swap = VertexPermutation::transposition(mesh.num_vertices(), 0, 77);
        assert!(commutator_norm_estimate(&basis, &fb, -1, &swap, 2, 3).unwrap() > 1e-3);
    }
}
