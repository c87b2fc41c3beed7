//! Shift-invert block Lanczos with full reorthogonalization for the smallest
//! eigenpairs of `B = M^{-1/2} S M^{-1/2}`. The block start resolves
//! eigenvalue multiplicities up to the block size, which symmetric meshes
//! produce exactly.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::sparse::{CsrMatrix, EnvelopeCholesky};
use crate::error::{Error, Result};

const SEED: u64 = 0x6c61_6e63_7a6f_7321;
const BLOCK: usize = 8;
const RITZ_TOLERANCE: f64 = 1e-11;

/// Eigenvalues (ascending) and `B`-space eigenvectors (columns).
pub(crate) struct LanczosOutput {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// `k` smallest eigenpairs of `M^{-1/2} S M^{-1/2}` from the largest
/// eigenpairs of `A = M^{1/2} (S + δM)^{-1} M^{1/2}`, which are
/// `1 / (λ + δ)`.
pub(crate) fn smallest_eigenpairs(stiffness: &CsrMatrix, mass: &[f64], k: usize) -> Result<LanczosOutput> {
    let n = stiffness.dim();
    let mean_b = (0..n).map(|i| stiffness.get(i, i) / mass[i]).sum::<f64>() / n as f64;
    let shift = 1e-6 * mean_b.max(f64::MIN_POSITIVE);
    let shifted = stiffness.add_diagonal(shift, mass);
    let chol = EnvelopeCholesky::factor(&shifted).ok_or_else(|| Error::EigenNotConverged {
        detail: "shifted stiffness matrix is not positive definite".into(),
    })?;
    let sqrt_m: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    let apply = |v: &Vec<f64>| -> Vec<f64> {
        let rhs: Vec<f64> = v.iter().zip(&sqrt_m).map(|(x, s)| x * s).collect();
        let y = chol.solve(&rhs);
        y.iter().zip(&sqrt_m).map(|(x, s)| x * s).collect()
    };

    let block = BLOCK.min(n);
    let max_dim = n.min((3 * k).max(k + 20 * block));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(SEED);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(max_dim);

    let mut pending: Vec<Vec<f64>> = (0..block).map(|_| random_vec(n, &mut rng)).collect();
    let mut next_check = (k + 2 * block).min(max_dim);
    loop {
        let accepted = orthonormalize_block(&basis, pending, &mut rng, max_dim - basis.len());
        let new_images: Vec<Vec<f64>> = accepted.par_iter().map(&apply).collect();
        for (v, av) in accepted.into_iter().zip(new_images) {
            let c = basis.len();
            basis.push(v);
            images.push(av);
            let col: Vec<f64> = (0..=c).map(|i| dot(&basis[i], &images[c])).collect();
            for (i, row) in h.iter_mut().enumerate() {
                row.push(col[i]);
            }
            h.push(col);
        }
        let m = basis.len();

        if m >= next_check || m == max_dim {
            let hm = DMatrix::from_fn(m, m, |i, j| if i <= j { h[i][j] } else { h[j][i] });
            let (theta, s) = sorted_eigen(hm);
            let wanted = k.min(m);
            let residuals: Vec<f64> = (0..wanted)
                .into_par_iter()
                .map(|i| {
                    let mut r = vec![0.0; n];
                    for j in 0..m {
                        let c = s[(j, i)];
                        for ((ri, a), v) in r.iter_mut().zip(&images[j]).zip(&basis[j]) {
                            *ri += c * (a - theta[i] * v);
                        }
                    }
                    norm(&r) / theta[0].abs()
                })
                .collect();
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            if worst <= RITZ_TOLERANCE || m == n {
                return Ok(assemble(&basis, &theta, &s, wanted, shift));
            }
            if m == max_dim {
                return Err(Error::EigenNotConverged {
                    detail: format!(
                        "Krylov dimension {m} for {k} eigenpairs; worst relative Ritz residual {worst:.3e}"
                    ),
                });
            }
            next_check = (m + m / 4).max(m + 2 * block).min(max_dim);
        }

        let start = m - block.min(m);
        pending = images[start..].to_vec();
    }
}

/// Orthogonalizes `block` against `basis` and within itself (two passes of
/// classical Gram-Schmidt); vectors that collapse are replaced by fresh
/// random directions so the block keeps its width.
fn orthonormalize_block(
    basis: &[Vec<f64>],
    block: Vec<Vec<f64>>,
    rng: &mut rand_chacha::ChaCha8Rng,
    room: usize,
) -> Vec<Vec<f64>> {
    let n = block[0].len();
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    let mut queue = block.into_iter();
    let mut attempts = 0;
    while accepted.len() < room.min(BLOCK) && attempts < 4 * BLOCK {
        attempts += 1;
        let mut w = queue.next().unwrap_or_else(|| random_vec(n, rng));
        let before = norm(&w);
        for _ in 0..2 {
            for b in basis.iter().chain(&accepted) {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let after = norm(&w);
        if after > 1e-8 * before && after > 0.0 {
            w.iter_mut().for_each(|x| *x /= after);
            accepted.push(w);
        }
    }
    accepted
}

fn assemble(basis: &[Vec<f64>], theta: &[f64], s: &DMatrix<f64>, wanted: usize, shift: f64) -> LanczosOutput {
    let n = basis[0].len();
    let columns: Vec<Vec<f64>> = (0..wanted)
        .into_par_iter()
        .map(|i| {
            let mut col = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                axpy(s[(j, i)], b, &mut col);
            }
            let nc = norm(&col);
            col.iter_mut().for_each(|x| *x /= nc);
            col
        })
        .collect();
    let vectors = DMatrix::from_fn(n, wanted, |r, c| columns[c][r]);
    // θ descending maps to λ = 1/θ − δ ascending.
    let values = theta[..wanted].iter().map(|t| 1.0 / t - shift).collect();
    LanczosOutput { values, vectors }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
fn sorted_eigen(t: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let m = t.nrows();
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m, m);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

fn random_vec(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
