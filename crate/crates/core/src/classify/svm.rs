//! One-vs-rest RBF-kernel SVM trained by SMO with first-order working-set
//! selection.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::FeatureMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GSVM";
const VERSION: u32 = 1;
const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SvmParams {
    pub gamma: f64,
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub standardize: bool,
}

impl SvmParams {
    pub fn new(gamma: f64, c: f64) -> Self {
        Self {
            gamma,
            c,
            tolerance: 1e-3,
            max_iterations: 100_000,
            standardize: true,
        }
    }

    pub fn with_standardize(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.c > 0.0 && self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "gamma, C and tolerance must be positive (gamma {}, C {}, tolerance {})",
                self.gamma, self.c, self.tolerance
            )));
        }
        Ok(())
    }
}

/// Per-column affine map to zero mean and unit variance; constant columns
/// keep scale 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|j| {
                let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// Trained one-vs-rest model. `coef[c][s]` is `α y` of support vector `s`
/// in the problem of class `classes[c]`; decisions are
/// `Σ_s coef[c][s] K(x_s, x) − rho[c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub classes: Vec<usize>,
    pub support_indices: Vec<usize>,
    pub support_vectors: Vec<Vec<f64>>,
    pub coef: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
    pub scaler: Option<Standardizer>,
    /// Final maximal KKT violation of each binary problem.
    pub kkt_violation: Vec<f64>,
}

impl SvmModel {
    pub fn num_features(&self) -> usize {
        self.support_vectors
            .first()
            .map_or_else(|| self.scaler.as_ref().map_or(0, |s| s.mean.len()), Vec::len)
    }

    /// Per-class decision values for each row.
    pub fn decision_values(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        if features.num_columns() != self.num_features() && !self.support_vectors.is_empty() {
            return Err(Error::Dimension(format!(
                "model has {} features, input has {}",
                self.num_features(),
                features.num_columns()
            )));
        }
        Ok(features
            .rows()
            .par_iter()
            .map(|r| {
                let x = match &self.scaler {
                    Some(s) => s.transform(r),
                    None => r.clone(),
                };
                let k: Vec<f64> = self
                    .support_vectors
                    .iter()
                    .map(|sv| rbf(self.gamma, sq_dist(sv, &x)))
                    .collect();
                self.coef
                    .iter()
                    .zip(&self.rho)
                    .map(|(a, rho)| a.iter().zip(&k).map(|(a, k)| a * k).sum::<f64>() - rho)
                    .collect()
            })
            .collect())
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rbf(gamma: f64, d2: f64) -> f64 {
    (-gamma * d2).exp()
}

/// Pairwise squared distances, row-major `a.len() × b.len()`.
pub(crate) fn sq_distances(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    a.par_iter()
        .flat_map_iter(|x| b.iter().map(move |y| sq_dist(x, y)))
        .collect()
}

/// Solution of one binary problem.
#[derive(Clone, Debug)]
pub(crate) struct Binary {
    pub alpha_y: Vec<f64>,
    pub rho: f64,
    pub violation: f64,
}

/// SMO on `min ½ αᵀQα − eᵀα`, `0 ≤ α ≤ C`, `yᵀα = 0` with `Q = yyᵀ∘K`.
pub(crate) fn smo(kernel: &[f64], y: &[f64], c: f64, tolerance: f64, max_iterations: usize) -> Binary {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut violation = f64::INFINITY;
    for _ in 0..max_iterations {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        violation = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || violation <= tolerance {
            break;
        }
        let (ai, aj) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    Binary {
        alpha_y: alpha.iter().zip(y).map(|(a, y)| a * y).collect(),
        rho,
        violation: violation.max(0.0),
    }
}

pub(crate) fn class_list(labels: &[usize]) -> Result<Vec<usize>> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!(
            "need at least two classes, got {}",
            classes.len()
        )));
    }
    Ok(classes)
}

/// One-vs-rest solutions for a precomputed square kernel.
pub(crate) fn fit_kernel(kernel: &[f64], labels: &[usize], classes: &[usize], params: &SvmParams) -> Vec<Binary> {
    classes
        .par_iter()
        .map(|&cls| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == cls { 1.0 } else { -1.0 }).collect();
            smo(kernel, &y, params.c, params.tolerance, params.max_iterations)
        })
        .collect()
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    (0..values.len()).fold(0, |best, i| if values[i] > values[best] { i } else { best })
}

/// Predictions from a precomputed `m × n` kernel between test and
/// training rows.
pub(crate) fn predict_kernel(kernel: &[f64], n: usize, solutions: &[Binary], classes: &[usize]) -> Vec<usize> {
    kernel
        .chunks(n.max(1))
        .map(|k| {
            let d: Vec<f64> = solutions
                .iter()
                .map(|s| s.alpha_y.iter().zip(k).map(|(a, k)| a * k).sum::<f64>() - s.rho)
                .collect();
            classes[argmax(&d)]
        })
        .collect()
}

fn validate_training(features: &FeatureMatrix, labels: &[usize]) -> Result<()> {
    if features.num_rows() != labels.len() {
        return Err(Error::Training(format!(
            "{} feature rows but {} labels",
            features.num_rows(),
            labels.len()
        )));
    }
    Ok(())
}

/// Trains one binary SMO problem per class on the RBF kernel
/// `exp(−γ‖x − x'‖²)`, standardizing columns first when requested. The
/// solver is deterministic.
pub fn svm_train(features: &FeatureMatrix, labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    params.validate()?;
    validate_training(features, labels)?;
    let classes = class_list(labels)?;
    let scaler = params.standardize.then(|| Standardizer::fit(features.rows()));
    let rows: Vec<Vec<f64>> = match &scaler {
        Some(s) => features.rows().iter().map(|r| s.transform(r)).collect(),
        None => features.rows().to_vec(),
    };
    let kernel: Vec<f64> = sq_distances(&rows, &rows)
        .into_iter()
        .map(|d| rbf(params.gamma, d))
        .collect();
    let solutions = fit_kernel(&kernel, labels, &classes, params);
    let support_indices: Vec<usize> = (0..rows.len())
        .filter(|&i| solutions.iter().any(|s| s.alpha_y[i] != 0.0))
        .collect();
    Ok(SvmModel {
        gamma: params.gamma,
        c: params.c,
        support_vectors: support_indices.iter().map(|&i| rows[i].clone()).collect(),
        coef: solutions
            .iter()
            .map(|s| support_indices.iter().map(|&i| s.alpha_y[i]).collect())
            .collect(),
        rho: solutions.iter().map(|s| s.rho).collect(),
        kkt_violation: solutions.iter().map(|s| s.violation).collect(),
        classes,
        support_indices,
        scaler,
    })
}

/// Argmax over per-class decision values; ties go to the smaller class id.
pub fn svm_predict(model: &SvmModel, features: &FeatureMatrix) -> Result<Vec<usize>> {
    Ok(model
        .decision_values(features)?
        .iter()
        .map(|d| model.classes[argmax(d)])
        .collect())
}

/// Binary layout, little-endian: `"GSVM"`, version `u32`, then `u64`
/// counts (classes, support vectors, features, standardized flag), `f64`
/// γ and C, `u64` class ids and support indices, then `f64` support
/// vectors (row-major), coefficients (class-major), rho, KKT violations
/// and, when standardized, column means and standard deviations.
pub fn write_model(model: &SvmModel, mut out: impl Write) -> std::io::Result<()> {
    let d = model.num_features();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for v in [
        model.classes.len(),
        model.support_indices.len(),
        d,
        usize::from(model.scaler.is_some()),
    ] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    let mut buf = Vec::new();
    let mut put = |x: f64| buf.extend_from_slice(&x.to_le_bytes());
    put(model.gamma);
    put(model.c);
    out.write_all(&buf)?;
    buf.clear();
    for &v in model.classes.iter().chain(&model.support_indices) {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    let scaler = model.scaler.iter().flat_map(|s| s.mean.iter().chain(&s.std));
    for &x in model
        .support_vectors
        .iter()
        .flatten()
        .chain(model.coef.iter().flatten())
        .chain(&model.rho)
        .chain(&model.kkt_violation)
        .chain(scaler)
    {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::UnexpectedEof);
        }
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Format(format!("count {v} too large")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn read_model(mut input: impl Read) -> Result<SvmModel> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut cur = Cursor(&bytes);
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("not a GSVM model (bad magic)".into()));
    }
    let version = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!("unsupported GSVM version {version}")));
    }
    let (nc, ns, d, standardized) = (cur.u64()?, cur.u64()?, cur.u64()?, cur.u64()?);
    let gc = cur.f64s(2)?;
    let ids: Vec<usize> = (0..nc + ns).map(|_| cur.u64()).collect::<Result<_>>()?;
    let sv = cur.f64s(ns * d)?;
    let coef = cur.f64s(nc * ns)?;
    let rho = cur.f64s(nc)?;
    let kkt = cur.f64s(nc)?;
    let scaler = if standardized == 1 {
        Some(Standardizer {
            mean: cur.f64s(d)?,
            std: cur.f64s(d)?,
        })
    } else {
        None
    };
    if !cur.0.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", cur.0.len())));
    }
    Ok(SvmModel {
        gamma: gc[0],
        c: gc[1],
        classes: ids[..nc].to_vec(),
        support_indices: ids[nc..].to_vec(),
        support_vectors: if d == 0 {
            vec![Vec::new(); ns]
        } else {
            sv.chunks(d).map(<[f64]>::to_vec).collect()
        },
        coef: if ns == 0 {
            vec![Vec::new(); nc]
        } else {
            coef.chunks(ns).map(<[f64]>::to_vec).collect()
        },
        rho,
        scaler,
        kkt_violation: kkt,
    })
}

pub fn save_model(model: &SvmModel, path: impl AsRef<Path>) -> Result<()> {
    let p = path.as_ref();
    let f = File::create(p).map_err(|e| Error::io(p, e))?;
    write_model(model, BufWriter::new(f)).map_err(|e| Error::io(p, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SvmModel> {
    let p = path.as_ref();
    let f = File::open(p).map_err(|e| Error::io(p, e))?;
    read_model(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::ColumnLabel;
    use crate::scattering::Path as ScatterPath;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        let d = rows.first().map_or(0, Vec::len);
        let manifest = (0..d)
            .map(|j| ColumnLabel {
                signal: j,
                path: ScatterPath::empty(),
                point: None,
            })
            .collect();
        FeatureMatrix::new(rows, manifest).unwrap()
    }

    fn accuracy(a: &[usize], b: &[usize]) -> f64 {
        a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
    }

    #[test]
    fn two_points() {
        let x = matrix(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        for gamma in [0.01, 1.0, 100.0] {
            let m = svm_train(&x, &[0, 1], &SvmParams::new(gamma, 1.0).with_standardize(false)).unwrap();
            assert_eq!(svm_predict(&m, &x).unwrap(), vec![0, 1]);
        }
    }

    #[test]
    fn xor() {
        let x = matrix(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]);
        let y = [0, 0, 1, 1];
        let m = svm_train(&x, &y, &SvmParams::new(1.0, 10.0).with_standardize(false)).unwrap();
        assert_eq!(svm_predict(&m, &x).unwrap(), y);
        for (a, v) in m.coef.iter().zip(&m.kkt_violation) {
            assert!(a.iter().all(|a| a.abs() <= 10.0 + 1e-12));
            assert!(*v <= 1e-3);
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let x = matrix(vec![vec![0.0], vec![1.0]]);
        assert!(matches!(
            svm_train(&x, &[2, 2], &SvmParams::new(1.0, 1.0)),
            Err(Error::Training(_))
        ));
        assert!(svm_train(&x, &[0], &SvmParams::new(1.0, 1.0)).is_err());
        assert!(svm_train(&x, &[0, 1], &SvmParams::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn random_labels_overfit_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| (0..5).map(|_| rng.random::<f64>()).collect())
            .collect();
        let labels: Vec<usize> = (0..120).map(|_| rng.random_range(0..3)).collect();
        let train = matrix(rows[..80].to_vec());
        let test = matrix(rows[80..].to_vec());
        let m = svm_train(&train, &labels[..80], &SvmParams::new(0.5, 100.0)).unwrap();
        let tr = accuracy(&svm_predict(&m, &train).unwrap(), &labels[..80]);
        let te = accuracy(&svm_predict(&m, &test).unwrap(), &labels[80..]);
        assert!(tr >= te, "{tr} < {te}");
    }

    #[test]
    fn joint_rescaling_leaves_predictions_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<usize> = rows
            .iter()
            .map(|r| usize::from(r[0] + r[1] > 1.0) + usize::from(r[2] > 0.7))
            .collect();
        let s = 7.0;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| x * s).collect()).collect();
        let a = svm_train(
            &matrix(rows.clone()),
            &labels,
            &SvmParams::new(2.0, 10.0).with_standardize(false),
        )
        .unwrap();
        let b = svm_train(
            &matrix(scaled.clone()),
            &labels,
            &SvmParams::new(2.0 / (s * s), 10.0).with_standardize(false),
        )
        .unwrap();
        assert_eq!(
            svm_predict(&a, &matrix(rows)).unwrap(),
            svm_predict(&b, &matrix(scaled)).unwrap()
        );
    }

    #[test]
    fn standardization_uses_training_statistics() {
        let train = matrix(vec![vec![0.0, 10.0], vec![2.0, 30.0], vec![4.0, 20.0], vec![6.0, 40.0]]);
        let m = svm_train(&train, &[0, 0, 1, 1], &SvmParams::new(0.5, 10.0)).unwrap();
        let s = m.scaler.as_ref().unwrap();
        assert_eq!(s.mean, vec![3.0, 25.0]);
        assert_eq!(*s, Standardizer::fit(train.rows()));
        let test = matrix(vec![vec![100.0, -5.0]]);
        let manual: Vec<f64> = {
            let x = s.transform(&test.rows()[0]);
            m.support_vectors
                .iter()
                .map(|v| (-0.5 * sq_dist(v, &x)).exp())
                .collect()
        };
        let d = m.decision_values(&test).unwrap();
        let expect = m.coef[0].iter().zip(&manual).map(|(a, k)| a * k).sum::<f64>() - m.rho[0];
        assert!((d[0][0] - expect).abs() <= 1e-12);
    }

    #[test]
    fn ties_go_to_smaller_class() {
        assert_eq!(argmax(&[1.0, 1.0, 0.5]), 0);
        assert_eq!(argmax(&[0.0, 2.0, 2.0]), 1);
        let m = SvmModel {
            gamma: 1.0,
            c: 1.0,
            classes: vec![3, 5],
            support_indices: vec![],
            support_vectors: vec![],
            coef: vec![vec![], vec![]],
            rho: vec![0.0, 0.0],
            scaler: None,
            kkt_violation: vec![0.0, 0.0],
        };
        assert_eq!(svm_predict(&m, &matrix(vec![vec![1.0]])).unwrap(), vec![3]);
    }

    #[test]
    fn model_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[0] > 0.5) * 2).collect();
        for standardize in [true, false] {
            let m = svm_train(
                &matrix(rows.clone()),
                &labels,
                &SvmParams::new(1.0, 5.0).with_standardize(standardize),
            )
            .unwrap();
            let mut buf = Vec::new();
            write_model(&m, &mut buf).unwrap();
            assert_eq!(&buf[..4], b"GSVM");
            assert_eq!(read_model(&buf[..]).unwrap(), m);
            assert!(matches!(read_model(&buf[..buf.len() - 1]), Err(Error::UnexpectedEof)));
            buf[0] = b'X';
            assert!(read_model(&buf[..]).is_err());
        }
        let dir = tempfile::tempdir().unwrap();
        let m = svm_train(&matrix(rows.clone()), &labels, &SvmParams::new(1.0, 5.0)).unwrap();
        save_model(&m, dir.path().join("m.gsvm")).unwrap();
        assert_eq!(load_model(dir.path().join("m.gsvm")).unwrap(), m);
    }
}
