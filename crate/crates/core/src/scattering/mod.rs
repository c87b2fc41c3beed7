//! The scattering cascade `U[j_1, …, j_m] f = |…||f ∗ ψ_{j_1}| ∗ ψ_{j_2}| … ∗ ψ_{j_m}|`,
//! its windowed output `S_J[p] f = A_J U[p] f` and the non-windowed
//! `S̄ f(p) = ‖U[p] f‖₁`.
//!
//! Both transforms run layer by layer: the Fourier coefficients of each
//! `U[p]` are computed once and reused for the low-pass and for every
//! next-layer wavelet.

mod probes;

use std::fmt::{self, Write as _};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{FilterBank, SpectralWindow};
use crate::spectral::{l1_norm, MassMatrix, SpectralBasis};

pub use probes::{
    commutator_norm_estimate, diffeo_stability_probe, isometry_invariance_curve, transported_signal_probe, LinearMap,
    Transform, WarpFamily, WarpOperator,
};

pub const DEFAULT_PATH_CAP: u64 = 1_000_000;

/// A scattering path `(j_1, …, j_m)`; the empty path is `∅`. Paths order
/// lexicographically, so `∅` comes first and every prefix precedes its
/// extensions.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(Vec<i32>);

impl Path {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new(scales: Vec<i32>) -> Self {
        Self(scales)
    }

    pub fn scales(&self) -> &[i32] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> Option<i32> {
        self.0.last().copied()
    }

    pub fn extended(&self, j: i32) -> Self {
        let mut s = self.0.clone();
        s.push(j);
        Self(s)
    }
}

/// `-` for `∅`, otherwise the scales joined by `|`.
impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("|")?;
            }
            write!(f, "{j}")?;
        }
        Ok(())
    }
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" {
            return Ok(Self::empty());
        }
        s.split('|')
            .map(|t| t.trim().parse::<i32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Self)
            .map_err(|e| Error::Config(format!("bad path {s:?}: {e}")))
    }
}

/// Which scale sequences are admissible.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathRule {
    /// Every sequence of scales in range.
    #[default]
    All,
    /// Only `j_1 ≤ j_2 ≤ …`: each layer is no finer than the previous one.
    NonincreasingFrequency,
}

impl PathRule {
    fn admits(self, path: &Path, j: i32) -> bool {
        match self {
            Self::All => true,
            Self::NonincreasingFrequency => path.last().is_none_or(|l| j >= l),
        }
    }
}

impl FromStr for PathRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Self::All),
            "nonincreasing-frequency" => Ok(Self::NonincreasingFrequency),
            _ => Err(Error::Config(format!(
                "unknown path rule {s:?}; expected \"all\" or \"nonincreasing-frequency\""
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringConfig {
    /// Low-pass scale `J` (diffusion time `2^J`).
    #[serde(rename = "J")]
    pub j_max: i32,
    /// Depth `L`.
    #[serde(rename = "L")]
    pub depth: usize,
    pub j_min: i32,
    /// Number of eigenpairs.
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default)]
    pub window: SpectralWindow,
    #[serde(default)]
    pub path_rule: PathRule,
    #[serde(default = "default_path_cap")]
    pub path_cap: u64,
}

fn default_path_cap() -> u64 {
    DEFAULT_PATH_CAP
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self {
            j_max: 0,
            depth: 2,
            j_min: -8,
            k: 512,
            window: SpectralWindow::Exp,
            path_rule: PathRule::All,
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

impl ScatteringConfig {
    pub fn num_scales(&self) -> usize {
        (self.j_max - self.j_min + 1).max(0) as usize
    }

    /// Number of admissible paths of depth at most `L`.
    pub fn path_count(&self) -> u128 {
        let s = self.num_scales() as u128;
        let mut total: u128 = 0;
        for m in 0..=self.depth as u128 {
            let layer = match self.path_rule {
                PathRule::All => s.checked_pow(m as u32).unwrap_or(u128::MAX),
                // Multisets of size m from s scales: C(s + m − 1, m).
                PathRule::NonincreasingFrequency => (0..m).fold(1u128, |c, i| c.saturating_mul(s + i) / (i + 1)),
            };
            total = total.saturating_add(layer);
        }
        total
    }

    pub fn validate(&self) -> Result<()> {
        if self.j_min > self.j_max {
            return Err(Error::Config(format!(
                "j_min = {} exceeds J = {}",
                self.j_min, self.j_max
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("K must be at least 1".into()));
        }
        self.window.validate()?;
        let count = self.path_count();
        if count > self.path_cap as u128 {
            return Err(Error::PathCapExceeded {
                count,
                cap: self.path_cap as u128,
            });
        }
        Ok(())
    }

    /// All admissible paths in lexicographic order.
    pub fn paths(&self) -> Result<Vec<Path>> {
        self.validate()?;
        let mut out = vec![Path::empty()];
        let mut layer = vec![Path::empty()];
        for _ in 0..self.depth {
            let mut next = Vec::new();
            for p in &layer {
                for j in self.j_min..=self.j_max {
                    if self.path_rule.admits(p, j) {
                        next.push(p.extended(j));
                    }
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out.sort();
        Ok(out)
    }

    /// Filter bank for this configuration against `basis`.
    pub fn filterbank(&self, basis: &SpectralBasis) -> Result<FilterBank> {
        FilterBank::build(&self.window, self.j_max, self.j_min, basis.eigenvalues())
    }

    fn check_against(&self, basis: &SpectralBasis, fb: &FilterBank) -> Result<()> {
        self.validate()?;
        if fb.j_max() != self.j_max || fb.j_min() != self.j_min || fb.window() != &self.window {
            return Err(Error::Config(format!(
                "filter bank (J={}, j_min={}, {}) does not match the configuration (J={}, j_min={}, {})",
                fb.j_max(),
                fb.j_min(),
                fb.window().name(),
                self.j_max,
                self.j_min,
                self.window.name()
            )));
        }
        if basis.len() != self.k || fb.len() != self.k {
            return Err(Error::Config(format!(
                "configuration expects K = {} but the basis has {} eigenpairs and the filter bank {}",
                self.k,
                basis.len(),
                fb.len()
            )));
        }
        Ok(())
    }

    /// Copy with depth `L` replaced.
    pub fn with_depth(&self, depth: usize) -> Self {
        Self { depth, ..self.clone() }
    }

    /// Copy with `J` replaced.
    pub fn with_j_max(&self, j_max: i32) -> Self {
        Self { j_max, ..self.clone() }
    }
}

/// `S_J^L f`: one vertex function per path.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowedCoefficients {
    pub config: ScatteringConfig,
    paths: Vec<Path>,
    values: Vec<Vec<f64>>,
}

/// `S̄^L f`: one scalar per path.
#[derive(Clone, Debug, PartialEq)]
pub struct NonWindowedCoefficients {
    pub config: ScatteringConfig,
    paths: Vec<Path>,
    values: Vec<f64>,
}

impl WindowedCoefficients {
    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn get(&self, path: &Path) -> Option<&[f64]> {
        self.paths.binary_search(path).ok().map(|i| self.values[i].as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Path, &[f64])> {
        self.paths.iter().zip(self.values.iter().map(Vec::as_slice))
    }

    /// Zero coefficients on the same path set, i.e. the transform of `f = 0`.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            paths: self.paths.clone(),
            values: self.values.iter().map(|v| vec![0.0; v.len()]).collect(),
        }
    }

    /// Keeps the paths of depth at most `depth`, which is exactly the
    /// depth-`depth` transform.
    pub fn restrict_depth(&self, depth: usize) -> Self {
        let (paths, values) = self
            .iter()
            .filter(|(p, _)| p.depth() <= depth)
            .map(|(p, v)| (p.clone(), v.to_vec()))
            .unzip();
        Self {
            config: self.config.with_depth(depth.min(self.config.depth)),
            paths,
            values,
        }
    }

    /// `(Σ_p ‖a_p − b_p‖₂²)^{1/2}` with mass-weighted norms.
    pub fn distance(&self, other: &Self, mass: &MassMatrix) -> Result<f64> {
        if self.paths != other.paths {
            return Err(Error::PathMismatch);
        }
        let mut total = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            if a.len() != mass.len() || b.len() != mass.len() {
                return Err(Error::Dimension(
                    "coefficient length differs from the mass matrix".into(),
                ));
            }
            total += a
                .iter()
                .zip(b)
                .zip(mass.diag())
                .map(|((x, y), m)| m * (x - y) * (x - y))
                .sum::<f64>();
        }
        Ok(total.sqrt())
    }

    /// `(Σ_p ‖a_p‖₂²)^{1/2}`.
    pub fn norm(&self, mass: &MassMatrix) -> f64 {
        self.values.iter().map(|v| mass.inner(v, v)).sum::<f64>().sqrt()
    }

    /// One row per path: the path label, then the vertex values.
    pub fn to_csv(&self) -> String {
        let n = self.values.first().map_or(0, Vec::len);
        let mut s = String::from("path");
        for i in 0..n {
            write!(s, ",v{i}").expect("writing to a String");
        }
        s.push('\n');
        for (p, v) in self.iter() {
            write!(s, "{p}").expect("writing to a String");
            for x in v {
                write!(s, ",{x:.17e}").expect("writing to a String");
            }
            s.push('\n');
        }
        s
    }
}

impl NonWindowedCoefficients {
    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn get(&self, path: &Path) -> Option<f64> {
        self.paths.binary_search(path).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Path, f64)> {
        self.paths.iter().zip(self.values.iter().copied())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            paths: self.paths.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn restrict_depth(&self, depth: usize) -> Self {
        let (paths, values) = self
            .iter()
            .filter(|(p, _)| p.depth() <= depth)
            .map(|(p, v)| (p.clone(), v))
            .unzip();
        Self {
            config: self.config.with_depth(depth.min(self.config.depth)),
            paths,
            values,
        }
    }

    /// Euclidean distance of the coefficient vectors.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.paths != other.paths {
            return Err(Error::PathMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// `‖S̄ f‖₂`.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("path,value\n");
        for (p, v) in self.iter() {
            writeln!(s, "{p},{v:.17e}").expect("writing to a String");
        }
        s
    }
}

/// JSON echo of the configuration that produced a coefficient file.
pub fn config_json(config: &ScatteringConfig) -> String {
    serde_json::to_string_pretty(config).expect("configuration serializes")
}

/// `U[p] f` evaluated directly along one path.
pub fn u_path(basis: &SpectralBasis, fb: &FilterBank, f: &[f64], path: &Path) -> Result<Vec<f64>> {
    check_signal(basis, fb, f)?;
    let mut u = f.to_vec();
    for &j in path.scales() {
        let psi = fb.wavelet(j)?;
        u = modulus(filter(basis, psi, &basis.fourier(&u)));
    }
    Ok(u)
}

fn check_signal(basis: &SpectralBasis, fb: &FilterBank, f: &[f64]) -> Result<()> {
    if f.len() != basis.num_vertices() {
        return Err(Error::Dimension(format!(
            "signal has {} entries, mesh has {} vertices",
            f.len(),
            basis.num_vertices()
        )));
    }
    if fb.len() != basis.len() {
        return Err(Error::Dimension(format!(
            "filter bank has {} coefficients, basis has {}",
            fb.len(),
            basis.len()
        )));
    }
    Ok(())
}

fn filter(basis: &SpectralBasis, hhat: &[f64], coeffs: &[f64]) -> Vec<f64> {
    let c: Vec<f64> = coeffs.iter().zip(hhat).map(|(a, h)| a * h).collect();
    basis.synthesize(&c)
}

fn modulus(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.abs());
    v
}

/// What each visited `U[p]` contributes to the output.
trait Sink: Send + Sync {
    type Item: Send;
    fn emit(&self, basis: &SpectralBasis, fb: &FilterBank, u: &[f64], coeffs: &[f64]) -> Self::Item;
}

struct LowpassSink;

impl Sink for LowpassSink {
    type Item = Vec<f64>;
    fn emit(&self, basis: &SpectralBasis, fb: &FilterBank, _u: &[f64], coeffs: &[f64]) -> Vec<f64> {
        filter(basis, fb.lowpass(), coeffs)
    }
}

struct L1Sink;

impl Sink for L1Sink {
    type Item = f64;
    fn emit(&self, basis: &SpectralBasis, _fb: &FilterBank, u: &[f64], _coeffs: &[f64]) -> f64 {
        l1_norm(basis.mass(), u)
    }
}

/// Runs the cascade to depth `L`, emitting one item per admissible path in
/// lexicographic order. Paths within a layer are processed in parallel.
fn cascade<S: Sink>(
    basis: &SpectralBasis,
    fb: &FilterBank,
    f: &[f64],
    config: &ScatteringConfig,
    sink: &S,
) -> Result<(Vec<Path>, Vec<S::Item>)> {
    config.check_against(basis, fb)?;
    check_signal(basis, fb, f)?;
    let mut out: Vec<(Path, S::Item)> = Vec::new();
    let mut layer: Vec<(Path, Vec<f64>)> = vec![(Path::empty(), f.to_vec())];
    for depth in 0..=config.depth {
        let last = depth == config.depth;
        let results: Vec<(Path, S::Item, Vec<(Path, Vec<f64>)>)> = layer
            .into_par_iter()
            .map(|(path, u)| {
                let coeffs = basis.fourier(&u);
                let item = sink.emit(basis, fb, &u, &coeffs);
                let mut children = Vec::new();
                if !last {
                    for (j, psi) in fb.wavelets() {
                        if config.path_rule.admits(&path, j) {
                            children.push((path.extended(j), modulus(filter(basis, psi, &coeffs))));
                        }
                    }
                }
                (path, item, children)
            })
            .collect();
        layer = Vec::new();
        for (path, item, children) in results {
            out.push((path, item));
            layer.extend(children);
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out.into_iter().unzip())
}

/// `S_J^L f`.
pub fn scatter_windowed(
    basis: &SpectralBasis,
    fb: &FilterBank,
    f: &[f64],
    config: &ScatteringConfig,
) -> Result<WindowedCoefficients> {
    let (paths, values) = cascade(basis, fb, f, config, &LowpassSink)?;
    Ok(WindowedCoefficients {
        config: config.clone(),
        paths,
        values,
    })
}

/// `S̄^L f`, with `S̄ f(∅) = ‖f‖₁`.
pub fn scatter_nonwindowed(
    basis: &SpectralBasis,
    fb: &FilterBank,
    f: &[f64],
    config: &ScatteringConfig,
) -> Result<NonWindowedCoefficients> {
    let (paths, values) = cascade(basis, fb, f, config, &L1Sink)?;
    Ok(NonWindowedCoefficients {
        config: config.clone(),
        paths,
        values,
    })
}

/// Signals per block in the batched transforms.
pub const BATCH_SIZE: usize = 64;

/// Fourier coefficients `Φᵀ M U` of every column of `u`.
fn fourier_block(basis: &SpectralBasis, u: &DMatrix<f64>) -> DMatrix<f64> {
    let mut mu = u.clone();
    for (mut row, m) in mu.row_iter_mut().zip(basis.mass().diag()) {
        row *= *m;
    }
    basis.eigenvectors().tr_mul(&mu)
}

/// `Φ (ĥ ⊙ C)` for every column of `coeffs`.
fn filter_block(basis: &SpectralBasis, hhat: &[f64], coeffs: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = coeffs.clone();
    for (mut row, h) in c.row_iter_mut().zip(hhat) {
        row *= *h;
    }
    basis.eigenvectors() * c
}

/// The cascade for a block of signals at once, as matrix products.
/// `emit` maps `(U[p], Fourier coefficients)` to one item per column.
fn cascade_block<T>(
    basis: &SpectralBasis,
    fb: &FilterBank,
    signals: &[Vec<f64>],
    config: &ScatteringConfig,
    emit: &dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> Vec<T>,
) -> (Vec<Path>, Vec<Vec<T>>) {
    let n = basis.num_vertices();
    let u0 = DMatrix::from_fn(n, signals.len(), |i, s| signals[s][i]);
    let mut out: Vec<(Path, Vec<T>)> = Vec::new();
    let mut layer = vec![(Path::empty(), u0)];
    for depth in 0..=config.depth {
        let mut next = Vec::new();
        for (path, u) in layer {
            let coeffs = fourier_block(basis, &u);
            if depth < config.depth {
                for (j, psi) in fb.wavelets() {
                    if config.path_rule.admits(&path, j) {
                        next.push((path.extended(j), filter_block(basis, psi, &coeffs).abs()));
                    }
                }
            }
            out.push((path, emit(&u, &coeffs)));
        }
        layer = next;
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    let paths: Vec<Path> = out.iter().map(|(p, _)| p.clone()).collect();
    let mut per_signal: Vec<Vec<T>> = (0..signals.len()).map(|_| Vec::with_capacity(paths.len())).collect();
    for (_, items) in out {
        for (s, item) in items.into_iter().enumerate() {
            per_signal[s].push(item);
        }
    }
    (paths, per_signal)
}

fn run_batches<T: Send>(
    basis: &SpectralBasis,
    fb: &FilterBank,
    signals: &[Vec<f64>],
    config: &ScatteringConfig,
    emit: &(dyn Fn(&DMatrix<f64>, &DMatrix<f64>) -> Vec<T> + Sync),
) -> Result<(Vec<Path>, Vec<Vec<T>>)> {
    config.check_against(basis, fb)?;
    for f in signals {
        check_signal(basis, fb, f)?;
    }
    let blocks: Vec<(Vec<Path>, Vec<Vec<T>>)> = signals
        .par_chunks(BATCH_SIZE)
        .map(|chunk| cascade_block(basis, fb, chunk, config, emit))
        .collect();
    let paths = match blocks.first() {
        Some((p, _)) => p.clone(),
        None => config.paths()?,
    };
    Ok((paths, blocks.into_iter().flat_map(|(_, v)| v).collect()))
}

/// [`scatter_windowed`] for many signals, computed blockwise with matrix
/// products. Agrees with the single-signal transform to rounding.
pub fn scatter_windowed_batch(
    basis: &SpectralBasis,
    fb: &FilterBank,
    signals: &[Vec<f64>],
    config: &ScatteringConfig,
) -> Result<Vec<WindowedCoefficients>> {
    let emit = |_: &DMatrix<f64>, c: &DMatrix<f64>| -> Vec<Vec<f64>> {
        let low = filter_block(basis, fb.lowpass(), c);
        low.column_iter().map(|col| col.iter().copied().collect()).collect()
    };
    let (paths, values) = run_batches(basis, fb, signals, config, &emit)?;
    Ok(values
        .into_iter()
        .map(|values| WindowedCoefficients {
            config: config.clone(),
            paths: paths.clone(),
            values,
        })
        .collect())
}

/// [`scatter_nonwindowed`] for many signals.
pub fn scatter_nonwindowed_batch(
    basis: &SpectralBasis,
    fb: &FilterBank,
    signals: &[Vec<f64>],
    config: &ScatteringConfig,
) -> Result<Vec<NonWindowedCoefficients>> {
    let emit = |u: &DMatrix<f64>, _: &DMatrix<f64>| -> Vec<f64> {
        u.column_iter()
            .map(|col| col.iter().zip(basis.mass().diag()).map(|(x, m)| x.abs() * m).sum())
            .collect()
    };
    let (paths, values) = run_batches(basis, fb, signals, config, &emit)?;
    Ok(values
        .into_iter()
        .map(|values| NonWindowedCoefficients {
            config: config.clone(),
            paths: paths.clone(),
            values,
        })
        .collect())
}

/// Total `Σ_{|p| ≤ L} ‖U[p] f‖₂²`.
pub fn u_energy(basis: &SpectralBasis, fb: &FilterBank, f: &[f64], config: &ScatteringConfig) -> Result<f64> {
    struct EnergySink;
    impl Sink for EnergySink {
        type Item = f64;
        fn emit(&self, basis: &SpectralBasis, _fb: &FilterBank, u: &[f64], _coeffs: &[f64]) -> f64 {
            basis.mass().inner(u, u)
        }
    }
    let (_, values) = cascade(basis, fb, f, config, &EnergySink)?;
    Ok(values.iter().sum())
}
