//! End-to-end runs: the scattering run configuration and the two
//! classification demos (synthetic shapes, spherical digits).

use std::path::{Path as FsPath, PathBuf};

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    assemble_features, farthest_point_sample, nested_cv, Coefficients, CvPlan, CvReport, FeatureMatrix, FeatureRow,
};
use crate::datasets::{
    coordinate_signals, load_idx, project_set, random_rotations, synthetic_shapes, ShapeClass, ShapeManifest,
};
use crate::error::{Error, Result};
use crate::filterbank::SpectralWindow;
use crate::mesh::icosphere;
use crate::scattering::{
    scatter_nonwindowed_batch, scatter_windowed_batch, PathRule, ScatteringConfig, BATCH_SIZE, DEFAULT_PATH_CAP,
};
use crate::spectral::SpectralBasis;

/// Settings of a `scatter` run, read from JSON. Every field is optional;
/// command-line flags override file values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<i32>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_min: Option<i32>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<SpectralWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_rule: Option<PathRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonwindowed: Option<bool>,
    /// Basis cache (GSB1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<PathBuf>,
    /// Signal CSV: one row per vertex, one column per signal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("run config: {e}")))
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Fills unset fields from `other`.
    pub fn or(self, other: RunConfig) -> Self {
        Self {
            j_max: self.j_max.or(other.j_max),
            depth: self.depth.or(other.depth),
            j_min: self.j_min.or(other.j_min),
            k: self.k.or(other.k),
            window: self.window.or(other.window),
            path_rule: self.path_rule.or(other.path_rule),
            path_cap: self.path_cap.or(other.path_cap),
            nonwindowed: self.nonwindowed.or(other.nonwindowed),
            basis: self.basis.or(other.basis),
            signal: self.signal.or(other.signal),
            output: self.output.or(other.output),
            seed: self.seed.or(other.seed),
            threads: self.threads.or(other.threads),
        }
    }

    /// Checks that every referenced input exists.
    pub fn check_inputs(&self) -> Result<()> {
        for p in [&self.basis, &self.signal].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        Ok(())
    }

    /// The scattering settings, with `K` defaulting to the eigenpairs
    /// available and `j_min` to `min(−8, J)`.
    pub fn scattering(&self, available: usize) -> Result<ScatteringConfig> {
        let j_max = self.j_max.unwrap_or(0);
        let k = self.k.unwrap_or(available);
        if k > available {
            return Err(Error::Config(format!(
                "K = {k} exceeds the {available} eigenpairs in the basis"
            )));
        }
        let config = ScatteringConfig {
            j_max,
            depth: self.depth.unwrap_or(2),
            j_min: self.j_min.unwrap_or(j_max.min(-8)),
            k,
            window: self.window.clone().unwrap_or_default(),
            path_rule: self.path_rule.unwrap_or_default(),
            path_cap: self.path_cap.unwrap_or(DEFAULT_PATH_CAP),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Parses a signal CSV: one row per vertex, one column per signal, with
/// an optional header row of column names.
pub fn parse_signal_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .peekable();
    let mut names = None;
    if let Some((_, first)) = lines.peek() {
        if first.split(',').any(|c| c.trim().parse::<f64>().is_err()) {
            names = Some(first.split(',').map(|c| c.trim().to_string()).collect::<Vec<_>>());
            lines.next();
        }
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines {
        let row = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if columns.is_empty() {
            columns = vec![Vec::new(); row.len()];
        }
        if row.len() != columns.len() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected {} values, found {}", columns.len(), row.len()),
            });
        }
        for (c, v) in columns.iter_mut().zip(row) {
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "non-finite value".into(),
                });
            }
            c.push(v);
        }
    }
    if columns.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "no signal values".into(),
        });
    }
    let names = match names {
        Some(n) if n.len() == columns.len() => n,
        Some(n) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("header names {} columns, data has {}", n.len(), columns.len()),
            })
        }
        None => (0..columns.len()).map(|i| format!("s{i}")).collect(),
    };
    Ok((names, columns))
}

/// Classification outcome of a demo: the scattering features against the
/// depth-0 baseline on the same folds.
#[derive(Clone, Debug, Serialize)]
pub struct DemoReport {
    pub demo: &'static str,
    pub config: serde_json::Value,
    pub mean_accuracy: f64,
    pub baseline_accuracy: f64,
    pub improved: bool,
    pub scattering: CvReport,
    pub baseline: CvReport,
}

impl DemoReport {
    fn new(demo: &'static str, config: serde_json::Value, scattering: CvReport, baseline: CvReport) -> Self {
        Self {
            demo,
            config,
            mean_accuracy: scattering.mean_accuracy,
            baseline_accuracy: baseline.mean_accuracy,
            improved: scattering.mean_accuracy > baseline.mean_accuracy,
            scattering,
            baseline,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapesDemo {
    pub classes: Vec<ShapeClass>,
    pub per_class: usize,
    /// Largest depth; every depth in `0..=L` is a cross-validation candidate.
    #[serde(rename = "L")]
    pub depth: usize,
    #[serde(rename = "J")]
    pub j_max: i32,
    pub j_min: i32,
    #[serde(rename = "K")]
    pub k: usize,
    /// Rescale every mesh to unit surface area.
    pub unit_area: bool,
    pub seed: u64,
}

impl Default for ShapesDemo {
    fn default() -> Self {
        Self {
            classes: vec![
                ShapeClass::Sphere { radius: 1.0 },
                "torus".parse().expect("known class"),
                "bumpy".parse().expect("known class"),
            ],
            per_class: 10,
            depth: 2,
            j_max: 0,
            j_min: -8,
            k: 512,
            unit_area: true,
            seed: 0,
        }
    }
}

/// Synthetic shape classification. Each mesh is centered (and by default
/// scaled to unit area); its three coordinate functions are the input signals and the
/// non-windowed coefficients of all three form the feature row.
pub fn run_shapes_demo(demo: &ShapesDemo) -> Result<DemoReport> {
    let set = synthetic_shapes(&ShapeManifest::new(demo.classes.clone(), demo.per_class, demo.seed))?;
    let rows = set
        .items
        .par_iter()
        .map(|item| {
            let scaled = if demo.unit_area {
                item.mesh.scaled_to_unit_area()
            } else {
                item.mesh.clone()
            };
            let mesh = scaled.rigid_transform(&Matrix3::identity(), &(-scaled.centroid()));
            let basis = SpectralBasis::from_mesh(&mesh, demo.k.min(mesh.num_vertices()))?;
            let config = ScatteringConfig {
                j_max: demo.j_max,
                depth: demo.depth,
                j_min: demo.j_min,
                k: basis.len(),
                ..Default::default()
            };
            let fb = config.filterbank(&basis)?;
            let coeffs = scatter_nonwindowed_batch(&basis, &fb, &coordinate_signals(&mesh), &config)?;
            coeffs
                .iter()
                .map(|c| assemble_features(Coefficients::NonWindowed(c), None))
                .reduce(|a, b| Ok(a?.concat(b?)))
                .expect("three signals")
        })
        .collect::<Result<Vec<FeatureRow>>>()?;
    let features = FeatureMatrix::from_feature_rows(rows)?;
    let labels = set.labels();
    let plan = CvPlan::mesh_tasks(demo.seed);
    let candidates: Vec<FeatureMatrix> = (0..=demo.depth).map(|d| features.restrict_depth(d)).collect();
    let scattering = nested_cv(&candidates, &labels, &plan)?;
    let baseline = nested_cv(&candidates[..1], &labels, &plan)?;
    let mut config = serde_json::to_value(demo).expect("config serializes");
    config["class_names"] = serde_json::to_value(&set.class_names).expect("names serialize");
    Ok(DemoReport::new("shapes", config, scattering, baseline))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MnistDemo {
    pub images: PathBuf,
    pub labels: PathBuf,
    pub per_class: usize,
    pub rotated: bool,
    #[serde(rename = "J")]
    pub j_max: i32,
    #[serde(rename = "L")]
    pub depth: usize,
    pub j_min: i32,
    /// Farthest-point samples per coefficient function; `4^(1−J)` when
    /// unset.
    pub samples: Option<usize>,
    /// Digit removed before subsetting (6 and 9 coincide under rotation).
    pub drop_digit: Option<u8>,
    pub subdivisions: u32,
    pub seed: u64,
}

impl Default for MnistDemo {
    fn default() -> Self {
        Self {
            images: PathBuf::from("data/mnist5k-images-idx3-ubyte"),
            labels: PathBuf::from("data/mnist5k-labels-idx1-ubyte"),
            per_class: 100,
            rotated: false,
            j_max: -2,
            depth: 2,
            j_min: -8,
            samples: None,
            drop_digit: Some(6),
            subdivisions: 3,
            seed: 0,
        }
    }
}

impl MnistDemo {
    pub fn sample_count(&self) -> usize {
        self.samples
            .unwrap_or_else(|| 4usize.pow((1 - self.j_max).clamp(1, 5) as u32))
    }
}

/// Spherical digit classification: digits are projected onto an
/// icosphere (optionally under random rotations), scattered with the full
/// eigenbasis, and sampled at farthest points. The baseline keeps only the
/// depth-0 coefficients (the averaged low-pass).
pub fn run_mnist_demo(demo: &MnistDemo) -> Result<DemoReport> {
    if demo.per_class == 0 {
        return Err(Error::Config("--per-class must be at least 1".into()));
    }
    let mut set = load_idx(&demo.images, &demo.labels)?;
    if let Some(d) = demo.drop_digit {
        set = set.without_digit(d);
    }
    let set = set.balanced_subset(demo.per_class)?;
    let mesh = icosphere(demo.subdivisions, 1.0)?;
    let rotations = demo.rotated.then(|| random_rotations(set.len(), demo.seed));
    let signals = project_set(&set, &mesh, rotations.as_deref())?;
    let basis = SpectralBasis::from_mesh(&mesh, mesh.num_vertices())?;
    let config = ScatteringConfig {
        j_max: demo.j_max,
        depth: demo.depth,
        j_min: demo.j_min,
        k: basis.len(),
        ..Default::default()
    };
    let fb = config.filterbank(&basis)?;
    let samples = farthest_point_sample(&mesh, demo.sample_count().min(mesh.num_vertices()))?;
    let mut rows = Vec::with_capacity(signals.len());
    for chunk in signals.chunks(BATCH_SIZE * rayon::current_num_threads()) {
        for c in scatter_windowed_batch(&basis, &fb, chunk, &config)? {
            rows.push(assemble_features(Coefficients::Windowed(&c), Some(&samples))?);
        }
    }
    let features = FeatureMatrix::from_feature_rows(rows)?;
    let labels: Vec<usize> = set.labels.iter().map(|&l| l as usize).collect();
    let plan = CvPlan::digit_tasks(demo.seed);
    let scattering = nested_cv(std::slice::from_ref(&features), &labels, &plan)?;
    let baseline = nested_cv(&[features.restrict_depth(0)], &labels, &plan)?;
    let mut config = serde_json::to_value(demo).expect("config serializes");
    config["samples"] = samples.len().into();
    config["K"] = basis.len().into();
    Ok(DemoReport::new("mnist", config, scattering, baseline))
}
