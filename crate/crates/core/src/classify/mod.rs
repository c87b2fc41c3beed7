//! Classification back end: near-equidistant vertex sampling, feature
//! assembly from scattering coefficients, an RBF-kernel SVM and nested
//! cross-validation.

mod cv;
mod svm;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::scattering::{NonWindowedCoefficients, Path, WindowedCoefficients};

pub use cv::{nested_cv, stratified_folds, CvPlan, CvReport, FoldReport};
pub use svm::{
    load_model, read_model, save_model, svm_predict, svm_train, write_model, Standardizer, SvmModel, SvmParams,
};

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest edge-weighted graph distance from `source` to every vertex.
pub fn graph_distances(mesh: &TriangleMesh, source: usize) -> Vec<f64> {
    let v = mesh.vertices();
    let adj = mesh.vertex_neighbors();
    let mut dist = vec![f64::INFINITY; v.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, a)) = heap.pop() {
        if d > dist[a] {
            continue;
        }
        for &b in &adj[a] {
            let nd = d + (v[a] - v[b]).norm();
            if nd < dist[b] {
                dist[b] = nd;
                heap.push(HeapItem(nd, b));
            }
        }
    }
    dist
}

/// Greedy farthest-point sampling under graph distance, starting at vertex
/// 0. Ties go to the lowest vertex index.
pub fn farthest_point_sample(mesh: &TriangleMesh, count: usize) -> Result<Vec<usize>> {
    let n = mesh.num_vertices();
    if count == 0 || count > n {
        return Err(Error::Config(format!("sample count {count} outside 1..={n}")));
    }
    let mut chosen = vec![0usize];
    let mut nearest = graph_distances(mesh, 0);
    if nearest.iter().any(|d| d.is_infinite()) {
        return Err(Error::InvalidMesh {
            invariant: "connected",
            detail: "farthest-point sampling needs a connected mesh".into(),
        });
    }
    while chosen.len() < count {
        let next = (0..n).fold(0, |best, i| if nearest[i] > nearest[best] { i } else { best });
        chosen.push(next);
        for (d, e) in nearest.iter_mut().zip(graph_distances(mesh, next)) {
            *d = d.min(e);
        }
    }
    Ok(chosen)
}

/// What a feature column holds: one path of one input signal, either at a
/// sampled vertex or as a global (non-windowed) value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnLabel {
    pub signal: usize,
    pub path: Path,
    pub point: Option<usize>,
}

impl std::fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.point {
            Some(p) => write!(f, "s{}:{}@{p}", self.signal, self.path),
            None => write!(f, "s{}:{}@global", self.signal, self.path),
        }
    }
}

impl std::str::FromStr for ColumnLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            line: 1,
            message: format!("bad column label {s:?}"),
        };
        let rest = s.strip_prefix('s').ok_or_else(bad)?;
        let (signal, rest) = rest.split_once(':').ok_or_else(bad)?;
        let (path, point) = rest.rsplit_once('@').ok_or_else(bad)?;
        Ok(Self {
            signal: signal.parse().map_err(|_| bad())?,
            path: path.parse().map_err(|_| bad())?,
            point: match point {
                "global" => None,
                p => Some(p.parse().map_err(|_| bad())?),
            },
        })
    }
}

/// Scattering output of either kind.
#[derive(Clone, Copy, Debug)]
pub enum Coefficients<'a> {
    Windowed(&'a WindowedCoefficients),
    NonWindowed(&'a NonWindowedCoefficients),
}

/// One feature row with its column manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub values: Vec<f64>,
    pub manifest: Vec<ColumnLabel>,
}

impl FeatureRow {
    /// Appends `other`, shifting its signal indices past this row's.
    pub fn concat(mut self, other: FeatureRow) -> Self {
        let offset = self.manifest.iter().map(|c| c.signal + 1).max().unwrap_or(0);
        self.values.extend(other.values);
        self.manifest.extend(other.manifest.into_iter().map(|mut c| {
            c.signal += offset;
            c
        }));
        self
    }
}

/// Concatenates coefficients in path order, then ascending sample index.
/// Windowed coefficients use `samples` (every vertex when `None`);
/// non-windowed ones contribute one value per path and ignore `samples`.
pub fn assemble_features(coeffs: Coefficients<'_>, samples: Option<&[usize]>) -> Result<FeatureRow> {
    let mut values = Vec::new();
    let mut manifest = Vec::new();
    match coeffs {
        Coefficients::NonWindowed(c) => {
            for (p, v) in c.iter() {
                values.push(v);
                manifest.push(ColumnLabel {
                    signal: 0,
                    path: p.clone(),
                    point: None,
                });
            }
        }
        Coefficients::Windowed(c) => {
            let n = c.values().first().map_or(0, Vec::len);
            let mut idx: Vec<usize> = samples.map_or_else(|| (0..n).collect(), <[usize]>::to_vec);
            idx.sort_unstable();
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(Error::Dimension(format!("sample index {bad} outside 0..{n}")));
            }
            for (p, v) in c.iter() {
                for &i in &idx {
                    values.push(v[i]);
                    manifest.push(ColumnLabel {
                        signal: 0,
                        path: p.clone(),
                        point: Some(i),
                    });
                }
            }
        }
    }
    Ok(FeatureRow { values, manifest })
}

/// Samples by features; every row follows one column manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<Vec<f64>>,
    manifest: Vec<ColumnLabel>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>, manifest: Vec<ColumnLabel>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != manifest.len() {
                return Err(Error::Dimension(format!(
                    "row {i} has {} columns, manifest has {}",
                    r.len(),
                    manifest.len()
                )));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::Training(format!("non-finite feature at row {i}, column {j}")));
            }
        }
        Ok(Self { rows, manifest })
    }

    /// Stacks rows that share one manifest.
    pub fn from_feature_rows(rows: Vec<FeatureRow>) -> Result<Self> {
        let manifest = rows.first().map(|r| r.manifest.clone()).unwrap_or_default();
        if rows.iter().any(|r| r.manifest != manifest) {
            return Err(Error::Dimension("feature rows have different manifests".into()));
        }
        Self::new(rows.into_iter().map(|r| r.values).collect(), manifest)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn manifest(&self) -> &[ColumnLabel] {
        &self.manifest
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_columns(&self) -> usize {
        self.manifest.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            manifest: self.manifest.clone(),
        }
    }

    /// Keeps the columns whose path has depth at most `depth`.
    pub fn restrict_depth(&self, depth: usize) -> Self {
        let keep: Vec<usize> = (0..self.manifest.len())
            .filter(|&j| self.manifest[j].path.depth() <= depth)
            .collect();
        Self {
            rows: self.rows.iter().map(|r| keep.iter().map(|&j| r[j]).collect()).collect(),
            manifest: keep.iter().map(|&j| self.manifest[j].clone()).collect(),
        }
    }

    /// Manifest as a `# columns` header row, then one CSV row per sample.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# columns");
        for c in &self.manifest {
            write!(s, ",{c}").unwrap();
        }
        s.push('\n');
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or(Error::UnexpectedEof)?;
        let cols = head.strip_prefix("# columns").ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing '# columns' header".into(),
        })?;
        let manifest = cols
            .split(',')
            .skip(1)
            .map(str::parse)
            .collect::<Result<Vec<ColumnLabel>>>()?;
        let rows = lines
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|e| Error::Parse {
                            line: i + 1,
                            message: e.to_string(),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Self::new(rows, manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{icosphere, symmetry_permutations};
    use crate::scattering::{scatter_nonwindowed, scatter_windowed, ScatteringConfig};
    use crate::spectral::SpectralBasis;

    #[test]
    fn sampling_extremes_and_spread() {
        let mesh = icosphere(3, 1.0).unwrap();
        assert_eq!(farthest_point_sample(&mesh, 1).unwrap(), vec![0]);
        let mut all = farthest_point_sample(&mesh, mesh.num_vertices()).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..mesh.num_vertices()).collect::<Vec<_>>());
        assert!(farthest_point_sample(&mesh, 0).is_err());

        let four = farthest_point_sample(&mesh, 4).unwrap();
        let optimum = (-1.0f64 / 3.0).acos();
        for (a, &i) in four.iter().enumerate() {
            let d = graph_distances(&mesh, i);
            for &j in &four[a + 1..] {
                assert!(d[j] >= 0.7 * optimum, "{} < {}", d[j], 0.7 * optimum);
            }
        }
        assert_eq!(four, farthest_point_sample(&mesh, 4).unwrap());
    }

    fn setup() -> (TriangleMesh, SpectralBasis, ScatteringConfig) {
        let mesh = icosphere(3, 1.0).unwrap();
        let basis = SpectralBasis::from_mesh(&mesh, mesh.num_vertices()).unwrap();
        let cfg = ScatteringConfig {
            j_max: 0,
            depth: 2,
            j_min: -4,
            k: mesh.num_vertices(),
            ..Default::default()
        };
        (mesh, basis, cfg)
    }

    #[test]
    fn row_lengths_and_order() {
        let (mesh, basis, cfg) = setup();
        let fb = cfg.filterbank(&basis).unwrap();
        let f: Vec<f64> = mesh.vertices().iter().map(|v| v.z + 0.3 * v.x).collect();
        let nw = scatter_nonwindowed(&basis, &fb, &f, &cfg).unwrap();
        let row = assemble_features(Coefficients::NonWindowed(&nw), None).unwrap();
        assert_eq!(row.values.len(), 31);
        let w = scatter_windowed(&basis, &fb, &f, &cfg).unwrap();
        let samples = farthest_point_sample(&mesh, 64).unwrap();
        let row = assemble_features(Coefficients::Windowed(&w), Some(&samples)).unwrap();
        assert_eq!(row.values.len(), 1984);
        assert_eq!(row.manifest.len(), 1984);
        assert!(row.manifest[0].path.is_empty());
        assert!(row
            .manifest
            .windows(2)
            .all(|p| (&p[0].path, p[0].point) < (&p[1].path, p[1].point)));
        assert!(assemble_features(Coefficients::Windowed(&w), Some(&[10_000])).is_err());
    }

    #[test]
    fn symmetric_input_gives_identical_nonwindowed_row() {
        let (mesh, basis, cfg) = setup();
        let fb = cfg.filterbank(&basis).unwrap();
        let f: Vec<f64> = mesh.vertices().iter().map(|v| (3.0 * v.x).sin() + v.z * v.y).collect();
        let perm = &symmetry_permutations(&mesh, 1e-9)[5];
        let a = assemble_features(
            Coefficients::NonWindowed(&scatter_nonwindowed(&basis, &fb, &f, &cfg).unwrap()),
            None,
        )
        .unwrap();
        let b = assemble_features(
            Coefficients::NonWindowed(&scatter_nonwindowed(&basis, &fb, &perm.apply(&f), &cfg).unwrap()),
            None,
        )
        .unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn matrix_csv_round_trip_and_depth_restriction() {
        let (mesh, basis, cfg) = setup();
        let fb = cfg.filterbank(&basis).unwrap();
        let rows: Vec<FeatureRow> = (0..3)
            .map(|s| {
                let f: Vec<f64> = mesh.vertices().iter().map(|v| v[s] + 0.1).collect();
                let w = scatter_windowed(&basis, &fb, &f, &cfg).unwrap();
                let nw = scatter_nonwindowed(&basis, &fb, &f, &cfg).unwrap();
                assemble_features(Coefficients::Windowed(&w), Some(&[0, 5]))
                    .unwrap()
                    .concat(assemble_features(Coefficients::NonWindowed(&nw), None).unwrap())
            })
            .collect();
        let m = FeatureMatrix::from_feature_rows(rows).unwrap();
        assert_eq!(m.num_columns(), 31 * 2 + 31);
        assert_eq!(m.manifest()[62].signal, 1);
        let back = FeatureMatrix::from_csv(&m.to_csv()).unwrap();
        assert_eq!(back, m);
        assert_eq!(m.restrict_depth(0).num_columns(), 3);
        assert_eq!(m.restrict_depth(1).num_columns(), 3 * 6);
        assert!(FeatureMatrix::new(vec![vec![f64::NAN]], m.manifest()[..1].to_vec()).is_err());
    }
}
