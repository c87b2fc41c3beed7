//! Experimental inputs: IDX raster digits projected onto a sphere, random
//! rotations, coordinate signals, and synthetic labeled shape families.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::off::load_off;
use crate::mesh::{icosphere, torus, Point, TriangleMesh};
use crate::spectral::SpectralBasis;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
pub const DIGIT_SIDE: usize = 28;
pub const DEFAULT_CAP_ANGLE: f64 = std::f64::consts::FRAC_PI_4;
const SPHERE_TOLERANCE: f64 = 1e-6;
const CAP_EDGE_TOLERANCE: f64 = 1e-12;
const MAX_REGENERATIONS: usize = 10;

/// Raster images with one label each; every image is `rows × cols` bytes
/// in row-major order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterSet {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<u8>>,
    pub labels: Vec<u8>,
}

impl RasterSet {
    pub fn new(rows: usize, cols: usize, images: Vec<Vec<u8>>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Format(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(i) = images.iter().position(|im| im.len() != rows * cols) {
            return Err(Error::Dimension(format!("image {i} is not {rows}x{cols}")));
        }
        Ok(Self {
            rows,
            cols,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Drops every sample labeled `digit`.
    pub fn without_digit(&self, digit: u8) -> Self {
        self.filtered(|l| l != digit)
    }

    /// Keeps only samples whose label is in `classes`.
    pub fn with_classes(&self, classes: &[u8]) -> Self {
        self.filtered(|l| classes.contains(&l))
    }

    fn filtered(&self, keep: impl Fn(u8) -> bool) -> Self {
        let (images, labels) = self
            .images
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| keep(l))
            .map(|(im, &l)| (im.clone(), l))
            .unzip();
        Self {
            rows: self.rows,
            cols: self.cols,
            images,
            labels,
        }
    }

    /// The first `per_class` samples of every label, in file order.
    /// Errors when some label has fewer.
    pub fn balanced_subset(&self, per_class: usize) -> Result<Self> {
        let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (im, &l) in self.images.iter().zip(&self.labels) {
            let c = counts.entry(l).or_insert(0);
            if *c < per_class {
                *c += 1;
                images.push(im.clone());
                labels.push(l);
            }
        }
        if let Some((l, c)) = counts.iter().find(|(_, &c)| c < per_class) {
            return Err(Error::Config(format!(
                "label {l} has only {c} samples, {per_class} requested"
            )));
        }
        Self::new(self.rows, self.cols, images, labels)
    }
}

fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::UnexpectedEof,
        _ => Error::Format(e.to_string()),
    })
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact_or_eof(r, &mut b)?;
    Ok(u32::from_be_bytes(b))
}

fn expect_magic(r: &mut impl Read, magic: u32) -> Result<()> {
    let got = read_u32(r)?;
    if got != magic {
        return Err(Error::Format(format!("IDX magic 0x{got:08x}, expected 0x{magic:08x}")));
    }
    Ok(())
}

/// Reads an IDX image file: returns `(rows, cols, images)`.
pub fn read_idx_images(mut r: impl Read) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    expect_magic(&mut r, IDX_IMAGE_MAGIC)?;
    let count = read_u32(&mut r)? as usize;
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let mut images = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let mut im = vec![0u8; rows * cols];
        read_exact_or_eof(&mut r, &mut im)?;
        images.push(im);
    }
    Ok((rows, cols, images))
}

pub fn read_idx_labels(mut r: impl Read) -> Result<Vec<u8>> {
    expect_magic(&mut r, IDX_LABEL_MAGIC)?;
    let count = read_u32(&mut r)? as usize;
    let mut labels = vec![0u8; count];
    read_exact_or_eof(&mut r, &mut labels)?;
    Ok(labels)
}

pub fn write_idx_images(mut w: impl Write, rows: usize, cols: usize, images: &[Vec<u8>]) -> std::io::Result<()> {
    w.write_all(&IDX_IMAGE_MAGIC.to_be_bytes())?;
    for d in [images.len(), rows, cols] {
        w.write_all(&(d as u32).to_be_bytes())?;
    }
    for im in images {
        w.write_all(im)?;
    }
    w.flush()
}

pub fn write_idx_labels(mut w: impl Write, labels: &[u8]) -> std::io::Result<()> {
    w.write_all(&IDX_LABEL_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    w.flush()
}

/// Loads an MNIST-style pair of IDX files (28×28 images, labels 0..=9).
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<RasterSet> {
    let open = |p: &Path| File::open(p).map(BufReader::new).map_err(|e| Error::io(p, e));
    let (rows, cols, ims) = read_idx_images(open(images.as_ref())?)?;
    if rows != DIGIT_SIDE || cols != DIGIT_SIDE {
        return Err(Error::Format(format!(
            "images are {rows}x{cols}, expected {DIGIT_SIDE}x{DIGIT_SIDE}"
        )));
    }
    let labs = read_idx_labels(open(labels.as_ref())?)?;
    if let Some(l) = labs.iter().find(|&&l| l > 9) {
        return Err(Error::Format(format!("label {l} outside 0..=9")));
    }
    RasterSet::new(rows, cols, ims, labs)
}

pub fn save_idx(set: &RasterSet, images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<()> {
    let create = |p: &Path| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e));
    let p = images.as_ref();
    write_idx_images(create(p)?, set.rows, set.cols, &set.images).map_err(|e| Error::io(p, e))?;
    let p = labels.as_ref();
    write_idx_labels(create(p)?, &set.labels).map_err(|e| Error::io(p, e))
}

/// Radius of a mesh whose vertices lie on a sphere about the origin.
pub fn sphere_radius(mesh: &TriangleMesh) -> Result<f64> {
    let norms: Vec<f64> = mesh.vertices().iter().map(|v| v.norm()).collect();
    let r = norms.iter().sum::<f64>() / norms.len() as f64;
    match norms.iter().position(|&n| (n - r).abs() > SPHERE_TOLERANCE * r) {
        Some(i) => Err(Error::InvalidMesh {
            invariant: "sphere",
            detail: format!("vertex {i} at radius {} but mean radius is {r}", norms[i]),
        }),
        None => Ok(r),
    }
}

/// Bilinear sample at fractional pixel `(x, y)` (column, row), clamped.
fn bilinear(image: &[u8], rows: usize, cols: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (cols - 1) as f64);
    let y = y.clamp(0.0, (rows - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(cols - 1), (y0 + 1).min(rows - 1));
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let px = |r: usize, c: usize| f64::from(image[r * cols + c]);
    let top = px(y0, x0) * (1.0 - tx) + px(y0, x1) * tx;
    let bottom = px(y1, x0) * (1.0 - tx) + px(y1, x1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// [`project_to_sphere_with`] on the default `π/4` cap.
pub fn project_to_sphere(
    image: &[u8],
    rows: usize,
    cols: usize,
    mesh: &TriangleMesh,
    rotation: &Matrix3<f64>,
) -> Result<Vec<f64>> {
    project_to_sphere_with(image, rows, cols, mesh, rotation, DEFAULT_CAP_ANGLE)
}

/// Maps the image onto the polar cap of angular radius `cap_angle` by
/// azimuthal-equidistant coordinates (the image square circumscribes the
/// cap disk, x east, y north) and samples it bilinearly at each rotated
/// vertex `rotation · v`. Values are scaled to `[0, 1]`; vertices outside
/// the cap get 0.
pub fn project_to_sphere_with(
    image: &[u8],
    rows: usize,
    cols: usize,
    mesh: &TriangleMesh,
    rotation: &Matrix3<f64>,
    cap_angle: f64,
) -> Result<Vec<f64>> {
    if image.len() != rows * cols || rows < 2 || cols < 2 {
        return Err(Error::Dimension(format!(
            "image has {} bytes, expected {rows}x{cols} with both sides at least 2",
            image.len()
        )));
    }
    if !(cap_angle > 0.0 && cap_angle <= std::f64::consts::PI) {
        return Err(Error::Config(format!("cap angle {cap_angle} outside (0, π]")));
    }
    let radius = sphere_radius(mesh)?;
    Ok(mesh
        .vertices()
        .iter()
        .map(|v| {
            let p = rotation * v / radius;
            let theta = p.z.clamp(-1.0, 1.0).acos();
            if theta > cap_angle * (1.0 + CAP_EDGE_TOLERANCE) {
                return 0.0;
            }
            let rho = p.x.hypot(p.y);
            let (c, s) = if rho > 0.0 { (p.x / rho, p.y / rho) } else { (1.0, 0.0) };
            let u = theta / cap_angle * c;
            let w = theta / cap_angle * s;
            let x = (u + 1.0) * 0.5 * (cols - 1) as f64;
            let y = (1.0 - w) * 0.5 * (rows - 1) as f64;
            bilinear(image, rows, cols, x, y) / 255.0
        })
        .collect())
}

/// Projects every image, rotating image `i` by `rotations[i]` (identity
/// when `rotations` is `None`).
pub fn project_set(set: &RasterSet, mesh: &TriangleMesh, rotations: Option<&[Matrix3<f64>]>) -> Result<Vec<Vec<f64>>> {
    if let Some(r) = rotations {
        if r.len() != set.len() {
            return Err(Error::Dimension(format!(
                "{} rotations for {} images",
                r.len(),
                set.len()
            )));
        }
    }
    set.images
        .par_iter()
        .enumerate()
        .map(|(i, im)| {
            let rot = rotations.map_or_else(Matrix3::identity, |r| r[i]);
            project_to_sphere(im, set.rows, set.cols, mesh, &rot)
        })
        .collect()
}

/// Haar-uniform rotation from a normalized Gaussian quaternion.
pub fn random_rotation(seed: u64) -> Matrix3<f64> {
    rotation_from_rng(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// `count` Haar-random rotations from one seeded stream.
pub fn random_rotations(count: usize, seed: u64) -> Vec<Matrix3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rotation_from_rng(&mut rng)).collect()
}

fn rotation_from_rng(rng: &mut impl Rng) -> Matrix3<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let q = Quaternion::new(q[0], q[1], q[2], q[3]);
        if q.norm() > 1e-6 {
            return UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        }
    }
}

/// The x, y and z coordinate functions of the vertices.
pub fn coordinate_signals(mesh: &TriangleMesh) -> [Vec<f64>; 3] {
    std::array::from_fn(|d| mesh.vertices().iter().map(|v| v[d]).collect())
}

/// Vertex signals on one mesh with class labels.
#[derive(Clone, Debug)]
pub struct LabeledSignalSet {
    pub mesh_name: String,
    pub signals: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub meta: String,
}

impl LabeledSignalSet {
    pub fn new(
        mesh: &TriangleMesh,
        signals: Vec<Vec<f64>>,
        labels: Vec<usize>,
        meta: impl Into<String>,
    ) -> Result<Self> {
        if signals.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} signals but {} labels",
                signals.len(),
                labels.len()
            )));
        }
        let n = mesh.num_vertices();
        if let Some(i) = signals.iter().position(|s| s.len() != n) {
            return Err(Error::Dimension(format!("signal {i} does not have {n} entries")));
        }
        Ok(Self {
            mesh_name: mesh.name().to_string(),
            signals,
            labels,
            meta: meta.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

/// Synthetic shape family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeClass {
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    Bumpy { radius: f64, amplitude: f64, bumps: usize },
}

impl ShapeClass {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sphere { .. } => "sphere",
            Self::Torus { .. } => "torus",
            Self::Bumpy { .. } => "bumpy",
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Self::Sphere { radius } | Self::Bumpy { radius, .. } => *radius,
            Self::Torus { minor, .. } => *minor,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Sphere { radius } => radius > 0.0,
            Self::Torus { major, minor } => minor > 0.0 && major > minor,
            Self::Bumpy {
                radius,
                amplitude,
                bumps,
            } => radius > 0.0 && amplitude.abs() < 0.5 && bumps > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid shape class {self:?}")))
        }
    }
}

impl std::str::FromStr for ShapeClass {
    type Err = Error;

    /// Class names with default parameters.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Self::Sphere { radius: 1.0 }),
            "torus" => Ok(Self::Torus { major: 1.0, minor: 0.4 }),
            "bumpy" => Ok(Self::Bumpy {
                radius: 1.0,
                amplitude: 0.15,
                bumps: 6,
            }),
            other => Err(Error::Config(format!(
                "unknown shape class {other:?} (expected sphere, torus or bumpy)"
            ))),
        }
    }
}

/// Generation settings for [`synthetic_shapes`], also written out as the
/// dataset manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeManifest {
    pub classes: Vec<ShapeClass>,
    pub per_class: usize,
    pub seed: u64,
    /// Upper bound of the per-instance smooth perturbation, relative to
    /// the class scale.
    pub max_perturbation: f64,
    pub sphere_subdivisions: u32,
    pub torus_resolution: [usize; 2],
}

impl ShapeManifest {
    pub fn new(classes: Vec<ShapeClass>, per_class: usize, seed: u64) -> Self {
        Self {
            classes,
            per_class,
            seed,
            max_perturbation: 0.03,
            sphere_subdivisions: 3,
            torus_resolution: [32, 16],
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[derive(Clone, Debug)]
pub struct LabeledMesh {
    pub mesh: TriangleMesh,
    pub label: usize,
}

/// Meshes with class labels; bases are computed on demand.
#[derive(Clone, Debug, Default)]
pub struct LabeledMeshSet {
    pub items: Vec<LabeledMesh>,
    pub class_names: Vec<String>,
}

impl LabeledMeshSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|m| m.label).collect()
    }

    pub fn basis(&self, index: usize, k: usize) -> Result<SpectralBasis> {
        let m = &self.items[index].mesh;
        SpectralBasis::from_mesh(m, k.min(m.num_vertices()))
    }
}

/// Smooth random field on R³: a normalized sum of plane waves.
struct SmoothField {
    waves: Vec<(Point, f64, f64)>,
}

impl SmoothField {
    fn sample(rng: &mut impl Rng, scale: f64) -> Self {
        let waves = (0..4)
            .map(|_| {
                let dir: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
                let freq = rng.random_range(1.0..3.0) / scale;
                let k = Point::from(dir).normalize() * freq;
                (
                    k,
                    rng.random_range(0.0..std::f64::consts::TAU),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        Self { waves }
    }

    /// Value in `[-1, 1]`.
    fn eval(&self, p: &Point) -> f64 {
        let total: f64 = self.waves.iter().map(|(_, _, a)| a.abs()).sum();
        self.waves
            .iter()
            .map(|(k, ph, a)| a * (k.dot(p) + ph).cos())
            .sum::<f64>()
            / total.max(1e-12)
    }
}

fn random_unit(rng: &mut impl Rng) -> Point {
    let d: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
    Point::from(d).normalize()
}

fn shape_instance(class: &ShapeClass, manifest: &ShapeManifest, rng: &mut impl Rng) -> Result<TriangleMesh> {
    let amplitude = rng.random_range(0.0..=manifest.max_perturbation) * class.scale();
    let field = SmoothField::sample(rng, class.scale());
    let base = match *class {
        ShapeClass::Sphere { radius } | ShapeClass::Bumpy { radius, .. } => {
            icosphere(manifest.sphere_subdivisions, radius)?
        }
        ShapeClass::Torus { major, minor } => {
            torus(manifest.torus_resolution[0], manifest.torus_resolution[1], major, minor)?
        }
    };
    let mesh = match *class {
        ShapeClass::Sphere { .. } => base.displaced(|_, v| v + v.normalize() * amplitude * field.eval(v))?,
        ShapeClass::Bumpy {
            radius,
            amplitude: bump,
            bumps,
        } => {
            let centers: Vec<Point> = (0..bumps).map(|_| random_unit(rng)).collect();
            let width = 0.35f64;
            base.displaced(|_, v| {
                let n = v.normalize();
                let b: f64 = centers
                    .iter()
                    .map(|c| {
                        let a = n.dot(c).clamp(-1.0, 1.0).acos();
                        (-(a * a) / (width * width)).exp()
                    })
                    .sum();
                v + n * (radius * bump * b + amplitude * field.eval(v))
            })?
        }
        ShapeClass::Torus { major, .. } => base.displaced(|_, v| {
            let ring = Point::new(v.x, v.y, 0.0);
            let normal = (v - ring.normalize() * major).normalize();
            v + normal * amplitude * field.eval(v)
        })?,
    };
    let rotation = rotation_from_rng(rng);
    Ok(mesh.rigid_transform(&rotation, &Point::zeros()).with_name(class.name()))
}

/// `per_class` randomly perturbed and rigidly rotated meshes per class,
/// labeled by class position. Invalid instances are redrawn up to 10 times.
pub fn synthetic_shapes(manifest: &ShapeManifest) -> Result<LabeledMeshSet> {
    if manifest.classes.is_empty() || manifest.per_class == 0 {
        return Err(Error::Config("need at least one class and one mesh per class".into()));
    }
    if !(0.0..0.5).contains(&manifest.max_perturbation) {
        return Err(Error::Config("max_perturbation must lie in [0, 0.5)".into()));
    }
    for c in &manifest.classes {
        c.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
    let mut items = Vec::with_capacity(manifest.classes.len() * manifest.per_class);
    for (label, class) in manifest.classes.iter().enumerate() {
        for i in 0..manifest.per_class {
            let mut last = None;
            for _ in 0..MAX_REGENERATIONS {
                match shape_instance(class, manifest, &mut rng) {
                    Ok(m) => {
                        last = Some(Ok(m));
                        break;
                    }
                    Err(e) => last = Some(Err(e)),
                }
            }
            let mesh = match last.expect("at least one attempt") {
                Ok(m) => m.with_name(format!("{}_{i:03}", class.name())),
                Err(e) => {
                    return Err(Error::InvalidMesh {
                        invariant: "synthetic instance",
                        detail: format!("{} instance {i} failed {MAX_REGENERATIONS} times: {e}", class.name()),
                    })
                }
            };
            items.push(LabeledMesh { mesh, label });
        }
    }
    Ok(LabeledMeshSet {
        items,
        class_names: manifest.classes.iter().map(|c| c.name().to_string()).collect(),
    })
}

/// Reads `filename,label` rows (an optional header row is skipped) and
/// loads each OFF file from `dir`. Integer labels are used as given;
/// otherwise distinct names map to ids in sorted order.
pub fn load_labeled_meshes(dir: impl AsRef<Path>, labels_csv: impl AsRef<Path>) -> Result<LabeledMeshSet> {
    let path = labels_csv.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (file, label) = line.split_once(',').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected filename,label".into(),
        })?;
        if i == 0 && file.trim() == "filename" {
            continue;
        }
        rows.push((file.trim().to_string(), label.trim().to_string()));
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{} lists no meshes", path.display())));
    }
    let numeric: Option<Vec<usize>> = rows.iter().map(|(_, l)| l.parse().ok()).collect();
    let (labels, class_names) = match numeric {
        Some(ids) => {
            let max = ids.iter().copied().max().unwrap_or(0);
            (ids, (0..=max).map(|i| i.to_string()).collect())
        }
        None => {
            let names: Vec<String> = rows
                .iter()
                .map(|(_, l)| l.clone())
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            let ids = rows
                .iter()
                .map(|(_, l)| names.iter().position(|n| n == l).expect("name collected"))
                .collect();
            (ids, names)
        }
    };
    let items = rows
        .iter()
        .zip(labels)
        .map(|((file, _), label)| {
            Ok(LabeledMesh {
                mesh: load_off(dir.as_ref().join(file))?,
                label,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LabeledMeshSet { items, class_names })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::pullback;
    use crate::spectral::{integrate, lumped_mass};

    fn digit() -> Vec<u8> {
        let mut im = vec![0u8; DIGIT_SIDE * DIGIT_SIDE];
        for r in 4..24 {
            for c in 0..DIGIT_SIDE {
                let d = (c as f64 - 14.0 - (r as f64 - 14.0) * 0.3).abs();
                im[r * DIGIT_SIDE + c] = (255.0 * (1.0 - d / 4.0).max(0.0)) as u8;
            }
        }
        im
    }

    #[test]
    fn idx_round_trip_and_errors() {
        let set = RasterSet::new(28, 28, vec![digit(), vec![7; 784]], vec![3, 9]).unwrap();
        let mut ib = Vec::new();
        let mut lb = Vec::new();
        write_idx_images(&mut ib, 28, 28, &set.images).unwrap();
        write_idx_labels(&mut lb, &set.labels).unwrap();
        assert_eq!(&ib[..4], &[0, 0, 8, 3]);
        let (r, c, ims) = read_idx_images(&ib[..]).unwrap();
        assert_eq!((r, c, ims), (28, 28, set.images.clone()));
        assert_eq!(read_idx_labels(&lb[..]).unwrap(), set.labels);

        let err = read_idx_images(&ib[..ib.len() - 5]).unwrap_err();
        assert_eq!(err.to_string(), "unexpected end of data");
        assert!(matches!(read_idx_labels(&ib[..]), Err(Error::Format(_))));
        assert!(RasterSet::new(28, 28, set.images.clone(), vec![1]).is_err());

        let dir = tempfile::tempdir().unwrap();
        let (pi, pl) = (dir.path().join("i.idx"), dir.path().join("l.idx"));
        save_idx(&set, &pi, &pl).unwrap();
        assert_eq!(load_idx(&pi, &pl).unwrap(), set);
        write_idx_labels(File::create(&pl).unwrap(), &[1]).unwrap();
        assert!(load_idx(&pi, &pl).is_err());
    }

    #[test]
    fn subsets() {
        let set = RasterSet::new(2, 2, vec![vec![0; 4]; 6], vec![0, 1, 6, 0, 1, 6]).unwrap();
        assert_eq!(set.without_digit(6).labels, vec![0, 1, 0, 1]);
        assert_eq!(set.with_classes(&[1]).len(), 2);
        assert_eq!(set.balanced_subset(1).unwrap().labels, vec![0, 1, 6]);
        assert!(set.balanced_subset(3).is_err());
    }

    #[test]
    fn projection_of_blank_and_full_images() {
        let mesh = icosphere(3, 1.0).unwrap();
        let id = Matrix3::identity();
        let zero = project_to_sphere(&[0; 784], 28, 28, &mesh, &id).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let full = project_to_sphere(&[255; 784], 28, 28, &mesh, &id).unwrap();
        for (v, s) in mesh.vertices().iter().zip(&full) {
            let inside = v.z.acos() <= DEFAULT_CAP_ANGLE * (1.0 + 1e-12);
            assert_eq!(*s, if inside { 1.0 } else { 0.0 });
        }
        let area = integrate(&lumped_mass(&mesh), &full);
        let cap = std::f64::consts::TAU * (1.0 - DEFAULT_CAP_ANGLE.cos());
        assert!((area - cap).abs() <= 0.05 * cap, "{area} vs {cap}");
    }

    #[test]
    fn projection_rejects_non_sphere() {
        let mesh = torus(8, 6, 1.0, 0.3).unwrap();
        assert!(project_to_sphere(&[0; 784], 28, 28, &mesh, &Matrix3::identity()).is_err());
    }

    #[test]
    fn rotated_projection_matches_pullback() {
        let mesh = icosphere(4, 1.0).unwrap();
        let img = digit();
        let base = project_to_sphere(&img, 28, 28, &mesh, &Matrix3::identity()).unwrap();
        for seed in 0..3 {
            let rot = random_rotation(seed);
            let direct = project_to_sphere(&img, 28, 28, &mesh, &rot).unwrap();
            let warp: Vec<Point> = mesh.vertices().iter().map(|v| rot * v).collect();
            let pulled = pullback(&mesh, &base, &warp, 0.1).unwrap();
            let rms =
                (direct.iter().zip(&pulled).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / direct.len() as f64).sqrt();
            assert!(rms <= 0.05, "rms {rms}");
        }
    }

    #[test]
    fn random_rotations() {
        let r = random_rotation(5);
        assert_eq!(r, random_rotation(5));
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() <= 1e-12);
        assert!((r.determinant() - 1.0).abs() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mean = (0..n).fold(Point::zeros(), |acc, _| acc + rotation_from_rng(&mut rng).column(0)) / n as f64;
        assert!(mean.abs().max() <= 0.05, "{mean}");
    }

    #[test]
    fn coordinates() {
        let mesh = icosphere(3, 1.0).unwrap();
        let mass = lumped_mass(&mesh);
        let [x, y, z] = coordinate_signals(&mesh);
        for s in [&x, &y, &z] {
            assert!(integrate(&mass, s).abs() / mass.total() <= 1e-6);
        }
        for i in 0..x.len() {
            assert!((x[i] * x[i] + y[i] * y[i] + z[i] * z[i] - 1.0).abs() <= 1e-12);
        }
        let rot = random_rotation(2);
        let moved = coordinate_signals(&mesh.rigid_transform(&rot, &Point::zeros()));
        for i in 0..x.len() {
            let p = rot * Point::new(x[i], y[i], z[i]);
            assert_eq!([moved[0][i], moved[1][i], moved[2][i]], [p.x, p.y, p.z]);
        }
    }

    fn manifest(per_class: usize) -> ShapeManifest {
        let classes = ["sphere", "torus", "bumpy"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        ShapeManifest::new(classes, per_class, 11)
    }

    #[test]
    fn synthetic_shapes_are_balanced_and_reproducible() {
        let m = manifest(10);
        let set = synthetic_shapes(&m).unwrap();
        assert_eq!(set.len(), 30);
        for c in 0..3 {
            assert_eq!(set.labels().iter().filter(|&&l| l == c).count(), 10);
        }
        assert!(set.items.iter().all(|it| it.mesh.validation_report().is_valid()));
        let again = synthetic_shapes(&m).unwrap();
        for (a, b) in set.items.iter().zip(&again.items) {
            assert_eq!(a.mesh.vertices(), b.mesh.vertices());
        }
        let back: ShapeManifest = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn instances_differ_beyond_rigid_motion() {
        let set = synthetic_shapes(&manifest(2)).unwrap();
        let profile = |m: &TriangleMesh| {
            let c = m.centroid();
            let mut d: Vec<f64> = m.vertices().iter().map(|v| (v - c).norm()).collect();
            d.sort_by(f64::total_cmp);
            d
        };
        for class in 0..3 {
            let a = profile(&set.items[2 * class].mesh);
            let b = profile(&set.items[2 * class + 1].mesh);
            let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(gap > 1e-4, "class {class}: {gap}");
        }
    }

    #[test]
    fn perturbed_sphere_spectrum() {
        let mut m = manifest(3);
        m.classes = vec![ShapeClass::Sphere { radius: 1.5 }];
        let set = synthetic_shapes(&m).unwrap();
        for i in 0..set.len() {
            let b = set.basis(i, 4).unwrap();
            let target = 2.0 / 1.5f64.powi(2);
            assert!((b.eigenvalues()[1] - target).abs() <= 0.1 * target);
        }
    }

    #[test]
    fn labeled_off_directory() {
        let dir = tempfile::tempdir().unwrap();
        let set = synthetic_shapes(&manifest(1)).unwrap();
        let mut csv = String::from("filename,label\n");
        for (i, it) in set.items.iter().enumerate() {
            let name = format!("m{i}.off");
            crate::mesh::off::write_off(&it.mesh, dir.path().join(&name)).unwrap();
            csv.push_str(&format!("{name},{}\n", ["b", "a", "c"][i]));
        }
        std::fs::write(dir.path().join("labels.csv"), csv).unwrap();
        let loaded = load_labeled_meshes(dir.path(), dir.path().join("labels.csv")).unwrap();
        assert_eq!(loaded.labels(), vec![1, 0, 2]);
        assert_eq!(loaded.class_names, vec!["a", "b", "c"]);
        assert_eq!(loaded.items[0].mesh.num_vertices(), set.items[0].mesh.num_vertices());
    }
}
