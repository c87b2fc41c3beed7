//! C ABI for geoscatter.
//!
//! Every fallible function returns a [`GsStatus`]; on failure the message is
//! available from [`gs_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Panics never
//! cross the boundary; they surface as `GS_ERR_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use geoscatter::mesh::{icosphere, off::load_off, torus, Point, TriangleMesh};
use geoscatter::scattering::{scatter_nonwindowed, scatter_windowed, ScatteringConfig};
use geoscatter::spectral::{load_basis, save_basis, SpectralBasis};
use geoscatter::Error;

/// Result of a call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    ErrNullPointer = 1,
    ErrIo = 2,
    ErrParse = 3,
    ErrInvalidMesh = 4,
    ErrNumerical = 5,
    ErrConfig = 6,
    ErrDimension = 7,
    ErrPathCap = 8,
    ErrBufferTooSmall = 9,
    ErrPanic = 10,
}

/// A validated triangle mesh.
pub struct GsMesh {
    inner: TriangleMesh,
}

/// Eigenpairs of a mesh Laplacian together with its mass matrix.
pub struct GsBasis {
    inner: SpectralBasis,
}

/// Scattering settings. `k = 0` uses every eigenpair of the basis.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct GsScatterConfig {
    pub j_max: i32,
    pub j_min: i32,
    pub depth: u32,
    pub k: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GsStatus {
    match e {
        Error::Io { .. } => GsStatus::ErrIo,
        Error::Parse { .. } | Error::NonTriangleFace { .. } | Error::Format(_) | Error::UnexpectedEof => {
            GsStatus::ErrParse
        }
        Error::InvalidMesh { .. } | Error::DegenerateAngle { .. } => GsStatus::ErrInvalidMesh,
        Error::EigenNotConverged { .. } | Error::NonMonotoneWindow { .. } => GsStatus::ErrNumerical,
        Error::PathCapExceeded { .. } => GsStatus::ErrPathCap,
        Error::Dimension(_) | Error::PathMismatch => GsStatus::ErrDimension,
        _ => GsStatus::ErrConfig,
    }
}

struct Fail(GsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GsStatus::Ok
        }
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            GsStatus::ErrPanic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(GsStatus::ErrNullPointer, format!("{what} is NULL"))
}

unsafe fn path_arg(path: *const c_char) -> Result<String, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail(GsStatus::ErrConfig, "path is not valid UTF-8".into()))
}

unsafe fn slice_arg<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(values: &[f64], out: *mut f64, capacity: usize, written: *mut usize) -> Result<(), Fail> {
    if !written.is_null() {
        *written = values.len();
    }
    if capacity < values.len() {
        return Err(Fail(
            GsStatus::ErrBufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        if out.is_null() {
            return Err(null("output buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    }
    Ok(())
}

/// Message of the last failed call on this thread, or NULL after a
/// success. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_icosphere(subdivisions: u32, radius: f64, out: *mut *mut GsMesh) -> GsStatus {
    guard(|| {
        let inner = icosphere(subdivisions, radius)?;
        write_handle(out, GsMesh { inner })
    })
}

/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_torus(
    n_major: usize,
    n_minor: usize,
    major_radius: f64,
    minor_radius: f64,
    out: *mut *mut GsMesh,
) -> GsStatus {
    guard(|| {
        let inner = torus(n_major, n_minor, major_radius, minor_radius)?;
        write_handle(out, GsMesh { inner })
    })
}

/// Builds a mesh from `3 * num_vertices` coordinates and `3 * num_faces`
/// vertex indices, validating it.
///
/// # Safety
/// The arrays must hold the stated number of elements.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_from_arrays(
    vertices: *const f64,
    num_vertices: usize,
    faces: *const u32,
    num_faces: usize,
    out: *mut *mut GsMesh,
) -> GsStatus {
    guard(|| {
        let v = slice_arg(vertices, 3 * num_vertices, "vertices")?;
        let f = slice_arg(faces, 3 * num_faces, "faces")?;
        let points = v.chunks_exact(3).map(|c| Point::new(c[0], c[1], c[2])).collect();
        let tris = f
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect();
        let inner = TriangleMesh::new(points, tris, "ffi")?;
        write_handle(out, GsMesh { inner })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_load_off(path: *const c_char, out: *mut *mut GsMesh) -> GsStatus {
    guard(|| {
        let inner = load_off(path_arg(path)?)?;
        write_handle(out, GsMesh { inner })
    })
}

/// Vertex count, or 0 for NULL.
///
/// # Safety
/// `mesh` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_num_vertices(mesh: *const GsMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.num_vertices())
}

/// Face count, or 0 for NULL.
///
/// # Safety
/// `mesh` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_num_faces(mesh: *const GsMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.inner.num_faces())
}

/// Copies the `3 * n_v` vertex coordinates into `out`.
///
/// # Safety
/// `out` must have room for `capacity` doubles; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_vertices(
    mesh: *const GsMesh,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> GsStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let flat: Vec<f64> = m.inner.vertices().iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        copy_out(&flat, out, capacity, written)
    })
}

/// # Safety
/// `mesh` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_mesh_free(mesh: *mut GsMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// The `k` smallest eigenpairs (`k` is clamped to the vertex count).
///
/// # Safety
/// `mesh` must be a live handle; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_compute(mesh: *const GsMesh, k: usize, out: *mut *mut GsBasis) -> GsStatus {
    guard(|| {
        let m = mesh.as_ref().ok_or_else(|| null("mesh"))?;
        let inner = SpectralBasis::from_mesh(&m.inner, k.min(m.inner.num_vertices()))?;
        write_handle(out, GsBasis { inner })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_load(path: *const c_char, out: *mut *mut GsBasis) -> GsStatus {
    guard(|| {
        let inner = load_basis(path_arg(path)?)?;
        write_handle(out, GsBasis { inner })
    })
}

/// # Safety
/// `basis` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_save(basis: *const GsBasis, path: *const c_char) -> GsStatus {
    guard(|| {
        let b = basis.as_ref().ok_or_else(|| null("basis"))?;
        save_basis(&b.inner, path_arg(path)?)?;
        Ok(())
    })
}

/// Number of eigenpairs, or 0 for NULL.
///
/// # Safety
/// `basis` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_len(basis: *const GsBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.len())
}

/// Vertex count, or 0 for NULL.
///
/// # Safety
/// `basis` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_num_vertices(basis: *const GsBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.inner.num_vertices())
}

/// Copies the eigenvalues (ascending) into `out`.
///
/// # Safety
/// `out` must have room for `capacity` doubles; `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_eigenvalues(
    basis: *const GsBasis,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> GsStatus {
    guard(|| {
        let b = basis.as_ref().ok_or_else(|| null("basis"))?;
        copy_out(b.inner.eigenvalues(), out, capacity, written)
    })
}

/// # Safety
/// `basis` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gs_basis_free(basis: *mut GsBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

fn resolve(basis: &SpectralBasis, config: &GsScatterConfig) -> Result<(SpectralBasis, ScatteringConfig), Fail> {
    let k = if config.k == 0 { basis.len() } else { config.k };
    if k > basis.len() {
        return Err(Fail(
            GsStatus::ErrConfig,
            format!("k = {k} exceeds the {} eigenpairs in the basis", basis.len()),
        ));
    }
    let b = if k < basis.len() {
        basis.truncated(k)?
    } else {
        basis.clone()
    };
    let c = ScatteringConfig {
        j_max: config.j_max,
        depth: config.depth as usize,
        j_min: config.j_min,
        k,
        ..Default::default()
    };
    c.validate()?;
    Ok((b, c))
}

/// Number of scattering paths for `config` (0 if it is invalid).
#[no_mangle]
pub extern "C" fn gs_path_count(config: GsScatterConfig) -> u64 {
    let c = ScatteringConfig {
        j_max: config.j_max,
        depth: config.depth as usize,
        j_min: config.j_min,
        k: 1,
        path_cap: u64::MAX,
        ..Default::default()
    };
    if c.j_min > c.j_max {
        return 0;
    }
    u64::try_from(c.path_count()).unwrap_or(u64::MAX)
}

/// Non-windowed coefficients `S̄ f(p) = ‖U[p] f‖₁`, one per path in
/// lexicographic path order.
///
/// # Safety
/// `signal` must hold `num_vertices` doubles and `out` `capacity` doubles;
/// `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gs_scatter_nonwindowed(
    basis: *const GsBasis,
    signal: *const f64,
    num_vertices: usize,
    config: *const GsScatterConfig,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> GsStatus {
    guard(|| {
        let b = basis.as_ref().ok_or_else(|| null("basis"))?;
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let f = slice_arg(signal, num_vertices, "signal")?;
        let (b, c) = resolve(&b.inner, cfg)?;
        let fb = c.filterbank(&b)?;
        let s = scatter_nonwindowed(&b, &fb, f, &c)?;
        copy_out(s.values(), out, capacity, written)
    })
}

/// Windowed coefficients `S_J f`, one vertex function per path, written
/// path-major (`paths × n_v`).
///
/// # Safety
/// `signal` must hold `num_vertices` doubles and `out` `capacity` doubles;
/// `written` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn gs_scatter_windowed(
    basis: *const GsBasis,
    signal: *const f64,
    num_vertices: usize,
    config: *const GsScatterConfig,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> GsStatus {
    guard(|| {
        let b = basis.as_ref().ok_or_else(|| null("basis"))?;
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        let f = slice_arg(signal, num_vertices, "signal")?;
        let (b, c) = resolve(&b.inner, cfg)?;
        let fb = c.filterbank(&b)?;
        let s = scatter_windowed(&b, &fb, f, &c)?;
        let flat: Vec<f64> = s.values().concat();
        copy_out(&flat, out, capacity, written)
    })
}
