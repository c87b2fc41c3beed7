//! `GSB1` binary basis cache: magic, little-endian `u64` n_v and K, then
//! `f64` arrays for the mass diagonal, the eigenvalues and the eigenvectors
//! in column-major order.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{MassMatrix, SpectralBasis};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GSB1";

pub fn write_basis(basis: &SpectralBasis, out: &mut impl Write) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(basis.num_vertices() as u64).to_le_bytes())?;
    out.write_all(&(basis.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * (basis.num_vertices() * (basis.len() + 1) + basis.len()));
    for x in basis
        .mass()
        .diag()
        .iter()
        .chain(basis.eigenvalues())
        .chain(basis.eigenvectors().as_slice())
    {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn read_basis(input: &mut impl Read, mesh_name: impl Into<String>) -> Result<SpectralBasis> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Format(e.to_string()))?;
    decode(&bytes, mesh_name.into())
}

pub fn save_basis(basis: &SpectralBasis, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_basis(basis, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_basis(path: impl AsRef<Path>) -> Result<SpectralBasis> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode(&bytes, name)
}

fn decode(bytes: &[u8], mesh_name: String) -> Result<SpectralBasis> {
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing GSB1 magic".into()));
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let k = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let expected = n
        .checked_mul(k)
        .and_then(|nk| nk.checked_add(n))
        .and_then(|x| x.checked_add(k))
        .and_then(|x| x.checked_mul(8))
        .and_then(|x| x.checked_add(20));
    if expected != Some(bytes.len()) || k == 0 || k > n {
        return Err(Error::Format(format!(
            "GSB1 header declares n_v={n}, K={k} but the file holds {} bytes",
            bytes.len()
        )));
    }
    let mut floats = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mass: Vec<f64> = floats.by_ref().take(n).collect();
    let eigenvalues: Vec<f64> = floats.by_ref().take(k).collect();
    let vectors: Vec<f64> = floats.collect();
    let mass = MassMatrix::new(mass)?;
    Ok(SpectralBasis::from_parts(
        eigenvalues,
        DMatrix::from_vec(n, k, vectors),
        mass,
        mesh_name,
    ))
}
