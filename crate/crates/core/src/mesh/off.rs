//! ASCII OFF reader and writer.

use std::fmt::Write as _;
use std::path::Path;

use super::{Point, TriangleMesh};
use crate::error::{Error, Result};

/// Vertex positions and faces as read from disk, before validation.
#[derive(Clone, Debug)]
pub struct RawMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<[usize; 3]>,
}

pub fn load_off(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let raw = read_off(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TriangleMesh::new(raw.vertices, raw.faces, name)
}

pub fn read_off(path: impl AsRef<Path>) -> Result<RawMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_off(&text)
}

/// Parses OFF text. `#` starts a comment; blank lines are skipped.
pub fn parse_off(text: &str) -> Result<RawMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let mut header_tokens = header.split_whitespace();
    if header_tokens.next() != Some("OFF") {
        return Err(Error::Parse {
            line,
            message: format!("expected header \"OFF\", found {header:?}"),
        });
    }
    // Counts may share the header line ("OFF 4 4 6") or follow it.
    let rest: Vec<&str> = header_tokens.collect();
    let (line, counts) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or(Error::Parse {
            line,
            message: "missing counts line".into(),
        })?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (line, rest)
    };
    if counts.len() < 2 {
        return Err(Error::Parse {
            line,
            message: "counts line needs at least vertex and face counts".into(),
        });
    }
    let parse_count = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("bad count {s:?}"),
        })
    };
    let nv = parse_count(counts[0])?;
    let nf = parse_count(counts[1])?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: usize::MAX,
            message: format!("file ends after {} of {nv} vertices", vertices.len()),
        })?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line,
                message: format!("bad vertex line {l:?}"),
            })?;
        if xyz.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("vertex line needs 3 coordinates: {l:?}"),
            });
        }
        vertices.push(Point::new(xyz[0], xyz[1], xyz[2]));
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, l) = lines.next().ok_or(Error::Parse {
            line: usize::MAX,
            message: format!("file ends after {} of {nf} faces", faces.len()),
        })?;
        let tokens: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse {
                line,
                message: format!("bad face line {l:?}"),
            })?;
        let arity = *tokens.first().ok_or(Error::Parse {
            line,
            message: "empty face line".into(),
        })?;
        if arity != 3 {
            return Err(Error::NonTriangleFace { line, arity });
        }
        if tokens.len() < 4 {
            return Err(Error::Parse {
                line,
                message: format!("face line has fewer than 3 indices: {l:?}"),
            });
        }
        faces.push([tokens[1], tokens[2], tokens[3]]);
    }
    Ok(RawMesh { vertices, faces })
}

/// OFF text with coordinates at 17 significant digits (exact f64 round trip).
pub fn to_off_string(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(64 * mesh.num_vertices());
    out.push_str("OFF\n");
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.num_vertices(),
        mesh.num_faces(),
        mesh.edges().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v.x, v.y, v.z);
    }
    for t in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn write_off(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_off_string(mesh)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    const TETRA: &str = "OFF\n4 4 6\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";

    #[test]
    fn parses_tetrahedron() {
        let raw = parse_off(TETRA).unwrap();
        assert_eq!(raw.vertices.len(), 4);
        assert_eq!(raw.faces.len(), 4);
        assert_eq!(raw.vertices[3], Point::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn counts_on_header_line_and_comments() {
        let text = "OFF 4 4 6 # inline counts\n# a comment\n0 0 0\n1 0 0\n\n0 1 0\n0 0 1\n3 0 2 1\n3 0 1 3\n3 0 3 2\n3 1 2 3\n";
        let raw = parse_off(text).unwrap();
        assert_eq!(raw.faces[3], [1, 2, 3]);
    }

    #[test]
    fn quad_face_rejected() {
        let text = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let err = parse_off(text).unwrap_err();
        assert!(err.to_string().contains("non-triangle face"), "{err}");
    }

    #[test]
    fn malformed_header_and_counts() {
        assert!(matches!(parse_off("PLY\n1 1 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("OFF\nfour 4 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("OFF\n4 4 6\n0 0 0\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn writer_round_trips_bit_exact() {
        let mesh = icosphere(2, 1.0).unwrap();
        let raw = parse_off(&to_off_string(&mesh)).unwrap();
        assert_eq!(raw.vertices, mesh.vertices());
        assert_eq!(raw.faces, mesh.faces());
    }
}
