//! Text format for triangulated surfaces with edge lengths.
//!
//! ```text
//! trisurf <V> <F>
//! tri i j k        (F lines, oriented)
//! len i j <float>  (one line per edge, i < j)
//! ```
//!
//! Edge lines may appear in any order but each edge of the triangulation must
//! appear exactly once; the writer emits them in lexicographic order. Floats
//! round-trip exactly (shortest representation). Loading validates the
//! surface and rejects anything that is not a closed oriented surface with a
//! genuine metric.

use std::path::Path;

use super::{MeshError, TriSurface};

/// Parses the `trisurf` format; see the module docs.
pub fn parse_mesh(text: &str) -> Result<TriSurface, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected `trisurf <V> <F>` header"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("trisurf") {
        return Err(parse_err(header_no, "expected `trisurf <V> <F>` header"));
    }
    let num_vertices: usize = parse_field(header_no, parts.next(), "vertex count")?;
    let num_triangles: usize = parse_field(header_no, parts.next(), "triangle count")?;
    if parts.next().is_some() {
        return Err(parse_err(header_no, "trailing tokens after header"));
    }

    let mut triangles = Vec::with_capacity(num_triangles);
    let mut lengths: Vec<(usize, usize, f64)> = Vec::new();
    for (no, line) in lines {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("tri") => {
                if !lengths.is_empty() {
                    return Err(parse_err(no, "tri line after len lines"));
                }
                let i: usize = parse_field(no, parts.next(), "vertex index")?;
                let j: usize = parse_field(no, parts.next(), "vertex index")?;
                let k: usize = parse_field(no, parts.next(), "vertex index")?;
                if parts.next().is_some() {
                    return Err(parse_err(no, "trailing tokens after triangle"));
                }
                triangles.push([i, j, k]);
            }
            Some("len") => {
                let i: usize = parse_field(no, parts.next(), "vertex index")?;
                let j: usize = parse_field(no, parts.next(), "vertex index")?;
                let l: f64 = parse_field(no, parts.next(), "length")?;
                if parts.next().is_some() {
                    return Err(parse_err(no, "trailing tokens after length"));
                }
                if i >= j {
                    return Err(parse_err(no, "edge endpoints must satisfy i < j"));
                }
                lengths.push((i, j, l));
            }
            Some(tok) => {
                return Err(parse_err(no, &format!("unknown record `{tok}`")));
            }
            None => unreachable!("blank lines are filtered"),
        }
    }
    if triangles.len() != num_triangles {
        return Err(parse_err(
            0,
            &format!(
                "header declares {} triangles but {} tri lines found",
                num_triangles,
                triangles.len()
            ),
        ));
    }

    let surface = TriSurface::new(num_vertices, triangles, &lengths)?;
    let report = surface.validate();
    if !report.passes() {
        return Err(MeshError::Invalid { report });
    }
    Ok(surface)
}

/// Reads and validates a surface from a file.
pub fn read_mesh<P: AsRef<Path>>(path: P) -> Result<TriSurface, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

/// Formats a surface in the `trisurf` format (edges lexicographic, floats
/// shortest round-trip).
pub fn format_mesh(surface: &TriSurface) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "trisurf {} {}\n",
        surface.num_vertices(),
        surface.num_triangles()
    ));
    for tri in surface.triangles() {
        out.push_str(&format!("tri {} {} {}\n", tri[0], tri[1], tri[2]));
    }
    for (e, &l) in surface.edges().iter().zip(surface.reference_lengths()) {
        out.push_str(&format!("len {} {} {}\n", e[0], e[1], l));
    }
    out
}

/// Writes a surface to a file in the `trisurf` format.
pub fn write_mesh<P: AsRef<Path>>(surface: &TriSurface, path: P) -> Result<(), MeshError> {
    std::fs::write(path, format_mesh(surface))?;
    Ok(())
}

fn parse_err(line: usize, msg: &str) -> MeshError {
    MeshError::Parse { line, msg: msg.to_string() }
}

fn parse_field<T: std::str::FromStr>(
    line: usize,
    field: Option<&str>,
    what: &str,
) -> Result<T, MeshError> {
    let tok = field.ok_or_else(|| parse_err(line, &format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, &format!("cannot parse {what} from `{tok}`")))
}
