//! Matrix Market and JSON files, written atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{PhysParams, StreamingScale, WeightSet};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Coordinate format, `real general`, one-based, row-major entry order.
pub fn matrix_market_string(m: &CsrMatrix, comment: Option<&str>) -> String {
    let mut out = String::with_capacity(32 * (m.nnz() + 2));
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    if let Some(c) = comment {
        for line in c.lines() {
            out.push('%');
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(&format!("{} {} {}\n", m.rows(), m.cols(), m.nnz()));
    for (r, c, v) in m.triplets() {
        out.push_str(&format!("{} {} {}\n", r + 1, c + 1, v));
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &CsrMatrix, comment: Option<&str>) -> Result<()> {
    write_atomic(path, matrix_market_string(m, comment).as_bytes())
}

/// Dense column vector in array format.
pub fn write_vector_market(path: &Path, v: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(24 * (v.len() + 2));
    out.push_str("%%MatrixMarket matrix array real general\n");
    out.push_str(&format!("{} 1\n", v.len()));
    for x in v {
        out.push_str(&format!("{x}\n"));
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

struct Parsed {
    rows: usize,
    cols: usize,
    layout: Layout,
    symmetry: Symmetry,
    // (line number, tokens)
    data: Vec<(usize, Vec<f64>)>,
}

fn parse(path: &Path) -> Result<Parsed> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let fields: Vec<String> = banner
        .split_whitespace()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(err(
            1,
            format!("not a Matrix Market matrix header: {banner:?}"),
        ));
    }
    let layout = match fields[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        f => return Err(err(1, format!("unsupported format {f:?}"))),
    };
    if !matches!(fields[3].as_str(), "real" | "integer" | "double") {
        return Err(err(1, format!("unsupported field {:?}", fields[3])));
    }
    let symmetry = match fields[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        s => return Err(err(1, format!("unsupported symmetry {s:?}"))),
    };
    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_line, size) = body
        .next()
        .ok_or_else(|| err(2, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(size_line, format!("bad size line: {e}")))?;
    let want = if layout == Layout::Coordinate { 3 } else { 2 };
    if dims.len() != want {
        return Err(err(size_line, format!("size line needs {want} integers")));
    }
    let expected_entries = match layout {
        Layout::Coordinate => dims[2],
        Layout::Array => dims[0] * dims[1],
    };
    let mut data = Vec::with_capacity(expected_entries);
    for (ln, l) in body {
        let toks: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(ln, format!("bad entry: {e}")))?;
        let arity = if layout == Layout::Coordinate { 3 } else { 1 };
        if toks.len() != arity {
            return Err(err(
                ln,
                format!("expected {arity} values, found {}", toks.len()),
            ));
        }
        data.push((ln, toks));
    }
    if data.len() != expected_entries {
        return Err(err(
            size_line,
            format!("declared {expected_entries} entries, found {}", data.len()),
        ));
    }
    Ok(Parsed {
        rows: dims[0],
        cols: dims[1],
        layout,
        symmetry,
        data,
    })
}

/// Reads coordinate or array files with general, symmetric or skew-symmetric storage.
pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
    let p = parse(path)?;
    let mut b = TripletBuilder::with_capacity(p.rows, p.cols, p.data.len());
    match p.layout {
        Layout::Coordinate => {
            for (ln, t) in &p.data {
                let (r, c) = (t[0] as usize, t[1] as usize);
                if t[0].fract() != 0.0
                    || t[1].fract() != 0.0
                    || r == 0
                    || c == 0
                    || r > p.rows
                    || c > p.cols
                {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line: *ln,
                        message: format!(
                            "index ({}, {}) outside {}x{}",
                            t[0], t[1], p.rows, p.cols
                        ),
                    });
                }
                b.push(r - 1, c - 1, t[2]);
                if r != c {
                    match p.symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => b.push(c - 1, r - 1, t[2]),
                        Symmetry::SkewSymmetric => b.push(c - 1, r - 1, -t[2]),
                    }
                }
            }
        }
        Layout::Array => {
            if p.symmetry != Symmetry::General {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    message: "only general array storage is supported".into(),
                });
            }
            for (k, (_, t)) in p.data.iter().enumerate() {
                b.push(k % p.rows, k / p.rows, t[0]);
            }
        }
    }
    Ok(b.build())
}

/// Reads an `n × 1` (or `1 × n`) matrix as a vector.
pub fn read_vector_market(path: &Path) -> Result<Vec<f64>> {
    let p = parse(path)?;
    if p.rows != 1 && p.cols != 1 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: format!("expected a vector, found {}x{}", p.rows, p.cols),
        });
    }
    match p.layout {
        Layout::Array => Ok(p.data.into_iter().map(|(_, t)| t[0]).collect()),
        Layout::Coordinate => {
            let m = read_matrix_market(path)?;
            let n = p.rows.max(p.cols);
            let mut v = vec![0.0; n];
            for (r, c, x) in m.triplets() {
                v[r.max(c)] += x;
            }
            Ok(v)
        }
    }
}

/// Sidecar describing a built system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemMetadata {
    pub grid_points: usize,
    pub truncation_order: usize,
    pub tau: f64,
    pub g: f64,
    pub length: f64,
    pub dt: f64,
    pub timesteps: usize,
    pub weights: WeightSet,
    pub streaming_scale: StreamingScale,
    pub disable_dynamics: bool,
    pub carleman_dim: usize,
    pub euler_dim: usize,
    pub carleman_nnz: usize,
    pub euler_nnz: usize,
    /// Initial depth and velocity per grid point.
    pub h0: Vec<f64>,
    pub u0: Vec<f64>,
}

impl SystemMetadata {
    pub fn params(&self) -> PhysParams {
        PhysParams {
            g: self.g,
            tau: self.tau,
            length: self.length,
            grid_points: self.grid_points,
            dt: self.dt,
            timesteps: self.timesteps,
            weights: self.weights,
            streaming_scale: self.streaming_scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mtx");
        let m = CsrMatrix::from_dense(&DMatrix::from_row_slice(
            2,
            3,
            &[0.1, 0.0, -1.0 / 3.0, 0.0, 1e-300, 2.0],
        ));
        write_matrix_market(&path, &m, Some("test")).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text
            .starts_with("%%MatrixMarket matrix coordinate real general\n%test\n2 3 4\n1 1 0.1\n"));
        assert_eq!(read_matrix_market(&path).unwrap(), m);
    }

    #[test]
    fn vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.mtx");
        let v = vec![1.0, -0.5, 1.0 / 7.0];
        write_vector_market(&path, &v).unwrap();
        assert_eq!(read_vector_market(&path).unwrap(), v);
    }

    #[test]
    fn symmetric_and_array_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let sym = dir.path().join("s.mtx");
        fs::write(
            &sym,
            "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4\n2 1 1\n",
        )
        .unwrap();
        let m = read_matrix_market(&sym).unwrap();
        assert_eq!(
            m.to_dense(),
            DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 0.0])
        );
        let arr = dir.path().join("a.mtx");
        fs::write(
            &arr,
            "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n",
        )
        .unwrap();
        let a = read_matrix_market(&arr).unwrap();
        assert_eq!(
            a.to_dense(),
            DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 2.0, 4.0])
        );
    }

    #[test]
    fn malformed_inputs_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.mtx");
        fs::write(
            &bad,
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
        )
        .unwrap();
        match read_matrix_market(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(
            &bad,
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
        )
        .unwrap();
        assert!(read_matrix_market(&bad).is_err());
        fs::write(&bad, "hello\n").unwrap();
        assert!(read_matrix_market(&bad).is_err());
        let missing = dir.path().join("missing.mtx");
        match read_matrix_market(&missing) {
            Err(Error::Io { path, .. }) => assert_eq!(path, missing),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.csv");
        write_atomic(&path, b"a\n").unwrap();
        write_atomic(&path, b"b\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"b\n");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = PhysParams::default();
        write_json(&path, &p).unwrap();
        assert_eq!(read_json::<PhysParams>(&path).unwrap(), p);
    }
}
