//! Matrix market coordinate I/O.
//!
//! Supported headers: `%%MatrixMarket matrix coordinate {real|complex}
//! {general|symmetric}`. Pattern-only files are rejected: inventing values
//! would silently corrupt every accuracy check downstream. Explicit zeros
//! are kept; they occupy structure.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{CooMatrix, CscMatrix, Symmetry};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn mm_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::MatrixMarket {
        path: path.display().to_string(),
        reason: reason.into(),
        line,
    }
}

/// Header metadata of a matrix market file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarketHeader {
    pub complex: bool,
    pub symmetric: bool,
}

/// Read a matrix market coordinate file. Symmetric files keep only the stored
/// triangle and set [`Symmetry::SymmetricLower`]. The scalar type `T` must be
/// complex when the file is complex; real files load into either.
pub fn read_matrix_market<T: Scalar>(path: impl AsRef<Path>) -> Result<(CooMatrix<T>, MarketHeader)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| mm_err(path, 1, "empty file"))?;
    let first = first.map_err(|e| io_err(path, e))?;
    let banner: Vec<String> = first.split_whitespace().map(|t| t.to_lowercase()).collect();
    if banner.len() != 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix" {
        return Err(mm_err(path, 1, "expected '%%MatrixMarket matrix ...' banner"));
    }
    if banner[2] != "coordinate" {
        return Err(mm_err(path, 1, format!("unsupported format '{}'", banner[2])));
    }
    let complex = match banner[3].as_str() {
        "real" | "integer" => false,
        "complex" => true,
        "pattern" => return Err(Error::PatternOnly),
        other => return Err(mm_err(path, 1, format!("unsupported field '{other}'"))),
    };
    if complex && !T::COMPLEX {
        return Err(mm_err(path, 1, "complex file read with a real scalar type"));
    }
    let symmetric = match banner[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(mm_err(path, 1, format!("unsupported symmetry '{other}'"))),
    };

    // size line: first non-comment line
    let (mut n, mut nnz) = (0usize, 0usize);
    let mut size_seen = false;
    let mut entries: Vec<(usize, usize, T)> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut tok = trimmed.split_whitespace();
        if !size_seen {
            let nrows: usize = tok
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| mm_err(path, lineno, "bad row count"))?;
            let ncols: usize = tok
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| mm_err(path, lineno, "bad column count"))?;
            nnz = tok
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| mm_err(path, lineno, "bad nonzero count"))?;
            if nrows != ncols {
                return Err(mm_err(
                    path,
                    lineno,
                    format!("matrix must be square, got {nrows}x{ncols}"),
                ));
            }
            n = nrows;
            size_seen = true;
            entries.reserve(nnz);
            continue;
        }
        let i: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| mm_err(path, lineno, "bad row index"))?;
        let j: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| mm_err(path, lineno, "bad column index"))?;
        if i < 1 || i > n || j < 1 || j > n {
            return Err(Error::IndexOutOfRange {
                i,
                j,
                nrows: n,
                ncols: n,
            });
        }
        let re: f64 = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| mm_err(path, lineno, "missing value"))?;
        let v = if complex {
            let im: f64 = tok
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| mm_err(path, lineno, "missing imaginary part"))?;
            T::from_parts(re, im)
        } else {
            T::from_re(re)
        };
        if symmetric && i < j {
            return Err(mm_err(
                path,
                lineno,
                format!("symmetric file stores an upper-triangle entry ({i},{j})"),
            ));
        }
        entries.push((i - 1, j - 1, v));
    }
    if !size_seen {
        return Err(mm_err(path, 0, "missing size line"));
    }
    if entries.len() != nnz {
        return Err(mm_err(
            path,
            0,
            format!("size line promises {} entries, found {}", nnz, entries.len()),
        ));
    }
    Ok((
        CooMatrix {
            n,
            entries,
            symmetry: if symmetric {
                Symmetry::SymmetricLower
            } else {
                Symmetry::General
            },
        },
        MarketHeader { complex, symmetric },
    ))
}

/// Write a CSC matrix as a matrix market coordinate file, 1-based.
pub fn write_matrix_market<T: Scalar>(m: &CscMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let field = if T::COMPLEX { "complex" } else { "real" };
    let sym = match m.symmetry {
        Symmetry::General => "general",
        Symmetry::SymmetricLower => "symmetric",
    };
    let res: std::io::Result<()> = (|| {
        writeln!(w, "%%MatrixMarket matrix coordinate {field} {sym}")?;
        writeln!(w, "{} {} {}", m.n, m.n, m.nnz())?;
        for (i, j, v) in m.iter() {
            if T::COMPLEX {
                writeln!(w, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re(), v.im())?;
            } else {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v.re())?;
            }
        }
        w.flush()
    })();
    res.map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::coord_to_csc;
    use num_complex::Complex64;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn identity_file() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 1.0\n2 2 1.0\n3 3 1.0\n",
        );
        let (m, h) = read_matrix_market::<f64>(f.path()).unwrap();
        assert_eq!(m.n, 3);
        assert_eq!(m.nnz(), 3);
        assert!(m.entries.iter().all(|&(i, j, v)| i == j && v == 1.0));
        assert!(h.symmetric && !h.complex);
        assert_eq!(m.symmetry, Symmetry::SymmetricLower);
    }

    #[test]
    fn out_of_range_entry() {
        let f = write_temp("%%MatrixMarket matrix coordinate real general\n3 3 1\n2 5 1.0\n");
        let err = read_matrix_market::<f64>(f.path()).unwrap_err();
        match err {
            Error::IndexOutOfRange { i: 2, j: 5, .. } => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pattern_files_rejected() {
        let f = write_temp("%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n");
        assert!(matches!(
            read_matrix_market::<f64>(f.path()),
            Err(Error::PatternOnly)
        ));
    }

    #[test]
    fn complex_roundtrip_preserves_entry_set() {
        let f = write_temp(
            "%%MatrixMarket matrix coordinate complex symmetric\n2 2 3\n1 1 1.5 0.5\n2 1 -2.0 1.0\n2 2 3.0 0.0\n",
        );
        let (m, _) = read_matrix_market::<Complex64>(f.path()).unwrap();
        let csc = coord_to_csc(&m);
        let out = tempfile::NamedTempFile::new().unwrap();
        write_matrix_market(&csc, out.path()).unwrap();
        let (m2, _) = read_matrix_market::<Complex64>(out.path()).unwrap();
        let csc2 = coord_to_csc(&m2);
        assert_eq!(csc.colptr, csc2.colptr);
        assert_eq!(csc.rowind, csc2.rowind);
        assert_eq!(csc.values, csc2.values);
    }

    #[test]
    fn missing_file_error_names_path() {
        let err = read_matrix_market::<f64>("/no/such/file.mtx").unwrap_err();
        assert!(err.to_string().contains("/no/such/file.mtx"));
    }
}
