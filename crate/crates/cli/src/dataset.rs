//! CSV matrix files.
//!
//! ```text
//! # dpxattn v1 rows=<n> cols=<d> R=<R>
//! 1.0000000000000000e-1,2.5000000000000000e-1
//! ...
//! ```
//!
//! One row per line, values printed with 17 significant digits so every
//! `f64` survives a write/read cycle unchanged. `R` bounds the entries:
//! `[0, R]` for keys and queries, `[-R, R]` for values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dpxattn_core::Matrix;

use crate::error::{CliError, Result};

pub const KEYS_FILE: &str = "K.csv";
pub const VALUES_FILE: &str = "V.csv";
pub const QUERIES_FILE: &str = "Q.csv";

const MAGIC: &str = "dpxattn";
const VERSION: &str = "v1";

/// A matrix together with the bound recorded in its header.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub matrix: Matrix,
    pub radius: f64,
}

pub fn format_matrix(m: &Matrix, radius: f64) -> String {
    let mut out = format!("# {MAGIC} {VERSION} rows={} cols={} R={radius}\n", m.rows(), m.cols());
    for row in m.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix, radius: f64) -> Result<()> {
    fs::write(path, format_matrix(m, radius)).map_err(|e| CliError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<MatrixFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<MatrixFile> {
    let err = |line: usize, message: String| CliError::Format {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let (rows, cols, radius) = parse_header(header).map_err(|m| err(1, m))?;

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        if seen > rows {
            return Err(err(lineno, format!("more than the declared {rows} rows")));
        }
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(err(lineno, format!("expected {cols} columns, found {}", data.len() - before)));
        }
    }
    if seen != rows {
        return Err(err(1, format!("header declares {rows} rows, file has {seen}")));
    }
    let matrix = Matrix::new(rows, cols, data)?;
    Ok(MatrixFile { matrix, radius })
}

fn parse_header(header: &str) -> std::result::Result<(usize, usize, f64), String> {
    let mut parts = header.split_whitespace();
    if parts.next() != Some("#") || parts.next() != Some(MAGIC) {
        return Err(format!("expected header starting with `# {MAGIC}`"));
    }
    match parts.next() {
        Some(VERSION) => {}
        other => return Err(format!("unsupported format version {other:?}")),
    }
    let (mut rows, mut cols, mut radius) = (None, None, None);
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("malformed header field {kv:?}"))?;
        let bad = || format!("malformed header value {kv:?}");
        match k {
            "rows" => rows = Some(v.parse::<usize>().map_err(|_| bad())?),
            "cols" => cols = Some(v.parse::<usize>().map_err(|_| bad())?),
            "R" => radius = Some(v.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(format!("unknown header field {k:?}")),
        }
    }
    let radius = radius.ok_or("header lacks R")?;
    if !(radius.is_finite() && radius > 0.0) {
        return Err(format!("R must be positive and finite, got {radius}"));
    }
    Ok((rows.ok_or("header lacks rows")?, cols.ok_or("header lacks cols")?, radius))
}

/// Keys, values, and queries of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub keys: Matrix,
    pub values: Matrix,
    pub queries: Matrix,
    /// Bound on keys and queries.
    pub radius: f64,
    /// Bound on value magnitudes.
    pub weight_bound: f64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.keys.rows()
    }

    pub fn m(&self) -> usize {
        self.queries.rows()
    }

    pub fn d(&self) -> usize {
        self.keys.cols()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = |f: &str| -> PathBuf { dir.join(f) };
        let k = read_matrix(&path(KEYS_FILE))?;
        let v = read_matrix(&path(VALUES_FILE))?;
        let q = read_matrix(&path(QUERIES_FILE))?;
        let bad = |m: String| Err(CliError::Validation(m));
        if k.matrix.rows() == 0 || k.matrix.cols() == 0 {
            return bad("K must have at least one row and one column".into());
        }
        if v.matrix.rows() != k.matrix.rows() || v.matrix.cols() != k.matrix.cols() {
            return bad(format!(
                "V is {}x{} but K is {}x{}",
                v.matrix.rows(),
                v.matrix.cols(),
                k.matrix.rows(),
                k.matrix.cols()
            ));
        }
        if q.matrix.cols() != k.matrix.cols() && q.matrix.rows() > 0 {
            return bad(format!("Q has {} columns but K has {}", q.matrix.cols(), k.matrix.cols()));
        }
        if q.radius != k.radius {
            return bad(format!("Q declares R={} but K declares R={}", q.radius, k.radius));
        }
        let ds = Self {
            keys: k.matrix,
            values: v.matrix,
            queries: q.matrix,
            radius: k.radius,
            weight_bound: v.radius,
        };
        check_range(KEYS_FILE, &ds.keys, 0.0, ds.radius)?;
        check_range(QUERIES_FILE, &ds.queries, 0.0, ds.radius)?;
        check_range(VALUES_FILE, &ds.values, -ds.weight_bound, ds.weight_bound)?;
        Ok(ds)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_matrix(&dir.join(KEYS_FILE), &self.keys, self.radius)?;
        write_matrix(&dir.join(VALUES_FILE), &self.values, self.weight_bound)?;
        write_matrix(&dir.join(QUERIES_FILE), &self.queries, self.radius)
    }
}

fn check_range(name: &str, m: &Matrix, lo: f64, hi: f64) -> Result<()> {
    match m.as_slice().iter().position(|v| !(lo..=hi).contains(v)) {
        None => Ok(()),
        Some(i) => Err(CliError::Validation(format!(
            "{name}: entry ({}, {}) = {} is outside [{lo}, {hi}]",
            i / m.cols(),
            i % m.cols(),
            m.as_slice()[i]
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let vals = [0.1, 1.0 / 3.0, 5e-324, 0.999_999_999_999_999_9, 0.0, 1.0, 2.0f64.sqrt() / 2.0];
        let m = Matrix::new(7, 1, vals.to_vec()).unwrap();
        let text = format_matrix(&m, 1.0);
        let back = parse_matrix(&text, Path::new("t")).unwrap();
        for (a, b) in back.matrix.as_slice().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(text.starts_with("# dpxattn v1 rows=7 cols=1 R=1\n"));
        assert!(text.contains("\n1.0000000000000001e-1\n") || text.contains("\n1.0000000000000000e-1\n"));
    }

    #[test]
    fn rejects_malformed_files() {
        let p = Path::new("t");
        assert!(parse_matrix("", p).is_err());
        assert!(parse_matrix("# other v1 rows=1 cols=1 R=1\n0.5\n", p).is_err());
        assert!(parse_matrix("# dpxattn v2 rows=1 cols=1 R=1\n0.5\n", p).is_err());
        assert!(parse_matrix("# dpxattn v1 rows=2 cols=1 R=1\n0.5\n", p).is_err());
        assert!(parse_matrix("# dpxattn v1 rows=1 cols=2 R=1\n0.5\n", p).is_err());
        assert!(parse_matrix("# dpxattn v1 rows=1 cols=1 R=1\nabc\n", p).is_err());
        assert!(parse_matrix("# dpxattn v1 rows=1 cols=1 R=1\nNaN\n", p).is_err());
        assert!(parse_matrix("# dpxattn v1 rows=1 cols=1 R=0\n0\n", p).is_err());
        let ok = parse_matrix("# dpxattn v1 rows=0 cols=2 R=1\n", p).unwrap();
        assert_eq!((ok.matrix.rows(), ok.matrix.cols()), (0, 2));
    }
}
