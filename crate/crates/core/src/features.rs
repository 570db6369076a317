//! Feature matrices and their on-disk formats.
//!
//! A [`FeatureMatrix`] holds `n` feature vectors of dimension `d` in row-major
//! order, optionally with a non-negative integer label per row. Two file
//! formats are supported:
//!
//! * CSV: optional `#` comment lines, a header `d=<dim>[,labeled]`, then one
//!   row per line with `d` comma-separated decimals and, when labeled, a
//!   trailing integer label.
//! * Binary: `DPFV1`, one flags byte (bit 0 labeled, bit 1 normalized), `n` and
//!   `d` as little-endian `u32`, `n*d` little-endian `f64` row-major, then `n`
//!   little-endian `i32` labels when labeled.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Tolerance on the row norm for a matrix to count as normalized.
pub const UNIT_BALL_TOL: f64 = 1e-9;

const MAGIC: &[u8; 5] = b"DPFV1";
const FLAG_LABELED: u8 = 0b01;
const FLAG_NORMALIZED: u8 = 0b10;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
    labels: Option<Vec<u32>>,
    normalized: bool,
}

fn norm(row: &[f64]) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl FeatureMatrix {
    /// Builds a matrix from row-major data. Rejects non-finite values, naming the row.
    pub fn new(d: usize, data: Vec<f64>, labels: Option<Vec<u32>>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("feature dimension must be positive".into()));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::InvalidInput(format!(
                "data length {} is not a multiple of d={d}",
                data.len()
            )));
        }
        let n = data.len() / d;
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: l.len(),
                });
            }
        }
        Ok(Self {
            n,
            d,
            data,
            labels,
            normalized: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(d, data, None)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    /// Checks every row lies in the closed unit ball (up to [`UNIT_BALL_TOL`]).
    pub fn check_unit_ball(&self) -> Result<()> {
        for (row, r) in self.rows().enumerate() {
            let norm = norm(r);
            if norm > 1.0 + UNIT_BALL_TOL {
                return Err(Error::NotNormalized { row, norm });
            }
        }
        Ok(())
    }

    /// Replaces each row `r` by `r / max(1, ||r||)` and flags the result normalized.
    pub fn project_to_unit_ball(&self) -> FeatureMatrix {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.d) {
            project_row(row);
        }
        FeatureMatrix {
            n: self.n,
            d: self.d,
            data,
            labels: self.labels.clone(),
            normalized: true,
        }
    }

    /// Rows at `indices`, in that order, with labels carried along.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            n: indices.len(),
            d: self.d,
            data,
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            normalized: self.normalized,
        }
    }

    /// Flags the matrix normalized iff every row is inside the unit ball.
    pub(crate) fn detect_normalized(mut self) -> Self {
        self.normalized = self.check_unit_ball().is_ok();
        self
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.d];
        for r in self.rows() {
            for (m, x) in mu.iter_mut().zip(r) {
                *m += x;
            }
        }
        let inv = 1.0 / self.n as f64;
        mu.iter_mut().for_each(|m| *m *= inv);
        mu
    }
}

/// Projects a single row onto the closed unit ball in place.
///
/// The result always has a computed norm `<= 1`, so projection is idempotent bit for bit.
pub fn project_row(row: &mut [f64]) {
    let n = norm(row);
    if n <= 1.0 {
        return;
    }
    let inv = 1.0 / n;
    row.iter_mut().for_each(|x| *x *= inv);
    while norm(row) > 1.0 {
        row.iter_mut().for_each(|x| *x *= 1.0 - f64::EPSILON);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl FeatureFormat {
    /// `.csv` selects CSV; anything else is the binary format.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

pub fn load_features(path: impl AsRef<Path>, format: FeatureFormat) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    match format {
        FeatureFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text, path)
        }
        FeatureFormat::Binary => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            parse_binary(&bytes, path)
        }
    }
}

pub fn save_features(m: &FeatureMatrix, path: impl AsRef<Path>, format: FeatureFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        FeatureFormat::Csv => to_csv(m).into_bytes(),
        FeatureFormat::Binary => to_binary(m),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

fn parse_header(spec: &str) -> Option<(usize, bool)> {
    let mut parts = spec.split(',').map(str::trim);
    let d = parts.next()?.strip_prefix("d=")?.trim().parse().ok()?;
    let mut labeled = false;
    for p in parts {
        match p {
            "labeled" => labeled = true,
            _ => return None,
        }
    }
    Some((d, labeled))
}

fn parse_csv(text: &str, path: &Path) -> Result<FeatureMatrix> {
    let mut header: Option<(usize, bool)> = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let loc = || format!("line {lineno}");
        if let Some(comment) = line.strip_prefix('#') {
            // `# d=2` is accepted as a header when no header has been seen yet.
            if header.is_none() {
                if let Some(h) = parse_header(comment.trim()) {
                    header = Some(h);
                }
            }
            continue;
        }
        let Some((d, labeled)) = header else {
            header =
                Some(parse_header(line).ok_or_else(|| parse_err(path, loc(), "expected header `d=<dim>[,labeled]`"))?);
            continue;
        };
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let expected = d + usize::from(labeled);
        if cells.len() != expected {
            return Err(parse_err(
                path,
                loc(),
                format!("row has {} cells, expected {expected}", cells.len()),
            ));
        }
        for (c, cell) in cells[..d].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("line {lineno}, column {}", c + 1),
                    format!("non-numeric cell `{cell}`"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    format!("line {lineno}, column {}", c + 1),
                    "non-finite value",
                ));
            }
            data.push(v);
        }
        if labeled {
            let cell = cells[d];
            let l: u32 = cell
                .parse()
                .map_err(|_| parse_err(path, loc(), format!("invalid label `{cell}`")))?;
            labels.push(l);
        }
    }
    let (d, labeled) = header.ok_or_else(|| parse_err(path, "end of file".into(), "missing header"))?;
    if d == 0 {
        return Err(parse_err(path, "header".into(), "d must be positive"));
    }
    let m = FeatureMatrix::new(d, data, labeled.then_some(labels))?;
    Ok(m.detect_normalized())
}

fn to_csv(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    out.push_str(&format!("d={}", m.d));
    if m.labels.is_some() {
        out.push_str(",labeled");
    }
    out.push('\n');
    for (i, r) in m.rows().enumerate() {
        for (j, x) in r.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // Display for f64 prints the shortest representation that round-trips.
            write!(out, "{x}").unwrap();
        }
        if let Some(l) = &m.labels {
            write!(out, ",{}", l[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

fn to_binary(m: &FeatureMatrix) -> Vec<u8> {
    let label_bytes = m.labels.as_ref().map_or(0, |l| 4 * l.len());
    let mut out = Vec::with_capacity(14 + 8 * m.data.len() + label_bytes);
    out.extend_from_slice(MAGIC);
    let mut flags = 0u8;
    if m.labels.is_some() {
        flags |= FLAG_LABELED;
    }
    if m.normalized {
        flags |= FLAG_NORMALIZED;
    }
    out.push(flags);
    out.extend_from_slice(&(m.n as u32).to_le_bytes());
    out.extend_from_slice(&(m.d as u32).to_le_bytes());
    for x in &m.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    if let Some(l) = &m.labels {
        for &v in l {
            out.extend_from_slice(&(v as i32).to_le_bytes());
        }
    }
    out
}

fn parse_binary(bytes: &[u8], path: &Path) -> Result<FeatureMatrix> {
    let at = |off: usize| format!("byte offset {off}");
    if bytes.len() < 14 {
        return Err(parse_err(path, at(0), "file too short for header"));
    }
    if &bytes[..5] != MAGIC {
        return Err(parse_err(path, at(0), "bad magic bytes, expected `DPFV1`"));
    }
    let flags = bytes[5];
    if flags & !(FLAG_LABELED | FLAG_NORMALIZED) != 0 {
        return Err(parse_err(path, at(5), format!("unknown flag bits {flags:#04x}")));
    }
    let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if d == 0 {
        return Err(parse_err(path, at(10), "d must be positive"));
    }
    let labeled = flags & FLAG_LABELED != 0;
    let expected = 14 + 8 * n * d + if labeled { 4 * n } else { 0 };
    if bytes.len() != expected {
        return Err(parse_err(
            path,
            at(bytes.len().min(expected)),
            format!("expected {expected} bytes for n={n}, d={d}, found {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(n * d);
    for (k, chunk) in bytes[14..14 + 8 * n * d].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(parse_err(path, at(14 + 8 * k), "non-finite value"));
        }
        data.push(v);
    }
    let labels = if labeled {
        let base = 14 + 8 * n * d;
        let mut l = Vec::with_capacity(n);
        for (k, chunk) in bytes[base..].chunks_exact(4).enumerate() {
            let v = i32::from_le_bytes(chunk.try_into().unwrap());
            if v < 0 {
                return Err(parse_err(path, at(base + 4 * k), format!("negative label {v}")));
            }
            l.push(v as u32);
        }
        Some(l)
    } else {
        None
    };
    let mut m = FeatureMatrix::new(d, data, labels)?;
    if flags & FLAG_NORMALIZED != 0 {
        m.check_unit_ball()?;
        m.normalized = true;
    }
    Ok(m)
}
