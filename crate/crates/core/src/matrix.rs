//! Row-major sparse matrices and their text interchange format.
//!
//! The format is line oriented:
//!
//! ```text
//! <n_rows> <n_cols>
//! 0:0.9 2:0.1
//! 1:1.0
//! ```
//!
//! Every row line holds space-separated `index:value` pairs with strictly
//! ascending 0-based column indices. Binary matrices may drop the `:value`
//! part (implied 1). An empty line is a row without entries.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::prediction::PredictionRow;

/// Largest probability kept after loading. Coverage updates divide by
/// `1 - eta * y`, which must stay away from zero.
pub const MAX_PROBABILITY: f64 = 0.999_999_999;

/// What the stored values mean; controls validation on load.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    /// Marginal label probabilities in `[0, 1]`, clamped to [`MAX_PROBABILITY`].
    Probabilities,
    /// 0/1 matrices (labels, predictions); every stored value is 1.
    Binary,
    /// Values in `[0, 1]` kept as-is (PLT node scores).
    Scores,
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRowMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

/// Borrowed view of one matrix row.
#[derive(Clone, Copy, Debug)]
pub struct SparseRow<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Value at column `col`, 0 when not stored.
    pub fn get(&self, col: u32) -> f64 {
        match self.indices.binary_search(&col) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    /// Scatters the row into a dense buffer (which must be zeroed).
    pub fn scatter(&self, dense: &mut [f64]) {
        for (j, v) in self.iter() {
            dense[j as usize] = v;
        }
    }

    /// Undoes [`SparseRow::scatter`].
    pub fn clear(&self, dense: &mut [f64]) {
        for &j in self.indices {
            dense[j as usize] = 0.0;
        }
    }
}

impl SparseRowMatrix {
    /// An `n_rows x n_cols` matrix without stored entries.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        SparseRowMatrix {
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(col, value)` lists, validating index order.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        let mut builder = Builder::new(n_cols);
        for (i, row) in rows.into_iter().enumerate() {
            for w in row.windows(2) {
                if w[0].0 >= w[1].0 {
                    return Err(Error::Validation(format!(
                        "row {i}: column indices not strictly ascending"
                    )));
                }
            }
            if let Some(&(j, _)) = row.last() {
                if j as usize >= n_cols {
                    return Err(Error::Validation(format!(
                        "row {i}: column {j} out of range (n_cols = {n_cols})"
                    )));
                }
            }
            builder.push_row(row);
        }
        Ok(builder.finish())
    }

    /// Builds a matrix from dense rows, storing only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut builder = Builder::new(n_cols);
        for row in rows {
            assert_eq!(row.len(), n_cols, "ragged dense input");
            builder.push_row(
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j as u32, v)),
            );
        }
        builder.finish()
    }

    /// Binary matrix with one row per prediction.
    pub fn from_predictions(preds: &[PredictionRow], n_cols: usize) -> Self {
        let mut builder = Builder::new(n_cols);
        for row in preds {
            builder.push_row(row.labels().iter().map(|&j| (j, 1.0)));
        }
        builder.finish()
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseRow<'_>> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn get(&self, i: usize, j: u32) -> f64 {
        self.row(i).get(j)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|r| {
                let mut d = vec![0.0; self.n_cols];
                r.scatter(&mut d);
                d
            })
            .collect()
    }

    /// Per-column sums.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for row in self.rows() {
            for (j, v) in row.iter() {
                sums[j as usize] += v;
            }
        }
        sums
    }

    /// Reads every row as a prediction row of exactly `k` labels.
    pub fn to_predictions(&self, k: usize) -> Result<Vec<PredictionRow>> {
        self.rows()
            .enumerate()
            .map(|(i, r)| {
                if r.len() != k {
                    return Err(Error::Validation(format!(
                        "prediction row {i} has {} labels, expected exactly {k}",
                        r.len()
                    )));
                }
                PredictionRow::new(r.indices.to_vec(), self.n_cols)
            })
            .collect()
    }

    /// Same matrix keeping only rows in `order`, in that order.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut builder = Builder::new(self.n_cols);
        for &i in order {
            builder.push_row(self.row(i).iter());
        }
        builder.finish()
    }

    /// Parses the text format.
    pub fn parse(text: &str, kind: MatrixKind) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing header line"))?;
        let (n_rows, n_cols) = parse_header(header)?;

        let mut builder = Builder::new(n_cols);
        let mut entries = Vec::new();
        for _ in 0..n_rows {
            let (lineno, line) = lines.next().ok_or_else(|| {
                Error::parse(
                    builder.rows() + 2,
                    format!("expected {n_rows} rows, found {}", builder.rows()),
                )
            })?;
            entries.clear();
            parse_row(line, lineno, n_cols, kind, &mut entries)?;
            builder.push_row(entries.iter().copied());
        }
        for (lineno, line) in lines {
            if !line.trim().is_empty() {
                return Err(Error::parse(
                    lineno,
                    format!("unexpected content after {n_rows} rows"),
                ));
            }
        }
        Ok(builder.finish())
    }

    pub fn load(path: impl AsRef<Path>, kind: MatrixKind) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, kind)
    }

    /// Serializes the matrix. With `binary`, rows are written as bare indices.
    pub fn write_to<W: Write>(&self, mut out: W, binary: bool) -> io::Result<()> {
        writeln!(out, "{} {}", self.n_rows(), self.n_cols)?;
        let mut line = String::new();
        for row in self.rows() {
            line.clear();
            for (pos, (j, v)) in row.iter().enumerate() {
                if pos > 0 {
                    line.push(' ');
                }
                if binary {
                    let _ = write!(line, "{j}");
                } else {
                    let _ = write!(line, "{j}:{}", format_value(v));
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self, binary: bool) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf, binary).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save(&self, path: impl AsRef<Path>, binary: bool) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = io::BufWriter::new(file);
        self.write_to(&mut out, binary)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Writes predictions as a binary matrix.
pub fn save_predictions(path: impl AsRef<Path>, preds: &[PredictionRow], n_cols: usize) -> Result<()> {
    SparseRowMatrix::from_predictions(preds, n_cols).save(path, true)
}

/// Formats a value with 9 significant digits, dropping trailing zeros.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("valid float literal");
    format!("{rounded}")
}

struct Builder {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl Builder {
    fn new(n_cols: usize) -> Self {
        Builder {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    fn push_row(&mut self, entries: impl IntoIterator<Item = (u32, f64)>) {
        for (j, v) in entries {
            self.indices.push(j);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    fn finish(self) -> SparseRowMatrix {
        SparseRowMatrix {
            n_cols: self.n_cols,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
        }
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let mut next = |what: &str| -> Result<usize> {
        let tok = fields
            .next()
            .ok_or_else(|| Error::parse(1, format!("malformed header: missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::parse(1, format!("malformed header: bad {what} {tok:?}")))
    };
    let n_rows = next("row count")?;
    let n_cols = next("column count")?;
    if fields.next().is_some() {
        return Err(Error::parse(1, "malformed header: trailing fields"));
    }
    if n_cols > u32::MAX as usize {
        return Err(Error::parse(1, "column count too large"));
    }
    Ok((n_rows, n_cols))
}

fn parse_row(
    line: &str,
    lineno: usize,
    n_cols: usize,
    kind: MatrixKind,
    out: &mut Vec<(u32, f64)>,
) -> Result<()> {
    let mut prev: Option<u32> = None;
    for tok in line.split_whitespace() {
        let (idx_str, val_str) = match tok.split_once(':') {
            Some((i, v)) => (i, Some(v)),
            None => (tok, None),
        };
        let idx: u32 = idx_str
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad index {idx_str:?}")))?;
        if idx as usize >= n_cols {
            return Err(Error::parse(
                lineno,
                format!("index {idx} out of range (n_cols = {n_cols})"),
            ));
        }
        if let Some(p) = prev {
            if idx <= p {
                return Err(Error::parse(
                    lineno,
                    format!("non-ascending indices ({p} then {idx})"),
                ));
            }
        }
        prev = Some(idx);

        let value = match val_str {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| Error::parse(lineno, format!("bad value {s:?}")))?,
            None if kind == MatrixKind::Binary => 1.0,
            None => return Err(Error::parse(lineno, format!("missing value for index {idx}"))),
        };
        let value = match kind {
            MatrixKind::Binary => {
                if value != 1.0 {
                    return Err(Error::parse(
                        lineno,
                        format!("binary matrix value must be 1, got {value}"),
                    ));
                }
                value
            }
            MatrixKind::Probabilities | MatrixKind::Scores => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::parse(
                        lineno,
                        format!("value {value} out of range [0, 1]"),
                    ));
                }
                if kind == MatrixKind::Probabilities {
                    value.min(MAX_PROBABILITY)
                } else {
                    value
                }
            }
        };
        out.push((idx, value));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_and_clamps() {
        let m = SparseRowMatrix::parse("2 3\n0:0.9 2:0.1\n1:1.0\n", MatrixKind::Probabilities)
            .unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (2, 3));
        assert_eq!(m.get(0, 0), 0.9);
        assert_eq!(m.get(0, 2), 0.1);
        assert_eq!(m.get(1, 1), MAX_PROBABILITY);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn rejects_non_ascending() {
        let err = SparseRowMatrix::parse("1 2\n1:0.5 0:0.5\n", MatrixKind::Probabilities)
            .unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("non-ascending"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn empty_row_is_valid() {
        let m = SparseRowMatrix::parse("2 4\n\n3:0.2\n", MatrixKind::Probabilities).unwrap();
        assert!(m.row(0).is_empty());
        assert_eq!(m.row(1).len(), 1);
    }

    #[test]
    fn reports_line_numbers() {
        let err = SparseRowMatrix::parse("3 2\n0:0.1\n1:0.2\n5:0.1\n", MatrixKind::Probabilities)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");

        let err = SparseRowMatrix::parse("2 2\n0:1.5\n\n", MatrixKind::Probabilities).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = SparseRowMatrix::parse("x 2\n", MatrixKind::Binary).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");

        let err = SparseRowMatrix::parse("3 2\n0\n", MatrixKind::Binary).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn binary_rows_accept_bare_indices() {
        let m = SparseRowMatrix::parse("2 3\n0 2\n1:1\n", MatrixKind::Binary).unwrap();
        assert_eq!(m.row(0).indices, &[0, 2]);
        assert_eq!(m.row(1).values, &[1.0]);
        assert!(SparseRowMatrix::parse("1 3\n0:0.5\n", MatrixKind::Binary).is_err());
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(0.9), "0.9");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333");
        assert_eq!(format_value(MAX_PROBABILITY), "0.999999999");
        assert_eq!(format_value(123456.7891234), "123456.789");
    }

    #[test]
    fn save_then_load_text() {
        let m = SparseRowMatrix::parse("2 3\n0:0.25 2:0.5\n\n", MatrixKind::Probabilities).unwrap();
        let text = m.to_text(false);
        assert_eq!(text, "2 3\n0:0.25 2:0.5\n\n");
        let back = SparseRowMatrix::parse(&text, MatrixKind::Probabilities).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn from_rows_validates() {
        assert!(SparseRowMatrix::from_rows(3, vec![vec![(2, 0.1), (1, 0.2)]]).is_err());
        assert!(SparseRowMatrix::from_rows(3, vec![vec![(3, 0.1)]]).is_err());
        let m = SparseRowMatrix::from_rows(3, vec![vec![(0, 0.1), (2, 0.2)], vec![]]).unwrap();
        assert_eq!(m.nnz(), 2);
    }
}
