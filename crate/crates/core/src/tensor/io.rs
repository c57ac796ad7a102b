//! Text and JSON serialization.
//!
//! Text format:
//!
//! ```text
//! symtensor3 n=<N>
//! <i> <j> <k> <value>
//! ```
//!
//! with 1-based `i ≤ j ≤ k`; triples that are not listed are zero. Lines
//! starting with `#` are comments. Values are written with 17 significant
//! digits so that a write/parse cycle is bit-exact.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SymTensor3;
use crate::error::{Error, Result};

/// `v` with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(a: &SymTensor3) -> String {
    write_text_with_comments(a, &[])
}

/// Text form with `# `-prefixed comment lines placed after the header.
pub fn write_text_with_comments(a: &SymTensor3, comments: &[String]) -> String {
    let mut out = format!("symtensor3 n={}\n", a.n());
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    for (i, j, k, v) in a.entries() {
        if v != 0.0 {
            out.push_str(&format!("{} {} {} {}\n", i + 1, j + 1, k + 1, fmt_f64(v)));
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_text(src: &str) -> Result<SymTensor3> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let n = header
        .strip_prefix("symtensor3")
        .map(str::trim)
        .and_then(|rest| rest.strip_prefix("n="))
        .ok_or_else(|| parse_err(hline, "expected header `symtensor3 n=<N>`"))?
        .trim()
        .parse::<usize>()
        .map_err(|e| parse_err(hline, format!("bad dimension: {e}")))?;
    if n == 0 {
        return Err(parse_err(hline, "dimension must be positive"));
    }

    let mut a = SymTensor3::zeros(n);
    let mut seen = vec![false; super::packed_len(n)];
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected `i j k value`, found {} fields", fields.len()),
            ));
        }
        let mut idx = [0usize; 3];
        for (slot, f) in idx.iter_mut().zip(&fields[..3]) {
            let v: usize = f
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad index `{f}`: {e}")))?;
            if v == 0 || v > n {
                return Err(parse_err(lineno, format!("index {v} outside 1..={n}")));
            }
            *slot = v - 1;
        }
        if !(idx[0] <= idx[1] && idx[1] <= idx[2]) {
            return Err(parse_err(lineno, "indices must satisfy i ≤ j ≤ k"));
        }
        let value: f64 = fields[3]
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad value `{}`: {e}", fields[3])))?;
        if !value.is_finite() {
            return Err(parse_err(lineno, "value must be finite"));
        }
        let o = a.offset_sorted(idx[0], idx[1], idx[2]);
        if seen[o] {
            return Err(parse_err(lineno, "duplicate triple"));
        }
        seen[o] = true;
        a.data[o] = value;
    }
    Ok(a)
}

/// JSON mirror of the text format: `{"n": N, "entries": [[i, j, k, v], …]}`
/// with 1-based indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub n: usize,
    pub entries: Vec<(usize, usize, usize, f64)>,
}

impl From<&SymTensor3> for TensorJson {
    fn from(a: &SymTensor3) -> Self {
        Self {
            n: a.n(),
            entries: a
                .entries()
                .filter(|e| e.3 != 0.0)
                .map(|(i, j, k, v)| (i + 1, j + 1, k + 1, v))
                .collect(),
        }
    }
}

impl TryFrom<&TensorJson> for SymTensor3 {
    type Error = Error;

    fn try_from(t: &TensorJson) -> Result<Self> {
        if t.n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        let mut a = SymTensor3::zeros(t.n);
        let mut seen = vec![false; super::packed_len(t.n)];
        for (pos, &(i, j, k, v)) in t.entries.iter().enumerate() {
            if [i, j, k].iter().any(|&x| x == 0 || x > t.n) || !(i <= j && j <= k) {
                return Err(Error::InvalidArgument(format!(
                    "entry {pos}: bad triple ({i}, {j}, {k})"
                )));
            }
            let o = a.offset_sorted(i - 1, j - 1, k - 1);
            if seen[o] {
                return Err(Error::InvalidArgument(format!(
                    "entry {pos}: duplicate triple ({i}, {j}, {k})"
                )));
            }
            seen[o] = true;
            a.data[o] = v;
        }
        Ok(a)
    }
}

pub fn to_json(a: &SymTensor3) -> Result<String> {
    Ok(serde_json::to_string_pretty(&TensorJson::from(a))?)
}

pub fn from_json(src: &str) -> Result<SymTensor3> {
    let t: TensorJson = serde_json::from_str(src)?;
    SymTensor3::try_from(&t)
}

/// Parses either format, picking JSON when the first non-blank character is `{`.
pub fn parse_any(src: &str) -> Result<SymTensor3> {
    if src.trim_start().starts_with('{') {
        from_json(src)
    } else {
        parse_text(src)
    }
}

/// Whitespace-separated rows at 17 significant digits.
pub fn write_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(src: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| parse_err(i + 1, format!("bad value `{f}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(i + 1, "ragged matrix row"));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}
