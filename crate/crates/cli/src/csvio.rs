//! Plain numeric CSV: no header, comma separated, `.` decimal, blank lines ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use rexdesign::Design;

use crate::CliError;

/// A dense row-major matrix read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

pub fn read_matrix(path: &Path) -> Result<Matrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text).map_err(|(line, msg)| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    })
}

/// Parses matrix text; errors carry the 1-based line number.
pub fn parse_matrix(text: &str) -> Result<Matrix, (usize, String)> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let mut count = 0;
        for field in line.split(',') {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| (lineno, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err((lineno, format!("`{field}` is not finite")));
            }
            data.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err((lineno, format!("expected {c} columns, found {count}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or((0, "no data rows".to_string()))?;
    Ok(Matrix { rows, cols, data })
}

pub fn format_matrix(rows: usize, cols: usize, at: impl Fn(usize, usize) -> f64) -> String {
    let mut out = String::new();
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| format!("{:.16e}", at(i, j))).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub const DESIGN_HEADER: &str = "index,weight";

/// Support points only, 1-based row indices, weights to 17 significant digits.
pub fn format_design(design: &Design) -> String {
    let mut out = String::with_capacity(32 * design.support_size() + 16);
    out.push_str(DESIGN_HEADER);
    out.push('\n');
    for &x in design.support() {
        out.push_str(&format!("{},{:.16e}\n", x + 1, design.weight(x)));
    }
    out
}

/// Reads a design file back into a weight vector over `n` points.
pub fn read_design(path: &Path, n: usize) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |line, msg: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut weights = vec![0.0; n];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == DESIGN_HEADER) {
            continue;
        }
        let (idx, w) = line
            .split_once(',')
            .ok_or_else(|| parse_err(i + 1, "expected `index,weight`".into()))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad index `{idx}`")))?;
        if idx == 0 || idx > n {
            return Err(parse_err(i + 1, format!("index {idx} outside 1..={n}")));
        }
        weights[idx - 1] = w
            .trim()
            .parse()
            .map_err(|_| parse_err(i + 1, format!("bad weight `{w}`")))?;
    }
    Ok(weights)
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(contents).map_err(|e| CliError::io(path, e))
}
