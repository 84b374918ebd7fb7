//! CSV and file helpers.

use std::fs;
use std::path::Path;

use dipsym::geometry::Point;

use crate::CliError;

const HEADERS: [&str; 3] = ["x", "y", "z"];

pub fn header(dim: usize) -> String {
    HEADERS[..dim].join(",")
}

/// Points as CSV with a `x[,y[,z]]` header and shortest round-trip decimals.
pub fn points_to_csv(points: &[Point<f64>], dim: usize) -> String {
    let mut out = header(dim);
    out.push('\n');
    for p in points {
        let row: Vec<String> = p.coords().iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a data file; the header fixes the dimension. Errors name the
/// offending line.
pub fn points_from_csv(text: &str) -> Result<(usize, Vec<Point<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let head = reader
        .headers()
        .map_err(|e| CliError::Usage(format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = head.iter().collect();
    let dim = match names.as_slice() {
        ["x"] => 1,
        ["x", "y"] => 2,
        ["x", "y", "z"] => 3,
        _ => {
            return Err(CliError::Usage(format!(
                "line 1: expected header x, x,y or x,y,z, found {names:?}"
            )))
        }
    };
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Usage(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dim {
            return Err(CliError::Usage(format!(
                "line {line}: expected {dim} fields, found {}",
                record.len()
            )));
        }
        let coords = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::Usage(format!("line {line}: invalid number")))?;
        let p = Point::new(&coords).map_err(|e| CliError::Usage(format!("line {line}: {e}")))?;
        points.push(p);
    }
    Ok((dim, points))
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let pts = vec![Point::xy(0.1, -2.5e-300).unwrap(), Point::xy(1.0 / 3.0, 7.0).unwrap()];
        let text = points_to_csv(&pts, 2);
        assert!(text.starts_with("x,y\n0.1,-2.5e-300\n"));
        let (dim, back) = points_from_csv(&text).unwrap();
        assert_eq!((dim, back), (2, pts));
    }

    #[test]
    fn empty_and_bad_rows() {
        assert_eq!(points_from_csv("x\n").unwrap(), (1, vec![]));
        let err = points_from_csv("x,y\n1,2\n3,abc\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = points_from_csv("x,y\n1,2\n3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(points_from_csv("a,b\n1,2\n").is_err());
        assert!(points_from_csv("x\nNaN\n").is_err());
    }
}
