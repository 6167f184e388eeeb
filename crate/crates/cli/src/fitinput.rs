//! Reads `P0(t)` samples from trajectory or matrix CSVs.

use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// Samples of one curve with its nominal `r` (NaN when unknown).
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub r_nominal: f64,
    pub samples: Vec<(f64, f64)>,
}

fn schema(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {msg}", path.display()))
}

fn number(path: &Path, row: usize, column: &str, cell: &str) -> Result<Option<f64>, CliError> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| schema(path, format!("row {row}, column '{column}': '{cell}' is not a number")))
}

/// `r` recorded in the metadata line, else the `_r<value>` suffix of the file stem.
fn nominal_r(path: &Path, text: &str) -> f64 {
    let from_meta = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .and_then(|l| serde_json::from_str::<Value>(l.trim()).ok())
        .and_then(|m| m.get("r").and_then(Value::as_f64));
    from_meta
        .or_else(|| {
            let stem = path.file_stem()?.to_str()?;
            stem.rsplit_once("_r")?.1.parse().ok()
        })
        .unwrap_or(f64::NAN)
}

pub fn read_curves(path: &Path) -> Result<Vec<Curve>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| schema(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let rows: Vec<csv::StringRecord> =
        reader.records().collect::<Result<_, _>>().map_err(|e| schema(path, e))?;
    let col = |name: &str| headers.iter().position(|h| h == name);

    if let (Some(ti), Some(pi)) = (col("t"), col("p0")) {
        let mut samples = Vec::with_capacity(rows.len());
        for (k, rec) in rows.iter().enumerate() {
            let t = number(path, k + 1, "t", &rec[ti])?;
            let p = number(path, k + 1, "p0", &rec[pi])?;
            match (t, p) {
                (Some(t), Some(p)) => samples.push((t, p)),
                (None, _) => return Err(schema(path, format!("row {}, column 't': empty cell", k + 1))),
                (Some(_), None) => {}
            }
        }
        return Ok(vec![Curve { r_nominal: nominal_r(path, &text), samples }]);
    }
    if headers.first().map(String::as_str) == Some("r") {
        if headers.len() < 2 {
            return Err(schema(path, "matrix has no time columns"));
        }
        let times = headers[1..]
            .iter()
            .enumerate()
            .map(|(j, h)| {
                h.parse::<f64>()
                    .map_err(|_| schema(path, format!("column {}: header '{h}' is not a time", j + 2)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let mut curves = Vec::with_capacity(rows.len());
        for (k, rec) in rows.iter().enumerate() {
            let r = number(path, k + 1, "r", &rec[0])?
                .ok_or_else(|| schema(path, format!("row {}, column 'r': empty cell", k + 1)))?;
            let mut samples = Vec::with_capacity(times.len());
            for (j, &t) in times.iter().enumerate() {
                if let Some(p) = number(path, k + 1, &headers[j + 1], &rec[j + 1])? {
                    samples.push((t, p));
                }
            }
            curves.push(Curve { r_nominal: r, samples });
        }
        return Ok(curves);
    }
    let missing: Vec<&str> = ["t", "p0"].into_iter().filter(|c| col(c).is_none()).collect();
    Err(schema(
        path,
        format!(
            "unrecognized columns [{}]: a trajectory needs columns 't' and 'p0' (missing: {}), a matrix needs first column 'r'",
            headers.join(", "),
            missing.join(", ")
        ),
    ))
}
