//! CSV helpers shared by the writers of every module.

use std::io::Write;

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // drop the sign of negative zero
        "0".to_string()
    } else {
        format!("{x}")
    }
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

pub(crate) fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::InvalidParameter(format!("csv write failed: {e}"))
}

pub(crate) fn flush_error(e: std::io::Error) -> crate::Error {
    crate::Error::InvalidParameter(format!("write failed: {e}"))
}
