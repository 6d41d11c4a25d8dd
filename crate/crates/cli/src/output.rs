//! CSV emission: fixed headers, LF line endings, floats with 17 significant digits.

use std::fs;
use std::path::Path;

use crate::CliError;

pub const SWEEP_HEADER: [&str; 7] = [
    "delta",
    "m_i",
    "q",
    "error_Lq",
    "error_power_Ls",
    "weak_defect_max",
    "resolution_tag",
];

pub const ESTIMATE_HEADER: [&str; 5] = ["name", "lhs", "rhs", "realized_constant", "parameters"];

pub const LEMMA_HEADER: [&str; 5] = ["name", "samples", "violations", "worst_realized", "constant"];

/// `v` with 17 significant digits, enough to round-trip.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `header` and `rows` to `path`, creating parent directories.
pub fn emit_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let file = fs::File::create(path).map_err(io)?;
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}
