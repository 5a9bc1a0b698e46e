//! CSV emission and plain-text summaries of [`MseRecord`]s.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::harness::MseRecord;

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "parameter",
    "estimator",
    "snr_db",
    "n_antennas",
    "p_pilots",
    "mse",
    "crb",
    "mc_std_error",
    "trials",
    "seed",
];

fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

/// Writes the header and one row per record. Floats carry ten significant
/// digits; lines end in `\n`.
pub fn write_csv<W: Write>(records: &[MseRecord], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            r.parameter.as_str().to_string(),
            r.estimator.clone(),
            format!("{}", r.snr_db),
            r.n_antennas.to_string(),
            r.p_pilots.to_string(),
            sci(r.mse),
            sci(r.crb),
            sci(r.mc_std_error),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[MseRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Writes `records` to `path`, creating parent directories.
pub fn emit_csv(records: &[MseRecord], path: &Path) -> io::Result<()> {
    if records.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no records to write"));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, csv_string(records))
}

/// Fixed-width table for terminals.
pub fn summary(records: &[MseRecord]) -> String {
    let mut s = format!(
        "{:<10} {:<9} {:<24} {:>7} {:>4} {:>4} {:>13} {:>13} {:>11}\n",
        "experiment", "parameter", "estimator", "snr_db", "N", "P", "mse", "crb", "std_err"
    );
    for r in records {
        s.push_str(&format!(
            "{:<10} {:<9} {:<24} {:>7} {:>4} {:>4} {:>13.5e} {:>13.5e} {:>11.3e}\n",
            r.experiment,
            r.parameter.as_str(),
            r.estimator,
            r.snr_db,
            r.n_antennas,
            r.p_pilots,
            r.mse,
            r.crb,
            r.mc_std_error
        ));
    }
    s
}
