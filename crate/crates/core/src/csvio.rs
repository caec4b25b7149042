//! CSV conventions shared by the report, figure and fission outputs.

use std::io;

use crate::error::{Error, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads the numeric column named `x` from a headered CSV.
///
/// Other columns are ignored. Errors name the 1-based data row.
pub fn read_x_column<R: io::Read>(input: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::input(format!("input csv: {e}")))?;
    let col = headers
        .iter()
        .position(|h| h == "x")
        .ok_or_else(|| Error::input("input csv has no column named x"))?;
    let mut xs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::input(format!("input csv row {row}: {e}")))?;
        let field = rec
            .get(col)
            .ok_or_else(|| Error::input(format!("input csv row {row}: missing x")))?;
        let v: f64 = field
            .parse()
            .map_err(|_| Error::input(format!("input csv row {row}: {field:?} is not a number")))?;
        if !v.is_finite() {
            return Err(Error::input(format!(
                "input csv row {row}: x is not finite"
            )));
        }
        xs.push(v);
    }
    Ok(xs)
}
