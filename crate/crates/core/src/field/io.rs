//! Flat CSV encoding of fields: one row per node with the node index, its
//! coordinates and the value. The grid travels in a JSON header.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! field survives a write/read cycle bit for bit.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{GridSpec, ScalarField};
use crate::error::{Error, Result};

const AXIS_NAMES: [&str; 2] = ["x0", "x1"];

pub fn write_field_csv<W: Write>(field: &ScalarField, out: W) -> Result<()> {
    let grid = field.grid();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index"];
    header.extend_from_slice(&AXIS_NAMES[..grid.dim]);
    header.push("value");
    w.write_record(&header)?;
    for (i, v) in field.values().iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(grid.node(i).iter().map(|c| c.to_string()));
        row.push(v.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads values written by [`write_field_csv`] back onto `grid`.
pub fn read_field_csv<R: Read>(grid: &GridSpec, input: R) -> Result<ScalarField> {
    let mut r = csv::Reader::from_reader(input);
    let mut values = vec![f64::NAN; grid.len()];
    let mut seen = vec![false; grid.len()];
    for record in r.records() {
        let record = record?;
        let parse = |k: usize| -> Result<f64> {
            record
                .get(k)
                .ok_or_else(|| Error::Input("short CSV row".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Input(format!("bad number in CSV: {e}")))
        };
        let index = record
            .get(0)
            .and_then(|s| s.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Input("bad node index in CSV".into()))?;
        if index >= grid.len() {
            return Err(Error::GridMismatch(format!(
                "node index {index} out of range"
            )));
        }
        values[index] = parse(grid.dim + 1)?;
        seen[index] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::GridMismatch(format!(
            "CSV has no row for node {missing}"
        )));
    }
    ScalarField::new(grid.clone(), values)
}

pub fn write_field_files(field: &ScalarField, csv_path: &Path, header_path: &Path) -> Result<()> {
    write_field_csv(field, BufWriter::new(File::create(csv_path)?))?;
    let mut header = BufWriter::new(File::create(header_path)?);
    serde_json::to_writer_pretty(&mut header, field.grid())?;
    header.write_all(b"\n")?;
    Ok(())
}

pub fn read_field_files(csv_path: &Path, header_path: &Path) -> Result<ScalarField> {
    let grid: GridSpec = serde_json::from_reader(File::open(header_path)?)?;
    grid.validate()?;
    read_field_csv(&grid, File::open(csv_path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let g = GridSpec::from_box(&[0.0, 0.0], &[1.0, 1.0], 0.5).unwrap();
        let f = ScalarField::from_fn(&g, |x| x[0] + 0.1 * x[1]).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,x0,x1,value"));
        assert_eq!(lines.next(), Some("0,0,0,0"));
        assert_eq!(lines.nth(3), Some("4,0.5,0.5,0.55"));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(values in proptest::collection::vec(-1e6f64..1e6, 15)) {
            let g = GridSpec::new(vec![-0.3, 2.0], 0.1, vec![5, 3]).unwrap();
            let f = ScalarField::new(g.clone(), values).unwrap();
            let mut buf = Vec::new();
            write_field_csv(&f, &mut buf).unwrap();
            let back = read_field_csv(&g, buf.as_slice()).unwrap();
            prop_assert_eq!(back, f);
        }
    }
}
