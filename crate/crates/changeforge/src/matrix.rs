//! Results CSV: a header of testset names (after a label column), then one
//! row per method with AP values as decimal fractions.
//!
//! ```text
//! method,Office,Road
//! CUNet-EF Exp.7,0.971,0.850
//! ```

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use changeforge_core::metrics::ResultsMatrix;

use crate::error::{Error, Result};

pub fn parse_results<R: Read>(reader: R, path: &Path) -> Result<ResultsMatrix> {
    let csv_err = |source| Error::Csv { path: path.into(), source };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() < 2 {
        return Err(Error::format(path, "header needs a label column and at least one testset"));
    }
    let columns: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let label = rec.get(0).unwrap_or_default().to_string();
        let row = rec
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>().map_err(|_| {
                    Error::format(path, format!("row {} (`{label}`): `{cell}` is not a number", line + 2))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(label);
        values.push(row);
    }
    ResultsMatrix::new(rows, columns, values).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<ResultsMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_results(file, path)
}

/// Writes `method,distance` rows.
pub fn write_distances<W: Write>(out: W, m: &ResultsMatrix, distances: &[f64]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "distance"])?;
    for (label, d) in m.rows().iter().zip(distances) {
        w.write_record([label.as_str(), &format!("{d:.6}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labels_and_values() {
        let text = "method, A ,B\nm1,0.5,1.0\nm2,0.25,0\n";
        let m = parse_results(text.as_bytes(), Path::new("t.csv")).unwrap();
        assert_eq!(m.columns(), ["A", "B"]);
        assert_eq!(m.rows(), ["m1", "m2"]);
        assert_eq!(m.values()[1], vec![0.25, 0.0]);
    }

    #[test]
    fn rejects_bad_cells_and_shapes() {
        for bad in ["method,A\nm1,abc\n", "method,A,B\nm1,0.5\n", "method,A\nm1,57.5\n", "method\nm1\n"] {
            assert!(parse_results(bad.as_bytes(), Path::new("t.csv")).is_err(), "{bad}");
        }
    }

    #[test]
    fn distances_csv() {
        let m = parse_results("m,A\nx,1\ny,0.5\n".as_bytes(), Path::new("t")).unwrap();
        let mut out = Vec::new();
        write_distances(&mut out, &m, &[0.0, 0.5]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "method,distance\nx,0.000000\ny,0.500000\n");
    }
}
