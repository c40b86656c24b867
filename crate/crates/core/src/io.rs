//! File formats: dense matrices as headerless CSV, candidate sets and configs
//! as JSON. Floats are written with 17 significant digits so a write/read
//! round trip is bit-exact.

use std::io::{self, Write};

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramian::CandidateSet;
use crate::linalg::DenseMatrix;

/// Formats one float the way every writer in this crate does.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parses a dense matrix: one row per line, comma separated, no header.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row_index = rows.len();
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v = field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: col + 1,
                message: format!("row {row_index}: {field:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: col + 1,
                    message: format!("row {row_index}: non-finite value {field:?}"),
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    column: row.len().min(first.len()) + 1,
                    message: format!("row {row_index} has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DenseMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

pub fn read_matrix_csv(path: &std::path::Path) -> Result<DenseMatrix> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_csv<W: Write>(m: &DenseMatrix, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..m.nrows() {
        w.write_record(m.row(i).iter().map(|&v| format_f64(v)))
            .map_err(|e| Error::Io(io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn matrix_to_csv(m: &DenseMatrix) -> String {
    let mut buf = Vec::new();
    write_matrix_csv(m, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

/// Row-major nested arrays, as found in JSON documents.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DenseMatrix> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!(
            "row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    Ok(DenseMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// JSON form of a [`CandidateSet`]: each entry of `columns` is one candidate
/// input vector; `base` is an optional row-major `n x p` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidatesFile {
    pub columns: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Vec<Vec<f64>>>,
}

impl CandidatesFile {
    pub fn into_candidate_set(self, n: usize) -> Result<CandidateSet> {
        let columns = self
            .columns
            .into_iter()
            .map(DVector::from_vec)
            .collect::<Vec<_>>();
        let base = self.base.as_deref().map(matrix_from_rows).transpose()?;
        CandidateSet::new(columns, base, n)
    }

    pub fn from_candidate_set(set: &CandidateSet) -> Self {
        CandidatesFile {
            columns: set.columns().iter().map(|c| c.iter().copied().collect()).collect(),
            base: set.base().map(matrix_to_rows),
        }
    }
}

pub fn parse_candidates_json(text: &str, n: usize) -> Result<CandidateSet> {
    from_json_str::<CandidatesFile>(text)?.into_candidate_set(n)
}

/// Deserializes JSON, reporting syntax and schema errors with their position.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Pretty JSON with every float written as `{:.16e}`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat::default());
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(io::Error::other(e)))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Default)]
struct FixedFloat {
    pretty: serde_json::ser::PrettyFormatter<'static>,
}

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.pretty.$name(w $(, $arg)*)
        })*
    };
}

impl serde_json::ser::Formatter for FixedFloat {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_parses_with_comments_and_spaces() {
        let m = parse_matrix_csv("# A\n-1, 0\n\n0 ,-2\n").unwrap();
        assert_eq!(m, DenseMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]));
    }

    #[test]
    fn ragged_row_names_the_row() {
        let err = parse_matrix_csv("1,2\n3\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("row 1"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn bad_number_reports_column() {
        match parse_matrix_csv("1,2\n3,x\n").unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 2)),
            e => panic!("unexpected {e:?}"),
        }
        assert!(parse_matrix_csv("1,inf\n").is_err());
        assert!(parse_matrix_csv("1,NaN\n").is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = DenseMatrix::from_row_slice(2, 3, &[0.1, -1.0 / 3.0, 1e-300, f64::MAX, -0.0, 5e-324]);
        let back = parse_matrix_csv(&matrix_to_csv(&m)).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_floats_are_fixed_width() {
        let s = to_json_string(&vec![0.5, 1.0 / 3.0]).unwrap();
        assert!(s.contains("5.0000000000000000e-1"), "{s}");
        let back: Vec<f64> = from_json_str(&s).unwrap();
        assert_eq!(back[1].to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn candidates_json() {
        let set = parse_candidates_json(r#"{"columns": [[1, 0], [0, 1]], "base": [[1], [1]]}"#, 2).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.base().unwrap().shape(), (2, 1));
        assert!(parse_candidates_json(r#"{"columns": [[1, 0]], "extra": 1}"#, 2).is_err());
        assert!(parse_candidates_json(r#"{"columns": [[1, 0, 0]]}"#, 2).is_err());
        match parse_candidates_json("{\n\"columns\": [1,", 2).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e:?}"),
        }
    }
}
