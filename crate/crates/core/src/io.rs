//! CSV ingestion and export.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{GroupStructure, GroupedSample, MissingPolicy, PriceTable};
use crate::error::{Error, Result};

fn parse_cell(s: &str) -> Result<Option<f64>> {
    let t = s.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    t.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Parse(format!("cannot parse {t:?} as a number")))
}

fn looks_like_date(s: &str) -> bool {
    let t = s.trim();
    t.len() >= 8 && t.as_bytes()[4] == b'-' && t[..4].bytes().all(|b| b.is_ascii_digit())
}

/// Read a numeric table with a header row. A leading column whose header is
/// `date` (any case) or whose first value looks like `YYYY-MM-DD` is kept as
/// row labels.
pub fn read_table<R: Read>(reader: R) -> Result<PriceTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if header.is_empty() {
        return Err(Error::Parse("CSV has no columns".into()));
    }
    let has_dates = header[0].eq_ignore_ascii_case("date")
        || records.first().map(|r| looks_like_date(&r[0])).unwrap_or(false);
    let skip = usize::from(has_dates);
    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != header.len() {
            return Err(Error::Parse(format!("row {} has {} fields, header has {}", i + 1, rec.len(), header.len())));
        }
        if has_dates {
            labels.push(rec[0].to_string());
        }
        let row = rec
            .iter()
            .skip(skip)
            .map(parse_cell)
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(PriceTable {
        rows,
        column_labels: header[skip..].to_vec(),
        row_labels: has_dates.then_some(labels),
    })
}

pub fn read_table_path(path: &Path) -> Result<PriceTable> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_table(f)
}

/// Turn a table into a sample, handling rows with missing cells per `policy`.
pub fn table_to_sample(table: &PriceTable, structure: GroupStructure, policy: MissingPolicy) -> Result<GroupedSample> {
    let q = table.column_labels.len();
    if q != structure.q() {
        return Err(Error::Dimension(format!(
            "groups {:?} need {} columns, input has {q}",
            structure.sizes(),
            structure.q()
        )));
    }
    let mut kept = Vec::new();
    let mut labels = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        match row.iter().position(Option::is_none) {
            Some(c) if policy == MissingPolicy::Error => return Err(Error::MissingValue { row: r, column: c }),
            Some(_) => continue,
            None => {
                kept.push(row.iter().map(|v| v.unwrap()).collect::<Vec<f64>>());
                if let Some(l) = &table.row_labels {
                    labels.push(l[r].clone());
                }
            }
        }
    }
    if kept.len() < 2 {
        return Err(Error::Dimension(format!("need at least 2 complete rows, found {}", kept.len())));
    }
    let data = DMatrix::from_fn(kept.len(), q, |i, j| kept[i][j]);
    let row_labels = table.row_labels.as_ref().map(|_| labels);
    GroupedSample::with_labels(data, structure, table.column_labels.clone(), row_labels)
}

/// Write a matrix as CSV with the given header, using the shortest
/// round-trip float formatting.
pub fn write_matrix_csv<W: Write>(writer: W, header: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    let mut buf = Vec::with_capacity(m.ncols());
    for i in 0..m.nrows() {
        buf.clear();
        for j in 0..m.ncols() {
            buf.push(m[(i, j)].to_string());
        }
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_dates_and_missing() {
        let src = "date,a,b\n2020-01-01,1.0,2\n2020-01-02,NA,3\n2020-01-03,1.5,\n2020-01-06,2,4\n";
        let t = read_table(src.as_bytes()).unwrap();
        assert_eq!(t.column_labels, vec!["a", "b"]);
        assert_eq!(t.row_labels.as_ref().unwrap().len(), 4);
        assert_eq!(t.rows[1][0], None);
        assert_eq!(t.rows[2][1], None);
        let s = table_to_sample(&t, GroupStructure::new(vec![1, 1]).unwrap(), MissingPolicy::DropRow).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.row_labels().unwrap(), &["2020-01-01", "2020-01-06"]);
    }

    #[test]
    fn reads_plain_numeric() {
        let t = read_table("x,y\n1,2\n3,4\n".as_bytes()).unwrap();
        assert!(t.row_labels.is_none());
        assert_eq!(t.rows, vec![vec![Some(1.0), Some(2.0)], vec![Some(3.0), Some(4.0)]]);
        assert!(read_table("x,y\n1,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, 2.5e-10, 0.999_999_999_999]);
        let mut out = Vec::new();
        write_matrix_csv(&mut out, &["u1".into(), "u2".into()], &m).unwrap();
        let t = read_table(out.as_slice()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(t.rows[i][j], Some(m[(i, j)]));
            }
        }
    }
}
