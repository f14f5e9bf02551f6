use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, Record};
use crate::error::{Error, Result};

const HEADER: [&str; 4] = ["id", "proxy_score", "proxy_label", "oracle_label"];

/// Shortest round-trip representation, padded to at least nine significant digits.
fn format_score(score: f64) -> String {
    let mut s = format!("{score}");
    if !s.contains('.') && !s.contains('e') {
        s.push('.');
    }
    if !s.contains('e') {
        let digits = s
            .trim_start_matches(['0', '.'])
            .chars()
            .filter(char::is_ascii_digit)
            .count();
        let significant = if score == 0.0 { 1 } else { digits };
        for _ in significant..9 {
            s.push('0');
        }
    }
    s
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str, line: usize) -> Result<T> {
    let raw = field.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing column {name}"),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {name} value {raw:?}"),
    })
}

/// Reads a dataset from CSV text with header `id,proxy_score,proxy_label,oracle_label`.
pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {}, found {}",
                HEADER.join(","),
                names.join(",")
            ),
        });
    }
    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let line = row + 2;
        let rec = result.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let score: f64 = parse_field(rec.get(1), "proxy_score", line)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Parse {
                line,
                message: format!("proxy_score {score} outside [0, 1]"),
            });
        }
        records.push(Record::new(
            parse_field(rec.get(0), "id", line)?,
            score,
            parse_field(rec.get(2), "proxy_label", line)?,
            parse_field(rec.get(3), "oracle_label", line)?,
        ));
    }
    Dataset::new(records)
}

pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in dataset.records() {
        w.write_record([
            r.id.to_string(),
            format_score(r.proxy_score),
            r.proxy_label.to_string(),
            r.oracle_label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(dataset, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::d6;
    use super::*;
    use proptest::prelude::*;

    fn roundtrip(ds: &Dataset) -> Dataset {
        let mut buf = Vec::new();
        write_dataset(ds, &mut buf).unwrap();
        read_dataset(buf.as_slice()).unwrap()
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(0.5), "0.500000000");
        assert_eq!(format_score(1.0), "1.00000000");
        assert_eq!(format_score(0.0), "0.00000000");
        assert_eq!(format_score(0.123456789123), "0.123456789123");
        assert_eq!(format_score(0.05), "0.0500000000");
    }

    #[test]
    fn roundtrip_preserves_records() {
        let ds = d6();
        assert_eq!(roundtrip(&ds), ds);
    }

    #[test]
    fn header_only_is_empty() {
        let ds = read_dataset("id,proxy_score,proxy_label,oracle_label\n".as_bytes()).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text = "id,proxy_score,proxy_label,oracle_label\n0,0.5,1,1\n1,abc,0,0\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "id,proxy_score,proxy_label,oracle_label\n0,1.5,1,1\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let text = "id,score,proxy_label,oracle_label\n";
        assert!(matches!(
            read_dataset(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        save_dataset(&d6(), &path).unwrap();
        assert_eq!(load_dataset(&path).unwrap(), d6());
    }

    proptest! {
        #[test]
        fn arbitrary_scores_roundtrip(pairs in prop::collection::vec((0.0f64..=1.0, 0u32..3), 0..40)) {
            let ds = Dataset::from_scored_labels(&pairs).unwrap();
            prop_assert_eq!(roundtrip(&ds), ds);
        }
    }
}
