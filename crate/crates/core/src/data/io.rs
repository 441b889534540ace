//! Dataset serialization.
//!
//! CSV is long format with a required `subject,time,variable,value` header and
//! 1-based integer ids. The binary dump is little-endian:
//! `b"SUGARDAT"`, `u32` version, `u32` reserved, `u64` N, T, d, then
//! `N*T*d` `f64` values in `(subject, time, variable)` order.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use ndarray::Array3;

use super::Dataset;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"SUGARDAT";
pub const BINARY_VERSION: u32 = 1;

const HEADER: [&str; 4] = ["subject", "time", "variable", "value"];

pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(HEADER).map_err(map)?;
    for ((i, t, j), v) in data.values().indexed_iter() {
        w.write_record(&[
            (i + 1).to_string(),
            (t + 1).to_string(),
            (j + 1).to_string(),
            v.to_string(),
        ])
        .map_err(map)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R, provenance: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Ingest {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != HEADER {
        return Err(Error::Ingest {
            line: 1,
            message: format!("expected header {}, found {}", HEADER.join(","), got.join(",")),
        });
    }

    let mut cells: BTreeMap<(i64, i64, i64), f64> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Ingest {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 4 {
            return Err(Error::Ingest {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let int = |idx: usize| -> Result<i64> {
            record[idx].parse::<i64>().map_err(|_| Error::Ingest {
                line,
                message: format!("field `{}` is not an integer: {:?}", HEADER[idx], &record[idx]),
            })
        };
        let (i, t, j) = (int(0)?, int(1)?, int(2)?);
        let value: f64 = record[3].parse().map_err(|_| Error::Ingest {
            line,
            message: format!("value is not a number: {:?}", &record[3]),
        })?;
        if !value.is_finite() {
            return Err(Error::Ingest {
                line,
                message: "value is not finite".into(),
            });
        }
        if cells.insert((i, t, j), value).is_some() {
            return Err(Error::Ingest {
                line,
                message: format!("duplicate entry for subject {i}, time {t}, variable {j}"),
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::Ingest {
            line: 2,
            message: "no data rows".into(),
        });
    }

    let subjects: BTreeSet<i64> = cells.keys().map(|k| k.0).collect();
    let times: BTreeSet<i64> = cells.keys().map(|k| k.1).collect();
    let vars: BTreeSet<i64> = cells.keys().map(|k| k.2).collect();
    let d = vars.len();
    if vars.iter().copied().ne(1..=d as i64) {
        return Err(Error::Ingest {
            line: 0,
            message: format!("variables must be numbered 1..={d}"),
        });
    }
    let expected = subjects.len() * times.len() * d;
    if cells.len() != expected {
        return Err(Error::Ingest {
            line: 0,
            message: format!(
                "incomplete grid: {} entries for {} subjects x {} times x {} variables",
                cells.len(),
                subjects.len(),
                times.len(),
                d
            ),
        });
    }
    let s_index: BTreeMap<i64, usize> = subjects.iter().enumerate().map(|(a, &b)| (b, a)).collect();
    let t_index: BTreeMap<i64, usize> = times.iter().enumerate().map(|(a, &b)| (b, a)).collect();
    let mut values = Array3::zeros((subjects.len(), times.len(), d));
    for ((i, t, j), v) in cells {
        values[[s_index[&i], t_index[&t], (j - 1) as usize]] = v;
    }
    Dataset::new(values, provenance)
}

pub fn write_binary<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let (n, t, d) = data.values().dim();
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&BINARY_VERSION.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    for dim in [n, t, d] {
        out.write_all(&(dim as u64).to_le_bytes())?;
    }
    for v in data.values().iter() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R, provenance: &str) -> Result<Dataset> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Ingest {
            line: 0,
            message: "not a dataset dump (bad magic)".into(),
        });
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != BINARY_VERSION {
        return Err(Error::Ingest {
            line: 0,
            message: format!("unsupported dump version {version}"),
        });
    }
    input.read_exact(&mut word)?;
    let mut dims = [0usize; 3];
    let mut long = [0u8; 8];
    for dim in &mut dims {
        input.read_exact(&mut long)?;
        *dim = u64::from_le_bytes(long) as usize;
    }
    let count = dims[0]
        .checked_mul(dims[1])
        .and_then(|x| x.checked_mul(dims[2]))
        .ok_or_else(|| Error::Ingest {
            line: 0,
            message: "dimensions overflow".into(),
        })?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut long)?;
        values.push(f64::from_le_bytes(long));
    }
    let values = Array3::from_shape_vec((dims[0], dims[1], dims[2]), values)
        .map_err(|e| Error::Ingest {
            line: 0,
            message: e.to_string(),
        })?;
    Dataset::new(values, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let v = Array3::from_shape_fn((2, 3, 2), |(i, t, j)| i as f64 - 0.5 * t as f64 + 1e-3 * j as f64);
        Dataset::new(v, "sample").unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("subject,time,variable,value\n1,1,1,0\n"));
        let back = read_csv(&buf[..], "rt").unwrap();
        assert_eq!(back.values(), sample().values());
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert_eq!(&buf[..8], BINARY_MAGIC);
        assert_eq!(buf.len(), 8 + 4 + 4 + 24 + 12 * 8);
        let back = read_binary(&buf[..], "rt").unwrap();
        assert_eq!(back.values(), sample().values());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "subject,time,variable,value\n1,1,1,0.5\n1,2,1,abc\n";
        match read_csv(text.as_bytes(), "bad") {
            Err(Error::Ingest { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("not a number"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let missing_header = "a,b,c,d\n1,1,1,0\n";
        assert!(matches!(
            read_csv(missing_header.as_bytes(), "bad"),
            Err(Error::Ingest { line: 1, .. })
        ));
    }

    #[test]
    fn csv_rejects_incomplete_grid_and_duplicates() {
        let text = "subject,time,variable,value\n1,1,1,0\n1,1,2,0\n1,2,1,0\n";
        assert!(read_csv(text.as_bytes(), "bad").is_err());
        let dup = "subject,time,variable,value\n1,1,1,0\n1,1,1,1\n";
        assert!(matches!(read_csv(dup.as_bytes(), "bad"), Err(Error::Ingest { line: 3, .. })));
    }

    #[test]
    fn binary_rejects_bad_magic_and_version() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        let mut wrong = buf.clone();
        wrong[0] = b'X';
        assert!(read_binary(&wrong[..], "x").is_err());
        let mut wrong = buf;
        wrong[8] = 9;
        assert!(read_binary(&wrong[..], "x").is_err());
    }
}
