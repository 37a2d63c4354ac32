//! CSV and JSON file formats.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which reads back
//! to the same `f64`.
//!
//! | table      | header            |
//! |------------|-------------------|
//! | block      | `m,k,value`       |
//! | ND matrix  | `j,m,n,re,im`     |
//! | samples    | `r,theta,re,im`   |
//! | figure     | `j,m,k,absF,xi`   |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::bounds::Figure1Row;
use crate::frechet::{NDPerturbation, TriangularBlock};
use crate::zernike::SpectralPerturbation;
use crate::{Error, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Output sink: a file, or stdout when the path is `None` or `-`.
pub fn create(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).map_err(io_err(p))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    if path == Path::new("-") {
        return Ok(Box::new(std::io::stdin().lock()));
    }
    let f = File::open(path).map_err(io_err(path))?;
    Ok(Box::new(BufReader::new(f)))
}

struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
    path: PathBuf,
}

impl<W: Write> CsvOut<W> {
    fn new(w: W, header: &[&str], path: &Path) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        inner.write_record(header).map_err(|e| csv_err(path, e))?;
        Ok(CsvOut {
            inner,
            path: path.to_path_buf(),
        })
    }

    fn row(&mut self, fields: &[String]) -> Result<()> {
        self.inner.write_record(fields).map_err(|e| csv_err(&self.path, e))
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(io_err(&self.path))
    }
}

fn sink_name(path: Option<&Path>) -> PathBuf {
    path.map_or_else(|| PathBuf::from("-"), Path::to_path_buf)
}

/// Lower-triangular entries of a block, `m` then `k` ascending.
pub fn write_block<W: Write>(w: W, block: &TriangularBlock, path: Option<&Path>) -> Result<()> {
    let mut out = CsvOut::new(w, &["m", "k", "value"], &sink_name(path))?;
    for m in 1..=block.rows() {
        for k in 1..=m.min(block.cols()) {
            out.row(&[m.to_string(), k.to_string(), fmt_f64(block.value(m, k))])?;
        }
    }
    out.finish()
}

/// Every admissible entry, ordered by `j`, then `m`.
pub fn write_nd<W: Write>(w: W, nd: &NDPerturbation, path: Option<&Path>) -> Result<()> {
    let mut out = CsvOut::new(w, &["j", "m", "n", "re", "im"], &sink_name(path))?;
    for (j, m, n, v) in nd.iter() {
        out.row(&[j.to_string(), m.to_string(), n.to_string(), fmt_f64(v.re), fmt_f64(v.im)])?;
    }
    out.finish()
}

pub fn write_samples<W: Write>(w: W, samples: &[(f64, f64, Complex64)], path: Option<&Path>) -> Result<()> {
    let mut out = CsvOut::new(w, &["r", "theta", "re", "im"], &sink_name(path))?;
    for &(r, t, v) in samples {
        out.row(&[fmt_f64(r), fmt_f64(t), fmt_f64(v.re), fmt_f64(v.im)])?;
    }
    out.finish()
}

pub fn write_figure1<W: Write>(w: W, rows: &[Figure1Row], path: Option<&Path>) -> Result<()> {
    let mut out = CsvOut::new(w, &["j", "m", "k", "absF", "xi"], &sink_name(path))?;
    for r in rows {
        out.row(&[r.j.to_string(), r.m.to_string(), r.k.to_string(), fmt_f64(r.abs_f), fmt_f64(r.xi)])?;
    }
    out.finish()
}

/// Parsed data rows with their 1-based line numbers, header checked.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let got = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}, found {}", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        });
    }
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| csv_err(path, e))?;
            let line = r.position().map_or(0, |p| p.line());
            if r.len() != header.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("expected {} fields, found {}", header.len(), r.len()),
                });
            }
            Ok((line, r))
        })
        .collect()
}

fn field<T: FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    rec[i].parse().map_err(|e: T::Err| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("field `{name}`: cannot parse {:?}: {e}", &rec[i]),
    })
}

/// Read an ND matrix; the window `mmax` is the largest `|m|` or `|n|`.
pub fn read_nd(path: &Path) -> Result<NDPerturbation> {
    let rows = read_rows(path, &["j", "m", "n", "re", "im"])?;
    let mut parsed = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let j: i64 = field(path, *line, rec, 0, "j")?;
        let m: i64 = field(path, *line, rec, 1, "m")?;
        let n: i64 = field(path, *line, rec, 2, "n")?;
        let re: f64 = field(path, *line, rec, 3, "re")?;
        let im: f64 = field(path, *line, rec, 4, "im")?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: *line,
            message,
        };
        if n - m != j {
            return Err(bad(format!("j={j} does not equal n-m={}", n - m)));
        }
        if m == 0 || n == 0 {
            return Err(bad("Fourier index 0 is not admissible".into()));
        }
        if !re.is_finite() || !im.is_finite() {
            return Err(bad("non-finite value".into()));
        }
        parsed.push((*line, m, n, Complex64::new(re, im)));
    }
    let mmax = parsed
        .iter()
        .map(|&(_, m, n, _)| m.unsigned_abs().max(n.unsigned_abs()))
        .max()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no data rows".into(),
        })? as usize;
    let mut nd = NDPerturbation::zeros(mmax);
    let mut seen = std::collections::HashSet::new();
    for (line, m, n, v) in parsed {
        if !seen.insert((m, n)) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate entry (m={m}, n={n})"),
            });
        }
        nd.set(m, n, v)?;
    }
    Ok(nd)
}

pub fn read_samples(path: &Path) -> Result<Vec<(f64, f64, Complex64)>> {
    read_rows(path, &["r", "theta", "re", "im"])?
        .iter()
        .map(|(line, rec)| {
            Ok((
                field(path, *line, rec, 0, "r")?,
                field(path, *line, rec, 1, "theta")?,
                Complex64::new(field(path, *line, rec, 2, "re")?, field(path, *line, rec, 3, "im")?),
            ))
        })
        .collect()
}

pub fn read_block(path: &Path, j_abs: usize) -> Result<TriangularBlock> {
    let rows = read_rows(path, &["m", "k", "value"])?;
    let mut cells = Vec::with_capacity(rows.len());
    for (line, rec) in &rows {
        let m: usize = field(path, *line, rec, 0, "m")?;
        let k: usize = field(path, *line, rec, 1, "k")?;
        let v: f64 = field(path, *line, rec, 2, "value")?;
        if m == 0 || k == 0 || k > m {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: *line,
                message: format!("(m={m}, k={k}) is not a lower-triangular position"),
            });
        }
        cells.push((m, k, v));
    }
    let m_max = cells.iter().map(|c| c.0).max().unwrap_or(0);
    let k_max = cells.iter().map(|c| c.1).max().unwrap_or(0);
    let mut entries = vec![0.0; m_max * k_max];
    for (m, k, v) in cells {
        entries[(m - 1) * k_max + (k - 1)] = v;
    }
    TriangularBlock::from_entries(j_abs, m_max, k_max, entries)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = open(path)?;
    serde_json::from_reader(reader).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

pub fn read_table(path: &Path) -> Result<SpectralPerturbation> {
    read_json(path)
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T, path: Option<&Path>) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(&sink_name(path)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frechet::{apply, assemble_block};
    use crate::zernike::ZernikeIndex;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("eitlin-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, -0.1, 1.0 / 3.0, 5e-324, f64::MAX, -1.234_567_890_123_456_7e-200] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
    }

    #[test]
    fn block_row_counts() {
        for (j, m, k, expect) in [(0, 2, 2, 3), (5, 10, 10, 55), (1, 6, 3, 15)] {
            let b = assemble_block(j, m, k).unwrap();
            let mut buf = Vec::new();
            write_block(&mut buf, &b, None).unwrap();
            let text = String::from_utf8(buf).unwrap();
            let lines: Vec<_> = text.lines().collect();
            assert_eq!(lines[0], "m,k,value");
            assert_eq!(lines.len() - 1, expect);
        }
    }

    #[test]
    fn block_file_round_trip() {
        let b = assemble_block(3, 7, 7).unwrap();
        let p = tmp("block.csv");
        write_block(File::create(&p).unwrap(), &b, Some(&p)).unwrap();
        assert_eq!(read_block(&p, 3).unwrap(), b);
    }

    #[test]
    fn nd_round_trip_is_exact() {
        let mut eta = SpectralPerturbation::zeros(3, 2);
        for (i, (idx, _)) in SpectralPerturbation::zeros(3, 2).iter().enumerate() {
            eta.set(idx.j, idx.k, Complex64::new(0.1 * i as f64, -1.0 / (i as f64 + 3.0))).unwrap();
        }
        let nd = apply(&eta, 6).unwrap();
        let p = tmp("nd.csv");
        write_nd(File::create(&p).unwrap(), &nd, Some(&p)).unwrap();
        assert_eq!(read_nd(&p).unwrap(), nd);
    }

    #[test]
    fn nd_parse_errors_carry_lines() {
        let p = tmp("bad.csv");
        std::fs::write(&p, "j,m,n,re,im\n1,1,2,0.5,0\n1,2,4,0,0\n").unwrap();
        match read_nd(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "j,m,n,re,im\n1,1,2,abc,0\n").unwrap();
        assert!(matches!(read_nd(&p), Err(Error::Parse { line: 2, .. })));
        std::fs::write(&p, "j,m,x,re,im\n").unwrap();
        assert!(matches!(read_nd(&p), Err(Error::Parse { line: 1, .. })));
        std::fs::write(&p, "j,m,n,re,im\n0,1,1,1,0\n0,1,1,1,0\n").unwrap();
        assert!(matches!(read_nd(&p), Err(Error::Parse { line: 3, .. })));
        std::fs::write(&p, "j,m,n,re,im\n0,1,1,1\n").unwrap();
        assert!(matches!(read_nd(&p), Err(Error::Parse { .. })));
        assert!(matches!(read_nd(&tmp("missing.csv")), Err(Error::Io { .. })));
    }

    #[test]
    fn samples_round_trip() {
        let s = vec![(0.5, 1.25, Complex64::new(1.0 / 7.0, -2.0)), (1.0, 0.0, Complex64::new(0.0, 0.0))];
        let p = tmp("samples.csv");
        write_samples(File::create(&p).unwrap(), &s, Some(&p)).unwrap();
        assert_eq!(read_samples(&p).unwrap(), s);
    }

    #[test]
    fn table_json_round_trip() {
        let eta = SpectralPerturbation::unit(2, 1, ZernikeIndex::new(-1, 1)).unwrap();
        let p = tmp("eta.json");
        write_json(File::create(&p).unwrap(), &eta, Some(&p)).unwrap();
        assert_eq!(read_table(&p).unwrap(), eta);
        std::fs::write(&p, "{\"jmax\": 1,\n \"kmax\": }").unwrap();
        assert!(matches!(read_table(&p), Err(Error::Parse { line: 2, .. })));
    }
}
