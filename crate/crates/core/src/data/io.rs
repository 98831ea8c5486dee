//! Matrix and label persistence.
//!
//! Binary matrices start with a 16-byte header: the magic `SSA1`, the row
//! count and the column count as little-endian `u32`, and a `u32` reserved
//! field that must be zero. Row-major little-endian `f64` values follow, so a
//! file holds exactly `16 + 8 * rows * cols` bytes.
//!
//! CSV matrices have no header and one row per line. Label files have two
//! columns, `sample_index,class_id`, with `-` as the class of a background
//! sample.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SSA1";
pub const HEADER_LEN: usize = 16;

const BINARY: &str = "binary matrix";
const CSV_MATRIX: &str = "CSV matrix";
const LABELS: &str = "labels";

/// On-disk matrix encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Binary,
    Csv,
}

impl MatrixFormat {
    /// `.csv` selects CSV; every other extension is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

pub fn write_binary<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::invalid("too many rows for the binary format"))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::invalid("too many columns for the binary format"))?;
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4..8].copy_from_slice(&rows.to_le_bytes());
    header[8..12].copy_from_slice(&cols.to_le_bytes());
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(8 * m.ncols());
    for row in m.rows() {
        buf.clear();
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut header = [0u8; HEADER_LEN];
    read_full(&mut r, &mut header).map_err(|got| {
        Error::malformed(BINARY, format!("header needs {HEADER_LEN} bytes, found {got}"))
    })?;
    if &header[..4] != MAGIC {
        return Err(Error::malformed(BINARY, "bad magic bytes"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4-byte slice"));
    let (rows, cols, reserved) = (word(4) as usize, word(8) as usize, word(12));
    if reserved != 0 {
        return Err(Error::malformed(BINARY, format!("reserved header field is {reserved}, expected 0")));
    }
    let count = rows
        .checked_mul(cols)
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| Error::malformed(BINARY, format!("dimensions {rows}x{cols} overflow")))?;

    // Grow the buffer as data arrives so a lying header cannot force a huge
    // allocation up front.
    let mut values = Vec::with_capacity(count.min(1 << 20));
    let mut chunk = vec![0u8; 8 * 4096];
    while values.len() < count {
        let want = (count - values.len()).min(4096) * 8;
        read_full(&mut r, &mut chunk[..want]).map_err(|_| {
            Error::malformed(BINARY, format!("truncated data: expected {count} values"))
        })?;
        values.extend(
            chunk[..want]
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk"))),
        );
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::malformed(BINARY, "trailing bytes after data"));
    }
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length matches shape"))
}

/// Fills `buf`, returning the number of bytes read on a short read.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> std::result::Result<(), usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => return Err(got),
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(_) => return Err(got),
        }
    }
    Ok(())
}

pub fn encode_binary(m: &Array2<f64>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    write_binary(&mut out, m)?;
    Ok(out)
}

pub fn decode_binary(bytes: &[u8]) -> Result<Array2<f64>> {
    read_binary(bytes)
}

/// Writes values with the shortest representation that parses back to the
/// same `f64`.
pub fn write_csv_matrix<W: Write>(w: W, m: &Array2<f64>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.rows() {
        out.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv_matrix<R: Read>(r: R) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::malformed(CSV_MATRIX, e.to_string()))?;
        let line = i + 1;
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::malformed(
                    CSV_MATRIX,
                    format!("line {line}: expected {c} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v = field.parse::<f64>().map_err(|_| {
                Error::malformed(CSV_MATRIX, format!("line {line}: not a number: {field:?}"))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length matches shape"))
}

pub fn save_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => write_binary(file, m),
        MatrixFormat::Csv => write_csv_matrix(file, m),
    }
}

pub fn load_matrix(path: &Path) -> Result<Array2<f64>> {
    let file = BufReader::new(File::open(path)?);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Binary => read_binary(file),
        MatrixFormat::Csv => read_csv_matrix(file),
    }
}

pub fn write_labels<W: Write>(mut w: W, labels: &[Option<usize>]) -> Result<()> {
    for (i, label) in labels.iter().enumerate() {
        match label {
            Some(l) => writeln!(w, "{i},{l}")?,
            None => writeln!(w, "{i},-")?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a label file. Sample indices must run `0, 1, 2, ...` in order.
pub fn read_labels<R: Read>(r: R) -> Result<Vec<Option<usize>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::malformed(LABELS, e.to_string()))?;
        let line = i + 1;
        if record.len() != 2 {
            return Err(Error::malformed(
                LABELS,
                format!("line {line}: expected 2 fields, found {}", record.len()),
            ));
        }
        let index: usize = record[0].parse().map_err(|_| {
            Error::malformed(LABELS, format!("line {line}: bad sample index {:?}", &record[0]))
        })?;
        if index != i {
            return Err(Error::malformed(
                LABELS,
                format!("line {line}: sample index {index}, expected {i}"),
            ));
        }
        labels.push(parse_class(&record[1]).ok_or_else(|| {
            Error::malformed(LABELS, format!("line {line}: bad class id {:?}", &record[1]))
        })?);
    }
    Ok(labels)
}

/// `-` is background; anything else must be a non-negative integer.
pub(crate) fn parse_class(field: &str) -> Option<Option<usize>> {
    if field == "-" {
        Some(None)
    } else {
        field.parse().ok().map(Some)
    }
}

pub fn save_labels(path: &Path, labels: &[Option<usize>]) -> Result<()> {
    write_labels(BufWriter::new(File::create(path)?), labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<Option<usize>>> {
    read_labels(BufReader::new(File::open(path)?))
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("{other:?}")),
    }
}
