//! Image manifests: one CSV row per image with
//! `image_path,left_x,left_y,right_x,right_y,class_id` (class `-` for
//! background). A first row whose coordinate fields are not numbers is taken
//! as a header and skipped.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use super::io::parse_class;
use crate::error::{Error, Result};

const FORMAT: &str = "manifest";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    pub left_eye: (f64, f64),
    pub right_eye: (f64, f64),
    pub class: Option<usize>,
}

/// Parses a manifest. Relative image paths are joined onto `base`.
pub fn read_manifest<R: Read>(r: R, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::malformed(FORMAT, e.to_string()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() != 6 {
            return Err(Error::malformed(
                FORMAT,
                format!("line {line}: expected 6 fields, found {}", record.len()),
            ));
        }
        let coords: Vec<Option<f64>> = (1..5)
            .map(|k| record[k].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if i == 0 && coords.iter().all(Option::is_none) {
            continue;
        }
        let mut xy = [0.0; 4];
        for (k, c) in coords.into_iter().enumerate() {
            xy[k] = c.ok_or_else(|| {
                Error::malformed(
                    FORMAT,
                    format!("line {line}: bad coordinate {:?}", &record[k + 1]),
                )
            })?;
        }
        if record[0].is_empty() {
            return Err(Error::malformed(FORMAT, format!("line {line}: empty image path")));
        }
        let class = parse_class(&record[5]).ok_or_else(|| {
            Error::malformed(FORMAT, format!("line {line}: bad class id {:?}", &record[5]))
        })?;
        entries.push(ManifestEntry {
            image_path: base.join(&record[0]),
            left_eye: (xy[0], xy[1]),
            right_eye: (xy[2], xy[3]),
            class,
        });
    }
    if entries.is_empty() {
        return Err(Error::malformed(FORMAT, "no image rows"));
    }
    Ok(entries)
}

/// Reads a manifest file, resolving image paths against its directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    read_manifest(BufReader::new(File::open(path)?), base)
}
