//! svmlight-style sparse text format: `label j:v j:v ...` per line.
//!
//! Feature indices may be 0-based or 1-based; the base is auto-detected over
//! the whole file (any index 0 means 0-based, otherwise 1-based indices are
//! shifted down by one).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::matrix::{FeatureIndexedMatrix, FeatureMatrixBuilder};
use super::DataError;

/// Optional feature rescaling applied at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// Keep values as stored in the file.
    #[default]
    None,
    /// Min-max scale each feature's stored values to [0, 1].
    MinMaxUnit,
}

/// Raw parse result: labels as written plus index/value pairs per instance,
/// already shifted to 0-based feature ids.
pub struct SvmlightFile {
    pub labels: Vec<String>,
    pub rows: Vec<Vec<(u32, f64)>>,
    pub num_features: usize,
}

/// Parses an svmlight file without interpreting labels.
pub fn parse_svmlight(path: impl AsRef<Path>) -> Result<SvmlightFile, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut labels = Vec::new();
    let mut raw_rows: Vec<Vec<(u64, f64)>> = Vec::new();
    let mut min_index = u64::MAX;
    let mut max_index = 0u64;
    let mut any = false;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let line = match line.split('#').next() {
            Some(l) => l.trim(),
            None => "",
        };
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens
            .next()
            .ok_or_else(|| DataError::parse(path, line_no, "missing label"))?
            .to_string();
        let mut row = Vec::new();
        for tok in tokens {
            let (j, v) = tok
                .split_once(':')
                .ok_or_else(|| DataError::parse(path, line_no, format!("bad pair {tok:?}")))?;
            let j: u64 = j
                .parse()
                .map_err(|_| DataError::parse(path, line_no, format!("bad index {j:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| DataError::parse(path, line_no, format!("bad value {v:?}")))?;
            if row.iter().any(|&(seen, _)| seen == j) {
                return Err(DataError::parse(
                    path,
                    line_no,
                    format!("duplicate feature index {j}"),
                ));
            }
            min_index = min_index.min(j);
            max_index = max_index.max(j);
            any = true;
            row.push((j, v));
        }
        labels.push(label);
        raw_rows.push(row);
    }

    let base = if any && min_index == 0 { 0 } else { 1 };
    let num_features = if any { (max_index + 1 - base) as usize } else { 0 };
    let rows = raw_rows
        .into_iter()
        .map(|row| row.into_iter().map(|(j, v)| ((j - base) as u32, v)).collect())
        .collect();

    Ok(SvmlightFile {
        labels,
        rows,
        num_features,
    })
}

pub(super) fn apply_scale(rows: &mut [Vec<(u32, f64)>], num_features: usize, mode: ScaleMode) {
    if mode == ScaleMode::None {
        return;
    }
    let mut lo = vec![f64::INFINITY; num_features];
    let mut hi = vec![f64::NEG_INFINITY; num_features];
    for row in rows.iter() {
        for &(j, v) in row {
            let j = j as usize;
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    for row in rows.iter_mut() {
        for (j, v) in row.iter_mut() {
            let j = *j as usize;
            let span = hi[j] - lo[j];
            *v = if span > 0.0 { (*v - lo[j]) / span } else { 1.0 };
        }
    }
}

/// Binary classification dataset with labels in {-1, +1}.
#[derive(Debug)]
pub struct BinaryDataset {
    labels: Vec<f64>,
    features: FeatureIndexedMatrix,
}

impl BinaryDataset {
    pub fn new(rows: &[Vec<(u32, f64)>], labels: Vec<f64>, num_features: usize) -> Result<Self, DataError> {
        assert_eq!(rows.len(), labels.len());
        Ok(BinaryDataset {
            labels,
            features: FeatureIndexedMatrix::from_instance_rows(rows, num_features)?,
        })
    }

    pub fn num_instances(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.num_features()
    }

    /// Label of instance `i`, -1.0 or +1.0.
    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn features(&self) -> &FeatureIndexedMatrix {
        &self.features
    }
}

/// Loads an svmlight file with +1/-1 labels.
pub fn load_svmlight_binary(
    path: impl AsRef<Path>,
    scale: ScaleMode,
) -> Result<BinaryDataset, DataError> {
    let path = path.as_ref();
    let mut parsed = parse_svmlight(path)?;
    apply_scale(&mut parsed.rows, parsed.num_features, scale);
    let mut labels = Vec::with_capacity(parsed.labels.len());
    for (i, raw) in parsed.labels.iter().enumerate() {
        let y = match raw.as_str() {
            "+1" | "1" => 1.0,
            "-1" => -1.0,
            other => {
                return Err(DataError::parse(
                    path,
                    i + 1,
                    format!("binary label must be +1 or -1, found {other:?}"),
                ))
            }
        };
        labels.push(y);
    }
    BinaryDataset::new(&parsed.rows, labels, parsed.num_features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn one_based_indices_are_shifted() {
        let f = write_tmp("+1 1:0.5 3:2.0\n-1 2:1.0\n");
        let d = load_svmlight_binary(f.path(), ScaleMode::None).unwrap();
        assert_eq!(d.num_features(), 3);
        assert_eq!(d.features().column(0), &[(0, 0.5)]);
        assert_eq!(d.features().column(2), &[(0, 2.0)]);
        assert_eq!(d.label(1), -1.0);
    }

    #[test]
    fn zero_based_indices_are_kept() {
        let f = write_tmp("+1 0:1.0 4:1.0\n");
        let d = load_svmlight_binary(f.path(), ScaleMode::None).unwrap();
        assert_eq!(d.num_features(), 5);
        assert_eq!(d.features().column(0), &[(0, 1.0)]);
    }

    #[test]
    fn duplicate_feature_index_is_an_error() {
        let f = write_tmp("+1 1:1.0 1:2.0\n");
        let err = load_svmlight_binary(f.path(), ScaleMode::None).unwrap_err();
        assert!(err.to_string().contains("duplicate feature index"), "{err}");
    }

    #[test]
    fn min_max_scaling_maps_to_unit_interval() {
        let f = write_tmp("+1 1:2.0\n-1 1:6.0\n+1 1:4.0\n");
        let d = load_svmlight_binary(f.path(), ScaleMode::MinMaxUnit).unwrap();
        // the scaled minimum becomes 0 and is dropped with the other zeros
        assert_eq!(d.features().column(0), &[(1, 1.0), (2, 0.5)]);
    }
}
