//! Loader for the tab-separated OCR letter format.
//!
//! Each line is `id letter next_id word_id position fold p1 ... p128` with
//! binary pixels. `next_id = -1` ends a word; words are kept in file order.
//! Letters a..z map to labels 0..25 and each position is expanded to
//! degree-2 pixel features.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::degree2::{degree2_feature_count, expand_degree2_features};
use super::sequence::{PositionFeatures, SequenceDataset};
use super::DataError;

const NUM_PIXELS: usize = 128;
const META_COLUMNS: usize = 6;

/// Reads an OCR letter file into a [`SequenceDataset`].
pub fn load_ocr(path: impl AsRef<Path>) -> Result<SequenceDataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut sequences: Vec<(Vec<PositionFeatures>, Vec<usize>)> = Vec::new();
    let mut cur_feats: Vec<PositionFeatures> = Vec::new();
    let mut cur_labels: Vec<usize> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != META_COLUMNS + NUM_PIXELS {
            return Err(DataError::parse(
                path,
                line_no,
                format!(
                    "expected {} columns, found {}",
                    META_COLUMNS + NUM_PIXELS,
                    fields.len()
                ),
            ));
        }

        let letter = fields[1];
        let label = match letter.as_bytes() {
            [c @ b'a'..=b'z'] => (c - b'a') as usize,
            _ => {
                return Err(DataError::parse(
                    path,
                    line_no,
                    format!("unknown letter {letter:?}"),
                ))
            }
        };
        let next_id: i64 = fields[2].parse().map_err(|_| {
            DataError::parse(path, line_no, format!("bad next_id {:?}", fields[2]))
        })?;

        let mut pixels = [false; NUM_PIXELS];
        for (p, field) in fields[META_COLUMNS..].iter().enumerate() {
            pixels[p] = match *field {
                "0" => false,
                "1" => true,
                other => {
                    return Err(DataError::parse(
                        path,
                        line_no,
                        format!("non-binary pixel {other:?} at column {}", META_COLUMNS + p + 1),
                    ))
                }
            };
        }

        let features: PositionFeatures = expand_degree2_features(&pixels)
            .into_iter()
            .map(|j| (j, 1.0))
            .collect();
        cur_feats.push(features);
        cur_labels.push(label);

        if next_id == -1 {
            sequences.push((std::mem::take(&mut cur_feats), std::mem::take(&mut cur_labels)));
        }
    }
    if !cur_labels.is_empty() {
        // file ended mid-word; keep the partial word rather than dropping data
        sequences.push((cur_feats, cur_labels));
    }

    SequenceDataset::new(sequences, 26, degree2_feature_count(NUM_PIXELS))
}
