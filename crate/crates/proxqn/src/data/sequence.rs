//! Sequence-labeling dataset with feature-indexed storage over positions.

use super::{DataError, FeatureMatrixBuilder, FeatureIndexedMatrix};

/// Sparse feature vector of a single sequence position.
pub type PositionFeatures = Vec<(u32, f64)>;

/// A corpus of labeled sequences.
///
/// Positions of all sequences are flattened into one global position id space
/// (`position_offset(i) + t`), and the feature matrix is indexed by feature
/// over those position ids. Per-position feature vectors are not retained;
/// score tables are rebuilt from the columns of the nonzero model
/// coordinates, which is exactly the access pattern the feature-indexed
/// layout is good at.
#[derive(Debug)]
pub struct SequenceDataset {
    labels: Vec<Vec<u16>>,
    num_labels: usize,
    num_raw_features: usize,
    feature_index: FeatureIndexedMatrix,
    position_offsets: Vec<usize>,
    gold_flat: Vec<u16>,
    gold_bigram_counts: Vec<f64>,
}

impl SequenceDataset {
    /// Builds a dataset from per-sequence `(position features, labels)` pairs.
    pub fn new(
        sequences: Vec<(Vec<PositionFeatures>, Vec<usize>)>,
        num_labels: usize,
        num_raw_features: usize,
    ) -> Result<Self, DataError> {
        let mut position_offsets = Vec::with_capacity(sequences.len());
        let mut total_positions = 0usize;
        for (feats, labs) in &sequences {
            assert_eq!(
                feats.len(),
                labs.len(),
                "feature rows and labels must align per sequence"
            );
            assert!(!labs.is_empty(), "sequences must have length >= 1");
            position_offsets.push(total_positions);
            total_positions += labs.len();
        }

        let mut builder = FeatureMatrixBuilder::new(num_raw_features, total_positions);
        let mut labels = Vec::with_capacity(sequences.len());
        let mut gold_flat = Vec::with_capacity(total_positions);
        let mut gold_bigram_counts = vec![0.0; num_labels * num_labels];
        for (s, (feats, labs)) in sequences.into_iter().enumerate() {
            let offset = position_offsets[s];
            for (t, row) in feats.iter().enumerate() {
                for &(j, v) in row {
                    builder.push(j as usize, offset + t, v)?;
                }
            }
            for &y in &labs {
                assert!(y < num_labels, "label out of range");
                gold_flat.push(y as u16);
            }
            for t in 0..labs.len().saturating_sub(1) {
                gold_bigram_counts[labs[t] * num_labels + labs[t + 1]] += 1.0;
            }
            labels.push(labs.into_iter().map(|y| y as u16).collect());
        }

        Ok(SequenceDataset {
            labels,
            num_labels,
            num_raw_features,
            feature_index: builder.finish()?,
            position_offsets,
            gold_flat,
            gold_bigram_counts,
        })
    }

    pub fn num_sequences(&self) -> usize {
        self.labels.len()
    }

    pub fn num_positions(&self) -> usize {
        self.gold_flat.len()
    }

    /// Size of the label alphabet |Y|.
    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    /// Number of raw (already expanded) features J.
    pub fn num_raw_features(&self) -> usize {
        self.num_raw_features
    }

    pub fn feature_index(&self) -> &FeatureIndexedMatrix {
        &self.feature_index
    }

    /// Global position id of position `t` in sequence `i`.
    pub fn position_offset(&self, i: usize) -> usize {
        self.position_offsets[i]
    }

    pub fn sequence_len(&self, i: usize) -> usize {
        self.labels[i].len()
    }

    pub fn labels(&self, i: usize) -> &[u16] {
        &self.labels[i]
    }

    /// Gold label at a global position id.
    pub fn gold_at(&self, position: usize) -> usize {
        self.gold_flat[position] as usize
    }

    /// Empirical transition counts over gold label pairs, |Y| x |Y| row-major.
    pub fn gold_bigram_counts(&self) -> &[f64] {
        &self.gold_bigram_counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SequenceDataset {
        // two sequences: [0 -> 1 -> 1] and [1 -> 0]
        let s0 = (
            vec![vec![(0, 1.0)], vec![(0, 1.0), (2, 0.5)], vec![(1, 1.0)]],
            vec![0, 1, 1],
        );
        let s1 = (vec![vec![(2, 2.0)], vec![(0, 1.0)]], vec![1, 0]);
        SequenceDataset::new(vec![s0, s1], 2, 3).unwrap()
    }

    #[test]
    fn positions_are_flattened_in_order() {
        let d = toy();
        assert_eq!(d.num_positions(), 5);
        assert_eq!(d.position_offset(1), 3);
        assert_eq!(d.gold_at(3), 1);
        assert_eq!(d.feature_index().column(2), &[(1, 0.5), (3, 2.0)]);
    }

    #[test]
    fn gold_bigram_counts_cover_all_transitions() {
        let d = toy();
        // transitions: 0->1, 1->1, 1->0
        assert_eq!(d.gold_bigram_counts(), &[0.0, 1.0, 1.0, 1.0]);
    }
}
