//! Feature-indexed sparse matrix.

use std::sync::atomic::{AtomicU64, Ordering};

use super::DataError;

/// Sparse matrix stored one column per feature.
///
/// Column `j` holds the `(instance, value)` pairs for every instance where
/// feature `j` is nonzero, sorted by instance id. Iterating a column visits
/// exactly the instances related to that feature, never the full instance
/// count.
///
/// Every column read through [`FeatureIndexedMatrix::column`] bumps a
/// per-column access counter. The counters exist so tests (and the efficiency
/// checks in the acceptance suite) can verify that a solver iteration touched
/// only working-set columns; they are atomic, so shared read-only use from
/// multiple threads stays safe.
#[derive(Debug)]
pub struct FeatureIndexedMatrix {
    num_features: usize,
    num_instances: usize,
    columns: Vec<Vec<(u32, f64)>>,
    column_reads: Vec<AtomicU64>,
}

impl FeatureIndexedMatrix {
    /// Number of feature columns.
    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Number of instances (rows in the conventional orientation).
    pub fn num_instances(&self) -> usize {
        self.num_instances
    }

    /// Nonzero entries of feature `j`, sorted by instance id.
    pub fn column(&self, j: usize) -> &[(u32, f64)] {
        self.column_reads[j].fetch_add(1, Ordering::Relaxed);
        &self.columns[j]
    }

    /// Nonzeros stored for feature `j`.
    pub fn column_nnz(&self, j: usize) -> usize {
        self.columns[j].len()
    }

    /// Total stored nonzeros.
    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// How many times each column has been read since the last reset.
    pub fn column_read_counts(&self) -> Vec<u64> {
        self.column_reads
            .iter()
            .map(|c| c.load(Ordering::Relaxed))
            .collect()
    }

    pub fn reset_column_read_counts(&self) {
        for c in &self.column_reads {
            c.store(0, Ordering::Relaxed);
        }
    }

    /// Builds the matrix from instance-major rows. Zeros are dropped.
    pub fn from_instance_rows(
        rows: &[Vec<(u32, f64)>],
        num_features: usize,
    ) -> Result<Self, DataError> {
        let mut builder = FeatureMatrixBuilder::new(num_features, rows.len());
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                builder.push(j as usize, i, v)?;
            }
        }
        builder.finish()
    }
}

/// Incremental builder; validates ids and rejects duplicate (feature, instance) pairs.
pub struct FeatureMatrixBuilder {
    num_features: usize,
    num_instances: usize,
    columns: Vec<Vec<(u32, f64)>>,
}

impl FeatureMatrixBuilder {
    pub fn new(num_features: usize, num_instances: usize) -> Self {
        FeatureMatrixBuilder {
            num_features,
            num_instances,
            columns: vec![Vec::new(); num_features],
        }
    }

    /// Records one nonzero. Zero values are silently dropped.
    pub fn push(&mut self, feature: usize, instance: usize, value: f64) -> Result<(), DataError> {
        if feature >= self.num_features {
            return Err(DataError::FeatureOutOfRange {
                feature,
                num_features: self.num_features,
            });
        }
        if instance >= self.num_instances {
            return Err(DataError::InstanceOutOfRange {
                instance,
                num_instances: self.num_instances,
            });
        }
        if !value.is_finite() {
            return Err(DataError::NonFiniteValue { feature, value });
        }
        if value == 0.0 {
            return Ok(());
        }
        self.columns[feature].push((instance as u32, value));
        Ok(())
    }

    pub fn finish(mut self) -> Result<FeatureIndexedMatrix, DataError> {
        for (j, col) in self.columns.iter_mut().enumerate() {
            col.sort_unstable_by_key(|&(i, _)| i);
            for pair in col.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(DataError::DuplicateEntry {
                        feature: j,
                        instance: pair[0].0 as usize,
                    });
                }
            }
            col.shrink_to_fit();
        }
        let column_reads = (0..self.num_features).map(|_| AtomicU64::new(0)).collect();
        Ok(FeatureIndexedMatrix {
            num_features: self.num_features,
            num_instances: self.num_instances,
            columns: self.columns,
            column_reads,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_iteration_touches_only_stored_entries() {
        let rows = vec![
            vec![(0, 1.0), (2, 3.0)],
            vec![(2, -1.0)],
            vec![(0, 0.5), (1, 2.0), (2, 1.0)],
        ];
        let m = FeatureIndexedMatrix::from_instance_rows(&rows, 4).unwrap();
        assert_eq!(m.num_instances(), 3);
        assert_eq!(m.column(0), &[(0, 1.0), (2, 0.5)]);
        assert_eq!(m.column(1), &[(2, 2.0)]);
        assert_eq!(m.column(2).len(), 3);
        assert!(m.column(3).is_empty());
        assert_eq!(m.column_read_counts(), vec![1, 1, 1, 1]);
        m.reset_column_read_counts();
        m.column(2);
        assert_eq!(m.column_read_counts(), vec![0, 0, 1, 0]);
    }

    #[test]
    fn zeros_are_dropped() {
        let rows = vec![vec![(0, 0.0), (1, 2.0)]];
        let m = FeatureIndexedMatrix::from_instance_rows(&rows, 2).unwrap();
        assert_eq!(m.column_nnz(0), 0);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn duplicate_entry_is_rejected() {
        let rows = vec![vec![(1, 1.0), (1, 2.0)]];
        let err = FeatureIndexedMatrix::from_instance_rows(&rows, 2).unwrap_err();
        assert!(matches!(err, DataError::DuplicateEntry { feature: 1, instance: 0 }));
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        let mut b = FeatureMatrixBuilder::new(2, 2);
        assert!(b.push(2, 0, 1.0).is_err());
        assert!(b.push(0, 5, 1.0).is_err());
    }
}
