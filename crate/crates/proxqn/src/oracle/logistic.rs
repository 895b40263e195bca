//! l1-logistic regression oracle, the desk-scale testbed loss.

use std::sync::atomic::{AtomicU64, Ordering};

use super::{log1p_exp, OracleError, SmoothLossOracle};
use crate::data::BinaryDataset;

/// Logistic loss `sum_i ln(1 + exp(-y_i w.x_i))` over a binary dataset.
pub struct LogisticOracle<'a> {
    data: &'a BinaryDataset,
    /// r_i = d loss_i / d margin_i; gradient column j is sum r_i x_ij.
    residuals: Option<Vec<f64>>,
    passes: AtomicU64,
}

impl<'a> LogisticOracle<'a> {
    pub fn new(data: &'a BinaryDataset) -> Self {
        LogisticOracle {
            data,
            residuals: None,
            passes: AtomicU64::new(0),
        }
    }

    fn margins(&self, w: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.data.num_instances()];
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                for &(i, v) in self.data.features().column(j) {
                    m[i as usize] += wj * v;
                }
            }
        }
        m
    }
}

impl SmoothLossOracle for LogisticOracle<'_> {
    fn dimension(&self) -> usize {
        self.data.num_features()
    }

    fn num_instances(&self) -> usize {
        self.data.num_instances()
    }

    fn loss_at(&self, w: &[f64]) -> f64 {
        self.passes.fetch_add(1, Ordering::Relaxed);
        self.margins(w)
            .iter()
            .enumerate()
            .map(|(i, &m)| log1p_exp(-self.data.label(i) * m))
            .sum()
    }

    fn full_inference(&mut self, w: &[f64]) -> f64 {
        self.passes.fetch_add(1, Ordering::Relaxed);
        let margins = self.margins(w);
        let mut loss = 0.0;
        let mut residuals = Vec::with_capacity(margins.len());
        for (i, &m) in margins.iter().enumerate() {
            let y = self.data.label(i);
            loss += log1p_exp(-y * m);
            // sigma(-ym) = 1 / (1 + exp(ym))
            residuals.push(-y / (1.0 + (y * m).exp()));
        }
        self.residuals = Some(residuals);
        loss
    }

    fn partial_gradient(&self, j: usize) -> Result<f64, OracleError> {
        if j >= self.dimension() {
            return Err(OracleError::CoordinateOutOfRange {
                coordinate: j,
                dimension: self.dimension(),
            });
        }
        let residuals = self.residuals.as_ref().ok_or(OracleError::StaleCache)?;
        Ok(self
            .data
            .features()
            .column(j)
            .iter()
            .map(|&(i, v)| residuals[i as usize] * v)
            .sum())
    }

    fn inference_passes(&self) -> u64 {
        self.passes.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BinaryDataset {
        let rows = vec![
            vec![(0, 1.0), (1, 2.0)],
            vec![(0, -1.0)],
            vec![(1, 0.5), (2, 1.0)],
        ];
        BinaryDataset::new(&rows, vec![1.0, -1.0, 1.0], 3).unwrap()
    }

    #[test]
    fn zero_weights_give_n_ln2_and_half_label_moment() {
        let data = toy();
        let mut oracle = LogisticOracle::new(&data);
        let w = vec![0.0; 3];
        let loss = oracle.full_inference(&w);
        assert!((loss - 3.0 * 2f64.ln()).abs() < 1e-12);
        // gradient = -1/2 sum_i y_i x_i
        let expected = [-0.5 * (1.0 - (-1.0)), -0.5 * (2.0 + 0.5), -0.5 * 1.0];
        for (j, &e) in expected.iter().enumerate() {
            assert!((oracle.partial_gradient(j).unwrap() - e).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_gradient_before_inference_is_an_error() {
        let data = toy();
        let oracle = LogisticOracle::new(&data);
        assert!(matches!(
            oracle.partial_gradient(0),
            Err(OracleError::StaleCache)
        ));
    }

    #[test]
    fn passes_count_loss_and_inference() {
        let data = toy();
        let mut oracle = LogisticOracle::new(&data);
        let w = vec![0.1, 0.0, -0.2];
        oracle.loss_at(&w);
        oracle.full_inference(&w);
        assert_eq!(oracle.inference_passes(), 2);
    }

    #[test]
    fn partial_gradient_reads_only_its_column() {
        let data = toy();
        let mut oracle = LogisticOracle::new(&data);
        oracle.full_inference(&vec![0.0; 3]);
        data.features().reset_column_read_counts();
        oracle.partial_gradient(1).unwrap();
        assert_eq!(data.features().column_read_counts(), vec![0, 1, 0]);
    }
}
