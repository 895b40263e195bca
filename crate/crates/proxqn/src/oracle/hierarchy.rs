//! Hierarchical classification CRF oracle.
//!
//! Labels live on the leaves of a class taxonomy; the score of a leaf is the
//! sum of `w_k . x` over the classes on its root path. Inference is a
//! downward pass accumulating path scores followed by a softmax over leaves
//! and an upward pass summing leaf posteriors into every internal class.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::{logsumexp, OracleError, SmoothLossOracle};
use crate::data::TaxonomyDataset;

/// Coordinate layout of the hierarchical model: weight matrix W is K x J
/// row-major, coordinate `(k, j)` at `k * J + j`.
#[derive(Debug, Clone, Copy)]
pub struct HierModel {
    num_classes: usize,
    num_raw_features: usize,
}

impl HierModel {
    pub fn new(num_classes: usize, num_raw_features: usize) -> Self {
        HierModel {
            num_classes,
            num_raw_features,
        }
    }

    pub fn for_dataset(data: &TaxonomyDataset) -> Self {
        HierModel::new(data.taxonomy().num_classes(), data.num_features())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_raw_features(&self) -> usize {
        self.num_raw_features
    }

    pub fn dimension(&self) -> usize {
        self.num_classes * self.num_raw_features
    }

    pub fn index(&self, class: usize, feature: usize) -> usize {
        class * self.num_raw_features + feature
    }

    pub fn class_of(&self, coordinate: usize) -> usize {
        coordinate / self.num_raw_features
    }

    pub fn feature_of(&self, coordinate: usize) -> usize {
        coordinate % self.num_raw_features
    }
}

/// Result of the downward-upward pass for one instance.
#[derive(Debug, Clone)]
pub struct TreeMessages {
    /// Path score alpha(k) per class.
    pub path_scores: Vec<f64>,
    /// Upward sums beta(k): total posterior mass of leaves under k.
    pub upward: Vec<f64>,
    pub log_z: f64,
}

/// Downward-upward inference for one instance given per-class scores
/// `s_k = w_k . x`.
pub fn tree_downward_upward(scores: &[f64], taxonomy: &crate::data::Taxonomy) -> TreeMessages {
    let k_total = taxonomy.num_classes();
    assert_eq!(scores.len(), k_total);
    let mut path_scores = vec![0.0; k_total];
    for &k in taxonomy.topological_order() {
        let k = k as usize;
        path_scores[k] = scores[k]
            + taxonomy
                .parent(k)
                .map(|p| path_scores[p])
                .unwrap_or(0.0);
    }
    let leaf_scores: Vec<f64> = taxonomy
        .leaves()
        .iter()
        .map(|&y| path_scores[y as usize])
        .collect();
    let log_z = logsumexp(&leaf_scores);

    let mut upward = vec![0.0; k_total];
    for &y in taxonomy.leaves() {
        upward[y as usize] = (path_scores[y as usize] - log_z).exp();
    }
    for &k in taxonomy.topological_order().iter().rev() {
        let k = k as usize;
        if !taxonomy.is_leaf(k) {
            upward[k] = taxonomy
                .children(k)
                .iter()
                .map(|&c| upward[c as usize])
                .sum();
        }
    }
    TreeMessages {
        path_scores,
        upward,
        log_z,
    }
}

/// Hierarchical classification oracle over a [`TaxonomyDataset`].
pub struct HierOracle<'a> {
    data: &'a TaxonomyDataset,
    model: HierModel,
    /// beta(k) per instance, N x K row-major.
    upward: Option<Vec<f64>>,
    passes: AtomicU64,
}

impl<'a> HierOracle<'a> {
    pub fn new(data: &'a TaxonomyDataset) -> Self {
        HierOracle {
            data,
            model: HierModel::for_dataset(data),
            upward: None,
            passes: AtomicU64::new(0),
        }
    }

    pub fn model(&self) -> &HierModel {
        &self.model
    }

    /// Per-instance per-class scores `s[i*K + k] = w_k . x_i` from the
    /// nonzero weights; reads only columns with a nonzero coordinate.
    pub fn build_scores(&self, w: &[f64]) -> Vec<f64> {
        let k_total = self.model.num_classes;
        let mut scores = vec![0.0; self.data.num_instances() * k_total];
        let mut active: Vec<(usize, f64)> = Vec::new();
        for j in 0..self.model.num_raw_features {
            active.clear();
            for k in 0..k_total {
                let wv = w[self.model.index(k, j)];
                if wv != 0.0 {
                    active.push((k, wv));
                }
            }
            if active.is_empty() {
                continue;
            }
            for &(i, v) in self.data.features().column(j) {
                let row = i as usize * k_total;
                for &(k, wv) in &active {
                    scores[row + k] += wv * v;
                }
            }
        }
        scores
    }

    fn instance_loss(&self, instance: usize, messages: &TreeMessages) -> f64 {
        messages.log_z - messages.path_scores[self.data.label(instance)]
    }
}

impl SmoothLossOracle for HierOracle<'_> {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn num_instances(&self) -> usize {
        self.data.num_instances()
    }

    fn loss_at(&self, w: &[f64]) -> f64 {
        self.passes.fetch_add(1, Ordering::Relaxed);
        let k_total = self.model.num_classes;
        let scores = self.build_scores(w);
        scores
            .par_chunks(k_total)
            .enumerate()
            .map(|(i, s)| self.instance_loss(i, &tree_downward_upward(s, self.data.taxonomy())))
            .collect::<Vec<f64>>()
            .into_iter()
            .sum()
    }

    fn full_inference(&mut self, w: &[f64]) -> f64 {
        self.passes.fetch_add(1, Ordering::Relaxed);
        let k_total = self.model.num_classes;
        let scores = self.build_scores(w);
        let mut upward = vec![0.0; self.data.num_instances() * k_total];
        let loss: f64 = scores
            .par_chunks(k_total)
            .zip(upward.par_chunks_mut(k_total))
            .enumerate()
            .map(|(i, (s, up))| {
                let messages = tree_downward_upward(s, self.data.taxonomy());
                up.copy_from_slice(&messages.upward);
                self.instance_loss(i, &messages)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        self.upward = Some(upward);
        loss
    }

    fn partial_gradient(&self, coordinate: usize) -> Result<f64, OracleError> {
        if coordinate >= self.dimension() {
            return Err(OracleError::CoordinateOutOfRange {
                coordinate,
                dimension: self.dimension(),
            });
        }
        let upward = self.upward.as_ref().ok_or(OracleError::StaleCache)?;
        let k_total = self.model.num_classes;
        let class = self.model.class_of(coordinate);
        let feature = self.model.feature_of(coordinate);
        let taxonomy = self.data.taxonomy();
        Ok(self
            .data
            .features()
            .column(feature)
            .iter()
            .map(|&(i, v)| {
                let i = i as usize;
                let on_path = taxonomy.on_path(class, self.data.label(i));
                (upward[i * k_total + class] - if on_path { 1.0 } else { 0.0 }) * v
            })
            .sum())
    }

    fn inference_passes(&self) -> u64 {
        self.passes.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Taxonomy, TaxonomyDataset};

    fn two_leaf_dataset() -> TaxonomyDataset {
        let (taxonomy, _) = Taxonomy::from_edges(&[(0, 1), (0, 2)]).unwrap();
        let rows = vec![vec![(0, 1.0)], vec![(0, 1.0), (1, 1.0)]];
        TaxonomyDataset::new(taxonomy, vec![1, 2], &rows, 2).unwrap()
    }

    #[test]
    fn zero_weights_give_uniform_leaf_posterior() {
        let data = two_leaf_dataset();
        let scores = vec![0.0; 3];
        let m = tree_downward_upward(&scores, data.taxonomy());
        assert!((m.upward[1] - 0.5).abs() < 1e-15);
        assert!((m.upward[2] - 0.5).abs() < 1e-15);
        assert!((m.upward[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ln3_leaf_weight_gives_three_quarters_posterior() {
        let data = two_leaf_dataset();
        let scores = vec![0.0, 3f64.ln(), 0.0];
        let m = tree_downward_upward(&scores, data.taxonomy());
        assert!((m.upward[1] - 0.75).abs() < 1e-15);
        assert!((m.upward[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_at_zero_has_path_indicator_structure() {
        let data = two_leaf_dataset();
        let mut oracle = HierOracle::new(&data);
        let w = vec![0.0; oracle.dimension()];
        let loss = oracle.full_inference(&w);
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-12);
        // class 1 (leaf of instance 0), feature 0 on for both instances:
        // instance 0: (0.5 - 1) * 1, instance 1: (0.5 - 0) * 1
        let g = oracle.partial_gradient(oracle.model().index(1, 0)).unwrap();
        assert!(g.abs() < 1e-15);
        // the root is on every path: (1 - 1) everywhere
        let g = oracle.partial_gradient(oracle.model().index(0, 0)).unwrap();
        assert!(g.abs() < 1e-15);
        // class 2, feature 1 only on instance 1 whose gold is 2
        let g = oracle.partial_gradient(oracle.model().index(2, 1)).unwrap();
        assert!((g - (0.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn loss_at_matches_full_inference() {
        let data = two_leaf_dataset();
        let mut oracle = HierOracle::new(&data);
        let mut w = vec![0.0; oracle.dimension()];
        w[oracle.model().index(1, 0)] = 0.7;
        w[oracle.model().index(2, 1)] = -0.3;
        let a = oracle.loss_at(&w);
        let b = oracle.full_inference(&w);
        assert!((a - b).abs() < 1e-13);
        assert_eq!(oracle.inference_passes(), 2);
    }
}
