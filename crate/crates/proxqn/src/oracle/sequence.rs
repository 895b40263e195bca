//! Linear-chain CRF oracle for sequence labeling.
//!
//! The model has unigram weights Theta[y, j] over (expanded) position
//! features and bigram weights Lambda[y, y'] over label transitions. All
//! inference runs in the log domain.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::{logsumexp, OracleError, SmoothLossOracle};
use crate::data::SequenceDataset;

/// Coordinate layout of the sequence model.
///
/// The flat weight vector is `[Lambda row-major over (from, to); then for
/// each feature j, Theta[., j] over labels]`, so `d = |Y|^2 + |Y| * J`.
#[derive(Debug, Clone, Copy)]
pub struct SeqCrfModel {
    num_labels: usize,
    num_raw_features: usize,
}

/// A decoded flat coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqCoord {
    /// Transition weight Lambda[from, to].
    Bigram { from: usize, to: usize },
    /// Emission weight Theta[label, feature].
    Unigram { label: usize, feature: usize },
}

impl SeqCrfModel {
    pub fn new(num_labels: usize, num_raw_features: usize) -> Self {
        SeqCrfModel {
            num_labels,
            num_raw_features,
        }
    }

    pub fn for_dataset(data: &SequenceDataset) -> Self {
        SeqCrfModel::new(data.num_labels(), data.num_raw_features())
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn num_raw_features(&self) -> usize {
        self.num_raw_features
    }

    pub fn dimension(&self) -> usize {
        self.num_labels * self.num_labels + self.num_labels * self.num_raw_features
    }

    pub fn bigram_index(&self, from: usize, to: usize) -> usize {
        from * self.num_labels + to
    }

    pub fn unigram_index(&self, label: usize, feature: usize) -> usize {
        self.num_labels * self.num_labels + feature * self.num_labels + label
    }

    pub fn decode(&self, coordinate: usize) -> SeqCoord {
        let y2 = self.num_labels * self.num_labels;
        if coordinate < y2 {
            SeqCoord::Bigram {
                from: coordinate / self.num_labels,
                to: coordinate % self.num_labels,
            }
        } else {
            let r = coordinate - y2;
            SeqCoord::Unigram {
                label: r % self.num_labels,
                feature: r / self.num_labels,
            }
        }
    }

    /// Feature column a coordinate reads, if any (bigrams read none).
    pub fn feature_of(&self, coordinate: usize) -> Option<usize> {
        match self.decode(coordinate) {
            SeqCoord::Unigram { feature, .. } => Some(feature),
            SeqCoord::Bigram { .. } => None,
        }
    }
}

/// Log-domain forward/backward tables for one sequence.
#[derive(Debug, Clone)]
pub struct ChainMessages {
    num_labels: usize,
    log_alpha: Vec<f64>,
    log_beta: Vec<f64>,
    log_z: f64,
}

impl ChainMessages {
    pub fn len(&self) -> usize {
        self.log_alpha.len() / self.num_labels
    }

    pub fn is_empty(&self) -> bool {
        self.log_alpha.is_empty()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// P(y_t = y | x).
    pub fn node_marginal(&self, t: usize, y: usize) -> f64 {
        let i = t * self.num_labels + y;
        (self.log_alpha[i] + self.log_beta[i] - self.log_z).exp()
    }

    /// P(y_t = from, y_{t+1} = to | x); needs the score tables back.
    pub fn edge_marginal(
        &self,
        unary: &[f64],
        transition: &[f64],
        t: usize,
        from: usize,
        to: usize,
    ) -> f64 {
        let yn = self.num_labels;
        (self.log_alpha[t * yn + from]
            + unary[(t + 1) * yn + to]
            + transition[from * yn + to]
            + self.log_beta[(t + 1) * yn + to]
            - self.log_z)
            .exp()
    }
}

/// Forward-backward over one chain given log-potential tables.
///
/// `unary` is T x |Y| row-major (`unary[t*Y + y]` = Theta_y . x_t), and
/// `transition` is |Y| x |Y| (`transition[from*Y + to]` = Lambda[from, to]).
pub fn chain_forward_backward(unary: &[f64], transition: &[f64], num_labels: usize) -> ChainMessages {
    let yn = num_labels;
    let t_len = unary.len() / yn;
    assert!(t_len >= 1 && unary.len() == t_len * yn);

    let mut log_alpha = vec![0.0; t_len * yn];
    log_alpha[..yn].copy_from_slice(&unary[..yn]);
    let mut scratch = vec![0.0; yn];
    for t in 1..t_len {
        for y in 0..yn {
            for (prev, slot) in scratch.iter_mut().enumerate() {
                *slot = log_alpha[(t - 1) * yn + prev] + transition[prev * yn + y];
            }
            log_alpha[t * yn + y] = unary[t * yn + y] + logsumexp(&scratch);
        }
    }

    let mut log_beta = vec![0.0; t_len * yn];
    for t in (0..t_len - 1).rev() {
        for prev in 0..yn {
            for (y, slot) in scratch.iter_mut().enumerate() {
                *slot = log_beta[(t + 1) * yn + y]
                    + unary[(t + 1) * yn + y]
                    + transition[prev * yn + y];
            }
            log_beta[t * yn + prev] = logsumexp(&scratch);
        }
    }

    let log_z = logsumexp(&log_alpha[(t_len - 1) * yn..]);
    ChainMessages {
        num_labels: yn,
        log_alpha,
        log_beta,
        log_z,
    }
}

/// Max-product decoding; returns the argmax label sequence.
pub fn viterbi_decode(unary: &[f64], transition: &[f64], num_labels: usize) -> Vec<usize> {
    let yn = num_labels;
    let t_len = unary.len() / yn;
    let mut best = unary[..yn].to_vec();
    let mut back: Vec<usize> = Vec::with_capacity((t_len - 1) * yn);
    for t in 1..t_len {
        let mut next = vec![f64::NEG_INFINITY; yn];
        for y in 0..yn {
            let mut arg = 0;
            let mut score = f64::NEG_INFINITY;
            for prev in 0..yn {
                let cand = best[prev] + transition[prev * yn + y];
                if cand > score {
                    score = cand;
                    arg = prev;
                }
            }
            next[y] = score + unary[t * yn + y];
            back.push(arg);
        }
        best = next;
    }
    let mut path = vec![0; t_len];
    path[t_len - 1] = (0..yn)
        .max_by(|&a, &b| best[a].partial_cmp(&best[b]).unwrap())
        .unwrap();
    for t in (1..t_len).rev() {
        path[t - 1] = back[(t - 1) * yn + path[t]];
    }
    path
}

struct SeqStats {
    /// P(y_t = y | x) per global position, num_positions x |Y|.
    node_marginals: Vec<f64>,
    /// sum over sequences and positions of edge marginals, |Y| x |Y|.
    edge_expectations: Vec<f64>,
}

/// Sequence-labeling CRF oracle over a [`SequenceDataset`].
pub struct SequenceOracle<'a> {
    data: &'a SequenceDataset,
    model: SeqCrfModel,
    stats: Option<SeqStats>,
    passes: AtomicU64,
}

impl<'a> SequenceOracle<'a> {
    pub fn new(data: &'a SequenceDataset) -> Self {
        SequenceOracle {
            data,
            model: SeqCrfModel::for_dataset(data),
            stats: None,
            passes: AtomicU64::new(0),
        }
    }

    pub fn model(&self) -> &SeqCrfModel {
        &self.model
    }

    /// Assembles the log-potential tables from the nonzero model weights.
    ///
    /// Only feature columns with at least one nonzero unigram weight are read.
    pub fn build_scores(&self, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let yn = self.model.num_labels;
        let mut unary = vec![0.0; self.data.num_positions() * yn];
        let mut active: Vec<(usize, f64)> = Vec::with_capacity(yn);
        for j in 0..self.model.num_raw_features {
            active.clear();
            for y in 0..yn {
                let wv = w[self.model.unigram_index(y, j)];
                if wv != 0.0 {
                    active.push((y, wv));
                }
            }
            if active.is_empty() {
                continue;
            }
            for &(pos, v) in self.data.feature_index().column(j) {
                let row = pos as usize * yn;
                for &(y, wv) in &active {
                    unary[row + y] += wv * v;
                }
            }
        }
        let transition = w[..yn * yn].to_vec();
        (unary, transition)
    }

    fn gold_score(&self, seq: usize, unary: &[f64], transition: &[f64]) -> f64 {
        let yn = self.model.num_labels;
        let offset = self.data.position_offset(seq);
        let labels = self.data.labels(seq);
        let mut score = 0.0;
        for (t, &y) in labels.iter().enumerate() {
            score += unary[(offset + t) * yn + y as usize];
        }
        for pair in labels.windows(2) {
            score += transition[pair[0] as usize * yn + pair[1] as usize];
        }
        score
    }
}

impl SmoothLossOracle for SequenceOracle<'_> {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn num_instances(&self) -> usize {
        self.data.num_sequences()
    }

    fn loss_at(&self, w: &[f64]) -> f64 {
        self.passes.fetch_add(1, Ordering::Relaxed);
        let (unary, transition) = self.build_scores(w);
        let yn = self.model.num_labels;
        (0..self.data.num_sequences())
            .into_par_iter()
            .map(|seq| {
                let offset = self.data.position_offset(seq);
                let t_len = self.data.sequence_len(seq);
                let slice = &unary[offset * yn..(offset + t_len) * yn];
                // forward pass only; the partition function needs no beta
                let mut log_alpha = slice[..yn].to_vec();
                let mut scratch = vec![0.0; yn];
                for t in 1..t_len {
                    let prev_alpha = log_alpha.clone();
                    for y in 0..yn {
                        for (prev, slot) in scratch.iter_mut().enumerate() {
                            *slot = prev_alpha[prev] + transition[prev * yn + y];
                        }
                        log_alpha[y] = slice[t * yn + y] + logsumexp(&scratch);
                    }
                }
                logsumexp(&log_alpha) - self.gold_score(seq, &unary, &transition)
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .sum()
    }

    fn full_inference(&mut self, w: &[f64]) -> f64 {
        self.passes.fetch_add(1, Ordering::Relaxed);
        let (unary, transition) = self.build_scores(w);
        let yn = self.model.num_labels;

        struct PerSeq {
            loss: f64,
            marginals: Vec<f64>,
            edges: Vec<f64>,
        }

        let per_seq: Vec<PerSeq> = (0..self.data.num_sequences())
            .into_par_iter()
            .map(|seq| {
                let offset = self.data.position_offset(seq);
                let t_len = self.data.sequence_len(seq);
                let slice = &unary[offset * yn..(offset + t_len) * yn];
                let messages = chain_forward_backward(slice, &transition, yn);

                let mut marginals = vec![0.0; t_len * yn];
                for t in 0..t_len {
                    for y in 0..yn {
                        marginals[t * yn + y] = messages.node_marginal(t, y);
                    }
                }
                let mut edges = vec![0.0; yn * yn];
                for t in 0..t_len.saturating_sub(1) {
                    for from in 0..yn {
                        for to in 0..yn {
                            edges[from * yn + to] +=
                                messages.edge_marginal(slice, &transition, t, from, to);
                        }
                    }
                }
                PerSeq {
                    loss: messages.log_partition() - self.gold_score(seq, &unary, &transition),
                    marginals,
                    edges,
                }
            })
            .collect();

        let mut loss = 0.0;
        let mut node_marginals = vec![0.0; self.data.num_positions() * yn];
        let mut edge_expectations = vec![0.0; yn * yn];
        for (seq, part) in per_seq.into_iter().enumerate() {
            loss += part.loss;
            let start = self.data.position_offset(seq) * yn;
            node_marginals[start..start + part.marginals.len()].copy_from_slice(&part.marginals);
            for (acc, e) in edge_expectations.iter_mut().zip(&part.edges) {
                *acc += e;
            }
        }
        self.stats = Some(SeqStats {
            node_marginals,
            edge_expectations,
        });
        loss
    }

    fn partial_gradient(&self, coordinate: usize) -> Result<f64, OracleError> {
        if coordinate >= self.dimension() {
            return Err(OracleError::CoordinateOutOfRange {
                coordinate,
                dimension: self.dimension(),
            });
        }
        let stats = self.stats.as_ref().ok_or(OracleError::StaleCache)?;
        let yn = self.model.num_labels;
        Ok(match self.model.decode(coordinate) {
            SeqCoord::Bigram { from, to } => {
                stats.edge_expectations[from * yn + to]
                    - self.data.gold_bigram_counts()[from * yn + to]
            }
            SeqCoord::Unigram { label, feature } => self
                .data
                .feature_index()
                .column(feature)
                .iter()
                .map(|&(pos, v)| {
                    let pos = pos as usize;
                    let empirical = if self.data.gold_at(pos) == label { 1.0 } else { 0.0 };
                    (stats.node_marginals[pos * yn + label] - empirical) * v
                })
                .sum(),
        })
    }

    fn inference_passes(&self) -> u64 {
        self.passes.load(Ordering::Relaxed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SequenceDataset;

    fn uniform_chain(t_len: usize, num_labels: usize) -> ChainMessages {
        let unary = vec![0.0; t_len * num_labels];
        let transition = vec![0.0; num_labels * num_labels];
        chain_forward_backward(&unary, &transition, num_labels)
    }

    #[test]
    fn uniform_model_partition_is_label_count_power() {
        let m = uniform_chain(2, 2);
        assert!((m.log_partition() - 4f64.ln()).abs() < 1e-12);
        for t in 0..2 {
            for y in 0..2 {
                assert!((m.node_marginal(t, y) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_transition_weight_shifts_the_partition() {
        // Lambda[1,1] = ln 2 on a 2-label, length-2 chain: Z = 5 and
        // P(y1=1, y2=1) = 2/5.
        let unary = vec![0.0; 4];
        let mut transition = vec![0.0; 4];
        transition[3] = 2f64.ln();
        let m = chain_forward_backward(&unary, &transition, 2);
        assert!((m.log_partition() - 5f64.ln()).abs() < 1e-12);
        assert!((m.edge_marginal(&unary, &transition, 0, 1, 1) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn node_marginals_sum_to_one() {
        let unary = vec![0.3, -0.7, 1.1, 0.0, -0.2, 0.4];
        let transition = vec![0.5, -0.5, 0.1, 0.9];
        let m = chain_forward_backward(&unary, &transition, 2);
        for t in 0..3 {
            let s: f64 = (0..2).map(|y| m.node_marginal(t, y)).sum();
            assert!((s - 1.0).abs() < 1e-12, "t={t} sum={s}");
        }
    }

    fn tiny_dataset() -> SequenceDataset {
        let s0 = (vec![vec![(0, 1.0)], vec![(0, 1.0), (1, 1.0)]], vec![0, 1]);
        let s1 = (vec![vec![(1, 1.0)]], vec![1]);
        SequenceDataset::new(vec![s0, s1], 2, 2).unwrap()
    }

    #[test]
    fn zero_weights_loss_is_positions_times_ln_labels() {
        let data = tiny_dataset();
        let mut oracle = SequenceOracle::new(&data);
        let w = vec![0.0; oracle.dimension()];
        let loss = oracle.full_inference(&w);
        assert!((loss - 3.0 * 2f64.ln()).abs() < 1e-12);
        assert!((oracle.loss_at(&w) - loss).abs() < 1e-12);
    }

    #[test]
    fn zero_weight_unigram_gradient_matches_closed_form() {
        let data = tiny_dataset();
        let mut oracle = SequenceOracle::new(&data);
        let w = vec![0.0; oracle.dimension()];
        oracle.full_inference(&w);
        // feature 0 is on at positions 0, 1 with gold labels 0, 1
        let g = oracle
            .partial_gradient(oracle.model().unigram_index(0, 0))
            .unwrap();
        assert!((g - ((0.5 - 1.0) + 0.5)).abs() < 1e-12);
        // bigram (0,1): one gold transition, expectation 0.25 on the length-2 chain
        let g = oracle
            .partial_gradient(oracle.model().bigram_index(0, 1))
            .unwrap();
        assert!((g - (0.25 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn viterbi_matches_brute_force_argmax() {
        let unary = vec![0.2, -0.1, 0.4, 0.3, -0.5, 0.8];
        let transition = vec![0.3, -0.2, 0.0, 0.6];
        let yn = 2;
        let path = viterbi_decode(&unary, &transition, yn);
        let mut best_score = f64::NEG_INFINITY;
        let mut best = vec![0; 3];
        for a in 0..yn {
            for b in 0..yn {
                for c in 0..yn {
                    let score = unary[a]
                        + unary[yn + b]
                        + unary[2 * yn + c]
                        + transition[a * yn + b]
                        + transition[b * yn + c];
                    if score > best_score {
                        best_score = score;
                        best = vec![a, b, c];
                    }
                }
            }
        }
        assert_eq!(path, best);
    }
}
