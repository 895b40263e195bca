//! Smooth-loss oracle contract and implementations.
//!
//! The solvers only ever talk to a loss through this interface. Losses are
//! "computationally intensive": evaluating the value or gradient needs an
//! inference pass over the data (forward-backward for chains, a tree sweep
//! for taxonomies). The contract therefore splits work into
//!
//! * [`SmoothLossOracle::loss_at`] - value only, used by line-search trials,
//! * [`SmoothLossOracle::full_inference`] - one inference pass that caches
//!   sufficient statistics (marginals) and returns the loss,
//! * [`SmoothLossOracle::partial_gradient`] - one coordinate of the gradient
//!   from the cached statistics, touching only that coordinate's feature
//!   column.
//!
//! Every `loss_at` and `full_inference` call counts as one pass over the
//! data; the counter is what efficiency comparisons are gated on.

mod hierarchy;
mod logistic;
mod sequence;

pub use hierarchy::{HierModel, HierOracle};
pub use logistic::LogisticOracle;
pub use sequence::{
    chain_forward_backward, viterbi_decode, ChainMessages, SeqCoord, SeqCrfModel, SequenceOracle,
};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("partial gradient requested before any full_inference (stale or missing statistics cache)")]
    StaleCache,
    #[error("coordinate {coordinate} out of range for dimension {dimension}")]
    CoordinateOutOfRange { coordinate: usize, dimension: usize },
}

/// A convex differentiable loss whose gradient requires an inference pass.
///
/// `partial_gradient(j)` is only valid after `full_inference(w)` has run for
/// the current weights; callers that mutate weights must re-run inference
/// before asking for gradients again.
pub trait SmoothLossOracle: Send + Sync {
    /// Number of model coordinates d.
    fn dimension(&self) -> usize;

    /// Number of training instances N (sequences count as one instance).
    fn num_instances(&self) -> usize;

    /// Loss value at `w`; does not update the statistics cache.
    fn loss_at(&self, w: &[f64]) -> f64;

    /// Runs inference at `w`, caches the statistics needed for partial
    /// gradients, and returns the loss value.
    fn full_inference(&mut self, w: &[f64]) -> f64;

    /// The `j`-th entry of the gradient, from the cached statistics.
    fn partial_gradient(&self, j: usize) -> Result<f64, OracleError>;

    /// Batch partial gradients for a set of coordinates.
    fn partial_gradients(&self, coords: &[usize], out: &mut [f64]) -> Result<(), OracleError> {
        assert_eq!(coords.len(), out.len());
        coords
            .par_iter()
            .zip(out.par_iter_mut())
            .try_for_each(|(&j, slot)| {
                *slot = self.partial_gradient(j)?;
                Ok(())
            })
    }

    /// Full gradient at `w` (inference plus every coordinate); returns the loss.
    fn gradient_at(&mut self, w: &[f64], out: &mut [f64]) -> Result<f64, OracleError> {
        let loss = self.full_inference(w);
        let coords: Vec<usize> = (0..self.dimension()).collect();
        self.partial_gradients(&coords, out)?;
        Ok(loss)
    }

    /// Cumulative count of data passes (`loss_at` + `full_inference`).
    fn inference_passes(&self) -> u64;
}

/// log(sum(exp(x))) with the usual max shift.
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// ln(1 + exp(t)) without overflow.
pub(crate) fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct_sum_on_small_inputs() {
        let xs = [0.1, -0.4, 2.0];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - direct).abs() < 1e-14);
    }

    #[test]
    fn logsumexp_survives_large_scores() {
        let xs = [1000.0, 1000.0];
        assert!((logsumexp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn log1p_exp_is_stable_both_sides() {
        assert!((log1p_exp(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log1p_exp(-800.0) - 0.0).abs() < 1e-15);
        assert!((log1p_exp(800.0) - 800.0).abs() < 1e-12);
    }
}
