//! Per-epoch spike-plane histograms and the stability index derived from
//! the divergence between consecutive epochs.

use crate::error::{EdenError, Result};
use serde::{Deserialize, Serialize};

/// Histogram of spiking plane indices with an add-one prior, so every bin
/// stays strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeDistribution {
    bins: Vec<f64>,
    total: f64,
}

impl SpikeDistribution {
    pub fn new(n_bins: usize) -> Self {
        Self {
            bins: vec![1.0; n_bins],
            total: n_bins as f64,
        }
    }

    pub fn from_bins(bins: Vec<f64>) -> Result<Self> {
        if bins.is_empty() || bins.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(EdenError::Structural(
                "spike distribution bins must be finite and strictly positive".into(),
            ));
        }
        let total = bins.iter().sum();
        Ok(Self { bins, total })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Spikes recorded since the last reset.
    pub fn spike_count(&self) -> f64 {
        self.total - self.bins.len() as f64
    }

    pub fn record(&mut self, z: usize) -> Result<()> {
        let n = self.bins.len();
        let bin = self
            .bins
            .get_mut(z)
            .ok_or(EdenError::IndexOutOfRange { what: "spike z", index: z, limit: n })?;
        *bin += 1.0;
        self.total += 1.0;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.bins.fill(1.0);
        self.total = self.bins.len() as f64;
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.bins.iter().map(|b| b / self.total).collect()
    }
}

/// `KL(prev || curr)` in nats over two strictly positive probability vectors.
pub fn kl_divergence(prev: &[f64], curr: &[f64]) -> Result<f64> {
    if prev.len() != curr.len() {
        return Err(EdenError::Structural(format!(
            "distribution lengths differ ({} vs {})",
            prev.len(),
            curr.len()
        )));
    }
    let kl = prev
        .iter()
        .zip(curr)
        .map(|(&p, &q)| p * (p / q).ln())
        .sum::<f64>();
    // Rounding can leave a tiny negative for near-identical inputs.
    Ok(kl.max(0.0))
}

/// `1 / max(KL(prev || curr), 1)`, always in `(0, 1]`.
pub fn stability_index(prev: &SpikeDistribution, curr: &SpikeDistribution) -> Result<f64> {
    let kl = kl_divergence(&prev.probabilities(), &curr.probabilities())?;
    Ok(1.0 / kl.max(1.0))
}
