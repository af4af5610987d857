use crate::error::{Error, Result};
use crate::qubo::{spins_to_bits, QuboProblem};
use crate::rbm::Moments;

use super::SampleSet;

/// Read-weighted `E[v]`, `E[h]`, `E[v hᵀ]` over the reads of a sample set.
///
/// Spins are mapped to bits, Gaussian bit groups are collapsed to real
/// values, and label units stay inside the visible block.
pub fn estimate_moments(
    samples: &SampleSet,
    qubo: &QuboProblem,
    n_visible: usize,
    n_hidden: usize,
) -> Result<Moments> {
    let layout = qubo
        .layout
        .as_ref()
        .ok_or_else(|| Error::contract("samples are in QUBO index space but the QUBO has no RBM layout"))?;
    if layout.n_visible != n_visible || layout.n_hidden != n_hidden {
        return Err(Error::contract(format!(
            "QUBO was compiled for {}x{} units, model is {n_visible}x{n_hidden}",
            layout.n_visible, layout.n_hidden
        )));
    }
    if samples.records.is_empty() || samples.total_reads == 0 {
        return Err(Error::domain("empty sample set"));
    }
    let mut m = Moments::zeros(n_visible, n_hidden);
    for r in &samples.records {
        if r.spins.len() != qubo.n() {
            return Err(Error::contract(format!(
                "sample has {} variables, QUBO has {}",
                r.spins.len(),
                qubo.n()
            )));
        }
        let cfg = qubo.decode(&spins_to_bits(&r.spins))?;
        m.accumulate(&cfg.visible, &cfg.hidden, r.read_count as f64);
    }
    m.scale(1.0 / samples.total_reads as f64);
    Ok(m)
}
