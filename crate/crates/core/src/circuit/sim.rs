use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::netlist::Netlist;
use crate::error::{Error, Result};
use crate::model::{RunConfig, Waveform};

/// Uniform random input vectors, one per segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StimulusPlan {
    pub n_segments: usize,
    pub rng_seed: u64,
}

impl StimulusPlan {
    pub fn new(n_segments: usize, rng_seed: u64) -> Result<Self> {
        if n_segments == 0 {
            return Err(Error::invalid("stimulus needs at least one segment"));
        }
        Ok(StimulusPlan { n_segments, rng_seed })
    }

    /// Input vectors for a circuit with `n_inputs` primary inputs; segment-major.
    pub fn vectors(&self, n_inputs: usize) -> Vec<Vec<bool>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        (0..self.n_segments)
            .map(|_| (0..n_inputs).map(|_| rng.gen::<bool>()).collect())
            .collect()
    }
}

/// Zero-delay simulation under explicit input vectors; one waveform per pMOS,
/// in netlist device order.
pub fn simulate_vectors(nl: &Netlist, vectors: &[Vec<bool>], cfg: &RunConfig) -> Result<Vec<Waveform>> {
    if vectors.is_empty() {
        return Err(Error::invalid("no input vectors"));
    }
    let devices = nl.devices();
    let mut levels: Vec<Vec<f64>> = vec![Vec::with_capacity(vectors.len()); devices.len()];
    let mut nets = Vec::new();
    for v in vectors {
        nl.eval_nets(v, &mut nets)?;
        for (d, seg) in devices.iter().zip(levels.iter_mut()) {
            seg.push(if nets[d.gate_net] { cfg.vdd } else { 0.0 });
        }
    }
    devices
        .iter()
        .zip(levels)
        .map(|(d, seg)| Waveform::new(d.id.clone(), cfg.segment_duration, seg))
        .collect()
}

/// Random-stimulus simulation, deterministic in `plan.rng_seed`.
pub fn simulate(nl: &Netlist, plan: &StimulusPlan, cfg: &RunConfig) -> Result<Vec<Waveform>> {
    let vectors = plan.vectors(nl.primary_inputs().len());
    simulate_vectors(nl, &vectors, cfg)
}

/// Prefixes every transistor id, e.g. to keep several stimulus runs apart.
pub fn prefix_ids(waveforms: &mut [Waveform], prefix: &str) {
    for w in waveforms {
        w.transistor_id = format!("{prefix}{}", w.transistor_id);
    }
}
