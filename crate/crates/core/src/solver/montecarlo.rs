use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SolverError, Truncation};
use crate::network::VertexId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EscapeEstimate {
    pub trials: u64,
    pub escapes: u64,
    pub p_hat: f64,
    pub standard_error: f64,
}

/// Per-vertex cumulative step weights; a loop counts twice.
struct StepTable {
    offsets: Vec<usize>,
    cumulative: Vec<f64>,
    targets: Vec<usize>,
}

impl StepTable {
    fn new(trunc: &Truncation) -> Self {
        let net = &trunc.network;
        let mut offsets = vec![0];
        let mut cumulative = Vec::new();
        let mut targets = Vec::new();
        for v in 0..net.vertex_count() {
            let mut acc = 0.0;
            for &e in net.incident(VertexId(v)) {
                let edge = &net.edges()[e];
                acc += if edge.is_loop() {
                    2.0 * edge.conductance
                } else {
                    edge.conductance
                };
                cumulative.push(acc);
                targets.push(edge.other(VertexId(v)).0);
            }
            offsets.push(cumulative.len());
        }
        StepTable {
            offsets,
            cumulative,
            targets,
        }
    }

    fn step(&self, v: usize, rng: &mut ChaCha8Rng) -> usize {
        let (lo, hi) = (self.offsets[v], self.offsets[v + 1]);
        let cum = &self.cumulative[lo..hi];
        let u = rng.gen::<f64>() * cum[cum.len() - 1];
        let k = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        self.targets[lo + k]
    }
}

/// Fraction of walks from the root that reach the wired boundary before
/// coming back to the root. Trial `i` uses ChaCha8 seeded with `seed` on
/// stream `i`, so the result does not depend on the thread count.
pub fn monte_carlo_escape(
    trunc: &Truncation,
    trials: u64,
    seed: u64,
) -> Result<EscapeEstimate, SolverError> {
    if trials == 0 {
        return Err(SolverError::InvalidParameter("trials must be >= 1".into()));
    }
    let boundary = trunc.boundary_or_err()?.0;
    let root = trunc.root.0;
    if trunc.network.incident(trunc.root).is_empty() {
        return Err(SolverError::InvalidParameter("root has no edges".into()));
    }
    let table = StepTable::new(trunc);
    let escapes: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let mut v = table.step(root, &mut rng);
            loop {
                if v == boundary {
                    return 1u64;
                }
                if v == root {
                    return 0;
                }
                v = table.step(v, &mut rng);
            }
        })
        .sum();
    let p = escapes as f64 / trials as f64;
    Ok(EscapeEstimate {
        trials,
        escapes,
        p_hat: p,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}
