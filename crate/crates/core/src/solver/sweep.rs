use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{effective_resistance, family_cutset_series, monte_carlo_escape, SolverOptions};
use crate::families::Family;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    /// `(trials, seed)` for an escape estimate at every radius.
    pub monte_carlo: Option<(u64, u64)>,
}

/// One radius of a sweep. A solver failure leaves `resistance` empty and
/// records the message in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub radius: u32,
    pub resistance: Option<f64>,
    pub delta: Option<f64>,
    pub nash_williams_partial: Option<f64>,
    pub p_hat: Option<f64>,
    pub stderr: Option<f64>,
    /// `1 / (a(root) R_N)`, the escape probability implied by the solve.
    pub p_predicted: Option<f64>,
    pub iterations: Option<usize>,
    pub wall_ms: f64,
    /// Failed cross-checks: `monotone`, `nash-williams`, `escape`.
    pub flags: Vec<String>,
    pub error: Option<String>,
}

/// Solve the wired truncation at each radius and cross-check wired
/// monotonicity, the Nash–Williams bound and (optionally) escape duality.
pub fn sweep(fam: &Family, radii: &[u32], options: &SweepOptions) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(radii.len());
    let mut previous: Option<f64> = None;
    for &radius in radii {
        let start = Instant::now();
        let mut row = SweepRow {
            radius,
            resistance: None,
            delta: None,
            nash_williams_partial: None,
            p_hat: None,
            stderr: None,
            p_predicted: None,
            iterations: None,
            wall_ms: 0.0,
            flags: Vec::new(),
            error: None,
        };
        let outcome = (|| {
            let trunc = fam.truncate(radius)?;
            let sol = effective_resistance(&trunc, &options.solver)?;
            let r = sol.effective_resistance;
            row.resistance = Some(r);
            row.iterations = Some(sol.iterations);
            row.delta = previous.map(|p| r - p);
            if previous.is_some_and(|p| r < p - 1e-12 * p.abs().max(1.0)) {
                row.flags.push("monotone".into());
            }
            previous = Some(r);
            let nw = family_cutset_series(fam, &trunc)?.total();
            row.nash_williams_partial = Some(nw);
            if r < nw - 1e-12 * nw.max(1.0) {
                row.flags.push("nash-williams".into());
            }
            let predicted = 1.0 / (trunc.network.total_conductance(trunc.root) * r);
            row.p_predicted = Some(predicted);
            if let Some((trials, seed)) = options.monte_carlo {
                let est = monte_carlo_escape(&trunc, trials, seed)?;
                row.p_hat = Some(est.p_hat);
                row.stderr = Some(est.standard_error);
                if (est.p_hat - predicted).abs() > 4.0 * est.standard_error.max(1.0 / trials as f64)
                {
                    row.flags.push("escape".into());
                }
            }
            Ok::<(), super::SolverError>(())
        })();
        if let Err(e) = outcome {
            row.error = Some(e.to_string());
        }
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        rows.push(row);
    }
    rows
}
