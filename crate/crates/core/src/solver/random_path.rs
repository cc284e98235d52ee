use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::SolverError;
use crate::families::{build_zd, lattice_points, Family, DEFAULT_EDGE_CAP};
use crate::numeric::{log_log_slope, CompensatedSum};
use crate::profile::ProfileExpr;

/// Averaged random-path flow on a lattice ball.
#[derive(Debug, Clone)]
pub struct RandomPathFlow {
    pub family: Family,
    pub samples: u64,
    /// Mean signed current along each edge of `family.network`.
    pub flux: Vec<f64>,
    /// `P̂(e ∈ Π)`.
    pub hit_probability: Vec<f64>,
    /// `(n, Σ_{e ∈ E_n} P̂(e ∈ Π)² / ℓ(e))` for `n = 1..=radius`.
    pub shell_energy: Vec<(u32, f64)>,
    /// Sum of the shell energies.
    pub energy_estimate: f64,
}

impl RandomPathFlow {
    /// Log-log slope of the shell energy over levels `from..=to`.
    pub fn decay_slope(&self, from: u32, to: u32) -> f64 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .shell_energy
            .iter()
            .filter(|(n, e)| (from..=to).contains(n) && *e > 0.0)
            .map(|&(n, e)| (n as f64, e))
            .unzip();
        log_log_slope(&xs, &ys)
    }
}

fn ray_distance2(x: &[i64], theta: &[f64]) -> f64 {
    let norm2: f64 = x.iter().map(|&c| (c * c) as f64).sum();
    let proj: f64 = x.iter().zip(theta).map(|(&c, t)| c as f64 * t).sum();
    norm2 - proj.max(0.0).powi(2)
}

/// Lattice path from the origin following the ray `{tθ}` until it leaves the
/// ball of radius `radius`: each step moves one unit along an axis in the
/// direction of `θ`, choosing the move that ends closest to the ray (ties go
/// to the lower axis index). The path is monotone in every coordinate.
pub fn ray_path(theta: &[f64], radius: u32) -> Vec<Vec<i64>> {
    let d = theta.len();
    let r2 = (radius as i64).pow(2);
    let mut x = vec![0i64; d];
    let mut path = vec![x.clone()];
    while x.iter().map(|c| c * c).sum::<i64>() <= r2 {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..d {
            if theta[i] == 0.0 {
                continue;
            }
            let step = if theta[i] > 0.0 { 1 } else { -1 };
            x[i] += step;
            let dist = ray_distance2(&x, theta);
            x[i] -= step;
            if best.map_or(true, |(b, _)| dist < b) {
                best = Some((dist, i));
            }
        }
        let (_, i) = best.expect("nonzero direction");
        x[i] += if theta[i] > 0.0 { 1 } else { -1 };
        path.push(x.clone());
    }
    path
}

/// Sample `samples` uniform rays, follow each with [`ray_path`] on the ball
/// of `Z^d` with `ℓ(e) = ψ(n)/n^{d-1}`, and average the unit path flows.
pub fn random_path_flow_zd(
    d: u32,
    profile: &ProfileExpr,
    radius: u32,
    samples: u64,
    seed: u64,
) -> Result<RandomPathFlow, SolverError> {
    if d < 2 {
        return Err(SolverError::InvalidParameter(
            "random paths need d >= 2".into(),
        ));
    }
    if samples == 0 {
        return Err(SolverError::InvalidParameter("samples must be >= 1".into()));
    }
    let family = build_zd(d, profile, radius, 1, DEFAULT_EDGE_CAP)?;
    let points = lattice_points(d, radius, DEFAULT_EDGE_CAP)?;
    let net = &family.network;
    let origin = family.root();

    // (edge, +1 when traversed from a to b)
    let traversals: Vec<Vec<(usize, i64)>> = (0..samples)
        .into_par_iter()
        .map(|sample| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(sample);
            let theta = loop {
                let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                if len > 0.0 {
                    break g.into_iter().map(|x| x / len).collect::<Vec<f64>>();
                }
            };
            let path = ray_path(&theta, radius);
            let mut v = origin;
            let mut out = Vec::with_capacity(path.len());
            for next in &path[1..] {
                let (e, w) = net
                    .incident(v)
                    .iter()
                    .map(|&e| (e, net.edges()[e].other(v)))
                    .find(|(_, w)| points[w.0] == *next)
                    .expect("lattice neighbour inside the ball");
                out.push((e, if net.edges()[e].a == v { 1 } else { -1 }));
                v = w;
            }
            out
        })
        .collect();

    let m = net.edge_count();
    let mut net_count = vec![0i64; m];
    let mut hits = vec![0u64; m];
    for path in &traversals {
        for &(e, s) in path {
            net_count[e] += s;
            hits[e] += 1;
        }
    }
    let total = samples as f64;
    let flux: Vec<f64> = net_count.iter().map(|&c| c as f64 / total).collect();
    let hit_probability: Vec<f64> = hits.iter().map(|&h| h as f64 / total).collect();
    let shell_energy: Vec<(u32, f64)> = (1..=radius)
        .map(|n| {
            let s: CompensatedSum = family
                .levels
                .level(n)
                .iter()
                .map(|e| hit_probability[e.0].powi(2) / net.edge(*e).conductance)
                .collect();
            (n, s.value())
        })
        .collect();
    let energy_estimate = shell_energy
        .iter()
        .map(|x| x.1)
        .collect::<CompensatedSum>()
        .value();
    Ok(RandomPathFlow {
        family,
        samples,
        flux,
        hit_probability,
        shell_energy,
        energy_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::VertexId;

    #[test]
    fn paths_stay_near_the_ray() {
        let theta = [0.6, -0.48, 0.64];
        let path = ray_path(&theta, 30);
        for w in path.windows(2) {
            let moved: i64 = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).sum();
            assert_eq!(moved, 1);
        }
        for x in &path {
            assert!(ray_distance2(x, &theta).sqrt() < 3.0, "{x:?}");
        }
        let axis = ray_path(&[0.0, 1.0], 5);
        assert_eq!(axis.last().unwrap(), &vec![0, 6]);
    }

    #[test]
    fn averaged_flow_is_a_unit_flow() {
        let rp = random_path_flow_zd(2, &ProfileExpr::parse("1").unwrap(), 10, 500, 4).unwrap();
        let net = &rp.family.network;
        let div = |v: VertexId| -> f64 {
            net.incident(v)
                .iter()
                .map(|&e| {
                    if net.edges()[e].a == v {
                        rp.flux[e]
                    } else {
                        -rp.flux[e]
                    }
                })
                .sum()
        };
        assert!((div(rp.family.root()) - 1.0).abs() < 1e-12);
        for v in 0..net.vertex_count() {
            if rp.family.shell[v] <= 10 && VertexId(v) != rp.family.root() {
                assert!(div(VertexId(v)).abs() < 1e-12);
            }
        }
        let again = random_path_flow_zd(2, &ProfileExpr::parse("1").unwrap(), 10, 500, 4).unwrap();
        assert_eq!(again.flux, rp.flux);
    }
}
