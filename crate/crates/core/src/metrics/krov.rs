//! Transport distances with the L1 ground metric.

use crate::error::{Error, Result};
use crate::fluid::ensemble::ParticleEnsemble;
use crate::model::TriangleState;
use crate::nlmp::MarginalLattice;

/// Largest combined support handled by the exact solver.
pub const KROV_CAPACITY: usize = 512;

/// Masses below this are treated as exhausted by the flow solver.
const FLOW_EPS: f64 = 1e-15;

/// Distance from an ensemble to a point mass; the coupling is forced.
pub fn krov_to_delta(ens: &ParticleEnsemble, x: &TriangleState) -> f64 {
    ens.atoms().iter().map(|a| a.weight * a.state.l1(x)).sum()
}

/// Exact distance between two atomic measures.
pub fn krov_atomic(mu: &ParticleEnsemble, nu: &ParticleEnsemble) -> Result<f64> {
    krov_atomic_with_capacity(mu, nu, KROV_CAPACITY)
}

pub fn krov_atomic_with_capacity(
    mu: &ParticleEnsemble,
    nu: &ParticleEnsemble,
    capacity: usize,
) -> Result<f64> {
    let mu = mu.clone().merged();
    let nu = nu.clone().merged();
    let atoms = mu.len() + nu.len();
    if atoms > capacity {
        return Err(Error::Capacity { atoms, capacity });
    }
    if nu.len() == 1 {
        return Ok(krov_to_delta(&mu, &nu.atoms()[0].state));
    }
    if mu.len() == 1 {
        return Ok(krov_to_delta(&nu, &mu.atoms()[0].state));
    }
    let a: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let b: Vec<f64> = nu.atoms().iter().map(|a| a.weight).collect();
    let cost: Vec<Vec<f64>> = mu
        .atoms()
        .iter()
        .map(|x| nu.atoms().iter().map(|y| x.state.l1(&y.state)).collect())
        .collect();
    // Symmetrize the orientation so swapping the arguments runs the same solve.
    let forward = transport(&a, &b, &cost)?;
    let ct: Vec<Vec<f64>> = (0..b.len())
        .map(|j| (0..a.len()).map(|i| cost[i][j]).collect())
        .collect();
    let backward = transport(&b, &a, &ct)?;
    Ok(forward.min(backward))
}

/// Minimum-cost transport by successive shortest paths with potentials.
pub(crate) fn transport(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    let m = b.len();
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![vec![0.0; m]; n];
    let mut pot_u = vec![0.0; n];
    let mut pot_v = vec![0.0; m];
    let max_rounds = 4 * (n + m) * (n + m) + 16;

    for _ in 0..max_rounds {
        if supply.iter().all(|s| *s <= FLOW_EPS) {
            break;
        }
        // Dense Dijkstra over the residual graph; nodes 0..n are sources,
        // n..n+m sinks.
        let mut dist = vec![f64::INFINITY; n + m];
        let mut prev = vec![usize::MAX; n + m];
        let mut done = vec![false; n + m];
        for i in 0..n {
            if supply[i] > FLOW_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for (v, d) in dist.iter().enumerate() {
                if !done[v] && *d < best_d {
                    best_d = *d;
                    best = v;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            if best >= n {
                let j = best - n;
                if demand[j] > FLOW_EPS {
                    target = Some(j);
                    break;
                }
                for i in 0..n {
                    if flow[i][j] > FLOW_EPS && !done[i] {
                        let rc = (-cost[i][j] + pot_v[j] - pot_u[i]).max(0.0);
                        if best_d + rc < dist[i] {
                            dist[i] = best_d + rc;
                            prev[i] = best;
                        }
                    }
                }
            } else {
                let i = best;
                for j in 0..m {
                    let v = n + j;
                    if !done[v] {
                        let rc = (cost[i][j] + pot_u[i] - pot_v[j]).max(0.0);
                        if best_d + rc < dist[v] {
                            dist[v] = best_d + rc;
                            prev[v] = i;
                        }
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let dt = dist[n + t];
        for i in 0..n {
            pot_u[i] += dist[i].min(dt);
        }
        for j in 0..m {
            pot_v[j] += dist[n + j].min(dt);
        }
        // Walk back to find the bottleneck.
        let mut bottleneck = demand[t];
        let mut v = n + t;
        let mut path = Vec::new();
        loop {
            let p = prev[v];
            if p == usize::MAX {
                bottleneck = bottleneck.min(supply[v]);
                break;
            }
            path.push((p, v));
            if v < n {
                // Backward edge sink p -> source v cancels flow[v][p - n].
                bottleneck = bottleneck.min(flow[v][p - n]);
            }
            v = p;
        }
        let source = v;
        for (p, v) in path {
            if v >= n {
                flow[p][v - n] += bottleneck;
            } else {
                flow[v][p - n] -= bottleneck;
            }
        }
        supply[source] -= bottleneck;
        demand[t] -= bottleneck;
    }
    if supply.iter().any(|s| *s > 1e-9) {
        return Err(Error::NumericalFailure {
            what: "transport solver did not saturate the supply".into(),
            time: f64::NAN,
            residual: supply.iter().sum(),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += flow[i][j] * cost[i][j];
        }
    }
    Ok(total)
}

/// Distance from a lattice measure (on scaled counts `n / N`) to a point
/// mass; the coupling is forced, so only the class marginals matter.
pub fn krov_lattice_to_delta(mu: &MarginalLattice, x: &TriangleState) -> f64 {
    let n = mu.n() as f64;
    let xs = x.to_array();
    (0..5)
        .map(|c| {
            mu.class_marginal(c)
                .iter()
                .enumerate()
                .map(|(k, p)| p * (k as f64 / n - xs[c]).abs())
                .sum::<f64>()
        })
        .sum()
}

/// `∫ |F - G|` for two distributions on the real line given as atoms.
pub(crate) fn w1_line(p: &[(f64, f64)], q: &[(f64, f64)]) -> f64 {
    let mut pts: Vec<(f64, f64)> = p.to_vec();
    pts.extend(q.iter().map(|(x, w)| (*x, -w)));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for k in 0..pts.len() {
        diff += pts[k].1;
        if k + 1 < pts.len() {
            total += diff.abs() * (pts[k + 1].0 - pts[k].0);
        }
    }
    total
}

/// Sum over the five classes of the one-dimensional distance between the
/// ensemble's and the lattice's marginals on the scaled axis `n / N`.
///
/// A lower bound on the full five-dimensional transport distance that is
/// cheap for large supports.
pub fn marginal_w1(ens: &ParticleEnsemble, mu: &MarginalLattice) -> f64 {
    let n = mu.n() as f64;
    (0..5)
        .map(|c| {
            let p: Vec<(f64, f64)> = ens
                .atoms()
                .iter()
                .map(|a| (a.state.to_array()[c], a.weight))
                .collect();
            let q: Vec<(f64, f64)> = mu
                .class_marginal(c)
                .into_iter()
                .enumerate()
                .filter(|(_, w)| *w > 0.0)
                .map(|(k, w)| (k as f64 / n, w))
                .collect();
            w1_line(&p, &q)
        })
        .sum()
}
