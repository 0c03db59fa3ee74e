//! Exact `W_Λ` with Hamming cost on `{0,1}^Λ`.
//!
//! The Hamming metric is the graph distance of the hypercube, so optimal
//! transport reduces to an uncapacitated min-cost flow with unit edge costs on
//! `|Λ| 2^{|Λ|}` arcs. Successive shortest paths keep integer node
//! potentials; at termination they are 1-Lipschitz and reproduce the primal
//! cost, which certifies optimality.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};

pub const MAX_TRANSPORT_SITES: usize = 8;
const MASS_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Serialize)]
pub struct TransportSolution {
    pub cost: f64,
    /// `Σ_η φ(η) (ν(η) - μ(η))` for the final potentials.
    pub dual_value: f64,
    /// Kantorovich potential; `|φ(η) - φ(η')| ≤ 1` for Hamming neighbours.
    pub potentials: Vec<i64>,
}

impl TransportSolution {
    pub fn duality_gap(&self) -> f64 {
        (self.cost - self.dual_value).abs()
    }

    pub fn potentials_lipschitz(&self) -> bool {
        let n = self.potentials.len().trailing_zeros();
        (0..self.potentials.len()).all(|u| {
            (0..n).all(|b| (self.potentials[u] - self.potentials[u ^ (1 << b)]).abs() <= 1)
        })
    }
}

fn sites_of(mu: &[f64], nu: &[f64]) -> Result<usize> {
    if mu.len() != nu.len() {
        return Err(invalid!("distributions over different state spaces"));
    }
    if mu.is_empty() || !mu.len().is_power_of_two() {
        return Err(invalid!("state space of size {} is not {{0,1}}^Λ", mu.len()));
    }
    let n = mu.len().trailing_zeros() as usize;
    if n > MAX_TRANSPORT_SITES {
        return Err(Error::ResourceLimit(format!(
            "|Λ| = {n} exceeds the transport cap of {MAX_TRANSPORT_SITES}"
        )));
    }
    for p in [mu, nu] {
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(invalid!("negative or non-finite mass"));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(invalid!("mass sums to {s}"));
        }
    }
    Ok(n)
}

/// `W_Λ(μ, ν)` for laws on `{0,1}^Λ` indexed by bitmask.
pub fn exact_wasserstein(mu: &[f64], nu: &[f64]) -> Result<f64> {
    Ok(wasserstein_with_potentials(mu, nu)?.cost)
}

pub fn wasserstein_with_potentials(mu: &[f64], nu: &[f64]) -> Result<TransportSolution> {
    let n = sites_of(mu, nu)?;
    let states = mu.len();
    // balance > 0: mass to send; < 0: mass to receive
    let mut balance: Vec<f64> = mu.iter().zip(nu).map(|(a, b)| a - b).collect();
    // flow[u * n + b] on the arc u -> u ^ (1 << b)
    let mut flow = vec![0.0f64; states * n.max(1)];
    let mut pot = vec![0i64; states];
    let mut dist = vec![i64::MAX; states];
    // (predecessor, bit, used a reverse arc)
    let mut pred: Vec<Option<(usize, usize, bool)>> = vec![None; states];
    let mut heap = BinaryHeap::new();

    let mut cost = 0.0;
    for _round in 0..8 * states * (n + 2) {
        if balance.iter().all(|b| b.abs() <= MASS_EPS) {
            break;
        }
        dist.fill(i64::MAX);
        pred.fill(None);
        heap.clear();
        for (u, &b) in balance.iter().enumerate() {
            if b > MASS_EPS {
                dist[u] = 0;
                heap.push(Reverse((0i64, u)));
            }
        }
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for b in 0..n {
                let v = u ^ (1 << b);
                // forward arc, cost 1, unbounded
                let rc = 1 + pot[u] - pot[v];
                debug_assert!(rc >= 0);
                if d + rc < dist[v] {
                    dist[v] = d + rc;
                    pred[v] = Some((u, b, false));
                    heap.push(Reverse((dist[v], v)));
                }
                // cancel flow on v -> u, cost -1
                if flow[v * n + b] > MASS_EPS {
                    let rc = -1 + pot[u] - pot[v];
                    debug_assert!(rc >= 0);
                    if d + rc < dist[v] {
                        dist[v] = d + rc;
                        pred[v] = Some((u, b, true));
                        heap.push(Reverse((dist[v], v)));
                    }
                }
            }
        }
        let sink = (0..states)
            .filter(|&v| balance[v] < -MASS_EPS)
            .min_by_key(|&v| (dist[v], v))
            .ok_or_else(|| Error::Invariant("transport: unbalanced masses".into()))?;

        let mut amount = -balance[sink];
        let mut v = sink;
        while let Some((u, b, rev)) = pred[v] {
            if rev {
                amount = amount.min(flow[v * n + b]);
            }
            v = u;
        }
        let source = v;
        amount = amount.min(balance[source]);

        let mut v = sink;
        while let Some((u, b, rev)) = pred[v] {
            if rev {
                flow[v * n + b] -= amount;
                cost -= amount;
            } else {
                flow[u * n + b] += amount;
                cost += amount;
            }
            v = u;
        }
        balance[source] -= amount;
        balance[sink] += amount;
        for (p, &d) in pot.iter_mut().zip(&dist) {
            *p += d;
        }
    }
    if balance.iter().any(|b| b.abs() > 1e-12) {
        return Err(Error::Invariant("transport did not terminate".into()));
    }
    let dual_value = pot
        .iter()
        .enumerate()
        .map(|(i, &p)| p as f64 * (nu[i] - mu[i]))
        .sum();
    Ok(TransportSolution {
        cost,
        dual_value,
        potentials: pot,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn product(ps: &[f64]) -> Vec<f64> {
        (0..1usize << ps.len())
            .map(|s| {
                ps.iter()
                    .enumerate()
                    .map(|(i, &p)| if s >> i & 1 == 1 { p } else { 1.0 - p })
                    .product()
            })
            .collect()
    }

    fn normalized(w: Vec<f64>) -> Vec<f64> {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn point_masses_cost_hamming() {
        let mut mu = vec![0.0; 16];
        let mut nu = vec![0.0; 16];
        mu[0b0000] = 1.0;
        nu[0b1011] = 1.0;
        assert_eq!(exact_wasserstein(&mu, &nu).unwrap(), 3.0);
    }

    #[test]
    fn one_site_closed_form() {
        let w = exact_wasserstein(&[0.7, 0.3], &[0.2, 0.8]).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_measures_add_per_site() {
        let a = [0.1f64, 0.5, 0.9, 0.3];
        let b = [0.4, 0.5, 0.2, 0.35];
        let want: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        let sol = wasserstein_with_potentials(&product(&a), &product(&b)).unwrap();
        assert!((sol.cost - want).abs() < 1e-12);
        assert!(sol.duality_gap() < 1e-12);
        assert!(sol.potentials_lipschitz());
    }

    #[test]
    fn size_cap() {
        let mu = vec![1.0 / 512.0; 512];
        assert!(matches!(exact_wasserstein(&mu, &mu), Err(Error::ResourceLimit(_))));
        assert!(exact_wasserstein(&[0.5, 0.5], &[0.25; 4]).is_err());
    }

    proptest! {
        #[test]
        fn certificate_holds(w1 in proptest::collection::vec(0.0f64..1.0, 32),
                             w2 in proptest::collection::vec(0.0f64..1.0, 32)) {
            prop_assume!(w1.iter().sum::<f64>() > 0.1 && w2.iter().sum::<f64>() > 0.1);
            let (mu, nu) = (normalized(w1), normalized(w2));
            let sol = wasserstein_with_potentials(&mu, &nu).unwrap();
            prop_assert!(sol.duality_gap() < 1e-12, "gap {}", sol.duality_gap());
            prop_assert!(sol.potentials_lipschitz());
            prop_assert!(sol.cost <= 5.0 + 1e-12);
            let back = exact_wasserstein(&nu, &mu).unwrap();
            prop_assert!((back - sol.cost).abs() < 1e-12);
        }
    }
}
